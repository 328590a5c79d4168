use lukars::bayes::SliceBasis;
use lukars::model::{step, CatchmentMeta, ModelState, MM};
use lukars::params::{check_constraints, to_calibration, to_physical, CalibrationVector, PriorSpec, N_PARAMS};
use lukars::subspace::{c_matrix_from_gradients, decompose, global_sensitivities, misfit_gradient};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn calibration() -> impl Strategy<Value = CalibrationVector> {
    prop::array::uniform21(-1.0f64..=1.0).prop_map(CalibrationVector)
}

fn state() -> impl Strategy<Value = ModelState> {
    (prop::array::uniform3(0.0f64..400.0), 0.0f64..500.0, prop::array::uniform3(any::<bool>())).prop_map(
        |(levels, baseflow_level, active)| ModelState {
            levels,
            baseflow_level,
            active,
        },
    )
}

fn orthonormal(n: usize, seed: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| seed[(i * n + j) % seed.len()] + 0.1 * ((i * 7 + j * 3) as f64).sin()).qr().q()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn storages_and_fluxes_stay_non_negative(
        x in calibration(),
        s in state(),
        source in prop::array::uniform3(-30.0f64..120.0),
    ) {
        let p = to_physical(&x, &PriorSpec::kerschbaum()).unwrap();
        let meta = CatchmentMeta::synthetic_default();
        let (next, fx) = step(&s, &source, &p, &meta);
        prop_assert!(next.levels.iter().all(|v| *v >= 0.0));
        prop_assert!(next.baseflow_level >= 0.0);
        for i in 0..3 {
            prop_assert!(fx.q_hyd[i] >= 0.0 && fx.q_is[i] >= 0.0 && fx.q_sec[i] >= 0.0);
        }
        prop_assert!(fx.q_b >= 0.0);
    }

    #[test]
    fn unclipped_steps_balance_exactly(x in calibration(), s in state(), source in prop::array::uniform3(0.0f64..60.0)) {
        let p = to_physical(&x, &PriorSpec::kerschbaum()).unwrap();
        let meta = CatchmentMeta::synthetic_default();
        let (next, fx) = step(&s, &source, &p, &meta);
        for i in 0..3 {
            let out = (fx.q_hyd[i] + fx.q_is[i] + fx.q_sec[i]) / (meta.areas[i] * MM);
            let raw = s.levels[i] + source[i] - out;
            if raw > 0.0 {
                prop_assert!((next.levels[i] - s.levels[i] - (source[i] - out)).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn coupled_parameters_satisfy_the_ordering(x in calibration()) {
        let prior = PriorSpec::kerschbaum();
        let p = to_physical(&x, &prior).unwrap();
        prop_assert!(check_constraints(&p).is_empty());
        let back = to_calibration(&p, &prior).unwrap();
        for j in 0..N_PARAMS {
            prop_assert!((back.0[j] - x.0[j]).abs() < 1e-8, "coordinate {}", j);
        }
    }

    #[test]
    fn lift_reconstructs_the_parameter_vector(
        seed in prop::collection::vec(-1.0f64..1.0, 21),
        x0 in prop::collection::vec(-1.0f64..1.0, 6),
        k in 1usize..6,
    ) {
        let w = orthonormal(6, &seed);
        let basis = SliceBasis::from_parts(w.columns(0, k).into_owned(), w.columns(k, 6 - k).into_owned()).unwrap();
        let x = DVector::from_column_slice(&x0);
        let y = basis.w1.tr_mul(&x);
        let z = basis.w2.tr_mul(&x);
        let back = basis.lift(y.as_slice(), z.as_slice()).unwrap();
        for (a, b) in back.iter().zip(&x0) {
            prop_assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn leading_eigenvector_maximises_the_rayleigh_quotient(
        grads in prop::collection::vec(prop::collection::vec(-5.0f64..5.0, 5), 12),
        u in prop::collection::vec(-1.0f64..1.0, 5),
    ) {
        let rows: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let c = c_matrix_from_gradients(&rows).unwrap();
        let d = decompose(&c, 2).unwrap();
        let v1 = d.eigenvectors.column(0).into_owned();
        let u = DVector::from_vec(u);
        prop_assume!(u.norm() > 1e-3);
        let u = u.normalize();
        let top = (v1.transpose() * &c * &v1)[0];
        prop_assert!(top >= (u.transpose() * &c * &u)[0] - 1e-9 * top.abs().max(1.0));
        let wtw = d.eigenvectors.transpose() * &d.eigenvectors - DMatrix::identity(5, 5);
        prop_assert!(wtw.amax() < 1e-10);
        prop_assert!(*d.eigenvalues.last().unwrap() >= -1e-10 * d.eigenvalues[0]);
    }

    #[test]
    fn full_sensitivities_sum_to_the_trace(grads in prop::collection::vec(prop::collection::vec(-3.0f64..3.0, 4), 8)) {
        let rows: Vec<&[f64]> = grads.iter().map(Vec::as_slice).collect();
        let d = decompose(&c_matrix_from_gradients(&rows).unwrap(), 1).unwrap();
        let s = global_sensitivities(&d.eigenvalues, &d.eigenvectors, 4).unwrap();
        let total: f64 = d.eigenvalues.iter().sum();
        prop_assert!((s.raw.iter().sum::<f64>() - total).abs() <= 1e-10 * total.abs().max(1.0));
    }

    #[test]
    fn finite_differences_match_quadratic_gradients(
        a in prop::collection::vec(-2.0f64..2.0, 16),
        b in prop::collection::vec(-1.0f64..1.0, 4),
        x in prop::collection::vec(-0.99f64..0.99, 4),
    ) {
        let m = DMatrix::from_column_slice(4, 4, &a);
        let q = &m + m.transpose();
        let bv = DVector::from_vec(b);
        let f = |v: &[f64]| {
            let v = DVector::from_column_slice(v);
            0.5 * (v.transpose() * &q * &v)[0] + bv.dot(&v)
        };
        let g = misfit_gradient(&x, &f, 1e-4).unwrap();
        let exact = &q * DVector::from_column_slice(&x) + &bv;
        for j in 0..4 {
            prop_assert!((g.g[j] - exact[j]).abs() <= 1e-6 * exact.norm().max(1.0));
        }
    }
}
