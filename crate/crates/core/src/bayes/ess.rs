use crate::error::{Error, Result};

/// Shortest chain for which an effective sample size is reported.
pub const MIN_CHAIN_LENGTH: usize = 100;
/// Autocorrelation sums stop at the first lag below this value.
pub const ACF_CUTOFF: f64 = 0.05;

/// Autocorrelations `r_1, ..., r_J` of one component, stopping at the first
/// lag with `r_j < 0.05` (included) or at `len / 50`.
pub fn autocorrelations(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let max_lag = (n / 50).max(1);
    let mean = series.iter().sum::<f64>() / n as f64;
    let centred: Vec<f64> = series.iter().map(|v| v - mean).collect();
    let c0: f64 = centred.iter().map(|v| v * v).sum::<f64>() / n as f64;
    let mut out = Vec::new();
    for lag in 1..=max_lag {
        let r = if c0 > 0.0 {
            centred[..n - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / n as f64 / c0
        } else {
            // a constant chain carries no new information
            1.0
        };
        out.push(r);
        if r < ACF_CUTOFF {
            break;
        }
    }
    out
}

/// `N / (1 + 2 Σ r_j)` for one component.
pub fn component_ess(series: &[f64]) -> f64 {
    let s: f64 = autocorrelations(series).iter().sum();
    series.len() as f64 / (1.0 + 2.0 * s).max(1.0 / series.len() as f64)
}

/// Minimum over components of the per-component effective sample size.
pub fn effective_sample_size(states: &[Vec<f64>]) -> Result<f64> {
    if states.len() < MIN_CHAIN_LENGTH {
        return Err(Error::InvalidInput(format!(
            "chain of length {} is shorter than {MIN_CHAIN_LENGTH}",
            states.len()
        )));
    }
    let dim = states[0].len();
    Ok((0..dim)
        .map(|j| {
            let col: Vec<f64> = states.iter().map(|s| s[j]).collect();
            component_ess(&col)
        })
        .fold(f64::INFINITY, f64::min))
}

/// Keeps every `p`-th state with `p = floor(len / target)`, returning the
/// `target` retained states and the stride.
pub fn thin<T: Clone>(states: &[T], target: usize) -> Result<(Vec<T>, usize)> {
    if target == 0 || target > states.len() {
        return Err(Error::InvalidInput(format!(
            "cannot keep {target} of {} states",
            states.len()
        )));
    }
    let stride = states.len() / target;
    Ok(((0..target).map(|i| states[i * stride].clone()).collect(), stride))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    #[test]
    fn iid_chain_keeps_its_length() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let s: Vec<Vec<f64>> = (0..20_000).map(|_| vec![rng.sample(StandardNormal), rng.random()]).collect();
        let ess = effective_sample_size(&s).unwrap();
        assert!((ess - 20_000.0).abs() < 0.2 * 20_000.0, "{ess}");
    }

    #[test]
    fn constant_chain_is_worthless() {
        let s = vec![vec![1.5]; 10_000];
        let ess = effective_sample_size(&s).unwrap();
        assert!(ess < 0.05 * 10_000.0);
        assert!((ess - 10_000.0 / 401.0).abs() < 1e-9);
    }

    #[test]
    fn ar1_matches_closed_form() {
        let phi: f64 = 0.9;
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut v = 0.0;
        let n = 200_000;
        let s: Vec<Vec<f64>> = (0..n)
            .map(|_| {
                v = phi * v + (1.0 - phi * phi).sqrt() * rng.sample::<f64, _>(StandardNormal);
                vec![v]
            })
            .collect();
        let want = (1.0 - phi) / (1.0 + phi) * n as f64;
        let got = effective_sample_size(&s).unwrap();
        assert!((got - want).abs() < 0.3 * want, "{got} vs {want}");
    }

    #[test]
    fn thinning_strides() {
        let s: Vec<usize> = (0..900_000).collect();
        let (kept, stride) = thin(&s, 12_000).unwrap();
        assert_eq!(stride, 75);
        assert_eq!(kept.len(), 12_000);
        assert_eq!(kept[1], 75);
        let (same, one) = thin(&s[..10], 10).unwrap();
        assert_eq!((same, one), ((0..10).collect(), 1));
        assert!(thin(&s[..10], 11).is_err());
        assert!(effective_sample_size(&vec![vec![0.0]; 99]).is_err());
    }
}
