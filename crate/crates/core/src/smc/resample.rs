use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::math::{log_sum_exp, normalized_weights};

/// Resampling scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResamplingScheme {
    #[default]
    Systematic,
    Stratified,
    Multinomial,
}

/// Effective sample size `(Σw)² / Σw²` from log-weights. Errors with
/// [`Error::Collapse`] (step 0) if every weight is zero.
pub fn ess(log_weights: &[f64]) -> Result<f64> {
    let lse = log_sum_exp(log_weights);
    if lse == f64::NEG_INFINITY {
        return Err(Error::Collapse { step: 0 });
    }
    let doubled: Vec<f64> = log_weights.iter().map(|w| 2.0 * w).collect();
    let value = (2.0 * lse - log_sum_exp(&doubled)).exp();
    Ok(value.clamp(1.0, log_weights.len() as f64))
}

/// Draws `m` ancestor indices in `[0, N)` according to the normalized weights.
pub fn resample<R: Rng + ?Sized>(
    log_weights: &[f64],
    m: usize,
    scheme: ResamplingScheme,
    rng: &mut R,
) -> Result<Vec<usize>> {
    if log_sum_exp(log_weights) == f64::NEG_INFINITY {
        return Err(Error::Collapse { step: 0 });
    }
    let w = normalized_weights(log_weights);
    let mut cumulative = Vec::with_capacity(w.len());
    let mut acc = 0.0;
    for wi in &w {
        acc += wi;
        cumulative.push(acc);
    }
    // Guard against roundoff leaving the last cumulative weight below 1.
    if let Some(last) = cumulative.last_mut() {
        *last = f64::INFINITY;
    }
    let last_positive = w.iter().rposition(|&wi| wi > 0.0).unwrap_or(0);

    let mut points: Vec<f64> = match scheme {
        ResamplingScheme::Systematic => {
            let u: f64 = rng.random::<f64>();
            (0..m).map(|i| (i as f64 + u) / m as f64).collect()
        }
        ResamplingScheme::Stratified => (0..m).map(|i| (i as f64 + rng.random::<f64>()) / m as f64).collect(),
        ResamplingScheme::Multinomial => {
            let mut p: Vec<f64> = (0..m).map(|_| rng.random::<f64>()).collect();
            p.sort_by(f64::total_cmp);
            p
        }
    };
    let mut out = Vec::with_capacity(m);
    let mut j = 0;
    for p in points.drain(..) {
        while j < cumulative.len() - 1 && cumulative[j] <= p {
            j += 1;
        }
        // A zero-weight particle can only be hit through roundoff; move on to
        // the next positive one.
        let mut k = j;
        while w[k] == 0.0 && k < last_positive {
            k += 1;
        }
        if w[k] == 0.0 {
            k = last_positive;
        }
        out.push(k);
    }
    if scheme == ResamplingScheme::Multinomial {
        // sorted uniforms produce sorted ancestors; shuffle back to i.i.d. order
        for i in (1..out.len()).rev() {
            let k = rng.random_range(0..=i);
            out.swap(i, k);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn ess_examples() {
        assert!((ess(&[0.0; 8]).unwrap() - 8.0).abs() < 1e-12);
        let ninf = f64::NEG_INFINITY;
        assert!((ess(&[0.0, ninf, ninf]).unwrap() - 1.0).abs() < 1e-12);
        let two = 2f64.ln();
        assert!((ess(&[two, two, ninf, ninf]).unwrap() - 2.0).abs() < 1e-12);
        assert!(ess(&[ninf, ninf]).is_err());
    }

    #[test]
    fn one_hot_and_uniform() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let ninf = f64::NEG_INFINITY;
        for scheme in [
            ResamplingScheme::Systematic,
            ResamplingScheme::Stratified,
            ResamplingScheme::Multinomial,
        ] {
            assert_eq!(resample(&[0.0, ninf, ninf, ninf], 4, scheme, &mut rng).unwrap(), vec![0; 4]);
        }
        let mut idx = resample(&[0.0; 4], 4, ResamplingScheme::Systematic, &mut rng).unwrap();
        idx.sort();
        assert_eq!(idx, vec![0, 1, 2, 3]);
    }

    #[test]
    fn multinomial_counts_within_binomial_band() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let lw = [0.75f64.ln(), 0.25f64.ln()];
        let idx = resample(&lw, 4000, ResamplingScheme::Multinomial, &mut rng).unwrap();
        let zeros = idx.iter().filter(|&&i| i == 0).count() as f64;
        let sd = (4000.0f64 * 0.75 * 0.25).sqrt();
        assert!((zeros - 3000.0).abs() <= 3.0 * sd, "{zeros}");
    }

    #[test]
    fn collapse_is_an_error() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let ninf = f64::NEG_INFINITY;
        assert!(resample(&[ninf, ninf], 2, ResamplingScheme::Systematic, &mut rng).is_err());
    }
}
