use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::TargetModel;
use crate::error::{Error, Result};
use crate::math::LN_2PI;

/// Bayesian logistic regression with a standard-normal prior on the
/// coefficients. The design matrix carries a leading intercept column of
/// ones, so `dim = features + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticRegression {
    /// Row-major `n × dim` augmented design matrix.
    design: Vec<f64>,
    labels: Vec<f64>,
    dim: usize,
}

fn softplus(v: f64) -> f64 {
    if v > 0.0 {
        v + (-v).exp().ln_1p()
    } else {
        v.exp().ln_1p()
    }
}

fn sigmoid(v: f64) -> f64 {
    if v >= 0.0 {
        1.0 / (1.0 + (-v).exp())
    } else {
        let e = v.exp();
        e / (1.0 + e)
    }
}

impl LogisticRegression {
    /// Builds the model from raw (already standardized) feature rows and
    /// binary labels; the intercept column is prepended here.
    pub fn new(features: Vec<Vec<f64>>, labels: Vec<f64>) -> Result<Self> {
        if features.is_empty() || features.len() != labels.len() {
            return Err(Error::Config(format!(
                "need matching non-empty features and labels, got {} rows and {} labels",
                features.len(),
                labels.len()
            )));
        }
        let p = features[0].len();
        let dim = p + 1;
        let mut design = Vec::with_capacity(features.len() * dim);
        for row in &features {
            if row.len() != p {
                return Err(Error::DimensionMismatch { expected: p, got: row.len() });
            }
            design.push(1.0);
            design.extend_from_slice(row);
        }
        if let Some(bad) = labels.iter().find(|&&y| y != 0.0 && y != 1.0) {
            return Err(Error::Config(format!("labels must be 0 or 1, found {bad}")));
        }
        Ok(Self { design, labels, dim })
    }

    /// Loads a CSV with a header row whose final column is the `{0,1}` label.
    /// Features are z-standardized (population standard deviation; constant
    /// columns are only centered).
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new().has_headers(true).from_path(path)?;
        let mut features = Vec::new();
        let mut labels = Vec::new();
        for record in reader.records() {
            let record = record?;
            let values = record
                .iter()
                .map(|s| s.trim().parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| Error::Config(format!("non-numeric CSV entry: {e}")))?;
            let (label, row) = values
                .split_last()
                .ok_or_else(|| Error::Config("empty CSV row".into()))?;
            labels.push(*label);
            features.push(row.to_vec());
        }
        standardize(&mut features);
        Self::new(features, labels)
    }

    /// Synthetic dataset: standardized Gaussian features and labels drawn
    /// from a logistic model with coefficients `N(0, I)`.
    pub fn synthetic(rows: usize, features: usize, seed: u64) -> Result<Self> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let beta: Vec<f64> = (0..=features).map(|_| StandardNormal.sample(&mut rng)).collect();
        let mut xs: Vec<Vec<f64>> = (0..rows)
            .map(|_| (0..features).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        standardize(&mut xs);
        let labels = xs
            .iter()
            .map(|row| {
                let eta = beta[0] + row.iter().zip(&beta[1..]).map(|(a, b)| a * b).sum::<f64>();
                let u: f64 = rand::Rng::random(&mut rng);
                if u < sigmoid(eta) {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        Self::new(xs, labels)
    }

    pub fn rows(&self) -> usize {
        self.labels.len()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.design[i * self.dim..(i + 1) * self.dim]
    }
}

fn standardize(rows: &mut [Vec<f64>]) {
    if rows.is_empty() {
        return;
    }
    let n = rows.len() as f64;
    for j in 0..rows[0].len() {
        let mean = rows.iter().map(|r| r[j]).sum::<f64>() / n;
        let var = rows.iter().map(|r| (r[j] - mean).powi(2)).sum::<f64>() / n;
        let sd = if var > 0.0 { var.sqrt() } else { 1.0 };
        for r in rows.iter_mut() {
            r[j] = (r[j] - mean) / sd;
        }
    }
}

impl TargetModel for LogisticRegression {
    fn dim(&self) -> usize {
        self.dim
    }

    fn log_density(&self, beta: &[f64]) -> f64 {
        let prior = -0.5 * beta.iter().map(|b| b * b).sum::<f64>() - 0.5 * self.dim as f64 * LN_2PI;
        let lik: f64 = (0..self.rows())
            .map(|i| {
                let eta: f64 = self.row(i).iter().zip(beta).map(|(a, b)| a * b).sum();
                self.labels[i] * eta - softplus(eta)
            })
            .sum();
        super::sanitize_log_density(prior + lik)
    }

    fn grad_log_density(&self, beta: &[f64], grad: &mut [f64]) {
        for (g, b) in grad.iter_mut().zip(beta) {
            *g = -b;
        }
        for i in 0..self.rows() {
            let row = self.row(i);
            let eta: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let resid = self.labels[i] - sigmoid(eta);
            for (g, a) in grad.iter_mut().zip(row) {
                *g += a * resid;
            }
        }
    }

    fn name(&self) -> String {
        format!("logistic(d={}, n={})", self.dim, self.rows())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn csv_loader_standardizes_and_augments() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "f1,f2,label").unwrap();
        writeln!(file, "1.0,10,0").unwrap();
        writeln!(file, "2.0,10,1").unwrap();
        writeln!(file, "3.0,10,1").unwrap();
        let model = LogisticRegression::from_csv(file.path()).unwrap();
        assert_eq!(model.dim(), 3);
        assert_eq!(model.rows(), 3);
        let sd = (2.0f64 / 3.0).sqrt();
        assert_eq!(model.row(0)[0], 1.0);
        assert!((model.row(0)[1] + 1.0 / sd).abs() < 1e-12);
        assert_eq!(model.row(2)[2], 0.0);
    }

    #[test]
    fn rejects_non_binary_labels() {
        assert!(LogisticRegression::new(vec![vec![1.0]], vec![2.0]).is_err());
    }

    #[test]
    fn zero_coefficients_give_log_half_likelihood() {
        let model = LogisticRegression::synthetic(50, 3, 7).unwrap();
        let beta = vec![0.0; 4];
        let expected = -(50.0) * 2f64.ln() - 2.0 * LN_2PI;
        assert!((model.log_density(&beta) - expected).abs() < 1e-10);
    }
}
