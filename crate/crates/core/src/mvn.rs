//! Multivariate normal distributions: prior densities, block proposals, and
//! the independence proposals of the model-selection sampler.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Dense symmetric matrix stored row-major as nested vectors (the serialized form).
pub type Matrix = Vec<Vec<f64>>;

pub fn diag(d: usize, v: f64) -> Matrix {
    (0..d)
        .map(|i| (0..d).map(|j| if i == j { v } else { 0.0 }).collect())
        .collect()
}

pub fn diag_from(values: &[f64]) -> Matrix {
    let d = values.len();
    (0..d)
        .map(|i| {
            (0..d)
                .map(|j| if i == j { values[i] } else { 0.0 })
                .collect()
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct MvNormal {
    mean: Vec<f64>,
    cov: Matrix,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl MvNormal {
    pub fn new(mean: Vec<f64>, cov: Matrix) -> Result<Self> {
        let d = mean.len();
        if d == 0 {
            return Err(Error::Dimension {
                expected: 1,
                got: 0,
            });
        }
        if cov.len() != d {
            return Err(Error::Dimension {
                expected: d,
                got: cov.len(),
            });
        }
        for row in &cov {
            if row.len() != d {
                return Err(Error::Dimension {
                    expected: d,
                    got: row.len(),
                });
            }
        }
        for i in 0..d {
            for j in 0..i {
                let (a, b) = (cov[i][j], cov[j][i]);
                if (a - b).abs() > 1e-10 * (1.0 + a.abs().max(b.abs())) {
                    return Err(Error::NotPositiveDefinite(format!(
                        "entry ({}, {}) = {a} differs from ({}, {}) = {b}",
                        i + 1,
                        j + 1,
                        j + 1,
                        i + 1
                    )));
                }
            }
        }
        if cov.iter().flatten().any(|v| !v.is_finite()) || mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::NotPositiveDefinite("non-finite entry".into()));
        }
        let m = DMatrix::from_fn(d, d, |i, j| cov[i][j]);
        let chol = m
            .cholesky()
            .ok_or_else(|| Error::NotPositiveDefinite("Cholesky factorization failed".into()))?
            .unpack();
        let log_det: f64 = 2.0 * chol.diagonal().iter().map(|v| v.ln()).sum::<f64>();
        Ok(MvNormal {
            log_norm: -0.5 * (d as f64 * LN_2PI + log_det),
            mean,
            cov,
            chol,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn cov(&self) -> &Matrix {
        &self.cov
    }

    /// Draw `center + L z`, i.e. from N(center, Σ), ignoring the stored mean.
    pub fn sample_around<R: Rng + ?Sized>(&self, center: &[f64], rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let z: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        (0..d)
            .map(|i| center[i] + (0..=i).map(|k| self.chol[(i, k)] * z[k]).sum::<f64>())
            .collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.sample_around(&self.mean.clone(), rng)
    }

    pub fn log_density(&self, x: &[f64]) -> f64 {
        let d = self.dim();
        let diff = DVector::from_fn(d, |i, _| x[i] - self.mean[i]);
        let y = self
            .chol
            .solve_lower_triangular(&diff)
            .expect("Cholesky factor has a positive diagonal");
        self.log_norm - 0.5 * y.norm_squared()
    }
}

/// Multivariate normal prior on the model parameters.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(try_from = "PriorRepr", into = "PriorRepr")]
pub struct Prior {
    dist: MvNormal,
}

#[derive(Serialize, Deserialize)]
struct PriorRepr {
    mean: Vec<f64>,
    covariance: Matrix,
}

impl TryFrom<PriorRepr> for Prior {
    type Error = Error;
    fn try_from(r: PriorRepr) -> Result<Self> {
        Prior::new(r.mean, r.covariance)
    }
}

impl From<Prior> for PriorRepr {
    fn from(p: Prior) -> Self {
        PriorRepr {
            mean: p.dist.mean,
            covariance: p.dist.cov,
        }
    }
}

impl Prior {
    pub fn new(mean: Vec<f64>, covariance: Matrix) -> Result<Self> {
        Ok(Prior {
            dist: MvNormal::new(mean, covariance)?,
        })
    }

    /// Independent normals with the given means and standard deviations.
    pub fn independent(mean: Vec<f64>, sd: &[f64]) -> Result<Self> {
        let var: Vec<f64> = sd.iter().map(|s| s * s).collect();
        Prior::new(mean, diag_from(&var))
    }

    /// Default vague prior: N(0, 10^2) independently per coordinate.
    pub fn vague(d: usize) -> Self {
        Prior::independent(vec![0.0; d], &vec![10.0; d]).expect("diagonal prior is valid")
    }

    pub fn dim(&self) -> usize {
        self.dist.dim()
    }

    pub fn mean(&self) -> &[f64] {
        self.dist.mean()
    }

    pub fn covariance(&self) -> &Matrix {
        self.dist.cov()
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        self.dist.log_density(theta)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    #[test]
    fn log_density_standard_normal() {
        let p = Prior::independent(vec![0.0], &[1.0]).unwrap();
        assert!((p.log_density(&[0.0]) + 0.5 * LN_2PI).abs() < 1e-14);
        assert!((p.log_density(&[1.0]) - p.log_density(&[0.0]) + 0.5).abs() < 1e-14);
    }

    #[test]
    fn log_density_correlated_matches_closed_form() {
        let rho: f64 = 0.6;
        let n = MvNormal::new(vec![1.0, -1.0], vec![vec![1.0, rho], vec![rho, 1.0]]).unwrap();
        let (x, y) = (0.3_f64 - 1.0, 0.7_f64 + 1.0);
        let q = (x * x - 2.0 * rho * x * y + y * y) / (1.0 - rho * rho);
        let expected = -LN_2PI - 0.5 * (1.0 - rho * rho).ln() - 0.5 * q;
        assert!((n.log_density(&[0.3, 0.7]) - expected).abs() < 1e-12);
    }

    #[test]
    fn rejects_non_pd() {
        assert!(matches!(
            MvNormal::new(vec![0.0, 0.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(MvNormal::new(vec![0.0, 0.0], vec![vec![1.0, 0.5], vec![0.4, 1.0]]).is_err());
        assert!(MvNormal::new(vec![0.0], vec![vec![0.0]]).is_err());
        assert!(MvNormal::new(vec![0.0, 0.0], diag(3, 1.0)).is_err());
    }

    #[test]
    fn sample_moments_correlated() {
        let cov = vec![vec![2.0, 0.8], vec![0.8, 1.0]];
        let n = MvNormal::new(vec![1.0, 2.0], cov.clone()).unwrap();
        let mut rng = stream(3, &[]);
        let m = 100_000;
        let xs: Vec<Vec<f64>> = (0..m).map(|_| n.sample(&mut rng)).collect();
        let mean: Vec<f64> = (0..2)
            .map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / m as f64)
            .collect();
        assert!((mean[0] - 1.0).abs() < 0.02 && (mean[1] - 2.0).abs() < 0.02);
        let c01 = xs
            .iter()
            .map(|x| (x[0] - mean[0]) * (x[1] - mean[1]))
            .sum::<f64>()
            / (m - 1) as f64;
        assert!((c01 - 0.8).abs() < 0.03);
    }

    #[test]
    fn prior_serde_round_trip() {
        let p = Prior::independent(vec![0.5, -1.0], &[2.0, 3.0]).unwrap();
        let s = serde_json::to_string(&p).unwrap();
        let q: Prior = serde_json::from_str(&s).unwrap();
        assert_eq!(q.mean(), p.mean());
        assert_eq!(q.covariance(), p.covariance());
        assert!(serde_json::from_str::<Prior>(r#"{"mean":[0],"covariance":[[-1]]}"#).is_err());
    }
}
