//! Seeded draws of model parameters and data.
//!
//! Every draw comes from a ChaCha8 stream selected by `(base_seed,
//! stream_index)`, so a trial can be replayed in isolation. The generator
//! is part of the output contract: changing it changes every golden file.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp1, StandardNormal, StudentT};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::{GeneralLinearModel, HyperPoint};

pub const PRNG_NAME: &str = "chacha8";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedSpec {
    pub base_seed: u64,
    pub stream_index: u64,
}

impl SeedSpec {
    pub fn new(base_seed: u64, stream_index: u64) -> Self {
        SeedSpec {
            base_seed,
            stream_index,
        }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.base_seed);
        rng.set_stream(self.stream_index);
        rng
    }

    pub fn with_stream(&self, stream_index: u64) -> Self {
        SeedSpec {
            base_seed: self.base_seed,
            stream_index,
        }
    }
}

/// Tail family of a misspecified generator, standardized to unit variance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TailFamily {
    Gaussian,
    /// Student-t with `df > 2` degrees of freedom.
    StudentT(f64),
    Laplace,
}

impl FromStr for TailFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "gaussian" => return Ok(TailFamily::Gaussian),
            "laplace" => return Ok(TailFamily::Laplace),
            _ => {}
        }
        let df = s
            .strip_prefix("student_t(")
            .and_then(|rest| rest.strip_suffix(')'))
            .and_then(|x| x.trim().parse::<f64>().ok())
            .ok_or_else(|| Error::UnknownTag(s.to_string()))?;
        if !(df > 2.0 && df.is_finite()) {
            return Err(Error::Config(format!(
                "student_t needs df > 2 for a finite variance, got {df}"
            )));
        }
        Ok(TailFamily::StudentT(df))
    }
}

impl fmt::Display for TailFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TailFamily::Gaussian => write!(f, "gaussian"),
            TailFamily::StudentT(df) => write!(f, "student_t({df})"),
            TailFamily::Laplace => write!(f, "laplace"),
        }
    }
}

impl TailFamily {
    /// One zero-mean, unit-variance draw.
    pub fn standard_draw<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match *self {
            TailFamily::Gaussian => rng.sample(StandardNormal),
            TailFamily::StudentT(df) => {
                let t: f64 = StudentT::new(df).expect("df validated at parse").sample(rng);
                t * ((df - 2.0) / df).sqrt()
            }
            TailFamily::Laplace => {
                let e: f64 = rng.sample(Exp1);
                let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                sign * e * std::f64::consts::FRAC_1_SQRT_2
            }
        }
    }

    /// Excess-free kurtosis `E z^4` of the standardized family.
    pub fn kurtosis(&self) -> f64 {
        match *self {
            TailFamily::Gaussian => 3.0,
            TailFamily::StudentT(df) if df > 4.0 => 3.0 + 6.0 / (df - 4.0),
            TailFamily::StudentT(_) => f64::INFINITY,
            TailFamily::Laplace => 6.0,
        }
    }
}

fn standard_normal_vec<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    let mut v = DVector::zeros(n);
    for x in v.iter_mut() {
        *x = rng.sample(StandardNormal);
    }
    v
}

/// Prior draw: Gaussian on the range of `G` with coefficient variance
/// `1/(beta_a g_i)`, uniform of width `null_width` on its null space.
pub fn draw_model_params<R: Rng + ?Sized>(model: &GeneralLinearModel, beta_a: f64, null_width: f64, rng: &mut R) -> DVector<f64> {
    let range = model.g_range_indices();
    let vals = model.g_eigenvalues();
    let vecs = model.g_eigenvectors();
    let mut a = DVector::zeros(model.m());
    for i in 0..model.m() {
        let coef = if range.contains(&i) {
            let z: f64 = rng.sample(StandardNormal);
            z / (beta_a * vals[i]).sqrt()
        } else {
            let u: f64 = rng.random();
            (u - 0.5) * null_width
        };
        a += vecs.column(i) * coef;
    }
    a
}

/// `d = H a + noise` with noise covariance `E / beta_d`.
pub fn draw_data<R: Rng + ?Sized>(model: &GeneralLinearModel, a: &DVector<f64>, beta_d: f64, rng: &mut R) -> DVector<f64> {
    let z = standard_normal_vec(model.n(), rng);
    model.h() * a + model.e_cholesky().l() * z / beta_d.sqrt()
}

pub fn sample_model_params(model: &GeneralLinearModel, beta_a: f64, null_width: f64, seed: SeedSpec) -> Result<DVector<f64>> {
    if !(beta_a > 0.0 && beta_a.is_finite()) {
        return Err(Error::InvalidHyper(format!("beta_a = {beta_a}")));
    }
    if !(null_width >= 0.0 && null_width.is_finite()) {
        return Err(Error::Config(format!("null_width = {null_width}")));
    }
    Ok(draw_model_params(model, beta_a, null_width, &mut seed.rng()))
}

pub fn sample_data(model: &GeneralLinearModel, a: &DVector<f64>, beta_d: f64, seed: SeedSpec) -> Result<DVector<f64>> {
    if !(beta_d > 0.0 && beta_d.is_finite()) {
        return Err(Error::InvalidHyper(format!("beta_d = {beta_d}")));
    }
    if a.len() != model.m() {
        return Err(Error::Dimension(format!(
            "parameter vector has length {}, expected {}",
            a.len(),
            model.m()
        )));
    }
    Ok(draw_data(model, a, beta_d, &mut seed.rng()))
}

/// `(a, d)` from one stream: prior draw first, then the noise.
pub fn sample_joint(model: &GeneralLinearModel, beta: HyperPoint, null_width: f64, seed: SeedSpec) -> (DVector<f64>, DVector<f64>) {
    let mut rng = seed.rng();
    let a = draw_model_params(model, beta.beta_a(), null_width, &mut rng);
    let d = draw_data(model, &a, beta.beta_d(), &mut rng);
    (a, d)
}

/// Draws `mean + cov^(1/2) z` with `z` iid from a standardized tail family.
#[derive(Debug, Clone)]
pub struct SecondMomentSampler {
    mean: DVector<f64>,
    root: DMatrix<f64>,
    tail: TailFamily,
}

impl SecondMomentSampler {
    pub fn new(mean: DVector<f64>, cov: &DMatrix<f64>, tail: TailFamily) -> Result<Self> {
        let n = mean.len();
        if cov.shape() != (n, n) {
            return Err(Error::Dimension(format!(
                "covariance is {}x{}, mean has length {n}",
                cov.nrows(),
                cov.ncols()
            )));
        }
        let eig = ((cov + cov.transpose()) * 0.5).symmetric_eigen();
        let max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
        if eig.eigenvalues.iter().any(|&v| v < -1e-10 * max) {
            return Err(Error::NotPsd);
        }
        let sqrt_vals = eig.eigenvalues.map(|v| v.max(0.0).sqrt());
        let root = &eig.eigenvectors * DMatrix::from_diagonal(&sqrt_vals) * eig.eigenvectors.transpose();
        Ok(SecondMomentSampler { mean, root, tail })
    }

    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let z = DVector::from_fn(self.mean.len(), |_, _| self.tail.standard_draw(rng));
        &self.mean + &self.root * z
    }

    pub fn tail(&self) -> TailFamily {
        self.tail
    }
}
