//! Coordinate-separable Gibbs models.
//!
//! The joint density of data `d` and parameters `a` (one of each per
//! coordinate) is proportional to `exp(-beta_d u(d_i - a_i) - beta_a v(a_i))`.
//! All normalizers and cost moments are computed by quadrature, so the
//! closed Gaussian forms serve only as test oracles.
//!
//! Free entropies follow `F = -ln Z`, so `dF/dbeta = <cost>` and
//! `ln P(d; beta) = F(beta) - F_pos(beta, d)`.

pub mod quadrature;

use std::fmt;
use std::str::FromStr;

use nalgebra::{DVector, Matrix2, Vector2};
use rand::Rng;
use rand_distr::{Distribution, Gamma};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linmodel::HyperPoint;
use crate::sampler::SeedSpec;
pub use quadrature::QuadOptions;

// Integration stops where the exponent exceeds its minimum by this much.
const LEVEL: f64 = 60.0;

/// Registry of per-coordinate cost functions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cost {
    /// x^2 / 2
    Gaussian,
    /// |x|
    Laplace,
    /// x^4
    Quartic,
}

impl FromStr for Cost {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "gaussian" => Ok(Cost::Gaussian),
            "laplace" => Ok(Cost::Laplace),
            "quartic" => Ok(Cost::Quartic),
            other => Err(Error::UnknownTag(other.to_string())),
        }
    }
}

impl fmt::Display for Cost {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Cost::Gaussian => "gaussian",
            Cost::Laplace => "laplace",
            Cost::Quartic => "quartic",
        })
    }
}

impl Cost {
    pub fn eval(&self, x: f64) -> f64 {
        match self {
            Cost::Gaussian => 0.5 * x * x,
            Cost::Laplace => x.abs(),
            Cost::Quartic => {
                let x2 = x * x;
                x2 * x2
            }
        }
    }

    /// Under `exp(-beta c(x))`, `beta c(x)` is Gamma distributed with this shape.
    pub fn gamma_shape(&self) -> f64 {
        match self {
            Cost::Gaussian => 0.5,
            Cost::Laplace => 1.0,
            Cost::Quartic => 0.25,
        }
    }

    /// Smallest `w >= 0` with `beta c(w) >= level`.
    fn width(&self, beta: f64, level: f64) -> f64 {
        let r = level / beta;
        match self {
            Cost::Gaussian => (2.0 * r).sqrt(),
            Cost::Laplace => r,
            Cost::Quartic => r.sqrt().sqrt(),
        }
    }

    /// Closed form of `ln integral exp(-beta c(x)) dx`, for checking the quadrature.
    pub fn log_normalizer(&self, beta: f64) -> f64 {
        match self {
            Cost::Gaussian => 0.5 * (2.0 * std::f64::consts::PI / beta).ln(),
            Cost::Laplace => (2.0 / beta).ln(),
            Cost::Quartic => (2.0 * 0.906_402_477_055_477_f64).ln() - 0.25 * beta.ln(),
        }
    }

    /// One draw from the density proportional to `exp(-beta c(x))`.
    pub fn sample<R: Rng + ?Sized>(&self, beta: f64, rng: &mut R) -> f64 {
        let t: f64 = Gamma::new(self.gamma_shape(), 1.0).expect("valid shape").sample(rng);
        let r = t / beta;
        let mag = match self {
            Cost::Gaussian => (2.0 * r).sqrt(),
            Cost::Laplace => r,
            Cost::Quartic => r.sqrt().sqrt(),
        };
        if rng.random::<bool>() {
            mag
        } else {
            -mag
        }
    }
}

/// Moments of the costs under one coordinate's (unnormalized) density.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SiteMoments {
    pub log_z: f64,
    pub mean_u: f64,
    pub mean_v: f64,
    pub var_u: f64,
    pub var_v: f64,
    pub cov_uv: f64,
}

fn golden_min<F: Fn(f64) -> f64>(f: &F, mut lo: f64, mut hi: f64) -> f64 {
    let r = 0.5 * (5f64.sqrt() - 1.0);
    let mut x1 = hi - r * (hi - lo);
    let mut x2 = lo + r * (hi - lo);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..80 {
        if f1 <= f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - r * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + r * (hi - lo);
            f2 = f(x2);
        }
    }
    if f1 <= f2 {
        x1
    } else {
        x2
    }
}

// Point between `inner` (where g < 0) and `outer` (g >= 0), on the outer side.
fn level_crossing<F: Fn(f64) -> f64>(g: &F, mut inner: f64, mut outer: f64) -> f64 {
    for _ in 0..60 {
        let mid = 0.5 * (inner + outer);
        if mid == inner || mid == outer {
            break;
        }
        if g(mid) >= 0.0 {
            outer = mid;
        } else {
            inner = mid;
        }
    }
    outer
}

/// Quadrature of `exp(-bu u(d - a) - bv v(a))` over `a`, with cost moments.
///
/// A zero weight drops that term, which gives the single-cost normalizers.
pub fn site_moments(u: Cost, v: Cost, bu: f64, bv: f64, d: f64, opts: &QuadOptions) -> Result<SiteMoments> {
    if !(bu >= 0.0 && bv >= 0.0 && bu + bv > 0.0 && bu.is_finite() && bv.is_finite()) {
        return Err(Error::InvalidHyper(format!("cost weights ({bu}, {bv})")));
    }
    if !d.is_finite() {
        return Err(Error::NonFinite);
    }
    let phi = |a: f64| bu * u.eval(d - a) + bv * v.eval(a);
    // Both costs are convex and symmetric, so the minimizer lies between their centres.
    let a_min = golden_min(&phi, d.min(0.0), d.max(0.0));
    let phi_min = phi(a_min);
    let top = LEVEL + phi_min;
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    if bu > 0.0 {
        let w = u.width(bu, top);
        lo = lo.max(d - w);
        hi = hi.min(d + w);
    }
    if bv > 0.0 {
        let w = v.width(bv, top);
        lo = lo.max(-w);
        hi = hi.min(w);
    }
    let excess = |a: f64| phi(a) - phi_min - LEVEL;
    let left = level_crossing(&excess, a_min, lo);
    let right = level_crossing(&excess, a_min, hi);
    let mut breaks = vec![left, right];
    for k in [a_min, 0.0, d] {
        if k > left && k < right {
            breaks.push(k);
        }
    }
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let m = quadrature::integrate(
        |a| {
            let uu = u.eval(d - a);
            let vv = v.eval(a);
            let w = (-(bu * uu + bv * vv - phi_min)).exp();
            [w, w * uu, w * uu * uu, w * vv, w * vv * vv, w * uu * vv]
        },
        &breaks,
        opts,
    )?;
    if !(m[0] > 0.0) {
        return Err(Error::QuadratureFailure(format!("zero mass at d = {d}")));
    }
    let mean_u = m[1] / m[0];
    let mean_v = m[3] / m[0];
    Ok(SiteMoments {
        log_z: m[0].ln() - phi_min,
        mean_u,
        mean_v,
        var_u: (m[2] / m[0] - mean_u * mean_u).max(0.0),
        var_v: (m[4] / m[0] - mean_v * mean_v).max(0.0),
        cov_uv: m[5] / m[0] - mean_u * mean_v,
    })
}

/// Pairwise summation in fixed order.
pub fn pairwise_sum(x: &[f64]) -> f64 {
    if x.len() <= 8 {
        return x.iter().sum();
    }
    let (l, r) = x.split_at(x.len() / 2);
    pairwise_sum(l) + pairwise_sum(r)
}

/// Sums of the cost moments over coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostMoments {
    pub mean_u: f64,
    pub mean_v: f64,
    pub var_u: f64,
    pub var_v: f64,
    pub cov_uv: f64,
}

impl CostMoments {
    pub fn means(&self) -> Vector2<f64> {
        Vector2::new(self.mean_u, self.mean_v)
    }

    pub fn covariance(&self) -> Matrix2<f64> {
        Matrix2::new(self.var_u, self.cov_uv, self.cov_uv, self.var_v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Posterior {
    pub moments: CostMoments,
    /// `F_pos = -sum_i ln Z_i(d_i)`.
    pub free_entropy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeparableGibbsModel {
    u: Cost,
    v: Cost,
    count: usize,
    pub quad: QuadOptions,
}

impl SeparableGibbsModel {
    pub fn new(u: Cost, v: Cost, count: usize) -> Result<Self> {
        if count == 0 {
            return Err(Error::Dimension("coordinate count must be positive".into()));
        }
        if v == Cost::Quartic {
            return Err(Error::Config("prior cost must be gaussian or laplace".into()));
        }
        Ok(SeparableGibbsModel {
            u,
            v,
            count,
            quad: QuadOptions::default(),
        })
    }

    pub fn parse(u: &str, v: &str, count: usize) -> Result<Self> {
        Self::new(u.parse()?, v.parse()?, count)
    }

    pub fn u(&self) -> Cost {
        self.u
    }

    pub fn v(&self) -> Cost {
        self.v
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn with_count(&self, count: usize) -> Result<Self> {
        let mut out = Self::new(self.u, self.v, count)?;
        out.quad = self.quad;
        Ok(out)
    }

    /// Per-coordinate normalizer moments of the data and prior factors.
    fn factor_moments(&self, beta: HyperPoint) -> Result<(SiteMoments, SiteMoments)> {
        let data = site_moments(self.u, self.v, beta.beta_d(), 0.0, 0.0, &self.quad)?;
        let prior = site_moments(self.u, self.v, 0.0, beta.beta_a(), 0.0, &self.quad)?;
        Ok((data, prior))
    }

    /// `F(beta) = F_d + F_a = -N ln Z_u(beta_d) - N ln Z_v(beta_a)`.
    pub fn free_entropy(&self, beta: HyperPoint) -> Result<f64> {
        let (data, prior) = self.factor_moments(beta)?;
        Ok(-(self.count as f64) * (data.log_z + prior.log_z))
    }

    /// Cost moments under the joint model; U and V are independent there.
    pub fn model_moments(&self, beta: HyperPoint) -> Result<CostMoments> {
        let (data, prior) = self.factor_moments(beta)?;
        let n = self.count as f64;
        Ok(CostMoments {
            mean_u: n * data.mean_u,
            mean_v: n * prior.mean_v,
            var_u: n * data.var_u,
            var_v: n * prior.var_v,
            cov_uv: 0.0,
        })
    }

    fn check_data(&self, d: &DVector<f64>) -> Result<()> {
        if d.len() != self.count {
            return Err(Error::Dimension(format!("data has length {}, model has {} coordinates", d.len(), self.count)));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    pub fn posterior(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<Posterior> {
        self.check_data(d)?;
        let sites: Vec<SiteMoments> = d
            .as_slice()
            .par_iter()
            .map(|&di| site_moments(self.u, self.v, beta.beta_d(), beta.beta_a(), di, &self.quad))
            .collect::<Result<_>>()?;
        let sum = |f: fn(&SiteMoments) -> f64| pairwise_sum(&sites.iter().map(f).collect::<Vec<_>>());
        Ok(Posterior {
            moments: CostMoments {
                mean_u: sum(|s| s.mean_u),
                mean_v: sum(|s| s.mean_v),
                var_u: sum(|s| s.var_u),
                var_v: sum(|s| s.var_v),
                cov_uv: sum(|s| s.cov_uv),
            },
            free_entropy: -sum(|s| s.log_z),
        })
    }

    pub fn posterior_moments(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<CostMoments> {
        Ok(self.posterior(d, beta)?.moments)
    }

    pub fn posterior_free_entropy(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<f64> {
        Ok(self.posterior(d, beta)?.free_entropy)
    }

    /// `ln P(d; beta) = F(beta) - F_pos(beta, d)`.
    pub fn log_marginal(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<f64> {
        Ok(self.free_entropy(beta)? - self.posterior_free_entropy(d, beta)?)
    }

    /// Gradient of `ln P` in `(beta_d, beta_a)`: model means minus posterior means.
    pub fn log_marginal_gradient(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<Vector2<f64>> {
        Ok(self.model_moments(beta)?.means() - self.posterior_moments(d, beta)?.means())
    }

    /// Hessian of `ln P` in `(beta_d, beta_a)`: posterior minus model covariance.
    pub fn log_marginal_hessian(&self, d: &DVector<f64>, beta: HyperPoint) -> Result<Matrix2<f64>> {
        Ok(self.posterior_moments(d, beta)?.covariance() - self.model_moments(beta)?.covariance())
    }

    /// Draws `(a, d)` from the joint model.
    pub fn sample_joint<R: Rng + ?Sized>(&self, beta: HyperPoint, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
        let a = DVector::from_fn(self.count, |_, _| self.v.sample(beta.beta_a(), rng));
        let d = DVector::from_fn(self.count, |i, _| a[i] + self.u.sample(beta.beta_d(), rng));
        (a, d)
    }

    /// `(U, V)` at a given `(d, a)`.
    pub fn costs(&self, d: &DVector<f64>, a: &DVector<f64>) -> (f64, f64) {
        let u: Vec<f64> = d.iter().zip(a.iter()).map(|(di, ai)| self.u.eval(di - ai)).collect();
        let v: Vec<f64> = a.iter().map(|ai| self.v.eval(*ai)).collect();
        (pairwise_sum(&u), pairwise_sum(&v))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsFitOptions {
    pub start: (f64, f64),
    /// Holds `beta_a` at this value and solves for `beta_d` alone.
    pub fixed_beta_a: Option<f64>,
    /// Convergence when the log-scale residual is below `residual_tol * N`.
    pub residual_tol: f64,
    pub max_iterations: usize,
    /// Bound on `|ln beta|` beyond which the solution counts as on the boundary.
    pub log_beta_bound: f64,
}

impl Default for GibbsFitOptions {
    fn default() -> Self {
        GibbsFitOptions {
            start: (1.0, 1.0),
            fixed_beta_a: None,
            residual_tol: 1e-8,
            max_iterations: 100,
            log_beta_bound: 25.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GibbsFit {
    pub beta: HyperPoint,
    pub iterations: usize,
    /// `|| beta * (<E>_beta - <E>_{beta|d}) ||` at the solution.
    pub residual: f64,
    pub log_marginal: f64,
}

struct NewtonState {
    s: Vector2<f64>,
    g: Vector2<f64>,
    h: Matrix2<f64>,
    model_var: Vector2<f64>,
}

fn newton_state(gm: &SeparableGibbsModel, d: &DVector<f64>, s: Vector2<f64>, free: [bool; 2]) -> Result<NewtonState> {
    let beta = HyperPoint::new(s[0].exp(), s[1].exp())?;
    let model = gm.model_moments(beta)?;
    let post = gm.posterior_moments(d, beta)?;
    let b = Vector2::new(beta.beta_d(), beta.beta_a());
    let r = model.means() - post.means();
    let mut g = b.component_mul(&r);
    let curv = post.covariance() - model.covariance();
    let mut h = Matrix2::from_diagonal(&b) * curv * Matrix2::from_diagonal(&b) + Matrix2::from_diagonal(&g);
    let mut model_var = Vector2::new(b[0] * b[0] * model.var_u, b[1] * b[1] * model.var_v);
    for k in 0..2 {
        if !free[k] {
            g[k] = 0.0;
            h[(k, 0)] = 0.0;
            h[(0, k)] = 0.0;
            h[(k, 1)] = 0.0;
            h[(1, k)] = 0.0;
            h[(k, k)] = -1.0;
            model_var[k] = 1.0;
        }
    }
    Ok(NewtonState { s, g, h, model_var })
}

fn boundary_error(s: &Vector2<f64>, bound: f64) -> Option<Error> {
    let names = ["beta_d", "beta_a"];
    for k in 0..2 {
        if s[k] > bound {
            return Some(Error::NoInteriorSolution(format!("{} -> infinity", names[k])));
        }
        if s[k] < -bound {
            return Some(Error::NoInteriorSolution(format!("{} -> 0", names[k])));
        }
    }
    None
}

/// Solves `<U>_beta = <U>_{beta|d}` and `<V>_beta = <V>_{beta|d}` by damped
/// Newton in `(ln beta_d, ln beta_a)`.
///
/// Where the Hessian is not negative definite the step falls back to Fisher
/// scoring with the model variances. A stationary point that is not a
/// maximum is left along its ascent eigenvector in both directions and the
/// better of the resulting maxima is returned. This matters for costs that
/// make `ln P` symmetric under `beta_d <-> beta_a` (laplace/laplace), where
/// iterates started on the diagonal never leave it.
pub fn gibbs_mmle(gm: &SeparableGibbsModel, d: &DVector<f64>, opts: &GibbsFitOptions) -> Result<GibbsFit> {
    gm.check_data(d)?;
    let free = [true, opts.fixed_beta_a.is_none()];
    let start_a = opts.fixed_beta_a.unwrap_or(opts.start.1);
    let s0 = Vector2::new(opts.start.0.ln(), start_a.ln());
    if !(s0[0].is_finite() && s0[1].is_finite()) {
        return Err(Error::InvalidHyper(format!("start ({}, {start_a})", opts.start.0)));
    }
    let (st, iterations) = stationary_point(gm, d, s0, free, opts)?;
    let fit = |st: &NewtonState, iterations: usize| -> Result<GibbsFit> {
        let beta = HyperPoint::new(st.s[0].exp(), st.s[1].exp())?;
        Ok(GibbsFit {
            beta,
            iterations,
            residual: st.g.norm(),
            log_marginal: gm.log_marginal(d, beta)?,
        })
    };
    let eig = st.h.symmetric_eigen();
    let (k, top) = eig.eigenvalues.argmax();
    if !free[1] || top < 0.0 {
        return fit(&st, iterations);
    }
    let dir = eig.eigenvectors.column(k).into_owned();
    let mut best: Option<GibbsFit> = None;
    let mut last_err = None;
    for sign in [1.0, -1.0] {
        match stationary_point(gm, d, st.s + dir * (SADDLE_ESCAPE * sign), free, opts) {
            Ok((next, it)) if next.h.symmetric_eigen().eigenvalues.max() < 0.0 => {
                let f = fit(&next, iterations + it)?;
                if best.as_ref().is_none_or(|b| f.log_marginal > b.log_marginal) {
                    best = Some(f);
                }
            }
            Ok(_) => {}
            Err(e) => last_err = Some(e),
        }
    }
    best.ok_or_else(|| {
        last_err.unwrap_or_else(|| {
            Error::NoInteriorSolution(format!(
                "only a saddle found at beta = ({:e}, {:e})",
                st.s[0].exp(),
                st.s[1].exp()
            ))
        })
    })
}

/// Step in `ln beta` taken off a saddle.
const SADDLE_ESCAPE: f64 = 0.25;

fn stationary_point(gm: &SeparableGibbsModel, d: &DVector<f64>, s0: Vector2<f64>, free: [bool; 2], opts: &GibbsFitOptions) -> Result<(NewtonState, usize)> {
    let n = gm.count as f64;
    let mut st = newton_state(gm, d, s0, free)?;
    for it in 0..=opts.max_iterations {
        let res = st.g.norm();
        if res < opts.residual_tol * n {
            return Ok((st, it));
        }
        if it == opts.max_iterations {
            break;
        }
        let newton = (st.h[(0, 0)] < 0.0 && st.h.determinant() > 0.0)
            .then(|| st.h.try_inverse().map(|hi| -(hi * st.g)))
            .flatten();
        let scoring = newton.is_none();
        let mut step = newton.unwrap_or_else(|| st.g.component_div(&st.model_var));
        let big = step.amax();
        if big > 2.0 {
            step *= 2.0 / big;
        }
        // Scoring steps ascend ln P, so they may also be accepted on its increase.
        let here = if scoring { Some(log_marginal_at(gm, d, &st.s)?) } else { None };
        let mut accepted = None;
        for _ in 0..40 {
            let s = st.s + step;
            if let Some(e) = boundary_error(&s, opts.log_beta_bound) {
                return Err(e);
            }
            let next = newton_state(gm, d, s, free)?;
            let ascends = match here {
                Some(l) => log_marginal_at(gm, d, &s)? > l,
                None => false,
            };
            if next.g.norm() < res || ascends {
                accepted = Some(next);
                break;
            }
            step *= 0.5;
        }
        match accepted {
            Some(next) => st = next,
            None => {
                return Err(Error::NoInteriorSolution(format!(
                    "damped Newton stalled at residual {res:e} (beta = ({:e}, {:e}))",
                    st.s[0].exp(),
                    st.s[1].exp()
                )))
            }
        }
    }
    Err(Error::NoInteriorSolution(format!(
        "no convergence in {} iterations (beta = ({:e}, {:e}))",
        opts.max_iterations,
        st.s[0].exp(),
        st.s[1].exp()
    )))
}

fn log_marginal_at(gm: &SeparableGibbsModel, d: &DVector<f64>, s: &Vector2<f64>) -> Result<f64> {
    gm.log_marginal(d, HyperPoint::new(s[0].exp(), s[1].exp())?)
}

/// Box of hyperparameters for grid searches, log-spaced in each axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BetaBox {
    pub beta_d: (f64, f64),
    pub beta_a: (f64, f64),
}

impl BetaBox {
    pub fn grid(&self, points: usize) -> Result<Vec<HyperPoint>> {
        let axis = |(lo, hi): (f64, f64)| -> Result<Vec<f64>> {
            if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::Config(format!("bad beta range ({lo}, {hi})")));
            }
            Ok(crate::crossentropy::log_grid(lo, hi, points))
        };
        let bd = axis(self.beta_d)?;
        let ba = axis(self.beta_a)?;
        bd.iter()
            .flat_map(|&x| ba.iter().map(move |&y| HyperPoint::new(x, y)))
            .collect()
    }
}

/// `argmax` of `ln P(d; beta)` over a log-spaced grid of the box.
pub fn grid_argmax(gm: &SeparableGibbsModel, d: &DVector<f64>, bx: &BetaBox, points: usize) -> Result<(HyperPoint, f64)> {
    let mut best: Option<(HyperPoint, f64)> = None;
    for beta in bx.grid(points)? {
        let l = gm.log_marginal(d, beta)?;
        if best.is_none_or(|(_, b)| l > b) {
            best = Some((beta, l));
        }
    }
    best.ok_or_else(|| Error::Config("empty grid".into()))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CriticalPoint {
    pub beta: HyperPoint,
    /// `(Var[U; beta]/N) / (E_d Var[U | d; beta]/M)`.
    pub ratio: f64,
    pub stderr: f64,
    /// Fraction of the simulated data sets with `d^2 ln P / dbeta_d^2 < 0`.
    pub negative_fraction: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriticalRatio {
    /// Minimum ratio over the grid; an estimate since the box is compact.
    pub value: f64,
    pub stderr: f64,
    pub argmin: HyperPoint,
    pub points: Vec<CriticalPoint>,
}

/// `min_beta (Var[U; beta]/N) / (E_d Var[U | d; beta]/M)` over a grid of the box,
/// with the posterior variance averaged over `draws` joint samples per point.
///
/// Grid point `k` draws from stream `seed.stream_index + k`.
pub fn critical_ratio(gm: &SeparableGibbsModel, bx: &BetaBox, grid: usize, draws: usize, seed: SeedSpec) -> Result<CriticalRatio> {
    if draws < 2 {
        return Err(Error::Config("critical_ratio needs at least two draws".into()));
    }
    let mut points = Vec::new();
    for (k, beta) in bx.grid(grid)?.into_iter().enumerate() {
        let mut rng = seed.with_stream(seed.stream_index.wrapping_add(k as u64)).rng();
        let model_var = gm.model_moments(beta)?.var_u;
        let mut post = Vec::with_capacity(draws);
        for _ in 0..draws {
            let (_, d) = gm.sample_joint(beta, &mut rng);
            post.push(gm.posterior_moments(&d, beta)?.var_u);
        }
        let n = draws as f64;
        let mean_post = pairwise_sum(&post) / n;
        let var_post = post.iter().map(|x| (x - mean_post).powi(2)).sum::<f64>() / (n - 1.0);
        // M = N, so the per-coordinate normalizations cancel.
        let ratio = model_var / mean_post;
        points.push(CriticalPoint {
            beta,
            ratio,
            stderr: ratio * (var_post / n).sqrt() / mean_post,
            negative_fraction: post.iter().filter(|&&x| x < model_var).count() as f64 / n,
        });
    }
    let best = *points
        .iter()
        .min_by(|x, y| x.ratio.total_cmp(&y.ratio))
        .expect("nonempty grid");
    Ok(CriticalRatio {
        value: best.ratio,
        stderr: best.stderr,
        argmin: best.beta,
        points,
    })
}
