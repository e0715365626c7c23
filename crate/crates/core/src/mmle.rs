//! Maximum marginal likelihood estimation of `(beta_d, beta_a)`.
//!
//! At fixed lambda the optimal `beta_d = N' / (2 (U_* + lambda V_*))` is
//! closed form, so the two-hyperparameter search reduces to a profile in
//! `ln lambda`.

use nalgebra::{DVector, Matrix2};

use crate::error::{Error, Result};
use crate::linmodel::{GeneralLinearModel, HyperPoint, ProfileTerms, SpectralData};
use crate::marginal::{abic_value, logml_from_terms, Dims, MarginalEval};
use crate::optimize::{maximize_log_lambda, SearchOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FitOptions {
    pub search: SearchOptions,
    /// Use the generalized-eigenvalue path (O(M) per lambda) instead of a
    /// Cholesky factorization per lambda.
    pub fast_path: bool,
    /// Interior optima must satisfy `gradient_norm < grad_tol * N'`.
    pub grad_tol: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            search: SearchOptions::default(),
            fast_path: true,
            grad_tol: 1e-6,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub beta_hat: HyperPoint,
    pub a_star: DVector<f64>,
    pub logml: f64,
    pub observed_fisher: Matrix2<f64>,
    pub abic: f64,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub boundary_flag: bool,
}

/// Evaluates profile terms for one data vector along lambda.
pub struct ProfileEvaluator<'a> {
    model: &'a GeneralLinearModel,
    data: &'a DVector<f64>,
    spectral: Option<SpectralData>,
    dims: Dims,
}

impl<'a> ProfileEvaluator<'a> {
    pub fn new(model: &'a GeneralLinearModel, d: &'a DVector<f64>, fast_path: bool) -> Result<Self> {
        if d.len() != model.n() {
            return Err(Error::Dimension(format!(
                "data has length {}, expected {}",
                d.len(),
                model.n()
            )));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        let spectral = if fast_path {
            Some(model.spectral_data(d)?)
        } else {
            None
        };
        Ok(ProfileEvaluator {
            model,
            data: d,
            spectral,
            dims: Dims::of(model),
        })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn terms(&self, lambda: f64) -> Result<ProfileTerms> {
        match &self.spectral {
            Some(s) => Ok(self.model.pencil().terms(s, lambda)),
            None => self.model.profile_terms_dense(self.data, lambda),
        }
    }

    pub fn a_star(&self, lambda: f64) -> Result<DVector<f64>> {
        match &self.spectral {
            Some(s) => Ok(self.model.pencil().a_star(s, lambda)),
            None => self.model.regularized_least_squares(self.data, lambda),
        }
    }

    /// `N' / (2 (U_* + lambda V_*))`, infinite when the weighted cost vanishes.
    pub fn betad_hat(&self, t: &ProfileTerms) -> f64 {
        self.dims.n_eff() / (2.0 * t.weighted_cost())
    }

    /// Profile log marginal likelihood at lambda.
    pub fn profile_logml(&self, lambda: f64) -> Result<f64> {
        let t = self.terms(lambda)?;
        Ok(logml_from_terms(self.dims, &t, self.betad_hat(&t)))
    }

    /// `d/dlambda` of the profile log marginal likelihood.
    pub fn profile_gradient(&self, lambda: f64) -> Result<f64> {
        let t = self.terms(lambda)?;
        let bd = self.betad_hat(&t);
        Ok(-bd * t.vstar + self.dims.p as f64 / (2.0 * lambda) - 0.5 * t.trace_j)
    }

    /// First and second `ln lambda` derivatives of the profile.
    fn profile_newton(&self, lambda: f64) -> (f64, f64) {
        let Ok(t) = self.terms(lambda) else {
            return (f64::NAN, f64::NAN);
        };
        let bd = self.betad_hat(&t);
        let p = self.dims.p as f64;
        let g = -bd * t.vstar + p / (2.0 * lambda) - 0.5 * t.trace_j;
        let h = -bd * t.dvstar - p / (2.0 * lambda * lambda)
            + 0.5 * t.trace_j2
            + 2.0 * bd * bd * t.vstar * t.vstar / self.dims.n_eff();
        (lambda * g, lambda * g + lambda * lambda * h)
    }

    fn fixed_betad_newton(&self, beta_d: f64, lambda: f64) -> (f64, f64) {
        let Ok(t) = self.terms(lambda) else {
            return (f64::NAN, f64::NAN);
        };
        let p = self.dims.p as f64;
        let g = -beta_d * t.vstar + p / (2.0 * lambda) - 0.5 * t.trace_j;
        let h = -beta_d * t.dvstar - p / (2.0 * lambda * lambda) + 0.5 * t.trace_j2;
        (lambda * g, lambda * g + lambda * lambda * h)
    }

    /// `gradient` is the derivative along the free coordinate; `None` uses
    /// the full `beta` gradient.
    fn finish(&self, beta: HyperPoint, n_hyper: usize, iterations: usize, gradient: Option<f64>, boundary: bool) -> Result<FitResult> {
        let t = self.terms(beta.lambda())?;
        let ev = MarginalEval::from_terms(self.dims, &t, beta);
        if !ev.logml.is_finite() {
            return Err(Error::NonFinite);
        }
        Ok(FitResult {
            beta_hat: beta,
            a_star: self.a_star(beta.lambda())?,
            logml: ev.logml,
            observed_fisher: ev.observed_fisher(),
            abic: abic_value(ev.logml, n_hyper),
            iterations,
            gradient_norm: gradient.map_or_else(|| ev.grad_beta.norm(), f64::abs),
            boundary_flag: boundary,
        })
    }
}

fn check_weighted_cost(ev: &ProfileEvaluator<'_>) -> Result<()> {
    // U_* + lambda V_* >= 1/2 d^T E~ d is zero for every lambda only when d
    // has no component in the range of E~; test at lambda = 1.
    let t = ev.terms(1.0)?;
    if !(t.weighted_cost() > 0.0) {
        return Err(Error::ZeroCost);
    }
    Ok(())
}

/// Joint MMLE of `(beta_d, beta_a)`.
pub fn fit_two_hyper(model: &GeneralLinearModel, d: &DVector<f64>, opts: &FitOptions) -> Result<FitResult> {
    let ev = ProfileEvaluator::new(model, d, opts.fast_path)?;
    check_weighted_cost(&ev)?;
    let f = |t: f64| ev.profile_logml(t.exp()).unwrap_or(f64::NEG_INFINITY);
    let newton = |t: f64| ev.profile_newton(t.exp());
    let search = maximize_log_lambda(f, Some(newton), &opts.search);
    let lambda = search.lambda();
    let terms = ev.terms(lambda)?;
    let bd = ev.betad_hat(&terms);
    if !bd.is_finite() {
        return Err(Error::ZeroCost);
    }
    let beta = HyperPoint::from_lambda(bd, lambda)?;
    ev.finish(beta, 2, search.evaluations, None, search.boundary)
}

/// MMLE of lambda with `beta_d` known.
pub fn fit_lambda_known_betad(model: &GeneralLinearModel, d: &DVector<f64>, beta_d: f64, opts: &FitOptions) -> Result<FitResult> {
    if !(beta_d > 0.0 && beta_d.is_finite()) {
        return Err(Error::InvalidHyper(format!("beta_d = {beta_d}")));
    }
    let ev = ProfileEvaluator::new(model, d, opts.fast_path)?;
    let dims = ev.dims();
    let f = |t: f64| {
        ev.terms(t.exp())
            .map(|terms| logml_from_terms(dims, &terms, beta_d))
            .unwrap_or(f64::NEG_INFINITY)
    };
    let newton = |t: f64| ev.fixed_betad_newton(beta_d, t.exp());
    let search = maximize_log_lambda(f, Some(newton), &opts.search);
    let lambda = search.lambda();
    let beta = HyperPoint::from_lambda(beta_d, lambda)?;
    let (g_t, _) = ev.fixed_betad_newton(beta_d, lambda);
    ev.finish(beta, 1, search.evaluations, Some(g_t / lambda), search.boundary)
}

/// Closed-form MMLE of `beta_d` with lambda known.
pub fn fit_betad_known_lambda(model: &GeneralLinearModel, d: &DVector<f64>, lambda: f64) -> Result<FitResult> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidHyper(format!("lambda = {lambda}")));
    }
    let ev = ProfileEvaluator::new(model, d, false)?;
    let terms = ev.terms(lambda)?;
    if !(terms.weighted_cost() > 0.0) {
        return Err(Error::ZeroCost);
    }
    let bd = ev.betad_hat(&terms);
    let beta = HyperPoint::from_lambda(bd, lambda)?;
    let grad = -terms.weighted_cost() + ev.dims().n_eff() / (2.0 * bd);
    ev.finish(beta, 1, 0, Some(grad), false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::marginal::log_marginal;
    use crate::problem::random_model;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn random_vec(n: usize, rng: &mut ChaCha8Rng) -> DVector<f64> {
        DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
    }

    #[test]
    fn fit_reaches_a_stationary_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let model = random_model(30, 15, 12, &mut rng).unwrap();
        let a = random_vec(15, &mut rng);
        let d = model.h() * a + random_vec(30, &mut rng) * 0.5;
        let fit = fit_two_hyper(&model, &d, &FitOptions::default()).unwrap();
        assert!(!fit.boundary_flag);
        assert!(fit.gradient_norm < 1e-6 * model.n_eff() as f64, "{}", fit.gradient_norm);
        let dense = fit_two_hyper(&model, &d, &FitOptions { fast_path: false, ..Default::default() }).unwrap();
        assert!((dense.beta_hat.lambda() / fit.beta_hat.lambda() - 1.0).abs() < 1e-7);
        let ev = log_marginal(&model, &d, fit.beta_hat).unwrap();
        assert!((ev.observed_fisher() - fit.observed_fisher).norm() < 1e-8 * fit.observed_fisher.norm());
        assert!((fit.abic - (-2.0 * fit.logml + 4.0)).abs() < 1e-12);
        assert!(fit.observed_fisher.symmetric_eigenvalues().min() > -1e-8);
    }

    #[test]
    fn scale_equivariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let model = random_model(24, 12, 12, &mut rng).unwrap();
        let d = random_vec(24, &mut rng);
        let c = 3.0;
        let a = fit_two_hyper(&model, &d, &FitOptions::default()).unwrap();
        let b = fit_two_hyper(&model, &(&d * c), &FitOptions::default()).unwrap();
        assert!((a.beta_hat.lambda() / b.beta_hat.lambda() - 1.0).abs() < 1e-8);
        assert!((a.beta_hat.beta_d() / (c * c) / b.beta_hat.beta_d() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn known_lambda_is_closed_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let model = random_model(16, 8, 8, &mut rng).unwrap();
        let d = random_vec(16, &mut rng);
        let fit = fit_betad_known_lambda(&model, &d, 0.5).unwrap();
        assert!(fit.gradient_norm < 1e-12 * model.n_eff() as f64);
        assert_eq!(fit.iterations, 0);
        // 1-D Newton from beta_d = 10 on d/dbeta_d at fixed lambda.
        let mut bd: f64 = 10.0;
        let mut iterations = 0;
        for _ in 0..30 {
            let ev = log_marginal(&model, &d, HyperPoint::from_lambda(bd, 0.5).unwrap()).unwrap();
            // Newton in ln beta_d keeps the iterate positive.
            let g = ev.grad_betaprime[0] * bd;
            let h = ev.hess_betaprime[(0, 0)] * bd * bd + ev.grad_betaprime[0] * bd;
            let step = g / h;
            bd *= (-step).exp();
            iterations += 1;
            if step.abs() < 1e-14 {
                break;
            }
        }
        assert!(iterations <= 30);
        assert!((bd / fit.beta_hat.beta_d() - 1.0).abs() < 1e-10);
        assert!(matches!(
            fit_betad_known_lambda(&model, &DVector::zeros(16), 0.5),
            Err(Error::ZeroCost)
        ));
    }

    #[test]
    fn zero_data_with_known_betad_runs_to_the_edge() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let model = random_model(10, 5, 5, &mut rng).unwrap();
        let fit = fit_lambda_known_betad(&model, &DVector::zeros(10), 1.0, &FitOptions::default()).unwrap();
        assert!(fit.boundary_flag);
        assert!((fit.beta_hat.lambda() / 1e8 - 1.0).abs() < 1e-6);
    }

    #[test]
    fn non_finite_data_is_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let model = random_model(6, 3, 3, &mut rng).unwrap();
        let mut d = DVector::zeros(6);
        d[2] = f64::NAN;
        assert!(matches!(fit_two_hyper(&model, &d, &FitOptions::default()), Err(Error::NonFinite)));
    }
}
