//! Closed-form log marginal likelihood `ln P(d; beta)` of the general linear
//! model, its first and second derivatives, posterior and prior cost moments,
//! and the Fisher information summary.

use nalgebra::{DMatrix, DVector, Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::linmodel::{
    pinv_sym_rank, range_projector_sym, GeneralLinearModel, HyperPoint, ProfileTerms,
};

const LN_2PI: f64 = 1.837_877_066_409_345_3;

/// `c_det` at or below this is treated as a singular Fisher matrix.
pub const FISHER_DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct MarginalEval {
    pub beta: HyperPoint,
    /// `ln P(d; beta)` with `c = -(N'/2) ln(2 pi)`.
    pub logml: f64,
    /// `(d/dbeta_d, d/dbeta_a)`.
    pub grad_beta: Vector2<f64>,
    /// `(d/dbeta_d at fixed lambda, d/dlambda at fixed beta_d)`.
    pub grad_betaprime: Vector2<f64>,
    pub hess_beta: Matrix2<f64>,
    pub hess_betaprime: Matrix2<f64>,
    pub ustar: f64,
    pub vstar: f64,
    pub terms: ProfileTerms,
}

/// Sizes entering the marginal likelihood.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Dims {
    pub n: usize,
    pub m: usize,
    pub p: usize,
}

impl Dims {
    pub fn of(model: &GeneralLinearModel) -> Self {
        Dims {
            n: model.n(),
            m: model.m(),
            p: model.p(),
        }
    }

    pub fn n_eff(&self) -> f64 {
        (self.n + self.p - self.m) as f64
    }
}

/// `ln P` alone from profile terms.
pub fn logml_from_terms(dims: Dims, t: &ProfileTerms, beta_d: f64) -> f64 {
    let n_eff = dims.n_eff();
    -beta_d * t.weighted_cost() + 0.5 * n_eff * beta_d.ln() + 0.5 * dims.p as f64 * t.lambda.ln()
        - 0.5 * t.logdet
        - 0.5 * n_eff * LN_2PI
}

impl MarginalEval {
    /// Assembles the evaluation from terms computed at `beta.lambda()`.
    pub fn from_terms(dims: Dims, t: &ProfileTerms, beta: HyperPoint) -> Self {
        let (bd, ba, lam) = (beta.beta_d(), beta.beta_a(), beta.lambda());
        debug_assert!((t.lambda - lam).abs() <= 1e-12 * lam);
        let n_eff = dims.n_eff();
        let (n, m, p) = (dims.n as f64, dims.m as f64, dims.p as f64);
        let (ustar, vstar, dv, tj, tj2) = (t.ustar, t.vstar, t.dvstar, t.trace_j, t.trace_j2);

        let logml = logml_from_terms(dims, t, bd);
        let grad_beta = Vector2::new(
            -ustar + (n - m) / (2.0 * bd) + lam * tj / (2.0 * bd),
            -vstar + p / (2.0 * ba) - lam * tj / (2.0 * ba),
        );
        let grad_betaprime = Vector2::new(
            -t.weighted_cost() + n_eff / (2.0 * bd),
            -bd * vstar + p / (2.0 * lam) - 0.5 * tj,
        );

        let h_da = lam / bd * dv + lam / (2.0 * ba * bd) * (tj - lam * tj2);
        let h_dd = -(n - m) / (2.0 * bd * bd) - lam * tj / (2.0 * bd * bd) - lam * h_da;
        let h_aa = -p / (2.0 * ba * ba) + lam * tj / (2.0 * ba * ba) - h_da / lam;
        let hess_beta = Matrix2::new(h_dd, h_da, h_da, h_aa);

        let hp_dd = -n_eff / (2.0 * bd * bd);
        let hp_dl = -vstar;
        let hp_ll = -bd * dv - p / (2.0 * lam * lam) + 0.5 * tj2;
        let hess_betaprime = Matrix2::new(hp_dd, hp_dl, hp_dl, hp_ll);

        MarginalEval {
            beta,
            logml,
            grad_beta,
            grad_betaprime,
            hess_beta,
            hess_betaprime,
            ustar,
            vstar,
            terms: *t,
        }
    }

    /// Observed Fisher information `-d^2 ln P / dbeta^2`.
    pub fn observed_fisher(&self) -> Matrix2<f64> {
        -self.hess_beta
    }
}

/// Dense evaluation of `ln P(d; beta)` and its derivatives.
pub fn log_marginal(model: &GeneralLinearModel, d: &DVector<f64>, beta: HyperPoint) -> Result<MarginalEval> {
    let terms = model.profile_terms_dense(d, beta.lambda())?;
    Ok(MarginalEval::from_terms(Dims::of(model), &terms, beta))
}

/// Same as [`log_marginal`] through the cached generalized eigenbasis.
pub fn log_marginal_fast(model: &GeneralLinearModel, d: &DVector<f64>, beta: HyperPoint) -> Result<MarginalEval> {
    let data = model.spectral_data(d)?;
    let terms = model.pencil().terms(&data, beta.lambda());
    Ok(MarginalEval::from_terms(Dims::of(model), &terms, beta))
}

/// Jacobian mapping the `beta'` gradient to the `beta` gradient.
pub fn betaprime_jacobian(beta: HyperPoint) -> Matrix2<f64> {
    let bd = beta.beta_d();
    Matrix2::new(1.0, -beta.lambda() / bd, 0.0, 1.0 / bd)
}

/// Posterior means `(<U>_{beta|d}, <V>_{beta|d})`.
pub fn posterior_cost_means(model: &GeneralLinearModel, d: &DVector<f64>, beta: HyperPoint) -> Result<(f64, f64)> {
    let t = model.profile_terms_dense(d, beta.lambda())?;
    Ok(posterior_means_from_terms(Dims::of(model), &t, beta.beta_d()))
}

pub fn posterior_means_from_terms(dims: Dims, t: &ProfileTerms, beta_d: f64) -> (f64, f64) {
    (
        t.ustar + (dims.m as f64 - t.lambda * t.trace_j) / (2.0 * beta_d),
        t.vstar + t.trace_j / (2.0 * beta_d),
    )
}

/// Posterior covariance of `(U, V)` given `d`, as a symmetric 2x2 matrix.
pub fn posterior_cost_covariance(model: &GeneralLinearModel, d: &DVector<f64>, beta: HyperPoint) -> Result<Matrix2<f64>> {
    let lam = beta.lambda();
    let ops = model.lambda_operators(lam)?;
    let a_star = &ops.cprime * model.project_data(d);
    let sigma = &ops.cprime / beta.beta_d();
    let grad_v = model.g() * &a_star;
    // Gradient of U at a_* from the normal equations.
    let grad_u = &grad_v * (-lam);
    let a_sigma = model.a() * &sigma;
    let g_sigma = model.g() * &sigma;
    let var_u = grad_u.dot(&(&sigma * &grad_u)) + 0.5 * (&a_sigma * &a_sigma).trace();
    let var_v = grad_v.dot(&(&sigma * &grad_v)) + 0.5 * (&g_sigma * &g_sigma).trace();
    let cov = grad_u.dot(&(&sigma * &grad_v)) + 0.5 * (&a_sigma * &g_sigma).trace();
    Ok(Matrix2::new(var_u, cov, cov, var_v))
}

/// Prior-predictive moments `(<U>, <V>, Var U, Var V)` at `beta`.
pub fn model_cost_means(model: &GeneralLinearModel, beta: HyperPoint) -> (f64, f64, f64, f64) {
    let (n, p) = (model.n() as f64, model.p() as f64);
    let (bd, ba) = (beta.beta_d(), beta.beta_a());
    (n / (2.0 * bd), p / (2.0 * ba), n / (2.0 * bd * bd), p / (2.0 * ba * ba))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FisherSummary {
    pub trace: f64,
    pub det: f64,
    pub c_det: f64,
    pub c_lambda_inf: f64,
    pub min_eig_lower_bound: f64,
    /// The full expected Fisher matrix in `beta` coordinates.
    pub matrix: Matrix2<f64>,
}

/// Expected Fisher information of the prior predictive at `beta`.
pub fn fisher_summary(model: &GeneralLinearModel, beta: HyperPoint) -> Result<FisherSummary> {
    let (bd, ba) = (beta.beta_d(), beta.beta_a());
    let n_eff = model.n_eff() as f64;
    let ops = model.lambda_operators(beta.lambda())?;
    let n = model.n();
    let d = &ops.d;
    let eye = DMatrix::<f64>::identity(n, n);
    let i_minus_d = &eye - d;
    let proj = range_projector_sym(&ops.etilde, model.n_eff());
    let tr_d = d.trace();
    let tr_d2 = (d * d).trace();
    let i_dd = tr_d2 / (2.0 * bd * bd);
    let i_aa = (&i_minus_d * &i_minus_d * &proj).trace() / (2.0 * ba * ba);
    let i_da = (&i_minus_d * d).trace() / (2.0 * bd * ba);
    let c_det = tr_d2 / n_eff - (tr_d / n_eff).powi(2);
    if c_det <= FISHER_DEGENERACY_TOL {
        return Err(Error::DegenerateFisher(c_det));
    }
    let trace = i_dd + i_aa;
    let det = (n_eff / (2.0 * bd * ba)).powi(2) * c_det;

    let ga = model.g_pinv() * model.a();
    let tr_ga = ga.trace();
    let c_lambda_inf = (&ga * &ga).trace() / n_eff - (tr_ga / n_eff).powi(2);

    Ok(FisherSummary {
        trace,
        det,
        c_det,
        c_lambda_inf,
        min_eig_lower_bound: det / trace,
        matrix: Matrix2::new(i_dd, i_da, i_da, i_aa),
    })
}

/// `c_det(lambda) = Tr[D^2]/N' - (Tr D / N')^2`, without the degeneracy check.
pub fn c_det(model: &GeneralLinearModel, lambda: f64) -> Result<f64> {
    let ops = model.lambda_operators(lambda)?;
    let n_eff = model.n_eff() as f64;
    Ok((&ops.d * &ops.d).trace() / n_eff - (ops.d.trace() / n_eff).powi(2))
}

/// `-2 ln P + 2 n_hyper`.
pub fn abic_value(logml: f64, n_hyper: usize) -> f64 {
    -2.0 * logml + 2.0 * n_hyper as f64
}

pub fn abic(model: &GeneralLinearModel, d: &DVector<f64>, beta_hat: HyperPoint, n_hyper: usize) -> Result<f64> {
    Ok(abic_value(log_marginal(model, d, beta_hat)?.logml, n_hyper))
}

/// Generalized inverse of `E~` restricted to its rank-`N'` range.
pub fn etilde_pinv(model: &GeneralLinearModel, lambda: f64) -> Result<DMatrix<f64>> {
    let ops = model.lambda_operators(lambda)?;
    Ok(pinv_sym_rank(&ops.etilde, model.n_eff()))
}
