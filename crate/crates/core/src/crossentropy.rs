//! Generalization cross-entropy `<-ln P(d; beta)>_Q` for Gaussian or
//! second-moment-specified `Q`, its profile in lambda, the strong-modality
//! constant `delta_H`, and the effective true hyperparameter `beta_0'`.
//!
//! Only `S = <d d^T>_Q` enters, since `-ln P` is quadratic in `d`:
//!
//! ```text
//!   CE(beta) = beta_d/2 Tr[E~ S] - N'/2 ln beta_d - P/2 ln lambda + 1/2 ln|A + lambda G| + N'/2 ln 2pi
//! ```
//!
//! For `Q = P(d; beta_0)` we take `S = E~_0^+ / beta_d0`, which carries no
//! mass along `null(E~) = H null(G)`. That component never changes a
//! difference or derivative of `CE` because `E~` annihilates it.

use nalgebra::{DMatrix, DVector, Vector2};

use crate::error::{Error, Result};
use crate::linmodel::{pinv_sym_rank, GeneralLinearModel, HyperPoint, Pencil};
use crate::marginal::{c_det, Dims};
use crate::optimize::{maximize_log_lambda, SearchOptions};
use crate::sampler::TailFamily;

const LN_2PI: f64 = 1.837_877_066_409_345_3;

#[derive(Debug, Clone, PartialEq)]
pub enum TrueDistribution {
    InFamily(HyperPoint),
    SecondMoment {
        mean: DVector<f64>,
        cov: DMatrix<f64>,
        tail: TailFamily,
    },
}

impl TrueDistribution {
    /// Gaussian-predictive second moments of `P(d; beta0)` rescaled by
    /// `scale`, carried by the given tail family. The covariance is the
    /// null-space-free `E~_0^+ / beta_d0`.
    pub fn scaled_predictive(model: &GeneralLinearModel, beta0: HyperPoint, scale: f64, tail: TailFamily) -> Result<Self> {
        let cov = predictive_second_moment(model, beta0)? * scale;
        Ok(TrueDistribution::SecondMoment {
            mean: DVector::zeros(model.n()),
            cov,
            tail,
        })
    }
}

/// `E~(lambda_0)^+ / beta_d0`.
pub fn predictive_second_moment(model: &GeneralLinearModel, beta0: HyperPoint) -> Result<DMatrix<f64>> {
    let ops = model.lambda_operators(beta0.lambda())?;
    Ok(pinv_sym_rank(&ops.etilde, model.n_eff()) / beta0.beta_d())
}

/// `S = <d d^T>_Q`.
pub fn second_moment(model: &GeneralLinearModel, q: &TrueDistribution) -> Result<DMatrix<f64>> {
    match q {
        TrueDistribution::InFamily(beta0) => predictive_second_moment(model, *beta0),
        TrueDistribution::SecondMoment { mean, cov, .. } => {
            let n = model.n();
            if mean.len() != n || cov.shape() != (n, n) {
                return Err(Error::Dimension(format!(
                    "Q has mean length {} and covariance {}x{}, model has N = {n}",
                    mean.len(),
                    cov.nrows(),
                    cov.ncols()
                )));
            }
            let sym = (cov + cov.transpose()) * 0.5;
            let eig = sym.clone().symmetric_eigen();
            let max = eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
            if eig.eigenvalues.iter().any(|&v| v < -1e-10 * max) {
                return Err(Error::NullSpaceMismatch("covariance is not PSD".into()));
            }
            Ok(sym + mean * mean.transpose())
        }
    }
}

/// Cross-entropy evaluator for a fixed `S`, O(M) per lambda.
pub struct CrossEntropy<'a> {
    model: &'a GeneralLinearModel,
    dims: Dims,
    tr_einv_s: f64,
    weights: DVector<f64>,
}

impl<'a> CrossEntropy<'a> {
    pub fn new(model: &'a GeneralLinearModel, q: &TrueDistribution) -> Result<Self> {
        let s = second_moment(model, q)?;
        Self::from_second_moment(model, &s)
    }

    pub fn from_second_moment(model: &'a GeneralLinearModel, s: &DMatrix<f64>) -> Result<Self> {
        let pencil = model.pencil();
        let k = model.einv_h() * &pencil.basis;
        let sk = s * &k;
        let weights = DVector::from_fn(model.m(), |i, _| k.column(i).dot(&sk.column(i)));
        let tr_einv_s = (model.e_inv() * s).trace();
        let ce = CrossEntropy {
            model,
            dims: Dims::of(model),
            tr_einv_s,
            weights,
        };
        // Tr[E~ S] is nonincreasing in lambda; its infimum is the lambda -> inf limit.
        if !(ce.tr_es(1e12) > 1e-14 * tr_einv_s.abs().max(f64::MIN_POSITIVE)) {
            return Err(Error::NullSpaceMismatch(
                "Q has no mass in the range of E~".into(),
            ));
        }
        Ok(ce)
    }

    fn pencil(&self) -> &Pencil {
        self.model.pencil()
    }

    fn sums(&self, lambda: f64) -> (f64, f64, f64) {
        let p = self.pencil();
        let (mut s0, mut s1, mut s2) = (0.0, 0.0, 0.0);
        for i in 0..self.dims.m {
            let (mu, den) = (p.mu[i], p.nu[i] + lambda * p.mu[i]);
            let w = self.weights[i];
            s0 += w / den;
            s1 += w * mu / (den * den);
            s2 += w * mu * mu / (den * den * den);
        }
        (s0, s1, s2)
    }

    /// `Tr[E~(lambda) S]`.
    pub fn tr_es(&self, lambda: f64) -> f64 {
        (self.tr_einv_s - self.sums(lambda).0).max(0.0)
    }

    /// `(T, dT/dlambda, d^2T/dlambda^2)` for `T = Tr[E~ S]`.
    pub fn tr_es_derivatives(&self, lambda: f64) -> (f64, f64, f64) {
        let (s0, s1, s2) = self.sums(lambda);
        ((self.tr_einv_s - s0).max(0.0), s1, -2.0 * s2)
    }

    pub fn value(&self, beta: HyperPoint) -> f64 {
        let lam = beta.lambda();
        let n_eff = self.dims.n_eff();
        0.5 * beta.beta_d() * self.tr_es(lam) - 0.5 * n_eff * beta.beta_d().ln()
            - 0.5 * self.dims.p as f64 * lam.ln()
            + 0.5 * self.pencil().logdet(lam)
            + 0.5 * n_eff * LN_2PI
    }

    /// Gradient of the cross-entropy in `(beta_d, beta_a)`.
    pub fn gradient_beta(&self, beta: HyperPoint) -> Vector2<f64> {
        let (bd, lam) = (beta.beta_d(), beta.lambda());
        let (t, dt, _) = self.tr_es_derivatives(lam);
        let g_bd = 0.5 * t - 0.5 * self.dims.n_eff() / bd;
        let g_lam = 0.5 * bd * dt - 0.5 * self.dims.p as f64 / lam + 0.5 * self.pencil().trace_j(lam);
        Vector2::new(g_bd - lam / bd * g_lam, g_lam / bd)
    }

    /// Conditional mode `beta~_d(lambda) = N' / Tr[E~ S]`.
    pub fn profile_betad(&self, lambda: f64) -> f64 {
        self.dims.n_eff() / self.tr_es(lambda)
    }

    /// Cross-entropy along `(beta~_d(lambda), lambda)`.
    pub fn profile_value(&self, lambda: f64) -> f64 {
        let n_eff = self.dims.n_eff();
        let bd = self.profile_betad(lambda);
        0.5 * n_eff - 0.5 * n_eff * bd.ln() - 0.5 * self.dims.p as f64 * lambda.ln()
            + 0.5 * self.pencil().logdet(lambda)
            + 0.5 * n_eff * LN_2PI
    }

    /// `d/dlambda <ln P(d; beta~_d(lambda), lambda)>_Q`, general-S route.
    pub fn profile_gradient(&self, lambda: f64) -> f64 {
        let (t, dt, _) = self.tr_es_derivatives(lambda);
        let n_eff = self.dims.n_eff();
        -0.5 * n_eff * dt / t + 0.5 * self.dims.p as f64 / lambda - 0.5 * self.pencil().trace_j(lambda)
    }

    /// Second lambda-derivative of the profile `<ln P>`.
    pub fn profile_second(&self, lambda: f64) -> f64 {
        let (t, dt, d2t) = self.tr_es_derivatives(lambda);
        let n_eff = self.dims.n_eff();
        -0.5 * n_eff * (d2t / t - (dt / t).powi(2)) - 0.5 * self.dims.p as f64 / (lambda * lambda)
            + 0.5 * self.pencil().trace_j2(lambda)
    }
}

/// Dense `<-ln P(d; beta)>_Q`.
pub fn cross_entropy(model: &GeneralLinearModel, q: &TrueDistribution, beta: HyperPoint) -> Result<f64> {
    let s = second_moment(model, q)?;
    let ops = model.lambda_operators(beta.lambda())?;
    let n_eff = model.n_eff() as f64;
    Ok(0.5 * beta.beta_d() * (&ops.etilde * s).trace() - 0.5 * n_eff * beta.beta_d().ln()
        - 0.5 * model.p() as f64 * beta.lambda().ln()
        + 0.5 * ops.logdet
        + 0.5 * n_eff * LN_2PI)
}

/// `beta~_d(lambda) = beta_d0 N' / Tr(E~ E~_0^+)`.
pub fn profile_betad(model: &GeneralLinearModel, lambda: f64, lambda0: f64, betad0: f64) -> Result<f64> {
    let ops = model.lambda_operators(lambda)?;
    let e0p = pinv_sym_rank(&model.lambda_operators(lambda0)?.etilde, model.n_eff());
    Ok(betad0 * model.n_eff() as f64 / (&ops.etilde * e0p).trace())
}

/// A generalized inverse of `D_0 = E E~_0`, namely `E~_0^+ E^-1`.
fn d0_ginv(model: &GeneralLinearModel, lambda0: f64) -> Result<DMatrix<f64>> {
    let e0p = pinv_sym_rank(&model.lambda_operators(lambda0)?.etilde, model.n_eff());
    Ok(e0p * model.e_inv())
}

/// Population profile gradient in the `D` form:
/// `N'/(2 lambda) (Tr[D^2 D_0^+] - Tr[D D_0^+] Tr D / N') / Tr[D D_0^+]`.
/// Independent of `beta_d0`, which only scales `beta~_d`.
pub fn profile_gradient(model: &GeneralLinearModel, lambda: f64, lambda0: f64, _betad0: f64) -> Result<f64> {
    let d = model.lambda_operators(lambda)?.d;
    let d0g = d0_ginv(model, lambda0)?;
    let n_eff = model.n_eff() as f64;
    let dd0 = (&d * &d0g).trace();
    let d2d0 = (&d * &d * &d0g).trace();
    Ok(n_eff / (2.0 * lambda) * (d2d0 - dd0 * d.trace() / n_eff) / dd0)
}

/// `d/dlambda <ln P(d; beta_d0, lambda)>_{beta_0}` with `beta_d` known:
/// `(1/2 lambda) Tr[(H G G^+ - D D_0^+ H) C' H^T E^-1]`.
///
/// For `P = M` this is `(1/2 lambda) Tr[H C' H^T E^-1 (I - D D_0^+)]`. With a
/// rank-deficient `G` that shorter form is off by `(M - P)/(2 lambda)` and
/// does not vanish at `lambda_0`, so the `G G^+` projector is kept.
pub fn known_betad_gradient(model: &GeneralLinearModel, lambda: f64, lambda0: f64) -> Result<f64> {
    let ops = model.lambda_operators(lambda)?;
    let d0g = d0_ginv(model, lambda0)?;
    let gg = model.g() * model.g_pinv();
    let lhs = model.h() * gg - &ops.d * d0g * model.h();
    Ok((lhs * &ops.cprime * model.einv_h().transpose()).trace() / (2.0 * lambda))
}

/// Strong-modality constant `delta_H(lambda_0)`.
pub fn delta_h(model: &GeneralLinearModel, lambda0: f64) -> Result<f64> {
    let ops = model.lambda_operators(lambda0)?;
    let n_eff = model.n_eff() as f64;
    let tr_d0 = ops.d.trace();
    let gap = n_eff - tr_d0;
    if !(gap > 0.0) {
        return Err(Error::NonPositive(gap));
    }
    let first = (6.0 * (1.0 + (2.0 * n_eff - tr_d0) / gap * lambda0)).powi(-2);
    let cd = c_det(model, lambda0)?;
    let second = cd / 27.0 * (lambda0 + gap / n_eff * (1.0 + lambda0)).powi(-2);
    let delta = first.max(second);
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::NonPositive(delta));
    }
    Ok(delta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProfileCurve {
    pub lambda_grid: Vec<f64>,
    pub betad_tilde: Vec<f64>,
    pub profile_gradient: Vec<f64>,
    pub crossing_count: usize,
}

/// Number of sign changes, skipping exact zeros.
pub fn count_sign_changes(values: &[f64]) -> usize {
    let mut last = 0.0_f64;
    let mut count = 0;
    for &v in values {
        if v == 0.0 || v.is_nan() {
            continue;
        }
        if last != 0.0 && (v > 0.0) != (last > 0.0) {
            count += 1;
        }
        last = v;
    }
    count
}

pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| (a + (b - a) * i as f64 / (points - 1).max(1) as f64).exp())
        .collect()
}

/// Profile of the cross-entropy over a lambda grid.
pub fn profile_curve(ce: &CrossEntropy<'_>, lambda_grid: &[f64]) -> ProfileCurve {
    let betad_tilde: Vec<f64> = lambda_grid.iter().map(|&l| ce.profile_betad(l)).collect();
    let grads: Vec<f64> = lambda_grid.iter().map(|&l| ce.profile_gradient(l)).collect();
    ProfileCurve {
        lambda_grid: lambda_grid.to_vec(),
        betad_tilde,
        crossing_count: count_sign_changes(&grads),
        profile_gradient: grads,
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EffectiveHyper {
    pub beta: HyperPoint,
    pub cross_entropy: f64,
    pub gradient_norm: f64,
    /// The minimum sits on the search box edge.
    pub boundary: bool,
    /// The scan found two or more local minima of the profile.
    pub multimodal: bool,
}

impl EffectiveHyper {
    /// Converts a boundary optimum into [`Error::BoundaryHit`].
    pub fn interior(self) -> Result<Self> {
        if self.boundary {
            Err(Error::BoundaryHit {
                lambda: self.beta.lambda(),
            })
        } else {
            Ok(self)
        }
    }
}

/// `beta_0' = argmin_beta <-ln P(d; beta)>_Q` by profile search in lambda.
pub fn effective_true_hyper(model: &GeneralLinearModel, q: &TrueDistribution, search_box: &SearchOptions) -> Result<EffectiveHyper> {
    let ce = CrossEntropy::new(model, q)?;
    let f = |t: f64| -ce.profile_value(t.exp());
    let newton = |t: f64| {
        let l = t.exp();
        let g = ce.profile_gradient(l);
        let h = ce.profile_second(l);
        (l * g, l * g + l * l * h)
    };
    let search = maximize_log_lambda(f, Some(newton), search_box);
    let lambda = search.lambda();
    let beta = HyperPoint::from_lambda(ce.profile_betad(lambda), lambda)?;

    let decades = (search_box.lambda_max / search_box.lambda_min).log10();
    let points = (decades * search_box.scan_points_per_decade as f64).ceil() as usize + 1;
    let values: Vec<f64> = log_grid(search_box.lambda_min, search_box.lambda_max, points)
        .into_iter()
        .map(|l| ce.profile_value(l))
        .collect();
    let minima = (0..values.len())
        .filter(|&i| {
            let left = i == 0 || values[i] < values[i - 1];
            let right = i + 1 == values.len() || values[i] < values[i + 1];
            left && right
        })
        .count();

    Ok(EffectiveHyper {
        beta,
        cross_entropy: ce.value(beta),
        gradient_norm: ce.gradient_beta(beta).norm(),
        boundary: search.boundary,
        multimodal: minima >= 2,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linmodel::build_model_with;
    use crate::problem::random_model;
    use crate::sampler::SeedSpec;

    fn instance(seed: u64, n: usize, m: usize, p: usize) -> GeneralLinearModel {
        random_model(n, m, p, &mut SeedSpec::new(seed, 0).rng()).unwrap()
    }

    #[test]
    fn in_family_minimum_is_beta0() {
        let model = instance(1, 14, 8, 6);
        let beta0 = HyperPoint::new(1.3, 0.6).unwrap();
        let q = TrueDistribution::InFamily(beta0);
        let ce = CrossEntropy::new(&model, &q).unwrap();
        let g = ce.gradient_beta(beta0);
        assert!(g.norm() < 1e-8, "{g}");
        let dense = cross_entropy(&model, &q, beta0).unwrap();
        assert!((dense - ce.value(beta0)).abs() < 1e-9 * dense.abs());
        // Mean of U_* at lambda_0: Tr[E E~_0] / (2 beta_d0).
        let ops = model.lambda_operators(beta0.lambda()).unwrap();
        let s = second_moment(&model, &q).unwrap();
        let a_map = &ops.cprime * model.einv_h().transpose();
        let resid = DMatrix::<f64>::identity(14, 14) - model.h() * &a_map;
        let mean_u = 0.5 * (resid.transpose() * model.e_inv() * &resid * &s).trace();
        assert!((mean_u - ops.d.trace() / (2.0 * beta0.beta_d())).abs() < 1e-9);
    }

    #[test]
    fn kl_is_nonnegative_on_a_grid() {
        let model = instance(2, 12, 8, 8);
        let beta0 = HyperPoint::new(0.8, 2.0).unwrap();
        let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(beta0)).unwrap();
        let base = ce.value(beta0);
        for &bd in &log_grid(1e-2, 1e2, 15) {
            for &ba in &log_grid(1e-2, 1e2, 15) {
                let v = ce.value(HyperPoint::new(bd, ba).unwrap());
                assert!(v - base >= -1e-10);
            }
        }
    }

    #[test]
    fn profile_betad_properties() {
        let model = instance(3, 16, 10, 8);
        let (l0, b0) = (0.7, 1.9);
        assert!((profile_betad(&model, l0, l0, b0).unwrap() - b0).abs() < 1e-10);
        let grid = log_grid(1e-3, 1e3, 50);
        let vals: Vec<f64> = grid.iter().map(|&l| profile_betad(&model, l, l0, b0).unwrap()).collect();
        assert!(vals.windows(2).all(|w| w[1] < w[0]));
        let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(HyperPoint::from_lambda(b0, l0).unwrap())).unwrap();
        for (&l, &v) in grid.iter().zip(&vals) {
            assert!((ce.profile_betad(l) / v - 1.0).abs() < 1e-8);
        }
    }

    #[test]
    fn scalar_profile_betad() {
        // Per coordinate with H = E = G = 1: E~ = lambda/(1+lambda), so
        // beta~_d = beta_d0 (1+lambda) lambda0 / (lambda (1+lambda0)).
        let n = 3;
        let model = build_model_with(DMatrix::identity(n, n), DMatrix::identity(n, n), DMatrix::identity(n, n), 1e-10, true).unwrap();
        let (l, l0, b0) = (2.0, 0.5, 1.5);
        let expected = b0 * (1.0 + l) * l0 / (l * (1.0 + l0));
        assert!((profile_betad(&model, l, l0, b0).unwrap() - expected).abs() < 1e-12);
        // Known beta_d: HC'H^T E^-1 = 1/(1+lambda), D D0^+ = E~/E~_0.
        let kb = known_betad_gradient(&model, l, l0).unwrap();
        let per = (1.0 / (1.0 + l)) * (1.0 - (l / (1.0 + l)) * ((1.0 + l0) / l0)) / (2.0 * l);
        assert!((kb - n as f64 * per).abs() < 1e-12);
    }

    #[test]
    fn profile_gradient_routes_agree() {
        let model = instance(4, 18, 12, 9);
        let beta0 = HyperPoint::from_lambda(1.1, 0.4).unwrap();
        let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(beta0)).unwrap();
        assert!(profile_gradient(&model, 0.4, 0.4, 1.1).unwrap().abs() < 1e-10);
        for &l in &[1e-3, 0.05, 0.4, 3.0, 200.0] {
            let square_form = profile_gradient(&model, l, 0.4, 1.1).unwrap();
            let general = ce.profile_gradient(l);
            let scale = model.p() as f64 / (2.0 * l);
            assert!((square_form - general).abs() <= 1e-8 * square_form.abs().max(scale), "{l} {square_form} {general}");
            // Finite differences of -CE along the profile.
            let h = 1e-5 * l;
            let fd = -(ce.profile_value(l + h) - ce.profile_value(l - h)) / (2.0 * h);
            // Floor for the zero crossing, where a relative test is meaningless.
            assert!((fd - general).abs() <= 1e-5 * general.abs().max(1e-3 * scale), "{l} {fd} {general}");
        }
    }

    #[test]
    fn paper_generalized_inverse_matches_moore_penrose() {
        let model = instance(5, 12, 8, 5);
        let l0 = 0.9;
        let d0 = model.lambda_operators(l0).unwrap().d;
        let pinv = d0.clone().pseudo_inverse(1e-10).unwrap();
        let d = model.lambda_operators(2.5).unwrap().d;
        let ours = d0_ginv(&model, l0).unwrap();
        assert!(((&d * &pinv).trace() - (&d * &ours).trace()).abs() < 1e-8);
        assert!(((&d * &d * &pinv).trace() - (&d * &d * &ours).trace()).abs() < 1e-8);
    }

    #[test]
    fn null_space_trace_identity() {
        let model = instance(6, 10, 7, 4);
        let ops = model.lambda_operators(1.3).unwrap();
        let dd = &ops.d * ops.d.clone().pseudo_inverse(1e-10).unwrap();
        let gg = model.g() * model.g_pinv();
        let lhs = (dd * model.h() - model.h() * gg) * &ops.cprime * model.einv_h().transpose();
        assert!(lhs.trace().abs() < 1e-9);
    }

    #[test]
    fn known_betad_gradient_single_crossing() {
        let model = instance(7, 14, 9, 7);
        let l0 = 1.7;
        assert!(known_betad_gradient(&model, l0, l0).unwrap().abs() < 1e-10);
        // Against finite differences of the cross-entropy at beta_d = beta_d0.
        let b0 = 0.6;
        let ce = CrossEntropy::new(&model, &TrueDistribution::InFamily(HyperPoint::from_lambda(b0, l0).unwrap())).unwrap();
        for &l in &[0.01, 0.5, 4.0, 90.0] {
            let h = 1e-5 * l;
            let f = |x: f64| ce.value(HyperPoint::from_lambda(b0, x).unwrap());
            let fd = -(f(l + h) - f(l - h)) / (2.0 * h);
            let exact = known_betad_gradient(&model, l, l0).unwrap();
            assert!((fd - exact).abs() < 1e-5 * exact.abs().max(1e-6), "{l} {fd} {exact}");
        }
        let grads: Vec<f64> = log_grid(1e-6, 1e6, 241)
            .iter()
            .map(|&l| known_betad_gradient(&model, l, l0).unwrap())
            .collect();
        assert_eq!(count_sign_changes(&grads), 1);
    }

    #[test]
    fn delta_h_and_effective_hyper() {
        let model = instance(8, 20, 12, 10);
        let beta0 = HyperPoint::new(1.0, 2.5).unwrap();
        assert!(delta_h(&model, beta0.lambda()).unwrap() > 0.0);
        let eff = effective_true_hyper(&model, &TrueDistribution::InFamily(beta0), &SearchOptions::default()).unwrap();
        assert!(!eff.boundary && !eff.multimodal);
        assert!((eff.beta.beta_d() / beta0.beta_d() - 1.0).abs() < 1e-6);
        assert!((eff.beta.beta_a() / beta0.beta_a() - 1.0).abs() < 1e-6);
        assert!(eff.gradient_norm < 1e-8 * model.n_eff() as f64);

        let doubled = TrueDistribution::scaled_predictive(&model, beta0, 2.0, TailFamily::Gaussian).unwrap();
        let eff = effective_true_hyper(&model, &doubled, &SearchOptions::default()).unwrap();
        assert!((eff.beta.beta_d() / (beta0.beta_d() / 2.0) - 1.0).abs() < 1e-6);
        assert!((eff.beta.lambda() / beta0.lambda() - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sign_change_counting() {
        assert_eq!(count_sign_changes(&[1.0, 0.5, 0.0, -0.2, -1.0]), 1);
        assert_eq!(count_sign_changes(&[1.0, -1.0, 1.0]), 2);
        assert_eq!(count_sign_changes(&[0.0, 0.0]), 0);
    }
}
