//! The two-hyperparameter general linear model
//!
//! ```text
//!   P(d | a) ~ exp(-beta_d U),  U = 1/2 (d - H a)^T E^-1 (d - H a)
//!   P(a)     ~ exp(-beta_a V),  V = 1/2 a^T G a   (flat on null(G))
//! ```
//!
//! so the noise covariance is `E / beta_d`.
//! together with the lambda-dependent operators that every other module
//! consumes. `A = H^T E^-1 H` and `lambda = beta_a / beta_d` throughout.

use std::sync::OnceLock;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

pub const DEFAULT_RANK_TOL: f64 = 1e-10;
const SYMMETRY_TOL: f64 = 1e-10;
const PROPORTIONALITY_TOL: f64 = 1e-8;

/// Hyperparameter coordinates: likelihood precision `beta_d = 1/sigma^2`
/// and prior precision `beta_a = 1/rho^2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HyperPoint {
    beta_d: f64,
    beta_a: f64,
}

impl HyperPoint {
    pub fn new(beta_d: f64, beta_a: f64) -> Result<Self> {
        if !(beta_d > 0.0 && beta_d.is_finite()) {
            return Err(Error::InvalidHyper(format!("beta_d = {beta_d}")));
        }
        if !(beta_a > 0.0 && beta_a.is_finite()) {
            return Err(Error::InvalidHyper(format!("beta_a = {beta_a}")));
        }
        Ok(Self { beta_d, beta_a })
    }

    /// Builds the point from the `(beta_d, lambda)` coordinates.
    pub fn from_lambda(beta_d: f64, lambda: f64) -> Result<Self> {
        Self::new(beta_d, beta_d * lambda)
    }

    pub fn beta_d(&self) -> f64 {
        self.beta_d
    }

    pub fn beta_a(&self) -> f64 {
        self.beta_a
    }

    pub fn lambda(&self) -> f64 {
        self.beta_a / self.beta_d
    }

    /// Euclidean distance in `(beta_d, beta_a)`.
    pub fn distance(&self, other: &HyperPoint) -> f64 {
        (self.beta_d - other.beta_d).hypot(self.beta_a - other.beta_a)
    }
}

/// `(H, E, G)` with cached factorizations.
#[derive(Debug)]
pub struct GeneralLinearModel {
    h: DMatrix<f64>,
    e: DMatrix<f64>,
    g: DMatrix<f64>,
    n: usize,
    m: usize,
    p: usize,
    rank_tol: f64,
    e_chol: Cholesky<f64, Dyn>,
    e_inv: DMatrix<f64>,
    einv_h: DMatrix<f64>,
    a: DMatrix<f64>,
    proportional: bool,
    g_eigenvalues: DVector<f64>,
    g_eigenvectors: DMatrix<f64>,
    pencil: OnceLock<Pencil>,
}

fn frobenius(m: &DMatrix<f64>) -> f64 {
    m.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn check_symmetric(m: &DMatrix<f64>) -> bool {
    let scale = frobenius(m).max(f64::MIN_POSITIVE);
    frobenius(&(m - m.transpose())) <= SYMMETRY_TOL * scale
}

fn symmetrize(m: &DMatrix<f64>) -> DMatrix<f64> {
    (m + m.transpose()) * 0.5
}

/// Number of eigenvalues above `tol * max|eigenvalue|`.
pub fn numerical_rank(eigenvalues: &DVector<f64>, tol: f64) -> usize {
    let max = eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    if max == 0.0 {
        return 0;
    }
    eigenvalues.iter().filter(|&&v| v > tol * max).count()
}

/// Moore-Penrose inverse of a symmetric PSD matrix keeping its `rank`
/// largest eigenvalues.
pub fn pinv_sym_rank(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut out = DMatrix::zeros(n, n);
    for &k in order.iter().take(rank) {
        let v = eig.eigenvectors.column(k);
        out += (v * v.transpose()) / eig.eigenvalues[k];
    }
    out
}

/// Orthogonal projector onto the span of the `rank` leading eigenvectors.
pub fn range_projector_sym(m: &DMatrix<f64>, rank: usize) -> DMatrix<f64> {
    let eig = symmetrize(m).symmetric_eigen();
    let n = m.nrows();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let mut out = DMatrix::zeros(n, n);
    for &k in order.iter().take(rank) {
        let v = eig.eigenvectors.column(k);
        out += v * v.transpose();
    }
    out
}

/// Validates `(H, E, G)` and caches the factorizations. Rejects `G`
/// proportional to `H^T E^-1 H`, where the hyperparameters are not
/// separately identifiable.
pub fn build_model(
    h: DMatrix<f64>,
    e: DMatrix<f64>,
    g: DMatrix<f64>,
    rank_tol: f64,
) -> Result<GeneralLinearModel> {
    build_model_with(h, e, g, rank_tol, false)
}

/// As [`build_model`], optionally accepting the proportional case. Such a
/// model still has a well-defined marginal likelihood, only its Fisher
/// information is singular (`c_det = 0`).
pub fn build_model_with(
    h: DMatrix<f64>,
    e: DMatrix<f64>,
    g: DMatrix<f64>,
    rank_tol: f64,
    allow_proportional: bool,
) -> Result<GeneralLinearModel> {
    let (n, m) = h.shape();
    if n == 0 || m == 0 {
        return Err(Error::Dimension("H must be non-empty".into()));
    }
    if e.shape() != (n, n) {
        return Err(Error::Dimension(format!(
            "E is {}x{}, expected {n}x{n}",
            e.nrows(),
            e.ncols()
        )));
    }
    if g.shape() != (m, m) {
        return Err(Error::Dimension(format!(
            "G is {}x{}, expected {m}x{m}",
            g.nrows(),
            g.ncols()
        )));
    }
    if h.iter().chain(e.iter()).chain(g.iter()).any(|x| !x.is_finite()) {
        return Err(Error::NonFinite);
    }

    if !check_symmetric(&e) {
        return Err(Error::NotPd);
    }
    let e = symmetrize(&e);
    let e_eig = e.clone().symmetric_eigen();
    let e_max = e_eig.eigenvalues.max();
    if !(e_max > 0.0) || e_eig.eigenvalues.iter().any(|&v| v <= rank_tol * e_max) {
        return Err(Error::NotPd);
    }
    let e_chol = e.clone().cholesky().ok_or(Error::NotPd)?;

    if !check_symmetric(&g) {
        return Err(Error::NotPsd);
    }
    let g = symmetrize(&g);
    let g_eig = g.clone().symmetric_eigen();
    let g_max = g_eig.eigenvalues.iter().fold(0.0_f64, |a, v| a.max(v.abs()));
    if g_eig.eigenvalues.iter().any(|&v| v < -rank_tol * g_max) {
        return Err(Error::NotPsd);
    }
    let p = numerical_rank(&g_eig.eigenvalues, rank_tol);
    if p == 0 {
        return Err(Error::Dimension("G has rank zero, so there is no prior to weight".into()));
    }
    if n + p <= m {
        return Err(Error::IllPosed { n_plus_p: n + p, m });
    }

    let e_inv = e_chol.inverse();
    let einv_h = e_chol.solve(&h);
    let a = symmetrize(&(h.transpose() * &einv_h));

    let a_norm = frobenius(&a);
    let proportional = if a_norm > 0.0 {
        let diff = frobenius(&(&g / frobenius(&g) - &a / a_norm));
        if diff <= PROPORTIONALITY_TOL && !allow_proportional {
            return Err(Error::Degenerate(diff));
        }
        diff <= PROPORTIONALITY_TOL
    } else {
        false
    };

    let model = GeneralLinearModel {
        h,
        e,
        g,
        n,
        m,
        p,
        rank_tol,
        e_chol,
        e_inv,
        einv_h,
        a,
        proportional,
        g_eigenvalues: g_eig.eigenvalues,
        g_eigenvectors: g_eig.eigenvectors,
        pencil: OnceLock::new(),
    };
    // A + G must be PD for every lambda > 0 to be solvable.
    model.lambda_operators(1.0)?;
    Ok(model)
}

impl GeneralLinearModel {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn p(&self) -> usize {
        self.p
    }

    /// Effective data dimension `N' = N + P - M`, the rank of `E~`.
    pub fn n_eff(&self) -> usize {
        self.n + self.p - self.m
    }

    pub fn rank_tol(&self) -> f64 {
        self.rank_tol
    }

    /// True when `G` is proportional to `A` (only possible through
    /// [`build_model_with`]).
    pub fn is_proportional(&self) -> bool {
        self.proportional
    }

    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    pub fn e(&self) -> &DMatrix<f64> {
        &self.e
    }

    pub fn g(&self) -> &DMatrix<f64> {
        &self.g
    }

    pub fn e_inv(&self) -> &DMatrix<f64> {
        &self.e_inv
    }

    pub fn e_cholesky(&self) -> &Cholesky<f64, Dyn> {
        &self.e_chol
    }

    /// `E^-1 H`.
    pub fn einv_h(&self) -> &DMatrix<f64> {
        &self.einv_h
    }

    /// `A = H^T E^-1 H`.
    pub fn a(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn g_eigenvalues(&self) -> &DVector<f64> {
        &self.g_eigenvalues
    }

    pub fn g_eigenvectors(&self) -> &DMatrix<f64> {
        &self.g_eigenvectors
    }

    /// Indices of the eigenpairs of `G` counted in `P`.
    pub fn g_range_indices(&self) -> Vec<usize> {
        let max = self
            .g_eigenvalues
            .iter()
            .fold(0.0_f64, |a, v| a.max(v.abs()));
        (0..self.m)
            .filter(|&i| self.g_eigenvalues[i] > self.rank_tol * max)
            .collect()
    }

    /// Moore-Penrose inverse of `G`.
    pub fn g_pinv(&self) -> DMatrix<f64> {
        let mut out = DMatrix::zeros(self.m, self.m);
        for i in self.g_range_indices() {
            let v = self.g_eigenvectors.column(i);
            out += (v * v.transpose()) / self.g_eigenvalues[i];
        }
        out
    }

    fn check_lambda(lambda: f64) -> Result<()> {
        if lambda > 0.0 && lambda.is_finite() {
            Ok(())
        } else {
            Err(Error::InvalidHyper(format!("lambda = {lambda}")))
        }
    }

    fn check_data(&self, d: &DVector<f64>) -> Result<()> {
        if d.len() != self.n {
            return Err(Error::Dimension(format!(
                "data has length {}, expected {}",
                d.len(),
                self.n
            )));
        }
        if d.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(())
    }

    /// `H^T E^-1 d`.
    pub fn project_data(&self, d: &DVector<f64>) -> DVector<f64> {
        self.einv_h.transpose() * d
    }

    /// Dense operator bundle at `lambda`.
    pub fn lambda_operators(&self, lambda: f64) -> Result<LambdaOperators> {
        Self::check_lambda(lambda)?;
        let system = symmetrize(&(&self.a + &self.g * lambda));
        let chol = system.cholesky().ok_or(Error::SingularSystem(lambda))?;
        let logdet = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let cprime = symmetrize(&chol.inverse());
        let j = &cprime * &self.g;
        let etilde = symmetrize(
            &(&self.e_inv - &self.einv_h * &cprime * self.einv_h.transpose()),
        );
        let d = &self.e * &etilde;
        Ok(LambdaOperators {
            lambda,
            cprime,
            j,
            etilde,
            d,
            logdet,
        })
    }

    /// `a_*(d, lambda) = (A + lambda G)^-1 H^T E^-1 d`.
    pub fn regularized_least_squares(&self, d: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        Self::check_lambda(lambda)?;
        self.check_data(d)?;
        let system = symmetrize(&(&self.a + &self.g * lambda));
        let chol = system.cholesky().ok_or(Error::SingularSystem(lambda))?;
        Ok(chol.solve(&self.project_data(d)))
    }

    /// `(U, V) = (1/2 (d-Ha)^T E^-1 (d-Ha), 1/2 a^T G a)`.
    pub fn cost_functions(&self, d: &DVector<f64>, a: &DVector<f64>) -> (f64, f64) {
        let r = d - &self.h * a;
        let u = 0.5 * r.dot(&self.e_chol.solve(&r));
        let v = 0.5 * a.dot(&(&self.g * a));
        (u.max(0.0), v.max(0.0))
    }

    /// Data-dependent terms of the log marginal likelihood at `lambda`,
    /// evaluated on the dense path.
    pub fn profile_terms_dense(&self, d: &DVector<f64>, lambda: f64) -> Result<ProfileTerms> {
        self.check_data(d)?;
        let ops = self.lambda_operators(lambda)?;
        Ok(ops.profile_terms(self, d))
    }

    /// Simultaneous diagonalization of `(A, G)`, computed once on first use.
    pub fn pencil(&self) -> &Pencil {
        self.pencil.get_or_init(|| Pencil::new(self))
    }

    /// Data summary for the spectral fast path.
    pub fn spectral_data(&self, d: &DVector<f64>) -> Result<SpectralData> {
        self.check_data(d)?;
        let pencil = self.pencil();
        let b = self.project_data(d);
        let z = pencil.basis.transpose() * &b;
        // Least squares restricted to the well-determined pencil directions;
        // its residual cost is evaluated directly rather than as a difference.
        let coef = DVector::from_fn(z.len(), |i, _| if pencil.determined(i) { z[i] / pencil.nu[i] } else { 0.0 });
        let (residual, _) = self.cost_functions(d, &(&pencil.basis * coef));
        Ok(SpectralData { z, residual })
    }
}

/// Operators that depend on lambda. Recomputed for every lambda.
#[derive(Debug, Clone)]
pub struct LambdaOperators {
    pub lambda: f64,
    /// `C' = (A + lambda G)^-1`.
    pub cprime: DMatrix<f64>,
    /// `J = C' G`.
    pub j: DMatrix<f64>,
    /// `E~ = E^-1 - E^-1 H C' H^T E^-1`.
    pub etilde: DMatrix<f64>,
    /// `D = E E~`.
    pub d: DMatrix<f64>,
    /// `ln |A + lambda G|`.
    pub logdet: f64,
}

impl LambdaOperators {
    pub fn trace_j(&self) -> f64 {
        self.j.trace()
    }

    pub fn trace_j2(&self) -> f64 {
        (&self.j * &self.j).trace()
    }

    /// Rank of `E~` at the model's rank tolerance.
    pub fn etilde_rank(&self, rank_tol: f64) -> usize {
        numerical_rank(&symmetrize(&self.etilde).symmetric_eigen().eigenvalues, rank_tol)
    }

    pub fn profile_terms(&self, model: &GeneralLinearModel, d: &DVector<f64>) -> ProfileTerms {
        let a_star = &self.cprime * model.project_data(d);
        let (ustar, vstar) = model.cost_functions(d, &a_star);
        let ja = &self.j * &a_star;
        let dvstar = -ja.dot(&(model.g() * &a_star));
        ProfileTerms {
            lambda: self.lambda,
            ustar,
            vstar,
            dvstar,
            trace_j: self.trace_j(),
            trace_j2: self.trace_j2(),
            logdet: self.logdet,
        }
    }
}

/// Everything the log marginal likelihood and its first two derivatives
/// need at one lambda.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfileTerms {
    pub lambda: f64,
    pub ustar: f64,
    pub vstar: f64,
    /// `dV_*/dlambda`, exact: `-(J a_*)^T G a_*`.
    pub dvstar: f64,
    pub trace_j: f64,
    pub trace_j2: f64,
    pub logdet: f64,
}

impl ProfileTerms {
    /// `U_* + lambda V_*`.
    pub fn weighted_cost(&self) -> f64 {
        self.ustar + self.lambda * self.vstar
    }
}

/// Generalized eigendecomposition of the pencil `(A, G)` normalized by
/// `B = A + G`: `V^T B V = I`, `V^T G V = diag(mu)`, `V^T A V = diag(nu)`.
///
/// With it, `A + lambda G = V^-T diag(nu + lambda mu) V^-1` and every
/// lambda-dependent scalar costs O(M).
#[derive(Debug, Clone)]
pub struct Pencil {
    pub basis: DMatrix<f64>,
    pub mu: DVector<f64>,
    pub nu: DVector<f64>,
    pub logdet_b: f64,
}

impl Pencil {
    fn new(model: &GeneralLinearModel) -> Self {
        let b = symmetrize(&(model.a() + model.g()));
        let chol = b
            .clone()
            .cholesky()
            .expect("A + G is positive definite for a validated model");
        let logdet_b = 2.0 * chol.l().diagonal().iter().map(|x| x.ln()).sum::<f64>();
        let l = chol.l();
        let linv = l
            .clone()
            .solve_lower_triangular(&DMatrix::identity(model.m(), model.m()))
            .expect("triangular factor is nonsingular");
        let s = symmetrize(&(&linv * model.g() * linv.transpose()));
        let eig = s.symmetric_eigen();
        let basis = linv.transpose() * &eig.eigenvectors;
        let m = model.m();
        let mut mu = DVector::zeros(m);
        let mut nu = DVector::zeros(m);
        for i in 0..m {
            let v = basis.column(i);
            mu[i] = v.dot(&(model.g() * v)).max(0.0);
            nu[i] = v.dot(&(model.a() * v)).max(0.0);
        }
        Pencil {
            basis,
            mu,
            nu,
            logdet_b,
        }
    }

    /// Directions where `A` alone pins down the solution.
    fn determined(&self, i: usize) -> bool {
        self.nu[i] > DETERMINED_NU
    }

    fn denominators(&self, lambda: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.mu
            .iter()
            .zip(self.nu.iter())
            .map(move |(&mu, &nu)| (mu, nu + lambda * mu))
    }

    /// `ln |A + lambda G|`.
    pub fn logdet(&self, lambda: f64) -> f64 {
        self.logdet_b + self.denominators(lambda).map(|(_, den)| den.ln()).sum::<f64>()
    }

    pub fn trace_j(&self, lambda: f64) -> f64 {
        self.denominators(lambda).map(|(mu, den)| mu / den).sum()
    }

    pub fn trace_j2(&self, lambda: f64) -> f64 {
        self.denominators(lambda)
            .map(|(mu, den)| (mu / den).powi(2))
            .sum()
    }

    /// Profile terms for one data vector, O(M).
    pub fn terms(&self, data: &SpectralData, lambda: f64) -> ProfileTerms {
        let mut fit = 0.0;
        let mut vstar = 0.0;
        let mut dvstar = 0.0;
        let mut trace_j = 0.0;
        let mut trace_j2 = 0.0;
        let mut logdet = self.logdet_b;
        for (i, ((mu, den), &z)) in self.denominators(lambda).zip(data.z.iter()).enumerate() {
            let z2 = z * z;
            // `weighted = residual + fit` with the lambda-free part removed.
            if self.determined(i) {
                fit += z2 * lambda * mu / (self.nu[i] * den);
            } else {
                fit -= z2 / den;
            }
            vstar += 0.5 * mu * z2 / (den * den);
            dvstar -= mu * mu * z2 / (den * den * den);
            trace_j += mu / den;
            trace_j2 += (mu / den).powi(2);
            logdet += den.ln();
        }
        let weighted = (data.residual + 0.5 * fit).max(0.0);
        let ustar = (weighted - lambda * vstar).max(0.0);
        ProfileTerms {
            lambda,
            ustar,
            vstar,
            dvstar,
            trace_j,
            trace_j2,
            logdet,
        }
    }

    /// `a_*` reconstructed from the pencil basis.
    pub fn a_star(&self, data: &SpectralData, lambda: f64) -> DVector<f64> {
        let coef = DVector::from_iterator(
            data.z.len(),
            self.denominators(lambda)
                .zip(data.z.iter())
                .map(|((_, den), &z)| z / den),
        );
        &self.basis * coef
    }
}

/// Pencil directions with `nu` above this count as determined by the data.
const DETERMINED_NU: f64 = 1e-6;

/// `z = V^T H^T E^-1 d`, and the misfit `U` of the least-squares fit over the
/// determined pencil directions.
#[derive(Debug, Clone)]
pub struct SpectralData {
    pub z: DVector<f64>,
    pub residual: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn first_difference_gram(m: usize) -> DMatrix<f64> {
        let mut l = DMatrix::zeros(m - 1, m);
        for i in 0..m - 1 {
            l[(i, i)] = -1.0;
            l[(i, i + 1)] = 1.0;
        }
        l.transpose() * l
    }

    fn small_model() -> GeneralLinearModel {
        let h = DMatrix::from_row_slice(
            5,
            3,
            &[
                1.0, 0.2, 0.0, 0.3, 1.0, -0.4, 0.0, 0.5, 1.0, 0.7, -0.2, 0.1, -0.3, 0.4, 0.6,
            ],
        );
        let e = DMatrix::from_diagonal(&DVector::from_vec(vec![1.0, 2.0, 0.5, 1.5, 1.0]));
        build_model(h, e, first_difference_gram(3), DEFAULT_RANK_TOL).unwrap()
    }

    fn identity_triple(n: usize) -> GeneralLinearModel {
        build_model_with(
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            DMatrix::identity(n, n),
            1e-10,
            true,
        )
        .unwrap()
    }

    #[test]
    fn identity_model_is_well_posed() {
        let model = identity_triple(3);
        assert_eq!((model.n(), model.m(), model.p()), (3, 3, 3));
        assert!(model.is_proportional());
    }

    #[test]
    fn pure_identity_triple_is_degenerate() {
        let err = build_model(
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            1e-10,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Degenerate(_)));
    }

    #[test]
    fn first_difference_prior_has_rank_two() {
        let model = build_model(
            DMatrix::identity(3, 3),
            DMatrix::identity(3, 3),
            first_difference_gram(3),
            1e-10,
        )
        .unwrap();
        assert_eq!(model.p(), 2);
        assert_eq!(model.n_eff(), 2);
    }

    #[test]
    fn ill_posed_is_rejected() {
        let h = DMatrix::from_fn(2, 4, |i, j| (i + 2 * j) as f64 * 0.1 + 1.0);
        let mut g = DMatrix::zeros(4, 4);
        g[(0, 0)] = 1.0;
        let err = build_model(h, DMatrix::identity(2, 2), g, 1e-10).unwrap_err();
        assert!(matches!(err, Error::IllPosed { n_plus_p: 3, m: 4 }));
    }

    #[test]
    fn bad_noise_shape_is_rejected() {
        let mut e = DMatrix::identity(3, 3);
        e[(2, 2)] = -1.0;
        let err = build_model(DMatrix::identity(3, 3), e, first_difference_gram(3), 1e-10);
        assert!(matches!(err, Err(Error::NotPd)));
        let mut g = first_difference_gram(3);
        g[(0, 0)] = -3.0;
        let err = build_model(DMatrix::identity(3, 3), DMatrix::identity(3, 3), g, 1e-10);
        assert!(matches!(err, Err(Error::NotPsd)));
    }

    #[test]
    fn scalar_identity_operators() {
        let ops = identity_triple(3).lambda_operators(1.0).unwrap();
        let half = DMatrix::<f64>::identity(3, 3) * 0.5;
        for m in [&ops.cprime, &ops.j, &ops.etilde, &ops.d] {
            assert!((m - &half).norm() < 1e-14);
        }
    }

    #[test]
    fn regularized_solution_scalar_case() {
        let model = identity_triple(2);
        let d = DVector::from_vec(vec![2.0, 4.0]);
        let a = model.regularized_least_squares(&d, 1.0).unwrap();
        assert!((a - DVector::from_vec(vec![1.0, 2.0])).norm() < 1e-14);
        let zero = model
            .regularized_least_squares(&DVector::zeros(2), 0.7)
            .unwrap();
        assert!(zero.norm() == 0.0);
    }

    #[test]
    fn trace_identity_and_small_lambda_limit() {
        let model = small_model();
        for &lambda in &[0.01, 1.0, 30.0] {
            let ops = model.lambda_operators(lambda).unwrap();
            let total = (&ops.cprime * model.a()).trace() + lambda * ops.trace_j();
            assert!((total - model.m() as f64).abs() < 1e-10);
        }
        // Normal-equation OLS, written out independently.
        let d = DVector::from_vec(vec![0.4, -1.2, 2.0, 0.1, 0.9]);
        let ht_w = model.h().transpose() * model.e_inv();
        let ols = (&ht_w * model.h()).lu().solve(&(&ht_w * &d)).unwrap();
        let reg = model.regularized_least_squares(&d, 1e-12).unwrap();
        assert!((ols - reg).norm() < 1e-9);
    }

    #[test]
    fn djdlambda_is_minus_j_squared() {
        let model = small_model();
        let lambda = 0.7;
        let step = 1e-5 * lambda;
        let jp = model.lambda_operators(lambda + step).unwrap().j;
        let jm = model.lambda_operators(lambda - step).unwrap().j;
        let j = model.lambda_operators(lambda).unwrap().j;
        let fd = (jp - jm) / (2.0 * step);
        let exact = -(&j * &j);
        assert!((fd - &exact).norm() <= 1e-5 * exact.norm());
    }

    #[test]
    fn etilde_rank_is_n_plus_p_minus_m() {
        let model = small_model();
        for &lambda in &[1e-3, 0.5, 20.0] {
            let ops = model.lambda_operators(lambda).unwrap();
            assert_eq!(ops.etilde_rank(1e-10), model.n_eff());
        }
    }

    #[test]
    fn zero_residual_and_null_space_costs() {
        let model = small_model();
        let a = DVector::from_vec(vec![0.3, -1.0, 2.0]);
        let d = model.h() * &a;
        assert!(model.cost_functions(&d, &a).0 < 1e-28);
        let ones = DVector::from_element(3, 1.7);
        assert!(model.cost_functions(&d, &ones).1 < 1e-24);
    }

    #[test]
    fn pencil_matches_dense_terms() {
        let model = small_model();
        let d = DVector::from_vec(vec![0.4, -1.2, 2.0, 0.1, 0.9]);
        let data = model.spectral_data(&d).unwrap();
        for &lambda in &[1e-4, 0.3, 1.0, 7.0, 1e3] {
            let dense = model.profile_terms_dense(&d, lambda).unwrap();
            let fast = model.pencil().terms(&data, lambda);
            let close = |a: f64, b: f64| (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1e-3);
            assert!(close(dense.ustar, fast.ustar), "{dense:?} {fast:?}");
            assert!(close(dense.vstar, fast.vstar));
            assert!(close(dense.dvstar, fast.dvstar));
            assert!(close(dense.trace_j, fast.trace_j));
            assert!(close(dense.trace_j2, fast.trace_j2));
            assert!(close(dense.logdet, fast.logdet));
            let a_dense = model.regularized_least_squares(&d, lambda).unwrap();
            assert!((a_dense - model.pencil().a_star(&data, lambda)).norm() < 1e-9);
        }
    }
}
