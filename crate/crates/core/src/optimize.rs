//! Bracketed one-dimensional maximization on `t = ln lambda`.

const INV_PHI: f64 = 0.618_033_988_749_894_8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchOptions {
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Coarse scan density before golden-section.
    pub scan_points_per_decade: usize,
    /// Final bracket width in `ln lambda`.
    pub tol: f64,
    pub max_golden_iterations: usize,
    pub max_newton_iterations: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            lambda_min: 1e-8,
            lambda_max: 1e8,
            scan_points_per_decade: 8,
            tol: 1e-10,
            max_golden_iterations: 200,
            max_newton_iterations: 8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchResult {
    pub t: f64,
    pub value: f64,
    pub evaluations: usize,
    pub boundary: bool,
}

impl SearchResult {
    pub fn lambda(&self) -> f64 {
        self.t.exp()
    }
}

/// Maximizes `f(t)` over `t in [ln lambda_min, ln lambda_max]`.
///
/// A coarse scan picks the best grid point (ties go to the smaller `t`),
/// golden-section shrinks the neighbouring bracket, and `newton(t)`,
/// returning the first and second derivatives in `t`, polishes the result.
/// Newton steps that leave the bracket or lower `f` are rejected.
pub fn maximize_log_lambda<F, N>(f: F, newton: Option<N>, opts: &SearchOptions) -> SearchResult
where
    F: Fn(f64) -> f64,
    N: Fn(f64) -> (f64, f64),
{
    let lo = opts.lambda_min.ln();
    let hi = opts.lambda_max.ln();
    let decades = (opts.lambda_max / opts.lambda_min).log10();
    let count = ((decades * opts.scan_points_per_decade as f64).ceil() as usize).max(2) + 1;
    let step = (hi - lo) / (count - 1) as f64;
    let mut evaluations = 0;
    let mut eval = |t: f64| {
        evaluations += 1;
        let v = f(t);
        if v.is_nan() {
            f64::NEG_INFINITY
        } else {
            v
        }
    };

    let mut best = (0, f64::NEG_INFINITY);
    for i in 0..count {
        let v = eval(lo + step * i as f64);
        if v > best.1 {
            best = (i, v);
        }
    }
    let mut a = lo + step * best.0.saturating_sub(1) as f64;
    let mut b = (lo + step * (best.0 + 1) as f64).min(hi);
    let (bracket_lo, bracket_hi) = (a, b);

    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = eval(c);
    let mut fd = eval(d);
    for _ in 0..opts.max_golden_iterations {
        if (b - a).abs() <= opts.tol {
            break;
        }
        // `>=` keeps the left point on ties.
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = eval(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = eval(d);
        }
    }
    let (mut t, mut value) = if fc >= fd { (c, fc) } else { (d, fd) };
    // The scan point itself may still be the best, e.g. on a flat or edge profile.
    let t_scan = lo + step * best.0 as f64;
    if best.1 > value {
        t = t_scan;
        value = best.1;
    }
    for (edge_t, edge_v) in [(a, eval(a)), (b, eval(b))] {
        if edge_v > value {
            t = edge_t;
            value = edge_v;
        }
    }

    if let Some(newton) = newton {
        for _ in 0..opts.max_newton_iterations {
            let (g, h) = newton(t);
            if !(h < 0.0) || !g.is_finite() {
                break;
            }
            let next = t - g / h;
            if !(bracket_lo..=bracket_hi).contains(&next) {
                break;
            }
            let v = eval(next);
            // Profile values carry rounding noise near 1e-12 relative, which
            // golden-section alone cannot see through.
            if v < value - 1e-10 * value.abs().max(1.0) {
                break;
            }
            let moved = (next - t).abs();
            t = next;
            value = v;
            if moved <= 1e-14 * t.abs().max(1.0) {
                break;
            }
        }
    }

    let edge = opts.tol * 10.0;
    let boundary = t - lo <= edge || hi - t <= edge;
    SearchResult {
        t,
        value,
        evaluations,
        boundary,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoNewton = fn(f64) -> (f64, f64);

    #[test]
    fn finds_interior_quadratic_maximum() {
        let target = 2.5_f64.ln();
        let f = |t: f64| -(t - target).powi(2);
        let r = maximize_log_lambda(f, None::<NoNewton>, &SearchOptions::default());
        assert!((r.t - target).abs() < 1e-7);
        assert!(!r.boundary);
        let newton = |t: f64| (-2.0 * (t - target), -2.0);
        let r = maximize_log_lambda(f, Some(newton), &SearchOptions::default());
        assert!((r.t - target).abs() < 1e-13);
    }

    #[test]
    fn monotone_profile_hits_the_edge() {
        let r = maximize_log_lambda(|t: f64| t, None::<NoNewton>, &SearchOptions::default());
        assert!(r.boundary);
        assert!((r.lambda() / 1e8 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn flat_profile_picks_smallest_lambda() {
        let r = maximize_log_lambda(|_| 1.0, None::<NoNewton>, &SearchOptions::default());
        assert!(r.boundary);
        assert!((r.lambda() / 1e-8 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn picks_global_of_two_modes() {
        let f = |t: f64| (-(t - 3.0).powi(2)).exp() + 2.0 * (-(t + 4.0).powi(2)).exp();
        let r = maximize_log_lambda(f, None::<NoNewton>, &SearchOptions::default());
        assert!((r.t + 4.0).abs() < 1e-3);
    }
}
