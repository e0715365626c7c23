//! Globally adaptive Gauss-Kronrod (7/15) quadrature of vector-valued
//! integrands on a finite interval.

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];

const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];

// Gauss weights for the nodes XGK[1], XGK[3], XGK[5] and 0.
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadOptions {
    pub rel_tol: f64,
    pub max_intervals: usize,
}

impl Default for QuadOptions {
    fn default() -> Self {
        QuadOptions {
            rel_tol: 1e-11,
            max_intervals: 400,
        }
    }
}

struct Piece<const K: usize> {
    a: f64,
    b: f64,
    value: [f64; K],
    error: [f64; K],
}

fn gk15<const K: usize, F: Fn(f64) -> [f64; K]>(f: &F, a: f64, b: f64) -> Piece<K> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = [0.0; K];
    let mut gauss = [0.0; K];
    let center = f(c);
    for k in 0..K {
        kron[k] = WGK[7] * center[k];
        gauss[k] = WG[3] * center[k];
    }
    for j in 0..7 {
        let dx = h * XGK[j];
        let lo = f(c - dx);
        let hi = f(c + dx);
        for k in 0..K {
            let s = lo[k] + hi[k];
            kron[k] += WGK[j] * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; K];
    let mut error = [0.0; K];
    for k in 0..K {
        value[k] = kron[k] * h;
        error[k] = ((kron[k] - gauss[k]) * h).abs();
    }
    Piece { a, b, value, error }
}

fn worst<const K: usize>(error: &[f64; K], total: &[f64; K]) -> f64 {
    error
        .iter()
        .zip(total)
        .map(|(e, t)| e / t.abs().max(f64::MIN_POSITIVE))
        .fold(0.0, f64::max)
}

/// Integrates `f` over the consecutive intervals of `breaks` (sorted).
///
/// Refinement bisects the piece with the largest relative error until every
/// component meets `rel_tol` relative to its own integral. Components are
/// expected to be nonnegative or at least not to cancel to zero.
pub fn integrate<const K: usize, F: Fn(f64) -> [f64; K]>(f: F, breaks: &[f64], opts: &QuadOptions) -> Result<[f64; K]> {
    if breaks.len() < 2 || breaks.windows(2).any(|w| !(w[1] >= w[0])) {
        return Err(Error::QuadratureFailure(format!("bad breakpoints {breaks:?}")));
    }
    let mut pieces: Vec<Piece<K>> = breaks
        .windows(2)
        .filter(|w| w[1] > w[0])
        .map(|w| gk15(&f, w[0], w[1]))
        .collect();
    loop {
        let mut total = [0.0; K];
        let mut error = [0.0; K];
        for p in &pieces {
            for k in 0..K {
                total[k] += p.value[k];
                error[k] += p.error[k];
            }
        }
        if total.iter().any(|t| !t.is_finite()) {
            return Err(Error::QuadratureFailure("non-finite integrand".into()));
        }
        if worst(&error, &total) <= opts.rel_tol {
            return Ok(total);
        }
        if pieces.len() >= opts.max_intervals {
            return Err(Error::QuadratureFailure(format!(
                "relative error {:e} after {} intervals",
                worst(&error, &total),
                pieces.len()
            )));
        }
        let idx = (0..pieces.len())
            .max_by(|&i, &j| worst(&pieces[i].error, &total).total_cmp(&worst(&pieces[j].error, &total)))
            .expect("at least one piece");
        let p = pieces.swap_remove(idx);
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            return Err(Error::QuadratureFailure("interval underflow".into()));
        }
        pieces.push(gk15(&f, p.a, mid));
        pieces.push(gk15(&f, mid, p.b));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let r = integrate(|x| [x.powi(6), 1.0], &[-1.0, 2.0], &QuadOptions::default()).unwrap();
        assert!((r[0] - (128.0 + 1.0) / 7.0).abs() < 1e-13);
        assert!((r[1] - 3.0).abs() < 1e-14);
    }

    #[test]
    fn gaussian_and_kinked_integrands() {
        let r = integrate(|x| [(-0.5 * x * x).exp(), (-x.abs()).exp()], &[-40.0, 0.0, 40.0], &QuadOptions::default()).unwrap();
        assert!((r[0] - (2.0 * std::f64::consts::PI).sqrt()).abs() < 1e-12);
        assert!((r[1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn gives_up_on_a_singularity() {
        let opts = QuadOptions {
            rel_tol: 1e-14,
            max_intervals: 20,
        };
        assert!(integrate(|x: f64| [1.0 / x.abs().sqrt().max(1e-300)], &[-1.0, 1.0], &opts).is_err());
    }
}
