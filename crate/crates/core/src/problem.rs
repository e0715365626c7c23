//! Matrix generators and the dense CSV matrix format.
//!
//! The CSV format is row-major with `rows,cols` on the first line:
//!
//! ```text
//! 2,3
//! 1,0,0
//! 0,1,0.5
//! ```

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linmodel::{build_model, GeneralLinearModel, DEFAULT_RANK_TOL};

pub fn identity(n: usize) -> DMatrix<f64> {
    DMatrix::identity(n, n)
}

pub fn random_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, scale: f64, rng: &mut R) -> DMatrix<f64> {
    // Filled row by row so the draw order matches the file order.
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let z: f64 = rng.sample(StandardNormal);
            out[(i, j)] = scale * z;
        }
    }
    out
}

/// Selection operator picking `rows` evenly spaced coordinates out of `cols`.
pub fn subsample(rows: usize, cols: usize) -> Result<DMatrix<f64>> {
    if rows == 0 || rows > cols {
        return Err(Error::Config(format!(
            "subsample({rows},{cols}) needs 0 < rows <= cols"
        )));
    }
    let mut out = DMatrix::zeros(rows, cols);
    for i in 0..rows {
        out[(i, i * cols / rows)] = 1.0;
    }
    Ok(out)
}

/// `L^T L` for the (m-1) x m forward-difference operator. Rank m-1.
pub fn first_difference(m: usize) -> Result<DMatrix<f64>> {
    if m < 2 {
        return Err(Error::Config("first_difference needs M >= 2".into()));
    }
    let mut l = DMatrix::zeros(m - 1, m);
    for i in 0..m - 1 {
        l[(i, i)] = -1.0;
        l[(i, i + 1)] = 1.0;
    }
    Ok(l.transpose() * l)
}

/// `L^T L` for the (m-2) x m second-difference operator. Rank m-2.
pub fn second_difference(m: usize) -> Result<DMatrix<f64>> {
    if m < 3 {
        return Err(Error::Config("second_difference needs M >= 3".into()));
    }
    let mut l = DMatrix::zeros(m - 2, m);
    for i in 0..m - 2 {
        l[(i, i)] = 1.0;
        l[(i, i + 1)] = -2.0;
        l[(i, i + 2)] = 1.0;
    }
    Ok(l.transpose() * l)
}

/// Random PSD matrix of rank `p`: `B^T B / p` with `B` a p x m Gaussian.
pub fn random_psd<R: Rng + ?Sized>(m: usize, p: usize, rng: &mut R) -> DMatrix<f64> {
    let b = random_gaussian(p, m, 1.0, rng);
    (b.transpose() * b) / p as f64
}

/// Random well-conditioned SPD matrix: `I + W W^T / n` with W an n x n Gaussian.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let w = random_gaussian(n, n, 1.0, rng);
    DMatrix::identity(n, n) + (&w * w.transpose()) / n as f64
}

/// Random well-posed instance: Gaussian `H`, random SPD `E`, random rank-`p`
/// PSD `G`. Used by the verification suites.
pub fn random_model<R: Rng + ?Sized>(n: usize, m: usize, p: usize, rng: &mut R) -> Result<GeneralLinearModel> {
    let h = random_gaussian(n, m, 1.0, rng);
    let e = random_spd(n, rng);
    let g = random_psd(m, p, rng);
    build_model(h, e, g, DEFAULT_RANK_TOL)
}

/// A parsed generator expression such as `random_gaussian(40,20,1.0)`.
#[derive(Debug, Clone, PartialEq)]
pub enum MatrixGenerator {
    /// Square identity; the size is taken from context when omitted.
    Identity(Option<usize>),
    RandomGaussian { rows: usize, cols: usize, scale: f64 },
    Subsample { rows: usize, cols: usize },
    FirstDifference(usize),
    SecondDifference(usize),
}

fn parse_args(body: &str) -> Vec<&str> {
    if body.trim().is_empty() {
        Vec::new()
    } else {
        body.split(',').map(str::trim).collect()
    }
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.parse()
        .map_err(|_| Error::Config(format!("{what}: expected an integer, got `{s}`")))
}

impl MatrixGenerator {
    pub fn parse(expr: &str) -> Result<Self> {
        let expr = expr.trim();
        let (name, args) = match expr.find('(') {
            Some(open) => {
                let close = expr
                    .strip_suffix(')')
                    .ok_or_else(|| Error::Config(format!("unbalanced generator `{expr}`")))?;
                (&expr[..open], parse_args(&close[open + 1..]))
            }
            None => (expr, Vec::new()),
        };
        let arity = |k: usize| -> Result<()> {
            if args.len() == k {
                Ok(())
            } else {
                Err(Error::Config(format!(
                    "{name} takes {k} arguments, got {}",
                    args.len()
                )))
            }
        };
        match name {
            "identity" => match args.len() {
                0 => Ok(Self::Identity(None)),
                1 => Ok(Self::Identity(Some(parse_usize(args[0], name)?))),
                _ => Err(Error::Config("identity takes at most one argument".into())),
            },
            "random_gaussian" => {
                arity(3)?;
                let scale = args[2]
                    .parse()
                    .map_err(|_| Error::Config(format!("bad scale `{}`", args[2])))?;
                Ok(Self::RandomGaussian {
                    rows: parse_usize(args[0], name)?,
                    cols: parse_usize(args[1], name)?,
                    scale,
                })
            }
            "subsample" => {
                arity(2)?;
                Ok(Self::Subsample {
                    rows: parse_usize(args[0], name)?,
                    cols: parse_usize(args[1], name)?,
                })
            }
            "first_difference" => {
                arity(1)?;
                Ok(Self::FirstDifference(parse_usize(args[0], name)?))
            }
            "second_difference" => {
                arity(1)?;
                Ok(Self::SecondDifference(parse_usize(args[0], name)?))
            }
            _ => Err(Error::UnknownTag(name.to_string())),
        }
    }

    /// Materializes the matrix; `default_size` resolves a bare `identity`.
    pub fn build<R: Rng + ?Sized>(&self, default_size: Option<usize>, rng: &mut R) -> Result<DMatrix<f64>> {
        match *self {
            Self::Identity(n) => n
                .or(default_size)
                .map(identity)
                .ok_or_else(|| Error::Config("identity needs a size here".into())),
            Self::RandomGaussian { rows, cols, scale } => Ok(random_gaussian(rows, cols, scale, rng)),
            Self::Subsample { rows, cols } => subsample(rows, cols),
            Self::FirstDifference(m) => first_difference(m),
            Self::SecondDifference(m) => second_difference(m),
        }
    }
}

pub fn parse_matrix_csv(text: &str) -> Result<DMatrix<f64>> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty());
    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty file".into(),
    })?;
    let dims: Vec<&str> = header.split(',').map(str::trim).collect();
    let parse_dim = |s: &str| -> Result<usize> {
        s.parse().map_err(|_| Error::Parse {
            line,
            msg: format!("header must be `rows,cols`, got `{header}`"),
        })
    };
    if dims.len() != 2 {
        return Err(Error::Parse {
            line,
            msg: format!("header must be `rows,cols`, got `{header}`"),
        });
    }
    let (rows, cols) = (parse_dim(dims[0])?, parse_dim(dims[1])?);
    let mut values = Vec::with_capacity(rows * cols);
    let mut seen = 0;
    for (line, text) in lines {
        if seen == rows {
            return Err(Error::Parse {
                line,
                msg: format!("more than {rows} data rows"),
            });
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != cols {
            return Err(Error::Parse {
                line,
                msg: format!("expected {cols} fields, found {}", fields.len()),
            });
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse {
                line,
                msg: format!("not a number: `{f}`"),
            })?;
            if !v.is_finite() {
                return Err(Error::Parse {
                    line,
                    msg: format!("non-finite value `{f}`"),
                });
            }
            values.push(v);
        }
        seen += 1;
    }
    if seen != rows {
        return Err(Error::Parse {
            line: text.lines().count() + 1,
            msg: format!("expected {rows} data rows, found {seen}"),
        });
    }
    Ok(DMatrix::from_row_slice(rows, cols, &values))
}

pub fn format_matrix_csv(m: &DMatrix<f64>) -> String {
    let mut out = format!("{},{}\n", m.nrows(), m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            if j > 0 {
                out.push(',');
            }
            let _ = write!(out, "{}", m[(i, j)]);
        }
        out.push('\n');
    }
    out
}

pub fn read_matrix(path: &Path) -> Result<DMatrix<f64>> {
    parse_matrix_csv(&std::fs::read_to_string(path)?)
}

pub fn write_matrix(path: &Path, m: &DMatrix<f64>) -> Result<()> {
    std::fs::write(path, format_matrix_csv(m))?;
    Ok(())
}

/// Reads a vector stored as an n x 1 (or 1 x n) matrix.
pub fn read_vector(path: &Path) -> Result<DVector<f64>> {
    let m = read_matrix(path)?;
    if m.ncols() == 1 {
        Ok(m.column(0).into_owned())
    } else if m.nrows() == 1 {
        Ok(m.row(0).transpose().into_owned())
    } else {
        Err(Error::Dimension(format!(
            "{} holds a {}x{} matrix, expected a vector",
            path.display(),
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn write_vector(path: &Path, v: &DVector<f64>) -> Result<()> {
    write_matrix(path, &DMatrix::from_column_slice(v.len(), 1, v.as_slice()))
}
