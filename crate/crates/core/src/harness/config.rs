//! Experiment configuration.
//!
//! Files are TOML whose keys mirror the struct fields. A file only needs the
//! keys it changes: it is merged over the defaults of its suite.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gibbs1d::Cost;
use crate::linmodel::HyperPoint;
use crate::sampler::{SeedSpec, TailFamily};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Suite {
    Consistency,
    Stationarity,
    Uniqueness,
    Efficiency,
    Unbiasedness,
    Gibbs,
    Identities,
}

impl Suite {
    pub const ALL: [Suite; 7] = [
        Suite::Consistency,
        Suite::Stationarity,
        Suite::Uniqueness,
        Suite::Efficiency,
        Suite::Unbiasedness,
        Suite::Gibbs,
        Suite::Identities,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Suite::Consistency => "consistency",
            Suite::Stationarity => "stationarity",
            Suite::Uniqueness => "uniqueness",
            Suite::Efficiency => "efficiency",
            Suite::Unbiasedness => "unbiasedness",
            Suite::Gibbs => "gibbs",
            Suite::Identities => "identities",
        }
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name() == s.trim())
            .ok_or_else(|| Error::UnknownTag(s.trim().to_string()))
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Beta0 {
    pub beta_d: f64,
    pub beta_a: f64,
}

impl Beta0 {
    pub fn point(&self) -> Result<HyperPoint> {
        HyperPoint::new(self.beta_d, self.beta_a)
    }
}

/// Names of the size-driven matrix generators.
///
/// `h`: `random_gaussian` (entries N(0, h_scale^2)) or `subsample`;
/// `e`: `identity` or `random_spd`;
/// `g`: `identity`, `random_psd` (rank P), `first_difference` (P = M-1)
/// or `second_difference` (P = M-2).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    pub h: String,
    pub h_scale: f64,
    pub e: String,
    pub g: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    InFamily,
    /// Data with the second moments of the beta0 predictive times `scale`,
    /// carried by the configured tail family.
    SecondMoment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeneratorConfig {
    pub kind: GeneratorKind,
    pub tail: String,
    pub scale: f64,
}

impl GeneratorConfig {
    pub fn tail_family(&self) -> Result<TailFamily> {
        self.tail.parse()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LambdaGridConfig {
    pub min: f64,
    pub max: f64,
    pub points_per_decade: usize,
}

impl LambdaGridConfig {
    pub fn grid(&self) -> Vec<f64> {
        let decades = (self.max / self.min).log10();
        let points = (decades * self.points_per_decade as f64).round() as usize + 1;
        crate::crossentropy::log_grid(self.min, self.max, points)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GibbsConfig {
    pub u: String,
    pub v: String,
    /// Coordinate count for the identity and fluctuation checks.
    pub count: usize,
    /// Joint draws for the cumulant checks.
    pub joint_draws: usize,
    /// Simulated data sets for the variance-reduction and Chebyshev checks.
    pub data_draws: usize,
    pub critical_grid: usize,
    pub critical_draws: usize,
    pub critical_beta_min: f64,
    pub critical_beta_max: f64,
}

impl GibbsConfig {
    pub fn costs(&self) -> Result<(Cost, Cost)> {
        Ok((self.u.parse()?, self.v.parse()?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub suite: Suite,
    /// `(N, M, P)` per size; sweeps need the same ratios at every size.
    pub sizes: Vec<[usize; 3]>,
    pub replicates: usize,
    pub beta0: Beta0,
    pub seed: SeedSpec,
    pub epsilon: f64,
    /// Width of the uniform draw of null-space coefficients of `a`.
    pub null_width: f64,
    /// Report path prefix; `.csv` and `.json` are appended.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    pub matrices: MatrixConfig,
    pub generator: GeneratorConfig,
    pub lambda_grid: LambdaGridConfig,
    /// Random model instances per size for population-level checks.
    pub instances: usize,
    pub equipartition_draws: usize,
    pub fisher_draws: usize,
    pub modality_grid: usize,
    pub gibbs: GibbsConfig,
}

fn sq(n: usize) -> [usize; 3] {
    [n, n / 2, n / 2]
}

impl ExperimentConfig {
    /// Defaults of a suite, sized to run in minutes on one core.
    pub fn for_suite(suite: Suite) -> Self {
        let mut cfg = ExperimentConfig {
            suite,
            sizes: vec![sq(50), sq(100), sq(200), sq(400)],
            replicates: 200,
            beta0: Beta0 {
                beta_d: 1.0,
                beta_a: 1.0,
            },
            seed: SeedSpec::new(20_240_601, 0),
            epsilon: 0.5,
            null_width: 0.0,
            output: None,
            matrices: MatrixConfig {
                h: "random_gaussian".into(),
                h_scale: 1.0,
                e: "identity".into(),
                g: "random_psd".into(),
            },
            generator: GeneratorConfig {
                kind: GeneratorKind::InFamily,
                tail: "gaussian".into(),
                scale: 1.0,
            },
            lambda_grid: LambdaGridConfig {
                min: 1e-6,
                max: 1e6,
                points_per_decade: 8,
            },
            instances: 20,
            equipartition_draws: 10_000,
            fisher_draws: 2000,
            modality_grid: 20,
            gibbs: GibbsConfig {
                u: "laplace".into(),
                v: "laplace".into(),
                count: 50,
                joint_draws: 100_000,
                data_draws: 2000,
                critical_grid: 3,
                critical_draws: 200,
                critical_beta_min: 0.5,
                critical_beta_max: 2.0,
            },
        };
        match suite {
            Suite::Consistency => {}
            Suite::Stationarity => {
                cfg.sizes = vec![sq(100), sq(400)];
                cfg.replicates = 1000;
            }
            Suite::Uniqueness => {
                cfg.sizes = vec![sq(200)];
            }
            Suite::Efficiency => {
                cfg.sizes = vec![sq(100), sq(200), sq(400)];
                cfg.generator = GeneratorConfig {
                    kind: GeneratorKind::SecondMoment,
                    tail: "student_t(5)".into(),
                    scale: 1.0,
                };
            }
            Suite::Unbiasedness => {
                cfg.sizes = vec![sq(100), sq(200), sq(400)];
            }
            Suite::Gibbs => {
                cfg.sizes = vec![[400, 400, 400]];
                cfg.replicates = 100;
            }
            Suite::Identities => {
                cfg.sizes = vec![[12, 8, 8], [30, 20, 15]];
                cfg.replicates = 10;
                cfg.epsilon = 0.05;
            }
        }
        cfg
    }

    /// Parses a TOML file over the defaults of `suite`, or of the suite named
    /// in the file when `suite` is `None`.
    pub fn from_toml(text: &str, suite: Option<Suite>) -> Result<Self> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let named = match file.get("suite") {
            Some(toml::Value::String(s)) => Some(s.parse::<Suite>()?),
            Some(other) => return Err(Error::Config(format!("suite must be a string, got {other}"))),
            None => None,
        };
        let suite = suite
            .or(named)
            .ok_or_else(|| Error::Config("no suite given in the file or on the command line".into()))?;
        Self::for_suite(suite).overlay_toml(text)
    }

    /// Merges a TOML file over this config. A `suite` key in the file must
    /// agree with `self.suite`.
    pub fn overlay_toml(&self, text: &str) -> Result<Self> {
        let file: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        if let Some(v) = file.get("suite") {
            if v.as_str() != Some(self.suite.name()) {
                return Err(Error::Config(format!("file names suite {v}, expected {}", self.suite)));
            }
        }
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        merge(&mut base, file);
        let cfg: ExperimentConfig = base.try_into().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.sizes.is_empty() {
            return bad("sizes is empty".into());
        }
        if self.replicates == 0 {
            return bad("replicates must be positive".into());
        }
        if self.sizes.len() >= 1 << 31 || self.replicates >= 1 << 31 {
            return bad("too many sizes or replicates for the stream layout".into());
        }
        // TOML integers are signed 64-bit.
        if self.seed.base_seed > i64::MAX as u64 || self.seed.stream_index > i64::MAX as u64 {
            return bad("base_seed and stream_index must not exceed 2^63 - 1".into());
        }
        self.beta0.point()?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return bad(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if !(self.null_width >= 0.0 && self.null_width.is_finite()) {
            return bad(format!("null_width must be nonnegative, got {}", self.null_width));
        }
        if !(self.generator.scale > 0.0 && self.generator.scale.is_finite()) {
            return bad(format!("generator.scale must be positive, got {}", self.generator.scale));
        }
        self.generator.tail_family()?;
        let lg = &self.lambda_grid;
        if !(lg.min > 0.0 && lg.max > lg.min && lg.points_per_decade > 0) {
            return bad("lambda_grid needs 0 < min < max and points_per_decade > 0".into());
        }
        self.gibbs.costs()?;
        let [n0, m0, p0] = self.sizes[0];
        for &[n, m, p] in &self.sizes {
            if n == 0 || m == 0 || p == 0 || p > m || n + p <= m {
                return bad(format!("size ({n}, {m}, {p}) is not well-posed"));
            }
            if self.suite != Suite::Identities && (m * n0 != m0 * n || p * m0 != p0 * m) {
                return bad(format!("size ({n}, {m}, {p}) changes the M/N or P/M ratio of ({n0}, {m0}, {p0})"));
            }
        }
        if self.suite == Suite::Gibbs && self.sizes.iter().any(|&[n, m, _]| n != m) {
            return bad("gibbs sizes need N = M".into());
        }
        Ok(())
    }
}

fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_round_trip() {
        for s in Suite::ALL {
            let cfg = ExperimentConfig::for_suite(s);
            cfg.validate().unwrap();
            let back = ExperimentConfig::from_toml(&cfg.to_toml().unwrap(), None).unwrap();
            assert_eq!(back, cfg);
        }
    }

    #[test]
    fn file_overrides_defaults() {
        let text = "suite = \"consistency\"\nreplicates = 7\n[beta0]\nbeta_a = 2.5\n";
        let cfg = ExperimentConfig::from_toml(text, None).unwrap();
        assert_eq!(cfg.replicates, 7);
        assert_eq!(cfg.beta0.beta_a, 2.5);
        assert_eq!(cfg.beta0.beta_d, 1.0);
        assert_eq!(cfg.sizes.len(), 4);
    }

    #[test]
    fn rejects_bad_files() {
        assert!(ExperimentConfig::from_toml("replicates = 3", None).is_err());
        assert!(ExperimentConfig::from_toml("suite = \"nope\"", None).is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1", Some(Suite::Gibbs)).is_err());
        let mixed = "sizes = [[50, 25, 25], [100, 60, 60]]";
        assert!(ExperimentConfig::from_toml(mixed, Some(Suite::Consistency)).is_err());
        let ill = "sizes = [[10, 20, 5]]";
        assert!(ExperimentConfig::from_toml(ill, Some(Suite::Consistency)).is_err());
    }
}
