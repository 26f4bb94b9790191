//! Experiment configuration files (TOML).
//!
//! Every file has a `name`, a mandatory `seed`, an `output` directory and an
//! `[experiment]` table whose `kind` selects the remaining fields. Unknown keys
//! are rejected. The layout is documented in `docs/config.md`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slowfast::chaos::{ChaosExpansion, Observable};
use slowfast::rde::{FieldPreset, YoungStep};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub seed: u64,
    pub output: PathBuf,
    pub experiment: Experiment,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Experiment {
    Noise(NoiseConfig),
    Correlation(CorrelationConfig),
    Chaos(ChaosConfig),
    Hermite(HermiteConfig),
    Clt(CltConfig),
    Lift(LiftConfig),
    Tightness(TightnessConfig),
    Diagram(DiagramConfig),
    Martingale(MartingaleConfig),
    Area(AreaConfig),
    Rde(RdeConfig),
    Homogenize(HomogenizeConfig),
}

impl Experiment {
    pub fn kind(&self) -> &'static str {
        match self {
            Experiment::Noise(_) => "noise",
            Experiment::Correlation(_) => "correlation",
            Experiment::Chaos(_) => "chaos",
            Experiment::Hermite(_) => "hermite",
            Experiment::Clt(_) => "clt",
            Experiment::Lift(_) => "lift",
            Experiment::Tightness(_) => "tightness",
            Experiment::Diagram(_) => "diagram",
            Experiment::Martingale(_) => "martingale",
            Experiment::Area(_) => "area",
            Experiment::Rde(_) => "rde",
            Experiment::Homogenize(_) => "homogenize",
        }
    }
}

fn one() -> f64 {
    1.0
}
fn two() -> f64 {
    2.0
}
fn four() -> f64 {
    4.0
}

/// fBM covariance and fOU marginal variance on a uniform grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub hurst: Vec<f64>,
    pub steps: usize,
    #[serde(default = "one")]
    pub horizon: f64,
    pub paths: usize,
    /// Time-scale separation of the fOU paths.
    #[serde(default = "one")]
    pub eps: f64,
    #[serde(default = "four")]
    pub n_se: f64,
}

/// Log-log slope of the fOU correlation over `[s_min, s_max]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorrelationConfig {
    pub hurst: f64,
    pub s_min: f64,
    pub s_max: f64,
    pub points: usize,
    pub tolerance: f64,
}

/// Chaos expansions of the listed observables plus the Hermite self-checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChaosConfig {
    #[serde(default)]
    pub observables: Vec<String>,
    #[serde(default = "default_truncation")]
    pub truncation: usize,
    #[serde(default = "default_max_degree")]
    pub max_degree: usize,
    #[serde(default = "default_orthogonality_tol")]
    pub orthogonality_tol: f64,
}

fn default_truncation() -> usize {
    40
}
fn default_max_degree() -> usize {
    12
}
fn default_orthogonality_tol() -> f64 {
    1e-10
}

/// Hermite-process covariance, variance, cross-rank and self-similarity checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HermiteConfig {
    /// `(m, H)` pairs.
    pub cases: Vec<(usize, f64)>,
    /// Paths per case, in the order of `cases`.
    pub paths: Vec<usize>,
    /// Grid points on `[0, 1]`; the sampler runs on `[0, λ]`.
    pub steps: usize,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
    /// Paths of the paired ensemble for the cross-rank check (first two cases).
    pub cross_paths: usize,
    pub variance_tolerance: f64,
    #[serde(default = "four")]
    pub n_se: f64,
}

fn default_lambda() -> f64 {
    2.0
}

/// Functional CLT / non-CLT for a family of observables.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CltConfig {
    pub hurst: f64,
    pub observables: Vec<String>,
    pub eps: Vec<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    pub out_steps: usize,
    pub paths: usize,
    pub limit_paths: usize,
    pub resolution: usize,
    pub variance_tolerance: f64,
    pub ks_tolerance: f64,
}

/// Rough-path kernel checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LiftConfig {
    pub steps: usize,
    pub dim: usize,
    /// Wiener lifts checked for Chen's relation on every grid triple.
    pub chen_lifts: usize,
    /// Ensemble for the Itô/Stratonovich expectation check.
    pub paths: usize,
    pub chen_tolerance: f64,
    /// Frequency of the oscillating pure-area pair and the grid it is lifted on.
    pub frequency: f64,
    pub area_steps: usize,
    pub area_tolerance: f64,
    #[serde(default = "four")]
    pub n_se: f64,
}

/// Level-2 increment exponent of canonical lifts of a functional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TightnessConfig {
    pub hurst: f64,
    pub observables: Vec<String>,
    pub pair: (usize, usize),
    pub eps: Vec<f64>,
    pub horizon: f64,
    pub out_steps: usize,
    pub paths: usize,
    pub resolution: usize,
    pub lag_steps: Vec<usize>,
    pub holder_p: f64,
    pub holder_gamma: f64,
    pub expected_exponent: f64,
    pub tolerance: f64,
    pub trend_level: f64,
}

/// Diagram formula against a Gaussian Monte Carlo oracle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagramConfig {
    pub max_total_degree: usize,
    pub configurations: usize,
    pub samples: usize,
    /// Variance of the Gaussian proposal of the importance-sampled oracle.
    #[serde(default = "two")]
    pub proposal_variance: f64,
    #[serde(default = "four")]
    pub n_se: f64,
}

/// Locally independent decomposition and conditional Hermite expectations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MartingaleConfig {
    pub hurst: f64,
    pub offsets: Vec<f64>,
    pub slope_tolerance: f64,
    pub unit_tolerance: f64,
    pub max_rank: usize,
    /// Offsets and conditioning points of the Monte Carlo comparison.
    pub mc_offsets: Vec<f64>,
    pub points: Vec<f64>,
    pub samples: usize,
    pub relative_tolerance: f64,
}

/// Area decomposition residuals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AreaConfig {
    pub hurst: f64,
    pub u: String,
    pub v: String,
    pub eps: Vec<f64>,
    pub t: f64,
    pub realizations: usize,
    pub relative_tolerance: f64,
}

/// RDE solver checks.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RdeConfig {
    pub smooth_steps: usize,
    pub smooth_tolerance: f64,
    pub lognormal_paths: usize,
    pub lognormal_steps: usize,
    pub effective_hurst: f64,
    pub effective_observables: Vec<String>,
    pub effective_paths: usize,
    pub effective_steps: usize,
    pub ks_tolerance: f64,
}

/// Endpoint laws of the slow variable against the limit equation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HomogenizeConfig {
    pub hurst: f64,
    pub observables: Vec<String>,
    pub fields: Vec<String>,
    pub x0: Vec<f64>,
    pub eps: Vec<f64>,
    #[serde(default = "one")]
    pub horizon: f64,
    pub paths: usize,
    pub limit_paths: usize,
    pub limit_steps: usize,
    pub resolution: usize,
    #[serde(default = "default_p")]
    pub p: f64,
    #[serde(default = "default_q")]
    pub q: u32,
    #[serde(default)]
    pub young: YoungStep,
    pub ks_tolerance: f64,
}

fn default_p() -> f64 {
    64.0
}
fn default_q() -> u32 {
    4
}

fn cfg_err<T>(msg: impl Into<String>) -> Result<T, CliError> {
    Err(CliError::Config(msg.into()))
}

/// `hermite:m`, `poly:a0,a1,…` (monomial coefficients, brackets optional),
/// `chaos:c0,c1,…` or `abs`.
pub fn parse_observable(spec: &str) -> Result<Observable, CliError> {
    let (head, tail) = spec.split_once(':').unwrap_or((spec, ""));
    let list = |s: &str| -> Result<Vec<f64>, CliError> {
        let s = s.trim().trim_start_matches('[').trim_end_matches(']');
        s.split(',')
            .map(|v| v.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad number {v:?} in {spec:?}"))))
            .collect()
    };
    match head.trim() {
        "hermite" => tail
            .trim()
            .parse::<usize>()
            .map(Observable::Hermite)
            .map_err(|_| CliError::Config(format!("bad Hermite degree in {spec:?}"))),
        "poly" => Ok(Observable::Poly(list(tail)?)),
        "chaos" => Ok(Observable::Chaos(list(tail)?)),
        "abs" => Ok(Observable::AbsCentred),
        _ => cfg_err(format!("unknown observable preset {spec:?}")),
    }
}

pub fn expansions(specs: &[String], truncation: usize) -> Result<Vec<ChaosExpansion>, CliError> {
    if specs.is_empty() {
        return cfg_err("at least one observable is required");
    }
    specs
        .iter()
        .map(|s| parse_observable(s)?.expansion(truncation).map_err(CliError::from))
        .collect()
}

/// Observables that must already be centred.
pub fn centred_expansions(specs: &[String]) -> Result<Vec<ChaosExpansion>, CliError> {
    let out = expansions(specs, default_truncation())?;
    for (s, g) in specs.iter().zip(&out) {
        if !g.is_centred() {
            return Err(CliError::Assumption(format!("observable {s:?} is not centred")));
        }
    }
    Ok(out)
}

/// `zero`, `sin_plus_two`, `cos`, `linear:s`, `rotation:s`, `constant:v1,v2,…`.
pub fn parse_field(spec: &str) -> Result<FieldPreset, CliError> {
    let (head, tail) = spec.split_once(':').unwrap_or((spec, ""));
    let num = |s: &str| s.trim().parse::<f64>().map_err(|_| CliError::Config(format!("bad number in {spec:?}")));
    match head.trim() {
        "zero" => Ok(FieldPreset::Zero),
        "sin_plus_two" => Ok(FieldPreset::SinPlusTwo),
        "cos" => Ok(FieldPreset::Cos),
        "linear" => Ok(FieldPreset::Linear { scale: num(tail)? }),
        "rotation" => Ok(FieldPreset::Rotation { scale: num(tail)? }),
        "constant" => Ok(FieldPreset::Constant {
            value: tail.trim_matches(|c| c == '[' || c == ']').split(',').map(num).collect::<Result<_, _>>()?,
        }),
        _ => cfg_err(format!("unknown vector field preset {spec:?}")),
    }
}

fn hurst_ok(h: f64) -> Result<(), CliError> {
    if !(h > 0.0 && h < 1.0) || h == 0.5 {
        return cfg_err(format!("Hurst parameter {h} must lie in (0, 1) and differ from 1/2"));
    }
    Ok(())
}

fn eps_ok(eps: &[f64]) -> Result<(), CliError> {
    if eps.is_empty() || eps.iter().any(|e| !(*e > 0.0 && *e <= 0.5)) {
        return cfg_err("ε values must lie in (0, 1/2]");
    }
    Ok(())
}

fn positive(name: &str, v: usize) -> Result<(), CliError> {
    if v == 0 {
        return cfg_err(format!("{name} must be positive"));
    }
    Ok(())
}

fn tol(name: &str, v: f64) -> Result<(), CliError> {
    if !(v > 0.0 && v.is_finite()) {
        return cfg_err(format!("{name} must be a positive tolerance"));
    }
    Ok(())
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, CliError> {
        let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Range checks mirroring the library preconditions.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.name.is_empty() || self.name.contains(['/', '\\']) {
            return cfg_err("name must be a nonempty file-name-safe string");
        }
        match &self.experiment {
            Experiment::Noise(c) => {
                c.hurst.iter().try_for_each(|&h| hurst_ok(h))?;
                positive("steps", c.steps)?;
                positive("paths", c.paths)?;
                tol("n_se", c.n_se)?;
                if !(c.horizon > 0.0 && c.eps > 0.0) {
                    return cfg_err("horizon and eps must be positive");
                }
            }
            Experiment::Correlation(c) => {
                hurst_ok(c.hurst)?;
                tol("tolerance", c.tolerance)?;
                if !(c.s_min > 0.0 && c.s_max > c.s_min) || c.points < 2 {
                    return cfg_err("need 0 < s_min < s_max and at least two points");
                }
            }
            Experiment::Chaos(c) => {
                positive("truncation", c.truncation)?;
                tol("orthogonality_tol", c.orthogonality_tol)?;
                for s in &c.observables {
                    parse_observable(s)?;
                }
            }
            Experiment::Hermite(c) => {
                if c.cases.len() != c.paths.len() || c.cases.is_empty() {
                    return cfg_err("one path count per Hermite case is required");
                }
                positive("steps", c.steps)?;
                tol("variance_tolerance", c.variance_tolerance)?;
                if !(c.lambda >= 1.0) {
                    return cfg_err("lambda must be at least 1");
                }
            }
            Experiment::Clt(c) => {
                hurst_ok(c.hurst)?;
                eps_ok(&c.eps)?;
                positive("paths", c.paths)?;
                positive("out_steps", c.out_steps)?;
                tol("ks_tolerance", c.ks_tolerance)?;
                tol("variance_tolerance", c.variance_tolerance)?;
                if c.resolution < 20 {
                    return cfg_err("resolution must be at least 20");
                }
            }
            Experiment::Lift(c) => {
                positive("steps", c.steps)?;
                positive("dim", c.dim)?;
                tol("chen_tolerance", c.chen_tolerance)?;
                if c.steps > 512 {
                    return cfg_err("steps above 512 make the all-triples Chen check too costly");
                }
            }
            Experiment::Tightness(c) => {
                hurst_ok(c.hurst)?;
                eps_ok(&c.eps)?;
                tol("tolerance", c.tolerance)?;
                if c.lag_steps.len() < 2 {
                    return cfg_err("at least two lags are needed for a fit");
                }
            }
            Experiment::Diagram(c) => {
                positive("samples", c.samples)?;
                if !(c.proposal_variance >= 1.0) {
                    return cfg_err("proposal_variance must be at least 1");
                }
                if c.max_total_degree > 16 {
                    return cfg_err("max_total_degree above 16 exceeds the enumeration limit");
                }
            }
            Experiment::Martingale(c) => {
                hurst_ok(c.hurst)?;
                if c.hurst < 0.5 {
                    return cfg_err("the decomposition is defined for H > 1/2");
                }
                if c.offsets.len() < 2 {
                    return cfg_err("at least two offsets are needed for a slope");
                }
            }
            Experiment::Area(c) => {
                hurst_ok(c.hurst)?;
                positive("realizations", c.realizations)?;
                if c.eps.is_empty() || c.t <= 0.0 {
                    return cfg_err("need ε values and t > 0");
                }
            }
            Experiment::Rde(c) => {
                hurst_ok(c.effective_hurst)?;
                tol("ks_tolerance", c.ks_tolerance)?;
                tol("smooth_tolerance", c.smooth_tolerance)?;
            }
            Experiment::Homogenize(c) => {
                hurst_ok(c.hurst)?;
                eps_ok(&c.eps)?;
                tol("ks_tolerance", c.ks_tolerance)?;
                if c.fields.len() != c.observables.len() {
                    return cfg_err("one vector field per observable is required");
                }
                for f in &c.fields {
                    parse_field(f)?;
                }
            }
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical JSON form, without the output directory.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let canonical = serde_json::to_vec(&(&self.name, self.seed, &self.experiment)).expect("config serialises");
        hex::encode(Sha256::digest(&canonical))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn observables_parse() {
        assert_eq!(parse_observable("hermite:3").unwrap(), Observable::Hermite(3));
        assert_eq!(parse_observable("poly:[0, 0, 1]").unwrap(), Observable::Poly(vec![0.0, 0.0, 1.0]));
        assert_eq!(parse_observable("poly:1,2").unwrap(), Observable::Poly(vec![1.0, 2.0]));
        assert!(parse_observable("hermite:x").is_err());
        assert!(parse_observable("sinh").is_err());
    }

    #[test]
    fn fields_parse() {
        assert_eq!(parse_field("linear:0.5").unwrap(), FieldPreset::Linear { scale: 0.5 });
        assert_eq!(parse_field("constant:1,2").unwrap(), FieldPreset::Constant { value: vec![1.0, 2.0] });
        assert!(parse_field("tan").is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"
            name = "x"
            seed = 1
            output = "out"
            [experiment]
            kind = "correlation"
            hurst = 0.75
            s_min = 10.0
            s_max = 100.0
            points = 10
            tolerance = 0.1
            colour = "red"
        "#;
        assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))));
        let ok = text.replace("colour = \"red\"", "");
        let cfg = ExperimentConfig::parse(&ok).unwrap();
        assert_eq!(cfg.experiment.kind(), "correlation");
    }

    #[test]
    fn seed_is_mandatory() {
        let text = "name = \"x\"\noutput = \"o\"\n[experiment]\nkind = \"diagram\"\nmax_total_degree = 4\nconfigurations = 1\nsamples = 10\n";
        assert!(matches!(ExperimentConfig::parse(text), Err(CliError::Config(_))));
    }

    #[test]
    fn hash_ignores_the_output_directory() {
        let a = "name = \"x\"\nseed = 3\noutput = \"a\"\n[experiment]\nkind = \"diagram\"\nmax_total_degree = 4\nconfigurations = 1\nsamples = 10\n";
        let b = a.replace("output = \"a\"", "output = \"b\"");
        let c = a.replace("seed = 3", "seed = 4");
        let (a, b, c) = (ExperimentConfig::parse(a).unwrap(), ExperimentConfig::parse(&b).unwrap(), ExperimentConfig::parse(&c).unwrap());
        assert_eq!(a.hash(), b.hash());
        assert_ne!(a.hash(), c.hash());
    }
}
