//! TOML run configuration: an optional top-level `seed` plus one flat
//! section per subcommand. Unknown keys are rejected everywhere.

use std::path::{Path, PathBuf};

use icse_core::comparators::{EBConfig, NormalizerMethod};
use icse_core::{LossSpec, ScoreVariance};
use serde::Deserialize;
use toml::{Table, Value};

use crate::error::{CliError, CliResult};

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: Option<u64>,
    #[serde(default)]
    pub fit: FitSection,
    #[serde(default, rename = "mc-study")]
    pub mc_study: StudySection,
    #[serde(default, rename = "limit-sim")]
    pub limit_sim: LimitSection,
    #[serde(default)]
    pub orthant: OrthantSection,
    #[serde(default)]
    pub eb: EbSection,
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LossName {
    #[default]
    InverseOmega,
    Identity,
}

impl LossName {
    pub fn spec(self) -> LossSpec {
        match self {
            LossName::InverseOmega => LossSpec::InverseOmega,
            LossName::Identity => LossSpec::Identity,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum VarianceName {
    #[default]
    Robust,
    Homoskedastic,
}

impl VarianceName {
    pub fn variance(self) -> ScoreVariance {
        match self {
            VarianceName::Robust => ScoreVariance::Robust,
            VarianceName::Homoskedastic => ScoreVariance::Homoskedastic,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum NormalizerName {
    #[default]
    Sequential,
    Counting,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitSection {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    /// 1-based coordinates restricted to be nonnegative, e.g. `"1..5"`
    pub sign_restrictions: Option<IndexSpec>,
    /// 1-based coordinates restricted to zero
    pub zero_restrictions: Option<IndexSpec>,
    /// CSV with one row per restriction: coefficients, then `r0` and `equality`
    pub constraints: Option<PathBuf>,
    pub loss: LossName,
    pub variance: VarianceName,
    pub orthant_draws: usize,
    pub prune_below: f64,
}

impl Default for FitSection {
    fn default() -> Self {
        let d = icse_core::shrinkage::IcseConfig::default();
        FitSection {
            seed: None,
            data: None,
            sign_restrictions: None,
            zero_restrictions: None,
            constraints: None,
            loss: LossName::InverseOmega,
            variance: VarianceName::Robust,
            orthant_draws: d.orthant_draws,
            prune_below: d.prune_below,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StudySection {
    pub seed: Option<u64>,
    pub n: usize,
    pub k1: usize,
    pub k2: usize,
    /// explicit grid; overrides `b_min`, `b_max`, `b_points`
    pub b_grid: Option<Vec<f64>>,
    pub b_min: f64,
    pub b_max: f64,
    pub b_points: usize,
    pub c: f64,
    pub replications: usize,
    pub estimators: Option<Vec<String>>,
    pub variance: VarianceName,
    pub orthant_draws: usize,
    pub eb_nu_min: f64,
    pub eb_nu_max: f64,
    pub eb_grid_points: usize,
    pub eb_gibbs_burn: usize,
    pub eb_gibbs_draws: usize,
    pub eb_d_draws: usize,
    pub eb_d_method: NormalizerName,
    /// 1-based truncated coordinates; the θ₁ block when absent
    pub eb_truncated: Option<IndexSpec>,
}

impl Default for StudySection {
    fn default() -> Self {
        let d = icse_core::mc_study::MCConfig::default();
        StudySection {
            seed: None,
            n: d.n,
            k1: d.k1,
            k2: d.k2,
            b_grid: None,
            b_min: -0.5,
            b_max: 0.5,
            b_points: 21,
            c: d.c_equal,
            replications: d.replications,
            estimators: None,
            variance: VarianceName::Robust,
            orthant_draws: d.orthant_draws,
            eb_nu_min: d.eb.nu_min,
            eb_nu_max: d.eb.nu_max,
            eb_grid_points: d.eb.grid_points,
            eb_gibbs_burn: d.eb.gibbs_burn,
            eb_gibbs_draws: d.eb.gibbs_draws,
            eb_d_draws: d.eb.d_draws,
            eb_d_method: NormalizerName::Sequential,
            eb_truncated: None,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitSection {
    pub seed: Option<u64>,
    /// curvature `J` as rows; when absent an equicorrelated `J` of size `m`
    pub j: Option<Vec<Vec<f64>>>,
    pub m: Option<usize>,
    pub rho: f64,
    /// score variance `V`; defaults to `J`
    pub v: Option<Vec<Vec<f64>>>,
    /// restriction rows; alternatively `sign_restrictions`
    pub r: Option<Vec<Vec<f64>>>,
    pub sign_restrictions: Option<IndexSpec>,
    pub c: Vec<f64>,
    pub equality: Option<Vec<bool>>,
    pub loss: LossName,
    pub tau_grid: Option<Vec<f64>>,
    pub draws: usize,
    pub zeta: f64,
}

impl Default for LimitSection {
    fn default() -> Self {
        LimitSection {
            seed: None,
            j: None,
            m: None,
            rho: 0.0,
            v: None,
            r: None,
            sign_restrictions: None,
            c: Vec::new(),
            equality: None,
            loss: LossName::InverseOmega,
            tau_grid: None,
            draws: 100_000,
            zeta: icse_core::asymptotics::DEFAULT_ZETA,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OrthantSection {
    pub seed: Option<u64>,
    pub mean: Vec<f64>,
    pub covariance: Vec<Vec<f64>>,
    /// 1-based positive sets such as `"1,3"` or `""`; every set when absent
    pub positive_sets: Option<Vec<IndexSpec>>,
    pub draws: usize,
}

impl Default for OrthantSection {
    fn default() -> Self {
        OrthantSection {
            seed: None,
            mean: Vec::new(),
            covariance: Vec::new(),
            positive_sets: None,
            draws: icse_core::orthant::DEFAULT_DRAWS,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EbSection {
    pub seed: Option<u64>,
    pub data: Option<PathBuf>,
    /// 1-based truncated coordinates; all when absent
    pub truncated: Option<IndexSpec>,
    pub nu_min: f64,
    pub nu_max: f64,
    pub grid_points: usize,
    pub gibbs_burn: usize,
    pub gibbs_draws: usize,
    pub d_draws: usize,
    pub d_method: NormalizerName,
}

impl Default for EbSection {
    fn default() -> Self {
        let d = EBConfig::default();
        EbSection {
            seed: None,
            data: None,
            truncated: None,
            nu_min: d.nu_min,
            nu_max: d.nu_max,
            grid_points: d.grid_points,
            gibbs_burn: d.gibbs_burn,
            gibbs_draws: d.gibbs_draws,
            d_draws: d.d_draws,
            d_method: NormalizerName::Sequential,
        }
    }
}

/// 1-based coordinates given as a list string (`"1..3,7"`), a single
/// integer, or an integer array.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum IndexSpec {
    Text(String),
    One(usize),
    List(Vec<usize>),
}

impl IndexSpec {
    pub fn indices(&self) -> CliResult<Vec<usize>> {
        match self {
            IndexSpec::Text(t) => parse_indices(t),
            IndexSpec::One(k) => parse_indices(&k.to_string()),
            IndexSpec::List(v) => parse_indices(&v.iter().map(usize::to_string).collect::<Vec<_>>().join(",")),
        }
    }
}

pub fn normalizer(name: NormalizerName) -> NormalizerMethod {
    match name {
        NormalizerName::Sequential => NormalizerMethod::Sequential,
        NormalizerName::Counting => NormalizerMethod::Counting,
    }
}

/// Reads the config file (if any) and applies `key=value` overrides, where
/// `key` is `seed` or `section.key` and `value` is a TOML value (bare words
/// are taken as strings).
pub fn load(path: Option<&Path>, overrides: &[String]) -> CliResult<RunConfig> {
    let mut table = match path {
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::config(format!("cannot read {}: {e}", p.display())))?;
            text.parse::<Table>()
                .map_err(|e| CliError::config(format!("{}: {e}", p.display())))?
        }
        None => Table::new(),
    };
    for item in overrides {
        let (key, raw) = item
            .split_once('=')
            .ok_or_else(|| CliError::config(format!("override `{item}` is not of the form key=value")))?;
        let value = parse_value(raw.trim());
        let parts: Vec<&str> = key.trim().split('.').collect();
        match parts.as_slice() {
            [k] => {
                table.insert(k.to_string(), value);
            }
            [section, k] => {
                let entry = table
                    .entry(section.to_string())
                    .or_insert_with(|| Value::Table(Table::new()));
                match entry {
                    Value::Table(t) => {
                        t.insert(k.to_string(), value);
                    }
                    _ => return Err(CliError::config(format!("`{section}` is not a section"))),
                }
            }
            _ => return Err(CliError::config(format!("override key `{key}` is nested too deeply"))),
        }
    }
    Value::Table(table)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::config(e.message().to_string()))
}

fn parse_value(raw: &str) -> Value {
    format!("v = {raw}")
        .parse::<Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| Value::String(raw.to_string()))
}

/// Seed precedence: command line, then the section, then the top level.
pub fn resolve_seed(flag: Option<u64>, section: Option<u64>, top: Option<u64>) -> CliResult<u64> {
    flag.or(section)
        .or(top)
        .ok_or_else(|| CliError::config("a seed is required (use --seed or set `seed` in the config)"))
}

/// Parses 1-based coordinate lists such as `"1..5"`, `"2,4"` or `"1..3,7"`
/// into sorted 0-based indices.
pub fn parse_indices(spec: &str) -> CliResult<Vec<usize>> {
    let bad = || CliError::config(format!("invalid coordinate list `{spec}`"));
    let mut out = Vec::new();
    for part in spec.split(',').map(str::trim).filter(|s| !s.is_empty()) {
        let (lo, hi) = match part.split_once("..") {
            Some((a, b)) => (a.trim().parse::<usize>().map_err(|_| bad())?, b.trim().parse::<usize>().map_err(|_| bad())?),
            None => {
                let k = part.parse::<usize>().map_err(|_| bad())?;
                (k, k)
            }
        };
        if lo == 0 || hi < lo {
            return Err(bad());
        }
        out.extend((lo - 1)..hi);
    }
    out.sort_unstable();
    let before = out.len();
    out.dedup();
    if out.len() != before {
        return Err(CliError::config(format!("coordinate list `{spec}` repeats an index")));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_lists() {
        assert_eq!(parse_indices("1..3").unwrap(), vec![0, 1, 2]);
        assert_eq!(parse_indices("4, 1..2").unwrap(), vec![0, 1, 3]);
        assert!(parse_indices("").unwrap().is_empty());
        assert!(parse_indices("0").is_err());
        assert!(parse_indices("3..1").is_err());
        assert!(parse_indices("1,1").is_err());
        assert!(parse_indices("a").is_err());
    }

    #[test]
    fn overrides_and_unknown_keys() {
        let cfg = load(None, &["seed=7".into(), "mc-study.k1=4".into(), "fit.data=x.csv".into()]).unwrap();
        assert_eq!(cfg.seed, Some(7));
        assert_eq!(cfg.mc_study.k1, 4);
        assert_eq!(cfg.fit.data.as_deref(), Some(Path::new("x.csv")));
        assert!(matches!(load(None, &["fit.bogus=1".into()]), Err(CliError::Config(_))));
        assert!(matches!(load(None, &["nonsense".into()]), Err(CliError::Config(_))));
        let cfg = load(None, &["fit.sign_restrictions=2".into(), "eb.truncated=[1,3]".into()]).unwrap();
        assert_eq!(cfg.fit.sign_restrictions.unwrap().indices().unwrap(), vec![1]);
        assert_eq!(cfg.eb.truncated.unwrap().indices().unwrap(), vec![0, 2]);
    }

    #[test]
    fn seed_precedence() {
        assert_eq!(resolve_seed(Some(1), Some(2), Some(3)).unwrap(), 1);
        assert_eq!(resolve_seed(None, Some(2), Some(3)).unwrap(), 2);
        assert_eq!(resolve_seed(None, None, Some(3)).unwrap(), 3);
        assert!(resolve_seed(None, None, None).is_err());
    }
}
