//! Run configuration: a JSON file, environment variables and flags, merged
//! with flags taking precedence over the environment and both over the file.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use shp_core::grid::{CaseManifest, GridCase, ReserveLevel, ReservePolicy, ReserveSpec};
use shp_core::hierarchy::{InitialCondition, Setting, SimOptions, UnitStatus};

/// Flags shared by every command that runs or checks a simulation.
#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// JSON configuration file; any flag given here overrides it.
    #[arg(long, env = "SHP_CONFIG")]
    pub config: Option<PathBuf>,
    /// Case manifest (case.json).
    #[arg(long, env = "SHP_CASE")]
    pub case: Option<PathBuf>,
    /// Directory with the demand, solar and wind CSV series. Defaults to the
    /// directory named in the case manifest.
    #[arg(long, env = "SHP_SERIES")]
    pub series: Option<PathBuf>,
    /// Planning setting: DDD, DDS or SDS.
    #[arg(long, env = "SHP_SETTING")]
    pub setting: Option<Setting>,
    /// Reserve level (very_low, low, med, high) or explicit `UC/ED` fractions
    /// such as `0.08/0.02`.
    #[arg(long, env = "SHP_RESERVE", value_parser = parse_reserve)]
    pub reserve: Option<ReserveSpec>,
    /// Multiplier on wind and solar output and capacity.
    #[arg(long, env = "SHP_SW")]
    pub sw: Option<f64>,
    /// Days to simulate.
    #[arg(long, env = "SHP_DAYS")]
    pub days: Option<usize>,
    /// Scenarios of the stochastic day-ahead model.
    #[arg(long, env = "SHP_SCENARIOS")]
    pub scenarios: Option<usize>,
    /// Minimum sample count of stochastic decomposition in the hour-ahead model.
    #[arg(long, env = "SHP_SD_MIN_SAMPLES")]
    pub sd_min_samples: Option<usize>,
    #[arg(long, env = "SHP_SEED")]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, env = "SHP_OUT")]
    pub out: Option<PathBuf>,
    /// Unit status before the first epoch: `cold`, `day_ahead`, or a JSON
    /// file with one `{on, time_in_state, output}` entry per generator.
    #[arg(long, env = "SHP_INITIAL")]
    pub initial: Option<String>,
}

pub fn parse_reserve(s: &str) -> Result<ReserveSpec, String> {
    if let Some((uc, ed)) = s.split_once('/') {
        let num = |v: &str| v.trim().parse::<f64>().map_err(|e| format!("bad reserve fraction '{v}': {e}"));
        return Ok(ReserveSpec::Policy(ReservePolicy { uc_fraction: num(uc)?, ed_fraction: num(ed)? }));
    }
    s.parse::<ReserveLevel>().map(ReserveSpec::Level).map_err(|e| e.to_string())
}

/// Contents of a configuration file. Relative paths are taken from the
/// file's directory.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub case: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub setting: Option<Setting>,
    pub reserve: Option<ReserveSpec>,
    pub sw: Option<f64>,
    pub days: Option<usize>,
    pub scenarios: Option<usize>,
    pub sd_min_samples: Option<usize>,
    pub sd_max_samples: Option<usize>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub initial: Option<String>,
    pub history_days: Option<usize>,
    pub var_max_lag: Option<usize>,
    pub mip_gap: Option<f64>,
    pub workers: Option<usize>,
    pub settings: Option<Vec<Setting>>,
    pub reserves: Option<Vec<ReserveLevel>>,
    pub sws: Option<Vec<f64>>,
    pub replications: Option<usize>,
}

impl FileConfig {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("cannot read config {}", path.display()))?;
        let mut cfg: FileConfig =
            serde_json::from_str(&text).with_context(|| format!("cannot parse config {}", path.display()))?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.case, &mut cfg.series, &mut cfg.out].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        if let Some(init) = cfg.initial.as_mut().filter(|s| s.ends_with(".json") && Path::new(s.as_str()).is_relative()) {
            *init = base.join(&*init).display().to_string();
        }
        Ok(cfg)
    }
}

/// Everything a run uses, with every default filled in. Written next to the
/// outputs as `manifest.json`.
#[derive(Debug, Clone, Serialize)]
pub struct Resolved {
    pub version: &'static str,
    pub case: PathBuf,
    pub series: PathBuf,
    pub case_name: String,
    pub reserve_level: Option<ReserveLevel>,
    pub reserve: ReservePolicy,
    pub sw: f64,
    pub out: PathBuf,
    pub sim: SimOptions,
}

impl Resolved {
    /// Merges flags over the file (if any) and fills the remaining fields
    /// from the case manifest and the simulator defaults.
    pub fn new(args: &RunArgs) -> anyhow::Result<(Self, FileConfig)> {
        let file = match &args.config {
            Some(p) => FileConfig::read(p)?,
            None => FileConfig::default(),
        };
        let Some(case) = args.case.clone().or_else(|| file.case.clone()) else {
            bail!("no case manifest given (use --case, SHP_CASE or the config file)");
        };
        let manifest: CaseManifest = serde_json::from_str(
            &std::fs::read_to_string(&case).with_context(|| format!("cannot read case manifest {}", case.display()))?,
        )
        .with_context(|| format!("cannot parse case manifest {}", case.display()))?;
        let case_dir = case.parent().unwrap_or(Path::new("."));
        let series = match args.series.clone().or_else(|| file.series.clone()) {
            Some(s) => s,
            None => case_dir.join(manifest.series.clone().unwrap_or_else(|| "series".into())),
        };
        let reserve_spec = args.reserve.clone().or_else(|| file.reserve.clone()).or(manifest.reserve.clone());
        let (reserve_level, reserve) = match reserve_spec {
            Some(ReserveSpec::Level(l)) => (Some(l), l.policy()),
            Some(ReserveSpec::Policy(p)) => (None, p),
            None => (None, ReservePolicy::default()),
        };
        let defaults = SimOptions::default();
        let initial = match args.initial.clone().or_else(|| file.initial.clone()) {
            None => defaults.initial.clone(),
            Some(s) => parse_initial(&s)?,
        };
        let sd_min_samples = args.sd_min_samples.or(file.sd_min_samples).unwrap_or(defaults.sd_min_samples);
        let sim = SimOptions {
            setting: args.setting.or(file.setting).unwrap_or(defaults.setting),
            n_days: args.days.or(file.days).unwrap_or(defaults.n_days),
            seed: args.seed.or(file.seed).unwrap_or(defaults.seed),
            n_scenarios: args.scenarios.or(file.scenarios).unwrap_or(defaults.n_scenarios),
            sd_min_samples,
            sd_max_samples: file.sd_max_samples.unwrap_or(defaults.sd_max_samples.max(sd_min_samples)),
            history_days: file.history_days.unwrap_or(defaults.history_days),
            var_max_lag: file.var_max_lag.unwrap_or(defaults.var_max_lag),
            mip_gap: file.mip_gap.unwrap_or(defaults.mip_gap),
            initial,
            ..defaults
        };
        let resolved = Resolved {
            version: env!("CARGO_PKG_VERSION"),
            sw: args.sw.or(file.sw).or(manifest.sw_multiplier).unwrap_or(1.0),
            out: args.out.clone().or_else(|| file.out.clone()).unwrap_or_else(|| "shp-out".into()),
            case_name: manifest.name,
            case,
            series,
            reserve_level,
            reserve,
            sim,
        };
        Ok((resolved, file))
    }

    /// The case with this run's reserve policy and renewable multiplier.
    pub fn apply(&self, case: &GridCase) -> GridCase {
        let mut c = case.clone();
        c.reserve_policy = self.reserve;
        c.sw_multiplier = self.sw;
        c
    }
}

fn parse_initial(s: &str) -> anyhow::Result<InitialCondition> {
    match s {
        "cold" => Ok(InitialCondition::Cold),
        "day_ahead" => Ok(InitialCondition::DayAhead),
        path => {
            let text = std::fs::read_to_string(path).with_context(|| format!("cannot read initial state {path}"))?;
            let units: Vec<UnitStatus> =
                serde_json::from_str(&text).with_context(|| format!("cannot parse initial state {path}"))?;
            Ok(InitialCondition::Given(units))
        }
    }
}
