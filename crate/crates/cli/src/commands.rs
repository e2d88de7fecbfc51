use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::Args;
use rayon::prelude::*;
use serde::Serialize;
use shp_core::grid::{validate_case, GridCase, Layer, ReserveLevel};
use shp_core::hierarchy::{required_series_len, run_simulation, InitialCondition, Setting, UnitStatus};
use shp_core::metrics::{compute_metrics, emit_report, CellKey, CellSummary, MetricsSummary};
use shp_core::timeseries::SeriesBundle;

use crate::config::{Resolved, RunArgs};

/// Error carrying the process exit code: 2 for bad input, 1 for anything
/// that fails while running.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub error: anyhow::Error,
}

pub type Outcome = Result<(), Failure>;

trait Classify<T> {
    fn input(self) -> Result<T, Failure>;
    fn runtime(self) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> Classify<T> for Result<T, E> {
    fn input(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 2, error: e.into() })
    }
    fn runtime(self) -> Result<T, Failure> {
        self.map_err(|e| Failure { code: 1, error: e.into() })
    }
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    std::fs::write(path, text).with_context(|| format!("cannot write {}", path.display()))
}

/// Loads the case and series and checks that they fit the requested run.
fn load_inputs(cfg: &Resolved) -> anyhow::Result<(GridCase, SeriesBundle)> {
    let case = GridCase::load(&cfg.case)?;
    let case = cfg.apply(&case);
    validate_case(&case).into_result()?;
    if let InitialCondition::Given(units) = &cfg.sim.initial {
        if units.len() != case.generators.len() {
            return Err(anyhow!("the initial state lists {} units but the case has {} generators", units.len(), case.generators.len()));
        }
    }
    let series = SeriesBundle::load(&cfg.series)?;
    series.check_case(&case)?;
    let need = required_series_len(&case, &cfg.sim)?;
    if series.len() < need {
        return Err(anyhow!(
            "series in {} hold {} rows but {} history days plus {} simulated days and the look-ahead need {need}",
            cfg.series.display(),
            series.len(),
            cfg.sim.history_days,
            cfg.sim.n_days
        ));
    }
    Ok((case, series))
}

pub fn validate(args: &RunArgs) -> Outcome {
    let (cfg, _) = Resolved::new(args).input()?;
    let (case, series) = load_inputs(&cfg).input()?;
    println!(
        "{}: {} buses, {} lines, {} generators; {} series rows at {} min, enough for {} day(s)",
        cfg.case_name,
        case.buses.len(),
        case.lines.len(),
        case.generators.len(),
        series.len(),
        series.resolution(),
        cfg.sim.n_days
    );
    Ok(())
}

/// Runs one simulation and writes its ledger, instance log, metrics, initial
/// state and resolved configuration under `out`.
fn simulate_into(cfg: &Resolved, case: &GridCase, series: &SeriesBundle, out: &Path) -> anyhow::Result<MetricsSummary> {
    std::fs::create_dir_all(out).with_context(|| format!("cannot create {}", out.display()))?;
    write_json(&out.join("manifest.json"), cfg)?;
    let result = run_simulation(case, series, &cfg.sim)?;
    let ledger_dir = out.join("ledger");
    std::fs::create_dir_all(&ledger_dir).with_context(|| format!("cannot create {}", ledger_dir.display()))?;
    result.ledger.write(&result.case, &ledger_dir)?;
    result.write_instances(&out.join("instances.csv"))?;
    let initial: Vec<UnitStatus> = (0..result.case.generators.len())
        .map(|g| UnitStatus {
            on: result.initial.on[g],
            time_in_state: result.initial.time_in_state[g],
            output: result.initial.output[g],
        })
        .collect();
    write_json(&out.join("initial_state.json"), &initial)?;
    let metrics = compute_metrics(&result.ledger, &result.case, Some(&result.initial.on))?;
    write_json(&out.join("metrics.json"), &metrics)?;
    log::info!(
        "{} {} sw {} seed {}: {} DA, {} ST, {} HA solves, {} fallbacks, avg unmet {:.4} MW",
        cfg.sim.setting,
        cfg.reserve_level.map_or("custom", ReserveLevel::label),
        cfg.sw,
        cfg.sim.seed,
        result.count(Layer::Da),
        result.count(Layer::St),
        result.count(Layer::Rt),
        result.fallbacks(),
        metrics.avg_unmet_mw
    );
    Ok(metrics)
}

pub fn simulate(args: &RunArgs) -> Outcome {
    let (cfg, _) = Resolved::new(args).input()?;
    let (case, series) = load_inputs(&cfg).input()?;
    let m = simulate_into(&cfg, &case, &series, &cfg.out).runtime()?;
    println!(
        "{} days {}: avg unmet {:.4} MW, max unmet {:.4} MW, daily cost {:.2}, ST active {:.2}%; output in {}",
        cfg.sim.n_days,
        cfg.sim.setting,
        m.avg_unmet_mw,
        m.max_unmet_mw,
        m.avg_daily_cost,
        m.st_active_pct,
        cfg.out.display()
    );
    Ok(())
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub run: RunArgs,
    /// Planning settings to run (default: all three).
    #[arg(long, env = "SHP_SETTINGS", value_delimiter = ',')]
    pub settings: Vec<Setting>,
    /// Reserve levels to run (default: all four).
    #[arg(long, env = "SHP_RESERVES", value_delimiter = ',')]
    pub reserves: Vec<ReserveLevel>,
    /// Renewable multipliers to run (default: the single `--sw` value).
    #[arg(long, env = "SHP_SWS", value_delimiter = ',')]
    pub sws: Vec<f64>,
    /// Seeds per cell, counting up from `--seed`; metrics are averaged.
    #[arg(long, env = "SHP_REPLICATIONS")]
    pub replications: Option<usize>,
    /// Cells run in parallel (default: available cores).
    #[arg(long, env = "SHP_WORKERS")]
    pub workers: Option<usize>,
}

#[derive(Debug, Serialize)]
struct SweepManifest<'a> {
    base: &'a Resolved,
    settings: &'a [Setting],
    reserves: &'a [ReserveLevel],
    sws: &'a [f64],
    seeds: &'a [u64],
    workers: usize,
}

#[derive(Debug, Serialize)]
struct FailureRecord {
    setting: Setting,
    reserve: ReserveLevel,
    sw: f64,
    seed: u64,
    error: String,
}

fn pick<T: Clone>(flag: &[T], file: Option<Vec<T>>, all: &[T]) -> Vec<T> {
    if flag.is_empty() {
        file.unwrap_or_else(|| all.to_vec())
    } else {
        flag.to_vec()
    }
}

pub fn cell_dir(out: &Path, key: &CellKey) -> PathBuf {
    out.join("cells").join(format!("{}_{}_sw{}", key.setting, key.reserve, key.sw))
}

pub fn sweep(args: &SweepArgs) -> Outcome {
    let (base, file) = Resolved::new(&args.run).input()?;
    let settings = pick(&args.settings, file.settings, &Setting::ALL);
    let reserves = pick(&args.reserves, file.reserves, &ReserveLevel::ALL);
    let sws = pick(&args.sws, file.sws, &[base.sw]);
    let reps = args.replications.or(file.replications).unwrap_or(1);
    let workers = args.workers.or(file.workers).unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    if settings.is_empty() || reserves.is_empty() || sws.is_empty() || reps == 0 || workers == 0 {
        return Err(anyhow!("the sweep grid, replication count and worker count must be nonempty")).input();
    }
    let seeds: Vec<u64> = (0..reps as u64).map(|k| base.sim.seed + k).collect();

    // per-cell multipliers are checked when each cell starts
    let mut probe = base.clone();
    probe.sw = 1.0;
    let (case, series) = load_inputs(&probe).input()?;

    std::fs::create_dir_all(&base.out).with_context(|| format!("cannot create {}", base.out.display())).runtime()?;
    let manifest = SweepManifest { base: &base, settings: &settings, reserves: &reserves, sws: &sws, seeds: &seeds, workers };
    write_json(&base.out.join("manifest.json"), &manifest).runtime()?;

    let mut jobs = Vec::new();
    for &setting in &settings {
        for &reserve in &reserves {
            for &sw in &sws {
                for &seed in &seeds {
                    jobs.push((CellKey { setting, reserve, sw }, seed));
                }
            }
        }
    }
    let run = |&(key, seed): &(CellKey, u64)| -> anyhow::Result<MetricsSummary> {
        let mut cfg = base.clone();
        cfg.sim.setting = key.setting;
        cfg.sim.seed = seed;
        cfg.reserve_level = Some(key.reserve);
        cfg.reserve = key.reserve.policy();
        cfg.sw = key.sw;
        let cell_case = cfg.apply(&case);
        validate_case(&cell_case).into_result()?;
        simulate_into(&cfg, &cell_case, &series, &cell_dir(&base.out, &key).join(format!("seed{seed}")))
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(workers).build().runtime()?;
    let results: Vec<_> = pool.install(|| jobs.par_iter().map(|j| (j, run(j))).collect());

    let mut cells = Vec::new();
    let mut failures = Vec::new();
    for chunk in results.chunks(seeds.len()) {
        let key = chunk[0].0 .0;
        let mut runs = Vec::new();
        for ((_, seed), r) in chunk {
            match r {
                Ok(m) => runs.push(m.clone()),
                Err(e) => {
                    log::error!("cell {} {} sw {} seed {seed} failed: {e:#}", key.setting, key.reserve, key.sw);
                    failures.push(FailureRecord { setting: key.setting, reserve: key.reserve, sw: key.sw, seed: *seed, error: format!("{e:#}") });
                }
            }
        }
        if runs.len() == seeds.len() {
            let cell = CellSummary { key, metrics: MetricsSummary::mean(&runs).runtime()? };
            write_json(&cell_dir(&base.out, &key).join("cell.json"), &cell).runtime()?;
            cells.push(cell);
        }
    }
    if !failures.is_empty() {
        let path = base.out.join("failures.csv");
        let mut w = csv::Writer::from_path(&path).runtime()?;
        for f in &failures {
            w.serialize(f).runtime()?;
        }
        w.flush().runtime()?;
    }
    if !cells.is_empty() {
        emit_report(&cells, &base.out).runtime()?;
    }
    println!("{} of {} cells completed; report in {}", cells.len(), jobs.len() / seeds.len(), base.out.display());
    if failures.is_empty() {
        Ok(())
    } else {
        Err(Failure { code: 1, error: anyhow!("{} run(s) failed, see {}", failures.len(), base.out.join("failures.csv").display()) })
    }
}

/// Rebuilds the aggregate report of a sweep directory from its cell files.
pub fn report(dir: &Path) -> Outcome {
    let cells_dir = dir.join("cells");
    let entries = std::fs::read_dir(&cells_dir).with_context(|| format!("no sweep cells under {}", cells_dir.display())).input()?;
    let mut cells = Vec::new();
    for entry in entries {
        let path = entry.input()?.path().join("cell.json");
        if path.exists() {
            let text = std::fs::read_to_string(&path).input()?;
            let cell: CellSummary = serde_json::from_str(&text).with_context(|| format!("cannot parse {}", path.display())).input()?;
            cells.push(cell);
        }
    }
    cells.sort_by(|a, b| {
        (a.key.setting, a.key.reserve).cmp(&(b.key.setting, b.key.reserve)).then(a.key.sw.total_cmp(&b.key.sw))
    });
    if cells.is_empty() {
        return Err(anyhow!("no completed cells under {}", cells_dir.display())).input();
    }
    emit_report(&cells, dir).runtime()?;
    println!("report for {} cells written to {}", cells.len(), dir.display());
    Ok(())
}
