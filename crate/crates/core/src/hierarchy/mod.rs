//! Rolling-horizon conductor for the day-ahead, short-term and hour-ahead
//! layers.
//!
//! Each day starts from a day-ahead commitment of the slow units. Every few
//! hours a short-term commitment adds fast units, and every epoch an
//! hour-ahead dispatch with the observed renewable output in its first
//! period decides what is actually applied. Only that first period enters
//! the ledger; everything else is advisory and handed down as commitments
//! and generation targets.

mod inputs;
mod ledger;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::formulation::{build_ed, build_uc, CommitPlan, DispatchSolution, LayerModel, LayerSpec, UnitSetup};
use crate::grid::{validate_case, GeneratorKind, GridCase, Layer};
use crate::lp::LpStatus;
use crate::mip::MipOptions;
use crate::scenario::UpdateSchedule;
use crate::sp::{LShapedOptions, ListSampler, Scenarios, SdOptions};
use crate::timeseries::SeriesBundle;

use inputs::{coarsen, derive_seed, envelope, refine_target, DaPlan, SeriesMap, TechModels};
pub use ledger::{
    line_label, BusRecord, DispatchLedger, EpochDecision, HierarchyState, LineRecord, UnitRecord, BUS_FILE, LINE_FILE,
    UNIT_FILE,
};

/// Which layers use a stochastic model: day-ahead, short-term, hour-ahead.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Setting {
    #[serde(rename = "DDD")]
    Ddd,
    #[serde(rename = "DDS")]
    Dds,
    #[serde(rename = "SDS")]
    Sds,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Ddd, Setting::Dds, Setting::Sds];

    pub fn stochastic_day_ahead(self) -> bool {
        self == Setting::Sds
    }

    pub fn stochastic_dispatch(self) -> bool {
        self != Setting::Ddd
    }

    pub fn code(self) -> &'static str {
        match self {
            Setting::Ddd => "DDD",
            Setting::Dds => "DDS",
            Setting::Sds => "SDS",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

impl FromStr for Setting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "DDD" => Ok(Setting::Ddd),
            "DDS" => Ok(Setting::Dds),
            "SDS" => Ok(Setting::Sds),
            other => Err(invalid(format!("unknown planning setting '{other}' (expected DDD, DDS or SDS)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimOptions {
    pub setting: Setting,
    pub n_days: usize,
    pub seed: u64,
    /// Scenarios of the stochastic day-ahead model.
    pub n_scenarios: usize,
    pub sd_min_samples: usize,
    pub sd_max_samples: usize,
    /// Days of actual renewable output before the first simulated day, used
    /// to fit the scenario models.
    pub history_days: usize,
    pub var_max_lag: usize,
    /// Relative optimality gap of the commitment models.
    pub mip_gap: f64,
    pub update_schedule: UpdateSchedule,
    pub initial: InitialCondition,
}

/// Status of one generator before the first simulated epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitStatus {
    pub on: bool,
    /// Epochs already spent in that status.
    pub time_in_state: usize,
    pub output: f64,
}

/// How the run begins.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialCondition {
    /// Every unit off and free to start.
    #[default]
    Cold,
    /// Units committed in the first day-ahead hour start online at their
    /// first target, free to switch.
    DayAhead,
    /// Explicit status per generator, in case order.
    Given(Vec<UnitStatus>),
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            setting: Setting::Ddd,
            n_days: 1,
            seed: 0,
            n_scenarios: 100,
            sd_min_samples: 256,
            sd_max_samples: 2048,
            history_days: 14,
            var_max_lag: 3,
            mip_gap: 1e-4,
            update_schedule: UpdateSchedule::default(),
            initial: InitialCondition::Cold,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Lp,
    Mip,
    Lshaped,
    Sd,
}

/// One solved model instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceRecord {
    pub layer: Layer,
    /// Day the instance plans for (zero-based).
    pub day: usize,
    /// One-based position within the day: `j` for short-term, `k` for hour-ahead.
    pub index: usize,
    /// First epoch of the horizon, counted from the start of the run.
    pub epoch: usize,
    pub method: Method,
    pub objective: f64,
    pub samples: usize,
    /// True when the deviation limits had to be dropped to find a solution.
    pub fallback: bool,
}

#[derive(Debug, Clone)]
pub struct SimulationOutput {
    pub ledger: DispatchLedger,
    pub instances: Vec<InstanceRecord>,
    /// Case with the renewable multiplier applied, as simulated.
    pub case: GridCase,
    /// Unit status before the first epoch.
    pub initial: HierarchyState,
}

impl SimulationOutput {
    pub fn count(&self, layer: Layer) -> usize {
        self.instances.iter().filter(|r| r.layer == layer).count()
    }

    pub fn fallbacks(&self) -> usize {
        self.instances.iter().filter(|r| r.fallback).count()
    }

    pub fn write_instances(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        for r in &self.instances {
            w.serialize(r).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

/// Epoch arithmetic derived from the case's timescales.
#[derive(Debug, Clone, Copy)]
struct Clock {
    minutes: f64,
    per_day: usize,
    da_periods: usize,
    /// Epochs per day-ahead period.
    da_step: usize,
    st_step: usize,
    st_periods: usize,
    rt_periods: usize,
}

impl Clock {
    fn new(case: &GridCase, series_resolution: u32) -> Result<Self> {
        let ts = &case.timescale_config;
        let epoch = ts.rt.resolution;
        let ok = epoch > 0
            && ts.rt.solve_frequency == epoch
            && ts.st.resolution == epoch
            && series_resolution == epoch
            && ts.da.horizon == 1440
            && ts.da.resolution % epoch == 0
            && ts.st.solve_frequency % epoch == 0
            && 1440 % ts.st.solve_frequency == 0
            && ts.st.horizon >= ts.st.solve_frequency
            && ts.rt.periods() >= 2;
        if !ok {
            return Err(invalid(
                "timescales must share the series resolution as the epoch, with the day-ahead covering one day",
            ));
        }
        Ok(Self {
            minutes: epoch as f64,
            per_day: (1440 / epoch) as usize,
            da_periods: ts.da.periods(),
            da_step: (ts.da.resolution / epoch) as usize,
            st_step: (ts.st.solve_frequency / epoch) as usize,
            st_periods: ts.st.periods(),
            rt_periods: ts.rt.periods(),
        })
    }

    /// Epochs needed past the last simulated day.
    fn tail(&self) -> usize {
        (self.st_periods - self.st_step).max(self.rt_periods - 1)
    }
}

/// Rows of series a run needs: history, the simulated days and the look-ahead.
pub fn required_series_len(case: &GridCase, opts: &SimOptions) -> Result<usize> {
    let clock = Clock::new(case, case.timescale_config.rt.resolution)?;
    Ok((opts.history_days + opts.n_days) * clock.per_day + clock.tail())
}

/// Short-term plan covering `start .. start + commit[g].len()`.
struct StPlan {
    start: usize,
    commit: Vec<Vec<bool>>,
    output: Vec<Vec<f64>>,
}

struct Simulator<'a> {
    case: GridCase,
    series: SeriesBundle,
    opts: &'a SimOptions,
    clock: Clock,
    map: SeriesMap,
    /// Series row of simulated epoch 0.
    offset: usize,
    state: HierarchyState,
    initial: HierarchyState,
    da: Vec<Option<DaPlan>>,
    st: Option<StPlan>,
    hourly_models: Vec<Option<TechModels>>,
    epoch_models: Vec<Option<TechModels>>,
    instances: Vec<InstanceRecord>,
}

/// Runs the hierarchy over `opts.n_days` days. The renewable series and
/// capacities are scaled by `case.sw_multiplier` first.
pub fn run_simulation(case: &GridCase, series: &SeriesBundle, opts: &SimOptions) -> Result<SimulationOutput> {
    validate_case(case).into_result()?;
    if opts.n_days == 0 {
        return Err(invalid("a run needs at least one day"));
    }
    if opts.n_scenarios == 0 || opts.sd_min_samples == 0 || opts.sd_max_samples < opts.sd_min_samples {
        return Err(invalid("scenario and sample counts must be positive, with max_samples >= min_samples"));
    }
    let clock = Clock::new(case, series.resolution())?;
    if opts.update_schedule.len() < clock.st_periods {
        return Err(invalid(format!("the forecast update schedule needs at least {} weights", clock.st_periods)));
    }
    let need = required_series_len(case, opts)?;
    if series.len() < need {
        return Err(invalid(format!(
            "series hold {} rows but {} history days, {} simulated days and the look-ahead need {need}",
            series.len(),
            opts.history_days,
            opts.n_days
        )));
    }
    let mut scaled = case.clone();
    for g in &mut scaled.generators {
        if g.kind.is_renewable() {
            g.g_max *= case.sw_multiplier;
        }
    }
    let series = series.with_renewable_multiplier(case.sw_multiplier);
    let map = SeriesMap::new(&scaled, &series)?;
    let mut state = HierarchyState::cold_start(&scaled, clock.minutes, clock.per_day);
    if let InitialCondition::Given(units) = &opts.initial {
        if units.len() != scaled.generators.len() {
            return Err(invalid(format!("initial state lists {} generators, the case has {}", units.len(), scaled.generators.len())));
        }
        for (g, (u, gen)) in units.iter().zip(&scaled.generators).enumerate() {
            if gen.kind.is_renewable() {
                continue;
            }
            let (lo, hi) = if u.on { (gen.g_min, gen.g_max) } else { (0.0, 0.0) };
            if u.output < lo - 1e-9 || u.output > hi + 1e-9 {
                return Err(invalid(format!("initial output {} of {} is outside [{lo}, {hi}]", u.output, gen.id)));
            }
            state.on[g] = u.on;
            state.time_in_state[g] = u.time_in_state;
            state.output[g] = u.output;
        }
    }
    let mut sim = Simulator {
        case: scaled,
        series,
        opts,
        clock,
        map,
        offset: opts.history_days * clock.per_day,
        initial: state.clone(),
        state,
        da: vec![None; opts.n_days],
        st: None,
        hourly_models: vec![None; opts.n_days],
        epoch_models: vec![None; opts.n_days],
        instances: Vec::new(),
    };
    sim.run()?;
    Ok(SimulationOutput { ledger: sim.state.ledger, instances: sim.instances, case: sim.case, initial: sim.initial })
}

impl Simulator<'_> {
    fn run(&mut self) -> Result<()> {
        let c = self.clock;
        self.solve_day_ahead(0)?;
        if self.opts.initial == InitialCondition::DayAhead {
            self.warm_start();
        }
        for e in 0..self.opts.n_days * c.per_day {
            let day = e / c.per_day;
            if e % c.st_step == 0 {
                if e % c.per_day == c.per_day - c.st_step && day + 1 < self.opts.n_days {
                    self.solve_day_ahead(day + 1)?;
                }
                self.solve_short_term(e)?;
            }
            self.solve_hour_ahead(e)?;
        }
        Ok(())
    }

    /// Units committed in the first day-ahead hour enter the run online at
    /// their first target, free to switch.
    fn warm_start(&mut self) {
        // the cold state is what the first day-ahead plan was built from
        let plan = self.da[0].as_ref().expect("day-ahead plan of the first day");
        for (g, gen) in self.case.generators.iter().enumerate() {
            if gen.kind == GeneratorKind::ConventionalDa && plan.commit[g][0] {
                self.state.on[g] = true;
                self.state.time_in_state[g] = gen.min_up.max(1) as usize;
                self.state.output[g] = plan.target[g][0];
            }
        }
        self.initial = self.state.clone();
    }

    fn abort(&self, epoch: usize, layer: Layer, err: Error) -> Error {
        let dump = serde_json::to_string(&self.state).unwrap_or_default();
        Error::Simulation { epoch, reason: format!("{layer:?} model failed: {err}; state {dump}") }
    }

    fn is_da_unit(&self, g: usize) -> bool {
        self.case.generators[g].kind == GeneratorKind::ConventionalDa
    }

    /// Series window of actual output the scenario models of `day` are fitted on.
    fn history_window(&self, day: usize) -> (usize, usize) {
        let c = self.clock;
        let end = self.offset + day * c.per_day - if day > 0 { c.st_step } else { 0 };
        (end.saturating_sub(self.opts.history_days * c.per_day), end)
    }

    fn hourly_models(&mut self, day: usize) -> Result<&TechModels> {
        if self.hourly_models[day].is_none() {
            let (from, to) = self.history_window(day);
            let res = self.case.timescale_config.da.resolution;
            self.hourly_models[day] = Some(TechModels::fit(&self.series, from, to, res, self.opts.var_max_lag)?);
        }
        Ok(self.hourly_models[day].as_ref().expect("fitted"))
    }

    fn epoch_models(&mut self, day: usize) -> Result<&TechModels> {
        if self.epoch_models[day].is_none() {
            let (from, to) = self.history_window(day);
            let res = self.clock.minutes as u32;
            self.epoch_models[day] = Some(TechModels::fit(&self.series, from, to, res, self.opts.var_max_lag)?);
        }
        Ok(self.epoch_models[day].as_ref().expect("fitted"))
    }

    /// Commitment, epochs in status and output of every unit when day `day` begins,
    /// as planned by the previous day-ahead model.
    fn day_boundary(&self, day: usize) -> Vec<(bool, usize, f64)> {
        let ng = self.case.generators.len();
        let Some(prev) = day.checked_sub(1).and_then(|d| self.da[d].as_ref()) else {
            let s = &self.initial;
            return (0..ng).map(|g| (s.on[g], s.time_in_state[g], s.output[g])).collect();
        };
        let before = self.day_boundary(day - 1);
        (0..ng)
            .map(|g| {
                let hc = &prev.hourly_commit[g];
                let last = hc[hc.len() - 1];
                let run = hc.iter().rev().take_while(|&&on| on == last).count();
                let mut epochs = run * self.clock.da_step;
                if run == hc.len() && before[g].0 == last {
                    epochs += before[g].1;
                }
                (last, epochs, prev.hourly_output[g][hc.len() - 1])
            })
            .collect()
    }

    fn solve_day_ahead(&mut self, day: usize) -> Result<()> {
        let c = self.clock;
        let first = self.offset + day * c.per_day;
        let demand: Vec<Vec<f64>> = (first..first + c.per_day).map(|t| self.map.demand_row(&self.series.demand_forecast, t)).collect();
        let avail: Vec<Vec<f64>> = (first..first + c.per_day).map(|t| self.map.forecast(&self.series, t)).collect();
        let boundary = self.day_boundary(day);
        let units = (0..self.case.generators.len())
            .map(|g| {
                let kind = self.case.generators[g].kind;
                let plan = match kind {
                    GeneratorKind::ConventionalDa => CommitPlan::Decide,
                    GeneratorKind::ConventionalSt => CommitPlan::Excluded,
                    _ => CommitPlan::Fixed(vec![true; c.da_periods]),
                };
                let mut u = UnitSetup::new(plan);
                if kind == GeneratorKind::ConventionalDa {
                    (u.initially_on, u.time_in_state, u.initial_output) = boundary[g];
                }
                u
            })
            .collect();
        let spec = LayerSpec {
            layer: Layer::Da,
            periods: c.da_periods,
            minutes: self.case.timescale_config.da.resolution as f64,
            demand: coarsen(&demand, c.da_step),
            availability: coarsen(&avail, c.da_step),
            units,
        };
        let model = build_uc(&self.case, &spec).map_err(|e| self.abort(day * c.per_day, Layer::Da, e))?;
        let mip = MipOptions { gap_tol: self.opts.mip_gap, ..MipOptions::default() };
        let (sol, method) = if self.opts.setting.stochastic_day_ahead() {
            let scenarios = self.day_ahead_scenarios(day, &model)?;
            let opts = LShapedOptions { mip, ..LShapedOptions::default() };
            (model.solve_stochastic_uc(&scenarios, &opts), Method::Lshaped)
        } else {
            (model.solve_deterministic(&mip), Method::Mip)
        };
        let sol = sol.map_err(|e| self.abort(day * c.per_day, Layer::Da, e))?;
        self.instances.push(InstanceRecord {
            layer: Layer::Da,
            day,
            index: 1,
            epoch: day * c.per_day,
            method,
            objective: sol.objective,
            samples: 0,
            fallback: false,
        });
        self.da[day] = Some(self.refine_day_ahead(&sol, &boundary));
        Ok(())
    }

    fn day_ahead_scenarios(&mut self, day: usize, model: &LayerModel) -> Result<Scenarios<f64>> {
        let res = self.case.timescale_config.da.resolution;
        let n = self.opts.n_scenarios;
        let seed = derive_seed(self.opts.seed, 1, day as u64);
        let base = model.spec.availability.clone();
        let models = self.hourly_models(day)?.clone();
        let paths = self.map.sample_paths(&models, &base, res, n, seed)?;
        let xi = paths.iter().map(|p| model.scenario_vector(p)).collect::<Result<Vec<_>>>()?;
        Ok(Scenarios::equiprobable(xi))
    }

    fn refine_day_ahead(&self, sol: &DispatchSolution, boundary: &[(bool, usize, f64)]) -> DaPlan {
        let c = self.clock;
        let ng = self.case.generators.len();
        let mut plan = DaPlan { commit: Vec::new(), target: Vec::new(), hourly_commit: Vec::new(), hourly_output: Vec::new() };
        for g in 0..ng {
            let hourly: Vec<f64> = (0..c.da_periods).map(|t| sol.output(g, t)).collect();
            let commit: Vec<bool> = (0..c.per_day).map(|e| sol.commit[g][e / c.da_step]).collect();
            let target = if self.is_da_unit(g) {
                refine_target(&self.case.generators[g], &commit, &hourly, c.da_step, boundary[g].2)
            } else {
                vec![0.0; c.per_day]
            };
            plan.commit.push(commit);
            plan.target.push(target);
            plan.hourly_commit.push(sol.commit[g].clone());
            plan.hourly_output.push(hourly);
        }
        plan
    }

    /// Day-ahead commitment and target of unit `g` at `epoch`. Past the last
    /// simulated day the final epoch is held; a day not yet planned gives `None`.
    fn da_at(&self, g: usize, epoch: usize) -> Option<(bool, f64)> {
        let c = self.clock;
        let (day, e) = match epoch / c.per_day {
            d if d >= self.opts.n_days => (self.opts.n_days - 1, c.per_day - 1),
            d => (d, epoch % c.per_day),
        };
        self.da[day].as_ref().map(|p| (p.commit[g][e], p.target[g][e]))
    }

    /// Commitment of a day-ahead unit known from `epoch` on, as far as the
    /// published plans reach (at most one day).
    fn da_schedule(&self, g: usize, epoch: usize) -> Vec<bool> {
        (epoch..epoch + self.clock.per_day).map_while(|e| self.da_at(g, e).map(|(on, _)| on)).collect()
    }

    fn solve_short_term(&mut self, e: usize) -> Result<()> {
        let c = self.clock;
        let n = c.st_periods;
        let row = self.offset + e;
        let demand = (row..row + n).map(|t| self.map.demand_row(&self.series.demand_actual, t)).collect();
        let availability = self.map.updated(&self.series, row - 1, n, &self.opts.update_schedule)?;
        let build = |with_targets: bool| -> Result<LayerModel> {
            let units = (0..self.case.generators.len())
                .map(|g| {
                    let gen = &self.case.generators[g];
                    let mut u = match gen.kind {
                        GeneratorKind::ConventionalDa => {
                            let plan: Vec<(bool, f64)> = (e..e + n).map(|t| self.da_at(g, t).expect("day-ahead plan published")).collect();
                            let mut u = UnitSetup::new(CommitPlan::Fixed(plan.iter().map(|p| p.0).collect()));
                            let target: Vec<f64> = plan.iter().map(|p| p.1).collect();
                            u.envelope = envelope(gen, &self.da_schedule(g, e), with_targets.then_some(&target[..]), n);
                            u.target = with_targets.then_some(target);
                            u
                        }
                        GeneratorKind::ConventionalSt => UnitSetup::new(CommitPlan::Decide),
                        _ => UnitSetup::new(CommitPlan::Fixed(vec![true; n])),
                    };
                    u.initially_on = self.state.on[g];
                    u.time_in_state = self.state.time_in_state[g];
                    u.initial_output = self.state.output[g];
                    u
                })
                .collect();
            let spec = LayerSpec {
                layer: Layer::St,
                periods: n,
                minutes: c.minutes,
                demand: Vec::clone(&demand),
                availability: availability.clone(),
                units,
            };
            build_uc(&self.case, &spec)
        };
        let mip = MipOptions { gap_tol: self.opts.mip_gap, ..MipOptions::default() };
        let (sol, fallback) = match build(true).and_then(|m| m.solve_deterministic(&mip)) {
            Ok(sol) => (sol, false),
            Err(_) => {
                let sol = build(false).and_then(|m| m.solve_deterministic(&mip)).map_err(|err| self.abort(e, Layer::St, err))?;
                log::warn!("short-term model at epoch {e} solved without deviation limits");
                (sol, true)
            }
        };
        self.instances.push(InstanceRecord {
            layer: Layer::St,
            day: e / c.per_day,
            index: (e % c.per_day) / c.st_step + 1,
            epoch: e,
            method: Method::Mip,
            objective: sol.objective,
            samples: 0,
            fallback,
        });
        let ng = self.case.generators.len();
        self.st = Some(StPlan {
            start: e,
            commit: sol.commit.clone(),
            output: (0..ng).map(|g| (0..n).map(|t| sol.output(g, t)).collect()).collect(),
        });
        Ok(())
    }

    /// Commitment of unit `g` known from `epoch` on: the short-term plan,
    /// then for day-ahead units the day-ahead plan.
    fn known_schedule(&self, g: usize, epoch: usize) -> Vec<bool> {
        let st = self.st.as_ref().expect("short-term plan");
        let mut out: Vec<bool> = st.commit[g][epoch - st.start..].to_vec();
        if self.is_da_unit(g) {
            out.extend(self.da_schedule(g, st.start + st.commit[g].len()));
        }
        out
    }

    fn solve_hour_ahead(&mut self, e: usize) -> Result<()> {
        let c = self.clock;
        let n = c.rt_periods;
        let row = self.offset + e;
        let demand: Vec<Vec<f64>> = (row..row + n).map(|t| self.map.demand_row(&self.series.demand_actual, t)).collect();
        let mut availability = vec![self.map.actual(&self.series, row)];
        availability.extend(self.map.updated(&self.series, row, n - 1, &self.opts.update_schedule)?);
        let models = if self.opts.setting.stochastic_dispatch() {
            Some(self.epoch_models(e / c.per_day)?.clone())
        } else {
            None
        };
        let st = self.st.as_ref().expect("short-term plan precedes dispatch");
        let off = e - st.start;
        let build = |with_targets: bool| -> Result<LayerModel> {
            let units = (0..self.case.generators.len())
                .map(|g| {
                    let gen = &self.case.generators[g];
                    let mut u = if gen.kind.is_renewable() {
                        UnitSetup::new(CommitPlan::Fixed(vec![true; n]))
                    } else {
                        let mut u = UnitSetup::new(CommitPlan::Fixed(st.commit[g][off..off + n].to_vec()));
                        let target = st.output[g][off..off + n].to_vec();
                        u.envelope = envelope(gen, &self.known_schedule(g, e), with_targets.then_some(&target[..]), n);
                        u.target = with_targets.then_some(target);
                        u
                    };
                    u.initially_on = self.state.on[g];
                    u.time_in_state = self.state.time_in_state[g];
                    u.initial_output = self.state.output[g];
                    u
                })
                .collect();
            let spec = LayerSpec {
                layer: Layer::Rt,
                periods: n,
                minutes: c.minutes,
                demand: demand.clone(),
                availability: availability.clone(),
                units,
            };
            build_ed(&self.case, &spec)
        };
        let (result, fallback) = match self.dispatch(e, build(true)?, models.as_ref()) {
            Ok(r) => (r, false),
            Err(first) => {
                log::warn!("hour-ahead model at epoch {e} solved without deviation limits ({first})");
                let r = build(false).and_then(|m| self.dispatch(e, m, models.as_ref())).map_err(|err| self.abort(e, Layer::Rt, err))?;
                (r, true)
            }
        };
        let (sol, method, samples) = result;
        self.instances.push(InstanceRecord {
            layer: Layer::Rt,
            day: e / c.per_day,
            index: e % c.per_day + 1,
            epoch: e,
            method,
            objective: sol.objective,
            samples,
            fallback,
        });
        self.apply(e, &sol, &demand[0], &availability[0])
    }

    fn dispatch(&self, e: usize, model: LayerModel, models: Option<&TechModels>) -> Result<(DispatchSolution, Method, usize)> {
        let Some(models) = models else {
            return model.solve_deterministic(&MipOptions::default()).map(|s| (s, Method::Lp, 0));
        };
        // a deterministic solve first screens out dispatch problems without a feasible first period
        let ef = model.deterministic()?;
        let probe = crate::lp::solve_lp(&ef.lp, None)?;
        if probe.status != LpStatus::Optimal {
            return Err(Error::Solver(format!("dispatch at epoch {e} ended {:?}", probe.status)));
        }
        let res = self.clock.minutes as u32;
        let base = &model.spec.availability[1..];
        let seed = derive_seed(self.opts.seed, 2, e as u64);
        let paths = self.map.sample_paths(models, base, res, self.opts.sd_max_samples, seed)?;
        let mut full = Vec::with_capacity(paths.len());
        for p in paths {
            let mut table = vec![model.spec.availability[0].clone()];
            table.extend(p);
            full.push(model.scenario_vector(&table)?);
        }
        let mut sampler = ListSampler::new(full);
        let opts = SdOptions {
            min_samples: self.opts.sd_min_samples,
            max_samples: self.opts.sd_max_samples,
            ..SdOptions::default()
        };
        let (sol, samples) = model.solve_stochastic_ed(&mut sampler, &opts)?;
        Ok((sol, Method::Sd, samples))
    }

    fn apply(&mut self, e: usize, sol: &DispatchSolution, demand: &[f64], available: &[f64]) -> Result<()> {
        let ng = self.case.generators.len();
        let frac = self.case.reserve_policy.ed_fraction;
        let mut k = 0;
        let mut d = EpochDecision {
            epoch: e,
            on: (0..ng).map(|g| sol.commit[g][0]).collect(),
            gen: (0..ng).map(|g| sol.gen_plus[g][0]).collect(),
            over_gen: vec![0.0; ng],
            curtail: vec![0.0; ng],
            available: vec![0.0; ng],
            demand: demand.to_vec(),
            reserve: demand.iter().map(|x| x * frac).collect(),
            shed: sol.shed.iter().map(|b| b[0]).collect(),
            theta: sol.theta.iter().map(|b| b[0]).collect(),
            flow: sol.flow.iter().map(|l| l[0]).collect(),
        };
        for (g, gen) in self.case.generators.iter().enumerate() {
            if gen.kind.is_renewable() {
                d.curtail[g] = sol.gen_minus[g][0];
                d.available[g] = available[k];
                k += 1;
            } else {
                d.over_gen[g] = sol.gen_minus[g][0];
            }
        }
        self.state.advance(&d)
    }
}
