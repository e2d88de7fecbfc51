//! Unit-commitment and dispatch models for the three planning layers.
//!
//! Every layer is built as a two-stage problem. Commitment models (DA and
//! ST) keep on/off decisions in the first stage and the dispatch of the whole
//! horizon in the recourse; the hour-ahead dispatch keeps its first period in
//! the first stage and the look-ahead periods in the recourse. The
//! deterministic model of a layer is the extensive form of that problem with
//! the point forecast as its only scenario.
//!
//! Generator ramp limits and minimum up/down times are given per 15-minute
//! epoch and scaled to the layer's period length here.

use std::io::Write;

use crate::error::{invalid, Result};
use crate::grid::{reserve_requirement, GridCase, Layer};
use crate::lp::{solve_lp, LinearProgram, LpStatus, RowSense};
use crate::mip::{solve_mip, MipOptions, MipStatus, MixedIntegerProgram};
use crate::sp::{
    extensive_form, solve_lshaped, solve_sd, BoundSide, Coupling, CouplingTarget, LShapedOptions, RecourseEvaluator,
    Sampler, Scenarios, SdOptions, TwoStageProblem,
};
use crate::Error;

/// Length of the base epoch that generator data refers to.
pub const EPOCH_MINUTES: f64 = 15.0;

/// How a conventional unit's on/off status enters a model.
#[derive(Debug, Clone, PartialEq)]
pub enum CommitPlan {
    /// The unit takes no part in this layer.
    Excluded,
    /// Status per period, set upstream.
    Fixed(Vec<bool>),
    /// Status is a decision of this model.
    Decide,
}

/// Per-generator boundary data for one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct UnitSetup {
    pub plan: CommitPlan,
    pub initially_on: bool,
    /// Epochs spent in the initial status.
    pub time_in_state: usize,
    /// Output in the period just before the horizon.
    pub initial_output: f64,
    /// Upstream generation per period; output must stay within one ramp
    /// limit of it.
    pub target: Option<Vec<f64>>,
    /// Output range per period that keeps later commitments reachable
    /// under the ramp limits.
    pub envelope: Option<Vec<(f64, f64)>>,
}

impl UnitSetup {
    pub fn new(plan: CommitPlan) -> Self {
        Self { plan, initially_on: false, time_in_state: usize::MAX / 2, initial_output: 0.0, target: None, envelope: None }
    }
}

/// Data for one model instance.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerSpec {
    pub layer: Layer,
    pub periods: usize,
    /// Period length in minutes.
    pub minutes: f64,
    /// Demand per period and bus.
    pub demand: Vec<Vec<f64>>,
    /// Renewable availability per period, in the order of `GridCase::renewables`.
    pub availability: Vec<Vec<f64>>,
    /// One entry per generator of the case.
    pub units: Vec<UnitSetup>,
}

impl LayerSpec {
    fn check(&self, case: &GridCase) -> Result<()> {
        let nr = case.renewables().count();
        if self.periods == 0 || !(self.minutes > 0.0) {
            return Err(invalid("a model needs at least one period of positive length"));
        }
        if self.demand.len() != self.periods || self.demand.iter().any(|r| r.len() != case.buses.len()) {
            return Err(invalid(format!("demand must be {} periods x {} buses", self.periods, case.buses.len())));
        }
        if self.availability.len() != self.periods || self.availability.iter().any(|r| r.len() != nr) {
            return Err(invalid(format!("availability must be {} periods x {nr} renewables", self.periods)));
        }
        if self.units.len() != case.generators.len() {
            return Err(invalid("one unit setup per generator is required"));
        }
        for (u, g) in self.units.iter().zip(&case.generators) {
            if let CommitPlan::Fixed(v) = &u.plan {
                if v.len() != self.periods {
                    return Err(invalid(format!("fixed commitment of {} does not cover the horizon", g.id)));
                }
            }
            if let Some(t) = &u.target {
                if t.len() != self.periods {
                    return Err(invalid(format!("generation target of {} does not cover the horizon", g.id)));
                }
            }
            if u.envelope.as_ref().is_some_and(|e| e.len() != self.periods) {
                return Err(invalid(format!("output envelope of {} does not cover the horizon", g.id)));
            }
            if g.kind.is_renewable() && u.plan == CommitPlan::Decide {
                return Err(invalid(format!("renewable {} cannot be committed", g.id)));
            }
        }
        Ok(())
    }

    fn hours(&self) -> f64 {
        self.minutes / 60.0
    }

    fn per_period(&self, per_epoch: f64) -> f64 {
        per_epoch * self.minutes / EPOCH_MINUTES
    }

    fn epochs_to_periods(&self, epochs: usize) -> usize {
        (epochs as f64 * EPOCH_MINUTES / self.minutes).ceil() as usize
    }
}

/// Columns of one dispatch period inside its stage.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PeriodVars {
    pub gen_plus: Vec<Option<usize>>,
    pub gen_minus: Vec<Option<usize>>,
    pub flow: Vec<usize>,
    pub theta: Vec<usize>,
    pub shed: Vec<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CommitVars {
    pub on: usize,
    pub start: usize,
    pub stop: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    First,
    Recourse,
}

/// Where every modelled quantity lives.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMap {
    pub first_stage_len: usize,
    /// Commitment columns (first stage) per generator and period, for units
    /// decided by the model.
    pub commit: Vec<Option<Vec<CommitVars>>>,
    pub periods: Vec<(Stage, PeriodVars)>,
    /// Index of the first period held in the recourse.
    pub recourse_from: usize,
}

/// Dispatch and commitment read back from a solved model.
#[derive(Debug, Clone, PartialEq)]
pub struct DispatchSolution {
    /// Commitment per generator and period (renewables always on).
    pub commit: Vec<Vec<bool>>,
    pub gen_plus: Vec<Vec<f64>>,
    pub gen_minus: Vec<Vec<f64>>,
    pub flow: Vec<Vec<f64>>,
    pub theta: Vec<Vec<f64>>,
    pub shed: Vec<Vec<f64>>,
    pub objective: f64,
}

impl DispatchSolution {
    /// Total output `G⁺ + G⁻` of a generator in a period.
    pub fn output(&self, g: usize, t: usize) -> f64 {
        self.gen_plus[g][t] + self.gen_minus[g][t]
    }
}

/// A built layer model.
#[derive(Debug, Clone)]
pub struct LayerModel {
    pub spec: LayerSpec,
    pub problem: TwoStageProblem<f64>,
    pub map: ModelMap,
    renewables: usize,
    renewable: Vec<bool>,
}

enum CommitRef {
    Const(bool),
    First(usize),
    Absent,
}

enum Prev<'a> {
    Initial,
    Same(&'a PeriodVars),
    First(&'a PeriodVars),
}

struct Builder<'a> {
    case: &'a GridCase,
    spec: &'a LayerSpec,
    couplings: Vec<Coupling<f64>>,
    renewable_slot: Vec<Option<usize>>,
    bus_of_gen: Vec<usize>,
    line_ends: Vec<(usize, usize)>,
}

impl<'a> Builder<'a> {
    fn new(case: &'a GridCase, spec: &'a LayerSpec) -> Result<Self> {
        spec.check(case)?;
        let idx = case.bus_index();
        let bus = |id: &str| idx.get(id).copied().ok_or_else(|| invalid(format!("unknown bus {id}")));
        let mut renewable_slot = vec![None; case.generators.len()];
        for (k, (g, _)) in case.renewables().enumerate() {
            renewable_slot[g] = Some(k);
        }
        Ok(Self {
            case,
            spec,
            couplings: Vec::new(),
            renewable_slot,
            bus_of_gen: case.generators.iter().map(|g| bus(&g.bus)).collect::<Result<_>>()?,
            line_ends: case.lines.iter().map(|l| Ok((bus(&l.from_bus)?, bus(&l.to_bus)?))).collect::<Result<_>>()?,
        })
    }

    fn couple(&mut self, row: usize, side: BoundSide, constant: f64, first_stage: Vec<(usize, f64)>, random: Vec<(usize, f64)>) {
        self.couplings.push(Coupling { target: CouplingTarget::Row(row), side, constant, first_stage, random });
    }

    /// Commitment columns and logic rows for the units the model decides.
    fn commitment_block(&self, lp: &mut LinearProgram<f64>, binaries: &mut Vec<usize>) -> Vec<Option<Vec<CommitVars>>> {
        let spec = self.spec;
        let mut out = vec![None; self.case.generators.len()];
        for (gi, (g, u)) in self.case.generators.iter().zip(&spec.units).enumerate() {
            if u.plan != CommitPlan::Decide {
                continue;
            }
            let forced_on = if u.initially_on {
                let by_min_up = spec.epochs_to_periods((g.min_up as usize).saturating_sub(u.time_in_state));
                let rd = spec.per_period(g.ramp_down);
                let by_ramp = if u.initial_output > rd { (u.initial_output / rd).ceil() as usize - 1 } else { 0 };
                by_min_up.max(by_ramp)
            } else {
                0
            };
            let forced_off = if u.initially_on {
                0
            } else {
                spec.epochs_to_periods((g.min_down as usize).saturating_sub(u.time_in_state))
            };
            let vars: Vec<CommitVars> = (0..spec.periods)
                .map(|t| {
                    let (lo, hi) = if t < forced_on {
                        (1.0, 1.0)
                    } else if t < forced_off {
                        (0.0, 0.0)
                    } else {
                        (0.0, 1.0)
                    };
                    let on = lp.add_var(format!("on[{},{t}]", g.id), lo, hi, g.cost_noload * spec.hours());
                    let start = lp.add_var(format!("start[{},{t}]", g.id), 0.0, 1.0, g.cost_startup);
                    let stop = lp.add_var(format!("stop[{},{t}]", g.id), 0.0, 1.0, 0.0);
                    binaries.extend([on, start, stop]);
                    CommitVars { on, start, stop }
                })
                .collect();
            let up = spec.epochs_to_periods(g.min_up as usize).max(1);
            let down = spec.epochs_to_periods(g.min_down as usize).max(1);
            let init = if u.initially_on { 1.0 } else { 0.0 };
            for t in 0..spec.periods {
                let mut c = vec![(vars[t].on, 1.0), (vars[t].start, -1.0), (vars[t].stop, 1.0)];
                let rhs = if t == 0 {
                    init
                } else {
                    c.push((vars[t - 1].on, -1.0));
                    0.0
                };
                lp.add_row(format!("state[{},{t}]", g.id), c, RowSense::Eq, rhs);
                let from = (t + 1).saturating_sub(up);
                let mut c: Vec<(usize, f64)> = (from..=t).map(|s| (vars[s].start, 1.0)).collect();
                c.push((vars[t].on, -1.0));
                lp.add_row(format!("min_up[{},{t}]", g.id), c, RowSense::Le, 0.0);
                let from = (t + 1).saturating_sub(down);
                let mut c: Vec<(usize, f64)> = (from..=t).map(|s| (vars[s].stop, 1.0)).collect();
                c.push((vars[t].on, 1.0));
                lp.add_row(format!("min_down[{},{t}]", g.id), c, RowSense::Le, 1.0);
            }
            out[gi] = Some(vars);
        }
        out
    }

    /// Appends the dispatch variables and rows of period `t`.
    #[allow(clippy::too_many_arguments)]
    fn period(
        &mut self,
        lp: &mut LinearProgram<f64>,
        t: usize,
        commit: &dyn Fn(usize) -> CommitRef,
        random_avail: Option<usize>,
        prev: Prev<'_>,
    ) -> Result<PeriodVars> {
        let case = self.case;
        let spec = self.spec;
        let h = spec.hours();
        let pen = case.penalty_config;
        let ng = case.generators.len();
        let mut pv = PeriodVars { gen_plus: vec![None; ng], gen_minus: vec![None; ng], ..PeriodVars::default() };
        for (gi, g) in case.generators.iter().enumerate() {
            if matches!(commit(gi), CommitRef::Absent) {
                continue;
            }
            let minus_cost = if g.kind.is_renewable() { pen.phi_curtail } else { g.cost_variable + pen.phi_over };
            pv.gen_plus[gi] = Some(lp.add_var(format!("gen[{},{t}]", g.id), 0.0, f64::INFINITY, h * g.cost_variable));
            pv.gen_minus[gi] = Some(lp.add_var(format!("spill[{},{t}]", g.id), 0.0, f64::INFINITY, h * minus_cost));
        }
        for (li, l) in case.lines.iter().enumerate() {
            pv.flow.push(lp.add_var(format!("flow[{}-{}#{li},{t}]", l.from_bus, l.to_bus), l.lower_limit(), l.flow_max, 0.0));
        }
        for b in &case.buses {
            pv.theta.push(lp.add_var(format!("theta[{},{t}]", b.id), b.theta_min, b.theta_max, 0.0));
        }
        for b in &case.buses {
            pv.shed.push(lp.add_var(format!("shed[{},{t}]", b.id), 0.0, f64::INFINITY, h * pen.phi_unmet));
        }

        for (bi, b) in case.buses.iter().enumerate() {
            let mut c = Vec::new();
            for (li, &(from, to)) in self.line_ends.iter().enumerate() {
                if to == bi {
                    c.push((pv.flow[li], 1.0));
                }
                if from == bi {
                    c.push((pv.flow[li], -1.0));
                }
            }
            for (gi, gp) in pv.gen_plus.iter().enumerate() {
                if let Some(j) = gp {
                    if self.bus_of_gen[gi] == bi {
                        c.push((*j, 1.0));
                    }
                }
            }
            c.push((pv.shed[bi], 1.0));
            let d = spec.demand[t][bi];
            let rhs = d + reserve_requirement(&case.reserve_policy, spec.layer, d)?;
            lp.add_row(format!("balance[{},{t}]", b.id), c, RowSense::Eq, rhs);
        }
        for (li, l) in case.lines.iter().enumerate() {
            let (from, to) = self.line_ends[li];
            let c = vec![(pv.flow[li], 1.0), (pv.theta[from], -l.susceptance), (pv.theta[to], l.susceptance)];
            lp.add_row(format!("dc_flow[{}-{}#{li},{t}]", l.from_bus, l.to_bus), c, RowSense::Eq, 0.0);
        }

        for (gi, g) in case.generators.iter().enumerate() {
            let (Some(gp), Some(gm)) = (pv.gen_plus[gi], pv.gen_minus[gi]) else { continue };
            let out = vec![(gp, 1.0), (gm, 1.0)];
            if let Some(k) = self.renewable_slot[gi] {
                let avail = spec.availability[t][k];
                let row = lp.add_row(format!("availability[{},{t}]", g.id), out, RowSense::Eq, avail);
                if let Some(base) = random_avail {
                    self.couple(row, BoundSide::Both, 0.0, vec![], vec![(base + k, 1.0)]);
                }
                continue;
            }
            match commit(gi) {
                CommitRef::Const(on) => {
                    let x = if on { 1.0 } else { 0.0 };
                    lp.add_range_row(format!("capacity[{},{t}]", g.id), out.clone(), g.g_min * x, g.g_max * x);
                }
                CommitRef::First(j) => {
                    let row = lp.add_range_row(format!("capacity[{},{t}]", g.id), out.clone(), 0.0, 0.0);
                    self.couple(row, BoundSide::Lower, 0.0, vec![(j, g.g_min)], vec![]);
                    self.couple(row, BoundSide::Upper, 0.0, vec![(j, g.g_max)], vec![]);
                }
                CommitRef::Absent => unreachable!(),
            }
            let (ru, rd) = (spec.per_period(g.ramp_up), spec.per_period(g.ramp_down));
            let u = &spec.units[gi];
            match prev {
                Prev::Initial => {
                    lp.add_range_row(format!("ramp[{},{t}]", g.id), out.clone(), u.initial_output - rd, u.initial_output + ru);
                }
                Prev::Same(p) => {
                    let mut c = out.clone();
                    if let (Some(a), Some(b)) = (p.gen_plus[gi], p.gen_minus[gi]) {
                        c.extend([(a, -1.0), (b, -1.0)]);
                    }
                    lp.add_range_row(format!("ramp[{},{t}]", g.id), c, -rd, ru);
                }
                Prev::First(p) => {
                    let row = lp.add_range_row(format!("ramp[{},{t}]", g.id), out.clone(), 0.0, 0.0);
                    let prior: Vec<(usize, f64)> =
                        [p.gen_plus[gi], p.gen_minus[gi]].into_iter().flatten().map(|j| (j, 1.0)).collect();
                    self.couple(row, BoundSide::Lower, -rd, prior.clone(), vec![]);
                    self.couple(row, BoundSide::Upper, ru, prior, vec![]);
                }
            }
            if let Some(target) = &u.target {
                let y = target[t];
                lp.add_range_row(format!("deviation[{},{t}]", g.id), out.clone(), (y - rd).max(0.0), y + ru);
            }
            if let Some(env) = &u.envelope {
                lp.add_range_row(format!("envelope[{},{t}]", g.id), out, env[t].0, env[t].1);
            }
        }
        Ok(pv)
    }

    fn finish(self, first: LinearProgram<f64>, binaries: Vec<usize>, recourse: LinearProgram<f64>, map: ModelMap) -> LayerModel {
        let renewables = self.renewable_slot.iter().flatten().count();
        let xi_dim = (self.spec.periods - map.recourse_from) * renewables;
        LayerModel {
            spec: self.spec.clone(),
            problem: TwoStageProblem {
                first_stage: MixedIntegerProgram::new(first, binaries),
                recourse,
                couplings: self.couplings,
                xi_dim,
            },
            map,
            renewables,
            renewable: self.renewable_slot.iter().map(Option::is_some).collect(),
        }
    }
}

/// Day-ahead or short-term unit commitment: commitments of the units marked
/// `Decide` in the first stage, dispatch of every period in the recourse.
pub fn build_uc(case: &GridCase, spec: &LayerSpec) -> Result<LayerModel> {
    let mut b = Builder::new(case, spec)?;
    let mut first = LinearProgram::new();
    let mut binaries = Vec::new();
    let commit = b.commitment_block(&mut first, &mut binaries);
    let nr = b.renewable_slot.iter().flatten().count();
    let mut rec = LinearProgram::new();
    let mut periods: Vec<(Stage, PeriodVars)> = Vec::with_capacity(spec.periods);
    for t in 0..spec.periods {
        let refs = |gi: usize| -> CommitRef {
            if case.generators[gi].kind.is_renewable() {
                return CommitRef::Const(true);
            }
            match &spec.units[gi].plan {
                CommitPlan::Excluded => CommitRef::Absent,
                CommitPlan::Fixed(v) => CommitRef::Const(v[t]),
                CommitPlan::Decide => CommitRef::First(commit[gi].as_ref().expect("decided unit")[t].on),
            }
        };
        let prev = match periods.last() {
            Some((_, p)) => Prev::Same(p),
            None => Prev::Initial,
        };
        let pv = b.period(&mut rec, t, &refs, Some(t * nr), prev)?;
        periods.push((Stage::Recourse, pv));
    }
    let map = ModelMap { first_stage_len: first.num_vars(), commit, periods, recourse_from: 0 };
    Ok(b.finish(first, binaries, rec, map))
}

/// Hour-ahead dispatch: the first period (with observed availability) is
/// the first stage, the look-ahead periods form the recourse.
pub fn build_ed(case: &GridCase, spec: &LayerSpec) -> Result<LayerModel> {
    if spec.periods < 2 {
        return Err(invalid("hour-ahead dispatch needs at least two periods"));
    }
    if spec.units.iter().any(|u| u.plan == CommitPlan::Decide) {
        return Err(invalid("hour-ahead dispatch needs every commitment fixed upstream"));
    }
    let mut b = Builder::new(case, spec)?;
    let nr = b.renewable_slot.iter().flatten().count();
    let refs_at = |t: usize| {
        move |gi: usize| -> CommitRef {
            if case.generators[gi].kind.is_renewable() {
                return CommitRef::Const(true);
            }
            match &spec.units[gi].plan {
                CommitPlan::Fixed(v) => CommitRef::Const(v[t]),
                _ => CommitRef::Absent,
            }
        }
    };
    let mut first = LinearProgram::new();
    let p0 = b.period(&mut first, 0, &refs_at(0), None, Prev::Initial)?;
    let mut rec = LinearProgram::new();
    let mut periods = vec![(Stage::First, p0)];
    for t in 1..spec.periods {
        let pv = {
            let prev = match &periods[t - 1] {
                (Stage::First, p) => Prev::First(p),
                (Stage::Recourse, p) => Prev::Same(p),
            };
            b.period(&mut rec, t, &refs_at(t), Some((t - 1) * nr), prev)?
        };
        periods.push((Stage::Recourse, pv));
    }
    let map = ModelMap {
        first_stage_len: first.num_vars(),
        commit: vec![None; case.generators.len()],
        periods,
        recourse_from: 1,
    };
    Ok(b.finish(first, Vec::new(), rec, map))
}

impl LayerModel {
    /// Scenario vector for the recourse periods of an availability table
    /// (periods x renewables, covering the whole horizon).
    pub fn scenario_vector(&self, availability: &[Vec<f64>]) -> Result<Vec<f64>> {
        if availability.len() != self.spec.periods || availability.iter().any(|r| r.len() != self.renewables) {
            return Err(invalid("availability table does not match the model"));
        }
        Ok(availability[self.map.recourse_from..].iter().flatten().copied().collect())
    }

    /// Scenario vector of the spec's own point forecast.
    pub fn point_scenario(&self) -> Vec<f64> {
        self.spec.availability[self.map.recourse_from..].iter().flatten().copied().collect()
    }

    /// The deterministic model: the point forecast as the single scenario.
    pub fn deterministic(&self) -> Result<MixedIntegerProgram<f64>> {
        extensive_form(&self.problem, &Scenarios { xi: vec![self.point_scenario()], prob: vec![1.0] })
    }

    /// Reads a solution from first-stage values and one recourse point.
    pub fn extract(&self, first: &[f64], recourse: &[f64], objective: f64) -> DispatchSolution {
        let case_gens = self.spec.units.len();
        let periods = self.spec.periods;
        let mut sol = DispatchSolution {
            commit: vec![vec![false; periods]; case_gens],
            gen_plus: vec![vec![0.0; periods]; case_gens],
            gen_minus: vec![vec![0.0; periods]; case_gens],
            flow: Vec::new(),
            theta: Vec::new(),
            shed: Vec::new(),
            objective,
        };
        let n_lines = self.map.periods[0].1.flow.len();
        let n_buses = self.map.periods[0].1.theta.len();
        sol.flow = vec![vec![0.0; periods]; n_lines];
        sol.theta = vec![vec![0.0; periods]; n_buses];
        sol.shed = vec![vec![0.0; periods]; n_buses];
        for (t, (stage, pv)) in self.map.periods.iter().enumerate() {
            let src = match stage {
                Stage::First => first,
                Stage::Recourse => recourse,
            };
            for g in 0..case_gens {
                if let Some(j) = pv.gen_plus[g] {
                    sol.gen_plus[g][t] = src[j];
                }
                if let Some(j) = pv.gen_minus[g] {
                    sol.gen_minus[g][t] = src[j];
                }
            }
            for (l, &j) in pv.flow.iter().enumerate() {
                sol.flow[l][t] = src[j];
            }
            for (b, &j) in pv.theta.iter().enumerate() {
                sol.theta[b][t] = src[j];
            }
            for (b, &j) in pv.shed.iter().enumerate() {
                sol.shed[b][t] = src[j];
            }
        }
        for (g, u) in self.spec.units.iter().enumerate() {
            for t in 0..periods {
                sol.commit[g][t] = match (&u.plan, &self.map.commit[g]) {
                    (_, Some(vars)) => first[vars[t].on] > 0.5,
                    (CommitPlan::Fixed(v), None) => v[t],
                    (CommitPlan::Excluded, None) => false,
                    (CommitPlan::Decide, None) => unreachable!(),
                };
                if self.renewable[g] {
                    sol.commit[g][t] = true;
                }
            }
        }
        sol
    }

    fn extract_full(&self, x: &[f64], objective: f64) -> DispatchSolution {
        let n1 = self.map.first_stage_len;
        self.extract(&x[..n1], &x[n1..], objective)
    }

    /// Solves the deterministic model.
    pub fn solve_deterministic(&self, opts: &MipOptions<f64>) -> Result<DispatchSolution> {
        let ef = self.deterministic()?;
        if ef.binaries.is_empty() {
            let sol = solve_lp(&ef.lp, None)?;
            if sol.status != LpStatus::Optimal {
                return Err(Error::Solver(format!("{:?} dispatch ended {:?}", self.spec.layer, sol.status)));
            }
            return Ok(self.extract_full(&sol.x, sol.objective));
        }
        let sol = solve_mip(&ef, opts, None)?;
        if !sol.has_incumbent() || sol.status == MipStatus::Infeasible {
            return Err(Error::Solver(format!("{:?} commitment ended {:?}", self.spec.layer, sol.status)));
        }
        Ok(self.extract_full(&sol.x, sol.objective))
    }

    /// Recourse points at first-stage `x`, averaged with the scenario weights.
    fn mean_recourse(&self, x: &[f64], scenarios: &Scenarios<f64>) -> Result<Vec<f64>> {
        let mut eval = RecourseEvaluator::new(&self.problem);
        let mut mean = vec![0.0; self.problem.recourse.num_vars()];
        for (s, (xi, p)) in scenarios.xi.iter().zip(&scenarios.prob).enumerate() {
            let (_, y) = eval.solve_primal(x, xi, s)?;
            for (m, v) in mean.iter_mut().zip(&y) {
                *m += p * v;
            }
        }
        Ok(mean)
    }

    /// Solves the stochastic commitment model by the L-shaped method. The
    /// reported dispatch is the probability-weighted mean over scenarios.
    pub fn solve_stochastic_uc(&self, scenarios: &Scenarios<f64>, opts: &LShapedOptions<f64>) -> Result<DispatchSolution> {
        let sol = solve_lshaped(&self.problem, scenarios, opts)?;
        if sol.x.is_empty() {
            return Err(Error::Solver(format!("{:?} stochastic commitment ended {:?}", self.spec.layer, sol.master.status)));
        }
        let mean = self.mean_recourse(&sol.x, scenarios)?;
        Ok(self.extract(&sol.x, &mean, sol.objective))
    }

    /// Solves the stochastic dispatch by stochastic decomposition. Only the
    /// first period is a here-and-now decision; the look-ahead periods are
    /// filled with the recourse response to the point forecast. Returns the
    /// solution and the number of samples drawn.
    pub fn solve_stochastic_ed(&self, sampler: &mut dyn Sampler<f64>, opts: &SdOptions<f64>) -> Result<(DispatchSolution, usize)> {
        let sol = solve_sd(&self.problem, sampler, opts)?;
        let point = Scenarios { xi: vec![self.point_scenario()], prob: vec![1.0] };
        let tail = self.mean_recourse(&sol.x, &point)?;
        Ok((self.extract(&sol.x, &tail, sol.objective_estimate), sol.samples))
    }
}

/// Writes a model in a plain text form: one line per column with bounds,
/// cost and integrality, then one line per row with its bounds and terms.
pub fn write_model(model: &MixedIntegerProgram<f64>, out: &mut dyn Write) -> std::io::Result<()> {
    let lp = &model.lp;
    let mut binary = vec![false; lp.num_vars()];
    for &j in &model.binaries {
        binary[j] = true;
    }
    writeln!(out, "# columns {} rows {} binaries {}", lp.num_vars(), lp.num_rows(), model.binaries.len())?;
    writeln!(out, "objective_offset {}", lp.obj_offset)?;
    for j in 0..lp.num_vars() {
        let kind = if binary[j] { "binary" } else { "continuous" };
        writeln!(out, "col {j} {} [{}, {}] cost {} {kind}", lp.var_names[j], lp.lower[j], lp.upper[j], lp.obj[j])?;
    }
    for (i, r) in lp.rows.iter().enumerate() {
        let terms: Vec<String> = r.coeffs.iter().map(|(j, a)| format!("{a:+}*{}", lp.var_names[*j])).collect();
        writeln!(out, "row {i} {} [{}, {}] : {}", r.name, r.lo, r.hi, terms.join(" "))?;
    }
    Ok(())
}
