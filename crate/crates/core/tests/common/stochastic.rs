//! Small two-stage test problems together with independently assembled
//! deterministic equivalents.

use rand::Rng;
use shp_core::lp::{LinearProgram, RowSense};
use shp_core::mip::MixedIntegerProgram;
use shp_core::sp::{BoundSide, Coupling, CouplingTarget, Scenarios, TwoStageProblem};

const SHED: f64 = 1000.0;
const OVER: f64 = 30.0;

#[derive(Debug, Clone)]
pub struct ToyUnit {
    pub g_min: f64,
    pub g_max: f64,
    pub ramp: f64,
    pub min_up: usize,
    pub noload: f64,
    pub startup: f64,
    pub marginal: f64,
}

#[derive(Debug, Clone)]
pub struct ToyUc {
    pub units: Vec<ToyUnit>,
    pub periods: usize,
    /// Demand per scenario and period.
    pub demand: Vec<Vec<f64>>,
    pub prob: Vec<f64>,
}

impl ToyUc {
    pub fn random(rng: &mut impl Rng) -> Self {
        let n_units = rng.random_range(1..=3);
        let periods = rng.random_range(1..=4);
        let n_scen = rng.random_range(1..=5);
        let units = (0..n_units)
            .map(|_| {
                let g_max = rng.random_range(50.0..150.0_f64).round();
                let g_min = (g_max * rng.random_range(0.1..0.5)).round();
                ToyUnit {
                    g_min,
                    g_max,
                    ramp: (g_min + rng.random_range(0.0..g_max - g_min)).round(),
                    min_up: rng.random_range(1..=2),
                    noload: rng.random_range(0.0..300.0_f64).round(),
                    startup: rng.random_range(0.0..600.0_f64).round(),
                    marginal: rng.random_range(10.0..50.0_f64).round(),
                }
            })
            .collect();
        let demand = (0..n_scen)
            .map(|_| (0..periods).map(|_| rng.random_range(20.0..250.0_f64).round()).collect())
            .collect();
        let w: Vec<f64> = (0..n_scen).map(|_| rng.random_range(1.0..4.0_f64).round()).collect();
        let total: f64 = w.iter().sum();
        Self { units, periods, demand, prob: w.iter().map(|v| v / total).collect() }
    }

    fn commit(&self, g: usize, t: usize) -> usize {
        2 * (g * self.periods + t)
    }

    fn start(&self, g: usize, t: usize) -> usize {
        self.commit(g, t) + 1
    }

    /// Commitment and start-up variables with their logic rows, appended to `lp`.
    fn first_stage_into(&self, lp: &mut LinearProgram<f64>) -> Vec<usize> {
        let mut binaries = Vec::new();
        for (g, u) in self.units.iter().enumerate() {
            for t in 0..self.periods {
                binaries.push(lp.add_var(format!("u{g}_{t}"), 0.0, 1.0, u.noload));
                binaries.push(lp.add_var(format!("v{g}_{t}"), 0.0, 1.0, u.startup));
            }
        }
        for (g, u) in self.units.iter().enumerate() {
            for t in 0..self.periods {
                let mut c = vec![(self.start(g, t), 1.0), (self.commit(g, t), -1.0)];
                if t > 0 {
                    c.push((self.commit(g, t - 1), 1.0));
                }
                lp.add_row(format!("startup{g}_{t}"), c, RowSense::Ge, 0.0);
                let first = (t + 1).saturating_sub(u.min_up);
                let mut c: Vec<(usize, f64)> = (first..=t).map(|s| (self.start(g, s), 1.0)).collect();
                c.push((self.commit(g, t), -1.0));
                lp.add_row(format!("minup{g}_{t}"), c, RowSense::Le, 0.0);
            }
        }
        binaries
    }

    pub fn scenarios(&self) -> Scenarios<f64> {
        Scenarios { xi: self.demand.clone(), prob: self.prob.clone() }
    }

    pub fn two_stage(&self) -> TwoStageProblem<f64> {
        let mut first = LinearProgram::new();
        let binaries = self.first_stage_into(&mut first);
        let n = self.units.len();
        let mut rec = LinearProgram::new();
        let mut couplings = Vec::new();
        let p = |g: usize, t: usize| g * self.periods + t;
        for (g, u) in self.units.iter().enumerate() {
            for t in 0..self.periods {
                rec.add_var(format!("p{g}_{t}"), 0.0, f64::INFINITY, u.marginal);
            }
        }
        let shed0 = rec.num_vars();
        for t in 0..self.periods {
            rec.add_var(format!("shed{t}"), 0.0, f64::INFINITY, SHED);
        }
        let over0 = rec.num_vars();
        for t in 0..self.periods {
            rec.add_var(format!("over{t}"), 0.0, f64::INFINITY, OVER);
        }
        for t in 0..self.periods {
            let mut c: Vec<(usize, f64)> = (0..n).map(|g| (p(g, t), 1.0)).collect();
            c.push((shed0 + t, 1.0));
            c.push((over0 + t, -1.0));
            let row = rec.add_row(format!("balance{t}"), c, RowSense::Eq, 0.0);
            couplings.push(Coupling {
                target: CouplingTarget::Row(row),
                side: BoundSide::Both,
                constant: 0.0,
                first_stage: vec![],
                random: vec![(t, 1.0)],
            });
        }
        for (g, u) in self.units.iter().enumerate() {
            for t in 0..self.periods {
                let row = rec.add_range_row(format!("cap{g}_{t}"), vec![(p(g, t), 1.0)], 0.0, 0.0);
                for (side, a) in [(BoundSide::Lower, u.g_min), (BoundSide::Upper, u.g_max)] {
                    couplings.push(Coupling {
                        target: CouplingTarget::Row(row),
                        side,
                        constant: 0.0,
                        first_stage: vec![(self.commit(g, t), a)],
                        random: vec![],
                    });
                }
                if t > 0 {
                    rec.add_range_row(format!("ramp{g}_{t}"), vec![(p(g, t), 1.0), (p(g, t - 1), -1.0)], -u.ramp, u.ramp);
                }
            }
        }
        TwoStageProblem {
            first_stage: MixedIntegerProgram::new(first, binaries),
            recourse: rec,
            couplings,
            xi_dim: self.periods,
        }
    }

    /// Deterministic equivalent written out directly: one dispatch block per
    /// scenario with its probability folded into the costs.
    pub fn extensive_form(&self) -> MixedIntegerProgram<f64> {
        let mut lp = LinearProgram::new();
        let binaries = self.first_stage_into(&mut lp);
        for (s, (d, &pr)) in self.demand.iter().zip(&self.prob).enumerate() {
            let mut pv = vec![vec![0usize; self.periods]; self.units.len()];
            for (g, u) in self.units.iter().enumerate() {
                for t in 0..self.periods {
                    pv[g][t] = lp.add_var(format!("s{s}p{g}_{t}"), 0.0, f64::INFINITY, pr * u.marginal);
                }
            }
            for t in 0..self.periods {
                let shed = lp.add_var(format!("s{s}shed{t}"), 0.0, f64::INFINITY, pr * SHED);
                let over = lp.add_var(format!("s{s}over{t}"), 0.0, f64::INFINITY, pr * OVER);
                let mut c: Vec<(usize, f64)> = pv.iter().map(|row| (row[t], 1.0)).collect();
                c.push((shed, 1.0));
                c.push((over, -1.0));
                lp.add_row(format!("s{s}bal{t}"), c, RowSense::Eq, d[t]);
            }
            for (g, u) in self.units.iter().enumerate() {
                for t in 0..self.periods {
                    let x = self.commit(g, t);
                    lp.add_row(format!("s{s}lo{g}_{t}"), vec![(pv[g][t], 1.0), (x, -u.g_min)], RowSense::Ge, 0.0);
                    lp.add_row(format!("s{s}hi{g}_{t}"), vec![(pv[g][t], 1.0), (x, -u.g_max)], RowSense::Le, 0.0);
                    if t > 0 {
                        lp.add_range_row(format!("s{s}ramp{g}_{t}"), vec![(pv[g][t], 1.0), (pv[g][t - 1], -1.0)], -u.ramp, u.ramp);
                    }
                }
            }
        }
        MixedIntegerProgram::new(lp, binaries)
    }
}

/// Two-product newsvendor with a shared capacity of 120 and a three-point
/// joint demand distribution.
pub struct Newsvendor;

impl Newsvendor {
    pub const COST: [f64; 2] = [1.0, 1.2];
    pub const SHORTAGE: [f64; 2] = [4.0, 5.0];
    pub const EXCESS: f64 = 0.2;
    pub const CAPACITY: f64 = 120.0;
    pub const DEMAND: [[f64; 2]; 3] = [[30.0, 40.0], [60.0, 50.0], [90.0, 70.0]];
    pub const PROB: [f64; 3] = [0.3, 0.4, 0.3];

    pub fn two_stage() -> TwoStageProblem<f64> {
        let mut first = LinearProgram::new();
        for (i, c) in Self::COST.iter().enumerate() {
            first.add_var(format!("x{i}"), 0.0, f64::INFINITY, *c);
        }
        first.add_row("capacity", vec![(0, 1.0), (1, 1.0)], RowSense::Le, Self::CAPACITY);
        let mut rec = LinearProgram::new();
        let mut couplings = Vec::new();
        for i in 0..2 {
            let short = rec.add_var(format!("short{i}"), 0.0, f64::INFINITY, Self::SHORTAGE[i]);
            let excess = rec.add_var(format!("excess{i}"), 0.0, f64::INFINITY, Self::EXCESS);
            let row = rec.add_row(format!("balance{i}"), vec![(short, 1.0), (excess, -1.0)], RowSense::Eq, 0.0);
            couplings.push(Coupling {
                target: CouplingTarget::Row(row),
                side: BoundSide::Both,
                constant: 0.0,
                first_stage: vec![(i, -1.0)],
                random: vec![(i, 1.0)],
            });
        }
        TwoStageProblem { first_stage: MixedIntegerProgram::new(first, vec![]), recourse: rec, couplings, xi_dim: 2 }
    }

    /// Exact expected cost of an order `x`.
    pub fn cost(x: &[f64]) -> f64 {
        let mut total = Self::COST[0] * x[0] + Self::COST[1] * x[1];
        for (d, p) in Self::DEMAND.iter().zip(Self::PROB) {
            for i in 0..2 {
                total += p * (Self::SHORTAGE[i] * (d[i] - x[i]).max(0.0) + Self::EXCESS * (x[i] - d[i]).max(0.0));
            }
        }
        total
    }

    /// Weighted deterministic equivalent over the three demand points.
    pub fn extensive_form() -> LinearProgram<f64> {
        let mut lp = LinearProgram::new();
        for (i, c) in Self::COST.iter().enumerate() {
            lp.add_var(format!("x{i}"), 0.0, f64::INFINITY, *c);
        }
        lp.add_row("capacity", vec![(0, 1.0), (1, 1.0)], RowSense::Le, Self::CAPACITY);
        for (s, (d, p)) in Self::DEMAND.iter().zip(Self::PROB).enumerate() {
            for i in 0..2 {
                let short = lp.add_var(format!("s{s}short{i}"), 0.0, f64::INFINITY, p * Self::SHORTAGE[i]);
                let excess = lp.add_var(format!("s{s}excess{i}"), 0.0, f64::INFINITY, p * Self::EXCESS);
                lp.add_row(format!("s{s}bal{i}"), vec![(i, 1.0), (short, 1.0), (excess, -1.0)], RowSense::Eq, d[i]);
            }
        }
        lp
    }

    /// Draws demand points from the distribution.
    pub fn draw(rng: &mut impl Rng) -> Vec<f64> {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (d, p) in Self::DEMAND.iter().zip(Self::PROB) {
            acc += p;
            if u < acc {
                return d.to_vec();
            }
        }
        Self::DEMAND[2].to_vec()
    }
}
