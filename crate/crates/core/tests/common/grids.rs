//! Small networks built in code, and a checker that re-derives every
//! operating constraint of a dispatch from first principles.

use shp_core::formulation::{CommitPlan, DispatchSolution, LayerSpec};
use shp_core::grid::{
    Bus, Generator, GeneratorKind, GridCase, Layer, Line, PenaltyConfig, ReservePolicy, TimescaleConfig,
};

pub fn bus(id: &str) -> Bus {
    Bus { id: id.into(), theta_min: -3.0, theta_max: 3.0, demand_ref: Some(format!("load_{id}")) }
}

pub fn line(from: &str, to: &str, susceptance: f64, flow_max: f64) -> Line {
    Line { from_bus: from.into(), to_bus: to.into(), susceptance, flow_min: None, flow_max }
}

/// Generator with zero costs and loose limits; callers adjust fields.
pub fn unit(id: &str, bus: &str, kind: GeneratorKind, g_max: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        kind,
        g_min: 0.0,
        g_max,
        ramp_up: g_max,
        ramp_down: g_max,
        min_up: 1,
        min_down: 1,
        cost_startup: 0.0,
        cost_noload: 0.0,
        cost_variable: 0.0,
        heat_rate: 0.0,
        co2_rate: 0.0,
        nox_rate: 0.0,
        so2_rate: 0.0,
        supply_ref: kind.is_renewable().then(|| format!("supply_{id}")),
    }
}

pub fn grid(buses: Vec<Bus>, lines: Vec<Line>, generators: Vec<Generator>) -> GridCase {
    GridCase {
        name: "test".into(),
        buses,
        lines,
        generators,
        penalty_config: PenaltyConfig::default(),
        reserve_policy: ReservePolicy { uc_fraction: 0.0, ed_fraction: 0.0 },
        timescale_config: TimescaleConfig::default(),
        sw_multiplier: 1.0,
    }
}

fn run_lengths_ok(initial_on: bool, time_in_state: f64, x: &[bool], up: f64, down: f64) -> Option<String> {
    // `up`, `down` and `time_in_state` are in periods
    let mut state = initial_on;
    let mut age = time_in_state;
    for (t, &on) in x.iter().enumerate() {
        if on != state {
            let need = if state { up } else { down };
            if age + 1e-9 < need {
                return Some(format!("switched {} at period {t} after {age} periods (need {need})", if on { "on" } else { "off" }));
            }
            state = on;
            age = 0.0;
        }
        age += 1.0;
    }
    None
}

/// Every violated operating constraint of `sol` for the instance `spec`.
pub fn violations(case: &GridCase, spec: &LayerSpec, sol: &DispatchSolution, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    let scale = spec.minutes / 15.0;
    let frac = match spec.layer {
        Layer::Da | Layer::St => case.reserve_policy.uc_fraction,
        Layer::Rt => case.reserve_policy.ed_fraction,
    };
    let bus_pos = |id: &str| case.buses.iter().position(|b| b.id == id).unwrap();
    let mut k = 0;
    for (g, gen) in case.generators.iter().enumerate() {
        let u = &spec.units[g];
        let slot = if gen.kind.is_renewable() {
            k += 1;
            Some(k - 1)
        } else {
            None
        };
        let mut prev = u.initial_output;
        for t in 0..spec.periods {
            let (p, m) = (sol.gen_plus[g][t], sol.gen_minus[g][t]);
            let total = p + m;
            if p < -tol || m < -tol {
                out.push(format!("negative output of {} at {t}", gen.id));
            }
            if let Some(k) = slot {
                if (total - spec.availability[t][k]).abs() > tol {
                    out.push(format!("{} uses {total} of {} available at {t}", gen.id, spec.availability[t][k]));
                }
                continue;
            }
            if u.plan == CommitPlan::Excluded {
                if total.abs() > tol {
                    out.push(format!("excluded {} produces at {t}", gen.id));
                }
                continue;
            }
            let on = sol.commit[g][t];
            if let CommitPlan::Fixed(v) = &u.plan {
                if v[t] != on {
                    out.push(format!("{} commitment differs from the fixed plan at {t}", gen.id));
                }
            }
            let x = if on { 1.0 } else { 0.0 };
            if total < gen.g_min * x - tol || total > gen.g_max * x + tol {
                out.push(format!("{} output {total} outside capacity at {t} (on={on})", gen.id));
            }
            let (ru, rd) = (gen.ramp_up * scale, gen.ramp_down * scale);
            if total - prev > ru + tol || prev - total > rd + tol {
                out.push(format!("{} ramps from {prev} to {total} at {t}", gen.id));
            }
            if let Some(y) = &u.target {
                if total > y[t] + ru + tol || total < (y[t] - rd).max(0.0) - tol {
                    out.push(format!("{} deviates from target {} with {total} at {t}", gen.id, y[t]));
                }
            }
            if let Some(env) = &u.envelope {
                if total < env[t].0 - tol || total > env[t].1 + tol {
                    out.push(format!("{} output {total} leaves its envelope at {t}", gen.id));
                }
            }
            prev = total;
        }
        if gen.kind.is_conventional() && u.plan == CommitPlan::Decide {
            let periods_of = |epochs: f64| (epochs / scale).ceil();
            let up = periods_of(gen.min_up as f64).max(1.0);
            let down = periods_of(gen.min_down as f64).max(1.0);
            let age = if u.initially_on && u.time_in_state < gen.min_up as usize {
                up - periods_of((gen.min_up as usize - u.time_in_state) as f64)
            } else if !u.initially_on && u.time_in_state < gen.min_down as usize {
                down - periods_of((gen.min_down as usize - u.time_in_state) as f64)
            } else {
                f64::INFINITY
            };
            if let Some(msg) = run_lengths_ok(u.initially_on, age, &sol.commit[g], up, down) {
                out.push(format!("{}: {msg}", gen.id));
            }
        }
    }
    for t in 0..spec.periods {
        for (b, _) in case.buses.iter().enumerate() {
            let mut net = sol.shed[b][t];
            if sol.shed[b][t] < -tol {
                out.push(format!("negative shed at bus {b}, {t}"));
            }
            for (l, ln) in case.lines.iter().enumerate() {
                if bus_pos(&ln.to_bus) == b {
                    net += sol.flow[l][t];
                }
                if bus_pos(&ln.from_bus) == b {
                    net -= sol.flow[l][t];
                }
            }
            for (g, gen) in case.generators.iter().enumerate() {
                if bus_pos(&gen.bus) == b {
                    net += sol.gen_plus[g][t];
                }
            }
            let need = spec.demand[t][b] * (1.0 + frac);
            if (net - need).abs() > tol {
                out.push(format!("bus {b} balance {net} vs {need} at {t}"));
            }
            let th = sol.theta[b][t];
            if th < case.buses[b].theta_min - tol || th > case.buses[b].theta_max + tol {
                out.push(format!("angle out of range at bus {b}, {t}"));
            }
        }
        for (l, ln) in case.lines.iter().enumerate() {
            let f = sol.flow[l][t];
            let dc = ln.susceptance * (sol.theta[bus_pos(&ln.from_bus)][t] - sol.theta[bus_pos(&ln.to_bus)][t]);
            if (f - dc).abs() > tol {
                out.push(format!("line {l} flow {f} vs angle flow {dc} at {t}"));
            }
            if f > ln.flow_max + tol || f < ln.lower_limit() - tol {
                out.push(format!("line {l} flow {f} over its limit at {t}"));
            }
        }
    }
    out
}
