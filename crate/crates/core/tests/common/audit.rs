//! Constraint audit of an applied dispatch ledger, written against the raw
//! case data and actual series rather than the simulator's own bookkeeping.

use shp_core::grid::GridCase;
use shp_core::hierarchy::{DispatchLedger, HierarchyState};
use shp_core::timeseries::SeriesBundle;

/// Every violation found in the ledger, one message each. `case` is the case
/// as loaded; its renewable multiplier is applied here. Epoch `e` of the
/// ledger reads series row `offset + e`, and `initial` is the unit status
/// before epoch 0.
pub fn audit_ledger(
    case: &GridCase,
    series: &SeriesBundle,
    ledger: &DispatchLedger,
    initial: &HierarchyState,
    offset: usize,
    tol: f64,
) -> Vec<String> {
    let mut out = Vec::new();
    let (ng, nb, nl) = (case.generators.len(), case.buses.len(), case.lines.len());
    let n = ledger.num_epochs();
    if ledger.units.len() != n * ng || ledger.buses.len() != n * nb || ledger.lines.len() != n * nl {
        out.push("ledger is incomplete".into());
        return out;
    }
    let bus_of = |id: &str| case.buses.iter().position(|b| b.id == id).expect("known bus");
    let m = case.sw_multiplier;

    for (g, gen) in case.generators.iter().enumerate() {
        let recs: Vec<_> = (0..n).map(|e| &ledger.units[e * ng + g]).collect();
        if gen.kind.is_renewable() {
            let frame = if gen.kind == shp_core::grid::GeneratorKind::Solar { &series.solar_actual } else { &series.wind_actual };
            let col = frame.columns.iter().position(|c| Some(c) == gen.supply_ref.as_ref()).expect("renewable column");
            for (e, r) in recs.iter().enumerate() {
                let avail = (frame.values[offset + e][col] * m).clamp(0.0, gen.g_max * m);
                if (r.available - avail).abs() > tol {
                    out.push(format!("{} epoch {e}: availability {} but the series gives {avail}", gen.id, r.available));
                }
                if (r.gen + r.curtail - avail).abs() > tol || r.gen < -tol || r.curtail < -tol {
                    out.push(format!("{} epoch {e}: used {} + curtailed {} != available {avail}", gen.id, r.gen, r.curtail));
                }
            }
            continue;
        }
        // capacity and ramping on total output
        let mut prev = initial.output[g];
        for (e, r) in recs.iter().enumerate() {
            let y = r.gen + r.over_gen;
            let (lo, hi) = if r.on { (gen.g_min, gen.g_max) } else { (0.0, 0.0) };
            if y < lo - tol || y > hi + tol || r.gen < -tol || r.over_gen < -tol {
                out.push(format!("{} epoch {e}: output {y} outside [{lo}, {hi}]", gen.id));
            }
            if y - prev > gen.ramp_up + tol || prev - y > gen.ramp_down + tol {
                out.push(format!("{} epoch {e}: ramp {prev} -> {y}", gen.id));
            }
            prev = y;
        }
        // minimum up and down times on the status sequence
        let mut status = initial.on[g];
        let mut run = initial.time_in_state[g];
        for (e, r) in recs.iter().enumerate() {
            if r.on == status {
                run += 1;
                continue;
            }
            let need = if status { gen.min_up } else { gen.min_down } as usize;
            if run < need {
                out.push(format!("{} epoch {e}: switched after {run} epochs, needs {need}", gen.id));
            }
            status = r.on;
            run = 1;
        }
    }

    for e in 0..n {
        let units = &ledger.units[e * ng..(e + 1) * ng];
        let buses = &ledger.buses[e * nb..(e + 1) * nb];
        let lines = &ledger.lines[e * nl..(e + 1) * nl];
        let mut injection = vec![0.0; nb];
        for (g, gen) in case.generators.iter().enumerate() {
            injection[bus_of(&gen.bus)] += units[g].gen;
        }
        for (l, line) in case.lines.iter().enumerate() {
            let (i, j) = (bus_of(&line.from_bus), bus_of(&line.to_bus));
            let f = lines[l].flow;
            let implied = line.susceptance * (buses[i].theta - buses[j].theta);
            if (f - implied).abs() > tol * line.susceptance.max(1.0) {
                out.push(format!("line {l} epoch {e}: flow {f} but angles imply {implied}"));
            }
            let fmin = line.flow_min.unwrap_or(-line.flow_max);
            if f < fmin - tol || f > line.flow_max + tol {
                out.push(format!("line {l} epoch {e}: flow {f} outside [{fmin}, {}]", line.flow_max));
            }
            injection[i] -= f;
            injection[j] += f;
        }
        let mut supply = 0.0;
        let mut need = 0.0;
        for (b, bus) in case.buses.iter().enumerate() {
            let r = &buses[b];
            if r.theta < bus.theta_min - tol || r.theta > bus.theta_max + tol {
                out.push(format!("bus {} epoch {e}: angle {} out of range", bus.id, r.theta));
            }
            if r.shed < -tol {
                out.push(format!("bus {} epoch {e}: negative shed {}", bus.id, r.shed));
            }
            let expected = bus
                .demand_ref
                .as_ref()
                .map_or(0.0, |c| series.demand_actual.values[offset + e][series.demand_actual.columns.iter().position(|x| x == c).expect("demand column")]);
            if (r.demand - expected).abs() > tol {
                out.push(format!("bus {} epoch {e}: demand {} but the series gives {expected}", bus.id, r.demand));
            }
            if (r.reserve - r.demand * case.reserve_policy.ed_fraction).abs() > tol {
                out.push(format!("bus {} epoch {e}: reserve {} does not match the policy", bus.id, r.reserve));
            }
            let residual = injection[b] + r.shed - r.demand - r.reserve;
            if residual.abs() > tol {
                out.push(format!("bus {} epoch {e}: balance residual {residual}", bus.id));
            }
            supply += r.shed;
            need += r.demand + r.reserve;
        }
        supply += units.iter().map(|u| u.gen).sum::<f64>();
        if (supply - need).abs() > tol {
            out.push(format!("epoch {e}: energy does not close, supply {supply} vs need {need}"));
        }
    }
    out
}
