mod common;

use approx::assert_relative_eq;
use common::grids::{bus, grid, unit};
use proptest::prelude::*;
use shp_core::grid::{GeneratorKind, GridCase, ReserveLevel};
use shp_core::hierarchy::{DispatchLedger, EpochDecision, HierarchyState, Setting};
use shp_core::metrics::{compute_metrics, daily_variation, emit_report, min_reserve_for_zero_unmet, CellKey, CellSummary, MetricsSummary};

/// One bus, a thermal unit, a fast unit and a wind farm.
fn small_case() -> GridCase {
    let mut thermal = unit("t", "a", GeneratorKind::ConventionalDa, 200.0);
    thermal.cost_variable = 20.0;
    thermal.cost_noload = 100.0;
    thermal.cost_startup = 1000.0;
    thermal.co2_rate = 0.5;
    thermal.nox_rate = 0.01;
    let mut fast = unit("f", "a", GeneratorKind::ConventionalSt, 50.0);
    fast.cost_variable = 80.0;
    fast.cost_startup = 200.0;
    let wind = unit("w", "a", GeneratorKind::Wind, 100.0);
    grid(vec![bus("a")], vec![], vec![thermal, fast, wind])
}

#[derive(Clone, Debug)]
struct Step {
    on: [bool; 2],
    gen: [f64; 3],
    over: [f64; 2],
    curtail: f64,
    demand: f64,
    shed: f64,
}

fn step(on: [bool; 2], gen: [f64; 3], demand: f64, shed: f64) -> Step {
    Step { on, gen, over: [0.0; 2], curtail: 0.0, demand, shed }
}

fn ledger_of(case: &GridCase, steps: &[Step], per_day: usize) -> DispatchLedger {
    let mut state = HierarchyState::cold_start(case, 15.0, per_day);
    for (e, s) in steps.iter().enumerate() {
        state
            .advance(&EpochDecision {
                epoch: e,
                on: vec![s.on[0], s.on[1], true],
                gen: s.gen.to_vec(),
                over_gen: vec![s.over[0], s.over[1], 0.0],
                curtail: vec![0.0, 0.0, s.curtail],
                available: vec![0.0, 0.0, s.gen[2] + s.curtail],
                demand: vec![s.demand],
                reserve: vec![0.0],
                shed: vec![s.shed],
                theta: vec![0.0],
                flow: vec![],
            })
            .unwrap();
    }
    state.ledger
}

#[test]
fn idle_system_has_zero_metrics() {
    let case = small_case();
    let ledger = ledger_of(&case, &vec![step([false, false], [0.0; 3], 0.0, 0.0); 8], 96);
    let m = compute_metrics(&ledger, &case, None).unwrap();
    assert_eq!(m.avg_unmet_mw, 0.0);
    assert_eq!(m.max_unmet_mw, 0.0);
    assert_eq!(m.avg_daily_cost_with_penalties, 0.0);
    assert_eq!(m.co2_t, 0.0);
    assert_eq!(m.st_active_pct, 0.0);
    assert_eq!(m.avg_committed_generators, 0.0);
}

#[test]
fn one_epoch_at_100_mw_emits_12_5_tons() {
    let case = small_case();
    let ledger = ledger_of(&case, &[step([true, false], [100.0, 0.0, 0.0], 100.0, 0.0)], 96);
    let m = compute_metrics(&ledger, &case, None).unwrap();
    assert_relative_eq!(m.co2_t, 12.5, epsilon = 1e-12);
    assert_relative_eq!(m.nox_t, 0.25, epsilon = 1e-12);
    assert_relative_eq!(m.daily_co2_t, 12.5 * 96.0, epsilon = 1e-9);
    assert_relative_eq!(m.cost.variable, 500.0, epsilon = 1e-12);
    assert_relative_eq!(m.cost.noload, 25.0, epsilon = 1e-12);
    assert_relative_eq!(m.cost.startup, 1000.0, epsilon = 1e-12);
}

#[test]
fn one_shed_event_over_two_epochs() {
    let case = small_case();
    let steps = [step([true, false], [50.0, 0.0, 0.0], 55.0, 5.0), step([true, false], [50.0, 0.0, 0.0], 50.0, 0.0)];
    let m = compute_metrics(&ledger_of(&case, &steps, 96), &case, None).unwrap();
    assert_relative_eq!(m.avg_unmet_mw, 2.5);
    assert_relative_eq!(m.max_unmet_mw, 5.0);
    assert_relative_eq!(m.cost.unmet_penalty, 5000.0 * 5.0 * 0.25);
    assert!(!m.meets_all_demand());
}

#[test]
fn startup_depends_on_the_initial_status() {
    let case = small_case();
    let ledger = ledger_of(&case, &[step([true, true], [40.0, 10.0, 0.0], 50.0, 0.0)], 96);
    let cold = compute_metrics(&ledger, &case, None).unwrap();
    let warm = compute_metrics(&ledger, &case, Some(&[true, false, true])).unwrap();
    assert_relative_eq!(cold.cost.startup, 1200.0);
    assert_relative_eq!(warm.cost.startup, 200.0);
    assert!(compute_metrics(&ledger, &case, Some(&[true])).is_err());
}

#[test]
fn short_term_activity_and_commitment_counts() {
    let case = small_case();
    let steps = [
        step([true, true], [40.0, 10.0, 0.0], 50.0, 0.0),
        step([true, false], [50.0, 0.0, 0.0], 50.0, 0.0),
        step([true, false], [50.0, 0.0, 0.0], 50.0, 0.0),
        step([false, false], [0.0, 0.0, 0.0], 0.0, 0.0),
    ];
    let m = compute_metrics(&ledger_of(&case, &steps, 96), &case, None).unwrap();
    assert_relative_eq!(m.st_active_pct, 25.0);
    assert_relative_eq!(m.avg_committed_generators, 1.0);
}

#[test]
fn incomplete_ledger_is_rejected() {
    let case = small_case();
    let mut ledger = ledger_of(&case, &vec![step([true, false], [10.0, 0.0, 0.0], 10.0, 0.0); 3], 96);
    ledger.units.pop();
    assert!(compute_metrics(&ledger, &case, None).is_err());
}

#[test]
fn daily_variation_of_a_group() {
    let case = small_case();
    // day one: 10, 30 -> mean 20, sd 10; day two: constant
    let steps = [
        step([true, false], [10.0, 0.0, 0.0], 10.0, 0.0),
        step([true, false], [30.0, 0.0, 0.0], 30.0, 0.0),
        step([true, false], [20.0, 0.0, 0.0], 20.0, 0.0),
        step([true, false], [20.0, 0.0, 0.0], 20.0, 0.0),
    ];
    let cv = daily_variation(&ledger_of(&case, &steps, 2), &case, &[0]).unwrap();
    assert_eq!(cv.len(), 2);
    assert_relative_eq!(cv[0], 0.5);
    assert_relative_eq!(cv[1], 0.0);
    assert!(daily_variation(&ledger_of(&case, &steps, 2), &case, &[9]).is_err());
}

fn cell(setting: Setting, reserve: ReserveLevel, unmet: f64, cost: f64) -> CellSummary {
    CellSummary {
        key: CellKey { setting, reserve, sw: 1.0 },
        metrics: MetricsSummary { avg_unmet_mw: unmet, avg_daily_cost: cost, ..Default::default() },
    }
}

#[test]
fn zero_unmet_table_marks_the_smallest_sufficient_reserve() {
    use ReserveLevel::*;
    let mut cells = Vec::new();
    for (l, unmet) in [(VeryLow, 3.0), (Low, 2.0), (Medium, 0.5), (High, 0.0)] {
        cells.push(cell(Setting::Ddd, l, unmet, 100.0 + l as u8 as f64));
    }
    for (l, unmet) in [(High, 0.0), (VeryLow, 0.4), (Low, 0.0), (Medium, 0.0)] {
        cells.push(cell(Setting::Sds, l, unmet, 90.0 + l as u8 as f64));
    }
    cells.push(cell(Setting::Dds, VeryLow, 1.0, 95.0));
    let zero = min_reserve_for_zero_unmet(&cells);
    let find = |s| zero.iter().find(|z| z.setting == s).unwrap();
    assert_eq!(find(Setting::Ddd).reserve, Some(High));
    assert_eq!(find(Setting::Sds).reserve, Some(Low));
    assert_eq!(find(Setting::Sds).avg_daily_cost, Some(91.0));
    assert_eq!(find(Setting::Dds).reserve, None);

    let dir = tempfile::tempdir().unwrap();
    emit_report(&cells, dir.path()).unwrap();
    let zero = std::fs::read_to_string(dir.path().join("zero_unmet_reserve.csv")).unwrap();
    assert!(zero.lines().any(|l| l.starts_with("DDD,1,high,103")), "{zero}");
    assert!(zero.lines().any(|l| l.starts_with("SDS,1,low,91")), "{zero}");
    assert!(zero.lines().any(|l| l.starts_with("DDS,1,none,")), "{zero}");
    let grid = std::fs::read_to_string(dir.path().join("grid_avg_unmet_mw.csv")).unwrap();
    let lines: Vec<&str> = grid.lines().collect();
    assert_eq!(lines[0], "setting,sw,very_low,low,medium,high");
    assert_eq!(lines.len(), 4);
    assert!(lines.contains(&"DDS,1,1,,,"));
}

#[test]
fn single_cell_report() {
    let dir = tempfile::tempdir().unwrap();
    emit_report(&[cell(Setting::Ddd, ReserveLevel::Low, 0.0, 10.0)], dir.path()).unwrap();
    let grid = std::fs::read_to_string(dir.path().join("grid_avg_daily_cost.csv")).unwrap();
    assert_eq!(grid, "setting,sw,low\nDDD,1,10\n");
    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert_eq!(json["cells"].as_array().unwrap().len(), 1);
    let flat = std::fs::read_to_string(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(flat.lines().filter(|l| !l.starts_with('#')).count(), 2);
    assert!(emit_report(&[], dir.path()).is_err());
}

#[test]
fn mean_keeps_the_largest_peak() {
    let a = MetricsSummary { avg_unmet_mw: 1.0, max_unmet_mw: 4.0, st_active_pct: 10.0, ..Default::default() };
    let b = MetricsSummary { avg_unmet_mw: 3.0, max_unmet_mw: 2.0, st_active_pct: 20.0, ..Default::default() };
    let m = MetricsSummary::mean(&[a, b]).unwrap();
    assert_relative_eq!(m.avg_unmet_mw, 2.0);
    assert_relative_eq!(m.max_unmet_mw, 4.0);
    assert_relative_eq!(m.st_active_pct, 15.0);
    assert!(MetricsSummary::mean(&[]).is_err());
}

fn arb_step() -> impl Strategy<Value = Step> {
    (any::<[bool; 2]>(), 0.0..200.0f64, 0.0..50.0f64, 0.0..100.0f64, 0.0..20.0f64, 0.0..20.0f64, 0.0..30.0f64, 0.0..10.0f64)
        .prop_map(|(on, t, f, w, o1, o2, c, shed)| {
            let gen = [if on[0] { t } else { 0.0 }, if on[1] { f } else { 0.0 }, w];
            let over = [if on[0] { o1 } else { 0.0 }, if on[1] { o2 } else { 0.0 }];
            Step { on, gen, over, curtail: c, demand: gen.iter().sum::<f64>() + shed, shed }
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn cost_parts_add_up(steps in prop::collection::vec(arb_step(), 1..30)) {
        let case = small_case();
        let m = compute_metrics(&ledger_of(&case, &steps, 4), &case, None).unwrap();
        let h = 0.25;
        let (mut op, mut pen, mut prev) = (0.0, 0.0, [false; 2]);
        for s in &steps {
            for g in 0..2 {
                let u = &case.generators[g];
                op += u.cost_variable * (s.gen[g] + s.over[g]) * h;
                if s.on[g] {
                    op += u.cost_noload * h + if prev[g] { 0.0 } else { u.cost_startup };
                }
                pen += 25.0 * s.over[g] * h;
            }
            prev = s.on;
            pen += 25.0 * s.curtail * h + 5000.0 * s.shed * h;
        }
        let days = steps.len() as f64 / 4.0;
        prop_assert!((m.avg_daily_cost * days - op).abs() <= 1e-6 * op.max(1.0));
        prop_assert!((m.avg_daily_cost_with_penalties * days - op - pen).abs() <= 1e-6 * (op + pen).max(1.0));
        let k = &m.cost;
        let parts = k.startup + k.noload + k.variable + k.overgen_penalty + k.curtail_penalty + k.unmet_penalty;
        prop_assert!((parts - k.with_penalties()).abs() <= 1e-9 * parts.max(1.0));
        prop_assert!(m.max_balance_residual_mw <= 1e-9);
        for v in [m.avg_unmet_mw, m.max_unmet_mw, m.avg_overgen_mw, m.avg_curtail_mw, m.st_active_pct, m.co2_t, m.avg_committed_generators] {
            prop_assert!(v >= 0.0);
        }
        prop_assert!(m.max_unmet_mw + 1e-12 >= m.avg_unmet_mw);
    }
}
