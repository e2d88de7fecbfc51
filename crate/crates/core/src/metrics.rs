//! Reliability, cost and emission metrics of an applied dispatch ledger, and
//! the report tables built from many runs.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GeneratorKind, GridCase, ReserveLevel};
use crate::hierarchy::{DispatchLedger, Setting};

/// Unmet demand below this (MW, averaged over epochs) counts as zero.
pub const ZERO_UNMET_MW: f64 = 1e-6;

/// Operating cost totals over a run, in dollars.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub startup: f64,
    pub noload: f64,
    pub variable: f64,
    pub overgen_penalty: f64,
    pub curtail_penalty: f64,
    pub unmet_penalty: f64,
}

impl CostBreakdown {
    /// Startup, no-load and production cost of the applied dispatch.
    pub fn operating(&self) -> f64 {
        self.startup + self.noload + self.variable
    }

    pub fn with_penalties(&self) -> f64 {
        self.operating() + self.overgen_penalty + self.curtail_penalty + self.unmet_penalty
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsSummary {
    pub epochs: usize,
    pub days: f64,
    /// System-wide unmet demand, averaged over every epoch.
    pub avg_unmet_mw: f64,
    pub max_unmet_mw: f64,
    pub avg_overgen_mw: f64,
    pub avg_curtail_mw: f64,
    /// Operating cost per day without the penalty terms.
    pub avg_daily_cost: f64,
    pub avg_daily_cost_with_penalties: f64,
    pub cost: CostBreakdown,
    /// Share of epochs each short-term unit is online, averaged over those units (percent).
    pub st_active_pct: f64,
    /// Conventional units online, averaged over epochs.
    pub avg_committed_generators: f64,
    pub co2_t: f64,
    pub nox_t: f64,
    pub so2_t: f64,
    pub daily_co2_t: f64,
    pub daily_nox_t: f64,
    pub daily_so2_t: f64,
    /// Largest per-epoch gap between delivered supply plus unmet demand and
    /// demand plus reserve (MW).
    pub max_balance_residual_mw: f64,
}

/// Metrics of a complete ledger. `initial_on` gives the unit status before
/// the first epoch (all off when `None`); it decides whether epoch 0 starts a unit.
pub fn compute_metrics(ledger: &DispatchLedger, case: &GridCase, initial_on: Option<&[bool]>) -> Result<MetricsSummary> {
    ledger.check_complete(case)?;
    let (ng, nb) = (case.generators.len(), case.buses.len());
    let n = ledger.num_epochs();
    if n == 0 {
        return Ok(MetricsSummary::default());
    }
    if ledger.epochs_per_day == 0 || ledger.epoch_minutes <= 0.0 {
        return Err(invalid("ledger has no valid epoch length"));
    }
    if initial_on.is_some_and(|s| s.len() != ng) {
        return Err(invalid("initial status must list every generator"));
    }
    let h = ledger.hours_per_epoch();
    let pen = case.penalty_config;
    let mut m = MetricsSummary { epochs: n, days: n as f64 / ledger.epochs_per_day as f64, ..Default::default() };
    let mut prev_on: Vec<bool> = initial_on.map_or_else(|| vec![false; ng], <[bool]>::to_vec);
    let fast: Vec<usize> = case.generators_of(GeneratorKind::ConventionalSt).map(|(g, _)| g).collect();
    let mut fast_on = 0usize;
    let mut committed = 0usize;
    let (mut unmet_sum, mut over_sum, mut curt_sum) = (0.0, 0.0, 0.0);

    for e in 0..n {
        let units = ledger.units_at(e, ng);
        let buses = ledger.buses_at(e, nb);
        let unmet: f64 = buses.iter().map(|b| b.shed.max(0.0)).sum();
        unmet_sum += unmet;
        m.max_unmet_mw = m.max_unmet_mw.max(unmet);
        m.cost.unmet_penalty += pen.phi_unmet * unmet * h;

        for (g, gen) in case.generators.iter().enumerate() {
            let u = &units[g];
            if gen.kind.is_renewable() {
                let c = u.curtail.max(0.0);
                curt_sum += c;
                m.cost.curtail_penalty += pen.phi_curtail * c * h;
                continue;
            }
            let over = u.over_gen.max(0.0);
            let energy = (u.gen.max(0.0) + over) * h;
            over_sum += over;
            m.cost.overgen_penalty += pen.phi_over * over * h;
            m.cost.variable += gen.cost_variable * energy;
            m.co2_t += gen.co2_rate * energy;
            m.nox_t += gen.nox_rate * energy;
            m.so2_t += gen.so2_rate * energy;
            if u.on {
                committed += 1;
                m.cost.noload += gen.cost_noload * h;
                if !prev_on[g] {
                    m.cost.startup += gen.cost_startup;
                }
            }
            prev_on[g] = u.on;
        }
        fast_on += fast.iter().filter(|&&g| units[g].on).count();

        let supply: f64 = units.iter().map(|u| u.gen).sum::<f64>() + buses.iter().map(|b| b.shed).sum::<f64>();
        let need: f64 = buses.iter().map(|b| b.demand + b.reserve).sum();
        m.max_balance_residual_mw = m.max_balance_residual_mw.max((supply - need).abs());
    }

    let nf = n as f64;
    m.avg_unmet_mw = unmet_sum / nf;
    m.avg_overgen_mw = over_sum / nf;
    m.avg_curtail_mw = curt_sum / nf;
    m.avg_committed_generators = committed as f64 / nf;
    m.st_active_pct = if fast.is_empty() { 0.0 } else { 100.0 * fast_on as f64 / (nf * fast.len() as f64) };
    m.avg_daily_cost = m.cost.operating() / m.days;
    m.avg_daily_cost_with_penalties = m.cost.with_penalties() / m.days;
    m.daily_co2_t = m.co2_t / m.days;
    m.daily_nox_t = m.nox_t / m.days;
    m.daily_so2_t = m.so2_t / m.days;
    Ok(m)
}

impl MetricsSummary {
    /// Field-wise mean over replications, except `max_unmet_mw`, which keeps
    /// the largest value seen.
    pub fn mean(runs: &[MetricsSummary]) -> Result<MetricsSummary> {
        let Some(first) = runs.first() else {
            return Err(invalid("cannot average zero runs"));
        };
        let k = runs.len() as f64;
        let avg = |f: fn(&MetricsSummary) -> f64| runs.iter().map(f).sum::<f64>() / k;
        Ok(MetricsSummary {
            epochs: first.epochs,
            days: avg(|m| m.days),
            avg_unmet_mw: avg(|m| m.avg_unmet_mw),
            max_unmet_mw: runs.iter().map(|m| m.max_unmet_mw).fold(0.0, f64::max),
            avg_overgen_mw: avg(|m| m.avg_overgen_mw),
            avg_curtail_mw: avg(|m| m.avg_curtail_mw),
            avg_daily_cost: avg(|m| m.avg_daily_cost),
            avg_daily_cost_with_penalties: avg(|m| m.avg_daily_cost_with_penalties),
            cost: CostBreakdown {
                startup: avg(|m| m.cost.startup),
                noload: avg(|m| m.cost.noload),
                variable: avg(|m| m.cost.variable),
                overgen_penalty: avg(|m| m.cost.overgen_penalty),
                curtail_penalty: avg(|m| m.cost.curtail_penalty),
                unmet_penalty: avg(|m| m.cost.unmet_penalty),
            },
            st_active_pct: avg(|m| m.st_active_pct),
            avg_committed_generators: avg(|m| m.avg_committed_generators),
            co2_t: avg(|m| m.co2_t),
            nox_t: avg(|m| m.nox_t),
            so2_t: avg(|m| m.so2_t),
            daily_co2_t: avg(|m| m.daily_co2_t),
            daily_nox_t: avg(|m| m.daily_nox_t),
            daily_so2_t: avg(|m| m.daily_so2_t),
            max_balance_residual_mw: runs.iter().map(|m| m.max_balance_residual_mw).fold(0.0, f64::max),
        })
    }

    pub fn meets_all_demand(&self) -> bool {
        self.avg_unmet_mw <= ZERO_UNMET_MW
    }
}

/// Coefficient of variation (population standard deviation over mean) of the
/// combined output of `group`, one value per day of the ledger. Days where
/// the group produces nothing give 0.
pub fn daily_variation(ledger: &DispatchLedger, case: &GridCase, group: &[usize]) -> Result<Vec<f64>> {
    ledger.check_complete(case)?;
    let ng = case.generators.len();
    if let Some(&g) = group.iter().find(|&&g| g >= ng) {
        return Err(invalid(format!("generator index {g} out of range")));
    }
    let totals: Vec<f64> =
        (0..ledger.num_epochs()).map(|e| group.iter().map(|&g| ledger.units_at(e, ng)[g].production()).sum()).collect();
    Ok(totals
        .chunks(ledger.epochs_per_day.max(1))
        .map(|day| {
            let mean = day.iter().sum::<f64>() / day.len() as f64;
            if mean <= 0.0 {
                return 0.0;
            }
            let var = day.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / day.len() as f64;
            var.sqrt() / mean
        })
        .collect())
}

/// One cell of a factor sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub setting: Setting,
    pub reserve: ReserveLevel,
    pub sw: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    #[serde(flatten)]
    pub key: CellKey,
    pub metrics: MetricsSummary,
}

/// Smallest reserve level whose cell meets all demand, per setting and
/// multiplier; `None` when no swept level does.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZeroUnmetEntry {
    pub setting: Setting,
    pub sw: f64,
    pub reserve: Option<ReserveLevel>,
    pub avg_daily_cost: Option<f64>,
    pub daily_co2_t: Option<f64>,
}

pub fn min_reserve_for_zero_unmet(cells: &[CellSummary]) -> Vec<ZeroUnmetEntry> {
    let mut groups: BTreeMap<(Setting, u64), Vec<&CellSummary>> = BTreeMap::new();
    for c in cells {
        groups.entry((c.key.setting, c.key.sw.to_bits())).or_default().push(c);
    }
    groups
        .into_iter()
        .map(|((setting, sw), mut cs)| {
            cs.sort_by_key(|c| c.key.reserve);
            let hit = cs.into_iter().find(|c| c.metrics.meets_all_demand());
            ZeroUnmetEntry {
                setting,
                sw: f64::from_bits(sw),
                reserve: hit.map(|c| c.key.reserve),
                avg_daily_cost: hit.map(|c| c.metrics.avg_daily_cost),
                daily_co2_t: hit.map(|c| c.metrics.daily_co2_t),
            }
        })
        .collect()
}

type Field = (&'static str, fn(&MetricsSummary) -> f64);

const GRID_FIELDS: [Field; 10] = [
    ("avg_unmet_mw", |m| m.avg_unmet_mw),
    ("max_unmet_mw", |m| m.max_unmet_mw),
    ("avg_overgen_mw", |m| m.avg_overgen_mw),
    ("avg_curtail_mw", |m| m.avg_curtail_mw),
    ("avg_daily_cost", |m| m.avg_daily_cost),
    ("avg_daily_cost_with_penalties", |m| m.avg_daily_cost_with_penalties),
    ("st_active_pct", |m| m.st_active_pct),
    ("avg_committed_generators", |m| m.avg_committed_generators),
    ("daily_co2_t", |m| m.daily_co2_t),
    ("daily_nox_t", |m| m.daily_nox_t),
];

fn write_file(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io { path: path.display().to_string(), source })
}

/// Writes `metrics.csv` (one row per cell), `metrics.json`, one
/// `grid_<metric>.csv` per headline metric with settings as rows and reserve
/// levels as columns, and `zero_unmet_reserve.csv` with the smallest reserve level that
/// meets all demand. Averages are taken over all epochs.
pub fn emit_report(cells: &[CellSummary], dir: &Path) -> Result<()> {
    if cells.is_empty() {
        return Err(invalid("no runs to report"));
    }
    std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;

    let mut flat = String::from("# averages over all epochs, zero-unmet epochs included\nsetting,reserve,sw");
    for (name, _) in GRID_FIELDS {
        flat.push(',');
        flat.push_str(name);
    }
    flat.push_str(",daily_so2_t,startup_cost,noload_cost,variable_cost,overgen_penalty,curtail_penalty,unmet_penalty\n");
    for c in cells {
        let m = &c.metrics;
        flat.push_str(&format!("{},{},{}", c.key.setting, c.key.reserve, c.key.sw));
        for (_, f) in GRID_FIELDS {
            flat.push_str(&format!(",{}", f(m)));
        }
        let k = &m.cost;
        flat.push_str(&format!(
            ",{},{},{},{},{},{},{}\n",
            m.daily_so2_t, k.startup, k.noload, k.variable, k.overgen_penalty, k.curtail_penalty, k.unmet_penalty
        ));
    }
    write_file(&dir.join("metrics.csv"), &flat)?;

    let zero = min_reserve_for_zero_unmet(cells);
    let bundle = serde_json::json!({ "averaging": "all epochs", "cells": cells, "min_reserve_for_zero_unmet": zero });
    let json = serde_json::to_string_pretty(&bundle).map_err(|source| Error::Json { path: "metrics.json".into(), source })?;
    write_file(&dir.join("metrics.json"), &(json + "\n"))?;

    let mut rows: Vec<(Setting, u64)> = cells.iter().map(|c| (c.key.setting, c.key.sw.to_bits())).collect();
    rows.sort();
    rows.dedup();
    let mut levels: Vec<ReserveLevel> = cells.iter().map(|c| c.key.reserve).collect();
    levels.sort();
    levels.dedup();
    for (name, f) in GRID_FIELDS {
        let mut text = String::from("setting,sw");
        for l in &levels {
            text.push_str(&format!(",{l}"));
        }
        text.push('\n');
        for &(setting, sw) in &rows {
            text.push_str(&format!("{setting},{}", f64::from_bits(sw)));
            for l in &levels {
                let cell = cells.iter().find(|c| c.key.setting == setting && c.key.sw.to_bits() == sw && c.key.reserve == *l);
                text.push(',');
                if let Some(c) = cell {
                    text.push_str(&f(&c.metrics).to_string());
                }
            }
            text.push('\n');
        }
        write_file(&dir.join(format!("grid_{name}.csv")), &text)?;
    }

    let mut table = String::from("setting,sw,min_reserve,avg_daily_cost,daily_co2_t\n");
    for z in &zero {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        table.push_str(&format!(
            "{},{},{},{},{}\n",
            z.setting,
            z.sw,
            z.reserve.map_or("none", ReserveLevel::label),
            opt(z.avg_daily_cost),
            opt(z.daily_co2_t)
        ));
    }
    write_file(&dir.join("zero_unmet_reserve.csv"), &table)
}
