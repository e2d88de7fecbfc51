//! Applied dispatch records and the rolling state they drive.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::GridCase;

/// One generator in one applied epoch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UnitRecord {
    pub epoch: usize,
    pub generator: usize,
    pub on: bool,
    /// Output delivered to the network (MW).
    pub gen: f64,
    /// Output of a conventional unit beyond what the network absorbs.
    pub over_gen: f64,
    /// Renewable output spilled.
    pub curtail: f64,
    /// Actual renewable availability; zero for conventional units.
    pub available: f64,
}

impl UnitRecord {
    /// Total output of the unit, spilled part included.
    pub fn production(&self) -> f64 {
        self.gen + self.over_gen + self.curtail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BusRecord {
    pub epoch: usize,
    pub bus: usize,
    pub demand: f64,
    pub reserve: f64,
    pub shed: f64,
    pub theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineRecord {
    pub epoch: usize,
    pub line: usize,
    pub flow: f64,
}

/// Everything applied during a run, epoch by epoch.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DispatchLedger {
    pub epoch_minutes: f64,
    pub epochs_per_day: usize,
    pub units: Vec<UnitRecord>,
    pub buses: Vec<BusRecord>,
    pub lines: Vec<LineRecord>,
}

/// Decisions applied in a single epoch, indexed like the case.
#[derive(Debug, Clone, PartialEq)]
pub struct EpochDecision {
    pub epoch: usize,
    pub on: Vec<bool>,
    pub gen: Vec<f64>,
    pub over_gen: Vec<f64>,
    pub curtail: Vec<f64>,
    pub available: Vec<f64>,
    pub demand: Vec<f64>,
    pub reserve: Vec<f64>,
    pub shed: Vec<f64>,
    pub theta: Vec<f64>,
    pub flow: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct UnitRow {
    epoch: usize,
    generator: String,
    on: u8,
    gen: f64,
    over_gen: f64,
    curtail: f64,
    available: f64,
}

#[derive(Serialize, Deserialize)]
struct BusRow {
    epoch: usize,
    bus: String,
    demand: f64,
    reserve: f64,
    shed: f64,
    theta: f64,
}

#[derive(Serialize, Deserialize)]
struct LineRow {
    epoch: usize,
    line: String,
    flow: f64,
}

pub const UNIT_FILE: &str = "ledger_units.csv";
pub const BUS_FILE: &str = "ledger_buses.csv";
pub const LINE_FILE: &str = "ledger_lines.csv";

pub fn line_label(case: &GridCase, l: usize) -> String {
    let line = &case.lines[l];
    format!("{}-{}#{l}", line.from_bus, line.to_bus)
}

fn write_rows<T: Serialize>(path: &Path, rows: impl Iterator<Item = T>) -> Result<()> {
    let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().collect::<std::result::Result<_, _>>().map_err(csv_err)
}

impl DispatchLedger {
    pub fn num_epochs(&self) -> usize {
        self.buses.iter().map(|b| b.epoch + 1).max().unwrap_or(0)
    }

    pub fn hours_per_epoch(&self) -> f64 {
        self.epoch_minutes / 60.0
    }

    /// Unit records of one epoch, in generator order.
    pub fn units_at(&self, epoch: usize, n_gens: usize) -> &[UnitRecord] {
        &self.units[epoch * n_gens..(epoch + 1) * n_gens]
    }

    pub fn buses_at(&self, epoch: usize, n_buses: usize) -> &[BusRecord] {
        &self.buses[epoch * n_buses..(epoch + 1) * n_buses]
    }

    pub fn lines_at(&self, epoch: usize, n_lines: usize) -> &[LineRecord] {
        &self.lines[epoch * n_lines..(epoch + 1) * n_lines]
    }

    /// Writes the three ledger tables into `dir`.
    pub fn write(&self, case: &GridCase, dir: &Path) -> Result<()> {
        write_rows(
            &dir.join(UNIT_FILE),
            self.units.iter().map(|r| UnitRow {
                epoch: r.epoch,
                generator: case.generators[r.generator].id.clone(),
                on: r.on as u8,
                gen: r.gen,
                over_gen: r.over_gen,
                curtail: r.curtail,
                available: r.available,
            }),
        )?;
        write_rows(
            &dir.join(BUS_FILE),
            self.buses.iter().map(|r| BusRow {
                epoch: r.epoch,
                bus: case.buses[r.bus].id.clone(),
                demand: r.demand,
                reserve: r.reserve,
                shed: r.shed,
                theta: r.theta,
            }),
        )?;
        write_rows(
            &dir.join(LINE_FILE),
            self.lines.iter().map(|r| LineRow { epoch: r.epoch, line: line_label(case, r.line), flow: r.flow }),
        )
    }

    /// Reads a ledger written by [`DispatchLedger::write`] for the same case.
    pub fn read(case: &GridCase, dir: &Path, epoch_minutes: f64, epochs_per_day: usize) -> Result<DispatchLedger> {
        let gens: HashMap<&str, usize> = case.generators.iter().enumerate().map(|(i, g)| (g.id.as_str(), i)).collect();
        let buses = case.bus_index();
        let lines: HashMap<String, usize> = (0..case.lines.len()).map(|l| (line_label(case, l), l)).collect();
        let lookup = |map: &HashMap<&str, usize>, id: &str, what: &str| {
            map.get(id).copied().ok_or_else(|| invalid(format!("ledger names unknown {what} '{id}'")))
        };
        let units = read_rows::<UnitRow>(&dir.join(UNIT_FILE))?
            .into_iter()
            .map(|r| {
                Ok(UnitRecord {
                    epoch: r.epoch,
                    generator: lookup(&gens, &r.generator, "generator")?,
                    on: r.on != 0,
                    gen: r.gen,
                    over_gen: r.over_gen,
                    curtail: r.curtail,
                    available: r.available,
                })
            })
            .collect::<Result<_>>()?;
        let bus_rows = read_rows::<BusRow>(&dir.join(BUS_FILE))?
            .into_iter()
            .map(|r| {
                Ok(BusRecord {
                    epoch: r.epoch,
                    bus: lookup(&buses, &r.bus, "bus")?,
                    demand: r.demand,
                    reserve: r.reserve,
                    shed: r.shed,
                    theta: r.theta,
                })
            })
            .collect::<Result<_>>()?;
        let line_rows = read_rows::<LineRow>(&dir.join(LINE_FILE))?
            .into_iter()
            .map(|r| {
                let line = lines.get(&r.line).copied().ok_or_else(|| invalid(format!("ledger names unknown line '{}'", r.line)))?;
                Ok(LineRecord { epoch: r.epoch, line, flow: r.flow })
            })
            .collect::<Result<_>>()?;
        let ledger = DispatchLedger { epoch_minutes, epochs_per_day, units, buses: bus_rows, lines: line_rows };
        ledger.check_complete(case)?;
        Ok(ledger)
    }

    /// Every epoch holds exactly one record per generator, bus and line, in order.
    pub fn check_complete(&self, case: &GridCase) -> Result<()> {
        let n = self.num_epochs();
        let (ng, nb, nl) = (case.generators.len(), case.buses.len(), case.lines.len());
        if self.units.len() != n * ng || self.buses.len() != n * nb || self.lines.len() != n * nl {
            return Err(invalid(format!("ledger does not hold complete records for {n} epochs")));
        }
        let units_ok = self.units.iter().enumerate().all(|(i, r)| r.epoch == i / ng.max(1) && r.generator == i % ng.max(1));
        let buses_ok = self.buses.iter().enumerate().all(|(i, r)| r.epoch == i / nb.max(1) && r.bus == i % nb.max(1));
        let lines_ok = self.lines.iter().enumerate().all(|(i, r)| r.epoch == i / nl.max(1) && r.line == i % nl.max(1));
        if units_ok && buses_ok && lines_ok {
            Ok(())
        } else {
            Err(invalid("ledger records are out of order or missing"))
        }
    }
}

/// Per-generator status carried from one epoch to the next, together with
/// everything applied so far.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct HierarchyState {
    /// Next epoch to be applied.
    pub epoch: usize,
    pub on: Vec<bool>,
    /// Epochs spent in the current status.
    pub time_in_state: Vec<usize>,
    /// Total output applied in the last epoch.
    pub output: Vec<f64>,
    #[serde(skip)]
    pub ledger: DispatchLedger,
}

impl HierarchyState {
    /// Every unit off and free to start, with zero output.
    pub fn cold_start(case: &GridCase, epoch_minutes: f64, epochs_per_day: usize) -> Self {
        HierarchyState {
            epoch: 0,
            on: vec![false; case.generators.len()],
            time_in_state: case.generators.iter().map(|g| g.min_down as usize).collect(),
            output: vec![0.0; case.generators.len()],
            ledger: DispatchLedger { epoch_minutes, epochs_per_day, ..DispatchLedger::default() },
        }
    }

    pub fn day(&self) -> usize {
        self.epoch / self.ledger.epochs_per_day
    }

    /// Records one epoch of decisions and moves the clock forward.
    pub fn advance(&mut self, d: &EpochDecision) -> Result<()> {
        if d.epoch != self.epoch {
            return Err(invalid(format!("decision for epoch {} applied at epoch {}", d.epoch, self.epoch)));
        }
        for g in 0..self.on.len() {
            self.ledger.units.push(UnitRecord {
                epoch: d.epoch,
                generator: g,
                on: d.on[g],
                gen: d.gen[g],
                over_gen: d.over_gen[g],
                curtail: d.curtail[g],
                available: d.available[g],
            });
            if d.on[g] == self.on[g] {
                self.time_in_state[g] += 1;
            } else {
                self.on[g] = d.on[g];
                self.time_in_state[g] = 1;
            }
            self.output[g] = d.gen[g] + d.over_gen[g] + d.curtail[g];
        }
        for b in 0..d.demand.len() {
            self.ledger.buses.push(BusRecord {
                epoch: d.epoch,
                bus: b,
                demand: d.demand[b],
                reserve: d.reserve[b],
                shed: d.shed[b],
                theta: d.theta[b],
            });
        }
        for (l, &flow) in d.flow.iter().enumerate() {
            self.ledger.lines.push(LineRecord { epoch: d.epoch, line: l, flow });
        }
        self.epoch += 1;
        Ok(())
    }
}
