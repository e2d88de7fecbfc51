//! Writes the synthetic six-bus case with volatile wind and solar to
//! `data/six_bus` (or the directory given as the first argument).
//!
//! The series span 22 days at 15-minute resolution: 14 days of history for
//! the scenario models, 7 days to simulate and one spare day of look-ahead.

use std::path::PathBuf;

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use shp_core::grid::{Bus, CaseManifest, Generator, GeneratorKind, Line, PenaltyConfig, ReserveLevel, ReserveSpec};
use shp_core::timeseries::{SeriesBundle, SeriesKind, TimeSeriesFrame};

const DAYS: usize = 22;
const PER_DAY: usize = 96;

fn bus(id: &str, load: bool) -> Bus {
    Bus { id: id.into(), theta_min: -0.6, theta_max: 0.6, demand_ref: load.then(|| format!("load_{id}")) }
}

fn line(from: &str, to: &str, flow_max: f64) -> Line {
    Line { from_bus: from.into(), to_bus: to.into(), susceptance: 500.0, flow_min: None, flow_max }
}

#[allow(clippy::too_many_arguments)]
fn thermal(id: &str, bus: &str, kind: GeneratorKind, g: (f64, f64), ramp: f64, min_ud: u32, cost: (f64, f64, f64), co2: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        kind,
        g_min: g.0,
        g_max: g.1,
        ramp_up: ramp,
        ramp_down: ramp,
        min_up: min_ud,
        min_down: min_ud,
        cost_startup: cost.0,
        cost_noload: cost.1,
        cost_variable: cost.2,
        heat_rate: if co2 > 0.0 { 9.0 + 6.0 * co2 } else { 0.0 },
        co2_rate: co2,
        nox_rate: (co2 * 1.2e3).round() / 1e6,
        so2_rate: (co2 * 0.8e3).round() / 1e6,
        supply_ref: None,
    }
}

fn renewable(id: &str, bus: &str, kind: GeneratorKind, g_max: f64) -> Generator {
    Generator {
        id: id.into(),
        bus: bus.into(),
        kind,
        g_min: 0.0,
        g_max,
        ramp_up: g_max,
        ramp_down: g_max,
        min_up: 0,
        min_down: 0,
        cost_startup: 0.0,
        cost_noload: 0.0,
        cost_variable: 0.0,
        heat_rate: 0.0,
        co2_rate: 0.0,
        nox_rate: 0.0,
        so2_rate: 0.0,
        supply_ref: Some(format!("supply_{id}")),
    }
}

/// AR(1) path with the given persistence and stationary standard deviation.
fn ar1(rng: &mut ChaCha8Rng, n: usize, phi: f64, sd: f64) -> Vec<f64> {
    let innov = Normal::new(0.0, sd * (1.0 - phi * phi).sqrt()).expect("valid sd");
    let mut x = Normal::new(0.0, sd).expect("valid sd").sample(rng);
    (0..n)
        .map(|_| {
            x = phi * x + innov.sample(rng);
            x
        })
        .collect()
}

fn frame(columns: Vec<String>, values: Vec<Vec<f64>>, kind: SeriesKind) -> TimeSeriesFrame {
    let start = NaiveDate::from_ymd_opt(2024, 6, 1).expect("date").and_hms_opt(0, 0, 0).expect("time");
    let values = values.into_iter().map(|r| r.into_iter().map(|v: f64| (v.max(0.0) * 1e3).round() / 1e3).collect()).collect();
    TimeSeriesFrame::new(start, 15, columns, values, kind).expect("valid frame")
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| PathBuf::from("data/six_bus"));
    std::fs::create_dir_all(dir.join("series"))?;
    let mut rng = ChaCha8Rng::seed_from_u64(20240601);
    let n = DAYS * PER_DAY;

    let buses = vec![bus("b1", false), bus("b2", true), bus("b3", true), bus("b4", true), bus("b5", true), bus("b6", true)];
    let lines = vec![
        line("b1", "b2", 220.0),
        line("b1", "b4", 200.0),
        line("b2", "b3", 150.0),
        line("b2", "b4", 150.0),
        line("b3", "b6", 120.0),
        line("b4", "b5", 150.0),
        line("b5", "b6", 110.0),
        line("b2", "b5", 120.0),
    ];
    use GeneratorKind::*;
    let generators = vec![
        thermal("coal1", "b1", ConventionalDa, (40.0, 200.0), 40.0, 16, (3000.0, 400.0, 18.0), 0.95),
        thermal("ccgt1", "b2", ConventionalDa, (30.0, 150.0), 35.0, 8, (1500.0, 250.0, 30.0), 0.40),
        thermal("hydro1", "b4", ConventionalDa, (10.0, 80.0), 40.0, 4, (200.0, 50.0, 8.0), 0.0),
        thermal("gt1", "b3", ConventionalSt, (10.0, 60.0), 30.0, 2, (300.0, 80.0, 75.0), 0.60),
        thermal("gt2", "b6", ConventionalSt, (10.0, 50.0), 25.0, 2, (250.0, 70.0, 85.0), 0.65),
        renewable("wind1", "b5", Wind, 200.0),
        renewable("solar1", "b6", Solar, 150.0),
    ];

    // demand: evening peak, bus shares fixed, forecast off by a few percent
    let shares = [0.25, 0.2, 0.2, 0.15, 0.2];
    let day_level: Vec<f64> = (0..DAYS).map(|_| Normal::new(1.0, 0.04).expect("sd").sample(&mut rng)).collect();
    let load_err = ar1(&mut rng, n, 0.95, 0.015);
    let mut demand_fc = Vec::with_capacity(n);
    let mut demand_ac = Vec::with_capacity(n);
    for t in 0..n {
        let h = (t % PER_DAY) as f64 / 4.0;
        let shape = 0.62 + 0.18 * (-((h - 12.0) / 4.0).powi(2)).exp() + 0.28 * (-((h - 19.0) / 2.5).powi(2)).exp();
        let total = 430.0 * shape * day_level[t / PER_DAY];
        demand_fc.push(shares.iter().map(|s| s * total).collect::<Vec<f64>>());
        demand_ac.push(shares.iter().map(|s| s * total * (1.0 + load_err[t])).collect::<Vec<f64>>());
    }

    // wind: slowly drifting forecast, actual with large persistent errors
    let wind_cap = 200.0;
    let drift = ar1(&mut rng, n, 0.995, 0.18);
    let wind_err = ar1(&mut rng, n, 0.97, 0.22);
    let mut wind_fc = Vec::with_capacity(n);
    let mut wind_ac = Vec::with_capacity(n);
    for t in 0..n {
        let h = (t % PER_DAY) as f64 / 4.0;
        let f = (0.4 + drift[t] + 0.1 * (std::f64::consts::TAU * (h - 3.0) / 24.0).cos()).clamp(0.02, 0.95);
        wind_fc.push(vec![f * wind_cap]);
        wind_ac.push(vec![((f + wind_err[t]).clamp(0.0, 1.0)) * wind_cap]);
    }

    // solar: clear-sky bell scaled by a daily cloud factor, multiplicative errors
    let solar_cap = 150.0;
    let clouds: Vec<f64> = (0..DAYS).map(|_| Normal::new(0.8f64, 0.15).expect("sd").sample(&mut rng).clamp(0.3, 1.0)).collect();
    let solar_err = ar1(&mut rng, n, 0.93, 0.3);
    let mut solar_fc = Vec::with_capacity(n);
    let mut solar_ac = Vec::with_capacity(n);
    for t in 0..n {
        let h = (t % PER_DAY) as f64 / 4.0 + 0.125;
        let clear = if (6.0..18.0).contains(&h) { (std::f64::consts::PI * (h - 6.0) / 12.0).sin() } else { 0.0 };
        let f = solar_cap * clear * clouds[t / PER_DAY];
        solar_fc.push(vec![f]);
        solar_ac.push(vec![(f * (1.0 + solar_err[t])).clamp(0.0, solar_cap)]);
    }

    let load_cols: Vec<String> = buses.iter().filter_map(|b| b.demand_ref.clone()).collect();
    let bundle = SeriesBundle {
        demand_forecast: frame(load_cols.clone(), demand_fc, SeriesKind::Forecast),
        demand_actual: frame(load_cols, demand_ac, SeriesKind::Actual),
        solar_forecast: frame(vec!["supply_solar1".into()], solar_fc, SeriesKind::Forecast),
        solar_actual: frame(vec!["supply_solar1".into()], solar_ac, SeriesKind::Actual),
        wind_forecast: frame(vec!["supply_wind1".into()], wind_fc, SeriesKind::Forecast),
        wind_actual: frame(vec!["supply_wind1".into()], wind_ac, SeriesKind::Actual),
    };
    bundle.save(&dir.join("series"))?;

    let mut w = csv::Writer::from_path(dir.join("buses.csv"))?;
    buses.iter().try_for_each(|b| w.serialize(b))?;
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("lines.csv"))?;
    lines.iter().try_for_each(|l| w.serialize(l))?;
    w.flush()?;
    let mut w = csv::Writer::from_path(dir.join("generators.csv"))?;
    generators.iter().try_for_each(|g| w.serialize(g))?;
    w.flush()?;

    let manifest = CaseManifest {
        name: "six_bus".into(),
        buses: "buses.csv".into(),
        lines: "lines.csv".into(),
        generators: "generators.csv".into(),
        penalties: Some(PenaltyConfig::default()),
        reserve: Some(ReserveSpec::Level(ReserveLevel::VeryLow)),
        timescales: None,
        sw_multiplier: Some(1.0),
        series: Some("series".into()),
    };
    std::fs::write(dir.join("case.json"), serde_json::to_string_pretty(&manifest)? + "\n")?;
    println!("wrote {}", dir.display());
    Ok(())
}
