//! Series windows, scenario paths and plan bookkeeping for the simulator.

use crate::error::{invalid, Result};
use crate::grid::{Generator, GeneratorKind, GridCase};
use crate::scenario::{fit_var, simulate_paths, update_forecast, UpdateSchedule, VarModel};
use crate::timeseries::{SeriesBundle, TimeSeriesFrame};

/// Where each bus and renewable of the case reads its series.
pub(crate) struct SeriesMap {
    /// Demand column per bus; buses without a reference carry no load.
    demand: Vec<Option<usize>>,
    /// (is solar, column) per renewable, in `GridCase::renewables` order.
    renewable: Vec<(bool, usize)>,
    /// Capacity per renewable.
    cap: Vec<f64>,
}

impl SeriesMap {
    pub(crate) fn new(case: &GridCase, series: &SeriesBundle) -> Result<Self> {
        series.check_case(case)?;
        let demand = case
            .buses
            .iter()
            .map(|b| b.demand_ref.as_ref().and_then(|r| series.demand_actual.column_index(r)))
            .collect();
        let mut renewable = Vec::new();
        let mut cap = Vec::new();
        for (_, g) in case.renewables() {
            let solar = g.kind == GeneratorKind::Solar;
            let frame = if solar { &series.solar_actual } else { &series.wind_actual };
            let col = g.supply_ref.as_ref().and_then(|r| frame.column_index(r)).ok_or_else(|| invalid(format!("generator {} has no series", g.id)))?;
            renewable.push((solar, col));
            cap.push(g.g_max);
        }
        Ok(Self { demand, renewable, cap })
    }

    pub(crate) fn demand_row(&self, frame: &TimeSeriesFrame, t: usize) -> Vec<f64> {
        self.demand.iter().map(|c| c.map_or(0.0, |j| frame.values[t][j])).collect()
    }

    /// Availability per renewable from the solar and wind rows at `t`.
    fn pick(&self, solar: &[f64], wind: &[f64]) -> Vec<f64> {
        self.renewable
            .iter()
            .zip(&self.cap)
            .map(|(&(is_solar, j), &cap)| (if is_solar { solar[j] } else { wind[j] }).clamp(0.0, cap))
            .collect()
    }

    pub(crate) fn actual(&self, s: &SeriesBundle, t: usize) -> Vec<f64> {
        self.pick(&s.solar_actual.values[t], &s.wind_actual.values[t])
    }

    pub(crate) fn forecast(&self, s: &SeriesBundle, t: usize) -> Vec<f64> {
        self.pick(&s.solar_forecast.values[t], &s.wind_forecast.values[t])
    }

    /// Intraday-updated renewable forecast for `t+1 ..= t+lookahead`, anchored
    /// on the actual output at `t`.
    pub(crate) fn updated(&self, s: &SeriesBundle, t: usize, lookahead: usize, schedule: &UpdateSchedule) -> Result<Vec<Vec<f64>>> {
        let tech = |fc: &TimeSeriesFrame, ac: &TimeSeriesFrame| -> Result<Vec<Vec<f64>>> {
            if fc.num_sites() == 0 {
                return Ok(vec![Vec::new(); lookahead]);
            }
            let window = fc.slice_horizon(t, lookahead + 1)?;
            Ok(update_forecast(&window, &ac.values[t], schedule, lookahead)?.values)
        };
        let solar = tech(&s.solar_forecast, &s.solar_actual)?;
        let wind = tech(&s.wind_forecast, &s.wind_actual)?;
        Ok(solar.iter().zip(&wind).map(|(a, b)| self.pick(a, b)).collect())
    }

    /// Sampled availability paths around `base` (periods × renewables), one
    /// VAR model per technology. Values stay zero where the base is zero and
    /// never exceed capacity.
    pub(crate) fn sample_paths(&self, models: &TechModels, base: &[Vec<f64>], resolution: u32, n: usize, seed: u64) -> Result<Vec<Vec<Vec<f64>>>> {
        let mut paths = vec![base.to_vec(); n];
        for (tech, model) in [(true, &models.solar), (false, &models.wind)] {
            let Some(model) = model else { continue };
            let slots: Vec<usize> = (0..self.renewable.len()).filter(|&k| self.renewable[k].0 == tech).collect();
            let mut values = vec![vec![0.0; model.num_sites()]; base.len()];
            for &k in &slots {
                let j = self.renewable[k].1;
                for (t, row) in base.iter().enumerate() {
                    values[t][j] = row[k];
                }
            }
            let frame = TimeSeriesFrame {
                start: Default::default(),
                resolution,
                columns: model.sites.clone(),
                values,
                kind: crate::timeseries::SeriesKind::Forecast,
            };
            let set = simulate_paths(model, &frame, n, seed ^ u64::from(tech))?;
            for (path, sampled) in paths.iter_mut().zip(&set.paths) {
                for (t, row) in path.iter_mut().enumerate() {
                    for &k in &slots {
                        row[k] = if base[t][k] > 0.0 { sampled[t][self.renewable[k].1].min(self.cap[k]) } else { 0.0 };
                    }
                }
            }
        }
        Ok(paths)
    }
}

/// VAR models of solar and wind output at one resolution; absent when the
/// case has no generator of that technology.
#[derive(Debug, Clone, Default)]
pub(crate) struct TechModels {
    pub solar: Option<VarModel>,
    pub wind: Option<VarModel>,
}

impl TechModels {
    /// Fits both technologies on actual output in rows `[from, to)`, after
    /// averaging to `resolution` minutes.
    pub(crate) fn fit(s: &SeriesBundle, from: usize, to: usize, resolution: u32, max_lag: usize) -> Result<Self> {
        let fit = |f: &TimeSeriesFrame| -> Result<Option<VarModel>> {
            if f.num_sites() == 0 {
                return Ok(None);
            }
            let step = (resolution / f.resolution).max(1) as usize;
            let from = from.div_ceil(step) * step;
            let len = (to - from) / step * step;
            let window = f.slice_horizon(from, len)?.resample(resolution)?;
            fit_var(&window, max_lag).map(Some)
        };
        Ok(Self { solar: fit(&s.solar_actual)?, wind: fit(&s.wind_actual)? })
    }
}

/// Averages consecutive groups of `m` rows.
pub(crate) fn coarsen(rows: &[Vec<f64>], m: usize) -> Vec<Vec<f64>> {
    rows.chunks(m)
        .map(|bin| (0..bin[0].len()).map(|j| bin.iter().map(|r| r[j]).sum::<f64>() / bin.len() as f64).collect())
        .collect()
}

/// Day-ahead plan of one day, refined to epochs.
#[derive(Debug, Clone)]
pub(crate) struct DaPlan {
    /// Commitment per generator and epoch.
    pub commit: Vec<Vec<bool>>,
    /// Ramp-consistent generation target per generator and epoch.
    pub target: Vec<Vec<f64>>,
    /// Hourly commitment and output, kept as the boundary of the next day.
    pub hourly_commit: Vec<Vec<bool>>,
    pub hourly_output: Vec<Vec<f64>>,
}

/// Repeats each hourly value `m` times and pulls the result into the unit's
/// operating band and ramp limits with a forward and a backward sweep.
pub(crate) fn refine_target(g: &Generator, commit: &[bool], hourly: &[f64], m: usize, start: f64) -> Vec<f64> {
    let band = |t: usize| if commit[t] { (g.g_min, g.g_max) } else { (0.0, 0.0) };
    let mut y: Vec<f64> = (0..commit.len()).map(|t| hourly[t / m].clamp(band(t).0, band(t).1)).collect();
    let mut prev = start;
    for (t, v) in y.iter_mut().enumerate() {
        let (lo, hi) = band(t);
        // the band wins over the ramp when the two disagree
        *v = v.max(prev - g.ramp_down).min(prev + g.ramp_up).clamp(lo, hi);
        prev = *v;
    }
    for t in (0..y.len().saturating_sub(1)).rev() {
        let (lo, hi) = band(t);
        let next = y[t + 1];
        y[t] = y[t].max(next - g.ramp_up).min(next + g.ramp_down).clamp(lo, hi);
    }
    y
}

/// Backward-propagated output ranges over a known commitment schedule
/// (`schedule[t]` for `t` from the first model period on). Within the model
/// horizon the ranges also respect the deviation band around `target`.
/// Returns `None` when the bands cannot be chained.
pub(crate) fn envelope(g: &Generator, schedule: &[bool], target: Option<&[f64]>, horizon: usize) -> Option<Vec<(f64, f64)>> {
    let (ru, rd) = (g.ramp_up, g.ramp_down);
    let band = |t: usize| {
        let (mut lo, mut hi) = if schedule[t] { (g.g_min, g.g_max) } else { (0.0, 0.0) };
        if let Some(y) = target.filter(|_| t < horizon) {
            lo = lo.max((y[t] - rd).max(0.0));
            hi = hi.min(y[t] + ru);
        }
        (lo, hi)
    };
    let n = schedule.len();
    let mut out = vec![(0.0, 0.0); n];
    out[n - 1] = band(n - 1);
    for t in (0..n - 1).rev() {
        let (lo, hi) = band(t);
        out[t] = (lo.max(out[t + 1].0 - ru), hi.min(out[t + 1].1 + rd));
    }
    if out.iter().any(|(lo, hi)| lo > &(hi + 1e-9)) {
        return None;
    }
    out.truncate(horizon);
    Some(out)
}

/// Deterministic 64-bit seed for a named stream of a run.
pub(crate) fn derive_seed(seed: u64, stream: u64, index: u64) -> u64 {
    let mut z = seed ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ index.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
