//! Fixed-resolution multi-site series and resampling between layer resolutions.

use std::path::Path;

use chrono::{DateTime, Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::grid::{GeneratorKind, GridCase};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SeriesKind {
    Forecast,
    Actual,
}

/// Values are stored row-major, one row per time step and one column per site.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    pub start: NaiveDateTime,
    pub resolution: u32,
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub kind: SeriesKind,
}

impl TimeSeriesFrame {
    pub fn new(
        start: NaiveDateTime,
        resolution: u32,
        columns: Vec<String>,
        values: Vec<Vec<f64>>,
        kind: SeriesKind,
    ) -> Result<Self> {
        if resolution == 0 {
            return Err(invalid("series resolution must be positive"));
        }
        for (t, row) in values.iter().enumerate() {
            if row.len() != columns.len() {
                return Err(invalid(format!("row {t} has {} values for {} columns", row.len(), columns.len())));
            }
            if let Some(v) = row.iter().find(|v| !(**v >= 0.0) || !v.is_finite()) {
                return Err(invalid(format!("row {t} holds a negative or non-finite value {v}")));
            }
        }
        Ok(Self { start, resolution, columns, values, kind })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn num_sites(&self) -> usize {
        self.columns.len()
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::minutes(self.resolution as i64 * t as i64)
    }

    pub fn scaled(&self, factor: f64) -> TimeSeriesFrame {
        let mut out = self.clone();
        for row in &mut out.values {
            for v in row.iter_mut() {
                *v *= factor;
            }
        }
        out
    }

    /// Rows `[start_epoch, start_epoch + n_periods)`.
    pub fn slice_horizon(&self, start_epoch: usize, n_periods: usize) -> Result<TimeSeriesFrame> {
        let end = start_epoch
            .checked_add(n_periods)
            .filter(|&e| e <= self.len())
            .ok_or_else(|| invalid(format!("window [{start_epoch}, +{n_periods}) outside {} rows", self.len())))?;
        Ok(TimeSeriesFrame {
            start: self.timestamp(start_epoch),
            resolution: self.resolution,
            columns: self.columns.clone(),
            values: self.values[start_epoch..end].to_vec(),
            kind: self.kind,
        })
    }

    /// Coarsening averages each bin; refining runs a monotone cubic through the
    /// coarse samples, holding the last value past the final knot.
    pub fn resample(&self, target: u32) -> Result<TimeSeriesFrame> {
        if target == 0 {
            return Err(invalid("target resolution must be positive"));
        }
        let values = if target == self.resolution {
            self.values.clone()
        } else if target % self.resolution == 0 {
            let m = (target / self.resolution) as usize;
            if self.len() % m != 0 {
                return Err(invalid(format!("{} rows do not fill whole {target}-minute bins", self.len())));
            }
            self.values
                .chunks(m)
                .map(|bin| {
                    (0..self.num_sites()).map(|j| bin.iter().map(|r| r[j]).sum::<f64>() / m as f64).collect()
                })
                .collect()
        } else if self.resolution % target == 0 {
            let m = (self.resolution / target) as usize;
            let n_out = self.len() * m;
            let mut out = vec![vec![0.0; self.num_sites()]; n_out];
            for j in 0..self.num_sites() {
                let knots = self.column(j);
                let fine = monotone_cubic(&knots, m);
                for (t, v) in fine.into_iter().enumerate() {
                    out[t][j] = v.max(0.0);
                }
            }
            out
        } else {
            return Err(invalid(format!("resolutions {} and {target} are not commensurate", self.resolution)));
        };
        Ok(TimeSeriesFrame {
            start: self.start,
            resolution: target,
            columns: self.columns.clone(),
            values,
            kind: self.kind,
        })
    }

    pub fn read_csv(path: &Path, kind: SeriesKind) -> Result<TimeSeriesFrame> {
        let pstr = path.display().to_string();
        let csv_err = |source| Error::Csv { path: pstr.clone(), source };
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
        let headers = rdr.headers().map_err(csv_err)?.clone();
        let columns: Vec<String> = headers.iter().skip(1).map(str::to_string).collect();
        let mut stamps = Vec::new();
        let mut values = Vec::new();
        for (line, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(csv_err)?;
            let at = |msg: String| invalid(format!("{pstr} row {}: {msg}", line + 1));
            stamps.push(parse_timestamp(rec.get(0).unwrap_or("")).map_err(|e| at(e.to_string()))?);
            let row = rec
                .iter()
                .skip(1)
                .map(|s| s.parse::<f64>().map_err(|_| at(format!("missing or malformed value '{s}'"))))
                .collect::<Result<Vec<f64>>>()?;
            values.push(row);
        }
        let resolution = match stamps.as_slice() {
            [a, b, ..] => (*b - *a).num_minutes(),
            _ => return Err(invalid(format!("{pstr}: need at least two rows to infer the resolution"))),
        };
        if resolution <= 0 {
            return Err(invalid(format!("{pstr}: timestamps must increase")));
        }
        for w in stamps.windows(2) {
            if (w[1] - w[0]).num_minutes() != resolution {
                return Err(invalid(format!("{pstr}: non-uniform timestep at {}", w[1])));
            }
        }
        TimeSeriesFrame::new(stamps[0], resolution as u32, columns, values, kind)
            .map_err(|e| invalid(format!("{pstr}: {e}")))
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
        let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
        let mut header = vec!["timestamp".to_string()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).map_err(csv_err)?;
        for (t, row) in self.values.iter().enumerate() {
            let mut rec = vec![self.timestamp(t).format("%Y-%m-%dT%H:%M:%S").to_string()];
            rec.extend(row.iter().map(|v| format!("{v:.6}")));
            w.write_record(&rec).map_err(csv_err)?;
        }
        w.flush().map_err(|source| Error::Io { path: path.display().to_string(), source })
    }
}

fn parse_timestamp(s: &str) -> std::result::Result<NaiveDateTime, String> {
    for fmt in ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M", "%Y-%m-%d %H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    DateTime::parse_from_rfc3339(s).map(|t| t.naive_utc()).map_err(|_| format!("bad timestamp '{s}'"))
}

/// Fritsch–Carlson monotone cubic Hermite interpolant through `knots` spaced
/// `m` fine steps apart, evaluated on every fine step. Output has
/// `knots.len() * m` samples; samples after the last knot repeat it.
pub fn monotone_cubic(knots: &[f64], m: usize) -> Vec<f64> {
    let n = knots.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![knots[0]; m];
    }
    let delta: Vec<f64> = knots.windows(2).map(|w| w[1] - w[0]).collect();
    let mut slope = vec![0.0; n];
    slope[0] = delta[0];
    slope[n - 1] = delta[n - 2];
    for k in 1..n - 1 {
        slope[k] = if delta[k - 1] * delta[k] > 0.0 { 0.5 * (delta[k - 1] + delta[k]) } else { 0.0 };
    }
    for k in 0..n - 1 {
        if delta[k] == 0.0 {
            slope[k] = 0.0;
            slope[k + 1] = 0.0;
            continue;
        }
        let a = slope[k] / delta[k];
        let b = slope[k + 1] / delta[k];
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            slope[k] = tau * a * delta[k];
            slope[k + 1] = tau * b * delta[k];
        }
    }
    let mut out = Vec::with_capacity(n * m);
    for k in 0..n - 1 {
        for i in 0..m {
            let u = i as f64 / m as f64;
            let (u2, u3) = (u * u, u * u * u);
            let h00 = 2.0 * u3 - 3.0 * u2 + 1.0;
            let h10 = u3 - 2.0 * u2 + u;
            let h01 = -2.0 * u3 + 3.0 * u2;
            let h11 = u3 - u2;
            out.push(h00 * knots[k] + h10 * slope[k] + h01 * knots[k + 1] + h11 * slope[k + 1]);
        }
    }
    out.extend(std::iter::repeat(knots[n - 1]).take(m));
    out
}

/// Demand, solar and wind series, forecast and actual, sharing one time grid.
#[derive(Debug, Clone)]
pub struct SeriesBundle {
    pub demand_forecast: TimeSeriesFrame,
    pub demand_actual: TimeSeriesFrame,
    pub solar_forecast: TimeSeriesFrame,
    pub solar_actual: TimeSeriesFrame,
    pub wind_forecast: TimeSeriesFrame,
    pub wind_actual: TimeSeriesFrame,
}

impl SeriesBundle {
    /// Reads the six `{signal}_{kind}.csv` files from `dir`. Solar or wind
    /// files may be absent for fleets without that technology.
    pub fn load(dir: &Path) -> Result<SeriesBundle> {
        let demand_forecast = TimeSeriesFrame::read_csv(&dir.join("demand_forecast.csv"), SeriesKind::Forecast)?;
        let demand_actual = TimeSeriesFrame::read_csv(&dir.join("demand_actual.csv"), SeriesKind::Actual)?;
        let optional = |name: &str, kind| {
            let p = dir.join(name);
            if p.exists() {
                TimeSeriesFrame::read_csv(&p, kind)
            } else {
                Ok(empty_like(&demand_forecast, kind))
            }
        };
        let bundle = SeriesBundle {
            solar_forecast: optional("solar_forecast.csv", SeriesKind::Forecast)?,
            solar_actual: optional("solar_actual.csv", SeriesKind::Actual)?,
            wind_forecast: optional("wind_forecast.csv", SeriesKind::Forecast)?,
            wind_actual: optional("wind_actual.csv", SeriesKind::Actual)?,
            demand_forecast,
            demand_actual,
        };
        bundle.check_aligned()?;
        Ok(bundle)
    }

    pub fn save(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|source| Error::Io { path: dir.display().to_string(), source })?;
        for (name, f) in self.frames() {
            f.write_csv(&dir.join(format!("{name}.csv")))?;
        }
        Ok(())
    }

    pub fn frames(&self) -> [(&'static str, &TimeSeriesFrame); 6] {
        [
            ("demand_forecast", &self.demand_forecast),
            ("demand_actual", &self.demand_actual),
            ("solar_forecast", &self.solar_forecast),
            ("solar_actual", &self.solar_actual),
            ("wind_forecast", &self.wind_forecast),
            ("wind_actual", &self.wind_actual),
        ]
    }

    pub fn len(&self) -> usize {
        self.demand_actual.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn resolution(&self) -> u32 {
        self.demand_actual.resolution
    }

    fn check_aligned(&self) -> Result<()> {
        let base = &self.demand_actual;
        for (name, f) in self.frames() {
            if f.resolution != base.resolution || f.start != base.start || f.len() != base.len() {
                return Err(invalid(format!("series {name} is not aligned with demand_actual")));
            }
        }
        Ok(())
    }

    /// Multiplies solar and wind series by `factor`; demand is untouched.
    pub fn with_renewable_multiplier(&self, factor: f64) -> SeriesBundle {
        SeriesBundle {
            demand_forecast: self.demand_forecast.clone(),
            demand_actual: self.demand_actual.clone(),
            solar_forecast: self.solar_forecast.scaled(factor),
            solar_actual: self.solar_actual.scaled(factor),
            wind_forecast: self.wind_forecast.scaled(factor),
            wind_actual: self.wind_actual.scaled(factor),
        }
    }

    /// Checks that every demand_ref and supply_ref resolves and every column
    /// is claimed by some bus or generator.
    pub fn check_case(&self, case: &GridCase) -> Result<()> {
        self.check_aligned()?;
        let mut problems = Vec::new();
        for b in &case.buses {
            if let Some(r) = &b.demand_ref {
                if self.demand_forecast.column_index(r).is_none() || self.demand_actual.column_index(r).is_none() {
                    problems.push(format!("bus {} demand_ref '{r}' has no series", b.id));
                }
            }
        }
        for g in &case.generators {
            let (fc, ac) = match g.kind {
                GeneratorKind::Solar => (&self.solar_forecast, &self.solar_actual),
                GeneratorKind::Wind => (&self.wind_forecast, &self.wind_actual),
                _ => continue,
            };
            match &g.supply_ref {
                Some(r) if fc.column_index(r).is_some() && ac.column_index(r).is_some() => {}
                Some(r) => problems.push(format!("generator {} supply_ref '{r}' has no series", g.id)),
                None => problems.push(format!("generator {} has no supply_ref", g.id)),
            }
        }
        let claimed = |name: &str, renewable: Option<GeneratorKind>| match renewable {
            None => case.buses.iter().any(|b| b.demand_ref.as_deref() == Some(name)),
            Some(k) => case.generators.iter().any(|g| g.kind == k && g.supply_ref.as_deref() == Some(name)),
        };
        for (name, f, k) in [
            ("demand_forecast", &self.demand_forecast, None),
            ("solar_forecast", &self.solar_forecast, Some(GeneratorKind::Solar)),
            ("wind_forecast", &self.wind_forecast, Some(GeneratorKind::Wind)),
        ] {
            for c in &f.columns {
                if !claimed(c, k) {
                    problems.push(format!("{name} column '{c}' is not referenced by the case"));
                }
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(invalid(problems.join("; ")))
        }
    }
}

fn empty_like(f: &TimeSeriesFrame, kind: SeriesKind) -> TimeSeriesFrame {
    TimeSeriesFrame {
        start: f.start,
        resolution: f.resolution,
        columns: Vec::new(),
        values: vec![Vec::new(); f.len()],
        kind,
    }
}
