//! Vector autoregressive scenario generation and intraday forecast updates.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::timeseries::TimeSeriesFrame;

const RIDGE: f64 = 1e-6;

/// VAR(m) on per-site normalized, mean-centred series:
/// `e_t = Φ_1 e_{t-1} + ... + Φ_m e_{t-m} + ε_t`, `ε_t ~ N(0, Σ)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct VarModel {
    pub sites: Vec<String>,
    pub resolution: u32,
    pub order: usize,
    pub coefficients: Vec<DMatrix<f64>>,
    pub noise_cov: DMatrix<f64>,
    pub normalization: Vec<f64>,
    pub means: Vec<f64>,
    /// AIC of each candidate order `1..=max_lag`.
    pub aic: Vec<f64>,
    /// True when the least-squares system was rank deficient and a ridge term was added.
    pub ridge: bool,
}

impl VarModel {
    pub fn num_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serializes")
    }
}

struct LagFit {
    coefficients: Vec<DMatrix<f64>>,
    cov: DMatrix<f64>,
    aic: f64,
    ridge: bool,
}

fn fit_order(z: &[DVector<f64>], p: usize, first: usize) -> LagFit {
    let k = z[0].len();
    let rows = z.len() - first;
    let mut x = DMatrix::zeros(rows, k * p);
    let mut y = DMatrix::zeros(rows, k);
    for (r, t) in (first..z.len()).enumerate() {
        for lag in 1..=p {
            for j in 0..k {
                x[(r, (lag - 1) * k + j)] = z[t - lag][j];
            }
        }
        for j in 0..k {
            y[(r, j)] = z[t][j];
        }
    }
    let xtx = x.transpose() * &x;
    let xty = x.transpose() * &y;
    let scale = xtx.diagonal().max().max(1.0);
    let well_posed = xtx
        .clone()
        .cholesky()
        .filter(|c| c.l().diagonal().iter().all(|d| d * d > 1e-12 * scale));
    let (beta, ridge) = match well_posed {
        Some(c) => (c.solve(&xty), false),
        None => {
            let reg = &xtx + DMatrix::identity(k * p, k * p) * RIDGE;
            let c = reg.cholesky().expect("ridge system is positive definite");
            (c.solve(&xty), true)
        }
    };
    let resid = &y - &x * &beta;
    let cov = (resid.transpose() * &resid) / rows as f64;
    let coefficients = (0..p).map(|lag| beta.rows(lag * k, k).transpose()).collect();
    let det = (&cov + DMatrix::identity(k, k) * 1e-12).determinant().max(f64::MIN_POSITIVE);
    let aic = det.ln() + 2.0 * (p * k * k) as f64 / rows as f64;
    LagFit { coefficients, cov, aic, ridge }
}

/// Fits VAR models of order `1..=max_lag` by least squares on a common sample
/// and keeps the order with the smallest AIC (ties go to the lower order).
pub fn fit_var(history: &TimeSeriesFrame, max_lag: usize) -> Result<VarModel> {
    let k = history.num_sites();
    if max_lag == 0 || k == 0 {
        return Err(invalid("VAR fit needs max_lag >= 1 and at least one site"));
    }
    let need = 10 * max_lag * k;
    if history.len() < need.max(max_lag + 2) {
        return Err(invalid(format!("VAR fit needs at least {need} observations, got {}", history.len())));
    }
    let normalization: Vec<f64> = (0..k)
        .map(|j| {
            let m = history.values.iter().map(|r| r[j]).fold(0.0, f64::max);
            if m > 0.0 { m } else { 1.0 }
        })
        .collect();
    let n = history.len() as f64;
    let means: Vec<f64> =
        (0..k).map(|j| history.values.iter().map(|r| r[j] / normalization[j]).sum::<f64>() / n).collect();
    let z: Vec<DVector<f64>> = history
        .values
        .iter()
        .map(|r| DVector::from_iterator(k, (0..k).map(|j| r[j] / normalization[j] - means[j])))
        .collect();
    let fits: Vec<LagFit> = (1..=max_lag).map(|p| fit_order(&z, p, max_lag)).collect();
    let aic: Vec<f64> = fits.iter().map(|f| f.aic).collect();
    let best = (0..fits.len()).fold(0, |b, i| if aic[i] < aic[b] - 1e-12 { i } else { b });
    let chosen = fits.into_iter().nth(best).expect("at least one order");
    Ok(VarModel {
        sites: history.columns.clone(),
        resolution: history.resolution,
        order: best + 1,
        coefficients: chosen.coefficients,
        noise_cov: chosen.cov,
        normalization,
        means,
        aic,
        ridge: chosen.ridge,
    })
}

/// Lower-triangular factor of a positive-semidefinite matrix; zero pivots
/// produce zero columns. Fails when the matrix is not PSD within tolerance.
pub fn psd_cholesky(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(invalid("covariance must be square"));
    }
    let scale = a.diagonal().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-300);
    for i in 0..n {
        for j in 0..i {
            if (a[(i, j)] - a[(j, i)]).abs() > 1e-8 * scale.max(1.0) {
                return Err(invalid("covariance is not symmetric"));
            }
        }
    }
    let tol = 1e-12 * scale;
    let mut l = DMatrix::zeros(n, n);
    for j in 0..n {
        let d = a[(j, j)] - (0..j).map(|k| l[(j, k)] * l[(j, k)]).sum::<f64>();
        if d < -1e-8 * scale.max(1.0) {
            return Err(invalid("covariance is not positive semidefinite"));
        }
        if d <= tol {
            continue;
        }
        let root = d.sqrt();
        l[(j, j)] = root;
        for i in j + 1..n {
            let s = a[(i, j)] - (0..j).map(|k| l[(i, k)] * l[(j, k)]).sum::<f64>();
            l[(i, j)] = s / root;
        }
    }
    let resid = &l * l.transpose() - a;
    if resid.amax() > 1e-6 * scale.max(1.0) {
        return Err(invalid("covariance is not positive semidefinite"));
    }
    Ok(l)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSet {
    pub sites: Vec<String>,
    /// scenario × time × site, MW.
    pub paths: Vec<Vec<Vec<f64>>>,
    pub probabilities: Vec<f64>,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.paths.len()
    }

    pub fn is_empty(&self) -> bool {
        self.paths.is_empty()
    }

    pub fn horizon(&self) -> usize {
        self.paths.first().map_or(0, |p| p.len())
    }

    /// A single scenario equal to `frame` with probability one.
    pub fn deterministic(frame: &TimeSeriesFrame) -> ScenarioSet {
        ScenarioSet { sites: frame.columns.clone(), paths: vec![frame.values.clone()], probabilities: vec![1.0] }
    }

    /// Probability-weighted mean path.
    pub fn mean_path(&self) -> Vec<Vec<f64>> {
        let mut mean = vec![vec![0.0; self.sites.len()]; self.horizon()];
        for (p, path) in self.probabilities.iter().zip(&self.paths) {
            for (m, row) in mean.iter_mut().zip(path) {
                for (a, v) in m.iter_mut().zip(row) {
                    *a += p * v;
                }
            }
        }
        mean
    }

    /// Averages consecutive groups of `m` time steps in every path.
    pub fn coarsen(&self, m: usize) -> ScenarioSet {
        let k = self.sites.len();
        let paths = self
            .paths
            .iter()
            .map(|path| {
                path.chunks(m)
                    .map(|bin| (0..k).map(|j| bin.iter().map(|r| r[j]).sum::<f64>() / bin.len() as f64).collect())
                    .collect()
            })
            .collect();
        ScenarioSet { sites: self.sites.clone(), paths, probabilities: self.probabilities.clone() }
    }
}

/// Adds VAR-propagated noise to `base` (deviations start from zero) and
/// clips at zero. Every path has probability `1/n_scenarios`.
pub fn simulate_paths(
    model: &VarModel,
    base: &TimeSeriesFrame,
    n_scenarios: usize,
    seed: u64,
) -> Result<ScenarioSet> {
    if base.resolution != model.resolution {
        return Err(invalid(format!(
            "forecast resolution {} differs from model resolution {}",
            base.resolution, model.resolution
        )));
    }
    if base.columns != model.sites {
        return Err(invalid("forecast columns do not match the model sites"));
    }
    if n_scenarios == 0 {
        return Err(invalid("need at least one scenario"));
    }
    let l = psd_cholesky(&model.noise_cov)?;
    let k = model.num_sites();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut paths = Vec::with_capacity(n_scenarios);
    for _ in 0..n_scenarios {
        let mut history: Vec<DVector<f64>> = vec![DVector::zeros(k); model.order];
        let mut path = Vec::with_capacity(base.len());
        for row in &base.values {
            let w = DVector::from_iterator(k, (0..k).map(|_| StandardNormal.sample(&mut rng)));
            let mut e = &l * w;
            for (lag, phi) in model.coefficients.iter().enumerate() {
                e += phi * &history[history.len() - 1 - lag];
            }
            path.push((0..k).map(|j| (row[j] + e[j] * model.normalization[j]).max(0.0)).collect());
            history.remove(0);
            history.push(e);
        }
        paths.push(path);
    }
    Ok(ScenarioSet {
        sites: model.sites.clone(),
        paths,
        probabilities: vec![1.0 / n_scenarios as f64; n_scenarios],
    })
}

/// Blend weights `α_1, α_2, ...` of the intraday forecast update.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UpdateSchedule {
    pub alphas: Vec<f64>,
}

impl UpdateSchedule {
    pub fn new(alphas: Vec<f64>) -> Result<Self> {
        if alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(invalid("update weights must lie in [0, 1]"));
        }
        if alphas.windows(2).any(|w| w[1] > w[0]) {
            return Err(invalid("update weights must be nonincreasing"));
        }
        Ok(Self { alphas })
    }

    /// `α_i = max(0, 1 - i/steps)` for `i = 1..=steps`.
    pub fn linear(steps: usize) -> Self {
        Self { alphas: (1..=steps).map(|i| (1.0 - i as f64 / steps as f64).max(0.0)).collect() }
    }

    pub fn len(&self) -> usize {
        self.alphas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.alphas.is_empty()
    }
}

impl Default for UpdateSchedule {
    fn default() -> Self {
        Self::linear(16)
    }
}

/// Row 0 of `da_forecast` is the current step `t`; the result holds the
/// updated forecast for `t+1 ..= t+lookahead`:
/// `ỹ_{t+i} = α_i (y_t + ȳ_{t+i} - ȳ_t) + (1 - α_i) ȳ_{t+i}`, clipped at zero.
pub fn update_forecast(
    da_forecast: &TimeSeriesFrame,
    last_actual: &[f64],
    schedule: &UpdateSchedule,
    lookahead: usize,
) -> Result<TimeSeriesFrame> {
    if last_actual.len() != da_forecast.num_sites() {
        return Err(invalid("actual vector length differs from the number of sites"));
    }
    if lookahead > schedule.len() || lookahead + 1 > da_forecast.len() {
        return Err(invalid(format!(
            "lookahead {lookahead} exceeds the schedule ({}) or forecast ({} rows)",
            schedule.len(),
            da_forecast.len()
        )));
    }
    let now = &da_forecast.values[0];
    let values = (1..=lookahead)
        .map(|i| {
            let a = schedule.alphas[i - 1];
            let fc = &da_forecast.values[i];
            // algebraically α(y + ȳ_{t+i} - ȳ_t) + (1-α)ȳ_{t+i}, arranged so y_t = ȳ_t is exact
            (0..fc.len()).map(|j| (fc[j] + a * (last_actual[j] - now[j])).max(0.0)).collect()
        })
        .collect();
    Ok(TimeSeriesFrame {
        start: da_forecast.timestamp(1),
        resolution: da_forecast.resolution,
        columns: da_forecast.columns.clone(),
        values,
        kind: da_forecast.kind,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::timeseries::SeriesKind;
    use chrono::NaiveDateTime;

    fn frame(rows: Vec<Vec<f64>>) -> TimeSeriesFrame {
        let cols = (0..rows[0].len()).map(|j| format!("w{j}")).collect();
        TimeSeriesFrame::new(NaiveDateTime::default(), 15, cols, rows, SeriesKind::Forecast).unwrap()
    }

    #[test]
    fn substitution_example() {
        let f = frame(vec![vec![90.0], vec![100.0]]);
        let s = UpdateSchedule::new(vec![1.0]).unwrap();
        let u = update_forecast(&f, &[80.0], &s, 1).unwrap();
        assert_eq!(u.values, vec![vec![90.0]]);
    }

    #[test]
    fn zero_weights_return_forecast() {
        let f = frame(vec![vec![5.0], vec![7.0], vec![3.0]]);
        let s = UpdateSchedule::new(vec![0.0, 0.0]).unwrap();
        let u = update_forecast(&f, &[40.0], &s, 2).unwrap();
        assert_eq!(u.values, vec![vec![7.0], vec![3.0]]);
    }

    #[test]
    fn schedule_validation() {
        assert!(UpdateSchedule::new(vec![0.5, 0.7]).is_err());
        assert!(UpdateSchedule::new(vec![1.2]).is_err());
        let d = UpdateSchedule::default();
        assert_eq!(d.len(), 16);
        assert_eq!(d.alphas[15], 0.0);
    }

    #[test]
    fn non_psd_covariance_rejected() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(psd_cholesky(&a).is_err());
        let z = DMatrix::zeros(2, 2);
        assert_eq!(psd_cholesky(&z).unwrap(), z);
    }
}
