//! Network, generator fleet, penalties, reserve policy and timescales.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bus {
    pub id: String,
    pub theta_min: f64,
    pub theta_max: f64,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub demand_ref: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Line {
    pub from_bus: String,
    pub to_bus: String,
    pub susceptance: f64,
    /// Defaults to `-flow_max` when the input leaves it blank.
    #[serde(default)]
    pub flow_min: Option<f64>,
    pub flow_max: f64,
}

impl Line {
    pub fn lower_limit(&self) -> f64 {
        self.flow_min.unwrap_or(-self.flow_max)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GeneratorKind {
    #[serde(rename = "conventional_DA")]
    ConventionalDa,
    #[serde(rename = "conventional_ST")]
    ConventionalSt,
    #[serde(rename = "solar")]
    Solar,
    #[serde(rename = "wind")]
    Wind,
}

impl GeneratorKind {
    pub fn is_renewable(self) -> bool {
        matches!(self, GeneratorKind::Solar | GeneratorKind::Wind)
    }
    pub fn is_conventional(self) -> bool {
        !self.is_renewable()
    }
}

/// Ramp limits are MW per 15-minute epoch; min up/down times are counted in
/// 15-minute epochs. Layers with coarser periods convert on build.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Generator {
    pub id: String,
    pub bus: String,
    pub kind: GeneratorKind,
    pub g_min: f64,
    pub g_max: f64,
    pub ramp_up: f64,
    pub ramp_down: f64,
    #[serde(default)]
    pub min_up: u32,
    #[serde(default)]
    pub min_down: u32,
    #[serde(default)]
    pub cost_startup: f64,
    /// $ per hour while committed.
    #[serde(default)]
    pub cost_noload: f64,
    /// $ per MWh.
    #[serde(default)]
    pub cost_variable: f64,
    #[serde(default)]
    pub heat_rate: f64,
    #[serde(default)]
    pub co2_rate: f64,
    #[serde(default)]
    pub nox_rate: f64,
    #[serde(default)]
    pub so2_rate: f64,
    #[serde(default, deserialize_with = "empty_as_none")]
    pub supply_ref: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    /// $ per MWh of conventional over-generation.
    pub phi_over: f64,
    /// $ per MWh of renewable curtailment.
    pub phi_curtail: f64,
    /// $ per MWh of unmet demand.
    pub phi_unmet: f64,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self { phi_over: 25.0, phi_curtail: 25.0, phi_unmet: 5000.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReserveLevel {
    VeryLow,
    Low,
    Medium,
    High,
}

impl ReserveLevel {
    pub const ALL: [ReserveLevel; 4] =
        [ReserveLevel::VeryLow, ReserveLevel::Low, ReserveLevel::Medium, ReserveLevel::High];

    pub fn policy(self) -> ReservePolicy {
        let (uc, ed) = match self {
            ReserveLevel::VeryLow => (0.05, 0.0125),
            ReserveLevel::Low => (0.10, 0.025),
            ReserveLevel::Medium => (0.15, 0.05),
            ReserveLevel::High => (0.20, 0.10),
        };
        ReservePolicy { uc_fraction: uc, ed_fraction: ed }
    }

    pub fn label(self) -> &'static str {
        match self {
            ReserveLevel::VeryLow => "very_low",
            ReserveLevel::Low => "low",
            ReserveLevel::Medium => "medium",
            ReserveLevel::High => "high",
        }
    }
}

impl std::str::FromStr for ReserveLevel {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace(['-', ' '], "_").as_str() {
            "very_low" | "vlow" | "vl" => Ok(ReserveLevel::VeryLow),
            "low" => Ok(ReserveLevel::Low),
            "medium" | "med" => Ok(ReserveLevel::Medium),
            "high" => Ok(ReserveLevel::High),
            other => Err(invalid(format!("unknown reserve level '{other}'"))),
        }
    }
}

impl fmt::Display for ReserveLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReservePolicy {
    pub uc_fraction: f64,
    pub ed_fraction: f64,
}

impl Default for ReservePolicy {
    fn default() -> Self {
        ReserveLevel::VeryLow.policy()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Layer {
    #[serde(rename = "DA")]
    Da,
    #[serde(rename = "ST")]
    St,
    #[serde(rename = "RT")]
    Rt,
}

pub fn reserve_requirement(policy: &ReservePolicy, layer: Layer, load: f64) -> Result<f64> {
    if !(load >= 0.0) {
        return Err(invalid(format!("load must be nonnegative, got {load}")));
    }
    let frac = match layer {
        Layer::Da | Layer::St => policy.uc_fraction,
        Layer::Rt => policy.ed_fraction,
    };
    Ok(frac * load)
}

/// Horizon, period length and re-solve interval of one layer, in minutes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerTiming {
    pub horizon: u32,
    pub resolution: u32,
    pub solve_frequency: u32,
}

impl LayerTiming {
    pub fn periods(&self) -> usize {
        (self.horizon / self.resolution) as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimescaleConfig {
    pub da: LayerTiming,
    pub st: LayerTiming,
    pub rt: LayerTiming,
}

impl Default for TimescaleConfig {
    fn default() -> Self {
        Self {
            da: LayerTiming { horizon: 1440, resolution: 60, solve_frequency: 1440 },
            st: LayerTiming { horizon: 240, resolution: 15, solve_frequency: 180 },
            rt: LayerTiming { horizon: 75, resolution: 15, solve_frequency: 15 },
        }
    }
}

impl TimescaleConfig {
    pub fn get(&self, layer: Layer) -> &LayerTiming {
        match layer {
            Layer::Da => &self.da,
            Layer::St => &self.st,
            Layer::Rt => &self.rt,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCase {
    pub name: String,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub generators: Vec<Generator>,
    #[serde(default)]
    pub penalty_config: PenaltyConfig,
    #[serde(default)]
    pub reserve_policy: ReservePolicy,
    #[serde(default)]
    pub timescale_config: TimescaleConfig,
    #[serde(default = "one")]
    pub sw_multiplier: f64,
}

fn one() -> f64 {
    1.0
}

impl GridCase {
    pub fn bus_index(&self) -> HashMap<&str, usize> {
        self.buses.iter().enumerate().map(|(i, b)| (b.id.as_str(), i)).collect()
    }

    pub fn generators_of(&self, kind: GeneratorKind) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators.iter().enumerate().filter(move |(_, g)| g.kind == kind)
    }

    pub fn renewables(&self) -> impl Iterator<Item = (usize, &Generator)> {
        self.generators.iter().enumerate().filter(|(_, g)| g.kind.is_renewable())
    }

    /// Loads a case from a JSON manifest naming the three CSV tables
    /// (paths relative to the manifest).
    pub fn load(manifest: &Path) -> Result<GridCase> {
        let m: CaseManifest = read_json(manifest)?;
        let dir = manifest.parent().unwrap_or(Path::new("."));
        let buses = read_csv(&dir.join(&m.buses))?;
        let lines = read_csv(&dir.join(&m.lines))?;
        let generators = read_csv(&dir.join(&m.generators))?;
        let reserve_policy = match m.reserve {
            None => ReservePolicy::default(),
            Some(ReserveSpec::Level(l)) => l.policy(),
            Some(ReserveSpec::Policy(p)) => p,
        };
        Ok(GridCase {
            name: m.name,
            buses,
            lines,
            generators,
            penalty_config: m.penalties.unwrap_or_default(),
            reserve_policy,
            timescale_config: m.timescales.unwrap_or_default(),
            sw_multiplier: m.sw_multiplier.unwrap_or(1.0),
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseManifest {
    pub name: String,
    pub buses: PathBuf,
    pub lines: PathBuf,
    pub generators: PathBuf,
    #[serde(default)]
    pub penalties: Option<PenaltyConfig>,
    #[serde(default)]
    pub reserve: Option<ReserveSpec>,
    #[serde(default)]
    pub timescales: Option<TimescaleConfig>,
    #[serde(default)]
    pub sw_multiplier: Option<f64>,
    /// Directory holding the forecast/actual CSV series, relative to the manifest.
    #[serde(default)]
    pub series: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ReserveSpec {
    Level(ReserveLevel),
    Policy(ReservePolicy),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValidationIssue {
    pub location: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ValidationReport {
    pub issues: Vec<ValidationIssue>,
}

impl ValidationReport {
    pub fn is_pass(&self) -> bool {
        self.issues.is_empty()
    }

    fn push(&mut self, location: impl Into<String>, message: impl Into<String>) {
        self.issues.push(ValidationIssue { location: location.into(), message: message.into() });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_pass() {
            Ok(())
        } else {
            Err(invalid(self.to_string()))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_pass() {
            return f.write_str("pass");
        }
        for (k, issue) in self.issues.iter().enumerate() {
            if k > 0 {
                writeln!(f)?;
            }
            write!(f, "{}: {}", issue.location, issue.message)?;
        }
        Ok(())
    }
}

pub fn validate_case(case: &GridCase) -> ValidationReport {
    let mut r = ValidationReport::default();
    let mut seen = HashSet::new();
    for b in &case.buses {
        if !seen.insert(b.id.as_str()) {
            r.push(format!("bus {}", b.id), "duplicate bus id");
        }
        if !(b.theta_min <= b.theta_max) {
            r.push(format!("bus {}", b.id), "theta_min exceeds theta_max");
        }
    }
    let index = case.bus_index();
    for (k, l) in case.lines.iter().enumerate() {
        let loc = format!("line {k} ({}-{})", l.from_bus, l.to_bus);
        if !index.contains_key(l.from_bus.as_str()) || !index.contains_key(l.to_bus.as_str()) {
            r.push(&loc, "dangling bus reference");
        }
        if l.from_bus == l.to_bus {
            r.push(&loc, "line connects a bus to itself");
        }
        if !(l.susceptance > 0.0) {
            r.push(&loc, "susceptance must be positive");
        }
        if !(l.lower_limit() <= l.flow_max) {
            r.push(&loc, "flow_min exceeds flow_max");
        }
    }
    let mut gen_ids = HashSet::new();
    for g in &case.generators {
        let loc = format!("generator {}", g.id);
        if !gen_ids.insert(g.id.as_str()) {
            r.push(&loc, "duplicate generator id");
        }
        if !index.contains_key(g.bus.as_str()) {
            r.push(&loc, "dangling bus reference");
        }
        if !(0.0 <= g.g_min && g.g_min <= g.g_max) {
            r.push(&loc, "capacity bounds must satisfy 0 <= g_min <= g_max");
        }
        if !(g.ramp_up >= 0.0 && g.ramp_down >= 0.0) {
            r.push(&loc, "ramp limits must be nonnegative");
        }
        if g.kind.is_conventional() {
            if g.min_up < 1 || g.min_down < 1 {
                r.push(&loc, "conventional units need min_up and min_down of at least 1");
            }
            if g.g_min > g.ramp_up || g.g_min > g.ramp_down {
                r.push(&loc, "g_min must not exceed the per-epoch ramp limits");
            }
        } else {
            if g.g_min != 0.0 {
                r.push(&loc, "renewable units must have g_min = 0");
            }
            if g.supply_ref.is_none() {
                r.push(&loc, "renewable unit without supply_ref");
            }
        }
        for (name, v) in [
            ("cost_startup", g.cost_startup),
            ("cost_noload", g.cost_noload),
            ("cost_variable", g.cost_variable),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                r.push(&loc, format!("{name} must be finite and nonnegative"));
            }
        }
        if g.cost_variable + case.penalty_config.phi_over >= case.penalty_config.phi_unmet {
            r.push(&loc, "unmet-demand penalty must exceed variable cost plus over-generation penalty");
        }
    }
    let p = &case.penalty_config;
    if !(p.phi_over >= 0.0 && p.phi_curtail >= 0.0 && p.phi_unmet >= 0.0) {
        r.push("penalties", "penalties must be nonnegative");
    }
    let rp = &case.reserve_policy;
    if !(0.0 <= rp.ed_fraction && rp.ed_fraction <= rp.uc_fraction && rp.uc_fraction <= 1.0) {
        r.push("reserve", "need 0 <= ed_fraction <= uc_fraction <= 1");
    }
    for (name, t) in [
        ("DA", case.timescale_config.da),
        ("ST", case.timescale_config.st),
        ("RT", case.timescale_config.rt),
    ] {
        if t.resolution == 0
            || t.horizon < t.solve_frequency
            || t.horizon % t.resolution != 0
            || t.solve_frequency % t.resolution != 0
        {
            r.push(format!("timescale {name}"), "horizon and solve frequency must be multiples of the resolution, horizon >= frequency");
        }
    }
    if !(case.sw_multiplier >= 0.0) {
        r.push("sw_multiplier", "must be nonnegative");
    }
    if !case.generators.iter().any(|g| g.kind == GeneratorKind::ConventionalDa) {
        r.push("generators", "no conventional_DA generator");
    }
    if case.buses.is_empty() {
        r.push("buses", "case has no buses");
    } else if !is_connected(case, &index) {
        r.push("network", "network is not connected");
    }
    r
}

fn is_connected(case: &GridCase, index: &HashMap<&str, usize>) -> bool {
    let n = case.buses.len();
    let mut adj = vec![Vec::new(); n];
    for l in &case.lines {
        if let (Some(&a), Some(&b)) = (index.get(l.from_bus.as_str()), index.get(l.to_bus.as_str())) {
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    while let Some(u) = queue.pop_front() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                queue.push_back(v);
            }
        }
    }
    seen.into_iter().all(|s| s)
}

fn empty_as_none<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Option<String>, D::Error> {
    let s: Option<String> = Option::deserialize(d)?;
    Ok(s.filter(|s| !s.trim().is_empty()))
}

pub(crate) fn read_csv<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let csv_err = |source| Error::Csv { path: path.display().to_string(), source };
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path).map_err(csv_err)?;
    rdr.deserialize().collect::<std::result::Result<Vec<T>, _>>().map_err(csv_err)
}

pub(crate) fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|source| Error::Io { path: path.display().to_string(), source })?;
    serde_json::from_str(&text).map_err(|source| Error::Json { path: path.display().to_string(), source })
}
