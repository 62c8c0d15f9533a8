//! Run configuration, persisted records and the experiment catalog.
//!
//! A run writes into its output directory
//! - `metadata.toml`: the resolved configuration, per-run summaries, named
//!   scalar diagnostics and fits,
//! - one `<name>.dat` per table: a `#`-prefixed header naming the columns,
//!   then whitespace-separated rows of 17-significant-digit floats,
//! - `pi2.txt` when the experiment built a PI2 table.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::diagnostics::FitResult;
use crate::error::{Error, Result};
use crate::jet::SmoothFn;
use crate::models::ModelKind;
use crate::pi2::Pi2Table;
use crate::time_stepping::{Integrator, RunStatus, Trajectory};

/// Writes `bytes` to a temporary file beside `path`, then renames it into
/// place, so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.flush()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Serializable model choice. Nonlinear-dispersion invariants are given as
/// polynomial coefficients in `u`, lowest order first.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ModelConfig {
    GenKdv { n: u32 },
    SinhKdv,
    Kawahara { alpha: f64, beta: f64 },
    NonlinearDispersion { c: Vec<f64>, p: Vec<f64> },
    Kdv2 { alpha: f64 },
}

impl ModelConfig {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelConfig::GenKdv { n } => ModelKind::GenKdV { n: *n },
            ModelConfig::SinhKdv => ModelKind::SinhKdV,
            ModelConfig::Kawahara { alpha, beta } => ModelKind::Kawahara { alpha: *alpha, beta: *beta },
            ModelConfig::NonlinearDispersion { c, p } => ModelKind::NonlinearDispersion {
                c: SmoothFn::polynomial(c.clone()),
                p: SmoothFn::polynomial(p.clone()),
            },
            ModelConfig::Kdv2 { alpha } => ModelKind::KdV2Family { alpha: *alpha },
        }
    }
}

fn parse_list(s: &str) -> std::result::Result<Vec<f64>, String> {
    s.split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| t.trim().parse::<f64>().map_err(|e| format!("{t}: {e}")))
        .collect()
}

/// `genkdv:N`, `sinh-kdv`, `kawahara:ALPHA,BETA`, `kdv2:ALPHA` or
/// `nld:C0,C1,..;P0,P1,..`.
impl FromStr for ModelConfig {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        let (name, args) = s.split_once(':').unwrap_or((s, ""));
        match name.trim().to_ascii_lowercase().as_str() {
            "genkdv" | "gkdv" | "kdv" => {
                let n = if args.is_empty() { 1 } else { args.trim().parse().map_err(|e| format!("{e}"))? };
                Ok(ModelConfig::GenKdv { n })
            }
            "sinh-kdv" | "sinhkdv" => Ok(ModelConfig::SinhKdv),
            "kawahara" => match parse_list(args)?.as_slice() {
                [alpha, beta] => Ok(ModelConfig::Kawahara { alpha: *alpha, beta: *beta }),
                _ => Err("kawahara takes ALPHA,BETA".into()),
            },
            "kdv2" => match parse_list(args)?.as_slice() {
                [alpha] => Ok(ModelConfig::Kdv2 { alpha: *alpha }),
                _ => Err("kdv2 takes ALPHA".into()),
            },
            "nld" => {
                let (c, p) = args.split_once(';').ok_or("nld takes C0,C1,..;P0,P1,..")?;
                Ok(ModelConfig::NonlinearDispersion { c: parse_list(c)?, p: parse_list(p)? })
            }
            other => Err(format!("unknown model '{other}'")),
        }
    }
}

/// Catalog entries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Evolve,
    Hopf,
    Pi2,
    BreakupUniversality,
    Scaling,
    Quasitriviality,
    Blowup,
    Kdv2Transition,
    HamiltonianChecks,
}

impl ExperimentId {
    pub const ALL: [ExperimentId; 9] = [
        ExperimentId::Evolve,
        ExperimentId::Hopf,
        ExperimentId::Pi2,
        ExperimentId::BreakupUniversality,
        ExperimentId::Scaling,
        ExperimentId::Quasitriviality,
        ExperimentId::Blowup,
        ExperimentId::Kdv2Transition,
        ExperimentId::HamiltonianChecks,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ExperimentId::Evolve => "evolve",
            ExperimentId::Hopf => "hopf",
            ExperimentId::Pi2 => "pi2",
            ExperimentId::BreakupUniversality => "breakup-universality",
            ExperimentId::Scaling => "scaling",
            ExperimentId::Quasitriviality => "quasitriviality",
            ExperimentId::Blowup => "blowup",
            ExperimentId::Kdv2Transition => "kdv2-transition",
            ExperimentId::HamiltonianChecks => "hamiltonian-checks",
        }
    }
}

impl FromStr for ExperimentId {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        ExperimentId::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| format!("unknown experiment '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DtScaling {
    Fixed,
    /// `dt · √ε`
    SqrtEps,
}

/// Everything an experiment needs. Missing end times fall back to the
/// experiment's natural time (`t_c`, `t_c/2`, …).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub experiment: ExperimentId,
    pub models: Vec<ModelConfig>,
    pub eps: Vec<f64>,
    /// Grid half-width `L`.
    pub half_width: f64,
    pub nodes: usize,
    pub dt: f64,
    pub dt_scaling: DtScaling,
    pub integrator: Option<Integrator>,
    /// Empty, one value for every model, or one per model.
    pub t_end: Vec<f64>,
    pub snapshots: Vec<f64>,
    /// Fixed `x`-window for the quasitriviality comparisons.
    pub window: Option<(f64, f64)>,
    /// Half-width of the multiscale trust window in PI2 units.
    pub window_scaled: f64,
    pub hopf_tol: f64,
    pub pi2_times: Vec<f64>,
    pub pi2_x_max: f64,
    pub pi2_nodes: usize,
    /// Random (f, g) pairs for the bracket checks.
    pub pairs: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            experiment: ExperimentId::Evolve,
            models: vec![ModelConfig::GenKdv { n: 1 }],
            eps: vec![0.1],
            half_width: 8.0 * std::f64::consts::PI,
            nodes: 2048,
            dt: 1e-4,
            dt_scaling: DtScaling::Fixed,
            integrator: None,
            t_end: Vec::new(),
            snapshots: Vec::new(),
            window: None,
            window_scaled: crate::asymptotics::WINDOW_X_SCALED,
            hopf_tol: 1e-14,
            pi2_times: vec![0.0],
            pi2_x_max: 400.0,
            pi2_nodes: 4096,
            pairs: 3,
            seed: 7,
            output: None,
        }
    }
}

fn eps_sweep(first: f64, step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| 10f64.powf(first - step * j as f64)).collect()
}

impl RunConfig {
    /// The catalog defaults, set to the desk-scale reproduction settings.
    #[allow(clippy::approx_constant)] // 0.3180 is an end time, not 1/π
    pub fn catalog(id: ExperimentId) -> Self {
        let base = RunConfig { experiment: id, ..Default::default() };
        match id {
            ExperimentId::Evolve | ExperimentId::Hopf => base,
            ExperimentId::Pi2 => RunConfig {
                models: Vec::new(),
                eps: Vec::new(),
                pi2_times: vec![-2.0, -1.0, 0.0, 1.0, 2.0],
                ..base
            },
            ExperimentId::BreakupUniversality => RunConfig {
                models: vec![ModelConfig::GenKdv { n: 1 }, ModelConfig::Kawahara { alpha: 1.0, beta: -1.0 }],
                eps: eps_sweep(-1.0, 0.25, 7),
                nodes: 16384,
                dt: 3e-4,
                dt_scaling: DtScaling::SqrtEps,
                ..base
            },
            ExperimentId::Scaling => RunConfig {
                models: [1, 3, 4, 5].into_iter().map(|n| ModelConfig::GenKdv { n }).collect(),
                eps: eps_sweep(-1.0, 0.25, 7),
                nodes: 16384,
                dt: 3e-4,
                dt_scaling: DtScaling::SqrtEps,
                ..base
            },
            ExperimentId::Quasitriviality => RunConfig {
                models: vec![ModelConfig::Kawahara { alpha: 1.0, beta: 1.0 }, ModelConfig::GenKdv { n: 5 }],
                eps: eps_sweep(-1.0, 0.125, 9),
                nodes: 2048,
                dt: 5e-5,
                window: Some((0.8, 2.0)),
                ..base
            },
            ExperimentId::Blowup => RunConfig {
                models: vec![ModelConfig::GenKdv { n: 4 }, ModelConfig::GenKdv { n: 5 }],
                eps: vec![0.1],
                nodes: 4096,
                dt: 5e-6,
                t_end: vec![0.3180, 0.2362],
                ..base
            },
            ExperimentId::Kdv2Transition => RunConfig {
                models: [0.5, 1.0, 1.2].into_iter().map(|alpha| ModelConfig::Kdv2 { alpha }).collect(),
                eps: vec![0.01],
                nodes: 16384,
                dt: 2e-6,
                t_end: vec![0.04],
                ..base
            },
            ExperimentId::HamiltonianChecks => RunConfig {
                models: Vec::new(),
                eps: eps_sweep(-1.0, 0.125, 5),
                half_width: std::f64::consts::PI,
                nodes: 128,
                ..base
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(e) = self.eps.iter().find(|e| !(**e > 0.0 && e.is_finite())) {
            return Err(Error::Config(format!("ε must be positive, got {e}")));
        }
        if self.nodes < 4 || self.nodes % 2 != 0 {
            return Err(Error::Config(format!("N must be even and at least 4, got {}", self.nodes)));
        }
        if !(self.half_width > 0.0) {
            return Err(Error::Config(format!("half-width must be positive, got {}", self.half_width)));
        }
        if !(self.dt > 0.0) {
            return Err(Error::Config(format!("dt must be positive, got {}", self.dt)));
        }
        if self.t_end.len() > 1 && self.t_end.len() != self.models.len() {
            return Err(Error::Config(format!(
                "{} end times for {} models",
                self.t_end.len(),
                self.models.len()
            )));
        }
        if let Some((lo, hi)) = self.window {
            if !(lo < hi) {
                return Err(Error::Config(format!("window [{lo}, {hi}] is empty")));
            }
        }
        let needs_models = !matches!(self.experiment, ExperimentId::Pi2 | ExperimentId::HamiltonianChecks);
        if needs_models && self.models.is_empty() {
            return Err(Error::Config(format!("experiment {} needs a model", self.experiment.name())));
        }
        if needs_models && self.eps.is_empty() && self.experiment != ExperimentId::Hopf {
            return Err(Error::Config("no ε values given".into()));
        }
        Ok(())
    }

    pub fn dt_for(&self, eps: f64) -> f64 {
        match self.dt_scaling {
            DtScaling::Fixed => self.dt,
            DtScaling::SqrtEps => self.dt * eps.sqrt(),
        }
    }

    /// End time for the `i`-th model, if configured.
    pub fn t_end_for(&self, i: usize) -> Option<f64> {
        match self.t_end.len() {
            0 => None,
            1 => Some(self.t_end[0]),
            _ => self.t_end.get(i).copied(),
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Overlay the keys present in a TOML document onto `self`.
    pub fn overlay_toml(&self, text: &str, path: &Path) -> Result<RunConfig> {
        let parse = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
        let patch: toml::Table = text.parse().map_err(|e: toml::de::Error| parse(e.to_string()))?;
        let mut base = toml::Table::try_from(self).map_err(|e| Error::Config(e.to_string()))?;
        for (k, v) in patch {
            base.insert(k, v);
        }
        base.try_into().map_err(|e: toml::de::Error| parse(e.to_string()))
    }
}

/// One PDE solve.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub model: String,
    pub eps: f64,
    pub nodes: usize,
    pub dt: f64,
    pub t_end: f64,
    pub integrator: Integrator,
    pub status: RunStatus,
    pub steps: usize,
    pub energy_drift: f64,
    pub mass_drift: f64,
    pub final_tail: f64,
}

impl RunSummary {
    pub fn from_trajectory(model: &str, eps: f64, dt: f64, t_end: f64, tr: &Trajectory) -> Self {
        RunSummary {
            model: model.to_string(),
            eps,
            nodes: tr.last.field().grid.len(),
            dt,
            t_end,
            integrator: tr.integrator,
            status: tr.status.clone(),
            steps: tr.steps,
            energy_drift: tr.max_energy_drift(),
            mass_drift: tr.max_mass_drift(),
            final_tail: tr.tail.last().map_or(0.0, |s| s.1),
        }
    }

    /// Reached a normal end (completed, or stopped on resolution).
    pub fn finished(&self) -> bool {
        matches!(self.status, RunStatus::Completed | RunStatus::ResolutionExhausted { .. })
    }

    pub fn conserves(&self) -> bool {
        self.energy_drift < 1e-6 && self.mass_drift < 1e-10
    }
}

/// Named numeric table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Table {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| r[j]).collect())
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("# {}\n", self.columns.join(" "));
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", cells.join(" "));
        }
        s
    }

    pub fn parse(name: &str, text: &str, path: &Path) -> Result<Table> {
        let err = |msg: String| Error::Parse { path: path.to_path_buf(), msg };
        let mut lines = text.lines();
        let header = lines
            .next()
            .and_then(|l| l.strip_prefix('#'))
            .ok_or_else(|| err("missing '#' header".into()))?;
        let columns: Vec<String> = header.split_whitespace().map(str::to_string).collect();
        let mut rows = Vec::new();
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let row: Vec<f64> = line
                .split_whitespace()
                .map(|t| t.parse::<f64>().map_err(|e| err(format!("line {}: {e}", i + 2))))
                .collect::<Result<_>>()?;
            if row.len() != columns.len() {
                return Err(err(format!("line {}: {} values for {} columns", i + 2, row.len(), columns.len())));
            }
            rows.push(row);
        }
        Ok(Table { name: name.to_string(), columns, rows })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Table> {
        let text = std::fs::read_to_string(path)?;
        let name = path.file_stem().and_then(|s| s.to_str()).unwrap_or("table");
        Table::parse(name, &text, path)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum RecordStatus {
    Completed,
    /// At least one run stopped early or one step failed; outputs kept.
    Partial { reasons: Vec<String> },
}

/// Results of one [`run_experiment`](crate::catalog::run_experiment) call.
#[derive(Clone, Debug)]
pub struct RunRecord {
    pub config: RunConfig,
    pub runs: Vec<RunSummary>,
    pub values: BTreeMap<String, f64>,
    pub fits: BTreeMap<String, FitResult>,
    pub flags: BTreeMap<String, bool>,
    pub tables: Vec<Table>,
    pub pi2: Option<Pi2Table>,
    pub errors: Vec<String>,
}

#[derive(Serialize)]
struct Metadata<'a> {
    status: RecordStatus,
    config: &'a RunConfig,
    values: &'a BTreeMap<String, f64>,
    flags: &'a BTreeMap<String, bool>,
    fits: &'a BTreeMap<String, FitResult>,
    tables: Vec<String>,
    errors: &'a [String],
    runs: &'a [RunSummary],
}

impl RunRecord {
    pub fn new(config: RunConfig) -> Self {
        RunRecord {
            config,
            runs: Vec::new(),
            values: BTreeMap::new(),
            fits: BTreeMap::new(),
            flags: BTreeMap::new(),
            tables: Vec::new(),
            pi2: None,
            errors: Vec::new(),
        }
    }

    pub fn status(&self) -> RecordStatus {
        let mut reasons: Vec<String> = self
            .runs
            .iter()
            .filter(|r| !r.status.is_completed())
            .map(|r| format!("{} at ε = {:e}: {:?}", r.model, r.eps, r.status))
            .collect();
        reasons.extend(self.errors.iter().cloned());
        if reasons.is_empty() {
            RecordStatus::Completed
        } else {
            RecordStatus::Partial { reasons }
        }
    }

    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|t| t.name == name)
    }

    pub fn metadata(&self) -> Result<String> {
        let meta = Metadata {
            status: self.status(),
            config: &self.config,
            values: &self.values,
            flags: &self.flags,
            fits: &self.fits,
            tables: self.tables.iter().map(|t| format!("{}.dat", t.name)).collect(),
            errors: &self.errors,
            runs: &self.runs,
        };
        toml::to_string(&meta).map_err(|e| Error::Config(e.to_string()))
    }
}

/// Write metadata, every table and the PI2 table (if any) under `dir`.
pub fn emit_outputs(record: &RunRecord, dir: &Path) -> Result<Vec<PathBuf>> {
    let mut written = Vec::new();
    let meta = dir.join("metadata.toml");
    write_atomic(&meta, record.metadata()?.as_bytes())?;
    written.push(meta);
    for t in &record.tables {
        let p = dir.join(format!("{}.dat", t.name));
        t.write(&p)?;
        written.push(p);
    }
    if let Some(tab) = &record.pi2 {
        let p = dir.join("pi2.txt");
        tab.write(&p)?;
        written.push(p);
    }
    Ok(written)
}

/// Worker pool for sweeps and batches, sized by `BREAKUP_WORKERS` when set.
pub fn worker_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var("BREAKUP_WORKERS") {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("BREAKUP_WORKERS must be a positive integer, got '{v}'")))?;
        if n == 0 {
            return Err(Error::Config("BREAKUP_WORKERS must be positive".into()));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}
