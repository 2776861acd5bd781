//! Scenario runner behind the command-line front end.
//!
//! A scenario is a flat `key = value` file (see [`crate::config`]). The run
//! kind fixes which keys are required; everything else has a default.
//! Every run writes its CSV/JSON files plus `manifest.json` listing each
//! file with its SHA-256.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::aperture::{
    capacity_record, density_csv, solve_equilibrium, ApertureError, ApertureMesh, ApertureShape,
    CapacityRecord, DEFAULT_RESOLUTION,
};
use crate::config::{ConfigError, KeyValues};
use crate::green::{
    im_green_fixed_frequency, perturbed_green, FieldPoint, GreenError, GreenModel, ZetaMode,
};
use crate::imaging::{
    focal_metrics, imaging_scan, recording_time, theorem28_prediction, FocalMetrics, ImagingError,
    ImagingOptions,
};
use crate::output::fmt_f64;
use crate::resonance::{
    resonance_csv, resonance_table, resonances_asymptotic, tau_coefficients, Resonance,
    ResonanceError, TauCoefficients,
};
use crate::signal::{
    make_root_signal, quasi_stationary_report, QuasiStationaryReport, QuasiThresholds, SignalError,
    SignalKind, DEFAULT_DELTA, DEFAULT_SAMPLES,
};
use crate::system::{
    build_system, interaction_matrices, ResonatorSystem, SpectralJson, SystemConfig, SystemError,
};
use crate::validation::{self, Artifact, CriterionReport, DEFAULT_C1, DEFAULT_SEED};

#[derive(Debug, Error)]
pub enum RunError {
    #[error("config error: {0}")]
    Config(#[from] ConfigError),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("{failed} of {total} criteria failed")]
    CriteriaFailed { failed: usize, total: usize },
}

impl RunError {
    /// 2 for anything the user can fix in the config, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Parameter(_) => 2,
            _ => 1,
        }
    }
}

impl From<SystemError> for RunError {
    fn from(e: SystemError) -> Self {
        match e {
            SystemError::Parameter(m) => Self::Parameter(m),
            other => Self::Parameter(other.to_string()),
        }
    }
}

impl From<SignalError> for RunError {
    fn from(e: SignalError) -> Self {
        Self::Parameter(e.to_string())
    }
}

impl From<ApertureError> for RunError {
    fn from(e: ApertureError) -> Self {
        match e {
            ApertureError::InvalidShape(_) => Self::Parameter(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ResonanceError> for RunError {
    fn from(e: ResonanceError) -> Self {
        Self::Numerical(e.to_string())
    }
}

impl From<GreenError> for RunError {
    fn from(e: GreenError) -> Self {
        match e {
            GreenError::NotExterior(_)
            | GreenError::InsideAperture { .. }
            | GreenError::Coincident(_)
            | GreenError::OutsideWindow { .. } => Self::Parameter(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

impl From<ImagingError> for RunError {
    fn from(e: ImagingError) -> Self {
        match e {
            ImagingError::Green(g) => g.into(),
            ImagingError::Parameter(_) => Self::Parameter(e.to_string()),
            _ => Self::Numerical(e.to_string()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunKind {
    Capacity,
    Resonances,
    Psf,
    Imaging,
    ValidateIntegrals,
    Sweep,
}

impl RunKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Capacity => "capacity",
            Self::Resonances => "resonances",
            Self::Psf => "psf",
            Self::Imaging => "imaging",
            Self::ValidateIntegrals => "validate-integrals",
            Self::Sweep => "sweep",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        [
            Self::Capacity,
            Self::Resonances,
            Self::Psf,
            Self::Imaging,
            Self::ValidateIntegrals,
            Self::Sweep,
        ]
        .into_iter()
        .find(|k| k.name() == s)
    }

    fn required(self) -> &'static [&'static str] {
        match self {
            Self::Capacity | Self::ValidateIntegrals => &[],
            Self::Resonances => &["epsilon", "centers"],
            Self::Psf | Self::Imaging => &["epsilon", "centers", "x0", "scan_start", "scan_end"],
            Self::Sweep => &["eps_list", "centers", "x0", "scan_start", "scan_end"],
        }
    }
}

pub const KNOWN_KEYS: &[&str] = &[
    "name",
    "kind",
    "out",
    "seed",
    "h",
    "epsilon",
    "centers",
    "alpha0",
    "re_alpha1",
    "capacity",
    "eps_max",
    "shape",
    "ellipse_a",
    "ellipse_b",
    "polygon",
    "resolution",
    "scan_start",
    "scan_end",
    "scan_points",
    "x0",
    "k",
    "t",
    "signal",
    "c1",
    "samples",
    "delta",
    "eps_list",
    "zeta_mode",
    "robust",
    "count",
];

/// Straight scan line sampled at `points` equispaced positions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ScanLine {
    pub start: [f64; 3],
    pub end: [f64; 3],
    pub points: usize,
}

impl ScanLine {
    /// Arc length from `start` of each sample.
    pub fn positions(&self) -> Vec<f64> {
        let len = crate::system::dist(self.start, self.end);
        (0..self.points)
            .map(|i| len * i as f64 / (self.points - 1) as f64)
            .collect()
    }

    pub fn samples(&self) -> Vec<[f64; 3]> {
        (0..self.points)
            .map(|i| {
                let u = i as f64 / (self.points - 1) as f64;
                std::array::from_fn(|d| self.start[d] + u * (self.end[d] - self.start[d]))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub kind: RunKind,
    pub system: Option<SystemConfig>,
    pub shape: ApertureShape,
    pub resolution: usize,
    pub scan: Option<ScanLine>,
    pub x0: Option<[f64; 3]>,
    /// PSF frequency; defaults to `tau1 sqrt(eps)`.
    pub k: Option<f64>,
    pub t: f64,
    pub signal: SignalKind,
    pub c1: f64,
    pub samples: usize,
    pub delta: f64,
    pub eps_list: Vec<f64>,
    pub zeta_mode: ZetaMode,
    /// Use the seeded `|C| = eps^2` residual model in imaging runs.
    pub robust: bool,
    pub seed: u64,
    /// Number of random specs for `validate-integrals`.
    pub count: usize,
    pub out: Option<PathBuf>,
}

fn scoped(kind: RunKind, e: ConfigError) -> ConfigError {
    let p = |k: String| format!("{}.{k}", kind.name());
    match e {
        ConfigError::Missing(k) => ConfigError::Missing(p(k)),
        ConfigError::Invalid { key, reason } => ConfigError::Invalid {
            key: p(key),
            reason,
        },
        ConfigError::Unknown(k) => ConfigError::Unknown(p(k)),
        other => other,
    }
}

fn point3(kv: &KeyValues, key: &str) -> Result<[f64; 3], ConfigError> {
    let pts = kv.points(key, 3)?;
    if pts.len() != 1 {
        return Err(ConfigError::invalid(key, "expected a single point"));
    }
    Ok([pts[0][0], pts[0][1], pts[0][2]])
}

impl Scenario {
    /// Reads a scenario. `kind` comes from the subcommand; a `kind` key in
    /// the file must agree with it (`sweep` is accepted under `imaging`).
    pub fn from_key_values(kv: &KeyValues, kind: RunKind) -> Result<Self, RunError> {
        let kind = match kv.get("kind") {
            None => kind,
            Some(s) => {
                let k = RunKind::parse(s).ok_or_else(|| {
                    ConfigError::invalid(
                        &format!("{}.kind", kind.name()),
                        format!("unknown run kind `{s}`"),
                    )
                })?;
                let compatible = k == kind || (kind == RunKind::Imaging && k == RunKind::Sweep);
                if !compatible {
                    return Err(ConfigError::invalid(
                        &format!("{}.kind", kind.name()),
                        format!(
                            "config declares `{s}` but the `{}` command was used",
                            kind.name()
                        ),
                    )
                    .into());
                }
                k
            }
        };
        Self::parse(kv, kind).map_err(|e| match e {
            RunError::Config(c) => RunError::Config(scoped(kind, c)),
            other => other,
        })
    }

    fn parse(kv: &KeyValues, kind: RunKind) -> Result<Self, RunError> {
        kv.check_known(KNOWN_KEYS)?;
        for key in kind.required() {
            if kv.get(key).is_none() {
                return Err(ConfigError::Missing(key.to_string()).into());
            }
        }
        let eps_list = kv.list_or("eps_list", &[])?;
        if eps_list.iter().any(|e| *e <= 0.0) {
            return Err(ConfigError::invalid("eps_list", "every epsilon must be positive").into());
        }
        if kind == RunKind::Sweep && eps_list.is_empty() {
            return Err(
                ConfigError::invalid("eps_list", "sweep needs at least one epsilon").into(),
            );
        }
        let system = match kind {
            RunKind::Capacity | RunKind::ValidateIntegrals => None,
            _ => {
                let mut kv = kv.clone();
                if kv.get("epsilon").is_none() {
                    kv.set("epsilon", eps_list[0].to_string());
                }
                let cfg = SystemConfig::from_config(&kv)?;
                build_system(&cfg)?;
                for e in &eps_list {
                    build_system(&SystemConfig {
                        epsilon: *e,
                        ..cfg.clone()
                    })?;
                }
                Some(cfg)
            }
        };
        let shape = match kv.str_or("shape", "unit_disk") {
            "unit_disk" => ApertureShape::UnitDisk,
            "ellipse" => ApertureShape::Ellipse {
                a: kv.f64("ellipse_a")?,
                b: kv.f64("ellipse_b")?,
            },
            "polygon" => ApertureShape::Polygon {
                vertices: kv
                    .points("polygon", 2)?
                    .into_iter()
                    .map(|p| [p[0], p[1]])
                    .collect(),
            },
            other => {
                return Err(ConfigError::invalid(
                    "shape",
                    format!("expected unit_disk, ellipse or polygon, got `{other}`"),
                )
                .into())
            }
        };
        let resolution = kv.usize_or("resolution", DEFAULT_RESOLUTION)?;
        if resolution < 4 {
            return Err(ConfigError::invalid("resolution", "must be at least 4").into());
        }
        let scan = match (kv.get("scan_start"), kv.get("scan_end")) {
            (Some(_), Some(_)) => {
                let points = kv.usize_or("scan_points", 41)?;
                if points < 3 {
                    return Err(ConfigError::invalid("scan_points", "must be at least 3").into());
                }
                let line = ScanLine {
                    start: point3(kv, "scan_start")?,
                    end: point3(kv, "scan_end")?,
                    points,
                };
                if line.start == line.end {
                    return Err(
                        ConfigError::invalid("scan_end", "scan line has zero length").into(),
                    );
                }
                Some(line)
            }
            (None, None) => None,
            (Some(_), None) => return Err(ConfigError::Missing("scan_end".into()).into()),
            (None, Some(_)) => return Err(ConfigError::Missing("scan_start".into()).into()),
        };
        let x0 = match kv.get("x0") {
            Some(_) => Some(point3(kv, "x0")?),
            None => None,
        };
        let k = match kv.get("k") {
            Some(_) => Some(kv.f64("k")?),
            None => None,
        };
        let sig_name = kv.str_or("signal", "smooth_bump");
        let signal = SignalKind::parse(sig_name).ok_or_else(|| {
            ConfigError::invalid("signal", format!("unknown signal `{sig_name}`"))
        })?;
        let zeta_mode = match kv.str_or("zeta_mode", "at_k") {
            "at_k" => ZetaMode::AtK,
            "frozen" => ZetaMode::Frozen,
            other => {
                return Err(ConfigError::invalid(
                    "zeta_mode",
                    format!("expected at_k or frozen, got `{other}`"),
                )
                .into())
            }
        };
        let c1 = kv.f64_or("c1", DEFAULT_C1)?;
        if c1 <= 0.0 {
            return Err(ConfigError::invalid("c1", "must be positive").into());
        }
        let delta = kv.f64_or("delta", DEFAULT_DELTA)?;
        if !(delta > 0.0 && delta < 0.5) {
            return Err(ConfigError::invalid("delta", "must lie in (0, 1/2)").into());
        }
        let count = kv.usize_or("count", 1000)?;
        if count == 0 {
            return Err(ConfigError::invalid("count", "must be positive").into());
        }
        Ok(Self {
            name: kv.str_or("name", kind.name()).to_string(),
            kind,
            system,
            shape,
            resolution,
            scan,
            x0,
            k,
            t: kv.f64_or("t", 0.0)?,
            signal,
            c1,
            samples: kv.usize_or("samples", DEFAULT_SAMPLES)?,
            delta,
            eps_list,
            zeta_mode,
            robust: kv.bool_or("robust", false)?,
            seed: kv.u64_or("seed", DEFAULT_SEED)?,
            count,
            out: kv.get("out").map(PathBuf::from),
        })
    }

    /// Defaults only; used by the kinds that need no system.
    pub fn defaults(kind: RunKind) -> Result<Self, RunError> {
        Self::from_key_values(&KeyValues::default(), kind)
    }
}

/// Collects output files in memory; written in one go at the end.
#[derive(Debug, Default)]
struct Outputs {
    files: Vec<(String, String)>,
}

impl Outputs {
    fn add(&mut self, name: impl Into<String>, body: String) {
        self.files.push((name.into(), body));
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), RunError> {
        let mut body =
            serde_json::to_string_pretty(value).map_err(|e| RunError::Numerical(e.to_string()))?;
        body.push('\n');
        self.add(name, body);
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ManifestEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub scenario: String,
    pub kind: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

fn io_err(path: &Path, e: std::io::Error) -> RunError {
    RunError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    }
}

/// Writes every file plus `manifest.json`; creates `dir` if needed.
fn write_outputs(
    dir: &Path,
    scenario: &str,
    kind: &str,
    seed: u64,
    out: Outputs,
) -> Result<Manifest, RunError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let mut files = out.files;
    files.sort_by(|a, b| a.0.cmp(&b.0));
    let mut entries = Vec::new();
    for (name, body) in &files {
        let path = dir.join(name);
        std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
        entries.push(ManifestEntry {
            file: name.clone(),
            sha256: hex::encode(Sha256::digest(body.as_bytes())),
            bytes: body.len(),
        });
    }
    let manifest = Manifest {
        scenario: scenario.to_string(),
        kind: kind.to_string(),
        seed,
        files: entries,
    };
    let path = dir.join("manifest.json");
    let mut body =
        serde_json::to_string_pretty(&manifest).map_err(|e| RunError::Numerical(e.to_string()))?;
    body.push('\n');
    std::fs::write(&path, body).map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Runs a scenario and writes its outputs to `dir`.
pub fn run_scenario(sc: &Scenario, dir: &Path) -> Result<Manifest, RunError> {
    let mut out = Outputs::default();
    match sc.kind {
        RunKind::Capacity => run_capacity(sc, &mut out)?,
        RunKind::Resonances => run_resonances(sc, &mut out)?,
        RunKind::Psf => run_psf(sc, &mut out)?,
        RunKind::Imaging | RunKind::Sweep => run_imaging(sc, &mut out)?,
        RunKind::ValidateIntegrals => run_integrals(sc, &mut out)?,
    }
    write_outputs(dir, &sc.name, sc.kind.name(), sc.seed, out)
}

#[derive(Serialize)]
struct CapacitySummary {
    scenario: String,
    aperture: ApertureShape,
    panels: usize,
    #[serde(flatten)]
    record: CapacityRecord,
    /// Closed-form value where one is known (unit disk).
    reference: Option<f64>,
}

fn run_capacity(sc: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let mesh = ApertureMesh::new(sc.shape.clone(), sc.resolution)?;
    let density = solve_equilibrium(&mesh)?;
    out.add("density.csv", density_csv(&mesh, &density));
    out.json(
        "capacity.json",
        &CapacitySummary {
            scenario: sc.name.clone(),
            aperture: sc.shape.clone(),
            panels: mesh.len(),
            record: capacity_record(&mesh, &density),
            reference: (sc.shape == ApertureShape::UnitDisk)
                .then_some(crate::system::DISK_CAPACITY),
        },
    )
}

fn system_of(sc: &Scenario) -> Result<ResonatorSystem, RunError> {
    let cfg = sc
        .system
        .as_ref()
        .ok_or_else(|| RunError::Parameter(format!("{} scenario has no system", sc.kind.name())))?;
    Ok(build_system(cfg)?)
}

#[derive(Serialize)]
struct ResonanceSummary {
    scenario: String,
    system: ResonatorSystem,
    spectral: SpectralJson,
    taus: Vec<TauCoefficients>,
    resonances: Vec<Resonance>,
    max_oracle_gap: f64,
    warnings: Vec<String>,
}

fn run_resonances(sc: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let system = system_of(sc)?;
    let spec = interaction_matrices(&system);
    let resonances = resonances_asymptotic(&system, &spec)?;
    let rows = resonance_table(&system, &spec)?;
    out.add("resonances.csv", resonance_csv(&rows));
    let mut warnings = spec.warnings();
    if rows.iter().any(|r| r.ambiguous) {
        warnings.push("some asymptotic/oracle pairings are not mutually nearest".into());
    }
    out.json(
        "resonances.json",
        &ResonanceSummary {
            scenario: sc.name.clone(),
            taus: tau_coefficients(&system, &spec),
            spectral: SpectralJson::from(&spec),
            system,
            resonances,
            max_oracle_gap: rows.iter().map(|r| r.gap).fold(0.0, f64::max),
            warnings,
        },
    )
}

fn scan_of(sc: &Scenario) -> Result<(&ScanLine, [f64; 3]), RunError> {
    let scan = sc
        .scan
        .as_ref()
        .ok_or_else(|| ConfigError::Missing(format!("{}.scan_start", sc.kind.name())))?;
    let x0 = sc
        .x0
        .ok_or_else(|| ConfigError::Missing(format!("{}.x0", sc.kind.name())))?;
    Ok((scan, x0))
}

/// Focal metrics of `values` after flipping the sign so the largest
/// magnitude is positive; `None` (with a note) if there is no interior peak.
fn signed_focus(
    pos: &[f64],
    values: &[f64],
    what: &str,
    warnings: &mut Vec<String>,
) -> Option<FocalMetrics> {
    let big = values
        .iter()
        .fold(0.0_f64, |m, v| if v.abs() > m.abs() { *v } else { m });
    let sign = if big < 0.0 { -1.0 } else { 1.0 };
    let prof: Vec<f64> = values.iter().map(|v| v * sign).collect();
    match focal_metrics(pos, &prof) {
        Ok(m) if m.fwhm.is_finite() => Some(m),
        Ok(_) => {
            warnings.push(format!("{what}: half-maximum not reached inside the scan"));
            None
        }
        Err(e) => {
            warnings.push(format!("{what}: {e}"));
            None
        }
    }
}

#[derive(Serialize)]
struct PsfSummary {
    scenario: String,
    k: f64,
    x0: [f64; 3],
    zeta_mode: ZetaMode,
    focus: Option<FocalMetrics>,
    near_pole_points: usize,
    warnings: Vec<String>,
}

fn run_psf(sc: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let system = system_of(sc)?;
    let spec = interaction_matrices(&system);
    let resonances = resonances_asymptotic(&system, &spec)?;
    let (scan, x0) = scan_of(sc)?;
    let x0 = FieldPoint::new(x0, &system)?;
    let k = sc.k.unwrap_or(system.tau1() * system.epsilon.sqrt());
    let model = GreenModel {
        zeta_mode: sc.zeta_mode,
        residual: vec![],
    };
    let at_resonance = sc.k.is_none();
    let mut warnings = spec.warnings();
    let mut body = String::from(
        "s,x1,x2,x3,re_g1,im_g1,re_g2,im_g2,re_g3,im_g3,re_g4,im_g4,re_total,im_total,near_pole,im_fixed_frequency\n",
    );
    let mut im_total = Vec::with_capacity(scan.points);
    let mut near = 0;
    let mut fixed_note = false;
    for (s, p) in scan.positions().into_iter().zip(scan.samples()) {
        let x = FieldPoint::new(p, &system)?;
        let g = perturbed_green(x, x0, k, &system, &spec, &resonances, &model)?;
        let fixed = if at_resonance {
            match im_green_fixed_frequency(x, x0, &system, &spec) {
                Ok(v) => fmt_f64(v),
                Err(e) => {
                    if !fixed_note {
                        warnings.push(format!("fixed-frequency estimate unavailable: {e}"));
                        fixed_note = true;
                    }
                    String::new()
                }
            }
        } else {
            String::new()
        };
        near += usize::from(!g.near_pole.is_empty());
        im_total.push(g.total.im);
        let cells: Vec<String> = [s, p[0], p[1], p[2]]
            .into_iter()
            .chain(
                [g.g1, g.g2, g.g3, g.g4, g.total]
                    .iter()
                    .flat_map(|z| [z.re, z.im]),
            )
            .map(fmt_f64)
            .collect();
        let _ = writeln!(body, "{},{},{}", cells.join(","), g.near_pole.len(), fixed);
    }
    if near > 0 {
        warnings.push(format!(
            "{near} scan points lie within 10 half-widths of a resonance"
        ));
    }
    let focus = signed_focus(&scan.positions(), &im_total, "Im G", &mut warnings);
    out.add("psf.csv", body);
    out.json(
        "psf.json",
        &PsfSummary {
            scenario: sc.name.clone(),
            k,
            x0: x0.0,
            zeta_mode: sc.zeta_mode,
            focus,
            near_pole_points: near,
            warnings,
        },
    )
}

#[derive(Serialize)]
struct EpsilonSummary {
    epsilon: f64,
    file: String,
    recording_time: f64,
    total_focus: Option<FocalMetrics>,
    resonator_focus: Option<FocalMetrics>,
    band_focus: Option<FocalMetrics>,
    quasi_stationary: QuasiStationaryReport,
    warnings: Vec<String>,
}

#[derive(Serialize)]
struct FwhmRatio {
    from_epsilon: f64,
    to_epsilon: f64,
    total: Option<f64>,
    resonator: Option<f64>,
    band: Option<f64>,
}

#[derive(Serialize)]
struct ImagingSummary {
    scenario: String,
    t: f64,
    signal: String,
    c1: f64,
    x0: [f64; 3],
    robust: bool,
    seed: u64,
    runs: Vec<EpsilonSummary>,
    fwhm_ratios: Vec<FwhmRatio>,
}

fn run_imaging(sc: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let base = system_of(sc)?;
    let (scan, x0p) = scan_of(sc)?;
    let eps_list = if sc.eps_list.is_empty() {
        vec![base.epsilon]
    } else {
        sc.eps_list.clone()
    };
    let root = make_root_signal(sc.signal.clone(), sc.c1, sc.samples)?;
    let pos = scan.positions();
    let pts = scan.samples();
    let opts = ImagingOptions {
        t: sc.t,
        ..ImagingOptions::default()
    };
    let mut runs = Vec::new();
    for eps in eps_list {
        let system = base.with_epsilon(eps)?;
        let spec = interaction_matrices(&system);
        let resonances = resonances_asymptotic(&system, &spec)?;
        let sig = root.clone().with_scale(eps, sc.delta)?;
        let model = if sc.robust {
            GreenModel::robust(&system, sc.seed)
        } else {
            GreenModel {
                zeta_mode: sc.zeta_mode,
                residual: vec![],
            }
        };
        let x0 = FieldPoint::new(x0p, &system)?;
        let rows = imaging_scan(&pts, x0, &sig, &system, &spec, &resonances, &model, &opts)?;
        let pred: Vec<f64> = pts
            .iter()
            .map(|p| {
                Ok(
                    theorem28_prediction(FieldPoint::new(*p, &system)?, x0, sc.t, &sig, &system)
                        .band,
                )
            })
            .collect::<Result<_, GreenError>>()?;
        let file = format!("imaging_eps_{}.csv", fmt_f64(eps));
        out.add(&file, imaging_csv(&pos, &rows, &pred));

        let mut warnings = spec.warnings();
        // the same message usually recurs along the scan; report it once
        let mut by_message: BTreeMap<&str, Vec<usize>> = BTreeMap::new();
        for (i, b) in rows.iter().enumerate() {
            for w in &b.warnings {
                by_message.entry(w).or_default().push(i);
            }
        }
        for (w, at) in by_message {
            if at.len() == rows.len() {
                warnings.push(format!("{w} (all scan points)"));
            } else {
                let list: Vec<String> = at.iter().map(|i| i.to_string()).collect();
                warnings.push(format!("{w} (scan points {})", list.join(", ")));
            }
        }
        let totals: Vec<f64> = rows.iter().map(|b| b.total).collect();
        let i3: Vec<f64> = rows.iter().map(|b| b.i3).collect();
        let i5_peak =
            rows.iter()
                .map(|b| b.i5)
                .fold(0.0_f64, |m, v| if v.abs() > m.abs() { v } else { m });
        let quasi = quasi_stationary_report(&sig, Some(i5_peak), QuasiThresholds::default());
        warnings.extend(quasi.warnings.iter().cloned());
        runs.push(EpsilonSummary {
            epsilon: eps,
            file,
            recording_time: recording_time(eps, 1.0)?,
            total_focus: signed_focus(&pos, &totals, "total", &mut warnings),
            resonator_focus: signed_focus(&pos, &i3, "resonator term I3", &mut warnings),
            band_focus: signed_focus(&pos, &pred, "band term", &mut warnings),
            quasi_stationary: quasi,
            warnings,
        });
    }
    let width = |f: &Option<FocalMetrics>| f.map(|m| m.fwhm);
    let ratio = |a: Option<f64>, b: Option<f64>| a.zip(b).map(|(a, b)| b / a);
    let fwhm_ratios = runs
        .windows(2)
        .map(|w| FwhmRatio {
            from_epsilon: w[0].epsilon,
            to_epsilon: w[1].epsilon,
            total: ratio(width(&w[0].total_focus), width(&w[1].total_focus)),
            resonator: ratio(width(&w[0].resonator_focus), width(&w[1].resonator_focus)),
            band: ratio(width(&w[0].band_focus), width(&w[1].band_focus)),
        })
        .collect();
    out.json(
        "summary.json",
        &ImagingSummary {
            scenario: sc.name.clone(),
            t: sc.t,
            signal: sc.signal.name().to_string(),
            c1: sc.c1,
            x0: x0p,
            robust: sc.robust,
            seed: sc.seed,
            runs,
            fwhm_ratios,
        },
    )
}

fn imaging_csv(pos: &[f64], rows: &[crate::imaging::ImagingBreakdown], band: &[f64]) -> String {
    let mut s = String::from("s,x1,x2,x3,i1,i2,i3,i4,i5,total,i1_band,band_term\n");
    for ((p, b), w) in pos.iter().zip(rows).zip(band) {
        let cells: Vec<String> = [
            *p, b.x[0], b.x[1], b.x[2], b.i1, b.i2, b.i3, b.i4, b.i5, b.total, b.i1_band, *w,
        ]
        .into_iter()
        .map(fmt_f64)
        .collect();
        let _ = writeln!(s, "{}", cells.join(","));
    }
    s
}

#[derive(Serialize)]
struct IntegralsSummary {
    scenario: String,
    count: usize,
    seed: u64,
    max_abs_error: f64,
    tolerance: f64,
}

/// Closed-form Lorentzian integrals against adaptive quadrature.
pub const INTEGRAL_TOLERANCE: f64 = 1e-10;

fn run_integrals(sc: &Scenario, out: &mut Outputs) -> Result<(), RunError> {
    let (rows, worst) = validation::lorentzian_table(sc.count, sc.seed);
    let body = crate::output::csv_table(
        &[
            "a1",
            "a2",
            "a",
            "b",
            "re_complex",
            "im_complex",
            "abs_im",
            "weighted",
            "max_abs_error",
        ],
        &rows.iter().map(|r| r.to_vec()).collect::<Vec<_>>(),
    );
    out.add("integrals.csv", body);
    out.json(
        "integrals.json",
        &IntegralsSummary {
            scenario: sc.name.clone(),
            count: sc.count,
            seed: sc.seed,
            max_abs_error: worst,
            tolerance: INTEGRAL_TOLERANCE,
        },
    )?;
    if worst > INTEGRAL_TOLERANCE {
        return Err(RunError::Numerical(format!(
            "closed forms differ from quadrature by {worst:e} > {INTEGRAL_TOLERANCE:e}"
        )));
    }
    Ok(())
}

#[derive(Serialize)]
struct ValidationSummary {
    seed: u64,
    passed: usize,
    failed: usize,
    criteria: Vec<CriterionReport>,
}

/// Runs the acceptance checks, writes their artifacts and a summary to
/// `dir`, and reports each criterion through `report` as it completes.
/// With `determinism` the suite runs a second time and the artifact bodies
/// are compared. Returns the reports; fails if any criterion failed.
pub fn validate(
    dir: &Path,
    seed: u64,
    determinism: bool,
    report: &mut dyn FnMut(&CriterionReport),
) -> Result<Vec<CriterionReport>, RunError> {
    let outcomes = validation::run_all(seed);
    let mut reports = Vec::new();
    let mut artifacts: Vec<Artifact> = Vec::new();
    for (r, a) in outcomes {
        report(&r);
        reports.push(r);
        artifacts.extend(a);
    }
    if determinism {
        let again: Vec<Artifact> = validation::run_all(seed)
            .into_iter()
            .flat_map(|(_, a)| a)
            .collect();
        let r = validation::criterion_11(&artifacts, &again);
        report(&r);
        reports.push(r);
    }
    let mut out = Outputs::default();
    for a in &artifacts {
        out.add(a.name.clone(), a.body.clone());
    }
    let failed = reports.iter().filter(|r| !r.passed).count();
    out.json(
        "validation.json",
        &ValidationSummary {
            seed,
            passed: reports.len() - failed,
            failed,
            criteria: reports.clone(),
        },
    )?;
    write_outputs(dir, "validate", "validate", seed, out)?;
    if failed > 0 {
        return Err(RunError::CriteriaFailed {
            failed,
            total: reports.len(),
        });
    }
    Ok(reports)
}
