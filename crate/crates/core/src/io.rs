//! Run configuration (JSON), trajectory data (CSV) and estimate reports
//! (JSON).
//!
//! CSV layout, version 1:
//!
//! ```text
//! # gb-evolve trajectory v1
//! t,x,h
//! 0.0000000000000000e0,0.0000000000000000e0,1.0000000000000000e0
//! ...
//! ```
//!
//! Rows are time-major, then `x` ascending. Numbers carry 17 significant
//! digits so values round-trip bit-exactly. Lines starting with `#` are
//! comments.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{Scheme, StabilityPolicy, StepperConfig};
use crate::grid::{Field, Grid};
use crate::initial::{fourier_smooth, Preset};
use crate::model::{ModelParams, Snapshot, Trajectory};
use crate::monitors::EstimateReport;
use crate::stress::SigmaMethod;

pub const CSV_SCHEMA_LINE: &str = "# gb-evolve trajectory v1";
pub const CSV_HEADER: &str = "t,x,h";
pub const REPORT_SCHEMA: &str = "gb-evolve.report";
pub const REPORT_SCHEMA_VERSION: u32 = 1;
/// Fourier multiplier of the `H^{-2}` norm, recorded in every report.
pub const H_MINUS2_MULTIPLIER: &str = "(1+|xi|^2)^-1";

fn default_kbeta() -> f64 {
    1.0
}
fn default_image_terms() -> usize {
    64
}
fn default_dominance() -> f64 {
    ModelParams::DEFAULT_DOMINANCE
}
fn default_a() -> f64 {
    0.0
}
fn default_d() -> f64 {
    2.0 * std::f64::consts::PI
}
fn default_n() -> usize {
    128
}
fn default_scheme() -> Scheme {
    Scheme::SemiImplicit
}
fn default_dt_init() -> f64 {
    StepperConfig::default().dt_init
}
fn default_dt_min() -> f64 {
    StepperConfig::default().dt_min
}
fn default_dt_max() -> f64 {
    StepperConfig::default().dt_max
}
fn default_cfl() -> f64 {
    StepperConfig::default().cfl_safety
}
fn default_t_end() -> f64 {
    1.0
}
fn default_stride() -> usize {
    1
}
fn default_sigma() -> String {
    "direct_pv".into()
}
fn default_initial() -> String {
    "sine".into()
}
fn default_output_dir() -> String {
    "out".into()
}

/// Everything needed to reproduce one run. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
    pub cap_b: f64,
    pub kappa: f64,
    #[serde(default = "default_kbeta")]
    pub kbeta: f64,
    #[serde(default = "default_image_terms")]
    pub image_terms: usize,
    #[serde(default = "default_dominance")]
    pub dominance_factor: f64,

    #[serde(default = "default_a")]
    pub a: f64,
    #[serde(default = "default_d")]
    pub d: f64,
    #[serde(default = "default_n")]
    pub n: usize,

    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
    #[serde(default = "default_dt_init")]
    pub dt_init: f64,
    #[serde(default = "default_dt_min")]
    pub dt_min: f64,
    #[serde(default = "default_dt_max")]
    pub dt_max: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default = "default_t_end")]
    pub t_end: f64,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
    /// `direct_pv`, `kappa_truncated` or `spectral_oracle`.
    #[serde(default = "default_sigma")]
    pub sigma_method: String,
    /// Decouples the truncation radius from `kappa`.
    #[serde(default)]
    pub truncation_eps: Option<f64>,
    #[serde(default)]
    pub stability_policy: StabilityPolicy,
    #[serde(default)]
    pub force: bool,

    /// Preset name (`constant`, `sine`, `multi_mode`, `flat_bump`) or a path
    /// to an `x,h` CSV file.
    #[serde(default = "default_initial")]
    pub initial: String,
    /// Optional Fourier cutoff applied to the initial datum.
    #[serde(default)]
    pub smoothing_modes: Option<usize>,
    #[serde(default = "default_output_dir")]
    pub output_dir: String,
    /// Defaults to a hash of the physical configuration.
    #[serde(default)]
    pub run_id: Option<String>,
}

impl RunConfig {
    pub fn params(&self) -> ModelParams {
        ModelParams {
            alpha1: self.alpha1,
            alpha2: self.alpha2,
            alpha3: self.alpha3,
            cap_b: self.cap_b,
            kappa: self.kappa,
            kbeta: self.kbeta,
            image_terms: self.image_terms,
            dominance_factor: self.dominance_factor,
        }
    }

    pub fn grid(&self) -> Result<Grid> {
        Grid::new(self.a, self.d, self.n)
    }

    pub fn sigma(&self) -> Result<SigmaMethod> {
        match self.sigma_method.as_str() {
            "direct_pv" => Ok(SigmaMethod::DirectPv),
            "kappa_truncated" => Ok(SigmaMethod::KappaTruncated {
                eps: self.truncation_eps,
            }),
            "spectral_oracle" => Ok(SigmaMethod::SpectralOracle),
            other => Err(Error::Config(format!(
                "sigma_method: unknown method {other:?}"
            ))),
        }
    }

    pub fn stepper(&self) -> Result<StepperConfig> {
        Ok(StepperConfig {
            scheme: self.scheme,
            dt_init: self.dt_init,
            dt_min: self.dt_min,
            dt_max: self.dt_max,
            cfl_safety: self.cfl_safety,
            t_end: self.t_end,
            snapshot_stride: self.snapshot_stride,
            sigma_method: self.sigma()?,
            stability_policy: self.stability_policy,
            force: self.force,
        })
    }

    pub fn validate(&self) -> Result<()> {
        let cfg = |e: Error| Error::Config(e.to_string());
        self.params().validate().map_err(cfg)?;
        self.grid().map_err(cfg)?;
        let stepper = self.stepper()?;
        stepper.validate().map_err(cfg)?;
        stepper
            .sigma_method
            .truncation_eps(&self.params())
            .map_err(|e| Error::Config(format!("sigma_method: {e}")))?;
        if let Some(m) = self.smoothing_modes {
            if m == 0 || m >= self.n / 2 {
                return Err(Error::Config(format!(
                    "smoothing_modes must lie in 1..{}",
                    self.n / 2
                )));
            }
        }
        if self.initial.is_empty() {
            return Err(Error::Config("initial must not be empty".into()));
        }
        Ok(())
    }

    pub fn initial_field(&self) -> Result<Field> {
        let grid = self.grid()?;
        let h0 = match Preset::from_name(&self.initial) {
            Some(p) => p.sample(&grid)?,
            None => read_profile_csv(Path::new(&self.initial), &grid)?,
        };
        match self.smoothing_modes {
            Some(m) => fourier_smooth(&h0, m),
            None => Ok(h0),
        }
    }

    /// The explicit `run_id`, or an FNV-1a hash of every field except
    /// `run_id` and `output_dir`.
    pub fn run_id(&self) -> String {
        if let Some(id) = &self.run_id {
            return id.clone();
        }
        let mut key = self.clone();
        key.run_id = None;
        key.output_dir = String::new();
        let text = serde_json::to_string(&key).expect("config serializes");
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for b in text.bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        format!("run-{h:016x}")
    }
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg: RunConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
    cfg.validate()?;
    Ok(cfg)
}

pub fn load_config(path: &Path) -> Result<RunConfig> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text)
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_snapshots_csv(grid: &Grid, snapshots: &[Snapshot], path: &Path) -> Result<()> {
    let mut out = String::with_capacity(64 * (1 + snapshots.len() * grid.n()));
    out.push_str(CSV_SCHEMA_LINE);
    out.push('\n');
    out.push_str(CSV_HEADER);
    out.push('\n');
    let xs = grid.points();
    for snap in snapshots {
        for (x, h) in xs.iter().zip(snap.h.values()) {
            writeln!(out, "{:.16e},{:.16e},{:.16e}", snap.t, x, h).expect("string write");
        }
    }
    write_file(path, &out)
}

pub fn write_trajectory_csv(traj: &Trajectory, path: &Path) -> Result<()> {
    write_snapshots_csv(traj.grid(), traj.snapshots(), path)
}

fn data_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
}

fn parse_row<const N: usize>(path: &Path, line: usize, text: &str) -> Result<[f64; N]> {
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg: format!("line {line}: {msg}"),
    };
    let mut out = [0.0; N];
    let mut parts = text.split(',');
    for slot in out.iter_mut() {
        let s = parts
            .next()
            .ok_or_else(|| bad(format!("expected {N} columns")))?;
        *slot = s
            .trim()
            .parse()
            .map_err(|_| bad(format!("not a number: {s:?}")))?;
    }
    if parts.next().is_some() {
        return Err(bad(format!("expected {N} columns")));
    }
    Ok(out)
}

/// Reads a trajectory CSV written for `grid`.
pub fn read_trajectory_csv(path: &Path, grid: &Grid) -> Result<Vec<Snapshot>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut lines = data_lines(&text);
    match lines.next() {
        Some((_, h)) if h == CSV_HEADER => {}
        _ => return Err(bad(format!("missing header {CSV_HEADER:?}"))),
    }
    let xs = grid.points();
    let n = grid.n();
    let mut snapshots = Vec::new();
    let mut current: Vec<f64> = Vec::with_capacity(n);
    let mut t_cur = f64::NAN;
    for (line, row) in lines {
        let [t, x, h] = parse_row::<3>(path, line, row)?;
        if current.is_empty() {
            t_cur = t;
        } else if t != t_cur {
            return Err(bad(format!(
                "line {line}: snapshot at t = {t_cur} is incomplete"
            )));
        }
        if x != xs[current.len()] {
            return Err(bad(format!("line {line}: x = {x} does not match the grid")));
        }
        current.push(h);
        if current.len() == n {
            let values = std::mem::replace(&mut current, Vec::with_capacity(n));
            snapshots.push(Snapshot {
                t: t_cur,
                h: Field::new(*grid, values)?,
            });
        }
    }
    if !current.is_empty() {
        return Err(bad(format!("trailing partial snapshot at t = {t_cur}")));
    }
    Ok(snapshots)
}

/// Reads an initial profile from an `x,h` CSV matching the grid.
pub fn read_profile_csv(path: &Path, grid: &Grid) -> Result<Field> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = data_lines(&text);
    match lines.next() {
        Some((_, "x,h")) => {}
        _ => {
            return Err(Error::Format {
                path: path.to_path_buf(),
                msg: "missing header \"x,h\"".into(),
            })
        }
    }
    let values = lines
        .map(|(line, row)| parse_row::<2>(path, line, row).map(|[_, h]| h))
        .collect::<Result<Vec<f64>>>()?;
    Field::new(*grid, values)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub a: f64,
    pub d: f64,
    pub n: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportMeta {
    pub run_id: String,
    pub code_version: String,
    pub params: ModelParams,
    pub grid: GridMeta,
    pub scheme: Scheme,
    pub sigma_method: String,
    pub truncation_eps: Option<f64>,
    pub t_end: f64,
    pub initial: String,
    pub h_minus2_multiplier: String,
}

/// Additional per-run diagnostics stored next to the estimate fields.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ReportExtras {
    pub mixed_dissipation: Option<f64>,
    pub flux_time_derivative_norm: Option<f64>,
    pub weak_residual: Option<f64>,
}

/// The JSON document written by [`write_report_json`]. Field order is the
/// key order in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportDocument {
    pub schema: String,
    pub schema_version: u32,
    pub report: EstimateReport,
    pub extras: ReportExtras,
    pub meta: ReportMeta,
    /// Seconds since the Unix epoch; the only non-reproducible key.
    pub timestamp: u64,
}

impl ReportDocument {
    pub fn new(report: EstimateReport, extras: ReportExtras, cfg: &RunConfig) -> Self {
        let timestamp = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map_or(0, |d| d.as_secs());
        Self {
            schema: REPORT_SCHEMA.into(),
            schema_version: REPORT_SCHEMA_VERSION,
            report,
            extras,
            meta: ReportMeta {
                run_id: cfg.run_id(),
                code_version: env!("CARGO_PKG_VERSION").into(),
                params: cfg.params(),
                grid: GridMeta {
                    a: cfg.a,
                    d: cfg.d,
                    n: cfg.n,
                },
                scheme: cfg.scheme,
                sigma_method: cfg.sigma_method.clone(),
                truncation_eps: cfg.truncation_eps,
                t_end: cfg.t_end,
                initial: cfg.initial.clone(),
                h_minus2_multiplier: H_MINUS2_MULTIPLIER.into(),
            },
            timestamp,
        }
    }
}

pub fn write_report_json(
    report: &EstimateReport,
    extras: &ReportExtras,
    meta: &RunConfig,
    path: &Path,
) -> Result<()> {
    let doc = ReportDocument::new(*report, *extras, meta);
    let mut text = serde_json::to_string_pretty(&doc).expect("report serializes");
    text.push('\n');
    write_file(path, &text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::make_grid;

    const MINIMAL: &str =
        r#"{"alpha1": 1.0, "alpha2": 0.0, "alpha3": 1.0, "cap_b": 0.5, "kappa": 0.0}"#;

    #[test]
    fn minimal_config_gets_defaults() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.n, 128);
        assert_eq!(c.scheme, Scheme::SemiImplicit);
        assert_eq!(c.stepper().unwrap().sigma_method, SigmaMethod::DirectPv);
        assert_eq!(c.initial, "sine");
        assert_eq!(c.run_id(), parse_config(MINIMAL).unwrap().run_id());
    }

    #[test]
    fn negative_alpha1_names_the_field() {
        let text = MINIMAL.replace("\"alpha1\": 1.0", "\"alpha1\": -1");
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.contains("alpha1 must be positive"), "{e}");
    }

    #[test]
    fn unknown_key_is_an_error() {
        let text = MINIMAL.replace("\"alpha1\"", "\"aplha1\"");
        let e = parse_config(&text).unwrap_err().to_string();
        assert!(e.contains("unknown field") && e.contains("aplha1"), "{e}");
    }

    #[test]
    fn syntax_error_reports_position() {
        let e = parse_config("{\n  \"alpha1\": 1.0,\n  oops\n}")
            .unwrap_err()
            .to_string();
        assert!(e.contains("line 3"), "{e}");
    }

    #[test]
    fn truncated_method_needs_a_radius() {
        let text = MINIMAL.replace('}', ", \"sigma_method\": \"kappa_truncated\"}");
        assert!(parse_config(&text).is_err());
        let text = MINIMAL.replace(
            '}',
            ", \"sigma_method\": \"kappa_truncated\", \"truncation_eps\": 0.1}",
        );
        assert!(parse_config(&text).is_ok());
        let text = MINIMAL.replace('}', ", \"sigma_method\": \"fmm\"}");
        assert!(parse_config(&text).is_err());
    }

    #[test]
    fn csv_layout_and_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let h = Field::from_fn(g, |x| (7.0 * x).sin() / 3.0).unwrap();
        let snaps = vec![
            Snapshot {
                t: 0.0,
                h: h.clone(),
            },
            Snapshot {
                t: 0.1,
                h: h.scale(std::f64::consts::E),
            },
        ];
        let path = dir.path().join("traj.csv");
        write_snapshots_csv(&g, &snaps, &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], CSV_SCHEMA_LINE);
        assert_eq!(lines[1], CSV_HEADER);
        assert_eq!(lines.len(), 2 + 16);
        let back = read_trajectory_csv(&path, &g).unwrap();
        assert_eq!(back, snaps);
    }

    #[test]
    fn empty_snapshot_list_is_header_only() {
        let dir = tempfile::tempdir().unwrap();
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let path = dir.path().join("empty.csv");
        write_snapshots_csv(&g, &[], &path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(data_lines(&text).count(), 1);
        assert!(read_trajectory_csv(&path, &g).unwrap().is_empty());
    }

    #[test]
    fn write_to_missing_location_names_the_path() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        fs::write(&blocker, "x").unwrap();
        let g = make_grid(0.0, 1.0, 8).unwrap();
        let e = write_snapshots_csv(&g, &[], &blocker.join("sub/traj.csv")).unwrap_err();
        assert!(e.to_string().contains("file"), "{e}");
    }
}
