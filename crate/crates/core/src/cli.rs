//! Command-line front end. Exit codes: 0 success, 1 failed check or
//! diverged run, 2 configuration error.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::evolution::run;
use crate::grid::{make_grid, Field};
use crate::io::{load_config, write_report_json, write_trajectory_csv, ReportExtras, RunConfig};
use crate::model::Trajectory;
use crate::monitors::{
    build_report, flux_time_derivative_norm, mixed_dissipation, weak_residual_family,
    EstimateReport,
};
use crate::stress::{lp_boundedness_probe, sigma_spectral_oracle, sigma_total, SigmaMethod};
use crate::studies::{
    b_sweep, fit_gronwall_rate, gronwall_envelope_holds, kappa_sweep, twin_stability, SweepResult,
};

#[derive(Debug, Parser)]
#[command(
    name = "gb-evolve",
    version,
    about = "Grain-boundary evolution simulator"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON run configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one trajectory and write its CSV and report.
    Simulate(Common),
    /// Run the configuration once per kappa value.
    SweepKappa {
        #[command(flatten)]
        common: Common,
        /// Strictly decreasing, comma separated.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
    },
    /// Run the configuration once per B value.
    SweepB {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<f64>,
        /// Append a degenerate member with B = kappa = 0.
        #[arg(long)]
        include_zero: bool,
    },
    /// Run once, build the estimate report and check its invariants.
    VerifyEstimates(Common),
    /// Compare a run with a perturbed copy of its initial datum.
    TwinStability {
        #[command(flatten)]
        common: Common,
        /// L2 size of the perturbation.
        #[arg(long, default_value_t = 1e-3)]
        delta: f64,
    },
    /// Cross-check the stress evaluators and probe L^p boundedness.
    HilbertTest {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 256)]
        image_terms: usize,
    },
}

enum Failure {
    Check(String),
    Config(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Check(e.to_string())
    }
}

type Outcome = std::result::Result<(), Failure>;

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    let result = match cli.command {
        Command::Simulate(c) => simulate(&c),
        Command::SweepKappa { common, values } => sweep(&common, &values, None),
        Command::SweepB {
            common,
            values,
            include_zero,
        } => sweep(&common, &values, Some(include_zero)),
        Command::VerifyEstimates(c) => verify_estimates(&c),
        Command::TwinStability { common, delta } => twin(&common, delta),
        Command::HilbertTest { n, image_terms } => hilbert_test(n, image_terms),
    };
    match result {
        Ok(()) => 0,
        Err(Failure::Check(msg)) => {
            eprintln!("error: {msg}");
            1
        }
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            2
        }
    }
}

struct Loaded {
    cfg: RunConfig,
    h0: Field,
    dir: PathBuf,
}

fn load(common: &Common) -> std::result::Result<Loaded, Failure> {
    let cfg = load_config(&common.config).map_err(|e| Failure::Config(e.to_string()))?;
    let h0 = cfg
        .initial_field()
        .map_err(|e| Failure::Config(format!("initial: {e}")))?;
    let base = common
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from(&cfg.output_dir));
    let dir = base.join(cfg.run_id());
    Ok(Loaded { cfg, h0, dir })
}

fn extras(traj: &Trajectory) -> ReportExtras {
    ReportExtras {
        mixed_dissipation: Some(mixed_dissipation(traj)),
        flux_time_derivative_norm: Some(flux_time_derivative_norm(traj)),
        weak_residual: weak_residual_family(traj, false).ok(),
    }
}

fn write_outputs(dir: &Path, traj: &Trajectory, cfg: &RunConfig) -> Result<EstimateReport> {
    let report = build_report(traj);
    write_trajectory_csv(traj, &dir.join("trajectory.csv"))?;
    write_report_json(&report, &extras(traj), cfg, &dir.join("report.json"))?;
    Ok(report)
}

/// Runs the configured simulation. A diverged run still writes its partial
/// trajectory before reporting failure.
fn run_and_write(loaded: &Loaded) -> std::result::Result<(Trajectory, EstimateReport), Failure> {
    let stepper = loaded.cfg.stepper()?;
    match run(&loaded.h0, &loaded.cfg.params(), &stepper) {
        Ok(traj) => {
            let report = write_outputs(&loaded.dir, &traj, &loaded.cfg)?;
            Ok((traj, report))
        }
        Err(Error::Diverged { t, reason, partial }) => {
            write_trajectory_csv(&partial, &loaded.dir.join("trajectory.csv"))?;
            Err(Failure::Check(format!(
                "run diverged at t = {t}: {reason}; partial trajectory in {}",
                loaded.dir.display()
            )))
        }
        Err(e @ (Error::Param(_) | Error::Config(_) | Error::Argument(_))) => {
            Err(Failure::Config(e.to_string()))
        }
        Err(e) => Err(e.into()),
    }
}

fn print_report(report: &EstimateReport) {
    for (name, v) in EstimateReport::FIELD_NAMES.iter().zip(report.fields()) {
        println!("{name:>14}  {v:.6e}");
    }
}

fn simulate(common: &Common) -> Outcome {
    let loaded = load(common)?;
    let (traj, report) = run_and_write(&loaded)?;
    let last = traj.last();
    println!(
        "t = {:.6}, {} snapshots, {} steps, h in [{:.6e}, {:.6e}]",
        last.t,
        traj.snapshots().len(),
        traj.dt_history().len(),
        last.h.min(),
        last.h.max()
    );
    print_report(&report);
    eprintln!("wrote {}", loaded.dir.display());
    Ok(())
}

#[derive(Serialize)]
struct SweepSummary<'a> {
    axis: &'a str,
    values: &'a [f64],
    members: Vec<String>,
    diverged: Vec<(f64, String)>,
    successive_l2q_gaps: &'a [f64],
    successive_hx_gaps: &'a [f64],
    successive_abs_gaps: &'a [f64],
    corner_metrics: &'a [f64],
    flux_time_norms: &'a [f64],
}

fn member_dir(axis: &str, value: f64) -> String {
    format!("{axis}-{value}")
}

fn sweep(common: &Common, values: &[f64], include_zero: Option<bool>) -> Outcome {
    let loaded = load(common)?;
    let stepper = loaded.cfg.stepper()?;
    let params = loaded.cfg.params();
    let (axis, result): (&str, Result<SweepResult>) = match include_zero {
        None => ("kappa", kappa_sweep(&loaded.h0, &params, &stepper, values)),
        Some(z) => ("cap_b", b_sweep(&loaded.h0, &params, &stepper, values, z)),
    };
    let sweep = result.map_err(|e| Failure::Config(e.to_string()))?;
    let dir = loaded.dir.join(if include_zero.is_some() {
        "sweep-b"
    } else {
        "sweep-kappa"
    });

    let mut names = Vec::new();
    for m in &sweep.members {
        let name = member_dir(axis, m.value);
        if let Some(traj) = m.trajectory() {
            let mut cfg = loaded.cfg.clone();
            cfg.cap_b = m.params.cap_b;
            cfg.kappa = m.params.kappa;
            if cfg.kappa == 0.0
                && cfg.sigma_method == "kappa_truncated"
                && cfg.truncation_eps.is_none()
            {
                cfg.sigma_method = "direct_pv".into();
            }
            write_outputs(&dir.join(&name), traj, &cfg)?;
        }
        names.push(name);
    }
    let diverged: Vec<(f64, String)> = sweep.diverged().map(|(v, e)| (v, e.to_string())).collect();
    let summary = SweepSummary {
        axis,
        values: &sweep.values,
        members: names,
        diverged: diverged.clone(),
        successive_l2q_gaps: &sweep.successive_l2q_gaps,
        successive_hx_gaps: &sweep.successive_hx_gaps,
        successive_abs_gaps: &sweep.successive_abs_gaps,
        corner_metrics: &sweep.corner_metrics,
        flux_time_norms: &sweep.flux_time_norms,
    };
    let path = dir.join("sweep.json");
    let mut text = serde_json::to_string_pretty(&summary).expect("summary serializes");
    text.push('\n');
    fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;

    println!("{axis:>8}  {:>12}  {:>12}", "corner", "gap to next");
    for (i, v) in sweep.values.iter().enumerate() {
        let gap = sweep
            .successive_l2q_gaps
            .get(i)
            .map_or(String::from("-"), |g| format!("{g:.4e}"));
        println!("{v:>8}  {:>12.4e}  {gap:>12}", sweep.corner_metrics[i]);
    }
    eprintln!("wrote {}", dir.display());
    if diverged.is_empty() {
        Ok(())
    } else {
        let list: Vec<String> = diverged
            .iter()
            .map(|(v, e)| format!("{axis}={v}: {e}"))
            .collect();
        Err(Failure::Check(format!(
            "diverged members: {}",
            list.join("; ")
        )))
    }
}

fn verify_estimates(common: &Common) -> Outcome {
    let loaded = load(common)?;
    let (traj, report) = run_and_write(&loaded)?;
    let mixed = mixed_dissipation(&traj);
    let residual = weak_residual_family(&traj, false)?;
    let checks = [
        (
            "report fields finite and nonnegative",
            report.all_finite_nonnegative(),
        ),
        (
            "dissipation dominates half the cubic gradient integral",
            mixed >= 0.5 * report.int_l3_hx * (1.0 - 1e-12),
        ),
        ("weak residual finite", residual.is_finite()),
        (
            "reached t_end",
            (traj.final_time() - loaded.cfg.t_end).abs() <= 1e-12 * loaded.cfg.t_end.max(1.0),
        ),
    ];
    print_report(&report);
    println!("{:>14}  {mixed:.6e}", "mixed_dissip");
    println!("{:>14}  {residual:.6e}", "weak_residual");
    let mut ok = true;
    for (name, pass) in checks {
        println!("[{}] {name}", if pass { "PASS" } else { "FAIL" });
        ok &= pass;
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("estimate checks failed".into()))
    }
}

fn twin(common: &Common, delta: f64) -> Outcome {
    if !(delta > 0.0) || !delta.is_finite() {
        return Err(Failure::Config(format!(
            "delta must be positive, got {delta}"
        )));
    }
    let loaded = load(common)?;
    let grid = *loaded.h0.grid();
    let bump = Field::from_fn(grid, |x| {
        let s = 2.0 * PI * (x - grid.a()) / grid.length();
        (3.0 * s).cos() + 0.5 * (5.0 * s).sin()
    })?;
    let norm = (bump.values().iter().map(|v| v * v).sum::<f64>() * grid.dx()).sqrt();
    let perturbed = loaded.h0.axpy(delta / norm, &bump)?;
    let gaps = twin_stability(
        &loaded.h0,
        &perturbed,
        &loaded.cfg.params(),
        &loaded.cfg.stepper()?,
    )
    .map_err(|e| match e {
        Error::Argument(m) => Failure::Config(m),
        e => e.into(),
    })?;
    let t_end = gaps.last().map_or(0.0, |g| g.0);
    let rate = fit_gronwall_rate(&gaps, delta, 0.5 * t_end);
    let holds = gronwall_envelope_holds(&gaps, delta, rate, 0.5 * t_end);

    let mut csv = String::from("t,gap\n");
    for (t, g) in &gaps {
        csv.push_str(&format!("{t:.16e},{g:.16e}\n"));
    }
    fs::create_dir_all(&loaded.dir).map_err(|e| Error::io(&loaded.dir, e))?;
    let path = loaded.dir.join("twin.csv");
    fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;

    println!("delta = {delta:e}, fitted rate C = {rate:.4}");
    println!(
        "final gap {:.4e}, envelope {:.4e}",
        gaps.last().map_or(f64::NAN, |g| g.1),
        delta * (rate * t_end).exp()
    );
    println!(
        "[{}] envelope fitted on the first half holds on the second",
        if holds { "PASS" } else { "FAIL" }
    );
    if holds {
        Ok(())
    } else {
        Err(Failure::Check("Gronwall envelope violated".into()))
    }
}

fn hilbert_test(n: usize, image_terms: usize) -> Outcome {
    let grid = make_grid(0.0, 2.0 * PI, n).map_err(|e| Failure::Config(e.to_string()))?;
    let params = crate::model::ModelParams {
        image_terms,
        ..Default::default()
    };
    let hx = Field::from_fn(grid, f64::cos)?;
    let want = Field::from_fn(grid, |x| PI * x.sin())?;
    let mut ok = true;

    println!("cos(x) -> pi sin(x), n = {n}, image_terms = {image_terms}");
    println!("{:>16}  {:>12}  {:>10}", "method", "max error", "tolerance");
    let cases = [
        (SigmaMethod::DirectPv, 1e-2),
        (SigmaMethod::SpectralOracle, 1e-12),
    ];
    for (method, tol) in cases {
        let s = match method {
            SigmaMethod::SpectralOracle => sigma_spectral_oracle(&hx, params.kbeta),
            m => sigma_total(&hx, &params, m)?,
        };
        let err = s.sub(&want)?.max_abs();
        let pass = err <= tol;
        ok &= pass;
        println!(
            "{:>16}  {err:>12.4e}  {tol:>10.0e}  {}",
            method.name(),
            if pass { "PASS" } else { "FAIL" }
        );
    }

    let square = Field::from_fn(grid, |x| if x < PI { 1.0 } else { -1.0 })?;
    let eps: Vec<f64> = (0..8).map(|k| 0.5 / 2f64.powi(k)).collect();
    println!();
    println!("truncated operator on a square wave, eps = 0.5 / 2^k, k = 0..7");
    println!(
        "{:>6}  {:>10}  {:>10}  {:>8}",
        "p", "min ratio", "max ratio", "spread"
    );
    for p in [4.0 / 3.0, 2.0, 3.0] {
        let probe = lp_boundedness_probe(&square, p, &eps, None)?;
        let pass = probe.spread() <= 4.0;
        ok &= pass;
        println!(
            "{p:>6.3}  {:>10.4}  {:>10.4}  {:>8.4}  {}",
            probe.min_ratio(),
            probe.max_ratio(),
            probe.spread(),
            if pass { "PASS" } else { "FAIL" }
        );
    }
    if ok {
        Ok(())
    } else {
        Err(Failure::Check("stress cross-checks failed".into()))
    }
}
