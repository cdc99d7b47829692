//! Parameter sweeps toward the two singular limits (`kappa -> 0`,
//! `B -> 0`) and twin runs for stability with respect to initial data.
//!
//! Sweep members are independent simulations and run concurrently; a member
//! that diverges is recorded with its diagnostic instead of aborting the
//! sweep.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolution::{run, StepperConfig};
use crate::grid::{derivative_x, Field};
use crate::model::{ModelParams, Trajectory};
use crate::monitors::{build_report, flux_time_derivative_norm, EstimateReport};
use crate::regularization::RegAbs;
use crate::stress::SigmaMethod;

/// Environment variable capping sweep parallelism.
pub const THREADS_ENV: &str = "GB_EVOLVE_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Kappa,
    CapB,
}

#[derive(Debug, Clone)]
pub struct SweepMember {
    pub value: f64,
    pub params: ModelParams,
    pub outcome: std::result::Result<Trajectory, String>,
}

impl SweepMember {
    pub fn trajectory(&self) -> Option<&Trajectory> {
        self.outcome.as_ref().ok()
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
    pub members: Vec<SweepMember>,
    /// `||h_p - h_next||_{L^2(Q)}` between consecutive levels; NaN where a
    /// member diverged.
    pub successive_l2q_gaps: Vec<f64>,
    /// Same for `h_x`.
    pub successive_hx_gaps: Vec<f64>,
    /// Same for `|h_x|_kappa` evaluated at each member's own `kappa`.
    pub successive_abs_gaps: Vec<f64>,
    pub reports: Vec<Option<EstimateReport>>,
    pub corner_metrics: Vec<f64>,
    pub flux_time_norms: Vec<f64>,
}

impl SweepResult {
    pub fn diverged(&self) -> impl Iterator<Item = (f64, &str)> {
        self.members
            .iter()
            .filter_map(|m| m.outcome.as_ref().err().map(|e| (m.value, e.as_str())))
    }

    /// Largest over smallest value of one report field across members.
    pub fn report_spread(&self, field: usize) -> f64 {
        let vals: Vec<f64> = self
            .reports
            .iter()
            .map(|r| r.map_or(f64::NAN, |r| r.fields()[field]))
            .collect();
        let max = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = vals.iter().copied().fold(f64::INFINITY, f64::min);
        if vals.iter().any(|v| v.is_nan()) {
            f64::NAN
        } else if max == 0.0 {
            1.0
        } else {
            max / min
        }
    }
}

/// Thread pool sized by [`THREADS_ENV`], or the number of processors.
pub fn sweep_pool() -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Ok(v) = std::env::var(THREADS_ENV) {
        let n: usize = v
            .trim()
            .parse()
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer")))?;
        if n == 0 {
            return Err(Error::Config(format!("{THREADS_ENV} must be positive")));
        }
        b = b.num_threads(n);
    }
    b.build().map_err(|e| Error::Config(e.to_string()))
}

fn run_members(
    h0: &Field,
    members: Vec<(f64, ModelParams, StepperConfig)>,
) -> Result<Vec<SweepMember>> {
    let pool = sweep_pool()?;
    Ok(pool.install(|| {
        members
            .into_par_iter()
            .map(|(value, params, cfg)| SweepMember {
                value,
                params,
                outcome: run(h0, &params, &cfg).map_err(|e| e.to_string()),
            })
            .collect()
    }))
}

/// `||obs(a) - obs(b)||_{L^2(Q)}` on the coarser of the two snapshot
/// lattices, interpolating the finer trajectory linearly in time.
pub fn l2q_gap_with(
    a: &Trajectory,
    b: &Trajectory,
    obs: impl Fn(&Field, &ModelParams) -> Field,
) -> Result<f64> {
    if a.grid() != b.grid() {
        return Err(Error::GridMismatch);
    }
    let (coarse, fine) = if a.snapshots().len() <= b.snapshots().len() {
        (a, b)
    } else {
        (b, a)
    };
    let t_max = coarse.final_time().min(fine.final_time());
    let times: Vec<f64> = coarse.times().into_iter().filter(|&t| t <= t_max).collect();
    let mut sq = Vec::with_capacity(times.len());
    for &t in &times {
        let fa = obs(&coarse.sample(t)?, coarse.params());
        let fb = obs(&fine.sample(t)?, fine.params());
        let d = fa.sub(&fb)?;
        sq.push(d.values().iter().map(|v| v * v).sum::<f64>() * d.grid().dx());
    }
    let integral: f64 = times
        .windows(2)
        .zip(sq.windows(2))
        .map(|(t, s)| 0.5 * (t[1] - t[0]) * (s[0] + s[1]))
        .sum();
    Ok(integral.sqrt())
}

pub fn l2q_gap(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    l2q_gap_with(a, b, |h, _| h.clone())
}

fn hx_obs(h: &Field, _: &ModelParams) -> Field {
    derivative_x(h)
}

fn abs_obs(h: &Field, p: &ModelParams) -> Field {
    let reg = RegAbs::new(p.kappa).expect("validated kappa");
    derivative_x(h).map(|q| reg.abs(q))
}

fn successive(
    members: &[SweepMember],
    obs: impl Fn(&Field, &ModelParams) -> Field + Copy,
) -> Vec<f64> {
    members
        .windows(2)
        .map(|w| match (w[0].trajectory(), w[1].trajectory()) {
            (Some(a), Some(b)) => l2q_gap_with(a, b, obs).unwrap_or(f64::NAN),
            _ => f64::NAN,
        })
        .collect()
}

fn check_decreasing_positive(values: &[f64], what: &str) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Argument(format!("{what} list is empty")));
    }
    if values.iter().any(|&v| !(v > 0.0)) {
        return Err(Error::Argument(format!("{what} values must be positive")));
    }
    if values.windows(2).any(|w| !(w[1] < w[0])) {
        return Err(Error::Argument(format!(
            "{what} values must be strictly decreasing"
        )));
    }
    Ok(())
}

fn assemble(axis: SweepAxis, values: Vec<f64>, members: Vec<SweepMember>) -> SweepResult {
    let reports: Vec<Option<EstimateReport>> = members
        .iter()
        .map(|m| m.trajectory().map(build_report))
        .collect();
    SweepResult {
        axis,
        successive_l2q_gaps: successive(&members, |h, _| h.clone()),
        successive_hx_gaps: successive(&members, hx_obs),
        successive_abs_gaps: successive(&members, abs_obs),
        corner_metrics: reports
            .iter()
            .map(|r| r.map_or(f64::NAN, |r| r.corner_metric))
            .collect(),
        flux_time_norms: members
            .iter()
            .map(|m| m.trajectory().map_or(f64::NAN, flux_time_derivative_norm))
            .collect(),
        reports,
        values,
        members,
    }
}

/// Runs one simulation per `kappa` (strictly decreasing, positive) with all
/// other settings shared.
pub fn kappa_sweep(
    h0: &Field,
    base: &ModelParams,
    cfg: &StepperConfig,
    kappas: &[f64],
) -> Result<SweepResult> {
    check_decreasing_positive(kappas, "kappa")?;
    let members = kappas
        .iter()
        .map(|&k| (k, base.with_kappa(k), *cfg))
        .collect();
    let members = run_members(h0, members)?;
    Ok(assemble(SweepAxis::Kappa, kappas.to_vec(), members))
}

/// Runs one simulation per `B` (strictly decreasing, positive). With
/// `include_zero` a final degenerate member with `B = kappa = 0` is added;
/// a shared kappa truncation falls back to the direct principal value there.
pub fn b_sweep(
    h0: &Field,
    base: &ModelParams,
    cfg: &StepperConfig,
    bs: &[f64],
    include_zero: bool,
) -> Result<SweepResult> {
    check_decreasing_positive(bs, "B")?;
    let mut values = bs.to_vec();
    let mut members: Vec<(f64, ModelParams, StepperConfig)> =
        bs.iter().map(|&b| (b, base.with_cap_b(b), *cfg)).collect();
    if include_zero {
        let mut zero_cfg = *cfg;
        if matches!(cfg.sigma_method, SigmaMethod::KappaTruncated { eps: None }) {
            zero_cfg.sigma_method = SigmaMethod::DirectPv;
        }
        values.push(0.0);
        members.push((0.0, base.with_cap_b(0.0).with_kappa(0.0), zero_cfg));
    }
    let members = run_members(h0, members)?;
    Ok(assemble(SweepAxis::CapB, values, members))
}

/// Runs both initial data and returns `(t, ||h_a(t) - h_b(t)||)` on the
/// snapshot times of the first run.
pub fn twin_stability(
    h0a: &Field,
    h0b: &Field,
    params: &ModelParams,
    cfg: &StepperConfig,
) -> Result<Vec<(f64, f64)>> {
    if h0a.grid() != h0b.grid() {
        return Err(Error::GridMismatch);
    }
    if !(params.cap_b > 0.0) {
        return Err(Error::Argument("twin stability requires B > 0".into()));
    }
    let (a, b) = rayon::join(|| run(h0a, params, cfg), || run(h0b, params, cfg));
    let (a, b) = (a?, b?);
    let t_max = b.final_time();
    a.snapshots()
        .iter()
        .filter(|s| s.t <= t_max)
        .map(|s| {
            let d = s.h.sub(&b.sample(s.t)?)?;
            Ok((
                s.t,
                (d.values().iter().map(|v| v * v).sum::<f64>() * d.grid().dx()).sqrt(),
            ))
        })
        .collect()
}

/// Smallest `C >= 0` with `gap(t) <= delta e^{C t}` for all samples with
/// `0 < t <= t_fit`.
pub fn fit_gronwall_rate(gaps: &[(f64, f64)], delta: f64, t_fit: f64) -> f64 {
    gaps.iter()
        .filter(|(t, _)| *t > 0.0 && *t <= t_fit)
        .map(|&(t, g)| (g / delta).ln() / t)
        .fold(0.0, f64::max)
}

/// Whether every sample after `t_from` stays below `delta e^{C t}`.
pub fn gronwall_envelope_holds(gaps: &[(f64, f64)], delta: f64, rate: f64, t_from: f64) -> bool {
    gaps.iter()
        .filter(|(t, _)| *t > t_from)
        .all(|&(t, g)| g <= delta * (rate * t).exp() * (1.0 + 1e-9))
}
