//! Time stepping for
//! `h_t = a1 D-[F_k(D+h) + B D+h] - (a2 sigma(D0 h) + a3)(|D0 h|_k + B)`.
//!
//! The diffusion term is in conservative flux form on cell faces, so with
//! `a2 = a3 = 0` the discrete mass `sum_j h_j dx` is invariant. The forcing
//! term is always explicit; the semi-implicit scheme freezes the face
//! coefficient and solves one cyclic tridiagonal system per step.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative_x, forward_difference, Field, Grid};
use crate::linalg::CyclicTridiagonal;
use crate::model::{validate_initial_data, ModelParams, Trajectory};
use crate::regularization::RegAbs;
use crate::stress::{SigmaMethod, StressOperator};

/// Keeps the explicit step finite when the diffusion coefficient vanishes.
pub const FLOOR_GUARD: f64 = 1e-12;
/// Relative step-doubling tolerance of the semi-implicit controller.
pub const STEP_DOUBLING_TOL: f64 = 1e-5;
/// Consecutive accepted steps before the controller doubles `dt`.
pub const GROWTH_AFTER: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    ExplicitEuler,
    SemiImplicit,
}

impl Scheme {
    pub fn name(&self) -> &'static str {
        match self {
            Scheme::ExplicitEuler => "explicit_euler",
            Scheme::SemiImplicit => "semi_implicit",
        }
    }
}

/// What an explicit step does when `dt` exceeds the stability limit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPolicy {
    #[default]
    Reject,
    Warn,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepperConfig {
    pub scheme: Scheme,
    pub dt_init: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub t_end: f64,
    pub snapshot_stride: usize,
    pub sigma_method: SigmaMethod,
    pub stability_policy: StabilityPolicy,
    /// Run even when the initial data fails validation.
    pub force: bool,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            dt_init: 1e-3,
            dt_min: 1e-8,
            dt_max: 1e-2,
            cfl_safety: 0.9,
            t_end: 1.0,
            snapshot_stride: 1,
            sigma_method: SigmaMethod::DirectPv,
            stability_policy: StabilityPolicy::Reject,
            force: false,
        }
    }
}

impl StepperConfig {
    /// A semi-implicit run with constant step `dt` (no step doubling).
    pub fn fixed_step(dt: f64, t_end: f64, snapshot_stride: usize) -> Self {
        Self {
            scheme: Scheme::SemiImplicit,
            dt_init: dt,
            dt_min: dt,
            dt_max: dt,
            t_end,
            snapshot_stride,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Param(msg.to_string()));
        for (name, v) in [
            ("dt_init", self.dt_init),
            ("dt_min", self.dt_min),
            ("dt_max", self.dt_max),
        ] {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::Param(format!("{name} must be positive")));
            }
        }
        if !(self.dt_min <= self.dt_init && self.dt_init <= self.dt_max) {
            return bad("dt_min <= dt_init <= dt_max is required");
        }
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return bad("cfl_safety must lie in (0, 1]");
        }
        if !(self.t_end >= 0.0) || !self.t_end.is_finite() {
            return bad("t_end must be nonnegative");
        }
        if self.snapshot_stride < 1 {
            return bad("snapshot_stride must be at least 1");
        }
        if let SigmaMethod::KappaTruncated { eps: Some(e) } = self.sigma_method {
            if !(e > 0.0) {
                return bad("truncation eps must be positive");
            }
        }
        Ok(())
    }
}

/// Right-hand side evaluator with the stress kernel precomputed.
#[derive(Debug, Clone)]
pub struct Evolver {
    grid: Grid,
    params: ModelParams,
    reg: RegAbs,
    stress: StressOperator,
}

impl Evolver {
    pub fn new(grid: &Grid, params: &ModelParams, sigma_method: SigmaMethod) -> Result<Self> {
        params.validate()?;
        Ok(Self {
            grid: *grid,
            params: *params,
            reg: RegAbs::new(params.kappa)?,
            stress: StressOperator::new(grid, params, sigma_method)?,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    fn check(&self, h: &Field) -> Result<()> {
        if *h.grid() == self.grid {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }

    /// `-(a2 sigma + a3)(|D0 h|_k + B)`, the explicit forcing.
    pub fn forcing(&self, h: &Field) -> Result<Field> {
        self.check(h)?;
        let p = &self.params;
        let hx = derivative_x(h);
        let mut out = vec![0.0; self.grid.n()];
        if p.alpha2 != 0.0 {
            let sigma = self.stress.apply(&hx);
            for ((o, &s), &g) in out.iter_mut().zip(sigma.values()).zip(hx.values()) {
                *o = -(p.alpha2 * s + p.alpha3) * (self.reg.abs(g) + p.cap_b);
            }
        } else {
            for (o, &g) in out.iter_mut().zip(hx.values()) {
                *o = -p.alpha3 * (self.reg.abs(g) + p.cap_b);
            }
        }
        Ok(Field::from_raw(self.grid, out))
    }

    /// Face fluxes `F_k(D+h) + B D+h`; entry `j` sits between `j` and `j+1`.
    fn face_flux(&self, h: &Field) -> Vec<f64> {
        let b = self.params.cap_b;
        forward_difference(h)
            .values()
            .iter()
            .map(|&q| self.reg.flux(q) + b * q)
            .collect()
    }

    pub fn diffusion(&self, h: &Field) -> Result<Field> {
        self.check(h)?;
        let flux = self.face_flux(h);
        let n = self.grid.n();
        let s = self.params.alpha1 / self.grid.dx();
        let out = (0..n)
            .map(|j| s * (flux[j] - flux[if j == 0 { n - 1 } else { j - 1 }]))
            .collect();
        Ok(Field::from_raw(self.grid, out))
    }

    pub fn rhs(&self, h: &Field) -> Result<Field> {
        self.diffusion(h)?.axpy(1.0, &self.forcing(h)?)
    }

    /// `cfl dx^2 / (2 a1 (max_faces |D+h|_k + B) + guard)`.
    pub fn stable_dt(&self, h: &Field, cfl_safety: f64) -> f64 {
        let dx = self.grid.dx();
        let max_coef = forward_difference(h)
            .values()
            .iter()
            .fold(0.0_f64, |m, &q| m.max(self.reg.abs(q)));
        cfl_safety * dx * dx
            / (2.0 * self.params.alpha1 * (max_coef + self.params.cap_b) + FLOOR_GUARD)
    }

    pub fn step_explicit(&self, h: &Field, dt: f64, policy: StabilityPolicy) -> Result<Field> {
        if !(dt >= 0.0) {
            return Err(Error::Argument(format!("dt must be nonnegative, got {dt}")));
        }
        let limit = self.stable_dt(h, 1.0);
        if dt > limit * (1.0 + 1e-12) && policy == StabilityPolicy::Reject {
            return Err(Error::Unstable { dt, limit });
        }
        if dt == 0.0 {
            return Ok(h.clone());
        }
        h.axpy(dt, &self.rhs(h)?)
    }

    /// Linearly implicit Euler step: the face coefficient
    /// `F_k(p)/p + B` is frozen at the current state, so the frozen operator
    /// reproduces the nonlinear flux exactly at `h`.
    pub fn step_semi_implicit(&self, h: &Field, dt: f64) -> Result<Field> {
        if !(dt > 0.0) {
            return Err(Error::Argument(format!("dt must be positive, got {dt}")));
        }
        let forcing = self.forcing(h)?;
        let n = self.grid.n();
        let r = dt * self.params.alpha1 / (self.grid.dx() * self.grid.dx());
        let coef: Vec<f64> = forward_difference(h)
            .values()
            .iter()
            .map(|&q| self.reg.secant(q) + self.params.cap_b)
            .collect();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for j in 0..n {
            let left = coef[if j == 0 { n - 1 } else { j - 1 }];
            let right = coef[j];
            lower[j] = -r * left;
            upper[j] = -r * right;
            diag[j] = 1.0 + r * (left + right);
        }
        let rhs: Vec<f64> = h
            .values()
            .iter()
            .zip(forcing.values())
            .map(|(v, g)| v + dt * g)
            .collect();
        let m = CyclicTridiagonal { lower, diag, upper };
        Ok(Field::from_raw(self.grid, m.solve(&rhs)?))
    }
}

pub fn rhs(h: &Field, params: &ModelParams, sigma_method: SigmaMethod) -> Result<Field> {
    Evolver::new(h.grid(), params, sigma_method)?.rhs(h)
}

pub fn stable_dt(h: &Field, params: &ModelParams, cfl_safety: f64) -> Result<f64> {
    Ok(Evolver::new(h.grid(), params, SigmaMethod::SpectralOracle)?.stable_dt(h, cfl_safety))
}

pub fn step_explicit(
    h: &Field,
    dt: f64,
    params: &ModelParams,
    sigma_method: SigmaMethod,
) -> Result<Field> {
    Evolver::new(h.grid(), params, sigma_method)?.step_explicit(h, dt, StabilityPolicy::Reject)
}

pub fn step_semi_implicit(
    h: &Field,
    dt: f64,
    params: &ModelParams,
    sigma_method: SigmaMethod,
) -> Result<Field> {
    Evolver::new(h.grid(), params, sigma_method)?.step_semi_implicit(h, dt)
}

fn rel_diff(a: &Field, b: &Field) -> f64 {
    let scale = b.max_abs().max(1.0);
    a.values()
        .iter()
        .zip(b.values())
        .fold(0.0_f64, |m, (x, y)| m.max((x - y).abs()))
        / scale
}

/// Integrates from `t = 0` to `cfg.t_end`, keeping every
/// `snapshot_stride`-th accepted state and always the final one.
///
/// A non-finite state ends the run with [`Error::Diverged`], which carries
/// the trajectory up to the last finite snapshot.
pub fn run(h0: &Field, params: &ModelParams, cfg: &StepperConfig) -> Result<Trajectory> {
    cfg.validate()?;
    params.validate()?;
    if !cfg.force {
        let report = validate_initial_data(h0, params);
        if !report.passed() {
            return Err(Error::Argument(format!(
                "initial data rejected: {}",
                report.failures.join("; ")
            )));
        }
    }
    let ev = Evolver::new(h0.grid(), params, cfg.sigma_method)?;
    let mut traj = Trajectory::new(*params, cfg.sigma_method, h0.clone());
    let t_end = cfg.t_end;
    let mut t = 0.0;
    let mut h = h0.clone();
    let mut dt = cfg.dt_init;
    let mut accepted = 0usize;
    let mut streak = 0usize;
    let adaptive = cfg.dt_min < cfg.dt_max;

    let diverged = |traj: &Trajectory, t: f64, reason: String| Error::Diverged {
        t,
        reason,
        partial: Box::new(traj.clone()),
    };

    while t < t_end {
        let remaining = t_end - t;
        let (next, used) = match cfg.scheme {
            Scheme::ExplicitEuler => {
                let limit = ev.stable_dt(&h, cfg.cfl_safety);
                let mut step = cfg.dt_max.min(limit);
                if step < cfg.dt_min && step < remaining {
                    return Err(diverged(
                        &traj,
                        t,
                        format!("stable step {step:e} fell below dt_min"),
                    ));
                }
                if step >= remaining * (1.0 - 1e-12) {
                    step = remaining;
                }
                (ev.step_explicit(&h, step, cfg.stability_policy), step)
            }
            Scheme::SemiImplicit => {
                let mut step = dt.min(remaining);
                if remaining - step < 1e-12 * t_end {
                    step = remaining;
                }
                if !adaptive {
                    (ev.step_semi_implicit(&h, step), step)
                } else {
                    let full = ev.step_semi_implicit(&h, step);
                    let fine = ev
                        .step_semi_implicit(&h, 0.5 * step)
                        .and_then(|mid| ev.step_semi_implicit(&mid, 0.5 * step));
                    match (full, fine) {
                        (Ok(full), Ok(fine)) => {
                            let err = rel_diff(&full, &fine);
                            if err <= STEP_DOUBLING_TOL || dt <= cfg.dt_min {
                                streak += 1;
                                if streak >= GROWTH_AFTER {
                                    dt = (2.0 * dt).min(cfg.dt_max);
                                    streak = 0;
                                }
                                (Ok(fine), step)
                            } else {
                                dt = (0.5 * dt).max(cfg.dt_min);
                                streak = 0;
                                continue;
                            }
                        }
                        (Err(e), _) | (_, Err(e)) => {
                            if dt <= cfg.dt_min {
                                return Err(diverged(&traj, t, e.to_string()));
                            }
                            dt = (0.5 * dt).max(cfg.dt_min);
                            streak = 0;
                            continue;
                        }
                    }
                }
            }
        };
        let next = match next {
            Ok(f) => f,
            Err(e @ Error::Unstable { .. }) => return Err(e),
            Err(e) => return Err(diverged(&traj, t, e.to_string())),
        };
        if !next.is_finite() {
            return Err(diverged(&traj, t, "non-finite state".into()));
        }
        t = if used == remaining { t_end } else { t + used };
        h = next;
        accepted += 1;
        traj.record_dt(used);
        if accepted.is_multiple_of(cfg.snapshot_stride) || t >= t_end {
            traj.push(t, h.clone())?;
        }
    }
    Ok(traj)
}
