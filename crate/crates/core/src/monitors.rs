//! Norms and functionals evaluated along a trajectory: the quantities
//! bounded by the kappa-uniform energy estimates, the weak-form residual,
//! and the `H^{-2}` time-variation of `|h_x| h_x`.
//!
//! Time integrals use the trapezoid rule over snapshot times; `h_t` comes
//! from differencing consecutive snapshots, independent of the stepper.

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{derivative_x, second_derivative_x, Field};
use crate::model::{ModelParams, Trajectory};
use crate::regularization::RegAbs;
use crate::stress::StressOperator;

/// Discrete `(sum_j |f_j|^p dx)^(1/p)`; `p = inf` gives the max norm.
pub fn lp_norm(f: &Field, p: f64) -> Result<f64> {
    if !(p >= 1.0) {
        return Err(Error::Argument(format!("p must be >= 1, got {p}")));
    }
    if p.is_infinite() {
        return Ok(f.max_abs());
    }
    let s: f64 = f.values().iter().map(|v| v.abs().powf(p)).sum();
    Ok((s * f.grid().dx()).powf(1.0 / p))
}

fn pow_sum(values: &[f64], p: f64, dx: f64) -> f64 {
    values.iter().map(|v| v.abs().powf(p)).sum::<f64>() * dx
}

fn trapezoid(t: &[f64], y: &[f64]) -> f64 {
    t.windows(2)
        .zip(y.windows(2))
        .map(|(t, y)| 0.5 * (t[1] - t[0]) * (y[0] + y[1]))
        .sum()
}

/// Monitored quantities of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    /// `sup_t ||h||^2`
    pub sup_l2_h: f64,
    /// `int_0^T ||h_x||_3^3 dt`
    pub int_l3_hx: f64,
    /// `sup_t ||h_x||^2`
    pub sup_l2_hx: f64,
    /// `int_0^T int (|h_x|_k + B) |h_xx|^2 dx dt`
    pub weighted_h2: f64,
    /// `||h_t||_{L^{4/3}(Q)}`
    pub l43_ht: f64,
    /// `int_0^T ||(|h_x| h_x)_x||_{4/3}^{4/3} dt`
    pub l43_flux_grad: f64,
    /// `int_0^T ||h_x||_inf^{8/3} dt`
    pub l83_linf_hx: f64,
    /// `sup_t max_j |h_xx|`
    pub corner_metric: f64,
}

impl EstimateReport {
    pub const FIELD_NAMES: [&'static str; 8] = [
        "sup_l2_h",
        "int_l3_hx",
        "sup_l2_hx",
        "weighted_h2",
        "l43_ht",
        "l43_flux_grad",
        "l83_linf_hx",
        "corner_metric",
    ];

    pub fn fields(&self) -> [f64; 8] {
        [
            self.sup_l2_h,
            self.int_l3_hx,
            self.sup_l2_hx,
            self.weighted_h2,
            self.l43_ht,
            self.l43_flux_grad,
            self.l83_linf_hx,
            self.corner_metric,
        ]
    }

    pub fn all_finite_nonnegative(&self) -> bool {
        self.fields().iter().all(|v| v.is_finite() && *v >= 0.0)
    }
}

/// `int_0^T int (F_k(h_x) + B h_x) h_x dx dt`, the dissipation bounded by
/// the first energy estimate. Reported alongside its lower bound
/// `int_l3_hx / 2`.
pub fn mixed_dissipation(traj: &Trajectory) -> f64 {
    let p = traj.params();
    let reg = RegAbs::new(p.kappa).expect("validated kappa");
    let dx = traj.grid().dx();
    let values: Vec<f64> = traj
        .snapshots()
        .iter()
        .map(|s| {
            derivative_x(&s.h)
                .values()
                .iter()
                .map(|&q| (reg.flux(q) + p.cap_b * q) * q)
                .sum::<f64>()
                * dx
        })
        .collect();
    trapezoid(&traj.times(), &values)
}

pub fn build_report(traj: &Trajectory) -> EstimateReport {
    let p = traj.params();
    let reg = RegAbs::new(p.kappa).expect("validated kappa");
    let dx = traj.grid().dx();
    let times = traj.times();
    let m = times.len();

    let mut sup_l2_h = 0.0_f64;
    let mut sup_l2_hx = 0.0_f64;
    let mut corner = 0.0_f64;
    let mut l3 = Vec::with_capacity(m);
    let mut weighted = Vec::with_capacity(m);
    let mut flux_grad = Vec::with_capacity(m);
    let mut linf = Vec::with_capacity(m);

    for snap in traj.snapshots() {
        let hx = derivative_x(&snap.h);
        let hxx = second_derivative_x(&snap.h);
        sup_l2_h = sup_l2_h.max(pow_sum(snap.h.values(), 2.0, dx));
        sup_l2_hx = sup_l2_hx.max(pow_sum(hx.values(), 2.0, dx));
        corner = corner.max(hxx.max_abs());
        l3.push(pow_sum(hx.values(), 3.0, dx));
        weighted.push(
            hx.values()
                .iter()
                .zip(hxx.values())
                .map(|(&q, &c)| (reg.abs(q) + p.cap_b) * c * c)
                .sum::<f64>()
                * dx,
        );
        let w = hx.map(|q| q.abs() * q);
        flux_grad.push(pow_sum(derivative_x(&w).values(), 4.0 / 3.0, dx));
        linf.push(hx.max_abs().powf(8.0 / 3.0));
    }

    let ht_sum: f64 = traj
        .snapshots()
        .windows(2)
        .map(|w| {
            let dt = w[1].t - w[0].t;
            let s: f64 = w[1]
                .h
                .values()
                .iter()
                .zip(w[0].h.values())
                .map(|(a, b)| ((a - b) / dt).abs().powf(4.0 / 3.0))
                .sum();
            s * dx * dt
        })
        .sum();

    EstimateReport {
        sup_l2_h,
        int_l3_hx: trapezoid(&times, &l3),
        sup_l2_hx,
        weighted_h2: trapezoid(&times, &weighted),
        l43_ht: ht_sum.powf(0.75),
        l43_flux_grad: trapezoid(&times, &flux_grad),
        l83_linf_hx: trapezoid(&times, &linf),
        corner_metric: corner,
    }
}

/// `(sum_k |w_k|^2 / (1 + xi_k^2)^2)^(1/2)` with `xi_k = 2 pi k / L`,
/// normalized so that the zero mode reproduces the discrete `L^2` norm.
pub fn h_minus2_norm(w: &Field) -> f64 {
    let n = w.len();
    let len = w.grid().length();
    let mut buf: Vec<Complex<f64>> = w.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    let s: f64 = buf
        .iter()
        .enumerate()
        .map(|(k, c)| {
            let k = if k <= n / 2 {
                k as f64
            } else {
                k as f64 - n as f64
            };
            let xi = 2.0 * std::f64::consts::PI * k / len;
            c.norm_sqr() / (1.0 + xi * xi).powi(2)
        })
        .sum();
    (s * len / (n as f64 * n as f64)).sqrt()
}

/// `int_0^T ||d/dt (|h_x| h_x)||_{H^-2} dt`, as the sum of `H^{-2}` norms
/// of snapshot-to-snapshot increments.
pub fn flux_time_derivative_norm(traj: &Trajectory) -> f64 {
    let w: Vec<Field> = traj
        .snapshots()
        .iter()
        .map(|s| derivative_x(&s.h).map(|q| q.abs() * q))
        .collect();
    w.windows(2)
        .map(|p| h_minus2_norm(&p[1].sub(&p[0]).expect("same grid")))
        .sum()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialMode {
    Constant,
    Cos(u32),
    Sin(u32),
}

/// `amplitude * mode(x) * (horizon - t)^power`, periodic in `x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TestFunction {
    pub mode: SpatialMode,
    pub power: u32,
    pub horizon: f64,
    pub amplitude: f64,
}

impl TestFunction {
    pub fn new(mode: SpatialMode, power: u32, horizon: f64) -> Self {
        Self {
            mode,
            power,
            horizon,
            amplitude: 1.0,
        }
    }

    pub fn zero(horizon: f64) -> Self {
        Self {
            mode: SpatialMode::Constant,
            power: 1,
            horizon,
            amplitude: 0.0,
        }
    }

    /// Low Fourier modes `k in {1, 2}` times `(T - t)^m`, `m in {1, 2}`.
    pub fn family(horizon: f64) -> Vec<TestFunction> {
        let mut out = Vec::new();
        for k in 1..=2 {
            for mode in [SpatialMode::Cos(k), SpatialMode::Sin(k)] {
                for power in 1..=2 {
                    out.push(TestFunction::new(mode, power, horizon));
                }
            }
        }
        out
    }

    /// `(mode, d mode / dx)` at `x` on a period `[a, a + len)`.
    fn space(&self, x: f64, a: f64, len: f64) -> (f64, f64) {
        let w = |k: u32| 2.0 * std::f64::consts::PI * k as f64 / len;
        match self.mode {
            SpatialMode::Constant => (1.0, 0.0),
            SpatialMode::Cos(k) => {
                let s = w(k) * (x - a);
                (s.cos(), -w(k) * s.sin())
            }
            SpatialMode::Sin(k) => {
                let s = w(k) * (x - a);
                (s.sin(), w(k) * s.cos())
            }
        }
    }

    /// `(time factor, its derivative)`.
    fn time(&self, t: f64) -> (f64, f64) {
        let r = self.horizon - t;
        let m = self.power as i32;
        (
            self.amplitude * r.powi(m),
            -self.amplitude * m as f64 * r.powi(m - 1),
        )
    }
}

/// `|(h, phi_t) - a1 (F_k(h_x) + B h_x, phi_x) - ((a2 sigma + a3)(|h_x|_k + B), phi) + (h0, phi(0))|`
/// by space-time trapezoid quadrature. With `kappa = 0` this is the weak
/// formulation of the original problem; `degenerate` drops every `B` term.
pub fn weak_residual(traj: &Trajectory, phi: &TestFunction, degenerate: bool) -> Result<f64> {
    let t_end = traj.final_time();
    let (end_factor, _) = phi.time(t_end);
    if end_factor.abs() > 1e-12 {
        return Err(Error::Argument(format!(
            "test function must vanish at t = {t_end}"
        )));
    }
    let mut params: ModelParams = *traj.params();
    if degenerate {
        params.cap_b = 0.0;
    }
    let grid = *traj.grid();
    let reg = RegAbs::new(params.kappa)?;
    let stress = StressOperator::new(&grid, &params, traj.sigma_method())?;
    let dx = grid.dx();
    let xs = grid.points();
    let space: Vec<(f64, f64)> = xs
        .iter()
        .map(|&x| phi.space(x, grid.a(), grid.length()))
        .collect();

    let integrand: Vec<f64> = traj
        .snapshots()
        .iter()
        .map(|snap| {
            let (tf, dtf) = phi.time(snap.t);
            let hx = derivative_x(&snap.h);
            let sigma = if params.alpha2 != 0.0 {
                Some(stress.apply(&hx))
            } else {
                None
            };
            let mut s = 0.0;
            for j in 0..grid.n() {
                let q = hx[j];
                let (m, mx) = space[j];
                let sig = sigma.as_ref().map_or(0.0, |f| f[j]);
                s += snap.h[j] * m * dtf
                    - params.alpha1 * (reg.flux(q) + params.cap_b * q) * mx * tf
                    - (params.alpha2 * sig + params.alpha3) * (reg.abs(q) + params.cap_b) * m * tf;
            }
            s * dx
        })
        .collect();

    let h0 = &traj.initial().h;
    let (tf0, _) = phi.time(0.0);
    let initial: f64 = h0
        .values()
        .iter()
        .zip(&space)
        .map(|(h, (m, _))| h * m * tf0)
        .sum::<f64>()
        * dx;

    Ok((trapezoid(&traj.times(), &integrand) + initial).abs())
}

/// Largest residual over [`TestFunction::family`].
pub fn weak_residual_family(traj: &Trajectory, degenerate: bool) -> Result<f64> {
    TestFunction::family(traj.final_time())
        .iter()
        .map(|phi| weak_residual(traj, phi, degenerate))
        .try_fold(0.0_f64, |m, r| Ok(m.max(r?)))
}
