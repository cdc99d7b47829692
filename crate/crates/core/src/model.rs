//! Model parameters, trajectories and initial-data validation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{forward_difference, Field, Grid};
use crate::stress::SigmaMethod;

/// Dimensionless coefficients of
/// `h_t = a1 (F(h_x) + B h_x)_x - (a2 sigma + a3)(|h_x|_k + B)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Diffusion coefficient (gamma H).
    pub alpha1: f64,
    /// Weight of the disconnection stress (b).
    pub alpha2: f64,
    /// Constant driving force (tau b + Psi H).
    pub alpha3: f64,
    /// Equilibrium disconnection density B.
    pub cap_b: f64,
    pub kappa: f64,
    /// Kernel strength of the stress integral.
    pub kbeta: f64,
    /// Number of periodic image pairs summed in the far-field stress.
    pub image_terms: usize,
    /// Required ratio `alpha1 / alpha2` for the energy estimates to close.
    pub dominance_factor: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            alpha1: 1.0,
            alpha2: 0.0,
            alpha3: 0.0,
            cap_b: 0.5,
            kappa: 0.0,
            kbeta: 1.0,
            image_terms: 64,
            dominance_factor: 10.0,
        }
    }
}

impl ModelParams {
    pub const DEFAULT_DOMINANCE: f64 = 10.0;

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::Param(msg.to_string()));
        if !(self.alpha1 > 0.0) || !self.alpha1.is_finite() {
            return bad("alpha1 must be positive");
        }
        if !(self.alpha2 >= 0.0) || !self.alpha2.is_finite() {
            return bad("alpha2 must be nonnegative");
        }
        if !self.alpha3.is_finite() {
            return bad("alpha3 must be finite");
        }
        if !(0.0..=1.0).contains(&self.cap_b) {
            return bad("cap_b must lie in [0, 1]");
        }
        if !(0.0..=1.0).contains(&self.kappa) {
            return bad("kappa must lie in [0, 1]");
        }
        if !(self.kbeta > 0.0) || !self.kbeta.is_finite() {
            return bad("kbeta must be positive");
        }
        if self.image_terms < 1 {
            return bad("image_terms must be at least 1");
        }
        if !(self.dominance_factor > 0.0) || !self.dominance_factor.is_finite() {
            return bad("dominance_factor must be positive");
        }
        Ok(())
    }

    /// Whether `alpha1 >= dominance_factor * alpha2`. Violations are a
    /// warning, not an error.
    pub fn in_dominance_regime(&self) -> bool {
        self.alpha1 >= self.dominance_factor * self.alpha2
    }

    pub fn with_kappa(mut self, kappa: f64) -> Self {
        self.kappa = kappa;
        self
    }

    pub fn with_cap_b(mut self, cap_b: f64) -> Self {
        self.cap_b = cap_b;
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub h: Field,
}

/// Time-ordered states of one run together with what produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    params: ModelParams,
    grid: Grid,
    sigma_method: SigmaMethod,
    snapshots: Vec<Snapshot>,
    dt_history: Vec<f64>,
}

impl Trajectory {
    pub fn new(params: ModelParams, sigma_method: SigmaMethod, h0: Field) -> Self {
        Self {
            params,
            grid: *h0.grid(),
            sigma_method,
            snapshots: vec![Snapshot { t: 0.0, h: h0 }],
            dt_history: Vec::new(),
        }
    }

    /// Rebuilds a trajectory from stored snapshots, checking the ordering
    /// and grid invariants.
    pub fn from_snapshots(
        params: ModelParams,
        sigma_method: SigmaMethod,
        snapshots: Vec<Snapshot>,
    ) -> Result<Self> {
        let first = snapshots
            .first()
            .ok_or_else(|| Error::Argument("trajectory needs at least one snapshot".into()))?;
        if first.t != 0.0 {
            return Err(Error::Argument("first snapshot must be at t = 0".into()));
        }
        let grid = *first.h.grid();
        let mut traj = Self {
            params,
            grid,
            sigma_method,
            snapshots: vec![first.clone()],
            dt_history: Vec::new(),
        };
        for s in snapshots.into_iter().skip(1) {
            traj.push(s.t, s.h)?;
        }
        Ok(traj)
    }

    pub fn push(&mut self, t: f64, h: Field) -> Result<()> {
        if *h.grid() != self.grid {
            return Err(Error::GridMismatch);
        }
        let last = self.last().t;
        if !(t > last) {
            return Err(Error::Argument(format!(
                "snapshot time {t} does not follow {last}"
            )));
        }
        self.snapshots.push(Snapshot { t, h });
        Ok(())
    }

    pub(crate) fn record_dt(&mut self, dt: f64) {
        self.dt_history.push(dt);
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn sigma_method(&self) -> SigmaMethod {
        self.sigma_method
    }

    pub fn snapshots(&self) -> &[Snapshot] {
        &self.snapshots
    }

    pub fn dt_history(&self) -> &[f64] {
        &self.dt_history
    }

    pub fn initial(&self) -> &Snapshot {
        &self.snapshots[0]
    }

    pub fn last(&self) -> &Snapshot {
        self.snapshots.last().expect("trajectory is never empty")
    }

    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn final_time(&self) -> f64 {
        self.last().t
    }

    /// State at time `t` by linear interpolation between snapshots.
    pub fn sample(&self, t: f64) -> Result<Field> {
        let s = &self.snapshots;
        if t < 0.0 || t > self.final_time() * (1.0 + 1e-12) {
            return Err(Error::Argument(format!(
                "t = {t} outside [0, {}]",
                self.final_time()
            )));
        }
        let k = s.partition_point(|snap| snap.t <= t);
        if k == 0 {
            return Ok(s[0].h.clone());
        }
        if k == s.len() {
            return Ok(s[k - 1].h.clone());
        }
        let (lo, hi) = (&s[k - 1], &s[k]);
        let w = (t - lo.t) / (hi.t - lo.t);
        if w == 0.0 {
            return Ok(lo.h.clone());
        }
        lo.h.scale(1.0 - w).axpy(w, &hi.h)
    }
}

/// Outcome of checking initial data against the periodic compatibility
/// requirements.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    /// Values are periodic by construction on a periodic grid.
    pub periodic: bool,
    /// One-sided difference quotients at the seam are bounded relative to
    /// the interior ones, i.e. no jump hides at `x = a ~ x = d`.
    pub seam_bounded: bool,
    /// Largest one-sided seam difference quotient.
    pub seam_slope: f64,
    /// Largest interior forward difference quotient.
    pub interior_slope: f64,
    /// Mismatch of the left/right derivative at the seam; informational,
    /// only classical solutions need it to vanish.
    pub seam_derivative_mismatch: f64,
    /// Discrete `H^1` norm.
    pub h1_norm: f64,
    pub h1_finite: bool,
    pub dominance: bool,
    pub failures: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }
}

/// A seam slope is accepted up to this multiple of the largest interior one.
pub const SEAM_SLOPE_FACTOR: f64 = 4.0;
const SEAM_SLOPE_FLOOR: f64 = 1e-8;

pub fn validate_initial_data(h0: &Field, params: &ModelParams) -> ValidationReport {
    let g = h0.grid();
    let n = g.n();
    let dh = forward_difference(h0);
    // Faces n-1 and 0 touch the seam point x_0.
    let seam_slope = dh[n - 1].abs().max(dh[0].abs());
    let interior_slope = dh.values()[1..n - 1]
        .iter()
        .fold(0.0_f64, |m, v| m.max(v.abs()));
    let seam_bounded = seam_slope <= SEAM_SLOPE_FACTOR * interior_slope + SEAM_SLOPE_FLOOR;

    // Derivatives at x = a and x = d estimated from points away from the seam.
    let left = (h0[2] - h0[1]) / g.dx();
    let right = (h0[n - 1] - h0[n - 2]) / g.dx();
    let seam_derivative_mismatch = (left - right).abs();

    let h1_sq: f64 = h0
        .values()
        .iter()
        .zip(dh.values())
        .map(|(h, p)| h * h + p * p)
        .sum::<f64>()
        * g.dx();
    let h1_norm = h1_sq.sqrt();
    let h1_finite = h1_norm.is_finite();

    let mut failures = Vec::new();
    if !seam_bounded {
        failures.push(format!(
            "seam: one-sided difference quotient {seam_slope:.3e} exceeds {SEAM_SLOPE_FACTOR} x interior maximum {interior_slope:.3e}"
        ));
    }
    if !h1_finite {
        failures.push("H1 norm is not finite".into());
    }
    if let Err(e) = params.validate() {
        failures.push(format!("parameters: {e}"));
    }

    ValidationReport {
        periodic: true,
        seam_bounded,
        seam_slope,
        interior_slope,
        seam_derivative_mismatch,
        h1_norm,
        h1_finite,
        dominance: params.in_dominance_regime(),
        failures,
    }
}
