//! Nonlocal disconnection stress
//! `sigma(x) = kbeta * P.V. int_R h_x(y) / (x - y) dy` for periodic `h_x`.
//!
//! The whole-line integral splits into the singular local part over one
//! period (`sigma_i2`) and the far-field sum over periodic images
//! (`sigma_i1`), paired as `k` and `-k` so each pair decays like `1/k^2`.
//! Both parts use the unwrapped coordinate difference `x_i - x_j`; only the
//! image sum sees the other periods.
//!
//! The principal value is taken by dropping the self term of the point
//! rule. That alone leaves an `O(dx)` error equal to `dx * h_xx(x_i)`: near
//! the singularity `f(y)/(x-y) = f(x)/(x-y) - f'(x) + O(y-x)`, and the
//! dropped point carries the regular part `-f'(x) dx`. The direct rule adds
//! it back with a centered difference, which gives a second-order rule for
//! smooth data.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::{num_complex::Complex, Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};
use crate::model::ModelParams;
use crate::monitors::lp_norm;

/// Grids at least this large evaluate the dense sums in parallel.
const PAR_THRESHOLD: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
#[derive(Default)]
pub enum SigmaMethod {
    /// Self-point-excluded sum plus periodic images.
    #[default]
    DirectPv,
    /// Drops all pairs closer than `eps` (periodic distance), plus images.
    /// `eps = None` shares the regularization parameter `kappa`.
    KappaTruncated { eps: Option<f64> },
    /// Fourier multiplier `-i pi kbeta sign(k)`.
    SpectralOracle,
}

impl SigmaMethod {
    pub fn name(&self) -> &'static str {
        match self {
            SigmaMethod::DirectPv => "direct_pv",
            SigmaMethod::KappaTruncated { .. } => "kappa_truncated",
            SigmaMethod::SpectralOracle => "spectral_oracle",
        }
    }

    /// Truncation radius in effect for the given parameters.
    pub fn truncation_eps(&self, params: &ModelParams) -> Result<Option<f64>> {
        match *self {
            SigmaMethod::KappaTruncated { eps } => {
                let eps = eps.unwrap_or(params.kappa);
                check_eps(eps)?;
                Ok(Some(eps))
            }
            _ => Ok(None),
        }
    }
}

fn check_eps(eps: f64) -> Result<()> {
    if eps > 0.0 && eps.is_finite() {
        Ok(())
    } else {
        Err(Error::Argument(format!(
            "truncation radius must be positive, got {eps}"
        )))
    }
}

/// Convolution table indexed by `m + n - 1` for `m = i - j` in `(-n, n)`.
#[derive(Debug, Clone)]
struct Kernel {
    n: usize,
    table: Vec<f64>,
    /// Adds the self-point correction of the principal value.
    pv_correction: bool,
}

impl Kernel {
    fn zero(n: usize) -> Self {
        Self {
            n,
            table: vec![0.0; 2 * n - 1],
            pv_correction: false,
        }
    }

    fn with_local(grid: &Grid, eps: Option<f64>) -> Self {
        let n = grid.n();
        let dx = grid.dx();
        let mut k = Self::zero(n);
        // A radius below the spacing excludes nothing beyond the self point.
        let eps = eps.filter(|&e| e >= dx);
        for m in 1..n {
            let pdist = m.min(n - m) as f64 * dx;
            if eps.is_some_and(|e| pdist <= e) {
                continue;
            }
            let w = 1.0 / m as f64; // dx * 1/(m dx)
            k.table[n - 1 + m] = w;
            k.table[n - 1 - m] = -w;
        }
        k.pv_correction = eps.is_none();
        k
    }

    /// Zeroes every offset within periodic distance `eps`, images included,
    /// so pairs straddling the seam are truncated like interior pairs.
    fn truncate_images(&mut self, grid: &Grid, eps: Option<f64>) {
        let Some(eps) = eps.filter(|&e| e >= grid.dx()) else {
            return;
        };
        let n = self.n;
        for m in 1..n {
            if (n - m) as f64 * grid.dx() <= eps {
                self.table[n - 1 + m] = 0.0;
                self.table[n - 1 - m] = 0.0;
            }
        }
    }

    fn add_images(&mut self, grid: &Grid, image_terms: usize) {
        let n = self.n;
        let dx = grid.dx();
        let len = grid.length();
        for m in -(n as i64 - 1)..=(n as i64 - 1) {
            let z = m as f64 * dx;
            let mut s = 0.0;
            // Small terms first.
            for k in (1..=image_terms).rev() {
                let kl = k as f64 * len;
                s += 1.0 / (z + kl) + 1.0 / (z - kl);
            }
            self.table[(m + n as i64 - 1) as usize] += dx * s;
        }
    }

    fn apply(&self, hx: &[f64], scale: f64) -> Vec<f64> {
        let n = self.n;
        let row = |i: usize| {
            // table[n-1 + i - j] for j = 0..n is a contiguous reversed slice.
            let w = &self.table[i..i + n];
            let mut s = 0.0;
            for (wj, fj) in w.iter().rev().zip(hx) {
                s += wj * fj;
            }
            if self.pv_correction {
                let next = hx[if i + 1 == n { 0 } else { i + 1 }];
                let prev = hx[if i == 0 { n - 1 } else { i - 1 }];
                s -= 0.5 * (next - prev);
            }
            scale * s
        };
        if n >= PAR_THRESHOLD {
            (0..n).into_par_iter().map(row).collect()
        } else {
            (0..n).map(row).collect()
        }
    }
}

/// Local principal-value part over one period.
pub fn sigma_i2_direct(hx: &Field, kbeta: f64) -> Field {
    let k = Kernel::with_local(hx.grid(), None);
    Field::from_raw(*hx.grid(), k.apply(hx.values(), kbeta))
}

/// Local part with every pair within periodic distance `eps` dropped.
/// Identical to [`sigma_i2_direct`] when `eps` is below the grid spacing.
pub fn sigma_i2_truncated(hx: &Field, kbeta: f64, eps: f64) -> Result<Field> {
    check_eps(eps)?;
    let k = Kernel::with_local(hx.grid(), Some(eps));
    Ok(Field::from_raw(*hx.grid(), k.apply(hx.values(), kbeta)))
}

/// Far-field sum over `image_terms` pairs of periodic images.
pub fn sigma_i1_images(hx: &Field, kbeta: f64, image_terms: usize) -> Result<Field> {
    if image_terms < 1 {
        return Err(Error::Argument("image_terms must be at least 1".into()));
    }
    let mut k = Kernel::zero(hx.grid().n());
    k.add_images(hx.grid(), image_terms);
    Ok(Field::from_raw(*hx.grid(), k.apply(hx.values(), kbeta)))
}

/// Bound on the omitted image pairs beyond `image_terms`:
/// `kbeta ||h_x||_1 sum_{k>K} 2L/((kL)^2 - L^2) = kbeta ||h_x||_1 (1/K + 1/(K+1)) / L`.
pub fn image_tail_bound(hx: &Field, kbeta: f64, image_terms: usize) -> f64 {
    let k = image_terms as f64;
    let l1 = lp_norm(hx, 1.0).unwrap_or(f64::INFINITY);
    kbeta * l1 * (1.0 / k + 1.0 / (k + 1.0)) / hx.grid().length()
}

/// Spectral evaluation of the full periodic stress: mode `k` is multiplied
/// by `-i pi kbeta sign(k)`; the mean and Nyquist modes are zeroed.
pub fn sigma_spectral_oracle(hx: &Field, kbeta: f64) -> Field {
    SpectralPlan::new(hx.grid().n()).apply(hx, kbeta)
}

#[derive(Clone)]
struct SpectralPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

impl SpectralPlan {
    fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            n,
            forward: planner.plan_fft_forward(n),
            inverse: planner.plan_fft_inverse(n),
        }
    }

    fn apply(&self, hx: &Field, kbeta: f64) -> Field {
        let n = self.n;
        let mut buf: Vec<Complex<f64>> =
            hx.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
        self.forward.process(&mut buf);
        let mult = Complex::new(0.0, -std::f64::consts::PI * kbeta / n as f64);
        buf[0] = Complex::new(0.0, 0.0);
        buf[n / 2] = Complex::new(0.0, 0.0);
        for (k, c) in buf.iter_mut().enumerate().skip(1) {
            if k < n / 2 {
                *c *= mult;
            } else if k > n / 2 {
                *c *= -mult;
            }
        }
        self.inverse.process(&mut buf);
        Field::from_raw(*hx.grid(), buf.iter().map(|c| c.re).collect())
    }
}

/// Total stress `sigma_i1 + sigma_i2` by the selected method.
pub fn sigma_total(hx: &Field, params: &ModelParams, method: SigmaMethod) -> Result<Field> {
    Ok(StressOperator::new(hx.grid(), params, method)?.apply(hx))
}

/// Precomputed stress evaluator for repeated application on one grid.
#[derive(Debug, Clone)]
pub struct StressOperator {
    grid: Grid,
    kbeta: f64,
    imp: StressImpl,
}

#[derive(Debug, Clone)]
enum StressImpl {
    Direct(Kernel),
    Spectral(SpectralPlan),
}

impl StressOperator {
    pub fn new(grid: &Grid, params: &ModelParams, method: SigmaMethod) -> Result<Self> {
        if params.image_terms < 1 {
            return Err(Error::Argument("image_terms must be at least 1".into()));
        }
        let imp = match method {
            SigmaMethod::SpectralOracle => StressImpl::Spectral(SpectralPlan::new(grid.n())),
            _ => {
                let eps = method.truncation_eps(params)?;
                let mut k = Kernel::with_local(grid, eps);
                k.add_images(grid, params.image_terms);
                k.truncate_images(grid, eps);
                StressImpl::Direct(k)
            }
        };
        Ok(Self {
            grid: *grid,
            kbeta: params.kbeta,
            imp,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    /// # Panics
    /// If `hx` lives on a different grid.
    pub fn apply(&self, hx: &Field) -> Field {
        assert_eq!(*hx.grid(), self.grid, "stress operator grid mismatch");
        match &self.imp {
            StressImpl::Direct(k) => Field::from_raw(self.grid, k.apply(hx.values(), self.kbeta)),
            StressImpl::Spectral(p) => p.apply(hx, self.kbeta),
        }
    }
}

/// Ratios `||T_eps f||_p / ||f||_p` over a list of truncation radii.
#[derive(Debug, Clone, PartialEq)]
pub struct LpProbe {
    pub p: f64,
    pub entries: Vec<(f64, f64)>,
    /// Set when `f` vanishes; all ratios are then reported as 0.
    pub zero_input: bool,
}

impl LpProbe {
    pub fn max_ratio(&self) -> f64 {
        self.entries.iter().map(|e| e.1).fold(0.0, f64::max)
    }

    pub fn min_ratio(&self) -> f64 {
        self.entries
            .iter()
            .map(|e| e.1)
            .fold(f64::INFINITY, f64::min)
    }

    /// Spread of the ratios; 1 for a zero input.
    pub fn spread(&self) -> f64 {
        if self.zero_input {
            1.0
        } else {
            self.max_ratio() / self.min_ratio()
        }
    }
}

/// Measures the `L^p` operator ratio of the truncated stress (unit kernel
/// strength) for each radius. With `image_terms = Some(K)` the periodic
/// image sum is included, giving the full periodic operator.
pub fn lp_boundedness_probe(
    f: &Field,
    p: f64,
    eps_list: &[f64],
    image_terms: Option<usize>,
) -> Result<LpProbe> {
    if !(p > 1.0) || !p.is_finite() {
        return Err(Error::Argument(format!(
            "p must satisfy 1 < p < inf, got {p}"
        )));
    }
    for &eps in eps_list {
        check_eps(eps)?;
    }
    let norm_f = lp_norm(f, p)?;
    let zero_input = norm_f == 0.0;
    if image_terms == Some(0) {
        return Err(Error::Argument("image_terms must be at least 1".into()));
    }
    let grid = f.grid();
    let mut entries = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let ratio = if zero_input {
            0.0
        } else {
            let mut k = Kernel::with_local(grid, Some(eps));
            if let Some(terms) = image_terms {
                k.add_images(grid, terms);
                k.truncate_images(grid, Some(eps));
            }
            let t = Field::from_raw(*grid, k.apply(f.values(), 1.0));
            lp_norm(&t, p)? / norm_f
        };
        entries.push((eps, ratio));
    }
    Ok(LpProbe {
        p,
        entries,
        zero_input,
    })
}
