//! Named initial profiles.

use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Field, Grid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preset {
    /// `h0 = 1`
    Constant,
    /// `h0 = sin(2 pi (x - a) / L)`
    Sine,
    /// `sin(s) + 0.5 cos(2 s) + 0.25 sin(3 s)` with `s = 2 pi (x - a) / L`.
    MultiMode,
    /// `max(0, sin s)^2`: a bump next to a flat segment where `h_x = 0`.
    FlatBump,
}

impl Preset {
    pub fn name(&self) -> &'static str {
        match self {
            Preset::Constant => "constant",
            Preset::Sine => "sine",
            Preset::MultiMode => "multi_mode",
            Preset::FlatBump => "flat_bump",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "constant" => Some(Preset::Constant),
            "sine" => Some(Preset::Sine),
            "multi_mode" => Some(Preset::MultiMode),
            "flat_bump" => Some(Preset::FlatBump),
            _ => None,
        }
    }

    pub fn sample(&self, grid: &Grid) -> Result<Field> {
        let (a, len) = (grid.a(), grid.length());
        let phase = move |x: f64| 2.0 * PI * (x - a) / len;
        match self {
            Preset::Constant => Field::constant(*grid, 1.0),
            Preset::Sine => Field::from_fn(*grid, |x| phase(x).sin()),
            Preset::MultiMode => Field::from_fn(*grid, |x| {
                let s = phase(x);
                s.sin() + 0.5 * (2.0 * s).cos() + 0.25 * (3.0 * s).sin()
            }),
            Preset::FlatBump => Field::from_fn(*grid, |x| phase(x).sin().max(0.0).powi(2)),
        }
    }
}

/// Keeps Fourier modes `|k| <= cutoff` and discards the rest.
pub fn fourier_smooth(f: &Field, cutoff: usize) -> Result<Field> {
    let n = f.len();
    if cutoff == 0 || cutoff >= n / 2 {
        return Err(Error::Argument(format!(
            "cutoff must lie in 1..{}, got {cutoff}",
            n / 2
        )));
    }
    let mut planner = FftPlanner::new();
    let mut buf: Vec<Complex<f64>> = f.values().iter().map(|&v| Complex::new(v, 0.0)).collect();
    planner.plan_fft_forward(n).process(&mut buf);
    for (k, c) in buf.iter_mut().enumerate() {
        let k = k.min(n - k);
        if k > cutoff {
            *c = Complex::new(0.0, 0.0);
        }
    }
    planner.plan_fft_inverse(n).process(&mut buf);
    Field::new(*f.grid(), buf.iter().map(|c| c.re / n as f64).collect())
}
