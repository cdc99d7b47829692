//! Acceptance checks. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any fails.

use std::f64::consts::PI;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

use gb_evolve::monitors::{weak_residual_family, EstimateReport};
use gb_evolve::stress::{lp_boundedness_probe, sigma_spectral_oracle};
use gb_evolve::studies::{
    b_sweep, fit_gronwall_rate, gronwall_envelope_holds, kappa_sweep, twin_stability,
};
use gb_evolve::{
    abs_kappa, flux_kappa, make_grid, run, sigma_total, Field, ModelParams, Preset, Scheme,
    SigmaMethod, StepperConfig,
};

type Check = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn within(elapsed: Duration, secs: u64) -> bool {
    elapsed <= Duration::from_secs(secs)
}

fn strictly_decreasing(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite()) && v.windows(2).all(|w| w[1] < w[0])
}

fn fmt_list(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.3e}")).collect();
    format!("[{}]", parts.join(", "))
}

fn circle(n: usize) -> gb_evolve::Grid {
    make_grid(0.0, 2.0 * PI, n).expect("valid grid")
}

/// Parameters in the dominance regime shared by the sweeps.
fn sweep_params() -> ModelParams {
    ModelParams {
        alpha1: 1.0,
        alpha2: 0.05,
        alpha3: 0.1,
        cap_b: 0.5,
        kappa: 0.05,
        ..ModelParams::default()
    }
}

fn sweep_stepper(dt: f64, stride: usize) -> StepperConfig {
    StepperConfig {
        sigma_method: SigmaMethod::KappaTruncated { eps: None },
        ..StepperConfig::fixed_step(dt, 1.0, stride)
    }
}

const SWEEP_N: usize = 256;
const SWEEP_DT: f64 = 4e-3;
const SWEEP_STRIDE: usize = 5;

fn hilbert_pair() -> Outcome {
    let start = Instant::now();
    let g = circle(512);
    let params = ModelParams {
        kbeta: 1.0,
        image_terms: 256,
        ..ModelParams::default()
    };
    let hx = Field::from_fn(g, f64::cos).unwrap();
    let want = Field::from_fn(g, |x| PI * x.sin()).unwrap();
    let direct = sigma_total(&hx, &params, SigmaMethod::DirectPv).unwrap();
    let spectral = sigma_spectral_oracle(&hx, 1.0);
    let e_direct = direct.sub(&want).unwrap().max_abs();
    let e_spec = spectral.sub(&want).unwrap().max_abs();
    let elapsed = start.elapsed();
    outcome(
        e_direct <= 1e-2 && e_spec <= 1e-12 && within(elapsed, 5),
        format!(
            "direct err {e_direct:.3e}, spectral err {e_spec:.3e}, {:.2}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn lp_probe() -> Outcome {
    let start = Instant::now();
    let g = circle(512);
    let square = Field::from_fn(g, |x| if x < PI { 1.0 } else { -1.0 }).unwrap();
    let eps: Vec<f64> = (0..8).map(|k| 0.5 / 2f64.powi(k)).collect();
    let mut worst = 0.0_f64;
    let mut parts = Vec::new();
    for p in [4.0 / 3.0, 2.0, 3.0] {
        let probe = lp_boundedness_probe(&square, p, &eps, None).unwrap();
        worst = worst.max(probe.spread());
        parts.push(format!("p={p:.3}: {:.3}", probe.spread()));
    }
    let elapsed = start.elapsed();
    outcome(
        worst <= 4.0 && within(elapsed, 10),
        format!(
            "spreads {}, {:.2}s",
            parts.join(", "),
            elapsed.as_secs_f64()
        ),
    )
}

fn exact_drift() -> Outcome {
    let g = circle(64);
    let params = ModelParams {
        alpha1: 1.0,
        alpha2: 0.0,
        alpha3: 1.0,
        cap_b: 0.5,
        kappa: 0.0,
        ..ModelParams::default()
    };
    let h0 = Preset::Constant.sample(&g).unwrap();
    let mut errs = Vec::new();
    for scheme in [Scheme::ExplicitEuler, Scheme::SemiImplicit] {
        let cfg = StepperConfig {
            scheme,
            ..StepperConfig::default()
        };
        let err = match run(&h0, &params, &cfg) {
            Ok(traj) => {
                let last = traj.last();
                if (last.t - 1.0).abs() > 1e-12 {
                    f64::INFINITY
                } else {
                    last.h
                        .values()
                        .iter()
                        .map(|v| (v - 0.5).abs())
                        .fold(0.0, f64::max)
                }
            }
            Err(_) => f64::INFINITY,
        };
        errs.push((scheme.name(), err));
    }
    outcome(
        errs.iter().all(|(_, e)| *e <= 1e-10),
        errs.iter()
            .map(|(s, e)| format!("{s} err {e:.3e}"))
            .collect::<Vec<_>>()
            .join(", "),
    )
}

fn conservation() -> Outcome {
    let g = circle(256);
    let params = ModelParams {
        alpha1: 1.0,
        alpha2: 0.0,
        alpha3: 0.0,
        cap_b: 1.0,
        kappa: 0.1,
        ..ModelParams::default()
    };
    let h0 = Preset::Sine.sample(&g).unwrap();
    let (lo, hi) = (h0.min(), h0.max());
    let mut details = Vec::new();
    let mut pass = true;
    for scheme in [Scheme::ExplicitEuler, Scheme::SemiImplicit] {
        let cfg = StepperConfig {
            scheme,
            ..StepperConfig::default()
        };
        let traj = match run(&h0, &params, &cfg) {
            Ok(t) => t,
            Err(e) => {
                pass = false;
                details.push(format!("{}: {e}", scheme.name()));
                continue;
            }
        };
        let m0 = h0.integral();
        let norm = |f: &Field| (f.values().iter().map(|v| v * v).sum::<f64>() * g.dx()).sqrt();
        let mut mass = 0.0_f64;
        let mut growth = 0.0_f64;
        let mut overshoot = 0.0_f64;
        for w in traj.snapshots().windows(2) {
            growth = growth.max(norm(&w[1].h) - norm(&w[0].h));
        }
        for s in traj.snapshots() {
            mass = mass.max((s.h.integral() - m0).abs());
            overshoot = overshoot.max(s.h.max() - hi).max(lo - s.h.min());
        }
        pass &= mass <= 1e-10 && growth <= 1e-10 && overshoot <= 1e-8 && traj.final_time() == 1.0;
        details.push(format!(
            "{}: mass {mass:.1e}, norm growth {growth:.1e}, overshoot {overshoot:.1e}",
            scheme.name()
        ));
    }
    outcome(pass, details.join("; "))
}

fn kappa_uniform() -> Outcome {
    let start = Instant::now();
    let g = circle(SWEEP_N);
    let h0 = Preset::Sine.sample(&g).unwrap();
    let params = sweep_params();
    let kappas = [0.2, 0.1, 0.05, 0.025];
    let sweep = match kappa_sweep(
        &h0,
        &params,
        &sweep_stepper(SWEEP_DT, SWEEP_STRIDE),
        &kappas,
    ) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let finite = sweep
        .reports
        .iter()
        .all(|r| r.is_some_and(|r| r.all_finite_nonnegative()));
    let spreads: Vec<f64> = (0..8).map(|i| sweep.report_spread(i)).collect();
    let (worst_i, worst) = spreads
        .iter()
        .copied()
        .enumerate()
        .fold(
            (0, 0.0),
            |a, (i, s)| if s > a.1 || s.is_nan() { (i, s) } else { a },
        );
    let gaps_ok = strictly_decreasing(&sweep.successive_l2q_gaps)
        && strictly_decreasing(&sweep.successive_hx_gaps);
    outcome(
        params.in_dominance_regime() && finite && worst <= 4.0 && gaps_ok && within(elapsed, 120),
        format!(
            "worst spread {worst:.3} ({}), h gaps {}, h_x gaps {}, {:.1}s",
            EstimateReport::FIELD_NAMES[worst_i],
            fmt_list(&sweep.successive_l2q_gaps),
            fmt_list(&sweep.successive_hx_gaps),
            elapsed.as_secs_f64()
        ),
    )
}

fn weak_form() -> Outcome {
    let params = sweep_params().with_kappa(0.05);
    let residual = |n: usize, dt: f64| -> Result<f64, String> {
        let h0 = Preset::Sine.sample(&circle(n)).map_err(|e| e.to_string())?;
        let traj =
            run(&h0, &params, &sweep_stepper(dt, SWEEP_STRIDE)).map_err(|e| e.to_string())?;
        weak_residual_family(&traj, false).map_err(|e| e.to_string())
    };
    let (coarse, fine) = match (
        residual(SWEEP_N, SWEEP_DT),
        residual(2 * SWEEP_N, SWEEP_DT / 2.0),
    ) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e),
    };
    let factor = coarse / fine;
    outcome(
        factor >= 1.5,
        format!("residual {coarse:.3e} -> {fine:.3e}, factor {factor:.2}"),
    )
}

fn b_limit() -> Outcome {
    let start = Instant::now();
    let g = circle(SWEEP_N);
    let h0 = Preset::FlatBump.sample(&g).unwrap();
    let bs = [0.5, 0.25, 0.125, 0.0625];
    // kappa = 0 throughout, so consecutive members differ only in B.
    let params = sweep_params().with_kappa(0.0);
    let cfg = StepperConfig {
        sigma_method: SigmaMethod::DirectPv,
        ..sweep_stepper(SWEEP_DT, SWEEP_STRIDE)
    };
    let sweep = match b_sweep(&h0, &params, &cfg, &bs, true) {
        Ok(s) => s,
        Err(e) => return outcome(false, e.to_string()),
    };
    let elapsed = start.elapsed();
    let diverged: Vec<String> = sweep
        .diverged()
        .map(|(v, e)| format!("B={v}: {e}"))
        .collect();
    // The Cauchy check runs over the halving positive levels; the last entry
    // is the distance from the smallest positive B to the degenerate run.
    let gaps = &sweep.successive_l2q_gaps;
    let (cauchy, to_limit) = gaps.split_at(bs.len() - 1);
    let gaps_ok =
        strictly_decreasing(cauchy) && to_limit.iter().all(|g| g.is_finite() && *g < cauchy[0]);
    let corners = &sweep.corner_metrics;
    let corners_ok =
        corners.iter().all(|c| c.is_finite()) && corners.windows(2).all(|w| w[1] >= w[0]);
    let flux = &sweep.flux_time_norms;
    let flux_max = flux.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let flux_min = flux.iter().copied().fold(f64::INFINITY, f64::min);
    let flux_ok = flux.iter().all(|v| v.is_finite() && *v > 0.0) && flux_max / flux_min <= 4.0;
    let mut detail = format!(
        "gaps {} then {} to B=0, corners {}, flux norms {} (spread {:.2}), {:.1}s",
        fmt_list(cauchy),
        fmt_list(to_limit),
        fmt_list(corners),
        fmt_list(flux),
        flux_max / flux_min,
        elapsed.as_secs_f64()
    );
    if !diverged.is_empty() {
        detail.push_str(&format!(", diverged: {}", diverged.join("; ")));
    }
    outcome(
        diverged.is_empty() && gaps_ok && corners_ok && flux_ok && within(elapsed, 180),
        detail,
    )
}

fn uniqueness() -> Outcome {
    let g = circle(SWEEP_N);
    let params = sweep_params();
    let cfg = sweep_stepper(SWEEP_DT, SWEEP_STRIDE);
    let h0 = Preset::Sine.sample(&g).unwrap();
    let delta = 1e-3;
    let bump = Field::from_fn(g, |x| (3.0 * x).cos() + 0.5 * (5.0 * x).sin()).unwrap();
    let norm = (bump.values().iter().map(|v| v * v).sum::<f64>() * g.dx()).sqrt();
    let twin = |d: f64| twin_stability(&h0, &h0.axpy(d / norm, &bump)?, &params, &cfg);
    let (gaps, half) = match (twin(delta), twin(0.5 * delta)) {
        (Ok(a), Ok(b)) => (a, b),
        (Err(e), _) | (_, Err(e)) => return outcome(false, e.to_string()),
    };
    let same = match twin_stability(&h0, &h0, &params, &cfg) {
        Ok(g) => g.iter().map(|(_, v)| *v).fold(0.0, f64::max),
        Err(e) => return outcome(false, e.to_string()),
    };
    let t_end = gaps.last().map_or(0.0, |s| s.0);
    let rate = fit_gronwall_rate(&gaps, delta, 0.5 * t_end);
    let holds = gronwall_envelope_holds(&gaps, delta, rate, 0.5 * t_end);
    let final_gap = gaps.last().map_or(f64::NAN, |s| s.1);
    let envelope = delta * (rate * t_end).exp();
    let linearity = final_gap / half.last().map_or(f64::NAN, |s| s.1);
    outcome(
        (t_end - 1.0).abs() < 1e-12
            && holds
            && final_gap <= envelope
            && (1.5..=2.5).contains(&linearity)
            && same <= 1e-13,
        format!(
            "fitted C {rate:.3}, final gap {final_gap:.3e} <= {envelope:.3e}, delta/2 ratio {linearity:.3}, identical twin gap {same:.1e}"
        ),
    )
}

fn integral(f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    quadrature::integrate(f, a, b, 1e-13).integral
}

fn regularization_suite() -> Outcome {
    let mut rng = StdRng::seed_from_u64(20_240_601);
    let mut quad_err = 0.0_f64;
    for _ in 0..100 {
        let p = rng.gen_range(-5.0..5.0);
        let k = rng.gen_range(0.0..1.0);
        let exact = flux_kappa(p, k).unwrap();
        let oracle = integral(|y: f64| (y * y + k * k).sqrt(), 0.0, p.abs()) * p.signum();
        let scale = 1.0_f64.max(exact.abs());
        quad_err = quad_err.max((exact - oracle).abs() / scale);
    }
    let mut violations = [0usize; 4];
    for _ in 0..1000 {
        let p = rng.gen_range(-10.0..10.0);
        let q = rng.gen_range(-10.0..10.0);
        let k = rng.gen_range(0.0..1.0);
        let a = abs_kappa(p, k).unwrap();
        if !(p.abs() <= a && a <= p.abs() + k) {
            violations[0] += 1;
        }
        let (f, fm) = (flux_kappa(p, k).unwrap(), flux_kappa(-p, k).unwrap());
        if f + fm != 0.0 {
            violations[1] += 1;
        }
        if p * f < 0.5 * p.abs().powi(3) * (1.0 - 1e-12) {
            violations[2] += 1;
        }
        let fq = flux_kappa(q, k).unwrap();
        if (f - fq) * (p - q) < -1e-12 {
            violations[3] += 1;
        }
    }
    outcome(
        quad_err <= 1e-10 && violations.iter().all(|&v| v == 0),
        format!(
            "quadrature err {quad_err:.2e}; violations sandwich {}, oddness {}, coercivity {}, monotonicity {}",
            violations[0], violations[1], violations[2], violations[3]
        ),
    )
}

fn main() -> ExitCode {
    let checks: [Check; 9] = [
        ("hilbert pair oracle", hilbert_pair),
        ("Lp boundedness probe", lp_probe),
        ("exact drift solution", exact_drift),
        ("conservation and dissipation", conservation),
        ("kappa-uniform estimates", kappa_uniform),
        ("weak-form residual refinement", weak_form),
        ("B -> 0 study", b_limit),
        ("twin-run stability", uniqueness),
        ("regularization invariants", regularization_suite),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let o = check();
        let tag = if o.pass { "PASS" } else { "FAIL" };
        println!("[{tag}] criterion {}: {name}: {}", i + 1, o.detail);
        if !o.pass {
            failed += 1;
        }
    }
    println!(
        "{} of {} criteria passed",
        checks.len() - failed,
        checks.len()
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
