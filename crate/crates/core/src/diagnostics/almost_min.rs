//! Random clamped perturbations against `E_inf(u) <= E_inf(u + phi) + M ||phi||^2_{W^{1,inf}}`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::bumps::{tensor_family, w1_inf_norm};
use crate::error::{Error, Result};
use crate::grid::{gradient, ScalarField};
use crate::problem::ProblemSpec;

pub const THREADS_ENV: &str = "LINFEL_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct McOptions {
    /// Perturbation directions; consecutive pairs are `phi`, `-phi`.
    pub trials: usize,
    /// Target `W^{1,inf}` norms; every direction is tried at each.
    pub amplitudes: Vec<f64>,
    /// Bumps per direction.
    pub modes: usize,
    /// Added to `2 C_2` to form the admissible constant.
    pub tolerance: f64,
    /// Worker cap; `None` reads `LINFEL_THREADS`, default 1.
    pub threads: Option<usize>,
}

impl Default for McOptions {
    fn default() -> Self {
        Self {
            trials: 200,
            amplitudes: vec![1e-1, 1e-2, 1e-3],
            modes: 4,
            tolerance: 1e-6,
            threads: None,
        }
    }
}

impl McOptions {
    pub fn validate(&self) -> Result<()> {
        if self.trials == 0 || self.modes == 0 || self.amplitudes.is_empty() {
            return Err(Error::InvalidParameter("trials, modes and amplitudes must be nonempty".into()));
        }
        if self.amplitudes.iter().any(|a| !(*a > 0.0 && a.is_finite())) || !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter("amplitudes must be positive and tolerance nonnegative".into()));
        }
        Ok(())
    }

    fn workers(&self) -> usize {
        self.threads
            .or_else(|| std::env::var(THREADS_ENV).ok().and_then(|v| v.parse().ok()))
            .unwrap_or(1)
            .clamp(1, self.trials)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeStats {
    pub amplitude: f64,
    /// Largest `(E_inf(u) - E_inf(u + phi)) / ||phi||^2`.
    pub max_d: f64,
    pub violations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlmostMinStats {
    pub trials: usize,
    pub violations: usize,
    /// Largest observed quotient over all trials and amplitudes.
    pub fitted_m: f64,
    pub c2_bound: f64,
    /// `2 C_2 + tolerance`.
    pub admissible_m: f64,
    pub per_amplitude: Vec<AmplitudeStats>,
    /// The quotient at the smallest amplitude stays within a factor 10 of
    /// its value at the largest (or of the admissible constant).
    pub scaling_stable: bool,
    /// Pairs `(phi, -phi)` in which neither side lowers `E_inf` by more than
    /// the admissible quadratic amount.
    pub consistent_pairs: usize,
    pub almost_minimising: bool,
}

fn sup_measured(spec: &ProblemSpec, v: &[f64]) -> f64 {
    spec.grid().measured_nodes().iter().map(|&k| v[k].abs()).fold(0.0, f64::max)
}

/// `S(u + phi) - S(u)` computed from `phi` directly so that small
/// perturbations are not lost to cancellation.
fn residual_change(spec: &ProblemSpec, u: &ScalarField, du: &[[f64; 2]], phi: &ScalarField) -> Vec<f64> {
    let g = spec.grid();
    let dphi = gradient(phi);
    let mut out = spec.principal(phi).into_values();
    for &k in g.measured_nodes() {
        let x = g.coords(k);
        let (y, z) = (u.values()[k], du[k]);
        let dy = phi.values()[k];
        let dz = [dphi[k][0], dphi[k][1]];
        let after = spec.reaction().eval(x, y + dy, [z[0] + dz[0], z[1] + dz[1]]);
        let before = spec.reaction().eval(x, y, z);
        out[k] += after - before;
    }
    out
}

fn direction(spec: &ProblemSpec, options: &McOptions, seed: u64, pair: usize) -> Result<ScalarField> {
    let g = spec.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(pair as u64);
    let bumps = tensor_family(g, options.modes, &mut rng)?;
    let mut values = vec![0.0; g.node_count()];
    for b in bumps {
        let c = 2.0 * rng.random::<f64>() - 1.0;
        for (v, s) in values.iter_mut().zip(b.sample(g).values()) {
            *v += c * s;
        }
    }
    ScalarField::new(g.clone(), values)
}

/// The unperturbed field and what the trials reuse from it.
struct Baseline {
    u: ScalarField,
    s_u: Vec<f64>,
    e_u: f64,
    du: Vec<[f64; 2]>,
}

/// Quotients for trial `i` at every amplitude.
fn run_trial(spec: &ProblemSpec, base: &Baseline, options: &McOptions, seed: u64, i: usize) -> Result<Vec<f64>> {
    let Baseline { u, s_u, e_u, du } = base;
    let dir = direction(spec, options, seed, i / 2)?;
    let norm = w1_inf_norm(&dir);
    let sign = if i % 2 == 0 { 1.0 } else { -1.0 };
    options
        .amplitudes
        .iter()
        .map(|&amp| {
            let phi = dir.with_values(dir.values().iter().map(|v| sign * amp * v / norm).collect())?;
            let size = w1_inf_norm(&phi);
            let change = residual_change(spec, u, du, &phi);
            let after: Vec<f64> = s_u.iter().zip(&change).map(|(a, b)| a + b).collect();
            Ok((e_u - sup_measured(spec, &after)) / (size * size))
        })
        .collect()
}

pub fn almost_minimiser_mc(spec: &ProblemSpec, u: &ScalarField, options: &McOptions, seed: u64) -> Result<AlmostMinStats> {
    options.validate()?;
    let u = spec.boundary().clamped(u)?;
    let s_u = spec.eval_s(&u)?.into_values();
    let base = Baseline {
        e_u: sup_measured(spec, &s_u),
        du: gradient(&u),
        s_u,
        u,
    };
    let radius = options.amplitudes.iter().copied().fold(0.0, f64::max);
    let c2 = spec.taylor_remainder_bound(&base.u, radius, 5)?.c2;
    let admissible = 2.0 * c2 + options.tolerance;

    let workers = options.workers();
    let chunk = options.trials.div_ceil(workers);
    let results: Vec<Result<Vec<Vec<f64>>>> = std::thread::scope(|scope| {
        let handles: Vec<_> = (0..workers)
            .map(|w| {
                let base = &base;
                scope.spawn(move || {
                    let end = ((w + 1) * chunk).min(options.trials);
                    (w * chunk..end)
                        .map(|i| run_trial(spec, base, options, seed, i))
                        .collect::<Result<Vec<_>>>()
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("trial worker panicked")).collect()
    });
    let mut quotients = Vec::with_capacity(options.trials);
    for r in results {
        quotients.extend(r?);
    }

    let mut per_amplitude: Vec<AmplitudeStats> = options
        .amplitudes
        .iter()
        .map(|&amplitude| AmplitudeStats {
            amplitude,
            max_d: f64::NEG_INFINITY,
            violations: 0,
        })
        .collect();
    for q in &quotients {
        for (stat, &d) in per_amplitude.iter_mut().zip(q) {
            stat.max_d = stat.max_d.max(d);
            if d > admissible {
                stat.violations += 1;
            }
        }
    }
    let consistent_pairs = quotients
        .chunks(2)
        .filter(|pair| pair.iter().all(|q| q.iter().all(|&d| d <= admissible)))
        .count();
    let violations = per_amplitude.iter().map(|s| s.violations).sum();
    let fitted_m = per_amplitude.iter().map(|s| s.max_d).fold(f64::NEG_INFINITY, f64::max);
    let by_size = |big: bool| {
        per_amplitude
            .iter()
            .max_by(|a, b| {
                let o = a.amplitude.total_cmp(&b.amplitude);
                if big {
                    o
                } else {
                    o.reverse()
                }
            })
            .map_or(0.0, |s| s.max_d)
    };
    let scaling_stable = by_size(false) <= 10.0 * by_size(true).max(admissible);
    Ok(AlmostMinStats {
        trials: options.trials,
        violations,
        fitted_m,
        c2_bound: c2,
        admissible_m: admissible,
        per_amplitude,
        scaling_stable,
        consistent_pairs,
        almost_minimising: violations == 0,
    })
}
