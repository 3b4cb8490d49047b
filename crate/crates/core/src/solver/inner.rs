//! Damped Gauss-Newton minimisation of `E_p^sigma` at fixed `p`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functional::{gradient_parts, scaled_gradient, EnergyParams, GradientParts};
use crate::grid::ScalarField;
use crate::linalg::BandMatrix;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InnerOptions {
    pub max_iterations: usize,
    /// Relative gradient tolerance: `||grad / w||_inf <= tol * max(1, E)`.
    pub gradient_tol: f64,
    /// Relative tolerance on the Newton decrement `|g . d| / 2`.
    pub decrement_tol: f64,
    /// Consecutive failed model steps before a gradient step is taken.
    pub model_failures: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            gradient_tol: 1e-9,
            decrement_tol: 1e-13,
            model_failures: 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnerExit {
    Gradient,
    Decrement,
    /// No trial point resolves a decrease in floating point while the model
    /// predicts one below the decrement tolerance scaled by 100.
    RoundingFloor,
    IterationCap,
    LineSearch,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InnerReport {
    pub converged: bool,
    pub exit: InnerExit,
    pub iterations: usize,
    pub accepted_steps: usize,
    pub gradient_steps: usize,
    pub start_energy: f64,
    pub energy: f64,
    /// `||grad / w||_inf` at exit.
    pub gradient_norm: f64,
    pub decrement: f64,
}

const MAX_POLISH: usize = 20;

struct Model {
    matrix: BandMatrix,
    /// `E_p` gradient direction and its rank-one weight.
    rank_one: Option<(Vec<f64>, f64)>,
}

fn model(spec: &ProblemSpec, params: &EnergyParams, gp: &GradientParts) -> Model {
    let g = spec.grid();
    let vol = g.measured_volume();
    let measured = g.measured_nodes();
    let m = &gp.multipliers;
    let p = params.p;
    let e = m.e_p;
    let l = &gp.linearization;
    let mut bw = l.normal_bandwidth();
    let pen = params.sigma > 0.0 && params.anchor.is_some();
    let k = pen.then(|| spec.assemble_principal());
    if let Some(k) = &k {
        bw = bw.max(k.normal_bandwidth());
    }
    let mut matrix = BandMatrix::zeros(l.cols(), bw, bw);
    let mut rank_one = None;
    if e > 0.0 {
        // Hessian of the mean p-norm in S: diag - rank one, both PSD together
        let diag: Vec<f64> = measured
            .iter()
            .map(|&n| {
                let s = m.f_p.values()[n];
                // |S/e|^(p-2) = |f|^((p-2)/(p-1))
                let ratio = if s == 0.0 { 0.0 } else { (s.abs().ln() * (p - 2.0) / (p - 1.0)).exp() };
                g.weight(n) / vol * (p - 1.0) / e * ratio
            })
            .collect();
        matrix.add_normal(l, &diag, 1.0);
        rank_one = Some((gp.gradient_ep.clone(), (p - 1.0) / e));
    }
    if let (Some(k), Some(_)) = (&k, &params.anchor) {
        let a = m.a_p;
        let p0 = params.p0;
        let diag: Vec<f64> = measured
            .iter()
            .map(|&n| {
                let phi = m.phi_p.values()[n];
                // |q/a|^(p0-2) = |phi/a|^((p0-2)/(p0-1))
                let ratio = if a == 0.0 || p0 == 2.0 {
                    1.0
                } else if phi == 0.0 {
                    0.0
                } else {
                    ((phi / a).abs().ln() * (p0 - 2.0) / (p0 - 1.0)).exp()
                };
                2.0 * params.sigma * (p0 - 1.0) * g.weight(n) * ratio
            })
            .collect();
        matrix.add_normal(k, &diag, 1.0);
    }
    Model { matrix, rank_one }
}

impl Model {
    /// Solves `(H + mu max(diag H) I) d = -g` with the rank-one part by Sherman-Morrison.
    fn step(&self, gradient: &[f64], mu: f64) -> Option<Vec<f64>> {
        let mut b = self.matrix.clone();
        let dmax = b.diagonal().into_iter().fold(0.0_f64, f64::max);
        let shift = mu * if dmax > 0.0 { dmax } else { 1.0 };
        for i in 0..b.size() {
            b.add(i, i, shift);
        }
        let lu = b.factor().ok()?;
        let rhs: Vec<f64> = gradient.iter().map(|v| -v).collect();
        let mut d = lu.solve(&rhs);
        if let Some((v, c)) = &self.rank_one {
            let bv = lu.solve(v);
            let vbv: f64 = v.iter().zip(&bv).map(|(a, b)| a * b).sum();
            let denom = 1.0 - c * vbv;
            if denom > 1e-8 {
                let vd: f64 = v.iter().zip(&d).map(|(a, b)| a * b).sum();
                let t = c * vd / denom;
                for (x, y) in d.iter_mut().zip(&bv) {
                    *x += t * y;
                }
            }
        }
        d.iter().all(|v| v.is_finite()).then_some(d)
    }
}

fn energy_at(spec: &ProblemSpec, params: &EnergyParams, u: &ScalarField) -> f64 {
    crate::functional::energy_p(spec, u, params).unwrap_or(f64::INFINITY)
}

fn shifted(spec: &ProblemSpec, free: &[f64], d: &[f64], t: f64) -> Option<ScalarField> {
    let x: Vec<f64> = free.iter().zip(d).map(|(a, b)| a + t * b).collect();
    spec.boundary().assemble(&x).ok()
}

fn free_values(spec: &ProblemSpec, u: &ScalarField) -> Vec<f64> {
    spec.grid().free_nodes().iter().map(|&k| u.values()[k]).collect()
}

pub fn minimize_inner(
    spec: &ProblemSpec,
    params: &EnergyParams,
    warm_start: &ScalarField,
    options: &InnerOptions,
) -> Result<(ScalarField, InnerReport)> {
    params.validate(spec.grid().dim())?;
    let grid = spec.grid().clone();
    let mut u = spec.boundary().clamped(warm_start)?;
    let mut gp = gradient_parts(spec, &u, params)?;
    let start_energy = gp.parts.total;
    let mut energy = start_energy;
    let mut mu = 1e-8;
    let mut failures = 0usize;
    let (mut accepted, mut gradient_steps) = (0usize, 0usize);
    let mut decrement = f64::INFINITY;
    let mut iterations = 0usize;
    let mut polish = 0usize;
    // rounding level of the quadrature sum behind the energy
    let noise = 8.0 * f64::EPSILON * grid.measured_nodes().len() as f64;
    let exit = loop {
        let scale = energy.max(1.0);
        let gnorm = scaled_gradient(&grid, &gp.gradient).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if gnorm <= options.gradient_tol * scale {
            break InnerExit::Gradient;
        }
        if iterations >= options.max_iterations {
            break InnerExit::IterationCap;
        }
        iterations += 1;
        let free = free_values(spec, &u);
        let use_gradient = failures >= options.model_failures;
        let d = if use_gradient {
            scaled_gradient(&grid, &gp.gradient).into_iter().map(|v| -v).collect()
        } else {
            match model(spec, params, &gp).step(&gp.gradient, mu) {
                Some(d) => d,
                None => {
                    mu *= 10.0;
                    failures += 1;
                    continue;
                }
            }
        };
        let slope: f64 = gp.gradient.iter().zip(&d).map(|(a, b)| a * b).sum();
        if !(slope < 0.0) {
            failures += 1;
            mu *= 10.0;
            continue;
        }
        decrement = 0.5 * slope.abs();
        if decrement <= options.decrement_tol * scale && !use_gradient && mu <= 1e-6 {
            // energy changes are now below rounding; take full steps only
            // while they shrink the gradient
            if polish >= MAX_POLISH {
                break InnerExit::Decrement;
            }
            let Some(trial) = shifted(spec, &free, &d, 1.0) else {
                break InnerExit::Decrement;
            };
            let tp = gradient_parts(spec, &trial, params)?;
            let tnorm = scaled_gradient(&grid, &tp.gradient).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
            if tnorm <= 0.5 * gnorm && tp.parts.total <= energy + noise * scale {
                polish += 1;
                accepted += 1;
                u = trial;
                energy = tp.parts.total;
                gp = tp;
                continue;
            }
            break InnerExit::Decrement;
        }
        let mut t = 1.0;
        let mut found = None;
        for _ in 0..40 {
            if let Some(trial) = shifted(spec, &free, &d, t) {
                let e = energy_at(spec, params, &trial);
                if e <= energy + 1e-4 * t * slope {
                    found = Some((trial, e));
                    break;
                }
            }
            t *= 0.5;
        }
        match found {
            Some((trial, e)) => {
                accepted += 1;
                if use_gradient {
                    gradient_steps += 1;
                }
                failures = 0;
                mu = if t == 1.0 { (mu / 3.0).max(1e-15) } else { mu * 2.0 };
                u = trial;
                energy = e;
                gp = gradient_parts(spec, &u, params)?;
                if !gp.parts.total.is_finite() {
                    return Err(Error::NonFiniteEnergy { node: 0 });
                }
            }
            None => {
                if decrement <= 100.0 * options.decrement_tol * scale {
                    break InnerExit::RoundingFloor;
                }
                failures += 1;
                mu *= 10.0;
                if use_gradient && failures > options.model_failures + 5 {
                    break InnerExit::LineSearch;
                }
            }
        }
    };
    let gradient_norm = scaled_gradient(&grid, &gp.gradient).iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let converged = matches!(exit, InnerExit::Gradient | InnerExit::Decrement | InnerExit::RoundingFloor);
    Ok((
        u,
        InnerReport {
            converged,
            exit,
            iterations,
            accepted_steps: accepted,
            gradient_steps,
            start_energy,
            energy: gp.parts.total,
            gradient_norm,
            decrement: if decrement.is_finite() { decrement } else { 0.0 },
        },
    ))
}
