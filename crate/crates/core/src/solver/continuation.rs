//! Outer doubling of `p` with warm starts.

use serde::{Deserialize, Serialize};

use super::inner::{minimize_inner, InnerExit, InnerOptions};
use super::kernel::{solve_adjoint_kernel, KernelResult};
use crate::error::{Error, Result};
use crate::functional::{
    duality_identity_residual, energy_parts, extract_multipliers, gradient_parts, measured_norm, normalization_residual,
    scaled_gradient, EnergyParams, MultiplierSet,
};
use crate::grid::ScalarField;
use crate::problem::ProblemSpec;

#[derive(Debug, Clone, PartialEq)]
pub enum Mode {
    /// `sigma = 0`.
    Construct,
    /// Penalised runs anchored at a candidate; `sigma = None` picks the default.
    Certify { anchor: ScalarField, sigma: Option<f64> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeTag {
    Construct,
    Certify,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContinuationOptions {
    pub p_start: f64,
    pub p_max: f64,
    /// Relative change in `e_p` that counts as settled.
    pub settle_tol: f64,
    /// Settled doublings in a row before stopping early.
    pub settle_count: usize,
    /// `e_p` below `kernel_threshold * (1 + ||A : D^2 u||_inf)` triggers the adjoint kernel solve.
    pub kernel_threshold: f64,
    /// Penalty exponent; `None` means `dim + 1`.
    pub p0: Option<f64>,
    pub sigma_check: bool,
    pub inner: InnerOptions,
}

impl Default for ContinuationOptions {
    fn default() -> Self {
        Self {
            p_start: 2.0,
            p_max: 256.0,
            settle_tol: 1e-3,
            settle_count: 2,
            kernel_threshold: 1e-8,
            p0: None,
            sigma_check: true,
            inner: InnerOptions::default(),
        }
    }
}

impl ContinuationOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.p_start >= 2.0 && self.p_max >= self.p_start && self.p_max.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "need 2 <= p_start <= p_max < inf, got {} and {}",
                self.p_start, self.p_max
            )));
        }
        if !(self.settle_tol > 0.0) || self.inner.max_iterations == 0 {
            return Err(Error::InvalidParameter("settle_tol and max_iterations must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.p_start];
        while out.last().unwrap() * 2.0 <= self.p_max * (1.0 + 1e-12) {
            out.push(out.last().unwrap() * 2.0);
        }
        out
    }
}

/// One continuation level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelRecord {
    pub p: f64,
    pub e_p: f64,
    pub a_p: f64,
    /// `E_p^sigma(u_p)`.
    pub energy: f64,
    pub iterations: usize,
    pub grad_norm: f64,
    pub converged: bool,
    pub exit: InnerExit,
    /// Energy of the warm start at this level.
    pub warm_energy: f64,
    /// Energy of the clamped extension `u0` at this level.
    pub cold_energy: f64,
    pub normalization_residual: f64,
    pub duality_residual: f64,
    /// Relative mismatch between the assembled adjoint residual and
    /// `|Omega|` times the scaled gradient.
    pub stationarity_mismatch: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SigmaCheck {
    pub sigma: f64,
    pub e_p: f64,
    pub e_p_doubled: f64,
    pub relative_change: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ContinuationState {
    pub mode: ModeTag,
    pub schedule: Vec<f64>,
    /// Index into `schedule` of the last level solved.
    pub index: usize,
    pub sigma: f64,
    pub p0: f64,
    pub u: ScalarField,
    pub multipliers: MultiplierSet,
    pub history: Vec<LevelRecord>,
    pub early_stop: bool,
    /// Certify mode: `a_p` nonincreasing from `p = 8` on.
    pub a_decreasing: Option<bool>,
    pub sigma_check: Option<SigmaCheck>,
    pub kernel: Option<KernelResult>,
}

impl ContinuationState {
    pub fn converged(&self) -> bool {
        self.history.iter().all(|r| r.converged)
    }

    pub fn e_infty_estimate(&self) -> f64 {
        self.history.last().map_or(0.0, |r| r.e_p)
    }

    /// Largest drop `E_{p_k} - E_{p_{k+1}}` along the recorded energies.
    pub fn monotonicity_defect(&self) -> f64 {
        self.history
            .windows(2)
            .map(|w| (w[0].energy - w[1].energy).max(0.0))
            .fold(0.0, f64::max)
    }
}

/// `10 (E_2(u*) + 1) / (||A : D^2 u*||^2_{L^p0} + 1)`.
pub fn default_sigma(spec: &ProblemSpec, anchor: &ScalarField, p0: f64) -> Result<f64> {
    let e2 = energy_parts(spec, anchor, &EnergyParams::plain(2.0, spec.grid().dim()))?.e_p;
    let k = spec.principal(anchor);
    let n = measured_norm(spec.grid(), k.values(), p0);
    Ok(10.0 * (e2 + 1.0) / (n * n + 1.0))
}

fn stationarity_mismatch(spec: &ProblemSpec, u: &ScalarField, params: &EnergyParams) -> Result<f64> {
    let g = spec.grid();
    let gp = gradient_parts(spec, u, params)?;
    let scaled = scaled_gradient(g, &gp.gradient);
    let m = &gp.multipliers;
    let vol = g.measured_volume();
    let measured = g.measured_nodes();
    let mut residual = spec.apply_adjoint(u, &m.f_p)?.into_values();
    // size of the summed terms, so cancellation to rounding level is not
    // mistaken for a mismatch
    let wf: Vec<f64> = measured.iter().map(|&n| g.weight(n) * m.f_p.values()[n].abs()).collect();
    let mut terms = gp.linearization.tr_abs_mul_vec(&wf);
    if params.sigma > 0.0 {
        let k = spec.assemble_principal();
        let wphi: Vec<f64> = measured.iter().map(|&n| g.weight(n) * m.phi_p.values()[n]).collect();
        let t = k.tr_mul_vec(&wphi);
        let wabs: Vec<f64> = wphi.iter().map(|v| v.abs()).collect();
        let ta = k.tr_abs_mul_vec(&wabs);
        for (slot, &n) in g.free_nodes().iter().enumerate() {
            residual[n] += 2.0 * params.sigma * vol * t[slot] / g.weight(n);
            terms[slot] += 2.0 * params.sigma * vol * ta[slot];
        }
    }
    let (mut diff, mut size) = (0.0_f64, 0.0_f64);
    for (slot, &n) in g.free_nodes().iter().enumerate() {
        diff = diff.max((residual[n] - vol * scaled[slot]).abs());
        size = size.max(residual[n].abs()).max(terms[slot] / g.weight(n));
    }
    Ok(if size == 0.0 { diff } else { diff / size })
}

pub fn run_continuation(spec: &ProblemSpec, mode: &Mode, options: &ContinuationOptions) -> Result<ContinuationState> {
    options.validate()?;
    let dim = spec.grid().dim();
    let p0 = options.p0.unwrap_or(dim as f64 + 1.0);
    let (tag, anchor, sigma) = match mode {
        Mode::Construct => (ModeTag::Construct, None, 0.0),
        Mode::Certify { anchor, sigma } => {
            let anchor = spec.boundary().clamped(anchor)?;
            let s = match sigma {
                Some(s) => *s,
                None => default_sigma(spec, &anchor, p0)?,
            };
            (ModeTag::Certify, Some(anchor), s)
        }
    };
    let base = EnergyParams {
        p: options.p_start,
        sigma,
        anchor: anchor.clone(),
        p0,
    };
    base.validate(dim)?;
    let schedule = options.schedule();
    let u0 = spec.boundary().u0().clone();
    let mut u = anchor.clone().unwrap_or_else(|| u0.clone());
    let mut history: Vec<LevelRecord> = Vec::new();
    let mut settled = 0usize;
    let mut index = 0;
    let mut early_stop = false;
    for (i, &p) in schedule.iter().enumerate() {
        let params = base.with_p(p);
        let cold_energy = energy_parts(spec, &u0, &params)?.total;
        let (next, report) = minimize_inner(spec, &params, &u, &options.inner)?;
        u = next;
        let m = extract_multipliers(spec, &u, &params)?;
        let parts = energy_parts(spec, &u, &params)?;
        let duality = duality_identity_residual(spec, &u, &m)?;
        history.push(LevelRecord {
            p,
            e_p: parts.e_p,
            a_p: parts.a_p,
            energy: parts.total,
            iterations: report.iterations,
            grad_norm: report.gradient_norm,
            converged: report.converged,
            exit: report.exit,
            warm_energy: report.start_energy,
            cold_energy,
            normalization_residual: normalization_residual(spec.grid(), &m, p),
            duality_residual: duality.relative,
            stationarity_mismatch: stationarity_mismatch(spec, &u, &params)?,
        });
        index = i;
        if let [.., prev, last] = history.as_slice() {
            let change = if prev.e_p == 0.0 && last.e_p == 0.0 {
                0.0
            } else {
                (last.e_p - prev.e_p).abs() / prev.e_p.max(last.e_p)
            };
            settled = if change < options.settle_tol { settled + 1 } else { 0 };
            if settled >= options.settle_count && i + 1 < schedule.len() {
                early_stop = true;
                break;
            }
        }
    }
    let last_p = schedule[index];
    let params = base.with_p(last_p);
    let multipliers = extract_multipliers(spec, &u, &params)?;

    let a_decreasing = (tag == ModeTag::Certify).then(|| {
        let tail: Vec<f64> = history.iter().filter(|r| r.p >= 8.0).map(|r| r.a_p).collect();
        tail.windows(2).all(|w| w[1] <= w[0] * (1.0 + 1e-6) + 1e-12)
    });
    let sigma_check = if tag == ModeTag::Certify && options.sigma_check {
        let doubled = EnergyParams {
            sigma: 2.0 * sigma,
            ..params.clone()
        };
        let (v, _) = minimize_inner(spec, &doubled, &u, &options.inner)?;
        let e2 = energy_parts(spec, &v, &params)?.e_p;
        let e1 = multipliers.e_p;
        Some(SigmaCheck {
            sigma,
            e_p: e1,
            e_p_doubled: e2,
            relative_change: if e1 == 0.0 { (e2 - e1).abs() } else { (e2 - e1).abs() / e1 },
        })
    } else {
        None
    };

    let scale = 1.0 + measured_sup(spec, &spec.principal(&u));
    let kernel = if multipliers.e_p <= options.kernel_threshold * scale {
        Some(solve_adjoint_kernel(spec, &u)?)
    } else {
        None
    };
    Ok(ContinuationState {
        mode: tag,
        schedule,
        index,
        sigma,
        p0,
        u,
        multipliers,
        history,
        early_stop,
        a_decreasing,
        sigma_check,
        kernel,
    })
}

fn measured_sup(spec: &ProblemSpec, f: &ScalarField) -> f64 {
    spec.grid()
        .measured_nodes()
        .iter()
        .map(|&k| f.values()[k].abs())
        .fold(0.0, f64::max)
}
