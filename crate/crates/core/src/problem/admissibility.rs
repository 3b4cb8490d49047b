//! Advisory checks of the sign and growth conditions for `b = g(u)`.

use serde::{Deserialize, Serialize};

use super::reaction::ScalarReaction;

/// Adaptive Simpson quadrature of `f` over `[a, b]`.
pub fn adaptive_simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(fa: f64, fm: f64, fb: f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (fa + 4.0 * fm + fb)
    }
    #[allow(clippy::too_many_arguments)]
    fn recurse(
        f: &dyn Fn(f64) -> f64,
        a: f64,
        b: f64,
        fa: f64,
        fm: f64,
        fb: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
        let (flm, frm) = (f(lm), f(rm));
        let left = simpson(fa, flm, fm, a, m);
        let right = simpson(fm, frm, fb, m, b);
        let delta = left + right - whole;
        if depth == 0 || delta.abs() <= 15.0 * tol {
            left + right + delta / 15.0
        } else {
            recurse(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
                + recurse(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
        }
    }
    if a == b {
        return 0.0;
    }
    let (fa, fm, fb) = (f(a), f(0.5 * (a + b)), f(b));
    let whole = simpson(fa, fm, fb, a, b);
    recurse(f, a, b, fa, fm, fb, whole, tol, 48)
}

/// `G(y) = int_0^y g` by adaptive quadrature.
pub fn antiderivative_numeric(g: &ScalarReaction, y: f64) -> f64 {
    let scale = g.g(y).abs().max(g.g(0.5 * y).abs()).max(1.0) * y.abs().max(1.0);
    adaptive_simpson(&|t| g.g(t), 0.0, y, 1e-15 * scale)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaSample {
    pub y: f64,
    pub alpha: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityReport {
    /// `y g(y) <= 0` at every sample of `[-range, range]`.
    pub sign_condition: bool,
    pub alpha: Vec<AlphaSample>,
    /// Whether `alpha` settles (5% relative) between `range/2` and `range` on both sides.
    pub alpha_stabilises: bool,
    /// `2n/(n-2)`, infinite for `n <= 2`.
    pub alpha_upper: f64,
    pub subcritical: bool,
    /// Growth exponent and constant in `|g(y)| <= C (|y|^(beta-1) + 1)` when `alpha` settles.
    pub beta: Option<f64>,
    pub growth_constant: Option<f64>,
}

pub fn admissibility_probe(g: &ScalarReaction, range: f64, dim: usize) -> AdmissibilityReport {
    let samples = 201;
    let sign_condition = (0..samples).all(|i| {
        let y = range * (2.0 * i as f64 / (samples - 1) as f64 - 1.0);
        y * g.g(y) <= 0.0
    });
    let alpha_at = |y: f64| {
        let big = antiderivative_numeric(g, y);
        let num = y * g.g(y);
        if big.abs() <= 1e-300 || (big.abs() <= 1e-14 * num.abs()) {
            if num == 0.0 {
                f64::NAN
            } else {
                f64::INFINITY
            }
        } else {
            num / big
        }
    };
    let mut alpha = Vec::new();
    for s in [-1.0, 1.0] {
        for frac in [0.25, 0.5, 1.0] {
            let y = s * frac * range;
            alpha.push(AlphaSample { y, alpha: alpha_at(y) });
        }
    }
    let settled = |half: f64, full: f64| full.is_finite() && half.is_finite() && (full - half).abs() <= 0.05 * full.abs();
    let alpha_stabilises = settled(alpha[1].alpha, alpha[2].alpha) && settled(alpha[4].alpha, alpha[5].alpha);
    let alpha_upper = if dim <= 2 {
        f64::INFINITY
    } else {
        2.0 * dim as f64 / (dim as f64 - 2.0)
    };
    let limit = alpha[2].alpha.max(alpha[5].alpha);
    let low = alpha[2].alpha.min(alpha[5].alpha);
    let subcritical = alpha_stabilises && low >= 2.0 - 1e-9 && limit < alpha_upper;
    let (beta, growth_constant) = if alpha_stabilises {
        let beta = limit;
        let c = (0..samples)
            .map(|i| {
                let y = range * (2.0 * i as f64 / (samples - 1) as f64 - 1.0);
                g.g(y).abs() / (y.abs().powf(beta - 1.0) + 1.0)
            })
            .fold(0.0, f64::max);
        (Some(beta), Some(c))
    } else {
        (None, None)
    };
    AdmissibilityReport {
        sign_condition,
        alpha,
        alpha_stabilises,
        alpha_upper,
        subcritical,
        beta,
        growth_constant,
    }
}
