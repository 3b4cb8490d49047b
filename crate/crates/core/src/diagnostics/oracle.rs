//! Closed-form bang-bang extremal for `S(u) = u''` on `(0, 1)` with
//! `u(0) = u'(0) = 0`, `u(1) = a`, `u'(1) = b`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Oracle1DSolution {
    pub a: f64,
    pub b: f64,
    pub e_infty: f64,
    /// Where `u''` flips sign; `None` for a single quadratic arc.
    pub switch: Option<f64>,
    /// `u''` on `(0, s)`.
    pub curvature: f64,
}

/// Result of the brute-force minimax search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossCheck {
    pub e_brute: f64,
    pub relative_gap: f64,
    pub agrees: bool,
}

pub fn oracle_1d(a: f64, b: f64) -> Result<Oracle1DSolution> {
    if !(a.is_finite() && b.is_finite()) || (a == 0.0 && b == 0.0) {
        return Err(Error::InvalidParameter(format!("oracle data must be finite and nonzero, got ({a}, {b})")));
    }
    let at_end = 4.0 * a - 2.0 * b;
    if at_end.abs() <= 1e-14 * (a.abs() + b.abs()) {
        return Ok(Oracle1DSolution {
            a,
            b,
            e_infty: b.abs(),
            switch: None,
            curvature: b,
        });
    }
    // t = 2s - 1 is the unique root in (-1, 1) of b t^2 + (4a - 2b) t - b
    let root = |t: f64| 4.0 * t * a - b * (1.0 + 2.0 * t - t * t);
    let (mut lo, mut hi) = (-1.0_f64, 1.0_f64);
    let f_lo = root(lo);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid == lo || mid == hi {
            break;
        }
        if (root(mid) > 0.0) == (f_lo > 0.0) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let q = 1.0 + 2.0 * t - t * t;
    let curvature = if t.abs() >= 0.25 * q.abs() { b / t } else { 4.0 * a / q };
    Ok(Oracle1DSolution {
        a,
        b,
        e_infty: curvature.abs(),
        switch: Some(0.5 * (t + 1.0)),
        curvature,
    })
}

impl Oracle1DSolution {
    fn s(&self) -> f64 {
        self.switch.unwrap_or(1.0)
    }

    pub fn u(&self, x: f64) -> f64 {
        let (k, s) = (self.curvature, self.s());
        if x <= s {
            0.5 * k * x * x
        } else {
            let d = x - s;
            0.5 * k * s * s + k * s * d - 0.5 * k * d * d
        }
    }

    pub fn du(&self, x: f64) -> f64 {
        let (k, s) = (self.curvature, self.s());
        if x <= s {
            k * x
        } else {
            k * s - k * (x - s)
        }
    }

    pub fn d2u(&self, x: f64) -> f64 {
        if x <= self.s() {
            self.curvature
        } else {
            -self.curvature
        }
    }

    /// Affine multiplier with unit `L^1` mass and the sign of `u''`.
    pub fn f(&self, x: f64) -> f64 {
        let sign = self.curvature.signum();
        match self.switch {
            None => sign,
            Some(s) => sign * 2.0 * (s - x) / (s * s + (1.0 - s) * (1.0 - s)),
        }
    }

    /// Largest violation of the boundary data and of `|f| u'' = e f`,
    /// `f'' = 0` over `samples` uniformly spaced points.
    pub fn self_check(&self, samples: usize) -> f64 {
        let mut worst = (self.u(1.0) - self.a).abs().max((self.du(1.0) - self.b).abs());
        worst = worst.max(self.u(0.0).abs()).max(self.du(0.0).abs());
        let m = samples.max(3);
        for i in 0..m {
            let x = i as f64 / (m - 1) as f64;
            if self.switch.is_some_and(|s| (x - s).abs() < 1e-12) {
                continue;
            }
            let f = self.f(x);
            worst = worst.max((f.abs() * self.d2u(x) - self.e_infty * f).abs());
        }
        // affine multiplier: second difference over the whole interval
        let (f0, fh, f1) = (self.f(0.0), self.f(0.5), self.f(1.0));
        worst.max((f0 - 2.0 * fh + f1).abs())
    }

    /// Minimises `max |u''|` over `nodes` grid values by projected descent on a
    /// smoothed max from `starts` random feasible points and compares with `e_infty`.
    pub fn cross_check(&self, nodes: usize, starts: usize, seed: u64) -> CrossCheck {
        let e_brute = brute_force_minimax(self.a, self.b, nodes, starts, seed);
        let relative_gap = (e_brute - self.e_infty).abs() / self.e_infty;
        CrossCheck {
            e_brute,
            relative_gap,
            agrees: relative_gap <= 0.01,
        }
    }
}

/// Variables are the second differences `v_k` at nodes `1..n-1`. The data
/// enter through `u_1 = h^2 v_1 / 2` and the end conditions
/// `u_{n-1} = a`, `(u_{n-1} - u_{n-2}) / h + h v_{n-2} / 2 = b`, which are
/// exact for quadratics.
pub fn brute_force_minimax(a: f64, b: f64, nodes: usize, starts: usize, seed: u64) -> f64 {
    let n = nodes.max(7);
    let h = 1.0 / (n - 1) as f64;
    let m = n - 2;
    // coefficients of u_k in terms of v, by the recursion u_{k+1} = 2 u_k - u_{k-1} + h^2 v_k
    let mut prev = vec![0.0; m];
    let mut cur = vec![0.0; m];
    cur[0] = 0.5 * h * h;
    for k in 1..n - 1 {
        let mut next: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| 2.0 * c - p).collect();
        next[k - 1] += h * h;
        prev = std::mem::replace(&mut cur, next);
    }
    let c1 = cur.clone();
    let mut c2: Vec<f64> = cur.iter().zip(&prev).map(|(c, p)| (c - p) / h).collect();
    c2[m - 1] += 0.5 * h;
    let target = [a, b];
    let dot = |x: &[f64], y: &[f64]| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>();
    let gram = [[dot(&c1, &c1), dot(&c1, &c2)], [dot(&c2, &c1), dot(&c2, &c2)]];
    let det = gram[0][0] * gram[1][1] - gram[0][1] * gram[1][0];
    let solve2 = |r: [f64; 2]| {
        [
            (gram[1][1] * r[0] - gram[0][1] * r[1]) / det,
            (gram[0][0] * r[1] - gram[1][0] * r[0]) / det,
        ]
    };
    let project = |d: &mut [f64]| {
        let l = solve2([dot(&c1, d), dot(&c2, d)]);
        for ((x, p), q) in d.iter_mut().zip(&c1).zip(&c2) {
            *x -= l[0] * p + l[1] * q;
        }
    };
    let l = solve2(target);
    let particular: Vec<f64> = c1.iter().zip(&c2).map(|(p, q)| l[0] * p + l[1] * q).collect();
    let scale = particular.iter().fold(0.0_f64, |s, v| s.max(v.abs())).max(1e-300);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    for _ in 0..starts {
        let mut noise: Vec<f64> = (0..m).map(|_| scale * (2.0 * rng.random::<f64>() - 1.0)).collect();
        project(&mut noise);
        let mut v: Vec<f64> = particular.iter().zip(&noise).map(|(p, q)| p + q).collect();
        best = best.min(descend(&mut v, &project, scale));
    }
    best
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |s, x| s.max(x.abs()))
}

/// `tau log sum exp(|v_k| / tau)` and its gradient, a convex combination of
/// subgradients of `max |v_k|`.
fn smooth_max(v: &[f64], tau: f64, grad: &mut [f64]) -> f64 {
    let top = max_abs(v);
    let mut total = 0.0;
    for (g, x) in grad.iter_mut().zip(v) {
        let (ep, em) = (((x - top) / tau).exp(), ((-x - top) / tau).exp());
        total += ep + em;
        *g = ep - em;
    }
    grad.iter_mut().for_each(|g| *g /= total);
    top + tau * total.ln()
}

/// Projected gradient descent on the smoothed max, lowering the temperature
/// until it is far below the resolution that matters.
fn descend(v: &mut [f64], project: &dyn Fn(&mut [f64]), scale: f64) -> f64 {
    let m = v.len();
    let mut grad = vec![0.0; m];
    let mut trial = vec![0.0; m];
    let mut trial_grad = vec![0.0; m];
    let mut best = max_abs(v);
    let mut tau = 0.1 * best.max(scale);
    let mut step = tau;
    while tau > 1e-4 * scale {
        let mut value = smooth_max(v, tau, &mut grad);
        for _ in 0..200 {
            project(&mut grad);
            let gg: f64 = grad.iter().map(|g| g * g).sum();
            if gg <= 1e-30 {
                break;
            }
            let mut accepted = false;
            for _ in 0..60 {
                for ((t, x), g) in trial.iter_mut().zip(v.iter()).zip(&grad) {
                    *t = x - step * g;
                }
                let next = smooth_max(&trial, tau, &mut trial_grad);
                if next <= value - 1e-4 * step * gg {
                    v.copy_from_slice(&trial);
                    grad.copy_from_slice(&trial_grad);
                    value = next;
                    accepted = true;
                    step *= 2.0;
                    break;
                }
                step *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        best = best.min(max_abs(v));
        tau *= 0.5;
    }
    best
}
