//! Lower-order terms `b(x, y, z)` with their first and second partials.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::Sym2;

/// Scalar nonlinearities `g(y)` for operators of the form `A : D^2 u + g(u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ScalarReaction {
    /// `g(y) = -y^3`.
    NegCube,
    /// `g(y) = y |y|^(alpha - 2)`.
    Power { alpha: f64 },
    /// `g(y) = sin y`.
    Sine,
    /// `g(y) = exp(y)`.
    Exp,
    /// `g(y) = sum_k coeffs[k] y^k`.
    Polynomial { coeffs: Vec<f64> },
}

impl ScalarReaction {
    pub fn validate(&self) -> Result<()> {
        match self {
            Self::Power { alpha } if !(*alpha == 2.0 || *alpha >= 3.0) => Err(Error::InvalidParameter(
                format!("power reaction needs alpha = 2 or alpha >= 3 to be C^2, got {alpha}"),
            )),
            Self::Polynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(Error::InvalidParameter("polynomial coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    pub fn g(&self, y: f64) -> f64 {
        self.derivatives(y)[0]
    }

    /// `[g, g', g'']` at `y`.
    pub fn derivatives(&self, y: f64) -> [f64; 3] {
        match self {
            Self::NegCube => [-y * y * y, -3.0 * y * y, -6.0 * y],
            Self::Power { alpha } => {
                let a = *alpha;
                let m = y.abs();
                let g2 = if a == 2.0 || m == 0.0 && a > 3.0 {
                    0.0
                } else {
                    (a - 1.0) * (a - 2.0) * y.signum() * m.powf(a - 3.0)
                };
                [y * m.powf(a - 2.0), (a - 1.0) * m.powf(a - 2.0), g2]
            }
            Self::Sine => [y.sin(), y.cos(), -y.sin()],
            Self::Exp => {
                let e = y.exp();
                [e, e, e]
            }
            Self::Polynomial { coeffs } => {
                // Horner for the value and both derivatives
                let (mut p, mut dp, mut ddp) = (0.0, 0.0, 0.0);
                for &c in coeffs.iter().rev() {
                    ddp = ddp * y + 2.0 * dp;
                    dp = dp * y + p;
                    p = p * y + c;
                }
                [p, dp, ddp]
            }
        }
    }

    /// Closed-form antiderivative `G(y) = int_0^y g`.
    pub fn antiderivative(&self, y: f64) -> f64 {
        match self {
            Self::NegCube => -0.25 * y.powi(4),
            Self::Power { alpha } => y.abs().powf(*alpha) / alpha,
            Self::Sine => 1.0 - y.cos(),
            Self::Exp => y.exp_m1(),
            Self::Polynomial { coeffs } => coeffs
                .iter()
                .enumerate()
                .rev()
                .fold(0.0, |acc, (k, &c)| acc * y + c / (k + 1) as f64)
                * y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReactionTag {
    Zero,
    Linear,
    GOfU,
    Custom,
}

/// Catalogue of reaction terms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Reaction {
    Zero,
    /// `b = c0 + cy y + cz . z`.
    Linear {
        #[serde(default)]
        c0: f64,
        #[serde(default)]
        cy: f64,
        #[serde(default)]
        cz: [f64; 2],
    },
    /// `b = g(y)`.
    GOfU { g: ScalarReaction },
    /// `b = scale sin(y) z_1`.
    SineGradient { scale: f64 },
}

impl Default for Reaction {
    fn default() -> Self {
        Self::Zero
    }
}

/// Value and partial derivatives of `b` at one point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partials {
    pub b: f64,
    pub by: f64,
    pub bz: [f64; 2],
    pub byy: f64,
    pub byz: [f64; 2],
    pub bzz: Sym2,
}

impl Partials {
    pub fn is_finite(&self) -> bool {
        [self.b, self.by, self.bz[0], self.bz[1], self.byy, self.byz[0], self.byz[1]]
            .iter()
            .all(|v| v.is_finite())
            && self.bzz.is_finite()
    }

    /// `|b_yy| + 2 |b_yz|_1 + |b_zz|_1` (entrywise), the second-order size
    /// entering the Taylor remainder.
    pub fn second_order_size(&self) -> f64 {
        self.byy.abs()
            + 2.0 * (self.byz[0].abs() + self.byz[1].abs())
            + self.bzz.xx.abs()
            + 2.0 * self.bzz.xy.abs()
            + self.bzz.yy.abs()
    }
}

impl Reaction {
    pub fn tag(&self) -> ReactionTag {
        match self {
            Self::Zero => ReactionTag::Zero,
            Self::Linear { .. } => ReactionTag::Linear,
            Self::GOfU { .. } => ReactionTag::GOfU,
            Self::SineGradient { .. } => ReactionTag::Custom,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::GOfU { g } => g.validate(),
            Self::Linear { c0, cy, cz } if ![*c0, *cy, cz[0], cz[1]].iter().all(|v| v.is_finite()) => {
                Err(Error::InvalidParameter("linear reaction coefficients must be finite".into()))
            }
            _ => Ok(()),
        }
    }

    /// The scalar nonlinearity when `b = g(u)`.
    pub fn scalar(&self) -> Option<&ScalarReaction> {
        match self {
            Self::GOfU { g } => Some(g),
            _ => None,
        }
    }

    pub fn eval(&self, x: [f64; 2], y: f64, z: [f64; 2]) -> f64 {
        self.partials(x, y, z).b
    }

    pub fn partials(&self, _x: [f64; 2], y: f64, z: [f64; 2]) -> Partials {
        match self {
            Self::Zero => Partials::default(),
            Self::Linear { c0, cy, cz } => Partials {
                b: c0 + cy * y + cz[0] * z[0] + cz[1] * z[1],
                by: *cy,
                bz: *cz,
                ..Partials::default()
            },
            Self::GOfU { g } => {
                let [g0, g1, g2] = g.derivatives(y);
                Partials {
                    b: g0,
                    by: g1,
                    byy: g2,
                    ..Partials::default()
                }
            }
            Self::SineGradient { scale } => {
                let (s, c) = y.sin_cos();
                Partials {
                    b: scale * s * z[0],
                    by: scale * c * z[0],
                    bz: [scale * s, 0.0],
                    byy: -scale * s * z[0],
                    byz: [scale * c, 0.0],
                    bzz: Sym2::default(),
                }
            }
        }
    }
}
