use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Grid, Sym2};

/// Catalogue of principal-part coefficients `A(x)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum CoefficientModel {
    Identity,
    /// Constant symmetric matrix; only `xx` is used in one dimension.
    Constant { xx: f64, xy: f64, yy: f64 },
    /// `A(x) = I + amplitude * x (x) x`.
    Radial { amplitude: f64 },
}

impl Default for CoefficientModel {
    fn default() -> Self {
        Self::Identity
    }
}

impl CoefficientModel {
    pub fn eval(&self, x: [f64; 2], dim: usize) -> Sym2 {
        let a = match *self {
            Self::Identity => Sym2::identity(),
            Self::Constant { xx, xy, yy } => Sym2::new(xx, xy, yy),
            Self::Radial { amplitude } => Sym2::new(
                1.0 + amplitude * x[0] * x[0],
                amplitude * x[0] * x[1],
                1.0 + amplitude * x[1] * x[1],
            ),
        };
        if dim == 1 {
            Sym2::new(a.xx, 0.0, 0.0)
        } else {
            a
        }
    }
}

/// `A` cached per node together with its ellipticity constant.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientField {
    model: CoefficientModel,
    values: Vec<Sym2>,
    lambda: f64,
}

impl CoefficientField {
    pub fn new(grid: &Grid, model: CoefficientModel) -> Result<Self> {
        let dim = grid.dim();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let directions: &[[f64; 2]] = if dim == 1 {
            &[[1.0, 0.0]]
        } else {
            &[[1.0, 0.0], [0.0, 1.0], [s, s], [s, -s]]
        };
        let mut values = Vec::with_capacity(grid.node_count());
        let mut lambda = f64::INFINITY;
        for k in 0..grid.node_count() {
            let a = model.eval(grid.coords(k), dim);
            if !a.is_finite() {
                return Err(Error::NotElliptic { node: k, value: f64::NAN });
            }
            let q = directions.iter().map(|&z| a.quad(z)).fold(f64::INFINITY, f64::min);
            if !(q > 0.0) {
                return Err(Error::NotElliptic { node: k, value: q });
            }
            lambda = lambda.min(q);
            values.push(a);
        }
        Ok(Self { model, values, lambda })
    }

    pub fn model(&self) -> &CoefficientModel {
        &self.model
    }

    pub fn at(&self, k: usize) -> &Sym2 {
        &self.values[k]
    }

    pub fn values(&self) -> &[Sym2] {
        &self.values
    }

    /// Smallest `A(x) : z (x) z` over the sampled unit directions.
    pub fn lambda(&self) -> f64 {
        self.lambda
    }
}
