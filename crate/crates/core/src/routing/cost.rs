use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-edge congestion cost as a function of the edge load.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum CostFunction {
    /// `intercept + slope * x`; the declared Lipschitz constant is `|slope|`.
    Linear { slope: f64, intercept: f64 },
    /// `values[x]` at integer loads, linearly interpolated in between and
    /// constant beyond the last entry.
    Table { values: Vec<f64> },
}

impl CostFunction {
    pub fn linear(slope: f64, intercept: f64) -> Self {
        CostFunction::Linear { slope, intercept }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            CostFunction::Linear { slope, intercept } => intercept + slope * x,
            CostFunction::Table { values } => {
                let last = values.len() - 1;
                if x <= 0.0 {
                    return values[0];
                }
                if x >= last as f64 {
                    return values[last];
                }
                let lo = x.floor() as usize;
                let frac = x - lo as f64;
                values[lo] + frac * (values[lo + 1] - values[lo])
            }
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match self {
            CostFunction::Linear { slope, .. } => slope.abs(),
            CostFunction::Table { values } => values.windows(2).map(|w| (w[1] - w[0]).abs()).fold(0.0, f64::max),
        }
    }

    /// Checks range `[0, 1]`, monotonicity and the declared Lipschitz constant
    /// on a grid of half-integer loads over `[0, n]`.
    pub fn validate(&self, n: usize) -> Result<()> {
        match self {
            CostFunction::Linear { slope, intercept } if !slope.is_finite() || !intercept.is_finite() => {
                return Err(Error::input("linear cost has a non-finite coefficient"));
            }
            CostFunction::Table { values } if values.is_empty() => {
                return Err(Error::input("cost table is empty"));
            }
            CostFunction::Table { values } if values.iter().any(|v| !v.is_finite()) => {
                return Err(Error::input("cost table has a non-finite entry"));
            }
            _ => {}
        }
        const TOL: f64 = 1e-12;
        let lambda = self.lipschitz();
        let grid: Vec<f64> = (0..=2 * n).map(|h| h as f64 / 2.0).collect();
        let mut prev: Option<(f64, f64)> = None;
        for &x in &grid {
            let c = self.eval(x);
            if !(-TOL..=1.0 + TOL).contains(&c) {
                return Err(Error::input(format!("cost {c} at load {x} is outside [0, 1]")));
            }
            if let Some((px, pc)) = prev {
                if c < pc - TOL {
                    return Err(Error::input(format!("cost decreases between loads {px} and {x}")));
                }
                if (c - pc).abs() > lambda * (x - px) + TOL {
                    return Err(Error::input(format!("cost exceeds its Lipschitz constant {lambda} near load {x}")));
                }
            }
            prev = Some((x, c));
        }
        Ok(())
    }
}
