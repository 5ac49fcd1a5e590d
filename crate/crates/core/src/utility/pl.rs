use serde::{Deserialize, Serialize};

use super::step::StepFunction;
use crate::error::{OpaError, Result};

const SHAPE_TOL: f64 = 1e-9;

/// Piecewise-linear utility on `grid`, stored by its grid values and slopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseLinearUtility {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    pub slopes: Vec<f64>,
}

pub(crate) fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid[0] != 0.0 || grid.iter().any(|g| !g.is_finite()) || grid.windows(2).any(|w| w[0] >= w[1])
    {
        return Err(OpaError::InvalidArg("grid must start at 0 and ascend strictly".into()));
    }
    Ok(())
}

/// Integer grid `0, 1, .., r`.
pub fn integer_grid(r: usize) -> Vec<f64> {
    (0..=r).map(|x| x as f64).collect()
}

impl PiecewiseLinearUtility {
    /// Connects consecutive `(grid, value)` points with straight segments.
    pub fn from_values(grid: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        if values.len() != grid.len() || values.iter().any(|v| !v.is_finite()) {
            return Err(OpaError::InvalidArg("need one finite value per grid point".into()));
        }
        let slopes = grid.windows(2).zip(values.windows(2)).map(|(g, v)| (v[1] - v[0]) / (g[1] - g[0])).collect();
        Ok(PiecewiseLinearUtility { grid, values, slopes })
    }

    /// The risk-neutral chord `tau / theta`.
    pub fn linear(grid: Vec<f64>) -> Result<Self> {
        check_grid(&grid)?;
        let theta = grid[grid.len() - 1];
        let values = grid.iter().map(|g| g / theta).collect();
        Self::from_values(grid, values)
    }

    pub fn theta(&self) -> f64 {
        self.grid[self.grid.len() - 1]
    }

    /// Linear interpolation; arguments outside `[0, theta]` are clamped.
    pub fn value_at(&self, x: f64) -> f64 {
        let x = x.clamp(0.0, self.theta());
        let k = self.grid[1..].partition_point(|&g| g < x).min(self.slopes.len() - 1);
        if x == self.grid[k + 1] {
            return self.values[k + 1];
        }
        self.values[k] + self.slopes[k] * (x - self.grid[k])
    }

    pub fn is_concave(&self, tol: f64) -> bool {
        self.slopes.windows(2).all(|m| m[1] <= m[0] + tol)
    }

    /// Checks normalization, monotonicity, concavity and the slope cap `lipschitz`.
    pub fn check_shape(&self, lipschitz: f64, tol: f64) -> bool {
        (self.values[0]).abs() <= tol
            && (self.values[self.values.len() - 1] - 1.0).abs() <= tol
            && self.slopes.iter().all(|&m| m >= -tol && m <= lipschitz + tol)
            && self.is_concave(tol)
    }
}

/// Piecewise-linear approximation through samples taken at `grid`.
pub fn pla_of_samples(grid: Vec<f64>, values: Vec<f64>, enforce_concavity: bool) -> Result<PiecewiseLinearUtility> {
    let u = PiecewiseLinearUtility::from_values(grid, values)?;
    let n = u.values.len();
    if u.values[0].abs() > SHAPE_TOL || (u.values[n - 1] - 1.0).abs() > SHAPE_TOL {
        return Err(OpaError::InvalidArg("samples must be normalized to 0 and 1 at the ends".into()));
    }
    if u.slopes.iter().any(|&m| m < -SHAPE_TOL) {
        return Err(OpaError::InvalidArg("samples must be nondecreasing".into()));
    }
    if enforce_concavity {
        if let Some(k) = u.slopes.windows(2).position(|m| m[1] > m[0] + SHAPE_TOL) {
            return Err(OpaError::NonConcaveSamples { segment: k + 1 });
        }
    }
    Ok(u)
}

fn check_domain(expected: f64, found: f64) -> Result<()> {
    if (expected - found).abs() > 1e-12 * (1.0 + expected.abs()) {
        return Err(OpaError::DomainMismatch { expected, found });
    }
    Ok(())
}

/// `sup_tau |u1(tau) - u2(tau)|`, attained at a breakpoint of either function.
pub fn pseudo_metric_sup(u1: &PiecewiseLinearUtility, u2: &PiecewiseLinearUtility) -> Result<f64> {
    check_domain(u1.theta(), u2.theta())?;
    Ok(u1.grid.iter().chain(&u2.grid).map(|&x| (u1.value_at(x) - u2.value_at(x)).abs()).fold(0.0, f64::max))
}

/// `int psi du = sum_r mu_r int_{tau_r}^{tau_{r+1}} psi`, exact for step `psi`.
pub fn integrate_step_against_pl(psi: &StepFunction, u: &PiecewiseLinearUtility) -> Result<f64> {
    check_domain(u.theta(), psi.theta)?;
    Ok(psi.segment_integrals(&u.grid).iter().zip(&u.slopes).map(|(a, m)| a * m).sum())
}
