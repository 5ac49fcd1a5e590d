use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};

const LEVEL_EPS: f64 = 1e-15;
const GRID_TOL: f64 = 1e-12;

/// Right-continuous step function on `[0, theta]`.
///
/// `breakpoints` starts at 0 and ends at `theta`; `levels[k]` holds on
/// `[breakpoints[k], breakpoints[k + 1])`, and the last level also at `theta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepFunction {
    pub theta: f64,
    pub breakpoints: Vec<f64>,
    pub levels: Vec<f64>,
}

impl StepFunction {
    pub fn new(theta: f64, breakpoints: Vec<f64>, levels: Vec<f64>) -> Result<Self> {
        let f = StepFunction { theta, breakpoints, levels };
        f.validate()?;
        Ok(f.simplified())
    }

    pub fn zero(theta: f64) -> Self {
        Self::constant(theta, 0.0)
    }

    pub fn constant(theta: f64, level: f64) -> Self {
        StepFunction { theta, breakpoints: vec![0.0, theta], levels: vec![level] }
    }

    /// `I_[a, theta]`.
    pub fn indicator_from(theta: f64, a: f64) -> Self {
        Self::indicator_between(theta, a, theta)
    }

    /// `I_(0, a]`, equal almost everywhere to `I_[0, a)`.
    pub fn indicator_upto(theta: f64, a: f64) -> Self {
        Self::indicator_between(theta, 0.0, a)
    }

    /// `I_(a, b]` (up to a null set).
    pub fn indicator_between(theta: f64, a: f64, b: f64) -> Self {
        let (a, b) = (a.clamp(0.0, theta), b.clamp(0.0, theta));
        if b <= a {
            return Self::zero(theta);
        }
        let mut breakpoints = vec![0.0];
        let mut levels = Vec::new();
        if a > 0.0 {
            breakpoints.push(a);
            levels.push(0.0);
        }
        breakpoints.push(b);
        levels.push(1.0);
        if b < theta {
            breakpoints.push(theta);
            levels.push(0.0);
        }
        StepFunction { theta, breakpoints, levels }
    }

    /// CDF of a discrete lottery given as `(outcome, probability)` pairs.
    pub fn cdf(theta: f64, lottery: &[(f64, f64)]) -> Self {
        let terms: Vec<(f64, StepFunction)> =
            lottery.iter().map(|&(h, p)| (p, Self::indicator_from(theta, h))).collect();
        Self::combine(theta, terms.iter().map(|(c, f)| (*c, f)))
    }

    /// `sum_k c_k f_k` over functions sharing the domain `[0, theta]`.
    pub fn combine<'a>(theta: f64, terms: impl IntoIterator<Item = (f64, &'a StepFunction)> + Clone) -> Self {
        let mut points: Vec<f64> =
            terms.clone().into_iter().flat_map(|(_, f)| f.breakpoints.iter().copied()).chain([0.0, theta]).collect();
        points.sort_by(f64::total_cmp);
        points.dedup();
        let levels = points[..points.len() - 1]
            .iter()
            .map(|&x| terms.clone().into_iter().map(|(c, f)| c * f.eval(x)).sum())
            .collect();
        StepFunction { theta, breakpoints: points, levels }.simplified()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self::combine(self.theta, [(c, self)])
    }

    pub fn eval(&self, x: f64) -> f64 {
        let k = self.breakpoints[1..self.breakpoints.len() - 1].partition_point(|&b| b <= x);
        self.levels[k]
    }

    pub fn is_zero(&self) -> bool {
        self.levels.iter().all(|l| l.abs() <= LEVEL_EPS)
    }

    /// `int_a^b psi(x) dx`.
    pub fn integral(&self, a: f64, b: f64) -> f64 {
        self.levels
            .iter()
            .enumerate()
            .map(|(k, level)| {
                let lo = self.breakpoints[k].max(a);
                let hi = self.breakpoints[k + 1].min(b);
                if hi > lo {
                    level * (hi - lo)
                } else {
                    0.0
                }
            })
            .sum()
    }

    /// Integral of the function over each segment of `grid`.
    pub fn segment_integrals(&self, grid: &[f64]) -> Vec<f64> {
        grid.windows(2).map(|s| self.integral(s[0], s[1])).collect()
    }

    pub fn check_on_grid(&self, grid: &[f64]) -> Result<()> {
        for &b in &self.breakpoints {
            if !on_grid(grid, b) {
                return Err(OpaError::NonGridBreakpoint(b));
            }
        }
        Ok(())
    }

    fn validate(&self) -> Result<()> {
        let bp = &self.breakpoints;
        let ok = self.theta.is_finite()
            && self.theta > 0.0
            && bp.len() >= 2
            && bp.len() == self.levels.len() + 1
            && bp[0] == 0.0
            && bp[bp.len() - 1] == self.theta
            && bp.windows(2).all(|w| w[0] < w[1])
            && self.levels.iter().all(|l| l.is_finite());
        if ok {
            Ok(())
        } else {
            Err(OpaError::InvalidArg(
                "step function needs ascending breakpoints from 0 to theta and one finite level per interval".into(),
            ))
        }
    }

    /// Merges neighbouring intervals with equal levels and snaps tiny levels to zero.
    fn simplified(mut self) -> Self {
        for l in &mut self.levels {
            if l.abs() <= LEVEL_EPS {
                *l = 0.0;
            }
        }
        let mut breakpoints = vec![self.breakpoints[0]];
        let mut levels: Vec<f64> = Vec::new();
        for (k, &level) in self.levels.iter().enumerate() {
            if levels.last() == Some(&level) {
                *breakpoints.last_mut().unwrap() = self.breakpoints[k + 1];
            } else {
                levels.push(level);
                breakpoints.push(self.breakpoints[k + 1]);
            }
        }
        self.breakpoints = breakpoints;
        self.levels = levels;
        self
    }
}

pub(crate) fn on_grid(grid: &[f64], x: f64) -> bool {
    grid_index(grid, x).is_some()
}

pub(crate) fn grid_index(grid: &[f64], x: f64) -> Option<usize> {
    grid.iter().position(|&g| (g - x).abs() <= GRID_TOL * (1.0 + g.abs()))
}
