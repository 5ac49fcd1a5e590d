//! Robust satisficing stage: weights that keep `t~ s w >= alpha R U z` for
//! every expert rank `t~` in an interval, paying `eta_i` per unit of
//! deviation from the nominal rank when the target is missed.

use opa_lp::{solve_lp, LinearProgram, Relation};
use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};
use crate::opa::{aggregate_weights, flat_index, unflatten, GroupWeights, WeightSolution};
use crate::pr::{normalize_utilities, solve_stage2_closed_form, NormalizedUtilityTable, PrProfile};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExpertInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ExpertInterval {
    pub fn point(t: f64) -> Self {
        ExpertInterval { lo: t, hi: t }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrsInstance {
    pub profile: PrProfile,
    pub table: NormalizedUtilityTable,
    pub t_intervals: Vec<ExpertInterval>,
    pub alpha: f64,
}

impl PrsInstance {
    /// Normalizes the profile's utilities and validates the intervals.
    pub fn new(profile: PrProfile, t_intervals: Vec<ExpertInterval>, alpha: f64) -> Result<Self> {
        let table = normalize_utilities(&profile)?;
        Self::with_table(profile, table, t_intervals, alpha)
    }

    pub fn with_table(
        profile: PrProfile,
        table: NormalizedUtilityTable,
        t_intervals: Vec<ExpertInterval>,
        alpha: f64,
    ) -> Result<Self> {
        let inst = PrsInstance { profile, table, t_intervals, alpha };
        inst.validate()?;
        Ok(inst)
    }

    /// Intervals collapsed onto the nominal expert ranks.
    pub fn degenerate_intervals(profile: &PrProfile) -> Vec<ExpertInterval> {
        profile.ranking.t.iter().map(|&t| ExpertInterval::point(t as f64)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(OpaError::InvalidArg(format!("alpha {} must lie in [0, 1]", self.alpha)));
        }
        let t = &self.profile.ranking.t;
        if self.t_intervals.len() != t.len() {
            return Err(OpaError::InvalidProfile(format!("need {} expert intervals", t.len())));
        }
        for (i, (iv, &ti)) in self.t_intervals.iter().zip(t).enumerate() {
            let ti = ti as f64;
            if !(iv.lo.is_finite() && iv.hi.is_finite() && iv.lo <= ti && ti <= iv.hi && iv.lo > 0.0) {
                return Err(OpaError::InvalidProfile(format!(
                    "expert {i} interval [{}, {}] must be positive and contain {ti}",
                    iv.lo, iv.hi
                )));
            }
        }
        // Shape check happens inside the closed form.
        solve_stage2_closed_form(&self.profile, &self.table).map(|_| ())
    }

    fn dims(&self) -> (usize, usize, usize) {
        let r = &self.profile.ranking;
        (r.num_experts(), r.num_attributes(), r.num_alternatives())
    }

    /// Nominal disparity `z` from the stage-2 closed form.
    pub fn nominal_z(&self) -> Result<f64> {
        Ok(solve_stage2_closed_form(&self.profile, &self.table)?.z)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrsResult {
    pub eta: Vec<f64>,
    pub epsilon1: Vec<Vec<Vec<f64>>>,
    pub epsilon2: Vec<Vec<Vec<f64>>>,
    /// `z` is the nominal disparity the target is scaled from.
    pub weights: WeightSolution,
    pub groups: GroupWeights,
    pub target: f64,
    pub total_fragility: f64,
    pub fragility_phi: f64,
}

struct Layout {
    n: usize,
    ni: usize,
}

impl Layout {
    fn w(&self, k: usize) -> usize {
        k
    }
    fn eta(&self, i: usize) -> usize {
        self.n + i
    }
    fn eps1(&self, k: usize) -> usize {
        self.n + self.ni + k
    }
    fn eps2(&self, k: usize) -> usize {
        2 * self.n + self.ni + k
    }
    fn len(&self) -> usize {
        3 * self.n + self.ni
    }
}

fn layout(inst: &PrsInstance) -> Layout {
    let (ni, nj, nk) = inst.dims();
    Layout { n: ni * nj * nk, ni }
}

/// Minimize `sum eta` over `w`, `eta` and per-weight multipliers `eps1`, `eps2`.
pub fn build_prs_lp(inst: &PrsInstance) -> Result<LinearProgram> {
    inst.validate()?;
    let z = inst.nominal_z()?;
    let (ni, nj, nk) = inst.dims();
    let lay = layout(inst);
    let mut objective = vec![0.0; lay.len()];
    for i in 0..ni {
        objective[lay.eta(i)] = 1.0;
    }
    let mut lp = LinearProgram::minimize(objective);
    let r = nk as f64;
    for i in 0..ni {
        let t = inst.profile.ranking.t[i] as f64;
        let iv = inst.t_intervals[i];
        for j in 0..nj {
            let s = inst.profile.s_lo(i, j);
            for p in 0..nk {
                let k = flat_index(nj, nk, i, j, p);
                let target = inst.alpha * r * inst.table.u[i][j][p] * z;
                lp.add_sparse(
                    &[(lay.w(k), t * s), (lay.eps1(k), -(iv.hi - t)), (lay.eps2(k), -(t - iv.lo))],
                    Relation::Ge,
                    target,
                );
                lp.add_sparse(
                    &[(lay.eta(i), 1.0), (lay.w(k), s), (lay.eps1(k), 1.0), (lay.eps2(k), -1.0)],
                    Relation::Ge,
                    0.0,
                );
                lp.add_sparse(
                    &[(lay.eta(i), 1.0), (lay.w(k), -s), (lay.eps1(k), -1.0), (lay.eps2(k), 1.0)],
                    Relation::Ge,
                    0.0,
                );
            }
        }
    }
    let ones: Vec<(usize, f64)> = (0..lay.n).map(|k| (lay.w(k), 1.0)).collect();
    lp.add_sparse(&ones, Relation::Eq, 1.0);
    Ok(lp)
}

pub fn solve_opa_prs(inst: &PrsInstance) -> Result<PrsResult> {
    let lp = build_prs_lp(inst)?;
    let sol = solve_lp(&lp)?;
    if !sol.is_optimal() {
        return Err(OpaError::SolverFault(format!("robust satisficing program reported {:?}", sol.status)));
    }
    let (ni, nj, nk) = inst.dims();
    let lay = layout(inst);
    let x = &sol.variable_values;
    let eta: Vec<f64> = (0..ni).map(|i| x[lay.eta(i)].max(0.0)).collect();
    let weights = WeightSolution {
        z: inst.nominal_z()?,
        w: unflatten(&x[..lay.n], ni, nj, nk),
        rank_to_alternative: inst.profile.ranking.rank_to_alternative(),
    };
    let total: f64 = eta.iter().sum();
    Ok(PrsResult {
        epsilon1: unflatten(&x[lay.eps1(0)..lay.eps1(0) + lay.n], ni, nj, nk),
        epsilon2: unflatten(&x[lay.eps2(0)..lay.eps2(0) + lay.n], ni, nj, nk),
        target: inst.alpha * weights.z,
        groups: aggregate_weights(&weights),
        weights,
        eta,
        total_fragility: total,
        fragility_phi: -total,
    })
}

/// `v(t~) = value + slope (t~ - t)` for one weight of one expert.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AffineSlack {
    pub value: f64,
    pub slope: f64,
}

impl AffineSlack {
    pub fn at(&self, nominal: f64, x: f64) -> f64 {
        self.value + self.slope * (x - nominal)
    }

    pub fn scaled(&self, c: f64) -> Self {
        AffineSlack { value: c * self.value, slope: c * self.slope }
    }

    pub fn plus(&self, other: &AffineSlack) -> Self {
        AffineSlack { value: self.value + other.value, slope: self.slope + other.slope }
    }
}

/// Largest `phi <= 0` with `v(t~) >= phi |t~ - t|` on the interval for every slack.
///
/// Returns negative infinity when a slack is already negative at the nominal rank.
pub fn fragility(slacks: &[AffineSlack], interval: ExpertInterval, nominal: f64) -> f64 {
    if slacks.iter().any(|v| v.value < 0.0) {
        return f64::NEG_INFINITY;
    }
    let mut phi: f64 = 0.0;
    for v in slacks {
        if interval.hi > nominal {
            phi = phi.min(v.at(nominal, interval.hi) / (interval.hi - nominal));
        }
        if interval.lo < nominal {
            phi = phi.min(v.at(nominal, interval.lo) / (nominal - interval.lo));
        }
    }
    phi
}

/// Same quantity evaluated on `grid_density` evenly spaced points plus both endpoints.
pub fn brute_force_fragility(
    slacks: &[AffineSlack],
    interval: ExpertInterval,
    nominal: f64,
    grid_density: usize,
) -> f64 {
    let n = grid_density.max(2);
    let points = (0..n).map(|k| interval.lo + (interval.hi - interval.lo) * k as f64 / (n - 1) as f64).chain([
        interval.lo,
        interval.hi,
        nominal,
    ]);
    let mut phi: f64 = 0.0;
    for x in points {
        let d = (x - nominal).abs();
        for v in slacks {
            let value = v.at(nominal, x);
            if d == 0.0 {
                if value < 0.0 {
                    return f64::NEG_INFINITY;
                }
            } else {
                phi = phi.min(value / d);
            }
        }
    }
    phi
}

/// Slacks `t~ s w - alpha R U z` of expert `i`, one per (attribute, rank).
pub fn expert_slacks(inst: &PrsInstance, w: &[Vec<Vec<f64>>], i: usize) -> Result<Vec<AffineSlack>> {
    let z = inst.nominal_z()?;
    let (_, nj, nk) = inst.dims();
    let t = inst.profile.ranking.t[i] as f64;
    let mut out = Vec::with_capacity(nj * nk);
    for j in 0..nj {
        let s = inst.profile.s_lo(i, j);
        for p in 0..nk {
            let sw = s * w[i][j][p];
            out.push(AffineSlack { value: t * sw - inst.alpha * nk as f64 * inst.table.u[i][j][p] * z, slope: sw });
        }
    }
    Ok(out)
}

/// Sum of expert fragilities for fixed weights; nominal slacks within
/// `opa_lp::FEAS_TOL` of zero count as met.
pub fn fragility_of_weights(inst: &PrsInstance, w: &[Vec<Vec<f64>>]) -> Result<f64> {
    let mut total = 0.0;
    for (i, iv) in inst.t_intervals.iter().enumerate() {
        let mut slacks = expert_slacks(inst, w, i)?;
        for v in &mut slacks {
            if v.value < 0.0 && v.value >= -opa_lp::FEAS_TOL {
                v.value = 0.0;
            }
        }
        total += fragility(&slacks, *iv, inst.profile.ranking.t[i] as f64);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub alpha: f64,
    pub total_fragility: f64,
}

/// Re-solves the instance at each target level.
pub fn alpha_sweep(inst: &PrsInstance, alphas: &[f64]) -> Result<Vec<SweepPoint>> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut at = inst.clone();
            at.alpha = alpha;
            let res = solve_opa_prs(&at)?;
            Ok(SweepPoint { alpha, total_fragility: res.total_fragility })
        })
        .collect()
}
