//! Utility functions, ambiguity sets and the worst-case utility program.

mod ambiguity;
mod pl;
mod step;

pub(crate) use ambiguity::local_range;
pub use ambiguity::{
    feasible_member, lottery_psi, make_constraint, solve_worst_case_utility, utility_band, ConstraintKind,
    MomentConstraint, ScenarioSet, Stage1Result, SupportLine, UtilityAmbiguitySpec,
};
pub use pl::{integer_grid, integrate_step_against_pl, pla_of_samples, pseudo_metric_sup, PiecewiseLinearUtility};
pub use step::StepFunction;
