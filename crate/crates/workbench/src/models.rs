//! Decision models selectable by name from the CLI and the HTTP service.

use opa_core::elicitation::{finalize, ElicitationSession};
use opa_core::inconsistency::{solve_inconsistent, InconsistencyConfig, InconsistencyOutcome};
use opa_core::opa::{aggregate_weights, solve_opa_closed_form, solve_opa_lp, WeightSolution};
use opa_core::pr::{degenerate_intervals, solve_opa_pr, PrInstance, PrProfile, PrSolution};
use opa_core::prs::{solve_opa_prs, PrsInstance};
use opa_core::utility::{integer_grid, make_constraint, UtilityAmbiguitySpec};
use opa_core::OpaError;
use opa_lp::{FEAS_TOL, OPT_TOL};

use crate::document::{canonical_hash, FragilityReport, InstanceDocument, Provenance, ResultDocument, SCHEMA_VERSION};
use crate::error::{Result, WorkbenchError};

/// Lookup of stored elicitation sessions by id.
pub trait SessionSource: Sync {
    fn load_session(&self, id: &str) -> Result<ElicitationSession>;
}

/// For callers without a session store.
pub struct NoSessions;

impl SessionSource for NoSessions {
    fn load_session(&self, id: &str) -> Result<ElicitationSession> {
        Err(WorkbenchError::NotFound(format!("session {id}")))
    }
}

#[derive(Debug, Clone, Default)]
pub struct SolveOptions {
    /// Re-solve the LP next to the closed form and record the deviation.
    pub lp_check: bool,
    /// Overrides the document's `alpha`.
    pub alpha: Option<f64>,
}

pub trait DecisionModel: Send + Sync {
    fn name(&self) -> &str;

    fn solve(
        &self,
        doc: &InstanceDocument,
        sessions: &dyn SessionSource,
        opts: &SolveOptions,
    ) -> Result<ResultDocument>;
}

fn by_alternative(w: &WeightSolution) -> Vec<Vec<Vec<f64>>> {
    w.w.iter()
        .enumerate()
        .map(|(i, row)| {
            row.iter()
                .enumerate()
                .map(|(j, cell)| (0..cell.len()).map(|k| w.weight_of_alternative(i, j, k)).collect())
                .collect()
        })
        .collect()
}

fn result(model: &str, doc: &InstanceDocument, weights: &WeightSolution, solver_path: &str) -> Result<ResultDocument> {
    Ok(ResultDocument {
        schema_version: SCHEMA_VERSION,
        model: model.to_string(),
        z: weights.z,
        weights: by_alternative(weights),
        aggregates: aggregate_weights(weights),
        worst_case_utilities: None,
        fragility: None,
        inconsistency: None,
        provenance: Provenance {
            solver_path: solver_path.to_string(),
            feas_tol: FEAS_TOL,
            opt_tol: OPT_TOL,
            seeds: Vec::new(),
            instance_sha256: canonical_hash(doc)?,
            lp_deviation: None,
        },
    })
}

fn max_deviation(a: &WeightSolution, b: &WeightSolution) -> f64 {
    a.flat().iter().zip(b.flat()).map(|(x, y)| (x - y).abs()).fold((a.z - b.z).abs(), f64::max)
}

/// Ambiguity sets per cell and the seeds of the sessions they came from.
pub fn build_pr_instance(doc: &InstanceDocument, sessions: &dyn SessionSource) -> Result<(PrInstance, Vec<u64>)> {
    doc.validate()?;
    let ranking = doc.ranking()?;
    let (ni, nj, nk) = (doc.num_experts(), doc.num_attributes(), doc.num_alternatives());
    let mut seeds = Vec::new();
    let mut specs = Vec::with_capacity(ni);
    for i in 0..ni {
        let mut row = Vec::with_capacity(nj);
        for j in 0..nj {
            let source = doc.utilities.as_ref().map(|u| &u[i][j]);
            let spec = match source {
                Some(src) if src.session.is_some() => {
                    let id = src.session.as_deref().unwrap_or_default();
                    let at = format!("/utilities/{i}/{j}/session");
                    let session = sessions.load_session(id).map_err(|e| match e {
                        WorkbenchError::NotFound(_) => WorkbenchError::schema(&at, format!("unknown session {id}")),
                        other => other,
                    })?;
                    if session.ranks != nk {
                        return Err(WorkbenchError::schema(
                            at,
                            format!("session covers {} ranks, instance has {nk} alternatives", session.ranks),
                        ));
                    }
                    seeds.push(session.seed);
                    finalize(&session)?
                }
                Some(src) => {
                    let grid = integer_grid(nk);
                    let mut constraints = Vec::new();
                    for kind in src.constraints.iter().flatten() {
                        constraints.extend(make_constraint(&grid, kind)?);
                    }
                    UtilityAmbiguitySpec::new(grid, doc.lipschitz(), constraints)?
                }
                None => UtilityAmbiguitySpec::unconstrained(nk, doc.lipschitz())?,
            };
            row.push(spec);
        }
        specs.push(row);
    }
    let s_intervals = doc.s_intervals.clone().unwrap_or_else(|| degenerate_intervals(&ranking));
    let scenarios = doc.scenarios.clone().unwrap_or_else(|| vec![vec![None; nj]; ni]);
    Ok((PrInstance { ranking, s_intervals, specs, scenarios }, seeds))
}

/// Stage-2 profile built from the stage-1 worst-case utilities.
pub fn stage2_profile(inst: &PrInstance, sol: &PrSolution) -> Result<PrProfile> {
    let utilities = sol.stage1.iter().map(|row| row.iter().map(|r| r.utility.clone()).collect()).collect();
    Ok(PrProfile::new(inst.ranking.clone(), inst.s_intervals.clone(), utilities)?)
}

/// Classical OPA from the ranks alone.
pub struct ClassicalOpa;

impl DecisionModel for ClassicalOpa {
    fn name(&self) -> &str {
        "opa"
    }

    fn solve(
        &self,
        doc: &InstanceDocument,
        _sessions: &dyn SessionSource,
        opts: &SolveOptions,
    ) -> Result<ResultDocument> {
        doc.validate()?;
        let ranking = doc.ranking()?;
        let w = solve_opa_closed_form(&ranking)?;
        let mut out = result(self.name(), doc, &w, "closed_form")?;
        if opts.lp_check {
            let dev = max_deviation(&solve_opa_lp(&ranking)?, &w);
            if dev > 1e-8 {
                return Err(OpaError::SolverFault(format!("closed form and LP disagree by {dev:e}")).into());
            }
            out.provenance.lp_deviation = Some(dev);
        }
        Ok(out)
    }
}

/// Two-stage preference-robust OPA, optionally with an inconsistency mode.
pub struct PreferenceRobust;

impl DecisionModel for PreferenceRobust {
    fn name(&self) -> &str {
        "opa-pr"
    }

    fn solve(
        &self,
        doc: &InstanceDocument,
        sessions: &dyn SessionSource,
        opts: &SolveOptions,
    ) -> Result<ResultDocument> {
        let (inst, seeds) = build_pr_instance(doc, sessions)?;
        let sol = solve_opa_pr(&inst, opts.lp_check && doc.inconsistency.is_none())?;
        let mut out = match &doc.inconsistency {
            None => {
                let mut out = result(self.name(), doc, &sol.weights, "closed_form")?;
                out.provenance.lp_deviation = sol.lp_deviation;
                out
            }
            Some(config) => {
                let profile = stage2_profile(&inst, &sol)?;
                let outcome = solve_inconsistent(&profile, config)?;
                let path = match (config, &outcome) {
                    (_, InconsistencyOutcome::DisparityBudget(b)) if b.budget == 0.0 => "closed_form",
                    (InconsistencyConfig::DisparityBudget { .. }, _) => "lp",
                    (InconsistencyConfig::RankPerturbation { .. }, _) => "closed_form",
                    (InconsistencyConfig::ErroneousElicitation { .. }, _) => "milp",
                };
                let mut out = result(self.name(), doc, outcome.weights(), path)?;
                out.inconsistency = Some(outcome);
                out
            }
        };
        out.worst_case_utilities = Some(sol.stage1);
        out.provenance.seeds = seeds;
        Ok(out)
    }
}

/// Robust-satisficing OPA on top of the stage-1 worst-case utilities.
pub struct RobustSatisficing;

impl DecisionModel for RobustSatisficing {
    fn name(&self) -> &str {
        "opa-prs"
    }

    fn solve(
        &self,
        doc: &InstanceDocument,
        sessions: &dyn SessionSource,
        opts: &SolveOptions,
    ) -> Result<ResultDocument> {
        let alpha = opts
            .alpha
            .or(doc.alpha)
            .ok_or_else(|| WorkbenchError::schema("/alpha", "required by the robust-satisficing model"))?;
        let (inst, seeds) = build_pr_instance(doc, sessions)?;
        let sol = solve_opa_pr(&inst, false)?;
        let profile = stage2_profile(&inst, &sol)?;
        let t_intervals = doc.t_intervals.clone().unwrap_or_else(|| PrsInstance::degenerate_intervals(&profile));
        let prs = PrsInstance::new(profile, t_intervals, alpha)?;
        let res = solve_opa_prs(&prs)?;
        let mut out = result(self.name(), doc, &res.weights, "lp")?;
        out.fragility = Some(FragilityReport {
            alpha,
            target: res.target,
            eta: res.eta,
            total: res.total_fragility,
            phi: res.fragility_phi,
        });
        out.worst_case_utilities = Some(sol.stage1);
        out.provenance.seeds = seeds;
        Ok(out)
    }
}

pub struct ModelRegistry {
    models: Vec<Box<dyn DecisionModel>>,
}

impl Default for ModelRegistry {
    fn default() -> Self {
        let mut reg = ModelRegistry { models: Vec::new() };
        reg.register(Box::new(ClassicalOpa)).expect("fresh registry");
        reg.register(Box::new(PreferenceRobust)).expect("fresh registry");
        reg.register(Box::new(RobustSatisficing)).expect("fresh registry");
        reg
    }
}

impl ModelRegistry {
    pub fn register(&mut self, model: Box<dyn DecisionModel>) -> Result<()> {
        if self.models.iter().any(|m| m.name() == model.name()) {
            return Err(WorkbenchError::Conflict(format!("model `{}` already registered", model.name())));
        }
        self.models.push(model);
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&dyn DecisionModel> {
        self.models
            .iter()
            .find(|m| m.name() == name)
            .map(|m| m.as_ref())
            .ok_or_else(|| WorkbenchError::UnknownModel(name.to_string()))
    }

    pub fn names(&self) -> Vec<&str> {
        self.models.iter().map(|m| m.name()).collect()
    }

    pub fn solve(
        &self,
        name: &str,
        doc: &InstanceDocument,
        sessions: &dyn SessionSource,
        opts: &SolveOptions,
    ) -> Result<ResultDocument> {
        self.get(name)?.solve(doc, sessions, opts)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::document::parse_instance;

    const TINY: &str = r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[1,2,3]]]}"#;

    #[test]
    fn tiny_classical() {
        let doc = parse_instance(TINY).unwrap();
        let opts = SolveOptions { lp_check: true, ..Default::default() };
        let out = ModelRegistry::default().solve("opa", &doc, &NoSessions, &opts).unwrap();
        assert!((out.z - 1.0 / 3.0).abs() < 1e-12);
        // Weight at rank p is z times the sum of 1/h over h >= p.
        let w = &out.weights[0][0];
        assert!((w[0] - 11.0 / 18.0).abs() < 1e-12 && (w[2] - 1.0 / 9.0).abs() < 1e-12);
        assert!(out.provenance.lp_deviation.unwrap() <= 1e-8);
    }

    #[test]
    fn weights_follow_alternative_order() {
        let doc = parse_instance(r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[3,1,2]]]}"#).unwrap();
        let out = ClassicalOpa.solve(&doc, &NoSessions, &SolveOptions::default()).unwrap();
        let w = &out.weights[0][0];
        assert!(w[1] > w[2] && w[2] > w[0]);
    }

    #[test]
    fn robust_models_need_their_inputs() {
        let doc = parse_instance(TINY).unwrap();
        let reg = ModelRegistry::default();
        let err = reg.solve("opa-prs", &doc, &NoSessions, &SolveOptions::default()).unwrap_err();
        assert_eq!(err.violations()[0].pointer, "/alpha");
        assert_eq!(reg.solve("maut", &doc, &NoSessions, &SolveOptions::default()).unwrap_err().code(), "UNKNOWN_MODEL");
        let with_session = parse_instance(
            r#"{"schema_version":1,"t":[1],"s":[[1]],"r":[[[1,2,3]]],"utilities":[[{"session":"01ARZ3NDEKTSV4RRFFQ69G5FAV"}]]}"#,
        )
        .unwrap();
        let err = reg.solve("opa-pr", &with_session, &NoSessions, &SolveOptions::default()).unwrap_err();
        assert_eq!(err.violations()[0].pointer, "/utilities/0/0/session");
    }

    #[test]
    fn pr_with_chord_utility_and_prs_at_full_target() {
        let doc = parse_instance(TINY).unwrap();
        let reg = ModelRegistry::default();
        let pr = reg.solve("opa-pr", &doc, &NoSessions, &SolveOptions::default()).unwrap();
        let prs =
            reg.solve("opa-prs", &doc, &NoSessions, &SolveOptions { alpha: Some(1.0), ..Default::default() }).unwrap();
        assert_eq!(prs.fragility.as_ref().unwrap().total, 0.0);
        for (a, b) in pr.weights[0][0].iter().zip(&prs.weights[0][0]) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert_eq!(pr.worst_case_utilities.unwrap()[0][0].utility.values.len(), 4);
    }
}
