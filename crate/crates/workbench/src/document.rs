//! Instance and result documents, their validation and canonical form.

use std::path::Path;

use opa_core::inconsistency::{InconsistencyConfig, InconsistencyOutcome};
use opa_core::opa::{GroupWeights, RankingProfile};
use opa_core::pr::RankInterval;
use opa_core::prs::ExpertInterval;
use opa_core::utility::{integer_grid, make_constraint, ConstraintKind, ScenarioSet, Stage1Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{Result, Violation, WorkbenchError};

pub const SCHEMA_VERSION: u32 = 1;

/// Source of the utility ambiguity set for one (expert, attribute) cell.
/// Exactly one of the two fields must be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UtilitySource {
    /// Id of a stored elicitation session.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub session: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraints: Option<Vec<ConstraintKind>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstanceDocument {
    pub schema_version: u32,
    pub t: Vec<usize>,
    pub s: Vec<Vec<usize>>,
    pub r: Vec<Vec<Vec<usize>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub s_intervals: Option<Vec<Vec<RankInterval>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t_intervals: Option<Vec<ExpertInterval>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    /// Lipschitz bound `G` shared by every cell; defaults to 1.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lipschitz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utilities: Option<Vec<Vec<UtilitySource>>>,
    /// `null` cells put equal mass on every rank.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenarios: Option<Vec<Vec<Option<ScenarioSet>>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconsistency: Option<InconsistencyConfig>,
}

const REQUIRED_KEYS: [&str; 4] = ["schema_version", "t", "s", "r"];

impl InstanceDocument {
    pub fn from_ranking(ranking: &RankingProfile) -> Self {
        InstanceDocument {
            schema_version: SCHEMA_VERSION,
            t: ranking.t.clone(),
            s: ranking.s.clone(),
            r: ranking.r.clone(),
            s_intervals: None,
            t_intervals: None,
            alpha: None,
            lipschitz: None,
            utilities: None,
            scenarios: None,
            inconsistency: None,
        }
    }

    pub fn num_experts(&self) -> usize {
        self.t.len()
    }

    pub fn num_attributes(&self) -> usize {
        self.s.first().map_or(0, Vec::len)
    }

    pub fn num_alternatives(&self) -> usize {
        self.r.first().and_then(|row| row.first()).map_or(0, Vec::len)
    }

    pub fn lipschitz(&self) -> f64 {
        self.lipschitz.unwrap_or(1.0)
    }

    pub fn ranking(&self) -> Result<RankingProfile> {
        Ok(RankingProfile::new(self.t.clone(), self.s.clone(), self.r.clone())?)
    }

    /// Every semantic problem in the document; empty when it is valid.
    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.schema_version != SCHEMA_VERSION {
            out.push(Violation::new(
                "/schema_version",
                format!("unsupported schema version {}, expected {SCHEMA_VERSION}", self.schema_version),
            ));
        }
        let (ni, nj, nk) = (self.num_experts(), self.num_attributes(), self.num_alternatives());
        if ni == 0 {
            out.push(Violation::new("/t", "need at least one expert"));
        }
        check_permutation(&self.t, ni, "/t", &mut out);
        if self.s.len() != ni {
            out.push(Violation::new("/s", format!("need one row per expert ({ni})")));
        }
        if nj == 0 {
            out.push(Violation::new("/s", "need at least one attribute"));
        }
        for (i, row) in self.s.iter().enumerate() {
            if row.len() != nj {
                out.push(Violation::new(format!("/s/{i}"), format!("need {nj} attribute ranks")));
            } else {
                check_permutation(row, nj, &format!("/s/{i}"), &mut out);
            }
        }
        if self.r.len() != ni {
            out.push(Violation::new("/r", format!("need one block per expert ({ni})")));
        }
        if nk == 0 {
            out.push(Violation::new("/r", "need at least one alternative"));
        }
        for (i, block) in self.r.iter().enumerate() {
            if block.len() != nj {
                out.push(Violation::new(format!("/r/{i}"), format!("need {nj} rows")));
                continue;
            }
            for (j, row) in block.iter().enumerate() {
                if row.len() != nk {
                    out.push(Violation::new(format!("/r/{i}/{j}"), format!("need {nk} alternative ranks")));
                } else {
                    check_permutation(row, nk, &format!("/r/{i}/{j}"), &mut out);
                }
            }
        }
        if !out.is_empty() {
            return out;
        }
        if let Some(iv) = &self.s_intervals {
            if check_grid_shape(iv, ni, nj, "/s_intervals", &mut out) {
                for (i, row) in iv.iter().enumerate() {
                    for (j, b) in row.iter().enumerate() {
                        let s = self.s[i][j];
                        if !(1 <= b.lo && b.lo <= s && s <= b.hi && b.hi <= nj) {
                            out.push(Violation::new(
                                format!("/s_intervals/{i}/{j}"),
                                format!("need 1 <= lo <= {s} <= hi <= {nj}"),
                            ));
                        }
                    }
                }
            }
        }
        if let Some(iv) = &self.t_intervals {
            if iv.len() != ni {
                out.push(Violation::new("/t_intervals", format!("need {ni} intervals")));
            } else {
                for (i, b) in iv.iter().enumerate() {
                    let t = self.t[i] as f64;
                    if !(b.lo > 0.0 && b.lo <= t && t <= b.hi && b.hi.is_finite()) {
                        out.push(Violation::new(format!("/t_intervals/{i}"), format!("need 0 < lo <= {t} <= hi")));
                    }
                }
            }
        }
        if let Some(a) = self.alpha {
            if !(0.0..=1.0).contains(&a) {
                out.push(Violation::new("/alpha", "must lie in [0, 1]"));
            }
        }
        if let Some(g) = self.lipschitz {
            if !(g.is_finite() && g > 0.0) || g * (nk as f64) < 1.0 {
                out.push(Violation::new("/lipschitz", format!("need a finite G with G * {nk} >= 1")));
            }
        }
        if let Some(u) = &self.utilities {
            if check_grid_shape(u, ni, nj, "/utilities", &mut out) {
                let grid = integer_grid(nk);
                for (i, row) in u.iter().enumerate() {
                    for (j, src) in row.iter().enumerate() {
                        let at = format!("/utilities/{i}/{j}");
                        match (&src.session, &src.constraints) {
                            (Some(_), Some(_)) | (None, None) => {
                                out.push(Violation::new(at, "need exactly one of `session` or `constraints`"))
                            }
                            (Some(id), None) if ulid::Ulid::from_string(id).is_err() => {
                                out.push(Violation::new(format!("{at}/session"), "not a session id"))
                            }
                            (Some(_), None) => {}
                            (None, Some(list)) => {
                                for (c, kind) in list.iter().enumerate() {
                                    if let Err(e) = make_constraint(&grid, kind) {
                                        out.push(Violation::new(format!("{at}/constraints/{c}"), e.to_string()));
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        if let Some(sc) = &self.scenarios {
            if check_grid_shape(sc, ni, nj, "/scenarios", &mut out) {
                for (i, row) in sc.iter().enumerate() {
                    for (j, set) in row.iter().enumerate() {
                        let Some(set) = set else { continue };
                        let at = format!("/scenarios/{i}/{j}");
                        if let Err(e) = ScenarioSet::new(set.outcomes.clone(), set.probabilities.clone()) {
                            out.push(Violation::new(at, e.to_string()));
                        } else if set.outcomes.iter().any(|h| !(0.0..=nk as f64).contains(h)) {
                            out.push(Violation::new(at, format!("outcomes must lie in [0, {nk}]")));
                        }
                    }
                }
            }
        }
        match &self.inconsistency {
            Some(InconsistencyConfig::DisparityBudget { budget: Some(b) }) if !(b.is_finite() && *b >= 0.0) => {
                out.push(Violation::new("/inconsistency/budget", "must be finite and nonnegative"));
            }
            Some(InconsistencyConfig::RankPerturbation { gamma }) => {
                if check_grid_shape(gamma, ni, nj, "/inconsistency/gamma", &mut out) {
                    for (i, row) in gamma.iter().enumerate() {
                        for (j, g) in row.iter().enumerate() {
                            if g.len() != nk {
                                out.push(Violation::new(
                                    format!("/inconsistency/gamma/{i}/{j}"),
                                    format!("need {nk} entries"),
                                ));
                            } else if g.iter().any(|x| !(x.abs() < 1.0)) {
                                out.push(Violation::new(
                                    format!("/inconsistency/gamma/{i}/{j}"),
                                    "entries must satisfy |gamma| < 1",
                                ));
                            }
                        }
                    }
                }
            }
            Some(InconsistencyConfig::ErroneousElicitation { z_target, error_fractions, big_m }) => {
                if !(z_target.is_finite() && *z_target >= 0.0) {
                    out.push(Violation::new("/inconsistency/z_target", "must be finite and nonnegative"));
                }
                if check_grid_shape(error_fractions, ni, nj, "/inconsistency/error_fractions", &mut out) {
                    for (i, row) in error_fractions.iter().enumerate() {
                        for (j, f) in row.iter().enumerate() {
                            if !(0.0..=1.0).contains(f) {
                                out.push(Violation::new(
                                    format!("/inconsistency/error_fractions/{i}/{j}"),
                                    "must lie in [0, 1]",
                                ));
                            }
                        }
                    }
                }
                if big_m.is_some_and(|m| !m.is_finite()) {
                    out.push(Violation::new("/inconsistency/big_m", "must be finite"));
                }
            }
            _ => {}
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        let v = self.violations();
        if v.is_empty() {
            Ok(())
        } else {
            Err(WorkbenchError::Schema(v))
        }
    }
}

fn check_permutation(values: &[usize], n: usize, at: &str, out: &mut Vec<Violation>) {
    let mut seen = vec![false; n];
    for (k, &v) in values.iter().enumerate() {
        if v == 0 || v > n {
            out.push(Violation::new(format!("{at}/{k}"), format!("rank {v} is outside 1..={n}")));
        } else if std::mem::replace(&mut seen[v - 1], true) {
            out.push(Violation::new(
                at.to_string(),
                format!("ranks must be a permutation (bijection onto 1..={n}); rank {v} appears twice"),
            ));
        }
    }
}

fn check_grid_shape<T>(rows: &[Vec<T>], ni: usize, nj: usize, at: &str, out: &mut Vec<Violation>) -> bool {
    let before = out.len();
    if rows.len() != ni {
        out.push(Violation::new(at.to_string(), format!("need {ni} rows")));
    }
    for (i, row) in rows.iter().enumerate() {
        if row.len() != nj {
            out.push(Violation::new(format!("{at}/{i}"), format!("need {nj} entries")));
        }
    }
    out.len() == before
}

/// Per-expert fragility `eta` of the satisficing weights and its totals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FragilityReport {
    pub alpha: f64,
    pub target: f64,
    pub eta: Vec<f64>,
    pub total: f64,
    pub phi: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    /// `closed_form`, `lp` or `milp`.
    pub solver_path: String,
    pub feas_tol: f64,
    pub opt_tol: f64,
    /// Seeds of the elicitation sessions the utilities came from.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub seeds: Vec<u64>,
    /// SHA-256 of the canonical instance document.
    pub instance_sha256: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lp_deviation: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResultDocument {
    pub schema_version: u32,
    pub model: String,
    pub z: f64,
    /// `weights[i][j][k]` is the weight of alternative `k + 1`.
    pub weights: Vec<Vec<Vec<f64>>>,
    pub aggregates: GroupWeights,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub worst_case_utilities: Option<Vec<Vec<Stage1Result>>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fragility: Option<FragilityReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inconsistency: Option<InconsistencyOutcome>,
    pub provenance: Provenance,
}

fn sort_keys(v: Value) -> Value {
    match v {
        Value::Object(map) => {
            let mut entries: Vec<(String, Value)> = map.into_iter().collect();
            entries.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(entries.into_iter().map(|(k, v)| (k, sort_keys(v))).collect())
        }
        Value::Array(items) => Value::Array(items.into_iter().map(sort_keys).collect()),
        other => other,
    }
}

/// Compact UTF-8 JSON with object keys in lexicographic order.
pub fn to_canonical_json<T: Serialize>(value: &T) -> Result<String> {
    let v = serde_json::to_value(value).map_err(|e| WorkbenchError::Parse(e.to_string()))?;
    serde_json::to_string(&sort_keys(v)).map_err(|e| WorkbenchError::Parse(e.to_string()))
}

pub fn sha256_hex(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

pub fn canonical_hash<T: Serialize>(value: &T) -> Result<String> {
    Ok(sha256_hex(&to_canonical_json(value)?))
}

fn pointer_of(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    path.iter()
        .filter_map(|seg| match seg {
            Segment::Seq { index } => Some(index.to_string()),
            Segment::Map { key } => Some(key.replace('~', "~0").replace('/', "~1")),
            Segment::Enum { .. } | Segment::Unknown => None,
        })
        .fold(String::new(), |acc, s| format!("{acc}/{s}"))
}

/// Deserializes `value`, reporting type errors at their JSON pointer.
pub fn from_value<T: DeserializeOwned>(value: Value) -> Result<T> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let pointer = pointer_of(e.path());
        WorkbenchError::schema(pointer, e.into_inner().to_string())
    })
}

pub fn parse_json(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| WorkbenchError::Parse(e.to_string()))
}

/// Validates an already parsed instance.
pub fn instance_from_value(value: Value) -> Result<InstanceDocument> {
    let Some(obj) = value.as_object() else {
        return Err(WorkbenchError::schema("", "instance must be a JSON object"));
    };
    let missing: Vec<Violation> = REQUIRED_KEYS
        .iter()
        .filter(|k| !obj.contains_key(**k))
        .map(|k| Violation::new(format!("/{k}"), "required field is missing"))
        .collect();
    if !missing.is_empty() {
        return Err(WorkbenchError::Schema(missing));
    }
    let doc: InstanceDocument = from_value(value)?;
    doc.validate()?;
    Ok(doc)
}

pub fn parse_instance(text: &str) -> Result<InstanceDocument> {
    instance_from_value(parse_json(text)?)
}

pub fn read_text(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => WorkbenchError::NotFound(path.display().to_string()),
        std::io::ErrorKind::InvalidData => WorkbenchError::Parse(format!("{} is not UTF-8", path.display())),
        _ => WorkbenchError::Io(e),
    })
}

pub fn load_instance(path: impl AsRef<Path>) -> Result<InstanceDocument> {
    parse_instance(&read_text(path.as_ref())?)
}

pub fn parse_result(text: &str) -> Result<ResultDocument> {
    from_value(parse_json(text)?)
}
