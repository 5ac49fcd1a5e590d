//! Adaptive lottery questionnaire that bisects a utility ambiguity set.
//!
//! Each question compares the lottery `(r1 w.p. 1-p, r3 w.p. p)` with the
//! sure rank `r2`. The probability `p` is the midpoint of the range of
//! `u(r2)` after rescaling so that `u(r1) = 0` and `u(r3) = 1`, so either
//! answer halves that range.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{OpaError, Result};
use crate::utility::{self, integer_grid, lottery_psi, MomentConstraint, UtilityAmbiguitySpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Answer {
    /// The expert takes the lottery; recorded as `u(r2) <= p`.
    PrefersLottery,
    PrefersCertain,
}

impl Answer {
    /// Truthful answer of an expert whose rescaled utility at `r2` is `value`.
    pub fn truthful(value: f64, p: f64) -> Self {
        if p >= value {
            Answer::PrefersLottery
        } else {
            Answer::PrefersCertain
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SessionStatus {
    Active,
    Complete,
    Inconsistent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LotteryQuestion {
    pub index: usize,
    pub r1: usize,
    pub r2: usize,
    pub r3: usize,
    pub p: f64,
    pub c_lo: f64,
    pub c_hi: f64,
    /// Slope cap used by the rescaled range program; `None` when it had to be dropped.
    pub slope_cap: Option<f64>,
    /// Set when the triple was supplied by the caller instead of drawn.
    #[serde(default)]
    pub forced: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AskedQuestion {
    pub question: LotteryQuestion,
    pub answer: Answer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElicitationSession {
    pub ranks: usize,
    pub lipschitz: f64,
    pub target_questions: usize,
    pub seed: u64,
    pub spec: UtilityAmbiguitySpec,
    pub asked: Vec<AskedQuestion>,
    pub pending: Option<LotteryQuestion>,
    pub status: SessionStatus,
    /// Set when `3 L + 2 > R`.
    pub budget_warning: bool,
    rng: ChaCha8Rng,
}

pub fn start_session(ranks: usize, lipschitz: f64, target_questions: usize, seed: u64) -> Result<ElicitationSession> {
    if ranks < 2 {
        return Err(OpaError::InvalidConfig(format!("need at least 2 ranks, got {ranks}")));
    }
    let spec = UtilityAmbiguitySpec::new(integer_grid(ranks), lipschitz, Vec::new())
        .map_err(|e| OpaError::InvalidConfig(e.to_string()))?;
    let budget_warning = 3 * target_questions + 2 > ranks;
    if budget_warning {
        warn!(
            "{target_questions} questions need {} breakpoints but only {ranks} ranks exist",
            3 * target_questions + 2
        );
    }
    Ok(ElicitationSession {
        ranks,
        lipschitz,
        target_questions,
        seed,
        spec,
        asked: Vec::new(),
        pending: None,
        status: if target_questions == 0 { SessionStatus::Complete } else { SessionStatus::Active },
        budget_warning,
        rng: ChaCha8Rng::seed_from_u64(seed),
    })
}

impl ElicitationSession {
    fn check_can_ask(&self) -> Result<()> {
        match self.status {
            SessionStatus::Inconsistent => Err(OpaError::SessionInconsistent),
            _ if self.asked.len() >= self.target_questions => Err(OpaError::SessionExhausted(self.target_questions)),
            _ => Ok(()),
        }
    }

    fn draw_triple(&mut self) -> (usize, usize, usize) {
        let r = self.ranks;
        let (mut a, mut b) = (self.rng.gen_range(1..=r), self.rng.gen_range(1..=r));
        while a == b {
            a = self.rng.gen_range(1..=r);
            b = self.rng.gen_range(1..=r);
        }
        let (r1, r3) = (a.min(b), a.max(b));
        let r2 = self.rng.gen_range(r1..=r3);
        (r1, r2, r3)
    }

    fn build_question(&self, r1: usize, r2: usize, r3: usize, p: Option<f64>, forced: bool) -> Result<LotteryQuestion> {
        let cap = self.lipschitz.max(1.0 / (r3 - r1) as f64);
        let mut slope_cap = Some(cap);
        let mut range = utility::local_range(&self.spec.grid, slope_cap, &self.spec.constraints, r1, r2, r3)?;
        if range.is_none() {
            slope_cap = None;
            range = utility::local_range(&self.spec.grid, None, &self.spec.constraints, r1, r2, r3)?;
        }
        let (c_lo, c_hi) = range.ok_or(OpaError::AmbiguitySetEmpty { cell: None })?;
        Ok(LotteryQuestion {
            index: self.asked.len(),
            r1,
            r2,
            r3,
            p: p.unwrap_or(0.5 * (c_lo + c_hi)),
            c_lo,
            c_hi,
            slope_cap,
            forced,
        })
    }

    /// Range of the rescaled `u(r2)` for `question`'s triple under the current constraints.
    pub fn question_interval(&self, question: &LotteryQuestion) -> Result<Option<(f64, f64)>> {
        utility::local_range(
            &self.spec.grid,
            question.slope_cap,
            &self.spec.constraints,
            question.r1,
            question.r2,
            question.r3,
        )
    }
}

/// Draws the next question, or returns the pending one unchanged.
pub fn next_question(session: &mut ElicitationSession) -> Result<LotteryQuestion> {
    if let Some(q) = &session.pending {
        return Ok(q.clone());
    }
    session.check_can_ask()?;
    let (r1, r2, r3) = session.draw_triple();
    let q = session.build_question(r1, r2, r3, None, false)?;
    session.pending = Some(q.clone());
    Ok(q)
}

/// Poses a caller-chosen triple. `p` defaults to the bisecting midpoint.
pub fn pose_question(
    session: &mut ElicitationSession,
    r1: usize,
    r2: usize,
    r3: usize,
    p: Option<f64>,
) -> Result<LotteryQuestion> {
    if session.pending.is_some() {
        return Err(OpaError::InvalidArg("a question is already pending".into()));
    }
    session.check_can_ask()?;
    if !(1 <= r1 && r1 < r3 && r3 <= session.ranks && (r1..=r3).contains(&r2)) {
        return Err(OpaError::InvalidArg(format!("need 1 <= r1 <= r2 <= r3 <= {} with r1 < r3", session.ranks)));
    }
    if let Some(p) = p {
        if !(0.0..=1.0).contains(&p) {
            return Err(OpaError::InvalidArg(format!("p = {p} outside [0, 1]")));
        }
    }
    let q = session.build_question(r1, r2, r3, p, true)?;
    session.pending = Some(q.clone());
    Ok(q)
}

pub fn record_answer(session: &mut ElicitationSession, answer: Answer) -> Result<()> {
    let q = session.pending.take().ok_or(OpaError::NoPendingQuestion)?;
    let theta = session.spec.theta();
    let psi = lottery_psi(theta, q.r1 as f64, q.r2 as f64, q.r3 as f64, q.p, answer == Answer::PrefersLottery);
    session.spec.constraints.push(MomentConstraint::new(psi, 0.0));
    session.asked.push(AskedQuestion { question: q, answer });
    session.status = match utility::feasible_member(&session.spec) {
        Err(OpaError::AmbiguitySetEmpty { .. }) => SessionStatus::Inconsistent,
        Err(e) => return Err(e),
        Ok(_) if session.asked.len() >= session.target_questions => SessionStatus::Complete,
        Ok(_) => SessionStatus::Active,
    };
    Ok(())
}

/// Pointwise range of the globally normalized utility at each rank.
pub fn utility_band(session: &ElicitationSession) -> Result<Vec<(f64, f64)>> {
    utility::utility_band(&session.spec)
}

pub fn finalize(session: &ElicitationSession) -> Result<UtilityAmbiguitySpec> {
    if session.status == SessionStatus::Inconsistent {
        return Err(OpaError::SessionInconsistent);
    }
    Ok(session.spec.clone())
}

/// Rebuilds a session from its configuration and recorded answers.
pub fn replay(
    ranks: usize,
    lipschitz: f64,
    target_questions: usize,
    seed: u64,
    history: &[AskedQuestion],
) -> Result<ElicitationSession> {
    let mut session = start_session(ranks, lipschitz, target_questions, seed)?;
    for (k, step) in history.iter().enumerate() {
        let recorded = &step.question;
        let q = if recorded.forced {
            pose_question(&mut session, recorded.r1, recorded.r2, recorded.r3, Some(recorded.p))?
        } else {
            next_question(&mut session)?
        };
        if (q.r1, q.r2, q.r3) != (recorded.r1, recorded.r2, recorded.r3) || q.p.to_bits() != recorded.p.to_bits() {
            return Err(OpaError::InvalidArg(format!("question {k} does not match the recorded history")));
        }
        record_answer(&mut session, step.answer)?;
    }
    Ok(session)
}
