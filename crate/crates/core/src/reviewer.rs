//! Reviewer decline / shirk / work choice and the participation transition.

use serde::Serialize;

use crate::calibration::Calibration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// Shirking is dominated by declining; only conscientious types review.
    PreTransition,
    /// Shirking weakly beats declining; everyone accepts.
    PostTransition,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ReviewerEquilibrium {
    pub regime: Regime,
    /// Mass of reviewers who accept invitations.
    pub pool_mass: f64,
    /// Share of the accepting pool that exerts effort.
    pub effort_rate: f64,
    /// Work/decline threshold type.
    pub t0: f64,
    /// Work/shirk threshold type.
    pub t_tilde: f64,
    pub gamma1: f64,
    pub shirk_surplus: f64,
}

/// Payoff of accepting and shirking relative to declining.
pub fn shirk_surplus(cal: &Calibration, gamma: f64, p_det: f64) -> f64 {
    cal.review_baseline + cal.appearance_reward * gamma * (1.0 - p_det)
        - cal.detection_penalty * p_det
}

/// AI capability at which shirking becomes weakly profitable. May exceed 1,
/// meaning no transition happens on `[0, 1]`.
pub fn gamma1(cal: &Calibration, p_det: f64) -> f64 {
    (-cal.review_baseline + cal.detection_penalty * p_det)
        / (cal.appearance_reward * (1.0 - p_det))
}

fn work_decline_threshold(cal: &Calibration) -> f64 {
    cal.review_cost
        .inverse(cal.review_baseline + cal.appearance_reward)
}

fn work_shirk_threshold(cal: &Calibration, gamma: f64, p_det: f64) -> f64 {
    let psi = cal.appearance_reward;
    cal.review_cost
        .inverse(psi * (1.0 - gamma * (1.0 - p_det)) + cal.detection_penalty * p_det)
}

/// Equilibrium pool and effort rate at capability `gamma`. Reviewers are
/// assumed to ignore the editor's ex-post screen, so the decentralized
/// analysis calls this with `p_det = 0`.
pub fn participation(cal: &Calibration, gamma: f64, p_det: f64) -> ReviewerEquilibrium {
    let s = shirk_surplus(cal, gamma, p_det);
    let t0 = work_decline_threshold(cal);
    let t_tilde = work_shirk_threshold(cal, gamma, p_det);
    let g = &cal.reviewer_types;
    // S = 0 counts as post-transition: shirking weakly beats declining.
    let (regime, pool_mass, effort_rate) = if s < 0.0 {
        (Regime::PreTransition, 1.0 - g.cdf(t0), 1.0)
    } else {
        (Regime::PostTransition, 1.0, 1.0 - g.cdf(t_tilde))
    };
    ReviewerEquilibrium {
        regime,
        pool_mass,
        effort_rate,
        t0,
        t_tilde,
        gamma1: gamma1(cal, p_det),
        shirk_surplus: s,
    }
}

/// Effort rate in the decentralized equilibrium (`p_det = 0`).
pub fn effort_rate(cal: &Calibration, gamma: f64) -> f64 {
    participation(cal, gamma, 0.0).effort_rate
}

/// Offset used to evaluate one-sided limits at the transition.
pub const TRANSITION_OFFSET: f64 = 1e-9;

/// Effort rate just above the transition, `m1`.
pub fn post_transition_effort(cal: &Calibration) -> f64 {
    effort_rate(cal, gamma1(cal, 0.0) + TRANSITION_OFFSET)
}
