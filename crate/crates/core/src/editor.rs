//! Sorting quality, editor welfare and the decentralized panel size.

use serde::Serialize;

use crate::author::polish_at;
use crate::calibration::{Calibration, DensityMode};
use crate::error::{ModelError, Result};
use crate::numerics::{integrate, norm_inv_cdf, norm_pdf, norm_sf};
use crate::policy::Policy;
use crate::reviewer::{effort_rate, gamma1};
use crate::signal::{retained_model, PolishFreeAggregate, RetainedSignalModel};

const QUALITY_PANELS: usize = 64;

/// `E[theta | accepted]` when the editor accepts the top `accept_rate`
/// share of papers ranked on the retained signal.
pub fn sorting_quality(
    cal: &Calibration,
    effort_share: f64,
    retained: f64,
    accept_rate: f64,
) -> Result<f64> {
    sorting_quality_in(cal.density_mode, cal, effort_share, retained, accept_rate)
}

pub fn sorting_quality_in(
    mode: DensityMode,
    cal: &Calibration,
    effort_share: f64,
    retained: f64,
    accept_rate: f64,
) -> Result<f64> {
    if !(accept_rate > 0.0 && accept_rate < 1.0) {
        return Err(ModelError::InvalidInput(format!(
            "acceptance rate must lie in (0, 1), got {accept_rate}"
        )));
    }
    if !(0.0..=1.0).contains(&effort_share) || !(retained > 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "need M in [0, 1] and N_ret > 0, got M = {effort_share}, N_ret = {retained}"
        )));
    }
    let report_variance = cal.report_noise_variance(effort_share);
    let model = RetainedSignalModel {
        effort_share,
        retained,
        report_variance,
        noise_sd: (report_variance / retained).sqrt(),
    };
    quality_for(mode, cal, &model, accept_rate)
}

fn quality_for(
    mode: DensityMode,
    cal: &Calibration,
    model: &RetainedSignalModel,
    accept_rate: f64,
) -> Result<f64> {
    let f = &cal.quality;
    let mu = f.mean();
    if model.effort_share == 0.0 {
        return Ok(mu);
    }
    match mode {
        DensityMode::GaussianApprox => {
            let sd_theta = f.variance().sqrt();
            let m = model.effort_share;
            let sd_signal = (m * m * f.variance() + model.noise_sd.powi(2)).sqrt();
            let rho = m * sd_theta / sd_signal;
            let x = norm_inv_cdf(1.0 - accept_rate);
            Ok(mu + rho * sd_theta * norm_pdf(x) / accept_rate)
        }
        DensityMode::ExactConvolution => {
            let agg = PolishFreeAggregate::new(f, model);
            let z = agg.upper_quantile(accept_rate)?;
            let (lo, hi) = f.support();
            let (m, sd) = (model.effort_share, model.noise_sd);
            let pass = |t: f64| f.pdf(t) * norm_sf((z - m * t) / sd);
            let mass = integrate(pass, lo, hi, QUALITY_PANELS);
            let first = integrate(|t| t * pass(t), lo, hi, QUALITY_PANELS);
            Ok(first / mass)
        }
    }
}

/// Sorting quality and editor welfare under a policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EditorOutcome {
    #[serde(rename = "Q")]
    pub quality: f64,
    #[serde(rename = "U_E")]
    pub welfare: f64,
    /// Decentralized panel size at the same effort rate.
    #[serde(rename = "N_star")]
    pub n_star: u32,
    pub policy: Policy,
}

/// `(Q, U_E)` with a real-valued panel; the building block of every grid.
pub(crate) fn editor_value(
    cal: &Calibration,
    m: f64,
    accept_rate: f64,
    p_det: f64,
    panel: f64,
) -> Result<(f64, f64)> {
    let model = retained_model(cal, m, p_det, panel)?;
    let q = quality_for(cal.density_mode, cal, &model, accept_rate)?;
    let cost = cal.invitation_cost * panel + cal.detection_cost.eval(p_det);
    Ok((q, q - cost))
}

pub fn editor_welfare(cal: &Calibration, m: f64, policy: &Policy) -> Result<EditorOutcome> {
    policy.check()?;
    let (quality, welfare) =
        editor_value(cal, m, policy.accept_rate, policy.p_det, policy.panel as f64)?;
    Ok(EditorOutcome {
        quality,
        welfare,
        n_star: decentralized_n_at_effort(cal, m, cal.solver.n_max)?,
        policy: *policy,
    })
}

/// Panel size maximizing `Q(N, K0, m) - epsilon N` at `p_det = 0`; ties go to
/// the smaller panel.
pub fn decentralized_n_at_effort(cal: &Calibration, m: f64, n_max: u32) -> Result<u32> {
    if n_max == 0 {
        return Err(ModelError::InvalidInput("n_max must be at least 1".into()));
    }
    let mut best = (1, f64::NEG_INFINITY);
    for n in 1..=n_max {
        let (_, u) = editor_value(cal, m, cal.base_accept_rate, 0.0, n as f64)?;
        if u > best.1 {
            best = (n, u);
        }
    }
    Ok(best.0)
}

pub fn decentralized_n(cal: &Calibration, gamma: f64, n_max: u32) -> Result<u32> {
    decentralized_n_at_effort(cal, effort_rate(cal, gamma), n_max)
}

/// Panel size held fixed by the reform problem: the decentralized optimum
/// just below the transition.
pub fn reform_panel(cal: &Calibration) -> Result<u32> {
    decentralized_n_at_effort(cal, effort_rate(cal, pre_transition_gamma(cal)), cal.solver.n_max)
}

pub(crate) fn pre_transition_gamma(cal: &Calibration) -> f64 {
    (gamma1(cal, 0.0) - crate::reviewer::TRANSITION_OFFSET).max(0.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Misalignment {
    /// Jump in author welfare across the transition.
    #[serde(rename = "dU_A")]
    pub d_author: f64,
    /// Jump in the decentralized editor optimum across the transition.
    #[serde(rename = "dU_E")]
    pub d_editor: f64,
    /// `c_A(a*(1)) - c_A(a*(m1))`, which `dU_A` should equal.
    pub dissipation_drop: f64,
}

/// Step used on each side of the transition.
pub const MISALIGNMENT_STEP: f64 = 1e-6;

pub fn misalignment_at_transition(cal: &Calibration) -> Result<Misalignment> {
    let g1 = gamma1(cal, 0.0);
    let panel = reform_panel(cal)?;
    let k0 = cal.base_accept_rate;
    let side = |gamma: f64| -> Result<(f64, f64, f64)> {
        let m = effort_rate(cal, gamma);
        let author = polish_at(cal, m, k0, 0.0, panel as f64)?;
        let n = decentralized_n_at_effort(cal, m, cal.solver.n_max)?;
        let (_, u_e) = editor_value(cal, m, k0, 0.0, n as f64)?;
        Ok((author.welfare, u_e, author.dissipation))
    };
    let (ua_lo, ue_lo, c_lo) = side(g1 - MISALIGNMENT_STEP)?;
    let (ua_hi, ue_hi, c_hi) = side(g1 + MISALIGNMENT_STEP)?;
    Ok(Misalignment {
        d_author: ua_hi - ua_lo,
        d_editor: ue_hi - ue_lo,
        dissipation_drop: c_lo - c_hi,
    })
}
