//! Symmetric rat-race polish equilibrium and author welfare.
//!
//! Polish shifts the signal distribution and the acceptance threshold by the
//! same amount, so the density at the threshold does not depend on the
//! common polish level. The first-order condition
//! `c_A'(a) = V beta M h(z)` is therefore a one-dimensional root in `a`
//! rather than a fixed point, and has a closed form for quadratic cost.

use log::warn;
use serde::Serialize;

use crate::calibration::{Calibration, PolishCost};
use crate::error::{ModelError, Result};
use crate::numerics::{bisect, derivative};
use crate::policy::Policy;
use crate::signal::{retained_model, threshold_and_density, ThresholdDensity};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct AuthorEquilibrium {
    pub polish: f64,
    /// Rent dissipated on polish, `c_A(a*)`.
    pub dissipation: f64,
    /// `K V - c_A(a*)`.
    pub welfare: f64,
    /// Effective effort share used in the first-order condition.
    pub effort_share: f64,
    pub threshold: ThresholdDensity,
    /// `M h` (the marginal-return index).
    pub marginal_index: f64,
}

impl AuthorEquilibrium {
    pub fn marginal_density(&self) -> f64 {
        self.threshold.h
    }
}

const FOC_TOL: f64 = 1e-13;

/// Solves `c_A'(a) = target` for `a >= 0` by bracketed bisection.
pub fn solve_polish_foc(cost: PolishCost, kappa: f64, target: f64) -> Result<f64> {
    if target <= 0.0 {
        return Ok(0.0);
    }
    let mut hi = 1.0;
    while cost.marginal(hi, kappa) < target {
        hi *= 2.0;
        if hi > 1e12 {
            return Err(ModelError::RootNonconvergence(
                "polish first-order condition has no bracket".into(),
            ));
        }
    }
    bisect(|a| cost.marginal(a, kappa) - target, 0.0, hi, FOC_TOL * hi.max(1.0))
}

/// Closed-form polish for quadratic cost.
pub fn quadratic_polish(cal: &Calibration, effort_share: f64, h: f64) -> f64 {
    cal.publication_value * cal.polish_weight * effort_share * h / cal.polish_cost_scale
}

/// Equilibrium with a real-valued panel size; used for sensitivities in `N`.
pub(crate) fn polish_at(
    cal: &Calibration,
    m: f64,
    accept_rate: f64,
    p_det: f64,
    panel: f64,
) -> Result<AuthorEquilibrium> {
    let model = retained_model(cal, m, p_det, panel)?;
    let threshold = threshold_and_density(cal, &model, accept_rate)?;
    let effort_share = model.effort_share;
    let target = cal.publication_value * cal.polish_weight * effort_share * threshold.h;
    let polish = match cal.polish_cost {
        PolishCost::Quadratic => quadratic_polish(cal, effort_share, threshold.h),
        cost => solve_polish_foc(cost, cal.polish_cost_scale, target)?,
    };
    let dissipation = cal.polish_cost.eval(polish, cal.polish_cost_scale);
    Ok(AuthorEquilibrium {
        polish,
        dissipation,
        welfare: accept_rate * cal.publication_value - dissipation,
        effort_share,
        threshold,
        marginal_index: effort_share * threshold.h,
    })
}

pub fn equilibrium_polish(cal: &Calibration, m: f64, policy: &Policy) -> Result<AuthorEquilibrium> {
    policy.check()?;
    if !(0.0..=1.0).contains(&m) {
        return Err(ModelError::InvalidInput(format!("effort rate must lie in [0, 1], got {m}")));
    }
    polish_at(cal, m, policy.accept_rate, policy.p_det, policy.panel as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PolishSensitivities {
    pub d_accept_rate: f64,
    pub d_detection: f64,
    pub d_panel: f64,
}

/// Relative step of the central differences behind [`polish_sensitivities`].
pub const SENSITIVITY_STEP: f64 = 1e-4;

/// Finite-difference derivatives of `a*` in `K`, `p_det` and (real-valued)
/// `N`. At `p_det = 0` the detection derivative uses a one-sided stencil.
pub fn polish_sensitivities(
    cal: &Calibration,
    m: f64,
    policy: &Policy,
) -> Result<PolishSensitivities> {
    policy.check()?;
    let (k, p, n) = (policy.accept_rate, policy.p_det, policy.panel as f64);
    let mut err = None;
    let mut eval = |k: f64, p: f64, n: f64| match polish_at(cal, m, k, p, n) {
        Ok(eq) => eq.polish,
        Err(e) => {
            err.get_or_insert(e);
            f64::NAN
        }
    };
    let d_accept_rate = derivative(|x| eval(x, p, n), k, SENSITIVITY_STEP, None);
    let d_detection = derivative(|x| eval(k, x, n), p, SENSITIVITY_STEP, Some(0.0));
    let d_panel = derivative(|x| eval(k, p, x), n, SENSITIVITY_STEP, None);
    match err {
        Some(e) => Err(e),
        None => Ok(PolishSensitivities { d_accept_rate, d_detection, d_panel }),
    }
}

/// Author-welfare slope in the acceptance rate at `p_det = 0`:
/// `V - c_A'(a*) da*/dK`. For quadratic cost this is
/// `V + V^2 beta^2 m^2 h'(z) / kappa`.
pub fn welfare_slope_in_accept_rate(cal: &Calibration, m: f64, accept_rate: f64, panel: u32) -> Result<f64> {
    let eq = polish_at(cal, m, accept_rate, 0.0, panel as f64)?;
    let v = cal.publication_value;
    match cal.polish_cost {
        PolishCost::Quadratic => Ok(v
            + v * v * cal.polish_weight.powi(2) * eq.effort_share.powi(2) * eq.threshold.h_prime
                / cal.polish_cost_scale),
        cost => {
            let policy = Policy::new(panel, accept_rate, 0.0)?;
            let s = polish_sensitivities(cal, m, &policy)?;
            Ok(v - cost.marginal(eq.polish, cal.polish_cost_scale) * s.d_accept_rate)
        }
    }
}

/// Checks that `m h(z(m, K))` is weakly increasing on a 20-point effort
/// grid. Logs a warning naming the assumption when it is not.
pub fn marginal_index_is_monotone(cal: &Calibration, accept_rate: f64, panel: u32) -> Result<bool> {
    let mut last = f64::NEG_INFINITY;
    let mut ok = true;
    for i in 1..=20 {
        let m = i as f64 / 20.0;
        let idx = polish_at(cal, m, accept_rate, 0.0, panel as f64)?.marginal_index;
        if idx < last - 1e-12 {
            ok = false;
        }
        last = idx;
    }
    if !ok {
        warn!("Assumption 4: m h_m(tau_K) is not weakly increasing in m for this calibration");
    }
    Ok(ok)
}
