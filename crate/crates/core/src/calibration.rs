//! Model primitives, functional forms and assumption checks.
//!
//! Every solver consumes a [`Calibration`] that has passed [`Calibration::validate`].
//! The JSON layout uses the flat parameter names of the model (`V`, `beta`,
//! `kappa`, ...) plus nested objects for the functional forms and the solver
//! grid. Unknown keys are rejected.

use serde::{Deserialize, Serialize};

use crate::dist::DistributionSpec;
use crate::error::{ModelError, Result, Violation};
use crate::numerics::bisect;

/// How threshold densities and sorting quality are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DensityMode {
    /// Normal with the mean and variance of the polish-free aggregate signal.
    #[default]
    GaussianApprox,
    /// Exact convolution of the quality distribution with Gaussian noise.
    ExactConvolution,
}

/// Reviewer effort cost `c_R(t)`, strictly decreasing in the type `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReviewerCost {
    /// `c0 (1 - t)`
    Linear { c0: f64 },
    /// `c0 (1 - t)^exponent`
    Power { c0: f64, exponent: f64 },
}

impl Default for ReviewerCost {
    fn default() -> Self {
        ReviewerCost::Linear { c0: 1.36 }
    }
}

const COST_INVERSE_TOL: f64 = 1e-12;

impl ReviewerCost {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            ReviewerCost::Linear { c0 } => c0 * (1.0 - t),
            ReviewerCost::Power { c0, exponent } => c0 * (1.0 - t).max(0.0).powf(exponent),
        }
    }

    /// `c_R^{-1}(x)`, clamped to 0 above `c_R(0)` and to 1 below `c_R(1)`.
    pub fn inverse(&self, x: f64) -> f64 {
        let (top, bottom) = (self.eval(0.0), self.eval(1.0));
        if x >= top {
            return 0.0;
        }
        if x <= bottom {
            return 1.0;
        }
        match *self {
            ReviewerCost::Linear { c0 } => 1.0 - x / c0,
            ReviewerCost::Power { .. } => {
                bisect(|t| self.eval(t) - x, 0.0, 1.0, COST_INVERSE_TOL).unwrap_or(0.5)
            }
        }
    }

    fn check(&self) -> Vec<Violation> {
        let ok = match *self {
            ReviewerCost::Linear { c0 } => c0 > 0.0 && c0.is_finite(),
            ReviewerCost::Power { c0, exponent } => c0 > 0.0 && exponent > 0.0,
        };
        if ok {
            vec![]
        } else {
            vec![Violation::new(
                "Assumption 2(ii)",
                "c_R must be continuous and strictly decreasing (c0 > 0, exponent > 0)",
            )]
        }
    }
}

/// Editor's detection cost `D(p_det)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DetectionCost {
    /// `d0 p^2 / (1 - p)`
    QuadraticBarrier { d0: f64 },
}

impl Default for DetectionCost {
    fn default() -> Self {
        DetectionCost::QuadraticBarrier { d0: 0.02 }
    }
}

impl DetectionCost {
    pub fn eval(&self, p: f64) -> f64 {
        match *self {
            DetectionCost::QuadraticBarrier { d0 } => d0 * p * p / (1.0 - p),
        }
    }

    pub fn derivative(&self, p: f64) -> f64 {
        match *self {
            DetectionCost::QuadraticBarrier { d0 } => d0 * p * (2.0 - p) / (1.0 - p).powi(2),
        }
    }

    pub fn second_derivative(&self, p: f64) -> f64 {
        match *self {
            DetectionCost::QuadraticBarrier { d0 } => 2.0 * d0 / (1.0 - p).powi(3),
        }
    }

    fn check(&self) -> Vec<Violation> {
        match *self {
            DetectionCost::QuadraticBarrier { d0 } if d0 > 0.0 && d0.is_finite() => vec![],
            DetectionCost::QuadraticBarrier { d0 } => vec![Violation::new(
                "Assumption 5",
                format!("D must be strictly convex with D'(p) -> inf; need d0 > 0, got {d0}"),
            )],
        }
    }
}

/// Author polish cost shape; the scale is the calibration's `kappa`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum PolishCost {
    /// `kappa a^2 / 2`
    #[default]
    Quadratic,
    /// `kappa a^eta / eta`, `eta > 1`
    Power { eta: f64 },
}

impl PolishCost {
    pub fn eval(&self, a: f64, kappa: f64) -> f64 {
        match *self {
            PolishCost::Quadratic => 0.5 * kappa * a * a,
            PolishCost::Power { eta } => kappa * a.powf(eta) / eta,
        }
    }

    pub fn marginal(&self, a: f64, kappa: f64) -> f64 {
        match *self {
            PolishCost::Quadratic => kappa * a,
            PolishCost::Power { eta } => kappa * a.powf(eta - 1.0),
        }
    }

    pub fn is_quadratic(&self) -> bool {
        matches!(self, PolishCost::Quadratic)
    }
}

/// Grid and scan settings for the reform solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverSettings {
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
    pub p_max: f64,
    pub p_steps: usize,
    pub n_max: u32,
    /// Run the local refinement pass after the grid search.
    pub refine: bool,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            k_min: 0.02,
            k_max: 0.98,
            k_steps: 97,
            p_max: 0.95,
            p_steps: 96,
            n_max: 20,
            refine: true,
        }
    }
}

impl SolverSettings {
    pub fn k_grid(&self) -> Vec<f64> {
        linspace(self.k_min, self.k_max, self.k_steps)
    }

    pub fn p_grid(&self) -> Vec<f64> {
        linspace(0.0, self.p_max, self.p_steps)
    }

    pub fn k_step(&self) -> f64 {
        (self.k_max - self.k_min) / (self.k_steps - 1) as f64
    }

    pub fn p_step(&self) -> f64 {
        self.p_max / (self.p_steps - 1) as f64
    }

    fn check(&self) -> Vec<Violation> {
        let ok = self.k_steps >= 2
            && self.p_steps >= 2
            && self.n_max >= 1
            && 0.0 < self.k_min
            && self.k_min < self.k_max
            && self.k_max < 1.0
            && 0.0 < self.p_max
            && self.p_max < 1.0;
        if ok {
            vec![]
        } else {
            vec![Violation::new(
                "solver",
                "grid needs 0 < k_min < k_max < 1, 0 < p_max < 1, at least 2 steps per axis and n_max >= 1",
            )]
        }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Calibration {
    /// Publication value `V`.
    #[serde(rename = "V")]
    pub publication_value: f64,
    /// Weight of polish in effortful reports.
    #[serde(rename = "beta")]
    pub polish_weight: f64,
    /// Polish cost scale `kappa`.
    #[serde(rename = "kappa")]
    pub polish_cost_scale: f64,
    #[serde(rename = "psi_alpha")]
    pub appearance_reward: f64,
    /// Baseline payoff of accepting a review invitation (negative).
    #[serde(rename = "R")]
    pub review_baseline: f64,
    #[serde(rename = "ell")]
    pub detection_penalty: f64,
    #[serde(rename = "sigma_e")]
    pub sigma_effort: f64,
    #[serde(rename = "sigma_s")]
    pub sigma_shirk: f64,
    /// Per-reviewer invitation cost.
    #[serde(rename = "epsilon")]
    pub invitation_cost: f64,
    #[serde(rename = "N")]
    pub panel_size: u32,
    #[serde(rename = "K0")]
    pub base_accept_rate: f64,
    #[serde(rename = "F_spec", default)]
    pub quality: DistributionSpec,
    #[serde(rename = "G_spec", default)]
    pub reviewer_types: DistributionSpec,
    #[serde(rename = "cR_spec", default)]
    pub review_cost: ReviewerCost,
    #[serde(rename = "cA_spec", default)]
    pub polish_cost: PolishCost,
    #[serde(rename = "D_spec", default)]
    pub detection_cost: DetectionCost,
    #[serde(default)]
    pub density_mode: DensityMode,
    #[serde(default)]
    pub solver: SolverSettings,
}

impl Calibration {
    /// The baseline calibration table. Its reviewer cost scale `c0 = 1.36`
    /// puts the post-transition effort rate at 0.125.
    pub fn baseline() -> Calibration {
        Calibration {
            publication_value: 1.0,
            polish_weight: 0.5,
            polish_cost_scale: 0.3,
            appearance_reward: 0.25,
            review_baseline: -0.08,
            detection_penalty: 0.05,
            sigma_effort: 0.3,
            sigma_shirk: 0.4,
            invitation_cost: 0.02,
            panel_size: 2,
            base_accept_rate: 0.3,
            quality: DistributionSpec::unit_uniform(),
            reviewer_types: DistributionSpec::unit_uniform(),
            review_cost: ReviewerCost::default(),
            polish_cost: PolishCost::Quadratic,
            detection_cost: DetectionCost::default(),
            density_mode: DensityMode::GaussianApprox,
            solver: SolverSettings::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Calibration> {
        serde_json::from_str(text).map_err(|e| ModelError::Config(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("calibration serializes")
    }

    /// Returns the calibration iff every model assumption holds, otherwise
    /// reports all violated assumptions at once.
    pub fn validate(self) -> Result<Calibration> {
        let v = self.violations();
        if v.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::AssumptionViolation(v))
        }
    }

    pub fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut need = |ok: bool, assumption: &'static str, detail: String| {
            if !ok {
                out.push(Violation::new(assumption, detail));
            }
        };
        let positive = [
            ("V", self.publication_value),
            ("beta", self.polish_weight),
            ("kappa", self.polish_cost_scale),
            ("psi_alpha", self.appearance_reward),
        ];
        for (name, x) in positive {
            need(x > 0.0 && x.is_finite(), "parameter domain", format!("{name} must be positive, got {x}"));
        }
        need(
            self.detection_penalty >= 0.0,
            "parameter domain",
            format!("ell must be nonnegative, got {}", self.detection_penalty),
        );
        need(
            self.invitation_cost >= 0.0,
            "parameter domain",
            format!("epsilon must be nonnegative, got {}", self.invitation_cost),
        );
        need(self.panel_size >= 1, "parameter domain", "N must be at least 1".into());
        need(
            self.base_accept_rate > 0.0 && self.base_accept_rate < 1.0,
            "parameter domain",
            format!("K0 must lie in (0, 1), got {}", self.base_accept_rate),
        );

        let (se, ss) = (self.sigma_effort, self.sigma_shirk);
        need(
            se > 0.0 && ss > se,
            "Assumption 3",
            format!("requires sigma_s > sigma_e > 0, got sigma_s = {ss}, sigma_e = {se}"),
        );

        let (r, psi) = (self.review_baseline, self.appearance_reward);
        need(r < 0.0, "Assumption 2(iii)", format!("requires R < 0, got R = {r}"));
        need(
            r + psi > 0.0,
            "Assumption 2(iii)",
            format!("requires R + psi_alpha > 0, got {}", r + psi),
        );
        let cost_violations = self.review_cost.check();
        let cost_ok = cost_violations.is_empty();
        out.extend(cost_violations);
        if cost_ok {
            let (c_top, c_bottom) = (self.review_cost.eval(0.0), self.review_cost.eval(1.0));
            if !(c_bottom < r + psi && r + psi < c_top) {
                out.push(Violation::new(
                    "Assumption 2(iii)",
                    format!(
                        "requires c_R(1) < R + psi_alpha < c_R(0), got {c_bottom} < {} < {c_top}",
                        r + psi
                    ),
                ));
            }
        }

        out.extend(self.quality.check("Assumption 1(i)", "F"));
        out.extend(self.reviewer_types.check("Assumption 2(i)", "G"));
        if self.reviewer_types.support() != (0.0, 1.0) {
            out.push(Violation::new("Assumption 2(i)", "G must be supported on [0, 1]"));
        }
        if let PolishCost::Power { eta } = self.polish_cost {
            if !(eta > 1.0) {
                out.push(Violation::new(
                    "Assumption 1(ii)",
                    format!("c_A must be strictly convex with c_A'(0) = 0; need eta > 1, got {eta}"),
                ));
            }
        }
        out.extend(self.detection_cost.check());
        out.extend(self.solver.check());
        out
    }

    /// Sets the linear reviewer cost scale so that the effort rate just
    /// above the participation threshold equals `target_m1`.
    pub fn calibrate_reviewer_cost(mut self, target_m1: f64) -> Result<Calibration> {
        if !self.reviewer_types.is_uniform() || self.reviewer_types.support() != (0.0, 1.0) {
            return Err(ModelError::InvalidInput(
                "reviewer cost calibration needs G uniform on [0, 1]".into(),
            ));
        }
        if !matches!(self.review_cost, ReviewerCost::Linear { .. }) {
            return Err(ModelError::InvalidInput(
                "reviewer cost calibration needs a linear c_R".into(),
            ));
        }
        let surplus = self.review_baseline + self.appearance_reward;
        if !(target_m1 > 0.0 && target_m1 < 1.0) || !(surplus > 0.0) {
            return Err(ModelError::Infeasible(format!(
                "target m1 = {target_m1} needs c0 = (R + psi_alpha)/m1 > R + psi_alpha = {surplus}"
            )));
        }
        self.review_cost = ReviewerCost::Linear { c0: surplus / target_m1 };
        self.validate().map_err(|e| ModelError::Infeasible(e.to_string()))
    }

    /// Per-report noise variance `M sigma_e^2 + (1 - M) sigma_s^2`.
    pub fn report_noise_variance(&self, effort_share: f64) -> f64 {
        effort_share * self.sigma_effort.powi(2) + (1.0 - effort_share) * self.sigma_shirk.powi(2)
    }

    pub fn with_density_mode(mut self, mode: DensityMode) -> Calibration {
        self.density_mode = mode;
        self
    }
}

/// Post-transition effort rate used to pin the reviewer cost scale.
pub const BASELINE_M1: f64 = 0.125;

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn baseline_is_valid_and_pins_c0() {
        let cal = Calibration::baseline();
        match cal.review_cost {
            ReviewerCost::Linear { c0 } => assert_eq!(c0, 1.36),
            _ => unreachable!(),
        }
        assert!(cal.clone().validate().is_ok());
        match cal.calibrate_reviewer_cost(BASELINE_M1).unwrap().review_cost {
            ReviewerCost::Linear { c0 } => assert_relative_eq!(c0, 1.36, epsilon = 1e-12),
            _ => unreachable!(),
        }
    }

    #[test]
    fn equal_noise_violates_assumption_3() {
        let mut cal = Calibration::baseline();
        cal.sigma_shirk = 0.3;
        match cal.validate() {
            Err(ModelError::AssumptionViolation(v)) => {
                assert_eq!(v.len(), 1);
                assert_eq!(v[0].assumption, "Assumption 3");
            }
            other => panic!("expected violation, got {other:?}"),
        }
    }

    #[test]
    fn positive_review_baseline_is_rejected() {
        let mut cal = Calibration::baseline();
        cal.review_baseline = 0.08;
        let Err(ModelError::AssumptionViolation(v)) = cal.validate() else {
            panic!("expected violation")
        };
        assert!(v.iter().any(|x| x.assumption == "Assumption 2(iii)" && x.detail.contains("R < 0")));
    }

    #[test]
    fn reports_every_violation() {
        let mut cal = Calibration::baseline();
        cal.sigma_shirk = 0.1;
        cal.review_baseline = 0.1;
        cal.base_accept_rate = 1.5;
        cal.detection_cost = DetectionCost::QuadraticBarrier { d0: 0.0 };
        let Err(ModelError::AssumptionViolation(v)) = cal.validate() else {
            panic!("expected violation")
        };
        assert!(v.len() >= 4, "{v:?}");
    }

    #[test]
    fn calibrating_to_unit_effort_is_infeasible() {
        let cal = Calibration::baseline();
        assert!(matches!(cal.clone().calibrate_reviewer_cost(1.0), Err(ModelError::Infeasible(_))));
        assert!(matches!(cal.calibrate_reviewer_cost(0.0), Err(ModelError::Infeasible(_))));
    }

    #[test]
    fn near_unit_target_sits_on_the_feasibility_edge() {
        let cal = Calibration::baseline().calibrate_reviewer_cost(1.0 - 1e-9).unwrap();
        let c_top = cal.review_cost.eval(0.0);
        let surplus = cal.review_baseline + cal.appearance_reward;
        assert!(c_top > surplus && c_top - surplus < 1e-9);
    }

    #[test]
    fn detection_cost_is_convex_with_flat_origin() {
        let d = DetectionCost::default();
        assert_eq!(d.eval(0.0), 0.0);
        assert_eq!(d.derivative(0.0), 0.0);
        let h = 1e-3;
        for i in 0..10 {
            let p = 0.05 + 0.09 * i as f64;
            let second = (d.eval(p + h) - 2.0 * d.eval(p) + d.eval(p - h)) / (h * h);
            assert!(second > 0.0);
            assert_relative_eq!(second, d.second_derivative(p), max_relative = 1e-3);
        }
        assert!(d.derivative(0.999_999) > 1e4);
    }

    #[test]
    fn reviewer_cost_inverse_clamps() {
        let c = ReviewerCost::Linear { c0: 1.36 };
        assert_eq!(c.inverse(2.0), 0.0);
        assert_eq!(c.inverse(0.0), 1.0);
        assert_relative_eq!(c.inverse(0.17), 0.875, epsilon = 1e-12);
        let p = ReviewerCost::Power { c0: 1.36, exponent: 2.0 };
        assert_relative_eq!(p.eval(p.inverse(0.5)), 0.5, epsilon = 1e-10);
    }

    #[test]
    fn json_round_trip_and_unknown_keys() {
        let cal = Calibration::baseline();
        let back = Calibration::from_json(&cal.to_json_pretty()).unwrap();
        assert_eq!(back, cal);
        let mut v: serde_json::Value = serde_json::from_str(&cal.to_json_pretty()).unwrap();
        v["kapa"] = serde_json::json!(0.3);
        assert!(Calibration::from_json(&v.to_string()).is_err());
    }
}
