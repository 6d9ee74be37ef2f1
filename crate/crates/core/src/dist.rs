//! Bounded, log-concave distribution families used for paper quality and
//! reviewer conscientiousness.

use rand::Rng;
use rand_distr::{Beta as BetaSampler, Distribution};
use serde::{Deserialize, Serialize};
use statrs::function::beta::beta_reg;
use statrs::function::gamma::ln_gamma;

use crate::error::Violation;
use crate::numerics::{norm_cdf, norm_inv_cdf, norm_pdf};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case", deny_unknown_fields)]
pub enum DistributionSpec {
    Uniform {
        lo: f64,
        hi: f64,
    },
    /// Normal(mean, sd) truncated to `[lo, hi]`.
    TruncatedNormal {
        mean: f64,
        sd: f64,
        lo: f64,
        hi: f64,
    },
    /// Beta(alpha, beta) rescaled to `[lo, hi]`; both shapes must be >= 1.
    Beta {
        alpha: f64,
        beta: f64,
        lo: f64,
        hi: f64,
    },
}

impl Default for DistributionSpec {
    fn default() -> Self {
        DistributionSpec::unit_uniform()
    }
}

impl DistributionSpec {
    pub fn unit_uniform() -> Self {
        DistributionSpec::Uniform { lo: 0.0, hi: 1.0 }
    }

    pub fn support(&self) -> (f64, f64) {
        match *self {
            DistributionSpec::Uniform { lo, hi }
            | DistributionSpec::TruncatedNormal { lo, hi, .. }
            | DistributionSpec::Beta { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn width(&self) -> f64 {
        let (lo, hi) = self.support();
        hi - lo
    }

    pub fn is_uniform(&self) -> bool {
        matches!(self, DistributionSpec::Uniform { .. })
    }

    /// Collects every parameter problem; `label` names the distribution in
    /// the messages.
    pub(crate) fn check(&self, assumption: &'static str, label: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let (lo, hi) = self.support();
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            out.push(Violation::new(
                assumption,
                format!("{label} support must be a bounded interval lo < hi, got [{lo}, {hi}]"),
            ));
        }
        match *self {
            DistributionSpec::Uniform { .. } => {}
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                if !(sd > 0.0 && sd.is_finite() && mean.is_finite()) {
                    out.push(Violation::new(
                        assumption,
                        format!("{label} truncated normal needs finite mean and sd > 0"),
                    ));
                }
            }
            DistributionSpec::Beta { alpha, beta, .. } => {
                if !(alpha >= 1.0 && beta >= 1.0) {
                    out.push(Violation::new(
                        assumption,
                        format!(
                            "{label} beta shapes must be >= 1 for a log-concave density, got ({alpha}, {beta})"
                        ),
                    ));
                }
            }
        }
        out
    }

    fn truncation(mean: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64, f64) {
        let a = (lo - mean) / sd;
        let b = (hi - mean) / sd;
        (a, b, norm_cdf(b) - norm_cdf(a))
    }

    pub fn pdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x < lo || x > hi {
            return 0.0;
        }
        match *self {
            DistributionSpec::Uniform { .. } => 1.0 / (hi - lo),
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                let (_, _, z) = Self::truncation(mean, sd, lo, hi);
                norm_pdf((x - mean) / sd) / (sd * z)
            }
            DistributionSpec::Beta { alpha, beta, .. } => {
                let w = hi - lo;
                let u = (x - lo) / w;
                let ln_b = ln_gamma(alpha) + ln_gamma(beta) - ln_gamma(alpha + beta);
                if (u == 0.0 && alpha > 1.0) || (u == 1.0 && beta > 1.0) {
                    return 0.0;
                }
                ((alpha - 1.0) * u.ln() + (beta - 1.0) * (1.0 - u).ln() - ln_b).exp() / w
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        let (lo, hi) = self.support();
        if x <= lo {
            return 0.0;
        }
        if x >= hi {
            return 1.0;
        }
        match *self {
            DistributionSpec::Uniform { .. } => (x - lo) / (hi - lo),
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                let (a, _, z) = Self::truncation(mean, sd, lo, hi);
                (norm_cdf((x - mean) / sd) - norm_cdf(a)) / z
            }
            DistributionSpec::Beta { alpha, beta, .. } => beta_reg(alpha, beta, (x - lo) / (hi - lo)),
        }
    }

    pub fn mean(&self) -> f64 {
        let (lo, hi) = self.support();
        match *self {
            DistributionSpec::Uniform { .. } => 0.5 * (lo + hi),
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                let (a, b, z) = Self::truncation(mean, sd, lo, hi);
                mean + sd * (norm_pdf(a) - norm_pdf(b)) / z
            }
            DistributionSpec::Beta { alpha, beta, .. } => lo + (hi - lo) * alpha / (alpha + beta),
        }
    }

    pub fn variance(&self) -> f64 {
        let (lo, hi) = self.support();
        match *self {
            DistributionSpec::Uniform { .. } => (hi - lo).powi(2) / 12.0,
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                let (a, b, z) = Self::truncation(mean, sd, lo, hi);
                let r = (norm_pdf(a) - norm_pdf(b)) / z;
                sd * sd * (1.0 + (a * norm_pdf(a) - b * norm_pdf(b)) / z - r * r)
            }
            DistributionSpec::Beta { alpha, beta, .. } => {
                let s = alpha + beta;
                (hi - lo).powi(2) * alpha * beta / (s * s * (s + 1.0))
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let (lo, hi) = self.support();
        let u: f64 = rng.random();
        match *self {
            DistributionSpec::Uniform { .. } => lo + (hi - lo) * u,
            DistributionSpec::TruncatedNormal { mean, sd, .. } => {
                let (a, _, z) = Self::truncation(mean, sd, lo, hi);
                let x = mean + sd * norm_inv_cdf((norm_cdf(a) + u * z).clamp(0.0, 1.0));
                x.clamp(lo, hi)
            }
            DistributionSpec::Beta { alpha, beta, .. } => {
                let b = BetaSampler::new(alpha, beta).expect("validated beta shapes");
                lo + (hi - lo) * b.sample(rng)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::integrate;
    use approx::assert_relative_eq;

    fn families() -> Vec<DistributionSpec> {
        vec![
            DistributionSpec::unit_uniform(),
            DistributionSpec::TruncatedNormal { mean: 0.4, sd: 0.3, lo: 0.0, hi: 1.0 },
            DistributionSpec::Beta { alpha: 2.0, beta: 3.5, lo: 0.0, hi: 1.0 },
        ]
    }

    #[test]
    fn moments_match_quadrature() {
        for d in families() {
            let (lo, hi) = d.support();
            let mass = integrate(|x| d.pdf(x), lo, hi, 64);
            let mean = integrate(|x| x * d.pdf(x), lo, hi, 64);
            let var = integrate(|x| (x - mean).powi(2) * d.pdf(x), lo, hi, 64);
            assert_relative_eq!(mass, 1.0, epsilon = 1e-10);
            assert_relative_eq!(mean, d.mean(), epsilon = 1e-10);
            assert_relative_eq!(var, d.variance(), epsilon = 1e-10);
            assert_relative_eq!(d.cdf(0.37), integrate(|x| d.pdf(x), lo, 0.37, 64), epsilon = 1e-10);
        }
    }

    #[test]
    fn rejects_non_log_concave_beta() {
        let d = DistributionSpec::Beta { alpha: 0.5, beta: 2.0, lo: 0.0, hi: 1.0 };
        assert_eq!(d.check("A1", "F").len(), 1);
        let d = DistributionSpec::Uniform { lo: 1.0, hi: 1.0 };
        assert_eq!(d.check("A1", "F").len(), 1);
    }

    #[test]
    fn serde_uses_family_tag() {
        let d: DistributionSpec =
            serde_json::from_str(r#"{"family":"uniform","lo":0,"hi":1}"#).unwrap();
        assert_eq!(d, DistributionSpec::unit_uniform());
        let bad = serde_json::from_str::<DistributionSpec>(
            r#"{"family":"uniform","lo":0,"hi":1,"typo":3}"#,
        );
        assert!(bad.is_err());
    }
}
