//! Aggregate-signal moments after detection, and the density of the
//! polish-free aggregate at the acceptance threshold.

use serde::Serialize;

use crate::calibration::{Calibration, DensityMode};
use crate::dist::DistributionSpec;
use crate::error::{ModelError, Result};
use crate::numerics::{
    integrate, norm_cdf, norm_cdf_integral, norm_inv_cdf, norm_pdf, BISECTION_MAX_ITER,
};

const RETENTION_FLOOR: f64 = 1e-12;

/// Share of effortful reports among those that survive detection.
pub fn effective_effort(m: f64, p_det: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&m) || !(0.0..=1.0).contains(&p_det) {
        return Err(ModelError::InvalidInput(format!(
            "effort rate and detection must lie in [0, 1], got m = {m}, p_det = {p_det}"
        )));
    }
    let denom = m + (1.0 - m) * (1.0 - p_det);
    if denom < RETENTION_FLOOR {
        return Err(ModelError::DegenerateRetention { m, p_det });
    }
    Ok(m / denom)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RetainedSignalModel {
    /// Effective effort share `M`; also the multiplier on `theta + beta a`.
    pub effort_share: f64,
    /// Expected number of retained reports (real-valued).
    pub retained: f64,
    /// Per-report noise variance `Sigma^2(M)`.
    pub report_variance: f64,
    /// Standard deviation of the averaged noise, `sqrt(Sigma^2 / N_ret)`.
    pub noise_sd: f64,
}

/// Retained-signal model for a panel of `panel` invited reviewers.
pub fn retained_model(
    cal: &Calibration,
    m: f64,
    p_det: f64,
    panel: f64,
) -> Result<RetainedSignalModel> {
    let effort_share = effective_effort(m, p_det)?;
    let retained = panel * (m + (1.0 - m) * (1.0 - p_det));
    let report_variance = cal.report_noise_variance(effort_share);
    Ok(RetainedSignalModel {
        effort_share,
        retained,
        report_variance,
        noise_sd: (report_variance / retained).sqrt(),
    })
}

impl RetainedSignalModel {
    /// Signal-to-noise ratio `M^2 N_ret Var(theta) / Sigma^2(M)`.
    pub fn snr(&self, quality_variance: f64) -> f64 {
        self.effort_share.powi(2) * self.retained * quality_variance / self.report_variance
    }
}

/// Location, height and slope of the polish-free aggregate density at the
/// `1 - K` quantile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ThresholdDensity {
    pub z: f64,
    pub h: f64,
    pub h_prime: f64,
}

/// The polish-free aggregate `M theta + nu`, `nu ~ N(0, noise_sd^2)`.
#[derive(Debug, Clone, Copy)]
pub struct PolishFreeAggregate<'a> {
    pub quality: &'a DistributionSpec,
    pub scale: f64,
    pub noise_sd: f64,
}

const QUAD_PANELS: usize = 64;
// Below this support-to-noise ratio the convolution is numerically a Gaussian.
const DEGENERATE_SUPPORT: f64 = 1e-7;

impl<'a> PolishFreeAggregate<'a> {
    pub fn new(quality: &'a DistributionSpec, model: &RetainedSignalModel) -> Self {
        Self {
            quality,
            scale: model.effort_share,
            noise_sd: model.noise_sd,
        }
    }

    pub fn mean(&self) -> f64 {
        self.scale * self.quality.mean()
    }

    pub fn variance(&self) -> f64 {
        self.scale.powi(2) * self.quality.variance() + self.noise_sd.powi(2)
    }

    fn degenerate(&self) -> bool {
        self.scale * self.quality.width() < DEGENERATE_SUPPORT * self.noise_sd
    }

    fn gaussian_z(&self, s: f64) -> f64 {
        (s - self.mean()) / self.variance().sqrt()
    }

    pub fn cdf(&self, s: f64) -> f64 {
        if self.degenerate() {
            return norm_cdf(self.gaussian_z(s));
        }
        let (lo, hi) = self.quality.support();
        let (m, sd) = (self.scale, self.noise_sd);
        match self.quality {
            DistributionSpec::Uniform { .. } => {
                let w = m * (hi - lo);
                sd / w * (norm_cdf_integral((s - m * lo) / sd) - norm_cdf_integral((s - m * hi) / sd))
            }
            q => integrate(|t| q.pdf(t) * norm_cdf((s - m * t) / sd), lo, hi, QUAD_PANELS),
        }
    }

    pub fn pdf(&self, s: f64) -> f64 {
        if self.degenerate() {
            return norm_pdf(self.gaussian_z(s)) / self.variance().sqrt();
        }
        let (lo, hi) = self.quality.support();
        let (m, sd) = (self.scale, self.noise_sd);
        match self.quality {
            DistributionSpec::Uniform { .. } => {
                (norm_cdf((s - m * lo) / sd) - norm_cdf((s - m * hi) / sd)) / (m * (hi - lo))
            }
            q => integrate(|t| q.pdf(t) * norm_pdf((s - m * t) / sd) / sd, lo, hi, QUAD_PANELS),
        }
    }

    /// Spatial derivative of [`Self::pdf`].
    pub fn pdf_prime(&self, s: f64) -> f64 {
        if self.degenerate() {
            let v = self.variance();
            let x = self.gaussian_z(s);
            return -x * norm_pdf(x) / v;
        }
        let (lo, hi) = self.quality.support();
        let (m, sd) = (self.scale, self.noise_sd);
        match self.quality {
            DistributionSpec::Uniform { .. } => {
                (norm_pdf((s - m * lo) / sd) - norm_pdf((s - m * hi) / sd)) / (sd * m * (hi - lo))
            }
            q => integrate(
                |t| {
                    let x = (s - m * t) / sd;
                    -q.pdf(t) * x * norm_pdf(x) / (sd * sd)
                },
                lo,
                hi,
                QUAD_PANELS,
            ),
        }
    }

    /// `1 - K` quantile by bisection.
    pub fn upper_quantile(&self, accept_rate: f64) -> Result<f64> {
        quantile_by_bisection(|s| self.cdf(s), self.mean(), self.variance().sqrt(), 1.0 - accept_rate)
    }
}

pub const QUANTILE_TOL: f64 = 1e-10;

/// Solves `cdf(s) = target` by bisection on a bracket of +-12 standard
/// deviations around `center`.
pub fn quantile_by_bisection<F>(cdf: F, center: f64, sd: f64, target: f64) -> Result<f64>
where
    F: Fn(f64) -> f64,
{
    let (mut lo, mut hi) = (center - 12.0 * sd, center + 12.0 * sd);
    for _ in 0..BISECTION_MAX_ITER {
        let mid = 0.5 * (lo + hi);
        if hi - lo <= QUANTILE_TOL {
            return Ok(mid);
        }
        if cdf(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Err(ModelError::QuantileNonconvergence {
        iterations: BISECTION_MAX_ITER,
    })
}

fn check_accept_rate(k: f64) -> Result<()> {
    if k > 0.0 && k < 1.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidInput(format!("acceptance rate must lie in (0, 1), got {k}")))
    }
}

pub fn threshold_and_density(
    cal: &Calibration,
    model: &RetainedSignalModel,
    accept_rate: f64,
) -> Result<ThresholdDensity> {
    threshold_and_density_in(cal.density_mode, cal, model, accept_rate)
}

/// Threshold density evaluated on an explicit path, regardless of the
/// calibration's configured mode.
pub fn threshold_and_density_in(
    mode: DensityMode,
    cal: &Calibration,
    model: &RetainedSignalModel,
    accept_rate: f64,
) -> Result<ThresholdDensity> {
    check_accept_rate(accept_rate)?;
    let agg = PolishFreeAggregate::new(&cal.quality, model);
    match mode {
        DensityMode::GaussianApprox => {
            let sd = agg.variance().sqrt();
            let x = norm_inv_cdf(1.0 - accept_rate);
            let h = norm_pdf(x) / sd;
            Ok(ThresholdDensity {
                z: agg.mean() + x * sd,
                h,
                h_prime: -x / sd * h,
            })
        }
        DensityMode::ExactConvolution => {
            let z = agg.upper_quantile(accept_rate)?;
            Ok(ThresholdDensity {
                z,
                h: agg.pdf(z),
                h_prime: agg.pdf_prime(z),
            })
        }
    }
}
