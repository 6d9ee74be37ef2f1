//! Agent-level Monte Carlo of the review pipeline.
//!
//! Each paper draws its own ChaCha stream from `(seed, replicate, paper)`,
//! so results do not depend on the thread count. Quality and the two noise
//! normals are drawn first, which gives deterministic and stochastic
//! composition runs common random numbers.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::author::polish_at;
use crate::calibration::{Calibration, DensityMode};
use crate::error::{ModelError, Result};
use crate::policy::Policy;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub papers: usize,
    pub seed: u64,
    /// Draw each paper's effortful and retained report counts instead of
    /// using their expected values.
    pub stochastic_composition: bool,
    pub replicates: usize,
    /// Unilateral polish deviations at which acceptance is probed.
    pub probes: Vec<f64>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            papers: 100_000,
            seed: 0,
            stochastic_composition: false,
            replicates: 20,
            probes: Vec::new(),
        }
    }
}

/// Mean across replicates with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub replicates: usize,
}

impl Estimate {
    pub fn from_samples(xs: &[f64]) -> Estimate {
        let n = xs.len();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let se = if n > 1 {
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            (var / n as f64).sqrt()
        } else {
            f64::NAN
        };
        Estimate { mean, se, replicates: n }
    }

    /// Two-sided Student-t interval with `replicates - 1` degrees of freedom.
    pub fn interval(&self, level: f64) -> (f64, f64) {
        let df = (self.replicates.max(2) - 1) as f64;
        let t = StudentsT::new(0.0, 1.0, df)
            .expect("positive degrees of freedom")
            .inverse_cdf(0.5 + level / 2.0);
        (self.mean - t * self.se, self.mean + t * self.se)
    }

    pub fn covers(&self, x: f64, level: f64) -> bool {
        let (lo, hi) = self.interval(level);
        lo <= x && x <= hi
    }

    /// `|mean - x| / se`.
    pub fn z_score(&self, x: f64) -> f64 {
        (self.mean - x).abs() / self.se
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ProbeEstimate {
    pub deviation: f64,
    pub accept_rate: Estimate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimResult {
    #[serde(rename = "Q_hat")]
    pub quality: Estimate,
    /// Acceptance frequency of the tagged cohort (every tenth paper).
    pub cohort_accept_rate: Estimate,
    /// Acceptance frequency of a paper that unilaterally adds `deviation`
    /// to the common polish, holding the threshold fixed.
    pub accept_rate_by_polish: Vec<ProbeEstimate>,
    #[serde(rename = "U_A_hat")]
    pub author_welfare: Estimate,
    /// Mean number of retained reports per paper.
    pub retained: Estimate,
    /// Share of papers left with no retained report.
    pub zero_retained_share: Estimate,
}

const COHORT_STRIDE: usize = 10;

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

fn paper_rng(seed: u64, replicate: usize, paper: usize) -> ChaCha8Rng {
    let s = splitmix64(seed ^ splitmix64((replicate as u64) ^ splitmix64(paper as u64 ^ 0xA5A5_A5A5)));
    ChaCha8Rng::seed_from_u64(s)
}

struct Paper {
    quality: f64,
    score: f64,
    /// Weight of polish in the score, `k_e / N_ret`.
    polish_weight: f64,
    retained: f64,
}

fn draw_paper(cal: &Calibration, policy: &Policy, m: f64, polish: f64, stochastic: bool, rng: &mut ChaCha8Rng) -> Paper {
    let quality = cal.quality.sample(rng);
    let z1: f64 = rng.sample(StandardNormal);
    let z2: f64 = rng.sample(StandardNormal);
    let n = policy.panel as f64;
    let (k_e, k_s) = if stochastic {
        let mut effort = 0u32;
        let mut kept_shirk = 0u32;
        for _ in 0..policy.panel {
            if rng.random::<f64>() < m {
                effort += 1;
            } else if rng.random::<f64>() >= policy.p_det {
                kept_shirk += 1;
            }
        }
        (effort as f64, kept_shirk as f64)
    } else {
        (m * n, (1.0 - m) * n * (1.0 - policy.p_det))
    };
    let retained = k_e + k_s;
    if retained == 0.0 {
        return Paper {
            quality,
            score: cal.sigma_shirk * z2,
            polish_weight: 0.0,
            retained,
        };
    }
    let signal = k_e * (quality + cal.polish_weight * polish)
        + k_e.sqrt() * cal.sigma_effort * z1
        + k_s.sqrt() * cal.sigma_shirk * z2;
    Paper {
        quality,
        score: signal / retained,
        polish_weight: k_e / retained,
        retained,
    }
}

struct Replicate {
    quality: f64,
    cohort: f64,
    probes: Vec<f64>,
    retained: f64,
    zero_retained: f64,
}

fn run_replicate(
    cal: &Calibration,
    policy: &Policy,
    m: f64,
    polish: f64,
    sim: &SimConfig,
    replicate: usize,
) -> Replicate {
    let papers: Vec<Paper> = (0..sim.papers)
        .map(|i| {
            let mut rng = paper_rng(sim.seed, replicate, i);
            draw_paper(cal, policy, m, polish, sim.stochastic_composition, &mut rng)
        })
        .collect();
    let n = papers.len();
    let accepted = ((policy.accept_rate * n as f64).round() as usize).clamp(1, n);
    let mut scores: Vec<f64> = papers.iter().map(|p| p.score).collect();
    let (_, tau, _) = scores.select_nth_unstable_by(n - accepted, |a, b| a.total_cmp(b));
    let tau = *tau;

    let (mut q_sum, mut q_count) = (0.0, 0usize);
    let (mut cohort_in, mut cohort_n) = (0usize, 0usize);
    for (i, p) in papers.iter().enumerate() {
        let ok = p.score >= tau;
        if ok {
            q_sum += p.quality;
            q_count += 1;
        }
        if i % COHORT_STRIDE == 0 {
            cohort_n += 1;
            cohort_in += ok as usize;
        }
    }
    let probes = sim
        .probes
        .iter()
        .map(|&d| {
            let shift = cal.polish_weight * d;
            papers.iter().filter(|p| p.score + p.polish_weight * shift >= tau).count() as f64 / n as f64
        })
        .collect();
    Replicate {
        quality: q_sum / q_count as f64,
        cohort: cohort_in as f64 / cohort_n as f64,
        probes,
        retained: papers.iter().map(|p| p.retained).sum::<f64>() / n as f64,
        zero_retained: papers.iter().filter(|p| p.retained == 0.0).count() as f64 / n as f64,
    }
}

fn check_inputs(policy: &Policy, m: f64, polish: f64, sim: &SimConfig) -> Result<()> {
    policy.check()?;
    if !(0.0..=1.0).contains(&m) || !(polish >= 0.0) {
        return Err(ModelError::InvalidInput(format!(
            "need m in [0, 1] and polish >= 0, got m = {m}, a = {polish}"
        )));
    }
    if sim.papers < 10 || sim.replicates < 2 {
        return Err(ModelError::InvalidInput(
            "simulation needs at least 10 papers and 2 replicates".into(),
        ));
    }
    Ok(())
}

/// Simulates `replicates` independent journals of `papers` submissions in
/// which every author polishes `polish`.
pub fn simulate(cal: &Calibration, policy: &Policy, m: f64, polish: f64, sim: &SimConfig) -> Result<SimResult> {
    check_inputs(policy, m, polish, sim)?;
    let reps: Vec<Replicate> = (0..sim.replicates)
        .into_par_iter()
        .map(|r| run_replicate(cal, policy, m, polish, sim, r))
        .collect();
    let est = |f: &dyn Fn(&Replicate) -> f64| Estimate::from_samples(&reps.iter().map(f).collect::<Vec<_>>());
    let dissipation = cal.polish_cost.eval(polish, cal.polish_cost_scale);
    Ok(SimResult {
        quality: est(&|r| r.quality),
        cohort_accept_rate: est(&|r| r.cohort),
        accept_rate_by_polish: sim
            .probes
            .iter()
            .enumerate()
            .map(|(j, &deviation)| ProbeEstimate {
                deviation,
                accept_rate: est(&|r| r.probes[j]),
            })
            .collect(),
        author_welfare: est(&|r| r.cohort * cal.publication_value - dissipation),
        retained: est(&|r| r.retained),
        zero_retained_share: est(&|r| r.zero_retained),
    })
}

/// Equilibrium polish on the exact-convolution path, which is the law the
/// simulator draws from.
pub fn simulated_equilibrium_polish(cal: &Calibration, policy: &Policy, m: f64) -> Result<f64> {
    let exact = cal.clone().with_density_mode(DensityMode::ExactConvolution);
    Ok(polish_at(&exact, m, policy.accept_rate, policy.p_det, policy.panel as f64)?.polish)
}

/// Tagged-cohort acceptance frequency when every author plays the
/// equilibrium polish.
pub fn acceptance_probability_check(cal: &Calibration, policy: &Policy, m: f64, sim: &SimConfig) -> Result<Estimate> {
    let a = simulated_equilibrium_polish(cal, policy, m)?;
    Ok(simulate(cal, policy, m, a, sim)?.cohort_accept_rate)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CompositionError {
    pub deterministic: Estimate,
    pub stochastic: Estimate,
    /// Paired difference, stochastic minus deterministic.
    pub difference: Estimate,
    /// `|Q_stochastic - Q_deterministic|`.
    pub error: f64,
}

/// Runs the same draws with expected and with random report composition.
pub fn composition_approximation_error(
    cal: &Calibration,
    policy: &Policy,
    m: f64,
    sim: &SimConfig,
) -> Result<CompositionError> {
    let a = simulated_equilibrium_polish(cal, policy, m)?;
    check_inputs(policy, m, a, sim)?;
    let pairs: Vec<(f64, f64)> = (0..sim.replicates)
        .into_par_iter()
        .map(|r| {
            let det = SimConfig { stochastic_composition: false, probes: vec![], ..sim.clone() };
            let sto = SimConfig { stochastic_composition: true, ..det.clone() };
            (
                run_replicate(cal, policy, m, a, &det, r).quality,
                run_replicate(cal, policy, m, a, &sto, r).quality,
            )
        })
        .collect();
    let det: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let sto: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    let diff: Vec<f64> = pairs.iter().map(|p| p.1 - p.0).collect();
    let deterministic = Estimate::from_samples(&det);
    let stochastic = Estimate::from_samples(&sto);
    Ok(CompositionError {
        deterministic,
        stochastic,
        difference: Estimate::from_samples(&diff),
        error: (stochastic.mean - deterministic.mean).abs(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FocCheck {
    pub polish: f64,
    /// `V` times the simulated slope of acceptance in own polish.
    pub marginal_gain: Estimate,
    /// `c_A'(a*)`.
    pub marginal_cost: f64,
    pub z_score: f64,
}

impl FocCheck {
    pub fn holds(&self, max_z: f64) -> bool {
        self.z_score <= max_z
    }
}

/// Polish deviation used for the simulated marginal acceptance gain.
pub const FOC_PROBE: f64 = 0.02;

pub fn foc_consistency(cal: &Calibration, policy: &Policy, m: f64, sim: &SimConfig) -> Result<FocCheck> {
    let a = simulated_equilibrium_polish(cal, policy, m)?;
    let probe = SimConfig { probes: vec![-FOC_PROBE, FOC_PROBE], ..sim.clone() };
    check_inputs(policy, m, a, &probe)?;
    let gains: Vec<f64> = (0..sim.replicates)
        .into_par_iter()
        .map(|r| {
            let rep = run_replicate(cal, policy, m, a, &probe, r);
            cal.publication_value * (rep.probes[1] - rep.probes[0]) / (2.0 * FOC_PROBE)
        })
        .collect();
    let marginal_gain = Estimate::from_samples(&gains);
    let marginal_cost = cal.polish_cost.marginal(a, cal.polish_cost_scale);
    Ok(FocCheck {
        polish: a,
        marginal_gain,
        marginal_cost,
        z_score: marginal_gain.z_score(marginal_cost),
    })
}

/// One row of the oracle suite.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleCheck {
    pub name: String,
    /// Analytic value the simulation is compared with.
    pub target: f64,
    pub estimate: f64,
    pub se: f64,
    pub pass: bool,
}

/// Quality, cohort acceptance, first-order-condition and composition checks
/// of the analytic pipeline against the simulator.
pub fn oracle_suite(cal: &Calibration, sim: &SimConfig) -> Result<Vec<OracleCheck>> {
    let mut out = Vec::new();
    for m in [1.0, 0.5, 0.125] {
        for (n, p, k) in [(2, 0.0, 0.3), (1, 0.0, 0.2), (5, 0.5, 0.4), (2, 0.9, 0.1)] {
            let policy = Policy::new(n, k, p)?;
            let model = crate::signal::retained_model(cal, m, p, n as f64)?;
            let q = crate::editor::sorting_quality_in(
                DensityMode::ExactConvolution,
                cal,
                model.effort_share,
                model.retained,
                k,
            )?;
            let det = SimConfig { stochastic_composition: false, ..sim.clone() };
            let e = simulate(cal, &policy, m, 0.0, &det)?.quality;
            out.push(OracleCheck {
                name: format!("Q m={m} N={n} p_det={p} K={k} (99% CI)"),
                target: q,
                estimate: e.mean,
                se: e.se,
                pass: e.covers(q, 0.99),
            });
        }
    }
    for (m, n, k, p) in [(1.0, 2, 0.3, 0.0), (0.125, 2, 0.3, 0.0), (0.5, 5, 0.2, 0.5), (0.125, 2, 0.1, 0.9)] {
        let e = acceptance_probability_check(cal, &Policy::new(n, k, p)?, m, sim)?;
        out.push(OracleCheck {
            name: format!("cohort acceptance m={m} N={n} p_det={p} K={k} (3 SE)"),
            target: k,
            estimate: e.mean,
            se: e.se,
            pass: e.z_score(k) <= 3.0,
        });
    }
    for m in [1.0, 0.125] {
        let f = foc_consistency(cal, &Policy::new(2, cal.base_accept_rate, 0.0)?, m, sim)?;
        out.push(OracleCheck {
            name: format!("polish first-order condition m={m} (3 SE)"),
            target: f.marginal_cost,
            estimate: f.marginal_gain.mean,
            se: f.marginal_gain.se,
            pass: f.holds(3.0),
        });
    }
    let c = composition_approximation_error(cal, &Policy::new(2, cal.base_accept_rate, 0.0)?, 0.125, sim)?;
    let half_lift = 0.5 * (c.deterministic.mean - cal.quality.mean());
    out.push(OracleCheck {
        name: "composition error m=0.125 N=2 (< 50% of sorting lift)".into(),
        target: half_lift,
        estimate: c.error,
        se: c.difference.se,
        pass: c.error < half_lift,
    });
    Ok(out)
}
