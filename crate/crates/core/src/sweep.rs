//! One-at-a-time comparative statics over the AI capability grid, and the
//! baseline summary record.

use std::io::Write;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::author::polish_at;
use crate::calibration::Calibration;
use crate::editor::{misalignment_at_transition, reform_panel, Misalignment};
use crate::error::{ModelError, Result};
use crate::format::fmt_sig;
use crate::reform::{premise_report, restoration_scan, solve_reform, solve_with_reservation};
use crate::reviewer::{effort_rate, gamma1, post_transition_effort, TRANSITION_OFFSET};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepParameter {
    R,
    V,
    #[serde(rename = "sigma_s")]
    SigmaS,
    N,
    #[serde(rename = "gamma")]
    Gamma,
}

impl SweepParameter {
    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::R => "R",
            SweepParameter::V => "V",
            SweepParameter::SigmaS => "sigma_s",
            SweepParameter::N => "N",
            SweepParameter::Gamma => "gamma",
        }
    }

    pub fn parse(s: &str) -> Result<SweepParameter> {
        Ok(match s {
            "R" => SweepParameter::R,
            "V" => SweepParameter::V,
            "sigma_s" => SweepParameter::SigmaS,
            "N" => SweepParameter::N,
            "gamma" => SweepParameter::Gamma,
            other => {
                return Err(ModelError::InvalidInput(format!(
                    "unknown sweep parameter {other:?}; expected R, V, sigma_s, N or gamma"
                )))
            }
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SweepOutput {
    #[serde(rename = "m")]
    EffortRate,
    #[serde(rename = "a_star")]
    Polish,
    #[serde(rename = "U_A")]
    AuthorWelfare,
    #[serde(rename = "K_star")]
    AcceptRate,
    #[serde(rename = "p_det_star")]
    Detection,
    #[serde(rename = "U_E_gain")]
    EditorGain,
    #[serde(rename = "lambda")]
    ShadowPrice,
}

impl SweepOutput {
    pub const ALL: [SweepOutput; 7] = [
        SweepOutput::EffortRate,
        SweepOutput::Polish,
        SweepOutput::AuthorWelfare,
        SweepOutput::AcceptRate,
        SweepOutput::Detection,
        SweepOutput::EditorGain,
        SweepOutput::ShadowPrice,
    ];

    fn header(self) -> &'static str {
        match self {
            SweepOutput::EffortRate => "m [share]",
            SweepOutput::Polish => "a_star [polish]",
            SweepOutput::AuthorWelfare => "U_A [utility]",
            SweepOutput::AcceptRate => "K_star [share]",
            SweepOutput::Detection => "p_det_star [probability]",
            SweepOutput::EditorGain => "U_E_gain [utility]",
            SweepOutput::ShadowPrice => "lambda [U_E per U_A]",
        }
    }

    fn needs_reform(self) -> bool {
        matches!(
            self,
            SweepOutput::AcceptRate | SweepOutput::Detection | SweepOutput::EditorGain | SweepOutput::ShadowPrice
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
    /// Capability levels evaluated for each value. Ignored for a `gamma`
    /// sweep, whose values are the capability levels.
    pub gamma_grid: Vec<f64>,
    pub outputs: Vec<SweepOutput>,
}

/// `0, 0.02, ..., 0.98`.
pub fn default_gamma_grid() -> Vec<f64> {
    (0..50).map(|i| i as f64 * 0.02).collect()
}

impl SweepSpec {
    /// The sweep values used in the comparative-statics figures.
    pub fn standard(parameter: SweepParameter, cal: &Calibration) -> SweepSpec {
        let post = gamma1(cal, 0.0) + TRANSITION_OFFSET;
        let (values, gamma_grid, outputs) = match parameter {
            SweepParameter::R => (vec![-0.04, -0.08, -0.15, -0.22], default_gamma_grid(), SweepOutput::ALL.to_vec()),
            SweepParameter::V => (vec![0.6, 1.0, 1.8, 2.4], default_gamma_grid(), SweepOutput::ALL.to_vec()),
            SweepParameter::SigmaS => (vec![0.33, 0.45, 0.60, 0.75], default_gamma_grid(), SweepOutput::ALL.to_vec()),
            SweepParameter::N => (
                (1..=20).map(f64::from).collect(),
                vec![post],
                vec![SweepOutput::EffortRate, SweepOutput::Polish, SweepOutput::AuthorWelfare],
            ),
            SweepParameter::Gamma => (default_gamma_grid(), vec![], SweepOutput::ALL.to_vec()),
        };
        SweepSpec { parameter, values, gamma_grid, outputs }
    }

    pub fn check(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(ModelError::InvalidInput("sweep needs at least one value".into()));
        }
        let up = self.values.windows(2).all(|w| w[1] > w[0]);
        let down = self.values.windows(2).all(|w| w[1] < w[0]);
        if !(up || down) {
            return Err(ModelError::InvalidInput("sweep values must be strictly monotone".into()));
        }
        if self.parameter == SweepParameter::N
            && self.values.iter().any(|&v| v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64)
        {
            return Err(ModelError::InvalidInput("panel sizes must be positive integers".into()));
        }
        let gammas = if self.parameter == SweepParameter::Gamma { &self.values } else { &self.gamma_grid };
        if gammas.is_empty() || gammas.iter().any(|g| !(0.0..=1.0).contains(g)) {
            return Err(ModelError::InvalidInput("capability grid must be nonempty and lie in [0, 1]".into()));
        }
        if self.outputs.is_empty() {
            return Err(ModelError::InvalidInput("sweep needs at least one output".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SweepRow {
    pub value: f64,
    pub gamma: f64,
    pub gamma1: f64,
    pub valid: bool,
    pub error: Option<String>,
    pub m: Option<f64>,
    pub a_star: Option<f64>,
    #[serde(rename = "U_A")]
    pub u_a: Option<f64>,
    #[serde(rename = "K_star")]
    pub k_star: Option<f64>,
    pub p_det_star: Option<f64>,
    #[serde(rename = "U_E_gain")]
    pub u_e_gain: Option<f64>,
    pub lambda: Option<f64>,
    /// Constraint slack `U_A* - U_A_bar`; kept for invariant checks.
    #[serde(skip)]
    pub slack: Option<f64>,
}

impl SweepRow {
    fn get(&self, out: SweepOutput) -> Option<f64> {
        match out {
            SweepOutput::EffortRate => self.m,
            SweepOutput::Polish => self.a_star,
            SweepOutput::AuthorWelfare => self.u_a,
            SweepOutput::AcceptRate => self.k_star,
            SweepOutput::Detection => self.p_det_star,
            SweepOutput::EditorGain => self.u_e_gain,
            SweepOutput::ShadowPrice => self.lambda,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepTable {
    pub parameter: SweepParameter,
    pub outputs: Vec<SweepOutput>,
    pub rows: Vec<SweepRow>,
}

fn swept(cal: &Calibration, parameter: SweepParameter, value: f64) -> Calibration {
    let mut c = cal.clone();
    match parameter {
        SweepParameter::R => c.review_baseline = value,
        SweepParameter::V => c.publication_value = value,
        SweepParameter::SigmaS => c.sigma_shirk = value,
        SweepParameter::N => c.panel_size = value as u32,
        SweepParameter::Gamma => {}
    }
    c
}

fn compute_row(cal: &Calibration, spec: &SweepSpec, value: f64, gamma: f64) -> Result<SweepRow> {
    let mut row = SweepRow { value, gamma, ..SweepRow::default() };
    let cal = match swept(cal, spec.parameter, value).validate() {
        Ok(c) => c,
        Err(e) if e.is_assumption_violation() => {
            row.gamma1 = f64::NAN;
            row.error = Some(e.to_string());
            return Ok(row);
        }
        Err(e) => return Err(e),
    };
    row.valid = true;
    row.gamma1 = gamma1(&cal, 0.0);
    let m = effort_rate(&cal, gamma);
    let k0 = cal.base_accept_rate;
    let wants = |o: SweepOutput| spec.outputs.contains(&o);
    if wants(SweepOutput::EffortRate) {
        row.m = Some(m);
    }
    if wants(SweepOutput::Polish) || wants(SweepOutput::AuthorWelfare) {
        let eq = polish_at(&cal, m, k0, 0.0, cal.panel_size as f64)?;
        row.a_star = wants(SweepOutput::Polish).then_some(eq.polish);
        row.u_a = wants(SweepOutput::AuthorWelfare).then_some(eq.welfare);
    }
    if spec.outputs.iter().any(|o| o.needs_reform()) {
        let sol = if spec.parameter == SweepParameter::N {
            let reservation = polish_at(&cal, m, k0, 0.0, value)?.welfare;
            solve_with_reservation(&cal, m, cal.panel_size, reservation)?
        } else {
            solve_reform(&cal, gamma)?
        };
        row.k_star = wants(SweepOutput::AcceptRate).then_some(sol.accept_rate);
        row.p_det_star = wants(SweepOutput::Detection).then_some(sol.p_det);
        row.u_e_gain = wants(SweepOutput::EditorGain).then_some(sol.welfare_gain());
        row.lambda = wants(SweepOutput::ShadowPrice).then_some(sol.lambda);
        row.slack = Some(sol.author_welfare - sol.reservation);
    }
    Ok(row)
}

/// Evaluates every `(value, gamma)` pair. Rows whose calibration breaks an
/// assumption are kept and marked invalid.
pub fn run_sweep(cal: &Calibration, spec: &SweepSpec) -> Result<SweepTable> {
    spec.check()?;
    let mut outputs = spec.outputs.clone();
    outputs.sort();
    outputs.dedup();
    let spec = SweepSpec { outputs, ..spec.clone() };
    let cells: Vec<(f64, f64)> = if spec.parameter == SweepParameter::Gamma {
        spec.values.iter().map(|&g| (g, g)).collect()
    } else {
        spec.values
            .iter()
            .flat_map(|&v| spec.gamma_grid.iter().map(move |&g| (v, g)))
            .collect()
    };
    let rows = cells
        .par_iter()
        .map(|&(v, g)| compute_row(cal, &spec, v, g))
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepTable { parameter: spec.parameter, outputs: spec.outputs, rows })
}

impl SweepTable {
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec![self.parameter.name().to_string(), "gamma".into(), "gamma1".into()];
        header.extend(self.outputs.iter().map(|o| o.header().to_string()));
        header.extend(["valid".to_string(), "error".to_string()]);
        out.write_record(&header)?;
        for row in &self.rows {
            let mut rec = vec![fmt_sig(row.value), fmt_sig(row.gamma), fmt_sig(row.gamma1)];
            rec.extend(self.outputs.iter().map(|&o| row.get(o).map(fmt_sig).unwrap_or_default()));
            rec.push(row.valid.to_string());
            rec.push(row.error.clone().unwrap_or_default());
            out.write_record(&rec)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> Result<String> {
        let mut buf = Vec::new();
        self.write_csv(&mut buf)?;
        Ok(String::from_utf8(buf).expect("csv output is utf-8"))
    }

    /// Checks per-row invariants on `count` rows drawn with `seed`. Returns
    /// one message per violation.
    pub fn spot_check(&self, count: usize, seed: u64) -> Vec<String> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let picks = sample(&mut rng, self.rows.len(), count.min(self.rows.len()));
        let mut problems = Vec::new();
        for i in picks.iter() {
            let r = &self.rows[i];
            if !r.valid {
                continue;
            }
            let mut bad = |ok: bool, what: &str| {
                if !ok {
                    problems.push(format!("row {i} (value {}, gamma {}): {what}", r.value, r.gamma));
                }
            };
            if let Some(m) = r.m {
                bad((0.0..=1.0).contains(&m), "effort rate outside [0, 1]");
            }
            if let Some(a) = r.a_star {
                bad(a >= 0.0, "negative polish");
            }
            if let Some(k) = r.k_star {
                bad(k > 0.0 && k < 1.0, "acceptance rate outside (0, 1)");
            }
            if let Some(p) = r.p_det_star {
                bad((0.0..1.0).contains(&p), "detection outside [0, 1)");
            }
            if let Some(s) = r.slack {
                bad(s >= -1e-9, "author constraint violated");
            }
            if let Some(l) = r.lambda {
                bad(l.is_nan() || l >= 0.0, "negative shadow price");
            }
            if let Some(g) = r.u_e_gain {
                bad(g >= -1e-12, "reform worse than the decentralized policy");
            }
        }
        problems
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReformPoint {
    pub gamma: f64,
    #[serde(rename = "K_star")]
    pub accept_rate: f64,
    pub p_det_star: f64,
    #[serde(rename = "U_E_gain")]
    pub gain: f64,
    pub binding: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BaselineReport {
    pub gamma1: f64,
    pub m1: f64,
    #[serde(rename = "N0_star")]
    pub reform_panel: u32,
    pub m_bar: f64,
    pub rho_bar: f64,
    pub rho_bar_at: f64,
    pub rho_bar_gaussian: f64,
    pub psi_1: f64,
    pub premises_hold: bool,
    pub pre: ReformPoint,
    pub post: ReformPoint,
    pub misalignment: Misalignment,
    pub restoration_gap: f64,
}

/// Capability offsets of the pre and post reference points from the
/// transition.
pub const PRE_OFFSET: f64 = 0.12;
pub const POST_OFFSET: f64 = 0.08;

pub fn baseline_report(cal: &Calibration) -> Result<BaselineReport> {
    let g1 = gamma1(cal, 0.0);
    let point = |gamma: f64| -> Result<ReformPoint> {
        let s = solve_reform(cal, gamma)?;
        Ok(ReformPoint {
            gamma,
            accept_rate: s.accept_rate,
            p_det_star: s.p_det,
            gain: s.welfare_gain(),
            binding: s.binding,
        })
    };
    let premises = premise_report(cal)?;
    Ok(BaselineReport {
        gamma1: g1,
        m1: post_transition_effort(cal),
        reform_panel: reform_panel(cal)?,
        m_bar: premises.m_bar,
        rho_bar: premises.rho_bar,
        rho_bar_at: premises.rho_bar_at,
        rho_bar_gaussian: premises.rho_bar_gaussian,
        psi_1: premises.psi_1,
        premises_hold: premises.all_hold(),
        pre: point((g1 - PRE_OFFSET).max(0.0))?,
        post: point((g1 + POST_OFFSET).min(1.0))?,
        misalignment: misalignment_at_transition(cal)?,
        restoration_gap: restoration_scan(cal, cal.solver.n_max)?.gap,
    })
}
