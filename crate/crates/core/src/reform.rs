//! The editor's constrained reform over acceptance rate and detection,
//! the premise checks behind the sign reversal, and the restoration scan.

use log::warn;
use rayon::prelude::*;
use serde::Serialize;

use crate::author::{polish_at, polish_sensitivities, welfare_slope_in_accept_rate};
use crate::calibration::{Calibration, DensityMode};
use crate::editor::{editor_value, reform_panel};
use crate::error::{ModelError, Result};
use crate::numerics::{derivative, golden_max};
use crate::policy::Policy;
use crate::reviewer::{effort_rate, gamma1, post_transition_effort, TRANSITION_OFFSET};
use crate::signal::{retained_model, threshold_and_density_in};

/// Slack allowed on the author participation constraint.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Shift in the reservation level used for the shadow price.
pub const SHADOW_PRICE_STEP: f64 = 1e-4;
/// The constraint is reported as binding within this distance.
pub const BINDING_TOL: f64 = 1e-8;
const REFINE_P_TOL: f64 = 1e-9;
const REFINE_K_TOL: f64 = 1e-13;

/// Author welfare at the decentralized policy `(N0*, K0, 0)` given the
/// effort rate implied by `gamma`.
pub fn author_reservation(cal: &Calibration, gamma: f64) -> Result<f64> {
    let panel = reform_panel(cal)?;
    reservation_at_effort(cal, effort_rate(cal, gamma), panel)
}

fn reservation_at_effort(cal: &Calibration, m: f64, panel: u32) -> Result<f64> {
    Ok(polish_at(cal, m, cal.base_accept_rate, 0.0, panel as f64)?.welfare)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GridMeta {
    pub k_min: f64,
    pub k_max: f64,
    pub k_steps: usize,
    pub p_max: f64,
    pub p_steps: usize,
    pub refined: bool,
}

impl GridMeta {
    fn of(cal: &Calibration) -> GridMeta {
        let s = &cal.solver;
        GridMeta {
            k_min: s.k_min,
            k_max: s.k_max,
            k_steps: s.k_steps,
            p_max: s.p_max,
            p_steps: s.p_steps,
            refined: s.refine,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReformSolution {
    pub gamma: f64,
    /// Reviewer effort rate at `gamma`.
    pub m: f64,
    #[serde(rename = "N")]
    pub panel: u32,
    #[serde(rename = "K_star")]
    pub accept_rate: f64,
    #[serde(rename = "p_det_star")]
    pub p_det: f64,
    /// Shadow price of the author constraint.
    pub lambda: f64,
    #[serde(rename = "Q_star")]
    pub quality: f64,
    #[serde(rename = "U_E_star")]
    pub editor_welfare: f64,
    #[serde(rename = "U_A_star")]
    pub author_welfare: f64,
    #[serde(rename = "U_A_bar")]
    pub reservation: f64,
    pub binding: bool,
    /// Editor welfare at the decentralized policy `(N0*, K0, 0)`.
    #[serde(rename = "U_E_decentralized")]
    pub decentralized_welfare: f64,
    /// Lagrangian slopes in `K` and `p_det` at the optimum. Diagnostic only.
    #[serde(rename = "foc_residual_K")]
    pub foc_residual_k: f64,
    pub foc_residual_p: f64,
    pub grid_meta: GridMeta,
}

impl ReformSolution {
    pub fn policy(&self) -> Policy {
        Policy {
            panel: self.panel,
            accept_rate: self.accept_rate,
            p_det: self.p_det,
        }
    }

    pub fn welfare_gain(&self) -> f64 {
        self.editor_welfare - self.decentralized_welfare
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    k: f64,
    p: f64,
    u_e: f64,
    u_a: f64,
}

struct Problem<'a> {
    cal: &'a Calibration,
    m: f64,
    panel: f64,
    reservation: f64,
}

impl Problem<'_> {
    fn eval(&self, k: f64, p: f64) -> Result<Point> {
        let (_, u_e) = editor_value(self.cal, self.m, k, p, self.panel)?;
        let u_a = polish_at(self.cal, self.m, k, p, self.panel)?.welfare;
        Ok(Point { k, p, u_e, u_a })
    }

    fn feasible(&self, pt: &Point) -> bool {
        pt.u_a >= self.reservation - FEASIBILITY_TOL
    }

    fn grid_best(&self, seed: Option<Point>) -> Result<Option<Point>> {
        let s = &self.cal.solver;
        let (ks, ps) = (s.k_grid(), s.p_grid());
        let rows: Vec<Vec<Point>> = ks
            .par_iter()
            .map(|&k| ps.iter().map(|&p| self.eval(k, p)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        let mut best = seed;
        for pt in rows.iter().flatten() {
            if self.feasible(pt) && best.is_none_or(|b| pt.u_e > b.u_e) {
                best = Some(*pt);
            }
        }
        Ok(best)
    }

    /// Smallest feasible `K` in `[lo, hi]`, assuming the feasible part of the
    /// bracket is an upper interval. Sorting quality falls in `K`, so this is
    /// the best `K` for a given `p`.
    fn lowest_feasible(&self, p: f64, lo: f64, hi: f64) -> Result<Option<Point>> {
        let at_lo = self.eval(lo, p)?;
        if self.feasible(&at_lo) {
            return Ok(Some(at_lo));
        }
        let mut feasible = self.eval(hi, p)?;
        if !self.feasible(&feasible) {
            return Ok(None);
        }
        let (mut a, mut b) = (lo, hi);
        while b - a > REFINE_K_TOL {
            let mid = 0.5 * (a + b);
            let pt = self.eval(mid, p)?;
            if self.feasible(&pt) {
                b = mid;
                feasible = pt;
            } else {
                a = mid;
            }
        }
        Ok(Some(feasible))
    }

    fn refine(&self, start: Point) -> Result<Point> {
        let s = &self.cal.solver;
        let (dk, dp) = (s.k_step(), s.p_step());
        let (k_lo, k_hi) = ((start.k - 2.0 * dk).max(s.k_min), (start.k + 2.0 * dk).min(s.k_max));
        let (p_lo, p_hi) = ((start.p - 2.0 * dp).max(0.0), (start.p + 2.0 * dp).min(s.p_max));
        let mut err = None;
        let mut best_at = |p: f64| match self.lowest_feasible(p, k_lo, k_hi) {
            Ok(pt) => pt,
            Err(e) => {
                err.get_or_insert(e);
                None
            }
        };
        let mut best = start;
        for p in [p_lo, p_hi] {
            if let Some(pt) = best_at(p) {
                if pt.u_e > best.u_e {
                    best = pt;
                }
            }
        }
        let (p_star, _) = golden_max(
            |p| best_at(p).map_or(f64::NEG_INFINITY, |pt| pt.u_e),
            p_lo,
            p_hi,
            REFINE_P_TOL,
        );
        if let Some(pt) = best_at(p_star) {
            if pt.u_e > best.u_e {
                best = pt;
            }
        }
        match err {
            Some(e) => Err(e),
            None => Ok(best),
        }
    }

    fn solve(&self, seed: Option<Point>) -> Result<Option<Point>> {
        let Some(best) = self.grid_best(seed)? else {
            return Ok(None);
        };
        if self.cal.solver.refine {
            Ok(Some(self.refine(best)?))
        } else {
            Ok(Some(best))
        }
    }

    fn lagrangian_slopes(&self, at: &Point, lambda: f64) -> Result<(f64, f64)> {
        let mut err = None;
        let mut lagrangian = |k: f64, p: f64| match self.eval(k, p) {
            Ok(pt) => pt.u_e + lambda * (pt.u_a - self.reservation),
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        };
        let dk = derivative(|k| lagrangian(k, at.p), at.k, 1e-4, None);
        let dp = derivative(|p| lagrangian(at.k, p), at.p, 1e-4, Some(0.0));
        match err {
            Some(e) => Err(e),
            None => Ok((dk, dp)),
        }
    }
}

/// Maximizes editor welfare over `(K, p_det)` at the reform panel size,
/// subject to authors doing no worse than at the decentralized policy.
pub fn solve_reform(cal: &Calibration, gamma: f64) -> Result<ReformSolution> {
    let panel = reform_panel(cal)?;
    let m = effort_rate(cal, gamma);
    let reservation = reservation_at_effort(cal, m, panel)?;
    let mut sol = solve_with_reservation(cal, m, panel, reservation)?;
    sol.gamma = gamma;
    Ok(sol)
}

/// Reform problem at an explicit effort rate, panel and reservation level.
pub fn solve_with_reservation(
    cal: &Calibration,
    m: f64,
    panel: u32,
    reservation: f64,
) -> Result<ReformSolution> {
    let problem = Problem { cal, m, panel: panel as f64, reservation };
    let decentralized = problem.eval(cal.base_accept_rate, 0.0)?;
    let seed = problem.feasible(&decentralized).then_some(decentralized);
    let best = problem.solve(seed)?.ok_or_else(|| {
        ModelError::Infeasible(format!(
            "no policy on the grid gives authors at least {reservation}"
        ))
    })?;

    let shifted = Problem { reservation: reservation + SHADOW_PRICE_STEP, ..problem };
    let lambda = match shifted.solve(None)? {
        Some(pt) => ((best.u_e - pt.u_e) / SHADOW_PRICE_STEP).max(0.0),
        None => {
            warn!("shadow price undefined: raising the reservation level leaves no feasible policy");
            f64::NAN
        }
    };
    let problem = Problem { reservation, ..shifted };
    let (foc_k, foc_p) = problem.lagrangian_slopes(&best, if lambda.is_nan() { 0.0 } else { lambda })?;
    let (quality, _) = editor_value(cal, m, best.k, best.p, panel as f64)?;
    Ok(ReformSolution {
        gamma: f64::NAN,
        m,
        panel,
        accept_rate: best.k,
        p_det: best.p,
        lambda,
        quality,
        editor_welfare: best.u_e,
        author_welfare: best.u_a,
        reservation,
        binding: best.u_a - reservation <= BINDING_TOL,
        decentralized_welfare: decentralized.u_e,
        foc_residual_k: foc_k,
        foc_residual_p: foc_p,
        grid_meta: GridMeta::of(cal),
    })
}

/// Score ratio and welfare slope at one effort level.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessPoint {
    pub m: f64,
    /// `V - c_A'(a*) da*/dK`.
    pub psi: f64,
    pub rho_gaussian: f64,
    pub rho_exact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SharpnessProfile {
    pub points: Vec<SharpnessPoint>,
    pub rho_bar_gaussian: f64,
    pub argmax_gaussian: f64,
    pub rho_bar_exact: f64,
    pub argmax_exact: f64,
}

pub const SHARPNESS_GRID: usize = 50;

fn threshold_slope(cal: &Calibration, mode: DensityMode, m: f64, panel: u32) -> Result<f64> {
    let model = retained_model(cal, m, 0.0, panel as f64)?;
    Ok(threshold_and_density_in(mode, cal, &model, cal.base_accept_rate)?.h_prime)
}

/// `rho(m) = |h'_m(z)| / |h'_1(z)|` and `Psi(m)` on 50 effort levels in
/// `[0.02, 1]`, with the score ratio computed on both density paths.
pub fn sharpness_profile(cal: &Calibration) -> Result<SharpnessProfile> {
    let panel = reform_panel(cal)?;
    let base_g = threshold_slope(cal, DensityMode::GaussianApprox, 1.0, panel)?.abs();
    let base_e = threshold_slope(cal, DensityMode::ExactConvolution, 1.0, panel)?.abs();
    let points = crate::calibration::linspace(0.02, 1.0, SHARPNESS_GRID)
        .into_par_iter()
        .map(|m| {
            Ok(SharpnessPoint {
                m,
                psi: welfare_slope_in_accept_rate(cal, m, cal.base_accept_rate, panel)?,
                rho_gaussian: threshold_slope(cal, DensityMode::GaussianApprox, m, panel)?.abs() / base_g,
                rho_exact: threshold_slope(cal, DensityMode::ExactConvolution, m, panel)?.abs() / base_e,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let argmax = |f: fn(&SharpnessPoint) -> f64| {
        points.iter().fold((f64::NEG_INFINITY, f64::NAN), |acc, pt| {
            if f(pt) > acc.0 {
                (f(pt), pt.m)
            } else {
                acc
            }
        })
    };
    let (rho_bar_gaussian, argmax_gaussian) = argmax(|p| p.rho_gaussian);
    let (rho_bar_exact, argmax_exact) = argmax(|p| p.rho_exact);
    Ok(SharpnessProfile {
        points,
        rho_bar_gaussian,
        argmax_gaussian,
        rho_bar_exact,
        argmax_exact,
    })
}

impl SharpnessProfile {
    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        use crate::format::fmt_sig;
        let mut out = csv::Writer::from_writer(w);
        out.write_record(["m", "psi", "rho_gaussian", "rho_exact"])?;
        for p in &self.points {
            out.write_record([fmt_sig(p.m), fmt_sig(p.psi), fmt_sig(p.rho_gaussian), fmt_sig(p.rho_exact)])?;
        }
        out.flush()?;
        Ok(())
    }
}

/// `min(1, sqrt(V / (rho_bar |Psi(1) - V|)))`.
pub fn sharpness_threshold(publication_value: f64, rho_bar: f64, psi_1: f64) -> f64 {
    (publication_value / (rho_bar * (psi_1 - publication_value).abs()))
        .sqrt()
        .min(1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RatRacePremise {
    pub holds: bool,
    /// `V`.
    pub lhs: f64,
    /// `c_A'(a*) da*/dK` at full effort.
    pub rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IntensificationPremise {
    pub holds: bool,
    /// `da*/dp_det` at the post-transition effort rate.
    pub value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SharpnessPremise {
    pub holds: bool,
    pub m1: f64,
    pub m_bar: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct InteriorDetectionPremise {
    pub holds: bool,
    pub net_sorting_benefit: f64,
    pub compensation_cost: f64,
    pub lambda_used: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PremiseReport {
    pub p1: RatRacePremise,
    pub p2: IntensificationPremise,
    pub p3: SharpnessPremise,
    pub p4: InteriorDetectionPremise,
    pub psi_1: f64,
    /// Supremum of the exact-convolution score ratio; this is the one that
    /// enters `m_bar`.
    pub rho_bar: f64,
    pub rho_bar_at: f64,
    pub rho_bar_gaussian: f64,
    pub m_bar: f64,
    /// `m_bar / m1`.
    pub margin: f64,
}

impl PremiseReport {
    pub fn all_hold(&self) -> bool {
        self.p1.holds && self.p2.holds && self.p3.holds && self.p4.holds
    }
}

pub fn premise_report(cal: &Calibration) -> Result<PremiseReport> {
    let panel = reform_panel(cal)?;
    let k0 = cal.base_accept_rate;
    let v = cal.publication_value;
    let base = Policy::new(panel, k0, 0.0)?;

    let full = polish_at(cal, 1.0, k0, 0.0, panel as f64)?;
    let full_sens = polish_sensitivities(cal, 1.0, &base)?;
    let rhs = cal.polish_cost.marginal(full.polish, cal.polish_cost_scale) * full_sens.d_accept_rate;
    let p1 = RatRacePremise { holds: v < rhs, lhs: v, rhs };

    let m1 = post_transition_effort(cal);
    let post = polish_at(cal, m1, k0, 0.0, panel as f64)?;
    let post_sens = polish_sensitivities(cal, m1, &base)?;
    let p2 = IntensificationPremise {
        holds: post_sens.d_detection > 0.0,
        value: post_sens.d_detection,
    };

    let psi_1 = welfare_slope_in_accept_rate(cal, 1.0, k0, panel)?;
    let profile = sharpness_profile(cal)?;
    let m_bar = sharpness_threshold(v, profile.rho_bar_exact, psi_1);
    let p3 = SharpnessPremise { holds: m1 <= m_bar, m1, m_bar };

    let mut err = None;
    let net_sorting_benefit = derivative(
        |p| match editor_value(cal, m1, k0, p, panel as f64) {
            Ok((q, _)) => q,
            Err(e) => {
                err.get_or_insert(e);
                f64::NAN
            }
        },
        0.0,
        1e-4,
        Some(0.0),
    );
    if let Some(e) = err {
        return Err(e);
    }
    let lambda_used = solve_reform(cal, gamma1(cal, 0.0) + TRANSITION_OFFSET)?.lambda;
    let compensation_cost =
        lambda_used * cal.polish_cost.marginal(post.polish, cal.polish_cost_scale) * post_sens.d_detection;
    let p4 = InteriorDetectionPremise {
        holds: net_sorting_benefit > compensation_cost,
        net_sorting_benefit,
        compensation_cost,
        lambda_used,
    };

    Ok(PremiseReport {
        p1,
        p2,
        p3,
        p4,
        psi_1,
        rho_bar: profile.rho_bar_exact,
        rho_bar_at: profile.argmax_exact,
        rho_bar_gaussian: profile.rho_bar_gaussian,
        m_bar,
        margin: m_bar / m1,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Restoration {
    /// Best editor welfare over `(N, K, p_det)` at the post-transition effort.
    pub best_post_welfare: f64,
    /// `max_N Q(N, K0, 1) - epsilon N`.
    pub pre_welfare: f64,
    /// `pre_welfare - best_post_welfare`.
    pub gap: f64,
    #[serde(rename = "N")]
    pub panel: u32,
    #[serde(rename = "K")]
    pub accept_rate: f64,
    pub p_det: f64,
}

/// Scans panel sizes `1..=n_max` at the post-transition effort rate, each
/// with the best author-feasible `(K, p_det)`, against the pre-AI optimum.
pub fn restoration_scan(cal: &Calibration, n_max: u32) -> Result<Restoration> {
    restoration_scan_at_effort(cal, post_transition_effort(cal), n_max)
}

/// [`restoration_scan`] with the post-transition effort rate replaced by `m`.
/// The author reservation level is the decentralized one at `m`.
pub fn restoration_scan_at_effort(cal: &Calibration, m: f64, n_max: u32) -> Result<Restoration> {
    if n_max == 0 {
        return Err(ModelError::InvalidInput("n_max must be at least 1".into()));
    }
    let reservation = reservation_at_effort(cal, m, reform_panel(cal)?)?;
    let mut best: Option<ReformSolution> = None;
    for n in 1..=n_max {
        let sol = match solve_with_reservation(cal, m, n, reservation) {
            Ok(s) => s,
            Err(ModelError::Infeasible(_)) => continue,
            Err(e) => return Err(e),
        };
        if best.as_ref().is_none_or(|b| sol.editor_welfare > b.editor_welfare) {
            best = Some(sol);
        }
    }
    let best = best.ok_or_else(|| ModelError::Infeasible("no panel size admits a feasible reform".into()))?;
    let mut pre_welfare = f64::NEG_INFINITY;
    for n in 1..=n_max {
        pre_welfare = pre_welfare.max(editor_value(cal, 1.0, cal.base_accept_rate, 0.0, n as f64)?.1);
    }
    let gap = pre_welfare - best.editor_welfare;
    if m < 1.0 && gap <= 0.0 {
        warn!("reform at m = {m} matches the pre-AI benchmark (gap = {gap})");
    }
    Ok(Restoration {
        best_post_welfare: best.editor_welfare,
        pre_welfare,
        gap,
        panel: best.panel,
        accept_rate: best.accept_rate,
        p_det: best.p_det,
    })
}
