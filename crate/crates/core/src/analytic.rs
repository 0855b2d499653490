//! Closed-loop harmonic predictions: the impulse-based δ-CL solution,
//! its exact variant driven by measured resets, and the CL-DF and DF
//! competitors.
//!
//! The reset element is modelled as its base-linear filter plus a train
//! of state-dependent impulses, two per period and alternating in sign.
//! Past impulses shift the reset instant (`Φ`) and the reset state; both
//! are computed from the tails of the closed-loop impulse responses.

use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonic::{self, HarmonicSpectrum};
use crate::lti::{self, StateSpace};
use crate::reset::{hz, LoopConfig, LoopModel, IN_D, IN_R, SIG_E, SIG_Q};
use crate::sim::{Injection, ResetEvent, SignalSpec};

/// Linear maps from a reset state to the reset-induced responses.
#[derive(Debug, Clone)]
pub struct InterconnectionSet {
    /// Reset state → `q`, equal to `K S_L G R_δ` (enters `q` with a minus sign).
    pub q_delta: StateSpace,
    /// Reset state → reset-element states inside the closed loop.
    pub h: StateSpace,
    /// `C_R (sI - A_R)⁻¹ (A_ρ - I)`.
    pub r_delta: StateSpace,
    /// `(sI - A_R)⁻¹ B_R`.
    pub r_l_x: StateSpace,
    /// `(sI - A_R)⁻¹ (A_ρ - I)`.
    pub r_delta_x: StateSpace,
}

/// Builds the reset-induced interconnections. `Q_δ` and `H` are realized
/// on the base-linear closed loop, with the jump `(A_ρ - I)x` injected
/// into the reset-element states.
pub fn build_interconnections(cfg: &LoopConfig) -> Result<InterconnectionSet> {
    let model = cfg.model()?;
    build_from_model(cfg, &model)
}

fn build_from_model(cfg: &LoopConfig, model: &LoopModel) -> Result<InterconnectionSet> {
    let r = cfg.reset();
    let nr = r.order();
    let n = model.order();
    if !lti::is_hurwitz(&model.a) {
        return Err(Error::Convergence(format!(
            "base-linear closed loop is not Hurwitz (spectral abscissa {:.4e}); the impulse-response series diverge",
            lti::spectral_abscissa(&model.a)
        )));
    }
    let jump = r.jump_matrix();
    let mut inject = DMatrix::zeros(n, nr);
    inject
        .view_mut((model.r_states.start, 0), (nr, nr))
        .copy_from(&jump);
    let c_q = -model.c.rows(SIG_Q, 1).into_owned();
    let q_delta = StateSpace::new(model.a.clone(), inject.clone(), c_q, DMatrix::zeros(1, nr))?;
    let mut sel = DMatrix::zeros(nr, n);
    sel.view_mut((0, model.r_states.start), (nr, nr))
        .copy_from(&DMatrix::identity(nr, nr));
    let h = StateSpace::new(model.a.clone(), inject, sel, DMatrix::zeros(nr, nr))?;
    let base = r.base();
    let r_delta = StateSpace::new(base.a().clone(), jump.clone(), base.c().clone(), DMatrix::zeros(1, nr))?;
    let r_l_x = StateSpace::new(
        base.a().clone(),
        base.b().clone(),
        DMatrix::identity(nr, nr),
        DMatrix::zeros(nr, 1),
    )?;
    let r_delta_x = StateSpace::new(base.a().clone(), jump, DMatrix::identity(nr, nr), DMatrix::zeros(nr, nr))?;
    Ok(InterconnectionSet {
        q_delta,
        h,
        r_delta,
        r_l_x,
        r_delta_x,
    })
}

/// What happens when the arcsine argument for `Φ` leaves `[-1, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ArcsinePolicy {
    Error,
    /// Clamp to `±π/2` and flag the violation in the report.
    Saturate,
}

/// Options of the δ-CL solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaClOptions {
    /// Reference phasor `R_I`; the reference is `Im{R_I e^{jωt}}`.
    pub reference: Complex64,
    pub arcsine: ArcsinePolicy,
}

impl Default for DeltaClOptions {
    fn default() -> Self {
        Self {
            reference: Complex64::new(1.0, 0.0),
            arcsine: ArcsinePolicy::Error,
        }
    }
}

/// Validity indicators of the δ-CL assumptions evaluated at the solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionReport {
    /// A reset instant exists (`|arcsine argument| ≤ 1`).
    pub ass3_ok: bool,
    pub arcsine_argument: f64,
    pub phi_magnitude: f64,
    /// `q` crosses zero in the same direction as the base-linear `q`.
    pub direction_ok: bool,
    /// Slope of `q` at the predicted reset, including impulse tails.
    pub q_slope: f64,
}

/// δ-CL solution at one frequency.
#[derive(Debug, Clone)]
pub struct DeltaClResult {
    pub omega: f64,
    /// Predicted descending reset instant in `[0, 2π/ω)`.
    pub t_rho: f64,
    pub phi: f64,
    /// Reset-element state just before the reset at `t_rho`.
    pub x: DVector<f64>,
    pub b_star: DVector<f64>,
    pub e: HarmonicSpectrum,
    pub s: HarmonicSpectrum,
    pub t: HarmonicSpectrum,
    /// Control sensitivity; `None` where the plant response vanishes.
    pub cs: Vec<Option<Complex64>>,
    pub report: AssumptionReport,
}

/// Base-linear phasors of `q` and `e` for one input component.
#[derive(Debug, Clone, Copy)]
struct Drive {
    q: Complex64,
    e: Complex64,
}

fn drive_for(model: &LoopModel, omega: f64, injection: Injection, phasor: Complex64) -> Result<Drive> {
    let input = match injection {
        Injection::Reference => IN_R,
        Injection::PlantInput => IN_D,
    };
    let q = model.channel(input, SIG_Q)?.eval(omega)? * phasor;
    let e = model.channel(input, SIG_E)?.eval(omega)? * phasor;
    Ok(Drive { q, e })
}

/// Tail sums `Σ_{k≥1} (-1)^k C e^{A kπ/ω} B` of an interconnection.
fn tail_sum(sys: &StateSpace, omega: f64) -> Result<DMatrix<f64>> {
    let s = lti::alternating_exp_sum_closed(sys.a(), PI / omega)?;
    Ok(sys.c() * s * sys.b())
}

/// Phase correction `Φ` of the reset instant caused by the tails of
/// earlier reset-induced responses, for reset state `x`.
pub fn phi(ic: &InterconnectionSet, cfg: &LoopConfig, omega: f64, x: &DVector<f64>) -> Result<f64> {
    let model = cfg.model()?;
    let drive = drive_for(&model, omega, Injection::Reference, Complex64::new(1.0, 0.0))?;
    let arg = phi_argument(ic, omega, x, drive.q.norm())?;
    if arg.abs() > 1.0 {
        return Err(Error::NoResetInstant { argument: arg });
    }
    Ok(arg.asin())
}

fn phi_argument(ic: &InterconnectionSet, omega: f64, x: &DVector<f64>, a: f64) -> Result<f64> {
    if !(a > 0.0) {
        return Err(Error::InvalidParameter(
            "base-linear reset-element input has zero amplitude".into(),
        ));
    }
    let sq = tail_sum(&ic.q_delta, omega)?;
    Ok((sq * x)[(0, 0)] / a)
}

/// Reset-element state at the descending reset instant for a unit
/// reference sinusoid.
pub fn reset_state(ic: &InterconnectionSet, cfg: &LoopConfig, omega: f64) -> Result<DVector<f64>> {
    let model = cfg.model()?;
    let drive = drive_for(&model, omega, Injection::Reference, Complex64::new(1.0, 0.0))?;
    reset_state_for(ic, cfg, omega, drive.q.norm())
}

fn reset_state_for(ic: &InterconnectionSet, cfg: &LoopConfig, omega: f64, a: f64) -> Result<DVector<f64>> {
    let base = cfg.reset().base();
    let nr = base.order();
    let (res_j, _) = lti::real_resolvent_parts(base.a(), omega)?;
    // res_j = Λ⁻¹ω
    let lambda_inv = &res_j / omega;
    let sq = tail_sum(&ic.q_delta, omega)?;
    let sh = tail_sum(&ic.h, omega)?;
    let lhs = DMatrix::identity(nr, nr) + &lambda_inv * base.a() * base.b() * &sq - sh;
    let lhs_inv = lti::checked_inverse(&lhs, "reset-state operator", omega)?;
    let rhs = res_j * base.b() * a;
    Ok(DVector::from_column_slice((lhs_inv * rhs).as_slice()))
}

/// Descending reset instant `(π - ∠(K S_L R_I) - Φ)/ω` wrapped into
/// `[0, 2π/ω)`.
pub fn reset_instant(cfg: &LoopConfig, omega: f64, phi: f64) -> Result<f64> {
    let model = cfg.model()?;
    let drive = drive_for(&model, omega, Injection::Reference, Complex64::new(1.0, 0.0))?;
    Ok(wrap_instant(omega, drive.q.arg(), phi))
}

fn wrap_instant(omega: f64, psi: f64, phi: f64) -> f64 {
    let period = 2.0 * PI / omega;
    let t = (PI - psi - phi) / omega;
    let w = t.rem_euclid(period);
    if w >= period {
        0.0
    } else {
        w
    }
}

/// δ-CL error, sensitivity, complementary and control sensitivity spectra.
pub fn delta_cl(cfg: &LoopConfig, omega: f64, n_max: usize) -> Result<DeltaClResult> {
    delta_cl_with(cfg, omega, n_max, &DeltaClOptions::default())
}

pub fn delta_cl_with(cfg: &LoopConfig, omega: f64, n_max: usize, opt: &DeltaClOptions) -> Result<DeltaClResult> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("frequency {omega} must be positive")));
    }
    if n_max == 0 {
        return Err(Error::InvalidParameter("n_max must be at least 1".into()));
    }
    let model = cfg.model()?;
    let drive = drive_for(&model, omega, Injection::Reference, opt.reference)?;
    let e = delta_cl_spectrum(cfg, &model, omega, n_max, drive, opt.arcsine)?;
    let r_i = opt.reference;
    if r_i.norm() == 0.0 {
        return Err(Error::InvalidParameter("reference phasor must be non-zero".into()));
    }
    let mut s = HarmonicSpectrum::zeros(omega, n_max)?;
    let mut t = HarmonicSpectrum::zeros(omega, n_max)?;
    let mut cs = vec![None; n_max];
    let p = cfg.plant();
    let p1 = p.eval(omega)?.norm();
    for n in 1..=n_max {
        let scale = Complex64::from_polar(r_i.norm(), n as f64 * r_i.arg());
        let sn = e.spectrum.get(n) / scale;
        s.set(n, sn);
        let tn = if n == 1 { 1.0 - sn } else { -sn };
        t.set(n, tn);
        let pn = p.eval(n as f64 * omega)?;
        if pn.norm() >= 1e-12 * p1 && pn.norm() > 0.0 {
            cs[n - 1] = Some(tn / pn);
        }
    }
    Ok(DeltaClResult {
        omega,
        t_rho: e.t_rho,
        phi: e.phi,
        x: e.x,
        b_star: e.b_star,
        e: e.spectrum,
        s,
        t,
        cs,
        report: e.report,
    })
}

struct DeltaSpectrum {
    spectrum: HarmonicSpectrum,
    t_rho: f64,
    phi: f64,
    x: DVector<f64>,
    b_star: DVector<f64>,
    report: AssumptionReport,
}

fn delta_cl_spectrum(
    cfg: &LoopConfig,
    model: &LoopModel,
    omega: f64,
    n_max: usize,
    drive: Drive,
    policy: ArcsinePolicy,
) -> Result<DeltaSpectrum> {
    let r = cfg.reset();
    let ic = build_from_model(cfg, model)?;
    let a = drive.q.norm();
    let psi = drive.q.arg();
    if r.is_linear() {
        let mut spectrum = HarmonicSpectrum::zeros(omega, n_max)?;
        spectrum.set(1, drive.e);
        return Ok(DeltaSpectrum {
            spectrum,
            t_rho: wrap_instant(omega, psi, 0.0),
            phi: 0.0,
            x: DVector::zeros(r.order()),
            b_star: DVector::zeros(r.order()),
            report: AssumptionReport {
                ass3_ok: true,
                arcsine_argument: 0.0,
                phi_magnitude: 0.0,
                direction_ok: true,
                q_slope: -a * omega,
            },
        });
    }
    r.require_ol_stable()?;
    let x = reset_state_for(&ic, cfg, omega, a)?;
    let arg = phi_argument(&ic, omega, &x, a)?;
    let ass3_ok = arg.abs() <= 1.0;
    let phi = if ass3_ok {
        arg.asin()
    } else {
        match policy {
            ArcsinePolicy::Error => return Err(Error::NoResetInstant { argument: arg }),
            ArcsinePolicy::Saturate => (PI / 2.0).copysign(arg),
        }
    };
    let t_rho = wrap_instant(omega, psi, phi);

    // slope of q at the reset: base-linear part plus impulse tails
    let sq_a = {
        let s = lti::alternating_exp_sum_closed(ic.q_delta.a(), PI / omega)?;
        (ic.q_delta.c() * ic.q_delta.a() * s * ic.q_delta.b() * &x)[(0, 0)]
    };
    let slope_bls = -a * omega * phi.cos();
    let q_slope = slope_bls - sq_a;
    let direction_ok = q_slope < 0.0;

    let b_star = harmonic::b_star(r, omega, &x)?;
    let rstar = harmonic::impulse_hosidf_spectrum_unchecked(r, omega, n_max, &b_star)?;
    let sens = cfg.bls_sensitivity()?;
    let g = cfg.g()?;
    let mut spectrum = HarmonicSpectrum::zeros(omega, n_max)?;
    for n in (1..=n_max).step_by(2) {
        let wn = n as f64 * omega;
        let psi_n = Complex64::from_polar(1.0, n as f64 * (psi + phi));
        let mut v = -sens.s.eval(wn)? * g.eval(wn)? * rstar.get(n) * psi_n;
        if n == 1 {
            v += drive.e;
        }
        spectrum.set(n, v);
    }
    Ok(DeltaSpectrum {
        spectrum,
        t_rho,
        phi,
        x,
        b_star,
        report: AssumptionReport {
            ass3_ok,
            arcsine_argument: arg,
            phi_magnitude: phi.abs(),
            direction_ok,
            q_slope,
        },
    })
}

/// Error spectrum rebuilt from measured resets of one half period: each
/// reset contributes the impulse HOSIDF of its own state, placed at its
/// own instant, to the base-linear error.
pub fn exact_impulse_hosidf(
    cfg: &LoopConfig,
    events: &[ResetEvent],
    omega: f64,
    n_max: usize,
    reference: Complex64,
) -> Result<HarmonicSpectrum> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("frequency must be positive".into()));
    }
    let r = cfg.reset();
    let sens = cfg.bls_sensitivity()?;
    let g = cfg.g()?;
    let mut spec = HarmonicSpectrum::zeros(omega, n_max)?;
    spec.set(1, sens.s.eval(omega)? * reference);
    if r.is_linear() {
        return Ok(spec);
    }
    let th = harmonic::theta_d(r, omega)?;
    let lg: Vec<Complex64> = (1..=n_max)
        .map(|n| {
            let wn = n as f64 * omega;
            Ok(sens.s.eval(wn)? * g.eval(wn)?)
        })
        .collect::<Result<_>>()?;
    for ev in events {
        let b_star = harmonic::b_star(r, omega, &ev.x_pre)?;
        // Q★ places the descending reset of the virtual sinusoid at ev.t
        let phase = PI - omega * ev.t;
        for n in (1..=n_max).step_by(2) {
            let rs = impulse_term(r, &th.theta_d, omega, n, &b_star)?;
            let v = spec.get(n) - lg[n - 1] * rs * Complex64::from_polar(1.0, n as f64 * phase);
            spec.set(n, v);
        }
    }
    Ok(spec)
}

fn impulse_term(
    r: &crate::reset::ResetController,
    theta: &DMatrix<f64>,
    omega: f64,
    n: usize,
    b_star: &DVector<f64>,
) -> Result<Complex64> {
    let v = theta * b_star;
    let rhs = DMatrix::from_iterator(v.len(), 1, v.iter().map(|x| Complex64::new(0.0, *x)));
    let sol = lti::resolvent_solve(r.base().a(), n as f64 * omega, &rhs, "resolvent jnωI - A_R")?;
    let c = r.base().c();
    Ok((0..v.len()).map(|i| sol[(i, 0)] * c[(0, i)]).sum())
}

/// Closed-loop describing-function sensitivity spectrum.
pub fn cl_df(cfg: &LoopConfig, omega: f64, n_max: usize) -> Result<HarmonicSpectrum> {
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("frequency must be positive".into()));
    }
    let r = cfg.reset();
    r.require_ol_stable()?;
    let hos = harmonic::hosidf_spectrum_unchecked(r, omega, n_max)?;
    let g = cfg.g()?;
    let k = cfg.k();
    let bls = cfg.bls_loop()?;
    let k1 = k.eval(omega)?;
    let l1 = g.eval(omega)? * hos.get(1) * k1;
    let den1 = 1.0 + l1;
    if den1.norm() < 1e-12 {
        return Err(Error::Singular {
            what: "1 + L_1",
            omega,
            condition: f64::INFINITY,
        });
    }
    let sl1 = 1.0 / den1;
    let mut spec = HarmonicSpectrum::zeros(omega, n_max)?;
    spec.set(1, sl1);
    for n in (3..=n_max).step_by(2) {
        let wn = n as f64 * omega;
        let ln = g.eval(wn)? * hos.get(n) * k1;
        let den = 1.0 + bls.eval(wn)?;
        if den.norm() < 1e-12 {
            return Err(Error::Singular {
                what: "1 + L_bls(nω)",
                omega: wn,
                condition: f64::INFINITY,
            });
        }
        let sl1n = Complex64::from_polar(sl1.norm(), n as f64 * sl1.arg());
        spec.set(n, -ln * sl1n / den);
    }
    Ok(spec)
}

/// Error spectrum from a sensitivity spectrum and reference phasor:
/// `E_n = S_n |R_I| e^{jn∠R_I}`.
pub fn error_from_sensitivity(s: &HarmonicSpectrum, reference: Complex64) -> HarmonicSpectrum {
    let entries = s
        .iter()
        .map(|(n, v)| v * Complex64::from_polar(reference.norm(), n as f64 * reference.arg()))
        .collect();
    HarmonicSpectrum::new(s.omega(), entries).expect("omega validated by source spectrum")
}

/// DF error prediction: only the first harmonic, `S_DF R_I`.
pub fn df_error(cfg: &LoopConfig, omega: f64, n_max: usize, reference: Complex64) -> Result<HarmonicSpectrum> {
    let mut spec = HarmonicSpectrum::zeros(omega, n_max.max(1))?;
    cfg.reset().require_ol_stable()?;
    spec.set(1, harmonic::df_sensitivity(cfg, omega)? * reference);
    Ok(spec)
}

/// Prediction methods.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    Df,
    ClDf,
    DeltaCl,
}

impl Method {
    pub const ALL: [Method; 3] = [Method::Df, Method::ClDf, Method::DeltaCl];

    pub fn name(self) -> &'static str {
        match self {
            Method::Df => "DF",
            Method::ClDf => "CL-DF",
            Method::DeltaCl => "δ-CL",
        }
    }

    /// Identifier used in configuration files and command lines.
    pub fn key(self) -> &'static str {
        match self {
            Method::Df => "df",
            Method::ClDf => "cl-df",
            Method::DeltaCl => "delta-cl",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "df" => Some(Method::Df),
            "cl-df" | "cldf" => Some(Method::ClDf),
            "delta-cl" | "δ-cl" | "dcl" | "deltacl" => Some(Method::DeltaCl),
            _ => None,
        }
    }
}

/// Error spectrum predicted by `method` for a unit reference sinusoid.
pub fn predict_error(cfg: &LoopConfig, omega: f64, n_max: usize, method: Method) -> Result<HarmonicSpectrum> {
    let one = Complex64::new(1.0, 0.0);
    match method {
        Method::Df => df_error(cfg, omega, n_max, one),
        Method::ClDf => Ok(error_from_sensitivity(&cl_df(cfg, omega, n_max)?, one)),
        Method::DeltaCl => Ok(delta_cl(cfg, omega, n_max)?.e),
    }
}

/// `Σ_n |X_n| sin(nωt + ∠X_n)` on a time grid.
pub fn time_reconstruct(spec: &HarmonicSpectrum, times: &[f64]) -> Vec<f64> {
    spec.time_reconstruct(times)
}

/// δ-CL prediction for a multi-sine input: the nonlinear solution for the
/// dominant component plus base-linear responses to all others.
#[derive(Debug, Clone)]
pub struct MultisinePrediction {
    pub e: Vec<f64>,
    pub dominant: usize,
    /// The dominant component has the largest base-linear `|q|`.
    pub dominance_ok: bool,
    pub spectrum: HarmonicSpectrum,
    pub report: AssumptionReport,
}

pub fn predict_multisine(
    cfg: &LoopConfig,
    input: &SignalSpec,
    dominant: Option<usize>,
    n_max: usize,
    times: &[f64],
) -> Result<MultisinePrediction> {
    input.validate()?;
    let model = cfg.model()?;
    let drives = input
        .components
        .iter()
        .map(|c| {
            drive_for(
                &model,
                hz(c.frequency_hz),
                c.injection,
                Complex64::from_polar(c.amplitude, c.phase),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let largest = drives
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.q.norm().total_cmp(&b.1.q.norm()))
        .map(|(i, _)| i)
        .unwrap_or(0);
    let dom = match dominant {
        Some(i) if i < drives.len() => i,
        Some(i) => {
            return Err(Error::InvalidParameter(format!(
                "dominant component {i} out of range ({} components)",
                drives.len()
            )))
        }
        None => largest,
    };
    let dominance_ok = drives
        .iter()
        .enumerate()
        .all(|(i, d)| i == dom || d.q.norm() < drives[dom].q.norm());
    if !dominance_ok {
        warn!("component {dom} does not dominate the reset-element input; prediction assumptions are violated");
    }
    let omega = hz(input.components[dom].frequency_hz);
    let ds = delta_cl_spectrum(cfg, &model, omega, n_max, drives[dom], ArcsinePolicy::Error)?;
    let mut e = ds.spectrum.time_reconstruct(times);
    for (i, (c, d)) in input.components.iter().zip(&drives).enumerate() {
        if i == dom {
            continue;
        }
        let w = hz(c.frequency_hz);
        for (v, t) in e.iter_mut().zip(times) {
            *v += (d.e * Complex64::from_polar(1.0, w * t)).im;
        }
    }
    Ok(MultisinePrediction {
        e,
        dominant: dom,
        dominance_ok,
        spectrum: ds.spectrum,
        report: ds.report,
    })
}

/// Default "small Φ" threshold of the assumption check.
pub const SMALL_PHI: f64 = PI / 9.0;

/// Assumption validity summary.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssumptionCheck {
    /// Resets per period in the simulation, when one was supplied.
    pub resets_per_period: Option<usize>,
    /// Exactly two resets per period (unknown without simulation).
    pub two_resets: Option<bool>,
    pub direction_ok: bool,
    pub reset_instant_exists: bool,
    pub arcsine_argument: f64,
    pub phi: f64,
    pub small_phi: bool,
    pub small_phi_threshold: f64,
}

impl AssumptionCheck {
    pub fn all_ok(&self) -> bool {
        self.two_resets.unwrap_or(true) && self.direction_ok && self.reset_instant_exists && self.small_phi
    }
}

pub fn assumption_check(
    result: &DeltaClResult,
    sim: Option<&crate::sim::SimResult>,
    small_phi_threshold: f64,
) -> AssumptionCheck {
    let resets = sim.map(|s| {
        let t_end = s.t.last().copied().unwrap_or(0.0);
        let span = 2.0 * PI / result.omega;
        s.events_between(t_end - span, t_end).count()
    });
    AssumptionCheck {
        resets_per_period: resets,
        two_resets: resets.map(|n| n == 2),
        direction_ok: result.report.direction_ok,
        reset_instant_exists: result.report.ass3_ok,
        arcsine_argument: result.report.arcsine_argument,
        phi: result.phi,
        small_phi: result.phi.abs() < small_phi_threshold,
        small_phi_threshold,
    }
}
