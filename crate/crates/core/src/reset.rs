//! Reset elements, linear controllers and the closed-loop wiring.
//!
//! The loop is `r → e → K → q → R → z → C → (+d) → u → P → y`, closed by
//! `e = r - y`. `R` is the only block with resets; `G = P·C`.

use std::f64::consts::PI;
use std::ops::Range;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::harmonic;
use crate::lti::{self, series, StateSpace};

/// Converts hertz to radians per second.
pub fn hz(f: f64) -> f64 {
    2.0 * PI * f
}

/// Reset behaviour according to the diagonal of `A_ρ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetType {
    /// Every γ is zero.
    Full,
    /// At least one γ differs from 0 and 1.
    Partial,
    /// Every γ is one (the element never changes its state).
    Linear,
}

/// SISO linear filter whose states jump to `A_ρ x` whenever its input
/// crosses zero.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetController {
    base: StateSpace,
    gammas: DVector<f64>,
}

impl ResetController {
    pub fn new(base: StateSpace, gammas: &[f64]) -> Result<Self> {
        if !base.is_siso() {
            return Err(Error::Dimension("reset controller must be SISO".into()));
        }
        if gammas.len() != base.order() {
            return Err(Error::Dimension(format!(
                "{} reset coefficients for {} states",
                gammas.len(),
                base.order()
            )));
        }
        for &g in gammas {
            if !g.is_finite() || !(-1.0..=1.0).contains(&g) {
                return Err(Error::InvalidParameter(format!("reset coefficient {g} outside [-1, 1]")));
            }
        }
        Ok(Self {
            base,
            gammas: DVector::from_column_slice(gammas),
        })
    }

    /// Element that never resets.
    pub fn linear(base: StateSpace) -> Result<Self> {
        let ones = vec![1.0; base.order()];
        Self::new(base, &ones)
    }

    pub fn base(&self) -> &StateSpace {
        &self.base
    }

    pub fn gammas(&self) -> &DVector<f64> {
        &self.gammas
    }

    /// Diagonal reset matrix `A_ρ`.
    pub fn reset_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.gammas)
    }

    /// `A_ρ - I`.
    pub fn jump_matrix(&self) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.gammas.map(|g| g - 1.0))
    }

    pub fn order(&self) -> usize {
        self.base.order()
    }

    pub fn reset_type(&self) -> ResetType {
        if self.gammas.iter().all(|g| *g == 1.0) {
            ResetType::Linear
        } else if self.gammas.iter().all(|g| *g == 0.0) {
            ResetType::Full
        } else {
            ResetType::Partial
        }
    }

    pub fn is_linear(&self) -> bool {
        self.reset_type() == ResetType::Linear
    }

    /// Same element with new reset coefficients.
    pub fn with_gammas(&self, gammas: &[f64]) -> Result<Self> {
        Self::new(self.base.clone(), gammas)
    }

    /// Applies a state transformation `x = T x̃` with diagonal `T`
    /// (keeps `A_ρ` diagonal).
    pub fn rescaled(&self, scales: &[f64]) -> Result<Self> {
        if scales.len() != self.order() || scales.iter().any(|s| *s == 0.0) {
            return Err(Error::InvalidParameter("state scaling must be non-zero per state".into()));
        }
        let t = DMatrix::from_diagonal(&DVector::from_column_slice(scales));
        let ti = DMatrix::from_diagonal(&DVector::from_iterator(scales.len(), scales.iter().map(|s| 1.0 / s)));
        let b = &self.base;
        let base = StateSpace::new(&ti * b.a() * &t, &ti * b.b(), b.c() * &t, b.d().clone())?;
        Self::new(base, self.gammas.as_slice())
    }

    /// Open-loop reset stability report.
    pub fn ol_stable(&self) -> OlStability {
        ol_stable(self)
    }

    pub(crate) fn require_ol_stable(&self) -> Result<()> {
        if self.is_linear() {
            return Ok(());
        }
        let rep = self.ol_stable();
        if rep.stable {
            Ok(())
        } else {
            Err(Error::OpenLoopUnstable {
                worst_modulus: rep.worst_modulus,
            })
        }
    }
}

/// Generalized Clegg integrator.
pub fn make_gci(gamma: f64) -> Result<ResetController> {
    let one = DMatrix::from_element(1, 1, 1.0);
    let base = StateSpace::new(DMatrix::zeros(1, 1), one.clone(), one, DMatrix::zeros(1, 1))?;
    ResetController::new(base, &[gamma])
}

/// Generalized first-order reset element with corner frequency in Hz.
pub fn make_gfore(omega_r_hz: f64, gamma: f64) -> Result<ResetController> {
    if !(omega_r_hz > 0.0) || !omega_r_hz.is_finite() {
        return Err(Error::InvalidParameter(format!("GFORE corner frequency {omega_r_hz} Hz must be positive")));
    }
    make_gfore_rad(hz(omega_r_hz), gamma)
}

/// Generalized first-order reset element with corner frequency in rad/s.
pub fn make_gfore_rad(omega_r: f64, gamma: f64) -> Result<ResetController> {
    if !(omega_r > 0.0) || !omega_r.is_finite() {
        return Err(Error::InvalidParameter(format!("GFORE corner frequency {omega_r} rad/s must be positive")));
    }
    let base = StateSpace::new(
        DMatrix::from_element(1, 1, -omega_r),
        DMatrix::from_element(1, 1, omega_r),
        DMatrix::from_element(1, 1, 1.0),
        DMatrix::zeros(1, 1),
    )?;
    ResetController::new(base, &[gamma])
}

/// Parameters of a constant-gain lead-in-phase element together with the
/// PID that surrounds it. Frequencies are in Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CgLpTuning {
    pub gamma: f64,
    pub omega_r_hz: f64,
    pub alpha: f64,
    pub omega_f_hz: f64,
    pub omega_i_hz: f64,
    pub omega_c_hz: f64,
    pub beta: f64,
    /// Controller gain; `None` selects DF-based tuning to `omega_c_hz`.
    pub kp: Option<f64>,
}

impl CgLpTuning {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("omega_r", self.omega_r_hz),
            ("alpha", self.alpha),
            ("omega_f", self.omega_f_hz),
            ("omega_i", self.omega_i_hz),
            ("omega_c", self.omega_c_hz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return Err(Error::InvalidParameter(format!("{name} = {v} must be positive")));
            }
        }
        if !(-1.0..=1.0).contains(&self.gamma) {
            return Err(Error::InvalidParameter(format!("gamma = {} outside [-1, 1]", self.gamma)));
        }
        if self.omega_f_hz <= self.omega_c_hz {
            return Err(Error::InvalidParameter(format!(
                "omega_f = {} Hz must exceed omega_c = {} Hz",
                self.omega_f_hz, self.omega_c_hz
            )));
        }
        if !(self.beta > 1.0) || !self.beta.is_finite() {
            return Err(Error::InvalidParameter(format!("beta = {} must exceed 1", self.beta)));
        }
        if let Some(k) = self.kp {
            if !(k > 0.0) || !k.is_finite() {
                return Err(Error::InvalidParameter(format!("kp = {k} must be positive")));
            }
        }
        Ok(())
    }
}

/// Two-state CgLp element: a GFORE at `ω_r/α` followed by a lead at `ω_r`
/// with a low-pass at `ω_f`. Only the first state resets.
pub fn make_cglp(t: &CgLpTuning) -> Result<ResetController> {
    t.validate()?;
    let wr = hz(t.omega_r_hz);
    let wra = wr / t.alpha;
    let wf = hz(t.omega_f_hz);
    let a = DMatrix::from_row_slice(2, 2, &[-wra, 0.0, wf, -wf]);
    let b = DMatrix::from_row_slice(2, 1, &[wra, 0.0]);
    let c = DMatrix::from_row_slice(1, 2, &[wf / wr, 1.0 - wf / wr]);
    let base = StateSpace::new(a, b, c, DMatrix::zeros(1, 1))?;
    ResetController::new(base, &[t.gamma, 1.0])
}

/// PID `k_p (s + ω_i)/s · (s + ω_c/β)/(s + ω_c β)`, frequencies in Hz.
pub fn make_pid(kp: f64, omega_i_hz: f64, omega_c_hz: f64, beta: f64) -> Result<StateSpace> {
    if !(omega_i_hz > 0.0) || !(omega_c_hz > 0.0) || !(beta >= 1.0) || !kp.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "PID needs omega_i, omega_c > 0 and beta >= 1 (got {omega_i_hz}, {omega_c_hz}, {beta})"
        )));
    }
    let wi = hz(omega_i_hz);
    let wc = hz(omega_c_hz);
    let integ = StateSpace::from_tf(&[1.0, wi], &[1.0, 0.0])?;
    if beta == 1.0 {
        return Ok(integ.scaled(kp));
    }
    let lead = StateSpace::from_tf(&[1.0, wc / beta], &[1.0, wc * beta])?;
    Ok(series(&integ, &lead)?.scaled(kp))
}

/// Double lead `k_p ((s + ω_c/β)/(s + ω_c β))²`, frequencies in Hz.
pub fn make_double_lead(kp: f64, omega_c_hz: f64, beta: f64) -> Result<StateSpace> {
    if !(omega_c_hz > 0.0) || !(beta >= 1.0) || !kp.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "double lead needs omega_c > 0 and beta >= 1 (got {omega_c_hz}, {beta})"
        )));
    }
    let wc = hz(omega_c_hz);
    let lead = StateSpace::from_tf(&[1.0, wc / beta], &[1.0, wc * beta])?;
    Ok(series(&lead, &lead)?.scaled(kp))
}

/// Closed-loop wiring `{K, R, C, P, τ}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LoopConfig {
    k: StateSpace,
    r: ResetController,
    c: StateSpace,
    p: StateSpace,
    tau: f64,
}

/// Indices of the algebraic loop signals in [`LoopModel`] outputs.
pub const SIG_E: usize = 0;
pub const SIG_Q: usize = 1;
pub const SIG_Z: usize = 2;
pub const SIG_U: usize = 3;
pub const SIG_Y: usize = 4;

/// Inputs of [`LoopModel`].
pub const IN_R: usize = 0;
pub const IN_D: usize = 1;

impl LoopConfig {
    pub fn new(k: StateSpace, r: ResetController, c: StateSpace, p: StateSpace, tau: f64) -> Result<Self> {
        for (sys, name) in [(&k, "K"), (&c, "C"), (&p, "P")] {
            if !sys.is_siso() {
                return Err(Error::Dimension(format!("{name} must be SISO")));
            }
        }
        if !(tau >= 0.0) || !tau.is_finite() {
            return Err(Error::InvalidParameter(format!("time regularization {tau} must be >= 0")));
        }
        let dprod = k.feedthrough() * r.base().feedthrough() * c.feedthrough() * p.feedthrough();
        if (1.0 + dprod).abs() < 1e-12 {
            return Err(Error::AlgebraicLoop(format!(
                "1 + D_K D_R D_C D_P = {:e} is not invertible",
                1.0 + dprod
            )));
        }
        Ok(Self { k, r, c, p, tau })
    }

    pub fn k(&self) -> &StateSpace {
        &self.k
    }

    pub fn reset(&self) -> &ResetController {
        &self.r
    }

    pub fn controller(&self) -> &StateSpace {
        &self.c
    }

    pub fn plant(&self) -> &StateSpace {
        &self.p
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    pub fn with_tau(&self, tau: f64) -> Result<Self> {
        Self::new(self.k.clone(), self.r.clone(), self.c.clone(), self.p.clone(), tau)
    }

    pub fn with_reset(&self, r: ResetController) -> Result<Self> {
        Self::new(self.k.clone(), r, self.c.clone(), self.p.clone(), self.tau)
    }

    /// Same loop with the linear controller multiplied by `factor`.
    pub fn with_controller_gain(&self, factor: f64) -> Result<Self> {
        Self::new(self.k.clone(), self.r.clone(), self.c.scaled(factor), self.p.clone(), self.tau)
    }

    /// `G = P·C`.
    pub fn g(&self) -> Result<StateSpace> {
        series(&self.c, &self.p)
    }

    /// Base-linear loop gain `G R_L K`.
    pub fn bls_loop(&self) -> Result<StateSpace> {
        series(&series(&self.k, self.r.base())?, &self.g()?)
    }

    pub fn bls_sensitivity(&self) -> Result<lti::Sensitivity> {
        lti::linear_sensitivity(&self.k, self.r.base(), &self.g()?)
    }

    /// DF loop gain `G(jω) R_DF,1(ω) K(jω)`.
    pub fn df_loop(&self, omega: f64) -> Result<Complex64> {
        let g = self.g()?.eval(omega)?;
        let k = self.k.eval(omega)?;
        let r = harmonic::hosidf_unchecked(&self.r, omega, 1)?;
        Ok(g * r * k)
    }

    /// Closed-loop base-linear realization with all loop signals as outputs.
    pub fn model(&self) -> Result<LoopModel> {
        LoopModel::build(self)
    }
}

/// Base-linear closed loop with state `[x_K, x_R, x_C, x_P]`, inputs
/// `[r, d]` (`d` adds to the plant input) and outputs `[e, q, z, u, y]`.
#[derive(Debug, Clone)]
pub struct LoopModel {
    pub a: DMatrix<f64>,
    pub b: DMatrix<f64>,
    pub c: DMatrix<f64>,
    pub d: DMatrix<f64>,
    pub k_states: Range<usize>,
    pub r_states: Range<usize>,
    pub c_states: Range<usize>,
    pub p_states: Range<usize>,
}

impl LoopModel {
    fn build(cfg: &LoopConfig) -> Result<Self> {
        let blocks = [&cfg.k, cfg.r.base(), &cfg.c, &cfg.p];
        let orders: Vec<usize> = blocks.iter().map(|b| b.order()).collect();
        let n: usize = orders.iter().sum();
        let mut offs = [0usize; 5];
        for i in 0..4 {
            offs[i + 1] = offs[i] + orders[i];
        }
        let (dk, dr, dc, dp) = (
            cfg.k.feedthrough(),
            cfg.r.base().feedthrough(),
            cfg.c.feedthrough(),
            cfg.p.feedthrough(),
        );
        // M v = N x + W w with v = [e, q, z, u, y], w = [r, d]
        let m = DMatrix::from_row_slice(
            5,
            5,
            &[
                1.0, 0.0, 0.0, 0.0, 1.0, //
                -dk, 1.0, 0.0, 0.0, 0.0, //
                0.0, -dr, 1.0, 0.0, 0.0, //
                0.0, 0.0, -dc, 1.0, 0.0, //
                0.0, 0.0, 0.0, -dp, 1.0,
            ],
        );
        let mut nmat = DMatrix::zeros(5, n);
        for (i, blk) in blocks.iter().enumerate() {
            nmat.view_mut((i + 1, offs[i]), (1, orders[i])).copy_from(blk.c());
        }
        let mut w = DMatrix::zeros(5, 2);
        w[(0, IN_R)] = 1.0;
        w[(3, IN_D)] = 1.0;
        let mi = lti::checked_inverse(&m, "loop algebraic equations", 0.0)?;
        let c = &mi * nmat;
        let d = &mi * w;

        let mut ablk = DMatrix::zeros(n, n);
        let mut bsel = DMatrix::zeros(n, 5);
        for (i, blk) in blocks.iter().enumerate() {
            ablk.view_mut((offs[i], offs[i]), (orders[i], orders[i])).copy_from(blk.a());
            // block i is driven by signal i (e, q, z, u)
            bsel.view_mut((offs[i], i), (orders[i], 1)).copy_from(blk.b());
        }
        let a = ablk + &bsel * &c;
        let b = &bsel * &d;
        Ok(Self {
            a,
            b,
            c,
            d,
            k_states: offs[0]..offs[1],
            r_states: offs[1]..offs[2],
            c_states: offs[2]..offs[3],
            p_states: offs[3]..offs[4],
        })
    }

    pub fn order(&self) -> usize {
        self.a.nrows()
    }

    /// SISO transfer from input `input` to loop signal `output`.
    pub fn channel(&self, input: usize, output: usize) -> Result<StateSpace> {
        StateSpace::new(
            self.a.clone(),
            self.b.columns(input, 1).into_owned(),
            self.c.rows(output, 1).into_owned(),
            self.d.view((output, input), (1, 1)).into_owned(),
        )
    }
}

/// DF-based gain factor: scaling the linear controller by the returned
/// value places the DF loop crossover at `omega_c_hz`.
pub fn tune_gain(cfg: &LoopConfig, omega_c_hz: f64) -> Result<f64> {
    let l = cfg.df_loop(hz(omega_c_hz))?.norm();
    if !(l > 0.0) || !l.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "DF loop response at {omega_c_hz} Hz has magnitude {l}; cannot tune"
        )));
    }
    Ok(1.0 / l)
}

/// Result of the open-loop reset stability test.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OlStability {
    pub stable: bool,
    /// Largest spectral radius of `A_ρ e^{A_R δ}` over the grid.
    pub worst_modulus: f64,
    /// Interval at which `worst_modulus` occurs (0 for the small-δ limit).
    pub worst_delta: f64,
}

pub const OL_DELTA_MIN: f64 = 1e-6;
pub const OL_DELTA_MAX: f64 = 1e3;
pub const OL_DELTA_POINTS: usize = 400;

/// Checks `|λ(A_ρ e^{A_R δ})| < 1` for all reset intervals `δ > 0` on a
/// log-spaced grid, plus the `δ → 0⁺` limit `|λ(A_ρ)| ≤ 1`.
pub fn ol_stable(r: &ResetController) -> OlStability {
    if r.order() == 0 {
        return OlStability {
            stable: true,
            worst_modulus: 0.0,
            worst_delta: 0.0,
        };
    }
    let a_rho = r.reset_matrix();
    let limit = lti::spectral_radius(&a_rho);
    let mut worst = limit;
    let mut worst_delta = 0.0;
    let mut stable = limit <= 1.0;
    let (l0, l1) = (OL_DELTA_MIN.log10(), OL_DELTA_MAX.log10());
    for i in 0..OL_DELTA_POINTS {
        let delta = 10f64.powf(l0 + (l1 - l0) * i as f64 / (OL_DELTA_POINTS - 1) as f64);
        let m = match lti::expm(r.base().a(), delta) {
            Ok(e) => lti::spectral_radius(&(&a_rho * e)),
            Err(_) => f64::INFINITY,
        };
        if m >= 1.0 || !m.is_finite() {
            stable = false;
        }
        if m > worst {
            worst = m;
            worst_delta = delta;
        }
    }
    OlStability {
        stable,
        worst_modulus: worst,
        worst_delta,
    }
}

/// Phase margins of the base-linear and DF loops.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Margins {
    pub pm_bls_deg: f64,
    pub crossover_bls_hz: f64,
    pub pm_df_deg: f64,
    pub crossover_df_hz: f64,
    /// `PM_DF - PM_BLS`.
    pub phi_rc_deg: f64,
}

pub const MARGIN_BAND_HZ: (f64, f64) = (1e-2, 1e5);
const MARGIN_POINTS: usize = 2000;

fn wrap_deg(x: f64) -> f64 {
    let mut y = (x + 180.0).rem_euclid(360.0) - 180.0;
    if y == -180.0 {
        y = 180.0;
    }
    y
}

/// Highest-frequency unit-magnitude crossing of `l` in `band_hz`.
fn crossover<F>(l: F, band_hz: (f64, f64)) -> Result<(f64, Complex64)>
where
    F: Fn(f64) -> Result<Complex64>,
{
    let (l0, l1) = (band_hz.0.log10(), band_hz.1.log10());
    let f_at = |i: usize| 10f64.powf(l0 + (l1 - l0) * i as f64 / (MARGIN_POINTS - 1) as f64);
    let mut prev = l(hz(f_at(MARGIN_POINTS - 1)))?.norm().ln();
    for i in (0..MARGIN_POINTS - 1).rev() {
        let cur = l(hz(f_at(i)))?.norm().ln();
        if (cur > 0.0) != (prev > 0.0) && cur != 0.0 && prev != 0.0 {
            let (mut lo, mut hi) = (f_at(i).ln(), f_at(i + 1).ln());
            let sign_lo = cur > 0.0;
            for _ in 0..200 {
                let mid = 0.5 * (lo + hi);
                let v = l(hz(mid.exp()))?.norm().ln();
                if (v > 0.0) == sign_lo {
                    lo = mid;
                } else {
                    hi = mid;
                }
                if hi - lo < 1e-15 {
                    break;
                }
            }
            let f = (0.5 * (lo + hi)).exp();
            return Ok((f, l(hz(f))?));
        }
        prev = cur;
    }
    Err(Error::NoCrossover {
        lo_hz: band_hz.0,
        hi_hz: band_hz.1,
    })
}

/// Phase margins at the gain crossovers of the BLS and DF loops.
pub fn phase_margin_bls(cfg: &LoopConfig) -> Result<Margins> {
    let bls = cfg.bls_loop()?;
    let (f_bls, l_bls) = crossover(|w| bls.eval(w), MARGIN_BAND_HZ)?;
    let (f_df, l_df) = crossover(|w| cfg.df_loop(w), MARGIN_BAND_HZ)?;
    let pm_bls = wrap_deg(180.0 + l_bls.arg().to_degrees());
    let pm_df = wrap_deg(180.0 + l_df.arg().to_degrees());
    Ok(Margins {
        pm_bls_deg: pm_bls,
        crossover_bls_hz: f_bls,
        pm_df_deg: pm_df,
        crossover_df_hz: f_df,
        phi_rc_deg: pm_df - pm_bls,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn gci_parameters() {
        let r = make_gci(0.0).unwrap();
        assert_eq!(r.reset_type(), ResetType::Full);
        assert_eq!(make_gci(0.5).unwrap().reset_type(), ResetType::Partial);
        let lin = make_gci(1.0).unwrap();
        assert!(lin.is_linear());
        let h = lin.base().eval(2.0).unwrap();
        assert!((h - c(0.0, -0.5)).norm() < 1e-15);
        assert!(make_gci(1.5).is_err());
    }

    #[test]
    fn gfore_units() {
        let r = make_gfore(10.0, 1.0).unwrap();
        assert_relative_eq!(r.base().a()[(0, 0)], -hz(10.0));
        assert_relative_eq!(r.base().eval(1e-6).unwrap().re, 1.0, epsilon = 1e-9);
        assert!(make_gfore(0.0, 0.0).is_err());
        assert!(make_gfore_rad(-1.0, 0.0).is_err());
    }

    #[test]
    fn cglp_linear_has_lead_lag_response() {
        let t = CgLpTuning {
            gamma: 1.0,
            omega_r_hz: 30.0,
            alpha: 1.2,
            omega_f_hz: 500.0,
            omega_i_hz: 10.0,
            omega_c_hz: 100.0,
            beta: 2.0,
            kp: None,
        };
        let r = make_cglp(&t).unwrap();
        for &f in &[1.0, 20.0, 100.0, 1000.0] {
            let w = hz(f);
            let s = c(0.0, w);
            let (wr, wra, wf) = (hz(30.0), hz(30.0) / 1.2, hz(500.0));
            let expected = wra / (s + wra) * (s / wr + 1.0) / (s / wf + 1.0);
            let got = r.base().eval(w).unwrap();
            assert!((got - expected).norm() / expected.norm() < 1e-10);
        }
        let unit = make_cglp(&CgLpTuning { alpha: 1.0, ..t }).unwrap();
        for &f in &[1e-4, 1e-3, 1e-2] {
            assert_relative_eq!(unit.base().eval(hz(f)).unwrap().norm(), 1.0, epsilon = 1e-9);
        }
        assert_eq!(r.gammas().as_slice(), &[1.0, 1.0]);
        assert!(make_cglp(&CgLpTuning { beta: 0.9, ..t }).is_err());
        assert!(make_cglp(&CgLpTuning { omega_f_hz: 50.0, ..t }).is_err());
    }

    #[test]
    fn pid_collapses_without_lead() {
        let pid = make_pid(2.0, 10.0, 100.0, 1.0).unwrap();
        let w = 7.0;
        let s = c(0.0, w);
        let expected = 2.0 * (s + hz(10.0)) / s;
        assert!((pid.eval(w).unwrap() - expected).norm() / expected.norm() < 1e-13);
        assert!(make_pid(1.0, 10.0, 100.0, 0.5).is_err());
    }

    #[test]
    fn double_lead_is_square_of_lead() {
        let dl = make_double_lead(3.0, 100.0, 3.73).unwrap();
        let w = hz(57.0);
        let s = c(0.0, w);
        let lead = (s + hz(100.0) / 3.73) / (s + hz(100.0) * 3.73);
        let expected = 3.0 * lead * lead;
        assert!((dl.eval(w).unwrap() - expected).norm() / expected.norm() < 1e-12);
    }

    #[test]
    fn ol_stability_cases() {
        let r = make_gci(0.0).unwrap().ol_stable();
        assert!(r.stable);
        assert_eq!(r.worst_modulus, 0.0);
        let r = make_gci(1.0).unwrap().ol_stable();
        assert!(!r.stable);
        assert_relative_eq!(r.worst_modulus, 1.0);
        assert!(make_gci(-0.9).unwrap().ol_stable().stable);
        assert!(make_gfore(5.0, 0.5).unwrap().ol_stable().stable);
        assert!(make_gfore(5.0, 1.0).unwrap().ol_stable().stable);
        assert!(make_gfore(5.0, -1.0).unwrap().ol_stable().stable);
    }

    #[test]
    fn loop_model_matches_sensitivity() {
        let p = StateSpace::from_tf(&[1.0], &[1.0, 3.0, 2.0]).unwrap();
        let cfg = LoopConfig::new(
            StateSpace::gain(2.0),
            make_gfore(1.0, 1.0).unwrap(),
            make_pid(5.0, 0.5, 2.0, 2.0).unwrap(),
            p,
            0.0,
        )
        .unwrap();
        let m = cfg.model().unwrap();
        let s = cfg.bls_sensitivity().unwrap();
        let e_r = m.channel(IN_R, SIG_E).unwrap();
        for &w in &[0.3, 3.0, 30.0] {
            let a = e_r.eval(w).unwrap();
            let b = s.s.eval(w).unwrap();
            assert!((a - b).norm() / b.norm() < 1e-10);
            // y = T r
            let y = m.channel(IN_R, SIG_Y).unwrap().eval(w).unwrap();
            assert!((y - s.t.eval(w).unwrap()).norm() < 1e-10);
            // e from d is -S P
            let ed = m.channel(IN_D, SIG_E).unwrap().eval(w).unwrap();
            let expected = -b * cfg.plant().eval(w).unwrap();
            assert!((ed - expected).norm() / expected.norm() < 1e-10);
        }
    }

    #[test]
    fn algebraic_loop_rejected() {
        let r = ResetController::linear(StateSpace::gain(1.0)).unwrap();
        let err = LoopConfig::new(
            StateSpace::gain(1.0),
            r,
            StateSpace::gain(1.0),
            StateSpace::gain(-1.0),
            0.0,
        );
        assert!(matches!(err, Err(Error::AlgebraicLoop(_))));
    }

    #[test]
    fn flat_loop_has_no_crossover() {
        let r = ResetController::linear(StateSpace::gain(1.0)).unwrap();
        let cfg = LoopConfig::new(
            StateSpace::gain(1.0),
            r,
            StateSpace::gain(1.0),
            StateSpace::gain(1.0),
            0.0,
        )
        .unwrap();
        assert!(matches!(phase_margin_bls(&cfg), Err(Error::NoCrossover { .. })));
    }

    #[test]
    fn wrap_degrees() {
        assert_relative_eq!(wrap_deg(350.0), -10.0);
        assert_relative_eq!(wrap_deg(30.0), 30.0);
        assert_relative_eq!(wrap_deg(-180.0), 180.0);
    }
}
