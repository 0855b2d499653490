//! Open-loop harmonic descriptions of reset elements.
//!
//! Spectra follow the sine convention: a spectrum `{X_n}` describes the
//! periodic signal `Σ_n |X_n| sin(nωt + ∠X_n)`.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::lti::{self, expm, StateSpace};
use crate::reset::{LoopConfig, ResetController};

/// Default number of harmonics.
pub const DEFAULT_N_MAX: usize = 1000;

const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Base frequency plus complex amplitudes of harmonics `1..=n_max`.
#[derive(Debug, Clone, PartialEq)]
pub struct HarmonicSpectrum {
    omega: f64,
    entries: Vec<Complex64>,
}

impl HarmonicSpectrum {
    pub fn new(omega: f64, entries: Vec<Complex64>) -> Result<Self> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(Error::InvalidParameter(format!("base frequency {omega} must be positive")));
        }
        Ok(Self { omega, entries })
    }

    pub fn zeros(omega: f64, n_max: usize) -> Result<Self> {
        Self::new(omega, vec![Complex64::new(0.0, 0.0); n_max])
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn n_max(&self) -> usize {
        self.entries.len()
    }

    /// Amplitude of harmonic `n`; zero outside `1..=n_max`.
    pub fn get(&self, n: usize) -> Complex64 {
        if n == 0 || n > self.entries.len() {
            Complex64::new(0.0, 0.0)
        } else {
            self.entries[n - 1]
        }
    }

    pub fn set(&mut self, n: usize, value: Complex64) {
        assert!(n >= 1 && n <= self.entries.len(), "harmonic {n} out of range");
        self.entries[n - 1] = value;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.entries
    }

    /// `(n, X_n)` pairs.
    pub fn iter(&self) -> impl Iterator<Item = (usize, Complex64)> + '_ {
        self.entries.iter().enumerate().map(|(i, v)| (i + 1, *v))
    }

    /// Signal value at time `t`.
    pub fn evaluate(&self, t: f64) -> f64 {
        self.iter()
            .map(|(n, x)| (x * Complex64::from_polar(1.0, n as f64 * self.omega * t)).im)
            .sum()
    }

    /// Signal values on a time grid.
    pub fn time_reconstruct(&self, times: &[f64]) -> Vec<f64> {
        times.iter().map(|&t| self.evaluate(t)).collect()
    }
}

/// Matrices entering the reset-induced harmonic term.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaParts {
    pub theta_d: DMatrix<f64>,
    pub gamma_r: DMatrix<f64>,
    pub lambda: DMatrix<f64>,
    pub delta: DMatrix<f64>,
    pub delta_r: DMatrix<f64>,
}

fn check_omega(omega: f64) -> Result<()> {
    if !(omega > 0.0) || !omega.is_finite() {
        return Err(Error::InvalidParameter(format!("frequency {omega} rad/s must be positive")));
    }
    Ok(())
}

/// `θ_D(ω) = -(2ω²/π) Δ (Γ_R - Λ⁻¹)` and its building blocks.
pub fn theta_d(r: &ResetController, omega: f64) -> Result<ThetaParts> {
    check_omega(omega)?;
    let a = r.base().a();
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let a_rho = r.reset_matrix();
    let e = expm(a, PI / omega)?;
    let lambda = &id * (omega * omega) + a * a;
    let delta = &id + &e;
    let delta_r = &id + &a_rho * &e;
    let lambda_inv = lti::checked_inverse(&lambda, "Λ = ω²I + A_R²", omega)?;
    let delta_r_inv = lti::checked_inverse(&delta_r, "Δ_R = I + A_ρ e^{A_R π/ω}", omega)?;
    let gamma_r = &delta_r_inv * &a_rho * &delta * &lambda_inv;
    let theta_d = -(2.0 * omega * omega / PI) * &delta * (&gamma_r - &lambda_inv);
    Ok(ThetaParts {
        theta_d,
        gamma_r,
        lambda,
        delta,
        delta_r,
    })
}

fn real_to_c(m: &DMatrix<f64>) -> DMatrix<Complex64> {
    m.map(|v| Complex64::new(v, 0.0))
}

fn col_c(v: &DVector<f64>) -> DMatrix<Complex64> {
    DMatrix::from_iterator(v.len(), 1, v.iter().map(|x| Complex64::new(*x, 0.0)))
}

/// `C (jnωI - A)⁻¹ v` for a complex column `v`.
fn c_resolvent(base: &StateSpace, omega_n: f64, v: &DMatrix<Complex64>) -> Result<Complex64> {
    if base.order() == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let x = lti::resolvent_solve(base.a(), omega_n, v, "resolvent jnωI - A_R")?;
    Ok((real_to_c(base.c()) * x)[(0, 0)])
}

fn hosidf_from_theta(r: &ResetController, theta: &DMatrix<f64>, omega: f64, n: usize) -> Result<Complex64> {
    let base = r.base();
    if n == 0 {
        return Err(Error::InvalidParameter("harmonic index must be at least 1".into()));
    }
    if n % 2 == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let b = real_to_c(base.b());
    let jtb = real_to_c(theta).map(|v| v * J) * &b;
    if n == 1 {
        let v = &b + jtb;
        Ok(c_resolvent(base, omega, &v)? + base.feedthrough())
    } else {
        c_resolvent(base, n as f64 * omega, &jtb)
    }
}

/// `n`-th order HOSIDF `R_DF,n(ω)`; `n = 1` is the describing function.
pub fn hosidf(r: &ResetController, omega: f64, n: usize) -> Result<Complex64> {
    r.require_ol_stable()?;
    hosidf_unchecked(r, omega, n)
}

pub(crate) fn hosidf_unchecked(r: &ResetController, omega: f64, n: usize) -> Result<Complex64> {
    let th = theta_d(r, omega)?;
    hosidf_from_theta(r, &th.theta_d, omega, n)
}

/// HOSIDF for harmonics `1..=n_max`.
pub fn hosidf_spectrum(r: &ResetController, omega: f64, n_max: usize) -> Result<HarmonicSpectrum> {
    r.require_ol_stable()?;
    hosidf_spectrum_unchecked(r, omega, n_max)
}

pub(crate) fn hosidf_spectrum_unchecked(r: &ResetController, omega: f64, n_max: usize) -> Result<HarmonicSpectrum> {
    let th = theta_d(r, omega)?;
    let entries = (1..=n_max)
        .map(|n| hosidf_from_theta(r, &th.theta_d, omega, n))
        .collect::<Result<Vec<_>>>()?;
    HarmonicSpectrum::new(omega, entries)
}

fn impulse_from_theta(
    r: &ResetController,
    theta: &DMatrix<f64>,
    omega: f64,
    n: usize,
    b_star: &DVector<f64>,
) -> Result<Complex64> {
    if n == 0 {
        return Err(Error::InvalidParameter("harmonic index must be at least 1".into()));
    }
    if b_star.len() != r.order() {
        return Err(Error::Dimension(format!(
            "B★ has {} entries, reset element has {} states",
            b_star.len(),
            r.order()
        )));
    }
    if n % 2 == 0 {
        return Ok(Complex64::new(0.0, 0.0));
    }
    let v = col_c(&(theta * b_star)).map(|x| x * J);
    c_resolvent(r.base(), n as f64 * omega, &v)
}

/// Impulse HOSIDF `R★_n = C_R (jnωI - A_R)⁻¹ jθ_D(ω) B★`.
pub fn impulse_hosidf(r: &ResetController, omega: f64, n: usize, b_star: &DVector<f64>) -> Result<Complex64> {
    r.require_ol_stable()?;
    let th = theta_d(r, omega)?;
    impulse_from_theta(r, &th.theta_d, omega, n, b_star)
}

/// Impulse HOSIDF for harmonics `1..=n_max`.
pub fn impulse_hosidf_spectrum(
    r: &ResetController,
    omega: f64,
    n_max: usize,
    b_star: &DVector<f64>,
) -> Result<HarmonicSpectrum> {
    r.require_ol_stable()?;
    impulse_hosidf_spectrum_unchecked(r, omega, n_max, b_star)
}

pub(crate) fn impulse_hosidf_spectrum_unchecked(
    r: &ResetController,
    omega: f64,
    n_max: usize,
    b_star: &DVector<f64>,
) -> Result<HarmonicSpectrum> {
    let th = theta_d(r, omega)?;
    let entries = (1..=n_max)
        .map(|n| impulse_from_theta(r, &th.theta_d, omega, n, b_star))
        .collect::<Result<Vec<_>>>()?;
    HarmonicSpectrum::new(omega, entries)
}

/// `M = I - (I + E A_ρ)⁻¹ E (A_ρ - I)` with `E = e^{A_R π/ω}`.
fn state_map(r: &ResetController, omega: f64) -> Result<DMatrix<f64>> {
    let n = r.order();
    let id = DMatrix::<f64>::identity(n, n);
    let e = expm(r.base().a(), PI / omega)?;
    let inner = lti::checked_inverse(&(&id + &e * r.reset_matrix()), "I + e^{A_R π/ω} A_ρ", omega)?;
    Ok(&id - inner * &e * r.jump_matrix())
}

fn ol_states_with_input(r: &ResetController, omega: f64, b: &DVector<f64>, q0: f64) -> Result<DVector<f64>> {
    check_omega(omega)?;
    let (with_j, _) = lti::real_resolvent_parts(r.base().a(), omega)?;
    let m = state_map(r, omega)?;
    Ok(m * with_j * b * q0)
}

/// Reset-element state just before a descending zero crossing of the
/// steady-state response to `q(t) = q₀ sin(ωt)`.
pub fn ol_reset_states(r: &ResetController, omega: f64, q0: f64) -> Result<DVector<f64>> {
    r.require_ol_stable()?;
    let b = DVector::from_column_slice(r.base().b().as_slice());
    ol_states_with_input(r, omega, &b, q0)
}

/// `ζ(ω) = (Λ/ω) M⁻¹`, mapping a reset state to the virtual input matrix
/// that produces it under unit sinusoidal excitation.
pub fn zeta(r: &ResetController, omega: f64) -> Result<DMatrix<f64>> {
    check_omega(omega)?;
    let a = r.base().a();
    let n = a.nrows();
    let lambda = DMatrix::<f64>::identity(n, n) * (omega * omega) + a * a;
    let m_inv = lti::checked_inverse(&state_map(r, omega)?, "ζ state map", omega)?;
    Ok(lambda / omega * m_inv)
}

/// Virtual input matrix `B★ = ζ(ω) x`.
pub fn b_star(r: &ResetController, omega: f64, x: &DVector<f64>) -> Result<DVector<f64>> {
    if x.len() != r.order() {
        return Err(Error::Dimension(format!(
            "state has {} entries, reset element has {} states",
            x.len(),
            r.order()
        )));
    }
    Ok(zeta(r, omega)? * x)
}

/// Round trip of [`b_star`]: open-loop reset state for input matrix `b`
/// and unit excitation.
pub fn ol_reset_states_for_input(r: &ResetController, omega: f64, b: &DVector<f64>) -> Result<DVector<f64>> {
    ol_states_with_input(r, omega, b, 1.0)
}

/// DF-approximated sensitivity `(1 + G R_DF,1 K)⁻¹` at `ω`.
pub fn df_sensitivity(cfg: &LoopConfig, omega: f64) -> Result<Complex64> {
    check_omega(omega)?;
    let den = 1.0 + cfg.df_loop(omega)?;
    if den.norm() < 1e-12 {
        return Err(Error::Singular {
            what: "1 + G R_DF,1 K",
            omega,
            condition: f64::INFINITY,
        });
    }
    Ok(1.0 / den)
}

/// Cap on alternating series terms.
pub const SERIES_MAX_TERMS: usize = 100_000;

/// Periodic response of `r_delta` (inputs: reset state) to the impulse
/// train that applies `+x` at `t_r + 2kπ/ω` and `-x` at `t_r + (2k+1)π/ω`,
/// evaluated at `times`.
pub fn xi_response(r_delta: &StateSpace, omega: f64, t_r: f64, x: &DVector<f64>, times: &[f64]) -> Result<Vec<f64>> {
    check_omega(omega)?;
    if x.len() != r_delta.inputs() || r_delta.outputs() != 1 {
        return Err(Error::Dimension("xi_response needs a single-output R_δ matching x".into()));
    }
    let half = PI / omega;
    let n = r_delta.order();
    let tail = lti::alternating_exp_sum(r_delta.a(), half, SERIES_MAX_TERMS)?;
    let comb = DMatrix::<f64>::identity(n, n) + tail;
    let drive = comb * r_delta.b() * x;
    times
        .iter()
        .map(|&t| {
            let rel = t - t_r;
            let m = (rel / half).floor();
            let s = rel - m * half;
            let sign = if (m as i64).rem_euclid(2) == 0 { 1.0 } else { -1.0 };
            Ok(sign * (r_delta.c() * expm(r_delta.a(), s)? * &drive)[(0, 0)])
        })
        .collect()
}

/// Harmonic spectrum of [`xi_response`]:
/// `X_n = (2jω/π) R_δ(jnω) x e^{-jnωt_r}` for odd `n`.
pub fn xi_harmonics(
    r_delta: &StateSpace,
    omega: f64,
    t_r: f64,
    x: &DVector<f64>,
    n_max: usize,
) -> Result<HarmonicSpectrum> {
    check_omega(omega)?;
    let mut spec = HarmonicSpectrum::zeros(omega, n_max)?;
    let xc = col_c(x);
    for n in (1..=n_max).step_by(2) {
        let w = n as f64 * omega;
        let h = r_delta.freq_response(w)? * &xc;
        let v = 2.0 * J * omega / PI * h[(0, 0)] * Complex64::from_polar(1.0, -w * t_r);
        spec.set(n, v);
    }
    Ok(spec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reset::{hz, make_gci, make_gfore, make_gfore_rad};
    use approx::assert_relative_eq;

    #[test]
    fn theta_linear_is_zero() {
        let r = make_gfore(3.0, 1.0).unwrap();
        let th = theta_d(&r, 5.0).unwrap();
        assert!(th.theta_d.norm() < 1e-14);
    }

    #[test]
    fn theta_gci_full_reset() {
        let r = make_gci(0.0).unwrap();
        for &w in &[0.5, 10.0, 600.0] {
            let th = theta_d(&r, w).unwrap();
            assert_relative_eq!(th.theta_d[(0, 0)], 4.0 / PI, max_relative = 1e-13);
        }
    }

    #[test]
    fn theta_gfore_matches_scalar_formula() {
        let wr = 7.0;
        let r = make_gfore_rad(wr, 0.0).unwrap();
        let w = wr;
        let th = theta_d(&r, w).unwrap();
        let e = (-wr * PI / w).exp();
        let lam = w * w + wr * wr;
        let delta = 1.0 + e;
        let expected = -(2.0 * w * w / PI) * delta * (0.0 - 1.0 / lam);
        assert_relative_eq!(th.theta_d[(0, 0)], expected, max_relative = 1e-13);
    }

    #[test]
    fn gci_describing_function() {
        let r = make_gci(0.0).unwrap();
        let w = 3.0;
        let df = hosidf(&r, w, 1).unwrap();
        let expected = Complex64::new(1.0, 4.0 / PI) / Complex64::new(0.0, w);
        assert!((df - expected).norm() < 1e-14);
        assert_relative_eq!(df.arg().to_degrees(), -38.1458, epsilon = 1e-3);
        assert_eq!(hosidf(&r, w, 2).unwrap(), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn linear_hosidf_equals_base() {
        let r = make_gfore(2.0, 1.0).unwrap();
        let w = hz(3.0);
        let df = hosidf(&r, w, 1).unwrap();
        assert!((df - r.base().eval(w).unwrap()).norm() < 1e-14);
        assert_eq!(hosidf(&r, w, 3).unwrap().norm(), 0.0);
    }

    #[test]
    fn hosidf_requires_ol_stability() {
        let r = make_gci(-1.0).unwrap();
        assert!(matches!(hosidf(&r, 1.0, 1), Err(Error::OpenLoopUnstable { .. })));
        let lin = make_gci(1.0).unwrap();
        assert!((hosidf(&lin, 1.0, 1).unwrap() - Complex64::new(0.0, -1.0)).norm() < 1e-14);
    }

    #[test]
    fn impulse_hosidf_trivial_cases() {
        let r = make_gfore(2.0, 0.3).unwrap();
        let zero = DVector::zeros(1);
        assert_eq!(impulse_hosidf(&r, 5.0, 3, &zero).unwrap().norm(), 0.0);
        let lin = make_gfore(2.0, 1.0).unwrap();
        let b = DVector::from_element(1, 1.0);
        assert!(impulse_hosidf(&lin, 5.0, 3, &b).unwrap().norm() < 1e-15);
    }

    #[test]
    fn ol_states_linear_and_zero() {
        let r = make_gfore(2.0, 1.0).unwrap();
        let w = 4.0;
        let x = ol_reset_states(&r, w, 1.5).unwrap();
        let wr = hz(2.0);
        assert_relative_eq!(x[0], w * wr / (w * w + wr * wr) * 1.5, max_relative = 1e-13);
        let r = make_gfore(2.0, 0.0).unwrap();
        assert_eq!(ol_reset_states(&r, w, 0.0).unwrap()[0], 0.0);
    }

    #[test]
    fn gci_full_reset_state() {
        // sin input, reset at descending crossings: x(t) = (1 - cos ωt)/ω, so x = 2/ω
        let r = make_gci(0.0).unwrap();
        let x = ol_reset_states(&r, 2.0, 1.0).unwrap();
        assert_relative_eq!(x[0], 1.0, max_relative = 1e-13);
    }

    #[test]
    fn b_star_round_trip_and_linearity() {
        let r = make_gfore(3.0, 0.2).unwrap();
        let w = hz(5.0);
        let x = ol_reset_states(&r, w, 1.0).unwrap();
        let bs = b_star(&r, w, &x).unwrap();
        let back = ol_reset_states_for_input(&r, w, &bs).unwrap();
        assert_relative_eq!(back, x, max_relative = 1e-10);
        let bs2 = b_star(&r, w, &(&x * 2.0)).unwrap();
        assert_relative_eq!(bs2, &bs * 2.0, max_relative = 1e-14);
        assert_eq!(b_star(&r, w, &DVector::zeros(1)).unwrap().norm(), 0.0);
        // with B★ = B_R the virtual state is the true one
        let b = DVector::from_column_slice(r.base().b().as_slice());
        assert_relative_eq!(b_star(&r, w, &x).unwrap(), b, max_relative = 1e-10);
    }

    #[test]
    fn spectrum_evaluation() {
        let s = HarmonicSpectrum::new(2.0, vec![Complex64::new(1.0, 0.0)]).unwrap();
        assert_relative_eq!(s.evaluate(0.3), (0.6f64).sin(), epsilon = 1e-15);
        assert!(HarmonicSpectrum::new(0.0, vec![]).is_err());
        assert_eq!(s.get(5), Complex64::new(0.0, 0.0));
    }

    fn r_delta_scalar(a: f64, jump: f64) -> StateSpace {
        StateSpace::new(
            DMatrix::from_element(1, 1, a),
            DMatrix::from_element(1, 1, jump),
            DMatrix::from_element(1, 1, 1.0),
            DMatrix::zeros(1, 1),
        )
        .unwrap()
    }

    #[test]
    fn xi_matches_brute_force_train() {
        let rd = r_delta_scalar(-3.0, -1.0);
        let w = 2.0;
        let half = PI / w;
        let t_r = 0.4;
        let x = DVector::from_element(1, 0.7);
        let times: Vec<f64> = (0..25).map(|i| i as f64 * 0.13).collect();
        let got = xi_response(&rd, w, t_r, &x, &times).unwrap();
        for (t, g) in times.iter().zip(got) {
            let mut sum = 0.0;
            // impulses at t_r + k half for k from far in the past
            let kmax = ((t - t_r) / half).floor() as i64;
            for k in (kmax - 10_000)..=kmax {
                let tk = t_r + k as f64 * half;
                let sign = if k.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
                sum += sign * (-1.0) * 0.7 * (-3.0 * (t - tk)).exp();
            }
            assert_relative_eq!(g, sum, max_relative = 1e-8, epsilon = 1e-14);
        }
        let neg = xi_response(&rd, w, t_r, &(-&x), &times).unwrap();
        let pos = xi_response(&rd, w, t_r, &x, &times).unwrap();
        for (a, b) in neg.iter().zip(pos) {
            assert_eq!(*a, -b);
        }
        let zero = xi_response(&rd, w, t_r, &DVector::zeros(1), &times).unwrap();
        assert!(zero.iter().all(|v| *v == 0.0));
        assert!(xi_response(&r_delta_scalar(0.5, 1.0), w, t_r, &x, &times).is_err());
    }

    #[test]
    fn xi_harmonics_reconstruct_response() {
        let rd = r_delta_scalar(-30.0, -1.0);
        let w = 5.0;
        let t_r = 0.1;
        let x = DVector::from_element(1, 1.0);
        let spec = xi_harmonics(&rd, w, t_r, &x, 4001).unwrap();
        // midpoints between impulses avoid the Gibbs region
        for k in 0..4 {
            let t = t_r + (k as f64 + 0.5) * PI / w;
            let direct = xi_response(&rd, w, t_r, &x, &[t]).unwrap()[0];
            assert_relative_eq!(spec.evaluate(t), direct, epsilon = 1e-3);
        }
    }
}
