//! Hybrid simulation of the reset loop.
//!
//! The closed-loop state is augmented with one undamped oscillator per
//! input component, so the flow between resets is a single matrix
//! exponential. Resets fire on sign changes of `q`, localized by bisection.

use std::collections::VecDeque;
use std::f64::consts::PI;

use log::warn;
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::harmonic::HarmonicSpectrum;
use crate::lti::{self, expm, series, StateSpace};
use crate::reset::{hz, LoopConfig, LoopModel, ResetController, IN_D, IN_R, SIG_E, SIG_Q, SIG_U, SIG_Y, SIG_Z};

/// Where an input component enters the loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Injection {
    Reference,
    PlantInput,
}

impl Injection {
    fn input_index(self) -> usize {
        match self {
            Injection::Reference => IN_R,
            Injection::PlantInput => IN_D,
        }
    }
}

/// `amplitude · sin(2π f t + phase)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignalComponent {
    pub amplitude: f64,
    pub frequency_hz: f64,
    pub phase: f64,
    pub injection: Injection,
}

/// Sum of sinusoids driving the loop.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalSpec {
    pub components: Vec<SignalComponent>,
}

impl SignalSpec {
    /// Single reference sinusoid with zero phase.
    pub fn sine(amplitude: f64, frequency_hz: f64) -> Self {
        Self {
            components: vec![SignalComponent {
                amplitude,
                frequency_hz,
                phase: 0.0,
                injection: Injection::Reference,
            }],
        }
    }

    pub fn with_component(mut self, c: SignalComponent) -> Self {
        self.components.push(c);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("input needs at least one component".into()));
        }
        for c in &self.components {
            if !(c.frequency_hz > 0.0) || !c.frequency_hz.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "component frequency {} Hz must be positive",
                    c.frequency_hz
                )));
            }
            if !c.amplitude.is_finite() || !c.phase.is_finite() {
                return Err(Error::NonFinite("input component"));
            }
        }
        self.fundamental_hz().map(|_| ())
    }

    /// Largest frequency of which every component is an integer multiple.
    pub fn fundamental_hz(&self) -> Result<f64> {
        let fmin = self
            .components
            .iter()
            .map(|c| c.frequency_hz)
            .fold(f64::INFINITY, f64::min);
        for k in 1..=1000 {
            let f0 = fmin / k as f64;
            let ok = self.components.iter().all(|c| {
                let ratio = c.frequency_hz / f0;
                (ratio - ratio.round()).abs() < 1e-9 * ratio.max(1.0)
            });
            if ok {
                return Ok(f0);
            }
        }
        Err(Error::InvalidParameter(
            "input frequencies have no common period (ratios must be rational with small denominators)".into(),
        ))
    }

    /// Input value at time `t` for the given injection point.
    pub fn value(&self, injection: Injection, t: f64) -> f64 {
        self.components
            .iter()
            .filter(|c| c.injection == injection)
            .map(|c| c.amplitude * (hz(c.frequency_hz) * t + c.phase).sin())
            .sum()
    }
}

/// Simulation settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SimOptions {
    /// Minimum grid points per fundamental period.
    pub steps_per_period: usize,
    pub max_periods: usize,
    /// Relative period-to-period change of `e` accepted as steady state.
    pub ss_tol: f64,
    /// Bisection stop width in seconds; `None` uses `1e-12` of the period.
    pub event_tol: Option<f64>,
    /// Time regularization override; `None` uses the loop's τ.
    pub tau: Option<f64>,
    /// Fraction of τ by which the window is shortened. A crossing that
    /// arrives slightly early during the transient is then not suppressed,
    /// and `τ = π/ω` settles on two resets per period.
    pub tau_slack: f64,
    /// Periods of samples kept at the end of the run.
    pub record_periods: usize,
    /// Resets allowed in a single period before the run is aborted.
    pub zeno_limit: usize,
    /// Refine the grid so that a step covers at most a tenth of the fastest
    /// closed-loop time constant.
    pub refine: bool,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            steps_per_period: 2000,
            max_periods: 200,
            ss_tol: 1e-8,
            event_tol: None,
            tau: None,
            tau_slack: TAU_SLACK,
            record_periods: 2,
            zeno_limit: 10_000,
            refine: true,
        }
    }
}

/// Fraction of the period by which the regularization window is shortened,
/// so that resets exactly one window apart are not lost to rounding.
pub const TAU_GUARD: f64 = 1e-6;

/// Default [`SimOptions::tau_slack`].
pub const TAU_SLACK: f64 = 0.05;

impl SimOptions {
    fn validate(&self, period: f64) -> Result<()> {
        if self.steps_per_period < 100 {
            return Err(Error::InvalidParameter(format!(
                "steps_per_period = {} must be at least 100",
                self.steps_per_period
            )));
        }
        if self.max_periods == 0 || self.record_periods == 0 {
            return Err(Error::InvalidParameter("max_periods and record_periods must be positive".into()));
        }
        if !(self.ss_tol > 0.0) {
            return Err(Error::InvalidParameter("ss_tol must be positive".into()));
        }
        if let Some(tol) = self.event_tol {
            if !(tol > 0.0) || tol >= period / 1e4 {
                return Err(Error::InvalidParameter(format!(
                    "event_tol = {tol} s must be positive and below period/1e4 = {}",
                    period / 1e4
                )));
            }
        }
        if !(0.0..0.5).contains(&self.tau_slack) {
            return Err(Error::InvalidParameter(format!("tau_slack = {} must be in [0, 0.5)", self.tau_slack)));
        }
        if let Some(tau) = self.tau {
            if !(tau >= 0.0) || !tau.is_finite() {
                return Err(Error::InvalidParameter(format!("tau = {tau} must be >= 0")));
            }
        }
        Ok(())
    }
}

/// One reset: reset-element state before and after the jump.
#[derive(Debug, Clone, PartialEq)]
pub struct ResetEvent {
    pub t: f64,
    pub x_pre: DVector<f64>,
    pub x_post: DVector<f64>,
    /// Closed-loop state right after the reset.
    pub state_post: DVector<f64>,
}

/// Output of [`simulate`]. Samples cover the last `record_periods`
/// periods on a uniform grid, endpoints included; `events` covers the
/// whole run.
#[derive(Debug, Clone)]
pub struct SimResult {
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    /// Closed-loop state `[x_K, x_R, x_C, x_P]` at each sample.
    pub x: Vec<DVector<f64>>,
    pub events: Vec<ResetEvent>,
    pub converged: bool,
    pub periods: usize,
    pub last_change: f64,
    /// Fundamental period in seconds.
    pub period: f64,
    pub steps_per_period: usize,
    pub step: f64,
    pub event_tol: f64,
    pub tau: f64,
    pub model: LoopModel,
    pub input: SignalSpec,
    pub reset: ResetController,
}

impl SimResult {
    /// Fundamental angular frequency.
    pub fn omega0(&self) -> f64 {
        2.0 * PI / self.period
    }

    pub fn signal(&self, which: usize) -> &[f64] {
        match which {
            SIG_E => &self.e,
            SIG_Q => &self.q,
            SIG_Z => &self.z,
            SIG_U => &self.u,
            _ => &self.y,
        }
    }

    /// Events with `t0 < t ≤ t1`.
    pub fn events_between(&self, t0: f64, t1: f64) -> impl Iterator<Item = &ResetEvent> {
        self.events.iter().filter(move |ev| ev.t > t0 && ev.t <= t1)
    }
}

/// Augmented closed loop: state `[x_cl, (sin, cos) per component]`.
struct Augmented {
    a: DMatrix<f64>,
    rows: DMatrix<f64>,
    n: usize,
    a_norm: f64,
}

fn augment(model: &LoopModel, input: &SignalSpec) -> Augmented {
    let n = model.order();
    let m = input.components.len();
    let na = n + 2 * m;
    let mut a = DMatrix::zeros(na, na);
    a.view_mut((0, 0), (n, n)).copy_from(&model.a);
    let mut rows = DMatrix::zeros(5, na);
    rows.view_mut((0, 0), (5, n)).copy_from(&model.c);
    for (i, c) in input.components.iter().enumerate() {
        let col = n + 2 * i;
        let w = hz(c.frequency_hz);
        a[(col, col + 1)] = w;
        a[(col + 1, col)] = -w;
        let j = c.injection.input_index();
        for r in 0..n {
            a[(r, col)] += model.b[(r, j)] * c.amplitude;
        }
        for r in 0..5 {
            rows[(r, col)] += model.d[(r, j)] * c.amplitude;
        }
    }
    let a_norm = (0..na)
        .map(|j| a.column(j).iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max);
    Augmented { a, rows, n, a_norm }
}

impl Augmented {
    /// `e^{A t} v` by sub-stepped Taylor series (cheap for short intervals).
    fn flow(&self, t: f64, v: &DVector<f64>) -> DVector<f64> {
        if t == 0.0 {
            return v.clone();
        }
        let sub = (self.a_norm * t).ceil().max(1.0) as usize;
        let dt = t / sub as f64;
        let mut x = v.clone();
        for _ in 0..sub {
            let mut term = x.clone();
            let mut acc = x.clone();
            for k in 1..40 {
                term = &self.a * &term * (dt / k as f64);
                acc += &term;
                if term.norm() <= 1e-17 * acc.norm() {
                    break;
                }
            }
            x = acc;
        }
        x
    }

    fn out(&self, which: usize, s: &DVector<f64>) -> f64 {
        self.rows.row(which).dot(&s.transpose())
    }
}

/// Steady-state closed-loop state of the base-linear loop at time `t`
/// (sum over components of `Im{(jωI - A)⁻¹ B a e^{j(ωt + φ)}}`).
pub(crate) fn bls_state(model: &LoopModel, input: &SignalSpec, t: f64) -> Result<DVector<f64>> {
    let n = model.order();
    let mut x = DVector::zeros(n);
    for c in &input.components {
        let w = hz(c.frequency_hz);
        let col = model
            .b
            .column(c.injection.input_index())
            .map(|v| Complex64::new(v, 0.0))
            .into_owned();
        let rhs = DMatrix::from_column_slice(n, 1, col.as_slice());
        let sol = lti::resolvent_solve(&model.a, w, &rhs, "BLS resolvent jωI - A_cl")?;
        let ph = Complex64::from_polar(c.amplitude, w * t + c.phase);
        for i in 0..n {
            x[i] += (sol[(i, 0)] * ph).im;
        }
    }
    Ok(x)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

struct PeriodBlock {
    t: Vec<f64>,
    sig: [Vec<f64>; 5],
    x: Vec<DVector<f64>>,
}

/// Simulates the reset loop until the error signal is periodic.
pub fn simulate(cfg: &LoopConfig, input: &SignalSpec, opt: &SimOptions) -> Result<SimResult> {
    input.validate()?;
    let f0 = input.fundamental_hz()?;
    let period = 1.0 / f0;
    opt.validate(period)?;
    let tau = opt.tau.unwrap_or(cfg.tau());
    let event_tol = opt.event_tol.unwrap_or(1e-12 * period);
    let model = cfg.model()?;
    let aug = augment(&model, input);
    let n = aug.n;
    let r_states = model.r_states.clone();
    let reset = cfg.reset().clone();
    let gammas = reset.gammas().clone();
    let linear = reset.is_linear();

    let mut steps = opt.steps_per_period;
    if opt.refine && n > 0 {
        let rho = lti::spectral_radius(&model.a);
        if rho > 0.0 {
            let h_max = 0.1 / rho;
            steps = steps.max((period / h_max).ceil() as usize);
        }
    }
    if steps % 2 == 1 {
        steps += 1;
    }
    let h = period / steps as f64;
    let phi_h = expm(&aug.a, h)?;

    let mut s = DVector::zeros(aug.a.nrows());
    if lti::is_hurwitz(&model.a) {
        let x0 = bls_state(&model, input, 0.0)?;
        s.rows_mut(0, n).copy_from(&x0);
    }
    for (i, c) in input.components.iter().enumerate() {
        s[n + 2 * i] = c.phase.sin();
        s[n + 2 * i + 1] = c.phase.cos();
    }
    let scale = s.norm().max(1.0);

    let mut sign_ref = sign(aug.out(SIG_Q, &s));
    let mut last_reset: Option<f64> = None;
    let guard = TAU_GUARD * period + opt.tau_slack * tau;
    let mut events: Vec<ResetEvent> = Vec::new();
    let mut blocks: VecDeque<PeriodBlock> = VecDeque::new();
    let mut prev_e: Option<Vec<f64>> = None;
    let mut converged = false;
    let mut last_change = f64::INFINITY;
    let mut periods_run = 0;
    let mut stable_periods = 0usize;

    let sample = |s: &DVector<f64>, block: &mut PeriodBlock, t: f64| {
        block.t.push(t);
        for (k, sig) in block.sig.iter_mut().enumerate() {
            sig.push(aug.out(k, s));
        }
        block.x.push(s.rows(0, n).into_owned());
    };

    for p in 0..opt.max_periods {
        let mut block = PeriodBlock {
            t: Vec::with_capacity(steps + 1),
            sig: Default::default(),
            x: Vec::with_capacity(steps + 1),
        };
        let base_step = p * steps;
        sample(&s, &mut block, base_step as f64 * h);
        let events_before = events.len();
        for k in 0..steps {
            let t0 = (base_step + k) as f64 * h;
            let t1 = (base_step + k + 1) as f64 * h;
            let mut ta = t0;
            let mut sa = s.clone();
            let mut s1 = &phi_h * &s;
            loop {
                if linear {
                    break;
                }
                let sg = sign(aug.out(SIG_Q, &s1));
                if sg == 0 || sign_ref == 0 || sg == sign_ref {
                    if sg != 0 {
                        sign_ref = sg;
                    }
                    break;
                }
                // crossing in (ta, t1]
                let (mut lo, mut hi) = (ta, t1);
                let mut s_hi = s1.clone();
                while hi - lo > event_tol {
                    let mid = 0.5 * (lo + hi);
                    let s_mid = aug.flow(mid - ta, &sa);
                    if sign(aug.out(SIG_Q, &s_mid)) == sign_ref {
                        lo = mid;
                    } else {
                        hi = mid;
                        s_hi = s_mid;
                    }
                }
                let allowed = match last_reset {
                    None => true,
                    Some(tl) => hi - tl >= tau - guard,
                };
                if !allowed {
                    sign_ref = sg;
                    break;
                }
                let x_pre = s_hi.rows(r_states.start, r_states.len()).into_owned();
                let x_post = x_pre.component_mul(&gammas);
                let mut s_post = s_hi;
                s_post.rows_mut(r_states.start, r_states.len()).copy_from(&x_post);
                events.push(ResetEvent {
                    t: hi,
                    x_pre,
                    x_post,
                    state_post: s_post.rows(0, n).into_owned(),
                });
                last_reset = Some(hi);
                if events.len() - events_before > opt.zeno_limit {
                    return Err(Error::Zeno {
                        limit: opt.zeno_limit,
                        time: hi,
                    });
                }
                sign_ref = sign(aug.out(SIG_Q, &s_post));
                ta = hi;
                s1 = aug.flow(t1 - hi, &s_post);
                sa = s_post;
            }
            s = s1;
            if !s.iter().all(|v| v.is_finite()) || s.amax() > 1e12 * scale {
                return Err(Error::Diverged { time: t1 });
            }
            sample(&s, &mut block, t1);
        }
        periods_run = p + 1;

        let e_now = &block.sig[SIG_E];
        if let Some(prev) = &prev_e {
            let peak = e_now.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
            let diff = e_now
                .iter()
                .zip(prev.iter())
                .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            last_change = diff / peak;
            if last_change < opt.ss_tol {
                stable_periods += 1;
            } else {
                stable_periods = 0;
            }
        }
        prev_e = Some(e_now.clone());
        blocks.push_back(block);
        while blocks.len() > opt.record_periods {
            blocks.pop_front();
        }
        if stable_periods >= 1 && blocks.len() == opt.record_periods {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!(
            "simulation not periodic after {} periods (last relative change {:.3e})",
            periods_run, last_change
        );
    }

    let mut res = SimResult {
        t: Vec::new(),
        e: Vec::new(),
        y: Vec::new(),
        u: Vec::new(),
        q: Vec::new(),
        z: Vec::new(),
        x: Vec::new(),
        events,
        converged,
        periods: periods_run,
        last_change,
        period,
        steps_per_period: steps,
        step: h,
        event_tol,
        tau,
        model,
        input: input.clone(),
        reset,
    };
    for (i, b) in blocks.into_iter().enumerate() {
        // consecutive blocks share their boundary sample
        let skip = usize::from(i > 0);
        res.t.extend_from_slice(&b.t[skip..]);
        res.e.extend_from_slice(&b.sig[SIG_E][skip..]);
        res.q.extend_from_slice(&b.sig[SIG_Q][skip..]);
        res.z.extend_from_slice(&b.sig[SIG_Z][skip..]);
        res.u.extend_from_slice(&b.sig[SIG_U][skip..]);
        res.y.extend_from_slice(&b.sig[SIG_Y][skip..]);
        res.x.extend(b.x.into_iter().skip(skip));
    }
    Ok(res)
}

/// Final periods of a simulation, re-based so that the slice starts at 0.
#[derive(Debug, Clone)]
pub struct SteadyState {
    /// Absolute start time of the slice.
    pub t0: f64,
    pub t: Vec<f64>,
    pub e: Vec<f64>,
    pub y: Vec<f64>,
    pub u: Vec<f64>,
    pub q: Vec<f64>,
    pub z: Vec<f64>,
    pub x: Vec<DVector<f64>>,
}

/// Last full period `2π/ω` of a converged simulation (endpoints included).
pub fn steady_state(res: &SimResult, omega: f64) -> Result<SteadyState> {
    steady_state_periods(res, omega, 1)
}

/// Last `count` periods `2π/ω` of a converged simulation.
pub fn steady_state_periods(res: &SimResult, omega: f64, count: usize) -> Result<SteadyState> {
    if !res.converged {
        return Err(Error::NotConverged {
            periods: res.periods,
            last_change: res.last_change,
        });
    }
    if !(omega > 0.0) {
        return Err(Error::InvalidParameter("frequency must be positive".into()));
    }
    let span = 2.0 * PI / omega;
    let steps_f = span / res.step;
    let steps = steps_f.round();
    if (steps_f - steps).abs() > 1e-6 || steps < 1.0 {
        return Err(Error::InvalidParameter(format!(
            "period 2π/ω = {span} s is not a multiple of the simulation step {}",
            res.step
        )));
    }
    let len = steps as usize * count + 1;
    if len > res.t.len() || count == 0 {
        return Err(Error::InvalidParameter(format!(
            "requested {count} period(s) but only {} samples are recorded",
            res.t.len()
        )));
    }
    let start = res.t.len() - len;
    let t0 = res.t[start];
    Ok(SteadyState {
        t0,
        t: res.t[start..].iter().map(|t| t - t0).collect(),
        e: res.e[start..].to_vec(),
        y: res.y[start..].to_vec(),
        u: res.u[start..].to_vec(),
        q: res.q[start..].to_vec(),
        z: res.z[start..].to_vec(),
        x: res.x[start..].to_vec(),
    })
}

/// Exact Fourier coefficients of a loop signal over the final fundamental
/// period, computed segment by segment from the piecewise-exponential flow.
pub fn fourier_spectrum(res: &SimResult, which: usize, n_max: usize) -> Result<HarmonicSpectrum> {
    if !res.converged {
        return Err(Error::NotConverged {
            periods: res.periods,
            last_change: res.last_change,
        });
    }
    let w0 = res.omega0();
    let period = res.period;
    let model = &res.model;
    let n = model.order();
    let len = res.steps_per_period + 1;
    let start = res.t.len() - len;
    let ts = res.t[start];
    let te = res.t[res.t.len() - 1];

    let mut spec = HarmonicSpectrum::zeros(w0, n_max)?;
    // base-linear periodic part
    let f0 = 1.0 / period;
    for c in &res.input.components {
        let k = (c.frequency_hz / f0).round() as usize;
        if k >= 1 && k <= n_max {
            let h = model.channel(c.injection.input_index(), which)?.eval(hz(c.frequency_hz))?;
            let v = spec.get(k) + h * Complex64::from_polar(c.amplitude, c.phase);
            spec.set(k, v);
        }
    }
    if n == 0 {
        return Ok(spec);
    }

    // transient parts x - x_ss on each inter-reset segment
    let mut bounds = vec![(ts, res.x[start].clone())];
    for ev in res.events_between(ts, te) {
        bounds.push((ev.t, ev.state_post.clone()));
    }
    bounds.push((te, DVector::zeros(0)));

    let c_row = model.c.row(which).transpose();
    for seg in bounds.windows(2) {
        let (a, ref xa) = seg[0];
        let b = seg[1].0;
        let dur = b - a;
        if dur <= 0.0 {
            continue;
        }
        let v = xa - bls_state(model, &res.input, a)?;
        let e_h = expm(&model.a, dur)?;
        for k in 1..=n_max {
            let wk = k as f64 * w0;
            let rot = Complex64::from_polar(1.0, -wk * dur);
            let mut m = model.a.map(|x| Complex64::new(x, 0.0));
            for i in 0..n {
                m[(i, i)] -= Complex64::new(0.0, wk);
            }
            let rhs = (e_h.map(|x| Complex64::new(x, 0.0)) * rot - DMatrix::identity(n, n)) * v.map(|x| Complex64::new(x, 0.0));
            let y = m
                .lu()
                .solve(&rhs)
                .ok_or(Error::Singular {
                    what: "A_cl - jnωI",
                    omega: wk,
                    condition: f64::INFINITY,
                })?;
            let integral: Complex64 = c_row.iter().zip(y.iter()).map(|(c, y)| y * *c).sum();
            let cn = integral * Complex64::from_polar(1.0 / period, -wk * a);
            let v_old = spec.get(k);
            spec.set(k, v_old + 2.0 * Complex64::new(0.0, 1.0) * cn);
        }
    }
    Ok(spec)
}

/// Closed-loop Fourier spectrum of `e` for a unit reference sinusoid at
/// `omega` (rad/s), from a converged simulation.
pub fn cl_fr(cfg: &LoopConfig, omega: f64, n_max: usize, opt: &SimOptions) -> Result<HarmonicSpectrum> {
    let res = simulate(cfg, &SignalSpec::sine(1.0, omega / (2.0 * PI)), opt)?;
    fourier_spectrum(&res, SIG_E, n_max)
}

/// Fourier coefficients of uniformly sampled periodic data via FFT.
///
/// `samples` covers one period starting at absolute time `t0`, without the
/// closing endpoint.
pub fn sampled_harmonics(samples: &[f64], t0: f64, omega: f64, n_max: usize) -> Result<HarmonicSpectrum> {
    let len = samples.len();
    if len < 2 * n_max + 1 {
        return Err(Error::InvalidParameter(format!(
            "{len} samples cannot resolve {n_max} harmonics"
        )));
    }
    let mut buf: Vec<Complex64> = samples.iter().map(|v| Complex64::new(*v, 0.0)).collect();
    let fft = FftPlanner::new().plan_fft_forward(len);
    fft.process(&mut buf);
    let entries = (1..=n_max)
        .map(|k| {
            let cn = buf[k] / len as f64 * Complex64::from_polar(1.0, -(k as f64) * omega * t0);
            2.0 * Complex64::new(0.0, 1.0) * cn
        })
        .collect();
    HarmonicSpectrum::new(omega, entries)
}

/// Error signal rebuilt from the base-linear response plus one impulse
/// response of `-S_L G R_δ` per reset event, using an independent
/// realization of the loop.
pub fn reconstruct_error(cfg: &LoopConfig, events: &[ResetEvent], input: &SignalSpec, times: &[f64]) -> Result<Vec<f64>> {
    input.validate()?;
    let r = cfg.reset();
    let sens = cfg.bls_sensitivity()?;
    let p = cfg.plant();
    let g = cfg.g()?;
    let r_delta = StateSpace::new(
        r.base().a().clone(),
        r.jump_matrix(),
        r.base().c().clone(),
        DMatrix::zeros(1, r.order()),
    )?;
    let h = series(&series(&r_delta, &g)?, &sens.s)?.scaled(-1.0);

    let mut gains = Vec::new();
    for c in &input.components {
        let w = hz(c.frequency_hz);
        let s = sens.s.eval(w)?;
        let gain = match c.injection {
            Injection::Reference => s,
            Injection::PlantInput => -s * p.eval(w)?,
        };
        gains.push((w, gain * Complex64::from_polar(c.amplitude, c.phase)));
    }

    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|a, b| times[*a].total_cmp(&times[*b]));
    let mut evs: Vec<&ResetEvent> = events.iter().collect();
    evs.sort_by(|a, b| a.t.total_cmp(&b.t));

    let nh = h.order();
    let mut state = DVector::zeros(nh);
    let mut t_state = 0.0;
    let mut cache: Option<(f64, DMatrix<f64>)> = None;
    let mut advance = |state: &DVector<f64>, dt: f64| -> Result<DVector<f64>> {
        if dt == 0.0 {
            return Ok(state.clone());
        }
        if let Some((d, m)) = &cache {
            if *d == dt {
                return Ok(m * state);
            }
        }
        let m = expm(h.a(), dt)?;
        let out = &m * state;
        cache = Some((dt, m));
        Ok(out)
    };
    let mut out = vec![0.0; times.len()];
    let mut ei = 0;
    for idx in order {
        let t = times[idx];
        while ei < evs.len() && evs[ei].t <= t {
            state = advance(&state, evs[ei].t - t_state)?;
            t_state = evs[ei].t;
            state += h.b() * &evs[ei].x_pre;
            ei += 1;
        }
        state = advance(&state, t - t_state)?;
        t_state = t;
        let imp = (h.c() * &state)[(0, 0)];
        let bls: f64 = gains
            .iter()
            .map(|(w, g)| (g * Complex64::from_polar(1.0, w * t)).im)
            .sum();
        out[idx] = bls + imp;
    }
    Ok(out)
}

/// Role of a reset within its half period.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResetClass {
    /// First reset of the half period (the one the analytic methods model).
    Modelled,
    /// Follows the previous reset within the consecutive threshold.
    Consecutive,
    /// Any other unmodelled reset.
    Additional,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifiedEvent {
    pub t: f64,
    pub class: ResetClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsecutiveReport {
    pub events: Vec<ClassifiedEvent>,
    pub modelled: usize,
    pub consecutive: usize,
    pub additional: usize,
    /// `A_ρ² = A_ρ`: a consecutive pair acts like one modelled reset.
    pub idempotent_reset: bool,
    /// Consecutive pairs exist and they change the effective reset matrix.
    pub effective_reset_error: bool,
}

/// Default consecutive threshold as a fraction of `π/ω`.
pub const CONSECUTIVE_FRACTION: f64 = 0.1;

/// Classifies the resets of the final period of `res` at frequency `omega`.
pub fn consecutive_reset_report(res: &SimResult, omega: f64, fraction: f64) -> Result<ConsecutiveReport> {
    let half = PI / omega;
    let span = 2.0 * half;
    let t_end = *res.t.last().ok_or(Error::InvalidParameter("empty simulation".into()))?;
    let t_start = t_end - span;
    let times: Vec<f64> = res.events_between(t_start, t_end).map(|e| e.t).collect();
    let a_rho = res.reset.reset_matrix();
    let idempotent = (&a_rho * &a_rho - &a_rho).amax() == 0.0;
    if times.is_empty() {
        return Ok(ConsecutiveReport {
            events: Vec::new(),
            modelled: 0,
            consecutive: 0,
            additional: 0,
            idempotent_reset: idempotent,
            effective_reset_error: false,
        });
    }
    // anchor: the reset preceded by the largest (cyclic) gap
    let m = times.len();
    let mut anchor = 0;
    let mut best = f64::NEG_INFINITY;
    for i in 0..m {
        let gap = if i == 0 { times[0] + span - times[m - 1] } else { times[i] - times[i - 1] };
        if gap > best {
            best = gap;
            anchor = i;
        }
    }
    let t_a = times[anchor];
    let slack = 1e-9 * span;
    let mut cyc: Vec<f64> = (0..m).map(|k| times[(anchor + k) % m]).collect();
    for v in cyc.iter_mut() {
        if *v < t_a {
            *v += span;
        }
    }
    let mut out = Vec::with_capacity(m);
    let (mut nm, mut nc, mut na) = (0, 0, 0);
    let mut window = usize::MAX;
    let mut prev = f64::NEG_INFINITY;
    for &t in &cyc {
        let w = ((t - t_a + slack) / half).floor() as usize;
        let class = if w != window {
            window = w;
            nm += 1;
            ResetClass::Modelled
        } else if t - prev < fraction * half {
            nc += 1;
            ResetClass::Consecutive
        } else {
            na += 1;
            ResetClass::Additional
        };
        prev = t;
        let t_abs = if t >= t_end + slack { t - span } else { t };
        out.push(ClassifiedEvent { t: t_abs, class });
    }
    out.sort_by(|a, b| a.t.total_cmp(&b.t));
    Ok(ConsecutiveReport {
        events: out,
        modelled: nm,
        consecutive: nc,
        additional: na,
        idempotent_reset: idempotent,
        effective_reset_error: nc > 0 && !idempotent,
    })
}

/// Loop that exposes a reset element to its input directly: `K = 1` and
/// `G = 0`, so `q = r` and `z` is the open-loop output.
pub fn open_loop_config(r: &ResetController) -> Result<LoopConfig> {
    LoopConfig::new(
        StateSpace::gain(1.0),
        r.clone(),
        StateSpace::gain(0.0),
        StateSpace::gain(0.0),
        0.0,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harmonic;
    use crate::reset::{make_gci, make_gfore, make_gfore_rad};
    use approx::assert_relative_eq;

    fn fore_example() -> LoopConfig {
        LoopConfig::new(
            StateSpace::gain(100.0),
            make_gfore_rad(25.0, 0.0).unwrap(),
            StateSpace::gain(1.0),
            StateSpace::gain(1.0),
            0.0,
        )
        .unwrap()
    }

    #[test]
    fn linear_loop_has_no_events() {
        let p = StateSpace::from_tf(&[1.0], &[1.0, 2.0]).unwrap();
        let cfg = LoopConfig::new(
            StateSpace::gain(1.0),
            make_gfore(1.0, 1.0).unwrap(),
            StateSpace::gain(3.0),
            p,
            0.0,
        )
        .unwrap();
        let input = SignalSpec::sine(1.0, 2.0);
        let res = simulate(&cfg, &input, &SimOptions::default()).unwrap();
        assert!(res.converged);
        assert!(res.events.is_empty());
        let s = cfg.bls_sensitivity().unwrap().s.eval(hz(2.0)).unwrap();
        for (t, e) in res.t.iter().zip(&res.e) {
            let expected = (s * Complex64::from_polar(1.0, hz(2.0) * t)).im;
            assert!((e - expected).abs() < 1e-8 * s.norm());
        }
        let spec = fourier_spectrum(&res, SIG_E, 5).unwrap();
        assert!((spec.get(1) - s).norm() < 1e-10);
        assert!(spec.get(3).norm() < 1e-10);
    }

    #[test]
    fn open_loop_gci_reset_state() {
        let r = make_gci(0.0).unwrap();
        let cfg = open_loop_config(&r).unwrap();
        let f = 3.0;
        let res = simulate(&cfg, &SignalSpec::sine(1.0, f), &SimOptions::default()).unwrap();
        assert!(res.converged);
        let x = harmonic::ol_reset_states(&r, hz(f), 1.0).unwrap();
        let last = res.events.last().unwrap();
        assert_relative_eq!(last.x_pre[0].abs(), x[0], max_relative = 1e-9);
        assert_eq!(last.x_post[0], 0.0);
    }

    #[test]
    fn steady_state_slicing() {
        let r = make_gfore(2.0, 0.5).unwrap();
        let cfg = open_loop_config(&r).unwrap();
        let res = simulate(&cfg, &SignalSpec::sine(1.0, 1.0), &SimOptions::default()).unwrap();
        let w = hz(1.0);
        let ss = steady_state(&res, w).unwrap();
        assert_eq!(ss.t[0], 0.0);
        assert_eq!(ss.t.len(), res.steps_per_period + 1);
        assert!(steady_state_periods(&res, w, 3).is_err());
        assert!(steady_state_periods(&res, w, 2).is_ok());
    }

    #[test]
    fn fft_of_sine() {
        let n = 256;
        let w = 2.0;
        let t0 = 0.3;
        let samples: Vec<f64> = (0..n)
            .map(|k| {
                let t = t0 + k as f64 * 2.0 * PI / w / n as f64;
                2.0 * (w * t + 0.4).sin() + 0.5 * (3.0 * w * t).sin()
            })
            .collect();
        let spec = sampled_harmonics(&samples, t0, w, 5).unwrap();
        assert!((spec.get(1) - Complex64::from_polar(2.0, 0.4)).norm() < 1e-12);
        assert!((spec.get(3) - Complex64::new(0.5, 0.0)).norm() < 1e-12);
        assert!(spec.get(2).norm() < 1e-12);
    }

    #[test]
    fn fore_example_reconstruction() {
        let cfg = fore_example();
        let input = SignalSpec::sine(1.0, 1.0);
        let res = simulate(&cfg, &input, &SimOptions::default()).unwrap();
        assert!(res.converged, "last change {}", res.last_change);
        let rec = reconstruct_error(&cfg, &res.events, &input, &res.t).unwrap();
        let num: f64 = rec.iter().zip(&res.e).map(|(a, b)| (a - b).powi(2)).sum();
        let den: f64 = res.e.iter().map(|v| v * v).sum();
        let per_period = res.events_between(res.t[0], res.t[0] + res.period).count();
        eprintln!("events/period {per_period}, rel L2 {:e}", (num / den).sqrt());
        assert!((num / den).sqrt() < 1e-6);
    }
}
