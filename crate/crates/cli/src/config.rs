//! TOML configuration files and their resolution into a loop.

use std::path::Path;

use serde::{Deserialize, Serialize};

use resetfreq::analytic::Method;
use resetfreq::metrics::TauMode;
use resetfreq::presets;
use resetfreq::reset::{self, CgLpTuning, LoopConfig, ResetController};
use resetfreq::sim::SimOptions;
use resetfreq::{Error, Result, StateSpace};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    #[serde(default)]
    pub plant: PlantSection,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerSection>,
    pub reset: ResetSection,
    #[serde(default, rename = "loop")]
    pub loop_: LoopSection,
    #[serde(default)]
    pub analysis: AnalysisSection,
    #[serde(default)]
    pub sim: SimSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PlantSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub den: Option<Vec<f64>>,
}

impl Default for PlantSection {
    fn default() -> Self {
        Self {
            preset: Some(STAGE_PRESET.into()),
            num: None,
            den: None,
        }
    }
}

pub const STAGE_PRESET: &str = "paper-stage";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ControllerKind {
    Pid,
    DoubleLead,
    Tf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerSection {
    pub kind: ControllerKind,
    /// Gain multiplier; absent means tuned so the DF crossover sits at
    /// `omega_c_hz` (pid and double-lead only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gain: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_i_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub num: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub den: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ResetKind {
    Gci,
    Gfore,
    Cglp,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ResetSection {
    pub kind: ResetKind,
    /// Named CgLp tuning (e.g. "R4"); explicit fields override it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gamma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_r_hz: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_f_hz: Option<f64>,
}

impl Default for ResetSection {
    fn default() -> Self {
        Self {
            kind: ResetKind::Cglp,
            preset: None,
            gamma: None,
            omega_r_hz: None,
            alpha: None,
            omega_f_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LoopSection {
    #[serde(default = "one")]
    pub k: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_mode: Option<String>,
    /// Explicit window in seconds; excludes `tau_mode`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    /// Crossover for the "optimal" window; defaults to the controller's.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub omega_c_hz: Option<f64>,
}

fn one() -> f64 {
    1.0
}

impl Default for LoopSection {
    fn default() -> Self {
        Self {
            k: 1.0,
            tau_mode: None,
            tau: None,
            omega_c_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisSection {
    #[serde(default = "default_band")]
    pub band_hz: [f64; 2],
    #[serde(default = "default_points")]
    pub points: usize,
    #[serde(default = "default_n_max")]
    pub n_max: usize,
    #[serde(default = "default_methods")]
    pub methods: Vec<String>,
    #[serde(default = "default_freq")]
    pub freq_hz: f64,
}

fn default_band() -> [f64; 2] {
    [1.0, 100.0]
}
fn default_points() -> usize {
    61
}
fn default_n_max() -> usize {
    999
}
fn default_methods() -> Vec<String> {
    Method::ALL.iter().map(|m| m.key().to_string()).collect()
}
fn default_freq() -> f64 {
    20.0
}

impl Default for AnalysisSection {
    fn default() -> Self {
        Self {
            band_hz: default_band(),
            points: default_points(),
            n_max: default_n_max(),
            methods: default_methods(),
            freq_hz: default_freq(),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimSection {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub steps_per_period: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ss_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event_tol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau_slack: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub record_periods: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub zeno_limit: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub refine: Option<bool>,
}

/// Time regularization as configured: a mode or a fixed window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSetting {
    Mode(TauMode),
    Seconds(f64),
}

impl TauSetting {
    pub fn at(&self, f_hz: f64, omega_c_hz: f64) -> f64 {
        match *self {
            TauSetting::Mode(m) => m.tau(f_hz, omega_c_hz),
            TauSetting::Seconds(t) => t,
        }
    }
}

/// A configuration resolved into library objects.
#[derive(Debug, Clone)]
pub struct Resolved {
    /// Loop with `τ = 0`; the window is applied per frequency.
    pub cfg: LoopConfig,
    pub tau: TauSetting,
    pub omega_c_hz: f64,
    pub methods: Vec<Method>,
    pub band_hz: (f64, f64),
    pub points: usize,
    pub n_max: usize,
    pub freq_hz: f64,
    pub sim: SimOptions,
    /// Controller gain actually used (tuned or given).
    pub gain: f64,
    /// Fully explicit configuration that resolves to the same loop.
    pub effective: ConfigFile,
}

impl Resolved {
    pub fn loop_at(&self, f_hz: f64) -> Result<LoopConfig> {
        self.cfg.with_tau(self.tau.at(f_hz, self.omega_c_hz))
    }
}

pub fn load(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    parse(&text)
}

pub fn parse(text: &str) -> Result<ConfigFile> {
    toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
}

pub fn to_toml(cfg: &ConfigFile) -> Result<String> {
    toml::to_string(cfg).map_err(|e| Error::Config(e.to_string()))
}

fn need(v: Option<f64>, what: &str) -> Result<f64> {
    v.ok_or_else(|| Error::Config(format!("missing {what}")))
}

fn plant(p: &PlantSection) -> Result<StateSpace> {
    match (&p.preset, &p.num, &p.den) {
        (Some(name), None, None) if name == STAGE_PRESET => Ok(presets::stage_plant()),
        (Some(name), None, None) => Err(Error::Config(format!("unknown plant preset '{name}'"))),
        (None, Some(num), Some(den)) => StateSpace::from_tf(num, den),
        _ => Err(Error::Config("plant needs either preset or num and den".into())),
    }
}

fn cglp_tuning(r: &ResetSection) -> Result<(CgLpTuning, Option<&'static str>)> {
    let base = match &r.preset {
        Some(name) => Some(
            presets::tuning_by_name(name).ok_or_else(|| Error::Config(format!("unknown CgLp preset '{name}'")))?,
        ),
        None => None,
    };
    let t = base.map(|b| b.tuning);
    let tuning = CgLpTuning {
        gamma: need(r.gamma.or(t.map(|t| t.gamma)), "reset.gamma")?,
        omega_r_hz: need(r.omega_r_hz.or(t.map(|t| t.omega_r_hz)), "reset.omega_r_hz")?,
        alpha: need(r.alpha.or(t.map(|t| t.alpha)), "reset.alpha")?,
        omega_f_hz: r.omega_f_hz.or(t.map(|t| t.omega_f_hz)).unwrap_or(presets::OMEGA_F_HZ),
        omega_i_hz: t.map(|t| t.omega_i_hz).unwrap_or(presets::OMEGA_I_HZ),
        omega_c_hz: t.map(|t| t.omega_c_hz).unwrap_or(presets::OMEGA_C_HZ),
        beta: t.map(|t| t.beta).unwrap_or(2.0),
        kp: None,
    };
    Ok((tuning, base.map(|b| b.name)))
}

fn reset_element(r: &ResetSection) -> Result<(ResetController, Option<CgLpTuning>)> {
    match r.kind {
        ResetKind::Gci => Ok((reset::make_gci(r.gamma.unwrap_or(0.0))?, None)),
        ResetKind::Gfore => Ok((
            reset::make_gfore(need(r.omega_r_hz, "reset.omega_r_hz")?, r.gamma.unwrap_or(0.0))?,
            None,
        )),
        ResetKind::Cglp => {
            let (t, _) = cglp_tuning(r)?;
            Ok((reset::make_cglp(&t)?, Some(t)))
        }
    }
}

/// Controller section implied by a CgLp preset when none is given.
fn default_controller(t: Option<&CgLpTuning>, kind: ResetKind) -> ControllerSection {
    match (kind, t) {
        (ResetKind::Gci, _) => ControllerSection {
            kind: ControllerKind::DoubleLead,
            gain: None,
            omega_i_hz: None,
            omega_c_hz: Some(presets::OMEGA_C_HZ),
            beta: Some(presets::CI_BETA),
            num: None,
            den: None,
        },
        (_, Some(t)) => ControllerSection {
            kind: ControllerKind::Pid,
            gain: None,
            omega_i_hz: Some(t.omega_i_hz),
            omega_c_hz: Some(t.omega_c_hz),
            beta: Some(t.beta),
            num: None,
            den: None,
        },
        (_, None) => ControllerSection {
            kind: ControllerKind::Pid,
            gain: None,
            omega_i_hz: Some(presets::OMEGA_I_HZ),
            omega_c_hz: Some(presets::OMEGA_C_HZ),
            beta: Some(2.0),
            num: None,
            den: None,
        },
    }
}

fn sim_options(s: &SimSection) -> SimOptions {
    let d = SimOptions::default();
    SimOptions {
        steps_per_period: s.steps_per_period.unwrap_or(d.steps_per_period),
        max_periods: s.max_periods.unwrap_or(d.max_periods),
        ss_tol: s.ss_tol.unwrap_or(d.ss_tol),
        event_tol: s.event_tol.or(d.event_tol),
        tau: None,
        tau_slack: s.tau_slack.unwrap_or(d.tau_slack),
        record_periods: s.record_periods.unwrap_or(d.record_periods),
        zeno_limit: s.zeno_limit.unwrap_or(d.zeno_limit),
        refine: s.refine.unwrap_or(d.refine),
    }
}

/// Builds the loop, tuning the controller gain when none is given.
pub fn resolve(file: &ConfigFile) -> Result<Resolved> {
    let p = plant(&file.plant)?;
    let (r, tuning) = reset_element(&file.reset)?;
    let ctrl = file
        .controller
        .clone()
        .unwrap_or_else(|| default_controller(tuning.as_ref(), file.reset.kind));
    let c_unit = match ctrl.kind {
        ControllerKind::Pid => reset::make_pid(
            1.0,
            need(ctrl.omega_i_hz, "controller.omega_i_hz")?,
            need(ctrl.omega_c_hz, "controller.omega_c_hz")?,
            need(ctrl.beta, "controller.beta")?,
        )?,
        ControllerKind::DoubleLead => reset::make_double_lead(
            1.0,
            need(ctrl.omega_c_hz, "controller.omega_c_hz")?,
            need(ctrl.beta, "controller.beta")?,
        )?,
        ControllerKind::Tf => match (&ctrl.num, &ctrl.den) {
            (Some(n), Some(d)) => StateSpace::from_tf(n, d)?,
            _ => return Err(Error::Config("controller kind tf needs num and den".into())),
        },
    };
    if !file.loop_.k.is_finite() || file.loop_.k == 0.0 {
        return Err(Error::Config(format!("loop.k = {} must be finite and non-zero", file.loop_.k)));
    }
    let unit = LoopConfig::new(StateSpace::gain(file.loop_.k), r, c_unit, p, 0.0)?;
    let gain = match (ctrl.gain, ctrl.kind) {
        (Some(g), _) => {
            if !g.is_finite() || g == 0.0 {
                return Err(Error::Config(format!("controller.gain = {g} must be finite and non-zero")));
            }
            g
        }
        (None, ControllerKind::Tf) => 1.0,
        (None, _) => reset::tune_gain(&unit, need(ctrl.omega_c_hz, "controller.omega_c_hz")?)?,
    };
    let cfg = unit.with_controller_gain(gain)?;

    let omega_c_hz = file
        .loop_
        .omega_c_hz
        .or(ctrl.omega_c_hz)
        .unwrap_or(presets::OMEGA_C_HZ);
    let tau = match (&file.loop_.tau_mode, file.loop_.tau) {
        (Some(_), Some(_)) => return Err(Error::Config("loop.tau_mode and loop.tau are exclusive".into())),
        (Some(m), None) => TauSetting::Mode(
            TauMode::from_key(m).ok_or_else(|| Error::Config(format!("unknown tau_mode '{m}'")))?,
        ),
        (None, Some(t)) if t >= 0.0 && t.is_finite() => TauSetting::Seconds(t),
        (None, Some(t)) => return Err(Error::Config(format!("loop.tau = {t} must be >= 0"))),
        (None, None) => TauSetting::Mode(TauMode::None),
    };
    let a = &file.analysis;
    let methods = a
        .methods
        .iter()
        .map(|m| Method::from_key(m).ok_or_else(|| Error::Config(format!("unknown method '{m}'"))))
        .collect::<Result<Vec<_>>>()?;
    let band_hz = (a.band_hz[0], a.band_hz[1]);
    if !(band_hz.0 > 0.0 && band_hz.1 >= band_hz.0 && band_hz.1.is_finite()) {
        return Err(Error::Config(format!("analysis.band_hz {:?} is not a valid range", a.band_hz)));
    }
    if a.n_max == 0 || a.points == 0 {
        return Err(Error::Config("analysis.n_max and analysis.points must be positive".into()));
    }
    if !(a.freq_hz > 0.0) || !a.freq_hz.is_finite() {
        return Err(Error::Config(format!("analysis.freq_hz = {} must be positive", a.freq_hz)));
    }

    let mut effective = file.clone();
    effective.controller = Some(ControllerSection {
        gain: Some(gain),
        ..ctrl
    });
    if file.reset.kind == ResetKind::Cglp {
        let t = tuning.expect("cglp resolves a tuning");
        effective.reset = ResetSection {
            kind: ResetKind::Cglp,
            preset: None,
            gamma: Some(t.gamma),
            omega_r_hz: Some(t.omega_r_hz),
            alpha: Some(t.alpha),
            omega_f_hz: Some(t.omega_f_hz),
        };
    }
    effective.loop_.omega_c_hz = Some(omega_c_hz);

    Ok(Resolved {
        cfg,
        tau,
        omega_c_hz,
        methods,
        band_hz,
        points: a.points,
        n_max: a.n_max,
        freq_hz: a.freq_hz,
        sim: sim_options(&file.sim),
        gain,
        effective,
    })
}
