//! Precision-stage plant and the CgLp tunings used for validation.

use crate::error::Result;
use crate::lti::StateSpace;
use crate::reset::{make_cglp, make_double_lead, make_gci, make_pid, tune_gain, CgLpTuning, LoopConfig};

pub const STAGE_NUM: [f64; 1] = [3.038e4];
pub const STAGE_DEN: [f64; 3] = [1.0, 0.7413, 243.3];

pub const OMEGA_I_HZ: f64 = 10.0;
pub const OMEGA_C_HZ: f64 = 100.0;
pub const OMEGA_F_HZ: f64 = 500.0;

/// Lead parameter of the double-lead controller paired with the Clegg
/// integrator.
pub const CI_BETA: f64 = 3.73;

/// Identified second-order model of the positioning stage.
pub fn stage_plant() -> StateSpace {
    StateSpace::from_tf(&STAGE_NUM, &STAGE_DEN).expect("stage plant coefficients are valid")
}

/// Named CgLp tuning with its design targets (degrees).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NamedTuning {
    pub name: &'static str,
    pub tuning: CgLpTuning,
    pub pm_bls_deg: f64,
    pub phi_rc_deg: f64,
}

const fn tuning(gamma: f64, omega_r_hz: f64, alpha: f64, beta: f64) -> CgLpTuning {
    CgLpTuning {
        gamma,
        omega_r_hz,
        alpha,
        omega_f_hz: OMEGA_F_HZ,
        omega_i_hz: OMEGA_I_HZ,
        omega_c_hz: OMEGA_C_HZ,
        beta,
        kp: None,
    }
}

const fn named(name: &'static str, t: CgLpTuning, pm: f64, phi: f64) -> NamedTuning {
    NamedTuning {
        name,
        tuning: t,
        pm_bls_deg: pm,
        phi_rc_deg: phi,
    }
}

/// Tunings `R*0..R*2` that vary γ and PM_BLS.
pub const TEST_TUNINGS: [NamedTuning; 3] = [
    named("R*0", tuning(0.0, 98.38, 1.07, 2.67), 30.0, 20.0),
    named("R*1", tuning(0.5, 23.08, 1.04, 2.57), 30.0, 20.0),
    named("R*2", tuning(0.5, 23.08, 1.04, 2.03), 20.0, 20.0),
];

/// Tunings `R0..R7`.
pub const CGLP_TUNINGS: [NamedTuning; 8] = [
    named("R0", tuning(0.0, 34.41, 1.24, 2.17), 20.0, 40.0),
    named("R1", tuning(-0.2, 83.46, 1.18, 2.87), 30.0, 30.0),
    named("R2", tuning(0.0, 62.88, 1.15, 2.78), 30.0, 30.0),
    named("R3", tuning(0.2, 37.55, 1.12, 2.68), 30.0, 30.0),
    named("R4", tuning(0.0, 98.38, 1.07, 3.59), 40.0, 20.0),
    named("R5", tuning(0.0, 62.88, 1.15, 3.79), 40.0, 30.0),
    named("R6", tuning(0.0, 62.88, 1.15, 5.79), 50.0, 30.0),
    named("R7", tuning(0.0, 34.41, 1.24, 5.81), 50.0, 40.0),
];

/// Looks up a tuning by name in both tables.
pub fn tuning_by_name(name: &str) -> Option<NamedTuning> {
    TEST_TUNINGS
        .iter()
        .chain(CGLP_TUNINGS.iter())
        .find(|t| t.name.eq_ignore_ascii_case(name))
        .copied()
}

/// CgLp loop on the stage: `K = 1`, CgLp, PID, stage. With `kp = None`
/// the PID gain is tuned on the DF loop to `omega_c_hz`.
pub fn cglp_loop(t: &CgLpTuning, tau: f64) -> Result<LoopConfig> {
    let r = make_cglp(t)?;
    let kp = t.kp.unwrap_or(1.0);
    let c = make_pid(kp, t.omega_i_hz, t.omega_c_hz, t.beta)?;
    let cfg = LoopConfig::new(StateSpace::gain(1.0), r, c, stage_plant(), tau)?;
    match t.kp {
        Some(_) => Ok(cfg),
        None => {
            let factor = tune_gain(&cfg, t.omega_c_hz)?;
            cfg.with_controller_gain(factor)
        }
    }
}

/// Clegg integrator with the double-lead controller on the stage, gain
/// tuned on the DF loop to [`OMEGA_C_HZ`].
pub fn ci_loop(tau: f64) -> Result<LoopConfig> {
    let c = make_double_lead(1.0, OMEGA_C_HZ, CI_BETA)?;
    let cfg = LoopConfig::new(StateSpace::gain(1.0), make_gci(0.0)?, c, stage_plant(), tau)?;
    let factor = tune_gain(&cfg, OMEGA_C_HZ)?;
    cfg.with_controller_gain(factor)
}

/// Time regularization that suppresses resets within a tenth of the
/// crossover period.
pub fn optimal_tau(omega_c_hz: f64) -> f64 {
    1.0 / (10.0 * omega_c_hz)
}

/// Time regularization that enforces two resets per period at `omega`
/// (rad/s).
pub fn full_tau(omega: f64) -> f64 {
    std::f64::consts::PI / omega
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reset::{hz, phase_margin_bls};
    use approx::assert_relative_eq;

    #[test]
    fn stage_dc_gain_and_resonance() {
        let p = stage_plant();
        let dc = p.eval(1e-6).unwrap().norm();
        assert_relative_eq!(dc, 3.038e4 / 243.3, max_relative = 1e-6);
        assert_relative_eq!(20.0 * dc.log10(), 41.93, epsilon = 0.01);
        let wn = 243.3f64.sqrt();
        let peak = p.eval(wn).unwrap().norm();
        assert!(peak > p.eval(0.8 * wn).unwrap().norm());
        assert!(peak > p.eval(1.2 * wn).unwrap().norm());
    }

    #[test]
    fn tunings_are_found() {
        assert_eq!(tuning_by_name("r4").unwrap().tuning.omega_r_hz, 98.38);
        assert_eq!(tuning_by_name("R*1").unwrap().tuning.gamma, 0.5);
        assert!(tuning_by_name("R9").is_none());
    }

    #[test]
    fn tuned_df_crossover() {
        let cfg = cglp_loop(&TEST_TUNINGS[1].tuning, 0.0).unwrap();
        let l = cfg.df_loop(hz(OMEGA_C_HZ)).unwrap().norm();
        assert_relative_eq!(l, 1.0, max_relative = 1e-12);
        let m = phase_margin_bls(&cfg).unwrap();
        assert_relative_eq!(m.crossover_df_hz, 100.0, max_relative = 1e-3);
    }

    #[test]
    fn tau_modes() {
        assert_relative_eq!(optimal_tau(100.0), 2.0 * std::f64::consts::PI / (10.0 * hz(100.0)));
        assert_relative_eq!(full_tau(hz(10.0)), 0.05);
    }
}
