//! Scoring of predicted error signals against simulation, frequency
//! sweeps and the reference results table.

use rayon::prelude::*;

use crate::analytic::{self, Method};
use crate::error::{Error, ErrorKind, Result};
use crate::presets::{self, NamedTuning};
use crate::reset::{hz, LoopConfig};
use crate::sim::{self, SignalSpec, SimOptions};

/// Trapezoidal integral of `f(t)` on a grid.
fn trapz(t: &[f64], f: impl Fn(usize) -> f64) -> f64 {
    t.windows(2)
        .enumerate()
        .map(|(i, w)| 0.5 * (w[1] - w[0]) * (f(i) + f(i + 1)))
        .sum()
}

fn check_grid(t: &[f64], a: &[f64], b: &[f64]) -> Result<()> {
    if t.len() != a.len() || t.len() != b.len() || t.len() < 2 {
        return Err(Error::Dimension(format!(
            "grid of {} samples with signals of {} and {}",
            t.len(),
            a.len(),
            b.len()
        )));
    }
    Ok(())
}

/// Normalized integral-square error `∫(e - ê)² / ∫ê²` with the prediction
/// `ê` in the denominator.
pub fn ise(t: &[f64], e_sim: &[f64], e_pred: &[f64]) -> Result<f64> {
    check_grid(t, e_sim, e_pred)?;
    let den = trapz(t, |i| e_pred[i] * e_pred[i]);
    if !(den > 0.0) {
        return Err(Error::UndefinedMetric("prediction has zero energy".into()));
    }
    let num = trapz(t, |i| (e_sim[i] - e_pred[i]).powi(2));
    Ok(num / den)
}

/// Normalized peak mismatch `|max|e| - max|ê|| / max|ê|`.
pub fn linf(e_sim: &[f64], e_pred: &[f64]) -> Result<f64> {
    if e_sim.len() != e_pred.len() || e_sim.is_empty() {
        return Err(Error::Dimension("signals differ in length or are empty".into()));
    }
    let peak = |v: &[f64]| v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    let p = peak(e_pred);
    if !(p > 0.0) {
        return Err(Error::UndefinedMetric("prediction has zero peak".into()));
    }
    Ok((peak(e_sim) - p).abs() / p)
}

/// `n` log-uniform samples over `[lo, hi]`.
pub fn log_space(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![lo],
        _ => {
            let (a, b) = (lo.ln(), hi.ln());
            (0..n)
                .map(|i| (a + (b - a) * i as f64 / (n - 1) as f64).exp())
                .collect()
        }
    }
}

/// Time regularization setting of a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum TauMode {
    None,
    /// A tenth of the crossover period.
    Optimal,
    /// Half the period of each analyzed frequency.
    Full,
}

impl TauMode {
    pub fn key(self) -> &'static str {
        match self {
            TauMode::None => "none",
            TauMode::Optimal => "optimal",
            TauMode::Full => "full",
        }
    }

    pub fn from_key(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "none" => Some(TauMode::None),
            "optimal" => Some(TauMode::Optimal),
            "full" => Some(TauMode::Full),
            _ => None,
        }
    }

    /// Window in seconds at `f_hz` for a loop with crossover `omega_c_hz`.
    pub fn tau(self, f_hz: f64, omega_c_hz: f64) -> f64 {
        match self {
            TauMode::None => 0.0,
            TauMode::Optimal => presets::optimal_tau(omega_c_hz),
            TauMode::Full => presets::full_tau(hz(f_hz)),
        }
    }
}

/// Scores of one method at one frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricRow {
    pub f_hz: f64,
    pub method: Method,
    pub tau_mode: TauMode,
    pub ise: f64,
    pub linf: f64,
}

/// A frequency (and method, when the predictor alone failed) that could
/// not be scored.
#[derive(Debug, Clone, PartialEq)]
pub struct Failure {
    pub f_hz: f64,
    pub method: Option<Method>,
    pub kind: ErrorKind,
    pub reason: &'static str,
    pub message: String,
}

/// Max and log-space average of a method over the sweep.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregate {
    pub method: Method,
    pub max_ise: f64,
    pub avg_ise: f64,
    pub max_linf: f64,
    pub avg_linf: f64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepReport {
    pub rows: Vec<MetricRow>,
    pub failures: Vec<Failure>,
    pub aggregates: Vec<Aggregate>,
}

impl SweepReport {
    pub fn aggregate(&self, method: Method) -> Option<&Aggregate> {
        self.aggregates.iter().find(|a| a.method == method)
    }

    pub fn simulation_failed(&self) -> bool {
        self.failures.iter().any(|f| f.kind == ErrorKind::Simulation)
    }
}

/// Sweep settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub band_hz: (f64, f64),
    pub points: usize,
    pub methods: Vec<Method>,
    pub tau_mode: TauMode,
    /// Crossover used by [`TauMode::Optimal`].
    pub omega_c_hz: f64,
    pub n_max: usize,
    pub sim: SimOptions,
}

/// Default number of log-spaced samples per decade.
pub const POINTS_PER_DECADE: usize = 30;

impl SweepSpec {
    pub fn new(band_hz: (f64, f64), tau_mode: TauMode, omega_c_hz: f64) -> Self {
        let decades = (band_hz.1 / band_hz.0).log10().max(0.0);
        Self {
            band_hz,
            points: (decades * POINTS_PER_DECADE as f64).round() as usize + 1,
            methods: Method::ALL.to_vec(),
            tau_mode,
            omega_c_hz,
            n_max: 999,
            sim: SimOptions::default(),
        }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.band_hz;
        if !(lo > 0.0 && hi >= lo && hi.is_finite()) {
            return Err(Error::InvalidParameter(format!("band [{lo}, {hi}] Hz is not a valid range")));
        }
        if self.n_max == 0 {
            return Err(Error::InvalidParameter("n_max must be at least 1".into()));
        }
        Ok(())
    }
}

fn failure(f_hz: f64, method: Option<Method>, err: &Error) -> Failure {
    Failure {
        f_hz,
        method,
        kind: err.kind(),
        reason: err.reason(),
        message: err.to_string(),
    }
}

/// Scores every method at one frequency against a fresh simulation.
pub fn score_frequency(
    cfg: &LoopConfig,
    f_hz: f64,
    spec: &SweepSpec,
) -> std::result::Result<(Vec<MetricRow>, Vec<Failure>), Failure> {
    let omega = hz(f_hz);
    let tau = spec.tau_mode.tau(f_hz, spec.omega_c_hz);
    let cfg = cfg.with_tau(tau).map_err(|e| failure(f_hz, None, &e))?;
    let res = sim::simulate(&cfg, &SignalSpec::sine(1.0, f_hz), &spec.sim).map_err(|e| failure(f_hz, None, &e))?;
    let ss = sim::steady_state(&res, omega).map_err(|e| failure(f_hz, None, &e))?;
    let times: Vec<f64> = ss.t.iter().map(|t| t + ss.t0).collect();
    let mut rows = Vec::new();
    let mut fails = Vec::new();
    for &m in &spec.methods {
        let scored = analytic::predict_error(&cfg, omega, spec.n_max, m).and_then(|p| {
            let pred = p.time_reconstruct(&times);
            Ok((ise(&ss.t, &ss.e, &pred)?, linf(&ss.e, &pred)?))
        });
        match scored {
            Ok((i, l)) => rows.push(MetricRow {
                f_hz,
                method: m,
                tau_mode: spec.tau_mode,
                ise: i,
                linf: l,
            }),
            Err(e) => fails.push(failure(f_hz, Some(m), &e)),
        }
    }
    Ok((rows, fails))
}

/// Simulates and scores each requested method over log-spaced frequencies.
/// Per-frequency failures are recorded, not propagated.
pub fn sweep(cfg: &LoopConfig, spec: &SweepSpec) -> Result<SweepReport> {
    spec.validate()?;
    let freqs = log_space(spec.band_hz.0, spec.band_hz.1, spec.points);
    let results: Vec<_> = freqs.par_iter().map(|&f| score_frequency(cfg, f, spec)).collect();
    let mut rows = Vec::new();
    let mut failures = Vec::new();
    for r in results {
        match r {
            Ok((mut rs, mut fs)) => {
                rows.append(&mut rs);
                failures.append(&mut fs);
            }
            Err(f) => failures.push(f),
        }
    }
    let aggregates = aggregate(&rows, &spec.methods);
    Ok(SweepReport {
        rows,
        failures,
        aggregates,
    })
}

/// Max and arithmetic mean over the (log-spaced) rows of each method.
pub fn aggregate(rows: &[MetricRow], methods: &[Method]) -> Vec<Aggregate> {
    methods
        .iter()
        .filter_map(|&m| {
            let sel: Vec<_> = rows.iter().filter(|r| r.method == m).collect();
            if sel.is_empty() {
                return None;
            }
            let n = sel.len() as f64;
            Some(Aggregate {
                method: m,
                max_ise: sel.iter().map(|r| r.ise).fold(0.0, f64::max),
                avg_ise: sel.iter().map(|r| r.ise).sum::<f64>() / n,
                max_linf: sel.iter().map(|r| r.linf).fold(0.0, f64::max),
                avg_linf: sel.iter().map(|r| r.linf).sum::<f64>() / n,
                count: sel.len(),
            })
        })
        .collect()
}

/// Reference cells (percent) of one results-table row, ordered
/// `[δ-CL, CL-DF, DF]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceRow {
    pub name: &'static str,
    pub max_ise: [f64; 3],
    pub max_linf: [f64; 3],
    pub avg_ise: [f64; 3],
    pub avg_linf: [f64; 3],
}

/// Published results for optimal time regularization, 1 Hz to 100 Hz.
pub const REFERENCE_OPTIMAL: [ReferenceRow; 8] = [
    ReferenceRow { name: "R0", max_ise: [69.0, 94.0, 114.0], max_linf: [33.1, 19.0, 94.1], avg_ise: [12.5, 16.1, 23.6], avg_linf: [5.30, 4.35, 22.6] },
    ReferenceRow { name: "R1", max_ise: [1.33, 7.82, 12.9], max_linf: [8.71, 15.2, 29.1], avg_ise: [0.113, 1.37, 3.03], avg_linf: [0.719, 1.90, 6.61] },
    ReferenceRow { name: "R2", max_ise: [2.63, 11.0, 16.8], max_linf: [7.22, 10.7, 31.1], avg_ise: [0.383, 1.93, 4.13], avg_linf: [1.20, 1.78, 7.62] },
    ReferenceRow { name: "R3", max_ise: [11.1, 25.5, 31.4], max_linf: [15.7, 9.83, 40.9], avg_ise: [2.56, 4.72, 8.03], avg_linf: [2.91, 1.53, 10.6] },
    ReferenceRow { name: "R4", max_ise: [0.00720, 1.21, 3.26], max_linf: [0.262, 4.07, 14.0], avg_ise: [0.00120, 0.215, 0.791], avg_linf: [0.0412, 0.551, 2.87] },
    ReferenceRow { name: "R5", max_ise: [1.63, 7.77, 12.6], max_linf: [5.94, 5.55, 22.6], avg_ise: [0.287, 1.59, 3.34], avg_linf: [0.963, 1.13, 6.02] },
    ReferenceRow { name: "R6", max_ise: [1.17, 6.45, 10.0], max_linf: [4.89, 4.25, 17.0], avg_ise: [0.238, 1.46, 2.83], avg_linf: [0.814, 0.610, 4.96] },
    ReferenceRow { name: "R7", max_ise: [12.9, 38.0, 40.0], max_linf: [13.7, 5.62, 30.2], avg_ise: [3.26, 10.5, 12.3], avg_linf: [3.32, 1.37, 10.2] },
];

/// Published δ-CL max-ISE statistics (percent) over all rows under full
/// time regularization: mean and median.
pub const REFERENCE_FULL_MAX_ISE: (f64, f64) = (2.65, 0.0358);

/// Default relative tolerance of a table cell.
pub const CELL_TOLERANCE: f64 = 0.5;

pub fn reference_row(name: &str) -> Option<&'static ReferenceRow> {
    REFERENCE_OPTIMAL.iter().find(|r| r.name.eq_ignore_ascii_case(name))
}

/// One cell compared with its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CellCheck {
    pub metric: &'static str,
    pub method: Method,
    /// Percent.
    pub value: f64,
    pub reference: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableRow {
    pub name: String,
    pub report: SweepReport,
    /// `avg ISE` strictly increases from δ-CL to CL-DF to DF.
    pub ordering_ok: Option<bool>,
    pub cells: Vec<CellCheck>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TableReport {
    pub tau_mode: TauMode,
    pub rows: Vec<TableRow>,
    /// Mean and median of δ-CL max ISE (percent) across rows.
    pub delta_max_ise_stats: Option<(f64, f64)>,
}

impl TableReport {
    pub fn ordering_ok(&self) -> bool {
        self.rows.iter().all(|r| r.ordering_ok.unwrap_or(true))
    }

    pub fn cells_ok(&self) -> bool {
        self.rows.iter().all(|r| r.cells.iter().all(|c| c.pass))
    }
}

fn within(value: f64, reference: f64, tol: f64) -> bool {
    (value - reference).abs() <= tol * reference.abs()
}

/// Sweeps each tuning and lays the result out like the published table.
pub fn table_reproduction(
    tunings: &[NamedTuning],
    tau_mode: TauMode,
    band_hz: (f64, f64),
    points: usize,
    tolerance: f64,
) -> Result<TableReport> {
    let mut rows = Vec::new();
    for t in tunings {
        let cfg = presets::cglp_loop(&t.tuning, 0.0)?;
        let mut spec = SweepSpec::new(band_hz, tau_mode, t.tuning.omega_c_hz);
        spec.points = points;
        let report = sweep(&cfg, &spec)?;
        rows.push(table_row(t.name, report, tau_mode, tolerance));
    }
    let mut maxes: Vec<f64> = rows
        .iter()
        .filter_map(|r| r.report.aggregate(Method::DeltaCl).map(|a| 100.0 * a.max_ise))
        .collect();
    let stats = if maxes.is_empty() {
        None
    } else {
        maxes.sort_by(f64::total_cmp);
        let mean = maxes.iter().sum::<f64>() / maxes.len() as f64;
        let k = maxes.len();
        let median = if k % 2 == 1 {
            maxes[k / 2]
        } else {
            0.5 * (maxes[k / 2 - 1] + maxes[k / 2])
        };
        Some((mean, median))
    };
    Ok(TableReport {
        tau_mode,
        rows,
        delta_max_ise_stats: stats,
    })
}

/// Ordering check of a sweep plus, for optimal τ and a published row of
/// the same name, the cell comparison against the reference.
pub fn table_row(name: &str, report: SweepReport, tau_mode: TauMode, tol: f64) -> TableRow {
    let agg = |m| report.aggregate(m).copied();
    let ordering_ok = match (agg(Method::DeltaCl), agg(Method::ClDf), agg(Method::Df)) {
        (Some(d), Some(c), Some(f)) => Some(d.avg_ise < c.avg_ise && c.avg_ise < f.avg_ise),
        _ => None,
    };
    let mut cells = Vec::new();
    if tau_mode == TauMode::Optimal {
        if let Some(r) = reference_row(name) {
            for (i, m) in [Method::DeltaCl, Method::ClDf, Method::Df].into_iter().enumerate() {
                let Some(a) = agg(m) else { continue };
                for (metric, value, reference) in [
                    ("max ISE", a.max_ise, r.max_ise[i]),
                    ("max Linf", a.max_linf, r.max_linf[i]),
                    ("avg ISE", a.avg_ise, r.avg_ise[i]),
                    ("avg Linf", a.avg_linf, r.avg_linf[i]),
                ] {
                    cells.push(CellCheck {
                        metric,
                        method: m,
                        value: 100.0 * value,
                        reference,
                        pass: within(100.0 * value, reference, tol),
                    });
                }
            }
        }
    }
    TableRow {
        name: name.to_string(),
        report,
        ordering_ok,
        cells,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn grid(n: usize) -> Vec<f64> {
        (0..=n).map(|i| i as f64 / n as f64).collect()
    }

    #[test]
    fn ise_of_zero_simulation_is_one() {
        let t = grid(1000);
        let p: Vec<f64> = t.iter().map(|t| (2.0 * std::f64::consts::PI * t).sin()).collect();
        let z = vec![0.0; t.len()];
        assert_relative_eq!(ise(&t, &z, &p).unwrap(), 1.0, epsilon = 1e-12);
        assert_eq!(ise(&t, &p, &p).unwrap(), 0.0);
        assert!(matches!(ise(&t, &p, &z), Err(Error::UndefinedMetric(_))));
    }

    #[test]
    fn linf_of_doubled_signal_is_one() {
        let p: Vec<f64> = (0..100).map(|i| (i as f64 * 0.1).sin()).collect();
        let e: Vec<f64> = p.iter().map(|v| 2.0 * v).collect();
        assert_relative_eq!(linf(&e, &p).unwrap(), 1.0, epsilon = 1e-12);
        assert!(linf(&e, &vec![0.0; 100]).is_err());
    }

    #[test]
    fn log_space_endpoints() {
        let v = log_space(1.0, 100.0, 3);
        assert_relative_eq!(v[1], 10.0, epsilon = 1e-12);
        assert_relative_eq!(v[2], 100.0, epsilon = 1e-12);
        assert_eq!(SweepSpec::new((1.0, 100.0), TauMode::None, 100.0).points, 61);
    }

    #[test]
    fn constant_rows_average_to_constant() {
        let rows: Vec<_> = [1.0, 2.0, 5.0]
            .iter()
            .map(|&f| MetricRow {
                f_hz: f,
                method: Method::Df,
                tau_mode: TauMode::None,
                ise: 0.25,
                linf: 0.5,
            })
            .collect();
        let a = aggregate(&rows, &[Method::Df, Method::DeltaCl]);
        assert_eq!(a.len(), 1);
        assert_eq!(a[0].avg_ise, 0.25);
        assert_eq!(a[0].max_linf, 0.5);
    }

    #[test]
    fn empty_table_is_empty() {
        let r = table_reproduction(&[], TauMode::Optimal, (1.0, 100.0), 5, CELL_TOLERANCE).unwrap();
        assert!(r.rows.is_empty());
        assert!(r.delta_max_ise_stats.is_none());
        assert!(r.ordering_ok());
    }
}
