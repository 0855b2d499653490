//! Command implementations. Each writes CSV files and returns the process
//! exit status.

use std::f64::consts::PI;
use std::fs;
use std::path::{Path, PathBuf};

use num_complex::Complex64;

use resetfreq::analytic::{self, DeltaClOptions, Method};
use resetfreq::harmonic;
use resetfreq::metrics::{self, SweepReport, SweepSpec, TableRow, TauMode};
use resetfreq::presets::{self, NamedTuning};
use resetfreq::reset::{self, hz, SIG_E};
use resetfreq::sim::{self, SignalSpec};
use resetfreq::{Error, ErrorKind, HarmonicSpectrum};

use crate::config::{self, Resolved, TauSetting};

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub reason: String,
    pub message: String,
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e.kind() {
            ErrorKind::Config => 2,
            ErrorKind::Analytic => 3,
            ErrorKind::Simulation => 4,
        };
        Self {
            code,
            reason: e.reason().to_string(),
            message: e.to_string(),
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        io_error(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        io_error(e)
    }
}

fn io_error<E: std::fmt::Display>(e: E) -> CliError {
    CliError {
        code: 1,
        reason: "io".into(),
        message: e.to_string(),
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;

fn db(v: Complex64) -> f64 {
    20.0 * v.norm().log10()
}

fn deg(v: Complex64) -> f64 {
    v.arg().to_degrees()
}

fn writer(path: &Path) -> CliResult<csv::Writer<fs::File>> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(csv::Writer::from_path(path)?)
}

fn fmt(v: f64) -> String {
    format!("{v:.12e}")
}

/// Frequency responses of the plant, the base-linear loop, the reset
/// element and the DF loop.
pub fn bode(res: &Resolved, band_hz: (f64, f64), points: usize, out: &Path) -> CliResult<i32> {
    let cfg = &res.cfg;
    let r = cfg.reset();
    let bls = cfg.bls_loop()?;
    let mut w = writer(out)?;
    w.write_record([
        "f_hz",
        "plant_db",
        "plant_deg",
        "bls_db",
        "bls_deg",
        "rl_db",
        "rl_deg",
        "rdf_db",
        "rdf_deg",
        "loop_df_db",
        "loop_df_deg",
    ])?;
    for f in metrics::log_space(band_hz.0, band_hz.1, points) {
        let om = hz(f);
        let p = cfg.plant().eval(om)?;
        let l = bls.eval(om)?;
        let rl = r.base().eval(om)?;
        let rdf = harmonic::hosidf(r, om, 1)?;
        let ldf = cfg.df_loop(om)?;
        let row: Vec<String> = [f, db(p), deg(p), db(l), deg(l), db(rl), deg(rl), db(rdf), deg(rdf), db(ldf), deg(ldf)]
            .into_iter()
            .map(fmt)
            .collect();
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn write_spectrum(path: &Path, spec: &HarmonicSpectrum) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["n", "re", "im", "mag", "phase_deg"])?;
    for (n, v) in spec.iter() {
        w.write_record([n.to_string(), fmt(v.re), fmt(v.im), fmt(v.norm()), fmt(deg(v))])?;
    }
    w.flush()?;
    Ok(())
}

fn write_pairs(path: &Path, pairs: &[(String, String)]) -> CliResult<()> {
    let mut w = writer(path)?;
    w.write_record(["key", "value"])?;
    for (k, v) in pairs {
        w.write_record([k, v])?;
    }
    w.flush()?;
    Ok(())
}

/// Samples per period of emitted time series.
pub const TIME_SAMPLES: usize = 2000;

/// One-period error prediction, its harmonics and the assumption report.
pub fn predict(res: &Resolved, f_hz: f64, method: Method, out: &Path) -> CliResult<i32> {
    let om = hz(f_hz);
    let cfg = res.loop_at(f_hz)?;
    let mut report = vec![
        ("method".to_string(), method.key().to_string()),
        ("freq_hz".to_string(), fmt(f_hz)),
        ("tau_s".to_string(), fmt(cfg.tau())),
    ];
    let spec = match method {
        Method::DeltaCl => {
            let d = analytic::delta_cl_with(&cfg, om, res.n_max, &DeltaClOptions::default())?;
            let check = analytic::assumption_check(&d, None, analytic::SMALL_PHI);
            report.extend([
                ("t_rho_s".to_string(), fmt(d.t_rho)),
                ("phi_rad".to_string(), fmt(d.phi)),
                ("arcsine_argument".to_string(), fmt(d.report.arcsine_argument)),
                ("reset_instant_exists".to_string(), d.report.ass3_ok.to_string()),
                ("direction_ok".to_string(), d.report.direction_ok.to_string()),
                ("q_slope".to_string(), fmt(d.report.q_slope)),
                ("small_phi".to_string(), check.small_phi.to_string()),
                ("assumptions_ok".to_string(), check.all_ok().to_string()),
            ]);
            for (i, x) in d.x.iter().enumerate() {
                report.push((format!("x{i}"), fmt(*x)));
            }
            d.e
        }
        m => analytic::predict_error(&cfg, om, res.n_max, m)?,
    };
    fs::create_dir_all(out)?;
    let period = 2.0 * PI / om;
    let times: Vec<f64> = (0..=TIME_SAMPLES).map(|i| period * i as f64 / TIME_SAMPLES as f64).collect();
    let e = spec.time_reconstruct(&times);
    let mut w = writer(&out.join("time.csv"))?;
    w.write_record(["t_s", "e"])?;
    for (t, v) in times.iter().zip(&e) {
        w.write_record([fmt(*t), fmt(*v)])?;
    }
    w.flush()?;
    write_spectrum(&out.join("harmonics.csv"), &spec)?;
    write_pairs(&out.join("report.csv"), &report)?;
    for (k, v) in &report {
        println!("{k} = {v}");
    }
    Ok(EXIT_OK)
}

/// Raw simulation export: recorded signals, reset events and the exact
/// error harmonics.
pub fn simulate(res: &Resolved, f_hz: f64, amplitude: f64, out: &Path) -> CliResult<i32> {
    let cfg = res.loop_at(f_hz)?;
    let input = SignalSpec::sine(amplitude, f_hz);
    let run = sim::simulate(&cfg, &input, &res.sim)?;
    if !run.converged {
        return Err(Error::NotConverged {
            periods: run.periods,
            last_change: run.last_change,
        }
        .into());
    }
    fs::create_dir_all(out)?;
    let nr = cfg.reset().order();
    let mut w = writer(&out.join("signals.csv"))?;
    let mut head = vec!["t_s".to_string(), "r".into(), "e".into(), "q".into(), "z".into(), "u".into(), "y".into()];
    let ns = run.x.first().map_or(0, |x| x.len());
    head.extend((0..ns).map(|i| format!("state{i}")));
    w.write_record(&head)?;
    for i in 0..run.t.len() {
        let t = run.t[i];
        let mut row = vec![
            fmt(t),
            fmt(input.value(sim::Injection::Reference, t)),
            fmt(run.e[i]),
            fmt(run.q[i]),
            fmt(run.z[i]),
            fmt(run.u[i]),
            fmt(run.y[i]),
        ];
        row.extend(run.x[i].iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let mut w = writer(&out.join("events.csv"))?;
    let mut head = vec!["t_s".to_string()];
    head.extend((0..nr).map(|i| format!("x{i}_pre")));
    head.extend((0..nr).map(|i| format!("x{i}_post")));
    w.write_record(&head)?;
    let t0 = run.t.first().copied().unwrap_or(0.0);
    for ev in run.events.iter().filter(|e| e.t >= t0) {
        let mut row = vec![fmt(ev.t)];
        row.extend(ev.x_pre.iter().map(|v| fmt(*v)));
        row.extend(ev.x_post.iter().map(|v| fmt(*v)));
        w.write_record(&row)?;
    }
    w.flush()?;
    let spec = sim::fourier_spectrum(&run, SIG_E, res.n_max)?;
    write_spectrum(&out.join("harmonics.csv"), &spec)?;
    let om = hz(f_hz);
    let t_end = run.t.last().copied().unwrap_or(0.0);
    let per_period = run.events_between(t_end - 2.0 * PI / om, t_end).count();
    println!("converged = {}", run.converged);
    println!("periods = {}", run.periods);
    println!("resets_per_period = {per_period}");
    Ok(EXIT_OK)
}

/// Outcome of a validation run.
#[derive(Debug, Clone)]
pub struct Validation {
    pub rows: Vec<TableRow>,
    pub simulation_failed: bool,
}

impl Validation {
    pub fn exit_code(&self) -> i32 {
        if self.simulation_failed {
            4
        } else if self.rows.iter().all(|r| r.ordering_ok.unwrap_or(true)) {
            EXIT_OK
        } else {
            EXIT_CHECK_FAILED
        }
    }
}

fn sweep_resolved(name: &str, res: &Resolved, tau: Option<TauMode>, band: Option<(f64, f64)>, points: Option<usize>) -> CliResult<TableRow> {
    let mode = match (tau, res.tau) {
        (Some(m), _) => m,
        (None, TauSetting::Mode(m)) => m,
        (None, TauSetting::Seconds(_)) => {
            return Err(Error::Config(format!("{name}: validation needs a tau mode, not a fixed window")).into())
        }
    };
    let mut spec = SweepSpec::new(band.unwrap_or(res.band_hz), mode, res.omega_c_hz);
    spec.points = points.unwrap_or(res.points);
    spec.methods = res.methods.clone();
    spec.n_max = res.n_max;
    spec.sim = res.sim.clone();
    let report: SweepReport = metrics::sweep(&res.cfg, &spec)?;
    Ok(metrics::table_row(name, report, mode, metrics::CELL_TOLERANCE))
}

/// Sweeps configuration files and/or a built-in tuning set.
pub fn validate(
    configs: &[(String, Resolved)],
    tunings: &[NamedTuning],
    tau: Option<TauMode>,
    band: Option<(f64, f64)>,
    points: Option<usize>,
) -> CliResult<Validation> {
    let mut rows = Vec::new();
    for (name, res) in configs {
        rows.push(sweep_resolved(name, res, tau, band, points)?);
    }
    if !tunings.is_empty() {
        let mode = tau.unwrap_or(TauMode::Optimal);
        let band = band.unwrap_or((1.0, presets::OMEGA_C_HZ));
        let n = points.unwrap_or_else(|| SweepSpec::new(band, mode, presets::OMEGA_C_HZ).points);
        let table = metrics::table_reproduction(tunings, mode, band, n, metrics::CELL_TOLERANCE)?;
        rows.extend(table.rows);
    }
    let simulation_failed = rows.iter().any(|r| r.report.simulation_failed());
    Ok(Validation {
        rows,
        simulation_failed,
    })
}

pub fn write_validation(v: &Validation, out: &Path) -> CliResult<()> {
    fs::create_dir_all(out)?;
    let mut w = writer(&out.join("rows.csv"))?;
    w.write_record(["config", "f_hz", "method", "tau_mode", "ise", "linf"])?;
    for r in &v.rows {
        for m in &r.report.rows {
            w.write_record([
                r.name.clone(),
                fmt(m.f_hz),
                m.method.key().into(),
                m.tau_mode.key().into(),
                fmt(m.ise),
                fmt(m.linf),
            ])?;
        }
    }
    w.flush()?;
    let mut w = writer(&out.join("summary.csv"))?;
    w.write_record(["config", "method", "max_ise", "avg_ise", "max_linf", "avg_linf", "count", "ordering_ok"])?;
    for r in &v.rows {
        let ord = r.ordering_ok.map(|b| b.to_string()).unwrap_or_default();
        for a in &r.report.aggregates {
            w.write_record([
                r.name.clone(),
                a.method.key().into(),
                fmt(a.max_ise),
                fmt(a.avg_ise),
                fmt(a.max_linf),
                fmt(a.avg_linf),
                a.count.to_string(),
                ord.clone(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = writer(&out.join("failures.csv"))?;
    w.write_record(["config", "f_hz", "method", "kind", "reason", "message"])?;
    for r in &v.rows {
        for f in &r.report.failures {
            w.write_record([
                r.name.clone(),
                fmt(f.f_hz),
                f.method.map(|m| m.key().to_string()).unwrap_or_default(),
                format!("{:?}", f.kind).to_lowercase(),
                f.reason.to_string(),
                f.message.clone(),
            ])?;
        }
    }
    w.flush()?;
    let mut w = writer(&out.join("cells.csv"))?;
    w.write_record(["config", "metric", "method", "value_pct", "reference_pct", "pass"])?;
    for r in &v.rows {
        for c in &r.cells {
            w.write_record([
                r.name.clone(),
                c.metric.to_string(),
                c.method.key().into(),
                fmt(c.value),
                fmt(c.reference),
                c.pass.to_string(),
            ])?;
        }
    }
    w.flush()?;
    for r in &v.rows {
        let avg = |m| r.report.aggregate(m).map(|a| format!("{:.4}%", 100.0 * a.avg_ise)).unwrap_or("-".into());
        println!(
            "{}: avg ISE δ-CL {} CL-DF {} DF {}, ordering {}",
            r.name,
            avg(Method::DeltaCl),
            avg(Method::ClDf),
            avg(Method::Df),
            r.ordering_ok.map(|b| if b { "ok" } else { "violated" }).unwrap_or("n/a")
        );
    }
    Ok(())
}

/// Gain, margins and stability of the configured loop.
pub fn tune(res: &Resolved, out: Option<&Path>, emit: Option<&Path>) -> CliResult<i32> {
    let m = reset::phase_margin_bls(&res.cfg)?;
    let st = res.cfg.reset().ol_stable();
    let pairs: Vec<(String, String)> = vec![
        ("gain".into(), fmt(res.gain)),
        ("pm_bls_deg".into(), fmt(m.pm_bls_deg)),
        ("crossover_bls_hz".into(), fmt(m.crossover_bls_hz)),
        ("pm_df_deg".into(), fmt(m.pm_df_deg)),
        ("crossover_df_hz".into(), fmt(m.crossover_df_hz)),
        ("phi_rc_deg".into(), fmt(m.phi_rc_deg)),
        ("ol_stable".into(), st.stable.to_string()),
        ("ol_worst_modulus".into(), fmt(st.worst_modulus)),
    ];
    for (k, v) in &pairs {
        println!("{k} = {v}");
    }
    if let Some(p) = out {
        write_pairs(p, &pairs)?;
    }
    if let Some(p) = emit {
        write_effective(res, p)?;
    }
    Ok(EXIT_OK)
}

pub fn write_effective(res: &Resolved, path: &Path) -> CliResult<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    fs::write(path, config::to_toml(&res.effective)?)?;
    Ok(())
}

/// Loads and resolves a configuration file, named after its file stem.
pub fn load_resolved(path: &PathBuf) -> CliResult<(String, Resolved)> {
    let file = config::load(path)?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string());
    Ok((name, config::resolve(&file)?))
}
