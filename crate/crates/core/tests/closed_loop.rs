use resetfreq::analytic::{delta_cl, predict_error, Method};
use resetfreq::metrics::{sweep, SweepSpec, TauMode};
use resetfreq::presets::{cglp_loop, full_tau, TEST_TUNINGS};
use resetfreq::reset::hz;
use resetfreq::sim::{cl_fr, SimOptions};

fn rel(a: num_complex::Complex64, b: num_complex::Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn delta_cl_tracks_simulation_where_describing_function_does_not() {
    let t = TEST_TUNINGS[1].tuning;
    let opt = SimOptions::default();
    for f in [15.0, 30.0] {
        let om = hz(f);
        let cfg = cglp_loop(&t, full_tau(om)).unwrap();
        let exact = cl_fr(&cfg, om, 15, &opt).unwrap();
        let dcl = predict_error(&cfg, om, 15, Method::DeltaCl).unwrap();
        let cldf = predict_error(&cfg, om, 15, Method::ClDf).unwrap();
        let e1 = rel(dcl.get(1), exact.get(1));
        assert!(e1 < 1e-3, "{f} Hz: delta-cl first harmonic off by {e1}");
        let d3 = rel(dcl.get(3), exact.get(3));
        let c3 = rel(cldf.get(3), exact.get(3));
        assert!(d3 < c3, "{f} Hz: third harmonic delta-cl {d3} vs cl-df {c3}");
    }
}

#[test]
fn partial_reset_reduces_higher_harmonics() {
    let om = hz(20.0);
    let mut third = Vec::new();
    for gamma in [0.0, 0.4, 0.8] {
        let mut t = TEST_TUNINGS[1].tuning;
        t.gamma = gamma;
        let cfg = cglp_loop(&t, 0.0).unwrap();
        let r = delta_cl(&cfg, om, 5).unwrap();
        third.push(r.e.get(3).norm() / r.e.get(1).norm());
    }
    assert!(third[0] > third[1] && third[1] > third[2], "{third:?}");
}

#[test]
fn sweep_is_deterministic() {
    let cfg = cglp_loop(&TEST_TUNINGS[0].tuning, 0.0).unwrap();
    let mut spec = SweepSpec::new((10.0, 40.0), TauMode::Optimal, 100.0);
    spec.points = 3;
    spec.n_max = 99;
    let a = sweep(&cfg, &spec).unwrap();
    let b = sweep(&cfg, &spec).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.failures, b.failures);
    assert_eq!(a.rows.len(), 3 * Method::ALL.len());
}
