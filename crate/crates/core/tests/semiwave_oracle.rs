//! Semi-wave slope and spreading speed against an independent integrator.
//!
//! The oracle uses `q` as the independent variable on the monotone branch,
//! `dp/dq = (cw p - a q + b q^2) / (d p)`, started on the stable eigenline of
//! the saddle `(a/b, 0)` and integrated with fixed-step RK4 down to `q = 0`.

use fbshift::semiwave;
use fbshift::ModelParams;

fn oracle_slope(p: &ModelParams, cw: f64, steps: usize) -> f64 {
    let (d, a, b) = (p.d, p.a, p.b);
    let lambda = (cw - (cw * cw + 4.0 * a * d).sqrt()) / (2.0 * d);
    let delta = 1e-7;
    let q_start = a / b - delta;
    let f = |q: f64, pv: f64| (cw * pv - a * q + b * q * q) / (d * pv);
    let hq = -q_start / steps as f64;
    let (mut q, mut pv) = (q_start, -lambda * delta);
    for _ in 0..steps {
        let k1 = f(q, pv);
        let k2 = f(q + 0.5 * hq, pv + 0.5 * hq * k1);
        let k3 = f(q + 0.5 * hq, pv + 0.5 * hq * k2);
        let k4 = f(q + hq, pv + hq * k3);
        pv += hq / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
        q += hq;
    }
    pv
}

fn oracle_c0(p: &ModelParams) -> f64 {
    let balance = |c: f64| p.mu * oracle_slope(p, c, 4000) - c;
    let kpp = 2.0 * (p.a * p.d).sqrt();
    let mut lo = 0.0;
    let mut step = 1e-2;
    for _ in 0..2 {
        let mut c = lo;
        while balance(c + step) > 0.0 && c + step < kpp {
            c += step;
        }
        lo = c;
        step = 1e-4;
    }
    let (c1, c2) = (lo, lo + step);
    let (f1, f2) = (balance(c1), balance(c2));
    c1 - f1 * (c2 - c1) / (f2 - f1)
}

#[test]
fn oracle_reproduces_first_integral() {
    let p = ModelParams::default();
    assert!((oracle_slope(&p, 0.0, 20000) - (1.0f64 / 3.0).sqrt()).abs() < 1e-6);
}

#[test]
fn slope_at_unit_speed_matches_oracles() {
    let p = ModelParams::default();
    let main = semiwave::semiwave_slope(&p, 1.0).unwrap();
    let fine = semiwave::semiwave_slope_with_tol(&p, 1.0, semiwave::ODE_TOL / 10.0).unwrap();
    assert!((main - fine).abs() < 1e-6, "{main} vs finer tolerance {fine}");
    let rk4 = oracle_slope(&p, 1.0, 20000);
    assert!((main - rk4).abs() < 1e-6, "{main} vs rk4 {rk4}");
}

#[test]
fn slope_decreases_in_speed() {
    let p = ModelParams::default();
    let slopes: Vec<f64> = (0..20)
        .map(|k| semiwave::semiwave_slope(&p, 0.1 * k as f64).unwrap())
        .collect();
    assert!(slopes.windows(2).all(|w| w[1] < w[0]));
}

#[test]
fn c0_matches_brute_force_scan() {
    for mu in [0.5, 1.0, 4.0] {
        let p = ModelParams { mu, ..ModelParams::default() };
        let c0 = semiwave::compute_c0(&p).unwrap();
        let scan = oracle_c0(&p);
        assert!((c0 - scan).abs() < 1e-5, "mu = {mu}: {c0} vs scan {scan}");
    }
}

#[test]
fn c0_reference_value() {
    let c0 = semiwave::compute_c0(&ModelParams::default()).unwrap();
    assert!((c0 - 0.3643707237).abs() < 1e-8);
}

#[test]
fn c0_increases_toward_kpp_limit() {
    let c = |mu: f64| semiwave::compute_c0(&ModelParams { mu, ..ModelParams::default() }).unwrap();
    let values: Vec<f64> = [1.0, 10.0, 100.0, 1000.0].iter().map(|&m| c(m)).collect();
    assert!(values.windows(2).all(|w| w[1] > w[0]));
    assert!(values.iter().all(|&v| v < 2.0));
}

#[test]
fn inverse_speed_map_round_trips() {
    let p = ModelParams::default();
    let mu = semiwave::mu_for_speed(&p, 0.5).unwrap();
    let c = semiwave::compute_c0(&ModelParams { mu, ..p }).unwrap();
    assert!((c - 0.5).abs() < 1e-7);
}
