use fbshift::classifier::{self, Outcome, Policy, References};
use fbshift::elliptic::{self, EllipticConfig};
use fbshift::fbsolver::{self, Controls, InitialKind};
use fbshift::semiwave;
use fbshift::{EnvironmentProfile, Error, ModelParams};

fn controls(n: usize) -> Controls {
    Controls {
        n_nodes: n,
        ..Controls::default()
    }
}

#[test]
fn solution_stays_below_comparison_bound() {
    let env = EnvironmentProfile::new(ModelParams::default()).unwrap();
    for sigma in [0.5, 3.0] {
        let u0 = fbsolver::make_initial(&env.params, InitialKind::CompactPolynomial, sigma).unwrap();
        let bound = u0.max_value().max(env.params.plateau()) + 1e-8;
        let traj = fbsolver::simulate(&env, &u0, 30.0, &controls(400)).unwrap();
        let peak = traj.series.iter().map(|r| r.max_u).fold(0.0, f64::max);
        assert!(peak <= bound, "sigma = {sigma}: max_u {peak} > {bound}");
    }
}

#[test]
fn front_is_nondecreasing_with_bounded_speed() {
    let env = EnvironmentProfile::new(ModelParams::default()).unwrap();
    let u0 = fbsolver::make_initial(&env.params, InitialKind::CosineBump, 2.0).unwrap();
    let traj = fbsolver::simulate(&env, &u0, 30.0, &controls(400)).unwrap();
    assert!(traj.series.windows(2).all(|w| w[1].h >= w[0].h));
    assert!(traj.series.iter().all(|r| r.hdot >= 0.0 && r.hdot < 5.0));
}

#[test]
fn homogeneous_front_moves_at_c0() {
    let p = ModelParams::default();
    let env = EnvironmentProfile::new(p).unwrap().homogeneous(true);
    let c0 = semiwave::compute_c0(&p).unwrap();
    let u0 = fbsolver::make_initial(&p, InitialKind::CosineBump, 1.0).unwrap();
    let traj = fbsolver::simulate(&env, &u0, 100.0, &controls(800)).unwrap();
    let hdot = traj.last().hdot;
    assert!((hdot - c0).abs() < 0.05 * c0, "h'(100) = {hdot}, c0 = {c0}");
}

#[test]
fn larger_amplitude_dominates() {
    let env = EnvironmentProfile::new(ModelParams::default()).unwrap();
    let ctl = Controls {
        n_nodes: 400,
        snapshot_times: vec![5.0, 10.0, 20.0],
        ..Controls::default()
    };
    let run = |sigma: f64| {
        let u0 = fbsolver::make_initial(&env.params, InitialKind::CosineBump, sigma).unwrap();
        fbsolver::simulate(&env, &u0, 20.0, &ctl).unwrap()
    };
    let (small, big) = (run(0.8), run(1.2));
    for (a, b) in small.series.iter().zip(&big.series) {
        assert_eq!(a.t, b.t);
        assert!(a.h <= b.h + 1e-9);
    }
    for (a, b) in small.snapshots.iter().zip(&big.snapshots) {
        let upper = |x: f64| {
            if x >= b.h {
                return 0.0;
            }
            let k = b.points.partition_point(|p| p.0 <= x).max(1);
            let ((x0, y0), (x1, y1)) = (b.points[k - 1], b.points[k]);
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        for &(x, u) in &a.points {
            assert!(u <= upper(x) + 1e-3, "t = {}, x = {x}: {u} > {}", a.t, upper(x));
        }
    }
}

#[test]
fn sufficient_spreading_condition() {
    let base = ModelParams::default();
    let env = EnvironmentProfile::new(base).unwrap();
    let cfg = EllipticConfig::for_env(&env);
    let (l_zero, v_zero) = elliptic::l_of_zero(&env, &cfg).unwrap();
    let params = ModelParams { h0: l_zero, ..base };
    let env = EnvironmentProfile::new(params).unwrap();
    let kind = InitialKind::stationary_envelope(&env, &cfg).unwrap();

    let big = fbsolver::make_initial(&params, kind.clone(), 2.0).unwrap();
    let small = fbsolver::make_initial(&params, kind, 0.5).unwrap();
    assert!(classifier::check_spreading_sufficient(&big, l_zero, &v_zero));
    assert!(!classifier::check_spreading_sufficient(&small, l_zero, &v_zero));

    let refs = References::compute(&env, &cfg).unwrap();
    let (class, _) =
        classifier::run_and_classify(&env, &big, 200.0, &Controls::default(), &refs, &Policy::default()).unwrap();
    assert_eq!(class.outcome, Outcome::Spreading);
}

#[test]
fn short_front_below_l_star_cannot_balance() {
    let env = EnvironmentProfile::new(ModelParams::default()).unwrap();
    let cfg = EllipticConfig::for_env(&env);
    let l_star = elliptic::compute_l_star(&env, &cfg).unwrap().l_star;
    let m = env.params.plateau().max(1.0);
    let prof = elliptic::solve_bvp(&env, 60.0, l_star - 0.3, m, &cfg).unwrap();
    assert!(-env.params.mu * prof.slope_right < env.params.c);
}

#[test]
fn stationary_endpoint_decreases_in_l() {
    let env = EnvironmentProfile::new(ModelParams::default()).unwrap();
    let cfg = EllipticConfig::for_env(&env);
    let ends: Vec<f64> = [0.0, 0.5, 3.0, 20.0]
        .iter()
        .map(|&l| elliptic::find_l_of_l(&env, l, &cfg).unwrap().0)
        .collect();
    assert!(ends.windows(2).all(|w| w[1] < w[0]));
    let l_star = elliptic::compute_l_star(&env, &cfg).unwrap().l_star;
    assert!(ends.iter().all(|&e| e > l_star - 1e-3));
}

#[test]
fn no_stationary_balance_at_or_above_c0() {
    let p = ModelParams::default();
    let c0 = semiwave::compute_c0(&p).unwrap();
    let env = EnvironmentProfile::new(ModelParams { c: c0 + 0.01, ..p }).unwrap();
    let cfg = EllipticConfig::for_env(&env);
    assert!(matches!(elliptic::l_of_zero(&env, &cfg), Err(Error::PreconditionViolated(_))));
    assert!(matches!(elliptic::compute_l_star(&env, &cfg), Err(Error::PreconditionViolated(_))));
}

#[test]
fn rejects_inadmissible_inputs() {
    let p = ModelParams::default();
    assert!(matches!(
        fbsolver::make_initial(&p, InitialKind::CosineBump, -1.0),
        Err(Error::Domain(_))
    ));
    assert!(EnvironmentProfile::new(ModelParams { a0: 0.5, ..p }).is_err());
    assert!(EnvironmentProfile::new(ModelParams { d: 0.0, ..p }).is_err());
    let env = EnvironmentProfile::new(p).unwrap();
    let u0 = fbsolver::make_initial(&p, InitialKind::CosineBump, 1.0).unwrap();
    let bad = Controls {
        dt0: -1.0,
        ..Controls::default()
    };
    assert!(matches!(
        fbsolver::simulate(&env, &u0, 1.0, &bad),
        Err(Error::PreconditionViolated(_))
    ));
}
