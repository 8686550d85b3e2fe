use treebolic::geometry::{HtPoint, Node, Params};
use treebolic::simulate::{MeanAccumulator, PathState, Side, SimConfig, Simulator, StripDomain};
use treebolic::stats::ks_two_sample;

fn params() -> Params<f64> {
    Params::new(2.0, 2, 2.0, 0.5).unwrap()
}

#[test]
fn one_euler_step_has_the_generator_moments() {
    let p = params();
    let dt = 1e-4;
    let cfg = SimConfig::for_params(&p).with_seed(31).with_dt(dt);
    let sim = Simulator::new(p, cfg).unwrap();
    let mut rng = cfg.rng();
    let u0 = -0.5 * p.ln_q();
    let start = HtPoint::new(0.0, u0, Node::root(), &p).unwrap();
    let (mut du, mut dx) = (MeanAccumulator::default(), MeanAccumulator::default());
    for _ in 0..40_000 {
        let mut s = PathState::new(start.clone());
        // Lines are far away in units of √dt, so no step reaches one.
        assert!(sim.step_interior(&mut s, &mut rng).unwrap().is_none());
        du.push(s.point.u() - u0);
        dx.push(s.point.x());
    }
    let kappa = p.alpha() - 1.0;
    assert!(du.estimate().within(kappa * dt, 4.0), "{:?}", du.estimate());
    assert!(dx.estimate().within(0.0, 4.0));
    assert!((du.variance() / (2.0 * dt) - 1.0).abs() < 0.03, "{}", du.variance());
    let ex = (2.0 * u0).exp();
    assert!((dx.variance() / (2.0 * dt * ex) - 1.0).abs() < 0.03, "{}", dx.variance());
}

#[test]
fn exit_law_is_invariant_under_horizontal_shift() {
    let p = params();
    let star = StripDomain::star(Node::root());
    let a = Simulator::with_defaults(p, 41).exits_par(&HtPoint::origin(), &star, 4000, 8).unwrap();
    let b = Simulator::with_defaults(p, 42).exits_par(&HtPoint::on_line(2.5, Node::root(), &p), &star, 4000, 8).unwrap();
    let xa: Vec<f64> = a.iter().map(|e| e.point.x()).collect();
    let xb: Vec<f64> = b.iter().map(|e| e.point.x() - 2.5).collect();
    let r = ks_two_sample(&xa, &xb);
    assert!(r.p_value > 1e-3, "{r:?}");
}

#[test]
fn constant_data_is_reproduced_exactly() {
    let p = params();
    let sim = Simulator::with_defaults(p, 51);
    let domain = StripDomain::rect(Node::root(), 1.0).unwrap();
    let est = sim.dirichlet_mc_par(&HtPoint::origin(), &domain, |_| 1.0, 500, 4).unwrap();
    assert_eq!((est.mean, est.stderr, est.n), (1.0, 0.0, 500));
}

#[test]
fn exits_lie_on_the_boundary() {
    let p = params();
    let sim = Simulator::with_defaults(p, 61);
    let domain = StripDomain::ball(&Node::root(), 1, 2).unwrap().with_x_bound(1.5).unwrap();
    for e in sim.exits_par(&HtPoint::origin(), &domain, 2000, 4).unwrap() {
        match e.side {
            Side::Vertical => assert!((e.point.x().abs() - 1.5).abs() < 1e-9),
            Side::Horizontal => {
                let v = e.hit_line.as_ref().unwrap();
                assert!(domain.is_boundary_line(v));
                assert!(e.point.is_on_line() && e.point.edge() == v);
                assert!(e.point.x().abs() <= 1.5);
            }
        }
        assert!(e.time > 0.0);
    }
}

#[test]
fn results_depend_only_on_seed_and_replica_count() {
    let p = params();
    let sim = Simulator::with_defaults(p, 71);
    let domain = StripDomain::rect(Node::root(), 2.0).unwrap();
    let a = sim.exits_par(&HtPoint::origin(), &domain, 300, 3).unwrap();
    let b = sim.exits_par(&HtPoint::origin(), &domain, 300, 3).unwrap();
    assert_eq!(a, b);
    let other = Simulator::with_defaults(p, 72).exits_par(&HtPoint::origin(), &domain, 300, 3).unwrap();
    assert_ne!(a, other);
}

#[test]
fn smaller_steps_leave_the_exit_height_law_unchanged() {
    let p = params();
    let base = SimConfig::for_params(&p).with_seed(81);
    let coarse = Simulator::new(p, base).unwrap();
    let fine = Simulator::new(p, base.with_seed(82).with_dt(base.dt / 4.0)).unwrap();
    let domain = StripDomain::rect(Node::root(), 2.0).unwrap();
    let up = |s: &Simulator<f64>| {
        let mut acc = MeanAccumulator::default();
        for e in s.exits_par(&HtPoint::origin(), &domain, 6000, 8).unwrap() {
            acc.push(f64::from(u8::from(e.point.u() > 0.0)));
        }
        acc.estimate()
    };
    let (a, b) = (up(&coarse), up(&fine));
    let se = (a.stderr.powi(2) + b.stderr.powi(2)).sqrt();
    assert!((a.mean - b.mean).abs() < 3.5 * se, "{a:?} {b:?}");
}
