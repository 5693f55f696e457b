//! End-to-end solver checks against the shooting oracles and the
//! certificates every eigen result must carry.

use singeig_core::oracle::{oracle_dirichlet_1d, shoot_eig_1d, shoot_eig_radial, RadialKind, RadialSpec};
use singeig_core::{
    bisect_lambda, build_domain, default_bracket, power_iterate, power_iterate_minus, solve_dirichlet, DomainSpec,
    EigConfig, EigResult, Grid, OperatorSpec, ScalarField, SolveConfig,
};

fn certify(g: &Grid, r: &EigResult, cfg: &EigConfig, sign: f64) {
    for i in g.boundary_nodes() {
        assert_eq!(r.phi.get(i), 0.0, "boundary node {i}");
    }
    for &i in g.interior() {
        assert!(sign * r.phi.get(i) > 0.0, "interior node {i} has value {}", r.phi.get(i));
    }
    assert!((r.phi.sup_norm() - 1.0).abs() < 1e-12);
    assert!(r.residual <= cfg.residual_tol * 10.0, "residual {:e}", r.residual);
    // Bisection returns an end of its bracket, so allow the eigenvalue tolerance.
    let slack = 1.0 + cfg.eig_tol.max(1e-9);
    assert!(r.cw_lower <= r.lambda * slack && r.lambda <= r.cw_upper * slack, "{} not in [{}, {}]", r.lambda, r.cw_lower, r.cw_upper);
    assert!(r.proper_shift);
}

#[test]
fn interval_pucci_pair_matches_oracles() {
    let g = build_domain(&DomainSpec::interval(1.0), 128).unwrap();
    let cfg = EigConfig::default();
    for alpha in [0.0, -0.3] {
        let spec = OperatorSpec::pucci_plus(1.0, 3.0, alpha);
        let plus = power_iterate(&spec, &g, &cfg, 1).unwrap();
        let minus = power_iterate_minus(&spec, &g, &cfg, 1).unwrap();
        certify(&g, &plus, &cfg, 1.0);
        certify(&g, &minus, &cfg, -1.0);
        let rs = RadialSpec::interval(RadialKind::PucciPlus, 1.0, 3.0, alpha, 1.0);
        let (op, om) = (shoot_eig_1d(&rs).unwrap(), shoot_eig_1d(&rs.reflected()).unwrap());
        assert!((plus.lambda - op).abs() < 1e-2 * op, "{} vs {op}", plus.lambda);
        assert!((minus.lambda - om).abs() < 1e-2 * om, "{} vs {om}", minus.lambda);
        // In 1D the plus operator sees the slope a on u'' < 0.
        assert!(plus.lambda < minus.lambda);
    }
}

#[test]
fn disk_eigenpair_is_certified() {
    let g = build_domain(&DomainSpec::disk(1.0), 48).unwrap();
    let cfg = EigConfig::default();
    let spec = OperatorSpec::pucci_minus(1.0, 2.0, -0.5);
    let r = power_iterate(&spec, &g, &cfg, 3).unwrap();
    certify(&g, &r, &cfg, 1.0);
    let oracle = shoot_eig_radial(&RadialSpec::disk(RadialKind::PucciMinus, 1.0, 2.0, -0.5, 1.0)).unwrap();
    assert!((r.lambda - oracle).abs() < 0.05 * oracle, "{} vs {oracle}", r.lambda);
}

#[test]
fn bisection_brackets_power_on_rectangle() {
    let g = build_domain(&DomainSpec::rectangle(1.0, 0.7), 24).unwrap();
    let cfg = EigConfig { eig_tol: 1e-7, ..EigConfig::default() };
    let spec = OperatorSpec::pucci_plus(1.0, 1.5, 0.0);
    let p = power_iterate(&spec, &g, &cfg, 0).unwrap();
    let (lo, hi) = default_bracket(&spec, &g).unwrap();
    assert!(lo < p.lambda && p.lambda < hi);
    let b = bisect_lambda(&spec, &g, &cfg, lo, hi).unwrap();
    assert!((p.lambda - b.lambda).abs() < 4e-7 * p.lambda, "{} vs {}", p.lambda, b.lambda);
    certify(&g, &b, &cfg, 1.0);
}

#[test]
fn dirichlet_matches_shooting_profile() {
    let g = build_domain(&DomainSpec::interval(1.0), 200).unwrap();
    for (alpha, a, big_a, f) in [(-0.25, 1.0, 2.0, -1.0), (-0.5, 1.0, 1.0, -2.0), (0.0, 0.5, 1.0, -1.0)] {
        let spec = OperatorSpec::pucci_plus(a, big_a, alpha);
        let mut rhs = ScalarField::constant(&g, f);
        for i in g.boundary_nodes().collect::<Vec<_>>() {
            rhs.set(i, 0.0);
        }
        let (u, rep) = solve_dirichlet(&spec, &g, &rhs, 0.0, &SolveConfig::default()).unwrap();
        assert!(rep.converged);
        let profile = oracle_dirichlet_1d(&RadialSpec::interval(RadialKind::PucciPlus, a, big_a, alpha, 1.0), f).unwrap();
        let mut err: f64 = 0.0;
        for &i in g.interior() {
            err = err.max((u.get(i) - profile.value(g.coord(i)[0]).unwrap()).abs());
        }
        assert!(err < 1e-2 * u.sup_norm(), "alpha {alpha}: error {err:e} on scale {:e}", u.sup_norm());
    }
}

#[test]
fn drift_and_zeroth_order_shift_the_eigenvalue() {
    let g = build_domain(&DomainSpec::interval(1.0), 128).unwrap();
    let cfg = EigConfig::default();
    let base = OperatorSpec::laplacian(0.0);
    let l0 = power_iterate(&base, &g, &cfg, 0).unwrap().lambda;
    // u'' + c u + lambda u = 0: a constant c moves lambda by -c.
    let shifted = base.clone().with_zeroth(singeig_core::Zeroth::Constant(-2.0));
    let l1 = power_iterate(&shifted, &g, &cfg, 0).unwrap().lambda;
    assert!((l1 - (l0 + 2.0)).abs() < 1e-6, "{l1} vs {}", l0 + 2.0);
    // u'' + b u' + lambda u = 0 on (0,1) has lambda = pi^2 + b^2/4 in the limit.
    let drift = base.with_drift(singeig_core::Drift::Constant([2.0, 0.0]));
    let r = power_iterate(&drift, &g, &cfg, 0).unwrap();
    let exact = std::f64::consts::PI.powi(2) + 1.0;
    assert!((r.lambda - exact).abs() < 2e-2 * exact, "{} vs {exact}", r.lambda);
    certify(&g, &r, &cfg, 1.0);
}
