use lpdev::mc::estimate_tail;
use lpdev::probe::{
    check_condition_a, check_condition_b, fit_concentration_cells, fit_concentration_constant, Cell,
    ConditionB,
};
use lpdev::rates::{singular_rate, CustomRate};
use lpdev::specfun::m_p;
use lpdev::{
    Direction, Error, ProjectionConfig, RateFunction, Regime, RegimeSpec, SpeedClass, Statistic,
    TailQuery, Verdict, WLaw,
};
use proptest::prelude::*;
use statrs::function::gamma::{gamma_lr, gamma_ur};

fn crosspoly() -> RateFunction {
    RateFunction::new(RegimeSpec::new(1.0, Regime::CrosspolytopeLdp, 0.0).unwrap()).unwrap()
}

#[test]
fn crosspolytope_is_consistent_with_kls() {
    for t0 in [1.1, 1.5, 2.0, 5.0] {
        let v = check_condition_b(&crosspoly(), &ConditionB::new(t0)).unwrap();
        assert_eq!(v.verdict, Verdict::ConsistentWithKls);
        assert!((v.infimum - (1.0 - 1.0 / (t0 * t0)).sqrt()).abs() <= 1e-10, "t0={t0}");
    }
    let v = check_condition_b(&crosspoly(), &ConditionB::new(2.0)).unwrap();
    assert!((v.infimum - 0.8660).abs() < 5e-5);
}

#[test]
fn boundary_t0_is_rejected() {
    for t0 in [1.0, 0.3, f64::NAN] {
        let e = check_condition_b(&crosspoly(), &ConditionB::new(t0)).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
    }
}

#[test]
fn square_root_control_would_disprove() {
    let r = CustomRate { f: |x: f64| x.max(0.0).sqrt(), lln: 0.0 };
    let v = check_condition_b(&r, &ConditionB::new(1.5)).unwrap();
    assert_eq!(v.verdict, Verdict::WouldDisproveKls);
    let last = *v.values.last().unwrap();
    assert!((last - 1e-4).abs() < 1e-12);
}

#[test]
fn singular_rate_never_disproves() {
    let r = CustomRate { f: singular_rate, lln: 1.0 };
    let grids: [Vec<f64>; 3] = [
        vec![1.0],
        (0..=100).map(|i| i as f64 * 0.05).collect(),
        (0..=100).map(|i| -10.0 + i as f64 * 0.2).collect(),
    ];
    for g in grids {
        for tol in [0.0, 1e-12, 1e-3] {
            let v = check_condition_a(&r, SpeedClass::SubSqrtK, &g, tol).unwrap();
            assert_ne!(v.verdict, Verdict::WouldDisproveKls);
        }
    }
}

#[test]
fn finite_quadratic_rate_would_disprove() {
    let r = RateFunction::new(RegimeSpec::new(3.0, Regime::SubcriticalMdp, 0.5).unwrap()).unwrap();
    let g: Vec<f64> = (-20..=20).map(|i| i as f64 * 0.1).collect();
    let v = check_condition_a(&r, SpeedClass::SubSqrtK, &g, 1e-6).unwrap();
    assert_eq!(v.verdict, Verdict::WouldDisproveKls);
    assert!(matches!(check_condition_a(&r, SpeedClass::SuperSqrtK, &g, 1e-6), Err(Error::Usage(_))));
}

#[test]
fn verdicts_serialize() {
    let v = check_condition_b(&crosspoly(), &ConditionB::new(2.0)).unwrap();
    let s = serde_json::to_string(&v).unwrap();
    assert!(s.contains("\"consistent-with-kls\"") && s.contains("\"b_inf_criterion\""));
    let back: lpdev::KlsVerdict = serde_json::from_str(&s).unwrap();
    assert_eq!(serde_json::to_string(&back).unwrap(), s);
}

/// `P[|√(χ²_k/k) − 1| > t]`.
fn chi_deviation(k: usize, t: f64) -> f64 {
    let (a, kf) = (k as f64 / 2.0, k as f64);
    let upper = gamma_ur(a, kf * (1.0 + t).powi(2) / 2.0);
    let lower = if t < 1.0 { gamma_lr(a, kf * (1.0 - t).powi(2) / 2.0) } else { 0.0 };
    upper + lower
}

#[test]
fn gaussian_concentration_fit() {
    let mut cells = Vec::new();
    for k in [10, 50, 200, 1000] {
        for t in [0.05, 0.1, 0.2, 0.3] {
            let p = chi_deviation(k, t);
            cells.push(Cell { k, t, p_hat: p, p_lower: p });
        }
    }
    let fit = fit_concentration_cells(&cells).unwrap();
    assert!(fit.c_hat > 0.0);
    assert!(fit.c_max_consistent > 0.0);
    let c = 0.5 * fit.c_max_consistent;
    for cell in &cells {
        assert!(cell.p_lower <= 2.0 * (-c * cell.t * (cell.k as f64).sqrt()).exp());
    }
}

#[test]
fn sampled_crosspolytope_shows_no_violation() {
    let center = m_p(1.0).unwrap().sqrt();
    let mut estimates = Vec::new();
    for k in [10, 40, 100] {
        let cfg = ProjectionConfig::new(200, k, 1.0, WLaw::Exponential).unwrap();
        for t in [0.05, 0.1, 0.2] {
            let mut q = TailQuery::new(cfg, Statistic::ZOverSqrtK, t * center, 1.0, 100_000);
            q.direction = Direction::TwoSidedAbs;
            q.center = center;
            estimates.push(estimate_tail(&q, 31 + k as u64, 0).unwrap());
        }
    }
    let fit = fit_concentration_constant(&estimates).unwrap();
    assert!(fit.c_hat > 0.0, "{}", fit.c_hat);
    assert!(fit.c_max_consistent > 0.0);
}

#[test]
fn fit_requires_two_sided_estimates() {
    let cfg = ProjectionConfig::new(50, 5, 2.0, WLaw::Exponential).unwrap();
    let q = TailQuery::new(cfg, Statistic::ZOverSqrtK, 0.1, 1.0, 1000);
    let e = estimate_tail(&q, 0, 1).unwrap();
    assert!(matches!(fit_concentration_constant(&[e.clone(), e.clone(), e]), Err(Error::Usage(_))));
}

proptest! {
    #[test]
    fn planted_constant_is_recovered(c in 0.05f64..3.0, ks in prop::collection::vec(2usize..2000, 3..8)) {
        let cells: Vec<Cell> = ks
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let t = 0.05 * (1 + i) as f64;
                let p = 2.0 * (-c * t * (k as f64).sqrt()).exp();
                Cell { k, t, p_hat: p, p_lower: p }
            })
            .collect();
        let fit = fit_concentration_cells(&cells).unwrap();
        prop_assert!((fit.c_hat - c).abs() <= 0.01 * c);
        prop_assert!(fit.violations.is_empty());
    }

    #[test]
    fn crosspolytope_infimum_formula(t0 in 1.0001f64..50.0) {
        let v = check_condition_b(&crosspoly(), &ConditionB::new(t0)).unwrap();
        prop_assert!((v.infimum - (1.0 - 1.0 / (t0 * t0)).sqrt()).abs() <= 1e-10);
        prop_assert_eq!(v.verdict, Verdict::ConsistentWithKls);
    }
}
