use proptest::prelude::*;
use scoremix_core::analysis;
use scoremix_core::datasets;
use scoremix_core::dynamics;
use scoremix_core::geometry::{self, EnumerationConfig};
use scoremix_core::heat;
use scoremix_core::measures::DEFAULT_TIE_TOL;
use scoremix_core::{Classification, EmpiricalMeasure, IntegratorConfig, MixedScoreModel};

fn cfg(dtau: f64, tau_max: f64) -> IntegratorConfig {
    IntegratorConfig { dtau, tau_max, ..IntegratorConfig::default() }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>().sqrt()
}

fn point(d: usize, r: f64) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-r..r, d)
}

fn cloud(d: usize) -> impl Strategy<Value = EmpiricalMeasure> {
    (prop::collection::vec(point(d, 4.0), 1..7), prop::collection::vec(0.1f64..1.0, 7))
        .prop_map(|(pts, w)| {
            let n = pts.len();
            EmpiricalMeasure::new(pts, Some(w[..n].to_vec()), "p").unwrap()
        })
}

fn log_time() -> impl Strategy<Value = f64> {
    (-4.0f64..0.0).prop_map(|e| 10f64.powf(e))
}

fn moe_model(d: usize) -> impl Strategy<Value = MixedScoreModel> {
    (cloud(d), cloud(d), 0.0f64..=1.0)
        .prop_map(|(a, b, l)| MixedScoreModel::new(a, b, l, 1.0, 0.0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn distance_is_nonnegative_and_vanishes_on_support(mu in cloud(2), x in point(2, 6.0)) {
        prop_assert!(mu.distance_squared(&x).unwrap() >= 0.0);
        for p in mu.points() {
            prop_assert_eq!(mu.distance_squared(p).unwrap(), 0.0);
        }
    }

    #[test]
    fn nearest_distance_matches_squared(mu in cloud(3), x in point(3, 6.0)) {
        let n = mu.nearest_set(&x, DEFAULT_TIE_TOL).unwrap();
        prop_assert!((n.distance - mu.distance_squared(&x).unwrap().sqrt()).abs() <= 1e-12);
        prop_assert!(!n.indices.is_empty());
    }

    #[test]
    fn distance_is_one_lipschitz(mu in cloud(2), x in point(2, 6.0), y in point(2, 6.0)) {
        let dx = mu.distance_squared(&x).unwrap().sqrt();
        let dy = mu.distance_squared(&y).unwrap().sqrt();
        prop_assert!((dx - dy).abs() <= dist(&x, &y) + 1e-12);
    }

    #[test]
    fn duplicate_points_do_not_change_density(mu in cloud(2), x in point(2, 6.0), t in log_time()) {
        let pts: Vec<Vec<f64>> = mu.points().map(<[f64]>::to_vec).collect();
        let mut dup = pts.clone();
        dup.push(pts[0].clone());
        let mut w: Vec<f64> = mu.weights().to_vec();
        let half = w[0] / 2.0;
        w[0] = half;
        w.push(half);
        let split = EmpiricalMeasure::new(dup, Some(w), "d").unwrap();
        let a = heat::log_heat_density(&mu, &x, t).unwrap();
        let b = heat::log_heat_density(&split, &x, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn score_is_gradient_of_log_density(mu in cloud(2), x in point(2, 5.0), t in log_time()) {
        let s = heat::score(&mu, &x, t).unwrap();
        let h = 1e-3 * t;
        let tol = 1e-6f64.max(1e-4 * norm(&s));
        for j in 0..2 {
            let mut xp = x.clone();
            xp[j] += h;
            let mut xm = x.clone();
            xm[j] -= h;
            let fd = (heat::log_heat_density(&mu, &xp, t).unwrap() - heat::log_heat_density(&mu, &xm, t).unwrap()) / (2.0 * h);
            prop_assert!((fd - s[j]).abs() <= tol, "fd {} score {} tol {}", fd, s[j], tol);
        }
    }

    #[test]
    fn mean_shift_identity(mu in cloud(3), x in point(3, 6.0), t in log_time()) {
        let s = heat::score(&mu, &x, t).unwrap();
        let m = heat::barycenter(&mu, &x, t).unwrap();
        for j in 0..3 {
            prop_assert!((s[j] * 2.0 * t + x[j] - m[j]).abs() <= 1e-12 * (1.0 + x[j].abs() + m[j].abs()));
        }
    }

    #[test]
    fn barycenter_stays_in_hull(mu in cloud(2), x in point(2, 8.0), t in log_time()) {
        let m = heat::barycenter(&mu, &x, t).unwrap();
        let pts: Vec<Vec<f64>> = mu.points().map(<[f64]>::to_vec).collect();
        prop_assert!(analysis::distance_to_hull(&pts, &m).unwrap() <= 1e-9);
        let (lo, hi) = mu.bounding_box();
        for j in 0..2 {
            prop_assert!(m[j] >= lo[j] - 1e-9 && m[j] <= hi[j] + 1e-9);
        }
    }

    #[test]
    fn extreme_inputs_stay_finite(mu in cloud(2), dir in point(2, 1.0), r in 0.0f64..1e3, e in -12.0f64..0.0, l in 0.0f64..4.0) {
        let t = 10f64.powf(e);
        let x: Vec<f64> = dir.iter().map(|c| c * r).collect();
        prop_assert!(heat::log_heat_density(&mu, &x, t).unwrap().is_finite());
        prop_assert!(heat::score(&mu, &x, t).unwrap().iter().all(|v| v.is_finite()));
        let model = MixedScoreModel::new(mu.clone(), mu, l, 1.0, 0.0).unwrap();
        let ev = model.evaluate_all(&x, t).unwrap();
        prop_assert!(ev.f_lambda.is_finite());
        prop_assert!(ev.mixed_score.iter().chain(&ev.grad_f_lambda).all(|v| v.is_finite()));
    }

    #[test]
    fn clarke_matches_outer_in_moe(model in moe_model(2), x in point(2, 6.0)) {
        let c = geometry::clarke_subdifferential(&model, &x).unwrap();
        let o = geometry::outer_clarke_subdifferential(&model, &x, DEFAULT_TIE_TOL).unwrap();
        prop_assert_eq!(c.generators, o.generators);
    }

    #[test]
    fn clarke_matches_outer_at_constructed_ties(model in moe_model(1)) {
        let a: Vec<f64> = model.mu1().points().map(|p| p[0]).collect();
        let b: Vec<f64> = model.mu2().points().map(|p| p[0]).collect();
        for s in [&a, &b] {
            for i in 0..s.len() {
                for j in (i + 1)..s.len() {
                    let x = [0.5 * (s[i] + s[j])];
                    let c = geometry::clarke_subdifferential(&model, &x).unwrap();
                    let o = geometry::outer_clarke_subdifferential(&model, &x, DEFAULT_TIE_TOL).unwrap();
                    prop_assert_eq!(c.generators, o.generators);
                }
            }
        }
    }

    #[test]
    fn potential_is_coercive(a in cloud(2), b in cloud(2), l in 0.0f64..3.0, dir in point(2, 1.0), r in 0.0f64..100.0) {
        prop_assume!(norm(&dir) > 1e-3);
        let model = MixedScoreModel::new(a, b, l, 1.0, 0.0).unwrap();
        let rad = model.mu1().radius().max(model.mu2().radius());
        let c = 2.0 * rad * (l.abs() + (1.0 - l).abs()) + rad * rad;
        let x: Vec<f64> = dir.iter().map(|v| v * r / norm(&dir)).collect();
        let phi = geometry::phi(&model, &x).unwrap();
        prop_assert!(phi >= r * r - c * r - c - 1e-9 * (1.0 + r * r));
    }

    #[test]
    fn potential_minus_square_is_midpoint_concave(model in moe_model(2), a in point(2, 6.0), b in point(2, 6.0)) {
        let g = |y: &[f64]| geometry::phi(&model, y).unwrap() - y.iter().map(|v| v * v).sum::<f64>();
        let m: Vec<f64> = a.iter().zip(&b).map(|(p, q)| 0.5 * (p + q)).collect();
        prop_assert!(g(&m) >= 0.5 * (g(&a) + g(&b)) - 1e-10);
    }

    #[test]
    fn energy_factor_is_lambda_free_for_moe(l1 in 0.0f64..=1.0, l2 in 0.0f64..=1.0, p in 1.0f64..5.0, t in 1e-3f64..=1.0) {
        let a = datasets::line_model(l1, 0.3).unwrap();
        let b = a.with_lambda(l2).unwrap();
        let fa = analysis::energy_bound_factor(&a, p, t, analysis::EnergyRegime::Moe).unwrap();
        let fb = analysis::energy_bound_factor(&b, p, t, analysis::EnergyRegime::Moe).unwrap();
        prop_assert_eq!(fa, fb);
    }

    #[test]
    fn energy_factor_grows_with_guidance(l in 1.01f64..4.0, dl in 0.01f64..1.0, p in 1.5f64..5.0, t in 1e-2f64..0.99) {
        let a = datasets::line_model(l, 0.0).unwrap();
        let b = a.with_lambda(l + dl).unwrap();
        let fa = analysis::energy_bound_factor(&a, p, t, analysis::EnergyRegime::Cfg).unwrap();
        let fb = analysis::energy_bound_factor(&b, p, t, analysis::EnergyRegime::Cfg).unwrap();
        prop_assume!(fb.is_finite());
        prop_assert!(fb > fa);
        let later = analysis::energy_bound_factor(&a, p, (t * 1.01).min(1.0), analysis::EnergyRegime::Cfg).unwrap();
        prop_assert!(later <= fa);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn moe_minimizers_are_rigid_and_off_interface(l in 0.05f64..0.95, seed in any::<u64>()) {
        let model = datasets::line_model(l, 0.0).unwrap();
        let set = geometry::enumerate_critical_points(&model, &EnumerationConfig::default()).unwrap();
        let mut rng = seed;
        for r in set.local_minimizers() {
            prop_assert_eq!(r.classification, Classification::SmoothLocalMin);
            prop_assert!(!geometry::nd_indicator(&model, &r.x_star, DEFAULT_TIE_TOL).unwrap().in_nd());
            let phi0 = geometry::phi(&model, &r.x_star).unwrap();
            for _ in 0..100 {
                rng = rng.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                let h = ((rng >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 2e-3;
                let dphi = geometry::phi(&model, &[r.x_star[0] + h]).unwrap() - phi0;
                prop_assert!((dphi - h * h).abs() <= 1e-10);
            }
            let c = geometry::clarke_subdifferential(&model, &r.x_star).unwrap();
            prop_assert!(norm(&geometry::min_norm_element(&c).unwrap()) <= 1e-10);
        }
    }

    #[test]
    fn similarity_paths_are_confined(l in 0.0f64..=1.0, x0 in -8.0f64..12.0) {
        let model = datasets::line_model(l, 0.0).unwrap();
        let tr = dynamics::simulate_similarity_ode(&model, &[x0], &cfg(1e-2, 9.21)).unwrap();
        let r = analysis::confinement_check(&model, &tr, 1.1).unwrap();
        prop_assert!(r.pass, "worst {}", r.worst_violation);
    }

    #[test]
    fn reproducible_sde_paths(seed in any::<u64>(), x0 in -3.0f64..6.0) {
        let model = datasets::line_model(0.5, 0.2).unwrap();
        let c = IntegratorConfig { seed, ..cfg(1e-2, 3.0) };
        let a = dynamics::simulate_similarity_sde(&model, &[x0], &c).unwrap();
        let b = dynamics::simulate_similarity_sde(&model, &[x0], &c).unwrap();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn lyapunov_defect_halves_with_step(x0 in -3.0f64..7.0) {
        let model = datasets::line_model(0.5, 0.0).unwrap();
        let defect = |dtau: f64| {
            let tr = dynamics::simulate_limit_inclusion(&model, &[x0], &cfg(dtau, 8.0)).unwrap();
            let r = analysis::lyapunov_audit(&model, &tr).unwrap();
            assert!(r.pass);
            r.max_observed("identity").unwrap()
        };
        let (d1, d2) = (defect(1e-2), defect(5e-3));
        prop_assume!(d1 > 1e-8);
        let ratio = d2 / d1;
        prop_assert!((0.35..=0.65).contains(&ratio), "ratio {}", ratio);
    }
}

#[test]
fn plane_moe_minimizers_are_rigid() {
    let model = datasets::plane_model(0.5, 0.0).unwrap();
    let set = geometry::enumerate_critical_points(&model, &EnumerationConfig::default()).unwrap();
    let mut count = 0;
    for r in set.local_minimizers() {
        count += 1;
        let phi0 = geometry::phi(&model, &r.x_star).unwrap();
        for k in 0..100 {
            let a = k as f64 * 0.0628;
            let s = 1e-3 * (1.0 + (k % 7) as f64) / 7.0;
            let h = [s * a.cos(), s * a.sin()];
            let y = [r.x_star[0] + h[0], r.x_star[1] + h[1]];
            let dphi = geometry::phi(&model, &y).unwrap() - phi0;
            assert!((dphi - s * s).abs() <= 1e-10);
        }
    }
    assert!(count > 0);
}

#[test]
fn drift_gap_decays_exponentially_off_interface() {
    let model = datasets::line_model(0.5, 0.0).unwrap();
    let c = model.mu1().min_weight().min(model.mu2().min_weight());
    let diam = model.mu1().diameter().max(model.mu2().diameter());
    let bound_c = 2.0 * diam / c * (model.lambda().abs() + (1.0 - model.lambda()).abs());
    for x in [-0.7, 0.2, 1.1, 1.6, 3.0, 6.0] {
        let eta = analysis::gradient_decay_margin(&model, &[x]).unwrap();
        for t in [1e-3, 5e-4, 1e-4] {
            let gap = 0.25 * analysis::gradient_gap(&model, &[x], t).unwrap();
            assert!(gap <= bound_c * (-eta / t).exp(), "x {x} t {t}: {gap}");
        }
    }
}

#[test]
fn euler_step_refinement_is_first_order() {
    let dirac = EmpiricalMeasure::dirac(vec![0.4], "a").unwrap();
    let fixtures = [
        (MixedScoreModel::new(dirac.clone(), dirac, 1.0, 1.0, 0.0).unwrap(), 2.0),
        (datasets::line_model(0.5, 0.0).unwrap(), 1.4),
        (datasets::plane_model(0.5, 0.0).unwrap(), 0.3),
    ];
    for (model, x) in fixtures {
        let x0 = vec![x; model.dim()];
        let end = |h: f64| dynamics::simulate_similarity_ode(&model, &x0, &cfg(h, 4.0)).unwrap().terminal().to_vec();
        let (a, b, c) = (end(2e-2), end(1e-2), end(5e-3));
        let ratio = dist(&a, &b) / dist(&b, &c);
        assert!((1.5..=2.5).contains(&ratio), "ratio {ratio}");
    }
}

#[test]
fn rate_slopes_at_smooth_minimizers() {
    for model in [datasets::line_model(0.5, 0.0).unwrap(), datasets::plane_model(0.5, 0.0).unwrap()] {
        let set = geometry::enumerate_critical_points(&model, &EnumerationConfig::default()).unwrap();
        for r in set.local_minimizers() {
            let x0: Vec<f64> = r.x_star.iter().map(|v| v + 0.05).collect();
            let tr = dynamics::simulate_similarity_ode(&model, &x0, &cfg(1e-2, 9.21)).unwrap();
            if dist(tr.terminal(), &r.x_star) > 1e-3 {
                continue;
            }
            let fit = analysis::rate_fit(&tr, &r.x_star, 0.5).unwrap();
            assert!((-0.55..=-0.45).contains(&fit.slope), "slope {} at {:?}", fit.slope, r.x_star);
        }
    }
}

#[test]
fn reports_are_deterministic() {
    let model = datasets::line_model(0.5, 0.0).unwrap();
    let xs: Vec<Vec<f64>> = (0..50).map(|i| vec![-2.0 + 0.17 * i as f64]).collect();
    let a = analysis::semiconcavity_check(&model, &xs, &[1e-2, 0.3], 100, 9).unwrap();
    let b = analysis::semiconcavity_check(&model, &xs, &[1e-2, 0.3], 100, 9).unwrap();
    assert_eq!(a, b);
    let a = analysis::varadhan_value_gap(&model, &xs, &[1e-3]).unwrap();
    assert_eq!(a, analysis::varadhan_value_gap(&model, &xs, &[1e-3]).unwrap());
}

#[test]
fn value_gap_shrinks_with_time() {
    let model = datasets::plane_model(0.5, 0.0).unwrap();
    let xs = geometry::SearchBox::around(&model, 0.25).grid(32);
    let mut shrinking = 0;
    for x in &xs {
        let phi = geometry::phi(&model, x).unwrap();
        let gaps: Vec<f64> = [1e-2, 1e-3, 1e-4]
            .iter()
            .map(|&t| (phi - model.rescaled_potential(x, t).unwrap()).abs())
            .collect();
        shrinking += usize::from(gaps[0] >= gaps[1] && gaps[1] >= gaps[2]);
    }
    assert!(shrinking * 100 >= 95 * xs.len(), "{shrinking}/{}", xs.len());
}
