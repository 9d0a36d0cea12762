//! Acceptance suite: one line per criterion, with wall-clock bounds.

use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use scoremix_core::analysis::{self, EnergyRegime};
use scoremix_core::datasets;
use scoremix_core::dynamics::{self, EnsembleMode, InitialSampler};
use scoremix_core::geometry::{self, EnumerationConfig, SearchBox};
use scoremix_core::measures::DEFAULT_TIE_TOL;
use scoremix_core::{Classification, EmpiricalMeasure, IntegratorConfig, MixedScoreModel};

fn cfg(dtau: f64, tau_max: f64) -> IntegratorConfig {
    IntegratorConfig { dtau, tau_max, ..IntegratorConfig::default() }
}

fn dirac_model(a: f64) -> MixedScoreModel {
    let m = EmpiricalMeasure::dirac(vec![a], "a").unwrap();
    MixedScoreModel::new(m.clone(), m, 1.0, 1.0, 0.0).unwrap()
}

fn minimizers(model: &MixedScoreModel) -> Vec<Vec<f64>> {
    let set = geometry::enumerate_critical_points(model, &EnumerationConfig::default()).unwrap();
    set.local_minimizers().map(|r| r.x_star.clone()).collect()
}

fn linspace(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
}

fn grid_points(model: &MixedScoreModel, n_per_axis: usize) -> Vec<Vec<f64>> {
    SearchBox::around(model, 0.25).grid(n_per_axis)
}

fn ac1_cfg_interface() {
    let model = datasets::line_model(2.0, 0.0).unwrap();
    let set = geometry::enumerate_critical_points(&model, &EnumerationConfig::default()).unwrap();
    let hit = set
        .local_minimizers()
        .find(|r| (r.x_star[0] - 0.75).abs() < 1e-3)
        .expect("minimizer at 0.75");
    assert_eq!(hit.classification, Classification::InterfacePoint);
    let traj = dynamics::simulate_similarity_ode(&model, &[0.9], &cfg(1e-2, 9.2)).unwrap();
    let end = traj.terminal()[0];
    assert!((end - 0.75).abs() < 1e-2, "terminal {end}");
}

fn ac2_endpoints() {
    for (model, a1, a2) in [
        (datasets::line_model(1.0, 0.0).unwrap(), datasets::line_a1(), datasets::line_a2()),
        (datasets::plane_model(1.0, 0.0).unwrap(), datasets::plane_a1(), datasets::plane_a2()),
    ] {
        let sorted = |m: &EmpiricalMeasure| {
            let mut v: Vec<Vec<f64>> = m.points().map(<[f64]>::to_vec).collect();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let mut got1 = minimizers(&model);
        got1.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got1, sorted(&a1));
        let mut got0 = minimizers(&model.with_lambda(0.0).unwrap());
        got0.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(got0, sorted(&a2));
    }
}

fn ac3_sqrt_rate() {
    let c = cfg(1e-2, 9.21);
    let traj = dynamics::simulate_similarity_ode(&dirac_model(0.4), &[2.0], &c).unwrap();
    let fit = analysis::rate_fit(&traj, &[0.4], 0.5).unwrap();
    assert!((fit.slope + 0.5).abs() <= 0.02, "dirac slope {}", fit.slope);
    let model = datasets::line_model(0.5, 0.0).unwrap();
    let traj = dynamics::simulate_similarity_ode(&model, &[1.4], &c).unwrap();
    let fit = analysis::rate_fit(&traj, &[1.25], 0.5).unwrap();
    assert!((fit.slope + 0.5).abs() <= 0.05, "mixture slope {}", fit.slope);
}

fn ac4_value_gap() {
    let ts = [1e-2, 1e-3, 1e-4];
    let line = datasets::line_model(0.5, 0.0).unwrap();
    let xs: Vec<Vec<f64>> = linspace(-3.0, 7.0, 1000).into_iter().map(|x| vec![x]).collect();
    let plane = datasets::plane_model(0.5, 0.0).unwrap();
    let segs = datasets::segments_model(0.5, 0.0, datasets::SEGMENT_DENSITY).unwrap();
    for (model, xs) in [
        (&line, xs),
        (&plane, grid_points(&plane, 32)),
        (&segs, grid_points(&segs, 32)),
    ] {
        assert!(xs.len() >= 1000);
        let r = analysis::varadhan_value_gap(model, &xs, &ts).unwrap();
        assert_eq!(r.violations(), 0, "{} worst {}", r.check_name, r.worst_violation);
        assert!(r.pass);
    }
}

fn ac5_gradient_decay() {
    let line = datasets::line_model(0.5, 0.0).unwrap();
    let plane = datasets::plane_model(0.5, 0.0).unwrap();
    let probes: [(&MixedScoreModel, Vec<f64>); 5] = [
        (&line, vec![1.1]),
        (&line, vec![-0.3]),
        (&line, vec![3.0]),
        (&plane, vec![0.0, 0.5]),
        (&plane, vec![2.0, -1.0]),
    ];
    for (model, x0) in probes {
        assert!(analysis::is_off_interface(model, &x0));
        let eta = analysis::gradient_decay_margin(model, &x0).unwrap();
        let ts: Vec<f64> = (0..12).map(|i| eta / (5.0 + 15.0 * i as f64)).collect();
        let fit = analysis::varadhan_gradient_decay(model, &x0, &ts).unwrap();
        assert!(fit.r2 >= 0.99, "r2 {} at {x0:?}", fit.r2);
        assert!(fit.decay_rate() > 0.0);
    }
}

fn ac6_lyapunov() {
    let line = datasets::line_model(0.5, 0.0).unwrap();
    let plane = datasets::plane_model(0.3, 0.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for model in [&line, &plane] {
        let bx = SearchBox::around(model, 0.1);
        for _ in 0..10 {
            let z0: Vec<f64> = bx.lo.iter().zip(&bx.hi).map(|(a, b)| rng.random_range(*a..*b)).collect();
            let mut defects = Vec::new();
            for dtau in [1e-2, 1e-3] {
                let traj = dynamics::simulate_limit_inclusion(model, &z0, &cfg(dtau, 10.0)).unwrap();
                let r = analysis::lyapunov_audit(model, &traj).unwrap();
                assert!(r.pass, "worst {} at {z0:?}", r.worst_violation);
                let d = r.max_observed("identity").unwrap();
                assert!(d <= 5.0 * dtau, "defect {d} at dtau {dtau}");
                assert_eq!(r.max_observed("monotone").unwrap(), 0.0, "phi increased");
                defects.push(d);
            }
            assert!(defects[1] < defects[0]);
        }
    }
}

fn tie_points(model: &MixedScoreModel) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let d = model.dim();
    for mu in [model.mu1(), model.mu2()] {
        let pts: Vec<&[f64]> = mu.points().collect();
        for a in 0..pts.len() {
            for b in (a + 1)..pts.len() {
                let mid: Vec<f64> = pts[a].iter().zip(pts[b]).map(|(p, q)| 0.5 * (p + q)).collect();
                out.push(mid.clone());
                if d == 2 {
                    let n = [pts[b][1] - pts[a][1], pts[a][0] - pts[b][0]];
                    for s in [-0.5, -0.1, 0.1, 0.5] {
                        out.push(vec![mid[0] + s * n[0], mid[1] + s * n[1]]);
                    }
                }
            }
        }
    }
    if d == 2 {
        let bisectors = |mu: &EmpiricalMeasure| {
            let pts: Vec<&[f64]> = mu.points().collect();
            let mut v = Vec::new();
            for a in 0..pts.len() {
                for b in (a + 1)..pts.len() {
                    let n = [pts[b][0] - pts[a][0], pts[b][1] - pts[a][1]];
                    let c = 0.5 * (n[0] * (pts[a][0] + pts[b][0]) + n[1] * (pts[a][1] + pts[b][1]));
                    v.push((n, c));
                }
            }
            v
        };
        for (n1, c1) in bisectors(model.mu1()) {
            for (n2, c2) in bisectors(model.mu2()) {
                let det = n1[0] * n2[1] - n1[1] * n2[0];
                if det.abs() > 1e-9 {
                    out.push(vec![(c1 * n2[1] - c2 * n1[1]) / det, (n1[0] * c2 - n2[0] * c1) / det]);
                }
            }
        }
    }
    out
}

fn ac7_clarke_outer() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for base in [datasets::line_model(0.5, 0.0).unwrap(), datasets::plane_model(0.5, 0.0).unwrap()] {
        let bx = SearchBox::around(&base, 0.2);
        let mut xs = tie_points(&base);
        while xs.len() < 1000 {
            xs.push(bx.lo.iter().zip(&bx.hi).map(|(a, b)| rng.random_range(*a..*b)).collect());
        }
        for lambda in [0.0, 0.3, 0.5, 1.0] {
            let model = base.with_lambda(lambda).unwrap();
            let mut ties = 0;
            for x in &xs {
                let c = geometry::clarke_subdifferential(&model, x).unwrap();
                let o = geometry::outer_clarke_subdifferential(&model, x, DEFAULT_TIE_TOL).unwrap();
                assert_eq!(c.generators, o.generators, "lambda {lambda} at {x:?}");
                ties += usize::from(c.generators.len() > 1);
            }
            if lambda > 0.0 && lambda < 1.0 {
                assert!(ties > 0);
            }
        }
    }
}

fn ac8_semiconcavity() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    for base in [datasets::line_model(0.5, 0.0).unwrap(), datasets::plane_model(0.5, 0.0).unwrap()] {
        let bx = SearchBox::around(&base, 0.2);
        for lambda in [0.0, 0.25, 0.5, 0.75, 1.0] {
            let model = base.with_lambda(lambda).unwrap();
            let mut xs = Vec::new();
            let mut ts = Vec::new();
            for _ in 0..200 {
                xs.push(bx.lo.iter().zip(&bx.hi).map(|(a, b)| rng.random_range(*a..*b)).collect::<Vec<f64>>());
                ts.push(10f64.powf(rng.random_range(-4.0..0.0)));
            }
            let mut worst = f64::NEG_INFINITY;
            for (x, t) in xs.iter().zip(&ts) {
                let r = analysis::semiconcavity_check(&model, std::slice::from_ref(x), &[*t], 0, 0).unwrap();
                worst = worst.max(r.worst_violation);
            }
            let triples = analysis::semiconcavity_check(&model, &xs, &[], 200, 8).unwrap();
            assert!(worst <= 0.0, "lambda {lambda}: hessian violation {worst}");
            assert!(triples.pass, "lambda {lambda}: midpoint violation {}", triples.worst_violation);
        }
    }
    let guidance = datasets::line_model(2.0, 0.0).unwrap();
    let r = analysis::semiconcavity_expected_failure(&guidance, 1e-3).unwrap();
    assert!(!r.pass && r.gate_passed(), "guidance fixture did not violate");
}

fn ac9_hj() {
    let dirac = dirac_model(0.3);
    for x in [-1.0, 0.3, 2.5] {
        for t in [1e-2, 0.1, 1.0] {
            let r = analysis::hj_pointwise(&dirac, &[x], t).unwrap();
            assert!(r.abs() <= 1e-6, "dirac residual {r}");
        }
    }
    let model = datasets::line_model(1.0, 0.0).unwrap();
    let xs: Vec<Vec<f64>> = linspace(-2.5, 3.5, 10).into_iter().map(|x| vec![x]).collect();
    let ts: Vec<f64> = linspace(-2.0, 0.0, 10).into_iter().map(|e| 10f64.powf(e)).collect();
    let r = analysis::hj_residual(&model, &xs, &ts, 1e-3).unwrap();
    assert_eq!(r.points_tested, 100);
    assert!(r.pass, "worst residual {}", r.worst_violation + 1e-3);
}

fn ac10_energy() {
    let moe = datasets::line_model(0.5, 0.1).unwrap();
    let horizon = moe.horizon();
    for t in [1e-3, 0.2, 0.9] {
        assert_eq!(analysis::energy_bound_factor(&moe, 1.0, t, EnergyRegime::Moe).unwrap(), 1.0);
    }
    assert_eq!(analysis::energy_bound_factor(&moe, 2.5, horizon, EnergyRegime::Moe).unwrap(), 1.0);
    let base = analysis::energy_bound_factor(&moe, 2.0, 0.1, EnergyRegime::Moe).unwrap();
    for l in [0.0, 0.3, 1.0] {
        let f = analysis::energy_bound_factor(&moe.with_lambda(l).unwrap(), 2.0, 0.1, EnergyRegime::Moe).unwrap();
        assert_eq!(f, base);
    }
    let mut prev = 0.0;
    for l in [1.5, 2.0, 2.5, 3.0] {
        let m = moe.with_lambda(l).unwrap();
        assert_eq!(analysis::energy_bound_factor(&m, 2.0, horizon, EnergyRegime::Cfg).unwrap(), 1.0);
        let f = analysis::energy_bound_factor(&m, 2.0, 0.1, EnergyRegime::Cfg).unwrap();
        assert!(f > prev);
        prev = f;
    }
}

fn ac11_plane() {
    let model = datasets::plane_model(2.5, 0.0).unwrap();
    let set = geometry::enumerate_critical_points(&model, &EnumerationConfig::default()).unwrap();
    let mins: Vec<_> = set.local_minimizers().collect();
    let smooth = mins.iter().filter(|r| r.classification == Classification::SmoothLocalMin).count();
    let interface = mins.iter().filter(|r| r.classification == Classification::InterfacePoint).count();
    assert_eq!((mins.len(), smooth, interface), (3, 1, 2), "{mins:?}");
    let moe = model.with_lambda(0.5).unwrap();
    let set = geometry::enumerate_critical_points(&moe, &EnumerationConfig::default()).unwrap();
    let mut n = 0;
    for r in set.local_minimizers() {
        n += 1;
        assert!(!geometry::nd_indicator(&moe, &r.x_star, DEFAULT_TIE_TOL).unwrap().in_nd());
        assert_eq!(r.classification, Classification::SmoothLocalMin);
    }
    assert!(n > 0);
}

fn ac12_stochastic() {
    let sampler = InitialSampler::Gaussian { mean: vec![1.5], std: vec![2.0] };
    for lambda in [0.5, 2.0] {
        let model = datasets::line_model(lambda, 0.2).unwrap();
        let c = IntegratorConfig { seed: 12, ..cfg(1e-2, 9.21) };
        let a = dynamics::ensemble(&model, &sampler, 100, &c, EnsembleMode::SimilaritySde).unwrap();
        let b = dynamics::ensemble(&model, &sampler, 100, &c, EnsembleMode::SimilaritySde).unwrap();
        assert_eq!(a, b);
        let mins = minimizers(&model);
        let hits = a
            .iter()
            .filter(|tr| mins.iter().any(|m| (tr.terminal()[0] - m[0]).abs() < 0.15))
            .count();
        assert!(hits >= 95, "lambda {lambda}: {hits}/100 attracted");
    }
}

type Criterion = (&'static str, fn(), Duration);

fn main() -> ExitCode {
    let secs = Duration::from_secs;
    let criteria: [Criterion; 12] = [
        ("AC-01 1D guidance interface minimizer at 0.75", ac1_cfg_interface, secs(1)),
        ("AC-02 pure imitation at lambda 0 and 1", ac2_endpoints, secs(1)),
        ("AC-03 sqrt(t) convergence rate", ac3_sqrt_rate, secs(5)),
        ("AC-04 value gap bound on three datasets", ac4_value_gap, secs(10)),
        ("AC-05 exponential gradient decay", ac5_gradient_decay, secs(5)),
        ("AC-06 Lyapunov identity and monotonicity", ac6_lyapunov, secs(10)),
        ("AC-07 Clarke equals outer Clarke (MoE)", ac7_clarke_outer, secs(5)),
        ("AC-08 semiconcavity and guidance violation", ac8_semiconcavity, secs(10)),
        ("AC-09 viscous Hamilton-Jacobi residual", ac9_hj, secs(5)),
        ("AC-10 energy bound factors", ac10_energy, secs(1)),
        ("AC-11 2D critical structure", ac11_plane, secs(30)),
        ("AC-12 stochastic reproducibility and attraction", ac12_stochastic, secs(30)),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (name, run, limit) in criteria {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(run));
        let elapsed = start.elapsed();
        let verdict = match outcome {
            Err(_) => "FAIL",
            Ok(()) if elapsed > limit => "FAIL (time)",
            Ok(()) => "PASS",
        };
        if verdict != "PASS" {
            failed += 1;
        }
        println!("{verdict:<11} {name:<52} {:>8.3}s (limit {}s)", elapsed.as_secs_f64(), limit.as_secs());
    }
    println!("acceptance: {failed} failed");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
