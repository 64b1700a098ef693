use nalgebra::{DMatrix, DVector};
use reflection_hedge::config::{ModelConfig, Setup};
use reflection_hedge::hedge::{self, compare, price_portfolio_and_vanilla};
use reflection_hedge::market::{representation_matrix, sample_path, simulate_path_with_exit, solve_xw};
use reflection_hedge::mc::substream;
use reflection_hedge::*;
use statrs::distribution::{ContinuousCDF, Normal};

fn shipped(name: &str) -> Setup {
    let path = format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"));
    ModelConfig::load(path).unwrap().build().unwrap()
}

fn mc(paths: usize, steps: usize) -> McConfig {
    McConfig {
        steps: Some(steps),
        ..McConfig::with_paths(paths)
    }
}

fn a2_call() -> PayoffSpec {
    PayoffSpec::Call { index: 0, strike: 1.1 }
}

#[test]
fn a2_identity_holds() {
    let s = shipped("a2_three_asset.json");
    assert!(s.barrier.mu.norm() > 0.05, "the test case needs drift");
    let report = verify_hedge_identity(&s.model, &s.barrier, &s.group, &a2_call(), 1.0, &mc(200_000, 256)).unwrap();
    assert!(report.pass, "{report:?}");
}

#[test]
fn literal_weight_pairing_fails_with_drift() {
    // attaching x_w (rather than x_{w⁻¹}) to the w-image breaks the identity for rotations
    let s = shipped("a2_three_asset.json");
    let cfg = mc(200_000, 256);
    let good = build_portfolio(&s.barrier, &s.group, &a2_call(), "A2", 1.0).unwrap();
    let mut literal = good.clone();
    for (i, term) in literal.terms.iter_mut().enumerate() {
        let x = solve_xw(&s.barrier, s.group.element(i)).unwrap();
        term.weight_row = (s.barrier.c.transpose() * &x).iter().copied().collect();
        term.weight_scale = (-x.dot(&s.barrier.log_levels())).exp();
        term.x_w = x.iter().copied().collect();
    }
    let changed = good.terms.iter().zip(&literal.terms).filter(|(a, b)| a.x_w != b.x_w).count();
    assert_eq!(changed, 2, "only the two rotations differ");
    let report = hedge::verify_portfolio(&s.model, &s.barrier, &literal, 1.0, &cfg).unwrap();
    assert!(!report.pass && report.z.abs() > 5.0, "{report:?}");
}

#[test]
fn flipped_sign_fails() {
    let s = shipped("a2_three_asset.json");
    let mut p = build_portfolio(&s.barrier, &s.group, &a2_call(), "A2", 1.0).unwrap();
    let k = p.terms.iter().position(|t| t.word.len() == 1).unwrap();
    p.terms[k].sign = -p.terms[k].sign;
    let report = hedge::verify_portfolio(&s.model, &s.barrier, &p, 1.0, &mc(100_000, 256)).unwrap();
    assert!(!report.pass && report.z.abs() > 10.0, "{report:?}");
}

#[test]
fn one_asset_identity_and_symmetry() {
    let report = put_call_symmetry_case(0.2, 0.05, 100.0, 90.0, 100.0, 1.0, &mc(200_000, 256)).unwrap();
    assert!(report.pass, "{report:?}");
    assert!((report.exponent - (1.0 - 2.0 * 0.05 / 0.04)).abs() < 1e-12);
    assert!((report.martingale_exponent - 1.0).abs() < 1e-12);
}

#[test]
fn log_index_equals_scaled_brownian_coordinates_along_paths() {
    let s = shipped("a2_three_asset.json");
    let mut rng = substream(5, 0);
    for _ in 0..20 {
        let rec = sample_path(&s.model, &s.barrier, 1.0, 64, &mut rng);
        for (x, log_s) in rec.x.iter().zip(&rec.log_prices) {
            let lhs = &s.barrier.c * log_s - s.barrier.log_levels();
            let rhs = &s.barrier.sigma_prime * x;
            assert!((lhs - rhs).amax() < 1e-10);
        }
    }
}

#[test]
fn one_asset_survival_matches_drifted_reflection_formula() {
    let (sigma, r, spot, level, t) = (0.2, 0.05, 100.0, 90.0, 1.0);
    let (model, _, barrier, _) = hedge::one_asset_setup(sigma, r, spot, level).unwrap();
    let x = (spot / level).ln() / sigma;
    let mu = (r - 0.5 * sigma * sigma) / sigma;
    assert!((barrier.h[0] - x).abs() < 1e-12 && (barrier.mu[0] - mu).abs() < 1e-12);
    let n = Normal::standard();
    let exact = n.cdf((x + mu * t) / t.sqrt()) - (-2.0 * mu * x).exp() * n.cdf((-x + mu * t) / t.sqrt());
    let paths = 200_000;
    let out = simulate_path_with_exit(&model, &barrier, t, 128, paths, 11, true).unwrap();
    let p = out.iter().filter(|o| o.survived).count() as f64 / paths as f64;
    let se = (p * (1.0 - p) / paths as f64).sqrt();
    assert!((p - exact).abs() <= 3.0 * se, "{p} vs {exact}");
}

fn square_setup() -> (MarketModel, ConeBarrier, ReflectionGroup) {
    let lambda = DMatrix::from_row_slice(3, 2, &[0.0, 0.0, 0.25, 0.05, -0.1, 0.3]);
    let model = MarketModel::new(lambda, 0.03, DVector::from_vec(vec![1.0, 100.0, 80.0])).unwrap();
    let fs = FundamentalSystem::dihedral(4).unwrap();
    let group = generate_group(&fs, 100).unwrap();
    let barrier = ConeBarrier::new(&model, &fs, &[1.0, 1.0], &[0.5, 0.5]).unwrap();
    (model, barrier, group)
}

#[test]
fn representation_is_a_homomorphism_with_determinant_sign() {
    let (model, barrier, group) = square_setup();
    assert!(barrier.residuals(&model).iter().all(|&r| r < 1e-10));
    let reps: Vec<DMatrix<f64>> = group.elements().iter().map(|w| representation_matrix(&barrier, w).unwrap()).collect();
    for i in 0..group.order() {
        assert!((reps[i].determinant() - group.element(i).sign).abs() < 1e-9);
        for j in 0..group.order() {
            let k = group.product(i, j).unwrap();
            assert!(linalg::max_abs_diff(&reps[k], &(&reps[i] * &reps[j])) < 1e-9);
        }
    }
    let a2 = shipped("a2_three_asset.json");
    for i in 0..a2.group.order() {
        let ti = representation_matrix(&a2.barrier, a2.group.element(i)).unwrap();
        for j in 0..a2.group.order() {
            let tj = representation_matrix(&a2.barrier, a2.group.element(j)).unwrap();
            let k = a2.group.product(i, j).unwrap();
            let tk = representation_matrix(&a2.barrier, a2.group.element(k)).unwrap();
            assert!(linalg::max_abs_diff(&tk, &(&ti * &tj)) < 1e-9);
        }
    }
}

#[test]
fn signs_cancel_over_the_portfolio() {
    let (_, barrier, group) = square_setup();
    let p = build_portfolio(&barrier, &group, &PayoffSpec::Put { index: 1, strike: 1.0 }, "I2(4)", 1.0).unwrap();
    assert_eq!(p.terms.len(), 8);
    assert_eq!(p.sign_sum(), 0.0);
}

#[test]
fn driftless_weights_are_trivial() {
    let lambda = DMatrix::from_row_slice(4, 3, &[0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.2, 0.0, 0.0, 0.0, 0.2]);
    let model = MarketModel::new(lambda, 0.01, DVector::from_vec(vec![1.0, 100.0, 95.0, 90.0])).unwrap();
    let fs = FundamentalSystem::type_a(2).unwrap();
    let group = generate_group(&fs, 100).unwrap();
    let barrier = ConeBarrier::new(&model, &fs, &[0.2, 0.2], &[1.0, 1.0]).unwrap();
    assert!(barrier.mu.norm() < 1e-12);
    let p = build_portfolio(&barrier, &group, &a2_call(), "A2", 1.0).unwrap();
    for t in &p.terms {
        assert!(t.weight_row.iter().all(|v| v.abs() < 1e-12));
        assert!((t.weight_scale - 1.0).abs() < 1e-12);
    }
}

#[test]
fn unreachable_barriers_leave_the_vanilla_claim() {
    let s = shipped("a2_three_asset.json");
    let fs = FundamentalSystem::type_a(2).unwrap();
    let far = ConeBarrier::new(&s.model, &fs, &[0.2, 0.2], &[1e-4, 1e-4]).unwrap();
    let p = build_portfolio(&far, &s.group, &a2_call(), "A2", 1.0).unwrap();
    let (rhs, vanilla) = price_portfolio_and_vanilla(&s.model, &p, 1.0, &mc(100_000, 64)).unwrap();
    assert!((rhs.value - vanilla.value).abs() < 1e-12 * vanilla.value.max(1.0));
    let out = simulate_path_with_exit(&s.model, &far, 1.0, 64, 20_000, 3, true).unwrap();
    assert!(out.iter().all(|o| o.survived));
}

#[test]
fn portfolio_vanishes_on_the_barrier() {
    let s = shipped("a2_three_asset.json");
    let p = build_portfolio(&s.barrier, &s.group, &a2_call(), "A2", 1.0).unwrap();
    for k in 0..2 {
        // move X_0 onto wall k by shifting the Brownian coordinates
        let gap = s.barrier.sigma_prime.row(k).dot(&s.barrier.h.transpose());
        let row = s.barrier.sigma_prime.row(k).transpose();
        let delta = -&row * (gap / row.norm_squared());
        let log_s = s.model.log_spot() + s.model.lambda() * &delta;
        let model = s.model.with_spot(log_s.map(f64::exp)).unwrap();
        let barrier = s.barrier.with_spot(&model).unwrap();
        let g = &barrier.sigma_prime * &barrier.h;
        assert!(g[k].abs() < 1e-12 && g[1 - k] > 0.0);
        let (rhs, vanilla) = price_portfolio_and_vanilla(&model, &p, 1.0, &mc(200_000, 64)).unwrap();
        assert!(rhs.value.abs() <= 3.0 * rhs.std_error, "wall {k}: {rhs:?} (vanilla {vanilla:?})");
    }
}

#[test]
fn semi_static_at_half_maturity() {
    let s = shipped("a2_three_asset.json");
    let maturity = 1.0;
    let half = 0.5 * maturity;
    let p = build_portfolio(&s.barrier, &s.group, &a2_call(), "A2", maturity).unwrap();
    let states = simulate_path_with_exit(&s.model, &s.barrier, half, 256, 4000, 17, true).unwrap();
    let survivors: Vec<_> = states.into_iter().filter(|o| o.survived).take(100).collect();
    assert_eq!(survivors.len(), 100);
    let cfg = mc(20_000, 256);
    let mut worst: f64 = 0.0;
    for o in &survivors {
        let model = s.model.with_spot(o.terminal.clone()).unwrap();
        let barrier = s.barrier.with_spot(&model).unwrap();
        if !barrier.in_cone(&barrier.h) {
            continue;
        }
        let lhs = price_knockout_mc(&model, &barrier, &p.payoff, half, &cfg).unwrap();
        let (rhs, vanilla) = price_portfolio_and_vanilla(&model, &p, half, &cfg).unwrap();
        let report = compare(lhs, rhs, cfg.allowance(vanilla.value, half), vanilla.value);
        let se = report.combined_stderr();
        // 100 simultaneous comparisons: a 4-sigma band keeps the family error rate below 1%
        assert!((report.lhs - report.rhs).abs() <= 4.0 * se + report.allowance, "{report:?}");
        worst = worst.max(report.z.abs());
    }
    assert!(worst > 0.0);
}
