use mtp::dimfun::{ApproxFunction, DimensionFunction};
use mtp::diophantine::SceneConfig;
use mtp::estimator::{
    box_count, cover_count, fit_line, hausdorff_f_upper, mc_measure, predict_dimension,
    verify_mdp_bound, CoverTarget, PointMass, Regime, ScaleStep, UniformInterval,
};
use mtp::geometry::{AffinePlane, Ball};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn homogeneous(n: usize, m: usize, c: f64, tau: f64) -> SceneConfig {
    SceneConfig::homogeneous(n, m, ApproxFunction::power_law(c, tau).unwrap())
}

#[test]
fn predict_examples() {
    let p = predict_dimension(2, 1, 3.0).unwrap();
    assert_eq!(p.s0, 1.75);
    assert_eq!(p.regime, Regime::Supercritical);
    assert_eq!(predict_dimension(1, 1, 3.0).unwrap().s0, 0.5);
    let sat = predict_dimension(2, 1, 1.5).unwrap();
    assert_eq!((sat.s0, sat.regime), (2.0, Regime::Saturated));
    assert!(predict_dimension(1, 1, 0.0).is_err());
    assert!(predict_dimension(0, 1, 1.0).is_err());
}

#[test]
fn predict_is_continuous_at_threshold() {
    for n in 1..=4 {
        for m in 1..=4 {
            let t = n as f64 / m as f64;
            let formula = (m * (n - 1)) as f64 + (m + n) as f64 / (t + 1.0);
            assert!((formula - (n * m) as f64).abs() < 1e-12);
            let just_above = predict_dimension(n, m, t * (1.0 + 1e-13)).unwrap();
            assert!((just_above.s0 - (n * m) as f64).abs() < 1e-9);
        }
    }
}

#[test]
fn mc_measure_examples() {
    let zero = SceneConfig::homogeneous(2, 1, ApproxFunction::Zero);
    assert_eq!(mc_measure(&zero, 50, 1, 500, 3).unwrap().fraction, 0.0);
    let div = homogeneous(2, 1, 1.0, 1.0);
    let e = mc_measure(&div, 200, 1, 4000, 1).unwrap();
    assert!(e.fraction >= 0.99, "{}", e.fraction);
    assert!(mc_measure(&div, 10, 11, 10, 1).is_err());
}

#[test]
fn mc_measure_bookkeeping_and_reproducibility() {
    let cfg = homogeneous(1, 1, 1.0, 2.0);
    let a = mc_measure(&cfg, 100, 5, 3000, 42).unwrap();
    let b = mc_measure(&cfg, 100, 5, 3000, 42).unwrap();
    assert_eq!(a, b);
    assert_eq!(a.fraction * a.samples as f64, a.hits as f64);
    let f = a.fraction;
    assert!((a.half_width - 1.96 * (f * (1.0 - f) / 3000.0).sqrt()).abs() < 1e-15);
    let c = mc_measure(&cfg, 100, 5, 3000, 43).unwrap();
    assert_ne!(a.hits, c.hits);
}

#[test]
fn mc_measure_monotone_in_q_and_psi() {
    let cfg = homogeneous(2, 1, 0.5, 2.0);
    let mut last = 0;
    for q in [10, 20, 40, 80] {
        let e = mc_measure(&cfg, q, 3, 2000, 9).unwrap();
        assert!(e.hits >= last);
        last = e.hits;
    }
    let bigger = homogeneous(2, 1, 0.8, 2.0);
    assert!(mc_measure(&bigger, 80, 3, 2000, 9).unwrap().hits >= last);
}

#[test]
fn box_count_full_cube() {
    let cfg = homogeneous(1, 1, 1.0, 0.0);
    let steps: Vec<_> = (2..6).map(|t| ScaleStep::union(4, 0.5f64.powi(t))).collect();
    let s = box_count(&cfg, &steps).unwrap();
    for p in &s.points {
        assert_eq!(p.count as f64, (1.0 / p.step.delta).round());
    }
    assert!((s.slope - 1.0).abs() < 1e-12);
    let cfg2 = homogeneous(2, 1, 1.0, 0.0);
    let s2 = box_count(&cfg2, &steps).unwrap();
    assert!((s2.slope - 2.0).abs() < 1e-12);
}

#[test]
fn box_count_rejects_bad_schedules() {
    let cfg = homogeneous(1, 1, 1.0, 2.0);
    let two = [ScaleStep::union(4, 0.1), ScaleStep::union(8, 0.01)];
    assert!(box_count(&cfg, &two).is_err());
    let flat = [ScaleStep::union(4, 0.1), ScaleStep::union(8, 0.1), ScaleStep::union(16, 0.01)];
    assert!(box_count(&cfg, &flat).is_err());
}

/// Closed cells `[i d, (i+1) d]` meeting some open interval `((-p -+ psi)/q)`.
fn exact_cells_1d(c: f64, tau: f64, q_lo: u64, q_hi: u64, delta: f64) -> u64 {
    let cells = (1.0 / delta).round() as usize;
    let mut hit = vec![false; cells];
    for q in q_lo + 1..=q_hi {
        let w = c * (q as f64).powf(-tau);
        let qf = q as f64;
        for p in -(q as i64) - 2..=2 {
            let (a, b) = ((-(p as f64) - w) / qf, (-(p as f64) + w) / qf);
            for (i, h) in hit.iter_mut().enumerate() {
                let (lo, hi) = (i as f64 * delta, (i + 1) as f64 * delta);
                if hi > a && lo < b && b > 0.0 && a < 1.0 {
                    *h = true;
                }
            }
        }
    }
    hit.iter().filter(|h| **h).count() as u64
}

#[test]
fn box_count_matches_interval_oracle() {
    for (c, tau) in [(0.3, 1.0), (1.0, 2.0), (0.05, 0.5)] {
        let cfg = homogeneous(1, 1, c, tau);
        let steps: Vec<_> = [16u64, 32, 64].iter().map(|&q| ScaleStep::shell(q, 1.0 / (4 * q) as f64)).collect();
        let s = box_count(&cfg, &steps).unwrap();
        for p in &s.points {
            assert_eq!(p.count, exact_cells_1d(c, tau, p.step.q_lo, p.step.q_hi, p.step.delta), "c={c} tau={tau}");
        }
    }
}

#[test]
fn box_count_matches_sampling_in_the_plane() {
    // strips wider than the cells: sampling each cell finds almost every hit
    let cfg = homogeneous(2, 1, 0.3, 0.0);
    let steps: Vec<_> = [(3u64, 1.0 / 8.0), (4, 1.0 / 16.0), (5, 1.0 / 32.0)]
        .iter()
        .map(|&(q, d)| ScaleStep::union(q, d))
        .collect();
    let s = box_count(&cfg, &steps).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for p in &s.points {
        let cells = (1.0 / p.step.delta).round() as usize;
        let q = p.step.q_hi as i64;
        let mut sampled = 0u64;
        for i in 0..cells {
            for j in 0..cells {
                let found = (0..64).any(|_| {
                    let x = (i as f64 + rng.gen::<f64>()) * p.step.delta;
                    let y = (j as f64 + rng.gen::<f64>()) * p.step.delta;
                    (-q..=q).any(|a| {
                        (-q..=q).any(|b| {
                            if a == 0 && b == 0 {
                                return false;
                            }
                            let v = a as f64 * x + b as f64 * y;
                            (v - v.round()).abs() < 0.3
                        })
                    })
                });
                sampled += found as u64;
            }
        }
        assert!(sampled <= p.count);
        assert!(sampled as f64 >= 0.97 * p.count as f64, "{sampled} vs {}", p.count);
    }
}

#[test]
fn fit_line_recovers_slope() {
    let xs = [1.0, 2.0, 3.0, 4.0];
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 2.0).collect();
    let (s, i, r) = fit_line(&xs, &ys);
    assert!((s - 0.5).abs() < 1e-14 && (i - 2.0).abs() < 1e-14 && r < 1e-14);
}

#[test]
fn hausdorff_upper_examples() {
    let rho = 0.01;
    let b = Ball::new(vec![0.3, 0.3], rho).unwrap();
    let f = DimensionFunction::power_law(1.3).unwrap();
    let v = hausdorff_f_upper(&[CoverTarget::Ball(b)], &f, rho).unwrap();
    assert!((v - f.eval(rho).unwrap()).abs() < 1e-15);

    let seg = CoverTarget::Segment { a: vec![0.0, 0.0], b: vec![1.0, 0.0] };
    for l in [5u64, 50, 500] {
        let rho = 1.0 / (2 * l) as f64;
        let (count, _) = cover_count(&seg, rho);
        assert_eq!(count, l);
    }
    assert!(hausdorff_f_upper(&[seg], &f, 0.0).is_err());
}

#[test]
fn dominated_function_bound_vanishes() {
    // f = r^1.5 against g = r on a segment: sum f -> 0 while sum g stays bounded
    let seg = CoverTarget::Segment { a: vec![0.0, 0.0], b: vec![0.6, 0.8] };
    let f = DimensionFunction::power_law(1.5).unwrap();
    let g = DimensionFunction::power_law(1.0).unwrap();
    let mut last = f64::INFINITY;
    for e in 1..12 {
        let rho = 0.5f64.powi(e);
        let vf = hausdorff_f_upper(&[seg.clone()], &f, rho).unwrap();
        let vg = hausdorff_f_upper(&[seg.clone()], &g, rho).unwrap();
        assert!(vf < last);
        assert!(vg <= 0.5 + 2.0 * rho);
        last = vf;
    }
    assert!(last < 0.02);
}

#[test]
fn slab_bounds_decrease_for_steep_f() {
    let slab = CoverTarget::Slab {
        plane: AffinePlane::from_equations(&[vec![0.0, 1.0]], &[0.0]).unwrap(),
        half_width: 1e-6,
        container: Ball::new(vec![0.0, 0.0], 1.0).unwrap(),
    };
    for s in [2.0, 2.5] {
        let f = DimensionFunction::power_law(s).unwrap();
        let vals: Vec<f64> = (1..14)
            .map(|e| hausdorff_f_upper(&[slab.clone()], &f, 0.5f64.powi(e)).unwrap())
            .collect();
        for w in vals.windows(2) {
            assert!(w[1] <= w[0] * (1.0 + 1e-12), "s = {s}: {vals:?}");
        }
    }
}

#[test]
fn mdp_examples() {
    let f = DimensionFunction::power_law(1.0).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let balls: Vec<Ball> = (0..1000)
        .map(|_| Ball::new(vec![rng.gen::<f64>() * 1.4 - 0.2], rng.gen::<f64>() * 0.5 + 1e-6).unwrap())
        .collect();
    let far = PointMass(vec![10.0]);
    let r = verify_mdp_bound(&far, &f, 1e-9, 1.0, &balls).unwrap();
    assert!(r.passes && r.max_ratio == 0.0);
    let r = verify_mdp_bound(&UniformInterval, &f, 2.0, 1.0, &balls).unwrap();
    assert!(r.passes && r.max_ratio <= 2.0 + 1e-12 && r.max_ratio > 1.9);
    assert_eq!(r.lower_bound, 0.5);
    let r = verify_mdp_bound(&UniformInterval, &f, 2.0, 0.1, &balls).unwrap();
    assert_eq!(r.checked + r.skipped, balls.len());
    assert!(verify_mdp_bound(&UniformInterval, &f, 1.5, 1.0, &balls).unwrap().passes == false);
}

proptest! {
    #[test]
    fn jarnik_besicovitch_consistency(v in 1.0001f64..50.0) {
        prop_assert_eq!(predict_dimension(1, 1, v).unwrap().s0, 2.0 / (v + 1.0));
    }

    #[test]
    fn prediction_never_exceeds_nm(n in 1usize..6, m in 1usize..6, tau in 0.01f64..20.0) {
        let p = predict_dimension(n, m, tau).unwrap();
        prop_assert!(p.s0 <= (n * m) as f64 + 1e-12);
        if p.regime == Regime::Saturated {
            prop_assert_eq!(p.s0, (n * m) as f64);
        }
    }
}
