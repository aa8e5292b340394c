use mtp::dimfun::{DimensionFunction, TransferPair};
use mtp::engine::{
    build_cantor, build_kgb, build_packing, calibrate_packing, check_full_measure, matched_scene,
    mu_of_set, separation_check, verify_cantor_measure_bound, CantorTree, EngineConfig,
    EngineConstants, IndexedBall, MtpScene, ScenePlane, SyntheticKind,
};
use mtp::geometry::{AffinePlane, Ball, Norm};
use mtp::Error;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pair(c: f64, s: f64, l: usize, k: usize) -> (DimensionFunction, TransferPair) {
    let f = DimensionFunction::new(c, s, 0.0).unwrap();
    let p = TransferPair::derive(&f, l, k).unwrap();
    (f, p)
}

fn line_scene(lines: &[(f64, f64)], upsilon: f64, omega: f64) -> MtpScene {
    // lines a x + b y = 0 through the origin, one generation each
    let planes = lines
        .iter()
        .enumerate()
        .map(|(i, &(a, b))| ScenePlane {
            plane: AffinePlane::from_equations(&[vec![a, b]], &[0.0]).unwrap(),
            upsilon,
            generation: i as u64 + 1,
        })
        .collect();
    MtpScene::new(2, 1, Norm::Euclidean, Ball::new(vec![0.0, 0.0], omega).unwrap(), planes).unwrap()
}

/// Depth-2 dyadic-points tree in the line.
fn points_tree(eta: f64) -> (CantorTree, DimensionFunction) {
    let (f, p) = pair(2000.0, 0.5, 0, 1);
    let r0 = 2.5e5;
    let scene = matched_scene(SyntheticKind::DyadicPoints, r0, &[4, 18], &p, 0.25).unwrap();
    let b0 = Ball::new(vec![0.0], r0).unwrap();
    let tree = build_cantor(&scene, &f, &EngineConfig::new(eta, 2, 0.9, 1.1), &b0).unwrap();
    (tree, f)
}

/// Depth-2 vertical-lines tree in the plane.
fn lines_tree() -> (CantorTree, DimensionFunction) {
    let (f, p) = pair(500.0, 1.5, 1, 2);
    let r0 = 1e4;
    let scene = matched_scene(SyntheticKind::VerticalLines, r0, &[4, 5, 6], &p, 0.25).unwrap();
    let cal = calibrate_packing(1, 1, Norm::Euclidean, 100, 1).unwrap();
    let b0 = Ball::new(vec![0.0, 0.0], r0).unwrap();
    let tree = build_cantor(&scene, &f, &EngineConfig::new(10.0, 2, cal.d1, cal.d2), &b0).unwrap();
    (tree, f)
}

#[test]
fn constants_match_hand_values() {
    let c1 = EngineConstants::new(1, Norm::Euclidean, 10.0, 0.9, 1.1).unwrap();
    assert_eq!((c1.c1, c1.c2), (0.5, 2.0));
    assert!((c1.c3 - 0.0625 / 1200.0).abs() < 1e-20);
    let c2 = EngineConstants::new(2, Norm::Euclidean, 10.0, 0.9, 1.1).unwrap();
    let pi = std::f64::consts::PI;
    assert_eq!((c2.c1, c2.c2), (0.5, pi));
    let hand = (0.5 / pi).powi(2) / (32.0 * 25.0 * 225.0);
    assert!((c2.c3 - hand).abs() < 1e-22);
    assert!((c2.c3 - 1.407e-7).abs() < 1e-10);
    assert!(EngineConstants::new(1, Norm::Euclidean, 1.0, 0.9, 1.1).is_err());
    assert!(EngineConstants::new(1, Norm::Euclidean, 10.0, 1.2, 1.1).is_err());
}

#[test]
fn full_measure_examples() {
    let (_, p) = pair(1.0, 0.5, 0, 1);
    // points every 0.01 with neighbourhoods of radius 0.05 cover everything
    let planes = (0..=200)
        .map(|i| ScenePlane {
            plane: AffinePlane::point(vec![-1.0 + 0.01 * i as f64]).unwrap(),
            upsilon: 0.05f64.powi(2),
            generation: 1,
        })
        .collect();
    let scene = MtpScene::new(1, 0, Norm::Euclidean, Ball::new(vec![0.0], 2.0).unwrap(), planes).unwrap();
    let b = Ball::new(vec![0.0], 0.5).unwrap();
    // thresholds count planes of generation at least G
    let cov = check_full_measure(&scene, &b, &p, 4096, &[1, 2]).unwrap();
    assert_eq!(cov.per_g[0].1, 1.0);
    assert_eq!(cov.per_g[1].1, 0.0);

    let empty = MtpScene::new(1, 0, Norm::Euclidean, Ball::new(vec![0.0], 2.0).unwrap(), vec![]).unwrap();
    assert_eq!(check_full_measure(&empty, &b, &p, 64, &[0]).unwrap().per_g[0].1, 0.0);
}

#[test]
fn diophantine_scene_covers() {
    use mtp::dimfun::ApproxFunction;
    use mtp::diophantine::SceneConfig;
    let cfg = SceneConfig::homogeneous(1, 1, ApproxFunction::power_law(1.0, 1.0).unwrap());
    let (_, p) = pair(1.0, 1.0, 0, 1);
    let omega = Ball::new(vec![0.5], 0.5).unwrap();
    let scene = MtpScene::from_diophantine(&cfg, &p, 500, omega.clone()).unwrap();
    let cov = check_full_measure(&scene, &omega, &p, 1 << 12, &[1, 5, 10]).unwrap();
    for (g, frac) in cov.per_g {
        assert!(frac >= 0.95, "G = {g}: {frac}");
    }

    let zero = SceneConfig::homogeneous(1, 1, ApproxFunction::Zero);
    let scene = MtpScene::from_diophantine(&zero, &p, 50, omega.clone()).unwrap();
    assert!(scene.is_empty());
    assert_eq!(check_full_measure(&scene, &omega, &p, 256, &[1]).unwrap().per_g[0].1, 0.0);
}

#[test]
fn kgb_along_a_bisecting_line() {
    // g = r^(1/2): Y = 0.01 gives radius r(B)/10
    let (_, p) = pair(1.0, 1.5, 1, 2);
    let scene = line_scene(&[(0.0, 1.0)], 0.01, 4.0);
    let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
    let kgb = build_kgb(&scene, &b, 0, &p, 4).unwrap();
    assert!(!kgb.is_empty());
    let norm = Norm::Euclidean;
    for (i, a) in kgb.iter().enumerate() {
        assert!((a.ball.radius - 0.1).abs() < 1e-12);
        assert!(a.ball.center[1].abs() < 1e-12);
        assert!(b.contains_ball(&a.ball.scaled(3.0), norm));
        for c in &kgb[i + 1..] {
            assert!(norm.dist(&a.ball.center, &c.ball.center) > 0.6);
        }
    }
    let measure: f64 = kgb.iter().map(|a| a.ball.volume(norm)).sum();
    assert!(measure >= b.volume(norm) / (4.0 * 225.0));
}

#[test]
fn kgb_fails_for_a_plane_outside() {
    let (_, p) = pair(1.0, 1.5, 1, 2);
    let planes = vec![ScenePlane {
        plane: AffinePlane::from_equations(&[vec![0.0, 1.0]], &[3.0]).unwrap(),
        upsilon: 0.01,
        generation: 1,
    }];
    let scene = MtpScene::new(2, 1, Norm::Euclidean, Ball::new(vec![0.0, 0.0], 5.0).unwrap(), planes).unwrap();
    let b = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
    let err = build_kgb(&scene, &b, 0, &p, 4).unwrap_err();
    assert_eq!(err.named_property(), Some("covering (iii)"));
}

#[test]
fn kgb_on_a_grid_of_lines() {
    // 2^t vertical lines at level t with radius 4^-t
    let (_, p) = pair(1.0, 1.5, 1, 2);
    let up = |t: u32| 4f64.powi(-(t as i32)).powi(2);
    let scene = MtpScene::vertical_lines(-1.0, 1.0, 2..=7, up, Ball::new(vec![0.0, 0.0], 2.0).unwrap()).unwrap();
    let b = Ball::new(vec![0.1, -0.2], 0.7).unwrap();
    let norm = Norm::Euclidean;
    let kgb = build_kgb(&scene, &b, 0, &p, 6).unwrap();
    let measure: f64 = kgb.iter().map(|a| a.ball.volume(norm)).sum();
    assert!(measure >= b.volume(norm) / 900.0);
    let triples: Vec<Ball> = kgb.iter().map(|a| a.ball.scaled(3.0)).collect();
    for (i, t) in triples.iter().enumerate() {
        assert!(b.contains_ball(t, norm));
        for u in &triples[i + 1..] {
            assert!(t.disjoint(u, norm));
        }
    }
}

#[test]
fn packing_count_is_within_calibrated_band() {
    // g = r^(1/3): Y = 1e-3 gives radius 0.1
    let (_, p) = pair(1.0, 4.0 / 3.0, 1, 2);
    let scene = line_scene(&[(0.0, 1.0)], 1e-3, 4.0);
    let a = IndexedBall { ball: Ball::new(vec![0.0, 0.0], p.g_root(1e-3)).unwrap(), j: 0 };
    assert!((a.ball.radius - 0.1).abs() < 1e-12);
    let pk = build_packing(&scene, &a, &p).unwrap();
    assert!(!pk.empty);
    assert!(pk.ratio >= 1.0 / 24.0 && pk.ratio <= 1.0, "{}", pk.ratio);
    for l in &pk.balls {
        assert_eq!(l.radius, 1e-3);
        assert!(a.ball.contains_ball(&l.scaled(3.0), Norm::Euclidean));
    }
    let union = pk.balls.len() as f64 * std::f64::consts::PI * 1e-6;
    assert!(union >= pk.inner_measure / 36.0 && union <= pk.outer_measure);
}

#[test]
fn packing_of_a_rim_plane_is_empty() {
    let (_, p) = pair(1.0, 4.0 / 3.0, 1, 2);
    let planes = vec![ScenePlane {
        plane: AffinePlane::from_equations(&[vec![0.0, 1.0]], &[0.08]).unwrap(),
        upsilon: 1e-3,
        generation: 1,
    }];
    let scene = MtpScene::new(2, 1, Norm::Euclidean, Ball::new(vec![0.0, 0.0], 4.0).unwrap(), planes).unwrap();
    let a = IndexedBall { ball: Ball::new(vec![0.0, 0.0], p.g_root(1e-3)).unwrap(), j: 0 };
    let pk = build_packing(&scene, &a, &p).unwrap();
    assert!(pk.empty && pk.balls.is_empty());
}

#[test]
fn packing_needs_strict_radius_gap() {
    // g = 6 r, so g(Y) = 6 Y exactly
    let (_, p) = pair(6.0, 2.0, 1, 2);
    let ups = 0.01;
    assert_eq!(p.g_root(ups), 6.0 * ups);
    let scene = line_scene(&[(0.0, 1.0)], ups, 4.0);
    let a = IndexedBall { ball: Ball::new(vec![0.0, 0.0], 6.0 * ups).unwrap(), j: 0 };
    let err = build_packing(&scene, &a, &p).unwrap_err();
    assert_eq!(err.named_property(), Some("radii comparison"));
}

#[test]
fn calibration_brackets_ratios() {
    for (l, m) in [(0, 1), (1, 1), (1, 2), (2, 1)] {
        let cal = calibrate_packing(l, m, Norm::Euclidean, 30, 7).unwrap();
        assert!(cal.d1 <= cal.min_ratio && cal.max_ratio <= cal.d2);
        assert!((cal.d1 - 0.9 * cal.min_ratio).abs() < 1e-15);
        assert!((cal.d2 - 1.1 * cal.max_ratio).abs() < 1e-15);
        assert!(cal.d1 > 0.0);
    }
    let points = calibrate_packing(0, 2, Norm::Euclidean, 10, 1).unwrap();
    assert_eq!((points.min_ratio, points.max_ratio), (1.0, 1.0));
}

#[test]
fn depth_one_is_the_root() {
    let (f, p) = pair(2000.0, 0.5, 0, 1);
    let scene = matched_scene(SyntheticKind::DyadicPoints, 2.5e5, &[4, 18], &p, 0.25).unwrap();
    let b0 = Ball::new(vec![0.0], 2.5e5).unwrap();
    let tree = build_cantor(&scene, &f, &EngineConfig::new(10.0, 1, 0.9, 1.1), &b0).unwrap();
    assert_eq!(tree.nodes.len(), 1);
    assert_eq!(tree.depth(), 1);
    assert_eq!(tree.root().weight, 1.0);
    assert_eq!(tree.root().ball, b0);
    let r = verify_cantor_measure_bound(&tree, &f, 10.0, 100, 1).unwrap();
    assert!(r.nodes.is_empty() && r.finite);
}

fn check_structure(tree: &CantorTree) {
    let norm = tree.norm;
    assert_eq!(tree.levels[0], vec![0]);
    assert_eq!(tree.root().weight, 1.0);
    for d in tree.level_defects() {
        assert!(d < 1e-9, "level sum defect {d}");
    }
    for node in &tree.nodes {
        if node.children.is_empty() {
            continue;
        }
        let sum: f64 = node.children.iter().map(|&c| tree.nodes[c].weight).sum();
        assert!((sum - node.weight).abs() <= 1e-9 * node.weight.max(1e-300));
        let triples: Vec<Ball> = node.children.iter().map(|&c| tree.nodes[c].ball.scaled(3.0)).collect();
        for (i, t) in triples.iter().enumerate() {
            assert!(node.ball.contains_ball(t, norm));
            for u in &triples[i + 1..] {
                assert!(t.disjoint(u, norm));
            }
        }
        // each sub-level's sources carry at least c3 of the volume of B
        let mut subs: Vec<usize> = node.children.iter().map(|&c| tree.nodes[c].sublevel).collect();
        subs.sort();
        subs.dedup();
        assert_eq!(subs.len() as u64, tree.l_b[node.id.min(tree.l_b.len() - 1)].min(subs.len() as u64));
        for s in subs {
            let mut sources: Vec<&IndexedBall> = node
                .children
                .iter()
                .map(|&c| &tree.nodes[c])
                .filter(|c| c.sublevel == s)
                .map(|c| c.source.as_ref().unwrap())
                .collect();
            sources.dedup_by(|a, b| a == b);
            let vol: f64 = sources.iter().map(|a| tree.constants.vk(a.ball.radius)).sum();
            assert!(vol >= tree.constants.c3 * tree.constants.vk(node.ball.radius));
        }
    }
}

#[test]
fn dyadic_points_tree() {
    let (tree, f) = points_tree(10.0);
    assert_eq!(tree.depth(), 2);
    check_structure(&tree);
    let c = &tree.constants;
    let hand = (c.c2 * 10.0 / (c.c3 * 2.0 * 2.5e5)).floor() as u64 + 1;
    assert_eq!(tree.l_b[0], hand);
    let again = points_tree(10.0).0;
    assert_eq!(tree.hash(), again.hash());
    let r = verify_cantor_measure_bound(&tree, &f, 10.0, 500, 3).unwrap();
    assert!(r.finite && r.node_max_ratio > 0.0);
}

#[test]
fn vertical_lines_tree() {
    let (tree, f) = lines_tree();
    assert_eq!(tree.depth(), 2);
    assert!(tree.levels[1].len() > 100);
    check_structure(&tree);
    let c = &tree.constants;
    let hand = (c.c2 * 10.0 / (c.c3 * std::f64::consts::PI * 1e8)).floor() as u64 + 1;
    assert_eq!(tree.l_b[0], hand);
    assert_eq!(tree.hash(), lines_tree().0.hash());
    let r = verify_cantor_measure_bound(&tree, &f, 10.0, 500, 3).unwrap();
    assert!(r.finite);
    for n in &r.nodes {
        assert!(n.ratio.is_finite() && n.ratio > 0.0);
    }
}

#[test]
fn tree_serialization_round_trips() {
    let (tree, _) = points_tree(10.0);
    let text = tree.to_json().unwrap();
    let back = CantorTree::from_json(&text).unwrap();
    assert_eq!(back.hash(), tree.hash());
    let bad = text.replacen("\"version\": 1", "\"version\": 99", 1);
    assert!(CantorTree::from_json(&bad).is_err());
}

#[test]
fn mu_of_set_examples() {
    let (tree, _) = lines_tree();
    let r0 = tree.root().ball.radius;
    assert_eq!(mu_of_set(&tree, &Ball::new(vec![5.0 * r0, 0.0], r0).unwrap()), 0.0);
    let all = mu_of_set(&tree, &Ball::new(vec![0.0, 0.0], 1.5 * r0).unwrap());
    assert!((all - 1.0).abs() < 1e-9);
    for &id in tree.levels[1].iter().take(20) {
        let node = &tree.nodes[id];
        assert!((mu_of_set(&tree, &node.ball) - node.weight).abs() <= 1e-12 * node.weight);
    }
}

#[test]
fn mu_of_set_is_monotone() {
    let (tree, _) = lines_tree();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..200 {
        let c = vec![rng.gen_range(-1e4..1e4), rng.gen_range(-1e4..1e4)];
        let r = rng.gen_range(1.0..3000.0);
        let small = mu_of_set(&tree, &Ball::new(c.clone(), r).unwrap());
        let big = mu_of_set(&tree, &Ball::new(c, 2.0 * r).unwrap());
        assert!(small <= big + 1e-15);
    }
}

#[test]
fn maximum_ratio_is_stable_under_reseeding() {
    let (tree, f) = points_tree(10.0);
    let a = verify_cantor_measure_bound(&tree, &f, 10.0, 300, 1).unwrap();
    let b = verify_cantor_measure_bound(&tree, &f, 10.0, 300, 2).unwrap();
    assert_eq!(a.node_max_ratio, b.node_max_ratio);
    let far = verify_cantor_measure_bound(&tree, &f, 10.0, 300, 1).unwrap();
    assert_eq!(far.samples.len(), 300);
    for s in &far.samples {
        assert!(s.radius < far.r0 && s.radius >= far.r0 / 100.0 * (1.0 - 1e-12));
    }
}

#[test]
fn separation_predicate_on_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut tested = 0;
    for norm in [Norm::Euclidean, Norm::Block { n: 2, m: 1 }, Norm::Block { n: 1, m: 2 }] {
        for _ in 0..10_000 {
            let a = Ball::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], rng.gen_range(0.01..1.0)).unwrap();
            let m = Ball::new(vec![rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)], rng.gen_range(0.01..1.0)).unwrap();
            let c = rng.gen_range(3.0..6.0);
            if let Some(ok) = separation_check(&a, &m, c, norm) {
                assert!(ok, "{a:?} {m:?} c = {c}");
                tested += 1;
            }
        }
    }
    assert!(tested > 1_000);
    let a = Ball::new(vec![0.0, 0.0], 1.0).unwrap();
    assert_eq!(separation_check(&a, &Ball::new(vec![5.0, 0.0], 1.0).unwrap(), 3.0, Norm::Euclidean), None);
    assert_eq!(separation_check(&a, &a, 2.0, Norm::Euclidean), None);
    assert_eq!(separation_check(&a, &a, 3.0, Norm::Euclidean), None);
}

#[test]
fn engine_errors_name_properties() {
    let (f, p) = pair(2000.0, 0.5, 0, 1);
    let scene = matched_scene(SyntheticKind::DyadicPoints, 2.5e5, &[4, 18], &p, 0.25).unwrap();
    let b0 = Ball::new(vec![0.0], 2.5e5).unwrap();
    // one more level than the scene can carry
    let err = build_cantor(&scene, &f, &EngineConfig::new(10.0, 3, 0.9, 1.1), &b0).unwrap_err();
    assert!(err.named_property().is_some(), "{err}");
    assert!(matches!(build_cantor(&scene, &f, &EngineConfig::new(10.0, 0, 0.9, 1.1), &b0), Err(Error::Invalid(_))));
}
