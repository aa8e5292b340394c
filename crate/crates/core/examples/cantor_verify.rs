//! Ball-measure ratios mu(D) eta / f(r(D)) on a two-level tree.
use mtp::dimfun::{DimensionFunction, TransferPair};
use mtp::engine::{build_cantor, matched_scene, mu_of_set, verify_cantor_measure_bound, EngineConfig, SyntheticKind};
use mtp::geometry::Ball;

fn main() -> mtp::Result<()> {
    let f = DimensionFunction::new(2000.0, 0.5, 0.0)?;
    let pair = TransferPair::derive(&f, 0, 1)?;
    let r0 = 2.5e5;
    let scene = matched_scene(SyntheticKind::DyadicPoints, r0, &[4, 18], &pair, 0.25)?;
    let b0 = Ball::new(vec![0.0], r0)?;
    let tree = build_cantor(&scene, &f, &EngineConfig::new(10.0, 2, 0.9, 1.1), &b0)?;
    println!("mu(B0) = {}", mu_of_set(&tree, &b0));
    for seed in 1..=3 {
        let r = verify_cantor_measure_bound(&tree, &f, 10.0, 1000, seed)?;
        println!(
            "seed {seed}: node max {:.4e}, sample max {:.4e}, hits {}, quantiles {:?}",
            r.node_max_ratio, r.sample_max_ratio, r.hits, r.sample_quantiles
        );
    }
    Ok(())
}
