//! Two-level Cantor trees on the dyadic-points and vertical-lines scenes.
use mtp::dimfun::{DimensionFunction, TransferPair};
use mtp::engine::{build_cantor, calibrate_packing, check_full_measure, matched_scene, EngineConfig, SyntheticKind};
use mtp::geometry::{Ball, Norm};

fn main() -> mtp::Result<()> {
    let cases = [
        (SyntheticKind::DyadicPoints, 0, 1, 2000.0, 0.5, 2.5e5, vec![4, 18]),
        (SyntheticKind::VerticalLines, 1, 2, 500.0, 1.5, 1e4, vec![4, 5, 6]),
    ];
    for (kind, l, k, c, s, r0, levels) in cases {
        let f = DimensionFunction::new(c, s, 0.0)?;
        let pair = TransferPair::derive(&f, l, k)?;
        let scene = matched_scene(kind, r0, &levels, &pair, 0.25)?;
        let b0 = Ball::new(vec![0.0; k], r0)?;
        let cov = check_full_measure(&scene, &b0, &pair, if k == 1 { 1 << 14 } else { 512 }, &[levels[0] as u64])?;
        let cal = calibrate_packing(l, k - l, Norm::Euclidean, 100, 1)?;
        let tree = build_cantor(&scene, &f, &EngineConfig::new(10.0, 2, cal.d1, cal.d2), &b0)?;
        println!(
            "{kind:?}: coverage {:.3}, level sizes {:?}, sub-levels {:?}, hash {}",
            cov.per_g[0].1,
            tree.levels.iter().map(|v| v.len()).collect::<Vec<_>>(),
            tree.l_b,
            &tree.hash()[..16]
        );
    }
    Ok(())
}
