//! Hausdorff dimension of tau-approximable matrices for a few shapes.
use mtp::estimator::predict_dimension;

fn main() -> mtp::Result<()> {
    for (n, m, tau) in [(1, 1, 1.5), (1, 1, 3.0), (2, 1, 3.0), (2, 2, 0.5), (3, 2, 4.0)] {
        let p = predict_dimension(n, m, tau)?;
        println!("n={n} m={m} tau={tau:<4} s0={:.6} ({:?})", p.s0, p.regime);
    }
    Ok(())
}
