//! Integer pairs (p, q) with |qx + p| < psi(|q|) for a sample point.
use mtp::dimfun::ApproxFunction;
use mtp::diophantine::{approx_witnesses, SceneConfig};

fn main() -> mtp::Result<()> {
    let cfg = SceneConfig::homogeneous(2, 1, ApproxFunction::power_law(1.0, 1.5)?);
    let x = [std::f64::consts::SQRT_2 - 1.0, std::f64::consts::PI - 3.0];
    for w in approx_witnesses(&x, &cfg, 60)? {
        println!("q={:?} p={:?} error={:.3e}", w.q, w.p, w.error);
    }
    Ok(())
}
