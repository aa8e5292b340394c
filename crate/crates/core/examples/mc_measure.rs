//! Monte Carlo measure of the limsup set for a divergent and a convergent psi.
use mtp::dimfun::ApproxFunction;
use mtp::diophantine::SceneConfig;
use mtp::estimator::mc_measure;

fn main() -> mtp::Result<()> {
    for tau in [1.0, 3.0] {
        let cfg = SceneConfig::homogeneous(2, 1, ApproxFunction::power_law(1.0, tau)?);
        let est = mc_measure(&cfg, 400, 50, 2000, 7)?;
        println!("psi = q^-{tau}: fraction {:.4} +- {:.4}", est.fraction, est.half_width);
    }
    Ok(())
}
