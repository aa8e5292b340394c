//! Box-counting slope for tau = 3 in dimension one, dyadic shells.
use mtp::dimfun::ApproxFunction;
use mtp::diophantine::SceneConfig;
use mtp::estimator::{box_count, predict_dimension, ScaleStep};

fn main() -> mtp::Result<()> {
    let cfg = SceneConfig::homogeneous(1, 1, ApproxFunction::power_law(1.0, 3.0)?);
    let schedule: Vec<ScaleStep> = (4..=10)
        .map(|t| {
            let q = 1u64 << t;
            ScaleStep::shell(q, (q as f64).powi(-4))
        })
        .collect();
    let s = box_count(&cfg, &schedule)?;
    for p in &s.points {
        println!("Q={:<5} delta={:.3e} N={}", p.step.q_hi, p.step.delta, p.count);
    }
    println!("slope {:.4}, predicted {:.4}", s.slope, predict_dimension(1, 1, 3.0)?.s0);
    Ok(())
}
