//! Explicit-cover upper bounds for H^f of a segment and a thin slab.
use mtp::dimfun::DimensionFunction;
use mtp::estimator::{hausdorff_f_upper, CoverTarget};
use mtp::geometry::{AffinePlane, Ball};

fn main() -> mtp::Result<()> {
    let f = DimensionFunction::power_law(1.0)?;
    let seg = CoverTarget::Segment { a: vec![0.0, 0.0], b: vec![1.0, 0.0] };
    let slab = CoverTarget::Slab {
        plane: AffinePlane::from_equations(&[vec![0.0, 1.0]], &[0.0])?,
        half_width: 1e-4,
        container: Ball::new(vec![0.0, 0.0], 1.0)?,
    };
    for rho in [0.1, 0.01, 0.001] {
        println!(
            "rho={rho:<6} segment {:.4} slab {:.4}",
            hausdorff_f_upper(&[seg.clone()], &f, rho)?,
            hausdorff_f_upper(&[slab.clone()], &f, rho)?
        );
    }
    Ok(())
}
