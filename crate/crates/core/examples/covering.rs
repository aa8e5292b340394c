//! Greedy 5r-cover, separated packing along a line and the separation check.
use mtp::engine::separation_check;
use mtp::geometry::{five_r_cover, separated_pack, AffinePlane, Ball, Norm};
use rand::{Rng, SeedableRng};

fn main() -> mtp::Result<()> {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
    let balls: Vec<Ball> = (0..400)
        .map(|_| Ball::new(vec![rng.gen(), rng.gen()], rng.gen_range(0.005..0.05)))
        .collect::<mtp::Result<_>>()?;
    let kept = five_r_cover(&balls, Norm::Euclidean);
    println!("5r-cover keeps {} of {} balls", kept.len(), balls.len());

    let line = AffinePlane::from_equations(&[vec![1.0, -1.0]], &[0.0])?;
    let a = Ball::new(vec![0.5, 0.5], 0.2)?;
    let c = separated_pack(&line, &a, 0.03, 0.005, Norm::Euclidean);
    println!("packing along the diagonal: {} centres", c.len());

    let big = Ball::new(vec![0.0, 0.0], 1.0)?;
    let small = Ball::new(vec![0.9, 0.0], 0.2)?;
    println!("separation check (c = 3): {:?}", separation_check(&big, &small, 3.0, Norm::Euclidean));
    Ok(())
}
