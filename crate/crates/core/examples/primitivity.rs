//! Primitive vectors for a partition, and pair enumeration with and without the filter.
use mtp::dimfun::ApproxFunction;
use mtp::diophantine::{enumerate_pairs, is_primitive, Partition, SceneConfig};

fn main() -> mtp::Result<()> {
    let pi = Partition::new(4, vec![vec![1, 2], vec![3, 4]])?;
    for v in [[2, 3, 1, 4], [2, 4, 1, 3], [6, 9, -1, 0]] {
        println!("{v:?} primitive for {{1,2}},{{3,4}}: {}", is_primitive(&v, &pi)?);
    }
    let mut cfg = SceneConfig::homogeneous(3, 1, ApproxFunction::power_law(1.0, 2.0)?);
    let all = enumerate_pairs(&cfg, 6, 4.0)?.count();
    cfg.partition = Some(pi);
    let primitive = enumerate_pairs(&cfg, 6, 4.0)?.count();
    println!("pairs with |q| <= 6: {all}, primitive: {primitive}");
    Ok(())
}
