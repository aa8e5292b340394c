//! Convergence of the Lebesgue and Hausdorff series for several psi and f.
use mtp::dimfun::{classify_series, parse_approx, parse_dimfun, TransferPair};

fn main() -> mtp::Result<()> {
    let (n, m) = (2, 1);
    let f = parse_dimfun("dimfun c=1 s=1.5 a=0")?;
    let pair = TransferPair::derive(&f, m * (n - 1), n * m)?;
    for spec in ["powerlaw c=1 tau=1", "powerlaw c=1 tau=3", "table 1:0.5 2:0.25 3:0.1"] {
        let psi = parse_approx(spec)?;
        let leb = classify_series(&psi, n, m, None);
        let haus = classify_series(&psi, n, m, Some(&pair));
        println!("{spec:<28} Lebesgue: {:<12} H^f ({f}): {}", leb.verdict.to_string(), haus.verdict);
    }
    Ok(())
}
