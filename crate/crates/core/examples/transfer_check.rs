//! The transform theta and agreement of the two series it links.
use mtp::dimfun::{classify_series, parse_dimfun, theta_transform, ApproxFunction, TransferPair};

fn main() -> mtp::Result<()> {
    let (n, m) = (2, 1);
    let psi = ApproxFunction::power_law(1.0, 3.0)?;
    for f in ["dimfun c=1 s=2 a=0", "dimfun c=1 s=1.8 a=0", "dimfun c=1 s=1.6 a=0"] {
        let pair = TransferPair::derive(&parse_dimfun(f)?, m * (n - 1), n * m)?;
        let theta = theta_transform(&psi, &pair);
        let haus = classify_series(&psi, n, m, Some(&pair)).verdict;
        let leb = classify_series(&theta, n, m, None).verdict;
        println!("{f:<22} theta = {theta:<28} H^f: {:<12} Lebesgue(theta): {leb}", haus.to_string());
    }
    Ok(())
}
