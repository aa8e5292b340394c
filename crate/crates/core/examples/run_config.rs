//! Run a config-file experiment in-process, as the `mtp` binary does.
use mtp::cli::{run, Command, ExperimentConfig};

fn main() -> mtp::Result<()> {
    let mut cfg = ExperimentConfig::default();
    cfg.command = Command::TransferCheck;
    cfg.out = std::env::temp_dir().join("mtp-example").display().to_string();
    let report = run(&cfg)?;
    for c in &report.checks {
        println!("{}: {} ({})", c.property, if c.passed { "pass" } else { "FAIL" }, c.detail);
    }
    println!("artifacts in {}", cfg.out);
    Ok(())
}
