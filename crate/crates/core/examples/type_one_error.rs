//! Rejection rates under the null for a few kernels, with Monte-Carlo
//! standard errors.
//!
//!     cargo run --release --example type_one_error [reps]

use rkhs_logrank::{run_scenario, BootstrapConfig, FamilyKind, KernelSpec, ScenarioConfig};

fn main() -> Result<(), rkhs_logrank::Error> {
    let reps = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(300);
    for (n, cens) in [(30, 0.1), (30, 0.3), (100, 0.3)] {
        let cfg = ScenarioConfig {
            n0: n,
            n1: n,
            family: FamilyKind::Proportional,
            thetas: vec![1.0],
            censoring0: cens,
            censoring1: cens,
            repetitions: reps,
            bootstrap: BootstrapConfig {
                replicates: 500,
                ..Default::default()
            },
            kernels: vec![KernelSpec::sek(), KernelSpec::lrp(), KernelSpec::p2w(), KernelSpec::per4()],
        };
        let report = run_scenario(&cfg, 2024)?;
        println!("n = {n} per group, {:.0}% censoring", cens * 100.0);
        for c in &report.cells {
            println!("  {:<22} {:.3} (se {:.3})", c.kernel, c.rate, c.se);
        }
    }
    Ok(())
}
