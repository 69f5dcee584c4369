//! Power over a θ grid for one hazard family, written as CSV for plotting.
//!
//!     cargo run --release --example power_curve -- weibull > power.csv

use rkhs_logrank::{run_scenario, BootstrapConfig, FamilyKind, KernelSpec, ScenarioConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let family: FamilyKind = std::env::args().nth(1).as_deref().unwrap_or("proportional").parse()?;
    let cfg = ScenarioConfig {
        n0: 30,
        n1: 30,
        family,
        thetas: family.default_grid(),
        censoring0: 0.1,
        censoring1: 0.1,
        repetitions: 200,
        bootstrap: BootstrapConfig {
            replicates: 300,
            ..Default::default()
        },
        kernels: ["sek", "lrp", "lrc", "p2w", "per5"]
            .iter()
            .map(|k| KernelSpec::preset(k).unwrap())
            .collect(),
    };
    let report = run_scenario(&cfg, 99)?;
    report.write_csv(std::io::stdout())?;
    eprintln!("{} cells in {:.1}s", report.cells.len(), report.runtime_seconds.unwrap_or_default());
    Ok(())
}
