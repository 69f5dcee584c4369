//! Smallest end-to-end use: build a dataset, run the test, read the result.
//!
//!     cargo run --example quickstart

use rkhs_logrank::{run_test, BootstrapConfig, KernelSpec, SurvivalDataset};

fn main() -> Result<(), rkhs_logrank::Error> {
    // (time, event) per subject; event = false means right-censored
    let control = [
        (4.0, true),
        (6.5, true),
        (7.0, false),
        (9.1, true),
        (12.0, true),
        (15.3, false),
        (18.2, true),
    ];
    let treated = [
        (1.2, true),
        (2.0, true),
        (3.3, true),
        (5.1, false),
        (8.8, true),
        (20.4, true),
        (25.0, false),
    ];
    let ds = SurvivalDataset::from_groups(&control, &treated)?;

    let cfg = BootstrapConfig {
        replicates: 2000,
        seed: 42,
        ..Default::default()
    };
    let res = run_test(&ds, &KernelSpec::sek(), &cfg)?;

    println!("n = {} ({} vs {})", res.z.n, res.z.n0, res.z.n1);
    println!("Z_n            = {:.6}", res.z.z);
    println!("(n0 n1 / n) Z_n = {:.6}", res.z.scaled);
    println!("95% quantile   = {:.6}", res.quantile);
    println!("p-value        = {:.4}", res.p_value);
    println!("reject at 5%   = {}", res.reject);
    Ok(())
}
