//! The weight function at which the supremum is attained, tabulated on a
//! grid, and a check that its log-rank statistic squared equals `Z_n`.
//!
//!     cargo run --example optimal_weight

use rkhs_logrank::simulation::{repetition_stream, simulate_dataset};
use rkhs_logrank::{optimal_weight, prepare, weighted_logrank, z_statistic, FamilyKind, HazardFamily, KernelSpec, RiskTable};

fn main() -> Result<(), rkhs_logrank::Error> {
    let family = HazardFamily::new(FamilyKind::Periodic, 3.0)?;
    let ds = simulate_dataset(80, 80, &family, (0.0, 0.0), &mut repetition_stream(8, 0))?;
    let rt = RiskTable::build(&ds);

    for spec in [KernelSpec::sek(), KernelSpec::p4w(), KernelSpec::per5()] {
        let pk = prepare(&spec, &ds, &rt)?;
        let z = z_statistic(&ds, &rt, &pk).z;
        let w = optimal_weight(&ds, &rt, &pk)?;
        let lr = weighted_logrank(&ds, &rt, &w.to_weight_function());
        println!("{spec}: Z_n = {z:.6}, LR(w*)^2 = {:.6}", lr.statistic * lr.statistic);
        let row: Vec<String> = w.tabulate(10).iter().map(|(u, v)| format!("{u:.1}:{v:+.2}")).collect();
        println!("  w*(u) {}", row.join(" "));
    }
    Ok(())
}
