//! Monte-Carlo mean of `(n0 n1 / n) Z_n` under the null against its
//! large-sample limit, for several censoring levels and kernels.
//!
//!     cargo run --release --example asymptotic_mean

use rkhs_logrank::simulation::{repetition_stream, simulate_dataset};
use rkhs_logrank::{asymptotic_mean_oracle, prepare, z_statistic, HazardFamily, KernelSpec, NullSetup, RiskTable};

fn main() -> Result<(), rkhs_logrank::Error> {
    let null = HazardFamily::null();
    let reps = 4000;
    for (rate0, rate1) in [(0.0, 0.0), (1.0 / 9.0, 1.0 / 9.0), (0.1, 0.5)] {
        let setup = NullSetup {
            survival: null,
            censoring_rate0: rate0,
            censoring_rate1: rate1,
            eta: 0.5,
        };
        for spec in [KernelSpec::lrp(), KernelSpec::sek(), KernelSpec::per4()] {
            let mut sum = 0.0;
            let mut oracle = 0.0;
            for rep in 0..reps {
                let ds = simulate_dataset(150, 150, &null, (rate0, rate1), &mut repetition_stream(1, rep))?;
                let rt = RiskTable::build(&ds);
                let pk = prepare(&spec, &ds, &rt)?;
                sum += z_statistic(&ds, &rt, &pk).scaled;
                if rep == 0 {
                    oracle = asymptotic_mean_oracle(&setup, &pk)?;
                }
            }
            println!(
                "rates ({rate0:.3}, {rate1:.3}) {:<16} mean {:.4}  limit {:.4}",
                spec.to_string(),
                sum / reps as f64,
                oracle
            );
        }
    }
    Ok(())
}
