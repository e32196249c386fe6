// Minimum sample size and minimum parameter gap searches at a small
// trial budget.
//
// ```bash
// cargo run --release --example power_analysis
// ```

use ddks::datasets::{DatasetSpec, Family};
use ddks::harness::{min_parameter_difference, min_sample_size, rejection_rate, HarnessConfig};
use ddks::{Method, MethodStatistic, PValueMode, RngSpec};

pub fn run_example() -> ddks::Result<()> {
    let cfg = HarnessConfig {
        trials: 40,
        repetitions: 3,
        n_max: 256,
        pvalue: PValueMode::Permutation { n_perm: 49 },
        ..HarnessConfig::default()
    };
    let rng = RngSpec::new(3);
    let dvu = DatasetSpec::new(Family::Dvu, 3, rng);
    for method in [Method::Ddks, Method::Rdks, Method::HotellingT2] {
        let report = min_sample_size(&MethodStatistic::new(method), &dvu, &cfg, rng)?;
        println!(
            "{method} on dvu: n = {:.1} (min {}, max {}), unreached {}/{}",
            report.found, report.spread.min, report.spread.max, report.unreached, report.repetitions
        );
    }

    let analytic = HarnessConfig { pvalue: PValueMode::Analytic, ..cfg };
    let ddks = MethodStatistic::new(Method::Ddks);
    println!("ddks analytic power on dvu at n=50: {:.2}", rejection_rate(&ddks, &dvu, 50, &analytic, rng)?);

    let gvm = DatasetSpec::new(Family::Gvm, 3, rng);
    let shrink = min_parameter_difference(&ddks, &gvm, 50, &analytic, rng)?;
    println!("smallest detectable mean shift at n=50: {:.4}", shrink.found);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
