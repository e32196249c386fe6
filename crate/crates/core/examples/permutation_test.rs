// Permutation p-values for every method on one seeded dataset.
//
// ```bash
// cargo run --release --example permutation_test
// ```

use ddks::datasets::{gen_pair, DatasetSpec, Family};
use ddks::significance::permutation_test;
use ddks::{run_test, Method, MethodStatistic, PValueMode, RngSpec};

pub fn run_example() -> ddks::Result<()> {
    let (p, t) = gen_pair(&DatasetSpec::new(Family::Gvs, 3, RngSpec::new(2)), 40)?;
    for method in Method::ALL {
        let outcome = run_test(
            &MethodStatistic::new(method),
            &p,
            &t,
            PValueMode::Permutation { n_perm: 100 },
            RngSpec::new(7),
        )?;
        println!("{:<13} statistic {:>10.4}  p {:.4}", method.name(), outcome.statistic, outcome.p_value.unwrap_or(f64::NAN));
    }

    // any closure over two samples works as a statistic
    let mean_gap = |a: &ddks::Sample, b: &ddks::Sample| -> ddks::Result<f64> {
        let m = |s: &ddks::Sample| s.as_slice().iter().sum::<f64>() / s.as_slice().len() as f64;
        Ok((m(a) - m(b)).abs())
    };
    let r = permutation_test(&mean_gap, &p, &t, 200, RngSpec::new(7))?;
    println!("mean gap {:.4}, p {:.4} ({} of {} permutations at least as large)", r.statistic, r.p_value, r.exceedances, r.n_perm);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
