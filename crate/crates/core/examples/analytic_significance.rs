// Closed-form significance of a ddKS distance, built from binomial
// difference distributions per orthant cell.
//
// ```bash
// cargo run --release --example analytic_significance
// ```

use ddks::datasets::{gen_pair, DatasetSpec, Family};
use ddks::significance::{
    ddks_significance_with, delta_cdf, RateSource, SignificanceInput, SignificanceOptions,
};
use ddks::RngSpec;

pub fn run_example() -> ddks::Result<()> {
    // P(|X/1 - Y/1| <= 0) for X, Y ~ Bernoulli(0.5)
    println!("delta_cdf(0, 1, 1, 0.5) = {}", delta_cdf(0.0, 1, 1, 0.5)?);

    let spec = DatasetSpec::new(Family::Dvu, 3, RngSpec::new(5));
    for n in [10, 20, 50] {
        let (p, t) = gen_pair(&spec, n)?;
        let input = SignificanceInput::from_samples(&p, &t)?;
        let s = ddks_significance_with(&input, SignificanceOptions::memoized())?;
        let pooled = ddks_significance_with(
            &input,
            SignificanceOptions { rates: RateSource::Pooled, memoize: true },
        )?;
        println!("n={n:>2}  D={:.3}  S={s:.3e}  S(pooled rates)={pooled:.3e}", input.statistic);
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
