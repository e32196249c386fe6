// Median runtime of one statistic evaluation as n and d grow.
//
// ```bash
// cargo run --release --example timing
// ```

use ddks::datasets::{DatasetSpec, Family};
use ddks::harness::timing_benchmark;
use ddks::{Method, MethodStatistic, RngSpec};

pub fn run_example() -> ddks::Result<()> {
    let spec = DatasetSpec::new(Family::Gvm, 3, RngSpec::new(1));
    for method in [Method::Ddks, Method::Vdks, Method::Rdks] {
        for row in timing_benchmark(&MethodStatistic::new(method), &spec, &[100, 1000], 3)? {
            println!("{:<5} d={} n={:>5}  {:>10.3} ms", row.method, row.d, row.n, row.median_ns as f64 * 1e-6);
        }
    }
    let wide = DatasetSpec::new(Family::Dvu, 256, RngSpec::new(1));
    let row = &timing_benchmark(&MethodStatistic::new(Method::Rdks), &wide, &[100], 3)?[0];
    println!("rdks  d={} n={:>5}  {:>10.3} ms", row.d, row.n, row.median_ns as f64 * 1e-6);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
