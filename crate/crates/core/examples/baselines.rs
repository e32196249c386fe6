// Comparison tests: per-axis KS, Hotelling's T² and histogram KL.
//
// ```bash
// cargo run --release --example baselines
// ```

use ddks::baselines::{hotelling_t2, kl_divergence, ks_1d, onedks, scott_bins};
use ddks::datasets::{gen_pair, DatasetSpec, Family};
use ddks::{ddks_statistic, RngSpec};

pub fn run_example() -> ddks::Result<()> {
    println!("ks_1d disjoint = {}", ks_1d(&[0.1, 0.2], &[0.8, 0.9])?);
    for family in [Family::Gvm, Family::Gvs, Family::Dvu] {
        let (p, t) = gen_pair(&DatasetSpec::new(family, 3, RngSpec::new(4)), 100)?;
        let bins: Vec<usize> = scott_bins(&p.concat(&t)?)?.iter().map(|b| b.count).collect();
        println!(
            "{family}: ddks {:.3}  onedks {:.3}  T² {:.2}  KL {:.3}  (bins {bins:?})",
            ddks_statistic(&p, &t)?,
            onedks(&p, &t)?,
            hotelling_t2(&p, &t)?,
            kl_divergence(&p, &t)?,
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
