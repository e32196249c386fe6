// vdKS and rdKS next to the exact statistic on a mixture dataset.
//
// ```bash
// cargo run --release --example approximations
// ```

use ddks::datasets::{gen_pair, DatasetSpec, Family};
use ddks::vdks::{default_voxels_per_dim, vdks_statistic};
use ddks::vdks::vdks_statistic_with;
use ddks::{ddks_statistic, rdks_statistic, RngSpec, VdksConfig};

pub fn run_example() -> ddks::Result<()> {
    let spec = DatasetSpec::new(Family::Mm, 3, RngSpec::new(11));
    for n in [50, 200] {
        let (p, t) = gen_pair(&spec, n)?;
        let k = default_voxels_per_dim(2 * n, 3);
        let refined = vdks_statistic_with(&p, &t, &VdksConfig { refine: true, ..VdksConfig::default() })?;
        println!(
            "n={n:>3}  ddks {:.4}  vdks(k={k}) {:.4}  vdks refined {:.4}  rdks {:.4}",
            ddks_statistic(&p, &t)?,
            vdks_statistic(&p, &t, k)?,
            refined,
            rdks_statistic(&p, &t)?,
        );
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
