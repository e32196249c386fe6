// Synthetic families, CSV round trips and default overrides.
//
// ```bash
// cargo run --release --example datasets
// ```

use ddks::datasets::{gen_pair, load_samples, DatasetDefaults, DatasetSpec, Family};
use ddks::RngSpec;

pub fn run_example() -> ddks::Result<()> {
    for family in Family::SYNTHETIC {
        let spec = DatasetSpec::new(family, 3, RngSpec::new(1));
        let (p, _) = gen_pair(&spec, 5)?;
        println!("{family}: params {:?}\n  first P row {:?}", spec.params, p.row(0));
    }

    let custom = DatasetDefaults::from_toml("[skew]\nrate2 = 5.0\n")?;
    println!("skew with rate2 overridden: {:?}", custom.skew);

    let dir = std::env::temp_dir().join(format!("ddks-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|source| ddks::Error::Io { path: dir.clone(), source })?;
    let (p, t) = gen_pair(&DatasetSpec::new(Family::Dvu, 4, RngSpec::new(2)), 20)?;
    let (a, b) = (dir.join("p.csv"), dir.join("t.csv"));
    p.write_csv(&a)?;
    t.write_csv(&b)?;
    let (p2, t2) = load_samples(&a, &b)?;
    assert_eq!((p, t), (p2, t2));
    println!("CSV round trip through {} is lossless", dir.display());
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
