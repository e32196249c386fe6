// Exact ddKS distance between two small samples, plus the per-orthant
// membership counts behind it.
//
// ```bash
// cargo run --release --example exact_statistic
// ```

use ddks::exact::{membership, orthant_index};
use ddks::{ddks_statistic, ddks_statistic_naive, Sample};

pub fn run_example() -> ddks::Result<()> {
    let p = Sample::from_rows(&[[0.1, 0.2], [0.4, 0.9], [0.7, 0.3]])?;
    let t = Sample::from_rows(&[[0.6, 0.8], [0.9, 0.7], [0.8, 0.95], [0.3, 0.6]])?;

    let d = ddks_statistic(&p, &t)?;
    assert_eq!(d, ddks_statistic_naive(&p, &t)?);
    println!("ddKS(P, T) = {d:.4}");

    // bit m of the orthant index is set when point[m] >= test_point[m]
    println!("orthant of (0.7, 0.3) around (0.4, 0.9): {}", orthant_index(&[0.4, 0.9], &[0.7, 0.3])?);

    let pooled = p.concat(&t)?;
    let counts = membership(&t, &pooled)?;
    for i in 0..counts.n_test_points() {
        println!("test point {:?}: T counts per orthant {:?}", pooled.row(i), counts.row(i));
    }
    Ok(())
}

#[allow(dead_code)]
fn main() -> ddks::Result<()> {
    run_example()
}
