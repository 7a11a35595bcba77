//! A mechanism that resists membership inference yet has no finite DP bound.

use mipnoise::attack::{exact_attacker_accuracy, max_adjacent_pmf_ratio};
use mipnoise::mechanisms::SubsetPublisher;
use mipnoise::DatasetTable;

fn main() -> mipnoise::Result<()> {
    let data = DatasetTable::from_scalars(&[0.0, 1.0, 2.0, 3.0, 4.0, 5.0])?;
    for p in [0.001, 0.01, 0.1] {
        let mech = SubsetPublisher::new(data.clone(), p)?;
        let acc = (0..data.len())
            .map(|t| exact_attacker_accuracy(&mech, t))
            .collect::<mipnoise::Result<Vec<_>>>()?
            .into_iter()
            .fold(0.0, f64::max);
        println!("p={p}: max attacker accuracy {acc:.4}, adjacent PMF ratio {}", max_adjacent_pmf_ratio(&mech)?);
    }
    Ok(())
}
