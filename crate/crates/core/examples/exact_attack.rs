//! Bayes-optimal membership attacker against the MIP mean release, compared
//! with the accuracy bound `1/2 + eta`.

use mipnoise::attack::optimal_attacker_accuracy;
use mipnoise::mechanisms::MipMechanism;
use mipnoise::{DatasetTable, MeanQuery, NoiseVariant};

fn main() -> mipnoise::Result<()> {
    let xs = [-1.7, -0.9, -0.4, -0.1, 0.0, 0.2, 0.3, 0.6, 0.8, 1.1, 1.9, 4.0];
    let data = DatasetTable::from_scalars(&xs)?;
    for eta in [0.05, 0.2, 0.4] {
        let mech = MipMechanism::with_exact_moments(data.clone(), MeanQuery, eta, 2, NoiseVariant::DensityExact)?;
        // The outlier at index 11 is the easiest target.
        for target in [4, 11] {
            let r = optimal_attacker_accuracy(&mech, target, 4000, 1)?;
            println!(
                "eta={eta} target={target}: accuracy {:.3} +/- {:.3}, bound {:.3}",
                r.accuracy,
                r.std_error,
                0.5 + eta
            );
        }
    }
    Ok(())
}
