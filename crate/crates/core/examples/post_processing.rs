//! Attacker accuracy before and after deterministic post-processing.

use mipnoise::attack::{optimal_attacker_accuracy, PostProcess, PostProcessed};
use mipnoise::mechanisms::MipMechanism;
use mipnoise::{DatasetTable, MeanQuery, NoiseVariant};

fn main() -> mipnoise::Result<()> {
    let rows: Vec<[f64; 2]> = (0..10).map(|i| [i as f64 * 0.3, (i as f64).cos()]).collect();
    let data = DatasetTable::from_rows(&rows)?;
    let make = || MipMechanism::with_exact_moments(data.clone(), MeanQuery, 0.3, 2, NoiseVariant::DensityExact);
    let base = optimal_attacker_accuracy(&make()?, 9, 5000, 2)?;
    println!("identity: {:.4}", base.accuracy);
    let maps = [
        PostProcess::Projection { coord: 0 },
        PostProcess::Quantize { coord: 1, cuts: [-0.2, 0.2] },
        PostProcess::Affine { matrix: vec![1.0, 2.0, 0.0, 1.0], offset: vec![0.5, 0.0] },
    ];
    for f in maps {
        let mech = PostProcessed::new(make()?, f.clone())?;
        let r = optimal_attacker_accuracy(&mech, 9, 5000, 2)?;
        println!("{f:?}: {:.4}", r.accuracy);
    }
    Ok(())
}
