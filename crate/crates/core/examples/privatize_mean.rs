//! One MIP release and one Laplace DP release of a dataset mean.

use mipnoise::attack::dp_epsilon_from_eta;
use mipnoise::mechanisms::{privatize_laplace_dp, privatize_mip, MipParams};
use mipnoise::{DatasetTable, MeanQuery, SeedStream};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> mipnoise::Result<()> {
    let mut rng = SeedStream::new(5).named("data").rng();
    let rows: Vec<[f64; 2]> = (0..1000)
        .map(|_| [rng.sample(StandardNormal), 3.0 + 0.1 * rng.sample::<f64, _>(StandardNormal)])
        .collect();
    let data = DatasetTable::from_rows(&rows)?;
    let eta = 0.3;

    for order in [2, 4, 6] {
        let mip = privatize_mip(&data, &MeanQuery, &MipParams::new(eta, order), 42)?;
        let sigma = mip.profile.as_ref().map(|p| p.sigma().to_vec()).unwrap_or_default();
        println!("mip M={order} release {:?}, estimated sigma {sigma:?}", mip.theta_hat);
    }

    // Records are unbounded, so the DP sensitivity is an assumed range over n/2.
    let epsilon = dp_epsilon_from_eta(eta)?;
    let sensitivity = 8.0 / (data.len() / 2) as f64;
    let dp = privatize_laplace_dp(&data, &MeanQuery, epsilon, sensitivity, 42)?;
    println!("laplace release {:?} (epsilon {epsilon:.3}, scale {:.4})", dp.theta_hat, dp.noise_scale);
    Ok(())
}
