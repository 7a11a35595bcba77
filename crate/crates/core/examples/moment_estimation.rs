//! Bootstrap moment estimates against exact enumeration on a small dataset.

use mipnoise::moments::{estimate_moments, exact_moments, MomentEstimator, ResampleSize};
use mipnoise::{DatasetTable, MeanQuery, SeedStream};

fn main() -> mipnoise::Result<()> {
    let xs: Vec<f64> = (0..16).map(|i| (i as f64 * 0.7).sin() * 3.0).collect();
    let data = DatasetTable::from_scalars(&xs)?;
    for order in [2, 4, 6] {
        let exact = exact_moments(&data, &MeanQuery, data.len() / 2, order, true)?.profile()?;
        let est = MomentEstimator {
            size: ResampleSize::HalfOfData,
            ..MomentEstimator::new(2000, order)
        };
        let boot = estimate_moments(&data, &data.full_mask(), &MeanQuery, &est, &SeedStream::new(order as u64))?;
        println!(
            "M={order}: exact sigma {:.4}, bootstrap sigma {:.4} ({} resamples)",
            exact.sigma()[0],
            boot.profile.sigma()[0],
            boot.resamples
        );
    }
    Ok(())
}
