//! DP-SGD covariance fit with zCDP accounting at a target MIP level.

use mipnoise::experiments::{ground_truth_covariance, relative_error, sample_gaussian};
use mipnoise::mechanisms::{dpsgd_train, noise_multiplier_for_eta, Clip, DpSgdConfig};
use mipnoise::SeedStream;

fn main() -> mipnoise::Result<()> {
    let stream = SeedStream::new(3);
    let truth = ground_truth_covariance(&[1.0, 2.0, 5.0], &stream)?;
    let data = sample_gaussian(&truth, 5000, &stream.named("data"))?;
    let steps = 200;
    for eta in [0.01, 0.1, 0.4] {
        let cfg = DpSgdConfig {
            steps,
            clip: Clip::MedianHeuristic,
            noise_multiplier: noise_multiplier_for_eta(eta, steps, data.len())?,
            ..DpSgdConfig::default()
        };
        let run = dpsgd_train(&data, &cfg, 11)?;
        let acc = run.accounting.expect("noise multiplier is positive");
        println!(
            "eta={eta}: z={:.1}, clip {:.3}, epsilon {:.3}, delta {:.1e}, relative error {:.4}",
            cfg.noise_multiplier,
            run.clip_norm,
            acc.epsilon,
            acc.delta,
            relative_error(&run.output.theta_hat, truth.as_slice())
        );
    }
    Ok(())
}
