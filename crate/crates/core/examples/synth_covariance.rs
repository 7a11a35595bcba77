//! A reduced synthetic covariance study: raw fit, MIP releases and DP-SGD.

use mipnoise::experiments::{run_synth, summarize, Command, ExperimentConfig};

fn main() -> mipnoise::Result<()> {
    let mut cfg = ExperimentConfig::defaults(Command::Synth);
    cfg.n_samples = 5000;
    cfg.runs = 2;
    cfg.eta_grid = vec![0.05, 0.2, 0.4];
    cfg.m_set = vec![2, 4];
    cfg.extras.insert("B".into(), "32".into());
    cfg.extras.insert("steps".into(), "100".into());
    let report = run_synth(&cfg)?;
    for row in summarize(&report.rows) {
        println!("{:>8} eta={:<5} relative error {:.4} +/- {:.4}", row.method, row.eta, row.mean, row.std_error);
    }
    Ok(())
}
