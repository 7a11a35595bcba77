//! MIP and DP noise levels on the pathological dataset, written as CSV,
//! JSON summary and SVG.

use mipnoise::experiments::{emit_results, linspace, run_fig1, Command, ExperimentConfig};

fn main() -> mipnoise::Result<()> {
    let mut cfg = ExperimentConfig::defaults(Command::Fig1);
    cfg.eta_grid = linspace(0.01, 0.49, 13);
    cfg.n_values = vec![8, 16, 24, 32, 40];
    cfg.extras.insert("hybrid_samples".into(), "20000".into());
    let report = run_fig1(&cfg)?;
    for level in &report.levels {
        println!(
            "n={:>2}: sigma {:.3}, sensitivity {:.3e}, MIP below DP for all eta: {:?}",
            level.n,
            level.sigma,
            level.sensitivity,
            report.mip_below_dp(level.n, 0.01)
        );
    }
    let dir = std::env::temp_dir().join("mipnoise_noise_levels");
    let files = emit_results(&report.rows, &dir, "noise_levels", true)?;
    println!("wrote {}", files.csv.display());
    Ok(())
}
