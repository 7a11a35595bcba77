//! Bounded output variance alongside exponentially growing sensitivity.

use mipnoise::moments::{pathological_sensitivity, pathological_variance, VarianceMethod};

fn main() -> mipnoise::Result<()> {
    println!("{:>4} {:>10} {:>14} {:>6}", "n", "variance", "sensitivity", "exact");
    for n in (4..=40).step_by(4) {
        let method = if n <= 20 {
            VarianceMethod::Exact
        } else {
            VarianceMethod::Hybrid { samples_per_stratum: 20_000, seed: n as u64 }
        };
        let var = pathological_variance(n, method)?;
        let (delta, exact) = pathological_sensitivity(n, 20)?;
        println!("{n:>4} {:>10.4} {delta:>14.4e} {:>6}", var.variance_upper, exact && var.exact);
    }
    Ok(())
}
