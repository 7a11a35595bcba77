//! Conversion between a pure DP budget and a MIP level, checked against the
//! tight binary mechanism.

use mipnoise::attack::{dp_epsilon_from_eta, mip_eta_from_dp, optimal_attacker_accuracy};
use mipnoise::mechanisms::BinaryTightDp;

fn main() -> mipnoise::Result<()> {
    for eps in [0.01, 0.1, 1.0, 3f64.ln(), 5.0] {
        let eta = mip_eta_from_dp(eps)?;
        println!("epsilon {eps:.4} -> eta {eta:.5} (eps/4 = {:.5}) -> epsilon {:.4}", eps / 4.0, dp_epsilon_from_eta(eta)?);
    }
    let eps = 3f64.ln();
    let mech = BinaryTightDp::new(eps)?;
    let r = optimal_attacker_accuracy(&mech, 0, 20_000, 9)?;
    println!(
        "tight mechanism at epsilon ln 3: attacker accuracy {:.4}, predicted {:.4}",
        r.accuracy,
        0.5 + mip_eta_from_dp(eps)?
    );
    Ok(())
}
