//! Noise scale as a function of the privacy level and moment order, and the
//! sigma-norm of sampled noise.

use mipnoise::{mip_scale_constant, sample_mip_noise, sigma_norm, MomentProfile, NoiseConstant, NoiseSpec, NoiseVariant, SeedStream};

fn main() -> mipnoise::Result<()> {
    println!("{:>6} {:>12} {:>12} {:>12}", "eta", "M=2", "M=4", "M=6");
    for eta in [0.05, 0.1, 0.2, 0.4] {
        let c: Vec<f64> = [2, 4, 6]
            .iter()
            .map(|&m| mip_scale_constant(eta, m, NoiseConstant::NonIsotropic))
            .collect::<mipnoise::Result<_>>()?;
        println!("{eta:>6} {:>12.1} {:>12.1} {:>12.1}", c[0], c[1], c[2]);
    }

    let profile = MomentProfile::new(vec![0.5, 1.0, 2.0], 4)?;
    let mut rng = SeedStream::new(1).rng();
    for variant in [NoiseVariant::PaperLiteral, NoiseVariant::DensityExact] {
        let spec = NoiseSpec::new(0.2, profile.clone(), variant, NoiseConstant::NonIsotropic)?;
        let draws = 10_000;
        let mean_norm = (0..draws)
            .map(|_| sigma_norm(&sample_mip_noise(&spec, &mut rng), &profile))
            .sum::<mipnoise::Result<f64>>()?
            / draws as f64;
        println!("{variant:?}: scale {:.1}, mean sigma-norm {mean_norm:.1}", spec.scale());
    }
    Ok(())
}
