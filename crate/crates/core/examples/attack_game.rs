//! Plug-in attackers played against a mechanism, next to the Bayes attacker.

use mipnoise::attack::{attack_game, AlwaysIn, BayesPlugin, DistanceThreshold, PluginAttacker};
use mipnoise::mechanisms::{LaplaceMechanism, Mechanism};
use mipnoise::{DatasetTable, MeanQuery};

fn main() -> mipnoise::Result<()> {
    let data = DatasetTable::from_scalars(&[0.1, 0.4, -0.3, 0.2, 0.0, -0.2, 0.3, 6.0])?;
    let mech = LaplaceMechanism::new(data.clone(), MeanQuery, 1.0, 8.0 / 4.0)?;
    let bayes = BayesPlugin::new(&mech);
    let distance = DistanceThreshold::new(data.clone(), 5.0);
    let attackers: [&dyn PluginAttacker<<LaplaceMechanism as Mechanism>::Output>; 3] = [&AlwaysIn, &distance, &bayes];
    for attacker in attackers {
        let reports = attack_game(&mech, attacker, &[0, 7], 4000, 8)?;
        for r in reports {
            println!("{:<14} target {}: {:.4} +/- {:.4}", r.attacker_name, r.target_id, r.accuracy, r.std_error);
        }
    }
    Ok(())
}
