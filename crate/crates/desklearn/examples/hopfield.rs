//! Hopfield associative memory: Hebbian storage, energy descent, and
//! recall from corrupted probes.
//!
//! ```sh
//! cargo run -p desklearn --example hopfield
//! ```

use desklearn::classic::{corrupt_pattern, random_pattern, HopfieldNet};
use desklearn::rng::SplitRng;

fn main() -> desklearn::Result<()> {
    let mut rng = SplitRng::new(2);
    let n = 100;
    let patterns: Vec<Vec<f64>> = (0..10).map(|_| random_pattern(n, &mut rng)).collect();
    let net = HopfieldNet::store(&patterns)?;
    println!("stored 10 random patterns in a {n}-neuron network (Hebbian rule)");

    // corrupt a stored pattern and let the network settle
    let target = &patterns[0];
    let probe = corrupt_pattern(target, 10, &mut rng);
    println!("\nenergy of stored pattern : {:.2}", net.energy(target)?);
    println!("energy of corrupted probe: {:.2}", net.energy(&probe)?);
    let settled = net.recall(&probe, n * n)?;
    println!("energy after settling    : {:.2}", net.energy(&settled)?);
    let recovered = settled == *target;
    println!("recovered the original   : {recovered}");

    // success rate over many corrupted probes
    let mut ok = 0;
    let trials = 100;
    for t in 0..trials {
        let target = &patterns[t % patterns.len()];
        let probe = corrupt_pattern(target, 10, &mut rng);
        if net.recall(&probe, n * n)? == *target {
            ok += 1;
        }
    }
    println!("\nrecall success over {trials} trials with 10% corruption: {ok}/{trials}");
    Ok(())
}
