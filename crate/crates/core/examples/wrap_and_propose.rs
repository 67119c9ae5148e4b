//! Boundary rules and the two-scale proposal.
//!
//! Shows where the literal piecewise wrap and the torus wrap disagree, then
//! draws a few proposals from the objects preset and reports how often each
//! scale fires.

use deep_mcmcp::latent::{wrap_eq2_coord, wrap_torus_coord, LatentSpace, LatentVector};
use deep_mcmcp::proposal::{propose, ProposalConfig};
use deep_mcmcp::rng::keyed_rng;

fn main() -> deep_mcmcp::Result<()> {
    println!("{:>6} {:>10} {:>10}", "z", "literal", "torus");
    for z in [0.3, 1.2, 1.5, -1.2, -1.5, -1.8, 3.4] {
        println!("{z:>6} {:>10.4} {:>10.4}", wrap_eq2_coord(z)?, wrap_torus_coord(z)?);
    }

    let space = LatentSpace::unit_hypercube("objects", 8)?;
    let config = ProposalConfig::objects();
    let current = LatentVector::zeros(8);
    let mut rng = keyed_rng(1, "example", 0);
    let mut small = 0;
    let n = 10_000;
    for _ in 0..n {
        let next = propose(&current, &space, &config, &mut rng)?;
        assert!(space.contains(&next));
        // a low-scale step rarely moves any coordinate by more than 0.4
        if next.values().iter().all(|v| v.abs() < 0.4) {
            small += 1;
        }
    }
    println!(
        "objects preset: p_low {}, sigma {} / {}; {:.1}% of steps stayed within 0.4 per coordinate",
        config.p_low,
        config.sigma_low,
        config.sigma_high,
        100.0 * small as f64 / n as f64
    );
    println!("faces preset: {:?}", ProposalConfig::faces());
    Ok(())
}
