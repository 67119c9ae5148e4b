//! A single chain answered by the simulated Barker respondent.
//!
//! The target is a two-mode mixture with known moments, so the thinned
//! samples can be compared against the truth.

use deep_mcmcp::chain::{acceptance_rate, default_burn_in, run_chain, thin, Chain, DEFAULT_STRIDE};
use deep_mcmcp::latent::{Bounds, LatentSpace, WrapMode};
use deep_mcmcp::proposal::ProposalConfig;
use deep_mcmcp::respondent::{BarkerOracle, RespondentConfig};
use deep_mcmcp::synthetic::two_mode_target;

fn main() -> deep_mcmcp::Result<()> {
    let trials: usize = std::env::args().nth(1).and_then(|a| a.parse().ok()).unwrap_or(50_000);
    let target = two_mode_target("two-mode", 1.5);
    let space = LatentSpace::new("plane", 2, Bounds::Hypercube { half_width: 8.0 }, WrapMode::Torus)?;
    let mut oracle = BarkerOracle::new([target.clone()], RespondentConfig::default(), 1)?;
    let mut chain = Chain::seeded("two-mode/0", "two-mode", &space, 1);
    run_chain(&mut chain, &space, &ProposalConfig::single(0.7), &mut oracle, trials)?;

    let samples = thin(&chain, default_burn_in(chain.states.len()), DEFAULT_STRIDE)?;
    let n = samples.len() as f64;
    let mean: Vec<f64> = (0..2).map(|d| samples.iter().map(|s| s.0[d]).sum::<f64>() / n).collect();
    let var: Vec<f64> = (0..2)
        .map(|d| samples.iter().map(|s| (s.0[d] - mean[d]).powi(2)).sum::<f64>() / n)
        .collect();
    let truth = target.covariance();
    println!("{trials} trials, {} thinned samples", samples.len());
    println!("acceptance rate  {:.3}", acceptance_rate(&chain)?);
    println!("mean             ({:+.3}, {:+.3})  target (0, 0)", mean[0], mean[1]);
    println!(
        "variance         ({:.3}, {:.3})  target ({:.3}, {:.3})",
        var[0], var[1], truth[0][0], truth[1][1]
    );
    let right = samples.iter().filter(|s| s.0[0] > 0.0).count() as f64 / n;
    println!("mode occupancy   {:.2} / {:.2}", right, 1.0 - right);
    Ok(())
}
