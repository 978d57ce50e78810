//! Self-calibration on synthetic data for each pooling rule and frame
//! correlation, in the shape of a results table.
//!
//! With fully correlated frames (rho = 1) the summed likelihoods are n times
//! too confident, so the fitted scale lands near 1/n. With independent frames
//! (rho = 0) summing is correct and the scale stays near 1.

use phonecal::synth::DurationLaw;
use phonecal::{fit, generate, FitOptions, PoolingMethod, PriorVector, SynthConfig};

fn main() -> phonecal::Result<()> {
    let prior = PriorVector::flat(10);
    println!(
        "{:>4} {:>7} {:>8} {:>8} {:>8}",
        "rho", "pool", "H", "H_min", "alpha"
    );
    for rho in [0.0, 0.5, 1.0] {
        let config = SynthConfig {
            rho,
            duration_law: DurationLaw::Fixed(8),
            n_trials_per_class: 500,
            seed: 7,
            ..SynthConfig::default()
        };
        let corpus = generate(&config)?;
        for method in PoolingMethod::ALL {
            let trials = corpus.pool(method)?;
            let r = fit(&trials, &prior, &FitOptions::default())?;
            println!(
                "{rho:>4} {method:>7} {:>8.4} {:>8.4} {:>8.4}",
                r.h_mc_before, r.h_mc_after, r.transform.alpha
            );
        }
    }
    Ok(())
}
