//! Fit a transform on one set and apply it to another drawn from the same
//! generator with a different seed. The transported transform gets close to
//! what self-calibration would reach.

use phonecal::synth::DurationLaw;
use phonecal::{fit, generate, h_mc, FitOptions, PoolingMethod, PriorVector, SynthConfig};

fn main() -> phonecal::Result<()> {
    let base = SynthConfig {
        rho: 1.0,
        duration_law: DurationLaw::Uniform { min: 3, max: 15 },
        n_trials_per_class: 400,
        ..SynthConfig::default()
    };
    let a = generate(&SynthConfig {
        seed: 1,
        ..base.clone()
    })?
    .pool(PoolingMethod::Sum)?;
    let b = generate(&SynthConfig { seed: 2, ..base })?.pool(PoolingMethod::Sum)?;
    let prior = PriorVector::flat(10);

    let fit_a = fit(&a, &prior, &FitOptions::default())?;
    let fit_b = fit(&b, &prior, &FitOptions::default())?;
    for (name, trials, own, other) in [("A", &a, &fit_a, &fit_b), ("B", &b, &fit_b, &fit_a)] {
        let transported = h_mc(trials, &prior, Some(&other.transform))?.h_mc;
        println!(
            "set {name}: H = {:.4}, H_min = {:.4}, H with other set's transform = {transported:.4}",
            own.h_mc_before, own.h_mc_after
        );
    }
    Ok(())
}
