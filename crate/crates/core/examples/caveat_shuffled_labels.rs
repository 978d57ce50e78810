//! Why a self-calibrated score alone says little: shuffle the labels of a
//! well-separated corpus and the raw cross entropy explodes, but fitting a
//! transform pulls it back to about ln N by driving the scale toward zero.

use phonecal::synth::{shuffle_labels, DurationLaw};
use phonecal::{fit, generate, h_mc, FitOptions, PoolingMethod, PriorVector, SynthConfig};

fn main() -> phonecal::Result<()> {
    let config = SynthConfig {
        duration_law: DurationLaw::Fixed(8),
        n_trials_per_class: 200,
        ..SynthConfig::circle(10, 6.0, 1.0)
    };
    let trials = generate(&config)?.pool(PoolingMethod::Mean)?;
    let shuffled = shuffle_labels(&trials, 11);
    let prior = PriorVector::flat(10);

    let r = fit(&shuffled, &prior, &FitOptions::default())?;
    println!(
        "true labels:       H = {:.4}",
        h_mc(&trials, &prior, None)?.h_mc
    );
    println!("shuffled:          H = {:.4}", r.h_mc_before);
    println!(
        "shuffled, fitted:  H = {:.4} (alpha {:.4})",
        r.h_mc_after, r.transform.alpha
    );
    println!("ln N               = {:.4}", 10f64.ln());
    Ok(())
}
