//! Pairwise EER confusion matrix on a synthetic corpus, written as CSV to
//! stdout and as a PGM image next to the system temp dir.
//!
//! Neighbouring classes on the circle are the most confusable, so the EER
//! is largest just off the diagonal.

use std::fs::File;
use std::io::BufWriter;

use phonecal::io::{write_confusion_csv, write_confusion_pgm};
use phonecal::metrics::{confusion_matrix, eer, TargetFilter};
use phonecal::synth::DurationLaw;
use phonecal::{generate, PoolingMethod, SynthConfig};

fn main() -> phonecal::Result<()> {
    println!("separable scores: EER = {}", eer(&[3.0, 4.0], &[1.0, 2.0]));
    println!("identical scores: EER = {}", eer(&[1.0], &[1.0]));

    let config = SynthConfig {
        duration_law: DurationLaw::Fixed(4),
        n_trials_per_class: 300,
        ..SynthConfig::circle(6, 1.5, 1.0)
    };
    let corpus = generate(&config)?;
    let trials = corpus.pool(PoolingMethod::Mean)?;
    let m = confusion_matrix(&trials, &corpus.phones, &TargetFilter::all(&corpus.phones));

    write_confusion_csv(&m, &corpus.phones, std::io::stdout().lock())?;
    let path = std::env::temp_dir().join("phonecal_confusion.pgm");
    write_confusion_pgm(&m, BufWriter::new(File::create(&path)?))?;
    println!("wrote {}", path.display());
    Ok(())
}
