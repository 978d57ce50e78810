//! The whole file pipeline through the command-line layer: write a synthetic
//! corpus, reduce its posteriors, pool over the alignment, then calibrate.
//! The reports are the same JSON the binary prints.

use clap::Parser;
use phonecal::cli::{execute, Cli};
use phonecal::synth::DurationLaw;
use phonecal::SynthConfig;

fn run(args: &[&str]) -> phonecal::Result<()> {
    let cli = Cli::parse_from(std::iter::once("phonecal").chain(args.iter().copied()));
    let mut sink = Vec::new();
    execute(&cli, &mut sink)?;
    let report: serde_json::Value = serde_json::from_slice(&sink)?;
    let mut summary = report.as_object().cloned().unwrap_or_default();
    summary.remove("manifest");
    println!("{} -> {}", args[0], serde_json::Value::Object(summary));
    Ok(())
}

fn main() -> phonecal::Result<()> {
    let dir = std::env::temp_dir().join("phonecal_pipeline");
    std::fs::create_dir_all(&dir)?;
    let config = SynthConfig {
        duration_law: DurationLaw::Uniform { min: 3, max: 12 },
        n_trials_per_class: 100,
        ..SynthConfig::circle(5, 1.5, 1.0)
    };
    let cfg = dir.join("config.json");
    std::fs::write(&cfg, serde_json::to_string(&config)?)?;
    let d = |name: &str| dir.join(name).to_string_lossy().into_owned();

    run(&[
        "synth",
        "--config",
        &d("config.json"),
        "--out",
        &d("corpus"),
        "--seed",
        "5",
    ])?;
    run(&[
        "reduce",
        "--posteriors",
        &d("corpus/posteriors"),
        "--pdf-map",
        &d("corpus/pdf_map.txt"),
        "--pdf-priors",
        &d("corpus/pdf_priors.txt"),
        "--phones",
        &d("corpus/phones.txt"),
        "--out",
        &d("llk"),
    ])?;
    run(&[
        "pool",
        "--llk",
        &d("llk"),
        "--alignment",
        &d("corpus/alignment.csv"),
        "--phones",
        &d("corpus/phones.txt"),
        "--method",
        "sum",
        "--out",
        &d("trials.jsonl"),
    ])?;
    run(&[
        "calibrate",
        "--trials",
        &d("trials.jsonl"),
        "--phones",
        &d("corpus/phones.txt"),
        "--transform-out",
        &d("transform.json"),
    ])?;
    Ok(())
}
