//! A reduced MNIST table (cnn2 only, k in {10, 20}, 5 epochs, two seeds):
//! writes results.csv, means.csv, gains.csv and an SVG chart to
//! `target/replicate_small`.
//!
//! Reads from `CHAOSNET_DATA_DIR` or `./data`.

use std::path::Path;

use chaosnet::data::DatasetId;
use chaosnet::experiment::{replicate_table, DataStore, ExperimentConfig, ReplicateOptions};
use chaosnet::models::Variant;

fn main() -> anyhow::Result<()> {
    let mut base = ExperimentConfig::default();
    base.epochs = 5;
    let mut opts = ReplicateOptions::new(base.clone());
    opts.seeds = vec![1, 2];
    opts.sample_sizes = Some(vec![10, 20]);
    opts.variants = Some(vec![Variant::Cnn2]);
    opts.parallelism = std::thread::available_parallelism().map_or(1, |n| n.get());

    let store = DataStore::for_config(&base);
    let out = Path::new("target/replicate_small");
    let rep = replicate_table(DatasetId::Mnist, &opts, &store, out)?;
    println!("{}", rep.table.format_text());
    println!("{}", rep.gains.format_text(false));
    println!("chart: {}", rep.svg.display());
    Ok(())
}
