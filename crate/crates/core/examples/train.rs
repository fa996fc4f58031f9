use chaosnet::experiment::{train, ExperimentConfig};

fn main() -> anyhow::Result<()> {
    let mut config = ExperimentConfig::default();
    let args: Vec<String> = std::env::args().skip(1).collect();
    config.apply_overrides(&args)?;
    for &seed in &config.seeds {
        let r = train(&config, seed)?;
        println!(
            "{} {} k={} map={} seed={} macro_f1={:.4} loss {:.4} -> {:.4} ({:.1}s)",
            r.dataset,
            r.variant,
            r.samples_per_class,
            r.map,
            seed,
            r.macro_f1(),
            r.epoch_losses.first().copied().unwrap_or(f64::NAN),
            r.epoch_losses.last().copied().unwrap_or(f64::NAN),
            r.wall_seconds
        );
    }
    Ok(())
}
