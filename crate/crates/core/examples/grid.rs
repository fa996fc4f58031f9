//! Stratified 3-fold selection of the map and learning rate on a
//! 20-per-class MNIST subset, with short training.
//!
//! Reads from `CHAOSNET_DATA_DIR` or `./data`.

use chaosnet::experiment::{grid_search, DataStore, ExperimentConfig};
use chaosnet::maps::MapKind;

fn main() -> anyhow::Result<()> {
    let mut base = ExperimentConfig::default();
    base.samples_per_class = 20;
    base.epochs = 5;
    let mut candidates = Vec::new();
    for map in [MapKind::None, MapKind::Logistic, MapKind::Sine] {
        for lr in [1e-3, 3e-3] {
            let mut c = base.clone().with_map(map);
            c.lr = lr;
            candidates.push(c);
        }
    }
    let store = DataStore::for_config(&base);
    let result = grid_search(&candidates, 3, 1, &store)?;
    for (i, c) in result.candidates.iter().enumerate() {
        println!(
            "{} {:<9} lr={:<6} folds {:?} mean {:.4}",
            if i == result.best { "*" } else { " " },
            c.config.chaotic.kind.as_str(),
            c.config.lr,
            c.fold_f1.iter().map(|f| (f * 1e4).round() / 1e4).collect::<Vec<_>>(),
            c.mean_f1
        );
    }
    Ok(())
}
