//! Fits a small model on a synthetic two-pattern dataset, saves it, loads
//! it back and checks the predictions agree.

use chaosnet::autodiff::Tensor;
use chaosnet::data::{ImageDataset, Split};
use chaosnet::experiment::{evaluate, fit, load_checkpoint, save_checkpoint, ExperimentConfig};
use chaosnet::maps::MapKind;

fn main() -> anyhow::Result<()> {
    // class c lights up row 2c of a 28x28 image
    let (n, side) = (100, 28);
    let mut pixels = vec![0u8; n * side * side];
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % 10;
        labels.push(c);
        let row = 2 * c + 3;
        pixels[i * side * side + row * side..i * side * side + (row + 1) * side].fill(255);
    }
    let ds = ImageDataset::new("stripes", Split::Train, (1, side, side), pixels, labels)?;

    let mut config = ExperimentConfig::default().with_map(MapKind::SkewTent);
    config.epochs = 15;
    config.arch.filters = Some(vec![4, 8]);
    config.arch.head = Some(Some(16));
    let fitted = fit(&config, 1, &ds)?;
    println!(
        "loss {:.3} -> {:.3}",
        fitted.epoch_losses[0],
        fitted.epoch_losses[fitted.epoch_losses.len() - 1]
    );
    println!("train macro F1 {:.3}", evaluate(&fitted.model, &ds)?.macro_f1);

    let path = std::env::temp_dir().join("chaosnet-example.chnt");
    save_checkpoint(&fitted.model, &path)?;
    let back = load_checkpoint(config.architecture()?, &path)?;
    let probe: Tensor<f32> = ds.batch(&[0, 1, 2, 3])?;
    assert_eq!(fitted.model.forward_logits(&probe)?, back.forward_logits(&probe)?);
    println!("reloaded {} bytes from {}: identical logits", std::fs::metadata(&path)?.len(), path.display());
    std::fs::remove_file(path)?;
    Ok(())
}
