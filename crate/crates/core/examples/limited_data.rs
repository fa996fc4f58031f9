//! Loads MNIST, draws a stratified k-per-class subset and splits it into
//! stratified folds.
//!
//! Reads from `CHAOSNET_DATA_DIR` or `./data`.

use chaosnet::data::{self, DatasetId, Split, SubsetSpec};

fn main() -> anyhow::Result<()> {
    let dir = data::resolve_data_dir(None);
    let train = DatasetId::Mnist.load(&dir, Split::Train)?;
    let test = DatasetId::Mnist.load(&dir, Split::Test)?;
    println!("train {} images {:?}, test {}", train.len(), train.image_shape(), test.len());
    println!("train class counts {:?}", train.class_counts());

    let subset = data::stratified_subset(&train, &SubsetSpec::new(40, 1)?)?;
    println!("k=40 subset: {} images, counts {:?}", subset.len(), subset.class_counts());
    println!("first labels {:?}", &subset.labels()[..12]);

    for (i, (tr, val)) in data::stratified_kfold(&subset, 4, 1)?.iter().enumerate() {
        let val_ds = subset.select(val)?;
        println!("fold {i}: train {}, validation {} {:?}", tr.len(), val.len(), val_ds.class_counts());
    }

    let batch = subset.batch::<f32>(&[0, 1, 2])?;
    let peak = batch.values().iter().cloned().fold(0.0f32, f32::max);
    println!("batch shape {:?}, pixel range [0, {peak}]", batch.shape());
    Ok(())
}
