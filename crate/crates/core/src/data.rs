//! IDX (MNIST, Fashion-MNIST) and CIFAR-10 binary parsers, on-disk dataset
//! loading, and the seeded stratified subsampler and k-fold splitter.
//!
//! Pixels are kept as the raw bytes from the file and scaled by `1/255`
//! when a batch tensor is built, so a parsed dataset encodes back to the
//! exact input bytes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use byteorder::{BigEndian, ByteOrder};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Real, Tensor};
use crate::error::{Error, ParseError, Result};

pub const NUM_CLASSES: usize = 10;
pub const IDX_IMAGE_MAGIC: u32 = 2051;
pub const IDX_LABEL_MAGIC: u32 = 2049;
/// One label byte followed by 32x32 pixels for each of R, G, B.
pub const CIFAR_RECORD: usize = 1 + 3 * 32 * 32;
/// Environment variable consulted when no data directory is configured.
pub const DATA_DIR_ENV: &str = "CHAOSNET_DATA_DIR";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Split {
    Train,
    Test,
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Split::Train => "train",
            Split::Test => "test",
        })
    }
}

/// Images stored as raw bytes in `[N, C, H, W]` order, with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageDataset {
    pub name: String,
    pub split: Split,
    /// (channels, height, width)
    shape: (usize, usize, usize),
    pixels: Vec<u8>,
    labels: Vec<usize>,
}

impl ImageDataset {
    pub fn new(
        name: impl Into<String>,
        split: Split,
        shape: (usize, usize, usize),
        pixels: Vec<u8>,
        labels: Vec<usize>,
    ) -> Result<Self> {
        let per = shape.0 * shape.1 * shape.2;
        if per == 0 || pixels.len() != per * labels.len() {
            return Err(Error::Data(format!(
                "{} pixel bytes do not make {} images of shape {shape:?}",
                pixels.len(),
                labels.len()
            )));
        }
        if let Some((i, &l)) = labels.iter().enumerate().find(|(_, &l)| l >= NUM_CLASSES) {
            return Err(Error::Data(format!("label {l} at index {i} is outside [0, 10)")));
        }
        Ok(ImageDataset {
            name: name.into(),
            split,
            shape,
            pixels,
            labels,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn image_shape(&self) -> (usize, usize, usize) {
        self.shape
    }

    fn image_len(&self) -> usize {
        self.shape.0 * self.shape.1 * self.shape.2
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn class_counts(&self) -> [usize; NUM_CLASSES] {
        let mut counts = [0; NUM_CLASSES];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// Images `indices` as a `[len, C, H, W]` tensor in `[0, 1]`.
    pub fn batch<T: Real>(&self, indices: &[usize]) -> Result<Tensor<T>> {
        let per = self.image_len();
        let mut values = Vec::with_capacity(indices.len() * per);
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!(
                    "image index {i} out of range for {} images",
                    self.len()
                )));
            }
            values.extend(
                self.pixels[i * per..(i + 1) * per]
                    .iter()
                    .map(|&b| T::from_f64_lossy(f64::from(b) / 255.0)),
            );
        }
        let (c, h, w) = self.shape;
        Tensor::new(vec![indices.len(), c, h, w], values)
    }

    pub fn batch_labels(&self, indices: &[usize]) -> Vec<usize> {
        indices.iter().map(|&i| self.labels[i]).collect()
    }

    /// Every image as one tensor.
    pub fn images<T: Real>(&self) -> Result<Tensor<T>> {
        let all: Vec<usize> = (0..self.len()).collect();
        self.batch(&all)
    }

    /// A new dataset holding `indices` in the given order.
    pub fn select(&self, indices: &[usize]) -> Result<ImageDataset> {
        let per = self.image_len();
        let mut pixels = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            if i >= self.len() {
                return Err(Error::Data(format!(
                    "image index {i} out of range for {} images",
                    self.len()
                )));
            }
            pixels.extend_from_slice(&self.pixels[i * per..(i + 1) * per]);
            labels.push(self.labels[i]);
        }
        ImageDataset::new(self.name.clone(), self.split, self.shape, pixels, labels)
    }
}

fn need(bytes: &[u8], n: usize) -> Result<(), ParseError> {
    if bytes.len() < n {
        Err(ParseError::Truncated {
            needed: n,
            found: bytes.len(),
        })
    } else {
        Ok(())
    }
}

fn check_magic(file: &'static str, bytes: &[u8], expected: u32) -> Result<(), ParseError> {
    need(bytes, 4)?;
    let found = BigEndian::read_u32(&bytes[..4]);
    if found != expected {
        return Err(ParseError::BadMagic {
            file,
            offset: 0,
            expected,
            found,
        });
    }
    Ok(())
}

/// Parses an IDX image file (magic 2051) and its label file (magic 2049).
pub fn parse_idx(images: &[u8], labels: &[u8]) -> Result<ImageDataset> {
    check_magic("image", images, IDX_IMAGE_MAGIC)?;
    check_magic("label", labels, IDX_LABEL_MAGIC)?;
    need(images, 16)?;
    need(labels, 8)?;
    let n = BigEndian::read_u32(&images[4..8]) as usize;
    let rows = BigEndian::read_u32(&images[8..12]) as usize;
    let cols = BigEndian::read_u32(&images[12..16]) as usize;
    let m = BigEndian::read_u32(&labels[4..8]) as usize;
    if n != m {
        return Err(ParseError::CountMismatch { images: n, labels: m }.into());
    }
    let pixel_bytes = n * rows * cols;
    need(images, 16 + pixel_bytes)?;
    need(labels, 8 + n)?;
    let pixels = images[16..16 + pixel_bytes].to_vec();
    let mut out = Vec::with_capacity(n);
    for (record, &l) in labels[8..8 + n].iter().enumerate() {
        if l as usize >= NUM_CLASSES {
            return Err(ParseError::LabelOutOfRange { record, label: l }.into());
        }
        out.push(l as usize);
    }
    ImageDataset::new("idx", Split::Train, (1, rows, cols), pixels, out)
}

/// Writes a single-channel dataset back to (image file, label file) bytes.
pub fn encode_idx(ds: &ImageDataset) -> Result<(Vec<u8>, Vec<u8>)> {
    let (c, h, w) = ds.shape;
    if c != 1 {
        return Err(Error::Data(format!("IDX images are single-channel, dataset has {c}")));
    }
    let mut images = vec![0u8; 16];
    BigEndian::write_u32(&mut images[0..4], IDX_IMAGE_MAGIC);
    BigEndian::write_u32(&mut images[4..8], ds.len() as u32);
    BigEndian::write_u32(&mut images[8..12], h as u32);
    BigEndian::write_u32(&mut images[12..16], w as u32);
    images.extend_from_slice(&ds.pixels);
    let mut labels = vec![0u8; 8];
    BigEndian::write_u32(&mut labels[0..4], IDX_LABEL_MAGIC);
    BigEndian::write_u32(&mut labels[4..8], ds.len() as u32);
    labels.extend(ds.labels.iter().map(|&l| l as u8));
    Ok((images, labels))
}

/// Parses and concatenates CIFAR-10 binary batch files.
pub fn parse_cifar10(batches: &[&[u8]]) -> Result<ImageDataset> {
    let total: usize = batches.iter().map(|b| b.len() / CIFAR_RECORD).sum();
    let mut pixels = Vec::with_capacity(total * (CIFAR_RECORD - 1));
    let mut labels = Vec::with_capacity(total);
    for bytes in batches {
        if bytes.is_empty() || bytes.len() % CIFAR_RECORD != 0 {
            return Err(ParseError::SizeNotMultiple {
                size: bytes.len(),
                record: CIFAR_RECORD,
            }
            .into());
        }
        for rec in bytes.chunks_exact(CIFAR_RECORD) {
            if rec[0] as usize >= NUM_CLASSES {
                return Err(ParseError::LabelOutOfRange {
                    record: labels.len(),
                    label: rec[0],
                }
                .into());
            }
            labels.push(rec[0] as usize);
            pixels.extend_from_slice(&rec[1..]);
        }
    }
    ImageDataset::new("cifar10", Split::Train, (3, 32, 32), pixels, labels)
}

pub fn encode_cifar10(ds: &ImageDataset) -> Result<Vec<u8>> {
    if ds.shape != (3, 32, 32) {
        return Err(Error::Data(format!(
            "CIFAR-10 records hold 3x32x32 images, dataset has {:?}",
            ds.shape
        )));
    }
    let mut out = Vec::with_capacity(ds.len() * CIFAR_RECORD);
    for (label, image) in ds.labels.iter().zip(ds.pixels.chunks_exact(CIFAR_RECORD - 1)) {
        out.push(*label as u8);
        out.extend_from_slice(image);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DatasetId {
    Mnist,
    Fashion,
    Cifar10,
}

impl DatasetId {
    pub const ALL: [DatasetId; 3] = [DatasetId::Mnist, DatasetId::Fashion, DatasetId::Cifar10];

    pub fn as_str(self) -> &'static str {
        match self {
            DatasetId::Mnist => "mnist",
            DatasetId::Fashion => "fashion",
            DatasetId::Cifar10 => "cifar10",
        }
    }

    pub fn is_grayscale(self) -> bool {
        self != DatasetId::Cifar10
    }

    /// File names inside the dataset's subdirectory.
    pub fn files(self, split: Split) -> Vec<&'static str> {
        match (self, split) {
            (DatasetId::Cifar10, Split::Train) => vec![
                "data_batch_1.bin",
                "data_batch_2.bin",
                "data_batch_3.bin",
                "data_batch_4.bin",
                "data_batch_5.bin",
            ],
            (DatasetId::Cifar10, Split::Test) => vec!["test_batch.bin"],
            (_, Split::Train) => vec!["train-images-idx3-ubyte", "train-labels-idx1-ubyte"],
            (_, Split::Test) => vec!["t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte"],
        }
    }

    pub fn fetch_instructions(self, dir: &Path) -> String {
        let target = dir.join(self.as_str());
        match self {
            DatasetId::Mnist => format!(
                "Download the four MNIST files (train/t10k images and labels) from \
                 https://yann.lecun.com/exdb/mnist/ or a mirror, gunzip them, and place \
                 train-images-idx3-ubyte, train-labels-idx1-ubyte, t10k-images-idx3-ubyte \
                 and t10k-labels-idx1-ubyte in {}",
                target.display()
            ),
            DatasetId::Fashion => format!(
                "Download the four Fashion-MNIST files from \
                 https://github.com/zalandoresearch/fashion-mnist (data/fashion), gunzip \
                 them, and place them under their IDX names (train-images-idx3-ubyte, ...) \
                 in {}",
                target.display()
            ),
            DatasetId::Cifar10 => format!(
                "Download cifar-10-binary.tar.gz from https://www.cs.toronto.edu/~kriz/cifar.html, \
                 extract it, and copy data_batch_1.bin .. data_batch_5.bin and test_batch.bin \
                 into {}",
                target.display()
            ),
        }
    }

    /// Reads one split from `dir/<dataset>/`.
    pub fn load(self, dir: &Path, split: Split) -> Result<ImageDataset> {
        let sub = dir.join(self.as_str());
        let mut contents = Vec::new();
        for name in self.files(split) {
            let path = sub.join(name);
            if !path.is_file() {
                return Err(Error::MissingData {
                    path,
                    instructions: self.fetch_instructions(dir),
                });
            }
            contents.push(std::fs::read(&path)?);
        }
        let mut ds = match self {
            DatasetId::Cifar10 => {
                let refs: Vec<&[u8]> = contents.iter().map(Vec::as_slice).collect();
                parse_cifar10(&refs)?
            }
            _ => parse_idx(&contents[0], &contents[1])?,
        };
        ds.name = self.as_str().to_string();
        ds.split = split;
        Ok(ds)
    }
}

impl fmt::Display for DatasetId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "mnist" => Ok(DatasetId::Mnist),
            "fashion" | "fashion-mnist" | "fashion_mnist" => Ok(DatasetId::Fashion),
            "cifar10" | "cifar-10" | "cifar" => Ok(DatasetId::Cifar10),
            other => Err(Error::Config(format!(
                "unknown dataset `{other}` (expected mnist, fashion or cifar10)"
            ))),
        }
    }
}

/// `explicit`, else `$CHAOSNET_DATA_DIR`, else `./data`.
pub fn resolve_data_dir(explicit: Option<&Path>) -> PathBuf {
    if let Some(p) = explicit {
        return p.to_path_buf();
    }
    match std::env::var_os(DATA_DIR_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => PathBuf::from("data"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct SubsetSpec {
    pub samples_per_class: usize,
    pub seed: u64,
}

impl SubsetSpec {
    pub fn new(samples_per_class: usize, seed: u64) -> Result<Self> {
        if samples_per_class == 0 {
            return Err(Error::Config("samples per class must be positive".into()));
        }
        Ok(SubsetSpec {
            samples_per_class,
            seed,
        })
    }
}

fn indices_by_class(labels: &[usize]) -> Vec<Vec<usize>> {
    let mut by_class = vec![Vec::new(); NUM_CLASSES];
    for (i, &l) in labels.iter().enumerate() {
        by_class[l].push(i);
    }
    by_class
}

/// Indices of a label-balanced subset: each class is shuffled with the
/// seed, its first `k` indices are kept, and the union is shuffled again.
pub fn stratified_subset_indices(ds: &ImageDataset, spec: &SubsetSpec) -> Result<Vec<usize>> {
    if spec.samples_per_class == 0 {
        return Err(Error::Config("samples per class must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut chosen = Vec::with_capacity(spec.samples_per_class * NUM_CLASSES);
    for (class, mut members) in indices_by_class(&ds.labels).into_iter().enumerate() {
        if members.len() < spec.samples_per_class {
            return Err(Error::Data(format!(
                "class {class} has {} samples, {} requested",
                members.len(),
                spec.samples_per_class
            )));
        }
        members.shuffle(&mut rng);
        chosen.extend_from_slice(&members[..spec.samples_per_class]);
    }
    chosen.shuffle(&mut rng);
    Ok(chosen)
}

pub fn stratified_subset(ds: &ImageDataset, spec: &SubsetSpec) -> Result<ImageDataset> {
    if ds.split != Split::Train {
        return Err(Error::Data(format!(
            "subsets are drawn from the train split, got {}",
            ds.split
        )));
    }
    ds.select(&stratified_subset_indices(ds, spec)?)
}

/// Stratified `folds`-way split as (train indices, validation indices).
///
/// Each class is shuffled and dealt round-robin into the folds, starting
/// where the previous class stopped, so per-class and total fold sizes both
/// differ by at most one.
pub fn stratified_kfold(
    ds: &ImageDataset,
    folds: usize,
    seed: u64,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if folds < 2 {
        return Err(Error::Config(format!("need at least 2 folds, got {folds}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0usize; ds.len()];
    let mut next = 0;
    for (class, mut members) in indices_by_class(&ds.labels).into_iter().enumerate() {
        if members.is_empty() {
            continue;
        }
        if members.len() < folds {
            return Err(Error::Data(format!(
                "class {class} has {} samples, fewer than {folds} folds",
                members.len()
            )));
        }
        members.shuffle(&mut rng);
        for i in members {
            assignment[i] = next;
            next = (next + 1) % folds;
        }
    }
    Ok((0..folds)
        .map(|f| {
            let (val, train): (Vec<usize>, Vec<usize>) =
                (0..ds.len()).partition(|&i| assignment[i] == f);
            (train, val)
        })
        .collect())
}
