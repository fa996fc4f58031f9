use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::ExperimentConfig;
use crate::autodiff::{adam_step, AdamConfig, Graph};
use crate::data::{self, DatasetId, ImageDataset, Split, SubsetSpec};
use crate::error::{Error, Result};
use crate::maps::MapKind;
use crate::metrics::{macro_f1, EvalResult};
use crate::models::{Model, Variant, EVAL_CHUNK};

/// Offsets the minibatch-order stream from the subset and weight streams,
/// which use the run seed directly.
const SHUFFLE_STREAM: u64 = 0x5eed_f00d;

/// Parsed datasets shared by every run of a suite.
#[derive(Debug)]
pub struct DataStore {
    dir: PathBuf,
    loaded: Mutex<HashMap<(DatasetId, Split), Arc<ImageDataset>>>,
}

impl DataStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        DataStore {
            dir: dir.into(),
            loaded: Mutex::new(HashMap::new()),
        }
    }

    /// Data directory from the config, the environment, or `./data`.
    pub fn for_config(config: &ExperimentConfig) -> Self {
        DataStore::new(data::resolve_data_dir(config.data_dir.as_deref()))
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn get(&self, id: DatasetId, split: Split) -> Result<Arc<ImageDataset>> {
        if let Some(ds) = self.loaded.lock().expect("store lock").get(&(id, split)) {
            return Ok(Arc::clone(ds));
        }
        // Parse outside the lock; a rare duplicate parse is harmless.
        let ds = Arc::new(id.load(&self.dir, split)?);
        let mut map = self.loaded.lock().expect("store lock");
        Ok(Arc::clone(map.entry((id, split)).or_insert(ds)))
    }
}

/// Outcome and provenance of one training run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub dataset: DatasetId,
    pub variant: Variant,
    pub samples_per_class: usize,
    pub map: MapKind,
    pub seed: u64,
    pub epochs: usize,
    /// Mean training loss of each epoch.
    pub epoch_losses: Vec<f64>,
    pub eval: EvalResult,
    pub wall_seconds: f64,
    pub version: &'static str,
}

impl RunRecord {
    pub fn macro_f1(&self) -> f64 {
        self.eval.macro_f1
    }
}

/// Predicts every image of `ds` and scores the predictions.
pub fn evaluate(model: &Model<f32>, ds: &ImageDataset) -> Result<EvalResult> {
    let mut predicted = Vec::with_capacity(ds.len());
    let all: Vec<usize> = (0..ds.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        predicted.extend(model.predict(&ds.batch::<f32>(chunk)?)?);
    }
    macro_f1(ds.labels(), &predicted)
}

/// A trained model with its per-epoch mean losses.
pub struct Fitted {
    pub model: Model<f32>,
    pub epoch_losses: Vec<f64>,
}

/// Minibatch Adam on all of `train`, visiting it in a fresh seeded order
/// every epoch.
pub fn fit(config: &ExperimentConfig, seed: u64, train: &ImageDataset) -> Result<Fitted> {
    config.validate()?;
    let mut model = Model::<f32>::build(config.architecture()?, seed)?;
    let images = train.images::<f32>()?;
    let labels = train.labels();
    let adam = AdamConfig::with_lr(config.lr);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ SHUFFLE_STREAM);
    let mut order: Vec<usize> = (0..train.len()).collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (step, chunk) in order.chunks(config.batch_size).enumerate() {
            let batch = images.gather_rows(chunk)?;
            let batch_labels: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let mut g = Graph::new();
            let loss = model.loss(&mut g, &batch, &batch_labels)?;
            let value = f64::from(g.value(loss).values()[0]);
            if !value.is_finite() {
                return Err(Error::Numerical(format!(
                    "loss became {value} at epoch {epoch}, step {step} \
                     (map {}, lr {}, batch {}, seed {seed})",
                    config.chaotic.kind, config.lr, config.batch_size
                )));
            }
            total += value * chunk.len() as f64;
            g.backward(loss)?;
            g.accumulate_param_grads(model.params_mut())?;
            adam_step(model.params_mut(), &adam)?;
        }
        epoch_losses.push(total / train.len().max(1) as f64);
    }
    Ok(Fitted {
        model,
        epoch_losses,
    })
}

/// [`train`] with datasets taken from `store`.
pub fn train_with(config: &ExperimentConfig, seed: u64, store: &DataStore) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let full = store.get(config.dataset, Split::Train)?;
    let spec = SubsetSpec::new(config.samples_per_class, seed)?;
    let subset = data::stratified_subset(&full, &spec)?;
    let test = store.get(config.dataset, Split::Test)?;
    let fitted = fit(config, seed, &subset)?;
    let eval = evaluate(&fitted.model, &test)?;
    Ok(RunRecord {
        config_hash: config.hash(),
        dataset: config.dataset,
        variant: config.variant,
        samples_per_class: config.samples_per_class,
        map: config.chaotic.kind,
        seed,
        epochs: config.epochs,
        epoch_losses: fitted.epoch_losses,
        eval,
        wall_seconds: start.elapsed().as_secs_f64(),
        version: env!("CARGO_PKG_VERSION"),
    })
}

/// Draws the limited-data subset, trains, and scores on the full test split.
pub fn train(config: &ExperimentConfig, seed: u64) -> Result<RunRecord> {
    train_with(config, seed, &DataStore::for_config(config))
}

/// Runs every (config, seed) job on up to `parallelism` worker threads.
/// Results come back in job order; a failing job yields an error entry and
/// does not stop the others.
pub fn run_suite(
    jobs: &[(ExperimentConfig, u64)],
    parallelism: usize,
    store: &DataStore,
) -> Vec<Result<RunRecord>> {
    let slots: Vec<Mutex<Option<Result<RunRecord>>>> = jobs.iter().map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    let workers = parallelism.clamp(1, jobs.len().max(1));
    std::thread::scope(|scope| {
        for _ in 0..workers {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some((config, seed)) = jobs.get(i) else { break };
                let result = train_with(config, *seed, store);
                *slots[i].lock().expect("slot lock") = Some(result);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| s.into_inner().expect("slot lock").expect("every job ran"))
        .collect()
}

/// One (config, seed) job per seed of every config.
pub fn expand_seeds(configs: &[ExperimentConfig]) -> Vec<(ExperimentConfig, u64)> {
    configs
        .iter()
        .flat_map(|c| c.seeds.iter().map(move |&s| (c.clone(), s)))
        .collect()
}

/// Validation scores of one grid candidate.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub config: ExperimentConfig,
    pub fold_f1: Vec<f64>,
    pub mean_f1: f64,
    pub num_parameters: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridResult {
    pub best: usize,
    pub candidates: Vec<CandidateScore>,
}

impl GridResult {
    pub fn best_config(&self) -> &ExperimentConfig {
        &self.candidates[self.best].config
    }
}

/// Stratified k-fold model selection on a limited-data subset.
///
/// The subset is drawn from the train split with `seed`; each candidate is
/// trained on every fold's training part and scored on its validation part.
/// The highest mean validation macro F1 wins, then the smaller parameter
/// count, then the earlier candidate.
pub fn grid_search(
    candidates: &[ExperimentConfig],
    folds: usize,
    seed: u64,
    store: &DataStore,
) -> Result<GridResult> {
    let first = candidates
        .first()
        .ok_or_else(|| Error::Config("grid search needs at least one candidate".into()))?;
    for c in candidates {
        c.validate()?;
        if c.dataset != first.dataset || c.samples_per_class != first.samples_per_class {
            return Err(Error::Config(
                "grid candidates must share dataset and samples_per_class".into(),
            ));
        }
    }
    let full = store.get(first.dataset, Split::Train)?;
    let subset = data::stratified_subset(&full, &SubsetSpec::new(first.samples_per_class, seed)?)?;
    let splits = data::stratified_kfold(&subset, folds, seed)?;
    let mut scores = Vec::with_capacity(candidates.len());
    for config in candidates {
        let mut fold_f1 = Vec::with_capacity(folds);
        for (train_idx, val_idx) in &splits {
            let fitted = fit(config, seed, &subset.select(train_idx)?)?;
            fold_f1.push(evaluate(&fitted.model, &subset.select(val_idx)?)?.macro_f1);
        }
        let mean_f1 = fold_f1.iter().sum::<f64>() / fold_f1.len() as f64;
        scores.push(CandidateScore {
            config: config.clone(),
            fold_f1,
            mean_f1,
            num_parameters: Model::<f32>::build(config.architecture()?, 0)?.num_parameters(),
        });
    }
    let best = select_best(&scores);
    Ok(GridResult {
        best,
        candidates: scores,
    })
}

fn select_best(scores: &[CandidateScore]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        let b = &scores[best];
        if s.mean_f1 > b.mean_f1 || (s.mean_f1 == b.mean_f1 && s.num_parameters < b.num_parameters)
        {
            best = i;
        }
    }
    best
}
