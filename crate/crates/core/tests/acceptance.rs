//! Acceptance gate. Runs every criterion at its stated tolerance and prints
//! one PASS / FAIL / SKIP line per criterion; exits non-zero on any FAIL.
//!
//! Data-dependent criteria read `CHAOSNET_DATA_DIR` (default: `data/` at the
//! workspace root) and report SKIP when the files are absent. The CIFAR-10
//! check only runs with `CHAOSNET_EXTENDED=1`. Criterion numbers given as
//! arguments (`cargo test --test acceptance -- 2 4`) restrict the run.

use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use chaosnet::autodiff::{grad_check, GradCheckOptions, Graph, Tensor};
use chaosnet::data::{self, DatasetId, ImageDataset, Split};
use chaosnet::experiment::{
    read_runs_csv, replicate_table, run_suite, train_with, DataStore, ExperimentConfig,
    ReplicateOptions, ResultTable, RunRecord, MAP_COLUMNS,
};
use chaosnet::maps::{self, MapKind, MapParams};
use chaosnet::metrics::{gain_percent, macro_f1};
use chaosnet::models::{ArchitectureSpec, Model, Variant};
use chaosnet::transform::{self, ChaoticLayerConfig, FrozenStats, StatsGradient};
use chaosnet::{Error, ParseError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[derive(PartialEq)]
enum Outcome {
    Pass,
    Fail,
    Skip,
}

struct Gate {
    results: Vec<(usize, Outcome)>,
    selected: Vec<usize>,
}

impl Gate {
    fn wants(&self, id: usize) -> bool {
        self.selected.is_empty() || self.selected.contains(&id)
    }

    fn report(&mut self, id: usize, name: &str, outcome: Outcome, elapsed: Duration, detail: String) {
        let tag = match outcome {
            Outcome::Pass => "PASS",
            Outcome::Fail => "FAIL",
            Outcome::Skip => "SKIP",
        };
        println!("{tag} [{id:>2}] {name} ({:.1}s): {detail}", elapsed.as_secs_f64());
        self.results.push((id, outcome));
    }

    fn check(&mut self, id: usize, name: &str, limit: Option<Duration>, f: impl FnOnce() -> Result<(bool, String), String>) {
        if !self.wants(id) {
            return;
        }
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        match result {
            Ok((ok, mut detail)) => {
                let in_time = limit.is_none_or(|l| elapsed <= l);
                if !in_time {
                    detail.push_str(&format!("; over the {:.0}s budget", limit.unwrap().as_secs_f64()));
                }
                let outcome = if ok && in_time { Outcome::Pass } else { Outcome::Fail };
                self.report(id, name, outcome, elapsed, detail)
            }
            Err(skip) => self.report(id, name, Outcome::Skip, elapsed, skip),
        }
    }
}

fn data_dir() -> PathBuf {
    std::env::var_os(data::DATA_DIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(|| Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data"))
}

fn require(dir: &Path, id: DatasetId) -> Result<(), String> {
    for split in [Split::Train, Split::Test] {
        for f in id.files(split) {
            let path = dir.join(id.as_str()).join(f);
            if !path.exists() {
                return Err(format!("{} not found; {}", path.display(), id.fetch_instructions(dir)));
            }
        }
    }
    Ok(())
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

// ---------------------------------------------------------------- 1

fn map_correctness() -> (bool, String) {
    let mut failures = Vec::new();
    let mut expect = |label: &str, ok: bool| {
        if !ok {
            failures.push(label.to_string());
        }
    };
    let p = MapParams::default();
    expect("logistic(0.5)", maps::logistic_step(0.5, 4.0).unwrap() == 1.0);
    expect("logistic(0)", maps::logistic_step(0.0, 4.0).unwrap() == 0.0);
    expect("logistic(0.2)", close(maps::logistic_step(0.2, 4.0).unwrap(), 0.64, 1e-15));
    expect("tent(p)", maps::skew_tent_step(0.499, 0.499).unwrap() == 1.0);
    expect("tent(0)", maps::skew_tent_step(0.0, 0.499).unwrap() == 0.0);
    expect("tent(0.75, 0.5)", maps::skew_tent_step(0.75, 0.5).unwrap() == 0.5);
    expect("sine(0.5)", maps::sine_step(0.5).unwrap() == 1.0);
    expect("sine(0)", maps::sine_step(0.0).unwrap() == 0.0);
    expect("sine(1)", close(maps::sine_step(1.0).unwrap(), 0.0, 1e-12));
    expect("domain", maps::logistic_step(1.0 + 1e-9, 4.0).is_err() && maps::sine_step(-1e-6).is_err());
    expect("clamp", maps::logistic_step(1.0 + 1e-13, 4.0).is_ok());
    expect("d logistic", maps::map_derivative(MapKind::Logistic, 0.5, &p).unwrap() == 0.0);
    expect("d sine", maps::map_derivative(MapKind::Sine, 0.0, &p).unwrap() == std::f64::consts::PI);
    let half = MapParams::new(4.0, 0.5).unwrap();
    expect("d tent", maps::map_derivative(MapKind::SkewTent, 0.25, &half).unwrap() == 2.0);
    expect("d tent kink", maps::map_derivative(MapKind::SkewTent, 0.499, &p).unwrap() == 1.0 / 0.499);
    expect("d none", maps::map_derivative(MapKind::None, 0.3, &p).unwrap() == 1.0);
    expect("iterate logistic", {
        let o = maps::iterate(MapKind::Logistic, 0.2, 1, &p).unwrap();
        o.len() == 2 && o[0] == 0.2 && close(o[1], 0.64, 1e-15)
    });
    expect("iterate sine", {
        let o = maps::iterate(MapKind::Sine, 0.5, 2, &p).unwrap();
        close(o[1], 1.0, 1e-12) && close(o[2], 0.0, 1e-12)
    });
    expect("iterate tent", maps::iterate(MapKind::SkewTent, 0.0, 5, &p).unwrap() == vec![0.0; 6]);
    expect("iterate n=0", maps::iterate(MapKind::Sine, 0.3, 0, &p).unwrap() == vec![0.3]);
    expect("bad params", MapParams::new(4.1, 0.5).is_err() && MapParams::new(4.0, 1.0).is_err());

    // boundedness over 1e5 uniform samples per map
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for kind in MapKind::ALL {
        let ok = (0..100_000).all(|_| {
            let y = maps::apply(kind, rng.gen::<f64>(), &p).unwrap();
            (0.0..=1.0).contains(&y)
        });
        expect(&format!("bounded {kind}"), ok);
    }
    // derivative vs central differences
    for kind in [MapKind::Logistic, MapKind::SkewTent, MapKind::Sine] {
        let mut worst: f64 = 0.0;
        let mut n = 0;
        while n < 100 {
            let x: f64 = rng.gen_range(0.01..0.99);
            if kind == MapKind::SkewTent && (x - p.p()).abs() < 1e-3 {
                continue;
            }
            let h = 1e-6;
            let fd = (maps::apply(kind, x + h, &p).unwrap() - maps::apply(kind, x - h, &p).unwrap()) / (2.0 * h);
            let d = maps::map_derivative(kind, x, &p).unwrap();
            worst = worst.max((d - fd).abs() / d.abs().max(1e-12));
            n += 1;
        }
        expect(&format!("derivative {kind} ({worst:.1e})"), worst < 1e-5);
    }
    // sensitivity
    let a = maps::iterate(MapKind::Logistic, maps::DEFAULT_X0, 60, &p).unwrap();
    let b = maps::iterate(MapKind::Logistic, maps::DEFAULT_X0 + 1e-8, 60, &p).unwrap();
    expect("sensitivity", a.iter().zip(&b).any(|(x, y)| (x - y).abs() > 0.1));

    // Lyapunov against ln 2, the ergodic value for both fully chaotic maps
    let ln2 = std::f64::consts::LN_2;
    let l_log = maps::estimate_lyapunov(MapKind::Logistic, maps::DEFAULT_X0, 100_000, &p).unwrap();
    let l_tent = maps::estimate_lyapunov(MapKind::SkewTent, maps::DEFAULT_X0, 100_000, &half).unwrap();
    let l_none = maps::estimate_lyapunov(MapKind::None, 0.4, 10_000, &p).unwrap();
    expect("lyapunov logistic", close(l_log, ln2, 0.02));
    expect("lyapunov tent", close(l_tent, ln2, 0.02));
    expect("lyapunov none", l_none == 0.0);

    let detail = if failures.is_empty() {
        format!("all examples and invariants hold; lyapunov logistic {l_log:.4}, tent(p=0.5) {l_tent:.4} vs ln 2 = {ln2:.4}")
    } else {
        format!("failed: {}", failures.join(", "))
    };
    (failures.is_empty(), detail)
}

// ---------------------------------------------------------------- 2

fn random_batch(seed: u64) -> Tensor<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Tensor::new(vec![4, 1, 28, 28], (0..4 * 784).map(|_| rng.gen::<f64>()).collect()).unwrap()
}

/// A batch whose transform inputs keep every skew-tent stage at least
/// `margin` away from the kink.
fn kink_screened_batch(model: &Model<f64>, margin: f64) -> (Tensor<f64>, u64) {
    let cfg = model.spec().chaotic;
    for seed in 100.. {
        let batch = random_batch(seed);
        let features = model.features(&batch).unwrap();
        let (normalized, _) = transform::normalize_minmax(&features).unwrap();
        let (_, trace) = transform::chaotic_forward(&normalized, &cfg).unwrap();
        if trace.stages().iter().flatten().all(|x| (x - cfg.params.p()).abs() > margin) {
            return (batch, seed);
        }
    }
    unreachable!()
}

/// Zero-initialized biases put exact zeros in front of ReLUs wherever a
/// receptive field is all dead units, i.e. a kink at the evaluation point.
/// Small random biases move the check to a differentiable point.
fn jitter_biases(model: &mut Model<f64>, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let params = model.params_mut();
    let ids: Vec<_> = params.ids().filter(|&id| params.name(id).ends_with("bias")).collect();
    for id in ids {
        for v in params.get_mut(id).values_mut() {
            *v = rng.gen_range(-0.05..0.05);
        }
    }
}

fn gradient_integrity() -> (bool, String) {
    let labels = [0, 3, 5, 9];
    let opts = GradCheckOptions {
        h: 1e-6,
        tol: 1e-3,
        fraction: 0.001,
        min_per_param: 60,
        ..GradCheckOptions::default()
    };
    let mut ok = true;
    let mut parts = Vec::new();
    let cases = MapKind::ALL
        .iter()
        .map(|&k| (k, StatsGradient::Propagated))
        .chain([MapKind::Logistic, MapKind::SkewTent, MapKind::Sine].map(|k| (k, StatsGradient::Detached)));
    for (kind, mode) in cases {
        let spec = ArchitectureSpec::cnn2(ChaoticLayerConfig::new(kind).with_stats_gradient(mode));
        let mut model = Model::<f64>::build(spec, 11).unwrap();
        jitter_biases(&mut model, 12);
        let (batch, tag) = if kind == MapKind::SkewTent {
            let (b, seed) = kink_screened_batch(&model, 1e-4);
            (b, format!("screened batch {seed}"))
        } else {
            (random_batch(1), "random batch".to_string())
        };
        let reference = model.clone();
        // detached statistics are checked against a pass with min/max pinned
        let mut stats = FrozenStats::new();
        let report = grad_check(
            model.params_mut(),
            |p, g: &mut Graph<f64>| {
                let x = g.input(batch.clone());
                let logits = match mode {
                    StatsGradient::Propagated => reference.forward_with(p, g, x)?,
                    StatsGradient::Detached => reference.forward_frozen(p, g, x, &mut stats)?,
                };
                g.softmax_cross_entropy(logits, &labels)
            },
            &opts,
        )
        .unwrap();
        ok &= report.max_rel_error < 1e-3;
        let label = match (kind, mode) {
            (MapKind::None, _) => "SA".to_string(),
            (_, StatsGradient::Propagated) => kind.short_label().to_string(),
            (_, StatsGradient::Detached) => format!("{}/detached", kind.short_label()),
        };
        parts.push(format!("{label} {:.1e} over {} coords ({tag})", report.max_rel_error, report.checked));
    }
    (ok, format!("max relative error: {}", parts.join("; ")))
}

// ---------------------------------------------------------------- 3

/// Hand count: conv k*k*cin*cout + cout, dense din*dout + dout.
fn expected_parameters(variant: Variant) -> usize {
    let conv = |cin: usize, cout: usize| 9 * cin * cout + cout;
    let dense = |din: usize, dout: usize| din * dout + dout;
    match variant {
        Variant::Cnn2 => conv(1, 32) + conv(32, 64) + dense(64 * 7 * 7, 128) + dense(128, 10),
        Variant::Cnn3 => conv(1, 32) + conv(32, 64) + conv(64, 128) + dense(128 * 4 * 4, 128) + dense(128, 10),
        Variant::Cnn5 => {
            conv(3, 32) + conv(32, 32) + conv(32, 64) + conv(64, 64) + conv(64, 128)
                + dense(128 * 4 * 4, 256)
                + dense(256, 10)
        }
    }
}

fn parameter_neutrality() -> (bool, String) {
    let mut ok = true;
    let mut parts = Vec::new();
    for variant in Variant::ALL {
        let counts: Vec<usize> = MapKind::ALL
            .iter()
            .map(|&k| {
                let spec = ArchitectureSpec::for_variant(variant, ChaoticLayerConfig::new(k));
                Model::<f32>::build(spec, 0).unwrap().num_parameters()
            })
            .collect();
        let same = counts.iter().all(|&c| c == counts[0]);
        let hand = expected_parameters(variant);
        ok &= same && counts[0] == hand;
        parts.push(format!("{variant} {} (hand count {hand})", counts[0]));
    }
    (ok, format!("identical across SA/L/ST/SP: {}", parts.join(", ")))
}

// ---------------------------------------------------------------- 4

/// Independent macro F1: per class, count tp / fp / fn straight from the
/// label pairs.
fn brute_macro_f1(truth: &[usize], pred: &[usize]) -> f64 {
    let mut total = 0.0;
    for c in 0..10 {
        let (mut tp, mut fp, mut fn_) = (0.0, 0.0, 0.0);
        for (&t, &p) in truth.iter().zip(pred) {
            match (t == c, p == c) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
        let denom = 2.0 * tp + fp + fn_;
        total += if denom == 0.0 { 0.0 } else { 2.0 * tp / denom };
    }
    total / 10.0
}

fn metric_fidelity() -> (bool, String) {
    let triples = [(0.9087, 0.8619, 5.43), (0.7880, 0.7210, 9.29), (0.4850, 0.4513, 7.47)];
    let mut ok = true;
    let mut gains = Vec::new();
    for (chaos, sa, want) in triples {
        let g = gain_percent(chaos, sa).unwrap();
        ok &= close(g, want, 0.01);
        gains.push(format!("{g:.4}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut mismatches = 0;
    for _ in 0..500 {
        let n = rng.gen_range(1..60);
        let classes = rng.gen_range(1..=10);
        let truth: Vec<usize> = (0..n).map(|_| rng.gen_range(0..classes)).collect();
        let pred: Vec<usize> = (0..n).map(|_| rng.gen_range(0..10)).collect();
        if macro_f1(&truth, &pred).unwrap().macro_f1 != brute_macro_f1(&truth, &pred) {
            mismatches += 1;
        }
    }
    ok &= mismatches == 0;
    (
        ok,
        format!("gains [{}] vs [5.43, 9.29, 7.47]; {mismatches} of 500 oracle cases differ", gains.join(", ")),
    )
}

// ---------------------------------------------------------------- 5, 6, 8

struct Trend {
    sa: f64,
    maps: [f64; 3],
}

fn mean_by_map(records: &[RunRecord], kind: MapKind) -> f64 {
    let v: Vec<f64> = records.iter().filter(|r| r.map == kind).map(|r| r.macro_f1()).collect();
    v.iter().sum::<f64>() / v.len() as f64
}

fn run_trend(store: &DataStore, dataset: DatasetId) -> Result<(Trend, Vec<RunRecord>), String> {
    let mut jobs = Vec::new();
    for kind in MAP_COLUMNS {
        let mut c = ExperimentConfig::default().with_map(kind);
        c.dataset = dataset;
        for &seed in &c.seeds {
            jobs.push((c.clone(), seed));
        }
    }
    let records: Vec<RunRecord> = run_suite(&jobs, 1, store)
        .into_iter()
        .collect::<chaosnet::Result<_>>()
        .map_err(|e| e.to_string())?;
    let trend = Trend {
        sa: mean_by_map(&records, MapKind::None),
        maps: [
            mean_by_map(&records, MapKind::Logistic),
            mean_by_map(&records, MapKind::SkewTent),
            mean_by_map(&records, MapKind::Sine),
        ],
    };
    Ok((trend, records))
}

fn describe(t: &Trend) -> String {
    format!(
        "SA {:.4}, L {:.4}, ST {:.4}, SP {:.4}",
        t.sa, t.maps[0], t.maps[1], t.maps[2]
    )
}

fn best_margin_points(t: &Trend) -> f64 {
    t.maps.iter().map(|m| 100.0 * (m - t.sa)).fold(f64::MIN, f64::max)
}

// ---------------------------------------------------------------- 9

fn idx_fixture(n: usize, rows: usize, cols: usize, seed: u64) -> (Vec<u8>, Vec<u8>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut images = Vec::new();
    images.extend_from_slice(&2051u32.to_be_bytes());
    for d in [n, rows, cols] {
        images.extend_from_slice(&(d as u32).to_be_bytes());
    }
    images.extend((0..n * rows * cols).map(|_| rng.gen::<u8>()));
    let mut labels = Vec::new();
    labels.extend_from_slice(&2049u32.to_be_bytes());
    labels.extend_from_slice(&(n as u32).to_be_bytes());
    labels.extend((0..n).map(|i| (i % 10) as u8));
    (images, labels)
}

fn format_robustness() -> (bool, String) {
    let mut failures = Vec::new();
    let mut expect = |label: &str, ok: bool| {
        if !ok {
            failures.push(label.to_string());
        }
    };
    let (images, labels) = idx_fixture(12, 28, 28, 9);
    let ds = data::parse_idx(&images, &labels).unwrap();
    let (img2, lab2) = data::encode_idx(&ds).unwrap();
    expect("idx round trip", img2 == images && lab2 == labels);

    // two hand-built images: all black, all white
    let (mut img, mut lab) = idx_fixture(2, 2, 2, 0);
    img[16..20].fill(0);
    img[20..24].fill(255);
    lab[8] = 3;
    let tiny = data::parse_idx(&img, &lab).unwrap();
    let pix = tiny.images::<f64>().unwrap();
    expect("idx pixel values", pix.values()[..4] == [0.0; 4] && pix.values()[4..] == [1.0; 4]);

    let mut record = vec![7u8];
    record.extend(std::iter::repeat_n(255u8, 1024));
    record.extend(std::iter::repeat_n(0u8, 2048));
    let mut cifar = record.clone();
    cifar.extend((0..3073).map(|i| if i == 0 { 2 } else { (i * 7 % 256) as u8 }));
    let cds = data::parse_cifar10(&[&cifar]).unwrap();
    expect("cifar round trip", data::encode_cifar10(&cds).unwrap() == cifar);
    let red = cds.batch::<f64>(&[0]).unwrap();
    expect(
        "cifar red record",
        cds.labels()[0] == 7
            && red.values()[..1024].iter().all(|&v| v == 1.0)
            && red.values()[1024..].iter().all(|&v| v == 0.0),
    );

    let mut bad_label_magic = labels.clone();
    bad_label_magic[3] ^= 0xff;
    expect(
        "label magic",
        matches!(
            data::parse_idx(&images, &bad_label_magic),
            Err(Error::Parse(ParseError::BadMagic { file: "label", offset: 0, .. }))
        ),
    );
    let mut bad_image_magic = images.clone();
    bad_image_magic[2] = 9;
    expect(
        "image magic",
        matches!(
            data::parse_idx(&bad_image_magic, &labels),
            Err(Error::Parse(ParseError::BadMagic { file: "image", .. }))
        ),
    );
    expect(
        "idx truncated",
        matches!(
            data::parse_idx(&images[..images.len() - 5], &labels),
            Err(Error::Parse(ParseError::Truncated { .. }))
        ),
    );
    let (_, other_labels) = idx_fixture(11, 28, 28, 9);
    expect(
        "idx count mismatch",
        matches!(
            data::parse_idx(&images, &other_labels),
            Err(Error::Parse(ParseError::CountMismatch { images: 12, labels: 11 }))
        ),
    );
    expect(
        "cifar truncated",
        matches!(
            data::parse_cifar10(&[&cifar[..cifar.len() - 1]]),
            Err(Error::Parse(ParseError::SizeNotMultiple { record: 3073, .. }))
        ),
    );
    let mut bad = record.clone();
    bad[0] = 10;
    expect(
        "cifar label",
        matches!(
            data::parse_cifar10(&[&bad]),
            Err(Error::Parse(ParseError::LabelOutOfRange { label: 10, .. }))
        ),
    );
    let ok = failures.is_empty();
    let detail = if ok {
        "IDX and CIFAR-10 fixtures re-encode byte-exact; 6 corruptions raise their designated errors".to_string()
    } else {
        format!("failed: {}", failures.join(", "))
    };
    (ok, detail)
}

// ---------------------------------------------------------------- 10

/// Synthetic grayscale set: each class lights a different 4x4 block, with
/// per-image noise.
fn synthetic(split: Split, per_class: usize, seed: u64) -> ImageDataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pixels = Vec::new();
    let mut labels = Vec::new();
    for i in 0..per_class * 10 {
        let c = i % 10;
        let (br, bc) = (4 + 6 * (c / 4), 2 + 6 * (c % 4));
        for r in 0..28 {
            for col in 0..28 {
                let on = (br..br + 4).contains(&r) && (bc..bc + 4).contains(&col);
                let base: u8 = if on { 200 } else { 0 };
                pixels.push(base.saturating_add(rng.gen_range(0..50)));
            }
        }
        labels.push(c);
    }
    ImageDataset::new("synthetic", split, (1, 28, 28), pixels, labels).unwrap()
}

fn write_synthetic_mnist(dir: &Path) {
    let sub = dir.join("mnist");
    std::fs::create_dir_all(&sub).unwrap();
    for (split, per_class, seed) in [(Split::Train, 30, 1), (Split::Test, 10, 2)] {
        let (img, lab) = data::encode_idx(&synthetic(split, per_class, seed)).unwrap();
        let files = DatasetId::Mnist.files(split);
        std::fs::write(sub.join(files[0]), img).unwrap();
        std::fs::write(sub.join(files[1]), lab).unwrap();
    }
}

fn pipeline_consistency() -> (bool, String) {
    let root = tempfile::tempdir().unwrap();
    write_synthetic_mnist(root.path());
    let mut base = ExperimentConfig::default();
    base.epochs = 2;
    base.arch.filters = Some(vec![4, 8]);
    base.arch.head = Some(Some(16));
    let mut opts = ReplicateOptions::new(base);
    opts.seeds = vec![1, 2];
    opts.sample_sizes = Some(vec![5, 10]);
    opts.variants = Some(vec![Variant::Cnn2]);
    let store = DataStore::new(root.path());
    let out = root.path().join("out");
    let rep = replicate_table(DatasetId::Mnist, &opts, &store, &out).unwrap();

    let mut worst: f64 = 0.0;
    for row in &rep.gains.rows {
        for c in 0..3 {
            let eq4 = 100.0 * (row.f1[c] - row.sa) / row.sa;
            worst = worst.max((row.gains[c] - eq4).abs());
        }
    }
    // gains also follow from the table's own SA column
    for row in &rep.table.rows {
        let sa = row.f1[0].unwrap();
        for c in 1..4 {
            let g = rep.gains.rows.iter().find(|g| g.variant == row.variant && g.samples_per_class == row.samples_per_class).unwrap();
            worst = worst.max((g.gains[c - 1] - 100.0 * (row.f1[c].unwrap() - sa) / sa).abs());
        }
    }
    let runs = read_runs_csv(&rep.results_csv).unwrap();
    let from_csv = ResultTable::from_runs(DatasetId::Mnist, &runs).unwrap();
    let means = ResultTable::read_means_csv(&rep.means_csv).unwrap();
    let rows_equal = runs.len() == rep.runs.len()
        && runs.iter().zip(&rep.runs).all(|(a, b)| a.macro_f1 == b.macro_f1() && a.seed == b.seed);
    let round_trip = from_csv == rep.table && means == rep.table && rows_equal;
    let ok = worst < 1e-9 && round_trip && rep.svg.exists();
    (
        ok,
        format!(
            "{} runs; max |gain - 100(F1-SA)/SA| = {worst:.1e}; results.csv and means.csv round-trip {}",
            rep.runs.len(),
            if round_trip { "exactly" } else { "with differences" }
        ),
    )
}

fn main() {
    // non-numeric arguments (libtest flags) are ignored
    let selected = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut gate = Gate { results: Vec::new(), selected };
    let dir = data_dir();
    println!("acceptance: data directory {}", dir.display());

    gate.check(1, "map correctness", Some(Duration::from_secs(5)), || Ok(map_correctness()));
    gate.check(2, "gradient integrity", Some(Duration::from_secs(120)), || Ok(gradient_integrity()));
    gate.check(3, "parameter neutrality", Some(Duration::from_secs(1)), || Ok(parameter_neutrality()));
    gate.check(4, "metric fidelity", None, || Ok(metric_fidelity()));

    let store = DataStore::new(&dir);
    let start = Instant::now();
    let mnist = if [5, 6, 8].iter().any(|&i| gate.wants(i)) {
        require(&dir, DatasetId::Mnist).and_then(|_| run_trend(&store, DatasetId::Mnist))
    } else {
        Err("not selected".into())
    };
    let mnist_time = start.elapsed();
    match &mnist {
        _ if !gate.wants(5) => {}
        Ok((t, _)) => {
            let ok = (0.80..=0.93).contains(&t.sa);
            let detail = format!("SA mean over seeds 1-3 = {:.4}, band [0.80, 0.93]", t.sa);
            let limit = Duration::from_secs(30 * 60);
            let outcome = if ok && mnist_time <= limit { Outcome::Pass } else { Outcome::Fail };
            gate.report(5, "baseline band (MNIST cnn2 k=40)", outcome, mnist_time, detail);
        }
        Err(e) => gate.report(5, "baseline band (MNIST cnn2 k=40)", Outcome::Skip, mnist_time, e.clone()),
    }

    let start = Instant::now();
    let fashion = if gate.wants(6) {
        require(&dir, DatasetId::Fashion).and_then(|_| run_trend(&store, DatasetId::Fashion))
    } else {
        Err("not selected".into())
    };
    let trend_time = mnist_time + start.elapsed();
    match (&mnist, &fashion) {
        _ if !gate.wants(6) => {}
        (Ok((m, _)), Ok((f, _))) => {
            let (dm, df) = (best_margin_points(m), best_margin_points(f));
            let ok = dm >= 0.5 && df >= 0.5 && trend_time <= Duration::from_secs(2 * 3600);
            let detail = format!(
                "best map over SA: MNIST +{dm:.2} pts ({}), Fashion +{df:.2} pts ({}); need >= 0.5",
                describe(m),
                describe(f)
            );
            gate.report(6, "trend reproduction", if ok { Outcome::Pass } else { Outcome::Fail }, trend_time, detail);
        }
        (Err(e), _) | (_, Err(e)) => gate.report(6, "trend reproduction", Outcome::Skip, trend_time, e.clone()),
    }

    gate.check(7, "CIFAR-10 cnn5 k=200 (extended, non-gating)", Some(Duration::from_secs(3 * 3600)), || {
        if std::env::var("CHAOSNET_EXTENDED").as_deref() != Ok("1") {
            return Err("set CHAOSNET_EXTENDED=1 to run (about 1.5 h on one core)".into());
        }
        require(&dir, DatasetId::Cifar10)?;
        let mut c = ExperimentConfig::default();
        c.dataset = DatasetId::Cifar10;
        c.variant = Variant::Cnn5;
        c.samples_per_class = 200;
        let mut jobs = Vec::new();
        for kind in MAP_COLUMNS {
            for &seed in &c.seeds {
                jobs.push((c.clone().with_map(kind), seed));
            }
        }
        let records: Vec<RunRecord> = run_suite(&jobs, 1, &store)
            .into_iter()
            .collect::<chaosnet::Result<_>>()
            .map_err(|e| e.to_string())?;
        let t = Trend {
            sa: mean_by_map(&records, MapKind::None),
            maps: [
                mean_by_map(&records, MapKind::Logistic),
                mean_by_map(&records, MapKind::SkewTent),
                mean_by_map(&records, MapKind::Sine),
            ],
        };
        let gain = t.maps.iter().map(|m| gain_percent(*m, t.sa).unwrap()).fold(f64::MIN, f64::max);
        let ok = (0.38..=0.52).contains(&t.sa) && gain >= 0.0;
        Ok((ok, format!("{}; best gain {gain:.2}%", describe(&t))))
    });

    gate.check(8, "determinism", None, || {
        let (_, records) = mnist.as_ref().map_err(|e| e.clone())?;
        let mut parts = Vec::new();
        let mut ok = true;
        for kind in [MapKind::None, MapKind::Logistic] {
            let first = records.iter().find(|r| r.map == kind && r.seed == 1).unwrap();
            let config = ExperimentConfig::default().with_map(kind);
            let again = train_with(&config, 1, &store).map_err(|e| e.to_string())?;
            let same = again.macro_f1().to_bits() == first.macro_f1().to_bits()
                && again.epoch_losses == first.epoch_losses;
            ok &= same;
            parts.push(format!("{} seed 1: {:.6} vs {:.6}", kind.short_label(), first.macro_f1(), again.macro_f1()));
        }
        Ok((ok, format!("repeated runs bit-identical: {}", parts.join(", "))))
    });

    gate.check(9, "format robustness", None, || Ok(format_robustness()));
    gate.check(10, "pipeline consistency", None, || Ok(pipeline_consistency()));

    let failed: Vec<usize> = gate.results.iter().filter(|(_, o)| *o == Outcome::Fail).map(|(i, _)| *i).collect();
    let skipped = gate.results.iter().filter(|(_, o)| *o == Outcome::Skip).count();
    println!(
        "acceptance: {} passed, {} failed, {skipped} skipped",
        gate.results.len() - failed.len() - skipped,
        failed.len()
    );
    if !failed.is_empty() {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
