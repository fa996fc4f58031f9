//! The chaotic feature transform: per-sample min-max normalization followed
//! by an element-wise chaotic map, placed in front of the classification
//! head.
//!
//! The input gradient is the upstream gradient times the product of the map
//! slopes over all iterations times `1 / (max - min)`. By default the row's
//! arg-min and arg-max coordinates also receive the gradient of the min and
//! max themselves; [`StatsGradient::Detached`] drops those two terms. Rows
//! with `max - min < 1e-12` normalize to all zeros, which every map fixes,
//! and pass no gradient.

use crate::autodiff::{Graph, Real, Tensor, UnaryBackward, Var};
use crate::error::{Error, Result};
use crate::maps::{self, MapKind, MapParams};

/// Row ranges below this are treated as constant rows.
pub const DEGENERATE_RANGE: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Normalization {
    #[default]
    PerSampleMinMax,
}

/// How the backward pass treats the per-row min and max.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum StatsGradient {
    /// Min and max are constants; only the `1 / (max - min)` scale applies.
    Detached,
    /// Min and max are functions of the features, so the arg-min and
    /// arg-max coordinates also receive the gradient of the rescaling.
    #[default]
    Propagated,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChaoticLayerConfig {
    pub kind: MapKind,
    pub params: MapParams,
    pub iterations: usize,
    pub normalization: Normalization,
    pub stats_gradient: StatsGradient,
}

impl Default for ChaoticLayerConfig {
    fn default() -> Self {
        ChaoticLayerConfig::new(MapKind::None)
    }
}

impl ChaoticLayerConfig {
    /// Single application of `kind` with the default map parameters.
    pub fn new(kind: MapKind) -> Self {
        ChaoticLayerConfig {
            kind,
            params: MapParams::default(),
            iterations: 1,
            normalization: Normalization::PerSampleMinMax,
            stats_gradient: StatsGradient::Propagated,
        }
    }

    pub fn identity() -> Self {
        ChaoticLayerConfig::new(MapKind::None)
    }

    pub fn with_params(mut self, params: MapParams) -> Self {
        self.params = params;
        self
    }

    pub fn with_iterations(mut self, iterations: usize) -> Self {
        self.iterations = iterations;
        self
    }

    pub fn with_stats_gradient(mut self, mode: StatsGradient) -> Self {
        self.stats_gradient = mode;
        self
    }

    pub fn is_identity(&self) -> bool {
        self.kind == MapKind::None
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::InvalidParameter(
                "chaotic layer needs at least one iteration".into(),
            ));
        }
        MapParams::new(self.params.r(), self.params.p())?;
        Ok(())
    }
}

/// The transform adds nothing trainable, whatever the configuration.
pub fn trainable_parameter_count(_config: &ChaoticLayerConfig) -> usize {
    0
}

/// Per-row minima and maxima recorded by [`normalize_minmax`].
#[derive(Debug, Clone, PartialEq)]
pub struct MinMaxRecord {
    pub mins: Vec<f64>,
    pub maxs: Vec<f64>,
    /// Column of the first minimum and first maximum of each row.
    pub argmins: Vec<usize>,
    pub argmaxs: Vec<usize>,
}

impl MinMaxRecord {
    /// `1 / (max - min)` for a row, or zero for a degenerate row.
    pub fn scale(&self, row: usize) -> f64 {
        let range = self.maxs[row] - self.mins[row];
        if range < DEGENERATE_RANGE {
            0.0
        } else {
            1.0 / range
        }
    }
}

fn rows_of<T: Real>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape() {
        [n, d] => Ok((*n, *d)),
        other => Err(Error::Shape(format!(
            "feature transform expects [N, D] features, got {other:?}"
        ))),
    }
}

/// Rescales every row into `[0, 1]`.
pub fn normalize_minmax<T: Real>(features: &Tensor<T>) -> Result<(Tensor<T>, MinMaxRecord)> {
    let (n, d) = rows_of(features)?;
    let mut out = Vec::with_capacity(n * d);
    let mut record = MinMaxRecord {
        mins: Vec::with_capacity(n),
        maxs: Vec::with_capacity(n),
        argmins: Vec::with_capacity(n),
        argmaxs: Vec::with_capacity(n),
    };
    for row in features.values().chunks_exact(d) {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut arg_lo, mut arg_hi) = (0, 0);
        for (j, v) in row.iter().enumerate() {
            let v = v.to_f64_lossy();
            if !v.is_finite() {
                return Err(Error::Numerical(
                    "non-finite value in feature vector".into(),
                ));
            }
            if v < lo {
                lo = v;
                arg_lo = j;
            }
            if v > hi {
                hi = v;
                arg_hi = j;
            }
        }
        record.mins.push(lo);
        record.maxs.push(hi);
        record.argmins.push(arg_lo);
        record.argmaxs.push(arg_hi);
        let range = hi - lo;
        if range < DEGENERATE_RANGE {
            out.extend(std::iter::repeat_n(T::zero(), d));
        } else {
            out.extend(
                row.iter()
                    .map(|v| T::from_f64_lossy(((v.to_f64_lossy() - lo) / range).clamp(0.0, 1.0))),
            );
        }
    }
    Ok((Tensor::new(vec![n, d], out)?, record))
}

/// Inputs to every map iteration, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MapTrace {
    kind: MapKind,
    params: MapParams,
    stats_gradient: StatsGradient,
    dim: usize,
    /// `iterations` buffers of `N * D` pre-map values.
    stages: Vec<Vec<f64>>,
}

impl MapTrace {
    /// Pre-map values of every iteration, each `N * D` long.
    pub fn stages(&self) -> &[Vec<f64>] {
        &self.stages
    }
}

/// Applies the configured map element-wise `iterations` times.
pub fn chaotic_forward<T: Real>(
    normalized: &Tensor<T>,
    config: &ChaoticLayerConfig,
) -> Result<(Tensor<T>, MapTrace)> {
    config.validate()?;
    let (_, d) = rows_of(normalized)?;
    if config.is_identity() {
        let trace = MapTrace {
            kind: MapKind::None,
            params: config.params,
            stats_gradient: config.stats_gradient,
            dim: d,
            stages: Vec::new(),
        };
        return Ok((normalized.clone(), trace));
    }
    let mut current: Vec<f64> = normalized
        .values()
        .iter()
        .map(|v| maps::check_unit(v.to_f64_lossy()))
        .collect::<Result<_>>()?;
    let mut stages = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let next = current
            .iter()
            .map(|&x| maps::step_unchecked(config.kind, x, &config.params))
            .collect();
        stages.push(std::mem::replace(&mut current, next));
    }
    let out = current.into_iter().map(T::from_f64_lossy).collect();
    let trace = MapTrace {
        kind: config.kind,
        params: config.params,
        stats_gradient: config.stats_gradient,
        dim: d,
        stages,
    };
    Ok((Tensor::new(normalized.shape().to_vec(), out)?, trace))
}

/// Gradient of the normalize-then-map composition with respect to the raw
/// features, given the upstream gradient on the mapped output.
pub fn chaotic_backward<T: Real>(upstream: &[T], trace: &MapTrace, record: &MinMaxRecord) -> Vec<T> {
    let d = trace.dim;
    let mut out = Vec::with_capacity(upstream.len());
    for (r, row) in upstream.chunks_exact(d).enumerate() {
        let scale = record.scale(r);
        // gradient with respect to the normalized value
        let gy: Vec<f64> = row
            .iter()
            .enumerate()
            .map(|(j, &g)| {
                let i = r * d + j;
                let mut slope = 1.0;
                for stage in &trace.stages {
                    slope *= maps::derivative_unchecked(trace.kind, stage[i], &trace.params);
                }
                g.to_f64_lossy() * slope
            })
            .collect();
        let mut gx: Vec<f64> = gy.iter().map(|g| g * scale).collect();
        if trace.stats_gradient == StatsGradient::Propagated && scale > 0.0 {
            if let Some(normalized) = trace.stages.first() {
                let y = &normalized[r * d..(r + 1) * d];
                let to_min: f64 = gy.iter().zip(y).map(|(g, y)| g * (y - 1.0)).sum();
                let to_max: f64 = gy.iter().zip(y).map(|(g, y)| -g * y).sum();
                gx[record.argmins[r]] += to_min * scale;
                gx[record.argmaxs[r]] += to_max * scale;
            }
        }
        out.extend(gx.into_iter().map(T::from_f64_lossy));
    }
    out
}

struct TransformBackward {
    trace: MapTrace,
    record: MinMaxRecord,
}

impl<T: Real> UnaryBackward<T> for TransformBackward {
    fn name(&self) -> &'static str {
        "chaotic_transform"
    }

    fn backward(&self, upstream: &[T]) -> Vec<T> {
        chaotic_backward(upstream, &self.trace, &self.record)
    }
}

/// Normalization statistics pinned across forward passes.
///
/// In [`StatsGradient::Detached`] mode the backward pass treats min and max
/// as constants, so a finite-difference oracle has to do the same: the first pass through [`apply_frozen`]
/// records the statistics and later passes reuse them. With pinned
/// statistics a perturbed feature may land a hair outside `[0, 1]`; the map
/// formulas are then evaluated on their natural extension instead of being
/// clamped, so the oracle sees the same smooth function the backward pass
/// differentiates.
#[derive(Debug, Clone, Default)]
pub struct FrozenStats {
    record: Option<MinMaxRecord>,
}

impl FrozenStats {
    pub fn new() -> Self {
        FrozenStats::default()
    }

    pub fn record(&self) -> Option<&MinMaxRecord> {
        self.record.as_ref()
    }
}

/// Records the full transform on `graph`. The identity configuration adds
/// nothing to the graph and returns `features` itself.
pub fn apply<T: Real>(
    graph: &mut Graph<T>,
    features: Var,
    config: &ChaoticLayerConfig,
) -> Result<Var> {
    config.validate()?;
    if config.is_identity() {
        return Ok(features);
    }
    let (normalized, record) = normalize_minmax(graph.value(features))?;
    let (mapped, trace) = chaotic_forward(&normalized, config)?;
    Ok(graph.custom(features, mapped, Box::new(TransformBackward { trace, record })))
}

/// Like [`apply`], but with normalization statistics pinned by `stats`.
pub fn apply_frozen<T: Real>(
    graph: &mut Graph<T>,
    features: Var,
    config: &ChaoticLayerConfig,
    stats: &mut FrozenStats,
) -> Result<Var> {
    config.validate()?;
    if config.is_identity() {
        return Ok(features);
    }
    let Some(record) = stats.record.clone() else {
        let (normalized, record) = normalize_minmax(graph.value(features))?;
        stats.record = Some(record.clone());
        let (mapped, trace) = chaotic_forward(&normalized, config)?;
        return Ok(graph.custom(features, mapped, Box::new(TransformBackward { trace, record })));
    };
    let value = graph.value(features);
    let (n, d) = rows_of(value)?;
    if record.mins.len() != n {
        return Err(Error::Shape(format!(
            "frozen statistics cover {} rows, features have {n}",
            record.mins.len()
        )));
    }
    let mut current: Vec<f64> = value
        .values()
        .iter()
        .enumerate()
        .map(|(i, v)| (v.to_f64_lossy() - record.mins[i / d]) * record.scale(i / d))
        .collect();
    let mut stages = Vec::with_capacity(config.iterations);
    for _ in 0..config.iterations {
        let next = current
            .iter()
            .map(|&x| maps::step_extended(config.kind, x, &config.params))
            .collect();
        stages.push(std::mem::replace(&mut current, next));
    }
    let mapped = Tensor::new(vec![n, d], current.into_iter().map(T::from_f64_lossy).collect())?;
    let trace = MapTrace {
        kind: config.kind,
        params: config.params,
        stats_gradient: config.stats_gradient,
        dim: d,
        stages,
    };
    Ok(graph.custom(features, mapped, Box::new(TransformBackward { trace, record })))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{grad_check, GradCheckOptions, ParameterSet};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn t(shape: Vec<usize>, v: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn normalization_examples() {
        let (out, rec) = normalize_minmax(&t(vec![1, 3], vec![0., 2., 4.])).unwrap();
        assert_eq!(out.values(), &[0.0, 0.5, 1.0]);
        assert_eq!((rec.mins[0], rec.maxs[0]), (0.0, 4.0));

        let (out, rec) = normalize_minmax(&t(vec![1, 3], vec![3.3; 3])).unwrap();
        assert_eq!(out.values(), &[0.0; 3]);
        assert_eq!(rec.scale(0), 0.0);
    }

    #[test]
    fn random_rows_span_unit_interval() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let v: Vec<f32> = (0..64).map(|_| rng.gen_range(-5.0..5.0)).collect();
        let (out, _) = normalize_minmax(&Tensor::new(vec![4, 16], v).unwrap()).unwrap();
        for row in out.values().chunks(16) {
            let lo = row.iter().copied().fold(f32::INFINITY, f32::min);
            let hi = row.iter().copied().fold(f32::NEG_INFINITY, f32::max);
            assert_eq!((lo, hi), (0.0, 1.0));
        }
    }

    #[test]
    fn forward_examples() {
        let x = t(vec![1, 3], vec![0.1, 0.7, 0.3]);
        let (y, _) = chaotic_forward(&x, &ChaoticLayerConfig::identity()).unwrap();
        assert_eq!(y, x);

        let x = t(vec![1, 3], vec![0.0, 0.5, 1.0]);
        let (y, _) = chaotic_forward(&x, &ChaoticLayerConfig::new(MapKind::Logistic)).unwrap();
        assert_eq!(y.values(), &[0.0, 1.0, 0.0]);

        let x = t(vec![1, 1], vec![0.5]);
        let cfg = ChaoticLayerConfig::new(MapKind::Sine).with_iterations(2);
        let (y, _) = chaotic_forward(&x, &cfg).unwrap();
        assert!(y.values()[0].abs() < 1e-6);
    }

    #[test]
    fn forward_rejects_unnormalized_input() {
        let x = t(vec![1, 2], vec![0.5, 1.5]);
        let err = chaotic_forward(&x, &ChaoticLayerConfig::new(MapKind::Sine)).unwrap_err();
        assert!(matches!(err, Error::Domain(_)));
        // rounding residue is clamped
        let x = t(vec![1, 2], vec![-1e-13, 1.0 + 1e-13]);
        assert!(chaotic_forward(&x, &ChaoticLayerConfig::new(MapKind::Sine)).is_ok());
        assert!(chaotic_forward(&x, &ChaoticLayerConfig::new(MapKind::Sine).with_iterations(0)).is_err());
    }

    #[test]
    fn shape_and_range_are_preserved() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let v: Vec<f64> = (0..5 * 7).map(|_| rng.gen()).collect();
        let x = t(vec![5, 7], v);
        for kind in MapKind::ALL {
            for iterations in 1..4 {
                let cfg = ChaoticLayerConfig::new(kind).with_iterations(iterations);
                let (y, _) = chaotic_forward(&x, &cfg).unwrap();
                assert_eq!(y.shape(), x.shape());
                assert!(y.values().iter().all(|v| (0.0..=1.0).contains(v)));
            }
        }
    }

    #[test]
    fn backward_examples() {
        let rec = MinMaxRecord {
            mins: vec![0.0],
            maxs: vec![1.0],
            argmins: vec![0],
            argmaxs: vec![0],
        };
        let x = t(vec![1, 2], vec![0.5, 0.25]);
        let (_, trace) = chaotic_forward(&x, &ChaoticLayerConfig::identity()).unwrap();
        assert_eq!(chaotic_backward(&[0.3, -0.7], &trace, &rec), vec![0.3, -0.7]);

        let detached = ChaoticLayerConfig::new(MapKind::Logistic).with_stats_gradient(StatsGradient::Detached);
        let (_, trace) = chaotic_forward(&x, &detached).unwrap();
        let g = chaotic_backward(&[1.0, 1.0], &trace, &rec);
        assert_eq!(g[0], 0.0);
        assert_eq!(g[1], 2.0); // 4 * (1 - 0.5)

        // u = [0, 1, 0.5]; slopes 4, -4, 0; scale 1/2
        let (u, rec) = normalize_minmax(&t(vec![1, 3], vec![0.0, 2.0, 1.0])).unwrap();
        let (_, trace) = chaotic_forward(&u, &detached).unwrap();
        assert_eq!(chaotic_backward(&[1.0; 3], &trace, &rec), vec![2.0, -2.0, 0.0]);
        // min and max shifts cancel: -2 onto index 0, +2 onto index 1
        let (_, trace) = chaotic_forward(&u, &ChaoticLayerConfig::new(MapKind::Logistic)).unwrap();
        assert_eq!(chaotic_backward(&[1.0; 3], &trace, &rec), vec![0.0, 0.0, 0.0]);
        let g = chaotic_backward(&[1.0, 0.0, 0.0], &trace, &rec);
        // only u0 = 0 carries weight: argmin term 4 * (0 - 1) / 2, argmax term 0
        assert_eq!(g, vec![2.0 - 2.0, 0.0, 0.0]);

        let degenerate = MinMaxRecord {
            mins: vec![2.0],
            maxs: vec![2.0],
            argmins: vec![0],
            argmaxs: vec![0],
        };
        let (_, trace) = chaotic_forward(&t(vec![1, 2], vec![0.0, 0.0]), &ChaoticLayerConfig::new(MapKind::Sine)).unwrap();
        assert_eq!(chaotic_backward(&[1.0, 1.0], &trace, &degenerate), vec![0.0, 0.0]);
    }

    #[test]
    fn no_trainable_parameters() {
        for kind in MapKind::ALL {
            assert_eq!(trainable_parameter_count(&ChaoticLayerConfig::new(kind)), 0);
        }
    }

    /// features -> transform -> dense head -> cross-entropy, checked against
    /// central differences. Detached mode pins the normalization statistics;
    /// propagated mode differentiates the live function.
    fn composite_check(kind: MapKind, iterations: usize, mode: StatsGradient, seed: u64) -> f64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (n, d, k) = (4, 12, 5);
        let cfg = ChaoticLayerConfig::new(kind)
            .with_iterations(iterations)
            .with_stats_gradient(mode);
        let features: Vec<f64> = loop {
            let v: Vec<f64> = (0..n * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let (norm, _) = normalize_minmax(&t(vec![n, d], v.clone())).unwrap();
            // keep every coordinate away from the tent kink after each stage
            let ok = kind != MapKind::SkewTent || {
                let (_, trace) = chaotic_forward(&norm, &cfg).unwrap();
                trace
                    .stages
                    .iter()
                    .flatten()
                    .all(|x| (x - cfg.params.p()).abs() > 1e-3)
            };
            if ok {
                break v;
            }
        };
        let mut params = ParameterSet::<f64>::new();
        let f_id = params.add("features", t(vec![n, d], features));
        let w: Vec<f64> = (0..d * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w_id = params.add("w", t(vec![d, k], w));
        let b_id = params.add_zeros("b", vec![k]);
        let mut stats = FrozenStats::new();
        let report = grad_check(
            &mut params,
            |p, g| {
                let f = g.param(p, f_id);
                let z = match mode {
                    StatsGradient::Detached => apply_frozen(g, f, &cfg, &mut stats)?,
                    StatsGradient::Propagated => apply(g, f, &cfg)?,
                };
                let w = g.param(p, w_id);
                let b = g.param(p, b_id);
                let logits = g.dense(z, w, b)?;
                g.softmax_cross_entropy(logits, &[0, 1, 2, 3])
            },
            &GradCheckOptions {
                h: 1e-6,
                tol: 1e-3,
                fraction: 1.0,
                ..GradCheckOptions::default()
            },
        )
        .unwrap();
        assert_eq!(report.checked, n * d + d * k + k);
        report.max_rel_error
    }

    #[test]
    fn composite_gradients_match_finite_differences() {
        for kind in [MapKind::Logistic, MapKind::Sine, MapKind::SkewTent] {
            for iterations in [1, 2] {
                for mode in [StatsGradient::Detached, StatsGradient::Propagated] {
                    let worst = composite_check(kind, iterations, mode, 3 + iterations as u64);
                    assert!(worst < 1e-3, "{kind} x{iterations} {mode:?}: {worst}");
                }
            }
        }
    }

    #[test]
    fn frozen_and_live_passes_agree_at_the_recording_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let v: Vec<f64> = (0..3 * 8).map(|_| rng.gen_range(-1.0..3.0)).collect();
        let cfg = ChaoticLayerConfig::new(MapKind::Logistic).with_iterations(2);
        let mut stats = FrozenStats::new();
        let mut outputs = Vec::new();
        for frozen in [false, true, true] {
            let mut g = Graph::<f64>::new();
            let x = g.input(t(vec![3, 8], v.clone()));
            let y = if frozen {
                apply_frozen(&mut g, x, &cfg, &mut stats).unwrap()
            } else {
                apply(&mut g, x, &cfg).unwrap()
            };
            outputs.push(g.value(y).values().to_vec());
        }
        assert!(stats.record().is_some());
        for out in &outputs[1..] {
            for (a, b) in out.iter().zip(&outputs[0]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn identity_adds_no_node() {
        let mut g = Graph::<f32>::new();
        let x = g.input(Tensor::zeros(vec![2, 3]));
        let y = apply(&mut g, x, &ChaoticLayerConfig::identity()).unwrap();
        assert_eq!(x, y);
        assert_eq!(g.len(), 1);
        let z = apply(&mut g, x, &ChaoticLayerConfig::new(MapKind::Sine)).unwrap();
        assert_ne!(x, z);
        assert_eq!(g.op_names().last(), Some(&"chaotic_transform"));
    }
}
