//! The three CNN variants: two and three conv blocks for 1x28x28 grayscale
//! input, five conv layers for 3x32x32 RGB input. Each puts the chaotic
//! transform between the hidden dense layer and the output layer.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::autodiff::{Graph, ParamId, ParameterSet, Real, Tensor, Var};
use crate::error::{Error, Result};
use crate::transform::{self, ChaoticLayerConfig, FrozenStats};

/// Rows per forward pass in [`Model::forward_logits`] and [`Model::predict`].
pub const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Variant {
    Cnn2,
    Cnn3,
    Cnn5,
}

impl Variant {
    pub const ALL: [Variant; 3] = [Variant::Cnn2, Variant::Cnn3, Variant::Cnn5];

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Cnn2 => "cnn2",
            Variant::Cnn3 => "cnn3",
            Variant::Cnn5 => "cnn5",
        }
    }

    /// Row label used in result tables.
    pub fn table_label(self) -> &'static str {
        match self {
            Variant::Cnn2 => "2 Conv",
            Variant::Cnn3 => "3 Conv",
            Variant::Cnn5 => "5 Conv",
        }
    }

    pub fn is_grayscale(self) -> bool {
        self != Variant::Cnn5
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "cnn2" | "2" => Ok(Variant::Cnn2),
            "cnn3" | "3" => Ok(Variant::Cnn3),
            "cnn5" | "5" => Ok(Variant::Cnn5),
            other => Err(Error::Config(format!(
                "unknown variant `{other}` (expected cnn2, cnn3 or cnn5)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConvBlock {
    pub filters: usize,
    pub kernel: usize,
    pub padding: usize,
    /// 2x2 max pool after the relu.
    pub pool: bool,
}

impl ConvBlock {
    /// Odd `kernel` with "same" padding.
    pub fn same(filters: usize, kernel: usize, pool: bool) -> Self {
        ConvBlock {
            filters,
            kernel,
            padding: kernel / 2,
            pool,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ArchitectureSpec {
    pub conv_blocks: Vec<ConvBlock>,
    /// Width of the relu dense layer before the transform; `None` feeds the
    /// flattened conv features straight into the transform.
    pub head_hidden: Option<usize>,
    pub num_classes: usize,
    /// (channels, height, width)
    pub input_shape: (usize, usize, usize),
    pub chaotic: ChaoticLayerConfig,
}

impl ArchitectureSpec {
    pub fn cnn2(chaotic: ChaoticLayerConfig) -> Self {
        ArchitectureSpec {
            conv_blocks: vec![ConvBlock::same(32, 3, true), ConvBlock::same(64, 3, true)],
            head_hidden: Some(128),
            num_classes: 10,
            input_shape: (1, 28, 28),
            chaotic,
        }
    }

    pub fn cnn3(chaotic: ChaoticLayerConfig) -> Self {
        let mut spec = ArchitectureSpec::cnn2(chaotic);
        spec.conv_blocks.push(ConvBlock::same(128, 3, true));
        spec
    }

    pub fn cnn5(chaotic: ChaoticLayerConfig) -> Self {
        ArchitectureSpec {
            conv_blocks: vec![
                ConvBlock::same(32, 3, false),
                ConvBlock::same(32, 3, true),
                ConvBlock::same(64, 3, false),
                ConvBlock::same(64, 3, true),
                ConvBlock::same(128, 3, true),
            ],
            head_hidden: Some(256),
            num_classes: 10,
            input_shape: (3, 32, 32),
            chaotic,
        }
    }

    pub fn for_variant(variant: Variant, chaotic: ChaoticLayerConfig) -> Self {
        match variant {
            Variant::Cnn2 => ArchitectureSpec::cnn2(chaotic),
            Variant::Cnn3 => ArchitectureSpec::cnn3(chaotic),
            Variant::Cnn5 => ArchitectureSpec::cnn5(chaotic),
        }
    }

    /// Replaces the filter counts, one per conv block.
    pub fn with_filters(mut self, filters: &[usize]) -> Result<Self> {
        if filters.len() != self.conv_blocks.len() {
            return Err(Error::Config(format!(
                "{} filter counts given for {} conv blocks",
                filters.len(),
                self.conv_blocks.len()
            )));
        }
        for (block, &f) in self.conv_blocks.iter_mut().zip(filters) {
            block.filters = f;
        }
        Ok(self)
    }

    /// Sets every conv kernel to `kernel` x `kernel` with same padding.
    pub fn with_kernel(mut self, kernel: usize) -> Result<Self> {
        if kernel == 0 || kernel.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "kernel size must be odd and positive, got {kernel}"
            )));
        }
        for block in &mut self.conv_blocks {
            block.kernel = kernel;
            block.padding = kernel / 2;
        }
        Ok(self)
    }

    pub fn with_head(mut self, head_hidden: Option<usize>) -> Self {
        self.head_hidden = head_hidden;
        self
    }

    pub fn with_chaotic(mut self, chaotic: ChaoticLayerConfig) -> Self {
        self.chaotic = chaotic;
        self
    }

    /// Shape after each conv block as (channels, height, width).
    pub fn block_shapes(&self) -> Result<Vec<(usize, usize, usize)>> {
        let (_, mut h, mut w) = self.input_shape;
        let mut shapes = Vec::with_capacity(self.conv_blocks.len());
        for (i, b) in self.conv_blocks.iter().enumerate() {
            if b.filters == 0 || b.kernel == 0 {
                return Err(Error::Config(format!("conv block {i} has a zero size")));
            }
            if b.kernel > h + 2 * b.padding || b.kernel > w + 2 * b.padding {
                return Err(Error::Config(format!(
                    "conv block {i}: kernel {} does not fit {h}x{w} with padding {}",
                    b.kernel, b.padding
                )));
            }
            h = h + 2 * b.padding - b.kernel + 1;
            w = w + 2 * b.padding - b.kernel + 1;
            if b.pool {
                h = h.div_ceil(2);
                w = w.div_ceil(2);
            }
            shapes.push((b.filters, h, w));
        }
        Ok(shapes)
    }

    /// Length of the flattened conv output.
    pub fn flat_dim(&self) -> Result<usize> {
        let (c, h, w) = self
            .block_shapes()?
            .last()
            .copied()
            .unwrap_or(self.input_shape);
        Ok(c * h * w)
    }

    /// Length of the vector the chaotic transform sees.
    pub fn feature_dim(&self) -> Result<usize> {
        match self.head_hidden {
            Some(h) => Ok(h),
            None => self.flat_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (c, h, w) = self.input_shape;
        if c == 0 || h == 0 || w == 0 || self.num_classes < 2 {
            return Err(Error::Config(format!(
                "input shape {:?} with {} classes is not usable",
                self.input_shape, self.num_classes
            )));
        }
        if self.head_hidden == Some(0) {
            return Err(Error::Config("head width must be positive".into()));
        }
        self.chaotic.validate()?;
        self.block_shapes()?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
struct ConvIds {
    kernels: ParamId,
    bias: ParamId,
}

#[derive(Debug, Clone, Copy)]
struct DenseIds {
    weights: ParamId,
    bias: ParamId,
}

/// A built classifier: its architecture and trainable parameters.
#[derive(Debug, Clone)]
pub struct Model<T> {
    spec: ArchitectureSpec,
    params: ParameterSet<T>,
    convs: Vec<ConvIds>,
    hidden: Option<DenseIds>,
    output: DenseIds,
}

pub fn build_cnn2<T: Real>(chaotic: ChaoticLayerConfig, seed: u64) -> Result<Model<T>> {
    Model::build(ArchitectureSpec::cnn2(chaotic), seed)
}

pub fn build_cnn3<T: Real>(chaotic: ChaoticLayerConfig, seed: u64) -> Result<Model<T>> {
    Model::build(ArchitectureSpec::cnn3(chaotic), seed)
}

pub fn build_cnn5<T: Real>(chaotic: ChaoticLayerConfig, seed: u64) -> Result<Model<T>> {
    Model::build(ArchitectureSpec::cnn5(chaotic), seed)
}

impl<T: Real> Model<T> {
    /// Kaiming-normal weights and zero biases drawn from `seed`. The draws
    /// do not depend on the chaotic configuration, so an SA model and a
    /// chaotic model built from the same seed start from the same weights.
    pub fn build(spec: ArchitectureSpec, seed: u64) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParameterSet::new();
        let mut convs = Vec::with_capacity(spec.conv_blocks.len());
        let mut channels = spec.input_shape.0;
        for (i, b) in spec.conv_blocks.iter().enumerate() {
            let fan_in = channels * b.kernel * b.kernel;
            let kernels = params.add_kaiming(
                format!("conv{}.weight", i + 1),
                vec![b.filters, channels, b.kernel, b.kernel],
                fan_in,
                &mut rng,
            );
            let bias = params.add_zeros(format!("conv{}.bias", i + 1), vec![b.filters]);
            convs.push(ConvIds { kernels, bias });
            channels = b.filters;
        }
        let mut width = spec.flat_dim()?;
        let hidden = spec.head_hidden.map(|h| {
            let weights = params.add_kaiming("hidden.weight", vec![width, h], width, &mut rng);
            let bias = params.add_zeros("hidden.bias", vec![h]);
            width = h;
            DenseIds { weights, bias }
        });
        let weights = params.add_kaiming(
            "output.weight",
            vec![width, spec.num_classes],
            width,
            &mut rng,
        );
        let bias = params.add_zeros("output.bias", vec![spec.num_classes]);
        Ok(Model {
            spec,
            params,
            convs,
            hidden,
            output: DenseIds { weights, bias },
        })
    }

    pub fn spec(&self) -> &ArchitectureSpec {
        &self.spec
    }

    pub fn params(&self) -> &ParameterSet<T> {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut ParameterSet<T> {
        &mut self.params
    }

    pub fn num_parameters(&self) -> usize {
        self.params.num_scalars()
    }

    /// The same architecture and weights in another precision.
    pub fn cast<U: Real>(&self) -> Model<U> {
        Model {
            spec: self.spec.clone(),
            params: self.params.cast(),
            convs: self.convs.clone(),
            hidden: self.hidden,
            output: self.output,
        }
    }

    fn check_batch(&self, shape: &[usize]) -> Result<()> {
        let (c, h, w) = self.spec.input_shape;
        if shape.len() != 4 || shape[1..] != [c, h, w] {
            return Err(Error::Shape(format!(
                "model expects [N, {c}, {h}, {w}] input, got {shape:?}"
            )));
        }
        Ok(())
    }

    fn forward_impl(
        &self,
        params: &ParameterSet<T>,
        graph: &mut Graph<T>,
        batch: Var,
        frozen: Option<&mut FrozenStats>,
    ) -> Result<Var> {
        let mut x = self.extract(params, graph, batch)?;
        x = match frozen {
            Some(stats) => transform::apply_frozen(graph, x, &self.spec.chaotic, stats)?,
            None => transform::apply(graph, x, &self.spec.chaotic)?,
        };
        let w = graph.param(params, self.output.weights);
        let b = graph.param(params, self.output.bias);
        graph.dense(x, w, b)
    }

    /// Everything before the transform: conv blocks, flatten, hidden layer.
    fn extract(&self, params: &ParameterSet<T>, graph: &mut Graph<T>, batch: Var) -> Result<Var> {
        self.check_batch(graph.shape(batch))?;
        let mut x = batch;
        for (ids, block) in self.convs.iter().zip(&self.spec.conv_blocks) {
            let k = graph.param(params, ids.kernels);
            let b = graph.param(params, ids.bias);
            x = graph.conv2d(x, k, b, 1, block.padding)?;
            x = graph.relu(x);
            if block.pool {
                x = graph.maxpool2(x)?;
            }
        }
        x = graph.flatten(x)?;
        if let Some(ids) = self.hidden {
            let w = graph.param(params, ids.weights);
            let b = graph.param(params, ids.bias);
            x = graph.dense(x, w, b)?;
            x = graph.relu(x);
        }
        Ok(x)
    }

    /// The feature vectors the transform receives, one row per image.
    pub fn features(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        let mut g = Graph::inference();
        let x = g.input(batch.clone());
        let f = self.extract(&self.params, &mut g, x)?;
        Ok(g.value(f).clone())
    }

    /// Records the forward pass on `graph` and returns the logits node.
    pub fn forward(&self, graph: &mut Graph<T>, batch: Var) -> Result<Var> {
        self.forward_impl(&self.params, graph, batch, None)
    }

    /// Forward pass with weights taken from `params`, which must share this
    /// model's layout.
    pub fn forward_with(&self, params: &ParameterSet<T>, graph: &mut Graph<T>, batch: Var) -> Result<Var> {
        self.check_params(params)?;
        self.forward_impl(params, graph, batch, None)
    }

    /// Forward pass with the transform's normalization statistics pinned by
    /// `stats` and weights taken from `params`, which must share this
    /// model's layout. Meant for finite-difference checks.
    pub fn forward_frozen(
        &self,
        params: &ParameterSet<T>,
        graph: &mut Graph<T>,
        batch: Var,
        stats: &mut FrozenStats,
    ) -> Result<Var> {
        self.check_params(params)?;
        self.forward_impl(params, graph, batch, Some(stats))
    }

    fn check_params(&self, params: &ParameterSet<T>) -> Result<()> {
        if params.len() != self.params.len() {
            return Err(Error::Shape(format!(
                "parameter set has {} tensors, model has {}",
                params.len(),
                self.params.len()
            )));
        }
        Ok(())
    }

    /// Mean cross-entropy of the batch, recorded on `graph`.
    pub fn loss(&self, graph: &mut Graph<T>, batch: &Tensor<T>, labels: &[usize]) -> Result<Var> {
        let x = graph.input(batch.clone());
        let logits = self.forward(graph, x)?;
        graph.softmax_cross_entropy(logits, labels)
    }

    /// Pre-softmax outputs `[N, num_classes]`, computed without a tape.
    pub fn forward_logits(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        self.check_batch(batch.shape())?;
        let n = batch.shape()[0];
        let mut out = Vec::with_capacity(n * self.spec.num_classes);
        for start in (0..n).step_by(EVAL_CHUNK) {
            let end = (start + EVAL_CHUNK).min(n);
            let mut g = Graph::inference();
            let x = g.input(batch.slice_rows(start, end)?);
            let logits = self.forward(&mut g, x)?;
            out.extend_from_slice(g.value(logits).values());
        }
        Tensor::new(vec![n, self.spec.num_classes], out)
    }

    /// Arg-max class per row; ties go to the lowest class index.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<usize>> {
        let logits = self.forward_logits(batch)?;
        Ok(argmax_rows(logits.values(), self.spec.num_classes))
    }
}

pub fn argmax_rows<T: Real>(values: &[T], width: usize) -> Vec<usize> {
    values
        .chunks_exact(width)
        .map(|row| {
            let mut best = 0;
            for (i, v) in row.iter().enumerate() {
                if *v > row[best] {
                    best = i;
                }
            }
            best
        })
        .collect()
}
