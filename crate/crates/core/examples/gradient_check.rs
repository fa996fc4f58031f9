//! Builds a small chaotic CNN in f64 and compares its tape gradients with
//! central differences.

use chaosnet::autodiff::{grad_check, GradCheckOptions, Graph, Tensor};
use chaosnet::maps::MapKind;
use chaosnet::models::{ArchitectureSpec, Model};
use chaosnet::transform::ChaoticLayerConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn main() -> anyhow::Result<()> {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let batch = Tensor::<f64>::new(
        vec![4, 1, 28, 28],
        (0..4 * 784).map(|_| rng.gen::<f64>()).collect(),
    )?;
    let labels = [3, 1, 4, 1];

    for kind in [MapKind::None, MapKind::Logistic, MapKind::Sine] {
        let spec = ArchitectureSpec::cnn2(ChaoticLayerConfig::new(kind))
            .with_filters(&[4, 8])?
            .with_head(Some(16));
        let mut model = Model::<f64>::build(spec, 1)?;
        let reference = model.clone();
        let report = grad_check(
            model.params_mut(),
            |p, g: &mut Graph<f64>| {
                let x = g.input(batch.clone());
                let logits = reference.forward_with(p, g, x)?;
                g.softmax_cross_entropy(logits, &labels)
            },
            &GradCheckOptions {
                h: 1e-6,
                tol: 1e-3,
                fraction: 0.1,
                ..GradCheckOptions::default()
            },
        )?;
        println!(
            "{kind:<8} checked {:>4} coordinates, max relative error {:.2e}, passed {}",
            report.checked,
            report.max_rel_error,
            report.passed()
        );
    }
    Ok(())
}
