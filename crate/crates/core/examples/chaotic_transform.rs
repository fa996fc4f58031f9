//! Runs the feature transform on its own: per-row min-max normalization
//! followed by one or more map iterations, and its backward pass.

use chaosnet::autodiff::{Graph, ParameterSet, Tensor};
use chaosnet::maps::MapKind;
use chaosnet::transform::{self, ChaoticLayerConfig, StatsGradient};

fn main() -> anyhow::Result<()> {
    let features = Tensor::<f64>::new(vec![2, 5], vec![-1.0, 0.0, 0.5, 2.0, 3.0, 7.0, 7.5, 8.0, 9.0, 6.0])?;
    let (normalized, record) = transform::normalize_minmax(&features)?;
    println!("normalized {:?}", normalized.values());
    println!("row scales {:?}", (0..2).map(|r| record.scale(r)).collect::<Vec<_>>());

    for kind in MapKind::ALL {
        for mode in [StatsGradient::Propagated, StatsGradient::Detached] {
            let cfg = ChaoticLayerConfig::new(kind).with_iterations(2).with_stats_gradient(mode);
            let mut params = ParameterSet::new();
            let id = params.add("features", features.clone());
            let mut g = Graph::new();
            let x = g.param(&params, id);
            let y = transform::apply(&mut g, x, &cfg)?;
            let out: Vec<String> = g.value(y).values().iter().map(|v| format!("{v:.3}")).collect();
            let loss = g.sum_squares(y);
            g.backward(loss)?;
            let grad: Vec<String> = g
                .grad(x)
                .map(|d| d.iter().map(|v| format!("{v:+.2}")).collect())
                .unwrap_or_default();
            println!("{kind:<9} {:<10} y = [{}]", format!("{mode:?}"), out.join(" "));
            println!("{:<20} dL/dx = [{}]", "", grad.join(" "));
            if kind == MapKind::None {
                break;
            }
        }
    }
    Ok(())
}
