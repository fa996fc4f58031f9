//! Layer geometry and parameter counts of the three architectures under
//! every map setting.

use chaosnet::maps::MapKind;
use chaosnet::models::{ArchitectureSpec, Model, Variant};
use chaosnet::transform::ChaoticLayerConfig;

fn main() -> anyhow::Result<()> {
    for variant in Variant::ALL {
        let spec = ArchitectureSpec::for_variant(variant, ChaoticLayerConfig::identity());
        println!("{} ({}), input {:?}", variant, variant.table_label(), spec.input_shape);
        for (block, shape) in spec.conv_blocks.iter().zip(spec.block_shapes()?) {
            println!("  conv {}x{} -> {} {}  out {:?}", block.kernel, block.kernel, block.filters,
                if block.pool { "+pool" } else { "     " }, shape);
        }
        println!("  flatten {} -> head {:?} -> transform -> {}", spec.flat_dim()?, spec.head_hidden, spec.num_classes);
        for kind in MapKind::ALL {
            let model = Model::<f32>::build(spec.clone().with_chaotic(ChaoticLayerConfig::new(kind)), 0)?;
            println!("  {:<10} {} parameters", kind.as_str(), model.num_parameters());
        }
    }
    Ok(())
}
