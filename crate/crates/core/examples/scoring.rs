//! Macro F1 from predictions and the relative gain of a chaotic model over
//! its standalone baseline.

use chaosnet::metrics::{gain_percent, macro_f1};

fn main() -> anyhow::Result<()> {
    let truth: Vec<usize> = (0..30).map(|i| i % 10).collect();
    let mut predicted = truth.clone();
    predicted[0] = 1;
    predicted[13] = 0;
    predicted[27] = 2;
    let eval = macro_f1(&truth, &predicted)?;
    println!("accuracy {:.3}, macro F1 {:.4}", eval.accuracy(), eval.macro_f1);
    let per_class: Vec<String> = eval.per_class_f1.iter().map(|f| format!("{f:.2}")).collect();
    println!("per-class F1 [{}]", per_class.join(" "));
    for row in &eval.confusion[..4] {
        println!("  {:?}", &row[..4]);
    }

    for (chaos, sa) in [(0.9087, 0.8619), (0.7880, 0.7210), (0.4850, 0.4513)] {
        println!("F1 {chaos} vs {sa}: gain {:.2}%", gain_percent(chaos, sa)?);
    }
    Ok(())
}
