//! Orbits, derivatives and Lyapunov estimates of the three chaotic maps.

use chaosnet::maps::{self, MapKind, MapParams};

fn main() -> anyhow::Result<()> {
    let params = MapParams::default();
    for kind in [MapKind::Logistic, MapKind::SkewTent, MapKind::Sine] {
        let orbit = maps::iterate(kind, maps::DEFAULT_X0, 8, &params)?;
        let shown: Vec<String> = orbit.iter().map(|x| format!("{x:.4}")).collect();
        println!("{kind:<10} orbit  {}", shown.join(" "));

        let slope = maps::map_derivative(kind, 0.25, &params)?;
        let lambda = maps::estimate_lyapunov(kind, maps::DEFAULT_X0, 200_000, &params)?;
        println!("{kind:<10} f'(0.25) = {slope:.4}, lyapunov = {lambda:.4}");
    }

    // two orbits starting 1e-10 apart separate within a few dozen steps
    let a = maps::iterate(MapKind::Logistic, 0.3, 60, &params)?;
    let b = maps::iterate(MapKind::Logistic, 0.3 + 1e-10, 60, &params)?;
    let split = a.iter().zip(&b).position(|(x, y)| (x - y).abs() > 0.1);
    println!("logistic orbits 1e-10 apart diverge at step {split:?}");

    println!("ln 2 = {:.4}", std::f64::consts::LN_2);
    Ok(())
}
