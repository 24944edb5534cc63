//! Short fully adaptive optimization at desk scale, compared against the
//! fixed-mesh, fixed-sample baseline.
//!
//! `cargo run --release --example desk_optimize -- [iterations]`

use rso::driver::{run, Config, Mode};

fn main() -> rso::Result<()> {
    let iterations = std::env::args().nth(1).map_or(Ok(10), |s| s.parse()).map_err(|e| {
        rso::Error::Config(format!("iteration count: {e}"))
    })?;
    let mut cfg = Config::desk();
    cfg.max_iters = iterations;
    let mut results = Vec::new();
    for mode in [Mode::FullyAdaptive, Mode::FixedMeshFull] {
        cfg.mode = mode;
        let history = run(&cfg)?;
        println!("\n{}", mode.as_str());
        println!("iter  |S|  DoF    J^P         volume  alpha     steps");
        for r in &history.rows {
            println!(
                "{:>4}  {:>3}  {:<5}  {:.5e}  {:.4}  {:.2e}  {}",
                r.iteration, r.samples, r.dofs, r.penalized, r.volume_fraction, r.alpha, r.hj_steps
            );
        }
        results.push((mode, history.ci()));
    }
    for (mode, ci) in &results {
        println!("{:<18} CI {ci:.4e}", mode.as_str());
    }
    println!("CI ratio adaptive/fixed: {:.3}", results[0].1 / results[1].1);
    Ok(())
}
