//! Goal-oriented estimates on the initial design and the meshes produced by
//! marking with the combined indicator.

use std::sync::Arc;

use rso::driver::{evaluate_pass, Benchmark, Config, Discretization};
use rso::mesh::mark_dorfler;

fn main() -> rso::Result<()> {
    let cfg = Config::desk();
    let bench = Benchmark::new(&cfg)?;
    let psi = bench.initial_level_set()?;
    let mut mesh = bench.initial_mesh().clone();
    let mut events = Vec::new();
    println!("pass  DoF     J           eta_c       eta_d       Q         marked  h_min");
    for pass in 0..4 {
        let disc = Discretization::new(mesh.clone(), cfg.tau1, cfg.tau2)?;
        let p = evaluate_pass(&bench, &disc, &psi, 2, &mut events)?;
        let marked = mark_dorfler(&p.marking_indicator(), cfg.theta_mark)?;
        println!(
            "{pass:>4}  {:<6}  {:.4e}  {:.4e}  {:.4e}  {:<8.3e}  {:<6}  {:.3e}",
            disc.dofs(),
            p.mean_compliance,
            p.eta_c_total(),
            p.eta_d_total(),
            p.estimate.q,
            marked.len(),
            mesh.min_element_size()
        );
        mesh = Arc::new(mesh.refine(&marked)?);
    }
    println!("computational index so far: {:.4e}", rso::driver::compute_ci(&events));
    Ok(())
}
