//! Ersatz-material compliance of the initial design under the mean load.
//!
//! Pass a directory to write `displacement.vtk` there.

use std::sync::Arc;

use rso::driver::{Benchmark, Config};
use rso::fem::{
    assemble_elasticity, constrain_rhs, dirichlet_mask, point_load, Degree, DiscreteField,
    Factorization, FeSpace, MaterialField, DEFAULT_REL_TOL,
};
use rso::mesh::BoundaryTag;
use rso::objective::compliance;
use rso::vtk::{self, Attributes};

fn main() -> rso::Result<()> {
    let cfg = Config::desk();
    let bench = Benchmark::new(&cfg)?;
    let mesh = bench.initial_mesh().clone();
    let psi = bench.initial_level_set()?;
    let strong = psi.material_indicator(&mesh);
    let g = [0.0, cfg.load_magnitude];

    for degree in [Degree::Linear, Degree::Quadratic] {
        let space = Arc::new(FeSpace::new(mesh.clone(), degree));
        let material = MaterialField::ersatz(&strong, cfg.young, cfg.poisson, cfg.epsilon)?;
        let mask = dirichlet_mask(&space, BoundaryTag::Dirichlet);
        let a = assemble_elasticity(&space, &material)?.constrain(&mask)?;
        let l = constrain_rhs(&point_load(&space, cfg.load_point, g)?, &mask);
        let u = Factorization::new(&a, DEFAULT_REL_TOL).solve(&l)?;
        println!(
            "{degree:?}: {} DoF, {} nonzeros, compliance {:.6e}",
            space.n_dofs(),
            a.nnz(),
            compliance(&u, &l)
        );
        if let (Degree::Linear, Some(dir)) = (degree, std::env::args().nth(1)) {
            let field = DiscreteField::new(space.clone(), u, mask)?;
            let disp: Vec<[f64; 2]> = (0..mesh.n_vertices()).map(|v| field.node_value(v)).collect();
            let flags: Vec<f64> = strong.iter().map(|&s| f64::from(u8::from(s))).collect();
            let data = Attributes {
                cell_scalars: vec![("material", &flags)],
                point_scalars: vec![],
                point_vectors: vec![("displacement", &disp)],
            };
            let path = std::path::Path::new(&dir).join("displacement.vtk");
            vtk::write(&path, &vtk::unstructured_grid(&mesh, "displacement", &data)?)?;
            println!("wrote {}", path.display());
        }
    }
    println!("volume fraction of the initial design: {:.4}", psi.volume_fraction());
    Ok(())
}
