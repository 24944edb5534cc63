//! Crossed triangulations, Dörfler marking and newest-vertex bisection
//! towards a corner.

use rso::mesh::{mark_dorfler, BoundaryTag, Mesh};

fn main() -> rso::Result<()> {
    for (nx, ny) in [(30, 60), (60, 120), (180, 360)] {
        let mesh = Mesh::crossed_untagged(nx, ny, 1.0, 2.0)?;
        println!(
            "{nx:>3} x {ny:<3}: {:>7} triangles, {:>7} vector DoF (P1)",
            mesh.n_triangles(),
            mesh.vector_dofs()
        );
    }

    let mut mesh = Mesh::crossed(10, 20, 1.0, 2.0, |a, b| {
        if a[0] == 0.0 && b[0] == 0.0 && a[1].min(b[1]) >= 1.5 {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Free
        }
    })?;
    // Indicator decaying away from the load corner (1, 0).
    println!("\npass  triangles  h_min      h_max");
    for pass in 0..8 {
        let eta: Vec<f64> = (0..mesh.n_triangles())
            .map(|k| {
                let c = mesh.centroid(k);
                mesh.area(k) / (1e-3 + (c[0] - 1.0).hypot(c[1]))
            })
            .collect();
        let marked = mark_dorfler(&eta, 0.3)?;
        mesh = mesh.refine(&marked)?;
        mesh.audit().map_err(rso::Error::Numeric)?;
        println!(
            "{pass:>4}  {:>9}  {:.3e}  {:.3e}",
            mesh.n_triangles(),
            mesh.min_element_size(),
            mesh.max_element_size()
        );
    }
    let clamped: f64 = mesh
        .boundary_edges()
        .iter()
        .filter(|(_, &t)| t == BoundaryTag::Dirichlet)
        .map(|(&(a, b), _)| {
            let (p, q) = (mesh.vertex(a), mesh.vertex(b));
            (p[0] - q[0]).hypot(p[1] - q[1])
        })
        .sum();
    println!("clamped boundary length after refinement: {clamped:.12}");
    Ok(())
}
