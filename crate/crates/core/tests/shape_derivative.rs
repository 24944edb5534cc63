//! The assembled shape derivative against finite differences of the discrete
//! compliance on a moved mesh.

use std::sync::Arc;

use rso::fem::{
    assemble_elasticity, constrain_rhs, dirichlet_mask, point_load, Degree, DiscreteField,
    Factorization, FeSpace, MaterialField, DEFAULT_REL_TOL,
};
use rso::level_set::{benchmark_initial, LevelSet};
use rso::mesh::{BoundaryTag, Mesh, Point};
use rso::objective::{compliance, divergence_functional, shape_gradient};

fn benchmark_mesh(nx: usize, ny: usize) -> Mesh {
    Mesh::crossed(nx, ny, 1.0, 2.0, |a, b| {
        if a[0] == 0.0 && b[0] == 0.0 && a[1].min(b[1]) >= 1.5 {
            BoundaryTag::Dirichlet
        } else {
            BoundaryTag::Free
        }
    })
    .unwrap()
}

fn solve_compliance(mesh: &Arc<Mesh>, strong: &[bool], g: [f64; 2]) -> (f64, DiscreteField, MaterialField) {
    let space = Arc::new(FeSpace::new(mesh.clone(), Degree::Linear));
    let material = MaterialField::ersatz(strong, 1.0, 0.3, 1e-3).unwrap();
    let mask = dirichlet_mask(&space, BoundaryTag::Dirichlet);
    let a = assemble_elasticity(&space, &material).unwrap().constrain(&mask).unwrap();
    let l = constrain_rhs(&point_load(&space, [1.0, 0.0], g).unwrap(), &mask);
    let u = Factorization::new(&a, DEFAULT_REL_TOL).solve(&l).unwrap();
    let j = compliance(&u, &l);
    (j, DiscreteField::new(space, u, mask).unwrap(), material)
}

/// Smooth field tangential on the rectangle boundary, vanishing at (1, 0).
fn bubble(p: Point) -> [f64; 2] {
    use std::f64::consts::PI;
    let [x, y] = p;
    [
        (PI * x).sin() * (1.0 + 0.5 * (PI * y).cos()),
        (PI * y / 2.0).sin() * (0.3 + x * x),
    ]
}

fn moved(mesh: &Mesh, t: f64) -> Arc<Mesh> {
    let v = mesh.vertices().iter().map(|&p| {
        let d = bubble(p);
        [p[0] + t * d[0], p[1] + t * d[1]]
    });
    Arc::new(mesh.with_vertices(v.collect()).unwrap())
}

#[test]
fn compliance_derivative_matches_central_differences() {
    let mesh = benchmark_mesh(8, 16);
    let psi = LevelSet::init(8, 16, [1.0, 2.0], benchmark_initial).unwrap();
    let strong = psi.material_indicator(&mesh);
    let g = [3.0, 9.0];
    let base = Arc::new(mesh.clone());
    let (_, u, material) = solve_compliance(&base, &strong, g);
    let space = u.space().clone();
    let grad = shape_gradient(&u, &material, None, 0.0, &strong, &space).unwrap();
    let theta = DiscreteField::from_fn(space, bubble);
    let predicted: f64 = grad.values.iter().zip(theta.values()).map(|(a, b)| a * b).sum();

    let t = 1e-5;
    let jp = solve_compliance(&moved(&mesh, t), &strong, g).0;
    let jm = solve_compliance(&moved(&mesh, -t), &strong, g).0;
    let fd = (jp - jm) / (2.0 * t);
    let rel = (fd - predicted).abs() / predicted.abs();
    assert!(rel < 1e-5, "fd {fd:e} vs assembled {predicted:e} (rel {rel:e})");
}

#[test]
fn volume_functional_matches_area_change() {
    // d|W|(θ) = ∫_W div θ, with W transported by the mesh motion.
    let mesh = benchmark_mesh(8, 16);
    let psi = LevelSet::init(8, 16, [1.0, 2.0], benchmark_initial).unwrap();
    let strong = psi.material_indicator(&mesh);
    let area = |m: &Mesh| -> f64 { (0..m.n_triangles()).filter(|&k| strong[k]).map(|k| m.area(k)).sum() };
    let space = Arc::new(FeSpace::new(Arc::new(mesh.clone()), Degree::Linear));
    let div = divergence_functional(&space, &strong).unwrap();
    let theta = DiscreteField::from_fn(space, bubble);
    let predicted: f64 = div.iter().zip(theta.values()).map(|(a, b)| a * b).sum();
    let t = 1e-6;
    let fd = (area(&moved(&mesh, t)) - area(&moved(&mesh, -t))) / (2.0 * t);
    assert!((fd - predicted).abs() <= 1e-6 * predicted.abs().max(1.0), "fd {fd:e} vs {predicted:e}");
}
