//! Conforming triangulations of the rectangular working domain.
//!
//! Meshes start from the crossed construction (every grid cell split into four
//! triangles around a center vertex) and are refined by newest-vertex
//! bisection. Each triangle is stored as `[peak, a, b]` in counter-clockwise
//! order; its refinement edge is `(a, b)`, opposite the peak. The crossed
//! construction puts the peak at the cell center, so every refinement edge is
//! a cell side and the initial labeling is compatible.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};

pub type Point = [f64; 2];

/// Sorted vertex pair identifying an edge.
pub type EdgeKey = (usize, usize);

pub fn edge_key(a: usize, b: usize) -> EdgeKey {
    if a < b {
        (a, b)
    } else {
        (b, a)
    }
}

/// Boundary condition class of a boundary edge.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BoundaryTag {
    Dirichlet,
    Neumann,
    Free,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Mesh {
    vertices: Vec<Point>,
    triangles: Vec<[usize; 3]>,
    levels: Vec<u32>,
    roots: Vec<usize>,
    boundary: BTreeMap<EdgeKey, BoundaryTag>,
    extents: [f64; 2],
    initial_vertices: usize,
}

/// Triangle indices selected for refinement.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct MarkedSet(Vec<usize>);

impl MarkedSet {
    pub fn new(indices: Vec<usize>) -> Self {
        MarkedSet(indices)
    }

    pub fn all(mesh: &Mesh) -> Self {
        MarkedSet((0..mesh.n_triangles()).collect())
    }

    pub fn indices(&self) -> &[usize] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Edge-based adjacency of a mesh.
///
/// Local edge `l` of a triangle is the one opposite its vertex `l`, running
/// from vertex `l + 1` to vertex `l + 2` (counter-clockwise).
#[derive(Clone, Debug)]
pub struct Topology {
    pub edges: Vec<EdgeKey>,
    /// Incident triangles of each edge; the second entry is `None` on the boundary.
    pub edge_triangles: Vec<(usize, Option<usize>)>,
    pub triangle_edges: Vec<[usize; 3]>,
}

impl Topology {
    pub fn new(mesh: &Mesh) -> Self {
        let mut index: HashMap<EdgeKey, usize> = HashMap::with_capacity(mesh.n_triangles() * 2);
        let mut edges = Vec::new();
        let mut edge_triangles: Vec<(usize, Option<usize>)> = Vec::new();
        let mut triangle_edges = Vec::with_capacity(mesh.n_triangles());
        for (k, t) in mesh.triangles.iter().enumerate() {
            let mut local = [0; 3];
            for (l, slot) in local.iter_mut().enumerate() {
                let key = edge_key(t[(l + 1) % 3], t[(l + 2) % 3]);
                let id = *index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_triangles.push((k, None));
                    edges.len() - 1
                });
                if edge_triangles[id].0 != k {
                    edge_triangles[id].1 = Some(k);
                }
                *slot = id;
            }
            triangle_edges.push(local);
        }
        Topology {
            edges,
            edge_triangles,
            triangle_edges,
        }
    }

    pub fn n_edges(&self) -> usize {
        self.edges.len()
    }

    /// Triangle across local edge `l` of triangle `k`, if any.
    pub fn neighbor(&self, k: usize, l: usize) -> Option<usize> {
        let (a, b) = self.edge_triangles[self.triangle_edges[k][l]];
        if a == k {
            b
        } else {
            Some(a)
        }
    }
}

impl Mesh {
    /// Crossed triangulation of `[0, lx] x [0, ly]` with `nx x ny` cells.
    ///
    /// Grid vertex `(i, j)` gets index `j * (nx + 1) + i`; cell centers follow.
    /// `tag` classifies each boundary edge from its two endpoints.
    pub fn crossed(
        nx: usize,
        ny: usize,
        lx: f64,
        ly: f64,
        tag: impl Fn(Point, Point) -> BoundaryTag,
    ) -> Result<Mesh> {
        if nx == 0 || ny == 0 {
            return Err(Error::Parameter(format!(
                "cell counts must be positive, got {nx} x {ny}"
            )));
        }
        if !(lx > 0.0 && ly > 0.0 && lx.is_finite() && ly.is_finite()) {
            return Err(Error::Parameter(format!(
                "domain extents must be positive, got {lx} x {ly}"
            )));
        }
        let dx = lx / nx as f64;
        let dy = ly / ny as f64;
        let grid = |i: usize, j: usize| j * (nx + 1) + i;
        let mut vertices = Vec::with_capacity((nx + 1) * (ny + 1) + nx * ny);
        for j in 0..=ny {
            for i in 0..=nx {
                // Snap the last row/column onto the extents exactly.
                let x = if i == nx { lx } else { i as f64 * dx };
                let y = if j == ny { ly } else { j as f64 * dy };
                vertices.push([x, y]);
            }
        }
        let first_center = vertices.len();
        for j in 0..ny {
            for i in 0..nx {
                vertices.push([(i as f64 + 0.5) * dx, (j as f64 + 0.5) * dy]);
            }
        }
        let mut triangles = Vec::with_capacity(4 * nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let c = first_center + j * nx + i;
                let ring = [
                    grid(i, j),
                    grid(i + 1, j),
                    grid(i + 1, j + 1),
                    grid(i, j + 1),
                ];
                for s in 0..4 {
                    triangles.push([c, ring[s], ring[(s + 1) % 4]]);
                }
            }
        }
        let mut boundary = BTreeMap::new();
        for i in 0..nx {
            for (a, b) in [(grid(i, 0), grid(i + 1, 0)), (grid(i, ny), grid(i + 1, ny))] {
                boundary.insert(edge_key(a, b), tag(vertices[a], vertices[b]));
            }
        }
        for j in 0..ny {
            for (a, b) in [(grid(0, j), grid(0, j + 1)), (grid(nx, j), grid(nx, j + 1))] {
                boundary.insert(edge_key(a, b), tag(vertices[a], vertices[b]));
            }
        }
        let n = triangles.len();
        let mesh = Mesh {
            initial_vertices: vertices.len(),
            vertices,
            triangles,
            levels: vec![0; n],
            roots: (0..n).collect(),
            boundary,
            extents: [lx, ly],
        };
        Ok(mesh)
    }

    /// Crossed triangulation with every boundary edge tagged free.
    pub fn crossed_untagged(nx: usize, ny: usize, lx: f64, ly: f64) -> Result<Mesh> {
        Mesh::crossed(nx, ny, lx, ly, |_, _| BoundaryTag::Free)
    }

    pub fn n_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn n_triangles(&self) -> usize {
        self.triangles.len()
    }

    /// Number of vector-valued linear degrees of freedom.
    pub fn vector_dofs(&self) -> usize {
        2 * self.vertices.len()
    }

    pub fn vertices(&self) -> &[Point] {
        &self.vertices
    }

    pub fn vertex(&self, i: usize) -> Point {
        self.vertices[i]
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn triangle(&self, k: usize) -> [usize; 3] {
        self.triangles[k]
    }

    pub fn triangle_points(&self, k: usize) -> [Point; 3] {
        let t = self.triangles[k];
        [self.vertices[t[0]], self.vertices[t[1]], self.vertices[t[2]]]
    }

    /// Number of bisections separating triangle `k` from its root.
    pub fn level(&self, k: usize) -> u32 {
        self.levels[k]
    }

    /// Index of the initial-mesh triangle containing triangle `k`.
    pub fn root(&self, k: usize) -> usize {
        self.roots[k]
    }

    pub fn extents(&self) -> [f64; 2] {
        self.extents
    }

    /// Vertices `0..initial_vertex_count()` are those of the initial mesh.
    pub fn initial_vertex_count(&self) -> usize {
        self.initial_vertices
    }

    pub fn boundary_edges(&self) -> &BTreeMap<EdgeKey, BoundaryTag> {
        &self.boundary
    }

    pub fn boundary_tag(&self, a: usize, b: usize) -> Option<BoundaryTag> {
        self.boundary.get(&edge_key(a, b)).copied()
    }

    pub fn has_tag(&self, tag: BoundaryTag) -> bool {
        self.boundary.values().any(|&t| t == tag)
    }

    pub fn signed_area(&self, k: usize) -> f64 {
        let [p, q, r] = self.triangle_points(k);
        0.5 * ((q[0] - p[0]) * (r[1] - p[1]) - (r[0] - p[0]) * (q[1] - p[1]))
    }

    pub fn area(&self, k: usize) -> f64 {
        self.signed_area(k).abs()
    }

    pub fn total_area(&self) -> f64 {
        (0..self.n_triangles()).map(|k| self.area(k)).sum()
    }

    pub fn centroid(&self, k: usize) -> Point {
        let [p, q, r] = self.triangle_points(k);
        [(p[0] + q[0] + r[0]) / 3.0, (p[1] + q[1] + r[1]) / 3.0]
    }

    /// Local mesh size: the longest edge of `K`.
    pub fn element_size(&self, k: usize) -> f64 {
        let [p, q, r] = self.triangle_points(k);
        let d = |a: Point, b: Point| (a[0] - b[0]).hypot(a[1] - b[1]);
        d(p, q).max(d(q, r)).max(d(r, p))
    }

    pub fn min_element_size(&self) -> f64 {
        (0..self.n_triangles())
            .map(|k| self.element_size(k))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn max_element_size(&self) -> f64 {
        (0..self.n_triangles())
            .map(|k| self.element_size(k))
            .fold(0.0, f64::max)
    }

    pub fn topology(&self) -> Topology {
        Topology::new(self)
    }

    /// Index of the vertex closest to `p`, with its distance.
    pub fn nearest_vertex(&self, p: Point) -> (usize, f64) {
        self.vertices
            .iter()
            .enumerate()
            .map(|(i, v)| (i, ((v[0] - p[0]).powi(2) + (v[1] - p[1]).powi(2)).sqrt()))
            .fold((0, f64::INFINITY), |best, c| if c.1 < best.1 { c } else { best })
    }

    /// Newest-vertex bisection of the marked triangles plus the closure needed
    /// to keep the mesh conforming.
    pub fn refine(&self, marked: &MarkedSet) -> Result<Mesh> {
        let n = self.n_triangles();
        let mut seen = vec![false; n];
        for &k in marked.indices() {
            if k >= n {
                return Err(Error::Parameter(format!(
                    "marked triangle {k} out of range ({n} triangles)"
                )));
            }
            if seen[k] {
                return Err(Error::Parameter(format!("triangle {k} marked twice")));
            }
            seen[k] = true;
        }
        if marked.is_empty() {
            return Ok(self.clone());
        }

        let topo = self.topology();
        let mut edge_marked = vec![false; topo.n_edges()];
        let mut queue: Vec<usize> = Vec::new();
        for &k in marked.indices() {
            let e = topo.triangle_edges[k][0];
            if !edge_marked[e] {
                edge_marked[e] = true;
                queue.push(e);
            }
        }
        // Closure: a triangle with any bisected edge must bisect its refinement edge.
        while let Some(e) = queue.pop() {
            let (a, b) = topo.edge_triangles[e];
            for k in std::iter::once(a).chain(b) {
                let r = topo.triangle_edges[k][0];
                if !edge_marked[r] {
                    edge_marked[r] = true;
                    queue.push(r);
                }
            }
        }

        let mut vertices = self.vertices.clone();
        let mut midpoint: HashMap<EdgeKey, usize> = HashMap::new();
        for (e, &key) in topo.edges.iter().enumerate() {
            if edge_marked[e] {
                let (p, q) = (self.vertices[key.0], self.vertices[key.1]);
                midpoint.insert(key, vertices.len());
                vertices.push([0.5 * (p[0] + q[0]), 0.5 * (p[1] + q[1])]);
            }
        }

        let mut triangles = Vec::with_capacity(n + 2 * midpoint.len());
        let mut levels = Vec::with_capacity(triangles.capacity());
        let mut roots = Vec::with_capacity(triangles.capacity());
        let mut stack: Vec<([usize; 3], u32)> = Vec::new();
        for k in 0..n {
            stack.push((self.triangles[k], self.levels[k]));
            while let Some((t, level)) = stack.pop() {
                match midpoint.get(&edge_key(t[1], t[2])) {
                    Some(&m) => {
                        // Push in reverse so children come out in a fixed order.
                        stack.push(([m, t[2], t[0]], level + 1));
                        stack.push(([m, t[0], t[1]], level + 1));
                    }
                    None => {
                        triangles.push(t);
                        levels.push(level);
                        roots.push(self.roots[k]);
                    }
                }
            }
        }

        let mut boundary = BTreeMap::new();
        for (&(a, b), &tag) in &self.boundary {
            match midpoint.get(&(a, b)) {
                Some(&m) => {
                    boundary.insert(edge_key(a, m), tag);
                    boundary.insert(edge_key(m, b), tag);
                }
                None => {
                    boundary.insert((a, b), tag);
                }
            }
        }

        Ok(Mesh {
            vertices,
            triangles,
            levels,
            roots,
            boundary,
            extents: self.extents,
            initial_vertices: self.initial_vertices,
        })
    }

    /// Checks conformity and orientation; returns a description of the first defect.
    pub fn audit(&self) -> std::result::Result<(), String> {
        for k in 0..self.n_triangles() {
            let a = self.signed_area(k);
            if a <= 0.0 {
                return Err(format!("triangle {k} has non-positive signed area {a:e}"));
            }
        }
        let topo = self.topology();
        let mut count: HashMap<EdgeKey, usize> = HashMap::new();
        for t in &self.triangles {
            for l in 0..3 {
                *count.entry(edge_key(t[(l + 1) % 3], t[(l + 2) % 3])).or_default() += 1;
            }
        }
        for (e, &key) in topo.edges.iter().enumerate() {
            let c = count[&key];
            if c > 2 {
                return Err(format!("edge {key:?} shared by {c} triangles"));
            }
            if c == 1 {
                let (p, q) = (self.vertices[key.0], self.vertices[key.1]);
                if !self.on_boundary(p) || !self.on_boundary(q) {
                    return Err(format!("edge {key:?} has a single triangle but is interior"));
                }
                if !self.boundary.contains_key(&key) {
                    return Err(format!("boundary edge {key:?} has no tag"));
                }
            }
            let _ = e;
        }
        // A hanging node would sit strictly inside some edge.
        let boundary_count = count.values().filter(|&&c| c == 1).count();
        if boundary_count != self.boundary.len() {
            return Err(format!(
                "{} single-triangle edges but {} tagged boundary edges",
                boundary_count,
                self.boundary.len()
            ));
        }
        Ok(())
    }

    /// Whether `p` lies on the rectangle boundary (up to round-off).
    pub fn on_boundary(&self, p: Point) -> bool {
        let tol = 1e-12 * self.extents[0].max(self.extents[1]);
        p[0].abs() <= tol
            || p[1].abs() <= tol
            || (p[0] - self.extents[0]).abs() <= tol
            || (p[1] - self.extents[1]).abs() <= tol
    }

    /// Same connectivity and tags with moved vertices, e.g. a perturbed
    /// domain `(Id + tθ)(D)`.
    pub fn with_vertices(&self, vertices: Vec<Point>) -> Result<Mesh> {
        if vertices.len() != self.vertices.len() {
            return Err(Error::Dimension {
                expected: self.vertices.len(),
                found: vertices.len(),
            });
        }
        let moved = Mesh {
            vertices,
            ..self.clone()
        };
        for k in 0..moved.n_triangles() {
            let area = moved.signed_area(k);
            if !(area > 0.0) {
                return Err(Error::DegenerateTriangle { index: k, area });
            }
        }
        Ok(moved)
    }
}

/// Fresh copy of the initial triangulation.
pub fn reset(initial: &Mesh) -> Mesh {
    initial.clone()
}

/// Minimal bulk (Dörfler) marking.
///
/// Triangles are taken by decreasing indicator (ties by increasing index)
/// until their sum reaches `theta * total`. All-zero indicators mark nothing.
pub fn mark_dorfler(indicators: &[f64], theta: f64) -> Result<MarkedSet> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::Parameter(format!(
            "bulk fraction must lie in (0, 1], got {theta}"
        )));
    }
    if let Some((k, v)) = indicators
        .iter()
        .enumerate()
        .find(|(_, v)| !v.is_finite() || **v < 0.0)
    {
        return Err(Error::Parameter(format!(
            "indicator {k} is {v}; indicators must be finite and nonnegative"
        )));
    }
    let mut order: Vec<usize> = (0..indicators.len()).collect();
    order.sort_by(|&a, &b| {
        indicators[b]
            .partial_cmp(&indicators[a])
            .unwrap()
            .then(a.cmp(&b))
    });
    let total: f64 = order.iter().map(|&k| indicators[k]).sum();
    if total == 0.0 {
        return Ok(MarkedSet::default());
    }
    let target = theta * total;
    let mut acc = 0.0;
    let mut chosen = Vec::new();
    for &k in &order {
        if acc >= target {
            break;
        }
        acc += indicators[k];
        chosen.push(k);
    }
    Ok(MarkedSet(chosen))
}
