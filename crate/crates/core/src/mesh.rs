//! Triangulated compact surfaces carried as intrinsic cone metrics.
//!
//! A mesh stores vertex positions (for export and for defining edge lengths)
//! plus per-edge metric lengths; every downstream computation (areas, P1
//! gradients, geodesic distances) reads only the edge lengths, so each
//! triangle is an isometrically embedded flat triangle. On the unit sphere
//! edge lengths are great-circle arcs; on the flat torus they are the flat
//! lengths of the (possibly wrapping) grid edges.

use crate::error::{MgError, Result};
use once_cell::sync::OnceCell;
use std::cmp::Reverse;
use std::collections::BinaryHeap;
use std::collections::HashMap;

pub const SPHERE_MAX_LEVEL: u32 = 8;
pub const TORUS_MIN_DIM: u32 = 3;

/// Segments per mesh edge in the shortest-path graph used for geodesic
/// distances (interior Steiner nodes per edge = EDGE_SUBDIV - 1).
const EDGE_SUBDIV: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurfaceKind {
    Sphere,
    Torus,
}

/// Per-triangle flat geometry derived from the three metric edge lengths.
///
/// The triangle (v0,v1,v2) is laid out in its own orthonormal frame with v0
/// at the origin and v1 on the positive first axis; the frame is therefore
/// fixed by the triangle's lowest-vertex-id edge (triangles are stored
/// rotated so the smallest vertex id comes first, preserving orientation).
#[derive(Clone, Debug)]
pub struct TriGeom {
    /// Embedded corner positions; p[0] = (0,0), p[1] = (l01, 0), p[2].y > 0.
    pub p: [[f64; 2]; 3],
    /// Gradients of the three barycentric hat functions in frame coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub area: f64,
    /// Ambient realization of the two frame axes (chordal plane on the
    /// sphere, chart plane on the torus). Approximate on the sphere: chord
    /// lengths differ from the metric arc lengths at second order.
    pub frame: [[f64; 3]; 2],
}

pub struct SurfaceMesh {
    pub kind: SurfaceKind,
    /// Construction parameter echo: subdivision level for spheres,
    /// (nx, ny) for tori.
    pub level: u32,
    pub grid: (u32, u32),
    pub extent: (f64, f64),
    pub vertices: Vec<[f64; 3]>,
    /// Each triple rotated so the smallest vertex id is first; orientation
    /// consistent over the whole surface.
    pub triangles: Vec<[u32; 3]>,
    /// Undirected edges as (min, max) vertex pairs, sorted lexicographically.
    pub edges: Vec<(u32, u32)>,
    pub edge_lengths: Vec<f64>,
    /// Edge ids per triangle: slot k is the edge (v_k, v_{k+1 mod 3}).
    pub tri_edges: Vec<[u32; 3]>,
    /// The two triangles incident to each edge.
    pub edge_tris: Vec<[u32; 2]>,
    vertex_tri_ptr: Vec<u32>,
    vertex_tri_idx: Vec<u32>,
    pub tri_geom: Vec<TriGeom>,
    steiner: OnceCell<SteinerGraph>,
}

/// Geodesic distances from a source set, sampled at mesh vertices.
/// Distances come from shortest paths in a refined edge-and-chord graph and
/// over-approximate the true surface distance by a small mesh-dependent
/// factor.
#[derive(Clone, Debug)]
pub struct DistanceField {
    pub sources: Vec<u32>,
    pub values: Vec<f64>,
}

/// A per-triangle 2-vector field expressed in each triangle's frame.
#[derive(Clone, Debug)]
pub struct TriangleField {
    pub values: Vec<[f64; 2]>,
}

impl TriangleField {
    pub fn norm(&self, t: usize) -> f64 {
        let v = self.values[t];
        v[0].hypot(v[1])
    }

    pub fn max_norm(&self) -> f64 {
        (0..self.values.len()).fold(0.0, |m, t| m.max(self.norm(t)))
    }
}

fn sub3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross3(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

fn norm3(a: [f64; 3]) -> f64 {
    dot3(a, a).sqrt()
}

fn normalize3(a: [f64; 3]) -> [f64; 3] {
    let n = norm3(a);
    [a[0] / n, a[1] / n, a[2] / n]
}

/// Great-circle distance between unit vectors, robust near coincident and
/// antipodal pairs.
fn arc_distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let chord = norm3(sub3(a, b));
    2.0 * (0.5 * chord).clamp(-1.0, 1.0).asin()
}

/// Point at arc fraction `lam` along the great-circle segment from a to b.
fn slerp3(a: [f64; 3], b: [f64; 3], lam: f64) -> [f64; 3] {
    let omega = arc_distance(a, b);
    if omega < 1e-12 {
        return a;
    }
    let s = omega.sin();
    let (ca, cb) = (((1.0 - lam) * omega).sin() / s, (lam * omega).sin() / s);
    [
        ca * a[0] + cb * b[0],
        ca * a[1] + cb * b[1],
        ca * a[2] + cb * b[2],
    ]
}

impl std::fmt::Debug for SurfaceMesh {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SurfaceMesh")
            .field("kind", &self.kind)
            .field("level", &self.level)
            .field("grid", &self.grid)
            .field("extent", &self.extent)
            .field("vertices", &self.vertices.len())
            .field("triangles", &self.triangles.len())
            .finish_non_exhaustive()
    }
}

impl SurfaceMesh {
    pub fn vertex_count(&self) -> usize {
        self.vertices.len()
    }

    pub fn triangle_count(&self) -> usize {
        self.triangles.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn euler_characteristic(&self) -> i64 {
        self.vertex_count() as i64 - self.edge_count() as i64 + self.triangle_count() as i64
    }

    /// Maximum metric edge length: the resolution scale h.
    pub fn mesh_size(&self) -> f64 {
        self.edge_lengths.iter().cloned().fold(0.0, f64::max)
    }

    pub fn surface_area(&self) -> f64 {
        self.tri_geom.iter().map(|g| g.area).sum()
    }

    pub fn vertex_triangles(&self, v: u32) -> &[u32] {
        let a = self.vertex_tri_ptr[v as usize] as usize;
        let b = self.vertex_tri_ptr[v as usize + 1] as usize;
        &self.vertex_tri_idx[a..b]
    }

    /// One third of the incident triangle area, the lumped mass at a vertex.
    pub fn vertex_dual_area(&self, v: u32) -> f64 {
        self.vertex_triangles(v)
            .iter()
            .map(|&t| self.tri_geom[t as usize].area / 3.0)
            .sum::<f64>()
    }

    /// Maps frame coordinates of triangle `t` to an ambient vector.
    pub fn frame_to_ambient(&self, t: usize, v: [f64; 2]) -> [f64; 3] {
        let f = &self.tri_geom[t].frame;
        [
            v[0] * f[0][0] + v[1] * f[1][0],
            v[0] * f[0][1] + v[1] * f[1][1],
            v[0] * f[0][2] + v[1] * f[1][2],
        ]
    }

    /// Piecewise-linear gradient of a vertex field, one 2-vector per triangle
    /// in that triangle's frame.
    pub fn p1_gradient(&self, field: &[f64]) -> TriangleField {
        assert_eq!(field.len(), self.vertex_count(), "field length mismatch");
        let mut values = Vec::with_capacity(self.triangle_count());
        for (t, tri) in self.triangles.iter().enumerate() {
            let g = &self.tri_geom[t];
            let mut acc = [0.0f64; 2];
            for k in 0..3 {
                let u = field[tri[k] as usize];
                acc[0] += u * g.grad_lambda[k][0];
                acc[1] += u * g.grad_lambda[k][1];
            }
            values.push(acc);
        }
        TriangleField { values }
    }

    /// Integral of a per-triangle density against the cone-metric area.
    pub fn integrate<F: FnMut(usize) -> f64>(&self, mut density: F) -> f64 {
        let mut acc = 0.0;
        for t in 0..self.triangle_count() {
            acc += density(t) * self.tri_geom[t].area;
        }
        acc
    }

    /// Exact surface distance field from a vertex, using the closed-form
    /// ambient metric (great-circle angle on the sphere, minimal-image
    /// Euclidean distance on the torus). Used for smooth concentric banding
    /// in the analysis routines; certification paths use the graph metric.
    pub fn ambient_distance_field(&self, source: u32) -> Vec<f64> {
        let s = self.vertices[source as usize];
        match self.kind {
            SurfaceKind::Sphere => self
                .vertices
                .iter()
                .map(|&v| arc_distance(s, v))
                .collect(),
            SurfaceKind::Torus => {
                let (lx, ly) = self.extent;
                self.vertices
                    .iter()
                    .map(|&v| {
                        let mut dx = (v[0] - s[0]).abs();
                        let mut dy = (v[1] - s[1]).abs();
                        dx = dx.min(lx - dx);
                        dy = dy.min(ly - dy);
                        dx.hypot(dy)
                    })
                    .collect()
            }
        }
    }

    /// For a sphere mesh, the vertex at the antipode of `v`, if present.
    pub fn antipodal_vertex(&self, v: u32) -> Option<u32> {
        if self.kind != SurfaceKind::Sphere {
            return None;
        }
        let target = self.vertices[v as usize];
        let want = [-target[0], -target[1], -target[2]];
        for (i, &x) in self.vertices.iter().enumerate() {
            if norm3(sub3(x, want)) < 1e-9 {
                return Some(i as u32);
            }
        }
        None
    }

    /// Single-source geodesic distance via the refined edge graph.
    pub fn geodesic_distance(&self, source: u32) -> DistanceField {
        self.distance_from_set(&[source])
    }

    /// Multi-source geodesic distance: value at each vertex is the distance
    /// to the nearest source.
    pub fn distance_from_set(&self, sources: &[u32]) -> DistanceField {
        assert!(!sources.is_empty(), "empty source set");
        let graph = self.steiner_graph();
        let values = graph.dijkstra(sources);
        DistanceField {
            sources: sources.to_vec(),
            values: values[..self.vertex_count()].to_vec(),
        }
    }

    fn steiner_graph(&self) -> &SteinerGraph {
        self.steiner.get_or_init(|| SteinerGraph::build(self))
    }
}

// ---------------------------------------------------------------------------
// construction
// ---------------------------------------------------------------------------

/// Metric length of the segment between two vertex ids, given all positions.
type EdgeLengthFn = Box<dyn Fn(&[[f64; 3]], u32, u32) -> f64>;

struct MeshBuilder {
    kind: SurfaceKind,
    level: u32,
    grid: (u32, u32),
    extent: (f64, f64),
    vertices: Vec<[f64; 3]>,
    triangles: Vec<[u32; 3]>,
    /// Metric length per raw triangle corner pair, supplied by the builder.
    edge_length: EdgeLengthFn,
}

impl MeshBuilder {
    fn finish(self) -> SurfaceMesh {
        let nv = self.vertices.len();
        // Rotate each triple so the smallest vertex id leads (orientation
        // preserved); the frame convention depends on this.
        let mut triangles = self.triangles;
        for tri in triangles.iter_mut() {
            let k = (0..3).min_by_key(|&k| tri[k]).unwrap();
            tri.rotate_left(k);
        }
        triangles.sort_unstable();

        let mut edge_map: HashMap<(u32, u32), u32> = HashMap::new();
        let mut edges: Vec<(u32, u32)> = Vec::new();
        for tri in &triangles {
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                edge_map.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edges.len() as u32 - 1
                });
            }
        }
        // Deterministic edge numbering independent of triangle traversal.
        let mut order: Vec<u32> = (0..edges.len() as u32).collect();
        order.sort_unstable_by_key(|&e| edges[e as usize]);
        let mut remap = vec![0u32; edges.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old as usize] = new as u32;
        }
        edges.sort_unstable();
        for v in edge_map.values_mut() {
            *v = remap[*v as usize];
        }

        let edge_lengths: Vec<f64> = edges
            .iter()
            .map(|&(a, b)| (self.edge_length)(&self.vertices, a, b))
            .collect();

        let mut tri_edges = Vec::with_capacity(triangles.len());
        let mut edge_tris = vec![[u32::MAX; 2]; edges.len()];
        for (t, tri) in triangles.iter().enumerate() {
            let mut ids = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let e = edge_map[&(a.min(b), a.max(b))];
                ids[k] = e;
                let slot = &mut edge_tris[e as usize];
                if slot[0] == u32::MAX {
                    slot[0] = t as u32;
                } else {
                    debug_assert_eq!(slot[1], u32::MAX, "edge shared by >2 triangles");
                    slot[1] = t as u32;
                }
            }
            tri_edges.push(ids);
        }
        debug_assert!(edge_tris.iter().all(|s| s[1] != u32::MAX));

        let mut vertex_tri_ptr = vec![0u32; nv + 1];
        for tri in &triangles {
            for &v in tri {
                vertex_tri_ptr[v as usize + 1] += 1;
            }
        }
        for i in 0..nv {
            vertex_tri_ptr[i + 1] += vertex_tri_ptr[i];
        }
        let mut cursor = vertex_tri_ptr.clone();
        let mut vertex_tri_idx = vec![0u32; 3 * triangles.len()];
        for (t, tri) in triangles.iter().enumerate() {
            for &v in tri {
                vertex_tri_idx[cursor[v as usize] as usize] = t as u32;
                cursor[v as usize] += 1;
            }
        }

        let tri_geom = triangles
            .iter()
            .enumerate()
            .map(|(t, tri)| {
                let l01 = edge_lengths[tri_edges[t][0] as usize];
                let l12 = edge_lengths[tri_edges[t][1] as usize];
                let l20 = edge_lengths[tri_edges[t][2] as usize];
                Self::triangle_geometry(&self.vertices, self.kind, self.extent, tri, l01, l12, l20)
            })
            .collect();

        SurfaceMesh {
            kind: self.kind,
            level: self.level,
            grid: self.grid,
            extent: self.extent,
            vertices: self.vertices,
            triangles,
            edges,
            edge_lengths,
            tri_edges,
            edge_tris,
            vertex_tri_ptr,
            vertex_tri_idx,
            tri_geom,
            steiner: OnceCell::new(),
        }
    }

    fn triangle_geometry(
        vertices: &[[f64; 3]],
        kind: SurfaceKind,
        extent: (f64, f64),
        tri: &[u32; 3],
        l01: f64,
        l12: f64,
        l20: f64,
    ) -> TriGeom {
        let p0 = [0.0, 0.0];
        let p1 = [l01, 0.0];
        let x2 = (l01 * l01 + l20 * l20 - l12 * l12) / (2.0 * l01);
        let y2 = (l20 * l20 - x2 * x2).max(0.0).sqrt();
        assert!(
            y2 > 1e-12 * l01,
            "degenerate triangle: lengths {l01} {l12} {l20}"
        );
        let p2 = [x2, y2];
        let area = 0.5 * l01 * y2;
        let rot90 = |v: [f64; 2]| [-v[1], v[0]];
        let scale = |v: [f64; 2], s: f64| [v[0] * s, v[1] * s];
        let diff = |a: [f64; 2], b: [f64; 2]| [a[0] - b[0], a[1] - b[1]];
        let inv2s = 1.0 / (2.0 * area);
        let grad_lambda = [
            scale(rot90(diff(p2, p1)), inv2s),
            scale(rot90(diff(p0, p2)), inv2s),
            scale(rot90(diff(p1, p0)), inv2s),
        ];

        let x0 = vertices[tri[0] as usize];
        let (d1, d2) = match kind {
            SurfaceKind::Sphere => (
                sub3(vertices[tri[1] as usize], x0),
                sub3(vertices[tri[2] as usize], x0),
            ),
            SurfaceKind::Torus => {
                let unwrap = |to: [f64; 3]| {
                    let (lx, ly) = extent;
                    let mut dx = to[0] - x0[0];
                    let mut dy = to[1] - x0[1];
                    if dx > lx / 2.0 {
                        dx -= lx;
                    } else if dx < -lx / 2.0 {
                        dx += lx;
                    }
                    if dy > ly / 2.0 {
                        dy -= ly;
                    } else if dy < -ly / 2.0 {
                        dy += ly;
                    }
                    [dx, dy, 0.0]
                };
                (
                    unwrap(vertices[tri[1] as usize]),
                    unwrap(vertices[tri[2] as usize]),
                )
            }
        };
        let normal = normalize3(cross3(d1, d2));
        let e1 = normalize3(d1);
        let e2 = cross3(normal, e1);

        TriGeom {
            p: [p0, p1, p2],
            grad_lambda,
            area,
            frame: [e1, e2],
        }
    }
}

/// Icosphere: repeated midpoint subdivision of the icosahedron, vertices
/// projected to the unit sphere, edge lengths = great-circle arcs.
pub fn build_sphere(level: u32) -> Result<SurfaceMesh> {
    if level > SPHERE_MAX_LEVEL {
        return Err(MgError::ResourceLimit(format!(
            "sphere subdivision level {level} exceeds maximum {SPHERE_MAX_LEVEL}"
        )));
    }
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let raw: [[f64; 3]; 12] = [
        [-1.0, phi, 0.0],
        [1.0, phi, 0.0],
        [-1.0, -phi, 0.0],
        [1.0, -phi, 0.0],
        [0.0, -1.0, phi],
        [0.0, 1.0, phi],
        [0.0, -1.0, -phi],
        [0.0, 1.0, -phi],
        [phi, 0.0, -1.0],
        [phi, 0.0, 1.0],
        [-phi, 0.0, -1.0],
        [-phi, 0.0, 1.0],
    ];
    let mut vertices: Vec<[f64; 3]> = raw.iter().map(|&v| normalize3(v)).collect();
    let mut triangles: Vec<[u32; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..level {
        let mut midpoint: HashMap<(u32, u32), u32> = HashMap::new();
        let mut next = Vec::with_capacity(triangles.len() * 4);
        for tri in &triangles {
            let mut mid = [0u32; 3];
            for k in 0..3 {
                let (a, b) = (tri[k], tri[(k + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mid[k] = *midpoint.entry(key).or_insert_with(|| {
                    let pa = vertices[a as usize];
                    let pb = vertices[b as usize];
                    vertices.push(normalize3([
                        pa[0] + pb[0],
                        pa[1] + pb[1],
                        pa[2] + pb[2],
                    ]));
                    vertices.len() as u32 - 1
                });
            }
            next.push([tri[0], mid[0], mid[2]]);
            next.push([tri[1], mid[1], mid[0]]);
            next.push([tri[2], mid[2], mid[1]]);
            next.push([mid[0], mid[1], mid[2]]);
        }
        triangles = next;
    }

    Ok(MeshBuilder {
        kind: SurfaceKind::Sphere,
        level,
        grid: (0, 0),
        extent: (0.0, 0.0),
        vertices,
        triangles,
        edge_length: Box::new(|verts, a, b| arc_distance(verts[a as usize], verts[b as usize])),
    }
    .finish())
}

/// Flat torus [0,lx) x [0,ly) on an nx-by-ny grid, each cell split along the
/// (i,j) -> (i+1,j+1) diagonal. Flat metric, Euler characteristic zero.
pub fn build_torus(nx: u32, ny: u32, lx: f64, ly: f64) -> Result<SurfaceMesh> {
    if nx < TORUS_MIN_DIM || ny < TORUS_MIN_DIM {
        return Err(MgError::InvalidConfig(format!(
            "torus grid {nx}x{ny} too small; need at least {TORUS_MIN_DIM} in each direction"
        )));
    }
    if !(lx > 0.0 && ly > 0.0) {
        return Err(MgError::InvalidConfig(format!(
            "torus extents must be positive, got {lx} x {ly}"
        )));
    }
    if (nx as u64) * (ny as u64) > 4_200_000 {
        return Err(MgError::ResourceLimit(format!(
            "torus grid {nx}x{ny} exceeds vertex budget"
        )));
    }
    let hx = lx / nx as f64;
    let hy = ly / ny as f64;
    let mut vertices = Vec::with_capacity((nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            vertices.push([i as f64 * hx, j as f64 * hy, 0.0]);
        }
    }
    let vid = |i: u32, j: u32| (j % ny) * nx + (i % nx);
    let mut triangles = Vec::with_capacity((2 * nx * ny) as usize);
    for j in 0..ny {
        for i in 0..nx {
            let v00 = vid(i, j);
            let v10 = vid(i + 1, j);
            let v01 = vid(i, j + 1);
            let v11 = vid(i + 1, j + 1);
            triangles.push([v00, v10, v11]);
            triangles.push([v00, v11, v01]);
        }
    }

    Ok(MeshBuilder {
        kind: SurfaceKind::Torus,
        level: 0,
        grid: (nx, ny),
        extent: (lx, ly),
        vertices,
        triangles,
        edge_length: Box::new(move |verts, a, b| {
            let pa = verts[a as usize];
            let pb = verts[b as usize];
            let mut dx = (pa[0] - pb[0]).abs();
            let mut dy = (pa[1] - pb[1]).abs();
            dx = dx.min(lx - dx);
            dy = dy.min(ly - dy);
            dx.hypot(dy)
        }),
    }
    .finish())
}

// ---------------------------------------------------------------------------
// shortest-path graph
// ---------------------------------------------------------------------------

/// Shortest-path graph: mesh vertices plus EDGE_SUBDIV-1 interior nodes per
/// edge, connected along edges and by straight chords between nodes on
/// different edges of each flat triangle. Graph distances over-approximate
/// geodesic distances and converge to them under refinement.
struct SteinerGraph {
    node_count: usize,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
    weight: Vec<f64>,
}

impl SteinerGraph {
    fn build(mesh: &SurfaceMesh) -> SteinerGraph {
        let nv = mesh.vertex_count();
        let ne = mesh.edge_count();
        let per_edge = EDGE_SUBDIV - 1;
        let node_count = nv + per_edge * ne;
        let edge_node = |e: usize, k: usize| (nv + e * per_edge + k) as u32; // k in 0..per_edge

        // (node, node, length) with node ids; each undirected link staged once.
        let mut links: Vec<(u32, u32, f64)> = Vec::with_capacity(ne * EDGE_SUBDIV + mesh.triangle_count() * 36);

        for e in 0..ne {
            let (a, b) = mesh.edges[e];
            let seg = mesh.edge_lengths[e] / EDGE_SUBDIV as f64;
            let mut chain = Vec::with_capacity(EDGE_SUBDIV + 1);
            chain.push(a);
            for k in 0..per_edge {
                chain.push(edge_node(e, k));
            }
            chain.push(b);
            for w in chain.windows(2) {
                links.push((w[0], w[1], seg));
            }
        }

        // Chords: per triangle, embed all boundary nodes and connect pairs
        // that do not share a mesh edge. On the sphere, chord lengths are
        // great-circle arcs between the nodes' ambient positions, so a
        // graph path never undershoots the true surface distance. On the
        // flat torus the planar frame embedding is already exact.
        let on_sphere = mesh.kind == SurfaceKind::Sphere;
        for t in 0..mesh.triangle_count() {
            let tri = mesh.triangles[t];
            let geom = &mesh.tri_geom[t];
            // (node id, frame position, ambient position, edge bitmask)
            let mut nodes: Vec<(u32, [f64; 2], [f64; 3], u8)> = Vec::with_capacity(12);
            for k in 0..3 {
                // vertex k lies on triangle edges k and (k+2)%3
                let mask = (1u8 << k) | (1u8 << ((k + 2) % 3));
                nodes.push((tri[k], geom.p[k], mesh.vertices[tri[k] as usize], mask));
            }
            for k in 0..3 {
                let e = mesh.tri_edges[t][k] as usize;
                let (a, b) = mesh.edges[e];
                // corners of this edge within the triangle: k and (k+1)%3
                let (ca, cb) = (k, (k + 1) % 3);
                // orient along the canonical (min,max) direction of the edge
                let (from, to) = if tri[ca] == a { (ca, cb) } else { (cb, ca) };
                let pf = geom.p[from];
                let pt = geom.p[to];
                let (va, vb) = (mesh.vertices[a as usize], mesh.vertices[b as usize]);
                for s in 0..per_edge {
                    let lam = (s + 1) as f64 / EDGE_SUBDIV as f64;
                    let pos = [pf[0] + lam * (pt[0] - pf[0]), pf[1] + lam * (pt[1] - pf[1])];
                    let amb = if on_sphere { slerp3(va, vb, lam) } else { [0.0; 3] };
                    nodes.push((edge_node(e, s), pos, amb, 1u8 << k));
                }
            }
            for i in 0..nodes.len() {
                for j in (i + 1)..nodes.len() {
                    if nodes[i].3 & nodes[j].3 != 0 {
                        continue; // same mesh edge: already chained along it
                    }
                    let d = if on_sphere {
                        arc_distance(nodes[i].2, nodes[j].2)
                    } else {
                        (nodes[i].1[0] - nodes[j].1[0]).hypot(nodes[i].1[1] - nodes[j].1[1])
                    };
                    links.push((nodes[i].0, nodes[j].0, d));
                }
            }
        }

        let mut degree = vec![0u32; node_count + 1];
        for &(a, b, _) in &links {
            degree[a as usize + 1] += 1;
            degree[b as usize + 1] += 1;
        }
        for i in 0..node_count {
            degree[i + 1] += degree[i];
        }
        let row_ptr = degree;
        let total = row_ptr[node_count] as usize;
        let mut col_idx = vec![0u32; total];
        let mut weight = vec![0.0f64; total];
        let mut cursor: Vec<u32> = row_ptr[..node_count].to_vec();
        for &(a, b, w) in &links {
            let ca = cursor[a as usize] as usize;
            col_idx[ca] = b;
            weight[ca] = w;
            cursor[a as usize] += 1;
            let cb = cursor[b as usize] as usize;
            col_idx[cb] = a;
            weight[cb] = w;
            cursor[b as usize] += 1;
        }

        SteinerGraph {
            node_count,
            row_ptr,
            col_idx,
            weight,
        }
    }

    fn dijkstra(&self, sources: &[u32]) -> Vec<f64> {
        #[derive(PartialEq)]
        struct Key(f64);
        impl Eq for Key {}
        impl PartialOrd for Key {
            fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
                Some(self.cmp(other))
            }
        }
        impl Ord for Key {
            fn cmp(&self, other: &Self) -> std::cmp::Ordering {
                self.0.total_cmp(&other.0)
            }
        }

        let mut dist = vec![f64::INFINITY; self.node_count];
        let mut heap: BinaryHeap<(Reverse<Key>, u32)> = BinaryHeap::new();
        for &s in sources {
            dist[s as usize] = 0.0;
            heap.push((Reverse(Key(0.0)), s));
        }
        while let Some((Reverse(Key(d)), n)) = heap.pop() {
            if d > dist[n as usize] {
                continue;
            }
            let a = self.row_ptr[n as usize] as usize;
            let b = self.row_ptr[n as usize + 1] as usize;
            for k in a..b {
                let m = self.col_idx[k] as usize;
                let nd = d + self.weight[k];
                if nd < dist[m] {
                    dist[m] = nd;
                    heap.push((Reverse(Key(nd)), m as u32));
                }
            }
        }
        dist
    }
}
