//! Geometric diagnostics for computed maximal graphs.
//!
//! A spacelike graph u induces the metric g_u = g_M − du⊗du on the surface.
//! This module checks the structural consequences of maximality directly on
//! that metric: u is harmonic in g_u, the graph meets the light cone at each
//! singular point (per-ring gradient profiles approaching slope 1), each
//! punctured end has bounded total conformal modulus (hyperbolic type), and
//! in a g_u-conformal chart the Hopf differential of the inclusion map
//! agrees with the square of the height differential. Everything here is
//! assembled independently of the solver's own residual so it can serve as
//! an oracle for it.

use crate::config::injectivity_guard;
use crate::error::{MgError, Result};
use crate::linsolve::{solve_spd, CsrMatrix};
use crate::mesh::{SurfaceKind, SurfaceMesh};
use crate::solver::{max_gradient, tri_gradient, SingularMaximalGraph};
use serde::{Deserialize, Serialize};

// ---------------------------------------------------------------------------
// induced metric
// ---------------------------------------------------------------------------

/// Per-triangle induced metric g_u = I − (grad u)(grad u)ᵀ in the triangle
/// frame, stored as [g11, g12, g22].
#[derive(Clone, Debug)]
pub struct InducedMetric {
    pub g: Vec<[f64; 3]>,
    /// det(g_u)/det(g_M) per triangle, equal to 1 − |grad u|².
    pub det_ratio: Vec<f64>,
    /// Area stretch factor sqrt(det ratio) per triangle.
    pub w: Vec<f64>,
}

pub fn induced_metric(mesh: &SurfaceMesh, u: &[f64]) -> Result<InducedMetric> {
    let nt = mesh.triangle_count();
    let mut g = Vec::with_capacity(nt);
    let mut det_ratio = Vec::with_capacity(nt);
    let mut w = Vec::with_capacity(nt);
    for t in 0..nt {
        let gr = tri_gradient(mesh, t, u);
        let s2 = gr[0] * gr[0] + gr[1] * gr[1];
        if s2 >= 1.0 {
            return Err(MgError::NotWeaklySpacelike {
                triangle: t,
                grad: s2.sqrt(),
            });
        }
        let entry = [1.0 - gr[0] * gr[0], -gr[0] * gr[1], 1.0 - gr[1] * gr[1]];
        let det = entry[0] * entry[2] - entry[1] * entry[1];
        g.push(entry);
        det_ratio.push(det);
        w.push(det.max(0.0).sqrt());
    }
    Ok(InducedMetric { g, det_ratio, w })
}

impl InducedMetric {
    /// The base metric of the mesh itself (identity in every frame).
    pub fn base(mesh: &SurfaceMesh) -> InducedMetric {
        let nt = mesh.triangle_count();
        InducedMetric {
            g: vec![[1.0, 0.0, 1.0]; nt],
            det_ratio: vec![1.0; nt],
            w: vec![1.0; nt],
        }
    }

    /// Uniform scaling of the metric by lambda > 0 (a conformal change;
    /// moduli are invariant under it).
    pub fn scaled(&self, lambda: f64) -> InducedMetric {
        InducedMetric {
            g: self
                .g
                .iter()
                .map(|m| [lambda * m[0], lambda * m[1], lambda * m[2]])
                .collect(),
            det_ratio: self.det_ratio.iter().map(|d| lambda * lambda * d).collect(),
            w: self.w.iter().map(|w| lambda * w).collect(),
        }
    }

    /// Eigenvalues of the per-triangle matrix (ascending).
    pub fn eigenvalues(&self, t: usize) -> (f64, f64) {
        let [a, b, c] = self.g[t];
        let tr = a + c;
        let disc = ((a - c) * (a - c) + 4.0 * b * b).sqrt();
        (0.5 * (tr - disc), 0.5 * (tr + disc))
    }

    /// Conductance matrix sqrt(det g)·g⁻¹ used by all Laplace solves in
    /// this metric, as [k11, k12, k22].
    fn conductance(&self, t: usize) -> [f64; 3] {
        let [a, b, c] = self.g[t];
        let det = (a * c - b * b).max(1e-300);
        let s = det.sqrt();
        [c / s, -b / s, a / s]
    }
}

fn quad_form(k: &[f64; 3], p: [f64; 2], q: [f64; 2]) -> f64 {
    k[0] * p[0] * q[0] + k[1] * (p[0] * q[1] + p[1] * q[0]) + k[2] * p[1] * q[1]
}

// ---------------------------------------------------------------------------
// harmonicity oracle
// ---------------------------------------------------------------------------

#[derive(Clone, Debug)]
pub struct HarmonicityReport {
    /// Dual-area-normalized residual of the g_u-Laplacian applied to u;
    /// NaN outside the interior.
    pub values: Vec<f64>,
    pub interior: Vec<u32>,
    pub sup: f64,
    /// Dual-area-weighted RMS of the residual over the interior. Refinement
    /// comparisons should use this: pointwise residuals of interpolated
    /// smooth fields do not converge at irregular vertices (the star pattern
    /// there is scale-self-similar), while integral norms do.
    pub rms: f64,
}

/// Assembles the piecewise-linear Laplace–Beltrami operator of the induced
/// metric g_u and applies it to u, reporting the dual-area-normalized
/// residual at interior vertices of the triangle set. A maximal graph's
/// height function is harmonic in its own induced metric, so this is an
/// independent consistency oracle: it vanishes on solutions and is O(h) on
/// interpolants of smooth non-solutions.
pub fn harmonicity_residual(mesh: &SurfaceMesh, tris: &[u32], u: &[f64]) -> Result<HarmonicityReport> {
    let nv = mesh.vertex_count();
    let mut in_set = vec![false; mesh.triangle_count()];
    for &t in tris {
        in_set[t as usize] = true;
    }
    let mut acc = vec![0.0f64; nv];
    let mut dual = vec![0.0f64; nv];
    for &t in tris {
        let t = t as usize;
        let geom = &mesh.tri_geom[t];
        let gr = tri_gradient(mesh, t, u);
        let s2 = gr[0] * gr[0] + gr[1] * gr[1];
        if s2 >= 1.0 {
            return Err(MgError::NotWeaklySpacelike {
                triangle: t,
                grad: s2.sqrt(),
            });
        }
        let g = [1.0 - gr[0] * gr[0], -gr[0] * gr[1], 1.0 - gr[1] * gr[1]];
        let det = g[0] * g[2] - g[1] * g[1];
        let s = det.sqrt();
        let k = [g[2] / s, -g[1] / s, g[0] / s];
        let tri = &mesh.triangles[t];
        for a in 0..3 {
            let va = tri[a] as usize;
            let mut row = 0.0;
            for b in 0..3 {
                let entry = geom.area * quad_form(&k, geom.grad_lambda[a], geom.grad_lambda[b]);
                row += entry * u[tri[b] as usize];
            }
            acc[va] += row;
            dual[va] += geom.area * s / 3.0;
        }
    }
    let mut values = vec![f64::NAN; nv];
    let mut interior = Vec::new();
    let mut sup = 0.0f64;
    let mut wsum = 0.0f64;
    let mut wsq = 0.0f64;
    for v in 0..nv {
        if dual[v] == 0.0 {
            continue;
        }
        if mesh
            .vertex_triangles(v as u32)
            .iter()
            .all(|&t| in_set[t as usize])
        {
            let r = acc[v] / dual[v];
            values[v] = r;
            interior.push(v as u32);
            sup = sup.max(r.abs());
            wsum += dual[v];
            wsq += dual[v] * r * r;
        }
    }
    let rms = if wsum > 0.0 { (wsq / wsum).sqrt() } else { 0.0 };
    Ok(HarmonicityReport {
        values,
        interior,
        sup,
        rms,
    })
}

// ---------------------------------------------------------------------------
// cone tangency
// ---------------------------------------------------------------------------

/// Per-ring gradient maxima around a singular vertex. Rings are concentric
/// distance bands (r/2, r] with radii halving toward the vertex; the profile
/// of a light-cone point climbs to 1 as the rings shrink.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConeProfile {
    pub center: u32,
    pub height: f64,
    /// Outer radius of each ring, strictly decreasing.
    pub radii: Vec<f64>,
    pub ring_max: Vec<f64>,
    /// Max |grad u| over the innermost nonempty ring.
    pub terminal: f64,
    /// True when the profile stopped at an empty ring wider than the mesh
    /// scale (resolution ran out before the requested depth).
    pub truncated: bool,
    /// True when u − height has a strict constant sign on the innermost
    /// ring's vertices (u attains a strict local extremum at the center).
    pub local_extremum: bool,
    /// With local_extremum: true when the center is a local maximum.
    pub is_max: bool,
}

/// Profile of an arbitrary vertex field around `center` with outermost ring
/// radius `r0`, at most `max_rings` rings.
pub fn cone_profile_from_field(
    mesh: &SurfaceMesh,
    u: &[f64],
    center: u32,
    height: f64,
    r0: f64,
    max_rings: usize,
) -> Result<ConeProfile> {
    if !(r0 > 0.0) {
        return Err(MgError::InvalidConfig("ring radius must be positive".into()));
    }
    let dist = mesh.ambient_distance_field(center);
    let h = mesh.mesh_size();
    let nt = mesh.triangle_count();
    let bary: Vec<f64> = (0..nt)
        .map(|t| {
            mesh.triangles[t]
                .iter()
                .map(|&v| dist[v as usize])
                .sum::<f64>()
                / 3.0
        })
        .collect();

    let mut radii = Vec::new();
    let mut ring_max = Vec::new();
    let mut innermost: Vec<u32> = Vec::new();
    let mut truncated = false;
    for k in 0..max_rings {
        let hi = r0 * 0.5f64.powi(k as i32);
        let lo = 0.5 * hi;
        // stop at the resolution floor: a band thinner than a couple of mesh
        // sizes holds too few triangles to carry a meaningful gradient
        // statistic (but always report at least one ring)
        if hi < 2.0 * h && !radii.is_empty() {
            break;
        }
        let ring: Vec<u32> = (0..nt as u32)
            .filter(|&t| bary[t as usize] > lo && bary[t as usize] <= hi)
            .collect();
        if ring.is_empty() {
            // an empty band above the floor means r0 overshot the domain
            truncated = hi > 2.0 * h;
            break;
        }
        radii.push(hi);
        ring_max.push(max_gradient(mesh, &ring, u));
        innermost = ring;
    }
    if radii.is_empty() {
        return Err(MgError::InvalidConfig(format!(
            "no triangles within radius {r0} of vertex {center}"
        )));
    }

    let mut pos = 0usize;
    let mut neg = 0usize;
    for &t in &innermost {
        for &v in &mesh.triangles[t as usize] {
            if v == center {
                continue;
            }
            let d = u[v as usize] - height;
            if d > 0.0 {
                pos += 1;
            } else if d < 0.0 {
                neg += 1;
            }
        }
    }
    let local_extremum = (pos == 0) != (neg == 0);
    Ok(ConeProfile {
        center,
        height,
        terminal: *ring_max.last().unwrap(),
        radii,
        ring_max,
        truncated,
        local_extremum,
        is_max: neg > 0 && pos == 0,
    })
}

/// Cone profile of singularity `i` of a computed graph, ring radii starting
/// at that singularity's level-0 disk radius.
pub fn cone_tangency_profile(
    graph: &SingularMaximalGraph,
    i: usize,
    max_rings: usize,
) -> Result<ConeProfile> {
    let p = graph
        .config
        .points
        .get(i)
        .ok_or_else(|| MgError::InvalidConfig(format!("no singularity #{i}")))?;
    let r0 = singularity_base_radius(graph, i);
    cone_profile_from_field(&graph.mesh, &graph.values, p.vertex, p.t, r0, max_rings)
}

fn singularity_base_radius(graph: &SingularMaximalGraph, i: usize) -> f64 {
    let m = graph.config.len();
    let guard = injectivity_guard(&graph.mesh);
    if m == 1 {
        return guard;
    }
    let min_pair = (0..m)
        .filter(|&j| j != i)
        .map(|j| graph.certificate.pair_dist[i][j])
        .fold(f64::INFINITY, f64::min);
    (0.25 * min_pair).min(guard)
}

// ---------------------------------------------------------------------------
// annuli and conformal moduli
// ---------------------------------------------------------------------------

/// A combinatorial annulus: a connected triangle band with exactly two
/// boundary cycles.
#[derive(Clone, Debug)]
pub struct Annulus {
    pub triangles: Vec<u32>,
    pub inner_loop: Vec<u32>,
    pub outer_loop: Vec<u32>,
    pub center: u32,
    pub r_inner: f64,
    pub r_outer: f64,
}

/// Extracts the band r_in <= dist <= r_out around a vertex, repaired so each
/// vertex's triangle fan is connected and the boundary splits into exactly
/// two cycles.
pub fn extract_annulus(
    mesh: &SurfaceMesh,
    center: u32,
    r_in: f64,
    r_out: f64,
) -> Result<Annulus> {
    if !(0.0 < r_in && r_in < r_out) {
        return Err(MgError::InvalidConfig(format!(
            "annulus radii must satisfy 0 < r_in < r_out, got [{r_in}, {r_out}]"
        )));
    }
    let dist = mesh.ambient_distance_field(center);
    let h = mesh.mesh_size();
    let nt = mesh.triangle_count();
    let inside = |t: usize, lo: f64, hi: f64| {
        mesh.triangles[t]
            .iter()
            .all(|&v| dist[v as usize] >= lo && dist[v as usize] <= hi)
    };
    let mut in_set: Vec<bool> = (0..nt).map(|t| inside(t, r_in, r_out)).collect();

    // connected component through the triangle whose barycenter is nearest
    // the band middle
    let mid = 0.5 * (r_in + r_out);
    let bary = |t: usize| -> f64 {
        mesh.triangles[t]
            .iter()
            .map(|&v| dist[v as usize])
            .sum::<f64>()
            / 3.0
    };
    let seed = (0..nt)
        .filter(|&t| in_set[t])
        .min_by(|&a, &b| {
            (bary(a) - mid)
                .abs()
                .total_cmp(&(bary(b) - mid).abs())
        })
        .ok_or_else(|| {
            MgError::InvalidConfig(format!("empty annulus band [{r_in}, {r_out}]"))
        })?;
    let mut keep = vec![false; nt];
    let mut stack = vec![seed as u32];
    keep[seed] = true;
    while let Some(t) = stack.pop() {
        for &e in &mesh.tri_edges[t as usize] {
            for &s in &mesh.edge_tris[e as usize] {
                if in_set[s as usize] && !keep[s as usize] {
                    keep[s as usize] = true;
                    stack.push(s);
                }
            }
        }
    }
    in_set = keep;

    // repair pinched vertices (two fans meeting at a vertex) by admitting
    // slightly out-of-band triangles
    for _round in 0..20 {
        let pinched = pinched_vertices(mesh, &in_set);
        if pinched.is_empty() {
            break;
        }
        let mut grew = false;
        for v in pinched {
            for &t in mesh.vertex_triangles(v) {
                if !in_set[t as usize]
                    && inside(t as usize, r_in - 0.75 * h, r_out + 0.75 * h)
                {
                    in_set[t as usize] = true;
                    grew = true;
                }
            }
        }
        if !grew {
            return Err(MgError::InvalidTopology(format!(
                "annulus band [{r_in}, {r_out}] around vertex {center} cannot be \
                 repaired to a manifold band"
            )));
        }
    }
    if !pinched_vertices(mesh, &in_set).is_empty() {
        return Err(MgError::InvalidTopology(
            "annulus band still pinched after repair".into(),
        ));
    }

    let triangles: Vec<u32> = (0..nt as u32).filter(|&t| in_set[t as usize]).collect();

    // Euler characteristic must be 0 for an annulus
    let mut vset = std::collections::BTreeSet::new();
    let mut eset = std::collections::BTreeSet::new();
    for &t in &triangles {
        for &v in &mesh.triangles[t as usize] {
            vset.insert(v);
        }
        for &e in &mesh.tri_edges[t as usize] {
            eset.insert(e);
        }
    }
    let chi = vset.len() as i64 - eset.len() as i64 + triangles.len() as i64;
    if chi != 0 {
        return Err(MgError::InvalidTopology(format!(
            "band [{r_in}, {r_out}] around vertex {center} has Euler characteristic \
             {chi}, expected 0 (annulus)"
        )));
    }

    let mut cycles = boundary_cycles(mesh, &in_set)?;
    if cycles.len() != 2 {
        return Err(MgError::InvalidTopology(format!(
            "band [{r_in}, {r_out}] has {} boundary cycles, expected 2",
            cycles.len()
        )));
    }
    let mean_dist = |c: &[u32]| c.iter().map(|&v| dist[v as usize]).sum::<f64>() / c.len() as f64;
    cycles.sort_by(|a, b| mean_dist(a).total_cmp(&mean_dist(b)));
    let inner_loop = cycles.remove(0);
    let outer_loop = cycles.remove(0);

    Ok(Annulus {
        triangles,
        inner_loop,
        outer_loop,
        center,
        r_inner: r_in,
        r_outer: r_out,
    })
}

/// Vertices whose in-set triangle fan is disconnected.
fn pinched_vertices(mesh: &SurfaceMesh, in_set: &[bool]) -> Vec<u32> {
    let mut out = Vec::new();
    for v in 0..mesh.vertex_count() as u32 {
        let star: Vec<u32> = mesh
            .vertex_triangles(v)
            .iter()
            .copied()
            .filter(|&t| in_set[t as usize])
            .collect();
        if star.len() < 2 {
            continue;
        }
        // union-find over the star joining triangles that share an edge
        let mut parent: Vec<usize> = (0..star.len()).collect();
        fn find(p: &mut Vec<usize>, i: usize) -> usize {
            if p[i] != i {
                let r = find(p, p[i]);
                p[i] = r;
            }
            p[i]
        }
        for i in 0..star.len() {
            for j in i + 1..star.len() {
                let shares = mesh.tri_edges[star[i] as usize]
                    .iter()
                    .any(|e| mesh.tri_edges[star[j] as usize].contains(e));
                if shares {
                    let (a, b) = (find(&mut parent, i), find(&mut parent, j));
                    parent[a] = b;
                }
            }
        }
        let root0 = find(&mut parent, 0);
        if (1..star.len()).any(|i| find(&mut parent, i) != root0) {
            out.push(v);
        }
    }
    out
}

/// Boundary cycles of a triangle set, each walked deterministically from its
/// smallest vertex id.
fn boundary_cycles(mesh: &SurfaceMesh, in_set: &[bool]) -> Result<Vec<Vec<u32>>> {
    let mut nbrs: std::collections::BTreeMap<u32, Vec<u32>> = std::collections::BTreeMap::new();
    for (e, &(a, b)) in mesh.edges.iter().enumerate() {
        let [t0, t1] = mesh.edge_tris[e];
        let c = in_set[t0 as usize] as u8 + in_set[t1 as usize] as u8;
        if c == 1 {
            nbrs.entry(a).or_default().push(b);
            nbrs.entry(b).or_default().push(a);
        }
    }
    for (v, n) in &nbrs {
        if n.len() != 2 {
            return Err(MgError::InvalidTopology(format!(
                "boundary vertex {v} has {} boundary edges, expected 2",
                n.len()
            )));
        }
    }
    let mut cycles = Vec::new();
    let mut visited: std::collections::BTreeSet<u32> = std::collections::BTreeSet::new();
    let starts: Vec<u32> = nbrs.keys().copied().collect();
    for &s in &starts {
        if visited.contains(&s) {
            continue;
        }
        let mut cycle = vec![s];
        visited.insert(s);
        let mut prev = s;
        let mut cur = *nbrs[&s].iter().min().unwrap();
        while cur != s {
            visited.insert(cur);
            cycle.push(cur);
            let n = &nbrs[&cur];
            let next = if n[0] == prev { n[1] } else { n[0] };
            prev = cur;
            cur = next;
        }
        cycles.push(cycle);
    }
    Ok(cycles)
}

#[derive(Clone, Debug)]
pub struct ModulusReport {
    /// Conformal modulus 1/E: log(R/r)/(2π) for a round annulus.
    pub modulus: f64,
    /// Dirichlet energy of the level function in the given metric.
    pub energy: f64,
    /// Level function, 0 on the inner loop, 1 on the outer; NaN outside.
    pub psi: Vec<f64>,
}

/// Conformal modulus of an annulus in a metric: solves the metric's Laplace
/// problem with level values 0/1 on the loops and returns 1/energy. The
/// result depends only on the conformal class (it is invariant under scaling
/// the metric).
pub fn annulus_modulus(
    mesh: &SurfaceMesh,
    metric: Option<&InducedMetric>,
    ann: &Annulus,
) -> Result<ModulusReport> {
    let base;
    let metric = match metric {
        Some(m) => m,
        None => {
            base = InducedMetric::base(mesh);
            &base
        }
    };
    let nv = mesh.vertex_count();
    let mut pinned = vec![false; nv];
    let mut psi = vec![f64::NAN; nv];
    for &v in &ann.inner_loop {
        pinned[v as usize] = true;
        psi[v as usize] = 0.0;
    }
    for &v in &ann.outer_loop {
        pinned[v as usize] = true;
        psi[v as usize] = 1.0;
    }

    let mut free_index = vec![-1i64; nv];
    let mut free = Vec::new();
    for &t in &ann.triangles {
        for &v in &mesh.triangles[t as usize] {
            if !pinned[v as usize] && free_index[v as usize] < 0 {
                free_index[v as usize] = free.len() as i64;
                free.push(v);
            }
        }
    }
    if free.is_empty() {
        return Err(MgError::InvalidTopology(
            "annulus has no interior vertices; band too thin for a modulus".into(),
        ));
    }

    let mut edges = Vec::new();
    for &t in &ann.triangles {
        let tri = &mesh.triangles[t as usize];
        for a in 0..3 {
            let fa = free_index[tri[a] as usize];
            let fb = free_index[tri[(a + 1) % 3] as usize];
            if fa >= 0 && fb >= 0 {
                edges.push((fa as u32, fb as u32));
            }
        }
    }
    let mut mat = CsrMatrix::from_edges(free.len(), edges.into_iter());
    let mut rhs = vec![0.0f64; free.len()];
    for &t in &ann.triangles {
        let tri = &mesh.triangles[t as usize];
        let geom = &mesh.tri_geom[t as usize];
        let k = metric.conductance(t as usize);
        for a in 0..3 {
            let fa = free_index[tri[a] as usize];
            if fa < 0 {
                continue;
            }
            for b in 0..3 {
                let entry =
                    geom.area * quad_form(&k, geom.grad_lambda[a], geom.grad_lambda[b]);
                let fb = free_index[tri[b] as usize];
                if fb >= 0 {
                    mat.add(fa as u32, fb as u32, entry);
                } else if pinned[tri[b] as usize] {
                    rhs[fa as usize] -= entry * psi[tri[b] as usize];
                }
            }
        }
    }
    let out = solve_spd(&mat, &rhs, 1e-12, 40 * free.len() + 4000)?;
    for (i, &v) in free.iter().enumerate() {
        psi[v as usize] = out.x[i];
    }

    let mut energy = 0.0;
    for &t in &ann.triangles {
        let geom = &mesh.tri_geom[t as usize];
        let k = metric.conductance(t as usize);
        let gp = tri_gradient(mesh, t as usize, &psi);
        energy += geom.area * quad_form(&k, gp, gp);
    }
    if !(energy > 0.0) {
        return Err(MgError::InvalidTopology(
            "degenerate annulus: zero Dirichlet energy".into(),
        ));
    }
    Ok(ModulusReport {
        modulus: 1.0 / energy,
        energy,
        psi,
    })
}

// ---------------------------------------------------------------------------
// conformal chart
// ---------------------------------------------------------------------------

/// Approximate conformal coordinates (x, y) on an annulus: x is the scaled
/// level function, y the scaled harmonic conjugate obtained by integrating
/// conductance fluxes across a dual spanning tree. y winds once around the
/// annulus with period 2π; its vertex values wrap across an internal cut.
#[derive(Clone, Debug)]
pub struct AnnulusChart {
    pub annulus: Annulus,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    /// y-period of the chart (the wrap amount of y across the cut).
    pub period: f64,
    /// Conjugate period divided by the level-function energy; 1 up to
    /// floating-point and linear-solver error.
    pub period_ratio: f64,
    pub modulus: f64,
    pub energy: f64,
    /// Sup over triangles of |grad y − rot(grad x)| with the metric-adapted
    /// rotation; the chart's Cauchy–Riemann defect.
    pub cr_residual: f64,
}

struct TriangleLookup {
    index: Vec<i64>,
}

impl TriangleLookup {
    fn new(nt: usize, tris: &[u32]) -> TriangleLookup {
        let mut index = vec![-1i64; nt];
        for (i, &t) in tris.iter().enumerate() {
            index[t as usize] = i as i64;
        }
        TriangleLookup { index }
    }
    fn get(&self, t: u32) -> Option<usize> {
        let i = self.index[t as usize];
        (i >= 0).then_some(i as usize)
    }
}

/// Per-triangle frame gradient of the chart y-coordinate, unwrapped across
/// the cut so the three vertex values differ by less than half a period.
/// Offset of triangle `t`'s centroid from vertex `v`, in the tangent frame
/// at `v` (wrap-aware on the torus).
fn centroid_offset(mesh: &SurfaceMesh, t: usize, v: u32) -> [f64; 2] {
    let p = mesh.vertices[v as usize];
    match mesh.kind {
        SurfaceKind::Torus => {
            let (lx, ly) = mesh.extent;
            let wrap = |d: f64, l: f64| d - l * (d / l).round();
            let mut dx = 0.0;
            let mut dy = 0.0;
            for &w in &mesh.triangles[t] {
                let q = mesh.vertices[w as usize];
                dx += wrap(q[0] - p[0], lx);
                dy += wrap(q[1] - p[1], ly);
            }
            [dx / 3.0, dy / 3.0]
        }
        SurfaceKind::Sphere => {
            let (e1, e2) = vertex_frame(mesh, v);
            let mut c = [0.0f64; 3];
            for &w in &mesh.triangles[t] {
                let q = mesh.vertices[w as usize];
                c[0] += q[0];
                c[1] += q[1];
                c[2] += q[2];
            }
            let d = [c[0] / 3.0 - p[0], c[1] / 3.0 - p[1], c[2] / 3.0 - p[2]];
            [dot3(e1, d), dot3(e2, d)]
        }
    }
}

/// Weighted affine fit evaluated at the origin, for samples
/// (offset, value, weight). Falls back to the weighted mean when the
/// offsets do not span the plane.
fn fit_vertex_value(rows: &[([f64; 2], f64, f64)]) -> f64 {
    let mut a = [[0.0f64; 3]; 3];
    let mut b = [0.0f64; 3];
    for &(d, val, w) in rows {
        let basis = [1.0, d[0], d[1]];
        for i in 0..3 {
            for j in 0..3 {
                a[i][j] += w * basis[i] * basis[j];
            }
            b[i] += w * basis[i] * val;
        }
    }
    let mean = b[0] / a[0][0];
    let mut m = a;
    let mut rhs = b;
    for col in 0..3 {
        let (mut piv, mut at) = (m[col][col].abs(), col);
        for r in col + 1..3 {
            if m[r][col].abs() > piv {
                piv = m[r][col].abs();
                at = r;
            }
        }
        let scale = (0..3).map(|r| m[r][col].abs()).fold(0.0f64, f64::max);
        if piv <= 1e-9 * scale.max(1e-300) || piv == 0.0 {
            return mean;
        }
        m.swap(col, at);
        rhs.swap(col, at);
        for r in 0..3 {
            if r == col {
                continue;
            }
            let f = m[r][col] / m[col][col];
            for c in col..3 {
                m[r][c] -= f * m[col][c];
            }
            rhs[r] -= f * rhs[col];
        }
    }
    let fit = rhs[0] / m[0][0];
    if fit.is_finite() {
        fit
    } else {
        mean
    }
}

pub fn chart_y_gradient(mesh: &SurfaceMesh, chart: &AnnulusChart, t: usize) -> [f64; 2] {
    let geom = &mesh.tri_geom[t];
    let tri = &mesh.triangles[t];
    let raw: Vec<f64> = tri.iter().map(|&v| chart.y[v as usize]).collect();
    let anchor = raw[0];
    let p = chart.period;
    let mut g = [0.0f64; 2];
    for k in 0..3 {
        let mut val = raw[k];
        if p > 0.0 {
            val -= p * ((val - anchor) / p).round();
        }
        g[0] += val * geom.grad_lambda[k][0];
        g[1] += val * geom.grad_lambda[k][1];
    }
    g
}

pub fn build_annulus_chart(
    mesh: &SurfaceMesh,
    metric: Option<&InducedMetric>,
    ann: &Annulus,
) -> Result<AnnulusChart> {
    let base;
    let metric_ref = match metric {
        Some(m) => m,
        None => {
            base = InducedMetric::base(mesh);
            &base
        }
    };
    let report = annulus_modulus(mesh, Some(metric_ref), ann)?;
    let psi = &report.psi;
    let energy = report.energy;

    // conjugate jump across each interior edge: the conductance flux of psi,
    // oriented from edge_tris[0] to edge_tris[1]
    let lookup = TriangleLookup::new(mesh.triangle_count(), &ann.triangles);
    let nt_local = ann.triangles.len();
    let mut jump = vec![0.0f64; mesh.edge_count()];
    let mut interior_edge = vec![false; mesh.edge_count()];
    for (e, &(a, b)) in mesh.edges.iter().enumerate() {
        let [t0, t1] = mesh.edge_tris[e];
        if lookup.get(t0).is_none() || lookup.get(t1).is_none() {
            continue;
        }
        interior_edge[e] = true;
        // half-weight from each incident triangle
        let mut weight = 0.0;
        for &t in &[t0, t1] {
            let tri = &mesh.triangles[t as usize];
            let geom = &mesh.tri_geom[t as usize];
            let k = metric_ref.conductance(t as usize);
            let ia = tri.iter().position(|&v| v == a).unwrap();
            let ib = tri.iter().position(|&v| v == b).unwrap();
            weight -= geom.area * quad_form(&k, geom.grad_lambda[ia], geom.grad_lambda[ib]);
        }
        // flux through the edge, signed by the (t0 -> t1, a -> b) convention
        let sign = crossing_sign(mesh, e, a, b);
        jump[e] = sign * weight * (psi[b as usize] - psi[a as usize]);
    }

    // integrate over a dual spanning tree
    let mut theta = vec![f64::NAN; nt_local];
    theta[0] = 0.0;
    let mut in_tree = vec![false; mesh.edge_count()];
    let mut queue = std::collections::VecDeque::from([ann.triangles[0]]);
    while let Some(t) = queue.pop_front() {
        let li = lookup.get(t).unwrap();
        for &e in &mesh.tri_edges[t as usize] {
            if !interior_edge[e as usize] {
                continue;
            }
            let [t0, t1] = mesh.edge_tris[e as usize];
            let other = if t0 == t { t1 } else { t0 };
            let lo = lookup.get(other).unwrap();
            if theta[lo].is_nan() {
                let dir = if t0 == t { 1.0 } else { -1.0 };
                theta[lo] = theta[li] + dir * jump[e as usize];
                in_tree[e as usize] = true;
                queue.push_back(other);
            }
        }
    }
    if theta.iter().any(|v| v.is_nan()) {
        return Err(MgError::InvalidTopology(
            "annulus triangles are not edge-connected".into(),
        ));
    }

    // the non-tree mismatches are 0 on contractible cycles and ±period on
    // the essential one
    let mut period = 0.0f64;
    for e in 0..mesh.edge_count() {
        if !interior_edge[e] || in_tree[e] {
            continue;
        }
        let [t0, t1] = mesh.edge_tris[e];
        let (l0, l1) = (lookup.get(t0).unwrap(), lookup.get(t1).unwrap());
        let mismatch = theta[l1] - theta[l0] - jump[e];
        if mismatch.abs() > period.abs() {
            period = mismatch;
        }
    }
    if period.abs() < 1e-14 {
        return Err(MgError::InvalidTopology(
            "annulus chart has no conjugate period; band is not an annulus".into(),
        ));
    }
    let period_ratio = period.abs() / energy;

    // Vertex y-values: affine least-squares fit of the incident triangle
    // conjugates over each vertex star, unwrapped relative to the first
    // incident triangle. A plain star average would bias every vertex whose
    // star is clipped by the annulus boundary; the affine fit stays exact
    // for affine conjugates regardless of the star's shape.
    let nv = mesh.vertex_count();
    let mut y = vec![f64::NAN; nv];
    let p_abs = period.abs();
    let mut rows: Vec<([f64; 2], f64, f64)> = Vec::new();
    for v in 0..nv as u32 {
        rows.clear();
        let mut anchor = f64::NAN;
        for &t in mesh.vertex_triangles(v) {
            if let Some(li) = lookup.get(t) {
                let mut val = theta[li];
                if anchor.is_nan() {
                    anchor = val;
                } else {
                    val -= p_abs * ((val - anchor) / p_abs).round();
                }
                rows.push((
                    centroid_offset(mesh, t as usize, v),
                    val,
                    mesh.tri_geom[t as usize].area,
                ));
            }
        }
        if !rows.is_empty() {
            y[v as usize] = fit_vertex_value(&rows);
        }
    }

    // scale: y-period becomes 2π, x = same scale times psi
    let sigma = std::f64::consts::TAU / p_abs;
    let orient = period.signum();
    let mut x = vec![f64::NAN; nv];
    for v in 0..nv {
        if !psi[v].is_nan() {
            x[v] = sigma * psi[v];
        }
        if !y[v].is_nan() {
            y[v] *= sigma * orient;
        }
    }

    let mut chart = AnnulusChart {
        annulus: ann.clone(),
        x,
        y,
        period: std::f64::consts::TAU,
        period_ratio,
        modulus: report.modulus,
        energy,
        cr_residual: 0.0,
    };

    // The dual integration fixes y only up to sign: the triangle frames are
    // built from vertex order, and nothing ties their handedness to the
    // direction the conjugate winds. Pick the sign that aligns grad y with
    // the conductance rotation of grad x, then record the defect.
    let mut align = 0.0f64;
    for &t in &ann.triangles {
        let gx = tri_gradient(mesh, t as usize, &chart.x);
        let gy = chart_y_gradient(mesh, &chart, t as usize);
        let k = metric_ref.conductance(t as usize);
        let kv = [k[0] * gx[0] + k[1] * gx[1], k[1] * gx[0] + k[2] * gx[1]];
        align += mesh.tri_geom[t as usize].area * (gy[0] * -kv[1] + gy[1] * kv[0]);
    }
    if align < 0.0 {
        for v in chart.y.iter_mut() {
            if !v.is_nan() {
                *v = -*v;
            }
        }
    }

    // The dual-tree integration leaves a per-triangle offset that vertex
    // sampling cannot remove where the star is clipped by the band boundary.
    // Project onto the closest vertex field with the same winding: solve
    //   Laplace(phi) = div(rot(K grad x) - grad y)
    // for a single-valued correction phi and add it to y. When an exact
    // conjugate exists this recovers it to solver precision.
    {
        let mut local_index = vec![-1i64; nv];
        let mut local = Vec::new();
        for &t in &ann.triangles {
            for &v in &mesh.triangles[t as usize] {
                if local_index[v as usize] < 0 {
                    local_index[v as usize] = local.len() as i64;
                    local.push(v);
                }
            }
        }
        // pin the first vertex: phi is only defined up to a constant
        local_index[local[0] as usize] = -1;
        let free: Vec<u32> = local[1..].to_vec();
        let mut renum = vec![-1i64; nv];
        for (i, &v) in free.iter().enumerate() {
            renum[v as usize] = i as i64;
        }
        let mut edges = Vec::new();
        for &t in &ann.triangles {
            let tri = &mesh.triangles[t as usize];
            for a in 0..3 {
                let fa = renum[tri[a] as usize];
                let fb = renum[tri[(a + 1) % 3] as usize];
                if fa >= 0 && fb >= 0 {
                    edges.push((fa as u32, fb as u32));
                }
            }
        }
        let mut mat = CsrMatrix::from_edges(free.len(), edges.into_iter());
        let mut rhs = vec![0.0f64; free.len()];
        for &t in &ann.triangles {
            let tri = &mesh.triangles[t as usize];
            let geom = &mesh.tri_geom[t as usize];
            let gx = tri_gradient(mesh, t as usize, &chart.x);
            let gy = chart_y_gradient(mesh, &chart, t as usize);
            let k = metric_ref.conductance(t as usize);
            let kv = [k[0] * gx[0] + k[1] * gx[1], k[1] * gx[0] + k[2] * gx[1]];
            let defect = [-kv[1] - gy[0], kv[0] - gy[1]];
            for a in 0..3 {
                let fa = renum[tri[a] as usize];
                if fa < 0 {
                    continue;
                }
                let gla = geom.grad_lambda[a];
                rhs[fa as usize] += geom.area * (defect[0] * gla[0] + defect[1] * gla[1]);
                for b in 0..3 {
                    let fb = renum[tri[b] as usize];
                    if fb >= 0 {
                        let glb = geom.grad_lambda[b];
                        let entry = geom.area * (gla[0] * glb[0] + gla[1] * glb[1]);
                        mat.add(fa as u32, fb as u32, entry);
                    }
                }
            }
        }
        let out = solve_spd(&mat, &rhs, 1e-12, 40 * free.len() + 4000)?;
        for (i, &v) in free.iter().enumerate() {
            chart.y[v as usize] += out.x[i];
        }
    }

    // Cauchy-Riemann defect: grad y should equal the conductance rotation of
    // grad x. Triangles touching the pinned rims are excluded: forcing the
    // equipotential onto a zigzag vertex cycle leaves an O(1) staircase
    // artifact in that single layer which says nothing about the chart's
    // interior quality.
    let mut rim = vec![false; nv];
    for &v in ann.inner_loop.iter().chain(&ann.outer_loop) {
        rim[v as usize] = true;
    }
    let mut worst = 0.0f64;
    for &t in &ann.triangles {
        if mesh.triangles[t as usize].iter().any(|&v| rim[v as usize]) {
            continue;
        }
        let gx = tri_gradient(mesh, t as usize, &chart.x);
        let gy = chart_y_gradient(mesh, &chart, t as usize);
        let k = metric_ref.conductance(t as usize);
        // rot(v) = sqrt(det g) g^{-1} applied after a quarter turn:
        // (K v) rotated, with K the conductance matrix
        let kv = [k[0] * gx[0] + k[1] * gx[1], k[1] * gx[0] + k[2] * gx[1]];
        let rot = [-kv[1], kv[0]];
        let d = ((gy[0] - rot[0]).powi(2) + (gy[1] - rot[1]).powi(2)).sqrt();
        worst = worst.max(d);
    }
    chart.cr_residual = worst;
    Ok(chart)
}

/// Sign of the dual-edge crossing convention: +1 when traversing the edge
/// (a→b) with triangle edge_tris[0] on the left.
fn crossing_sign(mesh: &SurfaceMesh, e: usize, a: u32, b: u32) -> f64 {
    let t0 = mesh.edge_tris[e][0] as usize;
    let tri = &mesh.triangles[t0];
    // in the oriented triangle, the directed boundary contains (a,b) or (b,a)
    for k in 0..3 {
        if tri[k] == a && tri[(k + 1) % 3] == b {
            return 1.0;
        }
        if tri[k] == b && tri[(k + 1) % 3] == a {
            return -1.0;
        }
    }
    0.0
}

// ---------------------------------------------------------------------------
// Hopf differential agreement
// ---------------------------------------------------------------------------

/// Orthonormal tangent frame at a vertex.
fn vertex_frame(mesh: &SurfaceMesh, v: u32) -> ([f64; 3], [f64; 3]) {
    match mesh.kind {
        SurfaceKind::Torus => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0]),
        SurfaceKind::Sphere => {
            let p = mesh.vertices[v as usize];
            let axis = if p[0].abs() < 0.9 {
                [1.0, 0.0, 0.0]
            } else {
                [0.0, 1.0, 0.0]
            };
            let mut e1 = [
                axis[1] * p[2] - axis[2] * p[1],
                axis[2] * p[0] - axis[0] * p[2],
                axis[0] * p[1] - axis[1] * p[0],
            ];
            let n = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
            e1 = [e1[0] / n, e1[1] / n, e1[2] / n];
            let e2 = [
                p[1] * e1[2] - p[2] * e1[1],
                p[2] * e1[0] - p[0] * e1[2],
                p[0] * e1[1] - p[1] * e1[0],
            ];
            (e1, e2)
        }
    }
}

fn dot3(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

/// Agreement between the Hopf differential of the inclusion map and the
/// squared height differential in an annulus chart.
///
/// In chart coordinates z = x + iy, with f the inclusion of the annulus into
/// M and h the height field: Φ_f = ¼(|f_x|² − |f_y|² − 2i⟨f_x,f_y⟩) (inner
/// products in g_M) and Φ_h = ¼(h_x² − h_y² − 2i·h_x h_y). For a maximal
/// graph the chart is conformal for g_u = g_M − dh², which forces Φ_f = Φ_h
/// pointwise. Returns the area-weighted residual
/// ‖Φ_f − Φ_h‖ / (‖Φ_f‖ + ‖Φ_h‖ + ‖e_f‖ + 1e−15), where e_f is the chart
/// energy density ¼(|f_x|² + |f_y|²); the energy term keeps the ratio
/// meaningful when both differentials vanish (constant heights).
///
/// Chart derivatives are recovered per vertex by area-averaging incident
/// triangle gradients in the vertex tangent plane, which suppresses the
/// leading alternating component of the piecewise-linear gradient error.
pub fn hopf_agreement(mesh: &SurfaceMesh, chart: &AnnulusChart, u: &[f64]) -> Result<f64> {
    let lookup = TriangleLookup::new(mesh.triangle_count(), &chart.annulus.triangles);
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    let mut used = 0usize;
    for v in 0..mesh.vertex_count() as u32 {
        let star = mesh.vertex_triangles(v);
        if star.is_empty() || !star.iter().all(|&t| lookup.get(t).is_some()) {
            continue;
        }
        let (e1, e2) = vertex_frame(mesh, v);
        let mut gx = [0.0f64; 2];
        let mut gy = [0.0f64; 2];
        let mut gu = [0.0f64; 2];
        let mut wsum = 0.0f64;
        for &t in star {
            let t = t as usize;
            let a = mesh.tri_geom[t].area;
            let ax = mesh.frame_to_ambient(t, tri_gradient(mesh, t, &chart.x));
            let ay = mesh.frame_to_ambient(t, chart_y_gradient(mesh, chart, t));
            let au = mesh.frame_to_ambient(t, tri_gradient(mesh, t, u));
            gx[0] += a * dot3(ax, e1);
            gx[1] += a * dot3(ax, e2);
            gy[0] += a * dot3(ay, e1);
            gy[1] += a * dot3(ay, e2);
            gu[0] += a * dot3(au, e1);
            gu[1] += a * dot3(au, e2);
            wsum += a;
        }
        for g in [&mut gx, &mut gy, &mut gu] {
            g[0] /= wsum;
            g[1] /= wsum;
        }
        // chart Jacobian A rows are the recovered gradients of x and y;
        // f_x, f_y are the columns of A^{-1}
        let det = gx[0] * gy[1] - gx[1] * gy[0];
        if det.abs() < 1e-14 {
            continue;
        }
        let fx = [gy[1] / det, -gx[1] / det];
        let fy = [-gy[0] / det, gx[0] / det];
        // h_x, h_y solve A^T [hx, hy] = grad u
        let hx = (gu[0] * gy[1] - gu[1] * gy[0]) / det;
        let hy = (gu[1] * gx[0] - gu[0] * gx[1]) / det;

        let fxx = fx[0] * fx[0] + fx[1] * fx[1];
        let fyy = fy[0] * fy[0] + fy[1] * fy[1];
        let fxy = fx[0] * fy[0] + fx[1] * fy[1];
        let phi_f = (0.25 * (fxx - fyy), -0.5 * fxy);
        let phi_h = (0.25 * (hx * hx - hy * hy), -0.5 * hx * hy);
        let e_f = 0.25 * (fxx + fyy);

        let dualw = wsum / 3.0;
        num += dualw * ((phi_f.0 - phi_h.0).powi(2) + (phi_f.1 - phi_h.1).powi(2)).sqrt();
        den += dualw
            * ((phi_f.0 * phi_f.0 + phi_f.1 * phi_f.1).sqrt()
                + (phi_h.0 * phi_h.0 + phi_h.1 * phi_h.1).sqrt()
                + e_f);
        used += 1;
    }
    if used == 0 {
        return Err(MgError::InvalidTopology(
            "annulus has no interior vertices for the Hopf comparison".into(),
        ));
    }
    Ok(num / (den + 1e-15))
}

// ---------------------------------------------------------------------------
// end moduli
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EndModulusRow {
    /// Halving index k: the annulus spans [r0·2^{−k}, r0].
    pub halving: u32,
    pub r_inner: f64,
    pub r_outer: f64,
    pub modulus_base: f64,
    pub modulus_induced: f64,
}

/// Moduli of the nested annuli [r0·2^{−k}, r0] for k = 1..=halvings around a
/// vertex, in both the base and induced metrics. Per-halving increments of
/// the base column grow like log2/(2π) toward a puncture (parabolic end),
/// while a light-cone singularity's induced column saturates (finite total
/// modulus: hyperbolic end).
pub fn end_moduli(
    mesh: &SurfaceMesh,
    metric: &InducedMetric,
    center: u32,
    r0: f64,
    halvings: u32,
) -> Result<Vec<EndModulusRow>> {
    let mut rows = Vec::new();
    for k in 1..=halvings {
        let r_in = r0 * 0.5f64.powi(k as i32);
        let ann = extract_annulus(mesh, center, r_in, r0)?;
        let base = annulus_modulus(mesh, None, &ann)?;
        let induced = annulus_modulus(mesh, Some(metric), &ann)?;
        rows.push(EndModulusRow {
            halving: k,
            r_inner: r_in,
            r_outer: r0,
            modulus_base: base.modulus,
            modulus_induced: induced.modulus,
        });
    }
    Ok(rows)
}

/// Per-halving increments of a modulus column (first entry is the first
/// annulus's modulus itself).
pub fn modulus_increments(rows: &[EndModulusRow], induced: bool) -> Vec<f64> {
    let col: Vec<f64> = rows
        .iter()
        .map(|r| if induced { r.modulus_induced } else { r.modulus_base })
        .collect();
    let mut inc = Vec::with_capacity(col.len());
    for (k, &m) in col.iter().enumerate() {
        inc.push(if k == 0 { m } else { m - col[k - 1] });
    }
    inc
}

// ---------------------------------------------------------------------------
// torus grid prolongation
// ---------------------------------------------------------------------------

/// Exact piecewise-linear prolongation between nested torus grids (the fine
/// grid doubles the coarse one in each direction): even-index fine vertices
/// copy the coarse value, edge midpoints average the two endpoint values,
/// and cell centers average along the split diagonal.
pub fn prolong_torus(
    coarse: &SurfaceMesh,
    fine: &SurfaceMesh,
    u: &[f64],
) -> Result<Vec<f64>> {
    if coarse.kind != SurfaceKind::Torus || fine.kind != SurfaceKind::Torus {
        return Err(MgError::InvalidConfig(
            "prolongation requires torus meshes".into(),
        ));
    }
    let (cnx, cny) = coarse.grid;
    let (fnx, fny) = fine.grid;
    if fnx != 2 * cnx || fny != 2 * cny || coarse.extent != fine.extent {
        return Err(MgError::InvalidConfig(format!(
            "fine grid {fnx}x{fny} does not double coarse {cnx}x{cny} at equal extents"
        )));
    }
    if u.len() != coarse.vertex_count() {
        return Err(MgError::InvalidConfig("field length mismatch".into()));
    }
    let cid = |i: u32, j: u32| ((j % cny) * cnx + (i % cnx)) as usize;
    let mut out = vec![0.0f64; fine.vertex_count()];
    for j in 0..fny {
        for i in 0..fnx {
            let (ci, cj) = (i / 2, j / 2);
            let val = match (i % 2, j % 2) {
                (0, 0) => u[cid(ci, cj)],
                (1, 0) => 0.5 * (u[cid(ci, cj)] + u[cid(ci + 1, cj)]),
                (0, 1) => 0.5 * (u[cid(ci, cj)] + u[cid(ci, cj + 1)]),
                // cell centers sit on the split diagonal (ci,cj)-(ci+1,cj+1)
                _ => 0.5 * (u[cid(ci, cj)] + u[cid(ci + 1, cj + 1)]),
            };
            out[(j * fnx + i) as usize] = val;
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// verification report
// ---------------------------------------------------------------------------

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VerificationReport {
    pub max_principle_ok: bool,
    /// Worst excursion of u beyond [min t_i, max t_i].
    pub max_principle_violation: f64,
    /// Sup-norm harmonicity residual over vertices not adjacent to a
    /// singular vertex.
    pub harmonicity_residual: f64,
    pub cone_profiles: Vec<ConeProfile>,
    pub local_extremum_ok: Vec<bool>,
    /// Nested-annulus moduli per singularity (may be empty rows when the
    /// mesh cannot resolve the bands).
    pub end_moduli: Vec<Vec<EndModulusRow>>,
    pub hopf_residual: Option<f64>,
    /// Smallest area stretch factor sqrt(det g_u / det g_M); positivity
    /// certifies the graph map is a local diffeomorphism off the
    /// singularities.
    pub jacobian_min: f64,
    pub max_gradient_off_pins: f64,
    pub spacelike_ok: bool,
    /// Non-fatal diagnostics that could not be computed.
    pub notes: Vec<String>,
}

/// Runs every diagnostic on a computed graph. Sub-checks that cannot be
/// evaluated (e.g. moduli bands below the mesh resolution) are recorded in
/// `notes` instead of failing the whole report.
pub fn verify(graph: &SingularMaximalGraph) -> VerificationReport {
    let mesh = &*graph.mesh;
    let u = &graph.values;
    let heights = graph.config.heights();
    let lo = heights.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut notes = Vec::new();

    let mut violation = 0.0f64;
    for &v in u {
        violation = violation.max(lo - v).max(v - hi);
    }
    let max_principle_ok = violation <= 1e-8;

    let off_pins = graph.off_pin_triangles();
    let harmonicity = match harmonicity_residual(mesh, &off_pins, u) {
        Ok(r) => r.sup,
        Err(e) => {
            notes.push(format!("harmonicity residual unavailable: {e}"));
            f64::NAN
        }
    };

    let metric = match induced_metric(mesh, u) {
        Ok(m) => Some(m),
        Err(e) => {
            notes.push(format!("induced metric unavailable: {e}"));
            None
        }
    };
    let jacobian_min = metric
        .as_ref()
        .map(|m| m.w.iter().cloned().fold(f64::INFINITY, f64::min))
        .unwrap_or(f64::NAN);

    let m = graph.config.len();
    let h = mesh.mesh_size();
    let guard = injectivity_guard(mesh);
    let mut cone_profiles = Vec::new();
    let mut local_extremum_ok = Vec::new();
    let mut end_rows = Vec::new();
    for i in 0..m {
        match cone_tangency_profile(graph, i, 16) {
            Ok(p) => {
                local_extremum_ok.push(p.local_extremum);
                cone_profiles.push(p);
            }
            Err(e) => {
                notes.push(format!("cone profile #{i} unavailable: {e}"));
                local_extremum_ok.push(false);
            }
        }

        let rows = {
            let base_r = singularity_base_radius(graph, i);
            let r0 = (48.5 * h).min(0.8 * guard).min(1.5 * base_r);
            let mut halvings = 0u32;
            while halvings < 4 && r0 * 0.5f64.powi(halvings as i32 + 1) >= 3.02 * h {
                halvings += 1;
            }
            if halvings == 0 {
                notes.push(format!(
                    "end moduli #{i} skipped: bands below mesh resolution"
                ));
                Vec::new()
            } else {
                match metric.as_ref().map(|mm| {
                    end_moduli(mesh, mm, graph.config.points[i].vertex, r0, halvings)
                }) {
                    Some(Ok(rows)) => rows,
                    Some(Err(e)) => {
                        notes.push(format!("end moduli #{i} unavailable: {e}"));
                        Vec::new()
                    }
                    None => Vec::new(),
                }
            }
        };
        end_rows.push(rows);
    }

    // Hopf comparison on a mid-band annulus around the first singularity
    let hopf_residual = {
        let i = 0;
        let min_pair = if m >= 2 {
            (1..m)
                .map(|j| graph.certificate.pair_dist[i][j])
                .fold(f64::INFINITY, f64::min)
        } else {
            2.0 * guard
        };
        let r_in = 0.325 * min_pair;
        let r_out = 0.675 * min_pair;
        if r_out - r_in < 6.0 * h {
            notes.push("hopf annulus skipped: band below mesh resolution".into());
            None
        } else {
            let attempt = extract_annulus(mesh, graph.config.points[i].vertex, r_in, r_out)
                .and_then(|ann| {
                    build_annulus_chart(mesh, metric.as_ref(), &ann)
                        .and_then(|chart| hopf_agreement(mesh, &chart, u))
                });
            match attempt {
                Ok(r) => Some(r),
                Err(e) => {
                    notes.push(format!("hopf comparison unavailable: {e}"));
                    None
                }
            }
        }
    };

    let max_gradient_off_pins = max_gradient(mesh, &off_pins, u);

    VerificationReport {
        max_principle_ok,
        max_principle_violation: violation,
        harmonicity_residual: harmonicity,
        cone_profiles,
        local_extremum_ok,
        end_moduli: end_rows,
        hopf_residual,
        jacobian_min,
        max_gradient_off_pins,
        spacelike_ok: max_gradient_off_pins < 1.0,
        notes,
    }
}
