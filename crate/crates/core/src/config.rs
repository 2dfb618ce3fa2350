//! Prescribed singularity data and the punctured domains used to approach it.
//!
//! A configuration is a set of marked mesh vertices with heights. It is
//! admissible when the heights are strictly dominated by the surface
//! distances (spacelike condition); validation certifies this with a 2%
//! safety margin against the graph metric, which never undershoots the true
//! surface distance. Around each singularity a dyadic family of geodesic
//! disks is removed, giving the shrinking domains on which the Dirichlet
//! solves run; the initial iterate on each domain is the distance-based
//! Lipschitz extension of the boundary data.

use crate::error::{MgError, Result};
use crate::mesh::{DistanceField, SurfaceKind, SurfaceMesh};
use serde::{Deserialize, Serialize};

/// Heights must stay below (1 - this) times the measured distance.
pub const SPACELIKE_MARGIN: f64 = 0.02;

/// Disk radii are refused below this multiple of the mesh size.
pub const MIN_RADIUS_IN_MESH_SIZES: f64 = 3.0;

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SingularPoint {
    pub vertex: u32,
    pub t: f64,
}

/// Marked points with heights. The optional mark is a permutation of
/// 0..m recording an ordering of the singularities; it never influences
/// solves, only bookkeeping.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SingularityConfig {
    pub points: Vec<SingularPoint>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mark: Option<Vec<usize>>,
}

impl SingularityConfig {
    pub fn new(points: Vec<(u32, f64)>) -> Self {
        SingularityConfig {
            points: points
                .into_iter()
                .map(|(vertex, t)| SingularPoint { vertex, t })
                .collect(),
            mark: None,
        }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn vertices(&self) -> Vec<u32> {
        self.points.iter().map(|p| p.vertex).collect()
    }

    pub fn heights(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.t).collect()
    }

    /// The same configuration with its points listed in permuted order.
    pub fn reordered(&self, perm: &[usize]) -> Result<SingularityConfig> {
        if perm.len() != self.len() {
            return Err(MgError::InvalidConfig("permutation length mismatch".into()));
        }
        let mut seen = vec![false; perm.len()];
        for &k in perm {
            if k >= perm.len() || seen[k] {
                return Err(MgError::InvalidConfig("not a permutation".into()));
            }
            seen[k] = true;
        }
        Ok(SingularityConfig {
            points: perm.iter().map(|&k| self.points[k].clone()).collect(),
            mark: Some(perm.to_vec()),
        })
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SpacelikeCertificate {
    /// max over pairs of |t_i - t_j| / dist(p_i, p_j); zero when m = 1.
    pub epsilon: f64,
    /// min over pairs of dist(p_i, p_j) - |t_i - t_j|; infinite when m = 1.
    pub margin: f64,
    /// Symmetrized pairwise graph distances, row-major m-by-m.
    pub pair_dist: Vec<Vec<f64>>,
}

fn basic_checks(mesh: &SurfaceMesh, config: &SingularityConfig) -> Result<()> {
    if config.is_empty() {
        return Err(MgError::InvalidConfig("no singularities given".into()));
    }
    if config.len() > 64 {
        return Err(MgError::InvalidConfig(format!(
            "{} singularities exceed the supported maximum of 64",
            config.len()
        )));
    }
    for p in &config.points {
        if p.vertex as usize >= mesh.vertex_count() {
            return Err(MgError::InvalidConfig(format!(
                "vertex {} out of range (mesh has {})",
                p.vertex,
                mesh.vertex_count()
            )));
        }
        if !p.t.is_finite() {
            return Err(MgError::InvalidConfig(format!(
                "height of vertex {} is not finite",
                p.vertex
            )));
        }
    }
    for i in 0..config.len() {
        for j in (i + 1)..config.len() {
            if config.points[i].vertex == config.points[j].vertex {
                return Err(MgError::InvalidConfig(format!(
                    "singularities #{i} and #{j} coincide at vertex {}",
                    config.points[i].vertex
                )));
            }
        }
    }
    if let Some(mark) = &config.mark {
        let m = config.len();
        let mut seen = vec![false; m];
        if mark.len() != m {
            return Err(MgError::InvalidConfig("mark length mismatch".into()));
        }
        for &k in mark {
            if k >= m || seen[k] {
                return Err(MgError::InvalidConfig("mark is not a permutation".into()));
            }
            seen[k] = true;
        }
    }
    Ok(())
}

/// Checks the strict spacelike condition |t_i - t_j| < dist(p_i, p_j)
/// with a 2% margin and returns the certificate. Distances are graph
/// distances (never below the true surface distance).
pub fn validate_spacelike(
    mesh: &SurfaceMesh,
    config: &SingularityConfig,
) -> Result<SpacelikeCertificate> {
    let (cert, _fields) = validate_with_fields(mesh, config)?;
    Ok(cert)
}

/// As `validate_spacelike`, additionally returning the per-singularity
/// distance fields so callers can reuse them for domain construction.
pub fn validate_with_fields(
    mesh: &SurfaceMesh,
    config: &SingularityConfig,
) -> Result<(SpacelikeCertificate, Vec<DistanceField>)> {
    basic_checks(mesh, config)?;
    let m = config.len();
    let fields: Vec<DistanceField> = config
        .points
        .iter()
        .map(|p| mesh.geodesic_distance(p.vertex))
        .collect();

    let mut pair_dist = vec![vec![0.0; m]; m];
    let mut epsilon = 0.0f64;
    let mut margin = f64::INFINITY;
    for i in 0..m {
        for j in (i + 1)..m {
            let dij = fields[i].values[config.points[j].vertex as usize];
            let dji = fields[j].values[config.points[i].vertex as usize];
            let d = dij.min(dji);
            pair_dist[i][j] = d;
            pair_dist[j][i] = d;
            let gap = (config.points[i].t - config.points[j].t).abs();
            if gap >= (1.0 - SPACELIKE_MARGIN) * d {
                return Err(MgError::NotSpacelike {
                    i,
                    j,
                    gap,
                    dist: d,
                    margin_frac: 1.0 - SPACELIKE_MARGIN,
                });
            }
            epsilon = epsilon.max(gap / d);
            margin = margin.min(d - gap);
        }
    }
    Ok((
        SpacelikeCertificate {
            epsilon,
            margin,
            pair_dist,
        },
        fields,
    ))
}

/// One level of the shrinking-domain family: the mesh minus disjoint
/// geodesic disks around the singularities.
#[derive(Clone, Debug)]
pub struct PuncturedDomain {
    pub level: u32,
    /// Requested disk radius per singularity at this level.
    pub disk_radius: Vec<f64>,
    /// Triangles removed around each singularity.
    pub excluded: Vec<Vec<u32>>,
    /// Complement: the triangles the Dirichlet solve runs on.
    pub interior: Vec<u32>,
    /// Ordered boundary vertex cycles, one per singularity.
    pub boundary_loops: Vec<Vec<u32>>,
}

impl PuncturedDomain {
    /// Vertices incident to at least one interior triangle.
    pub fn domain_vertices(&self, mesh: &SurfaceMesh) -> Vec<u32> {
        let mut flag = vec![false; mesh.vertex_count()];
        for &t in &self.interior {
            for &v in &mesh.triangles[t as usize] {
                flag[v as usize] = true;
            }
        }
        (0..mesh.vertex_count() as u32)
            .filter(|&v| flag[v as usize])
            .collect()
    }

    /// Dirichlet pins: every boundary-loop vertex with its loop's height.
    pub fn boundary_pins(&self, heights: &[f64]) -> Vec<(u32, f64)> {
        let mut pins: Vec<(u32, f64)> = Vec::new();
        for (i, lp) in self.boundary_loops.iter().enumerate() {
            for &v in lp {
                pins.push((v, heights[i]));
            }
        }
        pins.sort_unstable_by_key(|&(v, _)| v);
        pins
    }
}

/// Shared machinery for the whole dyadic family: per-singularity distance
/// fields, base radii, and the probe set on which successive levels are
/// compared.
pub struct DomainSequence<'a> {
    pub mesh: &'a SurfaceMesh,
    pub config: &'a SingularityConfig,
    pub fields: Vec<DistanceField>,
    /// Level-0 disk radii: min(quarter of min pairwise distance, an
    /// injectivity-scale guard).
    pub base_radius: Vec<f64>,
    /// Triangles at distance >= base radius from every singularity.
    pub probe_triangles: Vec<u32>,
    pub probe_vertices: Vec<u32>,
}

pub fn injectivity_guard(mesh: &SurfaceMesh) -> f64 {
    match mesh.kind {
        SurfaceKind::Sphere => std::f64::consts::FRAC_PI_3,
        SurfaceKind::Torus => mesh.extent.0.min(mesh.extent.1) / 4.0,
    }
}

impl<'a> DomainSequence<'a> {
    pub fn new(
        mesh: &'a SurfaceMesh,
        config: &'a SingularityConfig,
        cert: &SpacelikeCertificate,
        fields: Vec<DistanceField>,
    ) -> Result<DomainSequence<'a>> {
        let m = config.len();
        assert_eq!(fields.len(), m);
        let guard = injectivity_guard(mesh);
        let base_radius: Vec<f64> = (0..m)
            .map(|i| {
                let min_pair = (0..m)
                    .filter(|&j| j != i)
                    .map(|j| cert.pair_dist[i][j])
                    .fold(f64::INFINITY, f64::min);
                (0.25 * min_pair).min(guard)
            })
            .collect();

        let h = mesh.mesh_size();
        for (i, &r) in base_radius.iter().enumerate() {
            if r < MIN_RADIUS_IN_MESH_SIZES * h {
                return Err(MgError::ResolutionExceeded(format!(
                    "level-0 disk radius {r:.4} around singularity #{i} is below \
                     {MIN_RADIUS_IN_MESH_SIZES} mesh sizes (h = {h:.4}); refine the mesh"
                )));
            }
        }

        let mut probe_triangles = Vec::new();
        let mut probe_vertex_flag = vec![false; mesh.vertex_count()];
        'tri: for t in 0..mesh.triangle_count() {
            for i in 0..m {
                for &v in &mesh.triangles[t] {
                    if fields[i].values[v as usize] < base_radius[i] {
                        continue 'tri;
                    }
                }
            }
            probe_triangles.push(t as u32);
            for &v in &mesh.triangles[t] {
                probe_vertex_flag[v as usize] = true;
            }
        }
        if probe_triangles.is_empty() {
            return Err(MgError::ResolutionExceeded(
                "probe set is empty: singularities blanket the surface".into(),
            ));
        }
        let probe_vertices = (0..mesh.vertex_count() as u32)
            .filter(|&v| probe_vertex_flag[v as usize])
            .collect();

        Ok(DomainSequence {
            mesh,
            config,
            fields,
            base_radius,
            probe_triangles,
            probe_vertices,
        })
    }

    pub fn radius_at(&self, i: usize, level: u32) -> f64 {
        self.base_radius[i] * 0.5f64.powi(level as i32)
    }

    /// True when every disk at this level still spans at least
    /// MIN_RADIUS_IN_MESH_SIZES mesh sizes.
    pub fn resolvable(&self, level: u32) -> bool {
        let h = self.mesh.mesh_size();
        (0..self.config.len())
            .all(|i| self.radius_at(i, level) >= MIN_RADIUS_IN_MESH_SIZES * h)
    }

    pub fn domain(&self, level: u32) -> Result<PuncturedDomain> {
        let mesh = self.mesh;
        let m = self.config.len();
        if !self.resolvable(level) {
            return Err(MgError::ResolutionExceeded(format!(
                "disk radius at level {level} falls below {MIN_RADIUS_IN_MESH_SIZES} mesh sizes"
            )));
        }

        // 0 = interior, 1+i = excluded disk of singularity i
        let mut owner = vec![0u32; mesh.triangle_count()];
        let mut excluded: Vec<Vec<u32>> = Vec::with_capacity(m);
        for i in 0..m {
            let r = self.radius_at(i, level);
            let dist = &self.fields[i].values;
            let disk = extract_disk(mesh, self.config.points[i].vertex, dist, r)?;
            for &t in &disk {
                if owner[t as usize] != 0 {
                    return Err(MgError::ResolutionExceeded(format!(
                        "disks around singularities #{} and #{i} overlap at level {level}",
                        owner[t as usize] - 1
                    )));
                }
                owner[t as usize] = 1 + i as u32;
            }
            excluded.push(disk);
        }

        let interior: Vec<u32> = (0..mesh.triangle_count() as u32)
            .filter(|&t| owner[t as usize] == 0)
            .collect();
        if interior.is_empty() {
            return Err(MgError::ResolutionExceeded(format!(
                "no interior triangles left at level {level}"
            )));
        }

        // Boundary loops; also certify the closures are disjoint (no vertex
        // belongs to two different disks).
        let mut vertex_owner = vec![0u32; mesh.vertex_count()];
        for (i, disk) in excluded.iter().enumerate() {
            for &t in disk {
                for &v in &mesh.triangles[t as usize] {
                    let tag = 1 + i as u32;
                    if vertex_owner[v as usize] != 0 && vertex_owner[v as usize] != tag {
                        return Err(MgError::ResolutionExceeded(format!(
                            "disk closures meet at vertex {v} (level {level})"
                        )));
                    }
                    vertex_owner[v as usize] = tag;
                }
            }
        }

        let mut boundary_loops = Vec::with_capacity(m);
        for disk in &excluded {
            boundary_loops.push(boundary_cycle(mesh, disk)?);
        }

        Ok(PuncturedDomain {
            level,
            disk_radius: (0..m).map(|i| self.radius_at(i, level)).collect(),
            excluded,
            interior,
            boundary_loops,
        })
    }
}

/// Convenience wrapper constructing the family and returning one level.
pub fn build_domain(
    mesh: &SurfaceMesh,
    config: &SingularityConfig,
    level: u32,
) -> Result<PuncturedDomain> {
    let (cert, fields) = validate_with_fields(mesh, config)?;
    DomainSequence::new(mesh, config, &cert, fields)?.domain(level)
}

/// Connected triangle disk around `center`: triangles whose vertices all lie
/// within `radius`, grown to repair boundary pinches so the boundary is a
/// single simple cycle.
fn extract_disk(
    mesh: &SurfaceMesh,
    center: u32,
    dist: &[f64],
    radius: f64,
) -> Result<Vec<u32>> {
    let mut in_disk = vec![false; mesh.triangle_count()];
    // seed: the star of the center
    let mut stack: Vec<u32> = mesh.vertex_triangles(center).to_vec();
    for &t in &stack {
        in_disk[t as usize] = true;
    }
    let candidate = |t: u32| {
        mesh.triangles[t as usize]
            .iter()
            .all(|&v| dist[v as usize] < radius)
    };
    while let Some(t) = stack.pop() {
        for k in 0..3 {
            let e = mesh.tri_edges[t as usize][k] as usize;
            let [a, b] = mesh.edge_tris[e];
            let n = if a == t { b } else { a };
            if !in_disk[n as usize] && candidate(n) {
                in_disk[n as usize] = true;
                stack.push(n);
            }
        }
    }

    // Pinch repair: a boundary vertex must have exactly two boundary edges.
    for _round in 0..20 {
        let mut boundary_edges_at = std::collections::HashMap::<u32, u32>::new();
        for e in 0..mesh.edge_count() {
            let [a, b] = mesh.edge_tris[e];
            if in_disk[a as usize] != in_disk[b as usize] {
                let (u, v) = mesh.edges[e];
                *boundary_edges_at.entry(u).or_insert(0) += 1;
                *boundary_edges_at.entry(v).or_insert(0) += 1;
            }
        }
        let mut pinched: Vec<u32> = boundary_edges_at
            .iter()
            .filter(|&(_, &c)| c != 2)
            .map(|(&v, _)| v)
            .collect();
        if pinched.is_empty() {
            let disk: Vec<u32> = (0..mesh.triangle_count() as u32)
                .filter(|&t| in_disk[t as usize])
                .collect();
            if disk.len() == mesh.triangle_count() {
                return Err(MgError::ResolutionExceeded(
                    "disk swallowed the whole surface".into(),
                ));
            }
            return Ok(disk);
        }
        pinched.sort_unstable();
        for v in pinched {
            for &t in mesh.vertex_triangles(v) {
                in_disk[t as usize] = true;
            }
        }
    }
    Err(MgError::InvalidTopology(
        "could not repair disk boundary into a simple cycle".into(),
    ))
}

/// Ordered boundary cycle of a triangle disk, starting at the smallest
/// boundary vertex id, direction chosen toward its smaller-id neighbor.
fn boundary_cycle(mesh: &SurfaceMesh, disk: &[u32]) -> Result<Vec<u32>> {
    let mut in_disk = vec![false; mesh.triangle_count()];
    for &t in disk {
        in_disk[t as usize] = true;
    }
    let mut adjacency = std::collections::HashMap::<u32, Vec<u32>>::new();
    for e in 0..mesh.edge_count() {
        let [a, b] = mesh.edge_tris[e];
        if in_disk[a as usize] != in_disk[b as usize] {
            let (u, v) = mesh.edges[e];
            adjacency.entry(u).or_default().push(v);
            adjacency.entry(v).or_default().push(u);
        }
    }
    if adjacency.is_empty() {
        return Err(MgError::InvalidTopology("disk has no boundary".into()));
    }
    for (v, n) in &adjacency {
        if n.len() != 2 {
            return Err(MgError::InvalidTopology(format!(
                "boundary vertex {v} has {} boundary edges",
                n.len()
            )));
        }
    }
    let start = *adjacency.keys().min().unwrap();
    let mut cycle = vec![start];
    let first = adjacency[&start].iter().copied().min().unwrap();
    let mut prev = start;
    let mut cur = first;
    while cur != start {
        cycle.push(cur);
        let ns = &adjacency[&cur];
        let next = if ns[0] == prev { ns[1] } else { ns[0] };
        prev = cur;
        cur = next;
        if cycle.len() > adjacency.len() {
            return Err(MgError::InvalidTopology("boundary walk did not close".into()));
        }
    }
    if cycle.len() != adjacency.len() {
        return Err(MgError::InvalidTopology(
            "disk boundary is not a single cycle".into(),
        ));
    }
    Ok(cycle)
}

/// Multi-source distance fields, one per boundary loop.
pub fn loop_distance_fields(mesh: &SurfaceMesh, loops: &[Vec<u32>]) -> Vec<DistanceField> {
    loops.iter().map(|lp| mesh.distance_from_set(lp)).collect()
}

/// Distance-based Lipschitz extension of per-loop constant boundary values:
/// phi(p) = min_i ( t_i + epsilon * dist(p, loop_i) ), over every mesh
/// vertex. With epsilon at least the boundary data's Lipschitz constant
/// relative to the loop-to-loop distances, the extension attains the data
/// exactly on the loops.
pub fn lipschitz_extend_from_fields(
    loop_fields: &[DistanceField],
    heights: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(MgError::InvalidConfig(format!(
            "extension slope {epsilon} outside (0, 1)"
        )));
    }
    assert_eq!(loop_fields.len(), heights.len());
    let n = loop_fields[0].values.len();
    let mut phi = vec![f64::INFINITY; n];
    for (f, &t) in loop_fields.iter().zip(heights) {
        for v in 0..n {
            let cand = t + epsilon * f.values[v];
            if cand < phi[v] {
                phi[v] = cand;
            }
        }
    }
    Ok(phi)
}

/// Convenience form computing the loop distance fields itself.
pub fn lipschitz_extend(
    mesh: &SurfaceMesh,
    domain: &PuncturedDomain,
    heights: &[f64],
    epsilon: f64,
) -> Result<Vec<f64>> {
    let fields = loop_distance_fields(mesh, &domain.boundary_loops);
    lipschitz_extend_from_fields(&fields, heights, epsilon)
}

/// Smallest slope that lets the extension match the per-loop constants
/// exactly: max over pairs of |t_i - t_j| / dist(loop_i, loop_j).
pub fn required_extension_slope(loop_fields: &[DistanceField], heights: &[f64]) -> f64 {
    let m = heights.len();
    let mut eps = 0.0f64;
    for i in 0..m {
        for j in 0..m {
            if i == j {
                continue;
            }
            // dist(loop_i, loop_j) = min over loop_j sources of field_i
            let d = loop_fields[j]
                .sources
                .iter()
                .map(|&v| loop_fields[i].values[v as usize])
                .fold(f64::INFINITY, f64::min);
            if d > 0.0 {
                eps = eps.max((heights[i] - heights[j]).abs() / d);
            }
        }
    }
    eps
}
