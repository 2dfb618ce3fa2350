//! Sampling and perturbation probes on the space of singular configurations.
//!
//! The admissible configurations (distinct points with heights satisfying
//! the strict spacelike bound) form an open set; solutions depend
//! continuously on the heights and not at all on the ordering of the marked
//! points. This module draws random admissible configurations, measures the
//! solution's response to height perturbations, and handles the m!
//! bookkeeping of orderings.

use crate::analysis::cone_profile_from_field;
use crate::config::{injectivity_guard, validate_spacelike, SingularityConfig};
use crate::error::{MgError, Result};
use crate::mesh::SurfaceMesh;
use crate::solver::{solve_singular, SingularMaximalGraph, SolverSettings};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::sync::Arc;

/// A solution together with an ordering of its singularities. The mark is
/// pure bookkeeping: permuting it never changes the underlying field.
#[derive(Clone, Debug)]
pub struct MarkedGraph {
    pub graph: SingularMaximalGraph,
    pub mark: Vec<usize>,
}

impl MarkedGraph {
    /// Sup-norm distance between the underlying (unmarked) fields.
    pub fn unmarked_sup_diff(&self, other: &MarkedGraph) -> f64 {
        self.graph
            .values
            .iter()
            .zip(&other.graph.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Draws `count` admissible configurations with `m` singularities each:
/// distinct vertices pairwise at least 4 mesh sizes apart, heights with
/// |t_i − t_j| ≤ 0.5·dist(p_i, p_j). The first sample uses the equal-heights
/// witness t_1 = … = t_{m−1} ≠ t_m; every output passes validation.
/// Deterministic for a fixed seed.
pub fn sample_configs(
    mesh: &SurfaceMesh,
    m: usize,
    count: usize,
    seed: u64,
) -> Result<Vec<SingularityConfig>> {
    if m < 2 {
        return Err(MgError::InvalidConfig(
            "sampling needs at least two singularities".into(),
        ));
    }
    if count == 0 {
        return Ok(Vec::new());
    }
    let nv = mesh.vertex_count() as u32;
    let h = mesh.mesh_size();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let limit = 1000 * count;
    let mut attempts = 0usize;

    'outer: while out.len() < count {
        attempts += 1;
        if attempts > limit {
            return Err(MgError::ResourceLimit(format!(
                "sampling exhausted: {} of {count} configs after {limit} attempts",
                out.len()
            )));
        }

        // distinct vertices, pairwise >= 4h apart (ambient distance never
        // exceeds the surface distance, so this is conservative)
        let mut verts: Vec<u32> = Vec::with_capacity(m);
        let mut dists: Vec<Vec<f64>> = Vec::with_capacity(m);
        for _ in 0..m {
            let v = rng.gen_range(0..nv);
            if verts.contains(&v) {
                continue 'outer;
            }
            let d = mesh.ambient_distance_field(v);
            if verts.iter().any(|&w| d[w as usize] < 4.0 * h) {
                continue 'outer;
            }
            verts.push(v);
            dists.push(d);
        }
        let pair = |i: usize, j: usize| dists[i][verts[j] as usize];

        let heights: Vec<f64> = if out.is_empty() {
            // the equal-heights witness: only the last point is displaced
            let dmin = (0..m - 1).map(|i| pair(i, m - 1)).fold(f64::INFINITY, f64::min);
            let mut t = vec![0.0; m];
            t[m - 1] = 0.35 * dmin;
            t
        } else {
            let mut t = vec![0.0; m];
            let mut ok = false;
            'height: for _ in 0..100 {
                for j in 1..m {
                    let anchor = (0..j)
                        .min_by(|&a, &b| pair(a, j).total_cmp(&pair(b, j)))
                        .unwrap();
                    let f = 0.3 + 0.15 * rng.gen::<f64>();
                    let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
                    t[j] = t[anchor] + sign * f * pair(anchor, j);
                }
                if (0..m).all(|i| (0..i).all(|j| (t[i] - t[j]).abs() <= 0.5 * pair(i, j))) {
                    ok = true;
                    break 'height;
                }
            }
            if !ok {
                continue 'outer;
            }
            t
        };

        let config =
            SingularityConfig::new(verts.iter().copied().zip(heights).collect());
        if validate_spacelike(mesh, &config).is_err() {
            continue 'outer;
        }
        out.push(config);
    }
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityRow {
    pub delta: f64,
    /// Sup-norm change of the solution; None when the perturbed
    /// configuration was skipped.
    pub change: Option<f64>,
    /// change / delta; None for the delta = 0 row or skipped rows.
    pub ratio: Option<f64>,
    pub skipped: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ContinuityTable {
    pub rows: Vec<ContinuityRow>,
}

/// Solves the configuration, then re-solves with the last height displaced
/// by each delta (strictly decreasing, points fixed) and records the
/// sup-norm change over all vertices. Perturbations that break the
/// spacelike bound are flagged and skipped rather than failing the table.
pub fn continuity_probe(
    mesh: &Arc<SurfaceMesh>,
    config: &SingularityConfig,
    deltas: &[f64],
    settings: &SolverSettings,
) -> Result<ContinuityTable> {
    for w in deltas.windows(2) {
        if w[1] >= w[0] {
            return Err(MgError::InvalidConfig(
                "perturbation sizes must be strictly decreasing".into(),
            ));
        }
    }
    if deltas.iter().any(|&d| d < 0.0 || !d.is_finite()) {
        return Err(MgError::InvalidConfig(
            "perturbation sizes must be finite and nonnegative".into(),
        ));
    }
    let base = solve_singular(mesh, config, settings)?;
    let mut rows = Vec::with_capacity(deltas.len());
    for &delta in deltas {
        let mut perturbed = config.clone();
        let last = perturbed.points.len() - 1;
        perturbed.points[last].t += delta;
        if validate_spacelike(mesh, &perturbed).is_err() {
            rows.push(ContinuityRow {
                delta,
                change: None,
                ratio: None,
                skipped: true,
            });
            continue;
        }
        let sol = solve_singular(mesh, &perturbed, settings)?;
        let change = sol
            .values
            .iter()
            .zip(&base.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        rows.push(ContinuityRow {
            delta,
            change: Some(change),
            ratio: (delta > 0.0).then(|| change / delta),
            skipped: false,
        });
    }
    Ok(ContinuityTable { rows })
}

/// Sup-norm deviation from exact equivariance under a common height shift:
/// ‖u_{t+c} − (u_t + c)‖∞. The solve commutes with vertical translations,
/// so this is zero up to solver tolerance.
pub fn shift_equivariance(
    mesh: &Arc<SurfaceMesh>,
    config: &SingularityConfig,
    settings: &SolverSettings,
    shift: f64,
) -> Result<f64> {
    let base = solve_singular(mesh, config, settings)?;
    let mut shifted = config.clone();
    for p in &mut shifted.points {
        p.t += shift;
    }
    let moved = solve_singular(mesh, &shifted, settings)?;
    Ok(moved
        .values
        .iter()
        .zip(&base.values)
        .map(|(a, b)| (a - b - shift).abs())
        .fold(0.0, f64::max))
}

/// All m! orderings of the configuration's singularities, lexicographic.
pub fn enumerate_marks(config: &SingularityConfig) -> Result<Vec<Vec<usize>>> {
    let m = config.len();
    if m > 7 {
        return Err(MgError::ResourceLimit(format!(
            "{m}! orderings exceed the enumeration guard (m ≤ 7)"
        )));
    }
    let mut perms = Vec::new();
    let mut cur: Vec<usize> = (0..m).collect();
    let mut used = vec![false; m];
    fn rec(
        m: usize,
        depth: usize,
        cur: &mut Vec<usize>,
        used: &mut Vec<bool>,
        out: &mut Vec<Vec<usize>>,
    ) {
        if depth == m {
            out.push(cur.clone());
            return;
        }
        for k in 0..m {
            if !used[k] {
                used[k] = true;
                cur[depth] = k;
                rec(m, depth + 1, cur, used, out);
                used[k] = false;
            }
        }
    }
    rec(m, 0, &mut cur, &mut used, &mut perms);
    Ok(perms)
}

/// Solves the configuration under a given ordering.
pub fn solve_marked(
    mesh: &Arc<SurfaceMesh>,
    config: &SingularityConfig,
    mark: &[usize],
    settings: &SolverSettings,
) -> Result<MarkedGraph> {
    let reordered = config.reordered(mark)?;
    let graph = solve_singular(mesh, &reordered, settings)?;
    Ok(MarkedGraph {
        graph,
        mark: mark.to_vec(),
    })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OpennessRow {
    /// Height displacement applied to each singularity.
    pub applied: Vec<f64>,
    /// Smallest innermost-ring gradient maximum over the singularities.
    pub min_terminal: f64,
    /// True when every singularity's profile reaches the detection
    /// threshold 0.5.
    pub all_detected: bool,
}

/// Perturbs every height by an independent uniform amount in [−delta,
/// delta], re-solves, and checks that all singularities are still detected
/// by their cone profiles (innermost-ring gradient ≥ 0.5). With delta below
/// a quarter of the configuration's spacelike margin the perturbed
/// configuration always remains admissible.
pub fn openness_probe(
    mesh: &Arc<SurfaceMesh>,
    config: &SingularityConfig,
    settings: &SolverSettings,
    delta: f64,
    seed: u64,
) -> Result<OpennessRow> {
    if !(delta >= 0.0 && delta.is_finite()) {
        return Err(MgError::InvalidConfig("invalid perturbation size".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut perturbed = config.clone();
    let mut applied = Vec::with_capacity(config.len());
    for p in &mut perturbed.points {
        let d = delta * (2.0 * rng.gen::<f64>() - 1.0);
        p.t += d;
        applied.push(d);
    }
    let cert = validate_spacelike(mesh, &perturbed)?;
    let graph = solve_singular(mesh, &perturbed, settings)?;

    let h = mesh.mesh_size();
    let guard = injectivity_guard(mesh);
    let m = perturbed.len();
    let mut min_terminal = f64::INFINITY;
    for i in 0..m {
        let min_pair = (0..m)
            .filter(|&j| j != i)
            .map(|j| cert.pair_dist[i][j])
            .fold(f64::INFINITY, f64::min);
        let r0 = (0.25 * min_pair).min(guard).max(6.5 * h);
        let p = &perturbed.points[i];
        let profile = cone_profile_from_field(mesh, &graph.values, p.vertex, p.t, r0, 16)?;
        min_terminal = min_terminal.min(profile.terminal);
    }
    Ok(OpennessRow {
        applied,
        min_terminal,
        all_detected: min_terminal >= 0.5,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::build_sphere;

    #[test]
    fn sampler_is_deterministic_and_valid() {
        let mesh = build_sphere(3).unwrap();
        let a = sample_configs(&mesh, 2, 10, 7).unwrap();
        let b = sample_configs(&mesh, 2, 10, 7).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 10);
        let h = mesh.mesh_size();
        for cfg in &a {
            validate_spacelike(&mesh, cfg).unwrap();
            let d = mesh.ambient_distance_field(cfg.points[0].vertex);
            assert!(d[cfg.points[1].vertex as usize] >= 4.0 * h);
        }
    }

    #[test]
    fn first_sample_is_the_equal_heights_witness() {
        let mesh = build_sphere(3).unwrap();
        let configs = sample_configs(&mesh, 3, 2, 42).unwrap();
        let t = configs[0].heights();
        assert_eq!(t[0], t[1]);
        assert!(t[2] != t[1]);
        // the second sample generally breaks the witness pattern
        let t1 = configs[1].heights();
        assert!(t1[1] != t1[0] || t1[2] != t1[0]);
    }

    #[test]
    fn marks_enumerate_all_orderings() {
        let cfg = SingularityConfig::new(vec![(0, 0.0), (5, 0.1), (9, -0.1)]);
        let perms = enumerate_marks(&cfg).unwrap();
        assert_eq!(perms.len(), 6);
        let set: std::collections::BTreeSet<_> = perms.iter().collect();
        assert_eq!(set.len(), 6);

        let big = SingularityConfig::new((0..8).map(|i| (i, 0.0)).collect());
        assert!(matches!(
            enumerate_marks(&big),
            Err(MgError::ResourceLimit(_))
        ));
    }

    #[test]
    fn zero_delta_row_reports_zero_change() {
        let mesh = Arc::new(build_sphere(2).unwrap());
        let b = mesh.antipodal_vertex(0).unwrap();
        let cfg = SingularityConfig::new(vec![(0, 0.0), (b, 0.5)]);
        let table =
            continuity_probe(&mesh, &cfg, &[0.0], &SolverSettings::default()).unwrap();
        assert!(!table.rows[0].skipped);
        assert!(table.rows[0].change.unwrap() <= 1e-9);
        assert!(table.rows[0].ratio.is_none());
    }

    #[test]
    fn continuity_changes_shrink_with_delta() {
        let mesh = Arc::new(build_sphere(3).unwrap());
        let b = mesh.antipodal_vertex(0).unwrap();
        let cfg = SingularityConfig::new(vec![(0, 0.0), (b, 0.8)]);
        let table = continuity_probe(
            &mesh,
            &cfg,
            &[0.04, 0.02, 0.01],
            &SolverSettings::default(),
        )
        .unwrap();
        let changes: Vec<f64> = table.rows.iter().map(|r| r.change.unwrap()).collect();
        assert!(changes[0] > changes[1] && changes[1] > changes[2], "{changes:?}");
        for row in &table.rows {
            assert!(row.ratio.unwrap() <= 5.0, "ratio {:?}", row.ratio);
        }
    }

    #[test]
    fn non_monotone_deltas_are_rejected() {
        let mesh = Arc::new(build_sphere(2).unwrap());
        let cfg = SingularityConfig::new(vec![(0, 0.0), (10, 0.1)]);
        assert!(matches!(
            continuity_probe(&mesh, &cfg, &[0.01, 0.02], &SolverSettings::default()),
            Err(MgError::InvalidConfig(_))
        ));
    }

    #[test]
    fn common_shift_is_exact_equivariance() {
        let mesh = Arc::new(build_sphere(3).unwrap());
        let b = mesh.antipodal_vertex(0).unwrap();
        let cfg = SingularityConfig::new(vec![(0, 0.0), (b, 0.8)]);
        let dev =
            shift_equivariance(&mesh, &cfg, &SolverSettings::default(), 0.37).unwrap();
        assert!(dev <= 1e-9, "equivariance deviation {dev}");
    }

    #[test]
    fn reordering_marks_leaves_the_field_unchanged() {
        let mesh = Arc::new(build_sphere(2).unwrap());
        let configs = sample_configs(&mesh, 3, 1, 5).unwrap();
        let settings = SolverSettings::default();
        let a = solve_marked(&mesh, &configs[0], &[0, 1, 2], &settings).unwrap();
        let b = solve_marked(&mesh, &configs[0], &[2, 0, 1], &settings).unwrap();
        assert!(a.mark != b.mark);
        assert!(
            a.unmarked_sup_diff(&b) <= 1e-9,
            "unmarked fields differ by {}",
            a.unmarked_sup_diff(&b)
        );
    }

    #[test]
    fn perturbed_configs_keep_their_singularities() {
        let mesh = Arc::new(build_sphere(4).unwrap());
        // far-separated pair so the cone rings are resolvable at this level
        let b = mesh.antipodal_vertex(0).unwrap();
        let cfg = SingularityConfig::new(vec![(0, 0.0), (b, 0.9)]);
        let cert = validate_spacelike(&mesh, &cfg).unwrap();
        let delta = 0.25 * cert.margin.min(1.0);
        let row =
            openness_probe(&mesh, &cfg, &SolverSettings::default(), delta, 13).unwrap();
        assert!(
            row.all_detected,
            "cone detection lost under perturbation: terminal {}",
            row.min_terminal
        );
        assert!(row.applied.iter().all(|d| d.abs() <= delta));
    }
}
