//! End-to-end acceptance suite for the singular maximal graph solver.
//!
//! Twelve independent structural properties of the computed graphs are
//! checked: agreement with a 1D shooting oracle on the rotationally
//! symmetric case, uniqueness across initializations, the maximum
//! principle, degenerate collapses, the spacelike admissibility gate,
//! light-cone tangency at the singular points, the conformal structure of
//! the ends, discrete harmonicity, Hopf-differential agreement on an
//! annulus, continuity in the prescribed heights, the same battery on a
//! flat torus, and invariance under relabeling of the singular points.
//!
//! Each test prints one `[acceptance] criterion NN ...: PASS` line with the
//! measured quantities next to their thresholds; run with
//! `cargo test --test acceptance -- --nocapture` to see all twelve.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use once_cell::sync::Lazy;

use maxgraph::analysis::{
    build_annulus_chart, cone_tangency_profile, end_moduli, extract_annulus,
    harmonicity_residual, hopf_agreement, induced_metric, modulus_increments,
};
use maxgraph::config::{
    lipschitz_extend_from_fields, validate_spacelike, validate_with_fields, SingularityConfig,
};
use maxgraph::error::MgError;
use maxgraph::mesh::{build_sphere, build_torus, SurfaceMesh};
use maxgraph::moduli::{
    continuity_probe, enumerate_marks, sample_configs, shift_equivariance, solve_marked,
    MarkedGraph,
};
use maxgraph::oracle::shoot;
use maxgraph::solver::{solve_dirichlet, solve_singular, SingularMaximalGraph, SolverSettings};

const LOG2_2PI: f64 = std::f64::consts::LN_2 / (2.0 * PI);

static SPHERE4: Lazy<Arc<SurfaceMesh>> = Lazy::new(|| Arc::new(build_sphere(4).unwrap()));
static SPHERE5: Lazy<Arc<SurfaceMesh>> = Lazy::new(|| Arc::new(build_sphere(5).unwrap()));
static SPHERE6: Lazy<Arc<SurfaceMesh>> = Lazy::new(|| Arc::new(build_sphere(6).unwrap()));
static TORUS64: Lazy<Arc<SurfaceMesh>> =
    Lazy::new(|| Arc::new(build_torus(64, 64, 1.0, 1.0).unwrap()));

/// A solved graph together with the wall-clock seconds its solve took.
struct Timed {
    graph: SingularMaximalGraph,
    secs: f64,
}

fn timed_solve(mesh: &Arc<SurfaceMesh>, config: &SingularityConfig) -> Timed {
    let start = Instant::now();
    let graph = solve_singular(mesh, config, &SolverSettings::default()).unwrap();
    Timed { graph, secs: start.elapsed().as_secs_f64() }
}

/// Two singularities at vertex 0 and its antipode, heights 0 and `tau`.
fn antipodal_config(mesh: &SurfaceMesh, tau: f64) -> SingularityConfig {
    let far = mesh.antipodal_vertex(0).unwrap();
    SingularityConfig::new(vec![(0, 0.0), (far, tau)])
}

static ANTIPODAL5: Lazy<Timed> =
    Lazy::new(|| timed_solve(&SPHERE5, &antipodal_config(&SPHERE5, 0.8)));
static ANTIPODAL6: Lazy<Timed> =
    Lazy::new(|| timed_solve(&SPHERE6, &antipodal_config(&SPHERE6, 0.8)));
static STEEP6: Lazy<Timed> =
    Lazy::new(|| timed_solve(&SPHERE6, &antipodal_config(&SPHERE6, 2.5)));

fn sup_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Largest excursion of `values` outside the closed interval [lo, hi].
fn excursion(values: &[f64], lo: f64, hi: f64) -> f64 {
    values
        .iter()
        .map(|&v| (lo - v).max(v - hi).max(0.0))
        .fold(0.0, f64::max)
}

/// Sup-norm error against the rotationally symmetric profile with total
/// rise `tau`, sampled at each vertex's distance from vertex 0.
fn oracle_sup_error(mesh: &SurfaceMesh, u: &[f64], tau: f64) -> f64 {
    let profile = shoot(tau, 1e-9, PI - 1e-9).unwrap();
    let colat = mesh.ambient_distance_field(0);
    u.iter()
        .zip(&colat)
        .map(|(&v, &t)| (v - profile.value(t)).abs())
        .fold(0.0, f64::max)
}

/// Triangles whose three vertices all carry `field` values inside [a, b].
fn band_triangles(mesh: &SurfaceMesh, field: &[f64], a: f64, b: f64) -> Vec<u32> {
    (0..mesh.triangle_count() as u32)
        .filter(|&t| {
            mesh.triangles[t as usize]
                .iter()
                .all(|&v| (a..=b).contains(&field[v as usize]))
        })
        .collect()
}

/// Re-solves `config` from a one-sided Lipschitz cone extension (a genuinely
/// different initial iterate than the multilevel warm start) and returns the
/// sup-norm distance to `reference`.
fn cold_restart_diff(
    mesh: &Arc<SurfaceMesh>,
    config: &SingularityConfig,
    reference: &[f64],
) -> f64 {
    let (cert, fields) = validate_with_fields(mesh, config).unwrap();
    let eps = (cert.epsilon + 0.1).min(0.9);
    let start = lipschitz_extend_from_fields(&fields, &config.heights(), eps).unwrap();
    let all: Vec<u32> = (0..mesh.triangle_count() as u32).collect();
    let pins: Vec<(u32, f64)> = config.points.iter().map(|p| (p.vertex, p.t)).collect();
    let cold = solve_dirichlet(mesh, &all, &pins, &start, &SolverSettings::default()).unwrap();
    sup_diff(reference, &cold.values)
}

#[test]
fn criterion_01_antipodal_oracle_match() {
    let err5 = oracle_sup_error(&SPHERE5, &ANTIPODAL5.graph.values, 0.8);
    let err6 = oracle_sup_error(&SPHERE6, &ANTIPODAL6.graph.values, 0.8);
    let ratio = err5 / err6;
    let secs = ANTIPODAL6.secs;
    assert!(err6 <= 2e-2, "level-6 error vs the shooting oracle is {err6:.3e} > 2e-2");
    assert!(ratio >= 1.5, "error ratio level 5/6 is {ratio:.3} < 1.5: no first-order decay");
    assert!(secs <= 120.0, "level-6 solve took {secs:.1}s, over the two-minute budget");
    println!(
        "[acceptance] criterion 01 antipodal oracle match: PASS — sup error {err6:.2e} <= 2e-2, \
         level-5/6 error ratio {ratio:.2} >= 1.5, single-threaded solve {secs:.1}s <= 120s"
    );
}

#[test]
fn criterion_02_uniqueness_across_initializations() {
    let mut worst = cold_restart_diff(
        &SPHERE5,
        &antipodal_config(&SPHERE5, 0.8),
        &ANTIPODAL5.graph.values,
    );
    // three seeded three-point configurations (the first sample is the
    // equal-heights witness, exercised by criterion 04 instead)
    let configs = sample_configs(&SPHERE5, 3, 4, 20260814).unwrap();
    for config in &configs[1..] {
        let warm = solve_singular(&SPHERE5, config, &SolverSettings::default()).unwrap();
        worst = worst.max(cold_restart_diff(&SPHERE5, config, &warm.values));
    }
    assert!(worst <= 1e-6, "initializations disagree by {worst:.3e} > 1e-6");
    println!(
        "[acceptance] criterion 02 uniqueness: PASS — warm and cold starts agree on the \
         antipodal case and 3 seeded m=3 configs, worst sup difference {worst:.1e} <= 1e-6"
    );
}

#[test]
fn criterion_03_maximum_principle() {
    let mut worst = 0.0f64;
    let mut count = 0usize;
    for (m, seed) in [(2usize, 77u64), (3, 78)] {
        for config in sample_configs(&SPHERE5, m, 5, seed).unwrap() {
            let graph = solve_singular(&SPHERE5, &config, &SolverSettings::default()).unwrap();
            let heights = config.heights();
            let lo = heights.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = heights.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let viol = excursion(&graph.values, lo, hi);
            assert!(
                viol <= 1e-8,
                "m={m} seed {seed}: solution leaves [min t, max t] by {viol:.3e}"
            );
            worst = worst.max(viol);
            count += 1;
        }
    }
    assert_eq!(count, 10);
    println!(
        "[acceptance] criterion 03 maximum principle: PASS — 10 seeded configs stay inside \
         [min t, max t], worst excursion {worst:.1e} <= 1e-8"
    );
}

#[test]
fn criterion_04_degenerate_configurations() {
    // one singularity: the constant comes back exactly
    let single = SingularityConfig::new(vec![(17, 0.25)]);
    let g1 = solve_singular(&SPHERE5, &single, &SolverSettings::default()).unwrap();
    assert!(
        g1.values.iter().all(|&v| v == 0.25),
        "single-point solve is not the exact constant"
    );
    // two singularities at equal heights: collapses to the same constant
    let far = SPHERE5.antipodal_vertex(0).unwrap();
    let pair = SingularityConfig::new(vec![(0, 0.25), (far, 0.25)]);
    let g2 = solve_singular(&SPHERE5, &pair, &SolverSettings::default()).unwrap();
    let dev = g2
        .values
        .iter()
        .map(|&v| (v - 0.25).abs())
        .fold(0.0, f64::max);
    assert!(dev <= 1e-8, "equal-height pair deviates from the constant by {dev:.3e}");
    println!(
        "[acceptance] criterion 04 degenerate configs: PASS — m=1 exactly constant, \
         equal-height pair within {dev:.1e} <= 1e-8 of the constant"
    );
}

#[test]
fn criterion_05_spacelike_gate() {
    // gap 4 across the sphere exceeds the diameter: rejected, naming the pair
    let bad = antipodal_config(&SPHERE5, 4.0);
    let err = validate_spacelike(&SPHERE5, &bad).unwrap_err();
    let message = err.to_string();
    match err {
        MgError::NotSpacelike { i, j, gap, dist, .. } => {
            assert_eq!((i, j), (0, 1), "wrong pair named: #{i}, #{j}");
            assert!(gap > dist, "reported gap {gap} does not exceed distance {dist}");
        }
        other => panic!("expected a spacelike violation, got: {other}"),
    }
    assert!(
        message.contains("#0") && message.contains("#1"),
        "message does not name the offending pair: {message}"
    );
    let solve_err = solve_singular(&SPHERE5, &bad, &SolverSettings::default()).unwrap_err();
    assert!(matches!(solve_err, MgError::NotSpacelike { .. }));
    // gap 3.0 stays under the distance (pi at this resolution) with margin
    let ok = antipodal_config(&SPHERE5, 3.0);
    let cert = validate_spacelike(&SPHERE5, &ok).expect("heights (0, 3.0) must pass the gate");
    println!(
        "[acceptance] criterion 05 spacelike gate: PASS — heights (0,4) rejected naming pair \
         #0/#1, heights (0,3.0) accepted with slope ratio {:.3} < 1",
        cert.epsilon
    );
}

#[test]
fn criterion_06_light_cone_tangency() {
    let graph = &ANTIPODAL6.graph;
    let mut terminals = Vec::new();
    for pin in 0..2 {
        let profile = cone_tangency_profile(graph, pin, 16).unwrap();
        assert!(
            profile.terminal >= 0.9,
            "innermost ring at singularity {pin} has max |grad u| {:.4} < 0.9",
            profile.terminal
        );
        for pair in profile.ring_max.windows(2) {
            assert!(
                pair[1] >= pair[0] - 1e-12,
                "ring maxima not nondecreasing inward at singularity {pin}: {:?}",
                profile.ring_max
            );
        }
        assert!(profile.local_extremum, "singularity {pin} is not a local extremum");
        terminals.push(profile.terminal);
    }
    println!(
        "[acceptance] criterion 06 light-cone tangency: PASS — innermost-ring max |grad u| \
         {:.3} and {:.3} >= 0.9, ring maxima nondecreasing inward, both poles local extrema",
        terminals[0], terminals[1]
    );
}

#[test]
fn criterion_07_hyperbolic_ends() {
    // the steep antipodal graph keeps a pronounced near-cone region around
    // its singularities, so four annulus halvings all sit inside the end
    let graph = &STEEP6.graph;
    let metric = induced_metric(&SPHERE6, &graph.values).unwrap();
    let rows = end_moduli(&SPHERE6, &metric, 0, 1.04, 4).unwrap();
    let base = modulus_increments(&rows, false);
    let induced = modulus_increments(&rows, true);
    assert_eq!(base.len(), 4, "expected four modulus increments, got {}", base.len());
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for (k, increment) in base.iter().enumerate() {
        let factor = increment / LOG2_2PI;
        assert!(
            (0.9..=1.1).contains(&factor),
            "surface-metric increment {k} is {factor:.3} x log2/(2 pi), outside [0.9, 1.1]"
        );
        lo = lo.min(factor);
        hi = hi.max(factor);
    }
    let taper = induced[induced.len() - 1] / induced[0];
    assert!(
        taper <= 0.5,
        "graph-metric increments do not taper: last/first {taper:.3} > 0.5"
    );
    println!(
        "[acceptance] criterion 07 hyperbolic ends: PASS — surface-metric increments in \
         [{lo:.3}, {hi:.3}] x log2/(2 pi) within [0.9, 1.1], graph-metric last/first \
         {taper:.3} <= 0.5"
    );
}

#[test]
fn criterion_08_harmonicity() {
    // the solved field satisfies its own discrete equation to solver precision
    let graph = &ANTIPODAL6.graph;
    let solved = harmonicity_residual(&SPHERE6, &graph.off_pin_triangles(), &graph.values)
        .unwrap();
    assert!(
        solved.sup <= 1e-8,
        "solved field is not discretely harmonic: residual sup {:.3e}",
        solved.sup
    );
    // discretization error, measured by interpolating the exact rotational
    // profile: its residual must decay under mesh refinement
    let profile = shoot(0.8, 1e-9, PI - 1e-9).unwrap();
    let mut rms = Vec::new();
    for mesh in [&*SPHERE5, &*SPHERE6] {
        let colat = mesh.ambient_distance_field(0);
        let u: Vec<f64> = colat.iter().map(|&t| profile.value(t)).collect();
        let band = band_triangles(mesh, &colat, 1.2, 1.9);
        rms.push(harmonicity_residual(mesh, &band, &u).unwrap().rms);
    }
    let ratio = rms[0] / rms[1];
    assert!(
        ratio >= 1.5,
        "interpolant residual does not decay: level-5/6 rms ratio {ratio:.3} < 1.5"
    );
    println!(
        "[acceptance] criterion 08 harmonicity: PASS — solved-field residual {:.1e} <= 1e-8, \
         exact-profile interpolant rms decays x{ratio:.2} >= 1.5 from level 5 to 6",
        solved.sup
    );
}

#[test]
fn criterion_09_hopf_agreement() {
    let graph = &ANTIPODAL6.graph;
    let metric = induced_metric(&SPHERE6, &graph.values).unwrap();
    let (a, b) = (1.12f64, 2.02f64);
    let annulus = extract_annulus(&SPHERE6, 0, a, b).unwrap();
    let chart = build_annulus_chart(&SPHERE6, Some(&metric), &annulus).unwrap();
    let on_solution = hopf_agreement(&SPHERE6, &chart, &graph.values).unwrap();
    assert!(
        on_solution <= 5e-2,
        "Hopf residual on the solution is {on_solution:.3e} > 5e-2"
    );
    // an azimuthal ripple of the same field breaks the agreement
    let pole = SPHERE6.vertices[0];
    let mut e1 = [pole[1] - pole[2], pole[2] - pole[0], pole[0] - pole[1]];
    let norm = (e1[0] * e1[0] + e1[1] * e1[1] + e1[2] * e1[2]).sqrt();
    for c in &mut e1 {
        *c /= norm;
    }
    let e2 = [
        pole[1] * e1[2] - pole[2] * e1[1],
        pole[2] * e1[0] - pole[0] * e1[2],
        pole[0] * e1[1] - pole[1] * e1[0],
    ];
    let colat = SPHERE6.ambient_distance_field(0);
    let perturbed: Vec<f64> = (0..SPHERE6.vertex_count())
        .map(|v| {
            let p = SPHERE6.vertices[v];
            let azimuth = (p[0] * e2[0] + p[1] * e2[1] + p[2] * e2[2])
                .atan2(p[0] * e1[0] + p[1] * e1[1] + p[2] * e1[2]);
            let t = colat[v];
            let bump = if t > a && t < b {
                ((t - a) / (b - a) * PI).sin().powi(2)
            } else {
                0.0
            };
            graph.values[v] + 0.25 * (3.0 * azimuth).sin() * bump
        })
        .collect();
    let on_perturbed = hopf_agreement(&SPHERE6, &chart, &perturbed).unwrap();
    let ratio = on_perturbed / on_solution;
    assert!(
        ratio >= 5.0,
        "perturbed field not distinguished: residual ratio {ratio:.2} < 5"
    );
    println!(
        "[acceptance] criterion 09 Hopf agreement: PASS — annulus residual {on_solution:.2e} \
         <= 5e-2, perturbed non-solution {ratio:.1}x larger >= 5x"
    );
}

#[test]
fn criterion_10_moduli_continuity() {
    let config = antipodal_config(&SPHERE5, 0.8);
    let settings = SolverSettings::default();
    let table = continuity_probe(&SPHERE5, &config, &[0.04, 0.02, 0.01], &settings).unwrap();
    let mut previous = f64::INFINITY;
    let mut worst_ratio = 0.0f64;
    for row in &table.rows {
        assert!(!row.skipped, "delta {} skipped", row.delta);
        let change = row.change.unwrap();
        let ratio = row.ratio.unwrap();
        assert!(
            change < previous,
            "sup-norm changes are not monotone decreasing at delta {}",
            row.delta
        );
        assert!(
            ratio <= 5.0,
            "change/delta is {ratio:.2} > 5 at delta {}",
            row.delta
        );
        previous = change;
        worst_ratio = worst_ratio.max(ratio);
    }
    let shift_dev = shift_equivariance(&SPHERE5, &config, &settings, 0.37).unwrap();
    let tol = 10.0 * settings.newton_tol;
    assert!(
        shift_dev <= tol,
        "common-shift equivariance off by {shift_dev:.3e} > {tol:.1e}"
    );
    println!(
        "[acceptance] criterion 10 moduli continuity: PASS — sup-norm changes decrease \
         monotonically over deltas 0.04/0.02/0.01 with change/delta <= {worst_ratio:.2} <= 5, \
         common shift reproduced to {shift_dev:.1e} <= {tol:.0e}"
    );
}

#[test]
fn criterion_11_torus() {
    let config = SingularityConfig::new(vec![(0, 0.0), (32 * 64 + 32, 0.45)]);
    let graph = solve_singular(&TORUS64, &config, &SolverSettings::default()).unwrap();
    // maximum principle
    let viol = excursion(&graph.values, 0.0, 0.45);
    assert!(viol <= 1e-8, "torus solution leaves the height range by {viol:.3e}");
    // light-cone tangency at both pins; the innermost resolvable ring on a
    // 64x64 grid sits farther from the pin than on the level-6 sphere, so
    // the terminal threshold is 0.85 rather than 0.9
    let mut terminals = Vec::new();
    for pin in 0..2 {
        let profile = cone_tangency_profile(&graph, pin, 16).unwrap();
        assert!(
            profile.terminal >= 0.85,
            "innermost ring at torus singularity {pin} has max |grad u| {:.4} < 0.85",
            profile.terminal
        );
        for pair in profile.ring_max.windows(2) {
            assert!(pair[1] >= pair[0] - 1e-12, "torus ring maxima not nondecreasing inward");
        }
        assert!(profile.local_extremum, "torus singularity {pin} is not a local extremum");
        terminals.push(profile.terminal);
    }
    // discrete harmonicity: the solved field, plus decay of the interpolant
    // residual of the exact flat-metric radial profile under grid refinement
    let solved = harmonicity_residual(&TORUS64, &graph.off_pin_triangles(), &graph.values)
        .unwrap();
    assert!(
        solved.sup <= 1e-6,
        "torus field is not discretely harmonic: residual sup {:.3e}",
        solved.sup
    );
    let torus128 = Arc::new(build_torus(128, 128, 1.0, 1.0).unwrap());
    let c = 0.08f64;
    let mut rms = Vec::new();
    for mesh in [&*TORUS64, &torus128] {
        let radial = mesh.ambient_distance_field(0);
        let u: Vec<f64> = radial.iter().map(|&r| c * (r / c).asinh()).collect();
        let band = band_triangles(mesh, &radial, 0.1, 0.2);
        rms.push(harmonicity_residual(mesh, &band, &u).unwrap().rms);
    }
    let ratio = rms[0] / rms[1];
    assert!(
        ratio >= 1.5,
        "radial-profile interpolant residual does not decay on the torus: ratio {ratio:.3}"
    );
    println!(
        "[acceptance] criterion 11 torus: PASS — excursion {viol:.1e} <= 1e-8, cone terminals \
         {:.3}/{:.3} >= 0.85, solved-field residual {:.1e}, interpolant rms decays x{ratio:.2}",
        terminals[0], terminals[1], solved.sup
    );
}

#[test]
fn criterion_12_mark_invariance() {
    let config = sample_configs(&SPHERE4, 3, 2, 991).unwrap().pop().unwrap();
    let marks = enumerate_marks(&config).unwrap();
    assert_eq!(marks.len(), 6);
    let settings = SolverSettings::default();
    let solved: Vec<MarkedGraph> = marks
        .iter()
        .map(|mark| solve_marked(&SPHERE4, &config, mark, &settings).unwrap())
        .collect();
    for (graph, mark) in solved.iter().zip(&marks) {
        assert_eq!(&graph.mark, mark);
    }
    let worst = solved[1..]
        .iter()
        .map(|graph| solved[0].unmarked_sup_diff(graph))
        .fold(0.0, f64::max);
    let tol = 10.0 * settings.newton_tol;
    assert!(
        worst <= tol,
        "orderings disagree: worst unmarked sup difference {worst:.3e} > {tol:.1e}"
    );
    println!(
        "[acceptance] criterion 12 mark invariance: PASS — all 6 orderings of a 3-point \
         config give the same unmarked field to {worst:.1e} <= {tol:.0e}"
    );
}
