//! C ABI for the maxgraph library.
//!
//! The interface follows the usual opaque-handle pattern: `mg_mesh_*`,
//! `mg_config_*` and `mg_graph_*` functions create, query and destroy
//! heap-allocated handles, and every fallible call returns an [`MgStatus`]
//! code. On failure a human-readable message is stored in a thread-local
//! buffer retrievable with [`mg_last_error_message`].
//!
//! Rules of the road:
//!
//! * Every handle returned by a `*_sphere`/`*_torus`/`*_new`/`mg_solve` call
//!   must be released exactly once with the matching `*_free` function.
//!   `*_free` accepts `NULL`.
//! * Handles are not reference-counted across the boundary; do not free a
//!   mesh while a solve that borrows it is running on another thread.
//!   (A finished [`MgGraph`] keeps the mesh alive internally, so freeing the
//!   mesh handle after `mg_solve` returns is fine.)
//! * Read-only queries may be issued from any thread; the error buffer is
//!   per-thread, so check `mg_last_error_message` on the thread that failed.
//! * All panics are caught at the boundary and surface as
//!   [`MgStatus::Resource`] rather than unwinding into the caller.
//!
//! The companion header `include/maxgraph.h` is regenerated on every build.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::sync::Arc;

use maxgraph::analysis::verify;
use maxgraph::config::{validate_spacelike, SingularityConfig};
use maxgraph::error::MgError;
use maxgraph::mesh::{build_sphere, build_torus, SurfaceMesh};
use maxgraph::solver::{solve_singular, SingularMaximalGraph, SolverSettings};

/// Result code returned by every fallible call in this interface.
#[repr(C)]
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MgStatus {
    /// The call succeeded.
    Ok = 0,
    /// A pointer was null, a buffer length wrong, or a scalar out of range.
    /// The library state is untouched.
    InvalidArgument = 1,
    /// The problem data was rejected (non-spacelike heights, bad vertex ids,
    /// invalid solver tolerances, ...).
    Domain = 2,
    /// The mesh is too coarse for the requested construction.
    Resolution = 3,
    /// The iteration failed to reach the requested tolerance.
    NoConvergence = 4,
    /// Resource exhaustion, I/O failure, or an internal error.
    Resource = 5,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let clean: String = msg.chars().map(|c| if c == '\0' { ' ' } else { c }).collect();
    let cstr = CString::new(clean).unwrap_or_default();
    LAST_ERROR.with(|slot| *slot.borrow_mut() = cstr);
}

fn clear_error() {
    LAST_ERROR.with(|slot| *slot.borrow_mut() = CString::default());
}

fn status_of(err: &MgError) -> MgStatus {
    match err {
        MgError::ResolutionExceeded(_) => MgStatus::Resolution,
        MgError::NoConvergence { .. } => MgStatus::NoConvergence,
        e if e.is_domain_error() => MgStatus::Domain,
        _ => MgStatus::Resource,
    }
}

fn fail(err: &MgError) -> MgStatus {
    set_error(&err.to_string());
    status_of(err)
}

fn invalid(msg: &str) -> MgStatus {
    set_error(msg);
    MgStatus::InvalidArgument
}

/// Runs `f` with panics converted to `MgStatus::Resource`.
fn guarded(f: impl FnOnce() -> MgStatus) -> MgStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(status) => status,
        Err(payload) => {
            let msg = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".to_string());
            set_error(&format!("internal panic: {msg}"));
            MgStatus::Resource
        }
    }
}

/// Triangulated compact surface (opaque).
pub struct MgMesh {
    inner: Arc<SurfaceMesh>,
}

/// Prescribed singularity set: marked vertices with target heights (opaque).
pub struct MgConfig {
    inner: SingularityConfig,
}

/// A computed singular maximal graph (opaque). Owns its mesh internally.
pub struct MgGraph {
    inner: SingularMaximalGraph,
}

/// Solver controls. Obtain defaults with [`mg_solver_options_default`] and
/// override selectively; `mg_solve` also accepts `NULL` for all-defaults.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct MgSolverOptions {
    /// Newton termination threshold on the dual-area-normalized residual.
    pub newton_tol: f64,
    /// Newton iteration cap per Dirichlet solve.
    pub max_iters: u64,
    /// Initial spacelike clearance, halved each iteration (in (0,1)).
    pub barrier_delta: f64,
    /// Inter-level sup-norm change that stops the shrinking-domain loop.
    pub cauchy_tol: f64,
    /// Cap on the number of shrink levels.
    pub max_levels: u32,
}

impl MgSolverOptions {
    fn to_settings(self) -> SolverSettings {
        SolverSettings {
            newton_tol: self.newton_tol,
            max_iters: self.max_iters as usize,
            barrier_delta: self.barrier_delta,
            cauchy_tol: self.cauchy_tol,
            max_levels: self.max_levels,
            probe_triangles: None,
        }
    }
}

/// Flat summary of the verification report for a computed graph.
#[repr(C)]
#[derive(Clone, Copy)]
pub struct MgVerifySummary {
    /// Solution values stay within the prescribed height range (to 1e-8).
    pub max_principle_ok: bool,
    /// Worst excursion beyond the height range.
    pub max_principle_violation: f64,
    /// Sup-norm of the discrete mean-curvature residual away from pins.
    pub harmonicity_residual: f64,
    /// Holomorphic-quadratic-differential residual on an equatorial band;
    /// NaN when no band could be extracted on this mesh.
    pub hopf_residual: f64,
    /// Minimum area stretch factor; positive means the graph map is a local
    /// diffeomorphism off the singularities.
    pub jacobian_min: f64,
    /// Largest gradient norm over triangles not touching a pinned vertex.
    pub max_gradient_off_pins: f64,
    /// Strict spacelike bound holds off the pins.
    pub spacelike_ok: bool,
    /// Every singularity is a strict local extremum of the solution.
    pub local_extrema_ok: bool,
    /// Number of diagnostics that could not be computed on this mesh.
    pub note_count: u64,
}

/// Returns the error message for the most recent failing call on this
/// thread, as a NUL-terminated UTF-8 string.
///
/// The pointer stays valid until the next failing call on the same thread.
/// Never returns `NULL`; the buffer is empty when no error occurred.
///
/// # Safety
///
/// The returned pointer must not be freed or written through, and must not
/// be read after a subsequent failing call on this thread.
#[no_mangle]
pub unsafe extern "C" fn mg_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

// ---------------------------------------------------------------------------
// meshes
// ---------------------------------------------------------------------------

/// Builds a geodesic triangulation of the unit sphere at the given
/// subdivision level (level 0 is the icosahedron) and stores a handle in
/// `*out`.
///
/// # Safety
///
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_sphere(level: u32, out: *mut *mut MgMesh) -> MgStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("mg_mesh_sphere: out pointer is null");
        }
        match build_sphere(level) {
            Ok(mesh) => {
                clear_error();
                *out = Box::into_raw(Box::new(MgMesh { inner: Arc::new(mesh) }));
                MgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Builds a uniform triangulation of the flat torus with `nx` x `ny` cells
/// on fundamental domain `lx` x `ly` and stores a handle in `*out`.
///
/// # Safety
///
/// `out` must be a valid pointer to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_torus(
    nx: u32,
    ny: u32,
    lx: f64,
    ly: f64,
    out: *mut *mut MgMesh,
) -> MgStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("mg_mesh_torus: out pointer is null");
        }
        match build_torus(nx, ny, lx, ly) {
            Ok(mesh) => {
                clear_error();
                *out = Box::into_raw(Box::new(MgMesh { inner: Arc::new(mesh) }));
                MgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a mesh handle. Accepts `NULL`.
///
/// # Safety
///
/// `mesh` must be a handle returned by this library that has not been freed
/// already.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_free(mesh: *mut MgMesh) {
    if !mesh.is_null() {
        drop(Box::from_raw(mesh));
    }
}

/// Number of vertices, or 0 for a `NULL` handle.
///
/// # Safety
///
/// `mesh` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_vertex_count(mesh: *const MgMesh) -> u64 {
    if mesh.is_null() {
        return 0;
    }
    (*mesh).inner.vertex_count() as u64
}

/// Number of triangles, or 0 for a `NULL` handle.
///
/// # Safety
///
/// `mesh` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_triangle_count(mesh: *const MgMesh) -> u64 {
    if mesh.is_null() {
        return 0;
    }
    (*mesh).inner.triangle_count() as u64
}

/// Longest edge length, or NaN for a `NULL` handle.
///
/// # Safety
///
/// `mesh` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_size(mesh: *const MgMesh) -> f64 {
    if mesh.is_null() {
        return f64::NAN;
    }
    (*mesh).inner.mesh_size()
}

/// Copies vertex positions as `x0 y0 z0 x1 y1 z1 ...` into `out`, which
/// must hold exactly `3 * mg_mesh_vertex_count(mesh)` doubles (`len` is the
/// element count, not bytes). Torus vertices report their embedding in the
/// fundamental domain with z = 0.
///
/// # Safety
///
/// `mesh` must be a live handle and `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_mesh_positions(
    mesh: *const MgMesh,
    out: *mut f64,
    len: u64,
) -> MgStatus {
    guarded(|| {
        if mesh.is_null() || out.is_null() {
            return invalid("mg_mesh_positions: null pointer");
        }
        let handle = &*mesh;
        let vertices = &handle.inner.vertices;
        if len as usize != 3 * vertices.len() {
            return invalid(&format!(
                "mg_mesh_positions: buffer holds {} doubles but mesh needs {}",
                len,
                3 * vertices.len()
            ));
        }
        let dst = std::slice::from_raw_parts_mut(out, len as usize);
        for (i, p) in vertices.iter().enumerate() {
            dst[3 * i..3 * i + 3].copy_from_slice(p);
        }
        clear_error();
        MgStatus::Ok
    })
}

// ---------------------------------------------------------------------------
// singularity configurations
// ---------------------------------------------------------------------------

/// Creates a configuration of `count` singularities with the given mesh
/// vertex ids and prescribed heights, storing a handle in `*out`. Heights
/// must be finite and `count` at least 1; the spacelike compatibility check
/// against a concrete mesh happens in [`mg_config_validate`] / [`mg_solve`].
///
/// # Safety
///
/// `vertices` and `heights` must point to `count` readable elements each and
/// `out` to writable storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_config_new(
    vertices: *const u32,
    heights: *const f64,
    count: u64,
    out: *mut *mut MgConfig,
) -> MgStatus {
    guarded(|| {
        if vertices.is_null() || heights.is_null() || out.is_null() {
            return invalid("mg_config_new: null pointer");
        }
        if count == 0 {
            return invalid("mg_config_new: a configuration needs at least one singularity");
        }
        let vs = std::slice::from_raw_parts(vertices, count as usize);
        let ts = std::slice::from_raw_parts(heights, count as usize);
        if let Some(i) = ts.iter().position(|t| !t.is_finite()) {
            return invalid(&format!("mg_config_new: height #{i} is not finite"));
        }
        let points = vs.iter().copied().zip(ts.iter().copied()).collect();
        clear_error();
        *out = Box::into_raw(Box::new(MgConfig { inner: SingularityConfig::new(points) }));
        MgStatus::Ok
    })
}

/// Releases a configuration handle. Accepts `NULL`.
///
/// # Safety
///
/// `config` must be a handle returned by this library that has not been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn mg_config_free(config: *mut MgConfig) {
    if !config.is_null() {
        drop(Box::from_raw(config));
    }
}

/// Checks the strict spacelike condition of `config` against `mesh`.
/// On success optionally writes the certified slope margin (the largest
/// `epsilon` such that every height gap is at most `(1 - epsilon)` times the
/// corresponding surface distance) to `epsilon_out`.
///
/// Returns `Domain` with a message naming the offending pair when the
/// condition fails.
///
/// # Safety
///
/// `mesh` and `config` must be live handles; `epsilon_out` must be `NULL`
/// or point to one writable double.
#[no_mangle]
pub unsafe extern "C" fn mg_config_validate(
    mesh: *const MgMesh,
    config: *const MgConfig,
    epsilon_out: *mut f64,
) -> MgStatus {
    guarded(|| {
        if mesh.is_null() || config.is_null() {
            return invalid("mg_config_validate: null handle");
        }
        match validate_spacelike(&(*mesh).inner, &(*config).inner) {
            Ok(cert) => {
                if !epsilon_out.is_null() {
                    *epsilon_out = cert.epsilon;
                }
                clear_error();
                MgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

// ---------------------------------------------------------------------------
// solving and querying graphs
// ---------------------------------------------------------------------------

/// Fills `*out` with the default solver controls.
///
/// # Safety
///
/// `out` must point to writable storage for one `MgSolverOptions`.
#[no_mangle]
pub unsafe extern "C" fn mg_solver_options_default(out: *mut MgSolverOptions) -> MgStatus {
    guarded(|| {
        if out.is_null() {
            return invalid("mg_solver_options_default: out pointer is null");
        }
        let d = SolverSettings::default();
        *out = MgSolverOptions {
            newton_tol: d.newton_tol,
            max_iters: d.max_iters as u64,
            barrier_delta: d.barrier_delta,
            cauchy_tol: d.cauchy_tol,
            max_levels: d.max_levels,
        };
        clear_error();
        MgStatus::Ok
    })
}

/// Computes the entire maximal graph with the singularities prescribed by
/// `config` and stores a handle in `*out`. Pass `options = NULL` for
/// defaults. The returned graph keeps its own reference to the mesh, so the
/// mesh handle may be freed afterwards.
///
/// # Safety
///
/// `mesh` and `config` must be live handles, `options` must be `NULL` or
/// point to a readable `MgSolverOptions`, and `out` must be writable
/// storage for one pointer.
#[no_mangle]
pub unsafe extern "C" fn mg_solve(
    mesh: *const MgMesh,
    config: *const MgConfig,
    options: *const MgSolverOptions,
    out: *mut *mut MgGraph,
) -> MgStatus {
    guarded(|| {
        if mesh.is_null() || config.is_null() || out.is_null() {
            return invalid("mg_solve: null pointer");
        }
        let settings =
            if options.is_null() { SolverSettings::default() } else { (*options).to_settings() };
        match solve_singular(&(*mesh).inner, &(*config).inner, &settings) {
            Ok(graph) => {
                clear_error();
                *out = Box::into_raw(Box::new(MgGraph { inner: graph }));
                MgStatus::Ok
            }
            Err(e) => fail(&e),
        }
    })
}

/// Releases a graph handle. Accepts `NULL`.
///
/// # Safety
///
/// `graph` must be a handle returned by this library that has not been
/// freed already.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_free(graph: *mut MgGraph) {
    if !graph.is_null() {
        drop(Box::from_raw(graph));
    }
}

/// Number of solution values (one per mesh vertex), or 0 for `NULL`.
///
/// # Safety
///
/// `graph` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_value_count(graph: *const MgGraph) -> u64 {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.values.len() as u64
}

/// Copies the solution values (indexed by mesh vertex id) into `out`, which
/// must hold exactly `mg_graph_value_count(graph)` doubles.
///
/// # Safety
///
/// `graph` must be a live handle and `out` must point to `len` writable
/// doubles.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_values(
    graph: *const MgGraph,
    out: *mut f64,
    len: u64,
) -> MgStatus {
    guarded(|| {
        if graph.is_null() || out.is_null() {
            return invalid("mg_graph_values: null pointer");
        }
        let handle = &*graph;
        let values = &handle.inner.values;
        if len as usize != values.len() {
            return invalid(&format!(
                "mg_graph_values: buffer holds {} doubles but the graph has {} values",
                len,
                values.len()
            ));
        }
        std::slice::from_raw_parts_mut(out, values.len()).copy_from_slice(values);
        clear_error();
        MgStatus::Ok
    })
}

/// Spacelike area of the computed graph, or NaN for `NULL`.
///
/// # Safety
///
/// `graph` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_area(graph: *const MgGraph) -> f64 {
    if graph.is_null() {
        return f64::NAN;
    }
    (*graph).inner.area
}

/// Final residual sup-norm of the full-mesh solve, or NaN for `NULL`.
///
/// # Safety
///
/// `graph` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_residual(graph: *const MgGraph) -> f64 {
    if graph.is_null() {
        return f64::NAN;
    }
    (*graph).inner.residual_sup
}

/// Largest per-triangle gradient norm of the solution, or NaN for `NULL`.
///
/// # Safety
///
/// `graph` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_max_gradient(graph: *const MgGraph) -> f64 {
    if graph.is_null() {
        return f64::NAN;
    }
    (*graph).inner.max_gradient
}

/// Number of shrinking-domain levels the solver went through, or 0 for
/// `NULL`.
///
/// # Safety
///
/// `graph` must be `NULL` or a live handle from this library.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_levels_used(graph: *const MgGraph) -> u32 {
    if graph.is_null() {
        return 0;
    }
    (*graph).inner.levels_used
}

/// Runs the full verification suite on a computed graph and writes a flat
/// summary to `*out`. Diagnostics that cannot be computed on the given mesh
/// (for example moduli bands below the resolution) only increment
/// `note_count`.
///
/// # Safety
///
/// `graph` must be a live handle and `out` must point to writable storage
/// for one `MgVerifySummary`.
#[no_mangle]
pub unsafe extern "C" fn mg_graph_verify(
    graph: *const MgGraph,
    out: *mut MgVerifySummary,
) -> MgStatus {
    guarded(|| {
        if graph.is_null() || out.is_null() {
            return invalid("mg_graph_verify: null pointer");
        }
        let report = verify(&(*graph).inner);
        *out = MgVerifySummary {
            max_principle_ok: report.max_principle_ok,
            max_principle_violation: report.max_principle_violation,
            harmonicity_residual: report.harmonicity_residual,
            hopf_residual: report.hopf_residual.unwrap_or(f64::NAN),
            jacobian_min: report.jacobian_min,
            max_gradient_off_pins: report.max_gradient_off_pins,
            spacelike_ok: report.spacelike_ok,
            local_extrema_ok: !report.local_extremum_ok.is_empty()
                && report.local_extremum_ok.iter().all(|&ok| ok),
            note_count: report.notes.len() as u64,
        };
        clear_error();
        MgStatus::Ok
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    fn last_error() -> String {
        unsafe { CStr::from_ptr(mg_last_error_message()).to_string_lossy().into_owned() }
    }

    /// Index of the vertex antipodal to vertex 0, found from positions.
    fn antipode_of_zero(mesh: *const MgMesh) -> u32 {
        unsafe {
            let n = mg_mesh_vertex_count(mesh) as usize;
            let mut pos = vec![0.0f64; 3 * n];
            assert_eq!(mg_mesh_positions(mesh, pos.as_mut_ptr(), (3 * n) as u64), MgStatus::Ok);
            let p0 = [pos[0], pos[1], pos[2]];
            (0..n)
                .min_by(|&a, &b| {
                    let dot = |v: usize| {
                        p0[0] * pos[3 * v] + p0[1] * pos[3 * v + 1] + p0[2] * pos[3 * v + 2]
                    };
                    dot(a).partial_cmp(&dot(b)).unwrap()
                })
                .unwrap() as u32
        }
    }

    #[test]
    fn sphere_solve_round_trip() {
        unsafe {
            let mut mesh: *mut MgMesh = ptr::null_mut();
            assert_eq!(mg_mesh_sphere(3, &mut mesh), MgStatus::Ok);
            assert!(mg_mesh_vertex_count(mesh) > 600);
            assert_eq!(
                mg_mesh_triangle_count(mesh),
                2 * mg_mesh_vertex_count(mesh) - 4,
                "closed genus-0 triangulation"
            );
            assert!(mg_mesh_size(mesh) > 0.0);

            let pins = [0u32, antipode_of_zero(mesh)];
            let heights = [0.0f64, 0.8];
            let mut config: *mut MgConfig = ptr::null_mut();
            assert_eq!(
                mg_config_new(pins.as_ptr(), heights.as_ptr(), 2, &mut config),
                MgStatus::Ok
            );

            let mut epsilon = 0.0f64;
            assert_eq!(mg_config_validate(mesh, config, &mut epsilon), MgStatus::Ok);
            assert!(epsilon > 0.0 && epsilon < 1.0, "epsilon = {epsilon}");

            let mut graph: *mut MgGraph = ptr::null_mut();
            assert_eq!(mg_solve(mesh, config, ptr::null(), &mut graph), MgStatus::Ok);
            // the graph holds its own mesh reference
            mg_mesh_free(mesh);

            let n = mg_graph_value_count(graph) as usize;
            let mut values = vec![0.0f64; n];
            assert_eq!(mg_graph_values(graph, values.as_mut_ptr(), n as u64), MgStatus::Ok);
            assert_eq!(values[0], 0.0);
            assert_eq!(values[pins[1] as usize], 0.8);

            assert!(mg_graph_area(graph) > 12.0 && mg_graph_area(graph) < 4.0 * std::f64::consts::PI);
            assert!(mg_graph_residual(graph) < 1e-8);
            assert!(mg_graph_max_gradient(graph) < 1.0);

            let mut summary = std::mem::zeroed::<MgVerifySummary>();
            assert_eq!(mg_graph_verify(graph, &mut summary), MgStatus::Ok);
            assert!(summary.max_principle_ok);
            assert!(summary.spacelike_ok);
            assert!(summary.local_extrema_ok);
            assert!(summary.jacobian_min > 0.0);
            assert!(summary.harmonicity_residual < 1e-8);

            mg_graph_free(graph);
            mg_config_free(config);
        }
    }

    #[test]
    fn torus_mesh_reports_geometry() {
        unsafe {
            let mut mesh: *mut MgMesh = ptr::null_mut();
            assert_eq!(mg_mesh_torus(16, 16, 1.0, 1.0, &mut mesh), MgStatus::Ok);
            assert_eq!(mg_mesh_vertex_count(mesh), 256);
            assert_eq!(mg_mesh_triangle_count(mesh), 512);
            let mut pos = vec![0.0f64; 3 * 256];
            assert_eq!(mg_mesh_positions(mesh, pos.as_mut_ptr(), pos.len() as u64), MgStatus::Ok);
            assert!(pos.chunks(3).all(|p| p[2] == 0.0));
            mg_mesh_free(mesh);
        }
    }

    #[test]
    fn null_and_length_errors_are_invalid_argument() {
        unsafe {
            assert_eq!(mg_mesh_sphere(2, ptr::null_mut()), MgStatus::InvalidArgument);
            assert!(last_error().contains("null"));

            let mut config: *mut MgConfig = ptr::null_mut();
            assert_eq!(
                mg_config_new(ptr::null(), ptr::null(), 2, &mut config),
                MgStatus::InvalidArgument
            );
            let pins = [0u32];
            let heights = [f64::NAN];
            assert_eq!(
                mg_config_new(pins.as_ptr(), heights.as_ptr(), 0, &mut config),
                MgStatus::InvalidArgument
            );
            assert_eq!(
                mg_config_new(pins.as_ptr(), heights.as_ptr(), 1, &mut config),
                MgStatus::InvalidArgument
            );
            assert!(last_error().contains("not finite"));

            let mut mesh: *mut MgMesh = ptr::null_mut();
            assert_eq!(mg_mesh_sphere(2, &mut mesh), MgStatus::Ok);
            let mut buf = [0.0f64; 7];
            assert_eq!(
                mg_mesh_positions(mesh, buf.as_mut_ptr(), 7),
                MgStatus::InvalidArgument
            );
            assert!(last_error().contains("buffer"));
            mg_mesh_free(mesh);

            // value queries degrade gracefully on null handles
            assert_eq!(mg_mesh_vertex_count(ptr::null()), 0);
            assert!(mg_graph_area(ptr::null()).is_nan());
            mg_mesh_free(ptr::null_mut());
            mg_config_free(ptr::null_mut());
            mg_graph_free(ptr::null_mut());
        }
    }

    #[test]
    fn non_spacelike_heights_are_domain_errors() {
        unsafe {
            let mut mesh: *mut MgMesh = ptr::null_mut();
            assert_eq!(mg_mesh_sphere(3, &mut mesh), MgStatus::Ok);
            let pins = [0u32, antipode_of_zero(mesh)];
            let heights = [0.0f64, 4.0];
            let mut config: *mut MgConfig = ptr::null_mut();
            assert_eq!(
                mg_config_new(pins.as_ptr(), heights.as_ptr(), 2, &mut config),
                MgStatus::Ok
            );

            assert_eq!(mg_config_validate(mesh, config, ptr::null_mut()), MgStatus::Domain);
            assert!(last_error().contains("spacelike"), "message: {}", last_error());

            let mut graph: *mut MgGraph = ptr::null_mut();
            assert_eq!(mg_solve(mesh, config, ptr::null(), &mut graph), MgStatus::Domain);
            assert!(graph.is_null());

            // out-of-range vertex ids are domain errors too
            let bad = [0u32, u32::MAX];
            let ok_heights = [0.0f64, 0.1];
            let mut bad_config: *mut MgConfig = ptr::null_mut();
            assert_eq!(
                mg_config_new(bad.as_ptr(), ok_heights.as_ptr(), 2, &mut bad_config),
                MgStatus::Ok
            );
            assert_eq!(
                mg_config_validate(mesh, bad_config, ptr::null_mut()),
                MgStatus::Domain
            );
            mg_config_free(bad_config);

            mg_config_free(config);
            mg_mesh_free(mesh);
        }
    }

    #[test]
    fn bad_solver_options_are_domain_errors() {
        unsafe {
            let mut options = std::mem::zeroed::<MgSolverOptions>();
            assert_eq!(mg_solver_options_default(&mut options), MgStatus::Ok);
            assert!(options.newton_tol > 0.0);
            assert!(options.max_iters > 0);

            let mut mesh: *mut MgMesh = ptr::null_mut();
            assert_eq!(mg_mesh_sphere(2, &mut mesh), MgStatus::Ok);
            let pins = [0u32];
            let heights = [0.25f64];
            let mut config: *mut MgConfig = ptr::null_mut();
            assert_eq!(
                mg_config_new(pins.as_ptr(), heights.as_ptr(), 1, &mut config),
                MgStatus::Ok
            );

            options.newton_tol = 0.0;
            let mut graph: *mut MgGraph = ptr::null_mut();
            assert_eq!(mg_solve(mesh, config, &options, &mut graph), MgStatus::Domain);

            // with defaults the one-point problem solves to a constant
            assert_eq!(mg_solve(mesh, config, ptr::null(), &mut graph), MgStatus::Ok);
            let n = mg_graph_value_count(graph) as usize;
            let mut values = vec![0.0f64; n];
            assert_eq!(mg_graph_values(graph, values.as_mut_ptr(), n as u64), MgStatus::Ok);
            assert!(values.iter().all(|&v| v == 0.25));

            mg_graph_free(graph);
            mg_config_free(config);
            mg_mesh_free(mesh);
        }
    }
}
