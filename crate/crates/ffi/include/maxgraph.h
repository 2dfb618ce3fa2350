/* C interface for the maxgraph library.
 * Generated by cbindgen; do not edit. */

#pragma once

#include <stdarg.h>
#include <stdbool.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code returned by every fallible call in this interface.
 */
typedef enum MgStatus {
  /**
   * The call succeeded.
   */
  MgStatus_Ok = 0,
  /**
   * A pointer was null, a buffer length wrong, or a scalar out of range.
   * The library state is untouched.
   */
  MgStatus_InvalidArgument = 1,
  /**
   * The problem data was rejected (non-spacelike heights, bad vertex ids,
   * invalid solver tolerances, ...).
   */
  MgStatus_Domain = 2,
  /**
   * The mesh is too coarse for the requested construction.
   */
  MgStatus_Resolution = 3,
  /**
   * The iteration failed to reach the requested tolerance.
   */
  MgStatus_NoConvergence = 4,
  /**
   * Resource exhaustion, I/O failure, or an internal error.
   */
  MgStatus_Resource = 5,
} MgStatus;

/**
 * Prescribed singularity set: marked vertices with target heights (opaque).
 */
typedef struct MgConfig MgConfig;

/**
 * A computed singular maximal graph (opaque). Owns its mesh internally.
 */
typedef struct MgGraph MgGraph;

/**
 * Triangulated compact surface (opaque).
 */
typedef struct MgMesh MgMesh;

/**
 * Solver controls. Obtain defaults with [`mg_solver_options_default`] and
 * override selectively; `mg_solve` also accepts `NULL` for all-defaults.
 */
typedef struct MgSolverOptions {
  /**
   * Newton termination threshold on the dual-area-normalized residual.
   */
  double newton_tol;
  /**
   * Newton iteration cap per Dirichlet solve.
   */
  uint64_t max_iters;
  /**
   * Initial spacelike clearance, halved each iteration (in (0,1)).
   */
  double barrier_delta;
  /**
   * Inter-level sup-norm change that stops the shrinking-domain loop.
   */
  double cauchy_tol;
  /**
   * Cap on the number of shrink levels.
   */
  uint32_t max_levels;
} MgSolverOptions;

/**
 * Flat summary of the verification report for a computed graph.
 */
typedef struct MgVerifySummary {
  /**
   * Solution values stay within the prescribed height range (to 1e-8).
   */
  bool max_principle_ok;
  /**
   * Worst excursion beyond the height range.
   */
  double max_principle_violation;
  /**
   * Sup-norm of the discrete mean-curvature residual away from pins.
   */
  double harmonicity_residual;
  /**
   * Holomorphic-quadratic-differential residual on an equatorial band;
   * NaN when no band could be extracted on this mesh.
   */
  double hopf_residual;
  /**
   * Minimum area stretch factor; positive means the graph map is a local
   * diffeomorphism off the singularities.
   */
  double jacobian_min;
  /**
   * Largest gradient norm over triangles not touching a pinned vertex.
   */
  double max_gradient_off_pins;
  /**
   * Strict spacelike bound holds off the pins.
   */
  bool spacelike_ok;
  /**
   * Every singularity is a strict local extremum of the solution.
   */
  bool local_extrema_ok;
  /**
   * Number of diagnostics that could not be computed on this mesh.
   */
  uint64_t note_count;
} MgVerifySummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the error message for the most recent failing call on this
 * thread, as a NUL-terminated UTF-8 string.
 *
 * The pointer stays valid until the next failing call on the same thread.
 * Never returns `NULL`; the buffer is empty when no error occurred.
 *
 * # Safety
 *
 * The returned pointer must not be freed or written through, and must not
 * be read after a subsequent failing call on this thread.
 */
const char *mg_last_error_message(void);

/**
 * Builds a geodesic triangulation of the unit sphere at the given
 * subdivision level (level 0 is the icosahedron) and stores a handle in
 * `*out`.
 *
 * # Safety
 *
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MgStatus mg_mesh_sphere(uint32_t level, struct MgMesh **out);

/**
 * Builds a uniform triangulation of the flat torus with `nx` x `ny` cells
 * on fundamental domain `lx` x `ly` and stores a handle in `*out`.
 *
 * # Safety
 *
 * `out` must be a valid pointer to writable storage for one pointer.
 */
enum MgStatus mg_mesh_torus(uint32_t nx, uint32_t ny, double lx, double ly, struct MgMesh **out);

/**
 * Releases a mesh handle. Accepts `NULL`.
 *
 * # Safety
 *
 * `mesh` must be a handle returned by this library that has not been freed
 * already.
 */
void mg_mesh_free(struct MgMesh *mesh);

/**
 * Number of vertices, or 0 for a `NULL` handle.
 *
 * # Safety
 *
 * `mesh` must be `NULL` or a live handle from this library.
 */
uint64_t mg_mesh_vertex_count(const struct MgMesh *mesh);

/**
 * Number of triangles, or 0 for a `NULL` handle.
 *
 * # Safety
 *
 * `mesh` must be `NULL` or a live handle from this library.
 */
uint64_t mg_mesh_triangle_count(const struct MgMesh *mesh);

/**
 * Longest edge length, or NaN for a `NULL` handle.
 *
 * # Safety
 *
 * `mesh` must be `NULL` or a live handle from this library.
 */
double mg_mesh_size(const struct MgMesh *mesh);

/**
 * Copies vertex positions as `x0 y0 z0 x1 y1 z1 ...` into `out`, which
 * must hold exactly `3 * mg_mesh_vertex_count(mesh)` doubles (`len` is the
 * element count, not bytes). Torus vertices report their embedding in the
 * fundamental domain with z = 0.
 *
 * # Safety
 *
 * `mesh` must be a live handle and `out` must point to `len` writable
 * doubles.
 */
enum MgStatus mg_mesh_positions(const struct MgMesh *mesh, double *out, uint64_t len);

/**
 * Creates a configuration of `count` singularities with the given mesh
 * vertex ids and prescribed heights, storing a handle in `*out`. Heights
 * must be finite and `count` at least 1; the spacelike compatibility check
 * against a concrete mesh happens in [`mg_config_validate`] / [`mg_solve`].
 *
 * # Safety
 *
 * `vertices` and `heights` must point to `count` readable elements each and
 * `out` to writable storage for one pointer.
 */
enum MgStatus mg_config_new(const uint32_t *vertices,
                            const double *heights,
                            uint64_t count,
                            struct MgConfig **out);

/**
 * Releases a configuration handle. Accepts `NULL`.
 *
 * # Safety
 *
 * `config` must be a handle returned by this library that has not been
 * freed already.
 */
void mg_config_free(struct MgConfig *config);

/**
 * Checks the strict spacelike condition of `config` against `mesh`.
 * On success optionally writes the certified slope margin (the largest
 * `epsilon` such that every height gap is at most `(1 - epsilon)` times the
 * corresponding surface distance) to `epsilon_out`.
 *
 * Returns `Domain` with a message naming the offending pair when the
 * condition fails.
 *
 * # Safety
 *
 * `mesh` and `config` must be live handles; `epsilon_out` must be `NULL`
 * or point to one writable double.
 */
enum MgStatus mg_config_validate(const struct MgMesh *mesh,
                                 const struct MgConfig *config,
                                 double *epsilon_out);

/**
 * Fills `*out` with the default solver controls.
 *
 * # Safety
 *
 * `out` must point to writable storage for one `MgSolverOptions`.
 */
enum MgStatus mg_solver_options_default(struct MgSolverOptions *out);

/**
 * Computes the entire maximal graph with the singularities prescribed by
 * `config` and stores a handle in `*out`. Pass `options = NULL` for
 * defaults. The returned graph keeps its own reference to the mesh, so the
 * mesh handle may be freed afterwards.
 *
 * # Safety
 *
 * `mesh` and `config` must be live handles, `options` must be `NULL` or
 * point to a readable `MgSolverOptions`, and `out` must be writable
 * storage for one pointer.
 */
enum MgStatus mg_solve(const struct MgMesh *mesh,
                       const struct MgConfig *config,
                       const struct MgSolverOptions *options,
                       struct MgGraph **out);

/**
 * Releases a graph handle. Accepts `NULL`.
 *
 * # Safety
 *
 * `graph` must be a handle returned by this library that has not been
 * freed already.
 */
void mg_graph_free(struct MgGraph *graph);

/**
 * Number of solution values (one per mesh vertex), or 0 for `NULL`.
 *
 * # Safety
 *
 * `graph` must be `NULL` or a live handle from this library.
 */
uint64_t mg_graph_value_count(const struct MgGraph *graph);

/**
 * Copies the solution values (indexed by mesh vertex id) into `out`, which
 * must hold exactly `mg_graph_value_count(graph)` doubles.
 *
 * # Safety
 *
 * `graph` must be a live handle and `out` must point to `len` writable
 * doubles.
 */
enum MgStatus mg_graph_values(const struct MgGraph *graph, double *out, uint64_t len);

/**
 * Spacelike area of the computed graph, or NaN for `NULL`.
 *
 * # Safety
 *
 * `graph` must be `NULL` or a live handle from this library.
 */
double mg_graph_area(const struct MgGraph *graph);

/**
 * Final residual sup-norm of the full-mesh solve, or NaN for `NULL`.
 *
 * # Safety
 *
 * `graph` must be `NULL` or a live handle from this library.
 */
double mg_graph_residual(const struct MgGraph *graph);

/**
 * Largest per-triangle gradient norm of the solution, or NaN for `NULL`.
 *
 * # Safety
 *
 * `graph` must be `NULL` or a live handle from this library.
 */
double mg_graph_max_gradient(const struct MgGraph *graph);

/**
 * Number of shrinking-domain levels the solver went through, or 0 for
 * `NULL`.
 *
 * # Safety
 *
 * `graph` must be `NULL` or a live handle from this library.
 */
uint32_t mg_graph_levels_used(const struct MgGraph *graph);

/**
 * Runs the full verification suite on a computed graph and writes a flat
 * summary to `*out`. Diagnostics that cannot be computed on the given mesh
 * (for example moduli bands below the resolution) only increment
 * `note_count`.
 *
 * # Safety
 *
 * `graph` must be a live handle and `out` must point to writable storage
 * for one `MgVerifySummary`.
 */
enum MgStatus mg_graph_verify(const struct MgGraph *graph, struct MgVerifySummary *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus
