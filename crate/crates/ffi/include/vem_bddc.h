#ifndef VEM_BDDC_H
#define VEM_BDDC_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum VbStatus {
  VB_STATUS_OK = 0,
  VB_STATUS_NULL_POINTER = 1,
  VB_STATUS_INVALID_ARGUMENT = 2,
  VB_STATUS_IO = 3,
  VB_STATUS_PARSE = 4,
  VB_STATUS_VALIDATION = 5,
  VB_STATUS_GEOMETRY = 6,
  VB_STATUS_PARTITION = 7,
  VB_STATUS_DEGENERATE_EDGE = 8,
  VB_STATUS_SINGULAR = 9,
  VB_STATUS_DIMENSION = 10,
  VB_STATUS_BREAKDOWN = 11,
  VB_STATUS_NOT_CONVERGED = 12,
  VB_STATUS_SOLVE_FAILED = 13,
  VB_STATUS_PANIC = 14,
} VbStatus;

typedef enum VbFamily {
  VB_FAMILY_QUAD = 0,
  VB_FAMILY_HEXA = 1,
  VB_FAMILY_TRI = 2,
  VB_FAMILY_CVT = 3,
} VbFamily;

typedef enum VbMethod {
  VB_METHOD_GMRES = 0,
  VB_METHOD_PCG_VERTICES = 1,
  VB_METHOD_PCG_VERTICES_NORMAL = 2,
  VB_METHOD_PCG_VERTICES_FULL = 3,
} VbMethod;

// Generated or loaded mesh together with its assembled Stokes system.
typedef struct VbMesh VbMesh;

// Recovered fields and statistics of one solve.
typedef struct VbSolution VbSolution;

// Solver settings; obtain defaults from [`vb_solve_options_default`].
typedef struct VbSolveOptions {
  double tol;
  size_t max_iter;
  // keep iterating through indefinite PCG steps
  bool allow_indefinite;
} VbSolveOptions;

// Scalar results of a solve. Quantities that were not computed are NaN.
typedef struct VbSummary {
  size_t iterations;
  bool converged;
  size_t indefinite_steps;
  size_t interface_dofs;
  double kappa;
  double lambda_min;
  double lambda_max;
  double velocity_h1_error;
  double pressure_l2_error;
  double div_max;
  double wall_time_s;
} VbSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Null-terminated version string with static lifetime.
const char *vb_version(void);

// Copies the last error message of this thread into `buf` (truncated,
// always null-terminated) and returns the full message length without the
// terminator. Returns 0 when there is no error.
//
// # Safety
// `buf` must be null or point to `len` writable bytes.
size_t vb_last_error_message(char *buf, size_t len);

// Generates a mesh of `n × n` cells (power of two) and assembles the system.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle.
enum VbStatus vb_mesh_generate(enum VbFamily family,
                               size_t n,
                               uint64_t seed,
                               size_t lloyd_iters,
                               struct VbMesh **out);

// Reads a mesh in the text format written by the CLI and assembles the system.
//
// # Safety
// `path` must be a null-terminated string; `out` must be writable.
enum VbStatus vb_mesh_read(const char *path, struct VbMesh **out);

// # Safety
// `mesh` must be null or a handle from `vb_mesh_generate`/`vb_mesh_read`
// that has not been freed.
void vb_mesh_free(struct VbMesh *mesh);

// # Safety
// `mesh` must be a live handle.
size_t vb_mesh_num_cells(const struct VbMesh *mesh);

// # Safety
// `mesh` must be a live handle.
size_t vb_mesh_num_vertices(const struct VbMesh *mesh);

struct VbSolveOptions vb_solve_options_default(void);

// Splits the mesh into `inv_big_h × inv_big_h` subdomains and solves the
// interface problem with `method`. A solution handle is returned for
// `VB_STATUS_OK` and `VB_STATUS_NOT_CONVERGED`; on other statuses `*out` is
// set to null.
//
// # Safety
// `mesh` must be a live handle, `options` null or valid, `out` writable.
enum VbStatus vb_solve(const struct VbMesh *mesh,
                       size_t inv_big_h,
                       enum VbMethod method,
                       const struct VbSolveOptions *options,
                       struct VbSolution **out);

// # Safety
// `solution` must be null or a live handle from `vb_solve`.
void vb_solution_free(struct VbSolution *solution);

// # Safety
// `solution` must be a live handle and `out` writable.
enum VbStatus vb_solution_summary(const struct VbSolution *solution, struct VbSummary *out);

// Copies the cell pressures (zero mean) into `buf`. With `buf` null only the
// required length is written to `written`.
//
// # Safety
// `solution` must be live; `buf` null or `len` writable doubles; `written`
// null or writable.
enum VbStatus vb_solution_pressure(const struct VbSolution *solution,
                                   double *buf,
                                   size_t len,
                                   size_t *written);

// Copies the velocity degrees of freedom not fixed by the boundary condition.
//
// # Safety
// Same contract as [`vb_solution_pressure`].
enum VbStatus vb_solution_velocity(const struct VbSolution *solution,
                                   double *buf,
                                   size_t len,
                                   size_t *written);

// Relative residual history of the solve (index 0 is the initial residual).
//
// # Safety
// Same contract as [`vb_solution_pressure`].
enum VbStatus vb_solution_residuals(const struct VbSolution *solution,
                                    double *buf,
                                    size_t len,
                                    size_t *written);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* VEM_BDDC_H */
