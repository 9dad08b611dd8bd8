#ifndef SURFVORT_H
#define SURFVORT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result of every fallible call. Codes 1 to 4 match the CLI exit codes.
 */
typedef enum {
  SV_STATUS_OK = 0,
  SV_STATUS_CONFIG = 1,
  SV_STATUS_TOPOLOGY = 2,
  SV_STATUS_NOT_CONVERGED = 3,
  SV_STATUS_COLLISION = 4,
  SV_STATUS_INVALID_ARGUMENT = 5,
  SV_STATUS_PANIC = 6,
} SvStatus;

/**
 * A mesh together with its conformal sphere image and factors.
 */
typedef struct SvAtlas SvAtlas;

/**
 * A triangle mesh.
 */
typedef struct SvMesh SvMesh;

/**
 * A prepared scenario and its current state.
 */
typedef struct SvSimulation SvSimulation;

/**
 * Parameters of the flow to the sphere.
 */
typedef struct {
  double delta;
  double tol;
  size_t max_iters;
} SvCmcfParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, static storage.
 */
const char *sv_version(void);

/**
 * Message of the last failed call on this thread, or null. Valid until the
 * next call into the library from the same thread.
 */
const char *sv_last_error(void);

/**
 * Loads an OBJ file.
 */
SvStatus sv_mesh_load_obj(const char *path, SvMesh **out);

/**
 * Builds a mesh from `3 * vertex_count` coordinates and
 * `3 * triangle_count` zero-based vertex indices.
 */
SvStatus sv_mesh_from_arrays(const double *vertices,
                             size_t vertex_count,
                             const uint32_t *triangles,
                             size_t triangle_count,
                             SvMesh **out);

size_t sv_mesh_vertex_count(const SvMesh *mesh);

size_t sv_mesh_triangle_count(const SvMesh *mesh);

/**
 * Null is accepted.
 */
void sv_mesh_free(SvMesh *mesh);

SvCmcfParams sv_cmcf_default_params(void);

/**
 * Maps a closed genus-zero mesh to the sphere. `params` may be null for
 * the defaults. The mesh is copied.
 */
SvStatus sv_atlas_build(const SvMesh *mesh, const SvCmcfParams *params, SvAtlas **out);

size_t sv_atlas_vertex_count(const SvAtlas *atlas);

size_t sv_atlas_iterations(const SvAtlas *atlas);

/**
 * Sphericity residual of the final flow iterate; NaN for a null atlas.
 */
double sv_atlas_residual(const SvAtlas *atlas);

/**
 * Writes `3 * vertex_count` sphere coordinates.
 */
SvStatus sv_atlas_sphere_positions(const SvAtlas *atlas, double *out, size_t len);

/**
 * Writes one conformal factor `h` per vertex.
 */
SvStatus sv_atlas_factors(const SvAtlas *atlas, double *out, size_t len);

void sv_atlas_free(SvAtlas *atlas);

/**
 * Prepares a scenario given as JSON text. Relative mesh paths resolve
 * against the working directory.
 */
SvStatus sv_simulation_from_json(const char *json, SvSimulation **out);

/**
 * Prepares a bundled preset by name.
 */
SvStatus sv_simulation_from_preset(const char *name, SvSimulation **out);

size_t sv_simulation_vortex_count(const SvSimulation *sim);

double sv_simulation_time(const SvSimulation *sim);

size_t sv_simulation_steps_taken(const SvSimulation *sim);

/**
 * Advances `steps` RK4 steps of the scenario's `dt`. On failure the state
 * stays at the last completed step.
 */
SvStatus sv_simulation_step(SvSimulation *sim, size_t steps);

/**
 * Writes `3 * vortex_count` coordinates: planar points with z = 0, or
 * unit vectors for the sphere and for meshes (their sphere images).
 */
SvStatus sv_simulation_positions(const SvSimulation *sim, double *out, size_t len);

/**
 * Like `sv_simulation_positions`, but mesh scenarios report points on
 * the mesh.
 */
SvStatus sv_simulation_surface_positions(SvSimulation *sim, double *out, size_t len);

/**
 * Kinetic energy of the current state and, on meshes, the metric
 * Hamiltonian `H̃` (NaN elsewhere). Either output may be null.
 */
SvStatus sv_simulation_energy(SvSimulation *sim, double *kinetic, double *metric);

void sv_simulation_free(SvSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SURFVORT_H */
