#ifndef FINSLER_PLAP_H
#define FINSLER_PLAP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum FpStatus {
  FP_STATUS_OK = 0,
  FP_STATUS_NULL_POINTER = 1,
  FP_STATUS_INVALID_ARGUMENT = 2,
  FP_STATUS_CONFIG = 3,
  FP_STATUS_ADMISSIBILITY = 4,
  FP_STATUS_DOMAIN = 5,
  FP_STATUS_NUMERIC = 6,
  FP_STATUS_NON_CONVERGENCE = 7,
  FP_STATUS_IO = 8,
  FP_STATUS_BUFFER_TOO_SMALL = 9,
  FP_STATUS_PANIC = 10,
} FpStatus;

typedef enum FpProfileKind {
  FP_PROFILE_KIND_POWER = 0,
  FP_PROFILE_KIND_SHIFTED = 1,
} FpProfileKind;

// Opaque nodal field with its mesh.
typedef struct FpField FpField;

// Opaque material profile.
typedef struct FpMaterial FpMaterial;

// Opaque triangle mesh.
typedef struct FpMesh FpMesh;

// Opaque Finsler norm on ℝ².
typedef struct FpNorm FpNorm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Copies the last error message of this thread into `buf` (NUL
// terminated, truncated to `len`) and returns its full length in bytes.
size_t fp_last_error(char *buf, size_t len);

enum FpStatus fp_norm_euclidean(struct FpNorm **out);

// `H(ξ) = sqrt(a ξ₁² + b ξ₂²)`.
enum FpStatus fp_norm_diagonal(double a, double b, struct FpNorm **out);

// `H(ξ) = sqrt(ξᵀAξ)` with `A` given row-major (2×2, symmetric positive
// definite).
enum FpStatus fp_norm_ellipsoidal(const double *matrix, struct FpNorm **out);

enum FpStatus fp_norm_lp(double q, struct FpNorm **out);

void fp_norm_free(struct FpNorm *norm);

// `H(ξ)` for `xi` of length 2.
enum FpStatus fp_norm_eval(const struct FpNorm *norm, const double *xi, double *out);

// `H°(x)` for `x` of length 2.
enum FpStatus fp_norm_dual(const struct FpNorm *norm, const double *x, double *out);

// Worst duality residual over `samples` seeded random vectors.
enum FpStatus fp_norm_duality_residual(const struct FpNorm *norm,
                                       size_t samples,
                                       uint64_t seed,
                                       double *out);

enum FpStatus fp_material_new(enum FpProfileKind kind, double p, double k, struct FpMaterial **out);

void fp_material_free(struct FpMaterial *material);

enum FpStatus fp_mesh_disk(double radius, double h, struct FpMesh **out);

// `[0, a] × [0, b]`.
enum FpStatus fp_mesh_rectangle(double a, double b, double h, struct FpMesh **out);

// Dual-norm ball of radius `radius` centered at the origin.
enum FpStatus fp_mesh_wulff_ball(const struct FpNorm *norm,
                                 double radius,
                                 double h,
                                 struct FpMesh **out);

void fp_mesh_free(struct FpMesh *mesh);

size_t fp_mesh_num_vertices(const struct FpMesh *mesh);

// Writes `2·num_vertices` interleaved coordinates into `xy`.
enum FpStatus fp_mesh_vertices(const struct FpMesh *mesh, double *xy, size_t len);

// Solves with a constant source `f` and zero boundary values. On
// nonconvergence the last iterate is still returned in `out` together with
// `FP_STATUS_NON_CONVERGENCE`.
enum FpStatus fp_solve(const struct FpMesh *mesh,
                       const struct FpMaterial *material,
                       const struct FpNorm *norm,
                       double f,
                       struct FpField **out);

void fp_field_free(struct FpField *field);

size_t fp_field_len(const struct FpField *field);

enum FpStatus fp_field_values(const struct FpField *field, double *values, size_t len);

// Shoots the radial barrier in dimension `n` with `g ≡ g_const` and height
// `m` at `radius/2`; writes the initial slope.
enum FpStatus fp_barrier_slope(const struct FpMaterial *material,
                               size_t n,
                               double radius,
                               double m,
                               double g_const,
                               double *out);

// Parses and checks a JSON configuration and writes the admissibility
// report as JSON into `buf`. `needed` receives the report length including
// the terminating NUL, also when the buffer is too small.
enum FpStatus fp_config_admissibility(const char *json, char *buf, size_t len, size_t *needed);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FINSLER_PLAP_H */
