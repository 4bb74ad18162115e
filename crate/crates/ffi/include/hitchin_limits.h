#ifndef HITCHIN_LIMITS_H
#define HITCHIN_LIMITS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

#define HL_OK 0

// A required pointer argument was null.
#define HL_ERR_NULL 1

// Input failed validation.
#define HL_ERR_INVALID 2

// A numerical stage failed.
#define HL_ERR_NUMERICAL 3

// A string argument was not UTF-8.
#define HL_ERR_UTF8 4

// Internal panic caught at the boundary.
#define HL_ERR_PANIC 5

// Geodesic path of saddle connections.
typedef struct HlPath HlPath;

// Flat surface with cubic differential.
typedef struct HlSurface HlSurface;

// Solution of Wang's equation on a polynomial disk.
typedef struct HlWangSolution HlWangSolution;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Status of the last call on this thread.
int hl_last_error_code(void);

// Message of the last failed call on this thread; empty after success.
// Valid until the next library call on the same thread.
const char *hl_last_error_message(void);

// # Safety
// `s` is null or was returned by this library.
void hl_string_free(char *s);

// # Safety
// `json` is a NUL-terminated string; `out` is writable.
int hl_surface_from_json(const char *json, struct HlSurface **out_surface);

// Bordered disk with a single zero of order `k`.
//
// # Safety
// `out_surface` is writable.
int hl_surface_polynomial_disk(int64_t k, double radius, struct HlSurface **out_surface);

// Closed surface covering the `(p, q, r)` triangle orbifold.
//
// # Safety
// `out_surface` is writable.
int hl_surface_triangle_orbifold(uint32_t p,
                                 uint32_t q,
                                 uint32_t r,
                                 struct HlSurface **out_surface);

// Number of invariant violations; the first one's code is left in the
// last-error message.
//
// # Safety
// `surface` is a live handle; `out_count` is writable.
int hl_surface_validate(const struct HlSurface *surface, size_t *out_count);

// # Safety
// `surface` is a live handle; `out_json` is writable. Free the result
// with [`hl_string_free`].
int hl_surface_to_json(const struct HlSurface *surface, char **out_json);

// # Safety
// `surface` is a live handle; `out_x` is writable.
int hl_surface_euler_characteristic(const struct HlSurface *surface, int64_t *out_x);

// # Safety
// `surface` is null or a handle from this library.
void hl_surface_free(struct HlSurface *surface);

// Parse a path file. `surface` may be null (all vertices regular).
//
// # Safety
// `json` is NUL-terminated; `surface` is null or live; `out_path` is
// writable.
int hl_path_from_json(const char *json, const struct HlSurface *surface, struct HlPath **out_path);

// # Safety
// `path` is null or a handle from this library.
void hl_path_free(struct HlPath *path);

// Sorted exponents `ν₁ ≥ ν₂ ≥ ν₃` of one period.
//
// # Safety
// `out3` points to three doubles.
int hl_segment_exponents(double re, double im, double *out3);

// Sum of the segment exponents of a path.
//
// # Safety
// `path` is live; `out3` points to three doubles.
int hl_path_singular_exponents(const struct HlPath *path, double *out3);

// Log spectral radius exponent of a closed path.
//
// # Safety
// `path` is live; `out_value` is writable.
int hl_path_spectral_exponent(const struct HlPath *path, double *out_value);

// 1 when the path's vector distance is the sum of its segment vectors.
//
// # Safety
// `path` is live; `out_flag` is writable.
int hl_path_weak_convexity(const struct HlPath *path, int *out_flag);

// Row-major unipotent transition of the regular `n`-gon between two
// chart angles.
//
// # Safety
// `out9` points to nine doubles.
int hl_polygon_arc_unipotent(size_t n, double theta_in, double theta_out, double *out9);

// Vector distance of `SL(3)` element `m` (row-major) from the origin.
//
// # Safety
// `m9` points to nine doubles, `out3` to three.
int hl_building_vector_distance(const double *m9, double *out3);

// # Safety
// `out_solution` is writable.
int hl_wang_solve(uint32_t k,
                  double s,
                  double radius,
                  size_t nr,
                  size_t ntheta,
                  struct HlWangSolution **out_solution);

// `φ` at `z = re + i·im`.
//
// # Safety
// `solution` is live; `out_phi` is writable.
int hl_wang_phi_at(const struct HlWangSolution *solution, double re, double im, double *out_phi);

// 1 when `e^φ` exceeds the flat bound at every interior node.
//
// # Safety
// `solution` is live; `out_flag` is writable.
int hl_wang_lower_bound_holds(const struct HlWangSolution *solution, int *out_flag);

// # Safety
// `solution` is null or a handle from this library.
void hl_wang_free(struct HlWangSolution *solution);

// Minimum projective distance between rotated spectra of the default
// two-class family over `nthetas` equally spaced angles.
//
// # Safety
// `out_distance` is writable.
int hl_trigroup_boundary_probe(uint32_t p,
                               uint32_t q,
                               uint32_t r,
                               double max_length,
                               size_t max_segments,
                               size_t nthetas,
                               double *out_distance);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* HITCHIN_LIMITS_H */
