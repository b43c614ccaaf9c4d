#ifndef PWAVE_H
#define PWAVE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum PwStatus {
  PW_STATUS_OK = 0,
  PW_STATUS_NULL_POINTER = 1,
  PW_STATUS_INVALID_ARGUMENT = 2,
  PW_STATUS_SHAPE = 3,
  PW_STATUS_STABILITY = 4,
  PW_STATUS_NUMERIC = 5,
  PW_STATUS_FORMAT = 6,
  PW_STATUS_CONFIG = 7,
  PW_STATUS_IO = 8,
  PW_STATUS_BUFFER_TOO_SMALL = 9,
  PW_STATUS_PANIC = 10,
} PwStatus;

typedef enum PwPararealVariant {
  PW_PARAREAL_VARIANT_PLAIN = 0,
  PW_PARAREAL_VARIANT_ENHANCED = 1,
  PW_PARAREAL_VARIANT_PROCRUSTES = 2,
} PwPararealVariant;

// Wave-speed model on the fine grid, with its coarse restriction.
typedef struct PwMedium PwMedium;

// Trained correction network.
typedef struct PwNet PwNet;

// Displacement and velocity on the fine grid.
typedef struct PwWaveField PwWaveField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread; empty if none. The
// pointer stays valid until the next failing call on this thread.
const char *pw_last_error(void);

// Library version as a static NUL-terminated string.
const char *pw_version(void);

// Number of points per side of the fine grid.
size_t pw_fine_size(void);

// Waveguide model: 0.7 - 0.3 cos(pi x).
//
// # Safety
//
// `out` must be null or valid for writes.
enum PwStatus pw_medium_waveguide(struct PwMedium **out);

// Inclusion model: 0.7 + 0.05 y, plus 0.1 inside 0.2 < x < 0.6, 0.4 < y < 0.6.
//
// # Safety
//
// `out` must be null or valid for writes.
enum PwStatus pw_medium_inclusion(struct PwMedium **out);

// Medium from `len` fine-grid speeds, which must be positive.
//
// # Safety
//
// `values` must be null or point to `len` readable doubles; `out` must be null or valid for writes.
enum PwStatus pw_medium_from_values(const double *values, size_t len, struct PwMedium **out);

// Releases a medium handle.
// # Safety
//
// `m` must be null or a handle from this library that has not been freed.
void pw_medium_free(struct PwMedium *m);

// Gaussian pulse `exp(-inv_sigma_sq |x - center|^2)` at rest.
//
// # Safety
//
// `out` must be null or valid for writes.
enum PwStatus pw_field_pulse(double x, double y, double inv_sigma_sq, struct PwWaveField **out);

// Field from `len` displacement and `len` velocity values.
//
// # Safety
//
// `u` and `v` must each be null or point to `len` readable doubles; `out` must be null or valid for writes.
enum PwStatus pw_field_from_values(const double *u,
                                   const double *v,
                                   size_t len,
                                   struct PwWaveField **out);

// Copies the field into two caller buffers of `len` values each.
//
// # Safety
//
// `w` must be null or a live handle; `u` and `v` must each be null or point to `len` writable doubles.
enum PwStatus pw_field_values(const struct PwWaveField *w,
                              double *u,
                              double *v,
                              size_t len);

// Releases a field handle.
// # Safety
//
// `w` must be null or a handle from this library that has not been freed.
void pw_field_free(struct PwWaveField *w);

// Fine propagation over `dt_star`.
//
// # Safety
//
// Handles must be null or live handles from this library; `out` must be null or valid for writes.
enum PwStatus pw_fine_propagate(const struct PwWaveField *w,
                                const struct PwMedium *m,
                                double dt_star,
                                struct PwWaveField **out);

// Restriction, coarse propagation over `dt_star` and interpolation back.
//
// # Safety
//
// Handles must be null or live handles from this library; `out` must be null or valid for writes.
enum PwStatus pw_coarse_propagate(const struct PwWaveField *w,
                                  const struct PwMedium *m,
                                  double dt_star,
                                  struct PwWaveField **out);

// Coarse step corrected by the network.
//
// # Safety
//
// Handles must be null or live handles from this library; `out` must be null or valid for writes.
enum PwStatus pw_enhanced_step(const struct PwWaveField *w,
                               const struct PwMedium *m,
                               const struct PwNet *net,
                               double dt_star,
                               struct PwWaveField **out);

// Wave energy of a field in a medium.
//
// # Safety
//
// Handles must be null or live handles from this library; `energy` must be null or valid for writes.
enum PwStatus pw_wave_energy(const struct PwWaveField *w,
                             const struct PwMedium *m,
                             double *energy);

// Energy of `u - reference` relative to the energy of `reference`.
//
// # Safety
//
// Handles must be null or live handles from this library; `error` must be null or valid for writes.
enum PwStatus pw_rel_energy_error(const struct PwWaveField *u,
                                  const struct PwWaveField *reference,
                                  const struct PwMedium *m,
                                  double *error);

// Loads a network checkpoint from a NUL-terminated path.
//
// # Safety
//
// `path` must be null or a NUL-terminated string; `out` must be null or valid for writes.
enum PwStatus pw_net_load(const char *path, struct PwNet **out);

// Time step the network was trained for, or NaN for a null handle.
//
// # Safety
//
// `net` must be null or a live handle.
double pw_net_dt_star(const struct PwNet *net);

// Releases a network handle.
// # Safety
//
// `net` must be null or a handle from this library that has not been freed.
void pw_net_free(struct PwNet *net);

// Runs parareal for `windows` windows of `dt_star` and `iterations`
// iterations. Writes the relative energy error of iterate `k` at window
// `n` to `errors[k * (windows + 1) + n]`; rows after a blow-up are NaN.
// `errors_len` must be at least `(iterations + 1) * (windows + 1)`. `net`
// is required for the enhanced variant and ignored otherwise. `blowup`, if
// not null, receives the first diverging iteration or -1.
//
// # Safety
//
// Handles must be null or live handles from this library; `errors` must be null or point to `errors_len` writable doubles; `blowup` must be null or valid for writes.
enum PwStatus pw_parareal(const struct PwWaveField *w0,
                          const struct PwMedium *m,
                          enum PwPararealVariant variant,
                          const struct PwNet *net,
                          double dt_star,
                          size_t windows,
                          size_t iterations,
                          double *errors,
                          size_t errors_len,
                          int64_t *blowup);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PWAVE_H */
