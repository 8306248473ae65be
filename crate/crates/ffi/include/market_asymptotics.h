#ifndef MARKET_ASYMPTOTICS_H
#define MARKET_ASYMPTOTICS_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum MaLawFamily {
  // Uniform on `[param1, param2]`.
  MA_LAW_FAMILY_UNIFORM = 0,
  // `F(x) = x^param1` on `[0, 1]`; `param2` is ignored.
  MA_LAW_FAMILY_POWER = 1,
} MaLawFamily;

typedef enum MaStatus {
  MA_STATUS_OK = 0,
  MA_STATUS_NULL_POINTER = 1,
  MA_STATUS_INVALID_ARGUMENT = 2,
  MA_STATUS_NUMERIC_FAILURE = 3,
  MA_STATUS_BUFFER_TOO_SMALL = 4,
  MA_STATUS_PANIC = 5,
} MaStatus;

// Market specification handle.
typedef struct MaMarket MaMarket;

// Simulation result handle.
typedef struct MaSimulation MaSimulation;

typedef struct MaLawSpec {
  enum MaLawFamily family;
  double param1;
  double param2;
} MaLawSpec;

typedef struct MaGaussianApprox {
  double t_alpha;
  double mean_k;
  double mean_w;
  double var_k;
  double var_w;
  double cov_kw;
  double sigma2;
  double varsigma2;
  double kappa;
  double correlation;
  double e_prime;
} MaGaussianApprox;

typedef struct MaOutcome {
  size_t quantity;
  double welfare;
  // Zero when nobody trades; the prices are then NaN.
  int32_t has_prices;
  double buyer_price;
  double seller_price;
} MaOutcome;

typedef struct MaClosedForm {
  double t_alpha;
  double sigma2;
  double mean_w_unit;
  double varsigma2;
  double kappa;
} MaClosedForm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or NULL. The pointer stays valid
// until the next call into this library from the same thread.
const char *ma_last_error_message(void);

// # Safety
// `buyer_law` and `seller_law` must point to valid specs; `out` must be writable.
enum MaStatus ma_market_new(size_t n_buyers,
                            size_t n_sellers,
                            const struct MaLawSpec *buyer_law,
                            const struct MaLawSpec *seller_law,
                            struct MaMarket **out);

// # Safety
// `market` must come from `ma_market_new` and not have been freed. NULL is ignored.
void ma_market_free(struct MaMarket *market);

// # Safety
// `market` must be a live handle; `out` must be writable.
enum MaStatus ma_market_gaussian_approx(const struct MaMarket *market,
                                        struct MaGaussianApprox *out);

// Efficient outcome of one realization. Prices use no support bounds.
//
// # Safety
// `values` and `costs` must point to `n_values` and `n_costs` doubles; `out` must be
// writable.
enum MaStatus ma_efficient_outcome(const double *values,
                                   size_t n_values,
                                   const double *costs,
                                   size_t n_costs,
                                   struct MaOutcome *out);

// # Safety
// `out` must be writable.
enum MaStatus ma_closed_form_params(double lambda, struct MaClosedForm *out);

// `P(K = k)` for equal buyer and seller laws.
//
// # Safety
// `out` must be writable.
enum MaStatus ma_hypergeometric_pmf(uint64_t n_buyers, uint64_t n_sellers, uint64_t k, double *out);

// Runs `replications` seeded replications on `workers` threads (0 = all cores).
//
// # Safety
// `market` must be a live handle; `out` must be writable.
enum MaStatus ma_simulation_run(const struct MaMarket *market,
                                size_t replications,
                                uint64_t seed,
                                size_t workers,
                                struct MaSimulation **out);

// Number of records, or 0 for NULL.
//
// # Safety
// `sim` must be NULL or a live handle.
size_t ma_simulation_len(const struct MaSimulation *sim);

// Copies `K` and `W` of every replication into caller buffers of `capacity` entries.
//
// # Safety
// `sim` must be a live handle; both buffers must hold `capacity` elements.
enum MaStatus ma_simulation_records(const struct MaSimulation *sim,
                                    size_t *quantities,
                                    double *welfare,
                                    size_t capacity);

// # Safety
// `sim` must come from `ma_simulation_run` and not have been freed. NULL is ignored.
void ma_simulation_free(struct MaSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MARKET_ASYMPTOTICS_H */
