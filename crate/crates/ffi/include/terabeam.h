#ifndef TERABEAM_H
#define TERABEAM_H

/* Generated by cbindgen from terabeam-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible entry point.
 */
typedef enum TbStatus {
  TB_STATUS_OK = 0,
  /**
   * A required pointer argument was null.
   */
  TB_STATUS_NULL_ARGUMENT = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  TB_STATUS_INVALID_UTF8 = 2,
  /**
   * JSON failed to parse.
   */
  TB_STATUS_PARSE_ERROR = 3,
  /**
   * A config value or argument violated a precondition.
   */
  TB_STATUS_INVALID_ARGUMENT = 4,
  /**
   * A channel draw was singular (Gram condition number above 1e12).
   */
  TB_STATUS_SINGULAR_CHANNEL = 5,
  /**
   * File system failure.
   */
  TB_STATUS_IO_ERROR = 6,
  /**
   * Too many singular draws had to be resampled.
   */
  TB_STATUS_RESAMPLE_BUDGET = 7,
  /**
   * An index was out of range.
   */
  TB_STATUS_OUT_OF_RANGE = 8,
  /**
   * An internal panic was caught at the boundary.
   */
  TB_STATUS_PANIC = 9,
} TbStatus;

/**
 * Opaque handle: a resolved (system config, sweep spec) pair.
 */
typedef struct TbConfig TbConfig;

/**
 * Opaque handle: sweep rows plus the metadata needed to write the CSV.
 */
typedef struct TbSweepResult TbSweepResult;

/**
 * One sweep row, scheme name excluded (fetch it with
 * `tb_sweep_result_scheme`).
 */
typedef struct TbSweepRow {
  double sweep_value;
  double metric_mean;
  double metric_std;
  uint64_t n_trials;
  uint64_t n_resamples;
} TbSweepRow;

/**
 * Per-component power model in watts; pass null where a profile argument is
 * accepted to use the defaults (0.25 / 0.25 / 0.03 / 0.08 / 2.5).
 */
typedef struct TbPowerProfile {
  double baseband_w;
  double rf_chain_w;
  double ps_w;
  double td_w;
  double transmit_w;
} TbPowerProfile;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Crate version as a static nul-terminated string.
 */
const char *tb_version(void);

/**
 * Copy the calling thread's last error message into `buf` (truncating if
 * needed, always nul-terminated when `len > 0`). Returns the full message
 * length in bytes excluding the nul, regardless of truncation.
 */
size_t tb_last_error_message(char *buf, size_t len);

/**
 * Release a string allocated by this library.
 */
void tb_string_free(char *s);

/**
 * New config with the full-scale defaults (N=1024, f_c=350 GHz, B=20 GHz,
 * M=128, K_d=32, 4 users, 100 trials).
 */
enum TbStatus tb_config_default(struct TbConfig **out);

/**
 * Parse a config from a JSON string (same schema as the CLI config file).
 */
enum TbStatus tb_config_from_json(const char *json, struct TbConfig **out);

/**
 * Load a config from a JSON file.
 */
enum TbStatus tb_config_from_file(const char *path, struct TbConfig **out);

/**
 * Override the Monte-Carlo base seed.
 */
enum TbStatus tb_config_set_seed(struct TbConfig *config, uint64_t seed);

/**
 * Canonical single-line JSON echo of the resolved config; release with
 * `tb_string_free`.
 */
enum TbStatus tb_config_to_json(const struct TbConfig *config, char **out);

void tb_config_free(struct TbConfig *config);

/**
 * Achievable sum-rate against SNR for the configured schemes. The output is
 * deterministic in (config, seed) and independent of `threads`.
 */
enum TbStatus tb_run_sumrate_sweep(const struct TbConfig *config,
                                   uint32_t threads,
                                   struct TbSweepResult **out);

/**
 * Energy efficiency against the number of users at the configured operating
 * SNR.
 */
enum TbStatus tb_run_ee_sweep(const struct TbConfig *config,
                              uint32_t threads,
                              struct TbSweepResult **out);

/**
 * Number of rows in a sweep result.
 */
size_t tb_sweep_result_len(const struct TbSweepResult *result);

/**
 * Copy row `index` into `out`.
 */
enum TbStatus tb_sweep_result_row(const struct TbSweepResult *result,
                                  size_t index,
                                  struct TbSweepRow *out);

/**
 * Scheme label of row `index`; the pointer stays valid until the result is
 * freed.
 */
enum TbStatus tb_sweep_result_scheme(const struct TbSweepResult *result,
                                     size_t index,
                                     const char **out);

/**
 * Write the sweep result as the fixed-column CSV the CLI emits.
 */
enum TbStatus tb_sweep_result_write_csv(const struct TbSweepResult *result, const char *path);

void tb_sweep_result_free(struct TbSweepResult *result);

/**
 * Run the beam-pattern diagnostic for the first configured scheme and the
 * configured beam user, writing the CSV to `path`.
 */
enum TbStatus tb_beampattern_csv(const struct TbConfig *config, const char *path);

/**
 * Run the path-loss diagnostic over the configured distances and absorption
 * table, writing the CSV to `path`.
 */
enum TbStatus tb_pathloss_csv(const struct TbConfig *config, const char *path);

/**
 * Front-end power in watts for a scheme label at the given geometry.
 */
enum TbStatus tb_hardware_power_w(const char *scheme,
                                  uint64_t n_antennas,
                                  uint64_t n_users,
                                  uint64_t n_td_per_rf,
                                  const struct TbPowerProfile *profile,
                                  double *out);

/**
 * Path loss in dB at (freq, distance) using the bundled absorption table.
 */
enum TbStatus tb_path_loss_db(double freq_hz, double distance_m, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* TERABEAM_H */
