#ifndef QCTEE_H
#define QCTEE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  QCTEE_LEVEL_QUARTER = 0,
  QCTEE_LEVEL_HALF = 1,
  QCTEE_LEVEL_MAX = 2,
} QcteeLevel;

/**
 * Result of every fallible call.
 */
typedef enum {
  QCTEE_STATUS_OK = 0,
  QCTEE_STATUS_NULL_POINTER = 1,
  QCTEE_STATUS_INVALID_UTF8 = 2,
  QCTEE_STATUS_INVALID_ARGUMENT = 3,
  /**
   * QASM parse errors and circuit/backend validation failures.
   */
  QCTEE_STATUS_CIRCUIT = 4,
  QCTEE_STATUS_OBFUSCATION = 5,
  QCTEE_STATUS_BITMAP = 6,
  QCTEE_STATUS_ENVELOPE = 7,
  QCTEE_STATUS_ENGINE = 8,
  QCTEE_STATUS_RECOVER = 9,
  QCTEE_STATUS_ANALYSIS = 10,
  QCTEE_STATUS_IO = 11,
  /**
   * The requested value does not exist for this object.
   */
  QCTEE_STATUS_UNAVAILABLE = 12,
  /**
   * A Rust panic was caught at the boundary.
   */
  QCTEE_STATUS_PANIC = 13,
} QcteeStatus;

typedef struct QcteeBackend QcteeBackend;

typedef struct QcteeCircuit QcteeCircuit;

typedef struct QcteeObfuscated QcteeObfuscated;

typedef struct QcteeRun QcteeRun;

typedef struct {
  QcteeLevel level;
  bool randomize_output;
  bool identity_conversion;
  uint32_t padding_slots;
  uint64_t seed;
} QcteeObfuscationOptions;

/**
 * Settings of a full in-memory run. `epsilon` is the switch leakage
 * amplitude ratio (0 for ideal switches); zero noise rates give a noiseless
 * run.
 */
typedef struct {
  QcteeObfuscationOptions obfuscation;
  uint64_t shots;
  /**
   * Expanded into the obfuscator, TRNG, noise and key seeds.
   */
  uint64_t seed;
  double epsilon;
  double p1;
  double p2;
  double p_idle;
} QcteeRunOptions;

/**
 * A byte buffer owned by the library.
 */
typedef struct {
  uint8_t *data;
  size_t len;
} QcteeBytes;

typedef struct {
  uint64_t n_qubits;
  uint64_t n_slot_cx;
  uint64_t n_slot_sq;
  uint64_t n_subslots;
  uint64_t n_subcx_in_slotcx;
  uint64_t n_subslots_in_slotcx;
  bool randomize_output;
} QcteeComplexityParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL if none. The
 * pointer stays valid until the next failing call or
 * [`qctee_clear_last_error`] on the same thread.
 */
const char *qctee_last_error_message(void);

void qctee_clear_last_error(void);

/**
 * Library version as a static NUL-terminated string.
 */
const char *qctee_version(void);

/**
 * Default options: quarter level, everything else off, 1024 shots,
 * ideal switches, no noise.
 */
QcteeRunOptions qctee_run_options_default(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library, not yet freed.
 */
void qctee_string_free(char *s);

/**
 * # Safety
 * `bytes` must be NULL-data or a buffer returned by this library, not yet
 * freed.
 */
void qctee_bytes_free(QcteeBytes bytes);

/**
 * The built-in 7-qubit Perth descriptor.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
QcteeStatus qctee_backend_perth(QcteeBackend **out);

/**
 * Parses a backend descriptor from JSON text.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
QcteeStatus qctee_backend_from_json(const char *json, QcteeBackend **out);

/**
 * Number of qubits, or 0 for NULL.
 *
 * # Safety
 * `backend` must be NULL or a live handle.
 */
size_t qctee_backend_n_qubits(const QcteeBackend *backend);

/**
 * # Safety
 * `backend` must be NULL or a live handle; it is invalid afterwards.
 */
void qctee_backend_free(QcteeBackend *backend);

/**
 * Parses a circuit from QASM text.
 *
 * # Safety
 * `qasm` must be a NUL-terminated string and `out` a valid pointer.
 */
QcteeStatus qctee_circuit_from_qasm(const char *qasm, QcteeCircuit **out);

/**
 * Number of qubits, or 0 for NULL.
 *
 * # Safety
 * `circuit` must be NULL or a live handle.
 */
size_t qctee_circuit_n_qubits(const QcteeCircuit *circuit);

/**
 * Checks the circuit against the backend's qubits, basis and couplings.
 *
 * # Safety
 * Both handles must be live.
 */
QcteeStatus qctee_circuit_validate(const QcteeCircuit *circuit, const QcteeBackend *backend);

/**
 * # Safety
 * `circuit` must be NULL or a live handle; it is invalid afterwards.
 */
void qctee_circuit_free(QcteeCircuit *circuit);

/**
 * Obfuscates `circuit` for `backend`.
 *
 * # Safety
 * Handles and `options` must be valid; `out` must be a valid pointer.
 */
QcteeStatus qctee_obfuscate(const QcteeCircuit *circuit,
                            const QcteeBackend *backend,
                            const QcteeObfuscationOptions *options,
                            QcteeObfuscated **out);

/**
 * The obfuscated circuit as QASM text; free with [`qctee_string_free`].
 *
 * # Safety
 * `obf` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_obfuscated_qasm(const QcteeObfuscated *obf, char **out);

/**
 * The plaintext input bitmap in its wire encoding; free with
 * [`qctee_bytes_free`]. Seal it before it leaves the client.
 *
 * # Safety
 * `obf` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_obfuscated_bitmap(const QcteeObfuscated *obf, QcteeBytes *out);

/**
 * Number of sub-slot columns, or 0 for NULL.
 *
 * # Safety
 * `obf` must be NULL or a live handle.
 */
size_t qctee_obfuscated_sub_slots(const QcteeObfuscated *obf);

/**
 * Number of attenuate bits in the input bitmap, or 0 for NULL.
 *
 * # Safety
 * `obf` must be NULL or a live handle.
 */
size_t qctee_obfuscated_attenuated_bits(const QcteeObfuscated *obf);

/**
 * Complexity counts extracted from the obfuscated circuit.
 *
 * # Safety
 * `obf` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_obfuscated_complexity(const QcteeObfuscated *obf, QcteeComplexityParams *out);

/**
 * # Safety
 * `obf` must be NULL or a live handle; it is invalid afterwards.
 */
void qctee_obfuscated_free(QcteeObfuscated *obf);

/**
 * Runs the whole protocol in memory: obfuscate, seal, execute on the
 * simulated trusted backend, recover, and compare with the baseline.
 *
 * # Safety
 * Handles and `options` must be valid; `out` must be a valid pointer.
 */
QcteeStatus qctee_run(const QcteeCircuit *circuit,
                      const QcteeBackend *backend,
                      const QcteeRunOptions *options,
                      QcteeRun **out);

/**
 * Variational distance between the recovered and the ideal distribution.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_run_vd(const QcteeRun *run, double *out);

/**
 * Obfuscated over original duration. [`QcteeStatus::Unavailable`] when the
 * original circuit has zero duration.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_run_depth_factor(const QcteeRun *run, double *out);

/**
 * log2 of the attack complexity of this run's obfuscation.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_run_complexity_log2(const QcteeRun *run, double *out);

/**
 * The full run report as JSON; free with [`qctee_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_run_report_json(const QcteeRun *run, char **out);

/**
 * The QASM text the provider received; free with [`qctee_string_free`].
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
QcteeStatus qctee_run_provider_qasm(const QcteeRun *run, char **out);

/**
 * # Safety
 * `run` must be NULL or a live handle; it is invalid afterwards.
 */
void qctee_run_free(QcteeRun *run);

/**
 * log2 of the number of candidate circuits an attacker must consider.
 *
 * # Safety
 * `params` and `out` must be valid pointers.
 */
QcteeStatus qctee_attack_complexity_log2(const QcteeComplexityParams *params, double *out);

/**
 * Power drawn by the in-fridge hardware with default parameters, in mW.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
QcteeStatus qctee_power_overhead_mw(uint64_t n_switches, double *out);

/**
 * Share of the fridge volume taken by the switches with default
 * parameters, in percent.
 *
 * # Safety
 * `out` must be a valid pointer.
 */
QcteeStatus qctee_volume_overhead_pct(uint64_t n_switches, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QCTEE_H */
