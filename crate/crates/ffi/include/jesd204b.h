/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#ifndef JESD204B_H
#define JESD204B_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Length of a packed ILAS configuration.
 */
#define JESD_ILAS_CONFIG_OCTETS 14

/**
 * Link state codes of [`JesdRxState::fsm`].
 */
#define JESD_FSM_RESET 0

#define JESD_FSM_WAIT_FOR_PHY 1

#define JESD_FSM_CGS 2

#define JESD_FSM_ILAS 3

#define JESD_FSM_SYNCED 4

typedef enum JesdStatus {
  JESD_STATUS_OK = 0,
  /**
   * A required pointer was null.
   */
  JESD_STATUS_NULL = 1,
  /**
   * A string argument was not valid UTF-8.
   */
  JESD_STATUS_UTF8 = 2,
  /**
   * Malformed JSON or an unknown key.
   */
  JESD_STATUS_PARSE = 3,
  /**
   * The link configuration breaks a constraint.
   */
  JESD_STATUS_CONSTRAINT = 4,
  /**
   * Not one of the five link control codes.
   */
  JESD_STATUS_INVALID_CONTROL = 5,
  /**
   * An ILAS field does not fit its wire width.
   */
  JESD_STATUS_FIELD_OVERFLOW = 6,
  /**
   * An output buffer is too small, or an input has the wrong length.
   */
  JESD_STATUS_BUFFER_TOO_SMALL = 7,
  /**
   * The simulation setup is inconsistent.
   */
  JESD_STATUS_SIM = 8,
  /**
   * An argument is out of range.
   */
  JESD_STATUS_INVALID = 9,
  /**
   * Internal panic; the handle involved should be dropped.
   */
  JESD_STATUS_PANIC = 10,
} JesdStatus;

/**
 * Opaque receiver handle.
 */
typedef struct JesdReceiver JesdReceiver;

/**
 * A decoded character with its flags.
 */
typedef struct JesdChar {
  uint8_t octet;
  bool is_control;
  bool not_in_table;
  bool disparity_error;
} JesdChar;

/**
 * ILAS configuration fields as carried on the wire (counts minus one).
 */
typedef struct JesdIlasConfig {
  uint8_t did;
  uint8_t bid;
  uint8_t adjcnt;
  uint8_t adjdir;
  uint8_t phadj;
  uint8_t lid;
  uint8_t scr;
  uint8_t l;
  uint8_t f;
  uint8_t k;
  uint8_t m;
  uint8_t cs;
  uint8_t n;
  uint8_t subclassv;
  uint8_t nprime;
  uint8_t jesdv;
  uint8_t s;
  uint8_t hd;
  uint8_t cf;
  uint8_t res1;
  uint8_t res2;
  uint8_t fchk;
} JesdIlasConfig;

typedef struct JesdRxState {
  uint32_t fsm;
  /**
   * Active low: false requests CGS from the transmitter.
   */
  bool sync_n;
  bool released;
  bool lmfc_locked;
  uint32_t lmfc_phase;
  uint32_t resync_count;
  uint64_t cycle;
} JesdRxState;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call into the library on the same thread.
 */
const char *jesd_last_error(void);

/**
 * Releases a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void jesd_string_free(char *s);

/**
 * Parses and validates a JSON configuration. When `effective` is non-null it
 * receives the configuration with every default filled in.
 *
 * # Safety
 * `json` must be a NUL-terminated string; `effective` null or writable.
 */
enum JesdStatus jesd_config_validate(const char *json, char **effective);

/**
 * Encodes one character. Running disparity is passed as `rd_positive`
 * (false = RD-) and the next value is written to `rd_out`. The symbol is
 * ten bits, bit 9 transmitted first.
 *
 * # Safety
 * `symbol` and `rd_out` must be writable.
 */
enum JesdStatus jesd_encode_char(struct JesdChar c,
                                 bool rd_positive,
                                 uint16_t *symbol,
                                 bool *rd_out);

/**
 * Decodes one ten-bit symbol. Errors are reported in the character flags,
 * not the status.
 *
 * # Safety
 * `out` and `rd_out` must be writable.
 */
enum JesdStatus jesd_decode_symbol(uint16_t symbol,
                                   bool rd_positive,
                                   struct JesdChar *out,
                                   bool *rd_out);

/**
 * Scrambles four octets (octet 0 in bits 31..24). `state` holds the last 15
 * line bits, most recent in bit 0; all ones after reset.
 *
 * # Safety
 * `state` must be readable and writable, `out` writable.
 */
enum JesdStatus jesd_scramble_word32(uint16_t *state, uint32_t word, uint32_t *out);

/**
 * Inverse of [`jesd_scramble_word32`].
 *
 * # Safety
 * As for [`jesd_scramble_word32`].
 */
enum JesdStatus jesd_descramble_word32(uint16_t *state, uint32_t word, uint32_t *out);

/**
 * Packs `cfg` into 14 octets with FCHK recomputed under `rule`.
 *
 * # Safety
 * `cfg` readable; `out` writable for `out_len` octets.
 */
enum JesdStatus jesd_ilas_pack(const struct JesdIlasConfig *cfg,
                               uint32_t rule,
                               uint8_t *out,
                               size_t out_len);

/**
 * Unpacks 14 octets. `checksum_ok` reports whether FCHK matches under `rule`.
 *
 * # Safety
 * `octets` readable for `len` octets; `out` and `checksum_ok` writable.
 */
enum JesdStatus jesd_ilas_unpack(const uint8_t *octets,
                                 size_t len,
                                 uint32_t rule,
                                 struct JesdIlasConfig *out,
                                 bool *checksum_ok);

/**
 * Creates a receiver from a JSON configuration (same format as the command
 * line; only the link and `ilas` keys matter).
 *
 * # Safety
 * `json` NUL-terminated; `out` writable.
 */
enum JesdStatus jesd_receiver_new(const char *json, struct JesdReceiver **out);

/**
 * Releases a receiver. Null is ignored.
 *
 * # Safety
 * `rx` must come from [`jesd_receiver_new`] and not have been freed.
 */
void jesd_receiver_free(struct JesdReceiver *rx);

/**
 * Advances one link clock. `chars` holds four characters per lane, lane 0
 * first (`n_chars` = 4 * L). `words` receives one 32-bit word per lane
 * (octet 0 in bits 31..24) and `valid` whether they carry payload.
 *
 * # Safety
 * `rx` a live handle; `chars` readable for `n_chars`; `words` writable for
 * `n_words`; `valid` writable.
 */
enum JesdStatus jesd_receiver_step(struct JesdReceiver *rx,
                                   const struct JesdChar *chars,
                                   size_t n_chars,
                                   bool sysref,
                                   bool phy_ready,
                                   uint32_t *words,
                                   size_t n_words,
                                   bool *valid);

/**
 * Snapshot of the receiver's link state.
 *
 * # Safety
 * `rx` a live handle; `out` writable.
 */
enum JesdStatus jesd_receiver_state(const struct JesdReceiver *rx, struct JesdRxState *out);

/**
 * Packs four characters into a 32-bit word, octet 0 in bits 31..24.
 *
 * # Safety
 * `chars` readable for four elements; `out` writable.
 */
enum JesdStatus jesd_word_of(const struct JesdChar *chars, uint32_t *out);

/**
 * Runs a full simulation from a JSON configuration and writes the JSON
 * report to `report`.
 *
 * # Safety
 * `json` NUL-terminated; `report` writable.
 */
enum JesdStatus jesd_simulate(const char *json, char **report);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* JESD204B_H */
