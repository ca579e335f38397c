/* C interface to the eegspec library.
 *
 * Every function returns an eegspec_status. On failure a one-line message
 * for the calling thread is available from eegspec_last_error() until the
 * next call into the library. Handles are opaque and owned by the caller;
 * release them with the matching *_destroy function (NULL is accepted).
 */
#ifndef EEGSPEC_EEGSPEC_H_
#define EEGSPEC_EEGSPEC_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define EEGSPEC_API __declspec(dllexport)
#else
#define EEGSPEC_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum eegspec_status {
  EEGSPEC_OK = 0,
  EEGSPEC_ERR_INVALID_ARGUMENT = 1,
  EEGSPEC_ERR_IO = 2,
  EEGSPEC_ERR_FORMAT = 3,
  EEGSPEC_ERR_NUMERIC = 4,
  EEGSPEC_ERR_NOT_FOUND = 5,
  EEGSPEC_ERR_INTERNAL = 6
} eegspec_status;

typedef struct eegspec_config eegspec_config;
typedef struct eegspec_trialset eegspec_trialset;
typedef struct eegspec_cascade eegspec_cascade;

EEGSPEC_API const char* eegspec_version(void);
EEGSPEC_API const char* eegspec_last_error(void);
EEGSPEC_API const char* eegspec_status_name(eegspec_status status);

/* ---- configuration ------------------------------------------------------ */

/* New config holding the published defaults. */
EEGSPEC_API eegspec_status eegspec_config_create(eegspec_config** out);
EEGSPEC_API void eegspec_config_destroy(eegspec_config* cfg);
/* Stage a "section.key=value" file; pass NULL for none. */
EEGSPEC_API eegspec_status eegspec_config_set_file(eegspec_config* cfg, const char* path);
/* Stage an override that takes precedence over the file. */
EEGSPEC_API eegspec_status eegspec_config_set(eegspec_config* cfg, const char* key, const char* value);
/* Merge file and overrides and validate. Must succeed before get/run. */
EEGSPEC_API eegspec_status eegspec_config_resolve(eegspec_config* cfg);
/* Copies the resolved value (NUL-terminated) into buf; *needed receives the
 * required size including the terminator. buf may be NULL to query. */
EEGSPEC_API eegspec_status eegspec_config_get(const eegspec_config* cfg, const char* key, char* buf, size_t buf_size,
                                              size_t* needed);

/* All resolved keys as sorted "key=value" lines. */
EEGSPEC_API eegspec_status eegspec_config_dump(const eegspec_config* cfg, char* buf, size_t buf_size, size_t* needed);

/* Runs one pipeline command: "synth", "import", "spectrogram", "train",
 * "eval" or "export-images". */
EEGSPEC_API eegspec_status eegspec_run(const eegspec_config* cfg, const char* command);

/* ---- trial archives ----------------------------------------------------- */

EEGSPEC_API eegspec_status eegspec_trialset_read(const char* path, eegspec_trialset** out);
EEGSPEC_API eegspec_status eegspec_trialset_write(const eegspec_trialset* set, const char* path);
/* Synthetic set built from the synth.* keys of a resolved config. */
EEGSPEC_API eegspec_status eegspec_trialset_synthesize(const eegspec_config* cfg, eegspec_trialset** out);
EEGSPEC_API void eegspec_trialset_destroy(eegspec_trialset* set);
EEGSPEC_API eegspec_status eegspec_trialset_info(const eegspec_trialset* set, size_t* n_trials, size_t* n_channels,
                                                 double* fs);
/* Samples of one channel of trial `index`; two-call size query as above,
 * counts in doubles. */
EEGSPEC_API eegspec_status eegspec_trialset_channel(const eegspec_trialset* set, size_t index, size_t channel,
                                                    double* out, size_t capacity, size_t* needed);

/* ---- filters ------------------------------------------------------------ */

EEGSPEC_API eegspec_status eegspec_cascade_cheby_bandpass(int order, double low_hz, double high_hz, double fs,
                                                          double ripple_db, eegspec_cascade** out);
EEGSPEC_API eegspec_status eegspec_cascade_notch(double f0_hz, double fs, double q, eegspec_cascade** out);
EEGSPEC_API void eegspec_cascade_destroy(eegspec_cascade* cascade);
EEGSPEC_API eegspec_status eegspec_cascade_apply(const eegspec_cascade* cascade, const double* signal, size_t n,
                                                 double* out);
/* Interleaved (re, im) pairs, 2 * n doubles. */
EEGSPEC_API eegspec_status eegspec_cascade_response(const eegspec_cascade* cascade, const double* freqs_hz, size_t n,
                                                    double fs, double* out_re_im);
EEGSPEC_API eegspec_status eegspec_cascade_json(const eegspec_cascade* cascade, char* buf, size_t buf_size,
                                                size_t* needed);

/* ---- spectrograms ------------------------------------------------------- */

/* ln(|STFT|^2 + epsilon), bins x frames row-major. *rows and *cols receive
 * the geometry; out may be NULL to query it. */
EEGSPEC_API eegspec_status eegspec_log_spectrogram(const double* signal, size_t n, size_t win_len, size_t hop,
                                                   size_t nfft, double fs, double epsilon, double* out,
                                                   size_t capacity, size_t* rows, size_t* cols);

#ifdef __cplusplus
}
#endif

#endif /* EEGSPEC_EEGSPEC_H_ */
