/* Copyright 2026 The derev Authors
 * License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)
 *
 * C interface of libderev. All handles are opaque and owned by the caller;
 * every *_create / *_load / producing call has a matching *_destroy.
 * Functions return DEREV_OK or an error code; derev_last_error() then holds a
 * message for the calling thread.
 */
#ifndef DEREV_DEREV_H_
#define DEREV_DEREV_H_

#include <stddef.h>
#include <stdint.h>

#if defined(DEREV_BUILDING_LIBRARY)
#define DEREV_API __attribute__((visibility("default")))
#else
#define DEREV_API
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum derev_status {
  DEREV_OK = 0,
  DEREV_ERR_INVALID_ARGUMENT = 1,
  DEREV_ERR_IO = 2,
  DEREV_ERR_CONSISTENCY = 3,
  DEREV_ERR_INTERNAL = 4
} derev_status;

typedef struct derev_config derev_config;         /* pipeline configuration */
typedef struct derev_scene_spec derev_scene_spec; /* scene generator settings */
typedef struct derev_audio derev_audio;           /* frames x channels, doubles */
typedef struct derev_scene derev_scene;
typedef struct derev_trace derev_trace;           /* recorded weights */
typedef struct derev_diagnostics derev_diagnostics;

DEREV_API const char* derev_version(void);
DEREV_API const char* derev_last_error(void);
DEREV_API const char* derev_status_name(derev_status status);
/* Frees strings returned through char** out-parameters. */
DEREV_API void derev_string_free(char* text);

/* ---- pipeline configuration ---- */
DEREV_API derev_status derev_config_create(derev_config** out);
DEREV_API derev_status derev_config_parse(const char* text, derev_config** out);
DEREV_API derev_status derev_config_load(const char* path, derev_config** out);
DEREV_API derev_status derev_config_set(derev_config* cfg, const char* key, const char* value);
DEREV_API derev_status derev_config_dump(const derev_config* cfg, char** text);
DEREV_API int derev_config_channels(const derev_config* cfg);
DEREV_API void derev_config_destroy(derev_config* cfg);

/* ---- scene specification ----
 * Accepts the scene keys plus "source_wav" and "noise_wav" paths, resolved
 * relative to the working directory. */
DEREV_API derev_status derev_scene_spec_create(derev_scene_spec** out);
DEREV_API derev_status derev_scene_spec_parse(const char* text, derev_scene_spec** out);
DEREV_API derev_status derev_scene_spec_load(const char* path, derev_scene_spec** out);
DEREV_API derev_status derev_scene_spec_set(derev_scene_spec* spec, const char* key,
                                            const char* value);
DEREV_API derev_status derev_scene_spec_dump(const derev_scene_spec* spec, char** text);
DEREV_API void derev_scene_spec_destroy(derev_scene_spec* spec);

/* ---- audio ---- */
/* `interleaved` may be NULL for a zero signal. */
DEREV_API derev_status derev_audio_create(size_t frames, int channels, double sample_rate,
                                          const double* interleaved, derev_audio** out);
DEREV_API derev_status derev_audio_read(const char* path, derev_audio** out);
/* Writes 32-bit float WAV. */
DEREV_API derev_status derev_audio_write(const derev_audio* audio, const char* path);
DEREV_API size_t derev_audio_frames(const derev_audio* audio);
DEREV_API int derev_audio_channels(const derev_audio* audio);
DEREV_API double derev_audio_sample_rate(const derev_audio* audio);
/* Copies frames*channels interleaved samples into `out`. */
DEREV_API derev_status derev_audio_copy(const derev_audio* audio, double* out);
DEREV_API void derev_audio_destroy(derev_audio* audio);

/* ---- scenes ---- */
DEREV_API derev_status derev_scene_simulate(const derev_scene_spec* spec, derev_scene** out);
/* Writes y.wav, x_e.wav, x_r.wav, v.wav and source.wav into an existing directory. */
DEREV_API derev_status derev_scene_save(const derev_scene* scene, const char* dir);
DEREV_API derev_status derev_scene_load(const char* dir, derev_scene** out);
/* name: "y", "x_e", "x_r", "v" or "source". Returns a new audio handle. */
DEREV_API derev_status derev_scene_component(const derev_scene* scene, const char* name,
                                             derev_audio** out);
DEREV_API void derev_scene_destroy(derev_scene* scene);

/* ---- enhancement ---- */
typedef struct derev_counters {
  int64_t psd_singular;
  int64_t mvdr_fallback;
  int64_t kalman_skipped;
  int64_t non_finite;
} derev_counters;

/* `trace` and `diagnostics` may be NULL when not wanted. The output is mono. */
DEREV_API derev_status derev_enhance(const derev_config* cfg, const derev_audio* input,
                                     derev_audio** enhanced, derev_trace** trace,
                                     derev_diagnostics** diagnostics);
DEREV_API derev_status derev_diagnostics_counters(const derev_diagnostics* diag,
                                                  derev_counters* out);
/* One row per (frame, bin) for frames divisible by `decimation`. */
DEREV_API derev_status derev_diagnostics_write_csv(const derev_diagnostics* diag,
                                                   const char* path, int decimation);
DEREV_API void derev_diagnostics_destroy(derev_diagnostics* diag);

DEREV_API derev_status derev_trace_save(const derev_trace* trace, const char* path);
DEREV_API derev_status derev_trace_load(const char* path, derev_trace** out);
DEREV_API int derev_trace_frames(const derev_trace* trace);
DEREV_API void derev_trace_destroy(derev_trace* trace);

/* Replays the recorded weights on one multichannel component (mono result). */
DEREV_API derev_status derev_shadow_apply(const derev_trace* trace, const derev_audio* component,
                                          derev_audio** out);

/* ---- evaluation ---- */
typedef struct derev_report {
  double sir_in;
  double sir_out;
  double delta_sir;
  double segsnr;
  double lsd;
  double superposition_error;
  double replay_error;
} derev_report;

/* Shadow-filters the scene components through the trace. `enhanced` may be
 * NULL. `csv` (may be NULL) receives the full report including the per-band
 * breakdown. Returns DEREV_ERR_CONSISTENCY, with the report still filled in,
 * when the component shadows do not add up to the shadow of y. */
DEREV_API derev_status derev_evaluate(const derev_trace* trace, const derev_scene* scene,
                                      const derev_audio* enhanced, derev_report* report,
                                      char** csv);

/* ---- sweeps and plot data ---- */
/* Grid text uses the scene/pipeline keys plus comma lists "t60", "modes",
 * "seeds" (or "seed_count"). Produces one CSV row per (t60, mode). */
DEREV_API derev_status derev_sweep(const char* grid_text, char** csv);

/* Writes the dB magnitude matrix (frame x bin) of one channel, with values
 * clipped to `range_db` below the maximum. The STFT settings come from `cfg`
 * (NULL for defaults). */
DEREV_API derev_status derev_spectrogram_write(const derev_audio* audio, const derev_config* cfg,
                                               int channel, double range_db, const char* path);

#ifdef __cplusplus
}
#endif

#endif /* DEREV_DEREV_H_ */
