// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/derev.h"

#include <cmath>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <optional>
#include <string>

#include "derev/config.hpp"
#include "derev/metrics.hpp"
#include "derev/pipeline.hpp"
#include "derev/scene.hpp"
#include "derev/shadow_trace.hpp"
#include "derev/stft.hpp"
#include "derev/sweep.hpp"
#include "derev/wav.hpp"

struct derev_config {
  derev::PipelineConfig cfg;
};

struct derev_scene_spec {
  derev::SceneSpec spec;
  std::string source_wav;
  std::string noise_wav;
};

struct derev_audio {
  derev::Audio audio;
};

struct derev_scene {
  derev::Scene scene;
};

struct derev_trace {
  derev::ShadowTrace trace;
};

struct derev_diagnostics {
  derev::Diagnostics diag;
};

namespace {

thread_local std::string g_last_error;

derev_status fail(derev_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body` and maps exceptions onto status codes.
template <typename F>
derev_status guarded(F&& body) {
  try {
    g_last_error.clear();
    return body();
  } catch (const derev::IoError& e) {
    return fail(DEREV_ERR_IO, e.what());
  } catch (const std::invalid_argument& e) {
    return fail(DEREV_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::out_of_range& e) {
    return fail(DEREV_ERR_INVALID_ARGUMENT, e.what());
  } catch (const std::bad_alloc&) {
    return fail(DEREV_ERR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(DEREV_ERR_INTERNAL, e.what());
  } catch (...) {
    return fail(DEREV_ERR_INTERNAL, "unknown error");
  }
}

char* dup_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

bool apply_spec_key(derev_scene_spec& s, const std::string& key, const std::string& value) {
  if (key == "source_wav") {
    s.source_wav = value;
    return true;
  }
  if (key == "noise_wav") {
    s.noise_wav = value;
    return true;
  }
  return false;
}

derev_scene_spec spec_from(const derev::KeyValues& kv) {
  derev_scene_spec out;
  derev::KeyValues rest;
  for (const auto& [k, v] : kv)
    if (!apply_spec_key(out, k, v)) rest[k] = v;
  out.spec = derev::scene_spec_from(rest);
  return out;
}

derev::RVector mono(const derev::Waveform& w) {
  if (w.cols() != 1) throw std::invalid_argument("expected a mono signal");
  return w.col(0);
}

}  // namespace

extern "C" {

const char* derev_version(void) { return "0.3.0"; }

const char* derev_last_error(void) { return g_last_error.c_str(); }

const char* derev_status_name(derev_status status) {
  switch (status) {
    case DEREV_OK: return "ok";
    case DEREV_ERR_INVALID_ARGUMENT: return "invalid argument";
    case DEREV_ERR_IO: return "i/o error";
    case DEREV_ERR_CONSISTENCY: return "consistency failure";
    case DEREV_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

void derev_string_free(char* text) { std::free(text); }

// ---- pipeline configuration ----

derev_status derev_config_create(derev_config** out) {
  return guarded([&] {
    require(out, "config: null output");
    *out = new derev_config{};
    return DEREV_OK;
  });
}

derev_status derev_config_parse(const char* text, derev_config** out) {
  return guarded([&] {
    require(text && out, "config: null argument");
    *out = new derev_config{derev::pipeline_config_from(derev::parse_key_values(text))};
    return DEREV_OK;
  });
}

derev_status derev_config_load(const char* path, derev_config** out) {
  return guarded([&] {
    require(path && out, "config: null argument");
    *out = new derev_config{derev::pipeline_config_from(derev::read_key_values(path))};
    return DEREV_OK;
  });
}

derev_status derev_config_set(derev_config* cfg, const char* key, const char* value) {
  return guarded([&] {
    require(cfg && key && value, "config: null argument");
    derev::PipelineConfig next = cfg->cfg;
    if (!derev::apply_pipeline_key(next, key, value))
      throw std::invalid_argument(std::string("config: unknown key '") + key + "'");
    next.validate();
    cfg->cfg = std::move(next);
    return DEREV_OK;
  });
}

derev_status derev_config_dump(const derev_config* cfg, char** text) {
  return guarded([&] {
    require(cfg && text, "config: null argument");
    *text = dup_string(derev::format_key_values(derev::to_key_values(cfg->cfg)));
    return DEREV_OK;
  });
}

int derev_config_channels(const derev_config* cfg) { return cfg ? cfg->cfg.geometry.size() : 0; }

void derev_config_destroy(derev_config* cfg) { delete cfg; }

// ---- scene specification ----

derev_status derev_scene_spec_create(derev_scene_spec** out) {
  return guarded([&] {
    require(out, "scene spec: null output");
    *out = new derev_scene_spec{};
    return DEREV_OK;
  });
}

derev_status derev_scene_spec_parse(const char* text, derev_scene_spec** out) {
  return guarded([&] {
    require(text && out, "scene spec: null argument");
    *out = new derev_scene_spec(spec_from(derev::parse_key_values(text)));
    return DEREV_OK;
  });
}

derev_status derev_scene_spec_load(const char* path, derev_scene_spec** out) {
  return guarded([&] {
    require(path && out, "scene spec: null argument");
    *out = new derev_scene_spec(spec_from(derev::read_key_values(path)));
    return DEREV_OK;
  });
}

derev_status derev_scene_spec_set(derev_scene_spec* spec, const char* key, const char* value) {
  return guarded([&] {
    require(spec && key && value, "scene spec: null argument");
    if (apply_spec_key(*spec, key, value)) return DEREV_OK;
    derev::SceneSpec next = spec->spec;
    if (!derev::apply_scene_key(next, key, value))
      throw std::invalid_argument(std::string("scene spec: unknown key '") + key + "'");
    next.validate();
    spec->spec = std::move(next);
    return DEREV_OK;
  });
}

derev_status derev_scene_spec_dump(const derev_scene_spec* spec, char** text) {
  return guarded([&] {
    require(spec && text, "scene spec: null argument");
    derev::KeyValues kv = derev::to_key_values(spec->spec);
    if (!spec->source_wav.empty()) kv["source_wav"] = spec->source_wav;
    if (!spec->noise_wav.empty()) kv["noise_wav"] = spec->noise_wav;
    *text = dup_string(derev::format_key_values(kv));
    return DEREV_OK;
  });
}

void derev_scene_spec_destroy(derev_scene_spec* spec) { delete spec; }

// ---- audio ----

derev_status derev_audio_create(size_t frames, int channels, double sample_rate,
                                const double* interleaved, derev_audio** out) {
  return guarded([&] {
    require(out, "audio: null output");
    require(channels >= 1, "audio: channels must be >= 1");
    require(sample_rate > 0.0, "audio: sample rate must be > 0");
    auto a = std::make_unique<derev_audio>();
    a->audio.sample_rate = sample_rate;
    a->audio.samples = derev::Waveform::Zero(static_cast<Eigen::Index>(frames), channels);
    if (interleaved) {
      for (size_t i = 0; i < frames; ++i)
        for (int c = 0; c < channels; ++c)
          a->audio.samples(static_cast<Eigen::Index>(i), c) = interleaved[i * channels + c];
    }
    *out = a.release();
    return DEREV_OK;
  });
}

derev_status derev_audio_read(const char* path, derev_audio** out) {
  return guarded([&] {
    require(path && out, "audio: null argument");
    *out = new derev_audio{derev::read_wav(path)};
    return DEREV_OK;
  });
}

derev_status derev_audio_write(const derev_audio* audio, const char* path) {
  return guarded([&] {
    require(audio && path, "audio: null argument");
    derev::write_wav(path, audio->audio);
    return DEREV_OK;
  });
}

size_t derev_audio_frames(const derev_audio* audio) {
  return audio ? static_cast<size_t>(audio->audio.samples.rows()) : 0;
}

int derev_audio_channels(const derev_audio* audio) {
  return audio ? static_cast<int>(audio->audio.samples.cols()) : 0;
}

double derev_audio_sample_rate(const derev_audio* audio) {
  return audio ? audio->audio.sample_rate : 0.0;
}

derev_status derev_audio_copy(const derev_audio* audio, double* out) {
  return guarded([&] {
    require(audio && out, "audio: null argument");
    const derev::Waveform& s = audio->audio.samples;
    for (Eigen::Index i = 0; i < s.rows(); ++i)
      for (Eigen::Index c = 0; c < s.cols(); ++c) out[i * s.cols() + c] = s(i, c);
    return DEREV_OK;
  });
}

void derev_audio_destroy(derev_audio* audio) { delete audio; }

// ---- scenes ----

derev_status derev_scene_simulate(const derev_scene_spec* spec, derev_scene** out) {
  return guarded([&] {
    require(spec && out, "scene: null argument");
    std::optional<derev::RVector> source;
    std::optional<derev::Waveform> noise;
    if (!spec->source_wav.empty()) {
      derev::Audio a = derev::read_wav(spec->source_wav);
      if (a.sample_rate != spec->spec.sample_rate)
        throw std::invalid_argument("scene: source sample rate differs from sample_rate");
      source = mono(a.samples);
    }
    if (!spec->noise_wav.empty()) {
      derev::Audio a = derev::read_wav(spec->noise_wav);
      if (a.sample_rate != spec->spec.sample_rate)
        throw std::invalid_argument("scene: noise sample rate differs from sample_rate");
      noise = std::move(a.samples);
    }
    *out = new derev_scene{derev::simulate(spec->spec, source ? &*source : nullptr,
                                           noise ? &*noise : nullptr)};
    return DEREV_OK;
  });
}

derev_status derev_scene_save(const derev_scene* scene, const char* dir) {
  return guarded([&] {
    require(scene && dir, "scene: null argument");
    const derev::Scene& s = scene->scene;
    const std::string base = std::string(dir) + "/";
    derev::write_wav(base + "y.wav", {s.y, s.sample_rate});
    derev::write_wav(base + "x_e.wav", {s.x_e, s.sample_rate});
    derev::write_wav(base + "x_r.wav", {s.x_r, s.sample_rate});
    derev::write_wav(base + "v.wav", {s.v, s.sample_rate});
    derev::write_wav(base + "source.wav", {derev::Waveform(s.source), s.sample_rate});
    return DEREV_OK;
  });
}

derev_status derev_scene_load(const char* dir, derev_scene** out) {
  return guarded([&] {
    require(dir && out, "scene: null argument");
    const std::string base = std::string(dir) + "/";
    auto sc = std::make_unique<derev_scene>();
    derev::Audio y = derev::read_wav(base + "y.wav");
    sc->scene.sample_rate = y.sample_rate;
    sc->scene.y = std::move(y.samples);
    const auto component = [&](const char* name) {
      derev::Audio a = derev::read_wav(base + name);
      if (a.sample_rate != sc->scene.sample_rate || a.samples.rows() != sc->scene.y.rows() ||
          a.samples.cols() != sc->scene.y.cols())
        throw derev::IoError(std::string("scene: ") + name + " does not match y.wav");
      return std::move(a.samples);
    };
    sc->scene.x_e = component("x_e.wav");
    sc->scene.x_r = component("x_r.wav");
    sc->scene.v = component("v.wav");
    if (std::ifstream(base + "source.wav").good())
      sc->scene.source = mono(derev::read_wav(base + "source.wav").samples);
    *out = sc.release();
    return DEREV_OK;
  });
}

derev_status derev_scene_component(const derev_scene* scene, const char* name,
                                   derev_audio** out) {
  return guarded([&] {
    require(scene && name && out, "scene: null argument");
    const derev::Scene& s = scene->scene;
    const std::string n = name;
    derev::Waveform w;
    if (n == "y") w = s.y;
    else if (n == "x_e") w = s.x_e;
    else if (n == "x_r") w = s.x_r;
    else if (n == "v") w = s.v;
    else if (n == "source") w = s.source;
    else throw std::invalid_argument("scene: unknown component '" + n + "'");
    *out = new derev_audio{{std::move(w), s.sample_rate}};
    return DEREV_OK;
  });
}

void derev_scene_destroy(derev_scene* scene) { delete scene; }

// ---- enhancement ----

derev_status derev_enhance(const derev_config* cfg, const derev_audio* input,
                           derev_audio** enhanced, derev_trace** trace,
                           derev_diagnostics** diagnostics) {
  return guarded([&] {
    require(cfg && input && enhanced, "enhance: null argument");
    if (input->audio.sample_rate != cfg->cfg.stft.sample_rate)
      throw std::invalid_argument("enhance: input sample rate " +
                                  derev::format_double(input->audio.sample_rate) +
                                  " Hz differs from configured " +
                                  derev::format_double(cfg->cfg.stft.sample_rate) + " Hz");
    derev::RunOptions opts;
    opts.record_trace = trace != nullptr;
    derev::RunResult res = derev::run(cfg->cfg, input->audio.samples, opts);
    auto out_audio =
        std::make_unique<derev_audio>(derev_audio{{std::move(res.enhanced), input->audio.sample_rate}});
    std::unique_ptr<derev_trace> out_trace;
    std::unique_ptr<derev_diagnostics> out_diag;
    if (trace) out_trace = std::make_unique<derev_trace>(derev_trace{std::move(*res.trace)});
    if (diagnostics)
      out_diag = std::make_unique<derev_diagnostics>(derev_diagnostics{std::move(res.diagnostics)});
    *enhanced = out_audio.release();
    if (trace) *trace = out_trace.release();
    if (diagnostics) *diagnostics = out_diag.release();
    return DEREV_OK;
  });
}

derev_status derev_diagnostics_counters(const derev_diagnostics* diag, derev_counters* out) {
  return guarded([&] {
    require(diag && out, "diagnostics: null argument");
    const derev::PipelineCounters& c = diag->diag.counters;
    *out = {c.psd_singular, c.mvdr_fallback, c.kalman_skipped, c.non_finite};
    return DEREV_OK;
  });
}

derev_status derev_diagnostics_write_csv(const derev_diagnostics* diag, const char* path,
                                         int decimation) {
  return guarded([&] {
    require(diag && path, "diagnostics: null argument");
    diag->diag.write_csv(path, decimation);
    return DEREV_OK;
  });
}

void derev_diagnostics_destroy(derev_diagnostics* diag) { delete diag; }

derev_status derev_trace_save(const derev_trace* trace, const char* path) {
  return guarded([&] {
    require(trace && path, "trace: null argument");
    trace->trace.save(path);
    return DEREV_OK;
  });
}

derev_status derev_trace_load(const char* path, derev_trace** out) {
  return guarded([&] {
    require(path && out, "trace: null argument");
    *out = new derev_trace{derev::ShadowTrace::load(path)};
    return DEREV_OK;
  });
}

int derev_trace_frames(const derev_trace* trace) { return trace ? trace->trace.frames : 0; }

void derev_trace_destroy(derev_trace* trace) { delete trace; }

derev_status derev_shadow_apply(const derev_trace* trace, const derev_audio* component,
                                derev_audio** out) {
  return guarded([&] {
    require(trace && component && out, "shadow: null argument");
    derev::RVector s = derev::shadow_apply(trace->trace, component->audio.samples);
    *out = new derev_audio{{derev::Waveform(s), component->audio.sample_rate}};
    return DEREV_OK;
  });
}

// ---- evaluation ----

derev_status derev_evaluate(const derev_trace* trace, const derev_scene* scene,
                            const derev_audio* enhanced, derev_report* report, char** csv) {
  return guarded([&] {
    require(trace && scene && report, "evaluate: null argument");
    const derev::Scene& s = scene->scene;
    const derev::SceneComponents comps{&s.x_e, &s.x_r, &s.v, &s.y};
    std::optional<derev::RVector> enh;
    if (enhanced) enh = mono(enhanced->audio.samples);
    const derev::MetricsReport r = derev::evaluate(trace->trace, comps, enh ? &*enh : nullptr);
    *report = {r.sir_in, r.sir_out, r.delta_sir, r.segsnr, r.lsd, r.superposition_error,
               r.replay_error};
    if (csv) *csv = dup_string(r.to_csv());
    if (!(r.superposition_error <= derev::kSuperpositionTolerance))
      return fail(DEREV_ERR_CONSISTENCY,
                  "evaluate: component shadows do not sum to the shadow of y (relative error " +
                      derev::format_double(r.superposition_error) + ")");
    return DEREV_OK;
  });
}

// ---- sweeps and plot data ----

derev_status derev_sweep(const char* grid_text, char** csv) {
  return guarded([&] {
    require(grid_text && csv, "sweep: null argument");
    const derev::SweepGrid grid = derev::sweep_grid_from(derev::parse_key_values(grid_text));
    const std::vector<derev::SweepRow> rows = derev::run_sweep(grid);
    for (const derev::SweepRow& r : rows)
      if (!(r.max_superposition_error <= derev::kSuperpositionTolerance))
        return fail(DEREV_ERR_CONSISTENCY, "sweep: superposition check failed");
    *csv = dup_string(derev::sweep_csv(rows));
    return DEREV_OK;
  });
}

derev_status derev_spectrogram_write(const derev_audio* audio, const derev_config* cfg,
                                     int channel, double range_db, const char* path) {
  return guarded([&] {
    require(audio && path, "spectrogram: null argument");
    require(range_db > 0.0, "spectrogram: range must be > 0 dB");
    const derev::Waveform& w = audio->audio.samples;
    require(channel >= 0 && channel < w.cols(), "spectrogram: channel out of range");
    derev::StftConfig sc = cfg ? cfg->cfg.stft : derev::StftConfig{};
    sc.sample_rate = audio->audio.sample_rate;
    sc.validate();
    const derev::Spectrogram spec = derev::analyze(derev::Waveform(w.col(channel)), sc);

    std::vector<double> db(static_cast<std::size_t>(spec.frames()) * spec.bins());
    double peak = -std::numeric_limits<double>::infinity();
    for (int l = 0; l < spec.frames(); ++l)
      for (int k = 0; k < spec.bins(); ++k) {
        const double p = std::norm(spec.at(l, k, 0));
        const double v = p > 0.0 ? 10.0 * std::log10(p) : -std::numeric_limits<double>::infinity();
        db[static_cast<std::size_t>(l) * spec.bins() + k] = v;
        peak = std::max(peak, v);
      }
    // An all-zero signal has no peak; report the floor everywhere.
    const double floor = std::isfinite(peak) ? peak - range_db : -range_db;

    std::ofstream out(path);
    if (!out) throw derev::IoError(std::string("spectrogram: cannot open '") + path + "'");
    std::string line = "frame,time_s";
    for (int k = 0; k < spec.bins(); ++k) line += ",f" + derev::format_double(sc.bin_frequency(k));
    out << line << "\n";
    const int pad = sc.frame_len - sc.hop;
    for (int l = 0; l < spec.frames(); ++l) {
      const double centre = (l * sc.hop - pad + sc.frame_len / 2) / sc.sample_rate;
      line = std::to_string(l) + "," + derev::format_double(centre);
      for (int k = 0; k < spec.bins(); ++k)
        line += "," + derev::format_double(std::max(db[static_cast<std::size_t>(l) * spec.bins() + k], floor));
      out << line << "\n";
    }
    if (!out) throw derev::IoError(std::string("spectrogram: write failed for '") + path + "'");
    return DEREV_OK;
  });
}

}  // extern "C"
