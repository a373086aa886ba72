// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

// Command-line front end. Talks to the library only through derev.h.

#include <openssl/evp.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "derev/derev.h"
#include "json.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitInput = 2;
constexpr int kExitConsistency = 3;

// Status codes other than consistency failures are input problems from the
// user's point of view; internal errors also end up here.
struct CommandError {
  int exit_code;
  std::string message;
};

void check(derev_status st, const std::string& what) {
  if (st == DEREV_OK) return;
  const int code = st == DEREV_ERR_CONSISTENCY ? kExitConsistency : kExitInput;
  throw CommandError{code, what + ": " + derev_last_error()};
}

template <typename T, void (*Destroy)(T*)>
struct Handle {
  T* p = nullptr;
  Handle() = default;
  Handle(const Handle&) = delete;
  Handle& operator=(const Handle&) = delete;
  ~Handle() {
    if (p) Destroy(p);
  }
  T** out() { return &p; }
  T* get() const { return p; }
};

using Config = Handle<derev_config, derev_config_destroy>;
using SceneSpec = Handle<derev_scene_spec, derev_scene_spec_destroy>;
using Audio = Handle<derev_audio, derev_audio_destroy>;
using Scene = Handle<derev_scene, derev_scene_destroy>;
using Trace = Handle<derev_trace, derev_trace_destroy>;
using Diagnostics = Handle<derev_diagnostics, derev_diagnostics_destroy>;

std::string take_string(char* s) {
  std::string out = s ? s : "";
  derev_string_free(s);
  return out;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CommandError{kExitInput, "cannot open '" + path + "'"};
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
  if (!out) throw CommandError{kExitInput, "cannot write '" + path + "'"};
}

std::string sha256_file(const std::string& path) {
  const std::string data = read_text(path);
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (!EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr))
    throw CommandError{kExitInput, "sha256 failed for '" + path + "'"};
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 15];
  }
  return out;
}

json key_values_json(const std::string& text) {
  json obj = json::object();
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find(" = ");
    if (eq != std::string::npos) obj[line.substr(0, eq)] = line.substr(eq + 3);
  }
  return obj;
}

class Timer {
 public:
  void stage(const std::string& name) {
    const auto now = std::chrono::steady_clock::now();
    timings_[name] = std::chrono::duration<double>(now - last_).count();
    last_ = now;
  }
  json to_json() const {
    json t = json::object();
    for (const auto& [k, v] : timings_) t[k] = v;
    return t;
  }

 private:
  std::chrono::steady_clock::time_point last_ = std::chrono::steady_clock::now();
  std::map<std::string, double> timings_;
};

json manifest_base(const std::string& command) {
  json m;
  m["tool"] = "derev";
  m["version"] = derev_version();
  m["command"] = command;
  return m;
}

const char* seed_override() {
  const char* s = std::getenv("DEREV_SEED");
  return (s && *s) ? s : nullptr;
}

void load_config(Config& cfg, const std::string& path) {
  if (path.empty())
    check(derev_config_create(cfg.out()), "config");
  else
    check(derev_config_load(path.c_str(), cfg.out()), "config '" + path + "'");
}

// ---- simulate ----

struct SimulateArgs {
  std::string spec;
  std::string out_dir;
  std::vector<std::string> sets;
};

int cmd_simulate(const SimulateArgs& a) {
  Timer timer;
  SceneSpec spec;
  if (a.spec.empty())
    check(derev_scene_spec_create(spec.out()), "scene spec");
  else
    check(derev_scene_spec_load(a.spec.c_str(), spec.out()), "scene spec '" + a.spec + "'");
  for (const std::string& kv : a.sets) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos) throw CommandError{kExitInput, "--set expects key=value"};
    check(derev_scene_spec_set(spec.get(), kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str()),
          "--set " + kv);
  }
  if (const char* seed = seed_override()) check(derev_scene_spec_set(spec.get(), "seed", seed), "DEREV_SEED");
  timer.stage("load");

  Scene scene;
  check(derev_scene_simulate(spec.get(), scene.out()), "simulate");
  timer.stage("simulate");

  std::error_code ec;
  fs::create_directories(a.out_dir, ec);
  if (ec) throw CommandError{kExitInput, "cannot create '" + a.out_dir + "': " + ec.message()};
  check(derev_scene_save(scene.get(), a.out_dir.c_str()), "save scene");
  timer.stage("write");

  char* text = nullptr;
  check(derev_scene_spec_dump(spec.get(), &text), "scene spec");
  const std::string snapshot = take_string(text);
  write_text(a.out_dir + "/scene.cfg", snapshot);

  json m = manifest_base("simulate");
  m["config"] = key_values_json(snapshot);
  m["seed"] = m["config"]["seed"];
  json inputs = json::object();
  if (!a.spec.empty()) inputs[a.spec] = sha256_file(a.spec);
  for (const char* key : {"source_wav", "noise_wav"})
    if (m["config"].contains(key)) {
      const std::string p = m["config"][key];
      inputs[p] = sha256_file(p);
    }
  m["inputs"] = inputs;
  json outputs = json::object();
  for (const char* f : {"y.wav", "x_e.wav", "x_r.wav", "v.wav", "source.wav"})
    outputs[f] = sha256_file(a.out_dir + "/" + f);
  m["outputs"] = outputs;
  m["timings_s"] = timer.to_json();
  write_text(a.out_dir + "/manifest.json", m.dump(2) + "\n");
  std::cout << "wrote scene to " << a.out_dir << "\n";
  return kExitOk;
}

// ---- enhance ----

struct EnhanceArgs {
  std::string config;
  std::string input;
  std::string output;
  std::string mode;
  std::string trace;
  std::string diagnostics;
  int decimation = 0;
  int threads = -1;
};

int cmd_enhance(const EnhanceArgs& a) {
  Timer timer;
  Config cfg;
  load_config(cfg, a.config);
  if (!a.mode.empty()) check(derev_config_set(cfg.get(), "mode", a.mode.c_str()), "--mode");
  if (a.threads >= 0)
    check(derev_config_set(cfg.get(), "threads", std::to_string(a.threads).c_str()), "--threads");
  Audio input;
  check(derev_audio_read(a.input.c_str(), input.out()), "input '" + a.input + "'");
  if (derev_audio_channels(input.get()) != derev_config_channels(cfg.get()))
    throw CommandError{kExitInput, "input '" + a.input + "' has " +
                                       std::to_string(derev_audio_channels(input.get())) +
                                       " channels, configuration expects " +
                                       std::to_string(derev_config_channels(cfg.get()))};
  timer.stage("load");

  Audio enhanced;
  Trace trace;
  Diagnostics diag;
  check(derev_enhance(cfg.get(), input.get(), enhanced.out(), a.trace.empty() ? nullptr : trace.out(),
                      diag.out()),
        "enhance");
  timer.stage("enhance");

  check(derev_audio_write(enhanced.get(), a.output.c_str()), "output '" + a.output + "'");
  if (!a.trace.empty()) check(derev_trace_save(trace.get(), a.trace.c_str()), "trace");
  char* text = nullptr;
  check(derev_config_dump(cfg.get(), &text), "config");
  const std::string snapshot = take_string(text);
  json cfg_json = key_values_json(snapshot);
  if (!a.diagnostics.empty()) {
    const int dec = a.decimation > 0 ? a.decimation
                                     : std::stoi(cfg_json["diagnostics_decimation"].get<std::string>());
    check(derev_diagnostics_write_csv(diag.get(), a.diagnostics.c_str(), dec), "diagnostics");
  }
  timer.stage("write");

  derev_counters counters{};
  check(derev_diagnostics_counters(diag.get(), &counters), "diagnostics");
  json m = manifest_base("enhance");
  m["config"] = cfg_json;
  m["inputs"] = json::object({{a.input, sha256_file(a.input)}});
  if (!a.config.empty()) m["inputs"][a.config] = sha256_file(a.config);
  m["outputs"] = json::object({{a.output, sha256_file(a.output)}});
  if (!a.trace.empty()) m["outputs"][a.trace] = sha256_file(a.trace);
  m["counters"] = {{"psd_singular", counters.psd_singular},
                   {"mvdr_fallback", counters.mvdr_fallback},
                   {"kalman_skipped", counters.kalman_skipped},
                   {"non_finite", counters.non_finite}};
  m["timings_s"] = timer.to_json();
  write_text(a.output + ".manifest.json", m.dump(2) + "\n");
  std::cout << "enhanced " << a.input << " -> " << a.output << " (mode "
            << cfg_json["mode"].get<std::string>() << ")\n";
  return kExitOk;
}

// ---- evaluate ----

struct EvaluateArgs {
  std::string scene_dir;
  std::string trace;
  std::string enhanced;
  std::string output;
  double replay_tolerance = 1e-5;
};

int cmd_evaluate(const EvaluateArgs& a) {
  Scene scene;
  check(derev_scene_load(a.scene_dir.c_str(), scene.out()), "scene '" + a.scene_dir + "'");
  Trace trace;
  check(derev_trace_load(a.trace.c_str(), trace.out()), "trace '" + a.trace + "'");
  Audio enhanced;
  if (!a.enhanced.empty())
    check(derev_audio_read(a.enhanced.c_str(), enhanced.out()), "enhanced '" + a.enhanced + "'");

  derev_report report{};
  char* csv = nullptr;
  const derev_status st = derev_evaluate(trace.get(), scene.get(), enhanced.get(), &report, &csv);
  const std::string text = take_string(csv);
  if (st != DEREV_OK && st != DEREV_ERR_CONSISTENCY) check(st, "evaluate");
  if (!text.empty()) {
    if (a.output.empty())
      std::cout << text;
    else
      write_text(a.output, text);
  }
  if (st == DEREV_ERR_CONSISTENCY) check(st, "evaluate");
  // The enhanced WAV is stored as float32, so the replay only matches to
  // single precision.
  if (!a.enhanced.empty() && !(report.replay_error <= a.replay_tolerance)) {
    std::ostringstream msg;
    msg << "evaluate: trace replay differs from '" << a.enhanced << "' (relative error "
        << report.replay_error << ")";
    throw CommandError{kExitConsistency, msg.str()};
  }
  return kExitOk;
}

// ---- sweep ----

struct SweepArgs {
  std::string grid;
  std::string output;
};

int cmd_sweep(const SweepArgs& a) {
  std::string grid = a.grid.empty() ? std::string() : read_text(a.grid);
  // Later keys win in the parser, so appending overrides the grid file seed.
  if (const char* seed = seed_override()) grid += "\nseed = " + std::string(seed) + "\n";
  char* csv = nullptr;
  check(derev_sweep(grid.c_str(), &csv), "sweep");
  const std::string table = take_string(csv);
  if (a.output.empty())
    std::cout << table;
  else
    write_text(a.output, table);
  return kExitOk;
}

// ---- spectrogram ----

struct SpectrogramArgs {
  std::string input;
  std::string output;
  std::string config;
  int channel = 0;
  double range_db = 80.0;
};

int cmd_spectrogram(const SpectrogramArgs& a) {
  Audio audio;
  check(derev_audio_read(a.input.c_str(), audio.out()), "input '" + a.input + "'");
  Config cfg;
  if (!a.config.empty()) load_config(cfg, a.config);
  check(derev_spectrogram_write(audio.get(), cfg.get(), a.channel, a.range_db, a.output.c_str()),
        "spectrogram");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"derev: multichannel dereverberation engine"};
  app.set_version_flag("--version", std::string(derev_version()));
  app.require_subcommand(1);

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Generate a synthetic scene");
  c_sim->add_option("--spec", sim.spec, "Scene spec file (key = value)")->check(CLI::ExistingFile);
  c_sim->add_option("--out", sim.out_dir, "Output directory")->required();
  c_sim->add_option("--set", sim.sets, "Override a spec key (key=value), repeatable");

  EnhanceArgs enh;
  auto* c_enh = app.add_subcommand("enhance", "Run the dereverberation pipeline");
  c_enh->add_option("--config", enh.config, "Pipeline config file");
  c_enh->add_option("input", enh.input, "Multichannel input WAV")->required();
  c_enh->add_option("output", enh.output, "Enhanced mono WAV")->required();
  c_enh->add_option("--mode", enh.mode, "full | mvdr_only | mclp_only | passthrough");
  c_enh->add_option("--trace", enh.trace, "Write the weight trace for shadow filtering");
  c_enh->add_option("--diagnostics", enh.diagnostics, "Write per-frame, per-bin diagnostics CSV");
  c_enh->add_option("--decimation", enh.decimation, "Diagnostics frame decimation");
  c_enh->add_option("--threads", enh.threads, "Worker threads (0 = hardware concurrency)");

  EvaluateArgs ev;
  auto* c_ev = app.add_subcommand("evaluate", "Score a run by shadow filtering");
  c_ev->add_option("scene", ev.scene_dir, "Scene directory from 'simulate'")->required();
  c_ev->add_option("trace", ev.trace, "Trace from 'enhance --trace'")->required();
  c_ev->add_option("enhanced", ev.enhanced, "Enhanced WAV to cross-check against the trace");
  c_ev->add_option("--out", ev.output, "Report CSV (default: stdout)");
  c_ev->add_option("--replay-tolerance", ev.replay_tolerance, "Relative replay tolerance");

  SweepArgs sw;
  auto* c_sw = app.add_subcommand("sweep", "T60 x mode evaluation grid");
  c_sw->add_option("grid", sw.grid, "Grid spec file");
  c_sw->add_option("--out", sw.output, "Table CSV (default: stdout)");

  SpectrogramArgs sp;
  auto* c_sp = app.add_subcommand("spectrogram", "Export a dB magnitude matrix");
  c_sp->add_option("input", sp.input, "WAV file")->required();
  c_sp->add_option("output", sp.output, "Output CSV")->required();
  c_sp->add_option("--channel", sp.channel, "Channel index");
  c_sp->add_option("--range", sp.range_db, "Dynamic range in dB");
  c_sp->add_option("--config", sp.config, "Pipeline config with STFT settings");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : kExitInput;
  }

  try {
    if (*c_sim) return cmd_simulate(sim);
    if (*c_enh) return cmd_enhance(enh);
    if (*c_ev) return cmd_evaluate(ev);
    if (*c_sw) return cmd_sweep(sw);
    if (*c_sp) return cmd_spectrogram(sp);
  } catch (const CommandError& e) {
    std::cerr << "derev: " << e.message << "\n";
    return e.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "derev: " << e.what() << "\n";
    return kExitInput;
  }
  return kExitInput;
}
