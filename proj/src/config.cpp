// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace derev {

namespace {

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

bool parse_bool(std::string_view key, std::string_view v) {
  if (v == "1" || v == "true" || v == "yes" || v == "on") return true;
  if (v == "0" || v == "false" || v == "no" || v == "off") return false;
  throw std::invalid_argument("config: '" + std::string(key) + "' expects a boolean, got '" +
                              std::string(v) + "'");
}

std::vector<Position> parse_positions(std::string_view text) {
  std::vector<Position> out;
  for (const std::string& triple : split_list(text, ';')) {
    const std::vector<std::string> xyz = split_list(triple, ',');
    if (xyz.size() != 3)
      throw std::invalid_argument("config: mic_positions entries must be 'x,y,z'");
    out.push_back({parse_double("mic_positions", xyz[0]), parse_double("mic_positions", xyz[1]),
                   parse_double("mic_positions", xyz[2])});
  }
  return out;
}

// Geometry and direction keys shared by pipeline configs and scene specs.
struct GeometryKeys {
  std::string positions;
  int num_mics = -1;
  double spacing = -1.0;
  bool touched = false;
};

bool apply_geometry_key(ArrayGeometry& g, Direction& doa, GeometryKeys& pending,
                        std::string_view key, std::string_view value) {
  if (key == "mic_positions") {
    pending.positions = std::string(value);
  } else if (key == "num_mics") {
    pending.num_mics = static_cast<int>(parse_int(key, value));
  } else if (key == "mic_spacing") {
    pending.spacing = parse_double(key, value);
  } else if (key == "reference_index") {
    g.reference_index = static_cast<int>(parse_int(key, value));
    return true;
  } else if (key == "speed_of_sound") {
    g.speed_of_sound = parse_double(key, value);
    return true;
  } else if (key == "doa") {
    doa.azimuth = parse_double(key, value);
    return true;
  } else if (key == "doa_elevation") {
    doa.elevation = parse_double(key, value);
    return true;
  } else {
    return false;
  }
  pending.touched = true;
  return true;
}

void finish_geometry(ArrayGeometry& g, const GeometryKeys& pending) {
  if (!pending.touched) return;
  std::vector<Position> positions;
  if (!pending.positions.empty()) {
    positions = parse_positions(pending.positions);
  } else {
    const int mics = pending.num_mics > 0 ? pending.num_mics : g.size();
    double spacing = pending.spacing;
    if (spacing <= 0.0) spacing = g.size() >= 2 ? g.distance(0, 1) : 0.04;
    if (mics < 2) throw std::invalid_argument("config: num_mics must be >= 2");
    positions = ArrayGeometry::uniform_linear(mics, spacing).mic_positions;
  }
  g.mic_positions = std::move(positions);
}

void add_geometry(KeyValues& kv, const ArrayGeometry& g, const Direction& doa) {
  std::string pos;
  for (std::size_t i = 0; i < g.mic_positions.size(); ++i) {
    if (i) pos += ";";
    pos += format_double(g.mic_positions[i][0]) + "," + format_double(g.mic_positions[i][1]) +
           "," + format_double(g.mic_positions[i][2]);
  }
  kv["mic_positions"] = pos;
  kv["reference_index"] = std::to_string(g.reference_index);
  kv["speed_of_sound"] = format_double(g.speed_of_sound);
  kv["doa"] = format_double(doa.azimuth);
  kv["doa_elevation"] = format_double(doa.elevation);
}

bool apply_stft_key(StftConfig& s, std::string_view key, std::string_view value) {
  if (key == "frame_len") s.frame_len = static_cast<int>(parse_int(key, value));
  else if (key == "hop") s.hop = static_cast<int>(parse_int(key, value));
  else if (key == "fft_len") s.fft_len = static_cast<int>(parse_int(key, value));
  else if (key == "sample_rate") s.sample_rate = parse_double(key, value);
  else return false;
  return true;
}

}  // namespace

std::vector<std::string> split_list(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = text.find(sep, start);
    const std::string_view item =
        trim(text.substr(start, end == std::string_view::npos ? std::string_view::npos : end - start));
    if (!item.empty()) out.emplace_back(item);
    if (end == std::string_view::npos) break;
    start = end + 1;
  }
  return out;
}

KeyValues parse_key_values(std::string_view text) {
  KeyValues kv;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const auto eol = text.find('\n', pos);
    std::string_view line = text.substr(pos, eol == std::string_view::npos ? std::string_view::npos : eol - pos);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (!line.empty()) {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw std::invalid_argument("config line " + std::to_string(line_no) +
                                    ": expected 'key = value'");
      const std::string key(trim(line.substr(0, eq)));
      if (key.empty())
        throw std::invalid_argument("config line " + std::to_string(line_no) + ": empty key");
      kv[key] = std::string(trim(line.substr(eq + 1)));
    }
    if (eol == std::string_view::npos) break;
    pos = eol + 1;
  }
  return kv;
}

KeyValues read_key_values(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("config: cannot open '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_key_values(ss.str());
}

std::string format_key_values(const KeyValues& kv) {
  std::string out;
  for (const auto& [k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string format_double(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (std::isnan(v)) return "nan";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view key, std::string_view text) {
  const std::string_view t = trim(text);
  if (t == "inf" || t == "+inf") return std::numeric_limits<double>::infinity();
  if (t == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const char* first = t.data();
  if (!t.empty() && t.front() == '+') ++first;
  const auto res = std::from_chars(first, t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw std::invalid_argument("config: '" + std::string(key) + "' expects a number, got '" +
                                std::string(text) + "'");
  return v;
}

long long parse_int(std::string_view key, std::string_view text) {
  const std::string_view t = trim(text);
  long long v = 0;
  const auto res = std::from_chars(t.data(), t.data() + t.size(), v);
  if (t.empty() || res.ec != std::errc() || res.ptr != t.data() + t.size())
    throw std::invalid_argument("config: '" + std::string(key) + "' expects an integer, got '" +
                                std::string(text) + "'");
  return v;
}

bool apply_pipeline_key(PipelineConfig& c, std::string_view key, std::string_view value) {
  GeometryKeys pending;
  if (apply_geometry_key(c.geometry, c.doa, pending, key, value)) {
    finish_geometry(c.geometry, pending);
    return true;
  }
  if (apply_stft_key(c.stft, key, value)) return true;
  if (key == "D") c.D = static_cast<int>(parse_int(key, value));
  else if (key == "L") c.L = static_cast<int>(parse_int(key, value));
  else if (key == "alpha") c.alpha = parse_double(key, value);
  else if (key == "lambda") c.lambda = parse_double(key, value);
  else if (key == "a") c.a = parse_double(key, value);
  else if (key == "diagonal_loading") c.diagonal_loading = parse_double(key, value);
  else if (key == "mode") c.mode = parse_mode(trim(value));
  else if (key == "process_noise") {
    const std::string_view v = trim(value);
    if (v == "stationary") c.process_noise = ProcessNoiseModel::kStationary;
    else if (v == "fixed") c.process_noise = ProcessNoiseModel::kFixed;
    else throw std::invalid_argument("config: process_noise must be 'stationary' or 'fixed'");
  } else if (key == "sigma_w2") c.sigma_w2 = parse_double(key, value);
  else if (key == "initial_error_variance") c.initial_error_variance = parse_double(key, value);
  else if (key == "allow_alpha_endpoints") c.allow_alpha_endpoints = parse_bool(key, trim(value));
  else if (key == "threads") c.threads = static_cast<int>(parse_int(key, value));
  else if (key == "diagnostics_decimation") c.diagnostics_decimation = static_cast<int>(parse_int(key, value));
  else return false;
  return true;
}

bool apply_scene_key(SceneSpec& s, std::string_view key, std::string_view value) {
  GeometryKeys pending;
  if (apply_geometry_key(s.geometry, s.doa, pending, key, value)) {
    finish_geometry(s.geometry, pending);
    return true;
  }
  if (key == "t60") s.t60 = parse_double(key, value);
  else if (key == "snr_db") s.snr_db = parse_double(key, value);
  else if (key == "duration") s.duration = parse_double(key, value);
  else if (key == "seed") s.seed = static_cast<std::uint64_t>(parse_int(key, value));
  else if (key == "early_taps") s.early_taps = static_cast<int>(parse_int(key, value));
  else if (key == "early_window_ms") s.early_window_ms = parse_double(key, value);
  else if (key == "sample_rate") s.sample_rate = parse_double(key, value);
  else if (key == "room_volume") s.room_volume = parse_double(key, value);
  else if (key == "source_distance") s.source_distance = parse_double(key, value);
  else return false;
  return true;
}

namespace {

// Geometry keys interact (mic_positions wins over num_mics/mic_spacing), so
// they are resolved together after all other keys.
template <typename T, typename Apply>
T from_key_values(const KeyValues& kv, bool ignore_unknown, Apply apply, ArrayGeometry T::*geom,
                  Direction T::*doa) {
  T out{};
  GeometryKeys pending;
  for (const auto& [key, value] : kv) {
    if (apply_geometry_key(out.*geom, out.*doa, pending, key, value)) continue;
    if (!apply(out, key, value) && !ignore_unknown)
      throw std::invalid_argument("config: unknown key '" + key + "'");
  }
  finish_geometry(out.*geom, pending);
  return out;
}

}  // namespace

PipelineConfig pipeline_config_from(const KeyValues& kv, bool ignore_unknown) {
  PipelineConfig c = from_key_values<PipelineConfig>(
      kv, ignore_unknown,
      [](PipelineConfig& cfg, std::string_view k, std::string_view v) {
        return apply_pipeline_key(cfg, k, v);
      },
      &PipelineConfig::geometry, &PipelineConfig::doa);
  c.validate();
  return c;
}

SceneSpec scene_spec_from(const KeyValues& kv, bool ignore_unknown) {
  SceneSpec s = from_key_values<SceneSpec>(
      kv, ignore_unknown,
      [](SceneSpec& spec, std::string_view k, std::string_view v) {
        return apply_scene_key(spec, k, v);
      },
      &SceneSpec::geometry, &SceneSpec::doa);
  s.validate();
  return s;
}

KeyValues to_key_values(const PipelineConfig& c) {
  KeyValues kv;
  add_geometry(kv, c.geometry, c.doa);
  kv["frame_len"] = std::to_string(c.stft.frame_len);
  kv["hop"] = std::to_string(c.stft.hop);
  kv["fft_len"] = std::to_string(c.stft.fft_len);
  kv["sample_rate"] = format_double(c.stft.sample_rate);
  kv["D"] = std::to_string(c.D);
  kv["L"] = std::to_string(c.L);
  kv["alpha"] = format_double(c.alpha);
  kv["lambda"] = format_double(c.lambda);
  kv["a"] = format_double(c.a);
  kv["diagonal_loading"] = format_double(c.diagonal_loading);
  kv["mode"] = std::string(to_string(c.mode));
  kv["process_noise"] = c.process_noise == ProcessNoiseModel::kStationary ? "stationary" : "fixed";
  kv["sigma_w2"] = format_double(c.sigma_w2);
  kv["initial_error_variance"] = format_double(c.initial_error_variance);
  kv["allow_alpha_endpoints"] = c.allow_alpha_endpoints ? "true" : "false";
  kv["threads"] = std::to_string(c.threads);
  kv["diagnostics_decimation"] = std::to_string(c.diagnostics_decimation);
  return kv;
}

KeyValues to_key_values(const SceneSpec& s) {
  KeyValues kv;
  add_geometry(kv, s.geometry, s.doa);
  kv["t60"] = format_double(s.t60);
  kv["snr_db"] = format_double(s.snr_db);
  kv["duration"] = format_double(s.duration);
  kv["seed"] = std::to_string(s.seed);
  kv["early_taps"] = std::to_string(s.early_taps);
  kv["early_window_ms"] = format_double(s.early_window_ms);
  kv["sample_rate"] = format_double(s.sample_rate);
  kv["room_volume"] = format_double(s.room_volume);
  kv["source_distance"] = format_double(s.source_distance);
  return kv;
}

}  // namespace derev
