// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "derev/pipeline.hpp"
#include "derev/scene.hpp"

namespace derev {

// Flat "key = value" text, '#' starts a comment. Keys are kept sorted so dumps
// are stable.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_key_values(std::string_view text);
KeyValues read_key_values(const std::string& path);
std::string format_key_values(const KeyValues& kv);

// Shortest round-trip decimal form, '.' separator regardless of locale.
std::string format_double(double v);
double parse_double(std::string_view key, std::string_view text);
long long parse_int(std::string_view key, std::string_view text);
std::vector<std::string> split_list(std::string_view text, char sep = ',');

// Keys understood by each structure. Unknown keys are an error unless
// `ignore_unknown` is set.
PipelineConfig pipeline_config_from(const KeyValues& kv, bool ignore_unknown = false);
SceneSpec scene_spec_from(const KeyValues& kv, bool ignore_unknown = false);

// Applies a single key. Returns false when the key is not recognised.
bool apply_pipeline_key(PipelineConfig& cfg, std::string_view key, std::string_view value);
bool apply_scene_key(SceneSpec& spec, std::string_view key, std::string_view value);

KeyValues to_key_values(const PipelineConfig& cfg);
KeyValues to_key_values(const SceneSpec& spec);

}  // namespace derev
