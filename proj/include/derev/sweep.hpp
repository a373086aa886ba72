// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "derev/config.hpp"
#include "derev/pipeline.hpp"
#include "derev/scene.hpp"

namespace derev {

struct SweepGrid {
  std::vector<double> t60s{0.4, 0.5, 0.6, 0.7, 0.8};
  std::vector<Mode> modes{Mode::kPassthrough, Mode::kMvdrOnly, Mode::kMclpOnly, Mode::kFull};
  std::vector<std::uint64_t> seeds{1};
  SceneSpec scene;          // t60 and seed are overwritten per cell
  PipelineConfig pipeline;  // mode is overwritten per cell

  void validate() const;
};

// Grid files use the scene/pipeline keys plus list-valued "t60", "modes" and
// "seeds" (comma separated). "seed_count = n" expands to seeds seed..seed+n-1.
SweepGrid sweep_grid_from(const KeyValues& kv);

struct SweepRow {
  double t60 = 0.0;
  Mode mode = Mode::kFull;
  double snr_db = 0.0;
  int seeds = 0;
  // Means over seeds.
  double sir_in = 0.0;
  double sir_out = 0.0;
  double delta_sir = 0.0;
  double segsnr = 0.0;
  double lsd = 0.0;
  double max_superposition_error = 0.0;
};

struct SweepProgress {
  virtual ~SweepProgress() = default;
  virtual void cell_done(const SweepRow& row) = 0;
};

// One row per (t60, mode), T60-major. The scene for each (t60, seed) is built
// once and shared by all modes.
std::vector<SweepRow> run_sweep(const SweepGrid& grid, SweepProgress* progress = nullptr);

std::string sweep_csv(const std::vector<SweepRow>& rows);

}  // namespace derev
