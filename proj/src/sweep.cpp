// Copyright 2026 The derev Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "derev/sweep.hpp"

#include <stdexcept>

#include "derev/metrics.hpp"

namespace derev {

void SweepGrid::validate() const {
  if (t60s.empty() || modes.empty() || seeds.empty())
    throw std::invalid_argument("sweep: t60, modes and seeds must be non-empty");
  for (double t : t60s) {
    SceneSpec s = scene;
    s.t60 = t;
    s.validate();
  }
  pipeline.validate();
  if (pipeline.geometry.size() != scene.geometry.size())
    throw std::invalid_argument("sweep: scene and pipeline geometries differ");
}

SweepGrid sweep_grid_from(const KeyValues& kv) {
  SweepGrid grid;
  KeyValues rest;
  long long seed_count = -1;
  for (const auto& [key, value] : kv) {
    if (key == "t60") {
      grid.t60s.clear();
      for (const auto& item : split_list(value)) grid.t60s.push_back(parse_double(key, item));
    } else if (key == "modes") {
      grid.modes.clear();
      for (const auto& item : split_list(value)) grid.modes.push_back(parse_mode(item));
    } else if (key == "seeds") {
      grid.seeds.clear();
      for (const auto& item : split_list(value))
        grid.seeds.push_back(static_cast<std::uint64_t>(parse_int(key, item)));
    } else if (key == "seed_count") {
      seed_count = parse_int(key, value);
    } else {
      rest[key] = value;
    }
  }
  grid.scene = scene_spec_from(rest, true);
  grid.pipeline = pipeline_config_from(rest, true);
  // A key must be known to at least one of the two structures.
  for (const auto& [key, value] : rest) {
    SceneSpec s;
    PipelineConfig p;
    if (!apply_scene_key(s, key, value) && !apply_pipeline_key(p, key, value) &&
        key != "num_mics" && key != "mic_spacing")
      throw std::invalid_argument("sweep: unknown key '" + key + "'");
  }
  if (seed_count >= 0) {
    if (seed_count < 1) throw std::invalid_argument("sweep: seed_count must be >= 1");
    grid.seeds.clear();
    for (long long i = 0; i < seed_count; ++i) grid.seeds.push_back(grid.scene.seed + i);
  }
  grid.validate();
  return grid;
}

std::vector<SweepRow> run_sweep(const SweepGrid& grid, SweepProgress* progress) {
  grid.validate();
  std::vector<SweepRow> rows;
  for (double t60 : grid.t60s) {
    std::vector<SweepRow> cells(grid.modes.size());
    for (std::size_t i = 0; i < grid.modes.size(); ++i) {
      cells[i].t60 = t60;
      cells[i].mode = grid.modes[i];
      cells[i].snr_db = grid.scene.snr_db;
    }
    for (std::uint64_t seed : grid.seeds) {
      SceneSpec spec = grid.scene;
      spec.t60 = t60;
      spec.seed = seed;
      const Scene scene = simulate(spec);
      const SceneComponents comps{&scene.x_e, &scene.x_r, &scene.v, &scene.y};
      for (std::size_t i = 0; i < grid.modes.size(); ++i) {
        PipelineConfig cfg = grid.pipeline;
        cfg.mode = grid.modes[i];
        RunOptions opts;
        opts.record_trace = true;
        RunResult res = run(cfg, scene.y, opts);
        const RVector enhanced = res.enhanced.col(0);
        const MetricsReport rep = evaluate(*res.trace, comps, &enhanced);
        SweepRow& c = cells[i];
        c.seeds += 1;
        c.sir_in += rep.sir_in;
        c.sir_out += rep.sir_out;
        c.delta_sir += rep.delta_sir;
        c.segsnr += rep.segsnr;
        c.lsd += rep.lsd;
        c.max_superposition_error = std::max(c.max_superposition_error, rep.superposition_error);
      }
    }
    for (SweepRow& c : cells) {
      const double n = c.seeds;
      c.sir_in /= n;
      c.sir_out /= n;
      c.delta_sir /= n;
      c.segsnr /= n;
      c.lsd /= n;
      if (progress) progress->cell_done(c);
      rows.push_back(c);
    }
  }
  return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows) {
  std::string out =
      "t60,mode,snr_db,seeds,sir_in,sir_out,delta_sir,segsnr,lsd,max_superposition_error\n";
  for (const SweepRow& r : rows) {
    out += format_double(r.t60) + "," + std::string(to_string(r.mode)) + "," +
           format_double(r.snr_db) + "," + std::to_string(r.seeds) + "," +
           format_double(r.sir_in) + "," + format_double(r.sir_out) + "," +
           format_double(r.delta_sir) + "," + format_double(r.segsnr) + "," +
           format_double(r.lsd) + "," + format_double(r.max_superposition_error) + "\n";
  }
  return out;
}

}  // namespace derev
