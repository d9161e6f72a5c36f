// Command-line harness: gen-masks, forward, eval, report.
//
// Exit codes: 0 ok, 1 usage, 2 io/format, 3 config, 4 manifest alignment,
// 5 report schema.

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>

#include "raf/config_json.hpp"
#include "raf/image_io.hpp"
#include "raf/mask.hpp"
#include "raf/metrics.hpp"
#include "raf/raformer.hpp"

namespace fs = std::filesystem;
using ordered_json = nlohmann::ordered_json;

namespace {

struct RunConfig {
  std::uint64_t seed = 0;
  raf::RaformerConfig raformer;
  raf::WireSpec wire;
  int video_len = 80;
};

RunConfig load_run_config(const std::optional<std::string>& path) {
  RunConfig rc;
  if (!path) return rc;
  std::ifstream f(*path);
  if (!f) throw raf::IoError("cannot open config " + *path);
  ordered_json j;
  try {
    j = ordered_json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw raf::ConfigError("config " + *path + ": " + e.what());
  }
  if (!j.is_object()) throw raf::ConfigError("config " + *path + " must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (key != "seed" && key != "raformer" && key != "wire")
      throw raf::ConfigError("config: unknown top-level key \"" + key + "\"");
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned())
      throw raf::ConfigError("config: seed must be a non-negative integer");
    rc.seed = j["seed"].get<std::uint64_t>();
  }
  if (j.contains("raformer")) rc.raformer = raf::config_from_json(j["raformer"]);
  if (j.contains("wire")) rc.wire = raf::wire_from_json(j["wire"], rc.video_len);
  return rc;
}

ordered_json effective_json(const std::string& command, const RunConfig& rc) {
  ordered_json j;
  j["command"] = command;
  j["seed"] = rc.seed;
  j["raformer"] = raf::config_to_json(rc.raformer);
  j["wire"] = raf::wire_to_json(rc.wire, rc.video_len);
  return j;
}

void echo(const ordered_json& j) { std::cout << j.dump(2) << std::endl; }

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::trunc | std::ios::binary);
  if (!f) throw raf::IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw raf::IoError("short write to " + path.string());
}

std::string frame_name(int index, const char* ext) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%05d%s", index, ext);
  return buf;
}

int check_threads_env() {
  const char* v = std::getenv("RAF_THREADS");
  if (!v) return 1;
  const int n = std::atoi(v);
  if (n < 1) {
    std::cerr << "warning: ignoring RAF_THREADS=" << v << " (not a positive integer)\n";
    return 1;
  }
  return n;  // upper bound; the pipeline itself runs sequentially
}

// ---- gen-masks -------------------------------------------------------------

struct GenMasksArgs {
  std::optional<std::string> config;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> num;
  std::optional<int> len;
};

int cmd_gen_masks(const GenMasksArgs& args) {
  RunConfig rc = load_run_config(args.config);
  if (args.seed) rc.seed = *args.seed;
  if (args.num) rc.wire.num = *args.num;
  if (args.len) rc.video_len = *args.len;
  rc.raformer.seed = rc.seed;
  rc.wire.seed = rc.seed;
  rc.raformer = raf::resolved(rc.raformer);
  if (rc.video_len < 1) throw raf::ConfigError("video_len must be >= 1");

  const ordered_json eff = effective_json("gen-masks", rc);
  echo(eff);

  try {
    fs::create_directories(args.out);
  } catch (const fs::filesystem_error& e) {
    throw raf::IoError(std::string("cannot create ") + args.out + ": " + e.what());
  }

  raf::Rng rng(rc.wire.seed);
  const raf::Mask stamp =
      raf::create_wire_mask(rc.wire, rc.raformer.height, rc.raformer.width, rng);
  const raf::MaskSequence seq = raf::create_video_mask(
      stamp, rc.raformer.height, rc.raformer.width, rc.video_len, rc.wire.max_move, rng);

  const fs::path out(args.out);
  for (std::size_t i = 0; i < seq.frames.size(); ++i) {
    const auto bytes = raf::encode_mask(seq.frames[i]);
    raf::write_file(out / frame_name(static_cast<int>(i) + 1, ".pgm"), bytes);
  }
  ordered_json motion;
  motion["moves"] = ordered_json::array();
  for (const auto& [dx, dy] : seq.motion_log) motion["moves"].push_back({dx, dy});
  write_text(out / "motion.json", motion.dump(2) + "\n");
  write_text(out / "config.json", eff.dump(2) + "\n");
  return 0;
}

// ---- forward ---------------------------------------------------------------

struct ForwardArgs {
  std::optional<std::string> config;
  std::string manifest;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> save_weights;
  std::optional<std::string> load_weights;
};

int cmd_forward(const ForwardArgs& args) {
  RunConfig rc = load_run_config(args.config);
  if (args.seed) rc.seed = *args.seed;
  rc.raformer.seed = rc.seed;
  rc.wire.seed = rc.seed;

  std::optional<raf::ModelWeights> loaded;
  if (args.load_weights) {
    loaded = raf::load_weights(*args.load_weights);
    if (!args.config) {
      // No explicit config: the bundle defines the architecture.
      rc.raformer = loaded->config;
    } else {
      // Both given: they must agree on everything but the init seed.
      ordered_json a = raf::config_to_json(loaded->config);
      ordered_json b = raf::config_to_json(raf::resolved(rc.raformer));
      a.erase("seed");
      b.erase("seed");
      if (a != b)
        throw raf::ConfigError("loaded weights disagree with the run configuration");
    }
  }
  rc.raformer = raf::resolved(rc.raformer);
  echo(effective_json("forward", rc));
  check_threads_env();

  raf::ModelWeights weights =
      loaded ? std::move(*loaded) : raf::init_weights(rc.raformer);
  if (args.save_weights) raf::save_weights(weights, *args.save_weights);

  const auto entries = raf::load_manifest(args.manifest);
  const fs::path base = fs::path(args.manifest).parent_path();
  const fs::path out(args.out);
  fs::create_directories(out);

  const int t_len = rc.raformer.frames;
  ordered_json trace_json;
  trace_json["clips"] = ordered_json::array();
  ordered_json timings_json;
  timings_json["clips"] = ordered_json::array();
  std::vector<raf::ClipManifestEntry> pred_entries;

  for (const auto& entry : entries) {
    const raf::Clip clip = raf::load_clip(
        entry, base, std::pair{rc.raformer.height, rc.raformer.width});
    const int n = static_cast<int>(clip.frames.extent(0));
    if (n < t_len)
      throw raf::IoError("clip " + entry.id + " has " + std::to_string(n) +
                         " frames, config needs " + std::to_string(t_len));

    // Consecutive chunks of T frames; the final chunk backs up to cover the
    // tail, overwriting any overlap deterministically.
    std::vector<int> starts;
    for (int s = 0; s + t_len <= n; s += t_len) starts.push_back(s);
    if (starts.back() + t_len < n) starts.push_back(n - t_len);

    const fs::path clip_dir = out / entry.id;
    fs::create_directories(clip_dir);

    ordered_json clip_trace;
    clip_trace["id"] = entry.id;
    clip_trace["chunks"] = ordered_json::array();
    std::vector<double> layer_ms(static_cast<std::size_t>(rc.raformer.layers), 0.0);

    const std::int64_t h = clip.frames.extent(1), w = clip.frames.extent(2);
    for (const int start : starts) {
      raf::Tensor sub({t_len, h, w, 3});
      std::copy_n(clip.frames.data() + static_cast<std::int64_t>(start) * h * w * 3,
                  sub.size(), sub.data());
      raf::MaskSequence sub_masks;
      const raf::MaskSequence* masks_ptr = nullptr;
      if (clip.masks) {
        for (int t = 0; t < t_len; ++t) {
          sub_masks.frames.push_back(
              clip.masks->frames[static_cast<std::size_t>(start + t)]);
          sub_masks.motion_log.emplace_back(0, 0);
        }
        masks_ptr = &sub_masks;
      }

      raf::ForwardTrace trace;
      const raf::Tensor frames = raf::run_raformer(sub, masks_ptr, weights, &trace);

      for (int t = 0; t < t_len; ++t) {
        raf::Tensor img({h, w, 3});
        const float* src = frames.data() + static_cast<std::int64_t>(t) * h * w * 3;
        for (std::int64_t i = 0; i < img.size(); ++i) img.data()[i] = src[i] * 255.0f;
        raf::write_file(clip_dir / frame_name(start + t + 1, ".ppm"),
                        raf::encode_image(raf::tensor_to_image(img)));
      }

      ordered_json chunk;
      chunk["start"] = start;
      chunk["layers"] = ordered_json::array();
      for (const auto& per_frame : trace.kept) chunk["layers"].push_back(per_frame);
      clip_trace["chunks"].push_back(std::move(chunk));
      for (std::size_t l = 0; l < trace.layer_ms.size(); ++l)
        layer_ms[l] += trace.layer_ms[l];
    }

    trace_json["clips"].push_back(std::move(clip_trace));
    ordered_json timing;
    timing["id"] = entry.id;
    timing["layer_ms"] = layer_ms;
    timings_json["clips"].push_back(timing);
    std::cout << "clip " << entry.id << " layer ms:";
    for (double ms : layer_ms) std::cout << " " << static_cast<long>(ms);
    std::cout << std::endl;

    raf::ClipManifestEntry pe;
    pe.id = entry.id;
    pe.frames_dir = entry.id;
    pe.split = entry.split;
    pe.mask_kind = entry.mask_kind;
    pred_entries.push_back(std::move(pe));
  }

  write_text(out / "raa_trace.json", trace_json.dump(2) + "\n");
  write_text(out / "timings.json", timings_json.dump(2) + "\n");
  raf::write_manifest(pred_entries, out / "manifest.jsonl");
  return 0;
}

// ---- eval ------------------------------------------------------------------

struct EvalArgs {
  std::string pred;
  std::string gt;
  std::string out;
};

int cmd_eval(const EvalArgs& args) {
  ordered_json eff;
  eff["command"] = "eval";
  eff["pred"] = args.pred;
  eff["gt"] = args.gt;
  eff["out"] = args.out;
  echo(eff);

  const auto gt_entries = raf::load_manifest(args.gt);
  const auto pred_entries = raf::load_manifest(args.pred);
  const fs::path gt_base = fs::path(args.gt).parent_path();
  const fs::path pred_base = fs::path(args.pred).parent_path();

  std::map<std::string, const raf::ClipManifestEntry*> pred_by_id;
  for (const auto& e : pred_entries) pred_by_id[e.id] = &e;

  std::vector<std::string> missing;
  for (const auto& e : gt_entries)
    if (!pred_by_id.count(e.id)) missing.push_back(e.id);
  if (!missing.empty()) {
    std::cerr << "error: prediction manifest is missing ids:";
    for (const auto& id : missing) std::cerr << " " << id;
    std::cerr << std::endl;
    return 4;
  }

  std::vector<raf::MetricRow> rows;
  for (const auto& gt_entry : gt_entries) {
    const raf::Clip gt_clip = raf::load_clip(gt_entry, gt_base, std::nullopt);
    const raf::Clip pred_clip =
        raf::load_clip(*pred_by_id[gt_entry.id], pred_base, std::nullopt);
    if (!pred_clip.frames.same_shape(gt_clip.frames))
      throw raf::DimensionError("clip " + gt_entry.id + ": prediction " +
                                raf::shape_string(pred_clip.frames.shape()) +
                                " vs ground truth " +
                                raf::shape_string(gt_clip.frames.shape()));
    rows.push_back(raf::evaluate_clip(gt_entry.id, pred_clip.frames, gt_clip.frames,
                                      gt_clip.masks ? &*gt_clip.masks : nullptr));
  }
  raf::write_csv(raf::aggregate(rows), args.out);
  return 0;
}

// ---- report ----------------------------------------------------------------

std::string format4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

int cmd_report(const std::vector<std::string>& csvs) {
  ordered_json eff;
  eff["command"] = "report";
  eff["inputs"] = csvs;
  echo(eff);

  struct Column {
    std::string label;
    raf::MetricReport report;
  };
  std::vector<Column> cols;
  try {
    for (const auto& p : csvs)
      cols.push_back({fs::path(p).stem().string(), raf::read_csv(p)});
  } catch (const raf::ParseError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 5;
  }

  // All inputs must list the same videos in the same order.
  const auto& first = cols.front().report;
  for (const Column& c : cols) {
    if (c.report.rows.size() != first.rows.size()) {
      std::cerr << "error: " << c.label << " lists a different video set" << std::endl;
      return 5;
    }
    for (std::size_t i = 0; i < first.rows.size(); ++i)
      if (c.report.rows[i].video_id != first.rows[i].video_id) {
        std::cerr << "error: " << c.label << " row " << i + 1 << " is "
                  << c.report.rows[i].video_id << ", expected "
                  << first.rows[i].video_id << std::endl;
        return 5;
      }
  }

  const std::size_t nrows = first.rows.size() + 1;  // + AGGREGATE
  auto value_of = [&](const Column& c, std::size_t row,
                      int metric) -> std::optional<double> {
    const bool agg = row == first.rows.size();
    if (metric == 0) return agg ? c.report.mean_psnr : c.report.rows[row].psnr;
    if (metric == 1) return agg ? c.report.mean_psnr_star : c.report.rows[row].psnr_star;
    return agg ? c.report.mean_ssim : c.report.rows[row].ssim;
  };

  std::vector<std::string> ids;
  for (const auto& r : first.rows) ids.push_back(r.video_id);
  ids.push_back("AGGREGATE");

  static const char* metric_names[3] = {"psnr", "psnr_star", "ssim"};
  std::vector<std::vector<std::string>> table(nrows);
  for (std::size_t row = 0; row < nrows; ++row) {
    for (int metric = 0; metric < 3; ++metric) {
      // Higher is better for all three metrics.
      std::optional<double> best;
      for (const Column& c : cols) {
        const auto v = value_of(c, row, metric);
        if (v && (!best || *v > *best)) best = v;
      }
      for (const Column& c : cols) {
        const auto v = value_of(c, row, metric);
        std::string cell = v ? format4(*v) : "-";
        if (v && best && *v == *best && cols.size() > 1) cell = "**" + cell + "**";
        table[row].push_back(std::move(cell));
      }
    }
  }

  std::vector<std::string> headers;
  headers.push_back("video_id");
  for (int metric = 0; metric < 3; ++metric)
    for (const Column& c : cols) headers.push_back(c.label + ":" + metric_names[metric]);

  std::vector<std::size_t> widths(headers.size());
  for (std::size_t i = 0; i < headers.size(); ++i) widths[i] = headers[i].size();
  for (std::size_t row = 0; row < nrows; ++row) {
    widths[0] = std::max(widths[0], ids[row].size());
    for (std::size_t i = 0; i < table[row].size(); ++i)
      widths[i + 1] = std::max(widths[i + 1], table[row][i].size());
  }
  auto pad = [](const std::string& s, std::size_t w) {
    return s + std::string(w - s.size(), ' ');
  };
  std::string line = pad(headers[0], widths[0]);
  for (std::size_t i = 1; i < headers.size(); ++i) line += "  " + pad(headers[i], widths[i]);
  std::cout << line << "\n";
  for (std::size_t row = 0; row < nrows; ++row) {
    line = pad(ids[row], widths[0]);
    for (std::size_t i = 0; i < table[row].size(); ++i)
      line += "  " + pad(table[row][i], widths[i + 1]);
    std::cout << line << "\n";
  }
  return 0;
}

template <typename Fn>
int guarded(Fn&& fn) {
  try {
    return fn();
  } catch (const raf::ConfigError& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << std::endl;
    return 2;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"redundancy-aware video inpainting pipeline"};
  app.require_subcommand(1);

  GenMasksArgs gm;
  auto* gen = app.add_subcommand("gen-masks", "generate a wire-shaped video mask sequence");
  gen->add_option("--config", gm.config, "run config JSON");
  gen->add_option("--out", gm.out, "output directory")->required();
  gen->add_option("--seed", gm.seed, "seed override");
  gen->add_option("--num", gm.num, "wire count override");
  gen->add_option("--len", gm.len, "sequence length override");

  ForwardArgs fw;
  auto* fwd = app.add_subcommand("forward", "run the inpainting stack over a manifest");
  fwd->add_option("--config", fw.config, "run config JSON");
  fwd->add_option("--manifest", fw.manifest, "input clip manifest")->required();
  fwd->add_option("--out", fw.out, "output directory")->required();
  fwd->add_option("--seed", fw.seed, "seed override");
  fwd->add_option("--save-weights", fw.save_weights, "write the weight bundle here");
  fwd->add_option("--load-weights", fw.load_weights, "read the weight bundle from here");

  EvalArgs ev;
  auto* evs = app.add_subcommand("eval", "score predictions against ground truth");
  evs->add_option("--pred", ev.pred, "prediction manifest")->required();
  evs->add_option("--gt", ev.gt, "ground-truth manifest")->required();
  evs->add_option("--out", ev.out, "output CSV")->required();

  std::vector<std::string> report_csvs;
  auto* rep = app.add_subcommand("report", "merge metric CSVs into a comparison table");
  rep->add_option("csvs", report_csvs, "metric CSV files")->required()->expected(-1);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    // Collapse CLI11's exit-code zoo: 0 for --help/--version, 1 for usage.
    return app.exit(e) == 0 ? 0 : 1;
  }

  if (gen->parsed()) return guarded([&] { return cmd_gen_masks(gm); });
  if (fwd->parsed()) return guarded([&] { return cmd_forward(fw); });
  if (evs->parsed()) return guarded([&] { return cmd_eval(ev); });
  if (rep->parsed()) return guarded([&] { return cmd_report(report_csvs); });
  return 1;
}
