#include "raf/config_json.hpp"

#include <set>

namespace raf {

namespace {

using ordered_json = nlohmann::ordered_json;

void reject_unknown(const ordered_json& j, const std::set<std::string>& known,
                    const char* block) {
  if (!j.is_object()) throw ConfigError(std::string(block) + " block must be a JSON object");
  for (const auto& [key, _] : j.items())
    if (!known.count(key))
      throw ConfigError(std::string(block) + ": unknown key \"" + key + "\"");
}

template <typename T>
void take(const ordered_json& j, const char* key, T& out, const char* block) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(std::string(block) + ": bad value for \"" + key + "\"");
  }
}

void take_range(const ordered_json& j, const char* key, std::pair<int, int>& out,
                const char* block) {
  if (!j.contains(key)) return;
  const auto& v = j.at(key);
  if (!v.is_array() || v.size() != 2 || !v[0].is_number_integer() || !v[1].is_number_integer())
    throw ConfigError(std::string(block) + ": \"" + key + "\" must be [min, max]");
  out = {v[0].get<int>(), v[1].get<int>()};
  if (out.first > out.second)
    throw ConfigError(std::string(block) + ": \"" + key + "\" has min > max");
}

}  // namespace

nlohmann::ordered_json config_to_json(const RaformerConfig& cfg) {
  ordered_json j;
  j["frames"] = cfg.frames;
  j["height"] = cfg.height;
  j["width"] = cfg.width;
  j["channels"] = cfg.channels;
  j["win_h"] = cfg.win_h;
  j["win_w"] = cfg.win_w;
  j["keep"] = cfg.keep;
  j["layers"] = cfg.layers;
  j["heads"] = cfg.heads;
  j["embed_dim"] = cfg.embed_dim;
  j["ffn_dim"] = cfg.ffn_dim;
  j["ss_kernel"] = cfg.ss_kernel;
  j["ss_stride"] = cfg.ss_stride;
  j["ss_pad"] = cfg.ss_pad;
  j["beta"] = cfg.beta;
  j["gamma"] = cfg.gamma;
  j["leaky_slope"] = cfg.leaky_slope;
  j["seed"] = cfg.seed;
  return j;
}

RaformerConfig config_from_json(const nlohmann::ordered_json& j) {
  static const std::set<std::string> known = {
      "frames", "height", "width",     "channels",  "win_h",     "win_w",
      "keep",   "layers", "heads",     "embed_dim", "ffn_dim",   "ss_kernel",
      "ss_stride", "ss_pad", "beta",   "gamma",     "leaky_slope", "seed"};
  reject_unknown(j, known, "raformer");
  RaformerConfig cfg;
  take(j, "frames", cfg.frames, "raformer");
  take(j, "height", cfg.height, "raformer");
  take(j, "width", cfg.width, "raformer");
  take(j, "channels", cfg.channels, "raformer");
  take(j, "win_h", cfg.win_h, "raformer");
  take(j, "win_w", cfg.win_w, "raformer");
  take(j, "keep", cfg.keep, "raformer");
  take(j, "layers", cfg.layers, "raformer");
  take(j, "heads", cfg.heads, "raformer");
  take(j, "embed_dim", cfg.embed_dim, "raformer");
  take(j, "ffn_dim", cfg.ffn_dim, "raformer");
  take(j, "ss_kernel", cfg.ss_kernel, "raformer");
  take(j, "ss_stride", cfg.ss_stride, "raformer");
  take(j, "ss_pad", cfg.ss_pad, "raformer");
  take(j, "beta", cfg.beta, "raformer");
  take(j, "gamma", cfg.gamma, "raformer");
  take(j, "leaky_slope", cfg.leaky_slope, "raformer");
  take(j, "seed", cfg.seed, "raformer");
  return cfg;
}

nlohmann::ordered_json wire_to_json(const WireSpec& spec, int video_len) {
  ordered_json j;
  j["num"] = spec.num;
  j["len_range"] = {spec.len_range.first, spec.len_range.second};
  j["width_range"] = {spec.width_range.first, spec.width_range.second};
  j["dilate_kernel"] = spec.dilate_kernel;
  j["max_dilate_times"] = spec.max_dilate_times;
  j["max_move"] = spec.max_move;
  j["video_len"] = video_len;
  return j;
}

WireSpec wire_from_json(const nlohmann::ordered_json& j, int& video_len_out) {
  static const std::set<std::string> known = {"num",           "len_range",
                                              "width_range",   "dilate_kernel",
                                              "max_dilate_times", "max_move",
                                              "video_len"};
  reject_unknown(j, known, "wire");
  WireSpec spec;
  take(j, "num", spec.num, "wire");
  take_range(j, "len_range", spec.len_range, "wire");
  take_range(j, "width_range", spec.width_range, "wire");
  take(j, "dilate_kernel", spec.dilate_kernel, "wire");
  take(j, "max_dilate_times", spec.max_dilate_times, "wire");
  take(j, "max_move", spec.max_move, "wire");
  take(j, "video_len", video_len_out, "wire");
  return spec;
}

}  // namespace raf
