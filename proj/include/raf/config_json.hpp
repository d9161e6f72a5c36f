#pragma once

#include <nlohmann/json.hpp>

#include "raf/mask.hpp"
#include "raf/raformer.hpp"

namespace raf {

// Canonical key order; `keep` is written as materialized.
nlohmann::ordered_json config_to_json(const RaformerConfig& cfg);

// Strict parse: unknown keys are rejected, missing keys take defaults.
// Does not validate; pass the result through resolved().
RaformerConfig config_from_json(const nlohmann::ordered_json& j);

nlohmann::ordered_json wire_to_json(const WireSpec& spec, int video_len);

// Parses a wire block; video_len_out receives the sequence length field.
WireSpec wire_from_json(const nlohmann::ordered_json& j, int& video_len_out);

}  // namespace raf
