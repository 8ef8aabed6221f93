#pragma once

// FPGA resource budget and I/O widths used by the analytical models.

#include <cstdint>
#include <fstream>
#include <map>
#include <string>

#include <json.hpp>

#include "sadse/error.hpp"

namespace sadse {

struct DeviceBudget {
  std::string name = "custom";
  std::int64_t bram_blocks_available = 0;
  std::int64_t dsp_available = 0;
  std::int64_t bram_block_bits = 18432;
  std::int64_t dram_port_bits = 512;
  std::int64_t l1_pack_bytes = 8;
  std::int64_t l2_pack_bytes = 32;
  /// "<op>:<type>" -> DSPs per SIMD lane.
  std::map<std::string, std::int64_t> dsp_cost_table = {{"mac:fp32", 5}, {"mac:int16", 1}, {"mac:int8", 1}};

  std::int64_t dsp_cost(const std::string& op, const std::string& type) const {
    auto it = dsp_cost_table.find(op + ":" + type);
    if (it == dsp_cost_table.end()) throw ConfigError("no DSP cost entry for operator '" + op + ":" + type + "'");
    return it->second;
  }

  void validate() const {
    auto positive = [&](std::int64_t v, const char* field) {
      if (v <= 0) throw ConfigError("device '" + name + "': field '" + field + "' must be positive");
    };
    positive(bram_blocks_available, "bram_blocks");
    positive(dsp_available, "dsp");
    positive(bram_block_bits, "bram_block_bits");
    positive(dram_port_bits, "dram_port_bits");
    positive(l1_pack_bytes, "l1_pack_bytes");
    positive(l2_pack_bytes, "l2_pack_bytes");
    for (const auto& [k, v] : dsp_cost_table)
      if (v < 0) throw ConfigError("device '" + name + "': negative DSP cost for '" + k + "'");
  }
};

/// Alveo U250 class: 70% of 12288 DSPs and of 5376 BRAM18K blocks.
inline DeviceBudget u250_like() {
  DeviceBudget d;
  d.name = "u250-like";
  d.dsp_available = 8600;
  d.bram_blocks_available = 3763;
  return d;
}

/// Tiny budget for exhaustive cross-checks on 64^3-sized problems.
inline DeviceBudget small_test() {
  DeviceBudget d;
  d.name = "small-test";
  d.dsp_available = 320;
  d.bram_blocks_available = 160;
  d.dram_port_bits = 128;
  return d;
}

inline DeviceBudget device_from_json(const nlohmann::json& j, const std::string& fallback_name = "custom") {
  if (!j.is_object()) throw ConfigError("device description must be a JSON object");
  DeviceBudget d;
  if (j.contains("preset")) {
    auto base = j.at("preset").get<std::string>();
    if (base == "u250-like" || base == "u250") d = u250_like();
    else if (base == "small-test") d = small_test();
    else throw ConfigError("unknown device preset '" + base + "'");
  }
  d.name = j.value("name", j.contains("preset") ? d.name : fallback_name);
  static const char* known[] = {"name",         "preset",         "bram_blocks",   "dsp",           "bram_block_bits",
                                "dram_port_bits", "l1_pack_bytes", "l2_pack_bytes", "dsp_cost_table"};
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto* k : known) ok |= key == k;
    if (!ok) throw ConfigError("device '" + d.name + "': unknown field '" + key + "'");
  }
  auto num = [&](const char* key, std::int64_t& out) {
    if (!j.contains(key)) return;
    if (!j.at(key).is_number_integer()) throw ConfigError("device '" + d.name + "': field '" + key + "' must be an integer");
    out = j.at(key).get<std::int64_t>();
  };
  num("bram_blocks", d.bram_blocks_available);
  num("dsp", d.dsp_available);
  num("bram_block_bits", d.bram_block_bits);
  num("dram_port_bits", d.dram_port_bits);
  num("l1_pack_bytes", d.l1_pack_bytes);
  num("l2_pack_bytes", d.l2_pack_bytes);
  if (j.contains("dsp_cost_table")) {
    const auto& t = j.at("dsp_cost_table");
    if (!t.is_object()) throw ConfigError("device '" + d.name + "': dsp_cost_table must be an object");
    for (const auto& [k, v] : t.items()) {
      if (!v.is_number_integer()) throw ConfigError("device '" + d.name + "': DSP cost for '" + k + "' must be an integer");
      d.dsp_cost_table[k] = v.get<std::int64_t>();
    }
  }
  d.validate();
  return d;
}

inline nlohmann::ordered_json device_to_json(const DeviceBudget& d) {
  nlohmann::ordered_json j;
  j["name"] = d.name;
  j["bram_blocks"] = d.bram_blocks_available;
  j["dsp"] = d.dsp_available;
  j["bram_block_bits"] = d.bram_block_bits;
  j["dram_port_bits"] = d.dram_port_bits;
  j["l1_pack_bytes"] = d.l1_pack_bytes;
  j["l2_pack_bytes"] = d.l2_pack_bytes;
  j["dsp_cost_table"] = d.dsp_cost_table;
  return j;
}

/// Preset name or path to a JSON device file.
inline DeviceBudget load_device(const std::string& preset_or_path) {
  if (preset_or_path == "u250-like" || preset_or_path == "u250") return u250_like();
  if (preset_or_path == "small-test") return small_test();
  std::ifstream in(preset_or_path);
  if (!in) throw ConfigError("unknown device preset or unreadable file '" + preset_or_path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("device file '" + preset_or_path + "': " + e.what());
  }
  auto stem = preset_or_path.substr(preset_or_path.find_last_of('/') + 1);
  return device_from_json(j, stem.substr(0, stem.find('.')));
}

}  // namespace sadse
