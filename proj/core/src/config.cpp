#include "cardiolabel/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "kv.hpp"

namespace cardiolabel {

namespace {

long long to_int(const std::string& key, const std::string& value, long long lo, long long hi) {
  long long v = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw std::runtime_error("config: key '" + key + "' has a malformed integer '" + value + "'");
  if (v < lo || v > hi)
    throw std::runtime_error("config: key '" + key + "' value " + value + " is outside [" + std::to_string(lo) + ", " +
                             std::to_string(hi) + "]");
  return v;
}

std::uint64_t to_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw std::runtime_error("config: key '" + key + "' has a malformed unsigned integer '" + value + "'");
  return v;
}

double to_double(const std::string& key, const std::string& value, double lo, double hi) {
  double v = 0.0;
  const auto [p, ec] = std::from_chars(value.data(), value.data() + value.size(), v);
  if (ec != std::errc() || p != value.data() + value.size())
    throw std::runtime_error("config: key '" + key + "' has a malformed number '" + value + "'");
  if (!(v >= lo && v <= hi))
    throw std::runtime_error("config: key '" + key + "' value " + value + " is out of range");
  return v;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Applies handlers by key, rejecting unknown and duplicate keys.
void dispatch(const std::string& text, const std::map<std::string, std::function<void(const std::string&, const std::string&)>>& handlers) {
  std::set<std::string> seen;
  for (const auto& [key, value] : detail::parse_kv_pairs(text, "config")) {
    const auto it = handlers.find(key);
    if (it == handlers.end()) throw std::runtime_error("config: unknown key '" + key + "'");
    if (!seen.insert(key).second) throw std::runtime_error("config: duplicate key '" + key + "'");
    it->second(key, value);
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("config: cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

std::string regime_name(Regime r) {
  return r == Regime::PositionDependent ? "position_dependent" : "position_independent";
}

Regime regime_from_name(const std::string& name) {
  if (name == "position_dependent") return Regime::PositionDependent;
  if (name == "position_independent") return Regime::PositionIndependent;
  throw std::runtime_error("config: unknown regime '" + name + "'");
}

RunConfig parse_run_config(const std::string& text) {
  RunConfig c;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> handlers{
      {"segment_count", [&](const auto& k, const auto& v) { c.net.segment_count = static_cast<int>(to_int(k, v, 1, 1 << 20)); }},
      {"segment_length", [&](const auto& k, const auto& v) { c.net.segment_length = to_int(k, v, 4, 1 << 24); }},
      {"block_depths",
       [&](const auto& k, const auto& v) {
         c.net.encoder.block_depths.clear();
         for (const auto& item : detail::split_commas(v))
           c.net.encoder.block_depths.push_back(static_cast<int>(to_int(k, item, 1, 64)));
         if (c.net.encoder.block_depths.empty()) throw std::runtime_error("config: key 'block_depths' is empty");
       }},
      {"growth", [&](const auto& k, const auto& v) { c.net.encoder.growth = static_cast<int>(to_int(k, v, 1, 4096)); }},
      {"lambda", [&](const auto& k, const auto& v) { c.net.lambda = to_double(k, v, 0.0, 1e6); }},
      {"lr", [&](const auto& k, const auto& v) { c.adam.lr = to_double(k, v, 1e-12, 1e3); }},
      {"beta1", [&](const auto& k, const auto& v) { c.adam.beta1 = to_double(k, v, 0.0, 1.0 - 1e-12); }},
      {"beta2", [&](const auto& k, const auto& v) { c.adam.beta2 = to_double(k, v, 0.0, 1.0 - 1e-12); }},
      {"epsilon", [&](const auto& k, const auto& v) { c.adam.eps = to_double(k, v, 1e-300, 1.0); }},
      {"epochs", [&](const auto& k, const auto& v) { c.epochs = static_cast<int>(to_int(k, v, 1, 1 << 20)); }},
      {"batch_size", [&](const auto& k, const auto& v) { c.batch_size = static_cast<int>(to_int(k, v, 1, 1 << 20)); }},
      {"patience", [&](const auto& k, const auto& v) { c.patience = static_cast<int>(to_int(k, v, 0, 1 << 20)); }},
      {"k_folds", [&](const auto& k, const auto& v) { c.k_folds = static_cast<int>(to_int(k, v, 2, 1 << 16)); }},
      {"holdout_fraction",
       [&](const auto& k, const auto& v) { c.holdout_fraction = to_double(k, v, 0.0, 1.0 - 1e-12); }},
      {"seed", [&](const auto& k, const auto& v) { c.seed = to_u64(k, v); }},
      {"regime", [&](const auto&, const auto& v) { c.regime = regime_from_name(v); }},
      {"manifest", [&](const auto&, const auto& v) { c.manifest = v; }},
      {"out_dir", [&](const auto&, const auto& v) { c.out_dir = v; }},
  };
  dispatch(text, handlers);
  validate_config(c.net);
  return c;
}

RunConfig load_run_config(const std::string& path) { return parse_run_config(read_text_file(path)); }

std::string render_run_config(const RunConfig& c) {
  std::ostringstream out;
  out << "segment_count = " << c.net.segment_count << "\n";
  out << "segment_length = " << c.net.segment_length << "\n";
  out << "block_depths = ";
  for (std::size_t i = 0; i < c.net.encoder.block_depths.size(); ++i)
    out << (i ? "," : "") << c.net.encoder.block_depths[i];
  out << "\n";
  out << "growth = " << c.net.encoder.growth << "\n";
  out << "lambda = " << fmt_double(c.net.lambda) << "\n";
  out << "lr = " << fmt_double(c.adam.lr) << "\n";
  out << "beta1 = " << fmt_double(c.adam.beta1) << "\n";
  out << "beta2 = " << fmt_double(c.adam.beta2) << "\n";
  out << "epsilon = " << fmt_double(c.adam.eps) << "\n";
  out << "epochs = " << c.epochs << "\n";
  out << "batch_size = " << c.batch_size << "\n";
  out << "patience = " << c.patience << "\n";
  out << "k_folds = " << c.k_folds << "\n";
  out << "holdout_fraction = " << fmt_double(c.holdout_fraction) << "\n";
  out << "seed = " << c.seed << "\n";
  out << "regime = " << regime_name(c.regime) << "\n";
  out << "manifest = " << c.manifest << "\n";
  out << "out_dir = " << c.out_dir << "\n";
  return out.str();
}

SynthSpec parse_synth_spec(const std::string& text) {
  SynthSpec s;
  const std::map<std::string, std::function<void(const std::string&, const std::string&)>> handlers{
      {"patients", [&](const auto& k, const auto& v) { s.patients = static_cast<int>(to_int(k, v, 1, 1 << 24)); }},
      {"murmur_prevalence", [&](const auto& k, const auto& v) { s.murmur_prevalence = to_double(k, v, 0.0, 1.0); }},
      {"segments_per_recording",
       [&](const auto& k, const auto& v) { s.segments_per_recording = static_cast<int>(to_int(k, v, 1, 1 << 20)); }},
      {"noise_level", [&](const auto& k, const auto& v) { s.noise_level = to_double(k, v, 0.0, 1.0); }},
      {"sample_rate_hz", [&](const auto& k, const auto& v) { s.sample_rate_hz = static_cast<int>(to_int(k, v, 400, 1 << 20)); }},
      {"locations",
       [&](const auto&, const auto& v) {
         s.locations.clear();
         for (const auto& item : detail::split_commas(v)) s.locations.push_back(location_from_name(item));
         if (s.locations.empty()) throw std::runtime_error("config: key 'locations' is empty");
       }},
  };
  dispatch(text, handlers);
  return s;
}

SynthSpec load_synth_spec(const std::string& path) { return parse_synth_spec(read_text_file(path)); }

}  // namespace cardiolabel
