#include "cardiolabel/checkpoint.hpp"

#include <json.hpp>

#include <cmath>
#include <stdexcept>

#include "bytes.hpp"
#include "cardiolabel/wav.hpp"

namespace cardiolabel {

namespace {

constexpr std::uint32_t kVersion = 1;

using json = nlohmann::json;

json finite_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }
double null_to_nan(const json& j) { return j.is_null() ? std::numeric_limits<double>::quiet_NaN() : j.get<double>(); }

std::string shape_string(std::span<const std::int64_t> shape) {
  std::string s = "{";
  for (std::size_t i = 0; i < shape.size(); ++i) s += (i ? "," : "") + std::to_string(shape[i]);
  return s + "}";
}

}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const EnsembleParams& params, std::uint64_t init_seed,
                                               const std::vector<EpochStats>& history) {
  const auto tensors = params.all();

  json meta;
  meta["config"]["segment_count"] = params.config.segment_count;
  meta["config"]["segment_length"] = params.config.segment_length;
  meta["config"]["block_depths"] = params.config.encoder.block_depths;
  meta["config"]["growth"] = params.config.encoder.growth;
  meta["config"]["lambda"] = params.config.lambda;
  meta["seed"] = init_seed;
  meta["history"] = json::array();
  for (const auto& h : history)
    meta["history"].push_back(json::array(
        {h.epoch, finite_or_null(h.train_loss), finite_or_null(h.train_f1), finite_or_null(h.val_loss), finite_or_null(h.val_f1)}));
  meta["tensors"] = json::array();
  for (const ParamTensor* p : tensors)
    meta["tensors"].push_back(json{{"name", p->name}, {"shape", p->value.shape()}});
  const std::string meta_text = meta.dump();

  detail::ByteWriter body;
  body.u32(static_cast<std::uint32_t>(meta_text.size()));
  body.raw(meta_text.data(), meta_text.size());
  for (const ParamTensor* p : tensors)
    for (double v : p->value.values()) body.f64(v);

  detail::ByteWriter w;
  w.raw("CLCK", 4);
  w.u32(kVersion);
  w.u64(detail::fnv1a(body.out));
  w.raw(body.out.data(), body.out.size());
  return std::move(w.out);
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  detail::ByteReader r(bytes, "checkpoint");
  r.expect_magic("CLCK");
  if (const auto v = r.u32(); v != kVersion)
    throw std::runtime_error("checkpoint: unsupported version " + std::to_string(v));
  const std::uint64_t checksum = r.u64();
  if (checksum != detail::fnv1a(bytes.subspan(r.pos)))
    throw std::runtime_error("checkpoint: checksum mismatch, file is corrupt");

  const std::uint32_t meta_len = r.u32();
  r.need(meta_len);
  json meta;
  try {
    meta = json::parse(bytes.begin() + static_cast<std::ptrdiff_t>(r.pos),
                       bytes.begin() + static_cast<std::ptrdiff_t>(r.pos + meta_len));
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: malformed meta JSON: ") + e.what());
  }
  r.pos += meta_len;

  NetConfig config;
  try {
    const auto& c = meta.at("config");
    config.segment_count = c.at("segment_count").get<int>();
    config.segment_length = c.at("segment_length").get<std::int64_t>();
    config.encoder.block_depths = c.at("block_depths").get<std::vector<int>>();
    config.encoder.growth = c.at("growth").get<int>();
    config.lambda = c.at("lambda").get<double>();
  } catch (const json::exception& e) {
    throw std::runtime_error(std::string("checkpoint: meta is missing config fields: ") + e.what());
  }
  validate_config(config);

  Checkpoint out{.init_seed = meta.at("seed").get<std::uint64_t>(), .history = {}, .params = init_params(config, 0)};
  for (const auto& row : meta.at("history")) {
    if (!row.is_array() || row.size() != 5) throw std::runtime_error("checkpoint: malformed history row");
    EpochStats h;
    h.epoch = row[0].get<int>();
    h.train_loss = null_to_nan(row[1]);
    h.train_f1 = null_to_nan(row[2]);
    h.val_loss = null_to_nan(row[3]);
    h.val_f1 = null_to_nan(row[4]);
    out.history.push_back(h);
  }

  const auto tensors = out.params.all();
  const auto& meta_tensors = meta.at("tensors");
  if (meta_tensors.size() != tensors.size())
    throw std::runtime_error("checkpoint: holds " + std::to_string(meta_tensors.size()) + " tensors, config expects " +
                             std::to_string(tensors.size()));
  for (std::size_t i = 0; i < tensors.size(); ++i) {
    const auto name = meta_tensors[i].at("name").get<std::string>();
    const auto shape = meta_tensors[i].at("shape").get<std::vector<std::int64_t>>();
    if (name != tensors[i]->name)
      throw std::runtime_error("checkpoint: tensor " + std::to_string(i) + " is named '" + name + "', expected '" +
                               tensors[i]->name + "'");
    if (shape != tensors[i]->value.shape())
      throw std::runtime_error("checkpoint: tensor '" + name + "' has shape " + shape_string(shape) +
                               ", config expects " + shape_string(tensors[i]->value.shape()));
    for (auto& v : tensors[i]->value.values()) v = r.f64();
    tensors[i]->zero_grad();
  }
  r.finish();
  return out;
}

void save_checkpoint(const std::string& path, const EnsembleParams& params, std::uint64_t init_seed,
                     const std::vector<EpochStats>& history) {
  write_file_bytes(path, serialize_checkpoint(params, init_seed, history));
}

Checkpoint load_checkpoint(const std::string& path) { return deserialize_checkpoint(read_file_bytes(path)); }

}  // namespace cardiolabel
