#pragma once

// On-disk formats:
//   feature file  "TICF" | u32 version=1 | u64 count | u32 dim | count*dim f32, all little-endian
//   meta file     one JSON object per feature row (id, time, lat, lon, date, brightness)
//   model file    JSON document with config, layer weights and log_tau
//   P5 graymap    binary PGM, maxval <= 255
// Every writer goes through write_atomic (temp file + rename).

#include <nlohmann/json.hpp>

#include <algorithm>
#include <bit>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>
#include <type_traits>
#include <string>
#include <vector>

#include "ticl/curation.hpp"
#include "ticl/model.hpp"
#include "ticl/time_core.hpp"

namespace ticl {

static_assert(std::endian::native == std::endian::little, "feature files assume a little-endian host");

inline constexpr char kFeatureMagic[4] = {'T', 'I', 'C', 'F'};
inline constexpr std::uint32_t kFeatureVersion = 1;
inline constexpr std::size_t kFeatureHeaderBytes = 20;
inline constexpr int kModelFormatVersion = 1;

inline void write_atomic(const std::filesystem::path& path, const std::string& bytes) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot open '" + tmp.string() + "' for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw std::runtime_error("write failed for '" + tmp.string() + "'");
  }
  std::filesystem::rename(tmp, path);
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// ---------------------------------------------------------------------------
// Feature file

namespace detail {

template <class T>
void put(std::string& out, T v) {
  char buf[sizeof(T)];
  std::memcpy(buf, &v, sizeof(T));
  out.append(buf, sizeof(T));
}

template <class T>
T get(const std::string& in, std::size_t offset) {
  T v;
  std::memcpy(&v, in.data() + offset, sizeof(T));
  return v;
}

}  // namespace detail

inline std::string encode_features(const Dataset& ds) {
  std::string out;
  out.reserve(kFeatureHeaderBytes + 4 * ds.size() * static_cast<std::size_t>(ds.dim));
  out.append(kFeatureMagic, 4);
  detail::put<std::uint32_t>(out, kFeatureVersion);
  detail::put<std::uint64_t>(out, ds.size());
  detail::put<std::uint32_t>(out, static_cast<std::uint32_t>(ds.dim));
  for (const auto& r : ds.records) {
    if (static_cast<int>(r.features.size()) != ds.dim)
      throw ValidationError("record '" + r.id + "': feature length does not match dim");
    for (double v : r.features) detail::put<float>(out, static_cast<float>(v));
  }
  return out;
}

struct FeatureBlock {
  std::uint32_t dim = 0;
  std::vector<std::vector<double>> rows;
};

/// Parses and validates a feature file image. `name` prefixes error messages.
inline FeatureBlock decode_features(const std::string& bytes, const std::string& name = "feature file") {
  if (bytes.size() < kFeatureHeaderBytes)
    throw ValidationError(name + ": truncated header (" + std::to_string(bytes.size()) +
                          " bytes, need " + std::to_string(kFeatureHeaderBytes) + ")");
  if (std::memcmp(bytes.data(), kFeatureMagic, 4) != 0)
    throw ValidationError(name + ": bad magic at byte 0 (expected \"TICF\")");
  const auto version = detail::get<std::uint32_t>(bytes, 4);
  if (version != kFeatureVersion)
    throw ValidationError(name + ": unsupported version " + std::to_string(version) +
                          " at byte 4 (expected 1)");
  const auto count = detail::get<std::uint64_t>(bytes, 8);
  const auto dim = detail::get<std::uint32_t>(bytes, 16);
  if (count > 0 && dim == 0) throw ValidationError(name + ": dim 0 at byte 16 with non-zero count");
  const unsigned __int128 expected = kFeatureHeaderBytes + static_cast<unsigned __int128>(4) * count * dim;
  if (expected != bytes.size())
    throw ValidationError(name + ": length mismatch: expected " +
                          std::to_string(static_cast<unsigned long long>(expected)) + " bytes (count " +
                          std::to_string(count) + ", dim " + std::to_string(dim) + "), actual " +
                          std::to_string(bytes.size()) + " bytes");
  FeatureBlock block;
  block.dim = dim;
  block.rows.resize(static_cast<std::size_t>(count));
  std::size_t offset = kFeatureHeaderBytes;
  for (std::size_t i = 0; i < block.rows.size(); ++i) {
    auto& row = block.rows[i];
    row.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j, offset += 4) {
      const float v = detail::get<float>(bytes, offset);
      if (!std::isfinite(v))
        throw ValidationError(name + ": non-finite value at byte " + std::to_string(offset) +
                              " (row " + std::to_string(i) + ", col " + std::to_string(j) + ")");
      row[j] = v;
    }
  }
  return block;
}

// ---------------------------------------------------------------------------
// Meta file

inline nlohmann::ordered_json meta_to_json(const FeatureRecord& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["time"] = format_clock(r.time);
  j["lat"] = r.lat ? nlohmann::ordered_json(*r.lat) : nlohmann::ordered_json(nullptr);
  j["lon"] = r.lon ? nlohmann::ordered_json(*r.lon) : nlohmann::ordered_json(nullptr);
  j["date"] = r.date ? nlohmann::ordered_json(*r.date) : nlohmann::ordered_json(nullptr);
  j["brightness"] = r.brightness ? nlohmann::ordered_json(*r.brightness) : nlohmann::ordered_json(nullptr);
  return j;
}

inline std::string encode_meta(const Dataset& ds) {
  std::string out;
  for (const auto& r : ds.records) {
    out += meta_to_json(r).dump();
    out += '\n';
  }
  return out;
}

namespace detail {

inline std::optional<double> opt_number(const nlohmann::json& j, const char* key, const std::string& where) {
  if (!j.contains(key) || j[key].is_null()) return std::nullopt;
  if (!j[key].is_number()) throw ValidationError(where + ": field '" + key + "' must be a number or null");
  return j[key].get<double>();
}

}  // namespace detail

/// Metadata records (features left empty), one per non-empty line.
inline std::vector<FeatureRecord> decode_meta(const std::string& text, const std::string& name = "meta file") {
  std::vector<FeatureRecord> out;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const std::string where = name + " line " + std::to_string(lineno);
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ValidationError(where + ": invalid JSON (" + e.what() + ")");
    }
    if (!j.is_object()) throw ValidationError(where + ": expected a JSON object");
    FeatureRecord r;
    if (!j.contains("id") || !j["id"].is_string()) throw ValidationError(where + ": field 'id' must be a string");
    r.id = j["id"].get<std::string>();
    if (!j.contains("time") || !j["time"].is_string())
      throw ValidationError(where + ": field 'time' must be an \"HH:MM\" string");
    try {
      r.time = parse_clock(j["time"].get<std::string>());
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": field 'time': " + e.what());
    }
    r.lat = detail::opt_number(j, "lat", where);
    r.lon = detail::opt_number(j, "lon", where);
    r.brightness = detail::opt_number(j, "brightness", where);
    if (j.contains("date") && !j["date"].is_null()) {
      if (!j["date"].is_string()) throw ValidationError(where + ": field 'date' must be a string or null");
      r.date = j["date"].get<std::string>();
      try {
        (void)month_of(*r.date);
      } catch (const ValidationError& e) {
        throw ValidationError(where + ": field 'date': " + e.what());
      }
    }
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// Dataset pair

inline Dataset assemble_dataset(FeatureBlock block, std::vector<FeatureRecord> meta,
                                const std::string& name = "dataset") {
  if (block.rows.size() != meta.size())
    throw ValidationError(name + ": meta has " + std::to_string(meta.size()) + " lines but features have " +
                          std::to_string(block.rows.size()) + " rows");
  Dataset ds;
  ds.dim = static_cast<int>(block.dim);
  for (std::size_t i = 0; i < meta.size(); ++i) meta[i].features = std::move(block.rows[i]);
  ds.records = std::move(meta);
  validate_dataset(ds);
  return ds;
}

inline Dataset read_dataset(const std::filesystem::path& features, const std::filesystem::path& meta) {
  return assemble_dataset(decode_features(read_file(features), features.string()),
                          decode_meta(read_file(meta), meta.string()), features.string());
}

inline void write_dataset(const Dataset& ds, const std::filesystem::path& features,
                          const std::filesystem::path& meta) {
  validate_dataset(ds);
  write_atomic(features, encode_features(ds));
  write_atomic(meta, encode_meta(ds));
}

// ---------------------------------------------------------------------------
// Model file

namespace detail {

inline nlohmann::json mlp_to_json(const Mlp& mlp) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& layer : mlp.layers) {
    nlohmann::json w = nlohmann::json::array();
    for (Eigen::Index r = 0; r < layer.w.rows(); ++r) {
      std::vector<double> row(static_cast<std::size_t>(layer.w.cols()));
      for (Eigen::Index c = 0; c < layer.w.cols(); ++c) row[static_cast<std::size_t>(c)] = layer.w(r, c);
      w.push_back(row);
    }
    std::vector<double> b(layer.b.data(), layer.b.data() + layer.b.size());
    layers.push_back({{"w", w}, {"b", b}});
  }
  return layers;
}

inline Mlp mlp_from_json(const nlohmann::json& j, const std::string& name, const std::vector<int>& dims,
                         Activation act, bool residual) {
  if (!j.is_array() || j.size() + 1 != dims.size())
    throw ValidationError("model shape error in " + name + ": expected " + std::to_string(dims.size() - 1) +
                          " layers");
  Mlp mlp;
  mlp.activation = act;
  mlp.residual = residual;
  for (std::size_t l = 0; l < j.size(); ++l) {
    const std::string where = name + " layer " + std::to_string(l);
    const int in = dims[l], out = dims[l + 1];
    const auto& jl = j[l];
    if (!jl.contains("w") || !jl.contains("b") || !jl["w"].is_array() || !jl["b"].is_array())
      throw ValidationError("model shape error in " + where + ": missing 'w' or 'b'");
    if (static_cast<int>(jl["w"].size()) != out || static_cast<int>(jl["b"].size()) != out)
      throw ValidationError("model shape error in " + where + ": expected " + std::to_string(out) + " rows");
    DenseLayer layer{Matrix(out, in), Vector(out)};
    for (int r = 0; r < out; ++r) {
      const auto& row = jl["w"][static_cast<std::size_t>(r)];
      if (!row.is_array() || static_cast<int>(row.size()) != in)
        throw ValidationError("model shape error in " + where + ": row " + std::to_string(r) + " must have " +
                              std::to_string(in) + " columns");
      for (int c = 0; c < in; ++c) {
        if (!row[static_cast<std::size_t>(c)].is_number())
          throw ValidationError("model value error in " + where + ": non-numeric weight");
        layer.w(r, c) = row[static_cast<std::size_t>(c)].get<double>();
      }
      if (!jl["b"][static_cast<std::size_t>(r)].is_number())
        throw ValidationError("model value error in " + where + ": non-numeric bias");
      layer.b(r) = jl["b"][static_cast<std::size_t>(r)].get<double>();
    }
    if (!layer.w.allFinite() || !layer.b.allFinite())
      throw ValidationError("model value error in " + where + ": non-finite parameter");
    mlp.layers.push_back(std::move(layer));
  }
  return mlp;
}

}  // namespace detail

inline std::string encode_model(const ModelParams& p) {
  const auto& c = p.config;
  nlohmann::ordered_json j;
  j["format_version"] = kModelFormatVersion;
  nlohmann::ordered_json cfg;
  cfg["C"] = c.space.num_classes();
  cfg["time_classes"] = c.space.time_classes();
  nlohmann::json factors = nlohmann::json::array();
  for (const auto& f : c.space.factors()) factors.push_back({{"name", f.name}, {"cardinality", f.cardinality}});
  cfg["factors"] = factors;
  cfg["D"] = c.feature_dim;
  cfg["K"] = c.embed_dim;
  cfg["time_hidden"] = c.time_hidden;
  cfg["adaptor_hidden"] = c.adaptor_hidden;
  cfg["activation"] = to_string(c.activation);
  cfg["adaptor_residual"] = c.adaptor_residual;
  cfg["time_input"] = to_string(c.time_input);
  cfg["loss_mode"] = to_string(c.loss_mode);
  if (c.time_input == TimeInput::rff) {
    cfg["rff"] = {{"dim", p.rff.dim}, {"sigma", p.rff.sigma}, {"projection", p.rff.projection},
                  {"offsets", p.rff.offsets}};
  }
  if (c.time_input == TimeInput::t2v) cfg["t2v"] = {{"omegas", p.t2v.omegas}, {"phis", p.t2v.phis}};
  j["config"] = cfg;
  j["time_encoder"] = detail::mlp_to_json(p.time_encoder);
  j["adaptor"] = detail::mlp_to_json(p.adaptor);
  j["log_tau"] = p.log_tau;
  return j.dump() + "\n";
}

inline ModelParams decode_model(const std::string& text, const std::string& name = "model file") {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(name + ": invalid JSON (" + e.what() + ")");
  }
  if (!j.is_object() || !j.contains("format_version") || !j["format_version"].is_number_integer())
    throw ValidationError(name + ": missing format_version");
  if (j["format_version"].get<int>() != kModelFormatVersion)
    throw ValidationError(name + ": format_version " + std::to_string(j["format_version"].get<int>()) +
                          " is not supported (expected 1)");
  for (const char* key : {"config", "time_encoder", "adaptor", "log_tau"})
    if (!j.contains(key)) throw ValidationError(name + ": missing '" + std::string(key) + "'");
  const auto& cfg = j["config"];
  ModelParams p;
  auto& c = p.config;
  try {
    std::vector<LabelFactor> factors;
    for (const auto& f : cfg.value("factors", nlohmann::json::array()))
      factors.push_back({f.at("name").get<std::string>(), f.at("cardinality").get<int>()});
    c.space = TimeLabelSpace(cfg.value("time_classes", cfg.at("C").get<int>()), factors);
    if (c.space.num_classes() != cfg.at("C").get<int>())
      throw ValidationError("C does not match the label space factors");
    c.feature_dim = cfg.at("D").get<int>();
    c.embed_dim = cfg.at("K").get<int>();
    c.time_hidden = cfg.at("time_hidden").get<std::vector<int>>();
    c.adaptor_hidden = cfg.at("adaptor_hidden").get<std::vector<int>>();
    c.activation = parse_activation(cfg.at("activation").get<std::string>());
    c.adaptor_residual = cfg.value("adaptor_residual", true);
    c.time_input = parse_time_input(cfg.value("time_input", std::string("one-hot")));
    c.loss_mode = parse_loss_mode(cfg.value("loss_mode", std::string("class")));
    if (c.time_input == TimeInput::rff) {
      const auto& r = cfg.at("rff");
      p.rff.dim = r.at("dim").get<int>();
      p.rff.sigma = r.at("sigma").get<double>();
      p.rff.projection = r.at("projection").get<std::vector<double>>();
      p.rff.offsets = r.at("offsets").get<std::vector<double>>();
      if (p.rff.projection.size() != 2 * static_cast<std::size_t>(p.rff.dim) ||
          p.rff.offsets.size() != static_cast<std::size_t>(p.rff.dim))
        throw ValidationError("rff parameter shapes do not match dim");
      c.rff_dim = p.rff.dim;
      c.rff_sigma = p.rff.sigma;
    }
    if (c.time_input == TimeInput::t2v) {
      p.t2v.omegas = cfg.at("t2v").at("omegas").get<std::vector<double>>();
      p.t2v.phis = cfg.at("t2v").at("phis").get<std::vector<double>>();
      if (p.t2v.omegas.size() != p.t2v.phis.size() || p.t2v.omegas.size() < 2)
        throw ValidationError("t2v parameter shapes are inconsistent");
      c.t2v_dim = p.t2v.dim();
    }
    detail::check_dims(c);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(name + ": bad config (" + e.what() + ")");
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": bad config (" + e.what() + ")");
  }
  std::vector<int> tdims{c.time_input_dim()};
  tdims.insert(tdims.end(), c.time_hidden.begin(), c.time_hidden.end());
  tdims.push_back(c.embed_dim);
  std::vector<int> adims{c.feature_dim};
  adims.insert(adims.end(), c.adaptor_hidden.begin(), c.adaptor_hidden.end());
  adims.push_back(c.embed_dim);
  try {
    p.time_encoder = detail::mlp_from_json(j["time_encoder"], "time_encoder", tdims, c.activation, false);
    p.adaptor = detail::mlp_from_json(j["adaptor"], "adaptor", adims, c.activation,
                                      c.adaptor_residual && c.feature_dim == c.embed_dim);
  } catch (const ValidationError& e) {
    throw ValidationError(name + ": " + e.what());
  }
  if (!j["log_tau"].is_number() || !std::isfinite(j["log_tau"].get<double>()))
    throw ValidationError(name + ": log_tau must be a finite number");
  p.log_tau = j["log_tau"].get<double>();
  return p;
}

inline void save_model(const ModelParams& p, const std::filesystem::path& path) {
  write_atomic(path, encode_model(p));
}

inline ModelParams load_model(const std::filesystem::path& path) {
  return decode_model(read_file(path), path.string());
}

// ---------------------------------------------------------------------------
// P5 graymap

namespace detail {

inline std::string pgm_token(const std::string& bytes, std::size_t& pos, const std::string& name) {
  while (pos < bytes.size()) {
    if (bytes[pos] == '#') {
      while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
    } else if (std::isspace(static_cast<unsigned char>(bytes[pos]))) {
      ++pos;
    } else {
      break;
    }
  }
  const std::size_t start = pos;
  while (pos < bytes.size() && !std::isspace(static_cast<unsigned char>(bytes[pos]))) ++pos;
  if (start == pos) throw ValidationError(name + ": truncated PGM header at byte " + std::to_string(start));
  return bytes.substr(start, pos - start);
}

}  // namespace detail

inline GrayImage decode_pgm(const std::string& bytes, const std::string& name = "image") {
  std::size_t pos = 0;
  if (detail::pgm_token(bytes, pos, name) != "P5") throw ValidationError(name + ": not a binary PGM (P5) at byte 0");
  int vals[3];
  for (int& v : vals) {
    const std::size_t at = pos;
    const std::string tok = detail::pgm_token(bytes, pos, name);
    try {
      std::size_t used = 0;
      v = std::stoi(tok, &used);
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ValidationError(name + ": bad PGM header field '" + tok + "' near byte " + std::to_string(at));
    }
  }
  const int w = vals[0], h = vals[1], maxval = vals[2];
  if (w <= 0 || h <= 0) throw ValidationError(name + ": PGM dimensions must be positive");
  if (maxval < 1 || maxval > 255) throw ValidationError(name + ": PGM maxval must be in 1..255");
  ++pos;  // single whitespace before raster
  const std::size_t need = static_cast<std::size_t>(w) * static_cast<std::size_t>(h);
  if (bytes.size() < pos + need)
    throw ValidationError(name + ": PGM raster truncated: expected " + std::to_string(need) + " bytes at byte " +
                          std::to_string(pos) + ", found " + std::to_string(bytes.size() - std::min(bytes.size(), pos)));
  std::vector<double> px(need);
  const double scale = 255.0 / maxval;
  for (std::size_t i = 0; i < need; ++i) px[i] = static_cast<unsigned char>(bytes[pos + i]) * scale;
  return GrayImage(w, h, std::move(px));
}

inline std::string encode_pgm(const GrayImage& img) {
  std::string out = "P5\n" + std::to_string(img.width) + " " + std::to_string(img.height) + "\n255\n";
  for (double v : img.pixels) out.push_back(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 255.0)))));
  return out;
}

inline GrayImage read_pgm(const std::filesystem::path& path) { return decode_pgm(read_file(path), path.string()); }

// ---------------------------------------------------------------------------
// CSV

/// Shortest round-tripping decimal for doubles.
inline std::string fmt_double(double v) {
  char buf[32];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

class CsvWriter {
public:
  explicit CsvWriter(std::vector<std::string> header) { row(header); }

  template <class... Cells>
  CsvWriter& add(const Cells&... cells) {
    std::vector<std::string> r;
    (r.push_back(cell(cells)), ...);
    return row(r);
  }

  CsvWriter& row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) text_ += ',';
      text_ += cells[i];
    }
    text_ += '\n';
    return *this;
  }

  const std::string& str() const { return text_; }
  void save(const std::filesystem::path& path) const { write_atomic(path, text_); }

private:
  static std::string cell(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char ch : s) {
      if (ch == '"') q += '"';
      q += ch;
    }
    return q + "\"";
  }
  static std::string cell(const char* s) { return cell(std::string(s)); }
  static std::string cell(double v) { return fmt_double(v); }
  template <class I>
    requires std::is_integral_v<I>
  static std::string cell(I v) {
    return std::to_string(v);
  }

  std::string text_;
};

}  // namespace ticl
