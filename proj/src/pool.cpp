#include "lmdpp/pool.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <limits>
#include <unordered_set>

#include <json.hpp>

#include "lmdpp/simd.hpp"

namespace lmdpp {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

bool CandidatePool::all_embeddings() const {
  for (std::size_t i = 0; i < has_embedding_.size(); ++i) {
    if (!has_embedding_[i]) return false;
  }
  return dim > 0 || items.empty();
}

std::size_t CandidatePool::index_of(const std::string& id) const {
  auto it = id_index_.find(id);
  if (it == id_index_.end()) throw Error(ErrorCode::UnknownId, id);
  return it->second;
}

void CandidatePool::add(CandidateItem item, std::span<const double> embedding) {
  if (id_index_.count(item.id)) throw Error(ErrorCode::DuplicateId, item.id);
  if (!embedding.empty()) {
    for (double v : embedding) {
      if (!std::isfinite(v)) throw Error(ErrorCode::NonFiniteEmbedding, item.id);
    }
    if (dim == 0) {
      dim = embedding.size();
      // items added before the dimensionality was known get zero rows
      embeddings_.assign(items.size() * dim, 0.0);
    } else if (embedding.size() != dim) {
      throw Error(ErrorCode::DimMismatch,
                  "expected " + std::to_string(dim) + ", got " +
                      std::to_string(embedding.size()) + " for id " + item.id);
    }
    embeddings_.insert(embeddings_.end(), embedding.begin(), embedding.end());
    has_embedding_.push_back(1);
  } else {
    embeddings_.insert(embeddings_.end(), dim, 0.0);
    has_embedding_.push_back(0);
  }
  id_index_.emplace(item.id, items.size());
  items.push_back(std::move(item));
}

std::string sidecar_path(const std::string& pool_path) {
  return pool_path + ".dppe";
}

namespace {

void require_field(const json& j, const char* key, std::size_t line) {
  if (!j.contains(key) || !j[key].is_string()) {
    throw Error(ErrorCode::ParseError,
                "line " + std::to_string(line) + ": missing string field '" +
                    key + "'");
  }
}

std::vector<double> number_array(const json& j, const char* key,
                                 std::size_t line) {
  const json& a = j[key];
  if (!a.is_array()) {
    throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": '" +
                                           key + "' must be an array");
  }
  std::vector<double> out;
  out.reserve(a.size());
  for (const json& v : a) {
    if (!v.is_number()) {
      throw Error(ErrorCode::ParseError, "line " + std::to_string(line) +
                                             ": '" + key +
                                             "' must hold numbers");
    }
    out.push_back(v.get<double>());
  }
  return out;
}

void validate_logprobs(const std::vector<double>& lp, const std::string& id) {
  for (std::size_t i = 0; i < lp.size(); ++i) {
    if (!std::isfinite(lp[i]) || lp[i] > 0.0) {
      throw Error(ErrorCode::InvalidLogProb,
                  "id " + id + ", index " + std::to_string(i));
    }
  }
}

std::uint32_t read_u32_le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<std::uint32_t>(b[0]) |
         (static_cast<std::uint32_t>(b[1]) << 8) |
         (static_cast<std::uint32_t>(b[2]) << 16) |
         (static_cast<std::uint32_t>(b[3]) << 24);
}

void write_u32_le(std::ostream& out, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v & 0xff),
                              static_cast<unsigned char>((v >> 8) & 0xff),
                              static_cast<unsigned char>((v >> 16) & 0xff),
                              static_cast<unsigned char>((v >> 24) & 0xff)};
  out.write(reinterpret_cast<const char*>(b), 4);
}

float read_f32_le(const unsigned char* b) {
  const std::uint32_t u = static_cast<std::uint32_t>(b[0]) |
                          (static_cast<std::uint32_t>(b[1]) << 8) |
                          (static_cast<std::uint32_t>(b[2]) << 16) |
                          (static_cast<std::uint32_t>(b[3]) << 24);
  float f;
  static_assert(sizeof(f) == 4);
  std::memcpy(&f, &u, 4);
  return f;
}

void write_f32_le(std::ostream& out, float f) {
  std::uint32_t u;
  std::memcpy(&u, &f, 4);
  write_u32_le(out, u);
}

struct RawRecord {
  CandidateItem item;
  std::vector<double> embedding;
  bool had_embedding = false;
};

std::vector<RawRecord> parse_records(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  std::vector<RawRecord> records;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": " + e.what());
    }
    if (!j.is_object()) {
      throw Error(ErrorCode::ParseError,
                  "line " + std::to_string(lineno) + ": record must be an object");
    }
    require_field(j, "id", lineno);
    require_field(j, "text", lineno);
    RawRecord rec;
    rec.item.id = j["id"].get<std::string>();
    rec.item.text = j["text"].get<std::string>();
    if (j.contains("label") && !j["label"].is_null()) {
      if (!j["label"].is_string()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(lineno) + ": 'label' must be a string");
      }
      rec.item.label = j["label"].get<std::string>();
    }
    if (j.contains("embedding") && !j["embedding"].is_null()) {
      rec.embedding = number_array(j, "embedding", lineno);
      rec.had_embedding = !rec.embedding.empty();
    }
    if (j.contains("token_logprobs") && !j["token_logprobs"].is_null()) {
      auto lp = number_array(j, "token_logprobs", lineno);
      validate_logprobs(lp, rec.item.id);
      rec.item.token_logprobs = std::move(lp);
    }
    if (j.contains("score_r") && !j["score_r"].is_null()) {
      if (!j["score_r"].is_number()) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(lineno) + ": 'score_r' must be a number");
      }
      const double r = j["score_r"].get<double>();
      if (!std::isfinite(r) || r <= 0.0) {
        throw Error(ErrorCode::ParseError,
                    "line " + std::to_string(lineno) + ": 'score_r' must be finite and > 0");
      }
      rec.item.score_r = r;
    }
    records.push_back(std::move(rec));
  }
  if (records.empty()) throw Error(ErrorCode::EmptyPool, path);
  return records;
}

}  // namespace

CandidatePool load_pool(const std::string& path, PoolFormat format) {
  auto records = parse_records(path);
  CandidatePool pool;
  if (format == PoolFormat::jsonl) {
    for (auto& rec : records) {
      pool.add(std::move(rec.item), rec.embedding);
    }
    return pool;
  }
  // binary sidecar
  for (const auto& rec : records) {
    if (rec.had_embedding) {
      throw Error(ErrorCode::ParseError,
                  "inline embedding for id " + rec.item.id +
                      " conflicts with binary sidecar format");
    }
  }
  const std::string side = sidecar_path(path);
  std::ifstream bin(side, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoError, "cannot open " + side);
  char magic[4];
  bin.read(magic, 4);
  if (!bin || std::string_view(magic, 4) != "DPPE") {
    throw Error(ErrorCode::ParseError, side + ": bad magic");
  }
  const std::uint32_t n = read_u32_le(bin);
  const std::uint32_t d = read_u32_le(bin);
  if (!bin || n != records.size()) {
    throw Error(ErrorCode::ParseError,
                side + ": row count " + std::to_string(n) + " != " +
                    std::to_string(records.size()) + " records");
  }
  if (d == 0) throw Error(ErrorCode::ParseError, side + ": zero dimension");
  std::vector<unsigned char> buf(static_cast<std::size_t>(d) * 4);
  std::vector<double> row(d);
  for (std::size_t i = 0; i < records.size(); ++i) {
    bin.read(reinterpret_cast<char*>(buf.data()), buf.size());
    if (!bin) throw Error(ErrorCode::IoError, side + ": truncated");
    for (std::uint32_t k = 0; k < d; ++k) {
      row[k] = static_cast<double>(read_f32_le(buf.data() + k * 4));
    }
    pool.add(std::move(records[i].item), row);
  }
  return pool;
}

CandidatePool load_pool(const std::string& path) {
  const bool has_sidecar = std::filesystem::exists(sidecar_path(path));
  return load_pool(path, has_sidecar ? PoolFormat::binary_sidecar
                                     : PoolFormat::jsonl);
}

void save_pool(const CandidatePool& pool, const std::string& path,
               PoolFormat format) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  for (std::size_t i = 0; i < pool.size(); ++i) {
    const CandidateItem& item = pool.items[i];
    ojson j;
    j["id"] = item.id;
    j["text"] = item.text;
    if (item.label) j["label"] = *item.label;
    if (format == PoolFormat::jsonl && pool.has_embedding(i)) {
      auto row = pool.embedding(i);
      j["embedding"] = std::vector<double>(row.begin(), row.end());
    }
    if (item.token_logprobs) j["token_logprobs"] = *item.token_logprobs;
    if (item.score_r) j["score_r"] = *item.score_r;
    out << j.dump() << '\n';
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
  out.close();
  if (format == PoolFormat::jsonl) return;

  if (!pool.all_embeddings()) {
    throw Error(ErrorCode::MissingEmbedding,
                "binary sidecar requires an embedding on every item");
  }
  const std::string side = sidecar_path(path);
  std::ofstream bin(side, std::ios::binary);
  if (!bin) throw Error(ErrorCode::IoError, "cannot write " + side);
  bin.write("DPPE", 4);
  write_u32_le(bin, static_cast<std::uint32_t>(pool.size()));
  write_u32_le(bin, static_cast<std::uint32_t>(pool.dim));
  for (std::size_t i = 0; i < pool.size(); ++i) {
    for (double v : pool.embedding(i)) {
      write_f32_le(bin, static_cast<float>(v));
    }
  }
  if (!bin) throw Error(ErrorCode::IoError, "write failed for " + side);
}

CandidatePool normalize_pool(CandidatePool pool) {
  if (pool.items.empty()) throw Error(ErrorCode::EmptyPool, "normalize_pool");
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (!pool.has_embedding(i)) {
      throw Error(ErrorCode::MissingEmbedding, pool.items[i].id);
    }
  }
  const auto& k = simd::active();
  for (std::size_t i = 0; i < pool.size(); ++i) {
    auto row = pool.embedding_mut(i);
    const double norm = std::sqrt(k.dot(row.data(), row.data(), row.size()));
    if (norm == 0.0) throw Error(ErrorCode::ZeroEmbedding, pool.items[i].id);
    k.scale(row.data(), 1.0 / norm, row.size());
  }
  pool.normalized = true;
  return pool;
}

std::vector<double> toy_embed(const std::string& text, std::size_t dim) {
  if (dim < 2) throw Error(ErrorCode::InvalidArgument, "toy_embed dim must be >= 2");
  if (text.empty()) throw Error(ErrorCode::EmptyText, "toy_embed");
  std::string padded;
  padded.reserve(text.size() + 2);
  padded.push_back('\x02');
  padded += text;
  padded.push_back('\x03');
  std::vector<double> v(dim, 0.0);
  for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
    std::uint64_t h = 14695981039346656037ull;  // FNV-1a
    for (std::size_t k = 0; k < 3; ++k) {
      h ^= static_cast<unsigned char>(padded[i + k]);
      h *= 1099511628211ull;
    }
    v[h % dim] += 1.0;
  }
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double inv = 1.0 / std::sqrt(sq);
  for (double& x : v) x *= inv;
  return v;
}

const char* method_name(Method m) {
  switch (m) {
    case Method::lm_dpp: return "lm_dpp";
    case Method::vanilla_dpp: return "vanilla_dpp";
    case Method::perplexity_topk: return "perplexity_topk";
    case Method::random: return "random";
    case Method::kmeans: return "kmeans";
  }
  return "lm_dpp";
}

Method method_from_name(const std::string& name) {
  if (name == "lm_dpp") return Method::lm_dpp;
  if (name == "vanilla_dpp") return Method::vanilla_dpp;
  if (name == "perplexity_topk" || name == "perplexity") return Method::perplexity_topk;
  if (name == "random") return Method::random;
  if (name == "kmeans") return Method::kmeans;
  throw Error(ErrorCode::InvalidArgument, "unknown method '" + name + "'");
}

std::string manifest_timestamp() {
  std::time_t t;
  if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env && *env) {
    char* end = nullptr;
    const long long v = std::strtoll(env, &end, 10);
    t = (end && *end == '\0' && v >= 0) ? static_cast<std::time_t>(v)
                                        : std::time(nullptr);
  } else {
    t = std::time(nullptr);
  }
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

namespace {

void validate_manifest(const SelectionManifest& m) {
  if (m.budget < 1) throw Error(ErrorCode::InvalidManifest, "budget must be >= 1");
  if (!(m.lambda >= 0.0 && m.lambda <= 1.0)) {
    throw Error(ErrorCode::InvalidManifest, "lambda out of [0,1]");
  }
  if (m.selected_ids.empty()) {
    throw Error(ErrorCode::InvalidManifest, "no selected ids");
  }
  if (m.selected_ids.size() > m.budget) {
    throw Error(ErrorCode::InvalidManifest, "more ids than budget");
  }
  if (m.gains.size() != m.selected_ids.size()) {
    throw Error(ErrorCode::InvalidManifest, "gains/ids length mismatch");
  }
  if (m.fallback_count > m.selected_ids.size()) {
    throw Error(ErrorCode::InvalidManifest, "fallback_count exceeds selection");
  }
  std::unordered_set<std::string> seen;
  for (const auto& id : m.selected_ids) {
    if (!seen.insert(id).second) {
      throw Error(ErrorCode::InvalidManifest, "duplicate selected id " + id);
    }
  }
}

}  // namespace

void save_manifest(const SelectionManifest& manifest, const std::string& path) {
  validate_manifest(manifest);
  ojson j;
  j["method"] = method_name(manifest.method);
  j["budget"] = manifest.budget;
  j["lambda"] = manifest.lambda;
  j["seed"] = manifest.seed;
  j["selected_ids"] = manifest.selected_ids;
  ojson gains = ojson::array();
  for (double g : manifest.gains) {
    if (std::isfinite(g)) {
      gains.push_back(g);
    } else {
      gains.push_back(nullptr);  // -inf fallback marker; JSON has no infinities
    }
  }
  j["gains"] = std::move(gains);
  j["fallback_count"] = manifest.fallback_count;
  j["created_at"] = manifest.created_at;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << j.dump(2) << '\n';
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

SelectionManifest load_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorCode::ParseError, path + ": " + e.what());
  }
  SelectionManifest m;
  try {
    m.method = method_from_name(j.at("method").get<std::string>());
    m.budget = j.at("budget").get<std::size_t>();
    m.lambda = j.at("lambda").get<double>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.selected_ids = j.at("selected_ids").get<std::vector<std::string>>();
    for (const json& g : j.at("gains")) {
      m.gains.push_back(g.is_null() ? -std::numeric_limits<double>::infinity()
                                    : g.get<double>());
    }
    m.fallback_count = j.value("fallback_count", std::size_t{0});
    m.created_at = j.value("created_at", std::string{});
  } catch (const Error& e) {
    if (e.code() == ErrorCode::InvalidArgument) {
      throw Error(ErrorCode::InvalidManifest, path + ": unknown method");
    }
    throw;
  } catch (const std::exception& e) {
    throw Error(ErrorCode::InvalidManifest, path + ": " + e.what());
  }
  validate_manifest(m);
  return m;
}

}  // namespace lmdpp
