#include "intertext/providers.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <nlohmann/json.hpp>
#include <thread>

#include "intertext/error.hpp"
#include "intertext/rng.hpp"
#include "intertext/text.hpp"

namespace intertext {

using nlohmann::json;

HashEmbeddingProvider::HashEmbeddingProvider(std::size_t dim, std::uint64_t seed) : dim_(dim), seed_(seed) {
  if (dim == 0) throw Error(ErrorCode::configuration, "hash embedder dimension must be positive");
}

std::string HashEmbeddingProvider::name() const {
  return "hash:" + std::to_string(dim_) + ":" + std::to_string(seed_);
}

Vector HashEmbeddingProvider::embed_text(std::string_view text) const {
  std::vector<double> acc(dim_, 0.0);
  for (const auto& token : tokenize(text)) {
    std::uint64_t state = fnv1a64(token) ^ seed_;
    for (std::size_t d = 0; d < dim_; ++d) {
      const std::uint64_t x = splitmix64(state);
      acc[d] += 2.0 * (static_cast<double>(x >> 11) * 0x1.0p-53) - 1.0;
    }
  }
  double sq = 0.0;
  for (double v : acc) sq += v * v;
  Vector out(dim_, 0.0f);
  if (sq > 0.0) {
    const double norm = std::sqrt(sq);
    for (std::size_t d = 0; d < dim_; ++d) out[d] = static_cast<float>(acc[d] / norm);
  }
  return out;
}

std::vector<Vector> HashEmbeddingProvider::embed(std::span<const EmbedItem> items) const {
  std::vector<Vector> out;
  out.reserve(items.size());
  for (const auto& item : items) out.push_back(embed_text(item.text));
  return out;
}

FileEmbeddingProvider::Table FileEmbeddingProvider::load_table(const std::filesystem::path& path,
                                                               std::size_t& dim) {
  auto stored = load_vectors(path);
  Table table;
  table.reserve(stored.ids.size());
  for (std::size_t i = 0; i < stored.ids.size(); ++i) {
    if (dim == 0) dim = stored.vectors[i].size();
    if (stored.vectors[i].size() != dim) {
      throw Error(ErrorCode::configuration, "vector file '" + path.string() + "': entry '" + stored.ids[i] +
                                                "' has dimension " + std::to_string(stored.vectors[i].size()) +
                                                ", expected " + std::to_string(dim));
    }
    if (!table.emplace(stored.ids[i], std::move(stored.vectors[i])).second) {
      throw Error(ErrorCode::validation, "vector file '" + path.string() + "': duplicate id '" + stored.ids[i] + "'");
    }
  }
  return table;
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& path)
    : name_("file:" + path.string()) {
  query_ = load_table(path, dim_);
  candidate_ = query_;
}

FileEmbeddingProvider::FileEmbeddingProvider(const std::filesystem::path& query_path,
                                             const std::filesystem::path& candidate_path)
    : name_("file:" + query_path.string() + "," + candidate_path.string()) {
  query_ = load_table(query_path, dim_);
  candidate_ = load_table(candidate_path, dim_);
}

std::vector<Vector> FileEmbeddingProvider::embed(std::span<const EmbedItem> items) const {
  std::vector<Vector> out;
  out.reserve(items.size());
  std::vector<std::string> missing;
  for (const auto& item : items) {
    const auto& table = item.role == EmbedRole::query ? query_ : candidate_;
    const auto it = table.find(item.segment_id);
    if (it == table.end()) {
      missing.push_back(item.segment_id);
      continue;
    }
    out.push_back(it->second);
  }
  if (!missing.empty()) {
    const std::string message =
        name_ + ": no precomputed vector for segment '" + missing.front() + "'" +
        (missing.size() > 1 ? " and " + std::to_string(missing.size() - 1) + " more" : "");
    throw TransportError(message, std::move(missing), false);
  }
  return out;
}

namespace {

struct ParsedUrl {
  std::string base;  // scheme://host[:port]
  std::string path;
};

ParsedUrl parse_url(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw Error(ErrorCode::configuration, "invalid provider URL '" + url + "'");
  const auto path_start = url.find('/', scheme_end + 3);
  if (path_start == std::string::npos) return {url, "/"};
  return {url.substr(0, path_start), url.substr(path_start)};
}

// POSTs a JSON body with retries on transport failures and 5xx responses.
json post_json(const std::string& url, const json& body, const HttpOptions& options,
               const std::vector<std::string>& segment_ids) {
  const auto parsed = parse_url(url);
  const auto payload = body.dump();
  std::string last_error;
  for (unsigned attempt = 0; attempt <= options.retries; ++attempt) {
    if (attempt) std::this_thread::sleep_for(std::chrono::milliseconds(100 * (1u << (attempt - 1))));
    httplib::Client client(parsed.base);
    client.set_connection_timeout(options.timeout);
    client.set_read_timeout(options.timeout);
    client.set_write_timeout(options.timeout);
    auto res = client.Post(parsed.path, payload, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      spdlog::debug("POST {} failed (attempt {}): {}", url, attempt + 1, last_error);
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) {
      throw Error(ErrorCode::provider_contract, "provider at " + url + " answered HTTP " + std::to_string(res->status));
    }
    try {
      return json::parse(res->body);
    } catch (const json::parse_error&) {
      throw Error(ErrorCode::provider_contract, "provider at " + url + " returned invalid JSON");
    }
  }
  throw TransportError("provider at " + url + " unavailable: " + last_error, segment_ids, true);
}

}  // namespace

HttpEmbeddingProvider::HttpEmbeddingProvider(std::string url, std::size_t expected_dim, HttpOptions options)
    : url_(std::move(url)), dim_(expected_dim), options_(options) {
  parse_url(url_);
}

std::vector<Vector> HttpEmbeddingProvider::embed(std::span<const EmbedItem> items) const {
  if (items.empty()) return {};
  json body;
  body["texts"] = json::array();
  std::vector<std::string> ids;
  for (const auto& item : items) {
    body["texts"].push_back(item.text);
    ids.push_back(item.segment_id);
  }
  const auto response = post_json(url_, body, options_, ids);
  if (!response.contains("vectors") || !response["vectors"].is_array()) {
    throw Error(ErrorCode::provider_contract, "embedding response from " + url_ + " lacks 'vectors'");
  }
  std::vector<Vector> out;
  try {
    out = response["vectors"].get<std::vector<Vector>>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::provider_contract, "embedding response from " + url_ + " is not a list of vectors");
  }
  for (const auto& v : out) {
    std::size_t expected = 0;
    if (dim_.compare_exchange_strong(expected, v.size())) continue;
    if (v.size() != expected) {
      throw Error(ErrorCode::configuration, "embedding dimension changed from " + std::to_string(expected) + " to " +
                                                std::to_string(v.size()) + " at " + url_);
    }
  }
  return out;
}

std::vector<double> JaccardPairClassifier::classify(std::span<const TextPair> pairs) const {
  std::vector<double> out;
  out.reserve(pairs.size());
  for (const auto& [q, c] : pairs) out.push_back(score(q, c));
  return out;
}

double JaccardPairClassifier::score(std::string_view a, std::string_view b) {
  auto ta = intertext::tokenize(a);
  auto tb = intertext::tokenize(b);
  std::sort(ta.begin(), ta.end());
  ta.erase(std::unique(ta.begin(), ta.end()), ta.end());
  std::sort(tb.begin(), tb.end());
  tb.erase(std::unique(tb.begin(), tb.end()), tb.end());
  if (ta.empty() && tb.empty()) return 1.0;
  std::vector<std::string> inter;
  std::set_intersection(ta.begin(), ta.end(), tb.begin(), tb.end(), std::back_inserter(inter));
  const auto uni = ta.size() + tb.size() - inter.size();
  return static_cast<double>(inter.size()) / static_cast<double>(uni);
}

HttpPairClassifier::HttpPairClassifier(std::string url, std::size_t max_tokens, HttpOptions options)
    : url_(std::move(url)), max_tokens_(max_tokens), options_(options) {
  parse_url(url_);
}

std::vector<double> HttpPairClassifier::classify(std::span<const TextPair> pairs) const {
  if (pairs.empty()) return {};
  json body;
  body["pairs"] = json::array();
  for (const auto& [q, c] : pairs) body["pairs"].push_back(json::array({q, c}));
  const auto response = post_json(url_, body, options_, {});
  if (!response.contains("probs") || !response["probs"].is_array()) {
    throw Error(ErrorCode::provider_contract, "classifier response from " + url_ + " lacks 'probs'");
  }
  try {
    return response["probs"].get<std::vector<double>>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::provider_contract, "classifier response from " + url_ + " is not a list of numbers");
  }
}

namespace {

std::vector<std::string> split_on(std::string_view text, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (true) {
    const auto end = text.find(sep, pos);
    out.emplace_back(text.substr(pos, end == std::string_view::npos ? std::string_view::npos : end - pos));
    if (end == std::string_view::npos) break;
    pos = end + 1;
  }
  return out;
}

std::uint64_t parse_uint(const std::string& text, std::string_view what) {
  try {
    std::size_t used = 0;
    const auto value = std::stoull(text, &used);
    if (used == text.size()) return value;
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::configuration, "invalid " + std::string(what) + " '" + text + "'");
}

}  // namespace

std::unique_ptr<EmbeddingProvider> make_embedder(std::string_view spec) {
  if (spec == "hash" || spec.starts_with("hash:")) {
    std::size_t dim = 64;
    std::uint64_t seed = 0;
    if (spec.size() > 5) {
      const auto parts = split_on(spec.substr(5), ':');
      dim = parse_uint(parts[0], "hash embedder dimension");
      if (parts.size() > 1) seed = parse_uint(parts[1], "hash embedder seed");
      if (parts.size() > 2) throw Error(ErrorCode::configuration, "invalid embedder spec '" + std::string(spec) + "'");
    }
    return std::make_unique<HashEmbeddingProvider>(dim, seed);
  }
  if (spec.starts_with("file:")) {
    const auto paths = split_on(spec.substr(5), ',');
    if (paths.size() == 1) return std::make_unique<FileEmbeddingProvider>(paths[0]);
    if (paths.size() == 2) return std::make_unique<FileEmbeddingProvider>(paths[0], paths[1]);
  }
  if (spec.starts_with("http://")) return std::make_unique<HttpEmbeddingProvider>(std::string(spec));
  throw Error(ErrorCode::configuration, "unknown embedder '" + std::string(spec) + "'",
              {{"embedder", "expected hash[:DIM[:SEED]], file:PATH or http://..."}});
}

std::unique_ptr<PairClassifierProvider> make_classifier(std::string_view spec, std::size_t max_tokens) {
  if (spec == "jaccard") return std::make_unique<JaccardPairClassifier>(max_tokens);
  if (spec.starts_with("http://")) return std::make_unique<HttpPairClassifier>(std::string(spec), max_tokens);
  throw Error(ErrorCode::configuration, "unknown classifier '" + std::string(spec) + "'",
              {{"classifier", "expected jaccard or http://..."}});
}

}  // namespace intertext
