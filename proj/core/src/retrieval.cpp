#include "intertext/retrieval.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <unordered_set>

#include "intertext/error.hpp"
#include "intertext/parallel.hpp"

namespace intertext {

std::string_view embed_prefix(EmbedRole role) { return role == EmbedRole::query ? "Query: " : "Candidate: "; }

std::vector<Vector> embed_segments(const EmbeddingProvider& provider, std::span<const Segment> segments,
                                   EmbedRole role, const EmbedOptions& options) {
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = (segments.size() + batch - 1) / batch;
  std::vector<std::vector<Vector>> results(batches);

  parallel_for(batches, options.jobs, [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(segments.size(), begin + batch);
    std::vector<EmbedItem> items;
    items.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) {
      items.push_back({segments[i].id, std::string(embed_prefix(role)) + segments[i].text, role});
    }
    auto vectors = provider.embed(items);
    if (vectors.size() != items.size()) {
      throw Error(ErrorCode::provider_contract,
                  "provider '" + provider.name() + "' returned " + std::to_string(vectors.size()) +
                      " vectors for " + std::to_string(items.size()) + " texts");
    }
    results[b] = std::move(vectors);
  });

  std::vector<Vector> out;
  out.reserve(segments.size());
  std::size_t expected = provider.dim();
  for (auto& r : results) {
    for (auto& v : r) {
      if (expected == 0) expected = v.size();
      if (v.size() != expected || v.empty()) {
        throw Error(ErrorCode::configuration, "provider '" + provider.name() + "' dimension mismatch: expected " +
                                                  std::to_string(expected) + ", got " + std::to_string(v.size()));
      }
      out.push_back(std::move(v));
    }
  }
  return out;
}

VectorIndex build_index(std::span<const std::string> ids, std::span<const Vector> vectors) {
  if (ids.size() != vectors.size()) {
    throw Error(ErrorCode::validation, "build_index: " + std::to_string(ids.size()) + " ids but " +
                                           std::to_string(vectors.size()) + " vectors");
  }
  VectorIndex index;
  if (ids.empty()) return index;
  index.dim_ = vectors.front().size();
  if (index.dim_ == 0) throw Error(ErrorCode::configuration, "build_index: zero-dimensional vectors");
  index.ids_.reserve(ids.size());
  index.data_.reserve(ids.size() * index.dim_);
  std::unordered_set<std::string_view> seen;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const auto& v = vectors[i];
    if (v.size() != index.dim_) {
      throw Error(ErrorCode::configuration, "build_index: segment '" + ids[i] + "' has dimension " +
                                                std::to_string(v.size()) + ", expected " +
                                                std::to_string(index.dim_));
    }
    if (!seen.insert(ids[i]).second) {
      throw Error(ErrorCode::validation, "build_index: duplicate segment id '" + ids[i] + "'");
    }
    double sq = 0.0;
    for (float x : v) sq += static_cast<double>(x) * x;
    const double norm = std::sqrt(sq);
    if (!(norm > 0.0) || !std::isfinite(norm)) {
      throw Error(ErrorCode::validation, "build_index: segment '" + ids[i] + "' has a zero-norm vector");
    }
    for (float x : v) index.data_.push_back(static_cast<float>(x / norm));
    index.ids_.push_back(ids[i]);
  }
  return index;
}

double cosine(std::span<const float> a, std::span<const float> b) {
  if (a.size() != b.size()) throw Error(ErrorCode::configuration, "cosine: dimension mismatch");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += static_cast<double>(a[i]) * b[i];
    na += static_cast<double>(a[i]) * a[i];
    nb += static_cast<double>(b[i]) * b[i];
  }
  if (na == 0.0 || nb == 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

std::vector<RankedCandidate> topk(const VectorIndex& index, std::span<const float> query, std::size_t k) {
  if (k == 0) throw Error(ErrorCode::configuration, "topk: k must be >= 1", {{"k", "must be >= 1"}});
  if (index.empty()) return {};
  if (query.size() != index.dim()) {
    throw Error(ErrorCode::configuration, "topk: query dimension " + std::to_string(query.size()) +
                                              " does not match index dimension " + std::to_string(index.dim()));
  }
  double qsq = 0.0;
  for (float x : query) qsq += static_cast<double>(x) * x;
  if (!(qsq > 0.0)) throw Error(ErrorCode::validation, "topk: zero-norm query vector");
  const double qnorm = std::sqrt(qsq);

  struct Scored {
    double sim;
    std::size_t idx;
  };
  std::vector<Scored> scored(index.size());
  const std::size_t dim = index.dim();
  for (std::size_t i = 0; i < index.size(); ++i) {
    const auto v = index.vector(i);
    double dot = 0.0;
    for (std::size_t d = 0; d < dim; ++d) dot += static_cast<double>(v[d]) * query[d];
    scored[i] = {std::clamp(dot / qnorm, -1.0, 1.0), i};
  }
  const std::size_t take = std::min(k, scored.size());
  auto better = [](const Scored& a, const Scored& b) { return a.sim != b.sim ? a.sim > b.sim : a.idx < b.idx; };
  std::partial_sort(scored.begin(), scored.begin() + static_cast<std::ptrdiff_t>(take), scored.end(), better);

  std::vector<RankedCandidate> out;
  out.reserve(take);
  for (std::size_t r = 0; r < take; ++r) {
    out.push_back({index.id(scored[r].idx), scored[r].idx, scored[r].sim, r + 1});
  }
  return out;
}

namespace {

constexpr char kBinaryMagic[8] = {'I', 'T', 'X', 'V', 'E', 'C', '0', '1'};

template <typename T>
void put_le(std::ostream& out, T value) {
  static_assert(std::endian::native == std::endian::little, "binary vector files assume a little-endian host");
  out.write(reinterpret_cast<const char*>(&value), sizeof value);
}

template <typename T>
T get_le(std::istream& in, const std::filesystem::path& path) {
  T value{};
  in.read(reinterpret_cast<char*>(&value), sizeof value);
  if (!in) throw Error(ErrorCode::schema, "truncated vector file '" + path.string() + "'");
  return value;
}

}  // namespace

StoredVectors load_vectors(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  char magic[8] = {};
  in.read(magic, sizeof magic);
  StoredVectors stored;
  if (in && std::memcmp(magic, kBinaryMagic, sizeof magic) == 0) {
    const auto dim = get_le<std::uint32_t>(in, path);
    const auto count = get_le<std::uint64_t>(in, path);
    stored.ids.reserve(count);
    stored.vectors.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
      const auto len = get_le<std::uint32_t>(in, path);
      std::string id(len, '\0');
      in.read(id.data(), len);
      Vector v(dim);
      in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(dim * sizeof(float)));
      if (!in) throw Error(ErrorCode::schema, "truncated vector file '" + path.string() + "'");
      stored.ids.push_back(std::move(id));
      stored.vectors.push_back(std::move(v));
    }
    return stored;
  }

  const auto content = read_file(path);
  std::size_t pos = 0, line_no = 0;
  while (pos < content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string::npos) end = content.size();
    const auto line = std::string_view(content).substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
    nlohmann::json record;
    try {
      record = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error&) {
      throw Error(ErrorCode::schema, path.string() + ":" + std::to_string(line_no) + ": invalid JSON");
    }
    if (!record.contains("id") || !record.contains("vector") || !record["vector"].is_array()) {
      throw Error(ErrorCode::schema, path.string() + ":" + std::to_string(line_no) + ": expected {id, vector}");
    }
    stored.ids.push_back(record["id"].is_string() ? record["id"].get<std::string>() : record["id"].dump());
    stored.vectors.push_back(record["vector"].get<Vector>());
  }
  return stored;
}

void write_vectors_jsonl(const std::filesystem::path& path, const StoredVectors& stored) {
  std::string out;
  for (std::size_t i = 0; i < stored.ids.size(); ++i) {
    out += nlohmann::json{{"id", stored.ids[i]}, {"vector", stored.vectors[i]}}.dump();
    out.push_back('\n');
  }
  write_file(path, out);
}

void write_vectors_binary(const std::filesystem::path& path, const StoredVectors& stored) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  const std::uint32_t dim = stored.vectors.empty() ? 0 : static_cast<std::uint32_t>(stored.vectors.front().size());
  out.write(kBinaryMagic, sizeof kBinaryMagic);
  put_le<std::uint32_t>(out, dim);
  put_le<std::uint64_t>(out, stored.ids.size());
  for (std::size_t i = 0; i < stored.ids.size(); ++i) {
    if (stored.vectors[i].size() != dim) throw Error(ErrorCode::configuration, "non-uniform vector dimension");
    put_le<std::uint32_t>(out, static_cast<std::uint32_t>(stored.ids[i].size()));
    out.write(stored.ids[i].data(), static_cast<std::streamsize>(stored.ids[i].size()));
    out.write(reinterpret_cast<const char*>(stored.vectors[i].data()),
              static_cast<std::streamsize>(dim * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
}

}  // namespace intertext
