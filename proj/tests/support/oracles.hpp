#pragma once

// Independent reference implementations used to check the library. They
// favour obviousness over speed and share no code with core/src.

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <intertext/corpus.hpp>
#include <intertext/matcher.hpp>
#include <intertext/metrics.hpp>
#include <intertext/retrieval.hpp>

namespace oracle {

// All query windows x all source windows, std::set intersections, then the
// documented tie-breaks by exhaustive enumeration of occurrence choices.
std::vector<intertext::RawCandidate> raw_candidates(const intertext::Document& query,
                                                    const intertext::Document& source,
                                                    const intertext::MatchParams& params);

// Confusion counts by walking the whole |query| x |source| grid.
intertext::ConfusionCounts grid_confusion(const std::vector<std::pair<std::string, std::string>>& predicted,
                                          const std::vector<std::pair<std::string, std::string>>& gold,
                                          const intertext::Document& query, const intertext::Document& source);

// Cosine in double for every indexed vector, sorted by (-similarity, index).
std::vector<std::size_t> cosine_ranking(const std::vector<intertext::Vector>& corpus,
                                        const intertext::Vector& query);

struct IrValues {
  std::map<std::size_t, double> recall, mrr, ndcg;
  double map = 0.0;
};

// Computes each metric from the 1-based ranks at which gold items appear
// (absent gold has no rank), per query, then averages over gold-bearing
// queries.
IrValues ir_from_gold_ranks(const std::vector<std::vector<std::string>>& ranked_ids,
                            const std::vector<std::vector<std::string>>& gold_ids, std::span<const std::size_t> ks);

}  // namespace oracle

namespace testing_support {

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

intertext::Document make_doc(const std::vector<std::pair<std::string, std::string>>& id_text,
                             intertext::Role role = intertext::Role::query, std::string doc_id = "doc");

}  // namespace testing_support
