#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "intertext/corpus.hpp"

namespace intertext {

using TextPair = std::pair<std::string, std::string>;  // (query text, candidate text)

// Scores (query, candidate) text pairs with a link probability. The provider
// owns any model-specific separator tokens. Implementations must be
// deterministic, return one probability per pair, and be thread-safe.
class PairClassifierProvider {
 public:
  virtual ~PairClassifierProvider() = default;
  virtual std::string name() const = 0;
  virtual std::size_t max_tokens() const = 0;
  virtual std::vector<double> classify(std::span<const TextPair> pairs) const = 0;
  // Model tokenization used for the input budget; nullopt means the
  // provider cannot report it and whitespace tokens are used instead.
  virtual std::optional<std::vector<std::string>> tokenize(std::string_view) const { return std::nullopt; }
};

struct PairInput {
  std::vector<std::string> query_part;
  std::vector<std::string> candidate_part;

  std::string query_text() const;
  std::string candidate_text() const;
};

// Truncates the query to floor(budget/2) tokens and the candidate to
// budget - floor(budget/2). Tokens come from the provider when it reports
// them, otherwise from whitespace splitting of the raw text.
// Throws configuration when budget < 2.
PairInput build_pair_input(const Segment& query, const Segment& candidate, std::size_t budget,
                           const PairClassifierProvider* tokenizer = nullptr);

struct ClassifyOptions {
  std::size_t batch_size = 64;
  unsigned jobs = 1;
};

// Order-aligned probabilities. A provider returning the wrong count or a
// value outside [0, 1] is a provider_contract error; transport errors
// propagate.
std::vector<double> classify_pairs(const PairClassifierProvider& provider, std::span<const PairInput> pairs,
                                   const ClassifyOptions& options = {});

enum class Label { reference, no_reference };

std::string_view to_string(Label label);
Label parse_label(std::string_view text);

struct Decision {
  double probability = 0.0;
  double threshold = 0.5;
  Label label = Label::no_reference;
};

// reference iff probability >= threshold. Throws configuration when either
// value lies outside [0, 1].
Decision decide(double probability, double threshold);

}  // namespace intertext
