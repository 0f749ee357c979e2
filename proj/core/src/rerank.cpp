#include "intertext/rerank.hpp"

#include <algorithm>
#include <cmath>

#include "intertext/error.hpp"
#include "intertext/parallel.hpp"
#include "intertext/text.hpp"

namespace intertext {

std::string PairInput::query_text() const { return join(query_part, " "); }
std::string PairInput::candidate_text() const { return join(candidate_part, " "); }

PairInput build_pair_input(const Segment& query, const Segment& candidate, std::size_t budget,
                           const PairClassifierProvider* tokenizer) {
  if (budget < 2) {
    throw Error(ErrorCode::configuration, "token budget must be >= 2", {{"token_budget", "must be >= 2"}});
  }
  auto tokens_of = [tokenizer](const std::string& text) {
    if (tokenizer) {
      if (auto t = tokenizer->tokenize(text)) return std::move(*t);
    }
    return split_whitespace(text);
  };
  const std::size_t query_budget = budget / 2;
  const std::size_t candidate_budget = budget - query_budget;

  PairInput input{tokens_of(query.text), tokens_of(candidate.text)};
  if (input.query_part.size() > query_budget) input.query_part.resize(query_budget);
  if (input.candidate_part.size() > candidate_budget) input.candidate_part.resize(candidate_budget);
  return input;
}

std::vector<double> classify_pairs(const PairClassifierProvider& provider, std::span<const PairInput> pairs,
                                   const ClassifyOptions& options) {
  const std::size_t batch = std::max<std::size_t>(1, options.batch_size);
  const std::size_t batches = (pairs.size() + batch - 1) / batch;
  std::vector<double> out(pairs.size());

  parallel_for(batches, options.jobs, [&](std::size_t b) {
    const std::size_t begin = b * batch;
    const std::size_t end = std::min(pairs.size(), begin + batch);
    std::vector<TextPair> texts;
    texts.reserve(end - begin);
    for (std::size_t i = begin; i < end; ++i) texts.emplace_back(pairs[i].query_text(), pairs[i].candidate_text());
    const auto probs = provider.classify(texts);
    if (probs.size() != texts.size()) {
      throw Error(ErrorCode::provider_contract, "classifier '" + provider.name() + "' returned " +
                                                    std::to_string(probs.size()) + " probabilities for " +
                                                    std::to_string(texts.size()) + " pairs");
    }
    for (std::size_t i = 0; i < probs.size(); ++i) {
      if (!(probs[i] >= 0.0 && probs[i] <= 1.0)) {
        throw Error(ErrorCode::provider_contract,
                    "classifier '" + provider.name() + "' returned out-of-range probability " +
                        std::to_string(probs[i]));
      }
      out[begin + i] = probs[i];
    }
  });
  return out;
}

std::string_view to_string(Label label) { return label == Label::reference ? "reference" : "no_reference"; }

Label parse_label(std::string_view text) {
  if (text == "reference") return Label::reference;
  if (text == "no_reference") return Label::no_reference;
  throw Error(ErrorCode::validation, "unknown label '" + std::string(text) + "'",
              {{"label", "expected reference or no_reference"}});
}

Decision decide(double probability, double threshold) {
  if (!(probability >= 0.0 && probability <= 1.0)) {
    throw Error(ErrorCode::configuration, "probability must be in [0, 1]");
  }
  if (!(threshold >= 0.0 && threshold <= 1.0)) {
    throw Error(ErrorCode::configuration, "threshold must be in [0, 1]", {{"threshold", "must be in [0, 1]"}});
  }
  return {probability, threshold, probability >= threshold ? Label::reference : Label::no_reference};
}

}  // namespace intertext
