#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace intertext {

// Lowercases, splits on punctuation and whitespace, and folds the Latin
// orthographic variants v->u and j->i. Idempotent on its own output joined by
// spaces.
std::vector<std::string> tokenize(std::string_view text);

// Applies the tokenizer's per-token normalization to a single annotation
// token (lemma) without splitting it.
std::string normalize_token(std::string_view token);

std::vector<std::string> split_whitespace(std::string_view text);

std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Best-effort sentence segmentation on '.', '?', '!', ';' and ':' followed by
// whitespace. Input is normally pre-segmented; this is a convenience only.
std::vector<std::string> split_sentences(std::string_view text);

// 64-bit FNV-1a.
std::uint64_t fnv1a64(std::string_view bytes, std::uint64_t basis = 0xcbf29ce484222325ULL);

std::string hex64(std::uint64_t value);

}  // namespace intertext
