#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace intertext {

enum class Role { query, source };
enum class FileFormat { csv, jsonl };

std::string_view to_string(Role role);
Role parse_role(std::string_view text);
std::string_view to_string(FileFormat format);
FileFormat parse_file_format(std::string_view text);
// csv for *.csv, jsonl for *.jsonl / *.ndjson; throws configuration otherwise.
FileFormat format_from_path(const std::filesystem::path& path);

struct Segment {
  std::string id;
  std::size_t ordinal = 0;
  std::string text;
  std::vector<std::string> tokens;  // tokenize(text)

  // Optional parallel annotation sequences supplied by external tools.
  std::optional<std::vector<std::string>> lemmas;
  std::optional<std::vector<std::string>> pos;
  std::vector<std::string> lemma_keys;  // normalize_token over lemmas, empty when no lemmas
};

// Builds a segment with tokens (and lemma keys) populated. Throws validation
// when lemma and POS sequences are both present with different lengths.
Segment make_segment(std::string id, std::string text,
                     std::optional<std::vector<std::string>> lemmas = std::nullopt,
                     std::optional<std::vector<std::string>> pos = std::nullopt);

// An ordered, immutable collection of segments from one author/work. Ordinals
// are reassigned 0..n-1 in the given order; ids must be unique.
class Document {
 public:
  Document() = default;
  Document(std::string doc_id, std::string author, Role role, std::vector<Segment> segments);

  const std::string& doc_id() const noexcept { return doc_id_; }
  const std::string& author() const noexcept { return author_; }
  Role role() const noexcept { return role_; }
  std::span<const Segment> segments() const noexcept { return segments_; }
  std::size_t size() const noexcept { return segments_.size(); }
  bool empty() const noexcept { return segments_.empty(); }
  const Segment& operator[](std::size_t i) const { return segments_[i]; }

  std::optional<std::size_t> index_of(std::string_view id) const;
  const Segment* find(std::string_view id) const;

  bool has_lemmas() const;  // every segment carries a lemma sequence
  bool has_pos() const;     // every segment carries a POS sequence

  // Stable content checksum over ids, texts and annotations (hex FNV-1a).
  std::string checksum() const;

 private:
  std::string doc_id_;
  std::string author_;
  Role role_ = Role::query;
  std::vector<Segment> segments_;
  std::unordered_map<std::string, std::size_t> by_id_;
};

struct DocumentOptions {
  Role role = Role::query;
  std::string doc_id;  // defaults to the file stem
  std::string author;
};

// Parses CSV (columns id,text; optional lemma_seq,pos_seq whitespace-joined)
// or JSONL (keys id,text; optional lemma_seq,pos_seq arrays).
// Errors: schema (missing column, naming it), validation (duplicate id,
// naming it), empty_document (no segments).
Document parse_document(std::string_view content, FileFormat format, const DocumentOptions& options);
Document load_document(const std::filesystem::path& path, FileFormat format, DocumentOptions options = {});
Document load_document(const std::filesystem::path& path, DocumentOptions options = {});

std::string format_document(const Document& doc, FileFormat format);
void write_document(const Document& doc, const std::filesystem::path& path, FileFormat format);

enum class LinkCategory {
  verbatim_marked,
  verbatim_unmarked,
  paraphrase_minor,
  paraphrase_major,
  allusion_single,
  allusion_systemic,
  unspecified,
};

std::string_view to_string(LinkCategory category);
LinkCategory parse_link_category(std::string_view text);  // "" -> unspecified

struct LinkRecord {
  std::string query_seg_id;
  std::string source_seg_id;
  LinkCategory category = LinkCategory::unspecified;
  std::string provenance;
};

using SegmentPair = std::pair<std::string, std::string>;  // (query id, source id)

struct SegmentPairHash {
  std::size_t operator()(const SegmentPair& p) const noexcept;
};

// Throws validation on a repeated (query, source) pair, and, when the
// documents are given, on ids that do not resolve in them.
void validate_links(std::span<const LinkRecord> links, const Document* query = nullptr,
                    const Document* source = nullptr);

// CSV columns query_seg_id,source_seg_id (mandatory), category,provenance
// (optional); JSONL with the same keys. Empty input yields an empty set.
std::vector<LinkRecord> parse_links(std::string_view content, FileFormat format, const Document* query = nullptr,
                                    const Document* source = nullptr);
std::vector<LinkRecord> load_links(const std::filesystem::path& path, const Document* query = nullptr,
                                   const Document* source = nullptr);
std::string format_links(std::span<const LinkRecord> links, FileFormat format);
void write_links(std::span<const LinkRecord> links, const std::filesystem::path& path, FileFormat format);

struct CorpusStats {
  std::size_t segment_count = 0;
  double avg_tokens = 0.0;
  std::size_t min_tokens = 0;
  std::size_t max_tokens = 0;
  double stddev_tokens = 0.0;  // population standard deviation
};

CorpusStats corpus_stats(const Document& doc);
// Pooled statistics over several documents (the "Total / Avg." row).
CorpusStats corpus_stats(std::span<const Document> docs);

// Aligned text table: Author | Segments | Avg. Tokens | Min | Max | Std. Dev.
// with a pooled total row when more than one row is given.
std::string format_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows,
                               const std::optional<CorpusStats>& total = std::nullopt);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

}  // namespace intertext
