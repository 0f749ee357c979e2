#include "intertext/corpus.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <unordered_set>

#include "intertext/csv.hpp"
#include "intertext/error.hpp"
#include "intertext/text.hpp"

namespace intertext {

using nlohmann::json;

std::string_view to_string(Role role) { return role == Role::query ? "query" : "source"; }

Role parse_role(std::string_view text) {
  if (text == "query") return Role::query;
  if (text == "source") return Role::source;
  throw Error(ErrorCode::configuration, "unknown document role '" + std::string(text) + "'");
}

std::string_view to_string(FileFormat format) { return format == FileFormat::csv ? "csv" : "jsonl"; }

FileFormat parse_file_format(std::string_view text) {
  if (text == "csv") return FileFormat::csv;
  if (text == "jsonl" || text == "ndjson") return FileFormat::jsonl;
  throw Error(ErrorCode::configuration, "unknown file format '" + std::string(text) + "'");
}

FileFormat format_from_path(const std::filesystem::path& path) {
  const auto ext = path.extension().string();
  if (ext == ".csv") return FileFormat::csv;
  if (ext == ".jsonl" || ext == ".ndjson") return FileFormat::jsonl;
  throw Error(ErrorCode::configuration, "cannot infer format from '" + path.string() + "'; pass csv or jsonl");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::io, "cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::io, "cannot write '" + path.string() + "'");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw Error(ErrorCode::io, "write failed for '" + path.string() + "'");
}

Segment make_segment(std::string id, std::string text, std::optional<std::vector<std::string>> lemmas,
                     std::optional<std::vector<std::string>> pos) {
  if (lemmas && pos && lemmas->size() != pos->size()) {
    throw Error(ErrorCode::validation, "segment '" + id + "': lemma_seq has " + std::to_string(lemmas->size()) +
                                           " entries but pos_seq has " + std::to_string(pos->size()));
  }
  Segment seg;
  seg.id = std::move(id);
  seg.tokens = tokenize(text);
  seg.text = std::move(text);
  if (lemmas) {
    seg.lemma_keys.reserve(lemmas->size());
    for (const auto& l : *lemmas) seg.lemma_keys.push_back(normalize_token(l));
  }
  seg.lemmas = std::move(lemmas);
  seg.pos = std::move(pos);
  return seg;
}

Document::Document(std::string doc_id, std::string author, Role role, std::vector<Segment> segments)
    : doc_id_(std::move(doc_id)), author_(std::move(author)), role_(role), segments_(std::move(segments)) {
  by_id_.reserve(segments_.size());
  for (std::size_t i = 0; i < segments_.size(); ++i) {
    segments_[i].ordinal = i;
    if (!by_id_.emplace(segments_[i].id, i).second) {
      throw Error(ErrorCode::validation, "duplicate segment id '" + segments_[i].id + "'",
                  {{"id", "duplicate value '" + segments_[i].id + "'"}});
    }
  }
}

std::optional<std::size_t> Document::index_of(std::string_view id) const {
  const auto it = by_id_.find(std::string(id));
  if (it == by_id_.end()) return std::nullopt;
  return it->second;
}

const Segment* Document::find(std::string_view id) const {
  const auto idx = index_of(id);
  return idx ? &segments_[*idx] : nullptr;
}

bool Document::has_lemmas() const {
  return !segments_.empty() && std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) {
    return s.lemmas.has_value();
  });
}

bool Document::has_pos() const {
  return !segments_.empty() &&
         std::all_of(segments_.begin(), segments_.end(), [](const Segment& s) { return s.pos.has_value(); });
}

std::string Document::checksum() const {
  std::uint64_t h = fnv1a64("intertext-doc");
  auto mix = [&h](std::string_view s) {
    h = fnv1a64(s, h);
    h = fnv1a64(std::string_view("\x1f", 1), h);
  };
  for (const auto& seg : segments_) {
    mix(seg.id);
    mix(seg.text);
    if (seg.lemmas) mix(join(*seg.lemmas, " "));
    if (seg.pos) mix(join(*seg.pos, " "));
    h = fnv1a64(std::string_view("\x1e", 1), h);
  }
  return hex64(h);
}

namespace {

std::optional<std::vector<std::string>> json_string_array(const json& record, const char* key, std::size_t line) {
  if (!record.contains(key) || record[key].is_null()) return std::nullopt;
  const auto& value = record[key];
  std::vector<std::string> out;
  if (value.is_string()) return split_whitespace(value.get<std::string>());
  if (!value.is_array()) {
    throw Error(ErrorCode::schema, fmt::format("line {}: '{}' must be an array of strings", line, key));
  }
  for (const auto& v : value) {
    if (!v.is_string()) {
      throw Error(ErrorCode::schema, fmt::format("line {}: '{}' must be an array of strings", line, key));
    }
    out.push_back(v.get<std::string>());
  }
  return out;
}

std::string json_id(const json& record, std::size_t line) {
  if (!record.contains("id")) {
    throw Error(ErrorCode::schema, fmt::format("line {}: missing required field 'id'", line), {{"id", "missing"}});
  }
  const auto& id = record["id"];
  if (id.is_string()) return id.get<std::string>();
  if (id.is_number_integer()) return std::to_string(id.get<long long>());
  throw Error(ErrorCode::schema, fmt::format("line {}: 'id' must be a string", line));
}

template <typename Fn>
void for_each_json_line(std::string_view content, Fn&& fn) {
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= content.size()) {
    auto end = content.find('\n', pos);
    if (end == std::string_view::npos) end = content.size();
    auto line = content.substr(pos, end - pos);
    ++line_no;
    pos = end + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == content.size()) break;
      continue;
    }
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw Error(ErrorCode::schema, fmt::format("line {}: invalid JSON ({})", line_no, e.what()));
    }
    if (!record.is_object()) throw Error(ErrorCode::schema, fmt::format("line {}: expected a JSON object", line_no));
    fn(record, line_no);
    if (end == content.size()) break;
  }
}

}  // namespace

Document parse_document(std::string_view content, FileFormat format, const DocumentOptions& options) {
  std::vector<Segment> segments;
  if (format == FileFormat::csv) {
    const auto table = csv::read_table(content);
    if (table.header.empty()) throw Error(ErrorCode::empty_document, "document '" + options.doc_id + "' is empty");
    const auto id_col = table.require("id");
    const auto text_col = table.require("text");
    const auto lemma_col = table.column("lemma_seq");
    const auto pos_col = table.column("pos_seq");
    segments.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      std::optional<std::vector<std::string>> lemmas, pos;
      if (lemma_col) lemmas = split_whitespace(row[*lemma_col]);
      if (pos_col) pos = split_whitespace(row[*pos_col]);
      segments.push_back(make_segment(row[id_col], row[text_col], std::move(lemmas), std::move(pos)));
    }
  } else {
    for_each_json_line(content, [&](const json& record, std::size_t line) {
      auto id = json_id(record, line);
      if (!record.contains("text") || !record["text"].is_string()) {
        throw Error(ErrorCode::schema, fmt::format("line {}: missing required field 'text'", line),
                    {{"text", "missing"}});
      }
      segments.push_back(make_segment(std::move(id), record["text"].get<std::string>(),
                                      json_string_array(record, "lemma_seq", line),
                                      json_string_array(record, "pos_seq", line)));
    });
  }
  if (segments.empty()) {
    throw Error(ErrorCode::empty_document, "document '" + options.doc_id + "' contains no segments");
  }
  return Document(options.doc_id, options.author, options.role, std::move(segments));
}

Document load_document(const std::filesystem::path& path, FileFormat format, DocumentOptions options) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::io, "no such file '" + path.string() + "'");
  if (options.doc_id.empty()) options.doc_id = path.stem().string();
  return parse_document(read_file(path), format, options);
}

Document load_document(const std::filesystem::path& path, DocumentOptions options) {
  return load_document(path, format_from_path(path), std::move(options));
}

std::string format_document(const Document& doc, FileFormat format) {
  const bool lemmas = std::any_of(doc.segments().begin(), doc.segments().end(),
                                  [](const Segment& s) { return s.lemmas.has_value(); });
  const bool pos = std::any_of(doc.segments().begin(), doc.segments().end(),
                               [](const Segment& s) { return s.pos.has_value(); });
  std::string out;
  if (format == FileFormat::csv) {
    csv::Row header{"id", "text"};
    if (lemmas) header.push_back("lemma_seq");
    if (pos) header.push_back("pos_seq");
    out += csv::format_row(header);
    for (const auto& seg : doc.segments()) {
      csv::Row row{seg.id, seg.text};
      if (lemmas) row.push_back(seg.lemmas ? join(*seg.lemmas, " ") : "");
      if (pos) row.push_back(seg.pos ? join(*seg.pos, " ") : "");
      out += csv::format_row(row);
    }
  } else {
    for (const auto& seg : doc.segments()) {
      json record = {{"id", seg.id}, {"text", seg.text}};
      if (seg.lemmas) record["lemma_seq"] = *seg.lemmas;
      if (seg.pos) record["pos_seq"] = *seg.pos;
      out += record.dump();
      out.push_back('\n');
    }
  }
  return out;
}

void write_document(const Document& doc, const std::filesystem::path& path, FileFormat format) {
  write_file(path, format_document(doc, format));
}

std::string_view to_string(LinkCategory category) {
  switch (category) {
    case LinkCategory::verbatim_marked: return "verbatim_marked";
    case LinkCategory::verbatim_unmarked: return "verbatim_unmarked";
    case LinkCategory::paraphrase_minor: return "paraphrase_minor";
    case LinkCategory::paraphrase_major: return "paraphrase_major";
    case LinkCategory::allusion_single: return "allusion_single";
    case LinkCategory::allusion_systemic: return "allusion_systemic";
    case LinkCategory::unspecified: return "unspecified";
  }
  return "unspecified";
}

LinkCategory parse_link_category(std::string_view text) {
  if (text.empty()) return LinkCategory::unspecified;
  for (auto c : {LinkCategory::verbatim_marked, LinkCategory::verbatim_unmarked, LinkCategory::paraphrase_minor,
                 LinkCategory::paraphrase_major, LinkCategory::allusion_single, LinkCategory::allusion_systemic,
                 LinkCategory::unspecified}) {
    if (to_string(c) == text) return c;
  }
  throw Error(ErrorCode::validation, "unknown link category '" + std::string(text) + "'",
              {{"category", "unknown value '" + std::string(text) + "'"}});
}

std::size_t SegmentPairHash::operator()(const SegmentPair& p) const noexcept {
  const auto h1 = std::hash<std::string>{}(p.first);
  const auto h2 = std::hash<std::string>{}(p.second);
  return h1 ^ (h2 + 0x9e3779b97f4a7c15ULL + (h1 << 6) + (h1 >> 2));
}

void validate_links(std::span<const LinkRecord> links, const Document* query, const Document* source) {
  std::unordered_set<SegmentPair, SegmentPairHash> seen;
  seen.reserve(links.size());
  for (const auto& link : links) {
    const auto pair_name = "(" + link.query_seg_id + ", " + link.source_seg_id + ")";
    if (query && !query->find(link.query_seg_id)) {
      throw Error(ErrorCode::validation,
                  "link " + pair_name + ": query segment '" + link.query_seg_id + "' not found in '" +
                      query->doc_id() + "'");
    }
    if (source && !source->find(link.source_seg_id)) {
      throw Error(ErrorCode::validation,
                  "link " + pair_name + ": source segment '" + link.source_seg_id + "' not found in '" +
                      source->doc_id() + "'");
    }
    if (!seen.emplace(link.query_seg_id, link.source_seg_id).second) {
      throw Error(ErrorCode::validation, "duplicate link " + pair_name);
    }
  }
}

std::vector<LinkRecord> parse_links(std::string_view content, FileFormat format, const Document* query,
                                    const Document* source) {
  std::vector<LinkRecord> links;
  if (format == FileFormat::csv) {
    const auto table = csv::read_table(content);
    if (table.header.empty()) return links;
    const auto q_col = table.require("query_seg_id");
    const auto s_col = table.require("source_seg_id");
    const auto c_col = table.column("category");
    const auto p_col = table.column("provenance");
    links.reserve(table.rows.size());
    for (const auto& row : table.rows) {
      links.push_back({row[q_col], row[s_col], c_col ? parse_link_category(row[*c_col]) : LinkCategory::unspecified,
                       p_col ? row[*p_col] : std::string{}});
    }
  } else {
    for_each_json_line(content, [&](const json& record, std::size_t line) {
      for (const char* key : {"query_seg_id", "source_seg_id"}) {
        if (!record.contains(key) || !record[key].is_string()) {
          throw Error(ErrorCode::schema, fmt::format("line {}: missing required field '{}'", line, key),
                      {{key, "missing"}});
        }
      }
      LinkRecord link;
      link.query_seg_id = record["query_seg_id"].get<std::string>();
      link.source_seg_id = record["source_seg_id"].get<std::string>();
      if (record.contains("category") && record["category"].is_string()) {
        link.category = parse_link_category(record["category"].get<std::string>());
      }
      if (record.contains("provenance") && record["provenance"].is_string()) {
        link.provenance = record["provenance"].get<std::string>();
      }
      links.push_back(std::move(link));
    });
  }
  validate_links(links, query, source);
  return links;
}

std::vector<LinkRecord> load_links(const std::filesystem::path& path, const Document* query,
                                   const Document* source) {
  if (!std::filesystem::exists(path)) throw Error(ErrorCode::io, "no such file '" + path.string() + "'");
  return parse_links(read_file(path), format_from_path(path), query, source);
}

std::string format_links(std::span<const LinkRecord> links, FileFormat format) {
  std::string out;
  if (format == FileFormat::csv) {
    out += csv::format_row({"query_seg_id", "source_seg_id", "category", "provenance"});
    for (const auto& l : links) {
      out += csv::format_row({l.query_seg_id, l.source_seg_id, std::string(to_string(l.category)), l.provenance});
    }
  } else {
    for (const auto& l : links) {
      json record = {{"query_seg_id", l.query_seg_id},
                     {"source_seg_id", l.source_seg_id},
                     {"category", to_string(l.category)},
                     {"provenance", l.provenance}};
      out += record.dump();
      out.push_back('\n');
    }
  }
  return out;
}

void write_links(std::span<const LinkRecord> links, const std::filesystem::path& path, FileFormat format) {
  write_file(path, format_links(links, format));
}

namespace {

CorpusStats stats_from_counts(const std::vector<std::size_t>& counts) {
  CorpusStats stats;
  stats.segment_count = counts.size();
  if (counts.empty()) return stats;
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  stats.min_tokens = *lo;
  stats.max_tokens = *hi;
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  stats.avg_tokens = sum / static_cast<double>(counts.size());
  double sq = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - stats.avg_tokens;
    sq += d * d;
  }
  stats.stddev_tokens = std::sqrt(sq / static_cast<double>(counts.size()));
  return stats;
}

std::string thousands(std::size_t value) {
  auto digits = std::to_string(value);
  std::string out;
  const auto n = digits.size();
  for (std::size_t i = 0; i < n; ++i) {
    if (i && (n - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

}  // namespace

CorpusStats corpus_stats(const Document& doc) {
  std::vector<std::size_t> counts;
  counts.reserve(doc.size());
  for (const auto& seg : doc.segments()) counts.push_back(seg.tokens.size());
  return stats_from_counts(counts);
}

CorpusStats corpus_stats(std::span<const Document> docs) {
  std::vector<std::size_t> counts;
  for (const auto& doc : docs) {
    for (const auto& seg : doc.segments()) counts.push_back(seg.tokens.size());
  }
  return stats_from_counts(counts);
}

std::string format_stats_table(const std::vector<std::pair<std::string, CorpusStats>>& rows,
                               const std::optional<CorpusStats>& total) {
  std::size_t label_width = 13;  // "Total / Avg."
  for (const auto& [label, _] : rows) label_width = std::max(label_width, label.size());
  const auto line = [&](std::string_view label, const CorpusStats& s) {
    return fmt::format("{:<{}}  {:>10}  {:>11.2f}  {:>5}  {:>6}  {:>9.2f}\n", label, label_width,
                       thousands(s.segment_count), s.avg_tokens, s.min_tokens, s.max_tokens, s.stddev_tokens);
  };
  std::string out = fmt::format("{:<{}}  {:>10}  {:>11}  {:>5}  {:>6}  {:>9}\n", "Author", label_width, "Segments",
                                "Avg. Tokens", "Min", "Max", "Std. Dev.");
  const auto rule = std::string(label_width + 2 + 10 + 2 + 11 + 2 + 5 + 2 + 6 + 2 + 9, '-') + "\n";
  out += rule;
  for (const auto& [label, s] : rows) out += line(label, s);
  if (total) {
    out += rule;
    out += line("Total / Avg.", *total);
  }
  return out;
}

}  // namespace intertext
