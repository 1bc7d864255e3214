#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdlib>
#include <numeric>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "egm/ingest/record.hpp"

namespace egm::ingest {

struct DedupeOptions {
  double title_similarity = 0.9;
  int year_slack = 1;
};

struct MergeLogEntry {
  std::string kept_id;
  std::string dropped_id;
  std::string reason;  // "doi" or "title"

  bool operator==(const MergeLogEntry&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE(MergeLogEntry, kept_id, dropped_id, reason)

struct DedupeResult {
  std::vector<StudyRecord> records;
  std::vector<MergeLogEntry> log;
};

inline std::size_t levenshtein(std::string_view a, std::string_view b) {
  if (a.size() < b.size()) std::swap(a, b);
  std::vector<std::size_t> row(b.size() + 1);
  std::iota(row.begin(), row.end(), std::size_t{0});
  for (std::size_t i = 1; i <= a.size(); ++i) {
    std::size_t diag = row[0];
    row[0] = i;
    for (std::size_t j = 1; j <= b.size(); ++j) {
      std::size_t up = row[j];
      row[j] = std::min({row[j] + 1, row[j - 1] + 1, diag + (a[i - 1] == b[j - 1] ? 0 : 1)});
      diag = up;
    }
  }
  return row[b.size()];
}

// 1 - distance / max length; two empty strings are identical.
inline double title_similarity(std::string_view a, std::string_view b) {
  std::size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 1.0;
  return 1.0 - static_cast<double>(levenshtein(a, b)) / static_cast<double>(longest);
}

namespace detail {

struct DedupeKey {
  std::optional<std::string> doi;
  std::string title;
  std::optional<int> year;

  explicit DedupeKey(const StudyRecord& r)
      : doi(r.doi ? normalize_doi(*r.doi) : std::nullopt), title(normalize_title(r.title)), year(r.year) {}
};

// Returns "doi", "title", or empty when the pair does not merge.
inline std::string merge_reason(const DedupeKey& a, const DedupeKey& b, const DedupeOptions& opts) {
  if (a.doi && b.doi && *a.doi == *b.doi) return "doi";
  if (a.year && b.year && std::abs(*a.year - *b.year) > opts.year_slack) return {};
  std::size_t la = a.title.size(), lb = b.title.size();
  std::size_t longest = std::max(la, lb);
  if (longest == 0) return {};
  // Similarity can never reach the threshold when lengths differ by too much.
  double best_case = 1.0 - static_cast<double>(la > lb ? la - lb : lb - la) / static_cast<double>(longest);
  if (best_case < opts.title_similarity) return {};
  if (title_similarity(a.title, b.title) >= opts.title_similarity) return "title";
  return {};
}

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n) { std::iota(parent_.begin(), parent_.end(), std::size_t{0}); }
  std::size_t find(std::size_t x) {
    while (parent_[x] != x) x = parent_[x] = parent_[parent_[x]];
    return x;
  }
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a != b) parent_[std::max(a, b)] = std::min(a, b);
  }

 private:
  std::vector<std::size_t> parent_;
};

}  // namespace detail

// Fills gaps in `kept` from `other`: missing doi/venue/url/year, longer
// abstract, and any authors not already listed.
inline void absorb_metadata(StudyRecord& kept, const StudyRecord& other) {
  if (!kept.doi && other.doi) kept.doi = other.doi;
  if (!kept.venue && other.venue) kept.venue = other.venue;
  if (!kept.url && other.url) kept.url = other.url;
  if (!kept.year && other.year) kept.year = other.year;
  if (other.abstract.size() > kept.abstract.size()) kept.abstract = other.abstract;
  for (const auto& a : other.authors) {
    if (std::find(kept.authors.begin(), kept.authors.end(), a) == kept.authors.end()) kept.authors.push_back(a);
  }
}

// Merges duplicates transitively. Within each group the record with the
// longest abstract survives (first in input order on ties) and absorbs the
// others' metadata. Output preserves the input order of survivors.
inline DedupeResult dedupe(const std::vector<StudyRecord>& records, const DedupeOptions& opts = {}) {
  const std::size_t n = records.size();
  std::vector<detail::DedupeKey> keys;
  keys.reserve(n);
  for (const auto& r : records) keys.emplace_back(r);

  detail::UnionFind uf(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      if (uf.find(i) == uf.find(j)) continue;
      if (!detail::merge_reason(keys[i], keys[j], opts).empty()) uf.unite(i, j);
    }
  }

  std::unordered_map<std::size_t, std::vector<std::size_t>> groups;
  for (std::size_t i = 0; i < n; ++i) groups[uf.find(i)].push_back(i);

  std::vector<std::size_t> survivor_of(n);
  for (auto& [root, members] : groups) {
    std::size_t best = members.front();
    for (std::size_t m : members) {
      if (records[m].abstract.size() > records[best].abstract.size()) best = m;
    }
    for (std::size_t m : members) survivor_of[m] = best;
  }

  DedupeResult out;
  std::unordered_map<std::size_t, std::size_t> slot;
  for (std::size_t i = 0; i < n; ++i) {
    if (survivor_of[i] != i) continue;
    slot[i] = out.records.size();
    out.records.push_back(records[i]);
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t s = survivor_of[i];
    if (s == i) continue;
    absorb_metadata(out.records[slot[s]], records[i]);
    std::string reason = keys[i].doi && keys[s].doi && *keys[i].doi == *keys[s].doi ? "doi" : "title";
    out.log.push_back({records[s].id, records[i].id, reason});
  }
  return out;
}

// Gives every record without an id a content-derived one that collides with
// neither `taken` nor earlier records in the batch.
inline void assign_ids(std::vector<StudyRecord>& records, std::set<std::string> taken) {
  for (const auto& r : records) {
    if (!r.id.empty()) taken.insert(r.id);
  }
  for (auto& r : records) {
    if (!r.id.empty()) continue;
    std::string base = derive_record_id(r);
    std::string id = base;
    for (int k = 2; taken.count(id); ++k) id = base + "-" + std::to_string(k);
    r.id = id;
    taken.insert(id);
  }
}

struct CorpusMergeResult {
  std::vector<StudyRecord> added;
  std::vector<MergeLogEntry> log;
};

// Dedupes `incoming` among itself, then against `corpus`. Records already in
// the corpus keep their ids (they may be referenced by screening decisions);
// a matching incoming record is folded into the existing one instead.
inline CorpusMergeResult merge_into_corpus(std::vector<StudyRecord>& corpus, std::vector<StudyRecord> incoming,
                                           const std::set<std::string>& retired_ids, const DedupeOptions& opts = {}) {
  std::set<std::string> taken = retired_ids;
  for (const auto& r : corpus) taken.insert(r.id);
  assign_ids(incoming, taken);
  DedupeResult self = dedupe(incoming, opts);

  CorpusMergeResult out;
  out.log = std::move(self.log);
  std::vector<detail::DedupeKey> corpus_keys;
  corpus_keys.reserve(corpus.size());
  for (const auto& r : corpus) corpus_keys.emplace_back(r);

  for (auto& rec : self.records) {
    detail::DedupeKey key(rec);
    bool merged = false;
    for (std::size_t c = 0; c < corpus.size(); ++c) {
      std::string reason = detail::merge_reason(corpus_keys[c], key, opts);
      if (reason.empty()) continue;
      absorb_metadata(corpus[c], rec);
      corpus_keys[c] = detail::DedupeKey(corpus[c]);
      out.log.push_back({corpus[c].id, rec.id, reason});
      merged = true;
      break;
    }
    if (merged) continue;
    corpus.push_back(rec);
    corpus_keys.emplace_back(rec);
    out.added.push_back(std::move(rec));
  }
  return out;
}

}  // namespace egm::ingest
