#pragma once

#include <algorithm>
#include <cstddef>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "egm/error.hpp"

namespace egm::textprep {

class Vocabulary {
 public:
  Vocabulary() = default;

  // Words must be distinct; document frequencies align with words.
  Vocabulary(std::vector<std::string> words, std::vector<int> doc_freq)
      : words_(std::move(words)), doc_freq_(std::move(doc_freq)) {
    if (words_.size() != doc_freq_.size()) {
      throw Error(ErrorCode::InvalidArgument, "vocabulary words and frequencies differ in length");
    }
    for (std::size_t i = 0; i < words_.size(); ++i) {
      if (!index_.emplace(words_[i], static_cast<int>(i)).second) {
        throw Error(ErrorCode::InvalidArgument, "duplicate vocabulary word " + words_[i]);
      }
    }
  }

  std::size_t size() const { return words_.size(); }
  bool empty() const { return words_.empty(); }
  const std::string& word(std::size_t i) const { return words_.at(i); }
  const std::vector<std::string>& words() const { return words_; }
  int doc_freq(std::size_t i) const { return doc_freq_.at(i); }
  const std::vector<int>& doc_freqs() const { return doc_freq_; }

  std::optional<int> index_of(const std::string& w) const {
    auto it = index_.find(w);
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

 private:
  std::vector<std::string> words_;
  std::vector<int> doc_freq_;
  std::unordered_map<std::string, int> index_;
};

struct VocabularyOptions {
  int min_df = 2;
  double max_df_ratio = 0.95;
  std::set<std::string> forced_words;
};

// Keeps words with min_df <= df and df/D <= max_df_ratio; forced words survive
// both cuts as long as they occur at all. Order: descending df, then lexicographic.
inline Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& docs,
                                   const VocabularyOptions& opts = {}) {
  if (opts.min_df < 1) throw Error(ErrorCode::InvalidArgument, "min_df must be >= 1");
  if (!(opts.max_df_ratio >= 0.0 && opts.max_df_ratio <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "max_df_ratio must lie in [0, 1]");
  }
  std::map<std::string, int> df;
  for (const auto& doc : docs) {
    std::set<std::string> seen(doc.begin(), doc.end());
    for (const auto& w : seen) ++df[w];
  }
  const double n_docs = static_cast<double>(docs.size());
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [w, f] : df) {
    bool forced = opts.forced_words.count(w) > 0;
    bool passes = f >= opts.min_df && static_cast<double>(f) / n_docs <= opts.max_df_ratio;
    if (passes || forced) kept.emplace_back(w, f);
  }
  if (kept.empty()) throw Error(ErrorCode::EmptyVocabulary, "no word survived the frequency cuts");
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  std::vector<std::string> words;
  std::vector<int> freqs;
  words.reserve(kept.size());
  freqs.reserve(kept.size());
  for (auto& [w, f] : kept) {
    words.push_back(w);
    freqs.push_back(f);
  }
  return Vocabulary(std::move(words), std::move(freqs));
}

struct TokenizedDocument {
  std::string id;
  std::vector<int> tokens;
};

struct TokenizedCorpus {
  std::vector<TokenizedDocument> docs;
  // Ids of input documents left with no in-vocabulary tokens.
  std::vector<std::string> excluded;
  std::size_t vocab_size = 0;

  std::size_t total_tokens() const {
    std::size_t n = 0;
    for (const auto& d : docs) n += d.tokens.size();
    return n;
  }
};

struct NamedTokens {
  std::string id;
  std::vector<std::string> tokens;
};

inline TokenizedCorpus vectorize(const std::vector<NamedTokens>& docs, const Vocabulary& vocab) {
  TokenizedCorpus out;
  out.vocab_size = vocab.size();
  for (const auto& doc : docs) {
    TokenizedDocument td{doc.id, {}};
    for (const auto& tok : doc.tokens) {
      if (auto idx = vocab.index_of(tok)) td.tokens.push_back(*idx);
    }
    if (td.tokens.empty()) {
      out.excluded.push_back(doc.id);
    } else {
      out.docs.push_back(std::move(td));
    }
  }
  return out;
}

}  // namespace egm::textprep
