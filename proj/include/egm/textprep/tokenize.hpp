#pragma once

#include <cstddef>
#include <fstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <vector>

#include "egm/error.hpp"

namespace egm::textprep {

using StopwordSet = std::unordered_set<std::string>;

inline const StopwordSet& default_stopwords() {
  static const StopwordSet words = {
      "a",       "about",   "above",  "after",  "again",   "against", "all",     "also",
      "am",      "an",      "and",    "any",    "are",     "as",      "at",      "be",
      "because", "been",    "before", "being",  "below",   "between", "both",    "but",
      "by",      "can",     "could",  "did",    "do",      "does",    "doing",   "down",
      "during",  "each",    "few",    "for",    "from",    "further", "had",     "has",
      "have",    "having",  "he",     "her",    "here",    "hers",    "herself", "him",
      "himself", "his",     "how",    "however", "if",     "in",      "into",    "is",
      "it",      "its",     "itself", "just",   "may",     "me",      "might",   "more",
      "most",    "must",    "my",     "myself", "no",      "nor",     "not",     "now",
      "of",      "off",     "on",     "once",   "only",    "or",      "other",   "our",
      "ours",    "out",     "over",   "own",    "same",    "she",     "should",  "so",
      "some",    "such",    "than",   "that",   "the",     "their",   "theirs",  "them",
      "then",    "there",   "these",  "they",   "this",    "those",   "through", "to",
      "too",     "under",   "until",  "up",     "upon",    "us",      "very",    "was",
      "we",      "were",    "what",   "when",   "where",   "whether", "which",   "while",
      "who",     "whom",    "why",    "will",   "with",    "within",  "without", "would",
      "you",     "your",    "yours",  "yourself"};
  return words;
}

// Plain text, one word per line; blank lines and surrounding whitespace ignored.
inline StopwordSet load_stopwords(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot read stopword list " + path);
  StopwordSet words;
  std::string line;
  while (std::getline(in, line)) {
    auto b = line.find_first_not_of(" \t\r");
    if (b == std::string::npos) continue;
    auto e = line.find_last_not_of(" \t\r");
    std::string w = line.substr(b, e - b + 1);
    for (auto& c : w) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    words.insert(std::move(w));
  }
  return words;
}

struct TokenizeOptions {
  bool use_stopwords = true;
  // Added on top of the default list when use_stopwords is set.
  StopwordSet extra_stopwords;
  // Replaces the default list entirely when non-null.
  const StopwordSet* stopwords = nullptr;
  bool stem = false;
  std::size_t min_length = 2;

  // Raw mode for matching queries: no stopwords and no length floor.
  static TokenizeOptions without_stopwords() {
    TokenizeOptions o;
    o.use_stopwords = false;
    o.min_length = 1;
    return o;
  }
};

namespace detail {

// Bytes >= 0x80 belong to UTF-8 sequences and are kept as word characters so
// accented words survive intact; only ASCII is case-folded.
inline bool is_word_byte(unsigned char c) {
  return (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9') || c >= 0x80;
}

inline std::size_t codepoint_count(std::string_view s) {
  std::size_t n = 0;
  for (unsigned char c : s) {
    if ((c & 0xC0) != 0x80) ++n;
  }
  return n;
}

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

}  // namespace detail

// Harman's "S" stemmer: plural stripping only.
inline std::string s_stem(std::string word) {
  using detail::ends_with;
  if (ends_with(word, "ies") && !ends_with(word, "eies") && !ends_with(word, "aies")) {
    word.replace(word.size() - 3, 3, "y");
  } else if (ends_with(word, "es") && !ends_with(word, "aes") && !ends_with(word, "ees") &&
             !ends_with(word, "oes")) {
    word.pop_back();
  } else if (ends_with(word, "s") && !ends_with(word, "us") && !ends_with(word, "ss")) {
    word.pop_back();
  }
  return word;
}

inline std::vector<std::string> tokenize(std::string_view text, const TokenizeOptions& options = {}) {
  const StopwordSet& base = options.stopwords ? *options.stopwords : default_stopwords();
  std::vector<std::string> tokens;
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && !detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    std::size_t start = i;
    while (i < text.size() && detail::is_word_byte(static_cast<unsigned char>(text[i]))) ++i;
    if (start == i) break;
    std::string tok(text.substr(start, i - start));
    for (auto& c : tok) {
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
    }
    if (detail::codepoint_count(tok) < options.min_length) continue;
    if (options.use_stopwords && (base.count(tok) || options.extra_stopwords.count(tok))) continue;
    if (options.stem) tok = s_stem(std::move(tok));
    tokens.push_back(std::move(tok));
  }
  return tokens;
}

}  // namespace egm::textprep
