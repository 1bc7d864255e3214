#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "egm/error.hpp"
#include "egm/textprep/tokenize.hpp"
#include "egm/textprep/vocabulary.hpp"

namespace egm::textprep {

// User-facing keyword lists, one entry per topic in declaration order.
struct TopicKeywords {
  std::string topic;
  std::vector<std::string> keywords;
};

struct TopicKeywordReport {
  std::string topic;
  std::vector<std::string> present;    // resolved vocabulary words
  std::vector<int> present_indices;    // parallel to present
  std::vector<std::string> absent;     // single-token, not in vocabulary
  std::vector<std::string> multiword;  // rejected: keywords are single tokens
};

struct KeywordReport {
  std::vector<TopicKeywordReport> topics;
  std::vector<std::string> warnings;

  std::vector<std::vector<int>> keyword_indices() const {
    std::vector<std::vector<int>> out;
    for (const auto& t : topics) out.push_back(t.present_indices);
    return out;
  }
};

// Resolves each keyword through the tokenizer (stopwords off) against the
// vocabulary. A keyword shared by several topics is a warning; a topic with no
// resolvable keyword is an error.
inline KeywordReport validate_keywords(const std::vector<TopicKeywords>& spec, const Vocabulary& vocab,
                                       const TokenizeOptions& base_options = TokenizeOptions::without_stopwords()) {
  TokenizeOptions opts = base_options;
  opts.use_stopwords = false;
  KeywordReport report;
  std::map<std::string, std::vector<std::string>> owners;
  for (const auto& topic : spec) {
    TopicKeywordReport tr;
    tr.topic = topic.topic;
    std::set<std::string> seen;
    for (const auto& kw : topic.keywords) {
      auto toks = tokenize(kw, opts);
      if (toks.size() != 1) {
        tr.multiword.push_back(kw);
        report.warnings.push_back("MultiwordKeyword: '" + kw + "' in topic " + topic.topic +
                                  " is not a single token");
        continue;
      }
      const std::string& w = toks.front();
      if (!seen.insert(w).second) continue;
      if (auto idx = vocab.index_of(w)) {
        tr.present.push_back(w);
        tr.present_indices.push_back(*idx);
        owners[w].push_back(topic.topic);
      } else {
        tr.absent.push_back(w);
      }
    }
    report.topics.push_back(std::move(tr));
  }
  for (const auto& [w, topics] : owners) {
    if (topics.size() < 2) continue;
    std::string list;
    for (const auto& t : topics) list += (list.empty() ? "" : ", ") + t;
    report.warnings.push_back("keyword '" + w + "' shared by topics " + list);
  }
  for (const auto& tr : report.topics) {
    if (tr.present.empty()) {
      throw Error(ErrorCode::NoKeywordsForTopic, "topic " + tr.topic + " has no keyword in the vocabulary");
    }
  }
  return report;
}

}  // namespace egm::textprep
