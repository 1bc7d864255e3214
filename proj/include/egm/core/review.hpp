#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/core/attributes.hpp"
#include "egm/core/framework.hpp"
#include "egm/error.hpp"

namespace egm::core {

enum class Decision { Included, Excluded };

NLOHMANN_JSON_SERIALIZE_ENUM(Decision, {{Decision::Included, "included"}, {Decision::Excluded, "excluded"}})

inline Decision parse_decision(const std::string& s) {
  if (s == "included" || s == "include") return Decision::Included;
  if (s == "excluded" || s == "exclude") return Decision::Excluded;
  throw Error(ErrorCode::InvalidArgument, "unknown screening decision '" + s + "'");
}

struct ScreeningDecision {
  std::string doc_id;
  Decision decision = Decision::Included;
  std::string reason;
  std::string reviewer;
  std::string timestamp;

  bool operator==(const ScreeningDecision&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(ScreeningDecision, doc_id, decision, reason, reviewer, timestamp)

enum class SuggestionStatus { Pending, Confirmed, Rejected };

NLOHMANN_JSON_SERIALIZE_ENUM(SuggestionStatus, {{SuggestionStatus::Pending, "pending"},
                                                {SuggestionStatus::Confirmed, "confirmed"},
                                                {SuggestionStatus::Rejected, "rejected"}})

inline SuggestionStatus parse_suggestion_status(const std::string& s) {
  if (s == "pending") return SuggestionStatus::Pending;
  if (s == "confirmed") return SuggestionStatus::Confirmed;
  if (s == "rejected") return SuggestionStatus::Rejected;
  throw Error(ErrorCode::InvalidArgument, "unknown suggestion status '" + s + "'");
}

struct Suggestion {
  std::string id;
  std::string doc_id;
  std::string topic_id;
  double probability = 0;
  SuggestionStatus status = SuggestionStatus::Pending;

  bool operator==(const Suggestion&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(Suggestion, id, doc_id, topic_id, probability, status)

inline std::string suggestion_id(const std::string& doc_id, const std::string& topic_id) {
  return doc_id + "~" + topic_id;
}

struct EffectCoding {
  std::string doc_id;
  std::string intervention_id;
  std::string outcome_id;
  Direction direction = Direction::Positive;
  StudyAttributes attributes;
  std::string reviewer;
  std::string timestamp;
  bool orphaned = false;  // doc excluded after coding; kept for the audit trail

  bool same_key(const EffectCoding& o) const {
    return doc_id == o.doc_id && intervention_id == o.intervention_id && outcome_id == o.outcome_id;
  }
  bool operator==(const EffectCoding&) const = default;
};

inline void to_json(nlohmann::json& j, const EffectCoding& c) {
  j = nlohmann::json{{"doc", c.doc_id},           {"intervention", c.intervention_id},
                     {"outcome", c.outcome_id},   {"direction", c.direction},
                     {"attributes", c.attributes}, {"reviewer", c.reviewer},
                     {"timestamp", c.timestamp},  {"orphaned", c.orphaned}};
}

inline void from_json(const nlohmann::json& j, EffectCoding& c) {
  c.doc_id = j.at("doc").get<std::string>();
  c.intervention_id = j.at("intervention").get<std::string>();
  c.outcome_id = j.at("outcome").get<std::string>();
  c.direction = parse_direction(j.at("direction").get<std::string>());
  c.attributes = j.value("attributes", nlohmann::json::object()).get<StudyAttributes>();
  c.reviewer = j.value("reviewer", "");
  c.timestamp = j.value("timestamp", "");
  c.orphaned = j.value("orphaned", false);
}

// Per-topic document probabilities, aligned with the model's document order.
struct ThetaTable {
  std::vector<std::string> doc_ids;
  std::vector<std::string> topic_ids;
  std::vector<std::vector<double>> rows;
};

// Screening, suggestions and codings of one project. Mutations are expected
// to be serialized by the caller.
struct ReviewState {
  std::optional<Framework> framework;
  std::map<std::string, ScreeningDecision> decisions;  // current, by doc
  std::vector<ScreeningDecision> history;              // every change, oldest first
  std::vector<Suggestion> suggestions;
  std::vector<EffectCoding> codings;

  bool is_included(const std::string& doc) const {
    auto it = decisions.find(doc);
    return it != decisions.end() && it->second.decision == Decision::Included;
  }

  std::set<std::string> included_docs() const {
    std::set<std::string> out;
    for (const auto& [doc, d] : decisions) {
      if (d.decision == Decision::Included) out.insert(doc);
    }
    return out;
  }

  bool operator==(const ReviewState&) const = default;
};

// Records or replaces the current decision. An identical repeat (same
// decision, reason and reviewer) is a no-op. Exclusion drops the doc's
// pending suggestions and flags its codings as orphaned; re-inclusion clears
// the flag.
inline bool record_screening(ReviewState& review, const std::set<std::string>& known_docs, ScreeningDecision decision) {
  if (!known_docs.count(decision.doc_id)) throw Error(ErrorCode::UnknownDoc, "unknown document " + decision.doc_id);
  auto it = review.decisions.find(decision.doc_id);
  if (it != review.decisions.end() && it->second.decision == decision.decision &&
      it->second.reason == decision.reason && it->second.reviewer == decision.reviewer) {
    return false;
  }
  const bool excluded = decision.decision == Decision::Excluded;
  review.history.push_back(decision);
  review.decisions[decision.doc_id] = decision;
  if (excluded) {
    std::erase_if(review.suggestions, [&](const Suggestion& s) {
      return s.doc_id == decision.doc_id && s.status == SuggestionStatus::Pending;
    });
  }
  for (auto& c : review.codings) {
    if (c.doc_id == decision.doc_id) c.orphaned = excluded;
  }
  return true;
}

// Included documents with theta >= tau for the topic, highest first, ties by
// doc id.
inline std::vector<Suggestion> rank_suggestions(const ThetaTable& theta, const std::string& topic_id, double tau,
                                                const std::set<std::string>& included) {
  auto col_it = std::find(theta.topic_ids.begin(), theta.topic_ids.end(), topic_id);
  if (col_it == theta.topic_ids.end()) throw Error(ErrorCode::UnknownTopic, "unknown topic " + topic_id);
  const auto col = static_cast<std::size_t>(col_it - theta.topic_ids.begin());
  std::vector<Suggestion> out;
  std::set<std::string> seen;
  for (std::size_t d = 0; d < theta.doc_ids.size(); ++d) {
    const std::string& doc = theta.doc_ids[d];
    if (!included.count(doc) || !seen.insert(doc).second) continue;
    double p = theta.rows[d][col];
    if (p >= tau) out.push_back({suggestion_id(doc, topic_id), doc, topic_id, p, SuggestionStatus::Pending});
  }
  std::sort(out.begin(), out.end(), [](const Suggestion& a, const Suggestion& b) {
    return a.probability > b.probability || (a.probability == b.probability && a.doc_id < b.doc_id);
  });
  return out;
}

// Upserts ranked suggestions into the project, keeping reviewer verdicts.
inline void merge_suggestions(ReviewState& review, const std::vector<Suggestion>& ranked) {
  for (const auto& s : ranked) {
    auto it = std::find_if(review.suggestions.begin(), review.suggestions.end(),
                           [&](const Suggestion& x) { return x.id == s.id; });
    if (it == review.suggestions.end()) {
      review.suggestions.push_back(s);
    } else {
      it->probability = s.probability;
    }
  }
}

inline Suggestion& set_suggestion_status(ReviewState& review, const std::string& id, SuggestionStatus status) {
  auto it = std::find_if(review.suggestions.begin(), review.suggestions.end(),
                         [&](const Suggestion& x) { return x.id == id; });
  if (it == review.suggestions.end()) throw Error(ErrorCode::NotFound, "unknown suggestion " + id);
  it->status = status;
  return *it;
}

// Upsert on (doc, intervention, outcome). Returns false when the stored coding
// already had the same direction and attributes.
inline bool record_coding(ReviewState& review, EffectCoding coding) {
  if (!review.framework) throw Error(ErrorCode::NoFramework, "define the framework before coding");
  if (!review.is_included(coding.doc_id)) throw Error(ErrorCode::DocNotIncluded, "document " + coding.doc_id + " is not included");
  if (!review.framework->has_intervention(coding.intervention_id)) {
    throw Error(ErrorCode::UnknownAxisId, "unknown intervention " + coding.intervention_id);
  }
  if (!review.framework->has_outcome(coding.outcome_id)) {
    throw Error(ErrorCode::UnknownAxisId, "unknown outcome " + coding.outcome_id);
  }
  coding.attributes.validate();
  coding.orphaned = false;
  for (auto& c : review.codings) {
    if (!c.same_key(coding)) continue;
    if (c.direction == coding.direction && c.attributes == coding.attributes && c.reviewer == coding.reviewer) {
      return false;
    }
    c = std::move(coding);
    return true;
  }
  review.codings.push_back(std::move(coding));
  return true;
}

}  // namespace egm::core
