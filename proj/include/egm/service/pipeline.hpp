#pragma once

#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/core/egm.hpp"
#include "egm/core/review.hpp"
#include "egm/error.hpp"
#include "egm/ingest/import.hpp"
#include "egm/ingest/query.hpp"
#include "egm/ingest/search.hpp"
#include "egm/keyatm/export.hpp"
#include "egm/keyatm/model.hpp"
#include "egm/service/project.hpp"
#include "egm/textprep/keywords.hpp"
#include "egm/textprep/tokenize.hpp"
#include "egm/textprep/vocabulary.hpp"

namespace egm::service {

inline void set_framework(Project& p, core::Framework fw) {
  fw.validate();
  for (const auto& c : p.review.codings) {
    if (!fw.has_intervention(c.intervention_id) || !fw.has_outcome(c.outcome_id)) {
      throw Error(ErrorCode::InvalidArgument, "framework change would orphan the coding for " + c.doc_id);
    }
  }
  std::set<std::string> topic_ids;
  for (const auto& item : fw.topic_items()) topic_ids.insert(item.id);
  for (const auto& s : p.review.suggestions) {
    if (!topic_ids.count(s.topic_id)) {
      throw Error(ErrorCode::InvalidArgument, "framework change would drop topic " + s.topic_id + " used by suggestions");
    }
  }
  p.review.framework = std::move(fw);
}

inline void set_criteria(Project& p, Criteria c) {
  c.filters.validate();
  if (!ingest::trim(c.query).empty()) ingest::parse_query(c.query);
  p.criteria = std::move(c);
}

// Keyword topics are named by ids on the framework's topic axis.
inline void set_keywords(Project& p, std::vector<textprep::TopicKeywords> kws) {
  std::set<std::string> seen;
  for (const auto& t : kws) {
    if (!seen.insert(t.topic).second) throw Error(ErrorCode::InvalidArgument, "duplicate keyword topic " + t.topic);
    if (p.review.framework) {
      const auto& axis = p.review.framework->topic_items();
      if (!core::Framework::find(axis, t.topic)) {
        throw Error(ErrorCode::UnknownAxisId, "keyword topic " + t.topic + " is not on the framework's topic axis");
      }
    }
  }
  p.keywords = std::move(kws);
}

inline void set_gap_config(Project& p, core::GapConfig g) {
  g.validate();
  p.gap_config = g;
}

inline std::size_t import_into_project(Project& p, const std::string& text, ingest::ImportFormat format) {
  return ingest::import_records(p.corpus, p.merge_log, p.retired_ids(), text, format);
}

inline bool screen(Project& p, core::ScreeningDecision d) {
  return core::record_screening(p.review, p.doc_ids(), std::move(d));
}

inline bool code(Project& p, core::EffectCoding c) {
  if (!p.find_doc(c.doc_id)) throw Error(ErrorCode::UnknownDoc, "unknown document " + c.doc_id);
  return core::record_coding(p.review, std::move(c));
}

// Appends the outcome of a search run; records are re-merged against the
// current corpus since it may have grown while the search ran.
inline std::size_t commit_search(Project& p, ingest::SearchOutcome outcome) {
  auto merged = ingest::merge_into_corpus(p.corpus, std::move(outcome.added), p.retired_ids());
  p.merge_log.insert(p.merge_log.end(), outcome.merge_log.begin(), outcome.merge_log.end());
  p.merge_log.insert(p.merge_log.end(), merged.log.begin(), merged.log.end());
  p.search_runs.push_back(std::move(outcome.run));
  return merged.added.size();
}

inline std::string next_run_id(const Project& p) { return "run-" + std::to_string(p.search_runs.size() + 1); }

inline keyatm::HyperParams hyper_from_settings(const ModelSettings& s, std::size_t num_topics) {
  keyatm::HyperParams h = keyatm::HyperParams::defaults(num_topics);
  if (s.alpha) h.alpha.assign(num_topics, *s.alpha);
  h.beta = s.beta;
  h.beta_key = s.beta_key;
  h.gamma1 = s.gamma1;
  h.gamma2 = s.gamma2;
  return h;
}

struct FitArtifacts {
  nlohmann::json model;
};

// Fits the keyword-assisted model on the included documents (title +
// abstract) of a project snapshot.
inline FitArtifacts fit_project(const Project& p, const ModelSettings& settings,
                                const keyatm::SweepObserver& observer = {}) {
  if (p.keywords.empty()) throw Error(ErrorCode::InvalidArgument, "no keyword topics defined");
  const auto included = p.review.included_docs();
  std::vector<textprep::NamedTokens> docs;
  for (const auto& r : p.corpus) {
    if (!included.count(r.id)) continue;
    docs.push_back({r.id, textprep::tokenize(r.title + "\n" + r.abstract)});
  }
  if (docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no included documents to model");

  textprep::VocabularyOptions vopts;
  vopts.min_df = settings.min_df;
  vopts.max_df_ratio = settings.max_df_ratio;
  for (const auto& t : p.keywords) {
    for (const auto& kw : t.keywords) {
      auto toks = textprep::tokenize(kw, textprep::TokenizeOptions::without_stopwords());
      if (toks.size() == 1) vopts.forced_words.insert(toks.front());
    }
  }
  std::vector<std::vector<std::string>> token_lists;
  for (const auto& d : docs) token_lists.push_back(d.tokens);
  const auto vocab = textprep::build_vocabulary(token_lists, vopts);
  const auto corpus = textprep::vectorize(docs, vocab);
  if (corpus.docs.empty()) throw Error(ErrorCode::EmptyCorpus, "every included document is empty after vectorizing");
  const auto report = textprep::validate_keywords(p.keywords, vocab);

  std::vector<std::string> labels;
  for (const auto& t : p.keywords) labels.push_back(t.topic);
  auto spec = keyatm::KeywordSpec::with_background(labels, report.keyword_indices(), settings.background_topics);
  spec.normalize(vocab.size());
  const auto hp = hyper_from_settings(settings, spec.num_topics());
  const auto result = keyatm::fit(corpus, spec, hp, settings.fit, observer);

  nlohmann::json model = keyatm::export_model(result.primary(), spec, hp, settings.fit, vocab);
  model["excluded_docs"] = corpus.excluded;
  model["keyword_warnings"] = report.warnings;
  nlohmann::json absent = nlohmann::json::object();
  for (const auto& t : report.topics) {
    if (!t.absent.empty() || !t.multiword.empty()) absent[t.topic] = {{"absent", t.absent}, {"multiword", t.multiword}};
  }
  model["keyword_report"] = absent;
  if (result.chains.size() > 1) {
    nlohmann::json finals = nlohmann::json::array();
    for (const auto& c : result.chains) finals.push_back(c.trace.back());
    model["chain_final_scores"] = finals;
  }
  return {std::move(model)};
}

inline core::ThetaTable theta_from_model(const nlohmann::json& model) {
  if (!model.is_object()) throw Error(ErrorCode::NotFound, "no fitted model");
  core::ThetaTable t;
  t.doc_ids = model.at("doc_ids").get<std::vector<std::string>>();
  for (const auto& topic : model.at("topics")) t.topic_ids.push_back(topic.at("label").get<std::string>());
  t.rows = model.at("theta").get<std::vector<std::vector<double>>>();
  return t;
}

inline std::vector<std::string> keyword_topic_labels(const nlohmann::json& model) {
  std::vector<std::string> out;
  for (const auto& topic : model.at("topics")) {
    if (topic.value("keyword_topic", false)) out.push_back(topic.at("label").get<std::string>());
  }
  return out;
}

// Publishes a fit and refreshes suggestions for every keyword topic.
inline void commit_fit(Project& p, FitArtifacts artifacts) {
  p.model = std::move(artifacts.model);
  const auto theta = theta_from_model(p.model);
  const auto included = p.review.included_docs();
  for (const auto& label : keyword_topic_labels(p.model)) {
    core::merge_suggestions(p.review, core::rank_suggestions(theta, label, p.model_settings.suggestion_tau, included));
  }
}

// Ranked suggestions at an arbitrary threshold, carrying any stored verdicts.
inline std::vector<core::Suggestion> suggestions_for(const Project& p, const std::string& topic, double tau) {
  auto ranked = core::rank_suggestions(theta_from_model(p.model), topic, tau, p.review.included_docs());
  for (auto& s : ranked) {
    for (const auto& stored : p.review.suggestions) {
      if (stored.id == s.id) s.status = stored.status;
    }
  }
  return ranked;
}

// Confirms or rejects a suggestion; one that was ranked but never stored
// (below the publishing threshold) is created on first verdict.
inline core::Suggestion update_suggestion(Project& p, const std::string& id, core::SuggestionStatus status) {
  for (const auto& s : p.review.suggestions) {
    if (s.id == id) return core::set_suggestion_status(p.review, id, status);
  }
  auto sep = id.rfind('~');
  if (sep == std::string::npos || !p.model.is_object()) throw Error(ErrorCode::NotFound, "unknown suggestion " + id);
  for (auto s : suggestions_for(p, id.substr(sep + 1), 0.0)) {
    if (s.id != id) continue;
    s.status = status;
    p.review.suggestions.push_back(s);
    return s;
  }
  throw Error(ErrorCode::NotFound, "unknown suggestion " + id);
}

// Provenance for the exported map: queries, provider counts, model and gap
// settings. Wall-clock timestamps are left out so exports are reproducible.
inline nlohmann::json methodology_note(const Project& p) {
  nlohmann::json runs = nlohmann::json::array();
  for (const auto& r : p.search_runs) {
    nlohmann::json counts = nlohmann::json::object();
    for (const auto& [name, c] : r.counts) {
      counts[name] = {{"fetched", c.fetched}, {"kept", c.kept}, {"failed", c.failed}, {"truncated", c.truncated}};
    }
    runs.push_back({{"id", r.id}, {"query", r.query}, {"filters", r.filters}, {"provider_counts", counts},
                    {"status", r.status}});
  }
  nlohmann::json model = nullptr;
  if (p.model.is_object()) {
    model = {{"hyperparameters", p.model.at("hyperparameters")},
             {"config", p.model.at("config")},
             {"topics", keyword_topic_labels(p.model)},
             {"documents", p.model.at("doc_ids").size()}};
  }
  std::size_t included = p.review.included_docs().size();
  return nlohmann::json{{"inclusion_criteria", p.criteria},
                        {"search_runs", runs},
                        {"screening", {{"records", p.corpus.size()},
                                       {"included", included},
                                       {"excluded", p.review.decisions.size() - included}}},
                        {"keywords", keywords_to_json(p.keywords)},
                        {"model", model},
                        {"model_settings", p.model_settings},
                        {"gap_config", p.gap_config},
                        {"effect_direction", "coded by human reviewers"}};
}

inline core::EgmMatrix project_egm(const Project& p, const core::EgmFilters& filters = {}) {
  return core::build_egm(p.review, p.doc_years(), filters, p.gap_config, methodology_note(p));
}

}  // namespace egm::service
