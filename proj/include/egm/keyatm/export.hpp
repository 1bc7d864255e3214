#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "egm/keyatm/model.hpp"
#include "egm/textprep/vocabulary.hpp"

namespace egm::keyatm {

inline void to_json(nlohmann::json& j, const HyperParams& h) {
  j = nlohmann::json{{"alpha", h.alpha}, {"beta", h.beta}, {"beta_key", h.beta_key}, {"gamma1", h.gamma1},
                     {"gamma2", h.gamma2}};
}

inline void from_json(const nlohmann::json& j, HyperParams& h) {
  h.alpha = j.at("alpha").get<std::vector<double>>();
  h.beta = j.at("beta").get<double>();
  h.beta_key = j.at("beta_key").get<double>();
  h.gamma1 = j.at("gamma1").get<double>();
  h.gamma2 = j.at("gamma2").get<double>();
}

NLOHMANN_JSON_SERIALIZE_ENUM(InitMode, {{InitMode::Anchored, "anchored"}, {InitMode::Uniform, "uniform"}})
NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(FitConfig, sweeps, burn_in, seed, chains, init)

// The published form of a fitted chain: everything a reviewer or the UI needs
// without the token-level state.
inline nlohmann::json export_model(const ChainResult& chain, const KeywordSpec& spec, const HyperParams& hp,
                                   const FitConfig& config, const textprep::Vocabulary& vocab,
                                   std::size_t top_n = 10) {
  const ModelState& st = chain.state;
  nlohmann::json topics = nlohmann::json::array();
  const auto phi = estimate_phi(st, hp);
  const auto pi = estimate_pi(st, hp);
  for (std::size_t k = 0; k < st.num_topics; ++k) {
    std::vector<std::string> keywords;
    for (int w : spec.keywords[k]) keywords.push_back(vocab.word(static_cast<std::size_t>(w)));
    nlohmann::json top = nlohmann::json::array();
    for (const auto& wp : top_words(st, hp, k, top_n)) {
      top.push_back({{"word", vocab.word(static_cast<std::size_t>(wp.word))}, {"probability", wp.probability}});
    }
    topics.push_back({{"label", spec.labels[k]},
                      {"keywords", keywords},
                      {"keyword_topic", st.has_keywords(k)},
                      {"pi", pi[k]},
                      {"top_words", top},
                      {"phi", phi[k]}});
  }
  return nlohmann::json{{"topics", topics},
                        {"vocabulary", vocab.words()},
                        {"hyperparameters", hp},
                        {"config", config},
                        {"seed", st.seed},
                        {"sweeps", st.sweeps_done},
                        {"doc_ids", st.doc_ids},
                        {"theta", estimate_theta(st, hp)},
                        {"initial_score", chain.initial_score},
                        {"score_trace", chain.trace}};
}

}  // namespace egm::keyatm
