#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <functional>
#include <random>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "egm/error.hpp"
#include "egm/keyatm/lgamma.hpp"
#include "egm/textprep/vocabulary.hpp"

namespace egm::keyatm {

// Topics in order; each carries a possibly empty set of keyword word indices.
// Topics without keywords behave as plain LDA topics.
struct KeywordSpec {
  std::vector<std::string> labels;
  std::vector<std::vector<int>> keywords;

  std::size_t num_topics() const { return labels.size(); }
  std::size_t num_keyword_topics() const {
    return static_cast<std::size_t>(
        std::count_if(keywords.begin(), keywords.end(), [](const auto& v) { return !v.empty(); }));
  }

  // Sorts and dedupes keyword lists, checks labels and ranges.
  void normalize(std::size_t vocab_size) {
    if (labels.empty()) throw Error(ErrorCode::InvalidArgument, "keyword spec has no topics");
    if (keywords.size() != labels.size()) keywords.resize(labels.size());
    std::set<std::string> seen;
    for (const auto& l : labels) {
      if (!seen.insert(l).second) throw Error(ErrorCode::InvalidArgument, "duplicate topic label " + l);
    }
    for (auto& kw : keywords) {
      std::sort(kw.begin(), kw.end());
      kw.erase(std::unique(kw.begin(), kw.end()), kw.end());
      for (int w : kw) {
        if (w < 0 || static_cast<std::size_t>(w) >= vocab_size) {
          throw Error(ErrorCode::InvalidArgument, "keyword index " + std::to_string(w) + " outside vocabulary");
        }
      }
    }
  }

  // Keyword topics followed by `background` keyword-free topics.
  static KeywordSpec with_background(std::vector<std::string> labels, std::vector<std::vector<int>> keywords,
                                     int background) {
    KeywordSpec s{std::move(labels), std::move(keywords)};
    for (int b = 1; b <= background; ++b) {
      s.labels.push_back("background_" + std::to_string(b));
      s.keywords.emplace_back();
    }
    return s;
  }
};

struct HyperParams {
  std::vector<double> alpha;  // per topic
  double beta = 0.01;         // regular topic-word prior
  double beta_key = 0.1;      // keyword topic-word prior
  double gamma1 = 1.0;        // Beta prior on keyword-switch use
  double gamma2 = 1.0;

  static HyperParams defaults(std::size_t num_topics) {
    HyperParams h;
    h.alpha.assign(num_topics, 50.0 / static_cast<double>(num_topics));
    return h;
  }

  void validate(std::size_t num_topics) const {
    if (alpha.size() != num_topics) {
      throw Error(ErrorCode::InvalidArgument, "alpha has " + std::to_string(alpha.size()) + " entries for " +
                                                  std::to_string(num_topics) + " topics");
    }
    for (double a : alpha) {
      if (!(a > 0)) throw Error(ErrorCode::InvalidArgument, "alpha entries must be positive");
    }
    if (!(beta > 0) || !(beta_key > 0) || !(gamma1 > 0) || !(gamma2 > 0)) {
      throw Error(ErrorCode::InvalidArgument, "beta, beta_key, gamma1 and gamma2 must be positive");
    }
  }

  double alpha_sum() const {
    double s = 0;
    for (double a : alpha) s += a;
    return s;
  }
};

// Anchored starts every keyword token in one of its keyword topics with the
// switch on; uniform draws z over all topics and flips a fair coin for s.
// Uniform starts tend to lose the switch within a few sweeps and settle in a
// label-swapped mode.
enum class InitMode { Anchored, Uniform };

struct FitConfig {
  int sweeps = 1500;
  int burn_in = 500;
  std::uint64_t seed = 0;
  int chains = 1;
  InitMode init = InitMode::Anchored;

  void validate() const {
    if (!(sweeps > burn_in && burn_in >= 0)) throw Error(ErrorCode::InvalidArgument, "need sweeps > burn_in >= 0");
    if (chains < 1) throw Error(ErrorCode::InvalidArgument, "need chains >= 1");
  }
};

using Rng = std::mt19937_64;

// Uniform in [0, 1) from the top 53 bits, independent of the standard
// library's distribution implementation.
inline double uniform01(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Latent assignments plus every count table the collapsed sampler needs.
// Count tables are flat row-major arrays.
struct ModelState {
  std::size_t num_topics = 0;
  std::size_t vocab_size = 0;
  std::vector<std::string> doc_ids;
  std::vector<std::vector<int>> words;  // per document token word indices
  std::vector<std::vector<int>> topic;  // z, 0-based
  std::vector<std::vector<std::uint8_t>> switch_;  // s

  std::vector<int> n_dk;      // D x K
  std::vector<int> n_kw_reg;  // K x V, tokens with s = 0
  std::vector<int> n_kw_key;  // K x V, tokens with s = 1 (non-zero only on keyword words)
  std::vector<int> n_k_s0;    // K
  std::vector<int> n_k_s1;    // K

  std::vector<std::uint8_t> is_keyword;  // K x V membership
  std::vector<int> keyword_count;        // |V_k|

  std::uint64_t seed = 0;
  std::uint64_t sweeps_done = 0;

  std::size_t num_docs() const { return words.size(); }
  int doc_length(std::size_t d) const { return static_cast<int>(words[d].size()); }

  int& dk(std::size_t d, std::size_t k) { return n_dk[d * num_topics + k]; }
  int dk(std::size_t d, std::size_t k) const { return n_dk[d * num_topics + k]; }
  int& reg(std::size_t k, std::size_t w) { return n_kw_reg[k * vocab_size + w]; }
  int reg(std::size_t k, std::size_t w) const { return n_kw_reg[k * vocab_size + w]; }
  int& key(std::size_t k, std::size_t w) { return n_kw_key[k * vocab_size + w]; }
  int key(std::size_t k, std::size_t w) const { return n_kw_key[k * vocab_size + w]; }
  bool keyword_of(std::size_t k, std::size_t w) const { return is_keyword[k * vocab_size + w] != 0; }
  bool has_keywords(std::size_t k) const { return keyword_count[k] > 0; }

  bool operator==(const ModelState&) const = default;
};

// Builds an all-zero state over the corpus with no tokens counted yet; used by
// init_state and by tests that place assignments by hand.
inline ModelState empty_state(const textprep::TokenizedCorpus& corpus, const KeywordSpec& spec) {
  ModelState st;
  st.num_topics = spec.num_topics();
  st.vocab_size = corpus.vocab_size;
  const std::size_t K = st.num_topics, V = st.vocab_size;
  st.is_keyword.assign(K * V, 0);
  st.keyword_count.assign(K, 0);
  for (std::size_t k = 0; k < K; ++k) {
    for (int w : spec.keywords[k]) {
      if (w < 0 || static_cast<std::size_t>(w) >= V) {
        throw Error(ErrorCode::InvalidArgument, "keyword index outside vocabulary");
      }
      if (!st.is_keyword[k * V + w]) {
        st.is_keyword[k * V + w] = 1;
        ++st.keyword_count[k];
      }
    }
  }
  for (const auto& doc : corpus.docs) {
    for (int w : doc.tokens) {
      if (w < 0 || static_cast<std::size_t>(w) >= V) throw Error(ErrorCode::InvalidArgument, "token outside vocabulary");
    }
    st.doc_ids.push_back(doc.id);
    st.words.push_back(doc.tokens);
    st.topic.emplace_back(doc.tokens.size(), 0);
    st.switch_.emplace_back(doc.tokens.size(), 0);
  }
  st.n_dk.assign(st.words.size() * K, 0);
  st.n_kw_reg.assign(K * V, 0);
  st.n_kw_key.assign(K * V, 0);
  st.n_k_s0.assign(K, 0);
  st.n_k_s1.assign(K, 0);
  return st;
}

inline void add_token(ModelState& st, std::size_t d, std::size_t i) {
  const std::size_t k = static_cast<std::size_t>(st.topic[d][i]);
  const std::size_t w = static_cast<std::size_t>(st.words[d][i]);
  ++st.dk(d, k);
  if (st.switch_[d][i]) {
    ++st.key(k, w);
    ++st.n_k_s1[k];
  } else {
    ++st.reg(k, w);
    ++st.n_k_s0[k];
  }
}

inline void remove_token(ModelState& st, std::size_t d, std::size_t i) {
  const std::size_t k = static_cast<std::size_t>(st.topic[d][i]);
  const std::size_t w = static_cast<std::size_t>(st.words[d][i]);
  --st.dk(d, k);
  if (st.switch_[d][i]) {
    --st.key(k, w);
    --st.n_k_s1[k];
  } else {
    --st.reg(k, w);
    --st.n_k_s0[k];
  }
}

// Sets (z, s) of a token and keeps the counts consistent.
inline void assign_token(ModelState& st, std::size_t d, std::size_t i, int k, bool s) {
  remove_token(st, d, i);
  st.topic[d][i] = k;
  st.switch_[d][i] = s ? 1 : 0;
  add_token(st, d, i);
}

inline ModelState init_state(const textprep::TokenizedCorpus& corpus, const KeywordSpec& spec, Rng& rng,
                             InitMode mode = InitMode::Anchored) {
  if (corpus.docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents to model");
  ModelState st = empty_state(corpus, spec);
  const std::size_t K = st.num_topics;
  auto draw = [&](std::size_t n) {
    return std::min<std::size_t>(static_cast<std::size_t>(uniform01(rng) * static_cast<double>(n)), n - 1);
  };
  std::vector<std::size_t> owners;
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    for (std::size_t i = 0; i < st.words[d].size(); ++i) {
      const auto w = static_cast<std::size_t>(st.words[d][i]);
      std::size_t k;
      bool s = false;
      owners.clear();
      if (mode == InitMode::Anchored) {
        for (std::size_t j = 0; j < K; ++j) {
          if (st.keyword_of(j, w)) owners.push_back(j);
        }
      }
      if (!owners.empty()) {
        k = owners[draw(owners.size())];
        s = true;
      } else {
        k = draw(K);
        if (mode == InitMode::Uniform && st.keyword_of(k, w)) s = uniform01(rng) < 0.5;
      }
      st.topic[d][i] = static_cast<int>(k);
      st.switch_[d][i] = s ? 1 : 0;
      add_token(st, d, i);
    }
  }
  return st;
}

inline ModelState init_state(const textprep::TokenizedCorpus& corpus, const KeywordSpec& spec, std::uint64_t seed,
                             InitMode mode = InitMode::Anchored) {
  Rng rng(seed);
  ModelState st = init_state(corpus, spec, rng, mode);
  st.seed = seed;
  return st;
}

// Unnormalized weights for every (topic, switch) pair; index 2k + s.
struct ConditionalWeights {
  std::vector<double> weights;

  double at(std::size_t k, int s) const { return weights[2 * k + static_cast<std::size_t>(s)]; }
  double total() const {
    double t = 0;
    for (double w : weights) t += w;
    return t;
  }
};

// Full conditional of token (d, i). Requires the token to be excluded from
// the counts (remove_token) beforehand.
inline void token_conditional(const ModelState& st, const HyperParams& hp, std::size_t d, std::size_t i,
                              ConditionalWeights& out) {
  const std::size_t K = st.num_topics;
  const std::size_t w = static_cast<std::size_t>(st.words[d][i]);
  const double v_beta = static_cast<double>(st.vocab_size) * hp.beta;
  out.weights.assign(2 * K, 0.0);
  for (std::size_t k = 0; k < K; ++k) {
    const double doc_part = st.dk(d, k) + hp.alpha[k];
    const double s0 = st.n_k_s0[k];
    const double reg_word = (st.reg(k, w) + hp.beta) / (s0 + v_beta);
    if (!st.has_keywords(k)) {
      out.weights[2 * k] = doc_part * reg_word;
      continue;
    }
    const double s1 = st.n_k_s1[k];
    const double switch_norm = s0 + s1 + hp.gamma1 + hp.gamma2;
    out.weights[2 * k] = doc_part * reg_word * (s0 + hp.gamma2) / switch_norm;
    if (st.keyword_of(k, w)) {
      const double key_word = (st.key(k, w) + hp.beta_key) / (s1 + st.keyword_count[k] * hp.beta_key);
      out.weights[2 * k + 1] = doc_part * key_word * (s1 + hp.gamma1) / switch_norm;
    }
  }
}

inline ConditionalWeights token_conditional(const ModelState& st, const HyperParams& hp, std::size_t d,
                                            std::size_t i) {
  ConditionalWeights out;
  token_conditional(st, hp, d, i, out);
  return out;
}

// Collapsed joint log probability of words, topics and switches.
inline double joint_log_score(const ModelState& st, const HyperParams& hp) {
  const std::size_t K = st.num_topics, V = st.vocab_size;
  const double alpha_sum = hp.alpha_sum();
  double score = 0;
  double lg_alpha_sum = log_gamma(alpha_sum);
  std::vector<double> lg_alpha(K);
  for (std::size_t k = 0; k < K; ++k) lg_alpha[k] = log_gamma(hp.alpha[k]);
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    score += lg_alpha_sum - log_gamma(st.doc_length(d) + alpha_sum);
    for (std::size_t k = 0; k < K; ++k) score += log_gamma(st.dk(d, k) + hp.alpha[k]) - lg_alpha[k];
  }
  const double v_beta = static_cast<double>(V) * hp.beta;
  const double lg_beta = log_gamma(hp.beta);
  const double lg_beta_key = log_gamma(hp.beta_key);
  const double lb_prior = log_beta(hp.gamma1, hp.gamma2);
  for (std::size_t k = 0; k < K; ++k) {
    score += log_gamma(v_beta) - log_gamma(st.n_k_s0[k] + v_beta);
    for (std::size_t w = 0; w < V; ++w) {
      int c = st.reg(k, w);
      if (c) score += log_gamma(c + hp.beta) - lg_beta;
    }
    if (!st.has_keywords(k)) continue;
    const double vk_beta = st.keyword_count[k] * hp.beta_key;
    score += log_gamma(vk_beta) - log_gamma(st.n_k_s1[k] + vk_beta);
    for (std::size_t w = 0; w < V; ++w) {
      int c = st.key(k, w);
      if (c && st.keyword_of(k, w)) score += log_gamma(c + hp.beta_key) - lg_beta_key;
    }
    score += log_beta(st.n_k_s1[k] + hp.gamma1, st.n_k_s0[k] + hp.gamma2) - lb_prior;
  }
  return score;
}

// One systematic-scan sweep over all tokens in (d, i) order.
inline void gibbs_sweep(ModelState& st, const HyperParams& hp, Rng& rng) {
  ConditionalWeights cw;
  const std::size_t n_pairs = 2 * st.num_topics;
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    for (std::size_t i = 0; i < st.words[d].size(); ++i) {
      remove_token(st, d, i);
      token_conditional(st, hp, d, i, cw);
      double target = uniform01(rng) * cw.total();
      std::size_t pick = n_pairs;
      double acc = 0;
      for (std::size_t j = 0; j < n_pairs; ++j) {
        if (cw.weights[j] <= 0) continue;
        acc += cw.weights[j];
        pick = j;
        if (target < acc) break;
      }
      st.topic[d][i] = static_cast<int>(pick / 2);
      st.switch_[d][i] = static_cast<std::uint8_t>(pick % 2);
      add_token(st, d, i);
    }
  }
  ++st.sweeps_done;
}

// Lists every violated count invariant; empty when the state is consistent.
inline std::vector<std::string> audit(const ModelState& st) {
  std::vector<std::string> problems;
  const std::size_t K = st.num_topics, V = st.vocab_size;
  ModelState fresh = st;
  std::fill(fresh.n_dk.begin(), fresh.n_dk.end(), 0);
  std::fill(fresh.n_kw_reg.begin(), fresh.n_kw_reg.end(), 0);
  std::fill(fresh.n_kw_key.begin(), fresh.n_kw_key.end(), 0);
  std::fill(fresh.n_k_s0.begin(), fresh.n_k_s0.end(), 0);
  std::fill(fresh.n_k_s1.begin(), fresh.n_k_s1.end(), 0);
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    for (std::size_t i = 0; i < st.words[d].size(); ++i) {
      int k = st.topic[d][i];
      if (k < 0 || static_cast<std::size_t>(k) >= K) {
        problems.push_back("token (" + std::to_string(d) + "," + std::to_string(i) + ") has topic out of range");
        continue;
      }
      if (st.switch_[d][i] && !st.keyword_of(static_cast<std::size_t>(k), static_cast<std::size_t>(st.words[d][i]))) {
        problems.push_back("token (" + std::to_string(d) + "," + std::to_string(i) +
                           ") uses the keyword switch on a non-keyword word");
      }
      add_token(fresh, d, i);
    }
  }
  if (fresh.n_dk != st.n_dk) problems.push_back("n_dk disagrees with assignments");
  if (fresh.n_kw_reg != st.n_kw_reg) problems.push_back("n_kw_reg disagrees with assignments");
  if (fresh.n_kw_key != st.n_kw_key) problems.push_back("n_kw_key disagrees with assignments");
  if (fresh.n_k_s0 != st.n_k_s0) problems.push_back("n_k_s0 disagrees with assignments");
  if (fresh.n_k_s1 != st.n_k_s1) problems.push_back("n_k_s1 disagrees with assignments");
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    long sum = 0;
    for (std::size_t k = 0; k < K; ++k) sum += st.dk(d, k);
    if (sum != st.doc_length(d)) problems.push_back("doc " + std::to_string(d) + " topic counts do not sum to length");
  }
  for (std::size_t k = 0; k < K; ++k) {
    long reg = 0, key = 0;
    for (std::size_t w = 0; w < V; ++w) {
      reg += st.reg(k, w);
      key += st.key(k, w);
      if (st.key(k, w) > 0 && !st.keyword_of(k, w)) {
        problems.push_back("topic " + std::to_string(k) + " has keyword counts on non-keyword word " + std::to_string(w));
      }
      if (st.reg(k, w) < 0 || st.key(k, w) < 0) problems.push_back("negative topic-word count");
    }
    if (reg != st.n_k_s0[k]) problems.push_back("topic " + std::to_string(k) + " regular total mismatch");
    if (key != st.n_k_s1[k]) problems.push_back("topic " + std::to_string(k) + " keyword total mismatch");
    if (!st.has_keywords(k) && st.n_k_s1[k] != 0) {
      problems.push_back("keyword-free topic " + std::to_string(k) + " has switch-on tokens");
    }
  }
  return problems;
}

struct ChainResult {
  ModelState state;
  double initial_score = 0;
  std::vector<double> trace;  // joint_log_score after each sweep
};

struct FitResult {
  std::vector<ChainResult> chains;
  const ChainResult& primary() const { return chains.front(); }
};

// Called after each completed sweep with (chain index, sweeps done).
using SweepObserver = std::function<void(std::size_t, int)>;

inline ChainResult run_chain(const textprep::TokenizedCorpus& corpus, const KeywordSpec& spec, const HyperParams& hp,
                             int sweeps, std::uint64_t seed, std::size_t chain_index = 0,
                             const SweepObserver& observer = {}, InitMode mode = InitMode::Anchored) {
  Rng rng(seed);
  ChainResult out{init_state(corpus, spec, rng, mode), 0, {}};
  out.state.seed = seed;
  out.initial_score = joint_log_score(out.state, hp);
  out.trace.reserve(static_cast<std::size_t>(sweeps));
  for (int s = 0; s < sweeps; ++s) {
    gibbs_sweep(out.state, hp, rng);
    out.trace.push_back(joint_log_score(out.state, hp));
    if (observer) observer(chain_index, s + 1);
  }
  return out;
}

// Chain c is seeded with config.seed + c; chains run on separate threads.
inline FitResult fit(const textprep::TokenizedCorpus& corpus, KeywordSpec spec, const HyperParams& hp,
                     const FitConfig& config, const SweepObserver& observer = {}) {
  config.validate();
  spec.normalize(corpus.vocab_size);
  hp.validate(spec.num_topics());
  if (corpus.docs.empty()) throw Error(ErrorCode::EmptyCorpus, "no documents to model");
  FitResult result;
  result.chains.resize(static_cast<std::size_t>(config.chains));
  if (config.chains == 1) {
    result.chains[0] = run_chain(corpus, spec, hp, config.sweeps, config.seed, 0, observer, config.init);
    return result;
  }
  std::vector<std::exception_ptr> errors(result.chains.size());
  {
    std::vector<std::jthread> threads;
    for (std::size_t c = 0; c < result.chains.size(); ++c) {
      threads.emplace_back([&, c] {
        try {
          result.chains[c] = run_chain(corpus, spec, hp, config.sweeps, config.seed + c, c, observer, config.init);
        } catch (...) {
          errors[c] = std::current_exception();
        }
      });
    }
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return result;
}

// Document-topic proportions, one row per document.
inline std::vector<std::vector<double>> estimate_theta(const ModelState& st, const HyperParams& hp) {
  const double alpha_sum = hp.alpha_sum();
  std::vector<std::vector<double>> theta(st.num_docs(), std::vector<double>(st.num_topics));
  for (std::size_t d = 0; d < st.num_docs(); ++d) {
    const double denom = st.doc_length(d) + alpha_sum;
    for (std::size_t k = 0; k < st.num_topics; ++k) theta[d][k] = (st.dk(d, k) + hp.alpha[k]) / denom;
  }
  return theta;
}

// Posterior mean keyword-switch probability; 0 for keyword-free topics.
inline std::vector<double> estimate_pi(const ModelState& st, const HyperParams& hp) {
  std::vector<double> pi(st.num_topics, 0.0);
  for (std::size_t k = 0; k < st.num_topics; ++k) {
    if (!st.has_keywords(k)) continue;
    pi[k] = (st.n_k_s1[k] + hp.gamma1) / (st.n_k_s0[k] + st.n_k_s1[k] + hp.gamma1 + hp.gamma2);
  }
  return pi;
}

// Blended topic-word distributions: keyword topics mix the keyword and
// regular distributions by pi; keyword-free topics return the regular one.
inline std::vector<std::vector<double>> estimate_phi(const ModelState& st, const HyperParams& hp) {
  const std::size_t K = st.num_topics, V = st.vocab_size;
  const double v_beta = static_cast<double>(V) * hp.beta;
  const auto pi = estimate_pi(st, hp);
  std::vector<std::vector<double>> phi(K, std::vector<double>(V));
  for (std::size_t k = 0; k < K; ++k) {
    const double reg_denom = st.n_k_s0[k] + v_beta;
    const bool keyed = st.has_keywords(k);
    const double key_denom = keyed ? st.n_k_s1[k] + st.keyword_count[k] * hp.beta_key : 1.0;
    for (std::size_t w = 0; w < V; ++w) {
      double regular = (st.reg(k, w) + hp.beta) / reg_denom;
      if (!keyed) {
        phi[k][w] = regular;
        continue;
      }
      double keyword = st.keyword_of(k, w) ? (st.key(k, w) + hp.beta_key) / key_denom : 0.0;
      phi[k][w] = pi[k] * keyword + (1.0 - pi[k]) * regular;
    }
  }
  return phi;
}

struct WordProbability {
  int word;
  double probability;
};

// Highest blended-probability words of topic k; ties go to the lower index.
inline std::vector<WordProbability> top_words(const ModelState& st, const HyperParams& hp, std::size_t k,
                                              std::size_t n) {
  if (k >= st.num_topics) throw Error(ErrorCode::UnknownTopic, "topic index " + std::to_string(k));
  if (n == 0) return {};
  const auto phi = estimate_phi(st, hp);
  std::vector<WordProbability> all;
  all.reserve(st.vocab_size);
  for (std::size_t w = 0; w < st.vocab_size; ++w) all.push_back({static_cast<int>(w), phi[k][w]});
  n = std::min(n, all.size());
  std::partial_sort(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(n), all.end(), [](const auto& a, const auto& b) {
    return a.probability > b.probability || (a.probability == b.probability && a.word < b.word);
  });
  all.resize(n);
  return all;
}

}  // namespace egm::keyatm
