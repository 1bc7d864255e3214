#pragma once

#include <algorithm>
#include <random>
#include <string>
#include <vector>

#include "egm/core/egm.hpp"

namespace egm::testkit {

inline core::Framework one_cell_framework() {
  core::Framework fw;
  fw.interventions = {{"i", "I", ""}};
  fw.outcomes = {{"o", "O", ""}};
  return fw;
}

// Review with one included doc per (study type, year) entry, all coded to the single cell.
inline core::ReviewState review_with(const std::vector<std::pair<core::StudyType, int>>& studies,
                                     std::map<std::string, std::optional<int>>& years) {
  core::ReviewState r;
  r.framework = one_cell_framework();
  for (std::size_t n = 0; n < studies.size(); ++n) {
    std::string doc = "doc" + std::to_string(n);
    r.decisions[doc] = {doc, core::Decision::Included, "", "t", ""};
    years[doc] = studies[n].second;
    core::EffectCoding c;
    c.doc_id = doc;
    c.intervention_id = "i";
    c.outcome_id = "o";
    c.direction = static_cast<core::Direction>(n % 3);
    c.attributes.study_type = studies[n].first;
    r.codings.push_back(c);
  }
  return r;
}

struct GapCase {
  std::string name;
  std::vector<std::pair<core::StudyType, int>> studies;
  core::GapClass expected;
};

inline std::vector<GapCase> gap_truth_table() {
  using core::GapClass;
  using core::StudyType;
  const auto ie = StudyType::ImpactEvaluation, sr = StudyType::SystematicReview;
  return {
      {"no studies", {}, GapClass::AbsoluteGap},
      {"four primary, no review", {{ie, 2015}, {ie, 2016}, {StudyType::OtherPrimary, 2018}, {ie, 2020}}, GapClass::SynthesisGap},
      {"four primary, old review", {{ie, 2015}, {ie, 2016}, {ie, 2018}, {ie, 2020}, {sr, 2012}}, GapClass::SynthesisGap},
      {"four primary, recent review", {{ie, 2015}, {ie, 2016}, {ie, 2018}, {ie, 2020}, {sr, 2023}}, GapClass::Populated},
  };
}

// Returns a description of every failing case; empty when all pass. Each case
// is also rebuilt under `shuffles` random coding orders.
inline std::vector<std::string> check_gap_truth_table(std::uint64_t seed, int shuffles) {
  std::vector<std::string> failures;
  std::mt19937_64 rng(seed);
  core::GapConfig cfg;
  cfg.reference_year = 2026;
  for (const auto& gc : gap_truth_table()) {
    std::map<std::string, std::optional<int>> years;
    auto review = review_with(gc.studies, years);
    auto base = core::build_egm(review, years, {}, cfg);
    if (base.cells.at(0).gap_class != gc.expected) {
      failures.push_back(gc.name + ": got " + core::to_string(base.cells[0].gap_class));
    }
    for (int s = 0; s < shuffles; ++s) {
      std::shuffle(review.codings.begin(), review.codings.end(), rng);
      auto again = core::build_egm(review, years, {}, cfg);
      if (!(again == base)) {
        failures.push_back(gc.name + ": result changed under a shuffled coding order");
        break;
      }
    }
  }
  return failures;
}

}  // namespace egm::testkit
