#pragma once

#include <algorithm>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/core/attributes.hpp"
#include "egm/core/framework.hpp"
#include "egm/core/review.hpp"
#include "egm/csv.hpp"
#include "egm/error.hpp"

namespace egm::core {

enum class GapClass { AbsoluteGap, SynthesisGap, Populated };

NLOHMANN_JSON_SERIALIZE_ENUM(GapClass, {{GapClass::AbsoluteGap, "absolute_gap"},
                                        {GapClass::SynthesisGap, "synthesis_gap"},
                                        {GapClass::Populated, "populated"}})

inline std::string to_string(GapClass g) { return nlohmann::json(g).get<std::string>(); }

struct GapConfig {
  int absolute_max = 1;
  int synthesis_min = 2;
  int sr_recency_years = 5;
  int reference_year = 2026;

  void validate() const {
    if (absolute_max < 0 || synthesis_min < 0 || sr_recency_years < 0 || reference_year < 0) {
      throw Error(ErrorCode::InvalidArgument, "gap thresholds must be non-negative");
    }
    if (absolute_max >= synthesis_min) throw Error(ErrorCode::InvalidArgument, "absolute_max must be below synthesis_min");
  }

  bool operator==(const GapConfig&) const = default;
};

inline void to_json(nlohmann::json& j, const GapConfig& g) {
  j = nlohmann::json{{"absolute_max", g.absolute_max},
                     {"synthesis_min", g.synthesis_min},
                     {"sr_recency_years", g.sr_recency_years},
                     {"reference_year", g.reference_year}};
}

inline void from_json(const nlohmann::json& j, GapConfig& g) {
  GapConfig d;
  g.absolute_max = j.value("absolute_max", d.absolute_max);
  g.synthesis_min = j.value("synthesis_min", d.synthesis_min);
  g.sr_recency_years = j.value("sr_recency_years", d.sr_recency_years);
  g.reference_year = j.value("reference_year", d.reference_year);
  g.validate();
}

// primary = impact evaluations + other primary studies; recent_reviews =
// systematic reviews published within the recency window.
inline GapClass classify_cell(int primary, int recent_reviews, const GapConfig& cfg) {
  if (recent_reviews == 0 && primary <= cfg.absolute_max) return GapClass::AbsoluteGap;
  if (recent_reviews == 0 && primary >= cfg.synthesis_min) return GapClass::SynthesisGap;
  return GapClass::Populated;
}

struct CellStudy {
  std::string doc_id;
  Direction direction = Direction::Positive;
  StudyType study_type = StudyType::ImpactEvaluation;
  std::optional<int> year;

  bool operator==(const CellStudy&) const = default;
};

struct EgmCell {
  std::string intervention_id;
  std::string outcome_id;
  int n_impact_evaluations = 0;
  int n_systematic_reviews = 0;
  int n_other_primary = 0;
  int n_positive = 0;
  int n_negative = 0;
  int n_non_significant = 0;
  std::optional<int> newest_sr_year;
  int n_recent_systematic_reviews = 0;
  GapClass gap_class = GapClass::AbsoluteGap;
  std::vector<CellStudy> studies;

  int total() const { return n_impact_evaluations + n_systematic_reviews + n_other_primary; }
  int primary() const { return n_impact_evaluations + n_other_primary; }

  bool operator==(const EgmCell&) const = default;
};

struct EgmFilters {
  std::optional<std::string> geography;
  std::optional<StudyType> study_type;
  std::optional<std::string> population;
  std::optional<Quality> quality;

  bool admits(const StudyAttributes& a) const {
    if (geography && a.geography != geography) return false;
    if (study_type && a.study_type != *study_type) return false;
    if (population) {
      if (!a.population) return false;
      std::string x = *a.population, y = *population;
      for (auto* s : {&x, &y}) {
        for (auto& c : *s) {
          if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
        }
      }
      if (x != y) return false;
    }
    if (quality && a.quality_rating != quality) return false;
    return true;
  }

  bool operator==(const EgmFilters&) const = default;
};

struct EgmMatrix {
  std::vector<AxisItem> interventions;
  std::vector<AxisItem> outcomes;
  std::vector<EgmCell> cells;  // row-major: intervention, then outcome
  GapConfig gap_config;
  EgmFilters filters;
  nlohmann::json methodology = nlohmann::json::object();

  const EgmCell& cell(std::size_t i, std::size_t o) const { return cells.at(i * outcomes.size() + o); }

  bool operator==(const EgmMatrix&) const = default;
};

inline void to_json(nlohmann::json& j, const CellStudy& s) {
  j = nlohmann::json{{"doc", s.doc_id}, {"direction", s.direction}, {"study_type", s.study_type}};
  j["year"] = s.year ? nlohmann::json(*s.year) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, CellStudy& s) {
  s.doc_id = j.at("doc").get<std::string>();
  s.direction = parse_direction(j.at("direction").get<std::string>());
  s.study_type = parse_study_type(j.at("study_type").get<std::string>());
  s.year = j.at("year").is_null() ? std::nullopt : std::optional<int>(j.at("year").get<int>());
}

inline void to_json(nlohmann::json& j, const EgmCell& c) {
  j = nlohmann::json{{"intervention_id", c.intervention_id},
                     {"outcome_id", c.outcome_id},
                     {"n_impact_evaluations", c.n_impact_evaluations},
                     {"n_systematic_reviews", c.n_systematic_reviews},
                     {"n_other_primary", c.n_other_primary},
                     {"n_positive", c.n_positive},
                     {"n_negative", c.n_negative},
                     {"n_non_significant", c.n_non_significant},
                     {"n_recent_systematic_reviews", c.n_recent_systematic_reviews},
                     {"total", c.total()},
                     {"gap_class", c.gap_class},
                     {"studies", c.studies}};
  j["newest_sr_year"] = c.newest_sr_year ? nlohmann::json(*c.newest_sr_year) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, EgmCell& c) {
  c.intervention_id = j.at("intervention_id").get<std::string>();
  c.outcome_id = j.at("outcome_id").get<std::string>();
  c.n_impact_evaluations = j.at("n_impact_evaluations").get<int>();
  c.n_systematic_reviews = j.at("n_systematic_reviews").get<int>();
  c.n_other_primary = j.at("n_other_primary").get<int>();
  c.n_positive = j.at("n_positive").get<int>();
  c.n_negative = j.at("n_negative").get<int>();
  c.n_non_significant = j.at("n_non_significant").get<int>();
  c.n_recent_systematic_reviews = j.value("n_recent_systematic_reviews", 0);
  c.newest_sr_year = j.at("newest_sr_year").is_null() ? std::nullopt
                                                      : std::optional<int>(j.at("newest_sr_year").get<int>());
  c.gap_class = j.at("gap_class").get<GapClass>();
  c.studies = j.value("studies", std::vector<CellStudy>{});
}

inline nlohmann::json filters_to_json(const EgmFilters& f) {
  nlohmann::json j = nlohmann::json::object();
  j["geography"] = f.geography ? nlohmann::json(*f.geography) : nlohmann::json(nullptr);
  j["study_type"] = f.study_type ? nlohmann::json(*f.study_type) : nlohmann::json(nullptr);
  j["population"] = f.population ? nlohmann::json(*f.population) : nlohmann::json(nullptr);
  j["quality"] = f.quality ? nlohmann::json(*f.quality) : nlohmann::json(nullptr);
  return j;
}

inline EgmFilters filters_from_json(const nlohmann::json& j) {
  EgmFilters f;
  auto text = [&](const char* k) -> std::optional<std::string> {
    auto it = j.find(k);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  f.geography = text("geography");
  if (auto s = text("study_type")) f.study_type = parse_study_type(*s);
  f.population = text("population");
  if (auto q = text("quality")) f.quality = parse_quality(*q);
  return f;
}

inline nlohmann::json matrix_to_json(const EgmMatrix& m) {
  return nlohmann::json{{"interventions", m.interventions},
                        {"outcomes", m.outcomes},
                        {"cells", m.cells},
                        {"gap_config", m.gap_config},
                        {"filters", filters_to_json(m.filters)},
                        {"methodology", m.methodology}};
}

inline EgmMatrix matrix_from_json(const nlohmann::json& j) {
  EgmMatrix m;
  m.interventions = j.at("interventions").get<std::vector<AxisItem>>();
  m.outcomes = j.at("outcomes").get<std::vector<AxisItem>>();
  m.cells = j.at("cells").get<std::vector<EgmCell>>();
  m.gap_config = j.at("gap_config").get<GapConfig>();
  m.filters = filters_from_json(j.at("filters"));
  m.methodology = j.value("methodology", nlohmann::json::object());
  return m;
}

// Tallies the non-orphaned codings that pass the filters into one cell per
// intervention x outcome and classifies every cell. Study lists are sorted by
// doc id so the result does not depend on coding order.
inline EgmMatrix build_egm(const ReviewState& review, const std::map<std::string, std::optional<int>>& doc_years,
                           const EgmFilters& filters, const GapConfig& gap_cfg,
                           nlohmann::json methodology = nlohmann::json::object()) {
  if (!review.framework) throw Error(ErrorCode::NoFramework, "project has no framework");
  gap_cfg.validate();
  const Framework& fw = *review.framework;
  EgmMatrix m;
  m.interventions = fw.interventions;
  m.outcomes = fw.outcomes;
  m.gap_config = gap_cfg;
  m.filters = filters;
  m.methodology = std::move(methodology);
  std::map<std::pair<std::string, std::string>, std::size_t> index;
  for (const auto& i : fw.interventions) {
    for (const auto& o : fw.outcomes) {
      index[{i.id, o.id}] = m.cells.size();
      EgmCell c;
      c.intervention_id = i.id;
      c.outcome_id = o.id;
      m.cells.push_back(std::move(c));
    }
  }
  for (const auto& coding : review.codings) {
    if (coding.orphaned || !review.is_included(coding.doc_id)) continue;
    if (!filters.admits(coding.attributes)) continue;
    auto it = index.find({coding.intervention_id, coding.outcome_id});
    if (it == index.end()) continue;
    EgmCell& c = m.cells[it->second];
    std::optional<int> year;
    if (auto y = doc_years.find(coding.doc_id); y != doc_years.end()) year = y->second;
    switch (coding.attributes.study_type) {
      case StudyType::ImpactEvaluation: ++c.n_impact_evaluations; break;
      case StudyType::OtherPrimary: ++c.n_other_primary; break;
      case StudyType::SystematicReview:
        ++c.n_systematic_reviews;
        if (year) {
          if (!c.newest_sr_year || *year > *c.newest_sr_year) c.newest_sr_year = year;
          if (*year >= gap_cfg.reference_year - gap_cfg.sr_recency_years) ++c.n_recent_systematic_reviews;
        }
        break;
    }
    switch (coding.direction) {
      case Direction::Positive: ++c.n_positive; break;
      case Direction::Negative: ++c.n_negative; break;
      case Direction::NonSignificant: ++c.n_non_significant; break;
    }
    c.studies.push_back({coding.doc_id, coding.direction, coding.attributes.study_type, year});
  }
  for (auto& c : m.cells) {
    std::sort(c.studies.begin(), c.studies.end(), [](const CellStudy& a, const CellStudy& b) { return a.doc_id < b.doc_id; });
    c.gap_class = classify_cell(c.primary(), c.n_recent_systematic_reviews, gap_cfg);
  }
  return m;
}

enum class ExportFormat { Json, Csv, Html };

inline ExportFormat parse_export_format(const std::string& s) {
  if (s == "json") return ExportFormat::Json;
  if (s == "csv") return ExportFormat::Csv;
  if (s == "html") return ExportFormat::Html;
  throw Error(ErrorCode::InvalidArgument, "unknown export format '" + s + "' (expected json, csv or html)");
}

inline std::string export_csv(const EgmMatrix& m) {
  std::string out =
      "intervention_id,intervention_label,outcome_id,outcome_label,n_impact_evaluations,n_systematic_reviews,"
      "n_other_primary,n_positive,n_negative,n_non_significant,newest_sr_year,gap_class\n";
  for (std::size_t i = 0; i < m.interventions.size(); ++i) {
    for (std::size_t o = 0; o < m.outcomes.size(); ++o) {
      const EgmCell& c = m.cell(i, o);
      out += csv::join({m.interventions[i].id, m.interventions[i].label, m.outcomes[o].id, m.outcomes[o].label,
                        std::to_string(c.n_impact_evaluations), std::to_string(c.n_systematic_reviews),
                        std::to_string(c.n_other_primary), std::to_string(c.n_positive),
                        std::to_string(c.n_negative), std::to_string(c.n_non_significant),
                        c.newest_sr_year ? std::to_string(*c.newest_sr_year) : "", to_string(c.gap_class)});
      out += "\n";
    }
  }
  return out;
}

inline std::string html_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&#39;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

// Standalone read-only heatmap; cell details are embedded as data attributes
// and revealed by a small inline script.
inline std::string export_html(const EgmMatrix& m) {
  std::ostringstream h;
  h << "<!DOCTYPE html>\n<html lang=\"en\">\n<head>\n<meta charset=\"utf-8\">\n"
    << "<title>Evidence Gap Map</title>\n<style>\n"
    << "body{font-family:sans-serif;margin:2em}table{border-collapse:collapse}"
    << "th,td{border:1px solid #999;padding:.4em;text-align:center}"
    << "td.egm-cell{cursor:pointer;min-width:4em}"
    << ".absolute_gap{background:#f4f4f4;color:#777}.synthesis_gap{background:#f6c85f}"
    << ".populated{background:#6fa86f;color:#fff}.legend span{display:inline-block;padding:.2em .6em;margin-right:.5em}"
    << "#detail{margin-top:1em;white-space:pre-line}\n</style>\n</head>\n<body>\n"
    << "<h1>Evidence Gap Map</h1>\n<div class=\"legend\">"
    << "<span class=\"absolute_gap\">absolute gap</span><span class=\"synthesis_gap\">synthesis gap</span>"
    << "<span class=\"populated\">populated</span></div>\n"
    << "<table>\n<thead><tr><th>Intervention \\ Outcome</th>";
  for (const auto& o : m.outcomes) h << "<th>" << html_escape(o.label.empty() ? o.id : o.label) << "</th>";
  h << "</tr></thead>\n<tbody>\n";
  for (std::size_t i = 0; i < m.interventions.size(); ++i) {
    const auto& iv = m.interventions[i];
    h << "<tr><th>" << html_escape(iv.label.empty() ? iv.id : iv.label) << "</th>";
    for (std::size_t o = 0; o < m.outcomes.size(); ++o) {
      const EgmCell& c = m.cell(i, o);
      std::string detail;
      for (const auto& s : c.studies) detail += s.doc_id + " (" + to_string(s.study_type) + ", " + to_string(s.direction) + ")\n";
      h << "<td class=\"egm-cell " << to_string(c.gap_class) << "\" data-intervention=\"" << html_escape(c.intervention_id)
        << "\" data-outcome=\"" << html_escape(c.outcome_id) << "\" data-total=\"" << c.total()
        << "\" data-studies=\"" << html_escape(detail) << "\" title=\"+" << c.n_positive << " / -" << c.n_negative
        << " / ns " << c.n_non_significant << "\">" << c.total() << "</td>";
    }
    h << "</tr>\n";
  }
  h << "</tbody>\n</table>\n<div id=\"detail\"></div>\n<script>\n"
    << "document.querySelectorAll('td.egm-cell').forEach(function(td){td.addEventListener('click',function(){"
    << "document.getElementById('detail').textContent=td.dataset.intervention+' x '+td.dataset.outcome+': '"
    << "+td.dataset.total+' studies\\n'+td.dataset.studies;});});\n</script>\n"
    << "<script type=\"application/json\" id=\"egm-data\">" << html_escape(matrix_to_json(m).dump()) << "</script>\n"
    << "</body>\n</html>\n";
  return h.str();
}

inline std::string export_egm(const EgmMatrix& m, ExportFormat format) {
  switch (format) {
    case ExportFormat::Json: return matrix_to_json(m).dump(2) + "\n";
    case ExportFormat::Csv: return export_csv(m);
    case ExportFormat::Html: return export_html(m);
  }
  return {};
}

}  // namespace egm::core
