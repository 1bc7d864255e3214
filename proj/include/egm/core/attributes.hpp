#pragma once

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <string_view>

#include <json.hpp>

#include "egm/error.hpp"

namespace egm::core {

enum class StudyType { ImpactEvaluation, SystematicReview, OtherPrimary };
enum class Direction { Positive, Negative, NonSignificant };
enum class StudyStatus { Completed, Ongoing };
enum class Quality { Low, Medium, High };

NLOHMANN_JSON_SERIALIZE_ENUM(StudyType, {{StudyType::ImpactEvaluation, "impact_evaluation"},
                                         {StudyType::SystematicReview, "systematic_review"},
                                         {StudyType::OtherPrimary, "other_primary"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Direction, {{Direction::Positive, "positive"},
                                         {Direction::Negative, "negative"},
                                         {Direction::NonSignificant, "non_significant"}})
NLOHMANN_JSON_SERIALIZE_ENUM(StudyStatus, {{StudyStatus::Completed, "completed"}, {StudyStatus::Ongoing, "ongoing"}})
NLOHMANN_JSON_SERIALIZE_ENUM(Quality, {{Quality::Low, "low"}, {Quality::Medium, "medium"}, {Quality::High, "high"}})

// nlohmann maps unknown strings to the first enumerator; these reject them.
inline StudyType parse_study_type(std::string_view s) {
  if (s == "impact_evaluation") return StudyType::ImpactEvaluation;
  if (s == "systematic_review") return StudyType::SystematicReview;
  if (s == "other_primary") return StudyType::OtherPrimary;
  throw Error(ErrorCode::InvalidArgument, "unknown study_type '" + std::string(s) + "'");
}

inline Direction parse_direction(std::string_view s) {
  if (s == "positive") return Direction::Positive;
  if (s == "negative") return Direction::Negative;
  if (s == "non_significant") return Direction::NonSignificant;
  throw Error(ErrorCode::InvalidArgument, "unknown direction '" + std::string(s) + "'");
}

inline StudyStatus parse_study_status(std::string_view s) {
  if (s == "completed") return StudyStatus::Completed;
  if (s == "ongoing") return StudyStatus::Ongoing;
  throw Error(ErrorCode::InvalidArgument, "unknown study status '" + std::string(s) + "'");
}

inline Quality parse_quality(std::string_view s) {
  if (s == "low") return Quality::Low;
  if (s == "medium") return Quality::Medium;
  if (s == "high") return Quality::High;
  throw Error(ErrorCode::InvalidArgument, "unknown quality rating '" + std::string(s) + "'");
}

inline std::string to_string(StudyType t) { return nlohmann::json(t).get<std::string>(); }
inline std::string to_string(Direction d) { return nlohmann::json(d).get<std::string>(); }
inline std::string to_string(Quality q) { return nlohmann::json(q).get<std::string>(); }

// ISO 3166-1 alpha-3, officially assigned codes.
inline bool is_iso3166_alpha3(std::string_view code) {
  static constexpr std::array<std::string_view, 249> kCodes = {
      "ABW", "AFG", "AGO", "AIA", "ALA", "ALB", "AND", "ARE", "ARG", "ARM", "ASM", "ATA", "ATF", "ATG", "AUS",
      "AUT", "AZE", "BDI", "BEL", "BEN", "BES", "BFA", "BGD", "BGR", "BHR", "BHS", "BIH", "BLM", "BLR", "BLZ",
      "BMU", "BOL", "BRA", "BRB", "BRN", "BTN", "BVT", "BWA", "CAF", "CAN", "CCK", "CHE", "CHL", "CHN", "CIV",
      "CMR", "COD", "COG", "COK", "COL", "COM", "CPV", "CRI", "CUB", "CUW", "CXR", "CYM", "CYP", "CZE", "DEU",
      "DJI", "DMA", "DNK", "DOM", "DZA", "ECU", "EGY", "ERI", "ESH", "ESP", "EST", "ETH", "FIN", "FJI", "FLK",
      "FRA", "FRO", "FSM", "GAB", "GBR", "GEO", "GGY", "GHA", "GIB", "GIN", "GLP", "GMB", "GNB", "GNQ", "GRC",
      "GRD", "GRL", "GTM", "GUF", "GUM", "GUY", "HKG", "HMD", "HND", "HRV", "HTI", "HUN", "IDN", "IMN", "IND",
      "IOT", "IRL", "IRN", "IRQ", "ISL", "ISR", "ITA", "JAM", "JEY", "JOR", "JPN", "KAZ", "KEN", "KGZ", "KHM",
      "KIR", "KNA", "KOR", "KWT", "LAO", "LBN", "LBR", "LBY", "LCA", "LIE", "LKA", "LSO", "LTU", "LUX", "LVA",
      "MAC", "MAF", "MAR", "MCO", "MDA", "MDG", "MDV", "MEX", "MHL", "MKD", "MLI", "MLT", "MMR", "MNE", "MNG",
      "MNP", "MOZ", "MRT", "MSR", "MTQ", "MUS", "MWI", "MYS", "MYT", "NAM", "NCL", "NER", "NFK", "NGA", "NIC",
      "NIU", "NLD", "NOR", "NPL", "NRU", "NZL", "OMN", "PAK", "PAN", "PCN", "PER", "PHL", "PLW", "PNG", "POL",
      "PRI", "PRK", "PRT", "PRY", "PSE", "PYF", "QAT", "REU", "ROU", "RUS", "RWA", "SAU", "SDN", "SEN", "SGP",
      "SGS", "SHN", "SJM", "SLB", "SLE", "SLV", "SMR", "SOM", "SPM", "SRB", "SSD", "STP", "SUR", "SVK", "SVN",
      "SWE", "SWZ", "SXM", "SYC", "SYR", "TCA", "TCD", "TGO", "THA", "TJK", "TKL", "TKM", "TLS", "TON", "TTO",
      "TUN", "TUR", "TUV", "TWN", "TZA", "UGA", "UKR", "UMI", "URY", "USA", "UZB", "VAT", "VCT", "VEN", "VGB",
      "VIR", "VNM", "VUT", "WLF", "WSM", "YEM", "ZAF", "ZMB", "ZWE"};
  return std::binary_search(kCodes.begin(), kCodes.end(), code);
}

struct StudyAttributes {
  StudyType study_type = StudyType::ImpactEvaluation;
  std::optional<std::string> geography;  // ISO 3166-1 alpha-3
  std::optional<std::string> population;
  std::optional<StudyStatus> status;
  std::optional<Quality> quality_rating;

  void validate() const {
    if (geography && !is_iso3166_alpha3(*geography)) {
      throw Error(ErrorCode::InvalidArgument, "geography '" + *geography + "' is not an ISO 3166 alpha-3 code");
    }
  }

  bool operator==(const StudyAttributes&) const = default;
};

inline void to_json(nlohmann::json& j, const StudyAttributes& a) {
  j = nlohmann::json{{"study_type", a.study_type}};
  j["geography"] = a.geography ? nlohmann::json(*a.geography) : nlohmann::json(nullptr);
  j["population"] = a.population ? nlohmann::json(*a.population) : nlohmann::json(nullptr);
  j["status"] = a.status ? nlohmann::json(*a.status) : nlohmann::json(nullptr);
  j["quality_rating"] = a.quality_rating ? nlohmann::json(*a.quality_rating) : nlohmann::json(nullptr);
}

inline void from_json(const nlohmann::json& j, StudyAttributes& a) {
  auto text = [&](const char* k) -> std::optional<std::string> {
    auto it = j.find(k);
    if (it == j.end() || it->is_null()) return std::nullopt;
    std::string v = it->get<std::string>();
    if (v.empty()) return std::nullopt;
    return v;
  };
  a.study_type = parse_study_type(text("study_type").value_or("impact_evaluation"));
  a.geography = text("geography");
  if (a.geography) {
    for (auto& c : *a.geography) {
      if (c >= 'a' && c <= 'z') c = static_cast<char>(c - 'a' + 'A');
    }
  }
  a.population = text("population");
  if (auto s = text("status")) a.status = parse_study_status(*s);
  if (auto q = text("quality_rating")) a.quality_rating = parse_quality(*q);
  a.validate();
}

}  // namespace egm::core
