#pragma once

#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "egm/error.hpp"

namespace egm::core {

struct AxisItem {
  std::string id;
  std::string label;
  std::string description;

  bool operator==(const AxisItem&) const = default;
};

NLOHMANN_DEFINE_TYPE_NON_INTRUSIVE_WITH_DEFAULT(AxisItem, id, label, description)

enum class TopicAxis { Interventions, Outcomes };

NLOHMANN_JSON_SERIALIZE_ENUM(TopicAxis, {{TopicAxis::Interventions, "interventions"},
                                         {TopicAxis::Outcomes, "outcomes"}})

struct Framework {
  std::vector<AxisItem> interventions;
  std::vector<AxisItem> outcomes;
  TopicAxis topic_axis = TopicAxis::Interventions;

  void validate() const {
    if (interventions.empty() || outcomes.empty()) {
      throw Error(ErrorCode::InvalidArgument, "framework needs at least one intervention and one outcome");
    }
    for (const auto* axis : {&interventions, &outcomes}) {
      std::set<std::string> ids;
      for (const auto& item : *axis) {
        if (item.id.empty()) throw Error(ErrorCode::InvalidArgument, "framework item with empty id");
        if (!ids.insert(item.id).second) throw Error(ErrorCode::InvalidArgument, "duplicate framework id " + item.id);
      }
    }
  }

  bool has_intervention(const std::string& id) const { return find(interventions, id) != nullptr; }
  bool has_outcome(const std::string& id) const { return find(outcomes, id) != nullptr; }

  const std::vector<AxisItem>& topic_items() const {
    return topic_axis == TopicAxis::Interventions ? interventions : outcomes;
  }

  static const AxisItem* find(const std::vector<AxisItem>& axis, const std::string& id) {
    for (const auto& item : axis) {
      if (item.id == id) return &item;
    }
    return nullptr;
  }

  bool operator==(const Framework&) const = default;
};

inline void to_json(nlohmann::json& j, const Framework& f) {
  j = nlohmann::json{{"interventions", f.interventions}, {"outcomes", f.outcomes}, {"topic_axis", f.topic_axis}};
}

inline void from_json(const nlohmann::json& j, Framework& f) {
  f.interventions = j.at("interventions").get<std::vector<AxisItem>>();
  f.outcomes = j.at("outcomes").get<std::vector<AxisItem>>();
  std::string axis = j.value("topic_axis", "interventions");
  if (axis == "interventions") f.topic_axis = TopicAxis::Interventions;
  else if (axis == "outcomes") f.topic_axis = TopicAxis::Outcomes;
  else throw Error(ErrorCode::InvalidArgument, "topic_axis must be interventions or outcomes");
  f.validate();
}

}  // namespace egm::core
