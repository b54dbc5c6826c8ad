// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#include "lsic/labels.hpp"

#include <algorithm>

namespace lsic {

namespace {

std::optional<int> find_index(const std::vector<std::string>& v, std::string_view s) {
    auto it = std::find(v.begin(), v.end(), s);
    if (it == v.end()) return std::nullopt;
    return static_cast<int>(it - v.begin());
}

}  // namespace

LabelMaps::LabelMaps()
    : actions_{"on", "off", "open", "close",
               "increase_speed", "decrease_speed", "increase_volume", "decrease_volume"},
      objects_{"lights", "alarm", "tv", "fridge", "camera", "door", "fan", "speaker"} {
    auto add = [this](std::string_view object, std::string_view action) {
        int o = *find_index(objects_, object);
        int a = *find_index(actions_, action);
        pairs_.emplace_back(o, a);
        intents_.push_back(join(object, action));
    };
    for (const char* device : {"lights", "alarm", "tv", "fridge", "camera"}) {
        add(device, "on");
        add(device, "off");
    }
    add("door", "open");
    add("door", "close");
    add("fan", "on");
    add("fan", "off");
    add("fan", "increase_speed");
    add("fan", "decrease_speed");
    add("speaker", "on");
    add("speaker", "off");
    add("speaker", "increase_volume");
    add("speaker", "decrease_volume");
}

const LabelMaps& LabelMaps::standard() {
    static const LabelMaps maps;
    return maps;
}

std::optional<int> LabelMaps::intent_index(std::string_view intent) const {
    return find_index(intents_, intent);
}

std::optional<int> LabelMaps::action_index(std::string_view action) const {
    return find_index(actions_, action);
}

std::optional<int> LabelMaps::object_index(std::string_view object) const {
    return find_index(objects_, object);
}

std::optional<int> LabelMaps::intent_for(std::string_view object, std::string_view action) const {
    auto o = object_index(object);
    auto a = action_index(action);
    if (!o || !a) return std::nullopt;
    for (size_t i = 0; i < pairs_.size(); ++i) {
        if (pairs_[i].first == *o && pairs_[i].second == *a) return static_cast<int>(i);
    }
    return std::nullopt;
}

bool LabelMaps::is_valid_pair(std::string_view object, std::string_view action) const {
    return intent_for(object, action).has_value();
}

std::string LabelMaps::join(std::string_view object, std::string_view action) {
    std::string s(object);
    s += '_';
    s += action;
    return s;
}

}  // namespace lsic
