// Copyright 2026 The LSIC Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace lsic {

// The smart-home label taxonomy: 8 devices (objects), 8 actions and the 20
// valid (object, action) pairs. Intent strings are "<object>_<action>".
class LabelMaps {
public:
    static const LabelMaps& standard();

    const std::vector<std::string>& intents() const { return intents_; }
    const std::vector<std::string>& actions() const { return actions_; }
    const std::vector<std::string>& objects() const { return objects_; }

    std::optional<int> intent_index(std::string_view intent) const;
    std::optional<int> action_index(std::string_view action) const;
    std::optional<int> object_index(std::string_view object) const;

    bool is_valid_pair(std::string_view object, std::string_view action) const;
    std::optional<int> intent_for(std::string_view object, std::string_view action) const;

    // Object / action indices of intent i.
    int object_of(int intent) const { return pairs_[static_cast<size_t>(intent)].first; }
    int action_of(int intent) const { return pairs_[static_cast<size_t>(intent)].second; }

    static std::string join(std::string_view object, std::string_view action);

private:
    LabelMaps();

    std::vector<std::string> intents_;
    std::vector<std::string> actions_;
    std::vector<std::string> objects_;
    std::vector<std::pair<int, int>> pairs_;
};

inline constexpr int kNumIntents = 20;
inline constexpr int kNumActions = 8;
inline constexpr int kNumObjects = 8;

}  // namespace lsic
