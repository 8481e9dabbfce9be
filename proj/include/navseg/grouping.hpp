#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "navseg/labelmap.hpp"

namespace navseg {

struct GroupInfo {
    std::string name;
    int cost_rank = 0;  // lower = more navigable
};

// Fine-grained class ids -> navigability groups. Ignored fine ids collapse
// into the ignore label on remapping.
struct GroupMap {
    std::vector<GroupInfo> groups;
    std::vector<int> mapping;  // indexed by fine id; -1 marks an ignored id

    int group_count() const { return static_cast<int>(groups.size()); }
    int fine_count() const { return static_cast<int>(mapping.size()); }
    int group_of(const std::string& name) const;  // -1 if absent
    std::vector<int> cost_ranks() const;
};

GroupMap parse_group_map(const nlohmann::json& j);
GroupMap load_group_map(const std::string& path);

// Pointwise fine -> coarse lookup; the ignore label passes through.
LabelMap remap(const LabelMap& fine, const GroupMap& gm);

// One {0,1} mask per group; masks partition the non-ignored pixels.
std::vector<LabelMap> binary_masks(const LabelMap& coarse, int groups);

// Per-group pixel accuracy measured before and after collapsing classes into
// groups. Remapping turns within-group confusions into hits, so the grouped
// accuracy can only improve on the fine one.
struct GroupEffect {
    std::string name;
    long long gt_pixels = 0;
    double fine_accuracy = 0.0;
    double grouped_accuracy = 0.0;
    double delta = 0.0;
};

std::vector<GroupEffect> grouping_effect(const LabelMap& pred_fine, const LabelMap& gt_fine,
                                         const GroupMap& gm);

}  // namespace navseg
