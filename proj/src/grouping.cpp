#include "navseg/grouping.hpp"

#include <algorithm>
#include <fstream>
#include <map>

#include "navseg/errors.hpp"

namespace navseg {

int GroupMap::group_of(const std::string& name) const {
    for (std::size_t i = 0; i < groups.size(); ++i)
        if (groups[i].name == name) return static_cast<int>(i);
    return -1;
}

std::vector<int> GroupMap::cost_ranks() const {
    std::vector<int> r;
    r.reserve(groups.size());
    for (const GroupInfo& g : groups) r.push_back(g.cost_rank);
    return r;
}

namespace {

int resolve_fine_id(const std::string& key, const std::map<std::string, int>& classes) {
    if (!key.empty() && std::all_of(key.begin(), key.end(),
                                    [](unsigned char c) { return std::isdigit(c); }))
        return std::stoi(key);
    auto it = classes.find(key);
    if (it == classes.end())
        throw ConfigError("group map: mapping key '" + key + "' is not a numeric id and not in 'classes'");
    return it->second;
}

}  // namespace

GroupMap parse_group_map(const nlohmann::json& j) {
    GroupMap gm;
    if (!j.contains("groups") || !j["groups"].is_array() || j["groups"].empty())
        throw ConfigError("group map: missing non-empty 'groups' array");
    for (const auto& g : j["groups"]) {
        GroupInfo info;
        info.name = g.at("name").get<std::string>();
        info.cost_rank = g.value("cost_rank", static_cast<int>(gm.groups.size()));
        gm.groups.push_back(std::move(info));
    }
    const int group_count = gm.group_count();

    std::map<std::string, int> classes;
    if (j.contains("classes"))
        for (const auto& [name, id] : j["classes"].items()) classes[name] = id.get<int>();

    std::map<int, int> assignment;  // fine id -> group id (or -1 ignored)
    if (!j.contains("mapping") || !j["mapping"].is_object())
        throw ConfigError("group map: missing 'mapping' object");
    for (const auto& [key, gid_json] : j["mapping"].items()) {
        const int fine = resolve_fine_id(key, classes);
        if (fine < 0) throw ConfigError("group map: negative fine id for '" + key + "'");
        const int gid = gid_json.get<int>();
        if (gid < 0 || gid >= group_count)
            throw ConfigError("group map: class '" + key + "' mapped to group " +
                              std::to_string(gid) + ", valid ids are [0," +
                              std::to_string(group_count) + ")");
        if (assignment.count(fine))
            throw ConfigError("group map: fine id " + std::to_string(fine) +
                              " assigned more than once");
        assignment[fine] = gid;
    }
    if (j.contains("ignore"))
        for (const auto& id_json : j["ignore"]) {
            const int fine = id_json.get<int>();
            if (assignment.count(fine))
                throw ConfigError("group map: fine id " + std::to_string(fine) +
                                  " both mapped and ignored");
            assignment[fine] = -1;
        }
    if (assignment.empty()) throw ConfigError("group map: empty mapping");

    const int max_id = assignment.rbegin()->first;
    if (max_id >= 255) throw ConfigError("group map: fine ids must stay below 255");
    gm.mapping.assign(static_cast<std::size_t>(max_id) + 1, -2);
    std::vector<int> missing;
    for (int id = 0; id <= max_id; ++id) {
        auto it = assignment.find(id);
        if (it == assignment.end())
            missing.push_back(id);
        else
            gm.mapping[static_cast<std::size_t>(id)] = it->second;
    }
    if (!missing.empty()) {
        std::string list;
        for (int id : missing) list += (list.empty() ? "" : ", ") + std::to_string(id);
        throw ConfigError("group map: unmapped fine class ids: " + list);
    }
    return gm;
}

GroupMap load_group_map(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw IoError("cannot open group map " + path);
    nlohmann::json j;
    try {
        is >> j;
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError(path + ": invalid JSON: " + e.what());
    }
    return parse_group_map(j);
}

LabelMap remap(const LabelMap& fine, const GroupMap& gm) {
    LabelMap coarse(fine.rows, fine.cols);
    for (int r = 0; r < fine.rows; ++r)
        for (int c = 0; c < fine.cols; ++c) {
            const std::uint8_t v = fine.at(r, c);
            if (v == kIgnoreLabel) {
                coarse.at(r, c) = kIgnoreLabel;
                continue;
            }
            if (v >= gm.fine_count() || gm.mapping[v] == -2)
                throw DataError("remap: unknown fine label " + std::to_string(v) + " at pixel (" +
                                std::to_string(r) + "," + std::to_string(c) + ")");
            const int gid = gm.mapping[v];
            coarse.at(r, c) = gid < 0 ? kIgnoreLabel : static_cast<std::uint8_t>(gid);
        }
    return coarse;
}

std::vector<LabelMap> binary_masks(const LabelMap& coarse, int groups) {
    std::vector<LabelMap> masks(static_cast<std::size_t>(groups), LabelMap(coarse.rows, coarse.cols));
    for (int r = 0; r < coarse.rows; ++r)
        for (int c = 0; c < coarse.cols; ++c) {
            const std::uint8_t v = coarse.at(r, c);
            if (v == kIgnoreLabel) continue;
            if (v >= groups)
                throw DataError("binary_masks: label " + std::to_string(v) + " at pixel (" +
                                std::to_string(r) + "," + std::to_string(c) + ") exceeds " +
                                std::to_string(groups) + " groups");
            masks[v].at(r, c) = 1;
        }
    return masks;
}

std::vector<GroupEffect> grouping_effect(const LabelMap& pred_fine, const LabelMap& gt_fine,
                                         const GroupMap& gm) {
    if (!pred_fine.same_shape(gt_fine))
        throw DataError("grouping_effect: prediction " + std::to_string(pred_fine.rows) + "x" +
                        std::to_string(pred_fine.cols) + " vs ground truth " +
                        std::to_string(gt_fine.rows) + "x" + std::to_string(gt_fine.cols));
    const LabelMap pred_g = remap(pred_fine, gm);
    const LabelMap gt_g = remap(gt_fine, gm);

    const int groups = gm.group_count();
    std::vector<long long> total(static_cast<std::size_t>(groups), 0);
    std::vector<long long> fine_hits(static_cast<std::size_t>(groups), 0);
    std::vector<long long> grouped_hits(static_cast<std::size_t>(groups), 0);
    for (int r = 0; r < gt_fine.rows; ++r)
        for (int c = 0; c < gt_fine.cols; ++c) {
            const std::uint8_t g = gt_g.at(r, c);
            if (g == kIgnoreLabel) continue;
            ++total[g];
            if (pred_fine.at(r, c) == gt_fine.at(r, c)) ++fine_hits[g];
            if (pred_g.at(r, c) == g) ++grouped_hits[g];
        }

    std::vector<GroupEffect> report(static_cast<std::size_t>(groups));
    for (int g = 0; g < groups; ++g) {
        GroupEffect& e = report[static_cast<std::size_t>(g)];
        e.name = gm.groups[static_cast<std::size_t>(g)].name;
        e.gt_pixels = total[static_cast<std::size_t>(g)];
        if (e.gt_pixels > 0) {
            e.fine_accuracy = static_cast<double>(fine_hits[static_cast<std::size_t>(g)]) /
                              static_cast<double>(e.gt_pixels);
            e.grouped_accuracy = static_cast<double>(grouped_hits[static_cast<std::size_t>(g)]) /
                                 static_cast<double>(e.gt_pixels);
        }
        e.delta = e.grouped_accuracy - e.fine_accuracy;
    }
    return report;
}

}  // namespace navseg
