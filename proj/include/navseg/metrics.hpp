#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "navseg/labelmap.hpp"

namespace navseg {

// Exact integer pixel counts; counts[gt][pred]. Floats appear only in the
// final ratios.
class ConfusionMatrix {
public:
    explicit ConfusionMatrix(int classes);

    void accumulate(const LabelMap& pred, const LabelMap& gt);
    void merge(const ConfusionMatrix& other);

    unsigned long long at(int gt, int pred) const {
        return counts_[static_cast<std::size_t>(gt) * classes_ + pred];
    }
    unsigned long long total() const { return total_; }
    int classes() const { return classes_; }

    unsigned long long gt_count(int cls) const;
    unsigned long long pred_count(int cls) const;

    // Per-class intersection over union; NaN where a class has neither ground
    // truth nor predicted pixels.
    std::vector<double> iou() const;
    double miou() const;  // mean over classes with any gt or predicted pixels
    double macc() const;  // mean per-class recall over classes with gt pixels
    double aacc() const;  // trace / total

private:
    int classes_;
    std::vector<unsigned long long> counts_;
    unsigned long long total_ = 0;
};

nlohmann::json metrics_json(const ConfusionMatrix& cm, const std::vector<std::string>& names = {});
std::string metrics_table(const ConfusionMatrix& cm, const std::vector<std::string>& names = {});

}  // namespace navseg
