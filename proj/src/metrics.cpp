#include "navseg/metrics.hpp"

#include <cmath>
#include <iomanip>
#include <limits>
#include <sstream>

#include "navseg/errors.hpp"

namespace navseg {

ConfusionMatrix::ConfusionMatrix(int classes)
    : classes_(classes),
      counts_(static_cast<std::size_t>(classes) * static_cast<std::size_t>(classes), 0) {
    if (classes < 1) throw ConfigError("confusion matrix needs at least one class");
}

void ConfusionMatrix::accumulate(const LabelMap& pred, const LabelMap& gt) {
    if (!pred.same_shape(gt))
        throw DataError("confusion matrix: prediction " + std::to_string(pred.rows) + "x" +
                        std::to_string(pred.cols) + " vs ground truth " + std::to_string(gt.rows) +
                        "x" + std::to_string(gt.cols));
    for (std::size_t i = 0; i < gt.size(); ++i) {
        const std::uint8_t g = gt.data[i];
        const std::uint8_t p = pred.data[i];
        if (g == kIgnoreLabel || p == kIgnoreLabel) continue;
        if (g >= classes_ || p >= classes_)
            throw DataError("confusion matrix: label " + std::to_string(std::max(g, p)) +
                            " exceeds " + std::to_string(classes_) + " classes");
        ++counts_[static_cast<std::size_t>(g) * classes_ + p];
        ++total_;
    }
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes_ != classes_)
        throw DataError("confusion matrix: cannot merge " + std::to_string(other.classes_) +
                        " classes into " + std::to_string(classes_));
    for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
    total_ += other.total_;
}

unsigned long long ConfusionMatrix::gt_count(int cls) const {
    unsigned long long n = 0;
    for (int p = 0; p < classes_; ++p) n += at(cls, p);
    return n;
}

unsigned long long ConfusionMatrix::pred_count(int cls) const {
    unsigned long long n = 0;
    for (int g = 0; g < classes_; ++g) n += at(g, cls);
    return n;
}

std::vector<double> ConfusionMatrix::iou() const {
    std::vector<double> out(static_cast<std::size_t>(classes_));
    for (int c = 0; c < classes_; ++c) {
        const unsigned long long tp = at(c, c);
        const unsigned long long uni = gt_count(c) + pred_count(c) - tp;
        out[static_cast<std::size_t>(c)] =
            uni == 0 ? std::numeric_limits<double>::quiet_NaN()
                     : static_cast<double>(tp) / static_cast<double>(uni);
    }
    return out;
}

double ConfusionMatrix::miou() const {
    const std::vector<double> per_class = iou();
    double acc = 0.0;
    int n = 0;
    for (double v : per_class) {
        if (std::isnan(v)) continue;
        acc += v;
        ++n;
    }
    return n > 0 ? acc / n : 0.0;
}

double ConfusionMatrix::macc() const {
    double acc = 0.0;
    int n = 0;
    for (int c = 0; c < classes_; ++c) {
        const unsigned long long gt = gt_count(c);
        if (gt == 0) continue;
        acc += static_cast<double>(at(c, c)) / static_cast<double>(gt);
        ++n;
    }
    return n > 0 ? acc / n : 0.0;
}

double ConfusionMatrix::aacc() const {
    if (total_ == 0) return 0.0;
    unsigned long long trace = 0;
    for (int c = 0; c < classes_; ++c) trace += at(c, c);
    return static_cast<double>(trace) / static_cast<double>(total_);
}

nlohmann::json metrics_json(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    nlohmann::json per_class = nlohmann::json::object();
    nlohmann::json pixel_counts = nlohmann::json::object();
    const std::vector<double> per = cm.iou();
    for (int c = 0; c < cm.classes(); ++c) {
        const std::string key = c < static_cast<int>(names.size()) ? names[static_cast<std::size_t>(c)]
                                                                   : "class_" + std::to_string(c);
        const double v = per[static_cast<std::size_t>(c)];
        per_class[key] = std::isnan(v) ? nlohmann::json(nullptr) : nlohmann::json(v);
        pixel_counts[key] = cm.gt_count(c);
    }
    return nlohmann::json{{"per_class_iou", per_class},
                          {"miou", cm.miou()},
                          {"macc", cm.macc()},
                          {"aacc", cm.aacc()},
                          {"pixel_counts", pixel_counts}};
}

std::string metrics_table(const ConfusionMatrix& cm, const std::vector<std::string>& names) {
    std::ostringstream os;
    os << std::left << std::setw(14) << "class" << std::right << std::setw(10) << "iou"
       << std::setw(10) << "acc" << std::setw(12) << "gt_pixels" << '\n';
    const std::vector<double> per = cm.iou();
    for (int c = 0; c < cm.classes(); ++c) {
        const std::string name = c < static_cast<int>(names.size())
                                     ? names[static_cast<std::size_t>(c)]
                                     : "class_" + std::to_string(c);
        const unsigned long long gt = cm.gt_count(c);
        os << std::left << std::setw(14) << name << std::right << std::fixed << std::setprecision(4);
        const double v = per[static_cast<std::size_t>(c)];
        if (std::isnan(v))
            os << std::setw(10) << "-";
        else
            os << std::setw(10) << v;
        if (gt == 0)
            os << std::setw(10) << "-";
        else
            os << std::setw(10) << static_cast<double>(cm.at(c, c)) / static_cast<double>(gt);
        os << std::setw(12) << gt << '\n';
    }
    os << std::left << std::setw(14) << "mIoU" << std::right << std::fixed << std::setprecision(4)
       << std::setw(10) << cm.miou() << '\n';
    os << std::left << std::setw(14) << "mAcc" << std::right << std::setw(10) << cm.macc() << '\n';
    os << std::left << std::setw(14) << "aAcc" << std::right << std::setw(10) << cm.aacc() << '\n';
    return os.str();
}

}  // namespace navseg
