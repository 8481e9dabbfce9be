#pragma once

#include <cstdint>
#include <vector>

namespace navseg {

// Canonical "not scored" label for coarse and fine maps alike.
inline constexpr std::uint8_t kIgnoreLabel = 255;

// 8-bit label image, row-major.
struct LabelMap {
    int rows = 0;
    int cols = 0;
    std::vector<std::uint8_t> data;

    LabelMap() = default;
    LabelMap(int r, int c, std::uint8_t fill = 0)
        : rows(r), cols(c), data(static_cast<std::size_t>(r) * static_cast<std::size_t>(c), fill) {}

    std::uint8_t& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::uint8_t at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }
    std::size_t size() const { return data.size(); }
    bool same_shape(const LabelMap& o) const { return rows == o.rows && cols == o.cols; }
};

}  // namespace navseg
