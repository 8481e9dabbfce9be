#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "navseg/labelmap.hpp"
#include "navseg/tensor.hpp"

namespace navseg {

// RGB image plus its aligned group label map.
struct SynthSample {
    Tensor image;  // [3 x H x W] in [0, 1]
    LabelMap labels;
};

// Group base colors (0..255 per channel); any two differ by at least 60 in
// some channel.
std::vector<std::array<int, 3>> synth_palette(int groups);

// Seeded Voronoi scenes: a handful of random sites, one group per site,
// per-pixel color = group color + Gaussian noise. Sample i always contains
// group i mod G so a modest dataset covers every group.
std::vector<SynthSample> make_synth_dataset(std::uint64_t seed, int n, int h, int w, int groups,
                                            double noise_sigma = 10.0 / 255.0);

void save_synth_dataset(const std::string& dir, const std::vector<SynthSample>& samples,
                        std::uint64_t seed);

}  // namespace navseg
