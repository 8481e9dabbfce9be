#include "navseg/synth.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include <json.hpp>

#include "navseg/errors.hpp"
#include "navseg/netpbm.hpp"

namespace navseg {

std::vector<std::array<int, 3>> synth_palette(int groups) {
    static const std::array<std::array<int, 3>, 8> base = {{{230, 60, 60},
                                                            {60, 230, 60},
                                                            {60, 60, 230},
                                                            {230, 230, 60},
                                                            {230, 60, 230},
                                                            {60, 230, 230},
                                                            {240, 240, 240},
                                                            {30, 30, 30}}};
    if (groups < 1 || groups > static_cast<int>(base.size()))
        throw ConfigError("synth palette supports 1.." + std::to_string(base.size()) +
                          " groups, got " + std::to_string(groups));
    return std::vector<std::array<int, 3>>(base.begin(), base.begin() + groups);
}

std::vector<SynthSample> make_synth_dataset(std::uint64_t seed, int n, int h, int w, int groups,
                                            double noise_sigma) {
    if (h % 32 != 0 || w % 32 != 0)
        throw ConfigError("synth images must have sides divisible by 32, got " + std::to_string(h) +
                          "x" + std::to_string(w));
    const auto palette = synth_palette(groups);
    auto rng = make_rng(seed);
    std::uniform_int_distribution<int> site_count(3, 5);
    std::uniform_real_distribution<double> coord(0.0, 1.0);
    std::uniform_int_distribution<int> any_group(0, groups - 1);
    std::normal_distribution<double> noise(0.0, 1.0);

    std::vector<SynthSample> samples;
    samples.reserve(static_cast<std::size_t>(n));
    for (int s = 0; s < n; ++s) {
        const int sites = site_count(rng);
        std::vector<double> sy(static_cast<std::size_t>(sites)), sx(static_cast<std::size_t>(sites));
        std::vector<int> group(static_cast<std::size_t>(sites));
        for (int i = 0; i < sites; ++i) {
            sy[static_cast<std::size_t>(i)] = coord(rng) * h;
            sx[static_cast<std::size_t>(i)] = coord(rng) * w;
            group[static_cast<std::size_t>(i)] = (i == 0) ? s % groups : any_group(rng);
        }
        SynthSample sample;
        sample.image = Tensor({3, h, w});
        sample.labels = LabelMap(h, w);
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                int best = 0;
                double best_d = 1e18;
                for (int i = 0; i < sites; ++i) {
                    const double dy = y + 0.5 - sy[static_cast<std::size_t>(i)];
                    const double dx = x + 0.5 - sx[static_cast<std::size_t>(i)];
                    const double d = dy * dy + dx * dx;
                    if (d < best_d) {
                        best_d = d;
                        best = i;
                    }
                }
                const int g = group[static_cast<std::size_t>(best)];
                sample.labels.at(y, x) = static_cast<std::uint8_t>(g);
                for (int c = 0; c < 3; ++c) {
                    double v = palette[static_cast<std::size_t>(g)][static_cast<std::size_t>(c)] / 255.0;
                    if (noise_sigma > 0.0) v += noise_sigma * noise(rng);
                    sample.image.at(c, y, x) = std::clamp(v, 0.0, 1.0);
                }
            }
        samples.push_back(std::move(sample));
    }
    return samples;
}

void save_synth_dataset(const std::string& dir, const std::vector<SynthSample>& samples,
                        std::uint64_t seed) {
    std::filesystem::create_directories(dir);
    char name[32];
    for (std::size_t i = 0; i < samples.size(); ++i) {
        std::snprintf(name, sizeof(name), "img_%04zu.ppm", i);
        write_ppm(dir + "/" + name, samples[i].image);
        std::snprintf(name, sizeof(name), "lbl_%04zu.pgm", i);
        write_pgm(dir + "/" + name, samples[i].labels);
    }
    nlohmann::json manifest{{"seed", seed}, {"count", samples.size()}};
    if (!samples.empty()) {
        manifest["height"] = samples[0].labels.rows;
        manifest["width"] = samples[0].labels.cols;
    }
    const std::string tmp = dir + "/manifest.json.tmp";
    {
        std::ofstream os(tmp);
        if (!os) throw IoError("cannot write " + tmp);
        os << manifest.dump(2) << '\n';
    }
    std::filesystem::rename(tmp, dir + "/manifest.json");
}

}  // namespace navseg
