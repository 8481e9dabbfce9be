#pragma once

#include <string>

#include "navseg/labelmap.hpp"
#include "navseg/tensor.hpp"

namespace navseg {

// Binary netpbm, maxval 255 only. RGB images travel as P6 and are exposed as
// [3 x H x W] tensors scaled into [0, 1]; label maps travel as P5.
void write_ppm(const std::string& path, const Tensor& image);
Tensor read_ppm(const std::string& path);

void write_pgm(const std::string& path, const LabelMap& labels);
LabelMap read_pgm(const std::string& path);

}  // namespace navseg
