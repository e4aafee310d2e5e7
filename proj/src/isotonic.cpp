#include "mflow/isotonic.hpp"

#include <algorithm>
#include <stdexcept>
#include <vector>

namespace mflow {

void isotonic_project(std::span<double> values, std::span<const double> weights) {
  if (!weights.empty() && weights.size() != values.size())
    throw std::invalid_argument("isotonic_project: weight count mismatch");
  struct Block {
    double mean;
    double weight;
    std::size_t count;
  };
  std::vector<Block> stack;
  stack.reserve(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    if (!(w > 0.0)) throw std::invalid_argument("isotonic_project: weights must be positive");
    stack.push_back({values[i], w, 1});
    while (stack.size() > 1 && stack[stack.size() - 2].mean > stack.back().mean) {
      const Block top = stack.back();
      stack.pop_back();
      Block& below = stack.back();
      const double total = below.weight + top.weight;
      below.mean = (below.mean * below.weight + top.mean * top.weight) / total;
      below.weight = total;
      below.count += top.count;
    }
  }
  std::size_t pos = 0;
  for (const auto& b : stack) {
    std::fill_n(values.begin() + static_cast<std::ptrdiff_t>(pos), b.count, b.mean);
    pos += b.count;
  }
}

void isotonic_project_bounded(std::span<double> values, double lo, double hi) {
  isotonic_project(values);
  for (double& v : values) v = std::clamp(v, lo, hi);
}

}  // namespace mflow
