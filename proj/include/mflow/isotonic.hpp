#pragma once

#include <span>

namespace mflow {

/// Least-squares projection onto non-decreasing sequences (pool adjacent
/// violators). With `weights` empty every entry has unit weight.
void isotonic_project(std::span<double> values, std::span<const double> weights = {});

/// Isotonic projection followed by clipping to [lo, hi], which is the exact
/// projection onto bounded non-decreasing sequences.
void isotonic_project_bounded(std::span<double> values, double lo, double hi);

}  // namespace mflow
