#pragma once

// Central finite-difference verification of every hand-written backward
// pass, on small float64 instances.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ahgcn/matrix.hpp"

namespace ahgcn {

struct GradcheckOptions {
    std::uint64_t seed = 0;
    double step = 1e-3;
    double threshold = 1e-4;
    // Negative control: perturbs every analytic gradient before comparison.
    bool corrupt = false;
};

struct GradcheckEntry {
    std::string block;
    std::string tensor;
    std::size_t entries = 0;
    double max_rel_error = 0.0;
    bool passed = false;
};

struct GradcheckReport {
    std::vector<GradcheckEntry> entries;
    double threshold = 0.0;

    bool passed() const;
    double max_error(const std::string& block) const;
    // One line per tensor plus per-block maxima.
    std::string format() const;
};

// Gradients whose magnitude stays below this are treated as zero; some bias
// gradients vanish exactly (a uniform feature shift that batch norm removes)
// and both sides are then pure rounding noise.
inline constexpr double kGradientFloor = 1e-6;

// max |analytic - numeric| / max(max |analytic|, max |numeric|, kGradientFloor),
// the numeric gradient taken by central differences of `objective` in every
// entry of `x`.
double finite_difference_error(Matrix& x, const Matrix& analytic, const std::function<double()>& objective,
                               double step);

GradcheckReport run_gradcheck(const GradcheckOptions& options = {});

}  // namespace ahgcn
