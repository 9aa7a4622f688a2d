#pragma once

#include <vector>

#include "noether/dense.hpp"

namespace noether {

/// Thin SVD m = U·diag(sigma)·Vᵀ with sigma descending and orthonormal
/// columns in U (m×r) and V (n×r), r = min(m,n). Not differentiable.
struct SvdResult {
    Dense u;
    std::vector<double> sigma;
    Dense v;
};

SvdResult svd(const Dense& m);

}  // namespace noether
