#pragma once

#include "noether/dense.hpp"
#include "noether/graph.hpp"

namespace noether {

/// exp(m) for square m by scaling-and-squaring with a truncated Taylor
/// series (13 terms after scaling to norm ≤ 0.5; truncation below 1e-12).
Dense matexp(const Dense& m);

/// Same algorithm recorded on the graph: every step is a differentiable
/// operation, so gradients with respect to entries of m flow through.
ad::Node matexp(ad::Graph& g, ad::Node m);

}  // namespace noether
