#include "noether/matexp.hpp"

#include <cmath>

#include "noether/kernels.hpp"

namespace noether {

namespace {

constexpr int kSeriesTerms = 13;  // remainder < 1e-15 at norm ≤ 0.5

int squaring_count(double norm) {
    if (!(norm > 0.5)) return 0;
    return static_cast<int>(std::ceil(std::log2(norm / 0.5)));
}

void validate(const Dense& m) {
    if (m.rows() != m.cols()) throw ShapeError("matexp: matrix must be square, got " + m.shape_str());
    if (!m.all_finite()) throw DomainError("matexp: non-finite entries");
}

}  // namespace

Dense matexp(const Dense& m) {
    validate(m);
    const Backend be = runtime::active();
    const int n = m.rows();
    const int s = squaring_count(m.frobenius_norm());
    Dense a = kern::scale(m, std::ldexp(1.0, -s), be);
    Dense total = kern::add(Dense::identity(n), a, be);
    Dense power = a;
    for (int k = 2; k <= kSeriesTerms; ++k) {
        power = kern::gemm(power, false, a, false, be);
        power = kern::scale(power, 1.0 / k, be);
        total = kern::add(total, power, be);
    }
    for (int i = 0; i < s; ++i) total = kern::gemm(total, false, total, false, be);
    return total;
}

ad::Node matexp(ad::Graph& g, ad::Node m) {
    validate(m.value());
    const int n = m.rows();
    const int s = squaring_count(m.value().frobenius_norm());
    ad::Node a = g.scale(m, std::ldexp(1.0, -s));
    ad::Node total = g.add(g.constant(Dense::identity(n)), a);
    ad::Node power = a;
    for (int k = 2; k <= kSeriesTerms; ++k) {
        power = g.scale(g.matmul(power, a), 1.0 / k);
        total = g.add(total, power);
    }
    for (int i = 0; i < s; ++i) total = g.matmul(total, total);
    return total;
}

}  // namespace noether
