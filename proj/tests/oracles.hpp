#pragma once

// Test-only oracles, kept independent of the implementation paths they check:
//  - central finite differences for first- and second-order gradient checks
//  - a long-double Taylor series for the matrix exponential
//  - a cyclic Jacobi eigensolver for symmetric matrices (SVD cross-check)

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "noether/dense.hpp"
#include "noether/rng.hpp"

namespace oracles {

using noether::Dense;
using noether::Rng;

inline Dense random_dense(Rng& rng, int r, int c, double lo = -2.0, double hi = 2.0) {
    Dense d = Dense::uninit(r, c);
    for (long long i = 0; i < d.size(); ++i) d.data()[i] = rng.uniform(lo, hi);
    return d;
}

inline Dense random_normal(Rng& rng, int r, int c, double std = 1.0) {
    Dense d = Dense::uninit(r, c);
    for (long long i = 0; i < d.size(); ++i) d.data()[i] = rng.normal(0.0, std);
    return d;
}

/// Central finite differences of a scalar function with respect to one
/// Dense argument. f must not hold references into x.
inline Dense fd_gradient(const std::function<double(const Dense&)>& f, const Dense& x, double h = 1e-5) {
    Dense g = Dense::uninit(x.rows(), x.cols());
    Dense xp = x.clone();
    for (long long i = 0; i < x.size(); ++i) {
        const double orig = xp.data()[i];
        xp.data()[i] = orig + h;
        const double fp = f(xp);
        xp.data()[i] = orig - h;
        const double fm = f(xp);
        xp.data()[i] = orig;
        g.data()[i] = (fp - fm) / (2.0 * h);
    }
    return g;
}

inline double rel_err(const Dense& got, const Dense& want) {
    return noether::frob_dist(got, want) / std::max(want.frobenius_norm(), 1e-12);
}

/// Machine-precision matrix exponential: plain Taylor series in long double,
/// no scaling tricks. Converges for the moderate norms used in tests.
inline Dense series_matexp(const Dense& m, int max_terms = 300) {
    const int n = m.rows();
    std::vector<long double> a(static_cast<size_t>(n) * n), term(a.size()), total(a.size(), 0.0L);
    for (int i = 0; i < n * n; ++i) a[i] = m.data()[i];
    for (int i = 0; i < n; ++i) term[static_cast<size_t>(i) * n + i] = 1.0L;
    for (int i = 0; i < n * n; ++i) total[i] = term[i];
    for (int k = 1; k <= max_terms; ++k) {
        std::vector<long double> next(a.size(), 0.0L);
        for (int i = 0; i < n; ++i)
            for (int p = 0; p < n; ++p) {
                const long double t = term[static_cast<size_t>(i) * n + p] / k;
                if (t == 0.0L) continue;
                for (int j = 0; j < n; ++j) next[static_cast<size_t>(i) * n + j] += t * a[static_cast<size_t>(p) * n + j];
            }
        term = next;
        long double tn = 0.0L;
        for (int i = 0; i < n * n; ++i) {
            total[i] += term[i];
            tn += term[i] * term[i];
        }
        if (tn < 1e-40L) break;
    }
    Dense out = Dense::uninit(n, n);
    for (int i = 0; i < n * n; ++i) out.data()[i] = static_cast<double>(total[i]);
    return out;
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations, descending.
inline std::vector<double> jacobi_eigenvalues(const Dense& sym, int sweeps = 60) {
    const int n = sym.rows();
    Dense a = sym.clone();
    for (int sweep = 0; sweep < sweeps; ++sweep) {
        double off = 0.0;
        for (int p = 0; p < n; ++p)
            for (int q = p + 1; q < n; ++q) off += a(p, q) * a(p, q);
        if (off < 1e-30) break;
        for (int p = 0; p < n; ++p) {
            for (int q = p + 1; q < n; ++q) {
                if (std::fabs(a(p, q)) < 1e-300) continue;
                const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
                const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                for (int i = 0; i < n; ++i) {
                    const double aip = a(i, p), aiq = a(i, q);
                    a(i, p) = c * aip - s * aiq;
                    a(i, q) = s * aip + c * aiq;
                }
                for (int i = 0; i < n; ++i) {
                    const double api = a(p, i), aqi = a(q, i);
                    a(p, i) = c * api - s * aqi;
                    a(q, i) = s * api + c * aqi;
                }
            }
        }
    }
    std::vector<double> ev(n);
    for (int i = 0; i < n; ++i) ev[i] = a(i, i);
    std::sort(ev.begin(), ev.end(), std::greater<double>());
    return ev;
}

}  // namespace oracles
