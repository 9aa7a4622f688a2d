#include "noether/kernels.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <atomic>
#include <cmath>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace noether {

namespace runtime {

namespace {
std::atomic<int> g_threads{0};
std::atomic<Backend> g_backend{Backend::Parallel};
}  // namespace

void set_threads(int n) {
    g_threads.store(n);
#ifdef _OPENMP
    if (n > 0) omp_set_num_threads(n);
#endif
    Eigen::setNbThreads(n > 0 ? n : 0);
}

int threads() {
    const int n = g_threads.load();
    if (n > 0) return n;
#ifdef _OPENMP
    return omp_get_max_threads();
#else
    return 1;
#endif
}

void set_backend(Backend b) { g_backend.store(b); }
Backend active() { return g_backend.load(); }

}  // namespace runtime

namespace kern {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

namespace {

inline void check_same(const Dense& a, const Dense& b, const char* what) {
    if (!a.same_shape(b))
        throw ShapeError(std::string(what) + ": shape mismatch " + a.shape_str() + " vs " + b.shape_str());
}

// Reference GEMM: plain loops, no blocking, no threading.
void gemm_ref(Dense& c, const Dense& a, bool tr_a, const Dense& b, bool tr_b, double alpha, bool accumulate) {
    const int m = tr_a ? a.cols() : a.rows();
    const int k = tr_a ? a.rows() : a.cols();
    const int n = tr_b ? b.rows() : b.cols();
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int p = 0; p < k; ++p) {
                const double av = tr_a ? a(p, i) : a(i, p);
                const double bv = tr_b ? b(j, p) : b(p, j);
                s += av * bv;
            }
            if (accumulate)
                c(i, j) += alpha * s;
            else
                c(i, j) = alpha * s;
        }
    }
}

void gemm_eigen(Dense& c, const Dense& a, bool tr_a, const Dense& b, bool tr_b, double alpha, bool accumulate) {
    CMap am(a.data(), a.rows(), a.cols());
    CMap bm(b.data(), b.rows(), b.cols());
    MMap cm(c.data(), c.rows(), c.cols());
    // Four transpose combinations; Eigen's GEMM is OpenMP-parallel.
    auto run = [&](const auto& prod) {
        if (accumulate)
            cm.noalias() += alpha * prod;
        else
            cm.noalias() = alpha * prod;
    };
    if (!tr_a && !tr_b)
        run(am * bm);
    else if (tr_a && !tr_b)
        run(am.transpose() * bm);
    else if (!tr_a && tr_b)
        run(am * bm.transpose());
    else
        run(am.transpose() * bm.transpose());
}

inline long long grain(long long n) { return std::max<long long>(n / (16 * std::max(runtime::threads(), 1)), 4096); }

template <typename F>
void parallel_ew(long long n, Backend be, F&& f) {
#ifdef _OPENMP
    if (be == Backend::Parallel && n >= 2 * grain(n)) {
#pragma omp parallel for schedule(static)
        for (long long i = 0; i < n; ++i) f(i);
        return;
    }
#endif
    for (long long i = 0; i < n; ++i) f(i);
}

}  // namespace

Dense gemm(const Dense& a, bool tr_a, const Dense& b, bool tr_b, Backend be) {
    const int m = tr_a ? a.cols() : a.rows();
    const int ka = tr_a ? a.rows() : a.cols();
    const int kb = tr_b ? b.cols() : b.rows();
    const int n = tr_b ? b.rows() : b.cols();
    if (ka != kb)
        throw ShapeError("gemm: inner dimension mismatch " + a.shape_str() + (tr_a ? "ᵀ" : "") + " * " +
                         b.shape_str() + (tr_b ? "ᵀ" : ""));
    Dense c = Dense::uninit(m, n);
    if (be == Backend::Serial)
        gemm_ref(c, a, tr_a, b, tr_b, 1.0, false);
    else
        gemm_eigen(c, a, tr_a, b, tr_b, 1.0, false);
    return c;
}

void gemm_acc(Dense& c, const Dense& a, bool tr_a, const Dense& b, bool tr_b, double alpha, Backend be) {
    if (be == Backend::Serial)
        gemm_ref(c, a, tr_a, b, tr_b, alpha, true);
    else
        gemm_eigen(c, a, tr_a, b, tr_b, alpha, true);
}

Dense add(const Dense& a, const Dense& b, Backend be) {
    check_same(a, b, "add");
    Dense c = Dense::uninit(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* pc = c.data();
    parallel_ew(a.size(), be, [&](long long i) { pc[i] = pa[i] + pb[i]; });
    return c;
}

Dense sub(const Dense& a, const Dense& b, Backend be) {
    check_same(a, b, "sub");
    Dense c = Dense::uninit(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* pc = c.data();
    parallel_ew(a.size(), be, [&](long long i) { pc[i] = pa[i] - pb[i]; });
    return c;
}

Dense mul(const Dense& a, const Dense& b, Backend be) {
    check_same(a, b, "mul");
    Dense c = Dense::uninit(a.rows(), a.cols());
    const double *pa = a.data(), *pb = b.data();
    double* pc = c.data();
    parallel_ew(a.size(), be, [&](long long i) { pc[i] = pa[i] * pb[i]; });
    return c;
}

Dense scale(const Dense& a, double s, Backend be) {
    Dense c = Dense::uninit(a.rows(), a.cols());
    const double* pa = a.data();
    double* pc = c.data();
    parallel_ew(a.size(), be, [&](long long i) { pc[i] = s * pa[i]; });
    return c;
}

Dense neg(const Dense& a, Backend be) { return scale(a, -1.0, be); }

Dense transpose(const Dense& a, Backend be) {
    Dense c = Dense::uninit(a.cols(), a.rows());
    if (be == Backend::Parallel) {
        CMap am(a.data(), a.rows(), a.cols());
        MMap cm(c.data(), c.rows(), c.cols());
        cm = am.transpose();
    } else {
        for (int i = 0; i < a.rows(); ++i)
            for (int j = 0; j < a.cols(); ++j) c(j, i) = a(i, j);
    }
    return c;
}

void axpy(Dense& y, const Dense& x, double alpha, Backend be) {
    check_same(y, x, "axpy");
    double* py = y.data();
    const double* px = x.data();
    parallel_ew(y.size(), be, [&](long long i) { py[i] += alpha * px[i]; });
}

void mul_acc(Dense& y, const Dense& x, const Dense& z, Backend be) {
    check_same(y, x, "mul_acc");
    check_same(y, z, "mul_acc");
    double* py = y.data();
    const double *px = x.data(), *pz = z.data();
    parallel_ew(y.size(), be, [&](long long i) { py[i] += px[i] * pz[i]; });
}

Dense exp_ew(const Dense& a, Backend be) {
    Dense c = Dense::uninit(a.rows(), a.cols());
    // Eigen's vectorized exp; elementwise ops are memory-bound so no OpenMP.
    (void)be;
    Eigen::Map<const Eigen::ArrayXd> am(a.data(), a.size());
    Eigen::Map<Eigen::ArrayXd> cm(c.data(), c.size());
    cm = am.exp();
    return c;
}

Dense log_ew(const Dense& a, Backend be) {
    (void)be;
    Dense c = Dense::uninit(a.rows(), a.cols());
    Eigen::Map<const Eigen::ArrayXd> am(a.data(), a.size());
    Eigen::Map<Eigen::ArrayXd> cm(c.data(), c.size());
    cm = am.log();
    return c;
}

Dense recip_ew(const Dense& a, Backend be) {
    Dense c = Dense::uninit(a.rows(), a.cols());
    const double* pa = a.data();
    double* pc = c.data();
    parallel_ew(a.size(), be, [&](long long i) { pc[i] = 1.0 / pa[i]; });
    return c;
}

Dense elu(const Dense& a, double alpha, Backend be) {
    Dense c = Dense::uninit(a.rows(), a.cols());
    (void)be;
    Eigen::Map<const Eigen::ArrayXd> am(a.data(), a.size());
    Eigen::Map<Eigen::ArrayXd> cm(c.data(), c.size());
    cm = (am > 0.0).select(am, alpha * (am.exp() - 1.0));
    return c;
}

Dense elu_deriv_from_value(const Dense& x, const Dense& elu_x, double alpha, Backend be) {
    check_same(x, elu_x, "elu_deriv");
    Dense c = Dense::uninit(x.rows(), x.cols());
    const double *px = x.data(), *pe = elu_x.data();
    double* pc = c.data();
    parallel_ew(x.size(), be, [&](long long i) { pc[i] = px[i] > 0.0 ? 1.0 : pe[i] + alpha; });
    return c;
}

Dense nonpos_mask(const Dense& x, Backend be) {
    Dense c = Dense::uninit(x.rows(), x.cols());
    const double* px = x.data();
    double* pc = c.data();
    parallel_ew(x.size(), be, [&](long long i) { pc[i] = px[i] > 0.0 ? 0.0 : 1.0; });
    return c;
}

double sum_all(const Dense& a, Backend be) {
    // Fixed 1024-element chunks: partials combined in index order regardless
    // of thread count, so the reduction is bitwise reproducible.
    constexpr long long kChunk = 1024;
    const long long n = a.size();
    const long long nchunks = (n + kChunk - 1) / kChunk;
    const double* p = a.data();
    std::vector<double> partial(static_cast<size_t>(nchunks), 0.0);
    auto chunk_sum = [&](long long c) {
        const long long lo = c * kChunk;
        const long long hi = std::min(lo + kChunk, n);
        double s = 0.0;
        for (long long i = lo; i < hi; ++i) s += p[i];
        partial[static_cast<size_t>(c)] = s;
    };
#ifdef _OPENMP
    if (be == Backend::Parallel && nchunks > 8) {
#pragma omp parallel for schedule(static)
        for (long long c = 0; c < nchunks; ++c) chunk_sum(c);
    } else
#endif
    {
        for (long long c = 0; c < nchunks; ++c) chunk_sum(c);
    }
    double s = 0.0;
    for (long long c = 0; c < nchunks; ++c) s += partial[static_cast<size_t>(c)];
    return s;
}

Dense add_colvec(const Dense& m, const Dense& v, Backend be) {
    if (v.cols() != 1 || v.rows() != m.rows())
        throw ShapeError("add_colvec: " + m.shape_str() + " + " + v.shape_str());
    Dense c = Dense::uninit(m.rows(), m.cols());
    const double *pm = m.data(), *pv = v.data();
    double* pc = c.data();
    const int cols = m.cols();
    parallel_ew(m.size(), be, [&](long long i) { pc[i] = pm[i] + pv[i / cols]; });
    return c;
}

Dense row_sum(const Dense& a, Backend be) {
    Dense c(a.rows(), 1);
    (void)be;
    for (int i = 0; i < a.rows(); ++i) {
        double s = 0.0;
        for (int j = 0; j < a.cols(); ++j) s += a(i, j);
        c(i, 0) = s;
    }
    return c;
}

Dense rows_to_cols(const Dense& a, int block_rows, Backend be) {
    if (block_rows <= 0 || a.rows() % block_rows != 0) throw ShapeError("rows_to_cols: bad block_rows");
    const int s = a.rows() / block_rows;
    const int b = a.cols();
    Dense c = Dense::uninit(block_rows, s * b);
    const double* pa = a.data();
    double* pc = c.data();
    parallel_ew(static_cast<long long>(s) * block_rows * b, be, [&](long long idx) {
        const long long col_out = idx % (static_cast<long long>(s) * b);
        const int i = static_cast<int>(idx / (static_cast<long long>(s) * b));
        const int sblk = static_cast<int>(col_out / b);
        const int bcol = static_cast<int>(col_out % b);
        pc[idx] = pa[static_cast<long long>(sblk * block_rows + i) * b + bcol];
    });
    return c;
}

Dense cols_to_rows(const Dense& a, int out_cols, Backend be) {
    // inverse of rows_to_cols: (M × S*B) → (S*M × B), out(s*M+i, b) = in(i, s*B+b)
    if (out_cols <= 0 || a.cols() % out_cols != 0) throw ShapeError("cols_to_rows: bad out_cols");
    const int s = a.cols() / out_cols;
    const int m = a.rows();
    Dense c = Dense::uninit(s * m, out_cols);
    const double* pa = a.data();
    double* pc = c.data();
    parallel_ew(c.size(), be, [&](long long idx) {
        const int b = static_cast<int>(idx % out_cols);
        const long long row = idx / out_cols;
        const int sblk = static_cast<int>(row / m);
        const int i = static_cast<int>(row % m);
        pc[idx] = pa[static_cast<long long>(i) * a.cols() + static_cast<long long>(sblk) * out_cols + b];
    });
    return c;
}

Dense tile_cols(const Dense& a, int times, Backend be) {
    Dense c = Dense::uninit(a.rows(), a.cols() * times);
    const double* pa = a.data();
    double* pc = c.data();
    const int ac = a.cols();
    const long long n = c.size();
    const int cc = ac * times;
    parallel_ew(n, be, [&](long long i) {
        const int col = static_cast<int>(i % cc);
        const long long row = i / cc;
        pc[i] = pa[row * ac + (col % ac)];
    });
    return c;
}

Dense sum_col_blocks(const Dense& a, int blocks, Backend be) {
    if (blocks <= 0 || a.cols() % blocks != 0) throw ShapeError("sum_col_blocks: bad block count");
    const int bc = a.cols() / blocks;
    Dense c(a.rows(), bc);
    (void)be;
    for (int i = 0; i < a.rows(); ++i) {
        for (int blk = 0; blk < blocks; ++blk) {
            const double* src = a.data() + (static_cast<long long>(i) * a.cols()) + static_cast<long long>(blk) * bc;
            double* dst = c.data() + static_cast<long long>(i) * bc;
            for (int j = 0; j < bc; ++j) dst[j] += src[j];
        }
    }
    return c;
}

}  // namespace kern
}  // namespace noether
