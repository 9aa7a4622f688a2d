#pragma once

#include "noether/dense.hpp"

namespace noether {

/// Kernel backend selection. Serial is a plain-loop reference implementation
/// kept for testing; Parallel uses OpenMP (vectorized GEMM via Eigen).
enum class Backend { Serial, Parallel };

namespace runtime {
/// Global thread budget for parallel kernels. 0 = hardware default.
void set_threads(int n);
int threads();
/// Active backend for ops routed through `active()`.
void set_backend(Backend b);
Backend active();
}  // namespace runtime

namespace kern {

// C = op(A)*op(B), allocating C. op = optional transpose.
Dense gemm(const Dense& a, bool tr_a, const Dense& b, bool tr_b, Backend be);
// C += alpha*op(A)*op(B) into existing C.
void gemm_acc(Dense& c, const Dense& a, bool tr_a, const Dense& b, bool tr_b, double alpha, Backend be);

Dense add(const Dense& a, const Dense& b, Backend be);
Dense sub(const Dense& a, const Dense& b, Backend be);
Dense mul(const Dense& a, const Dense& b, Backend be);
Dense scale(const Dense& a, double s, Backend be);
Dense neg(const Dense& a, Backend be);
Dense transpose(const Dense& a, Backend be);

// y += alpha * x  (in place)
void axpy(Dense& y, const Dense& x, double alpha, Backend be);
// y += x ⊙ z (in place elementwise-product accumulate)
void mul_acc(Dense& y, const Dense& x, const Dense& z, Backend be);

Dense exp_ew(const Dense& a, Backend be);
Dense log_ew(const Dense& a, Backend be);
Dense recip_ew(const Dense& a, Backend be);
Dense elu(const Dense& a, double alpha, Backend be);
// elu'(x) from x and the stored elu(x): x>0 ? 1 : elu+alpha
Dense elu_deriv_from_value(const Dense& x, const Dense& elu_x, double alpha, Backend be);
// indicator x<=0 (piecewise-constant factor used by the chain rule)
Dense nonpos_mask(const Dense& x, Backend be);

// Deterministic full reduction: fixed-size chunk partials combined in index
// order, so the result is identical for any thread count.
double sum_all(const Dense& a, Backend be);

// m + v*1ᵀ (broadcast column vector over columns)
Dense add_colvec(const Dense& m, const Dense& v, Backend be);
// row_sum: (r×c) → (r×1), summing over columns in index order
Dense row_sum(const Dense& a, Backend be);

// Block layout helpers used to batch symmetry-transformed points:
//   rows_to_cols: (S*M × B) → (M × S*B), out(i, s*B+b) = in(s*M+i, b)
//   cols_to_rows: exact inverse, (M × S*B) → (S*M × B) given B = out_cols
Dense rows_to_cols(const Dense& a, int block_rows, Backend be);
Dense cols_to_rows(const Dense& a, int out_cols, Backend be);

Dense tile_cols(const Dense& a, int times, Backend be);
Dense sum_col_blocks(const Dense& a, int blocks, Backend be);

}  // namespace kern
}  // namespace noether
