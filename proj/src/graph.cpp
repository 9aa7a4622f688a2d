#include "noether/graph.hpp"

#include <algorithm>
#include <cmath>

#include "noether/kernels.hpp"

namespace noether::ad {

using kern::gemm;
using kern::gemm_acc;

namespace {
inline Backend be() { return runtime::active(); }
}

const Dense& Node::value() const { return g->value_of(idx); }

double Node::scalar() const {
    const Dense& v = value();
    if (v.rows() != 1 || v.cols() != 1) throw ShapeError("scalar() on non-1×1 node " + v.shape_str());
    return v(0, 0);
}

Node Graph::push(Op op, Dense value, std::vector<int32_t> parents, double s0, int i0, int i1, int i2, int i3) {
    Rec r;
    r.op = op;
    r.s0 = s0;
    r.i0 = i0;
    r.i1 = i1;
    r.i2 = i2;
    r.i3 = i3;
    r.needs_grad = (op == Op::Leaf);
    for (int32_t p : parents) r.needs_grad = r.needs_grad || recs_[p].needs_grad;
    r.parents = std::move(parents);
    r.value = std::move(value);
    recs_.push_back(std::move(r));
    return Node{this, static_cast<int32_t>(recs_.size() - 1)};
}

Node Graph::param(Dense v) { return push(Op::Leaf, std::move(v), {}); }
Node Graph::constant(Dense v) { return push(Op::Const, std::move(v), {}); }

Node Graph::constant_scalar(double v) {
    Dense d(1, 1);
    d(0, 0) = v;
    return constant(std::move(d));
}

Node Graph::add(Node a, Node b) { return push(Op::Add, kern::add(a.value(), b.value(), be()), {a.idx, b.idx}); }

Node Graph::add_n(const std::vector<Node>& xs) {
    if (xs.empty()) throw ShapeError("add_n: empty");
    if (xs.size() == 1) return xs[0];
    Dense acc = xs[0].value().clone();
    std::vector<int32_t> ps;
    ps.reserve(xs.size());
    ps.push_back(xs[0].idx);
    for (size_t i = 1; i < xs.size(); ++i) {
        kern::axpy(acc, xs[i].value(), 1.0, be());
        ps.push_back(xs[i].idx);
    }
    return push(Op::AddN, std::move(acc), std::move(ps));
}

Node Graph::sub(Node a, Node b) { return push(Op::Sub, kern::sub(a.value(), b.value(), be()), {a.idx, b.idx}); }
Node Graph::neg(Node a) { return push(Op::Neg, kern::neg(a.value(), be()), {a.idx}); }
Node Graph::mul(Node a, Node b) { return push(Op::Mul, kern::mul(a.value(), b.value(), be()), {a.idx, b.idx}); }
Node Graph::scale(Node a, double s) { return push(Op::Scale, kern::scale(a.value(), s, be()), {a.idx}, s); }

Node Graph::matmul(Node a, Node b) {
    return push(Op::MatMul, gemm(a.value(), false, b.value(), false, be()), {a.idx, b.idx});
}

Node Graph::transpose(Node a) { return push(Op::Transpose, kern::transpose(a.value(), be()), {a.idx}); }

Node Graph::sum(Node a) {
    Dense s(1, 1);
    s(0, 0) = kern::sum_all(a.value(), be());
    return push(Op::Sum, std::move(s), {a.idx}, 0.0, a.rows(), a.cols());
}

Node Graph::row_sum(Node a) { return push(Op::RowSum, kern::row_sum(a.value(), be()), {a.idx}, 0.0, a.cols()); }

Node Graph::add_colvec(Node m, Node v) {
    return push(Op::AddColVec, kern::add_colvec(m.value(), v.value(), be()), {m.idx, v.idx});
}

Node Graph::log(Node a) { return push(Op::Log, kern::log_ew(a.value(), be()), {a.idx}); }
Node Graph::exp(Node a) { return push(Op::Exp, kern::exp_ew(a.value(), be()), {a.idx}); }
Node Graph::recip(Node a) { return push(Op::Recip, kern::recip_ew(a.value(), be()), {a.idx}); }

Node Graph::elu(Node a, double alpha) {
    return push(Op::Elu, kern::elu(a.value(), alpha, be()), {a.idx}, alpha);
}

Node Graph::slice(Node a, int r0, int c0, int rows, int cols) {
    if (r0 < 0 || c0 < 0 || r0 + rows > a.rows() || c0 + cols > a.cols())
        throw ShapeError("slice out of range on " + a.value().shape_str());
    Dense out = Dense::uninit(rows, cols);
    const Dense& v = a.value();
    for (int i = 0; i < rows; ++i)
        for (int j = 0; j < cols; ++j) out(i, j) = v(r0 + i, c0 + j);
    return push(Op::Slice, std::move(out), {a.idx}, 0.0, r0, c0, rows, cols);
}

Node Graph::embed(Node a, int out_rows, int out_cols, int r0, int c0) {
    if (r0 < 0 || c0 < 0 || r0 + a.rows() > out_rows || c0 + a.cols() > out_cols)
        throw ShapeError("embed out of range");
    Dense out(out_rows, out_cols);
    const Dense& v = a.value();
    for (int i = 0; i < v.rows(); ++i)
        for (int j = 0; j < v.cols(); ++j) out(r0 + i, c0 + j) = v(i, j);
    return push(Op::Embed, std::move(out), {a.idx}, 0.0, r0, c0, out_rows, out_cols);
}

Node Graph::tile_cols(Node a, int times) {
    return push(Op::TileCols, kern::tile_cols(a.value(), times, be()), {a.idx}, 0.0, times);
}

Node Graph::sum_col_blocks(Node a, int blocks) {
    return push(Op::SumColBlocks, kern::sum_col_blocks(a.value(), blocks, be()), {a.idx}, 0.0, blocks);
}

Node Graph::rows_to_cols(Node a, int block_rows) {
    return push(Op::RowsToCols, kern::rows_to_cols(a.value(), block_rows, be()), {a.idx}, 0.0, block_rows,
                a.cols());
}

Node Graph::cols_to_rows(Node a, int out_cols) {
    return push(Op::ColsToRows, kern::cols_to_rows(a.value(), out_cols, be()), {a.idx}, 0.0, out_cols, a.rows());
}

Node Graph::concat_rows(const std::vector<Node>& xs) {
    if (xs.empty()) throw ShapeError("concat_rows: empty");
    const int cols = xs[0].cols();
    int rows = 0;
    for (const Node& x : xs) {
        if (x.cols() != cols) throw ShapeError("concat_rows: column mismatch");
        rows += x.rows();
    }
    Dense out = Dense::uninit(rows, cols);
    std::vector<int32_t> ps;
    ps.reserve(xs.size());
    int off = 0;
    for (const Node& x : xs) {
        const Dense& v = x.value();
        std::copy(v.data(), v.data() + v.size(), out.data() + static_cast<long long>(off) * cols);
        off += v.rows();
        ps.push_back(x.idx);
    }
    return push(Op::ConcatRows, std::move(out), std::move(ps));
}

Node Graph::broadcast_scalar(Node s, int rows, int cols) {
    if (s.rows() != 1 || s.cols() != 1) throw ShapeError("broadcast_scalar: source not 1×1");
    return push(Op::BroadcastScalar, Dense::full(rows, cols, s.value()(0, 0)), {s.idx}, 0.0, rows, cols);
}

size_t Graph::value_bytes() const {
    size_t b = 0;
    for (const Rec& r : recs_) b += sizeof(double) * static_cast<size_t>(r.value.size());
    return b;
}

// ---------------------------------------------------------------------------
// Node-mode adjoints: grad() re-enters the op builders so the returned
// gradient is itself a differentiable graph expression.
// ---------------------------------------------------------------------------

void Graph::vjp_node(int32_t idx, Node g, std::vector<std::vector<int32_t>>& contribs,
                     const std::vector<char>& relevant) {
    // Copy the record header: the builders below append to recs_ and may
    // reallocate it, which would invalidate a reference.
    const Op op = recs_[idx].op;
    const double s0 = recs_[idx].s0;
    const int i0 = recs_[idx].i0, i1 = recs_[idx].i1;
    const std::vector<int32_t> parents = recs_[idx].parents;
    struct RecView {
        Op op;
        double s0;
        int i0, i1;
        const std::vector<int32_t>& parents;
    } r{op, s0, i0, i1, parents};
    auto send = [&](int32_t parent, Node n) {
        if (relevant[parent]) contribs[parent].push_back(n.idx);
    };
    auto parent_node = [&](int k) { return Node{this, r.parents[k]}; };
    Node self{this, idx};

    switch (r.op) {
        case Op::Leaf:
        case Op::Const:
            break;
        case Op::Add:
            send(r.parents[0], g);
            send(r.parents[1], g);
            break;
        case Op::AddN:
            for (int32_t p : r.parents) send(p, g);
            break;
        case Op::Sub:
            send(r.parents[0], g);
            if (relevant[r.parents[1]]) send(r.parents[1], neg(g));
            break;
        case Op::Neg:
            send(r.parents[0], neg(g));
            break;
        case Op::Mul:
            if (relevant[r.parents[0]]) send(r.parents[0], mul(g, parent_node(1)));
            if (relevant[r.parents[1]]) send(r.parents[1], mul(g, parent_node(0)));
            break;
        case Op::Scale:
            send(r.parents[0], scale(g, r.s0));
            break;
        case Op::MatMul:
            if (relevant[r.parents[0]]) send(r.parents[0], matmul(g, transpose(parent_node(1))));
            if (relevant[r.parents[1]]) send(r.parents[1], matmul(transpose(parent_node(0)), g));
            break;
        case Op::Transpose:
            send(r.parents[0], transpose(g));
            break;
        case Op::Sum:
            send(r.parents[0], broadcast_scalar(g, r.i0, r.i1));
            break;
        case Op::RowSum:
            send(r.parents[0], tile_cols(g, r.i0));
            break;
        case Op::AddColVec:
            send(r.parents[0], g);
            if (relevant[r.parents[1]]) send(r.parents[1], row_sum(g));
            break;
        case Op::Log:
            if (relevant[r.parents[0]]) send(r.parents[0], mul(g, recip(parent_node(0))));
            break;
        case Op::Exp:
            if (relevant[r.parents[0]]) send(r.parents[0], mul(g, self));
            break;
        case Op::Recip:
            if (relevant[r.parents[0]]) send(r.parents[0], neg(mul(g, mul(self, self))));
            break;
        case Op::Elu: {
            if (relevant[r.parents[0]]) {
                Dense dval = kern::elu_deriv_from_value(parent_node(0).value(), recs_[idx].value, r.s0, be());
                Node d = push(Op::EluDeriv, std::move(dval), {r.parents[0], idx}, r.s0);
                send(r.parents[0], mul(g, d));
            }
            break;
        }
        case Op::EluDeriv: {
            // d(elu')/d(elu) = [x<=0]; the x parent carries no a.e. derivative.
            if (relevant[r.parents[1]]) {
                Node mask = constant(kern::nonpos_mask(parent_node(0).value(), be()));
                send(r.parents[1], mul(g, mask));
            }
            break;
        }
        case Op::Slice: {
            const Dense& pv = parent_node(0).value();
            send(r.parents[0], embed(g, pv.rows(), pv.cols(), r.i0, r.i1));
            break;
        }
        case Op::Embed:
            send(r.parents[0], slice(g, r.i0, r.i1, parent_node(0).rows(), parent_node(0).cols()));
            break;
        case Op::TileCols:
            send(r.parents[0], sum_col_blocks(g, r.i0));
            break;
        case Op::SumColBlocks:
            send(r.parents[0], tile_cols(g, r.i0));
            break;
        case Op::RowsToCols:
            send(r.parents[0], cols_to_rows(g, r.i1));
            break;
        case Op::ColsToRows:
            send(r.parents[0], rows_to_cols(g, r.i1));
            break;
        case Op::ConcatRows: {
            int off = 0;
            for (size_t k = 0; k < r.parents.size(); ++k) {
                const Dense& pv = recs_[r.parents[k]].value;
                if (relevant[r.parents[k]]) send(r.parents[k], slice(g, off, 0, pv.rows(), pv.cols()));
                off += pv.rows();
            }
            break;
        }
        case Op::BroadcastScalar:
            send(r.parents[0], sum(g));
            break;
    }
}

Node Graph::grad(Node f, Node x) {
    if (!f.valid() || !x.valid()) throw DomainError("grad: invalid node handle");
    if (f.rows() != 1 || f.cols() != 1) throw ShapeError("grad: function node must be scalar, got " + f.value().shape_str());
    const int32_t fi = f.idx, xi = x.idx;

    // ancestors of f (indices ≤ fi)
    std::vector<char> anc(static_cast<size_t>(fi) + 1, 0);
    anc[fi] = 1;
    for (int32_t i = fi; i >= 0; --i) {
        if (!anc[i]) continue;
        for (int32_t p : recs_[i].parents) anc[p] = 1;
    }
    // descendants of x among indices ≤ fi
    std::vector<char> relevant(static_cast<size_t>(fi) + 1, 0);
    if (xi <= fi && anc[xi]) {
        std::vector<char> desc(static_cast<size_t>(fi) + 1, 0);
        desc[xi] = 1;
        for (int32_t i = xi + 1; i <= fi; ++i) {
            for (int32_t p : recs_[i].parents) {
                if (p <= fi && desc[p]) {
                    desc[i] = 1;
                    break;
                }
            }
        }
        for (int32_t i = 0; i <= fi; ++i) relevant[i] = anc[i] && desc[i];
    }
    if (!relevant[xi]) return constant(Dense(x.rows(), x.cols()));

    std::vector<std::vector<int32_t>> contribs(static_cast<size_t>(fi) + 1);
    contribs[fi].push_back(constant_scalar(1.0).idx);
    for (int32_t i = fi; i >= xi; --i) {
        if (!relevant[i] || contribs[i].empty()) continue;
        Node adj;
        if (contribs[i].size() == 1) {
            adj = Node{this, contribs[i][0]};
        } else {
            std::vector<Node> terms;
            terms.reserve(contribs[i].size());
            for (int32_t c : contribs[i]) terms.push_back(Node{this, c});
            adj = add_n(terms);
        }
        if (i == xi) return adj;
        vjp_node(i, adj, contribs, relevant);
        contribs[i].clear();
    }
    return constant(Dense(x.rows(), x.cols()));  // unreachable
}

// ---------------------------------------------------------------------------
// Dense-mode adjoints: backward() is the single outer sweep per training
// step. Adjoints of interior nodes are freed as soon as they are consumed.
// ---------------------------------------------------------------------------

void Graph::vjp_dense(int32_t idx, const Dense& g, std::vector<Dense>& adj, std::vector<char>& has) {
    const Rec& r = recs_[idx];
    auto ensure = [&](int32_t p) -> Dense& {
        if (!has[p]) {
            const Dense& pv = recs_[p].value;
            adj[p] = Dense(pv.rows(), pv.cols());
            has[p] = 1;
        }
        return adj[p];
    };
    auto wants = [&](int k) { return recs_[r.parents[k]].needs_grad; };
    auto pval = [&](int k) -> const Dense& { return recs_[r.parents[k]].value; };

    switch (r.op) {
        case Op::Leaf:
        case Op::Const:
            break;
        case Op::Add:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), g, 1.0, be());
            if (wants(1)) kern::axpy(ensure(r.parents[1]), g, 1.0, be());
            break;
        case Op::AddN:
            for (int32_t p : r.parents)
                if (recs_[p].needs_grad) kern::axpy(ensure(p), g, 1.0, be());
            break;
        case Op::Sub:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), g, 1.0, be());
            if (wants(1)) kern::axpy(ensure(r.parents[1]), g, -1.0, be());
            break;
        case Op::Neg:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), g, -1.0, be());
            break;
        case Op::Mul:
            if (wants(0)) kern::mul_acc(ensure(r.parents[0]), g, pval(1), be());
            if (wants(1)) kern::mul_acc(ensure(r.parents[1]), g, pval(0), be());
            break;
        case Op::Scale:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), g, r.s0, be());
            break;
        case Op::MatMul:
            if (wants(0)) gemm_acc(ensure(r.parents[0]), g, false, pval(1), true, 1.0, be());
            if (wants(1)) gemm_acc(ensure(r.parents[1]), pval(0), true, g, false, 1.0, be());
            break;
        case Op::Transpose:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::transpose(g, be()), 1.0, be());
            break;
        case Op::Sum:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), Dense::full(r.i0, r.i1, 1.0), g(0, 0), be());
            break;
        case Op::RowSum:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::tile_cols(g, r.i0, be()), 1.0, be());
            break;
        case Op::AddColVec:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), g, 1.0, be());
            if (wants(1)) kern::axpy(ensure(r.parents[1]), kern::row_sum(g, be()), 1.0, be());
            break;
        case Op::Log:
            if (wants(0)) kern::mul_acc(ensure(r.parents[0]), g, kern::recip_ew(pval(0), be()), be());
            break;
        case Op::Exp:
            if (wants(0)) kern::mul_acc(ensure(r.parents[0]), g, r.value, be());
            break;
        case Op::Recip:
            if (wants(0)) {
                Dense gg = kern::mul(r.value, r.value, be());
                Dense term = kern::mul(g, gg, be());
                kern::axpy(ensure(r.parents[0]), term, -1.0, be());
            }
            break;
        case Op::Elu:
            if (wants(0)) {
                Dense d = kern::elu_deriv_from_value(pval(0), r.value, r.s0, be());
                kern::mul_acc(ensure(r.parents[0]), g, d, be());
            }
            break;
        case Op::EluDeriv:
            if (wants(1)) {
                Dense mask = kern::nonpos_mask(pval(0), be());
                kern::mul_acc(ensure(r.parents[1]), g, mask, be());
            }
            break;
        case Op::Slice: {
            if (wants(0)) {
                Dense& a = ensure(r.parents[0]);
                for (int i = 0; i < r.i2; ++i)
                    for (int j = 0; j < r.i3; ++j) a(r.i0 + i, r.i1 + j) += g(i, j);
            }
            break;
        }
        case Op::Embed: {
            if (wants(0)) {
                Dense& a = ensure(r.parents[0]);
                for (int i = 0; i < a.rows(); ++i)
                    for (int j = 0; j < a.cols(); ++j) a(i, j) += g(r.i0 + i, r.i1 + j);
            }
            break;
        }
        case Op::TileCols:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::sum_col_blocks(g, r.i0, be()), 1.0, be());
            break;
        case Op::SumColBlocks:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::tile_cols(g, r.i0, be()), 1.0, be());
            break;
        case Op::RowsToCols:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::cols_to_rows(g, r.i1, be()), 1.0, be());
            break;
        case Op::ColsToRows:
            if (wants(0)) kern::axpy(ensure(r.parents[0]), kern::rows_to_cols(g, r.i1, be()), 1.0, be());
            break;
        case Op::ConcatRows: {
            int off = 0;
            for (size_t k = 0; k < r.parents.size(); ++k) {
                const Dense& pv = recs_[r.parents[k]].value;
                if (recs_[r.parents[k]].needs_grad) {
                    Dense& a = ensure(r.parents[k]);
                    for (int i = 0; i < pv.rows(); ++i)
                        for (int j = 0; j < pv.cols(); ++j) a(i, j) += g(off + i, j);
                }
                off += pv.rows();
            }
            break;
        }
        case Op::BroadcastScalar:
            if (wants(0)) ensure(r.parents[0])(0, 0) += kern::sum_all(g, be());
            break;
    }
}

void Graph::backward(Node f) {
    if (f.rows() != 1 || f.cols() != 1) throw ShapeError("backward: node must be scalar");
    leaf_adjoints_.clear();
    const int32_t fi = f.idx;
    std::vector<Dense> adj(static_cast<size_t>(fi) + 1);
    std::vector<char> has(static_cast<size_t>(fi) + 1, 0);
    adj[fi] = Dense::full(1, 1, 1.0);
    has[fi] = 1;
    for (int32_t i = fi; i >= 0; --i) {
        if (!has[i] || !recs_[i].needs_grad) continue;
        if (recs_[i].op == Op::Leaf) {
            leaf_adjoints_.emplace(i, std::move(adj[i]));
        } else {
            vjp_dense(i, adj[i], adj, has);
        }
        adj[i] = Dense();  // release as soon as consumed
        has[i] = 0;
    }
}

bool Graph::has_adjoint(Node leaf) const { return leaf_adjoints_.count(leaf.idx) > 0; }

const Dense& Graph::adjoint(Node leaf) const {
    auto it = leaf_adjoints_.find(leaf.idx);
    if (it == leaf_adjoints_.end()) throw DomainError("adjoint: node has no gradient (not a reached Leaf)");
    return it->second;
}

}  // namespace noether::ad
