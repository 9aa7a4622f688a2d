#pragma once

#include <cstdint>
#include <unordered_map>
#include <vector>

#include "noether/dense.hpp"

namespace noether::ad {

enum class Op : uint8_t {
    Leaf,   // parameter leaf: receives an adjoint in backward()
    Const,  // constant leaf: no gradient tracking
    Add,
    AddN,
    Sub,
    Neg,
    Mul,    // elementwise, same shape
    Scale,  // multiply by compile-time-constant scalar
    MatMul,
    Transpose,
    Sum,      // full reduction to 1×1
    RowSum,   // (r×c) → (r×1)
    AddColVec,
    Log,
    Exp,
    Recip,
    Elu,
    EluDeriv,  // elu'(x) computed from x and the cached elu(x)
    Slice,
    Embed,
    TileCols,
    SumColBlocks,
    RowsToCols,
    ColsToRows,
    ConcatRows,
    BroadcastScalar,
};

class Graph;

/// Lightweight handle into a Graph's arena. Node indices are append-ordered,
/// so index order is a topological order of the DAG.
struct Node {
    Graph* g = nullptr;
    int32_t idx = -1;

    bool valid() const { return g != nullptr && idx >= 0; }
    const Dense& value() const;
    int rows() const { return value().rows(); }
    int cols() const { return value().cols(); }
    double scalar() const;  // value()(0,0); throws if not 1×1
};

/// Reverse-mode tape with eager evaluation. Values are immutable once a node
/// is created. grad() emits the adjoint computation as new graph nodes, so
/// gradients are themselves differentiable (one extra level is all the
/// library needs; the mechanism supports more). backward() is the raw sweep
/// used once per training step. Graphs are single-threaded; the kernels
/// underneath may parallelize.
class Graph {
  public:
    Node param(Dense v);
    Node constant(Dense v);
    Node constant_scalar(double v);

    Node add(Node a, Node b);
    Node add_n(const std::vector<Node>& xs);
    Node sub(Node a, Node b);
    Node neg(Node a);
    Node mul(Node a, Node b);
    Node scale(Node a, double s);
    Node matmul(Node a, Node b);
    Node transpose(Node a);
    Node sum(Node a);
    Node row_sum(Node a);
    Node add_colvec(Node m, Node v);
    Node log(Node a);
    Node exp(Node a);
    Node recip(Node a);
    Node elu(Node a, double alpha);
    Node slice(Node a, int r0, int c0, int rows, int cols);
    Node embed(Node a, int out_rows, int out_cols, int r0, int c0);
    Node tile_cols(Node a, int times);
    Node sum_col_blocks(Node a, int blocks);
    Node rows_to_cols(Node a, int block_rows);
    Node cols_to_rows(Node a, int out_cols);
    Node concat_rows(const std::vector<Node>& xs);
    Node broadcast_scalar(Node s, int rows, int cols);

    /// ∂f/∂x as a graph node (f must be 1×1). Only nodes on x↝f paths get
    /// adjoint nodes; the result has x's shape and is itself differentiable.
    Node grad(Node f, Node x);

    /// Raw reverse sweep from scalar f. Afterwards adjoint(leaf) returns
    /// ∂f/∂leaf for every Leaf node that f depends on.
    void backward(Node f);
    bool has_adjoint(Node leaf) const;
    const Dense& adjoint(Node leaf) const;

    size_t size() const { return recs_.size(); }
    const Dense& value_of(int32_t idx) const { return recs_[idx].value; }
    bool needs_grad(Node n) const { return recs_[n.idx].needs_grad; }

    /// Approximate resident bytes of all node values (for batch sizing).
    size_t value_bytes() const;

  private:
    struct Rec {
        Op op;
        double s0 = 0.0;  // scale factor / elu alpha
        int i0 = 0, i1 = 0, i2 = 0, i3 = 0;
        std::vector<int32_t> parents;
        Dense value;
        bool needs_grad = false;
    };

    Node push(Op op, Dense value, std::vector<int32_t> parents, double s0 = 0.0, int i0 = 0, int i1 = 0,
              int i2 = 0, int i3 = 0);
    void vjp_node(int32_t idx, Node g, std::vector<std::vector<int32_t>>& contribs, const std::vector<char>& relevant);
    void vjp_dense(int32_t idx, const Dense& g, std::vector<Dense>& adj, std::vector<char>& has);
    static void acc_dense(Dense& slot, bool& present);

    std::vector<Rec> recs_;
    std::unordered_map<int32_t, Dense> leaf_adjoints_;

    friend struct Node;
};

// Operator sugar for readable formulas (elementwise semantics).
inline Node operator+(Node a, Node b) { return a.g->add(a, b); }
inline Node operator-(Node a, Node b) { return a.g->sub(a, b); }
inline Node operator*(Node a, Node b) { return a.g->mul(a, b); }
inline Node operator-(Node a) { return a.g->neg(a); }
inline Node operator*(double s, Node a) { return a.g->scale(a, s); }
inline Node operator*(Node a, double s) { return a.g->scale(a, s); }

}  // namespace noether::ad
