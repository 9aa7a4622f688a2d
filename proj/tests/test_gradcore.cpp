#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "noether/graph.hpp"
#include "noether/kernels.hpp"
#include "noether/matexp.hpp"
#include "noether/rng.hpp"
#include "noether/svd.hpp"
#include "oracles.hpp"

using namespace noether;
using ad::Graph;
using ad::Node;
using oracles::fd_gradient;
using oracles::random_dense;
using oracles::rel_err;

namespace {

Dense rotation_j2() { return Dense::from_rows({{0.0, 1.0}, {-1.0, 0.0}}); }

// Tiny 2-layer tanh-free MLP used by several gradient checks: scalar output
// h = w2ᵀ elu(W1 x + b1). Parameters packed into one flat Dense so the FD
// oracle can perturb everything uniformly.
struct TinyNet {
    int in = 3, hid = 4;
    int n_params() const { return hid * in + hid + hid; }

    double eval(const Dense& theta, const Dense& x) const {
        Graph g;
        Node t = g.constant(theta.clone());
        Node xs = g.constant(x.clone());
        return forward(g, t, xs).scalar();
    }

    Node forward(Graph& g, Node theta, Node x) const {
        Node w1 = g.slice(theta, 0, 0, hid * in, 1);
        Node b1 = g.slice(theta, hid * in, 0, hid, 1);
        Node w2 = g.slice(theta, hid * in + hid, 0, hid, 1);
        // reshape w1 (hid*in ×1) into (hid×in) via per-row slices
        std::vector<Node> rows;
        for (int r = 0; r < hid; ++r) rows.push_back(g.transpose(g.slice(w1, r * in, 0, in, 1)));
        Node w1m = g.concat_rows(rows);
        Node z = g.add(g.matmul(w1m, x), b1);
        Node h = g.elu(z, 1.3);
        return g.matmul(g.transpose(w2), h);
    }
};

}  // namespace

TEST_CASE("dense basics and error contracts") {
    Dense a = Dense::from_rows({{1, 2}, {3, 4}});
    CHECK(a(1, 0) == 3.0);
    CHECK(a.frobenius_norm() == doctest::Approx(std::sqrt(30.0)));
    CHECK_THROWS_AS(kern::add(a, Dense(3, 3), Backend::Serial), ShapeError);
    CHECK_THROWS_AS(kern::gemm(a, false, Dense(3, 3), false, Backend::Serial), ShapeError);
}

TEST_CASE("serial and parallel kernels agree") {
    Rng rng(11);
    for (int trial = 0; trial < 10; ++trial) {
        const int m = 1 + static_cast<int>(rng.next_u64() % 40);
        const int k = 1 + static_cast<int>(rng.next_u64() % 40);
        const int n = 1 + static_cast<int>(rng.next_u64() % 40);
        Dense a = random_dense(rng, m, k), b = random_dense(rng, k, n);
        Dense cs = kern::gemm(a, false, b, false, Backend::Serial);
        Dense cp = kern::gemm(a, false, b, false, Backend::Parallel);
        CHECK(rel_frob_err(cp, cs) < 1e-13);

        Dense ts = kern::gemm(b, true, a, true, Backend::Serial);
        Dense tp = kern::gemm(b, true, a, true, Backend::Parallel);
        REQUIRE(ts.rows() == n);
        REQUIRE(ts.cols() == m);
        CHECK(rel_frob_err(tp, ts) < 1e-13);

        Dense e = random_dense(rng, m, k);
        CHECK(rel_frob_err(kern::mul(a, e, Backend::Parallel), kern::mul(a, e, Backend::Serial)) < 1e-15);
        CHECK(kern::sum_all(a, Backend::Parallel) == doctest::Approx(kern::sum_all(a, Backend::Serial)).epsilon(1e-13));
    }
}

TEST_CASE("block layout kernels invert each other") {
    Rng rng(5);
    const int m = 3, s = 4, b = 5;
    Dense z = random_dense(rng, s * m, b);
    Dense y = kern::rows_to_cols(z, m, Backend::Serial);
    REQUIRE(y.rows() == m);
    REQUIRE(y.cols() == s * b);
    // spot-check the layout contract: y(i, s*B+b) = z(s*M+i, b)
    CHECK(y(1, 2 * b + 3) == z(2 * m + 1, 3));
    Dense z2 = kern::cols_to_rows(y, b, Backend::Serial);
    CHECK(frob_dist(z, z2) == 0.0);

    Dense t = kern::tile_cols(z, 3, Backend::Parallel);
    Dense back = kern::sum_col_blocks(t, 3, Backend::Parallel);
    CHECK(rel_frob_err(back, kern::scale(z, 3.0, Backend::Serial)) < 1e-15);
}

// --- matexp -----------------------------------------------------------------

TEST_CASE("matexp of zero is identity") {
    Dense z(3, 3);
    CHECK(frob_dist(matexp(z), Dense::identity(3)) == 0.0);
}

TEST_CASE("matexp rotation by pi/2") {
    const double half_pi = 1.5707963267948966;
    Dense m = kern::scale(rotation_j2(), half_pi, Backend::Serial);
    Dense e = matexp(m);
    // series oracle at machine precision
    Dense want = oracles::series_matexp(m);
    CHECK(rel_frob_err(e, want) < 1e-14);
    CHECK(rel_frob_err(e, rotation_j2()) < 1e-14);
}

TEST_CASE("matexp accuracy up to norm 10 against series oracle") {
    Rng rng(42);
    for (int trial = 0; trial < 6; ++trial) {
        Dense m = random_dense(rng, 5, 5, -1.0, 1.0);
        const double target = 0.3 + 9.5 * rng.uniform01();
        m = kern::scale(m, target / m.frobenius_norm(), Backend::Serial);
        CHECK(rel_frob_err(matexp(m), oracles::series_matexp(m)) < 1e-10);
    }
}

TEST_CASE("matexp error contracts") {
    CHECK_THROWS_AS(matexp(Dense(2, 3)), ShapeError);
    Dense bad(2, 2);
    bad(0, 0) = std::nan("");
    CHECK_THROWS_AS(matexp(bad), DomainError);
}

TEST_CASE("matexp inverse and additivity properties") {
    Rng rng(7);
    for (int trial = 0; trial < 5; ++trial) {
        Dense m = random_dense(rng, 4, 4, -1.0, 1.0);
        m = kern::scale(m, rng.uniform(0.5, 5.0) / m.frobenius_norm(), Backend::Serial);
        Dense prod = kern::gemm(matexp(m), false, matexp(kern::neg(m, Backend::Serial)), false, Backend::Serial);
        CHECK(frob_dist(prod, Dense::identity(4)) < 1e-9);

        const double s = rng.uniform(-2.0, 2.0), t = rng.uniform(-2.0, 2.0);
        Dense lhs = matexp(kern::scale(m, s + t, Backend::Serial));
        Dense rhs = kern::gemm(matexp(kern::scale(m, s, Backend::Serial)), false,
                               matexp(kern::scale(m, t, Backend::Serial)), false, Backend::Serial);
        CHECK(frob_dist(lhs, rhs) < 1e-9);
    }
}

TEST_CASE("matexp gradient vs finite differences") {
    Rng rng(3);
    Dense m = random_dense(rng, 4, 4, -0.8, 0.8);
    Dense v = random_dense(rng, 4, 1);
    Dense u = random_dense(rng, 4, 1);

    Graph g;
    Node mn = g.param(m.clone());
    Node s = g.matmul(g.transpose(g.constant(u.clone())), g.matmul(matexp(g, mn), g.constant(v.clone())));
    g.backward(s);
    Dense got = g.adjoint(mn).clone();

    Dense want = fd_gradient(
        [&](const Dense& mm) {
            Dense ev = kern::gemm(matexp(mm), false, v, false, Backend::Serial);
            double acc = 0.0;
            for (int i = 0; i < 4; ++i) acc += u(i, 0) * ev(i, 0);
            return acc;
        },
        m, 1e-5);
    CHECK(rel_err(got, want) < 1e-5);
}

// --- grad / backward --------------------------------------------------------

TEST_CASE("grad of quadratic form returns the point") {
    Rng rng(1);
    Dense x = random_dense(rng, 5, 1);
    Graph g;
    Node xn = g.param(x.clone());
    Node f = g.scale(g.sum(g.mul(xn, xn)), 0.5);
    Node gx = g.grad(f, xn);
    CHECK(frob_dist(gx.value(), x) < 1e-14);
}

TEST_CASE("grad of linear form and its derivative in the coefficients") {
    Rng rng(2);
    Dense a = random_dense(rng, 4, 1), x = random_dense(rng, 4, 1), v = random_dense(rng, 4, 1);
    Graph g;
    Node an = g.param(a.clone());
    Node xn = g.param(x.clone());
    Node f = g.matmul(g.transpose(an), xn);
    Node gx = g.grad(f, xn);
    CHECK(frob_dist(gx.value(), a) < 1e-15);

    // s = grad·v = aᵀv, so ds/da = v: second-order mixed derivative through grad
    Node s = g.matmul(g.transpose(gx), g.constant(v.clone()));
    g.backward(s);
    CHECK(frob_dist(g.adjoint(an), v) < 1e-15);
}

TEST_CASE("grad rejects non-scalar functions") {
    Graph g;
    Node x = g.param(Dense::full(3, 1, 1.0));
    CHECK_THROWS_AS(g.grad(x, x), ShapeError);
    CHECK_THROWS_AS(g.backward(x), ShapeError);
}

TEST_CASE("network gradient and nested mixed derivative vs finite differences") {
    TinyNet net;
    Rng rng(9);
    Dense theta = random_dense(rng, net.n_params(), 1, -1.0, 1.0);
    Dense x = random_dense(rng, net.in, 1);
    Dense v = random_dense(rng, net.in, 1);

    // first order: ∂f/∂x
    Graph g;
    Node tn = g.param(theta.clone());
    Node xn = g.param(x.clone());
    Node f = net.forward(g, tn, xn);
    Node gx = g.grad(f, xn);
    Dense want_gx = fd_gradient([&](const Dense& xx) { return net.eval(theta, xx); }, x, 1e-5);
    CHECK(rel_err(gx.value(), want_gx) < 1e-5);

    // second order: ∂/∂θ of (∇_x f · v)
    Node s = g.matmul(g.transpose(gx), g.constant(v.clone()));
    g.backward(s);
    Dense got_mixed = g.adjoint(tn).clone();
    Dense want_mixed = fd_gradient(
        [&](const Dense& tt) {
            Graph gi;
            Node ti = gi.constant(tt.clone());
            Node xi = gi.param(x.clone());
            Node fi = net.forward(gi, ti, xi);
            Node gxi = gi.grad(fi, xi);
            double acc = 0.0;
            for (int i = 0; i < net.in; ++i) acc += gxi.value()(i, 0) * v(i, 0);
            return acc;
        },
        theta, 1e-5);
    CHECK(rel_err(got_mixed, want_mixed) < 1e-4);
}

TEST_CASE("per-op gradients vs finite differences") {
    Rng rng(21);
    auto check_op = [&](const char* name, auto&& build, int r, int c) {
        Dense x0 = random_dense(rng, r, c);
        Graph g;
        Node xn = g.param(x0.clone());
        Node y = build(g, xn);
        g.backward(y);
        Dense got = g.adjoint(xn).clone();
        Dense want = fd_gradient(
            [&](const Dense& xx) {
                Graph gi;
                return build(gi, gi.param(xx.clone())).scalar();
            },
            x0, 1e-5);
        INFO(name);
        CHECK(rel_err(got, want) < 1e-4);
    };

    Rng aux(99);
    Dense other = random_dense(aux, 3, 4);
    Dense w = random_dense(aux, 2, 3);
    Dense cvec = random_dense(aux, 3, 1);

    check_op("mul+sum", [&](Graph& g, Node x) { return g.sum(g.mul(x, g.constant(other.clone()))); }, 3, 4);
    check_op("matmul", [&](Graph& g, Node x) { return g.sum(g.matmul(g.constant(w.clone()), x)); }, 3, 4);
    check_op("transpose", [&](Graph& g, Node x) { return g.sum(g.mul(g.transpose(x), g.transpose(g.constant(other.clone())))); }, 3, 4);
    check_op("exp", [&](Graph& g, Node x) { return g.sum(g.exp(g.scale(x, 0.3))); }, 3, 4);
    check_op("log", [&](Graph& g, Node x) { return g.sum(g.log(g.add(g.mul(x, x), g.constant(Dense::full(3, 4, 1.0))))); }, 3, 4);
    check_op("recip", [&](Graph& g, Node x) { return g.sum(g.recip(g.add(g.mul(x, x), g.constant(Dense::full(3, 4, 1.5))))); }, 3, 4);
    check_op("elu", [&](Graph& g, Node x) { return g.sum(g.elu(x, 1.7)); }, 3, 4);
    check_op("slice", [&](Graph& g, Node x) { return g.sum(g.slice(x, 1, 1, 2, 3)); }, 3, 4);
    check_op("embed", [&](Graph& g, Node x) { return g.sum(g.mul(g.embed(x, 5, 6, 1, 2), g.constant(Dense::full(5, 6, 0.7)))); }, 3, 4);
    check_op("row_sum", [&](Graph& g, Node x) { return g.sum(g.mul(g.row_sum(x), g.constant(cvec.clone()))); }, 3, 4);
    check_op("add_colvec", [&](Graph& g, Node x) { return g.sum(g.add_colvec(g.constant(other.clone()), x)); }, 3, 1);
    check_op("tile_cols", [&](Graph& g, Node x) { return g.sum(g.mul(g.tile_cols(x, 2), g.constant(Dense::full(3, 8, 0.5)))); }, 3, 4);
    check_op("sum_col_blocks", [&](Graph& g, Node x) { return g.sum(g.sum_col_blocks(x, 2)); }, 3, 4);
    check_op("rows_to_cols", [&](Graph& g, Node x) { return g.sum(g.mul(g.rows_to_cols(x, 2), g.constant(Dense::full(2, 8, 0.3)))); }, 4, 4);
    check_op("cols_to_rows", [&](Graph& g, Node x) { return g.sum(g.mul(g.cols_to_rows(x, 2), g.constant(Dense::full(8, 2, 0.3)))); }, 4, 4);
    check_op("concat_rows", [&](Graph& g, Node x) {
        std::vector<Node> parts{x, g.constant(other.clone()), x};
        return g.sum(g.concat_rows(parts));
    }, 3, 4);
    check_op("broadcast_scalar", [&](Graph& g, Node x) {
        return g.sum(g.mul(g.broadcast_scalar(g.sum(x), 3, 4), g.constant(other.clone())));
    }, 3, 4);
}

TEST_CASE("nested differentiation consistency on a composite expression") {
    // ∂/∂θ [∇_x f · v] for f = sum(elu(W x)ᵀ elu(W x))/2-ish composite
    Rng rng(31);
    Dense w0 = random_dense(rng, 4, 3, -1.0, 1.0);
    Dense x0 = random_dense(rng, 3, 1);
    Dense v = random_dense(rng, 3, 1);
    auto inner_dot = [&](const Dense& ww) {
        Graph gi;
        Node wn = gi.constant(ww.clone());
        Node xn = gi.param(x0.clone());
        Node h = gi.elu(gi.matmul(wn, xn), 0.9);
        Node f = gi.scale(gi.sum(gi.mul(h, h)), 0.5);
        Node gx = gi.grad(f, xn);
        double acc = 0.0;
        for (int i = 0; i < 3; ++i) acc += gx.value()(i, 0) * v(i, 0);
        return acc;
    };
    Graph g;
    Node wn = g.param(w0.clone());
    Node xn = g.param(x0.clone());
    Node h = g.elu(g.matmul(wn, xn), 0.9);
    Node f = g.scale(g.sum(g.mul(h, h)), 0.5);
    Node gx = g.grad(f, xn);
    Node s = g.matmul(g.transpose(gx), g.constant(v.clone()));
    g.backward(s);
    Dense want = fd_gradient(inner_dot, w0, 1e-5);
    CHECK(rel_err(g.adjoint(wn), want) < 1e-4);
}

// --- svd ---------------------------------------------------------------------

TEST_CASE("svd of identity") {
    SvdResult r = svd(Dense::identity(4));
    for (double s : r.sigma) CHECK(s == doctest::Approx(1.0));
}

TEST_CASE("svd of rank-1 outer product") {
    Rng rng(13);
    Dense u = random_dense(rng, 6, 1);
    Dense v = random_dense(rng, 5, 1);
    const double nu = u.frobenius_norm(), nv = v.frobenius_norm();
    for (long long i = 0; i < u.size(); ++i) u.data()[i] *= 2.0 / nu;
    for (long long i = 0; i < v.size(); ++i) v.data()[i] *= 3.0 / nv;
    Dense m = kern::gemm(u, false, v, true, Backend::Serial);
    SvdResult r = svd(m);
    CHECK(r.sigma[0] == doctest::Approx(6.0).epsilon(1e-10));
    for (size_t i = 1; i < r.sigma.size(); ++i) CHECK(std::fabs(r.sigma[i]) < 1e-10);
}

TEST_CASE("svd singular values match eigensolver oracle and reconstruct") {
    Rng rng(17);
    Dense m = random_dense(rng, 5, 9);
    SvdResult r = svd(m);
    // σ² = eigenvalues of m mᵀ
    Dense mmt = kern::gemm(m, false, m, true, Backend::Serial);
    std::vector<double> ev = oracles::jacobi_eigenvalues(mmt);
    REQUIRE(r.sigma.size() == 5);
    for (int i = 0; i < 5; ++i) CHECK(std::fabs(r.sigma[i] * r.sigma[i] - ev[i]) < 1e-8);
    // descending and reconstruction
    for (size_t i = 1; i < r.sigma.size(); ++i) CHECK(r.sigma[i] <= r.sigma[i - 1] + 1e-15);
    Dense us = r.u.clone();
    for (int i = 0; i < us.rows(); ++i)
        for (int j = 0; j < us.cols(); ++j) us(i, j) *= r.sigma[j];
    Dense rec = kern::gemm(us, false, r.v, true, Backend::Serial);
    CHECK(rel_frob_err(rec, m) < 1e-8);
}
