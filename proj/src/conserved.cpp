#include "noether/conserved.hpp"

#include <cmath>

#include "noether/kernels.hpp"
#include "noether/matexp.hpp"

namespace noether::sym {

QuadraticObservable::QuadraticObservable(Dense a, Dense b) {
    if (a.rows() != a.cols()) throw ShapeError("quadratic observable: A must be square");
    if (b.cols() != 1 || b.rows() != a.rows())
        throw ShapeError("quadratic observable: b " + b.shape_str() + " does not match A " + a.shape_str());
    if (a.rows() % 2 != 0) throw ShapeError("quadratic observable: phase dimension must be even");
    // symmetrize on write
    a_ = Dense::uninit(a.rows(), a.cols());
    for (int i = 0; i < a.rows(); ++i)
        for (int j = 0; j < a.cols(); ++j) a_(i, j) = 0.5 * (a(i, j) + a(j, i));
    b_ = std::move(b);
}

double QuadraticObservable::value(const Dense& x) const {
    if (x.cols() != 1 || x.rows() != dim()) throw ShapeError("observable value: bad phase point " + x.shape_str());
    double quad = 0.0, lin = 0.0;
    for (int i = 0; i < dim(); ++i) {
        lin += b_(i, 0) * x(i, 0);
        double row = 0.0;
        for (int j = 0; j < dim(); ++j) row += a_(i, j) * x(j, 0);
        quad += x(i, 0) * row;
    }
    return 0.5 * quad + lin;
}

Dense QuadraticObservable::grad(const Dense& x) const {
    if (x.cols() != 1 || x.rows() != dim()) throw ShapeError("observable grad: bad phase point");
    Dense g = kern::gemm(a_, false, x, false, runtime::active());
    kern::axpy(g, b_, 1.0, runtime::active());
    return g;
}

Dense QuadraticObservable::generator() const {
    const int m = dim();
    const Dense ja = kern::gemm(dyn::symplectic_form(m), false, a_, false, runtime::active());
    const Dense jb = dyn::apply_symplectic(b_);
    Dense g(m + 1, m + 1);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) g(i, j) = ja(i, j);
        g(i, m) = jb(i, 0);
    }
    return g;
}

void SymmetryBank::validate() const {
    for (const auto& q : quantities)
        if (q.dim() != dim()) throw ShapeError("symmetry bank: mixed phase dimensions");
}

SymmetryBank random_bank(int k, int phase_dim, double init_std, Rng& rng) {
    SymmetryBank bank;
    bank.quantities.reserve(static_cast<size_t>(k));
    for (int i = 0; i < k; ++i) {
        Dense a = Dense::uninit(phase_dim, phase_dim);
        for (long long j = 0; j < a.size(); ++j) a.data()[j] = rng.normal(0.0, init_std);
        Dense b = Dense::uninit(phase_dim, 1);
        for (long long j = 0; j < b.size(); ++j) b.data()[j] = rng.normal(0.0, init_std);
        bank.quantities.emplace_back(std::move(a), std::move(b));
    }
    return bank;
}

Dense sample_tau(const TauConfig& cfg, int k, int s, Rng& rng) {
    if (s < 1) throw DomainError("sample_tau: need S ≥ 1");
    if (cfg.measure == TauMeasure::Uniform && cfg.lo >= cfg.hi)
        throw DomainError("sample_tau: uniform measure needs lo < hi");
    Dense taus = Dense::uninit(s, std::max(k, 1));
    for (int i = 0; i < s; ++i)
        for (int j = 0; j < std::max(k, 1); ++j)
            taus(i, j) = cfg.measure == TauMeasure::Normal ? rng.normal() : rng.uniform(cfg.lo, cfg.hi);
    return taus;
}

namespace {

Dense apply_flow_matrix(const Dense& expg, const Dense& x) {
    const int m = x.rows();
    Dense out = Dense::uninit(m, 1);
    for (int i = 0; i < m; ++i) {
        double acc = expg(i, m);  // homogeneous column
        for (int j = 0; j < m; ++j) acc += expg(i, j) * x(j, 0);
        out(i, 0) = acc;
    }
    return out;
}

}  // namespace

Dense flow(const QuadraticObservable& c, double tau, const Dense& x) {
    if (x.cols() != 1 || x.rows() != c.dim()) throw ShapeError("flow: bad phase point");
    const Dense expg = matexp(kern::scale(c.generator(), tau, runtime::active()));
    return apply_flow_matrix(expg, x);
}

Dense combined_flow(const SymmetryBank& bank, const std::vector<double>& tau, const Dense& x) {
    if (static_cast<int>(tau.size()) != bank.k())
        throw ShapeError("combined_flow: tau length " + std::to_string(tau.size()) + " != K " +
                         std::to_string(bank.k()));
    if (bank.k() == 0) return x.clone();
    const int m = bank.dim();
    Dense gsum(m + 1, m + 1);
    for (int i = 0; i < bank.k(); ++i)
        kern::axpy(gsum, bank.quantities[static_cast<size_t>(i)].generator(), tau[static_cast<size_t>(i)],
                   runtime::active());
    return apply_flow_matrix(matexp(gsum), x);
}

double symmetrize(const dyn::ScalarField& h, const SymmetryBank& bank, const Dense& x, const Dense& taus) {
    if (bank.k() == 0) return h.value(x);
    if (taus.cols() != bank.k()) throw ShapeError("symmetrize: taus width != K");
    double acc = 0.0;
    std::vector<double> tau(static_cast<size_t>(bank.k()));
    for (int s = 0; s < taus.rows(); ++s) {
        for (int j = 0; j < bank.k(); ++j) tau[static_cast<size_t>(j)] = taus(s, j);
        acc += h.value(combined_flow(bank, tau, x));
    }
    return acc / taus.rows();
}

// --- graph-side -------------------------------------------------------------

BankNodes bank_to_graph(ad::Graph& g, const SymmetryBank& bank, bool trainable) {
    BankNodes nodes;
    for (const auto& q : bank.quantities) {
        if (trainable) {
            nodes.a_raw.push_back(g.param(q.a().clone()));
            nodes.b.push_back(g.param(q.b().clone()));
        } else {
            nodes.a_raw.push_back(g.constant(q.a().clone()));
            nodes.b.push_back(g.constant(q.b().clone()));
        }
    }
    return nodes;
}

SymmetryBank bank_from_graph(const BankNodes& nodes) {
    SymmetryBank bank;
    for (int i = 0; i < nodes.k(); ++i)
        bank.quantities.emplace_back(nodes.a_raw[static_cast<size_t>(i)].value().clone(),
                                     nodes.b[static_cast<size_t>(i)].value().clone());
    return bank;
}

ad::Node generator_node(ad::Graph& g, ad::Node a_raw, ad::Node b) {
    const int m = a_raw.rows();
    ad::Node a_sym = g.scale(g.add(a_raw, g.transpose(a_raw)), 0.5);
    ad::Node j = g.constant(dyn::symplectic_form(m));
    ad::Node ja = g.matmul(j, a_sym);
    ad::Node jb = g.matmul(j, b);
    return g.add(g.embed(ja, m + 1, m + 1, 0, 0), g.embed(jb, m + 1, m + 1, 0, m));
}

namespace {

ad::Node flow_map_from_generators(ad::Graph& g, const std::vector<ad::Node>& gens, const double* tau_row, int m) {
    std::vector<ad::Node> terms;
    terms.reserve(gens.size());
    for (size_t k = 0; k < gens.size(); ++k) terms.push_back(g.scale(gens[k], tau_row[k]));
    ad::Node expg = matexp(g, g.add_n(terms));
    return g.slice(expg, 0, 0, m, m + 1);
}

}  // namespace

ad::Node flow_map_node(ad::Graph& g, const BankNodes& bank, const double* tau_row) {
    const int m = bank.a_raw.front().rows();
    std::vector<ad::Node> gens;
    gens.reserve(static_cast<size_t>(bank.k()));
    for (int k = 0; k < bank.k(); ++k)
        gens.push_back(generator_node(g, bank.a_raw[static_cast<size_t>(k)], bank.b[static_cast<size_t>(k)]));
    return flow_map_from_generators(g, gens, tau_row, m);
}

ad::Node stacked_flow_maps(ad::Graph& g, const BankNodes& bank, const Dense& taus) {
    if (bank.k() == 0) throw DomainError("stacked_flow_maps: empty bank");
    if (taus.cols() != bank.k()) throw ShapeError("stacked_flow_maps: taus width != K");
    const int m = bank.a_raw.front().rows();
    std::vector<ad::Node> gens;
    gens.reserve(static_cast<size_t>(bank.k()));
    for (int k = 0; k < bank.k(); ++k)
        gens.push_back(generator_node(g, bank.a_raw[static_cast<size_t>(k)], bank.b[static_cast<size_t>(k)]));
    std::vector<ad::Node> maps;
    maps.reserve(static_cast<size_t>(taus.rows()));
    for (int s = 0; s < taus.rows(); ++s)
        maps.push_back(flow_map_from_generators(g, gens, taus.data() + static_cast<long long>(s) * taus.cols(), m));
    return g.concat_rows(maps);
}

}  // namespace noether::sym
