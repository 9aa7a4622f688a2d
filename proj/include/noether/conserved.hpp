#pragma once

#include <vector>

#include "noether/dense.hpp"
#include "noether/dynamics.hpp"
#include "noether/graph.hpp"
#include "noether/rng.hpp"

namespace noether::sym {

/// Quadratic observable C(x) = xᵀAx/2 + bᵀx with A symmetric (symmetrized
/// on construction; the constant offset is dropped throughout).
class QuadraticObservable {
  public:
    QuadraticObservable(Dense a, Dense b);

    int dim() const { return b_.rows(); }
    const Dense& a() const { return a_; }
    const Dense& b() const { return b_; }

    double value(const Dense& x) const;
    Dense grad(const Dense& x) const;  // A x + b

    /// Affine generator on homogeneous coordinates: [[J·A, J·b], [0ᵀ, 0]].
    Dense generator() const;

  private:
    Dense a_;
    Dense b_;
};

/// ScalarField adapter so quadratics plug into the dynamics utilities.
class QuadraticField final : public dyn::ScalarField {
  public:
    explicit QuadraticField(QuadraticObservable c) : c_(std::move(c)) {}
    double value(const Dense& x) const override { return c_.value(x); }
    Dense grad(const Dense& x) const override { return c_.grad(x); }

  private:
    QuadraticObservable c_;
};

/// Bank of K quadratic conserved quantities (the symmetrisation parameters).
/// K = 0 means no symmetrisation.
struct SymmetryBank {
    std::vector<QuadraticObservable> quantities;

    int k() const { return static_cast<int>(quantities.size()); }
    int dim() const { return quantities.empty() ? 0 : quantities.front().dim(); }
    void validate() const;
};

/// Random near-identity bank: A, b entries i.i.d. N(0, init_std²).
SymmetryBank random_bank(int k, int phase_dim, double init_std, Rng& rng);

enum class TauMeasure { Normal, Uniform };

struct TauConfig {
    TauMeasure measure = TauMeasure::Normal;
    double lo = 0.0;                    // uniform support
    double hi = 6.283185307179586476925286766559;
};

/// S i.i.d. draws of τ ∈ R^K, returned as an S×K matrix (row per sample).
Dense sample_tau(const TauConfig& cfg, int k, int s, Rng& rng);

/// Φ_c^τ(x): exact flow of ẋ = J∇C via the matrix exponential on (x, 1).
Dense flow(const QuadraticObservable& c, double tau, const Dense& x);

/// Φ^τ over the bank = Φ¹ of Σᵢ τᵢCᵢ. K = 0 returns x unchanged.
Dense combined_flow(const SymmetryBank& bank, const std::vector<double>& tau, const Dense& x);

/// Ĥ(x) = (1/S) Σₛ h(Φ^{τ⁽ˢ⁾}(x)), accumulated in sample-index order.
double symmetrize(const dyn::ScalarField& h, const SymmetryBank& bank, const Dense& x, const Dense& taus);

// --- graph-side builders (differentiable in the bank parameters) -----------

/// Bank parameters as graph leaves. a_raw is a full M×M matrix; the
/// symmetric A = (a_raw + a_rawᵀ)/2 is built in-graph so the structural
/// invariant holds for any parameter value.
struct BankNodes {
    std::vector<ad::Node> a_raw;
    std::vector<ad::Node> b;

    int k() const { return static_cast<int>(a_raw.size()); }
};

/// Insert a bank into a graph. trainable=false loads constants (oracle mode).
BankNodes bank_to_graph(ad::Graph& g, const SymmetryBank& bank, bool trainable);

/// Read parameter values back into a plain bank (after training).
SymmetryBank bank_from_graph(const BankNodes& nodes);

/// Generator node [[J·A, J·b],[0,0]] for one quantity.
ad::Node generator_node(ad::Graph& g, ad::Node a_raw, ad::Node b);

/// exp(Σ_k τ_k G_k) sliced to its first M rows: the affine map (M×(M+1))
/// sending homogeneous (x,1) to Φ(x). One node per τ sample.
ad::Node flow_map_node(ad::Graph& g, const BankNodes& bank, const double* tau_row);

/// All S flow maps stacked to (S·M)×(M+1) for batched application.
ad::Node stacked_flow_maps(ad::Graph& g, const BankNodes& bank, const Dense& taus);

}  // namespace noether::sym
