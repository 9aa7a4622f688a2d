#pragma once

#include <vector>

#include "noether/conserved.hpp"
#include "noether/dense.hpp"
#include "noether/dynamics.hpp"
#include "noether/graph.hpp"

namespace noether::model {

struct MLPArchitecture {
    int input_dim = 2;
    std::vector<int> hidden;
    double elu_alpha = 1.0;

    int n_layers() const { return static_cast<int>(hidden.size()) + 1; }
    int layer_in(int l) const { return l == 0 ? input_dim : hidden[static_cast<size_t>(l) - 1]; }
    int layer_out(int l) const {
        return l == n_layers() - 1 ? 1 : hidden[static_cast<size_t>(l)];
    }
    long long param_count() const;
    void validate() const;
};

/// Point estimate of the network: one combined [W b] matrix (out×(in+1))
/// per layer, matching the posterior-mean layout.
struct MLPParameters {
    std::vector<Dense> wb;
};

/// Fan-in-scaled normal weights (std 1/√in), zero biases.
MLPParameters init_parameters(const MLPArchitecture& arch, Rng& rng);

/// Forward pass on a column batch X (M×B) → 1×B row of field values.
/// Graph version takes per-layer combined-weight nodes.
ad::Node mlp_forward(ad::Graph& g, const MLPArchitecture& arch, const std::vector<ad::Node>& wb, ad::Node x);
Dense mlp_forward(const MLPArchitecture& arch, const MLPParameters& params, const Dense& x);

/// ∂(sum of outputs)/∂X for the dense path: per-column input gradients
/// (M×B), via hand-rolled backprop through the affine/ELU stack.
Dense mlp_input_grad(const MLPArchitecture& arch, const MLPParameters& params, const Dense& x);

/// Single-point adapter so a trained network can be used as a ScalarField.
class MLPField final : public dyn::ScalarField {
  public:
    MLPField(MLPArchitecture arch, MLPParameters params) : arch_(std::move(arch)), params_(std::move(params)) {}
    double value(const Dense& x) const override;
    Dense grad(const Dense& x) const override;

  private:
    MLPArchitecture arch_;
    MLPParameters params_;
};

/// Batched Euler rollout of the symmetrised field on the graph:
///   X ← X + (dt/n_steps)·J∇Ĥ(X), Ĥ(x) = (1/S)Σ_s F(Φ^{τ⁽ˢ⁾}(x)).
/// x0 is an M×B node (B trajectory pairs side by side); taus is the S×K
/// sample matrix drawn once for this evaluation (ignored when the bank is
/// empty). The result is differentiable in the weights, the bank, and x0.
/// Throws NumericError when an intermediate state goes non-finite; the
/// offending columns are listed in the message.
ad::Node rollout_mean(ad::Graph& g, const MLPArchitecture& arch, const std::vector<ad::Node>& wb,
                      const sym::BankNodes& bank, ad::Node x0, double dt, int n_steps, const Dense& taus);

/// Tape-free twin of rollout_mean for evaluation and field export; computes
/// the inner input-gradient by direct backprop. Cross-checked against the
/// graph path in the tests.
Dense rollout_mean_direct(const MLPArchitecture& arch, const MLPParameters& params, const sym::SymmetryBank& bank,
                          const Dense& x0, double dt, int n_steps, const Dense& taus);

/// Σ_i log N(target_i | pred_i, σ²) over the M coordinates of one column.
double log_likelihood(const Dense& pred, const Dense& target, double sigma2_data);

/// Symmetrised field value Ĥ(x) at mean weights for a batch (1×B), using
/// the same batched flow machinery as the rollout.
Dense symmetrized_field_values(const MLPArchitecture& arch, const MLPParameters& params,
                               const sym::SymmetryBank& bank, const Dense& x, const Dense& taus);

}  // namespace noether::model
