#pragma once

#include <functional>
#include <string>
#include <vector>

#include "noether/conserved.hpp"
#include "noether/dense.hpp"
#include "noether/dynamics.hpp"
#include "noether/graph.hpp"
#include "noether/model.hpp"

namespace noether::vi {

/// Matrix-normal posterior over one layer's combined [W b] matrix:
///   q(θ_l) = MN(M_l, S_l ⊗ A_l),  S = L_S L_Sᵀ,  A = L_A L_Aᵀ.
/// The Cholesky factors are stored unconstrained: strict lower triangle
/// verbatim, diagonal as log(L_ii), so every parameter value is valid.
struct LayerPosterior {
    Dense mean;     // out × (in+1)
    Dense raw_row;  // out × out
    Dense raw_col;  // (in+1) × (in+1)

    int out() const { return mean.rows(); }
    int in1() const { return mean.cols(); }
    long long d() const { return static_cast<long long>(out()) * in1(); }
};

/// L from its unconstrained parameterization (lower triangular, positive diag).
Dense build_factor(const Dense& raw);
/// Inverse: unconstrained raw from a lower-triangular factor with positive diag.
Dense factor_to_raw(const Dense& factor);

struct Posterior {
    model::MLPArchitecture arch;
    std::vector<LayerPosterior> layers;

    model::MLPParameters mean_parameters() const;
};

/// Means fan-in-scaled normal, factors diagonal at factor_diag_init.
Posterior init_posterior(const model::MLPArchitecture& arch, Rng& rng, double factor_diag_init = 1e-3);

/// One reparameterized draw Wb = M + L_S·E·L_Aᵀ (dense path).
Dense sample_layer_weights(const LayerPosterior& layer, Rng& rng);
std::vector<Dense> sample_weights(const Posterior& post, Rng& rng);

/// KL-minimising isotropic prior variance v* = (Tr(S)Tr(A) + ‖M‖²_F)/D.
double prior_variance_star(const LayerPosterior& layer);

/// KL(q ‖ p_{v*}) with v* plugged in:
///   ½[ D log(Tr(S)Tr(A) + ‖M‖²_F) − D log D − ((in+1)·log|S| + out·log|A|) ]
double kl_auto(const LayerPosterior& layer);
double kl_auto(const Posterior& post);

/// Generic Gaussian KL(q ‖ N(0, vI)) for scanning v (test/verification path).
double kl_to_isotropic(const LayerPosterior& layer, double v);

enum class Mode { Vanilla, Learn, Oracle };
std::string to_string(Mode m);
Mode mode_from_string(const std::string& s);

struct Sigma2Policy {
    bool fixed = true;
    double value = 1e-2;  // fixed value, or the EWMA initialization
    double decay = 0.9;
};

struct TrainConfig {
    Mode mode = Mode::Learn;
    int k = 3;                 // learned conserved quantities
    int s = 200;               // τ samples per likelihood evaluation
    int n_weight_samples = 2;  // posterior samples per estimate
    int batch_traj = 0;        // trajectories per minibatch; 0 = full batch
    int epochs = 2000;
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    int euler_steps = 20;
    Sigma2Policy sigma2;
    sym::TauConfig tau;
    uint64_t seed = 0;
    double eta_init_std = 0.01;
    double factor_diag_init = 1e-3;
    int max_batch_columns = 4608;   // chunk bound on S·B columns per graph
    double skip_abort_frac = 0.01;  // divergent-pair budget per epoch
    std::vector<int> hidden = {200, 200};
    double elu_alpha = 1.0;
    int progress_every = 0;  // epochs between progress lines; 0 = silent
};

struct TrainingCurves {
    std::vector<double> neg_elbo_per_n;
    std::vector<double> nll_per_n;
    std::vector<double> kl_per_n;
};

struct Checkpoint {
    model::MLPArchitecture arch;
    Posterior posterior;
    sym::SymmetryBank bank;
    Mode mode = Mode::Learn;
    double sigma2 = 1e-2;
    std::vector<double> prior_v_star;  // per layer, final
    TrainingCurves curves;
    dyn::SystemSpec system;
    TrainConfig config;
    uint64_t seed = 0;
    bool aborted = false;
    std::string abort_reason;
    // final metrics (identical-sample decomposition: neg_elbo = nll + kl)
    double train_mse = 0.0;
    double final_nll_per_n = 0.0;
    double final_kl_per_n = 0.0;
    double final_neg_elbo_per_n = 0.0;
    int skipped_pairs = 0;
};

/// Full-data ELBO decomposition at the current parameters with seeded
/// samples. Returns (nll_per_n, kl_per_n); −ELBO/N is their sum.
struct ElboParts {
    double nll_per_n = 0.0;
    double kl_per_n = 0.0;
    double neg_elbo_per_n() const { return nll_per_n + kl_per_n; }
};
ElboParts evaluate_elbo(const Posterior& post, const sym::SymmetryBank& bank, const dyn::Dataset& data,
                        const TrainConfig& cfg, double sigma2, uint64_t eval_seed);

/// Mean squared prediction error per pair (‖pred−target‖²/M averaged over
/// pairs) at posterior-mean weights with a seeded τ batch of size s_eval.
double dataset_mse(const Posterior& post, const sym::SymmetryBank& bank, const dyn::Dataset& data, int euler_steps,
                   int s_eval, const sym::TauConfig& tau, uint64_t eval_seed, int max_batch_columns = 4608);

/// Adam over the posterior (and the bank in learn mode) on the ELBO of
/// App-style minibatches, cosine-annealed learning rate, deterministic
/// given config.seed.
Checkpoint train(const dyn::Dataset& data, const TrainConfig& cfg);

// Checkpoint (de)serialization — one JSON document, schema_version "1".
std::string checkpoint_to_json(const Checkpoint& ck, const std::string& config_echo_json = "");
Checkpoint checkpoint_from_json(const std::string& text);
void save_checkpoint(const Checkpoint& ck, const std::string& path, const std::string& config_echo_json = "");
Checkpoint load_checkpoint(const std::string& path);

}  // namespace noether::vi
