#pragma once

#include <string>
#include <vector>

#include "noether/dense.hpp"
#include "noether/rng.hpp"

namespace noether::dyn {

enum class SystemKind { Sho, NHarm, NBody };

std::string to_string(SystemKind k);
SystemKind system_kind_from_string(const std::string& s);

/// Gravitational potential sign. The printed n-body potential in the source
/// material is positive (repulsive); bounded orbits need attraction, so
/// Attractive is the default and PaperVerbatim keeps the printed sign.
enum class PotentialSign { Attractive, PaperVerbatim };

struct SystemSpec {
    SystemKind kind = SystemKind::Sho;
    int n = 1;  // oscillator count / body count
    int d = 2;  // spatial dimensions (n-body only)
    std::vector<double> masses;  // empty = all 1
    double spring_k = 1.0;
    double grav_g = 1.0;
    double softening = 0.1;
    PotentialSign sign = PotentialSign::Attractive;

    int phase_dim() const;
    double mass(int i) const { return masses.empty() ? 1.0 : masses.at(static_cast<size_t>(i)); }
    void validate() const;
};

SystemSpec make_system(SystemKind kind, int n = 1, int d = 2);

/// Smooth observable on phase space: value and analytic gradient.
struct ScalarField {
    virtual ~ScalarField() = default;
    virtual double value(const Dense& x) const = 0;
    virtual Dense grad(const Dense& x) const = 0;
};

/// Ground-truth Hamiltonian of a SystemSpec with hand-coded gradient.
class SystemField final : public ScalarField {
  public:
    explicit SystemField(SystemSpec spec) : spec_(std::move(spec)) { spec_.validate(); }
    double value(const Dense& x) const override;
    Dense grad(const Dense& x) const override;
    const SystemSpec& spec() const { return spec_; }

  private:
    SystemSpec spec_;
};

double ground_truth_hamiltonian(const SystemSpec& spec, const Dense& x);

/// The symplectic form J = [[0, I], [-I, 0]] as a dense M×M matrix.
Dense symplectic_form(int phase_dim);

/// J·g for a gradient g, using the block structure directly.
Dense apply_symplectic(const Dense& g);

/// J·∇H(x): the Hamiltonian vector field of any observable.
Dense hamiltonian_vector_field(const ScalarField& h, const Dense& x);

/// {O1, O2}(x) = ∇O1(x) · J ∇O2(x)
double poisson_bracket(const ScalarField& o1, const ScalarField& o2, const Dense& x);

/// Classical RK4 on ẋ = J∇H with internal step dt/substeps. Returns states
/// at t = dt, 2dt, …, steps*dt. Throws NumericError carrying the step index
/// if the state leaves the finite range.
std::vector<Dense> rk4_simulate(const ScalarField& h, const Dense& x0, double dt, int steps, int substeps);

/// Initial-condition distribution. Positions are N(0, q_std²) plus a shared
/// per-trajectory shift N(0, shift_std²) per spatial component plus a fixed
/// offset; momenta are N(0, p_std²).
struct InitDist {
    double q_std = 1.0;
    double p_std = 1.0;
    double shift_std = 0.0;
    double offset = 0.0;
};

struct Recipe {
    int n_traj = 1;
    int points_per_traj = 2;
    double dt = 0.1;
    InitDist init;
    std::string variant = "train";
};

struct Pair {
    int traj = 0;
    Dense x_t;
    Dense x_tp;
};

struct Dataset {
    SystemSpec system;
    Recipe recipe;
    uint64_t seed = 0;
    double dt = 0.0;
    std::vector<Pair> pairs;

    int phase_dim() const { return system.phase_dim(); }
};

/// Deterministic given seed; consecutive trajectory points become pairs
/// (points_per_traj − 1 per trajectory). Divergent trajectories are
/// resampled with a fresh sub-seed up to a retry cap.
Dataset sample_dataset(const SystemSpec& spec, const Recipe& recipe, uint64_t seed);

std::string dataset_to_json(const Dataset& ds);
Dataset dataset_from_json(const std::string& text);
void save_dataset(const Dataset& ds, const std::string& path);
Dataset load_dataset(const std::string& path);

}  // namespace noether::dyn
