#pragma once

#include <string>
#include <vector>

#include "noether/conserved.hpp"
#include "noether/dynamics.hpp"

namespace noether::analysis {

/// Stack of flattened (M+1)² generator matrices, one row per conserved
/// quantity, with human-readable labels for the ground-truth banks.
struct GeneratorBank {
    int phase_dim = 0;
    std::vector<std::vector<double>> rows;  // each (M+1)² long
    std::vector<std::string> labels;

    int l() const { return static_cast<int>(rows.size()); }
    Dense as_matrix() const;
};

/// Ground-truth conserved quantities as quadratic observables:
///   sho        → {H},                                  L = 1
///   nharm(n)   → {H_i} ∪ {R_ij} ∪ {F_ij},              L = n²
///   nbody(n,2) → {T_x,T_y,R_abs,R_com,P_x,P_y,Q_xy},   L = 7
/// (R_rel is a linear combination of the others and is excluded.)
sym::SymmetryBank ground_truth_quantities(const dyn::SystemSpec& spec, std::vector<std::string>* labels = nullptr);

/// The same bank as stacked generator rows (not normalized).
GeneratorBank ground_truth_bank(const dyn::SystemSpec& spec);

/// Learned bank → generator rows, each normalized to unit Euclidean norm.
/// Zero rows are dropped and reported in *dropped (if given).
GeneratorBank stack_learned(const sym::SymmetryBank& bank, int* dropped = nullptr);

/// Descending singular values of the stacked matrix.
std::vector<double> spectrum(const GeneratorBank& g);

/// For the first `top` right singular vectors v of g: ‖P v‖ where P projects
/// onto the row space of `truth` (orthonormalized at relative tolerance
/// 1e-10; rank deficiency shrinks the projector and is reported via *rank).
std::vector<double> parallelness(const GeneratorBank& g, const GeneratorBank& truth, int top, int* rank = nullptr);

struct AnalysisReport {
    std::vector<double> singular_values;  // descending, learned rows normalized
    std::vector<double> parallel;         // per singular vector (first L entries meaningful)
    int active_count = 0;                 // singular values above threshold
    double threshold = 0.05;
    int truth_dim = 0;
    int dropped_rows = 0;
    std::vector<std::string> notes;
};

AnalysisReport analyze(const sym::SymmetryBank& learned, const dyn::SystemSpec& spec, double threshold = 0.05);

std::string report_to_json(const AnalysisReport& r);
std::string report_to_csv(const AnalysisReport& r);

}  // namespace noether::analysis
