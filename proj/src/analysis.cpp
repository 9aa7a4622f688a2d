#include "noether/analysis.hpp"

#include <cmath>
#include <sstream>

#include <json.hpp>

#include "noether/kernels.hpp"
#include "noether/svd.hpp"

namespace noether::analysis {

using nlohmann::json;

Dense GeneratorBank::as_matrix() const {
    if (rows.empty()) return Dense(0, 0);
    const int w = static_cast<int>(rows.front().size());
    Dense m = Dense::uninit(l(), w);
    for (int i = 0; i < l(); ++i) {
        if (static_cast<int>(rows[static_cast<size_t>(i)].size()) != w)
            throw ShapeError("generator bank: ragged rows");
        for (int j = 0; j < w; ++j) m(i, j) = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
    }
    return m;
}

namespace {

sym::QuadraticObservable from_ab(Dense a, Dense b) { return sym::QuadraticObservable(std::move(a), std::move(b)); }

void push(sym::SymmetryBank& bank, std::vector<std::string>* labels, const std::string& name,
          sym::QuadraticObservable q) {
    bank.quantities.push_back(std::move(q));
    if (labels) labels->push_back(name);
}

std::string idx_name(const std::string& stem, int i) { return stem + "_" + std::to_string(i + 1); }

std::string coord_name(int d) {
    static const char* names[] = {"x", "y", "z"};
    return d < 3 ? names[d] : std::to_string(d);
}

}  // namespace

sym::SymmetryBank ground_truth_quantities(const dyn::SystemSpec& spec, std::vector<std::string>* labels) {
    spec.validate();
    const int m = spec.phase_dim();
    const int half = m / 2;
    sym::SymmetryBank bank;

    switch (spec.kind) {
        case dyn::SystemKind::Sho: {
            push(bank, labels, "H", from_ab(Dense::identity(2), Dense(2, 1)));
            break;
        }
        case dyn::SystemKind::NHarm: {
            const int n = spec.n;
            for (int i = 0; i < n; ++i) {
                Dense a(m, m);
                a(i, i) = 1.0;
                a(n + i, n + i) = 1.0;
                push(bank, labels, idx_name("H", i), from_ab(std::move(a), Dense(m, 1)));
            }
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    Dense a(m, m);
                    a(i, n + j) = 1.0;
                    a(n + j, i) = 1.0;
                    a(j, n + i) = -1.0;
                    a(n + i, j) = -1.0;
                    push(bank, labels, "R_" + std::to_string(i + 1) + std::to_string(j + 1),
                         from_ab(std::move(a), Dense(m, 1)));
                }
            }
            for (int i = 0; i < n; ++i) {
                for (int j = i + 1; j < n; ++j) {
                    Dense a(m, m);
                    a(i, j) = 1.0;
                    a(j, i) = 1.0;
                    a(n + i, n + j) = 1.0;
                    a(n + j, n + i) = 1.0;
                    push(bank, labels, "F_" + std::to_string(i + 1) + std::to_string(j + 1),
                         from_ab(std::move(a), Dense(m, 1)));
                }
            }
            break;
        }
        case dyn::SystemKind::NBody: {
            const int n = spec.n, dd = spec.d;
            auto qi = [&](int body, int c) { return body * dd + c; };
            auto pi = [&](int body, int c) { return half + body * dd + c; };
            double msum = 0.0;
            for (int i = 0; i < n; ++i) msum += spec.mass(i);

            for (int c = 0; c < dd; ++c) {
                Dense b(m, 1);
                for (int i = 0; i < n; ++i) b(pi(i, c), 0) = 1.0;
                push(bank, labels, "T_" + coord_name(c), from_ab(Dense(m, m), std::move(b)));
            }
            for (int c = 0; c < dd; ++c) {
                for (int c2 = c + 1; c2 < dd; ++c2) {
                    Dense a(m, m);
                    for (int i = 0; i < n; ++i) {
                        a(qi(i, c), pi(i, c2)) += 1.0;
                        a(pi(i, c2), qi(i, c)) += 1.0;
                        a(qi(i, c2), pi(i, c)) += -1.0;
                        a(pi(i, c), qi(i, c2)) += -1.0;
                    }
                    push(bank, labels, "R_abs", from_ab(std::move(a), Dense(m, 1)));
                }
            }
            for (int c = 0; c < dd; ++c) {
                for (int c2 = c + 1; c2 < dd; ++c2) {
                    Dense a(m, m);
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < n; ++j) {
                            const double w = spec.mass(i) * spec.mass(j) / (msum * msum);
                            a(qi(i, c), pi(j, c2)) += w;
                            a(pi(j, c2), qi(i, c)) += w;
                            a(qi(i, c2), pi(j, c)) += -w;
                            a(pi(j, c), qi(i, c2)) += -w;
                        }
                    }
                    push(bank, labels, "R_com", from_ab(std::move(a), Dense(m, 1)));
                }
            }
            for (int c = 0; c < dd; ++c) {
                Dense a(m, m);
                for (int i = 0; i < n; ++i)
                    for (int j = 0; j < n; ++j) a(pi(i, c), pi(j, c)) += 2.0;
                push(bank, labels, "P_" + coord_name(c), from_ab(std::move(a), Dense(m, 1)));
            }
            for (int c = 0; c < dd; ++c) {
                for (int c2 = c + 1; c2 < dd; ++c2) {
                    Dense a(m, m);
                    for (int i = 0; i < n; ++i) {
                        for (int j = 0; j < n; ++j) {
                            a(pi(i, c), pi(j, c2)) += 1.0;
                            a(pi(j, c2), pi(i, c)) += 1.0;
                        }
                    }
                    push(bank, labels, "Q_" + coord_name(c) + coord_name(c2), from_ab(std::move(a), Dense(m, 1)));
                }
            }
            break;
        }
    }
    bank.validate();
    return bank;
}

GeneratorBank ground_truth_bank(const dyn::SystemSpec& spec) {
    std::vector<std::string> labels;
    const sym::SymmetryBank bank = ground_truth_quantities(spec, &labels);
    GeneratorBank out;
    out.phase_dim = spec.phase_dim();
    for (const auto& q : bank.quantities) out.rows.push_back(q.generator().to_vector());
    out.labels = std::move(labels);
    return out;
}

GeneratorBank stack_learned(const sym::SymmetryBank& bank, int* dropped) {
    GeneratorBank out;
    out.phase_dim = bank.dim();
    int drop = 0;
    for (int i = 0; i < bank.k(); ++i) {
        std::vector<double> row = bank.quantities[static_cast<size_t>(i)].generator().to_vector();
        double norm = 0.0;
        for (double v : row) norm += v * v;
        norm = std::sqrt(norm);
        if (norm < 1e-14) {
            ++drop;
            continue;
        }
        for (double& v : row) v /= norm;
        out.rows.push_back(std::move(row));
        out.labels.push_back(idx_name("C", i));
    }
    if (dropped) *dropped = drop;
    return out;
}

std::vector<double> spectrum(const GeneratorBank& g) {
    if (g.rows.empty()) return {};
    return svd(g.as_matrix()).sigma;
}

std::vector<double> parallelness(const GeneratorBank& g, const GeneratorBank& truth, int top, int* rank) {
    if (g.rows.empty() || truth.rows.empty()) return {};
    const SvdResult gs = svd(g.as_matrix());
    if (top > static_cast<int>(gs.sigma.size())) throw DomainError("parallelness: top exceeds singular vector count");

    const SvdResult ts = svd(truth.as_matrix());
    const double tol = 1e-10 * (ts.sigma.empty() ? 1.0 : ts.sigma.front());
    int r = 0;
    while (r < static_cast<int>(ts.sigma.size()) && ts.sigma[static_cast<size_t>(r)] > tol) ++r;
    if (rank) *rank = r;

    std::vector<double> out;
    out.reserve(static_cast<size_t>(top));
    for (int i = 0; i < top; ++i) {
        double norm2 = 0.0;
        for (int k = 0; k < r; ++k) {
            double dot = 0.0;
            for (int row = 0; row < gs.v.rows(); ++row) dot += ts.v(row, k) * gs.v(row, i);
            norm2 += dot * dot;
        }
        out.push_back(std::sqrt(norm2));
    }
    return out;
}

AnalysisReport analyze(const sym::SymmetryBank& learned, const dyn::SystemSpec& spec, double threshold) {
    AnalysisReport rep;
    rep.threshold = threshold;
    const GeneratorBank truth = ground_truth_bank(spec);
    rep.truth_dim = truth.l();

    const GeneratorBank g = stack_learned(learned, &rep.dropped_rows);
    if (rep.dropped_rows > 0)
        rep.notes.push_back(std::to_string(rep.dropped_rows) + " all-zero learned quantities dropped");
    if (g.rows.empty()) {
        rep.notes.push_back("no bank");
        return rep;
    }
    rep.singular_values = spectrum(g);
    int rank = 0;
    rep.parallel = parallelness(g, truth, static_cast<int>(rep.singular_values.size()), &rank);
    if (rank < truth.l()) rep.notes.push_back("ground-truth rows rank-deficient: rank " + std::to_string(rank));
    for (double s : rep.singular_values)
        if (s > threshold) ++rep.active_count;
    return rep;
}

std::string report_to_json(const AnalysisReport& r) {
    json j{{"schema_version", "1"},
           {"singular_values", r.singular_values},
           {"parallelness", r.parallel},
           {"active_count", r.active_count},
           {"threshold", r.threshold},
           {"truth_dim", r.truth_dim},
           {"dropped_rows", r.dropped_rows},
           {"notes", r.notes}};
    return j.dump(2);
}

std::string report_to_csv(const AnalysisReport& r) {
    std::ostringstream os;
    os.precision(17);
    os << "index,singular_value,parallelness\n";
    for (size_t i = 0; i < r.singular_values.size(); ++i) {
        os << i << "," << r.singular_values[i] << ",";
        if (i < r.parallel.size()) os << r.parallel[i];
        os << "\n";
    }
    return os.str();
}

}  // namespace noether::analysis
