#include "noether/dynamics.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace noether::dyn {

using nlohmann::json;

std::string to_string(SystemKind k) {
    switch (k) {
        case SystemKind::Sho: return "sho";
        case SystemKind::NHarm: return "nharm";
        case SystemKind::NBody: return "nbody";
    }
    return "?";
}

SystemKind system_kind_from_string(const std::string& s) {
    if (s == "sho") return SystemKind::Sho;
    if (s == "nharm") return SystemKind::NHarm;
    if (s == "nbody") return SystemKind::NBody;
    throw DomainError("unknown system kind: " + s);
}

int SystemSpec::phase_dim() const {
    switch (kind) {
        case SystemKind::Sho: return 2;
        case SystemKind::NHarm: return 2 * n;
        case SystemKind::NBody: return 2 * n * d;
    }
    return 0;
}

void SystemSpec::validate() const {
    if (n < 1) throw DomainError("system: n must be ≥ 1");
    if (kind == SystemKind::NBody && d < 1) throw DomainError("system: d must be ≥ 1");
    if (softening <= 0.0) throw DomainError("system: softening must be positive");
    for (size_t i = 0; i < masses.size(); ++i)
        if (masses[i] <= 0.0) throw DomainError("system: masses must be positive");
    if (!masses.empty() && static_cast<int>(masses.size()) != (kind == SystemKind::NBody ? n : n))
        throw DomainError("system: need one mass per body/oscillator");
}

SystemSpec make_system(SystemKind kind, int n, int d) {
    SystemSpec s;
    s.kind = kind;
    s.n = (kind == SystemKind::Sho) ? 1 : n;
    s.d = d;
    s.validate();
    return s;
}

namespace {

void check_dim(const SystemSpec& spec, const Dense& x) {
    if (x.cols() != 1 || x.rows() != spec.phase_dim())
        throw ShapeError("phase point " + x.shape_str() + " does not match system dimension " +
                         std::to_string(spec.phase_dim()));
}

}  // namespace

double SystemField::value(const Dense& x) const {
    check_dim(spec_, x);
    const int m = spec_.phase_dim();
    const int half = m / 2;
    switch (spec_.kind) {
        case SystemKind::Sho:
        case SystemKind::NHarm: {
            double h = 0.0;
            for (int i = 0; i < half; ++i) {
                const double q = x(i, 0), p = x(half + i, 0);
                h += p * p / (2.0 * spec_.mass(i)) + spec_.spring_k * q * q / 2.0;
            }
            return h;
        }
        case SystemKind::NBody: {
            const int nb = spec_.n, dd = spec_.d;
            double kin = 0.0;
            for (int i = 0; i < nb; ++i) {
                double pp = 0.0;
                for (int c = 0; c < dd; ++c) {
                    const double p = x(half + i * dd + c, 0);
                    pp += p * p;
                }
                kin += pp / (2.0 * spec_.mass(i));
            }
            const double sgn = spec_.sign == PotentialSign::Attractive ? -1.0 : 1.0;
            double pot = 0.0;
            for (int i = 0; i < nb; ++i) {
                for (int j = 0; j < nb; ++j) {
                    if (i == j) continue;
                    double r2 = spec_.softening * spec_.softening;
                    for (int c = 0; c < dd; ++c) {
                        const double dq = x(i * dd + c, 0) - x(j * dd + c, 0);
                        r2 += dq * dq;
                    }
                    pot += spec_.grav_g * spec_.mass(i) * spec_.mass(j) / std::sqrt(r2);
                }
            }
            return kin + sgn * pot;
        }
    }
    return 0.0;
}

Dense SystemField::grad(const Dense& x) const {
    check_dim(spec_, x);
    const int m = spec_.phase_dim();
    const int half = m / 2;
    Dense g(m, 1);
    switch (spec_.kind) {
        case SystemKind::Sho:
        case SystemKind::NHarm: {
            for (int i = 0; i < half; ++i) {
                g(i, 0) = spec_.spring_k * x(i, 0);
                g(half + i, 0) = x(half + i, 0) / spec_.mass(i);
            }
            break;
        }
        case SystemKind::NBody: {
            const int nb = spec_.n, dd = spec_.d;
            for (int i = 0; i < nb; ++i)
                for (int c = 0; c < dd; ++c) g(half + i * dd + c, 0) = x(half + i * dd + c, 0) / spec_.mass(i);
            const double sgn = spec_.sign == PotentialSign::Attractive ? -1.0 : 1.0;
            for (int i = 0; i < nb; ++i) {
                for (int j = 0; j < nb; ++j) {
                    if (i == j) continue;
                    double r2 = spec_.softening * spec_.softening;
                    for (int c = 0; c < dd; ++c) {
                        const double dq = x(i * dd + c, 0) - x(j * dd + c, 0);
                        r2 += dq * dq;
                    }
                    const double inv32 = 1.0 / (r2 * std::sqrt(r2));
                    const double coef = -2.0 * sgn * spec_.grav_g * spec_.mass(i) * spec_.mass(j) * inv32;
                    for (int c = 0; c < dd; ++c) {
                        const double dq = x(i * dd + c, 0) - x(j * dd + c, 0);
                        g(i * dd + c, 0) += coef * dq;
                    }
                }
            }
            break;
        }
    }
    return g;
}

double ground_truth_hamiltonian(const SystemSpec& spec, const Dense& x) { return SystemField(spec).value(x); }

Dense symplectic_form(int phase_dim) {
    if (phase_dim % 2 != 0) throw ShapeError("symplectic form needs even dimension");
    const int half = phase_dim / 2;
    Dense j(phase_dim, phase_dim);
    for (int i = 0; i < half; ++i) {
        j(i, half + i) = 1.0;
        j(half + i, i) = -1.0;
    }
    return j;
}

Dense apply_symplectic(const Dense& g) {
    if (g.cols() != 1 || g.rows() % 2 != 0) throw ShapeError("apply_symplectic: need even column vector");
    const int half = g.rows() / 2;
    Dense out = Dense::uninit(g.rows(), 1);
    for (int i = 0; i < half; ++i) {
        out(i, 0) = g(half + i, 0);
        out(half + i, 0) = -g(i, 0);
    }
    return out;
}

Dense hamiltonian_vector_field(const ScalarField& h, const Dense& x) { return apply_symplectic(h.grad(x)); }

double poisson_bracket(const ScalarField& o1, const ScalarField& o2, const Dense& x) {
    const Dense g1 = o1.grad(x);
    const Dense jg2 = apply_symplectic(o2.grad(x));
    double s = 0.0;
    for (int i = 0; i < g1.rows(); ++i) s += g1(i, 0) * jg2(i, 0);
    return s;
}

std::vector<Dense> rk4_simulate(const ScalarField& h, const Dense& x0, double dt, int steps, int substeps) {
    if (dt <= 0.0) throw DomainError("rk4: dt must be positive");
    if (steps < 1) throw DomainError("rk4: steps must be ≥ 1");
    if (substeps < 1) throw DomainError("rk4: substeps must be ≥ 1");
    const double hh = dt / substeps;
    std::vector<Dense> out;
    out.reserve(static_cast<size_t>(steps));
    Dense x = x0.clone();
    auto f = [&](const Dense& state) { return hamiltonian_vector_field(h, state); };
    for (int s = 0; s < steps; ++s) {
        for (int sub = 0; sub < substeps; ++sub) {
            const Dense k1 = f(x);
            Dense x2 = x.clone();
            for (int i = 0; i < x.rows(); ++i) x2(i, 0) += 0.5 * hh * k1(i, 0);
            const Dense k2 = f(x2);
            Dense x3 = x.clone();
            for (int i = 0; i < x.rows(); ++i) x3(i, 0) += 0.5 * hh * k2(i, 0);
            const Dense k3 = f(x3);
            Dense x4 = x.clone();
            for (int i = 0; i < x.rows(); ++i) x4(i, 0) += hh * k3(i, 0);
            const Dense k4 = f(x4);
            for (int i = 0; i < x.rows(); ++i)
                x(i, 0) += hh / 6.0 * (k1(i, 0) + 2.0 * k2(i, 0) + 2.0 * k3(i, 0) + k4(i, 0));
        }
        if (!x.all_finite())
            throw NumericError("rk4: state diverged at step " + std::to_string(s + 1) + " of " +
                               std::to_string(steps));
        out.push_back(x.clone());
    }
    return out;
}

namespace {

Dense sample_initial(const SystemSpec& spec, const InitDist& init, Rng& rng) {
    const int m = spec.phase_dim();
    const int half = m / 2;
    Dense x = Dense::uninit(m, 1);
    if (spec.kind == SystemKind::NBody) {
        std::vector<double> shift(static_cast<size_t>(spec.d), 0.0);
        if (init.shift_std > 0.0)
            for (int c = 0; c < spec.d; ++c) shift[static_cast<size_t>(c)] = rng.normal(0.0, init.shift_std);
        for (int i = 0; i < spec.n; ++i)
            for (int c = 0; c < spec.d; ++c)
                x(i * spec.d + c, 0) = rng.normal(0.0, init.q_std) + shift[static_cast<size_t>(c)] + init.offset;
    } else {
        for (int i = 0; i < half; ++i) x(i, 0) = rng.normal(0.0, init.q_std) + init.offset;
    }
    for (int i = 0; i < half; ++i) x(half + i, 0) = rng.normal(0.0, init.p_std);
    return x;
}

constexpr int kRetryCap = 8;
constexpr double kMaxInternalStep = 0.01;

}  // namespace

Dataset sample_dataset(const SystemSpec& spec, const Recipe& recipe, uint64_t seed) {
    spec.validate();
    if (recipe.n_traj < 1 || recipe.points_per_traj < 2) throw DomainError("recipe: need ≥1 trajectory and ≥2 points");
    if (recipe.dt <= 0.0) throw DomainError("recipe: dt must be positive");

    const SystemField field(spec);
    const int steps = recipe.points_per_traj - 1;
    const int substeps = static_cast<int>(std::ceil(recipe.dt / kMaxInternalStep));
    const int pairs_per_traj = recipe.points_per_traj - 1;

    std::vector<std::vector<Dense>> trajectories(static_cast<size_t>(recipe.n_traj));
    std::vector<std::string> failures(static_cast<size_t>(recipe.n_traj));

#pragma omp parallel for schedule(dynamic)
    for (int t = 0; t < recipe.n_traj; ++t) {
        for (int retry = 0; retry <= kRetryCap; ++retry) {
            Rng rng = Rng::substream(seed, static_cast<uint64_t>(t) * 16 + static_cast<uint64_t>(retry));
            Dense x0 = sample_initial(spec, recipe.init, rng);
            try {
                std::vector<Dense> states = rk4_simulate(field, x0, recipe.dt, steps, substeps);
                states.insert(states.begin(), std::move(x0));
                trajectories[static_cast<size_t>(t)] = std::move(states);
                failures[static_cast<size_t>(t)].clear();
                break;
            } catch (const NumericError& e) {
                failures[static_cast<size_t>(t)] = e.what();
            }
        }
    }
    for (int t = 0; t < recipe.n_traj; ++t)
        if (trajectories[static_cast<size_t>(t)].empty())
            throw NumericError("sample_dataset: trajectory " + std::to_string(t) + " diverged after " +
                               std::to_string(kRetryCap + 1) + " attempts: " + failures[static_cast<size_t>(t)]);

    Dataset ds;
    ds.system = spec;
    ds.recipe = recipe;
    ds.seed = seed;
    ds.dt = recipe.dt;
    ds.pairs.reserve(static_cast<size_t>(recipe.n_traj) * pairs_per_traj);
    for (int t = 0; t < recipe.n_traj; ++t) {
        const auto& st = trajectories[static_cast<size_t>(t)];
        for (int i = 0; i + 1 < static_cast<int>(st.size()); ++i)
            ds.pairs.push_back(Pair{t, st[static_cast<size_t>(i)].clone(), st[static_cast<size_t>(i) + 1].clone()});
    }
    return ds;
}

namespace {

json spec_to_json(const SystemSpec& s) {
    return json{{"kind", to_string(s.kind)},
                {"n", s.n},
                {"d", s.d},
                {"masses", s.masses},
                {"spring_k", s.spring_k},
                {"grav_g", s.grav_g},
                {"softening", s.softening},
                {"potential_sign", s.sign == PotentialSign::Attractive ? "attractive" : "paper-verbatim"}};
}

SystemSpec spec_from_json(const json& j) {
    SystemSpec s;
    s.kind = system_kind_from_string(j.at("kind").get<std::string>());
    s.n = j.at("n").get<int>();
    s.d = j.at("d").get<int>();
    s.masses = j.at("masses").get<std::vector<double>>();
    s.spring_k = j.at("spring_k").get<double>();
    s.grav_g = j.at("grav_g").get<double>();
    s.softening = j.at("softening").get<double>();
    s.sign = j.at("potential_sign").get<std::string>() == "attractive" ? PotentialSign::Attractive
                                                                       : PotentialSign::PaperVerbatim;
    return s;
}

std::vector<double> col_to_vec(const Dense& d) { return d.to_vector(); }

Dense vec_to_col(const std::vector<double>& v) { return Dense::column(v); }

}  // namespace

std::string dataset_to_json(const Dataset& ds) {
    json pairs = json::array();
    for (const Pair& p : ds.pairs)
        pairs.push_back(json{{"traj", p.traj}, {"x_t", col_to_vec(p.x_t)}, {"x_tp", col_to_vec(p.x_tp)}});
    json j{{"schema_version", "1"},
           {"system", spec_to_json(ds.system)},
           {"recipe",
            json{{"n_traj", ds.recipe.n_traj},
                 {"points_per_traj", ds.recipe.points_per_traj},
                 {"dt", ds.recipe.dt},
                 {"variant", ds.recipe.variant},
                 {"init",
                  json{{"q_std", ds.recipe.init.q_std},
                       {"p_std", ds.recipe.init.p_std},
                       {"shift_std", ds.recipe.init.shift_std},
                       {"offset", ds.recipe.init.offset}}}}},
           {"seed", ds.seed},
           {"dt", ds.dt},
           {"pairs", std::move(pairs)}};
    return j.dump();
}

Dataset dataset_from_json(const std::string& text) {
    json j = json::parse(text);
    Dataset ds;
    ds.system = spec_from_json(j.at("system"));
    const json& r = j.at("recipe");
    ds.recipe.n_traj = r.at("n_traj").get<int>();
    ds.recipe.points_per_traj = r.at("points_per_traj").get<int>();
    ds.recipe.dt = r.at("dt").get<double>();
    ds.recipe.variant = r.at("variant").get<std::string>();
    const json& init = r.at("init");
    ds.recipe.init.q_std = init.at("q_std").get<double>();
    ds.recipe.init.p_std = init.at("p_std").get<double>();
    ds.recipe.init.shift_std = init.at("shift_std").get<double>();
    ds.recipe.init.offset = init.at("offset").get<double>();
    ds.seed = j.at("seed").get<uint64_t>();
    ds.dt = j.at("dt").get<double>();
    for (const json& p : j.at("pairs")) {
        Pair pr;
        pr.traj = p.at("traj").get<int>();
        pr.x_t = vec_to_col(p.at("x_t").get<std::vector<double>>());
        pr.x_tp = vec_to_col(p.at("x_tp").get<std::vector<double>>());
        ds.pairs.push_back(std::move(pr));
    }
    return ds;
}

void save_dataset(const Dataset& ds, const std::string& path) {
    std::ofstream f(path);
    if (!f) throw DomainError("cannot open for write: " + path);
    f << dataset_to_json(ds);
    if (!f.good()) throw DomainError("write failed: " + path);
}

Dataset load_dataset(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw DomainError("cannot open: " + path);
    std::string text((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return dataset_from_json(text);
}

}  // namespace noether::dyn
