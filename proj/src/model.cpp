#include "noether/model.hpp"

#include <cmath>
#include <string>

#include "noether/kernels.hpp"
#include "noether/matexp.hpp"

namespace noether::model {

namespace {
inline Backend be() { return runtime::active(); }
constexpr double kTwoPi = 6.283185307179586476925286766559;
}  // namespace

long long MLPArchitecture::param_count() const {
    long long n = 0;
    for (int l = 0; l < n_layers(); ++l) n += static_cast<long long>(layer_out(l)) * (layer_in(l) + 1);
    return n;
}

void MLPArchitecture::validate() const {
    if (input_dim < 2 || input_dim % 2 != 0) throw ShapeError("architecture: input dim must be even and ≥ 2");
    for (int h : hidden)
        if (h < 1) throw ShapeError("architecture: hidden widths must be positive");
}

MLPParameters init_parameters(const MLPArchitecture& arch, Rng& rng) {
    arch.validate();
    MLPParameters p;
    for (int l = 0; l < arch.n_layers(); ++l) {
        const int out = arch.layer_out(l), in = arch.layer_in(l);
        Dense wb(out, in + 1);
        const double std = 1.0 / std::sqrt(static_cast<double>(in));
        for (int i = 0; i < out; ++i)
            for (int j = 0; j < in; ++j) wb(i, j) = rng.normal(0.0, std);
        p.wb.push_back(std::move(wb));
    }
    return p;
}

ad::Node mlp_forward(ad::Graph& g, const MLPArchitecture& arch, const std::vector<ad::Node>& wb, ad::Node x) {
    if (static_cast<int>(wb.size()) != arch.n_layers()) throw ShapeError("mlp_forward: wrong layer count");
    if (x.rows() != arch.input_dim) throw ShapeError("mlp_forward: input rows != architecture dim");
    ad::Node h = x;
    for (int l = 0; l < arch.n_layers(); ++l) {
        const int out = arch.layer_out(l), in = arch.layer_in(l);
        ad::Node w = g.slice(wb[static_cast<size_t>(l)], 0, 0, out, in);
        ad::Node b = g.slice(wb[static_cast<size_t>(l)], 0, in, out, 1);
        h = g.add_colvec(g.matmul(w, h), b);
        if (l + 1 < arch.n_layers()) h = g.elu(h, arch.elu_alpha);
    }
    return h;
}

Dense mlp_forward(const MLPArchitecture& arch, const MLPParameters& params, const Dense& x) {
    if (x.rows() != arch.input_dim) throw ShapeError("mlp_forward: input rows != architecture dim");
    Dense h = x;
    for (int l = 0; l < arch.n_layers(); ++l) {
        const int out = arch.layer_out(l), in = arch.layer_in(l);
        const Dense& wb = params.wb[static_cast<size_t>(l)];
        Dense z = Dense::uninit(out, h.cols());
        {
            // z = W h + b broadcast; W and b are views into wb
            Dense w = Dense::uninit(out, in);
            Dense b = Dense::uninit(out, 1);
            for (int i = 0; i < out; ++i) {
                for (int j = 0; j < in; ++j) w(i, j) = wb(i, j);
                b(i, 0) = wb(i, in);
            }
            z = kern::add_colvec(kern::gemm(w, false, h, false, be()), b, be());
        }
        h = (l + 1 < arch.n_layers()) ? kern::elu(z, arch.elu_alpha, be()) : z;
    }
    return h;
}

namespace {

struct SplitLayer {
    Dense w;
    Dense b;
};

std::vector<SplitLayer> split_layers(const MLPArchitecture& arch, const MLPParameters& params) {
    std::vector<SplitLayer> out;
    for (int l = 0; l < arch.n_layers(); ++l) {
        const int o = arch.layer_out(l), in = arch.layer_in(l);
        const Dense& wb = params.wb[static_cast<size_t>(l)];
        SplitLayer sl{Dense::uninit(o, in), Dense::uninit(o, 1)};
        for (int i = 0; i < o; ++i) {
            for (int j = 0; j < in; ++j) sl.w(i, j) = wb(i, j);
            sl.b(i, 0) = wb(i, in);
        }
        out.push_back(std::move(sl));
    }
    return out;
}

}  // namespace

Dense mlp_input_grad(const MLPArchitecture& arch, const MLPParameters& params, const Dense& x) {
    const auto layers = split_layers(arch, params);
    std::vector<Dense> acts;  // post-activation values per layer input
    std::vector<Dense> pre;   // pre-activation values
    acts.push_back(x);
    Dense h = x;
    for (int l = 0; l < arch.n_layers(); ++l) {
        Dense z = kern::add_colvec(kern::gemm(layers[static_cast<size_t>(l)].w, false, h, false, be()),
                                   layers[static_cast<size_t>(l)].b, be());
        pre.push_back(z);
        h = (l + 1 < arch.n_layers()) ? kern::elu(z, arch.elu_alpha, be()) : z;
        acts.push_back(h);
    }
    // reverse sweep, seeding d(sum of outputs)/d(out) = 1
    Dense g = Dense::full(1, x.cols(), 1.0);
    for (int l = arch.n_layers() - 1; l >= 0; --l) {
        if (l + 1 < arch.n_layers()) {
            const Dense d = kern::elu_deriv_from_value(pre[static_cast<size_t>(l)], acts[static_cast<size_t>(l) + 1],
                                                       arch.elu_alpha, be());
            g = kern::mul(g, d, be());
        }
        g = kern::gemm(layers[static_cast<size_t>(l)].w, true, g, false, be());
    }
    return g;
}

double MLPField::value(const Dense& x) const { return mlp_forward(arch_, params_, x)(0, 0); }
Dense MLPField::grad(const Dense& x) const { return mlp_input_grad(arch_, params_, x); }

namespace {

// Batched transform of X (M×B) through all S flow maps: returns M×(S·B).
ad::Node apply_flows(ad::Graph& g, ad::Node stacked_maps, ad::Node x, ad::Node hom_row) {
    const int m = x.rows();
    ad::Node xh = g.add(g.embed(x, m + 1, x.cols(), 0, 0), hom_row);
    ad::Node z = g.matmul(stacked_maps, xh);  // (S·M)×B
    return g.rows_to_cols(z, m);              // M×(S·B)
}

void throw_divergence(const Dense& x, int step) {
    std::string cols;
    for (int b = 0; b < x.cols(); ++b) {
        bool bad = false;
        for (int i = 0; i < x.rows() && !bad; ++i) bad = !std::isfinite(x(i, b));
        if (bad) {
            if (!cols.empty()) cols += ",";
            cols += std::to_string(b);
        }
    }
    throw NumericError("rollout diverged at Euler step " + std::to_string(step) + " in columns [" + cols + "]");
}

}  // namespace

ad::Node rollout_mean(ad::Graph& g, const MLPArchitecture& arch, const std::vector<ad::Node>& wb,
                      const sym::BankNodes& bank, ad::Node x0, double dt, int n_steps, const Dense& taus) {
    if (n_steps < 1) throw DomainError("rollout: n_steps must be ≥ 1");
    const int m = x0.rows();
    const int bsz = x0.cols();
    const int s_count = bank.k() > 0 ? taus.rows() : 0;
    if (bank.k() > 0 && taus.cols() != bank.k()) throw ShapeError("rollout: taus width != K");

    ad::Node x = x0;
    if (dt == 0.0) return x;
    const double h = dt / n_steps;
    ad::Node jmat = g.constant(dyn::symplectic_form(m));

    ad::Node maps, hom_row;
    if (bank.k() > 0) {
        maps = sym::stacked_flow_maps(g, bank, taus);
        Dense hom(m + 1, bsz);
        for (int bcol = 0; bcol < bsz; ++bcol) hom(m, bcol) = 1.0;
        hom_row = g.constant(std::move(hom));
    }

    for (int step = 0; step < n_steps; ++step) {
        ad::Node y = bank.k() > 0 ? apply_flows(g, maps, x, hom_row) : x;
        ad::Node f = mlp_forward(g, arch, wb, y);  // 1×(S·B) or 1×B
        ad::Node hhat = bank.k() > 0 ? g.scale(g.sum_col_blocks(f, s_count), 1.0 / s_count) : f;
        ad::Node total = g.sum(hhat);
        ad::Node gx = g.grad(total, x);
        x = g.add(x, g.scale(g.matmul(jmat, gx), h));
        if (!x.value().all_finite()) throw_divergence(x.value(), step + 1);
    }
    return x;
}

Dense rollout_mean_direct(const MLPArchitecture& arch, const MLPParameters& params, const sym::SymmetryBank& bank,
                          const Dense& x0, double dt, int n_steps, const Dense& taus) {
    if (n_steps < 1) throw DomainError("rollout: n_steps must be ≥ 1");
    const int m = x0.rows();
    const int bsz = x0.cols();
    const int k = bank.k();
    const int s_count = k > 0 ? taus.rows() : 0;

    Dense x = x0.clone();
    if (dt == 0.0) return x;
    const double h = dt / n_steps;

    // Precompute the S affine maps (M×(M+1)) and their stacked forms.
    Dense maps;        // (S·M)×(M+1)
    Dense lin_t;       // M×(S·M): [Lin_1ᵀ | … | Lin_Sᵀ] for the pullback
    if (k > 0) {
        maps = Dense::uninit(s_count * m, m + 1);
        lin_t = Dense::uninit(m, s_count * m);
        std::vector<Dense> gens;
        for (const auto& q : bank.quantities) gens.push_back(q.generator());
        for (int s = 0; s < s_count; ++s) {
            Dense gsum(m + 1, m + 1);
            for (int kk = 0; kk < k; ++kk) kern::axpy(gsum, gens[static_cast<size_t>(kk)], taus(s, kk), be());
            const Dense expg = matexp(gsum);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j <= m; ++j) maps(s * m + i, j) = expg(i, j);
            for (int i = 0; i < m; ++i)
                for (int j = 0; j < m; ++j) lin_t(j, s * m + i) = expg(i, j);
        }
    }

    for (int step = 0; step < n_steps; ++step) {
        Dense grad_hat;  // M×B: ∇Ĥ at the batch columns
        if (k > 0) {
            Dense xh(m + 1, bsz);
            for (int i = 0; i < m; ++i)
                for (int bcol = 0; bcol < bsz; ++bcol) xh(i, bcol) = x(i, bcol);
            for (int bcol = 0; bcol < bsz; ++bcol) xh(m, bcol) = 1.0;
            const Dense z = kern::gemm(maps, false, xh, false, be());
            const Dense y = kern::rows_to_cols(z, m, be());
            const Dense din = mlp_input_grad(arch, params, y);   // M×(S·B)
            const Dense dstack = kern::cols_to_rows(din, bsz, be());  // (S·M)×B
            grad_hat = kern::scale(kern::gemm(lin_t, false, dstack, false, be()), 1.0 / s_count, be());
        } else {
            grad_hat = mlp_input_grad(arch, params, x);
        }
        // x += h · J · grad_hat using the block structure of J
        const int half = m / 2;
        for (int bcol = 0; bcol < bsz; ++bcol) {
            for (int i = 0; i < half; ++i) {
                x(i, bcol) += h * grad_hat(half + i, bcol);
                x(half + i, bcol) -= h * grad_hat(i, bcol);
            }
        }
        if (!x.all_finite()) throw_divergence(x, step + 1);
    }
    return x;
}

double log_likelihood(const Dense& pred, const Dense& target, double sigma2_data) {
    if (sigma2_data <= 0.0) throw DomainError("log_likelihood: variance must be positive");
    if (!pred.same_shape(target)) throw ShapeError("log_likelihood: shape mismatch");
    const int m = pred.rows();
    double r2 = 0.0;
    for (long long i = 0; i < pred.size(); ++i) {
        const double r = target.at(i) - pred.at(i);
        r2 += r * r;
    }
    return -0.5 * m * std::log(kTwoPi * sigma2_data) - r2 / (2.0 * sigma2_data);
}

Dense symmetrized_field_values(const MLPArchitecture& arch, const MLPParameters& params,
                               const sym::SymmetryBank& bank, const Dense& x, const Dense& taus) {
    if (bank.k() == 0) return mlp_forward(arch, params, x);
    const int m = x.rows();
    const int bsz = x.cols();
    const int s_count = taus.rows();
    Dense maps = Dense::uninit(s_count * m, m + 1);
    std::vector<Dense> gens;
    for (const auto& q : bank.quantities) gens.push_back(q.generator());
    for (int s = 0; s < s_count; ++s) {
        Dense gsum(m + 1, m + 1);
        for (int kk = 0; kk < bank.k(); ++kk) kern::axpy(gsum, gens[static_cast<size_t>(kk)], taus(s, kk), be());
        const Dense expg = matexp(gsum);
        for (int i = 0; i < m; ++i)
            for (int j = 0; j <= m; ++j) maps(s * m + i, j) = expg(i, j);
    }
    Dense xh(m + 1, bsz);
    for (int i = 0; i < m; ++i)
        for (int bcol = 0; bcol < bsz; ++bcol) xh(i, bcol) = x(i, bcol);
    for (int bcol = 0; bcol < bsz; ++bcol) xh(m, bcol) = 1.0;
    const Dense y = kern::rows_to_cols(kern::gemm(maps, false, xh, false, be()), m, be());
    const Dense f = mlp_forward(arch, params, y);  // 1×(S·B)
    return kern::scale(kern::sum_col_blocks(f, s_count, be()), 1.0 / s_count, be());
}

}  // namespace noether::model
