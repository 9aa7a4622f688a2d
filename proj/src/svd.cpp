#include "noether/svd.hpp"

#include <Eigen/Dense>
#include <Eigen/SVD>

namespace noether {

SvdResult svd(const Dense& m) {
    if (!m.all_finite()) throw DomainError("svd: non-finite entries");
    using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    Eigen::Map<const EMat> em(m.data(), m.rows(), m.cols());
    Eigen::JacobiSVD<Eigen::MatrixXd> solver(em, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& u = solver.matrixU();
    const auto& v = solver.matrixV();
    const auto& s = solver.singularValues();

    SvdResult out;
    out.u = Dense::uninit(static_cast<int>(u.rows()), static_cast<int>(u.cols()));
    out.v = Dense::uninit(static_cast<int>(v.rows()), static_cast<int>(v.cols()));
    out.sigma.assign(s.data(), s.data() + s.size());
    for (int i = 0; i < out.u.rows(); ++i)
        for (int j = 0; j < out.u.cols(); ++j) out.u(i, j) = u(i, j);
    for (int i = 0; i < out.v.rows(); ++i)
        for (int j = 0; j < out.v.cols(); ++j) out.v(i, j) = v(i, j);

    for (double sv : out.sigma)
        if (!std::isfinite(sv))
            throw NumericError("svd: solver produced non-finite singular values for " + m.shape_str());
    return out;
}

}  // namespace noether
