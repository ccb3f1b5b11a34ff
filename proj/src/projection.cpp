#include "isac/projection.hpp"

#include <limits>
#include <stdexcept>

namespace isac {

ProjectorPair build_projectors(const MatC& x_r) {
    const Eigen::Index mt = x_r.rows(), L = x_r.cols();
    ProjectorPair pair;
    pair.mt = static_cast<int>(mt);
    if (mt == 0) {
        pair.p_par = MatC::Zero(L, L);
        pair.p_perp = MatC::Identity(L, L);
        return pair;
    }
    if (mt > L) throw std::invalid_argument("x_r has more rows than snapshots");

    // Gram of the conjugated rows, X_r^* X_r^T; Hermitian PSD.
    const MatC gram = x_r.conjugate() * x_r.transpose();
    Eigen::SelfAdjointEigenSolver<MatC> es(gram);
    const auto& ev = es.eigenvalues();
    if (ev(0) <= 1e-10 * ev(ev.size() - 1))
        throw std::invalid_argument("x_r is rank deficient: waveform Gram matrix is singular");

    const MatC gram_inv =
        es.eigenvectors() * ev.cwiseInverse().asDiagonal() * es.eigenvectors().adjoint();
    pair.p_par = x_r.transpose() * gram_inv * x_r.conjugate();
    pair.p_par = 0.5 * (pair.p_par + pair.p_par.adjoint()).eval();
    pair.p_perp = MatC::Identity(L, L) - pair.p_par;
    return pair;
}

FlexProjector FlexProjector::make(ProjectorPair pair, double rho) {
    if (rho < 0.0 || rho > 1.0)
        throw std::invalid_argument("rho must lie in [0,1]");
    FlexProjector fp;
    fp.p_fp = pair.p_perp + rho * pair.p_par;
    fp.pair = std::move(pair);
    fp.rho = rho;
    return fp;
}

VecC apply_flex_to_received(const FlexProjector& fp, const MatC& y) {
    if (y.cols() != fp.p_fp.rows())
        throw std::invalid_argument("y column count does not match projector size");
    return vec(y * fp.p_fp.transpose());
}

VecC apply_flex_channel(const FlexProjector& fp, const MatC& h_c, const VecC& x_vec) {
    const Eigen::Index K = h_c.cols(), L = fp.p_fp.rows();
    if (x_vec.size() != K * L)
        throw std::invalid_argument("x_vec length does not match L*K");
    return vec(h_c * unvec(x_vec, K, L) * fp.p_fp.transpose());
}

VecC apply_flex_channel_adjoint(const FlexProjector& fp, const MatC& h_c, const VecC& r_vec) {
    const Eigen::Index mr = h_c.rows(), L = fp.p_fp.rows();
    if (r_vec.size() != mr * L)
        throw std::invalid_argument("r_vec length does not match L*M_r");
    return vec(h_c.adjoint() * unvec(r_vec, mr, L) * fp.p_fp.conjugate());
}

double condition_number(const FlexProjector& fp, const MatC& h_c) {
    if (fp.rho == 0.0) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<MatC> svd(h_c);
    const auto& sv = svd.singularValues();
    const double s_min = sv(sv.size() - 1);
    if (s_min <= 0.0) return std::numeric_limits<double>::infinity();
    return sv(0) / (fp.rho * s_min);
}

long effective_rank(const MatC& x_r, const MatC& h_c, int snapshots) {
    return static_cast<long>(snapshots - x_r.rows()) * h_c.cols();
}

MatC pinv_flex(const FlexProjector& fp) {
    if (fp.rho == 0.0) return fp.pair.p_perp;
    return fp.pair.p_perp + (1.0 / fp.rho) * fp.pair.p_par;
}

} // namespace isac
