#include "isac/analysis.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "isac/projection.hpp"

namespace isac {

void AnalysisPoint::validate() const {
    if (rho < 0.0 || rho > 1.0) throw std::invalid_argument("rho must lie in [0,1]");
    if (p_c < 0.0 || p_s < 0.0 || sigma2 < 0.0)
        throw std::invalid_argument("powers must be >= 0");
    if (snapshots <= mt || mt < 0 || mr < 1 || k_users < 1)
        throw std::invalid_argument("invalid dimensions");
}

double q_function(double x) {
    return 0.5 * std::erfc(x / std::sqrt(2.0));
}

namespace {

// tr(P_fp^2) = L - (1-rho^2) M_t, the effective dimension retained.
double effective_dim(const AnalysisPoint& pt) {
    return pt.snapshots - (1.0 - pt.rho * pt.rho) * pt.mt;
}

} // namespace

double sinr_fp(const AnalysisPoint& pt) {
    pt.validate();
    const double d = effective_dim(pt);
    return pt.p_c * d * pt.k_users * pt.mr /
           (pt.rho * pt.rho * pt.snapshots * pt.p_s + d * pt.mr * pt.sigma2);
}

double sigma_ml_sq(const AnalysisPoint& pt) {
    pt.validate();
    return pt.rho * pt.rho * pt.snapshots * pt.p_s + effective_dim(pt) * pt.mr * pt.sigma2;
}

double pep_ml_approx(const AnalysisPoint& pt) {
    pt.validate();
    return q_function(pt.d_min * std::sqrt(effective_dim(pt)) /
                      (pt.snapshots * std::sqrt(2.0 * sigma_ml_sq(pt))));
}

double pep_zf_approx(const AnalysisPoint& pt) {
    pt.validate();
    if (pt.rho == 0.0)
        throw std::invalid_argument(
            "pep_zf_approx: rho = 0 amplifies the pseudoinverse noise without bound");
    const double amp = pt.snapshots - pt.mt + pt.mt / (pt.rho * pt.rho);
    return q_function(pt.d_min * pt.snapshots / std::sqrt(2.0 * sigma_ml_sq(pt) * amp));
}

double optimal_rho_zf(const AnalysisPoint& pt, int grid_size) {
    if (grid_size < 2) throw std::invalid_argument("grid_size must be >= 2");
    AnalysisPoint p = pt;
    double best_rho = 1.0, best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= grid_size; ++i) {
        p.rho = static_cast<double>(i) / grid_size;
        const double v = pep_zf_approx(p);
        if (v < best) {
            best = v;
            best_rho = p.rho;
        }
    }
    return best_rho;
}

double penalty_threshold(const MatC& h_c) {
    if (h_c.size() == 0 || h_c.isZero(0.0))
        throw std::invalid_argument("penalty_threshold: h_c must be nonzero");
    Eigen::JacobiSVD<MatC> svd(h_c);
    const double s = svd.singularValues()(0);
    return s * s;
}

double pep_exact_binary(const FlexProjector& fp, const MatC& h_c, const MatC& delta,
                        double sigma2) {
    if (sigma2 <= 0.0) throw std::invalid_argument("sigma2 must be > 0");
    const double num = ((h_c * delta) * fp.p_fp.transpose()).squaredNorm();
    const MatC p_sq = fp.pair.p_perp + (fp.rho * fp.rho) * fp.pair.p_par;
    const double dir = ((h_c * delta) * p_sq.transpose()).norm();
    if (dir == 0.0) return 0.0; // hypotheses indistinguishable only if num is 0 too
    return q_function(num / (std::sqrt(2.0 * sigma2) * dir));
}

double empirical_sinr(const SystemConfig& cfg, const Constellation& cons,
                      double rho, double target_power, int n_trials, Rng& rng) {
    cfg.validate();
    if (n_trials < 1) throw std::invalid_argument("n_trials must be >= 1");
    const FlexProjector fp =
        FlexProjector::make(build_projectors(gen_radar_waveform(cfg)), rho);
    const MatC p_t = fp.p_fp.transpose();
    double sig = 0.0, intf = 0.0, noise = 0.0;
    for (int t = 0; t < n_trials; ++t) {
        const Frame f = synthesize_frame(cfg, cons, 0.0, target_power, rng);
        sig += ((f.h_c * f.x_c) * p_t).squaredNorm();
        intf += ((f.h_r * f.x_r) * p_t).squaredNorm();
        noise += (f.noise * p_t).squaredNorm();
    }
    return sig / (intf + noise);
}

} // namespace isac
