#include "isac/detectors.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

namespace isac {

void HomotopyConfig::validate() const {
    if (mu0 < 0.0) throw std::invalid_argument("mu0 must be >= 0");
    if (mu_min <= 0.0) throw std::invalid_argument("mu_min must be > 0");
    if (epsilon <= 0.0 || epsilon >= 1.0)
        throw std::invalid_argument("epsilon must lie in (0,1)");
    if (l_max < 1) throw std::invalid_argument("l_max must be >= 1");
    if (k_max < 1) throw std::invalid_argument("k_max must be >= 1");
    if (inner_tol < 0.0) throw std::invalid_argument("inner_tol must be >= 0");
}

FlexChannelOp FlexChannelOp::make(const FlexProjector& fp, const MatC& h_c, const MatC& y) {
    FlexChannelOp op;
    op.h_c = &h_c;
    op.y = &y;
    op.snapshots = static_cast<int>(fp.p_fp.rows());
    op.k_users = static_cast<int>(h_c.cols());
    op.mr = static_cast<int>(h_c.rows());
    op.hth = h_c.adjoint() * h_c;
    // P_fp^2 = p_perp + rho^2 p_par: the blend squares eigenvalue-wise.
    op.p_sq_conj = (fp.pair.p_perp + (fp.rho * fp.rho) * fp.pair.p_par).conjugate();
    op.p_t = fp.p_fp.transpose();
    op.g_adj_y = to_real(vec(MatC(h_c.adjoint() * y * op.p_sq_conj)));
    return op;
}

VecR FlexChannelOp::normal_apply(const VecR& x_bar) const {
    const MatC x = unvec(to_complex(x_bar), k_users, snapshots);
    return to_real(vec(MatC(hth * x * p_sq_conj)));
}

double FlexChannelOp::data_residual(const VecR& x_bar) const {
    const MatC x = unvec(to_complex(x_bar), k_users, snapshots);
    return ((*y - *h_c * x) * p_t).squaredNorm();
}

VecR clamp_to_hull(const VecR& x, double lo, double hi) {
    return x.cwiseMax(lo).cwiseMin(hi);
}

VecR zf_detect(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp) {
    Eigen::JacobiSVD<MatC> svd(h_c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();
    const double s_min = sv(sv.size() - 1);
    if (s_min <= 0.0 || sv(0) / s_min > 1e12)
        throw std::runtime_error("zf_detect: H_c is ill conditioned");
    const MatC h_pinv = svd.matrixV() * sv.cwiseInverse().asDiagonal() * svd.matrixU().adjoint();
    const MatC y_mat = unvec(y_fp, h_c.rows(), fp.p_fp.rows());
    return to_real(vec(MatC(h_pinv * y_mat * pinv_flex(fp).transpose())));
}

MatC ml_detect_exhaustive(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp,
                          const Constellation& cons, double sym_scale) {
    const int L = static_cast<int>(fp.p_fp.rows());
    const int K = static_cast<int>(h_c.cols());
    const int n = L * K;
    const int m = static_cast<int>(cons.points().size());
    if (n * std::log2(static_cast<double>(m)) > 20.0 + 1e-9)
        throw std::invalid_argument("ml_detect_exhaustive: more than 2^20 hypotheses");

    const MatC g = kron(fp.p_fp, h_c);
    // Per-column contribution of each alphabet point.
    std::vector<std::vector<VecC>> contrib(static_cast<size_t>(n));
    for (int j = 0; j < n; ++j) {
        contrib[static_cast<size_t>(j)].reserve(static_cast<size_t>(m));
        for (int a = 0; a < m; ++a)
            contrib[static_cast<size_t>(j)].push_back(
                g.col(j) * (sym_scale * cons.points()[static_cast<size_t>(a)]));
    }

    std::vector<int> idx(static_cast<size_t>(n), 0), best_idx = idx;
    VecC sum = VecC::Zero(y_fp.size());
    for (int j = 0; j < n; ++j) sum += contrib[static_cast<size_t>(j)][0];

    double best = (y_fp - sum).squaredNorm();
    // Lexicographic enumeration, index 0 most significant; a strict-improvement
    // band keeps exact ties (and rounding noise around them) on the first hit.
    for (;;) {
        int d = n - 1;
        while (d >= 0 && idx[static_cast<size_t>(d)] == m - 1) {
            sum += contrib[static_cast<size_t>(d)][0] -
                   contrib[static_cast<size_t>(d)][static_cast<size_t>(m - 1)];
            idx[static_cast<size_t>(d)] = 0;
            --d;
        }
        if (d < 0) break;
        const int old = idx[static_cast<size_t>(d)]++;
        sum += contrib[static_cast<size_t>(d)][static_cast<size_t>(old + 1)] -
               contrib[static_cast<size_t>(d)][static_cast<size_t>(old)];
        const double obj = (y_fp - sum).squaredNorm();
        if (obj < best - 1e-9 * std::max(1.0, best)) {
            best = obj;
            best_idx = idx;
        }
    }

    MatC out(K, L);
    for (int j = 0; j < n; ++j)
        out(j % K, j / K) =
            sym_scale * cons.points()[static_cast<size_t>(best_idx[static_cast<size_t>(j)])];
    return out;
}

double detection_objective(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp,
                           const MatC& x_hat) {
    return (y_fp - apply_flex_channel(fp, h_c, vec(x_hat))).squaredNorm();
}

void pg_inner_solve(DetectorState& state, const FlexChannelOp& op, double mu,
                    double beta, double hull_lo, double hull_hi,
                    const HomotopyConfig& cfg, DetectorReport* report) {
    double tau_prev = 1.0;
    state.x_prev = state.x_cur;
    for (state.k = 0; state.k < cfg.k_max; ++state.k) {
        double alpha = 0.0;
        if (cfg.alpha_rule == AlphaRule::accelerated) {
            const double tau = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * tau_prev * tau_prev));
            alpha = (tau_prev - 1.0) / tau;
            tau_prev = tau;
        }
        state.z = state.x_cur + alpha * (state.x_cur - state.x_prev);
        state.t = state.z -
                  beta * (2.0 * op.normal_apply(state.z) - 2.0 * op.g_adj_y) +
                  (2.0 * beta * mu) * state.x_cur;
        VecR x_next = clamp_to_hull(state.t, hull_lo, hull_hi);
        if (!x_next.allFinite())
            throw std::runtime_error("pg_inner_solve: non-finite iterate at inner step " +
                                     std::to_string(state.k) + ", outer step " +
                                     std::to_string(state.l));
        const double delta = (x_next - state.x_cur).lpNorm<Eigen::Infinity>();
        state.x_prev = state.x_cur;
        state.x_cur = std::move(x_next);
        if (report) {
            ++report->total_inner_iters;
            if (cfg.monitor_objective)
                report->objective_trace.push_back(op.data_residual(state.x_cur) -
                                                  mu * state.x_cur.squaredNorm());
        }
        if (delta < cfg.inner_tol) {
            ++state.k;
            break;
        }
    }
}

namespace {

MatC homotopy_core(const ProjectorPair& pair, const MatC& h_c, const MatC& y,
                   const Constellation& cons, double sym_scale,
                   const HomotopyConfig& cfg, bool dynamic_rho, double fixed_rho,
                   DetectorReport* report) {
    cfg.validate();
    const int L = static_cast<int>(pair.p_perp.rows());
    const int K = static_cast<int>(h_c.cols());

    Eigen::JacobiSVD<MatC> svd(h_c);
    const double s_max = svd.singularValues()(0);
    // lambda_1(G'(rho) G(rho)) = lambda_1(H^H H) for every rho: the projector
    // contributes a unit top eigenvalue.
    const double threshold = s_max * s_max;
    const double beta =
        cfg.beta_rule == BetaRule::spectral ? 1.0 / s_max : 1.0 / (2.0 * threshold);

    double growth = cfg.mu_growth;
    if (growth <= 1.0) {
        const double mu_start = std::max(cfg.mu0, cfg.mu_min);
        growth = 2.0 * threshold > mu_start
                     ? std::pow(2.0 * threshold / mu_start, 2.0 / cfg.l_max)
                     : 2.0;
    }

    const double lo = cons.hull_lo() * sym_scale, hi = cons.hull_hi() * sym_scale;
    auto rho_at = [&](int l) {
        return dynamic_rho ? std::pow(cfg.epsilon, static_cast<double>(l)) : fixed_rho;
    };

    FlexProjector fp = FlexProjector::make(pair, rho_at(0));
    DetectorState st;
    st.x_cur = clamp_to_hull(zf_detect(fp, h_c, apply_flex_to_received(fp, y)), lo, hi);
    st.x_prev = st.x_cur;

    double mu = cfg.mu0, mu_used = cfg.mu0;
    for (st.l = 0; st.l < cfg.l_max; ++st.l) {
        if (st.l > 0 && dynamic_rho) fp = FlexProjector::make(pair, rho_at(st.l));
        const FlexChannelOp op = FlexChannelOp::make(fp, h_c, y);
        if (report) {
            report->rho_trace.push_back(fp.rho);
            report->mu_trace.push_back(mu);
        }
        if (report && cfg.monitor_objective) report->outer_inits.push_back(st.x_cur);
        pg_inner_solve(st, op, mu, beta, lo, hi, cfg, report);
        if (report && cfg.monitor_objective) report->outer_finals.push_back(st.x_cur);
        mu_used = mu;
        mu = growth * std::max(mu, cfg.mu_min);
    }
    if (report) {
        report->final_mu = mu_used;
        report->threshold = threshold;
        report->threshold_reached = mu_used > threshold;
    }
    return quantize_to_alphabet(st.x_cur, cons, sym_scale, K, L);
}

} // namespace

MatC homotopy_detect(const FlexProjector& fp, const MatC& h_c, const MatC& y,
                     const Constellation& cons, double sym_scale,
                     const HomotopyConfig& cfg, DetectorReport* report) {
    return homotopy_core(fp.pair, h_c, y, cons, sym_scale, cfg, false, fp.rho, report);
}

MatC dfp_detect(const ProjectorPair& pair, const MatC& h_c, const MatC& y,
                const Constellation& cons, double sym_scale,
                const HomotopyConfig& cfg, DetectorReport* report) {
    return homotopy_core(pair, h_c, y, cons, sym_scale, cfg, true, 0.0, report);
}

} // namespace isac
