#ifndef ISAC_DETECTORS_HPP
#define ISAC_DETECTORS_HPP

#include <vector>

#include "isac/projection.hpp"
#include "isac/signal_model.hpp"

namespace isac {

enum class AlphaRule { none, accelerated };
enum class BetaRule { spectral, lipschitz };

/// Schedules and iteration limits for the two-loop homotopy solver.
struct HomotopyConfig {
    double mu0 = 1e-3;       ///< initial penalty
    double mu_growth = 0.0;  ///< per-outer-iteration factor; <=1 selects the
                             ///< automatic rule that crosses the Theorem-2
                             ///< threshold by l_max/2
    double mu_min = 1e-6;    ///< floor used by the geometric update
    double epsilon = 0.05;   ///< tradeoff decay base, rho_l = epsilon^l
    int l_max = 50;
    int k_max = 50;
    AlphaRule alpha_rule = AlphaRule::accelerated;
    /// lipschitz: beta = 1/(2||G_l||_2^2), the sufficient-descent step for the
    /// quadratic; spectral: beta = 1/||G_l||_2, which overshoots whenever
    /// ||G_l||_2 > 1/2 and degrades detection at realistic channel scales.
    BetaRule beta_rule = BetaRule::lipschitz;
    double inner_tol = 1e-8; ///< early exit on ||x^{k+1}-x^k||_inf
    bool monitor_objective = false;

    void validate() const;
};

/// Iterate bookkeeping for the projected-gradient inner loop.
struct DetectorState {
    VecR x_cur, x_prev, z, t;
    int k = 0, l = 0;
};

/// Diagnostics gathered by the homotopy drivers.
struct DetectorReport {
    bool threshold_reached = true; ///< final penalty exceeded lambda_1(G'G)
    double final_mu = 0.0;
    double threshold = 0.0;
    int total_inner_iters = 0;
    std::vector<double> rho_trace;        ///< tradeoff factor per outer step
    std::vector<double> mu_trace;         ///< penalty per outer step
    std::vector<double> objective_trace;  ///< F_mu per inner step (monitored runs)
    std::vector<VecR> outer_inits;        ///< iterate entering each outer step (monitored runs)
    std::vector<VecR> outer_finals;       ///< iterate leaving each outer step (monitored runs)
};

/// Normal-equation operators for a fixed (H_c, P_l). Exploits the Kronecker
/// structure: G'G x = vec(H^H H X (P^2)^*) and G'y = vec(H^H Y (P^2)^*), so
/// an inner iteration costs O(K^2 L + K L^2).
struct FlexChannelOp {
    MatC hth;        ///< H_c^H H_c
    MatC p_sq_conj;  ///< (P_fp^2)^*
    MatC p_t;        ///< P_fp^T (objective evaluation)
    VecR g_adj_y;    ///< real embedding of G^H y_fp
    const MatC* h_c = nullptr;
    const MatC* y = nullptr;
    int snapshots = 0, k_users = 0, mr = 0;

    static FlexChannelOp make(const FlexProjector& fp, const MatC& h_c, const MatC& y);

    /// Real embedding of G^H G applied to x_bar.
    VecR normal_apply(const VecR& x_bar) const;
    /// f(x) = ||y_fp - G x||^2 evaluated in matrix form.
    double data_residual(const VecR& x_bar) const;
};

/// Per-dimension clamp onto [lo, hi].
VecR clamp_to_hull(const VecR& x, double lo, double hi);

/// Zero-forcing soft estimate G_fp^+ y_fp via the Kronecker pseudoinverse.
/// Rejects H_c with condition number above 1e12.
VecR zf_detect(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp);

/// Exhaustive search over the scaled alphabet; refuses instances with more
/// than 2^20 hypotheses. Ties (within a small relative band, which also
/// absorbs accumulated rounding) go to the lexicographically first symbol
/// index vector, vec order, index 0 most significant.
MatC ml_detect_exhaustive(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp,
                          const Constellation& cons, double sym_scale);

/// Objective value ||y_fp - G_fp x||^2 for a hard decision x (tests, oracle
/// gap reporting).
double detection_objective(const FlexProjector& fp, const MatC& h_c, const VecC& y_fp,
                           const MatC& x_hat);

/// One inner loop of extrapolated projected gradient steps at fixed (mu, rho).
/// Hull bounds are absolute (already scaled); pass +-inf to disable.
void pg_inner_solve(DetectorState& state, const FlexChannelOp& op, double mu,
                    double beta, double hull_lo, double hull_hi,
                    const HomotopyConfig& cfg, DetectorReport* report = nullptr);

/// Two-loop homotopy detection at a fixed tradeoff factor.
MatC homotopy_detect(const FlexProjector& fp, const MatC& h_c, const MatC& y,
                     const Constellation& cons, double sym_scale,
                     const HomotopyConfig& cfg, DetectorReport* report = nullptr);

/// Dynamic-FP detection: rho_l = epsilon^l is refreshed every outer
/// iteration and the operators are rebuilt before each inner loop.
MatC dfp_detect(const ProjectorPair& pair, const MatC& h_c, const MatC& y,
                const Constellation& cons, double sym_scale,
                const HomotopyConfig& cfg, DetectorReport* report = nullptr);

} // namespace isac

#endif
