#ifndef ISAC_ANALYSIS_HPP
#define ISAC_ANALYSIS_HPP

#include "isac/projection.hpp"
#include "isac/signal_model.hpp"

namespace isac {

/// Operating point of the closed-form performance expressions.
struct AnalysisPoint {
    double rho = 1.0;
    double p_c = 1.0;
    double p_s = 1.0;    ///< received sensing power per snapshot
    double sigma2 = 0.01;
    double d_min = 0.0;  ///< minimum distance of the scaled constellation
    int snapshots = 16, mt = 4, mr = 8, k_users = 8;

    void validate() const;
};

/// Gaussian tail probability Q(x) = erfc(x/sqrt(2))/2.
double q_function(double x);

/// SINR of the flexible-projection detection problem:
/// P_c (L-(1-rho^2)M_t) K M_r / (rho^2 L P_s + (L-(1-rho^2)M_t) M_r sigma^2).
double sinr_fp(const AnalysisPoint& pt);

/// Equivalent ML noise power rho^2 L P_s + (L-(1-rho^2)M_t) M_r sigma^2.
double sigma_ml_sq(const AnalysisPoint& pt);

/// Approximate pairwise error probability under ML detection,
/// Q(d_min sqrt(L-(1-rho^2)M_t) / (L sqrt(2 sigma_ml^2))).
double pep_ml_approx(const AnalysisPoint& pt);

/// Approximate PEP under ZF detection,
/// Q(d_min L / sqrt(2 sigma_ml^2 (L - M_t + M_t/rho^2))). Rejects rho = 0,
/// where the pseudoinverse noise amplification is unbounded.
double pep_zf_approx(const AnalysisPoint& pt);

/// Grid minimizer of the ZF PEP over rho in (0,1]; returns the minimizing rho.
double optimal_rho_zf(const AnalysisPoint& pt, int grid_size = 100);

/// Homotopy penalty threshold lambda_1(H_c^H H_c) = sigma_max(H_c)^2, equal
/// to lambda_1 of the real-embedded Gram for every rho in (0,1].
double penalty_threshold(const MatC& h_c);

/// Monte Carlo estimate of the SINR definition: ratio of projected signal,
/// interference and noise energies over independently drawn frames.
double empirical_sinr(const SystemConfig& cfg, const Constellation& cons,
                      double rho, double target_power, int n_trials, Rng& rng);

/// Exact error probability of the binary hypothesis test between two symbol
/// matrices differing by delta, under projected white noise of power sigma2
/// and no sensing interference: Q(||G d||^2 / (sqrt(2 sigma2) ||(P^2 (x) H) d||)).
double pep_exact_binary(const FlexProjector& fp, const MatC& h_c, const MatC& delta,
                        double sigma2);

} // namespace isac

#endif
