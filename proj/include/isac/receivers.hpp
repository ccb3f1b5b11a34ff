#ifndef ISAC_RECEIVERS_HPP
#define ISAC_RECEIVERS_HPP

#include <vector>

#include "isac/detectors.hpp"

namespace isac {

/// Joint result of one receiver pass: hard symbol decisions, least-squares
/// target-response estimate, and the joint residual of problem (y, A_c, A_r).
struct ReceiverOutput {
    MatC x_hat;      ///< K x L, entries in sqrt(p_c)*alphabet
    MatC h_hat;      ///< M_r x M_t
    double residual = 0.0; ///< ||Y - H_c X_hat - H_hat X_r||_F^2
};

/// Closed-form LS estimate (Y - H_c X_hat) X_r^H (X_r X_r^H)^{-1}.
MatC estimate_target_response(const MatC& x_r, const MatC& y, const MatC& h_c,
                              const MatC& x_hat);

/// ||Y - H_c X_hat - H_hat X_r||_F^2 evaluated in matrix form.
double joint_residual(const MatC& y, const MatC& h_c, const MatC& x_hat,
                      const MatC& x_r, const MatC& h_hat);

/// SIC: detect at rho = 1 (no projection), then subtract and estimate.
ReceiverOutput sic_receive(const Frame& frame, const Constellation& cons,
                           const HomotopyConfig& cfg);

/// Projection: detect in the complement space (rho = 0), then estimate.
ReceiverOutput projection_receive(const Frame& frame, const Constellation& cons,
                                  const HomotopyConfig& cfg);

/// Flexible projection at a fixed tradeoff factor.
ReceiverOutput fp_receive(const Frame& frame, const Constellation& cons, double rho,
                          const HomotopyConfig& cfg);

/// Dynamic FP with rho_l = epsilon^l across the homotopy outer loop.
ReceiverOutput dfp_receive(const Frame& frame, const Constellation& cons,
                           const HomotopyConfig& cfg);

/// Parallel DFP: one branch per config, minimum joint residual wins,
/// ties to the lowest branch index.
ReceiverOutput pdfp_receive(const Frame& frame, const Constellation& cons,
                            const std::vector<HomotopyConfig>& branches);

/// Sensing stage with ground-truth symbols (test hook / oracle baseline).
ReceiverOutput oracle_symbol_receive(const Frame& frame);

/// Sub-block processing policy. Sub-block frames are grouped into blocks of
/// n_sub; each block is detected against the previous block's combined
/// target-response estimate and then re-estimates it from its own snapshots.
struct BlockPolicy {
    int n_sub = 1;            ///< sub-blocks per block (J)
    double rho_fixed = -1.0;  ///< in [0,1]: fixed-rho detection; <0: DFP schedule
    bool reestimate_per_subblock = false; ///< refresh the prior inside a block
    MatC h_prior;             ///< initial estimate, empty means zero
};

struct BlockResult {
    std::vector<ReceiverOutput> sub_outputs; ///< one per sub-block frame
    std::vector<MatC> block_estimates;       ///< combined estimate per block
    MatC h_hat;                              ///< final combined estimate
};

/// Processes a sequence of sub-block frames sharing h_c, h_r and the
/// waveform construction (one coherent interval).
BlockResult block_receive(const std::vector<Frame>& subframes, const Constellation& cons,
                          const HomotopyConfig& cfg, const BlockPolicy& policy);

} // namespace isac

#endif
