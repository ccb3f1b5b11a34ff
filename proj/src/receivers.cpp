#include "isac/receivers.hpp"

#include <cmath>
#include <stdexcept>

namespace isac {

MatC estimate_target_response(const MatC& x_r, const MatC& y, const MatC& h_c,
                              const MatC& x_hat) {
    if (x_r.rows() == 0) return MatC(y.rows(), 0);
    const MatC gram = x_r * x_r.adjoint();
    Eigen::FullPivLU<MatC> lu(gram);
    if (!lu.isInvertible())
        throw std::invalid_argument("estimate_target_response: X_r X_r^H is singular");
    return (y - h_c * x_hat) * x_r.adjoint() * lu.inverse();
}

double joint_residual(const MatC& y, const MatC& h_c, const MatC& x_hat,
                      const MatC& x_r, const MatC& h_hat) {
    return (y - h_c * x_hat - h_hat * x_r).squaredNorm();
}

namespace {

ReceiverOutput finish(const Frame& f, MatC x_hat) {
    ReceiverOutput out;
    out.h_hat = estimate_target_response(f.x_r, f.y, f.h_c, x_hat);
    out.residual = joint_residual(f.y, f.h_c, x_hat, f.x_r, out.h_hat);
    out.x_hat = std::move(x_hat);
    return out;
}

} // namespace

ReceiverOutput fp_receive(const Frame& frame, const Constellation& cons, double rho,
                          const HomotopyConfig& cfg) {
    const FlexProjector fp = FlexProjector::make(build_projectors(frame.x_r), rho);
    MatC x_hat = homotopy_detect(fp, frame.h_c, frame.y, cons,
                                 std::sqrt(frame.cfg.p_c), cfg);
    return finish(frame, std::move(x_hat));
}

ReceiverOutput sic_receive(const Frame& frame, const Constellation& cons,
                           const HomotopyConfig& cfg) {
    return fp_receive(frame, cons, 1.0, cfg);
}

ReceiverOutput projection_receive(const Frame& frame, const Constellation& cons,
                                  const HomotopyConfig& cfg) {
    return fp_receive(frame, cons, 0.0, cfg);
}

ReceiverOutput dfp_receive(const Frame& frame, const Constellation& cons,
                           const HomotopyConfig& cfg) {
    MatC x_hat = dfp_detect(build_projectors(frame.x_r), frame.h_c, frame.y, cons,
                            std::sqrt(frame.cfg.p_c), cfg);
    return finish(frame, std::move(x_hat));
}

ReceiverOutput pdfp_receive(const Frame& frame, const Constellation& cons,
                            const std::vector<HomotopyConfig>& branches) {
    if (branches.empty())
        throw std::invalid_argument("pdfp_receive: needs at least one branch");
    ReceiverOutput best;
    bool have = false;
    for (const auto& cfg : branches) {
        ReceiverOutput out = dfp_receive(frame, cons, cfg);
        if (!have || out.residual < best.residual) {
            best = std::move(out);
            have = true;
        }
    }
    return best;
}

ReceiverOutput oracle_symbol_receive(const Frame& frame) {
    ReceiverOutput out;
    out.x_hat = frame.x_c;
    out.h_hat = estimate_target_response(frame.x_r, frame.y, frame.h_c, frame.x_c);
    out.residual = joint_residual(frame.y, frame.h_c, frame.x_c, frame.x_r, out.h_hat);
    return out;
}

BlockResult block_receive(const std::vector<Frame>& subframes, const Constellation& cons,
                          const HomotopyConfig& cfg, const BlockPolicy& policy) {
    if (subframes.empty())
        throw std::invalid_argument("block_receive: no sub-block frames");
    if (policy.n_sub < 1)
        throw std::invalid_argument("block_receive: n_sub must be >= 1");
    const Frame& f0 = subframes.front();
    if (f0.cfg.snapshots <= f0.cfg.mt)
        throw std::invalid_argument("block_receive: sub-block length must exceed mt");

    const ProjectorPair pair = build_projectors(f0.x_r);
    const double scale = std::sqrt(f0.cfg.p_c);
    const MatC gram_inv = (f0.x_r * f0.x_r.adjoint()).inverse();

    BlockResult res;
    res.sub_outputs.reserve(subframes.size());
    MatC h_prev = policy.h_prior.size() > 0
                      ? policy.h_prior
                      : MatC::Zero(f0.cfg.mr, f0.cfg.mt);

    size_t pos = 0;
    while (pos < subframes.size()) {
        const size_t block_end = std::min(pos + static_cast<size_t>(policy.n_sub),
                                          subframes.size());
        // Accumulated LS terms over the current block's sub-blocks.
        MatC acc = MatC::Zero(f0.cfg.mr, f0.cfg.mt);
        size_t n_in_block = 0;
        for (size_t j = pos; j < block_end; ++j) {
            const Frame& f = subframes[j];
            const MatC y_clean = f.y - h_prev * f.x_r;
            MatC x_hat;
            if (policy.rho_fixed >= 0.0) {
                const FlexProjector fp = FlexProjector::make(pair, policy.rho_fixed);
                x_hat = homotopy_detect(fp, f.h_c, y_clean, cons, scale, cfg);
            } else {
                x_hat = dfp_detect(pair, f.h_c, y_clean, cons, scale, cfg);
            }
            acc += (f.y - f.h_c * x_hat) * f.x_r.adjoint();
            ++n_in_block;
            ReceiverOutput out;
            out.x_hat = std::move(x_hat);
            res.sub_outputs.push_back(std::move(out));
            if (policy.reestimate_per_subblock)
                h_prev = acc * gram_inv / static_cast<double>(n_in_block);
        }
        const MatC block_est = acc * gram_inv / static_cast<double>(n_in_block);
        for (size_t j = pos; j < block_end; ++j) {
            res.sub_outputs[j].h_hat = block_est;
            res.sub_outputs[j].residual = joint_residual(
                subframes[j].y, subframes[j].h_c, res.sub_outputs[j].x_hat,
                subframes[j].x_r, block_est);
        }
        res.block_estimates.push_back(block_est);
        h_prev = block_est;
        pos = block_end;
    }
    res.h_hat = res.block_estimates.back();
    return res;
}

} // namespace isac
