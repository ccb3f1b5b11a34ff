#ifndef ISAC_SIGNAL_MODEL_HPP
#define ISAC_SIGNAL_MODEL_HPP

#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include "isac/common.hpp"

namespace isac {

/// Dimensions and powers defining one uplink scenario.
struct SystemConfig {
    int mt = 4;          ///< sensing transmit antennas M_t
    int mr = 8;          ///< receive antennas M_r
    int k_users = 8;     ///< single-antenna communication users K
    int snapshots = 16;  ///< jointly processed snapshots L, must exceed mt
    double p_c = 1.0;    ///< communication transmit power [W]
    double p_r = 1.0;    ///< sensing transmit power [W]
    double sigma2 = 0.01; ///< noise power [W]

    /// Throws std::invalid_argument on inconsistent dimensions or powers.
    void validate() const;
};

/// Unit-average-energy symbol alphabet with Gray bit labels.
class Constellation {
public:
    static Constellation qam4();
    static Constellation psk4();
    static Constellation from_name(std::string_view name);

    const std::vector<Cplx>& points() const { return points_; }
    const std::string& name() const { return name_; }
    int bits_per_symbol() const { return bits_per_symbol_; }
    double d_min() const { return d_min_; }
    double hull_lo() const { return hull_lo_; }
    double hull_hi() const { return hull_hi_; }

    /// Gray label of the point at `index`.
    unsigned bits_of(int index) const { return labels_[static_cast<size_t>(index)]; }

    /// Index of the nearest point; exact ties go to the lowest index.
    int nearest(Cplx v) const;

private:
    Constellation(std::string name, std::vector<Cplx> pts, std::vector<unsigned> labels,
                  int bits, double lo, double hi);

    std::string name_;
    std::vector<Cplx> points_;
    std::vector<unsigned> labels_;
    int bits_per_symbol_;
    double d_min_;
    double hull_lo_, hull_hi_;
};

/// One coherent block of L snapshots.
struct Frame {
    SystemConfig cfg;
    MatC h_c;   ///< M_r x K user channel
    MatC x_r;   ///< M_t x L radar waveform
    MatC h_r;   ///< M_r x M_t target response
    MatC x_c;   ///< K x L transmitted symbols, entries in sqrt(p_c)*alphabet
    MatC noise; ///< M_r x L
    MatC y;     ///< M_r x L received block
};

/// Real-valued reformulation of the flexible-projection LS problem.
struct RealProblem {
    VecR y_bar;                                   ///< length 2*L*M_r
    std::function<VecR(const VecR&)> g_bar_apply; ///< 2LK -> 2LMr
    int snapshots = 0, k_users = 0, mr = 0;
};

/// User channel, i.i.d. CN(0,1) entries; corr > 0 applies receive-side
/// exponential correlation corr^|i-j| through the matrix square root.
MatC gen_comm_channel(const SystemConfig& cfg, double corr, Rng& rng);

/// Orthogonal radar waveform: the first M_t rows of the unitary L-point DFT,
/// scaled so that X_r X_r^H = (p_r*L/M_t) I. Deterministic.
MatC gen_radar_waveform(const SystemConfig& cfg);

/// Target response with i.i.d. CN(0,v) entries, v chosen so the received
/// sensing power per snapshot E||H_r X_r||_F^2 / L equals target_power.
MatC gen_target_response(const SystemConfig& cfg, double target_power, Rng& rng);

/// K x L symbol matrix, entries drawn uniformly from the alphabet and
/// scaled by sqrt(p_c).
MatC gen_symbols(const SystemConfig& cfg, const Constellation& cons, Rng& rng);

/// Draw order: h_c, h_r, x_c, noise (x_r is deterministic).
Frame synthesize_frame(const SystemConfig& cfg, const Constellation& cons,
                       double corr, double target_power, Rng& rng);

/// Real embedding of a complex LS instance; preserves residual norms.
RealProblem to_real_problem(const VecC& y_fp,
                            std::function<VecC(const VecC&)> g_fp_apply,
                            int snapshots, int k_users, int mr);

/// Hard decision of a real-stacked soft vector onto the scaled alphabet.
/// Ties go to the lowest point index.
MatC quantize_to_alphabet(const VecR& x_soft, const Constellation& cons,
                          double sym_scale, int k_users, int snapshots);

} // namespace isac

#endif
