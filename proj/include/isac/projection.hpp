#ifndef ISAC_PROJECTION_HPP
#define ISAC_PROJECTION_HPP

#include "isac/common.hpp"

namespace isac {

/// Complement-space / signal-space projector pair of the radar waveform
/// row space. Both are L x L, Hermitian and idempotent, and sum to I_L.
struct ProjectorPair {
    MatC p_perp;
    MatC p_par;
    int mt = 0; ///< rank of p_par
};

/// Tradeoff-parameterized blend p_perp + rho * p_par, rho in [0,1].
/// Immutable after construction; safe to share across detector calls.
struct FlexProjector {
    ProjectorPair pair;
    double rho = 1.0;
    MatC p_fp;

    static FlexProjector make(ProjectorPair pair, double rho);
};

/// Builds the projector pair from the waveform. Requires full row rank;
/// a Gram matrix singular within 1e-10 relative tolerance is rejected.
ProjectorPair build_projectors(const MatC& x_r);

/// vec(Y * P_fp^T): the Kronecker operator (P_fp x I_Mr) applied to vec(Y)
/// without materializing it.
VecC apply_flex_to_received(const FlexProjector& fp, const MatC& y);

/// G_fp * x via vec(H_c * X * P_fp^T) with X = unvec(x).
VecC apply_flex_channel(const FlexProjector& fp, const MatC& h_c, const VecC& x_vec);

/// G_fp^H * r via vec(H_c^H * R * P_fp^*).
VecC apply_flex_channel_adjoint(const FlexProjector& fp, const MatC& h_c, const VecC& r_vec);

/// Condition number of the equivalent channel: sigma_max(H_c)/(rho*sigma_min(H_c)).
/// Returns +inf at rho = 0 (rank-deficient regime).
double condition_number(const FlexProjector& fp, const MatC& h_c);

/// Rank of the rho = 0 equivalent channel: (L - M_t) * K.
long effective_rank(const MatC& x_r, const MatC& h_c, int snapshots);

/// Moore-Penrose pseudoinverse of p_fp: p_perp + (1/rho) p_par for rho > 0,
/// p_perp at rho = 0.
MatC pinv_flex(const FlexProjector& fp);

} // namespace isac

#endif
