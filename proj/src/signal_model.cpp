#include "isac/signal_model.hpp"

#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

namespace isac {

void SystemConfig::validate() const {
    if (mt < 0) throw std::invalid_argument("mt must be >= 0");
    if (mr < 1) throw std::invalid_argument("mr must be >= 1");
    if (k_users < 1 || k_users > mr)
        throw std::invalid_argument("k_users must satisfy 1 <= K <= M_r");
    if (snapshots <= mt)
        throw std::invalid_argument("snapshots must exceed mt");
    if (p_c <= 0.0) throw std::invalid_argument("p_c must be > 0");
    if (p_r < 0.0) throw std::invalid_argument("p_r must be >= 0");
    if (sigma2 <= 0.0) throw std::invalid_argument("sigma2 must be > 0");
}

namespace {

double min_pairwise_distance(const std::vector<Cplx>& pts) {
    double d = std::numeric_limits<double>::infinity();
    for (size_t i = 0; i < pts.size(); ++i)
        for (size_t j = i + 1; j < pts.size(); ++j)
            d = std::min(d, std::abs(pts[i] - pts[j]));
    return d;
}

} // namespace

Constellation::Constellation(std::string name, std::vector<Cplx> pts,
                             std::vector<unsigned> labels, int bits,
                             double lo, double hi)
    : name_(std::move(name)), points_(std::move(pts)), labels_(std::move(labels)),
      bits_per_symbol_(bits), d_min_(min_pairwise_distance(points_)),
      hull_lo_(lo), hull_hi_(hi) {}

Constellation Constellation::qam4() {
    const double s = 1.0 / std::numbers::sqrt2;
    // Gray labels: bit0 = sign of Re, bit1 = sign of Im.
    return Constellation("qam4",
                         {{s, s}, {s, -s}, {-s, s}, {-s, -s}},
                         {0b00, 0b01, 0b10, 0b11}, 2, -s, s);
}

Constellation Constellation::psk4() {
    return Constellation("psk4",
                         {{1.0, 0.0}, {0.0, 1.0}, {-1.0, 0.0}, {0.0, -1.0}},
                         {0b00, 0b01, 0b11, 0b10}, 2, -1.0, 1.0);
}

Constellation Constellation::from_name(std::string_view name) {
    if (name == "qam4") return qam4();
    if (name == "psk4") return psk4();
    throw std::invalid_argument("unknown constellation: " + std::string(name));
}

int Constellation::nearest(Cplx v) const {
    int best = 0;
    double best_d = std::norm(v - points_[0]);
    for (size_t i = 1; i < points_.size(); ++i) {
        const double d = std::norm(v - points_[i]);
        if (d < best_d) {
            best_d = d;
            best = static_cast<int>(i);
        }
    }
    return best;
}

MatC gen_comm_channel(const SystemConfig& cfg, double corr, Rng& rng) {
    cfg.validate();
    if (corr < 0.0 || corr >= 1.0)
        throw std::invalid_argument("corr must lie in [0,1)");
    MatC h(cfg.mr, cfg.k_users);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            h(i, j) = cgauss(rng);
    if (corr == 0.0) return h;

    MatR r(cfg.mr, cfg.mr);
    for (int i = 0; i < cfg.mr; ++i)
        for (int j = 0; j < cfg.mr; ++j)
            r(i, j) = std::pow(corr, std::abs(i - j));
    Eigen::SelfAdjointEigenSolver<MatR> es(r);
    MatR sqrt_r = es.eigenvectors() *
                  es.eigenvalues().cwiseMax(0.0).cwiseSqrt().asDiagonal() *
                  es.eigenvectors().transpose();
    return sqrt_r * h;
}

MatC gen_radar_waveform(const SystemConfig& cfg) {
    cfg.validate();
    const int mt = cfg.mt, L = cfg.snapshots;
    MatC x_r(mt, L);
    if (mt == 0) return x_r;
    // First mt rows of the unitary DFT, so rows are orthonormal before scaling.
    const double scale = std::sqrt(cfg.p_r * L / mt) / std::sqrt(static_cast<double>(L));
    const double w = -2.0 * std::numbers::pi / L;
    for (int m = 0; m < mt; ++m)
        for (int l = 0; l < L; ++l)
            x_r(m, l) = scale * std::polar(1.0, w * m * l);
    return x_r;
}

MatC gen_target_response(const SystemConfig& cfg, double target_power, Rng& rng) {
    cfg.validate();
    if (target_power < 0.0)
        throw std::invalid_argument("target_power must be >= 0");
    if (target_power == 0.0) return MatC::Zero(cfg.mr, cfg.mt);
    if (cfg.p_r <= 0.0)
        throw std::invalid_argument("target_power > 0 requires p_r > 0");
    const double v = target_power / (cfg.mr * cfg.p_r);
    MatC h(cfg.mr, cfg.mt);
    for (Eigen::Index j = 0; j < h.cols(); ++j)
        for (Eigen::Index i = 0; i < h.rows(); ++i)
            h(i, j) = cgauss(rng, v);
    return h;
}

MatC gen_symbols(const SystemConfig& cfg, const Constellation& cons, Rng& rng) {
    cfg.validate();
    const double scale = std::sqrt(cfg.p_c);
    std::uniform_int_distribution<int> pick(0, static_cast<int>(cons.points().size()) - 1);
    MatC x(cfg.k_users, cfg.snapshots);
    for (Eigen::Index j = 0; j < x.cols(); ++j)
        for (Eigen::Index i = 0; i < x.rows(); ++i)
            x(i, j) = scale * cons.points()[static_cast<size_t>(pick(rng))];
    return x;
}

Frame synthesize_frame(const SystemConfig& cfg, const Constellation& cons,
                       double corr, double target_power, Rng& rng) {
    Frame f;
    f.cfg = cfg;
    f.h_c = gen_comm_channel(cfg, corr, rng);
    f.x_r = gen_radar_waveform(cfg);
    f.h_r = gen_target_response(cfg, target_power, rng);
    f.x_c = gen_symbols(cfg, cons, rng);
    f.noise = MatC(cfg.mr, cfg.snapshots);
    for (Eigen::Index j = 0; j < f.noise.cols(); ++j)
        for (Eigen::Index i = 0; i < f.noise.rows(); ++i)
            f.noise(i, j) = cgauss(rng, cfg.sigma2);
    f.y = f.h_c * f.x_c + f.h_r * f.x_r + f.noise;
    return f;
}

RealProblem to_real_problem(const VecC& y_fp,
                            std::function<VecC(const VecC&)> g_fp_apply,
                            int snapshots, int k_users, int mr) {
    if (y_fp.size() != static_cast<Eigen::Index>(snapshots) * mr)
        throw std::invalid_argument("y_fp length does not match snapshots*mr");
    RealProblem p;
    p.y_bar = to_real(y_fp);
    p.snapshots = snapshots;
    p.k_users = k_users;
    p.mr = mr;
    const Eigen::Index n = static_cast<Eigen::Index>(snapshots) * k_users;
    p.g_bar_apply = [op = std::move(g_fp_apply), n](const VecR& x_bar) {
        if (x_bar.size() != 2 * n)
            throw std::invalid_argument("x_bar length does not match 2*L*K");
        return to_real(op(to_complex(x_bar)));
    };
    return p;
}

MatC quantize_to_alphabet(const VecR& x_soft, const Constellation& cons,
                          double sym_scale, int k_users, int snapshots) {
    const Eigen::Index n = static_cast<Eigen::Index>(k_users) * snapshots;
    if (x_soft.size() != 2 * n)
        throw std::invalid_argument("x_soft length does not match 2*L*K");
    MatC out(k_users, snapshots);
    for (Eigen::Index j = 0; j < n; ++j) {
        const Cplx soft(x_soft[j], x_soft[j + n]);
        const int idx = cons.nearest(soft / sym_scale);
        out(j % k_users, j / k_users) = sym_scale * cons.points()[static_cast<size_t>(idx)];
    }
    return out;
}

} // namespace isac
