#include "isac/harness.hpp"

#include <algorithm>
#include <atomic>
#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <json.hpp>

namespace isac {

namespace {

double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

std::vector<double> parse_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) out.push_back(std::stod(item));
    }
    return out;
}

ReceiverSpec parse_receiver(const std::string& name) {
    ReceiverSpec r;
    if (name == "sic") r.type = ReceiverType::sic;
    else if (name == "projection") r.type = ReceiverType::projection;
    else if (name == "fp") r.type = ReceiverType::fp;
    else if (name == "dfp") r.type = ReceiverType::dfp;
    else if (name == "pdfp") r.type = ReceiverType::pdfp;
    else if (name == "block") r.type = ReceiverType::block;
    else throw std::invalid_argument("unknown receiver: " + name);
    return r;
}

} // namespace

std::string ReceiverSpec::tag() const {
    switch (type) {
        case ReceiverType::sic: return "sic";
        case ReceiverType::projection: return "projection";
        case ReceiverType::fp: {
            char buf[32];
            std::snprintf(buf, sizeof buf, "fp%g", rho);
            return buf;
        }
        case ReceiverType::dfp: return "dfp";
        case ReceiverType::pdfp: return "pdfp";
        case ReceiverType::block: return "block";
    }
    return "?";
}

void ExperimentSpec::validate() const {
    base.validate();
    detector.validate();
    if (grid.empty()) throw std::invalid_argument("sweep_grid must be non-empty");
    if (n_frames < 1) throw std::invalid_argument("n_frames must be >= 1");
    if (receivers.empty()) throw std::invalid_argument("at least one receiver required");
    if (workers < 1) throw std::invalid_argument("workers must be >= 1");
    if (n_blocks < 1) throw std::invalid_argument("n_blocks must be >= 1");
    for (const auto& r : receivers) {
        if (r.type == ReceiverType::fp && (rho < 0.0 || rho > 1.0))
            throw std::invalid_argument("fp receiver needs rho in [0,1]");
        if (r.type == ReceiverType::pdfp) {
            if (r.epsilons.size() < 2)
                throw std::invalid_argument("pdfp needs at least two epsilon values");
            for (size_t i = 0; i < r.epsilons.size(); ++i) {
                if (r.epsilons[i] <= 0.0 || r.epsilons[i] >= 1.0)
                    throw std::invalid_argument("pdfp epsilons must lie in (0,1)");
                for (size_t j = i + 1; j < r.epsilons.size(); ++j)
                    if (r.epsilons[i] == r.epsilons[j])
                        throw std::invalid_argument("pdfp epsilons must be distinct");
            }
        }
    }
}

ExperimentSpec ExperimentSpec::from_string(const std::string& text) {
    return from_string(text, ExperimentSpec{});
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path) {
    return from_file(path, ExperimentSpec{});
}

ExperimentSpec ExperimentSpec::from_string(const std::string& text,
                                           const ExperimentSpec& defaults) {
    ExperimentSpec spec = defaults;
    if (spec.receivers.empty())
        spec.receivers = {ReceiverSpec{ReceiverType::dfp, 1.0, {}}};
    std::vector<double> epsilon_list{0.05, 0.5};

    std::stringstream ss(text);
    std::string line;
    while (std::getline(ss, line)) {
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        line = trim(line);
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("malformed config line: " + line);
        const std::string key = trim(line.substr(0, eq));
        const std::string val = trim(line.substr(eq + 1));
        if (val.empty()) throw std::invalid_argument("empty value for key: " + key);

        if (key == "mt") spec.base.mt = std::stoi(val);
        else if (key == "mr") spec.base.mr = std::stoi(val);
        else if (key == "k_users") spec.base.k_users = std::stoi(val);
        else if (key == "snapshots") spec.base.snapshots = std::stoi(val);
        else if (key == "p_c_w") spec.base.p_c = std::stod(val);
        else if (key == "p_r_w") spec.base.p_r = std::stod(val);
        else if (key == "sigma2_dbw") spec.base.sigma2 = db_to_lin(std::stod(val));
        else if (key == "constellation") spec.constellation = val;
        else if (key == "corr") spec.corr = std::stod(val);
        else if (key == "target_power") spec.target_power = std::stod(val);
        else if (key == "seed") spec.seed = std::stoull(val);
        else if (key == "receiver") {
            spec.receivers.clear();
            std::stringstream rs(val);
            std::string item;
            while (std::getline(rs, item, ','))
                spec.receivers.push_back(parse_receiver(trim(item)));
        } else if (key == "rho") spec.rho = std::stod(val);
        else if (key == "epsilon_list") epsilon_list = parse_list(val);
        else if (key == "mu0") spec.detector.mu0 = std::stod(val);
        else if (key == "mu_growth") spec.detector.mu_growth = std::stod(val);
        else if (key == "l_max") spec.detector.l_max = std::stoi(val);
        else if (key == "k_max") spec.detector.k_max = std::stoi(val);
        else if (key == "sweep_var") {
            if (val == "sir_db") spec.sweep_var = SweepVar::sir_db;
            else if (val == "snr_c_db") spec.sweep_var = SweepVar::snr_c_db;
            else if (val == "snr_s_db") spec.sweep_var = SweepVar::snr_s_db;
            else if (val == "n_subblocks") spec.sweep_var = SweepVar::n_subblocks;
            else if (val == "rho") spec.sweep_var = SweepVar::rho;
            else throw std::invalid_argument("unknown sweep_var: " + val);
        } else if (key == "sweep_grid") spec.grid = parse_list(val);
        else if (key == "n_frames") spec.n_frames = std::stoi(val);
        else if (key == "sub_len") spec.sub_len = std::stoi(val);
        else if (key == "n_subblocks") spec.n_subblocks = std::stoi(val);
        else if (key == "n_blocks") spec.n_blocks = std::stoi(val);
        else if (key == "sweep_power_mode") {
            if (val == "received") spec.power_mode = PowerMode::received;
            else if (val == "transmit") spec.power_mode = PowerMode::transmit;
            else throw std::invalid_argument("unknown sweep_power_mode: " + val);
        } else if (key == "alpha_rule") {
            if (val == "accel") spec.detector.alpha_rule = AlphaRule::accelerated;
            else if (val == "none") spec.detector.alpha_rule = AlphaRule::none;
            else throw std::invalid_argument("unknown alpha_rule: " + val);
        } else if (key == "beta_rule") {
            if (val == "spectral") spec.detector.beta_rule = BetaRule::spectral;
            else if (val == "lipschitz") spec.detector.beta_rule = BetaRule::lipschitz;
            else throw std::invalid_argument("unknown beta_rule: " + val);
        } else if (key == "workers") spec.workers = std::stoi(val);
        else if (key == "timing") spec.timing = std::stoi(val) != 0;
        else throw std::invalid_argument("unknown config key: " + key);
    }

    if (!epsilon_list.empty()) spec.detector.epsilon = epsilon_list[0];
    for (auto& r : spec.receivers) {
        if (r.type == ReceiverType::pdfp) r.epsilons = epsilon_list;
        if (r.type == ReceiverType::fp) r.rho = spec.rho;
    }
    return spec;
}

ExperimentSpec ExperimentSpec::from_file(const std::string& path,
                                         const ExperimentSpec& defaults) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return from_string(ss.str(), defaults);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

} // namespace

std::uint64_t derive_seed(std::uint64_t base, std::uint64_t grid_idx,
                          std::uint64_t frame_idx) {
    std::uint64_t s = splitmix64(base + 0x9e3779b97f4a7c15ULL * (grid_idx + 1));
    return splitmix64(s + 0xbf58476d1ce4e5b9ULL * (frame_idx + 1));
}

WilsonInterval wilson_ci(long successes, long n, double z) {
    WilsonInterval w;
    if (n <= 0) return w;
    const double p = static_cast<double>(successes) / static_cast<double>(n);
    const double z2n = z * z / static_cast<double>(n);
    const double denom = 1.0 + z2n;
    const double center = (p + 0.5 * z2n) / denom;
    w.half = z * std::sqrt(p * (1.0 - p) / static_cast<double>(n) + 0.25 * z2n / static_cast<double>(n)) / denom;
    w.lo = std::max(0.0, center - w.half);
    w.hi = std::min(1.0, center + w.half);
    return w;
}

namespace {

struct GridScenario {
    SystemConfig cfg;
    double target_power;
    double rho_fp;
};

GridScenario scenario_at(const ExperimentSpec& spec, double v) {
    GridScenario s{spec.base, spec.target_power, spec.rho};
    switch (spec.sweep_var) {
        case SweepVar::sir_db: {
            const double pr = spec.base.p_c / db_to_lin(v);
            if (spec.power_mode == PowerMode::transmit) {
                // unit-variance target entries: P_s = M_r * P_r
                s.cfg.p_r = pr;
                s.target_power = pr * spec.base.mr;
            } else {
                s.target_power = pr;
            }
            break;
        }
        case SweepVar::snr_c_db:
            s.cfg.sigma2 = spec.base.p_c / db_to_lin(v);
            break;
        case SweepVar::snr_s_db: {
            const double pr = spec.base.sigma2 * db_to_lin(v);
            if (spec.power_mode == PowerMode::transmit) {
                s.cfg.p_r = pr;
                s.target_power = pr * spec.base.mr;
            } else {
                s.target_power = pr;
            }
            break;
        }
        case SweepVar::rho:
            s.rho_fp = v;
            break;
        case SweepVar::n_subblocks:
            break; // consumed by run_block_sweep
    }
    return s;
}

void parallel_frames(int n_frames, int workers, const std::function<void(int)>& fn) {
    if (workers <= 1) {
        for (int f = 0; f < n_frames; ++f) fn(f);
        return;
    }
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<size_t>(workers));
    for (int w = 0; w < workers; ++w)
        pool.emplace_back([&] {
            for (;;) {
                const int f = next.fetch_add(1);
                if (f >= n_frames) break;
                fn(f);
            }
        });
    for (auto& t : pool) t.join();
}

struct FrameStats {
    long bits = 0;
    long errors = 0;
    double nmse = 0.0;
    double seconds = 0.0;
    bool ok = false;
    bool failed = false;
};

void count_bit_errors(const MatC& x_true, const MatC& x_hat, const Constellation& cons,
                      double scale, long& errors, long& bits) {
    for (Eigen::Index j = 0; j < x_true.cols(); ++j)
        for (Eigen::Index i = 0; i < x_true.rows(); ++i) {
            const int it = cons.nearest(x_true(i, j) / scale);
            const int ih = cons.nearest(x_hat(i, j) / scale);
            errors += std::popcount(cons.bits_of(it) ^ cons.bits_of(ih));
            bits += cons.bits_per_symbol();
        }
}

double frame_nmse(const MatC& h_hat, const MatC& h_true) {
    const double ref = h_true.squaredNorm();
    if (ref == 0.0) return h_hat.squaredNorm();
    return (h_hat - h_true).squaredNorm() / ref;
}

ReceiverOutput dispatch(const ReceiverSpec& r, const Frame& frame, const Constellation& cons,
                        const ExperimentSpec& spec, double rho_fp, bool oracle_symbols) {
    if (oracle_symbols) return oracle_symbol_receive(frame);
    switch (r.type) {
        case ReceiverType::sic: return sic_receive(frame, cons, spec.detector);
        case ReceiverType::projection: return projection_receive(frame, cons, spec.detector);
        case ReceiverType::fp: return fp_receive(frame, cons, rho_fp, spec.detector);
        case ReceiverType::dfp: return dfp_receive(frame, cons, spec.detector);
        case ReceiverType::pdfp: {
            std::vector<HomotopyConfig> branches;
            branches.reserve(r.epsilons.size());
            for (double e : r.epsilons) {
                HomotopyConfig c = spec.detector;
                c.epsilon = e;
                branches.push_back(c);
            }
            return pdfp_receive(frame, cons, branches);
        }
        case ReceiverType::block:
            throw std::invalid_argument("block receiver is driven by run_block_sweep");
    }
    throw std::logic_error("unreachable receiver type");
}

MetricRecord reduce_stats(double grid_value, const std::vector<FrameStats>& stats,
                          bool timing) {
    MetricRecord rec;
    rec.grid_value = grid_value;
    long errors = 0;
    double nmse_sum = 0.0, nmse_sq = 0.0, seconds = 0.0;
    long n_ok = 0;
    for (const auto& s : stats) {
        if (s.failed) {
            ++rec.n_failures;
            continue;
        }
        if (!s.ok) continue;
        errors += s.errors;
        rec.n_bits += s.bits;
        nmse_sum += s.nmse;
        nmse_sq += s.nmse * s.nmse;
        seconds += s.seconds;
        ++n_ok;
    }
    if (rec.n_bits > 0) {
        rec.ber = static_cast<double>(errors) / static_cast<double>(rec.n_bits);
        rec.ber_ci95 = wilson_ci(errors, rec.n_bits).half;
    }
    if (n_ok > 0) {
        rec.nmse = nmse_sum / static_cast<double>(n_ok);
        if (n_ok > 1) {
            const double var =
                std::max(0.0, (nmse_sq - nmse_sum * nmse_sum / static_cast<double>(n_ok)) /
                                  static_cast<double>(n_ok - 1));
            rec.nmse_ci95 = 1.959963984540054 * std::sqrt(var / static_cast<double>(n_ok));
        }
    }
    rec.runtime_s = timing ? seconds : 0.0;
    return rec;
}

SweepResult run_metric_sweep(const ExperimentSpec& spec, bool oracle_symbols) {
    spec.validate();
    const Constellation cons = Constellation::from_name(spec.constellation);
    const double scale = std::sqrt(spec.base.p_c);

    SweepResult result;
    for (const auto& r : spec.receivers) result.push_back({r.tag(), {}});

    for (size_t g = 0; g < spec.grid.size(); ++g) {
        const GridScenario sc = scenario_at(spec, spec.grid[g]);
        std::vector<std::vector<FrameStats>> stats(
            spec.receivers.size(), std::vector<FrameStats>(static_cast<size_t>(spec.n_frames)));

        parallel_frames(spec.n_frames, spec.workers, [&](int f) {
            Rng rng(derive_seed(spec.seed, g, static_cast<std::uint64_t>(f)));
            const Frame frame =
                synthesize_frame(sc.cfg, cons, spec.corr, sc.target_power, rng);
            for (size_t r = 0; r < spec.receivers.size(); ++r) {
                FrameStats& st = stats[r][static_cast<size_t>(f)];
                const auto t0 = std::chrono::steady_clock::now();
                try {
                    const ReceiverOutput out =
                        dispatch(spec.receivers[r], frame, cons, spec, sc.rho_fp,
                                 oracle_symbols);
                    count_bit_errors(frame.x_c, out.x_hat, cons, scale, st.errors, st.bits);
                    st.nmse = frame_nmse(out.h_hat, frame.h_r);
                    st.ok = true;
                } catch (const std::exception&) {
                    st.failed = true;
                }
                st.seconds = std::chrono::duration<double>(
                                 std::chrono::steady_clock::now() - t0)
                                 .count();
            }
        });

        for (size_t r = 0; r < spec.receivers.size(); ++r)
            result[r].records.push_back(
                reduce_stats(spec.grid[g], stats[r], spec.timing));
    }
    return result;
}

} // namespace

SweepResult run_ber_sweep(const ExperimentSpec& spec) {
    if (spec.sweep_var != SweepVar::sir_db && spec.sweep_var != SweepVar::snr_c_db)
        throw std::invalid_argument("run_ber_sweep expects sweep_var sir_db or snr_c_db");
    return run_metric_sweep(spec, false);
}

SweepResult run_nmse_sweep(const ExperimentSpec& spec, bool oracle_symbols) {
    if (spec.sweep_var != SweepVar::snr_s_db)
        throw std::invalid_argument("run_nmse_sweep expects sweep_var snr_s_db");
    return run_metric_sweep(spec, oracle_symbols);
}

std::vector<SinrRow> run_sinr_validation(const ExperimentSpec& spec) {
    if (spec.sweep_var != SweepVar::rho)
        throw std::invalid_argument("run_sinr_validation expects sweep_var rho");
    spec.validate();
    const Constellation cons = Constellation::from_name(spec.constellation);
    std::vector<SinrRow> rows;
    for (size_t g = 0; g < spec.grid.size(); ++g) {
        SinrRow row;
        row.rho = spec.grid[g];
        AnalysisPoint pt;
        pt.rho = row.rho;
        pt.p_c = spec.base.p_c;
        pt.p_s = spec.target_power;
        pt.sigma2 = spec.base.sigma2;
        pt.d_min = cons.d_min() * std::sqrt(spec.base.p_c);
        pt.snapshots = spec.base.snapshots;
        pt.mt = spec.base.mt;
        pt.mr = spec.base.mr;
        pt.k_users = spec.base.k_users;
        row.analytic = sinr_fp(pt);
        Rng rng(derive_seed(spec.seed, g, 0));
        row.empirical = empirical_sinr(spec.base, cons, row.rho, spec.target_power,
                                       spec.n_frames, rng);
        row.rel_err = std::abs(row.empirical - row.analytic) / row.analytic;
        row.flagged = spec.n_frames >= 100 && row.rel_err > 0.03;
        rows.push_back(row);
    }
    return rows;
}

PepPair make_dmin_pair(const ExperimentSpec& spec) {
    const Constellation cons = Constellation::from_name(spec.constellation);
    const double scale = std::sqrt(spec.base.p_c);
    PepPair pair;
    pair.x_a = MatC::Constant(spec.base.k_users, spec.base.snapshots,
                              scale * cons.points()[0]);
    int jn = 1;
    double best = std::numeric_limits<double>::infinity();
    for (size_t j = 1; j < cons.points().size(); ++j) {
        const double d = std::abs(cons.points()[j] - cons.points()[0]);
        if (d < best) {
            best = d;
            jn = static_cast<int>(j);
        }
    }
    pair.x_b = pair.x_a;
    pair.x_b(0, 0) = scale * cons.points()[static_cast<size_t>(jn)];
    return pair;
}

std::vector<PepRow> run_pep_validation(const ExperimentSpec& spec, const PepPair& pair,
                                       int channel_redraw) {
    if (spec.sweep_var != SweepVar::rho)
        throw std::invalid_argument("run_pep_validation expects sweep_var rho");
    spec.validate();
    if (channel_redraw < 1) throw std::invalid_argument("channel_redraw must be >= 1");

    if (pair.x_a.rows() != pair.x_b.rows() || pair.x_a.cols() != pair.x_b.cols())
        throw std::invalid_argument("hypothesis pair has mismatched shapes");
    const MatC delta = pair.x_a - pair.x_b;
    int n_diff = 0;
    for (Eigen::Index j = 0; j < delta.cols(); ++j)
        for (Eigen::Index i = 0; i < delta.rows(); ++i)
            if (std::abs(delta(i, j)) > 0.0) ++n_diff;
    if (n_diff != 1)
        throw std::invalid_argument("hypothesis pair must differ in exactly one entry");

    const MatC x_r = gen_radar_waveform(spec.base);
    const ProjectorPair pp = build_projectors(x_r);
    const bool noise_only = spec.target_power == 0.0;

    std::vector<PepRow> rows;
    for (size_t g = 0; g < spec.grid.size(); ++g) {
        const FlexProjector fp = FlexProjector::make(pp, spec.grid[g]);
        const MatC p_t = fp.p_fp.transpose();
        PepRow row;
        row.rho = spec.grid[g];
        long errors = 0;
        double predicted_sum = 0.0;
        long n_channels = 0;

        Rng rng(derive_seed(spec.seed, g, 0));
        MatC h_c, a_p, b_p;
        for (int t = 0; t < spec.n_frames; ++t) {
            if (t % channel_redraw == 0) {
                h_c = gen_comm_channel(spec.base, spec.corr, rng);
                a_p = (h_c * pair.x_a) * p_t;
                b_p = (h_c * pair.x_b) * p_t;
                if (noise_only)
                    predicted_sum +=
                        pep_exact_binary(fp, h_c, delta, spec.base.sigma2);
                ++n_channels;
            }
            MatC w(spec.base.mr, spec.base.snapshots);
            for (Eigen::Index j = 0; j < w.cols(); ++j)
                for (Eigen::Index i = 0; i < w.rows(); ++i)
                    w(i, j) = cgauss(rng, spec.base.sigma2);
            if (!noise_only) {
                const MatC h_r =
                    gen_target_response(spec.base, spec.target_power, rng);
                w += h_r * x_r;
            }
            const MatC wp = w * p_t;
            const double da = wp.squaredNorm();
            const double db = (wp + a_p - b_p).squaredNorm();
            if (db <= da) ++errors;
        }
        row.n_trials = spec.n_frames;
        row.empirical = static_cast<double>(errors) / static_cast<double>(spec.n_frames);
        row.predicted = noise_only
                            ? predicted_sum / static_cast<double>(n_channels)
                            : std::numeric_limits<double>::quiet_NaN();
        row.std_err = std::sqrt(std::max(row.empirical * (1.0 - row.empirical),
                                         1.0 / static_cast<double>(spec.n_frames)) /
                                static_cast<double>(spec.n_frames));
        rows.push_back(row);
    }
    return rows;
}

SweepResult run_block_sweep(const ExperimentSpec& spec) {
    if (spec.sweep_var != SweepVar::n_subblocks)
        throw std::invalid_argument("run_block_sweep expects sweep_var n_subblocks");
    spec.validate();
    if (spec.sub_len <= spec.base.mt)
        throw std::invalid_argument("sub_len must exceed mt");
    const Constellation cons = Constellation::from_name(spec.constellation);
    const double scale = std::sqrt(spec.base.p_c);

    SystemConfig sub_cfg = spec.base;
    sub_cfg.snapshots = spec.sub_len;

    SweepResult result{{"block", {}}};
    for (size_t g = 0; g < spec.grid.size(); ++g) {
        const int j_sub = static_cast<int>(std::lround(spec.grid[g]));
        if (j_sub < 1) throw std::invalid_argument("n_subblocks grid values must be >= 1");
        std::vector<FrameStats> stats(static_cast<size_t>(spec.n_frames));

        parallel_frames(spec.n_frames, spec.workers, [&](int f) {
            FrameStats& st = stats[static_cast<size_t>(f)];
            const auto t0 = std::chrono::steady_clock::now();
            try {
                Rng rng(derive_seed(spec.seed, g, static_cast<std::uint64_t>(f)));
                const MatC h_c = gen_comm_channel(sub_cfg, spec.corr, rng);
                const MatC x_r = gen_radar_waveform(sub_cfg);
                const MatC h_r = gen_target_response(sub_cfg, spec.target_power, rng);
                const int total = spec.n_blocks * j_sub;
                std::vector<Frame> subframes;
                subframes.reserve(static_cast<size_t>(total));
                for (int s = 0; s < total; ++s) {
                    Frame fr;
                    fr.cfg = sub_cfg;
                    fr.h_c = h_c;
                    fr.x_r = x_r;
                    fr.h_r = h_r;
                    fr.x_c = gen_symbols(sub_cfg, cons, rng);
                    fr.noise = MatC(sub_cfg.mr, sub_cfg.snapshots);
                    for (Eigen::Index jj = 0; jj < fr.noise.cols(); ++jj)
                        for (Eigen::Index ii = 0; ii < fr.noise.rows(); ++ii)
                            fr.noise(ii, jj) = cgauss(rng, sub_cfg.sigma2);
                    fr.y = fr.h_c * fr.x_c + fr.h_r * fr.x_r + fr.noise;
                    subframes.push_back(std::move(fr));
                }
                BlockPolicy policy;
                policy.n_sub = j_sub;
                const BlockResult res = block_receive(subframes, cons, spec.detector, policy);
                // Metrics from the last block, the one aided by a prior.
                for (int s = total - j_sub; s < total; ++s)
                    count_bit_errors(subframes[static_cast<size_t>(s)].x_c,
                                     res.sub_outputs[static_cast<size_t>(s)].x_hat, cons,
                                     scale, st.errors, st.bits);
                st.nmse = frame_nmse(res.h_hat, h_r);
                st.ok = true;
            } catch (const std::exception&) {
                st.failed = true;
            }
            st.seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        });

        result[0].records.push_back(reduce_stats(spec.grid[g], stats, spec.timing));
    }
    return result;
}

MlOracleReport run_ml_oracle_check(const ExperimentSpec& spec) {
    spec.validate();
    const Constellation cons = Constellation::from_name(spec.constellation);
    const double scale = std::sqrt(spec.base.p_c);
    const ProjectorPair pp = build_projectors(gen_radar_waveform(spec.base));
    const FlexProjector fp_ref = FlexProjector::make(pp, spec.rho);

    MlOracleReport rep;
    rep.n_frames = spec.n_frames;
    rep.min_objective_gap = std::numeric_limits<double>::infinity();
    double gap_sum = 0.0;
    for (int f = 0; f < spec.n_frames; ++f) {
        Rng rng(derive_seed(spec.seed, 0, static_cast<std::uint64_t>(f)));
        const Frame frame =
            synthesize_frame(spec.base, cons, spec.corr, spec.target_power, rng);
        const VecC y_ref = apply_flex_to_received(fp_ref, frame.y);
        const MatC x_ml = ml_detect_exhaustive(fp_ref, frame.h_c, y_ref, cons, scale);
        const MatC x_dfp = dfp_detect(pp, frame.h_c, frame.y, cons, scale, spec.detector);

        bool agree = true;
        for (Eigen::Index j = 0; agree && j < x_ml.cols(); ++j)
            for (Eigen::Index i = 0; agree && i < x_ml.rows(); ++i)
                if (cons.nearest(x_ml(i, j) / scale) != cons.nearest(x_dfp(i, j) / scale))
                    agree = false;
        if (agree) ++rep.n_agree;

        const double gap = detection_objective(fp_ref, frame.h_c, y_ref, x_dfp) -
                           detection_objective(fp_ref, frame.h_c, y_ref, x_ml);
        gap_sum += gap;
        rep.min_objective_gap = std::min(rep.min_objective_gap, gap);
    }
    rep.agreement = static_cast<double>(rep.n_agree) / static_cast<double>(rep.n_frames);
    rep.mean_objective_gap = gap_sum / static_cast<double>(rep.n_frames);
    return rep;
}

namespace {

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.12g", v);
    return buf;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open output file: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::string with_tag(const std::string& path, const std::string& tag) {
    const auto dot = path.find_last_of('.');
    const auto slash = path.find_last_of('/');
    if (dot == std::string::npos || (slash != std::string::npos && dot < slash))
        return path + "_" + tag;
    return path.substr(0, dot) + "_" + tag + path.substr(dot);
}

nlohmann::json spec_to_json(const ExperimentSpec& spec) {
    nlohmann::json j;
    j["mt"] = spec.base.mt;
    j["mr"] = spec.base.mr;
    j["k_users"] = spec.base.k_users;
    j["snapshots"] = spec.base.snapshots;
    j["p_c_w"] = spec.base.p_c;
    j["p_r_w"] = spec.base.p_r;
    j["sigma2_w"] = spec.base.sigma2;
    j["constellation"] = spec.constellation;
    j["corr"] = spec.corr;
    j["target_power"] = spec.target_power;
    j["seed"] = spec.seed;
    std::vector<std::string> tags;
    for (const auto& r : spec.receivers) tags.push_back(r.tag());
    j["receivers"] = tags;
    j["sweep_var"] = static_cast<int>(spec.sweep_var);
    j["sweep_grid"] = spec.grid;
    j["n_frames"] = spec.n_frames;
    j["mu0"] = spec.detector.mu0;
    j["mu_growth"] = spec.detector.mu_growth;
    j["epsilon"] = spec.detector.epsilon;
    j["l_max"] = spec.detector.l_max;
    j["k_max"] = spec.detector.k_max;
    j["rho"] = spec.rho;
    j["sub_len"] = spec.sub_len;
    j["n_blocks"] = spec.n_blocks;
    j["workers"] = spec.workers;
    return j;
}

nlohmann::json record_to_json(const MetricRecord& r) {
    nlohmann::json j;
    j["grid_value"] = r.grid_value;
    j["ber"] = r.ber;
    j["ber_ci95"] = r.ber_ci95;
    j["nmse"] = r.nmse;
    j["nmse_ci95"] = r.nmse_ci95;
    j["n_bits"] = r.n_bits;
    j["runtime_s"] = r.runtime_s;
    j["n_failures"] = r.n_failures;
    return j;
}

} // namespace

std::string csv_of(const std::vector<MetricRecord>& records) {
    std::string out = "grid_value,ber,ber_ci95,nmse,nmse_ci95,n_bits,runtime_s\n";
    for (const auto& r : records) {
        out += fmt(r.grid_value) + "," + fmt(r.ber) + "," + fmt(r.ber_ci95) + "," +
               fmt(r.nmse) + "," + fmt(r.nmse_ci95) + "," + std::to_string(r.n_bits) +
               "," + fmt(r.runtime_s) + "\n";
    }
    return out;
}

void emit_results(const SweepResult& result, const ExperimentSpec& spec,
                  const std::string& format, const std::string& path) {
    if (result.empty() || result[0].records.empty())
        throw std::invalid_argument("emit_results: no records");
    if (format == "csv") {
        if (result.size() == 1) {
            write_file(path, csv_of(result[0].records));
        } else {
            for (const auto& curve : result)
                write_file(with_tag(path, curve.tag), csv_of(curve.records));
        }
    } else if (format == "json") {
        nlohmann::json j;
        j["spec"] = spec_to_json(spec);
        for (const auto& curve : result) {
            nlohmann::json recs = nlohmann::json::array();
            for (const auto& r : curve.records) recs.push_back(record_to_json(r));
            j["results"][curve.tag] = recs;
        }
        write_file(path, j.dump(2) + "\n");
    } else {
        throw std::invalid_argument("unknown format: " + format);
    }
}

void emit_sinr_rows(const std::vector<SinrRow>& rows, const ExperimentSpec& spec,
                    const std::string& format, const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("emit_sinr_rows: no rows");
    if (format == "csv") {
        std::string out = "rho,analytic,empirical,rel_err,flagged\n";
        for (const auto& r : rows)
            out += fmt(r.rho) + "," + fmt(r.analytic) + "," + fmt(r.empirical) + "," +
                   fmt(r.rel_err) + "," + (r.flagged ? "1" : "0") + "\n";
        write_file(path, out);
    } else if (format == "json") {
        nlohmann::json j;
        j["spec"] = spec_to_json(spec);
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows)
            arr.push_back({{"rho", r.rho},
                           {"analytic", r.analytic},
                           {"empirical", r.empirical},
                           {"rel_err", r.rel_err},
                           {"flagged", r.flagged}});
        j["rows"] = arr;
        write_file(path, j.dump(2) + "\n");
    } else {
        throw std::invalid_argument("unknown format: " + format);
    }
}

void emit_pep_rows(const std::vector<PepRow>& rows, const ExperimentSpec& spec,
                   const std::string& format, const std::string& path) {
    if (rows.empty()) throw std::invalid_argument("emit_pep_rows: no rows");
    if (format == "csv") {
        std::string out = "rho,empirical,predicted,std_err,n_trials\n";
        for (const auto& r : rows)
            out += fmt(r.rho) + "," + fmt(r.empirical) + "," + fmt(r.predicted) + "," +
                   fmt(r.std_err) + "," + std::to_string(r.n_trials) + "\n";
        write_file(path, out);
    } else if (format == "json") {
        nlohmann::json j;
        j["spec"] = spec_to_json(spec);
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& r : rows)
            arr.push_back({{"rho", r.rho},
                           {"empirical", r.empirical},
                           {"predicted", r.predicted},
                           {"std_err", r.std_err},
                           {"n_trials", r.n_trials}});
        j["rows"] = arr;
        write_file(path, j.dump(2) + "\n");
    } else {
        throw std::invalid_argument("unknown format: " + format);
    }
}

} // namespace isac
