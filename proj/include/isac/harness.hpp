#ifndef ISAC_HARNESS_HPP
#define ISAC_HARNESS_HPP

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "isac/analysis.hpp"
#include "isac/receivers.hpp"

namespace isac {

enum class SweepVar { sir_db, snr_c_db, snr_s_db, n_subblocks, rho };
/// Interpretation of the swept sensing-power ratios: `received` drives the
/// received per-snapshot power P_s directly; `transmit` drives the waveform
/// power P_r with unit-variance target entries, so P_s = M_r * P_r.
enum class PowerMode { received, transmit };
enum class ReceiverType { sic, projection, fp, dfp, pdfp, block };

struct ReceiverSpec {
    ReceiverType type = ReceiverType::dfp;
    double rho = 1.0;              ///< fp only
    std::vector<double> epsilons;  ///< pdfp branches
    std::string tag() const;
};

/// One experiment: scenario, receivers, sweep definition and solver settings.
struct ExperimentSpec {
    SystemConfig base;
    std::string constellation = "qam4";
    double corr = 0.0;
    double target_power = 1.0;
    std::uint64_t seed = 1;
    std::vector<ReceiverSpec> receivers;
    SweepVar sweep_var = SweepVar::sir_db;
    std::vector<double> grid;
    int n_frames = 100;
    HomotopyConfig detector;
    PowerMode power_mode = PowerMode::received;
    int workers = 1;
    bool timing = true;
    int sub_len = 20;     ///< block sweep: snapshots per sub-block
    int n_blocks = 2;     ///< block sweep: chained blocks per trial
    int n_subblocks = 1;  ///< fixed J fallback when no grid is swept
    double rho = 1.0;     ///< fp tradeoff factor / ml-oracle reference rho

    void validate() const;
    /// Parses flat key = value text on top of `defaults`; explicit keys win.
    static ExperimentSpec from_file(const std::string& path);
    static ExperimentSpec from_file(const std::string& path,
                                    const ExperimentSpec& defaults);
    static ExperimentSpec from_string(const std::string& text);
    static ExperimentSpec from_string(const std::string& text,
                                      const ExperimentSpec& defaults);
};

struct MetricRecord {
    double grid_value = 0.0;
    double ber = 0.0;
    double ber_ci95 = 0.0;
    double nmse = 0.0;
    double nmse_ci95 = 0.0;
    long n_bits = 0;
    double runtime_s = 0.0;
    long n_failures = 0; ///< detector failures at this grid point (not in CSV)
};

struct ReceiverCurve {
    std::string tag;
    std::vector<MetricRecord> records;
};
using SweepResult = std::vector<ReceiverCurve>;

struct SinrRow {
    double rho = 0.0;
    double analytic = 0.0;
    double empirical = 0.0;
    double rel_err = 0.0;
    bool flagged = false; ///< rel_err > 3% with at least 100 trials
};

/// A binary hypothesis pair: two symbol matrices differing in one entry by
/// the scaled minimum distance.
struct PepPair {
    MatC x_a; ///< transmitted
    MatC x_b; ///< alternative
};

struct PepRow {
    double rho = 0.0;
    double empirical = 0.0;
    double predicted = 0.0; ///< exact Q expression; NaN when sensing is present
    double std_err = 0.0;
    long n_trials = 0;
};

struct MlOracleReport {
    long n_frames = 0;
    long n_agree = 0;
    double agreement = 0.0;
    double mean_objective_gap = 0.0; ///< obj(detector) - obj(ML), averaged
    double min_objective_gap = 0.0;
};

/// Order-independent 64-bit seed for (grid point, frame).
std::uint64_t derive_seed(std::uint64_t base, std::uint64_t grid_idx,
                          std::uint64_t frame_idx);

struct WilsonInterval {
    double lo = 0.0, hi = 0.0, half = 0.0;
};
WilsonInterval wilson_ci(long successes, long n, double z = 1.959963984540054);

/// BER sweep over sir_db or snr_c_db (Fig. 6 / Fig. 8 style).
SweepResult run_ber_sweep(const ExperimentSpec& spec);

/// NMSE sweep over snr_s_db (Fig. 7 style). Set oracle_symbols to bypass
/// detection with ground truth in the sensing stage.
SweepResult run_nmse_sweep(const ExperimentSpec& spec, bool oracle_symbols = false);

/// Closed-form vs Monte Carlo SINR over a rho grid.
std::vector<SinrRow> run_sinr_validation(const ExperimentSpec& spec);

/// Builds the canonical hypothesis pair: all symbols at point 0, and the
/// (0,0) entry replaced by its nearest neighbor.
PepPair make_dmin_pair(const ExperimentSpec& spec);

/// Binary-hypothesis Monte Carlo against the exact Q expression over a rho
/// grid. Channels are redrawn every `channel_redraw` trials.
std::vector<PepRow> run_pep_validation(const ExperimentSpec& spec, const PepPair& pair,
                                       int channel_redraw = 100);

/// Block-structure sweep over the number of sub-blocks J (Fig. 10 style).
/// BER and NMSE are measured on the last of spec.n_blocks chained blocks.
SweepResult run_block_sweep(const ExperimentSpec& spec);

/// DFP vs exhaustive ML on tiny frames; the reference detection problem is
/// the flexible projection at spec.rho.
MlOracleReport run_ml_oracle_check(const ExperimentSpec& spec);

/// Fixed-column CSV (grid_value, ber, ber_ci95, nmse, nmse_ci95, n_bits,
/// runtime_s). Multiple receivers append their tag to the file stem.
void emit_results(const SweepResult& result, const ExperimentSpec& spec,
                  const std::string& format, const std::string& path);
void emit_sinr_rows(const std::vector<SinrRow>& rows, const ExperimentSpec& spec,
                    const std::string& format, const std::string& path);
void emit_pep_rows(const std::vector<PepRow>& rows, const ExperimentSpec& spec,
                   const std::string& format, const std::string& path);

std::string csv_of(const std::vector<MetricRecord>& records);

} // namespace isac

#endif
