// Command-line front end for the uplink ISAC receiver simulator.

#include <cstdint>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "isac/harness.hpp"

namespace {

struct CommonOpts {
    std::string config;
    std::string out = "results.csv";
    std::string format = "csv";
    std::string profile = "desk";
    std::uint64_t seed = 0;
    bool seed_set = false;
    int workers = 0;
    bool no_timing = false;
};

void add_common(CLI::App* cmd, CommonOpts& o) {
    cmd->add_option("--config", o.config, "experiment config file")->required();
    cmd->add_option("--out", o.out, "output path");
    cmd->add_option("--format", o.format, "csv or json")
        ->check(CLI::IsMember({"csv", "json"}));
    cmd->add_option("--profile", o.profile, "desk (l_max=50,k_max=50) or paper (200,100)")
        ->check(CLI::IsMember({"desk", "paper"}));
    cmd->add_option("--seed", o.seed, "override base seed")
        ->each([&o](const std::string&) { o.seed_set = true; });
    cmd->add_option("--workers", o.workers, "worker thread count");
    cmd->add_flag("--no-timing", o.no_timing,
                  "zero runtime_s fields for byte-reproducible outputs");
}

isac::ExperimentSpec load(const CommonOpts& o) {
    // The profile supplies iteration-depth defaults; explicit config keys win.
    isac::ExperimentSpec defaults;
    if (o.profile == "paper") {
        defaults.detector.l_max = 200;
        defaults.detector.k_max = 100;
    }
    isac::ExperimentSpec spec = isac::ExperimentSpec::from_file(o.config, defaults);
    if (o.seed_set) spec.seed = o.seed;
    if (o.workers > 0) spec.workers = o.workers;
    if (o.no_timing) spec.timing = false;
    return spec;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"uplink ISAC receiver simulator"};
    app.require_subcommand(1);

    CommonOpts ber, nmse, sinr, pep, block, mlo;
    bool nmse_oracle = false;

    auto* c_ber = app.add_subcommand("ber-sweep", "BER vs SIR or communication SNR");
    add_common(c_ber, ber);
    auto* c_nmse = app.add_subcommand("nmse-sweep", "NMSE vs sensing SNR");
    add_common(c_nmse, nmse);
    c_nmse->add_flag("--oracle-symbols", nmse_oracle,
                     "skip detection, estimate with ground-truth symbols");
    auto* c_sinr = app.add_subcommand("sinr-check", "closed-form vs Monte Carlo SINR");
    add_common(c_sinr, sinr);
    auto* c_pep = app.add_subcommand("pep-check", "pairwise error probability check");
    add_common(c_pep, pep);
    auto* c_block = app.add_subcommand("block-sweep", "block structure vs sub-block count");
    add_common(c_block, block);
    auto* c_mlo = app.add_subcommand("ml-oracle", "detector vs exhaustive ML on tiny frames");
    add_common(c_mlo, mlo);

    CLI11_PARSE(app, argc, argv);

    try {
        if (c_ber->parsed()) {
            const auto spec = load(ber);
            const auto res = isac::run_ber_sweep(spec);
            isac::emit_results(res, spec, ber.format, ber.out);
            std::cout << "wrote " << ber.out << "\n";
        } else if (c_nmse->parsed()) {
            const auto spec = load(nmse);
            const auto res = isac::run_nmse_sweep(spec, nmse_oracle);
            isac::emit_results(res, spec, nmse.format, nmse.out);
            std::cout << "wrote " << nmse.out << "\n";
        } else if (c_sinr->parsed()) {
            const auto spec = load(sinr);
            const auto rows = isac::run_sinr_validation(spec);
            isac::emit_sinr_rows(rows, spec, sinr.format, sinr.out);
            for (const auto& r : rows)
                if (r.flagged)
                    std::cerr << "warning: rel_err " << r.rel_err << " at rho " << r.rho
                              << " exceeds 3%\n";
            std::cout << "wrote " << sinr.out << "\n";
        } else if (c_pep->parsed()) {
            const auto spec = load(pep);
            const auto rows =
                isac::run_pep_validation(spec, isac::make_dmin_pair(spec));
            isac::emit_pep_rows(rows, spec, pep.format, pep.out);
            std::cout << "wrote " << pep.out << "\n";
        } else if (c_block->parsed()) {
            auto spec = load(block);
            if (spec.grid.empty()) {
                spec.sweep_var = isac::SweepVar::n_subblocks;
                spec.grid = {static_cast<double>(spec.n_subblocks)};
            }
            const auto res = isac::run_block_sweep(spec);
            isac::emit_results(res, spec, block.format, block.out);
            std::cout << "wrote " << block.out << "\n";
        } else if (c_mlo->parsed()) {
            const auto spec = load(mlo);
            const auto rep = isac::run_ml_oracle_check(spec);
            std::cout << "frames: " << rep.n_frames << "\n"
                      << "agreement: " << rep.agreement << "\n"
                      << "mean objective gap: " << rep.mean_objective_gap << "\n"
                      << "min objective gap: " << rep.min_objective_gap << "\n";
        }
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
