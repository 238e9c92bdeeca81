// mmoment <scenario> --config PATH [--seed U64] [--out PATH] [--threads N]
//
// Exit codes: 0 success, 2 config error, 3 numeric/convergence error,
// 4 property violation (fuzz scenarios).

#include "mmoment/errors.hpp"
#include "mmoment/experiment.hpp"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

namespace {

void usage() {
    std::fprintf(stderr,
                 "usage: mmoment <deviation|tail|lewis|psi2|norms|fuzz> --config PATH\n"
                 "               [--seed U64] [--out PATH] [--threads N]\n"
                 "  --out -   streams CSV to standard output (default)\n");
}

} // namespace

int main(int argc, char** argv) {
    using namespace mmoment;
    if (argc < 2) {
        usage();
        return 2;
    }
    std::string scenario_arg = argv[1];
    std::string config_path, out_path = "-";
    std::optional<std::uint64_t> seed_override;
    std::optional<int> threads_override;
    for (int i = 2; i < argc; ++i) {
        const std::string a = argv[i];
        auto need_value = [&](const char* flag) -> std::string {
            if (i + 1 >= argc) {
                std::fprintf(stderr, "mmoment: %s requires a value\n", flag);
                std::exit(2);
            }
            return argv[++i];
        };
        if (a == "--config") config_path = need_value("--config");
        else if (a == "--seed") seed_override = std::stoull(need_value("--seed"));
        else if (a == "--out") out_path = need_value("--out");
        else if (a == "--threads") threads_override = std::stoi(need_value("--threads"));
        else {
            std::fprintf(stderr, "mmoment: unknown flag '%s'\n", a.c_str());
            usage();
            return 2;
        }
    }
    if (config_path.empty()) {
        std::fprintf(stderr, "mmoment: --config is required\n");
        return 2;
    }

    try {
        ExperimentConfig cfg = load_config_file(config_path);
        if (scenario_name(cfg.scenario) != scenario_arg)
            throw config_error("config scenario '" + scenario_name(cfg.scenario) +
                               "' does not match CLI scenario '" + scenario_arg + "'");
        if (seed_override) cfg.seed = *seed_override;
        if (threads_override) cfg.threads = *threads_override;
        validate_config(cfg);

        const std::vector<ResultRow> rows = run_scenario(cfg);
        const std::string csv = to_csv(rows);
        if (out_path == "-") {
            std::fwrite(csv.data(), 1, csv.size(), stdout);
        } else {
            std::ofstream out(out_path, std::ios::binary);
            if (!out) {
                std::fprintf(stderr, "mmoment: cannot open output file %s\n", out_path.c_str());
                return 2;
            }
            out << csv;
        }
        if (has_numeric_error_row(rows)) return 3;
        if (cfg.scenario == Scenario::fuzz && has_property_violation(rows)) return 4;
        return 0;
    } catch (const config_error& e) {
        std::fprintf(stderr, "mmoment: config error: %s\n", e.what());
        return 2;
    } catch (const numeric_error& e) {
        std::fprintf(stderr, "mmoment: numeric error: %s\n", e.what());
        return 3;
    } catch (const domain_error& e) {
        std::fprintf(stderr, "mmoment: %s\n", e.what());
        return 2;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mmoment: %s\n", e.what());
        return 3;
    }
}
