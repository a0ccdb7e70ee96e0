// wmlab: run the Whittle-Matern misspecification experiments from JSON configs.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>

#include "wmlab/experiments.hpp"

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitNumerical = 3;

std::string g_out_dir;

// Best effort: leave the failure next to the artifacts it interrupted.
void dump_error(const std::string& kind, const std::string& what, double condition = 0.0) {
    if (g_out_dir.empty()) return;
    std::ofstream os(std::filesystem::path(g_out_dir) / "error.json");
    wmlab::json j{{"kind", kind}, {"message", what}};
    if (condition != 0.0) j["condition_estimate"] = condition;
    os << j.dump(2) << "\n";
}

int run_subcommand(const std::string& sub, const std::string& config_path, const wmlab::CliOverrides& over) {
    using wmlab::json;
    json j;
    {
        std::ifstream is(config_path);
        if (!is) throw wmlab::ConfigError("cannot open config file " + config_path);
        try {
            j = json::parse(is);
        } catch (const json::parse_error& e) {
            throw wmlab::ConfigError(config_path + ": " + e.what());
        }
    }
    if (!j.is_object()) throw wmlab::ConfigError(config_path + ": expected a JSON object");
    if (!j.contains("experiment")) j["experiment"] = sub;
    if (j["experiment"] != sub)
        throw wmlab::ConfigError(config_path + ": experiment '" + j["experiment"].dump() + "' does not match subcommand " + sub);
    const auto cfg = wmlab::parse_config(j, over);
    g_out_dir = cfg.out;
    const auto result = wmlab::run_experiment(cfg);
    std::cout << wmlab::json{{"out", cfg.out}, {"artifacts", result.artifacts}, {"summary", result.summary}}.dump(2)
              << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Whittle-Matern fields on (0,1): kriging under misspecification and equivalence diagnostics"};
    app.require_subcommand(1);
    std::string config_path;
    wmlab::CliOverrides over;
    int N = 0, threads = 0;
    std::uint64_t seed = 0;
    std::string out;
    for (auto name : wmlab::kExperimentNames) {
        auto* sub = app.add_subcommand(std::string(name), "run the " + std::string(name) + " experiment");
        sub->add_option("--config", config_path, "JSON config file")->required();
        sub->add_option("--N", N, "number of basis functions");
        sub->add_option("--seed", seed, "random seed");
        sub->add_option("--out", out, "output directory");
        sub->add_option("--threads", threads, "worker threads");
    }
    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? 0 : kExitConfig;
    }
    auto* sub = app.get_subcommands().front();
    if (sub->count("--N")) over.N = N;
    if (sub->count("--seed")) over.seed = seed;
    if (sub->count("--out")) over.out = out;
    if (sub->count("--threads")) over.threads = threads;

    try {
        return run_subcommand(sub->get_name(), config_path, over);
    } catch (const wmlab::ConditioningError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        dump_error("conditioning", e.what(), e.condition);
        return kExitNumerical;
    } catch (const wmlab::NumericalError& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        dump_error("numerical", e.what());
        return kExitNumerical;
    } catch (const std::invalid_argument& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::domain_error& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& e) {
        std::cerr << "numerical error: " << e.what() << "\n";
        dump_error("runtime", e.what());
        return kExitNumerical;
    }
}
