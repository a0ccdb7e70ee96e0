#pragma once

// Experiment runner behind the wmlab CLI: config schema, the simulation
// studies, and the CSV / SVG / JSON artifacts they write.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "wmlab/diagnostics.hpp"
#include "wmlab/kriging.hpp"
#include "wmlab/matern_check.hpp"
#include "wmlab/matrix_io.hpp"
#include "wmlab/model_config.hpp"
#include "wmlab/spectral.hpp"
#include "wmlab/version.hpp"

namespace wmlab {

using nlohmann::json;

enum class Experiment { fig1_integral, fig1_point, fig2, matern_check, diagnose, verdict, sample };

inline constexpr std::array<std::string_view, 7> kExperimentNames{"fig1_integral", "fig1_point", "fig2", "matern_check",
                                                                  "diagnose",      "verdict",    "sample"};

inline std::string_view to_string(Experiment e) { return kExperimentNames[static_cast<std::size_t>(e)]; }

inline std::optional<Experiment> experiment_from_string(std::string_view s) {
    for (std::size_t i = 0; i < kExperimentNames.size(); ++i)
        if (kExperimentNames[i] == s) return static_cast<Experiment>(i);
    return std::nullopt;
}

struct ExperimentConfig {
    Experiment experiment = Experiment::fig1_integral;
    int N = 1000;
    std::uint64_t seed = 1;
    std::string out = "results";
    int threads = 1;
    bool plot = true;

    // efficiency curves
    std::vector<int> n_values;
    std::vector<double> deltas;
    std::vector<int> betas;
    std::vector<std::string> models;
    bool per_target = false;
    ObservationDesign point{DesignKind::point, 0.5, 0.01, true, 0.1};

    // matern_check
    std::vector<json> model_refs;
    std::vector<double> offsets;

    // diagnose
    json model;
    json model_t;
    int pencil_order = 1;
    double gamma = 1.0;
    double c = 1.0;
    std::vector<int> truncations;
    bool cm = true;

    // verdict
    std::optional<json> verdict_input;

    // sample
    int n_samples = 100;
    int n_grid = 99;
};

struct CliOverrides {
    std::optional<int> N;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<int> threads;
};

namespace detail {

template <class T>
T config_value(const json& j, const char* key, T fallback) {
    if (!j.contains(key)) return fallback;
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config.") + key + ": " + e.what());
    }
}

inline std::vector<int> default_curve_grid() { return {10, 20, 50, 100, 200, 300, 400, 500}; }

inline std::vector<int> default_point_grid() {
    std::vector<int> n;
    for (int i = 2; i <= 100; i += 2) n.push_back(i);
    return n;
}

}  // namespace detail

/// Parses and validates a JSON config; every default is made explicit so the
/// echo in the manifest reproduces the run.
inline ExperimentConfig parse_config(const json& j, const CliOverrides& over = {}) {
    if (!j.is_object()) throw ConfigError("config: expected a JSON object");
    if (!j.contains("experiment")) throw ConfigError("config: missing key 'experiment'");
    const std::string name = detail::config_value<std::string>(j, "experiment", "");
    const auto which = experiment_from_string(name);
    if (!which) throw ConfigError("config.experiment: unknown experiment '" + name + "'");

    ExperimentConfig cfg;
    cfg.experiment = *which;
    switch (cfg.experiment) {
        case Experiment::fig1_integral:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "n_values", "deltas",
                                            "models", "per_target"},
                                        "config");
            break;
        case Experiment::fig1_point:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "n_values", "deltas",
                                            "models", "s0", "delta_o", "spacing", "radius"},
                                        "config");
            break;
        case Experiment::fig2:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "n_values", "betas",
                                            "models", "per_target"},
                                        "config");
            break;
        case Experiment::matern_check:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "models", "offsets"},
                                        "config");
            break;
        case Experiment::diagnose:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "model", "model_t",
                                            "pencil_order", "gamma", "c", "truncations", "cm"},
                                        "config");
            break;
        case Experiment::verdict:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "input", "model",
                                            "model_t"},
                                        "config");
            break;
        case Experiment::sample:
            detail::reject_unknown_keys(j, {"experiment", "N", "seed", "out", "threads", "plot", "model", "n_samples",
                                            "n_grid"},
                                        "config");
            break;
    }

    cfg.N = over.N.value_or(detail::config_value<int>(j, "N", 1000));
    cfg.seed = over.seed.value_or(detail::config_value<std::uint64_t>(j, "seed", 1));
    cfg.out = over.out.value_or(detail::config_value<std::string>(j, "out", "results"));
    cfg.threads = over.threads.value_or(detail::config_value<int>(j, "threads", 1));
    cfg.plot = detail::config_value<bool>(j, "plot", true);
    if (cfg.N < 10) throw ConfigError("config.N: must be >= 10");
    if (cfg.threads < 1) throw ConfigError("config.threads: must be >= 1");

    auto check_models = [&](std::initializer_list<std::string_view> allowed) {
        for (const auto& m : cfg.models)
            if (std::find(allowed.begin(), allowed.end(), m) == allowed.end())
                throw ConfigError("config.models: unsupported model '" + m + "' for " + name);
        if (cfg.models.empty()) throw ConfigError("config.models: must not be empty");
    };
    auto check_grid = [&](int max_n) {
        if (cfg.n_values.empty()) throw ConfigError("config.n_values: must not be empty");
        for (int n : cfg.n_values)
            if (n < 1 || n > max_n)
                throw ConfigError("config.n_values: " + std::to_string(n) + " outside [1, " + std::to_string(max_n) + "]");
    };

    switch (cfg.experiment) {
        case Experiment::fig1_integral:
        case Experiment::fig1_point: {
            const bool point = cfg.experiment == Experiment::fig1_point;
            cfg.n_values = detail::config_value(j, "n_values", point ? detail::default_point_grid() : detail::default_curve_grid());
            cfg.deltas = detail::config_value(j, "deltas", std::vector<double>{1.0, 10.0, 100.0});
            cfg.models = detail::config_value(j, "models", std::vector<std::string>{"model1_41", "model2_41"});
            check_models({"model1_41", "model2_41"});
            for (double d : cfg.deltas)
                if (!(d > 0.0)) throw ConfigError("config.deltas: must be positive");
            if (point) {
                cfg.point.s0 = detail::config_value(j, "s0", 0.5);
                cfg.point.delta_o = detail::config_value(j, "delta_o", 0.01);
                cfg.point.radius = detail::config_value(j, "radius", 0.1);
                const std::string spacing = detail::config_value<std::string>(j, "spacing", "infill");
                if (spacing != "infill" && spacing != "fixed")
                    throw ConfigError("config.spacing: must be \"infill\" or \"fixed\"");
                cfg.point.infill = spacing == "infill";
                check_grid(100000);
                try {
                    cfg.point.validate_points(cfg.n_values);
                } catch (const std::exception& e) {
                    throw ConfigError(std::string("config: ") + e.what());
                }
            } else {
                cfg.per_target = detail::config_value(j, "per_target", false);
                check_grid(cfg.N / 2);
            }
            break;
        }
        case Experiment::fig2:
            cfg.n_values = detail::config_value(j, "n_values", detail::default_curve_grid());
            cfg.betas = detail::config_value(j, "betas", std::vector<int>{1, 2, 3});
            cfg.models = detail::config_value(j, "models", std::vector<std::string>{"model1_42", "model2_42"});
            cfg.per_target = detail::config_value(j, "per_target", false);
            check_models({"model1_42", "model2_42"});
            for (int b : cfg.betas)
                if (b < 1 || b > 3) throw ConfigError("config.betas: entries must lie in {1,2,3}");
            check_grid(cfg.N / 2);
            break;
        case Experiment::matern_check:
            if (j.contains("models")) {
                if (!j["models"].is_array()) throw ConfigError("config.models: expected an array of model objects");
                for (const auto& m : j["models"]) cfg.model_refs.push_back(m);
            } else {
                cfg.model_refs = {json{{"builtin", "base41"}, {"beta", 1}},
                                  json{{"builtin", "base42"}, {"beta", 2}},
                                  json{{"builtin", "base42"}, {"beta", 3}}};
            }
            for (std::size_t i = 0; i < cfg.model_refs.size(); ++i)
                model_from_json(cfg.model_refs[i], "config.models[" + std::to_string(i) + "]");
            cfg.offsets = detail::config_value(j, "offsets", std::vector<double>{0.0, 0.02, 0.05, 0.1});
            for (double h : cfg.offsets)
                if (!(std::abs(h) < 0.5)) throw ConfigError("config.offsets: |h| must be below 0.5");
            break;
        case Experiment::diagnose: {
            cfg.model = j.contains("model") ? j["model"] : json{{"builtin", "base42"}, {"beta", 3}};
            cfg.model_t = j.contains("model_t") ? j["model_t"] : json{{"builtin", "model2_42"}, {"beta", 3}};
            const ModelSpec m = model_from_json(cfg.model, "config.model");
            model_from_json(cfg.model_t, "config.model_t");
            cfg.pencil_order = detail::config_value(j, "pencil_order", 1);
            if (cfg.pencil_order < 1 || cfg.pencil_order > 3) throw ConfigError("config.pencil_order: must lie in {1,2,3}");
            cfg.gamma = detail::config_value(j, "gamma", m.beta);
            cfg.c = detail::config_value(j, "c", 1.0);
            if (!(cfg.c > 0.0)) throw ConfigError("config.c: must be positive");
            cfg.truncations = detail::config_value(j, "truncations", std::vector<int>{100, 200, 400});
            for (std::size_t i = 0; i < cfg.truncations.size(); ++i) {
                if (cfg.truncations[i] < 1 || cfg.truncations[i] > cfg.N)
                    throw ConfigError("config.truncations: entries must lie in [1, N]");
                if (i > 0 && cfg.truncations[i] <= cfg.truncations[i - 1])
                    throw ConfigError("config.truncations: must be strictly ascending");
            }
            if (cfg.truncations.empty()) throw ConfigError("config.truncations: must not be empty");
            cfg.cm = detail::config_value(j, "cm", true);
            break;
        }
        case Experiment::verdict:
            if (j.contains("input")) {
                if (j.contains("model") || j.contains("model_t"))
                    throw ConfigError("config: give either 'input' or 'model'/'model_t', not both");
                cfg.verdict_input = j["input"];
                verdict_input_from_json(*cfg.verdict_input);
            } else {
                if (!j.contains("model") || !j.contains("model_t"))
                    throw ConfigError("config: verdict needs 'input' or both 'model' and 'model_t'");
                cfg.model = j["model"];
                cfg.model_t = j["model_t"];
                model_from_json(cfg.model, "config.model");
                model_from_json(cfg.model_t, "config.model_t");
            }
            break;
        case Experiment::sample:
            cfg.model = j.contains("model") ? j["model"] : json{{"builtin", "base41"}, {"beta", 1}};
            model_from_json(cfg.model, "config.model");
            cfg.n_samples = detail::config_value(j, "n_samples", 100);
            cfg.n_grid = detail::config_value(j, "n_grid", 99);
            if (cfg.n_samples < 1) throw ConfigError("config.n_samples: must be >= 1");
            if (cfg.n_grid < 1) throw ConfigError("config.n_grid: must be >= 1");
            break;
    }
    return cfg;
}

inline ExperimentConfig parse_config_file(const std::string& path, const CliOverrides& over = {}) {
    std::ifstream is(path);
    if (!is) throw ConfigError("cannot open config file " + path);
    json j;
    try {
        j = json::parse(is);
    } catch (const json::parse_error& e) {
        throw ConfigError(path + ": " + e.what());
    }
    return parse_config(j, over);
}

/// Full config echo with all defaults.
inline json to_json(const ExperimentConfig& c) {
    json j{{"experiment", std::string(to_string(c.experiment))},
           {"N", c.N},
           {"seed", c.seed},
           {"out", c.out},
           {"threads", c.threads},
           {"plot", c.plot}};
    switch (c.experiment) {
        case Experiment::fig1_integral:
            j.update({{"n_values", c.n_values}, {"deltas", c.deltas}, {"models", c.models}, {"per_target", c.per_target}});
            break;
        case Experiment::fig1_point:
            j.update({{"n_values", c.n_values},
                      {"deltas", c.deltas},
                      {"models", c.models},
                      {"s0", c.point.s0},
                      {"delta_o", c.point.delta_o},
                      {"spacing", c.point.infill ? "infill" : "fixed"},
                      {"radius", c.point.radius}});
            break;
        case Experiment::fig2:
            j.update({{"n_values", c.n_values}, {"betas", c.betas}, {"models", c.models}, {"per_target", c.per_target}});
            break;
        case Experiment::matern_check:
            j.update({{"models", c.model_refs}, {"offsets", c.offsets}});
            break;
        case Experiment::diagnose:
            j.update({{"model", c.model},
                      {"model_t", c.model_t},
                      {"pencil_order", c.pencil_order},
                      {"gamma", c.gamma},
                      {"c", c.c},
                      {"truncations", c.truncations},
                      {"cm", c.cm}});
            break;
        case Experiment::verdict:
            if (c.verdict_input) j["input"] = to_json(verdict_input_from_json(*c.verdict_input));
            else j.update({{"model", c.model}, {"model_t", c.model_t}});
            break;
        case Experiment::sample:
            j.update({{"model", c.model}, {"n_samples", c.n_samples}, {"n_grid", c.n_grid}});
            break;
    }
    return j;
}

// ---------------------------------------------------------------------------
// curve cells and their CSV rows

struct CurveCell {
    std::string model;  // misspecified model name
    int beta = 1;
    std::optional<double> delta;
    DesignKind design = DesignKind::integral;
    EfficiencyCurve curve;
};

inline std::string format_real(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline constexpr const char* kCurveCsvHeader =
    "experiment,model,beta,delta,design,n,target,true_var,missp_var,efficiency,e_max";

/// Rows sorted by (model, delta, beta, n, target), per-target rows before the "max" row of each n.
inline std::string curves_csv(Experiment e, std::vector<CurveCell> cells) {
    struct Row {
        std::tuple<std::string, double, int, int, int> key;
        std::string text;
    };
    std::vector<Row> rows;
    for (const auto& cell : cells) {
        const std::string prefix = std::string(to_string(e)) + "," + cell.model + "," + std::to_string(cell.beta) + "," +
                                   (cell.delta ? format_real(*cell.delta) : "") + "," +
                                   (cell.design == DesignKind::integral ? "integral" : "point") + ",";
        const double dkey = cell.delta.value_or(0.0);
        const auto& c = cell.curve;
        for (const auto& r : c.per_target)
            rows.push_back({{cell.model, dkey, cell.beta, r.n, r.target},
                            prefix + std::to_string(r.n) + "," + std::to_string(r.target + 1) + "," + format_real(r.true_var) +
                                "," + format_real(r.missp_var) + "," + format_real(r.efficiency) + ","});
        for (std::size_t i = 0; i < c.n_values.size(); ++i)
            rows.push_back({{cell.model, dkey, cell.beta, c.n_values[i], std::numeric_limits<int>::max()},
                            prefix + std::to_string(c.n_values[i]) + ",max," + format_real(c.argmax_true_var[i]) + "," +
                                format_real(c.argmax_missp_var[i]) + "," + format_real(c.e_max[i]) + "," +
                                format_real(c.e_max[i])});
    }
    std::stable_sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) { return a.key < b.key; });
    std::string out = std::string(kCurveCsvHeader) + "\n";
    for (const auto& r : rows) out += r.text + "\n";
    return out;
}

/// Log-scale line plot, one polyline per curve.
inline std::string curves_svg(const std::vector<CurveCell>& cells, const std::string& title) {
    const double W = 720, H = 460, L = 80, R = 180, T = 40, B = 60;
    double xmin = 1e300, xmax = -1e300, ymin = 1e300, ymax = -1e300;
    for (const auto& c : cells)
        for (std::size_t i = 0; i < c.curve.n_values.size(); ++i) {
            xmin = std::min(xmin, double(c.curve.n_values[i]));
            xmax = std::max(xmax, double(c.curve.n_values[i]));
            if (c.curve.e_max[i] > 0.0) {
                ymin = std::min(ymin, c.curve.e_max[i]);
                ymax = std::max(ymax, c.curve.e_max[i]);
            }
        }
    if (xmin >= xmax) xmax = xmin + 1;
    if (!(ymin < ymax)) { ymin = 1e-16; ymax = 1.0; }
    const double lymin = std::floor(std::log10(ymin)), lymax = std::ceil(std::log10(ymax));
    auto px = [&](double x) { return L + (x - xmin) / (xmax - xmin) * (W - L - R); };
    auto py = [&](double y) {
        const double ly = std::log10(std::max(y, std::pow(10.0, lymin)));
        return H - B - (ly - lymin) / std::max(1.0, lymax - lymin) * (H - T - B);
    };
    static constexpr std::array<const char*, 8> colors{"#000000", "#d62728", "#1f77b4", "#2ca02c",
                                                       "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};
    static constexpr std::array<const char*, 3> dashes{"", "8,4", "2,3"};
    std::ostringstream os;
    os << std::setprecision(6);
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\">\n";
    os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    os << "<text x=\"" << L << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"14\">" << title << "</text>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << H - B << "\" x2=\"" << W - R << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    os << "<line x1=\"" << L << "\" y1=\"" << T << "\" x2=\"" << L << "\" y2=\"" << H - B << "\" stroke=\"black\"/>\n";
    for (double e = lymin; e <= lymax; e += 1.0) {
        const double y = py(std::pow(10.0, e));
        os << "<text x=\"" << L - 8 << "\" y=\"" << y + 4 << "\" font-family=\"sans-serif\" font-size=\"11\" "
           << "text-anchor=\"end\">1e" << int(e) << "</text>\n";
        os << "<line x1=\"" << L << "\" y1=\"" << y << "\" x2=\"" << W - R << "\" y2=\"" << y
           << "\" stroke=\"#ddd\"/>\n";
    }
    for (int k = 0; k <= 4; ++k) {
        const double x = xmin + k * (xmax - xmin) / 4;
        os << "<text x=\"" << px(x) << "\" y=\"" << H - B + 18 << "\" font-family=\"sans-serif\" font-size=\"11\" "
           << "text-anchor=\"middle\">" << std::lround(x) << "</text>\n";
    }
    os << "<text x=\"" << (L + W - R) / 2 << "\" y=\"" << H - 16
       << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">n</text>\n";
    std::map<std::string, int> model_color;
    std::map<double, int> group_dash;
    for (const auto& c : cells) {
        model_color.emplace(c.model, static_cast<int>(model_color.size()));
        group_dash.emplace(c.delta ? *c.delta : c.beta, static_cast<int>(group_dash.size()));
    }
    int legend = 0;
    for (const auto& c : cells) {
        const char* color = colors[model_color[c.model] % colors.size()];
        const char* dash = dashes[group_dash[c.delta ? *c.delta : c.beta] % dashes.size()];
        os << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1.5\"";
        if (*dash) os << " stroke-dasharray=\"" << dash << "\"";
        os << " points=\"";
        for (std::size_t i = 0; i < c.curve.n_values.size(); ++i)
            os << px(c.curve.n_values[i]) << ',' << py(c.curve.e_max[i]) << ' ';
        os << "\"/>\n";
        const double ly = T + 14 * legend++;
        os << "<line x1=\"" << W - R + 10 << "\" y1=\"" << ly << "\" x2=\"" << W - R + 40 << "\" y2=\"" << ly
           << "\" stroke=\"" << color << "\"" << (*dash ? std::string(" stroke-dasharray=\"") + dash + "\"" : "")
           << "/>\n";
        os << "<text x=\"" << W - R + 46 << "\" y=\"" << ly + 4 << "\" font-family=\"sans-serif\" font-size=\"11\">"
           << c.model << (c.delta ? " d=" + format_real(*c.delta) : " b=" + std::to_string(c.beta)) << "</text>\n";
    }
    os << "</svg>\n";
    return os.str();
}

/// Runs fn(i) for i in [0, count) on up to `threads` workers; results are
/// indexed by i, so the output never depends on scheduling. The first failing
/// index (in index order) is rethrown.
template <class Fn>
void parallel_cells(std::size_t count, int threads, Fn&& fn) {
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                fn(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n = std::max(1, std::min<int>(threads, static_cast<int>(count)));
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

inline BuiltinModel builtin_or_throw(const std::string& name) {
    const auto m = builtin_from_string(name);
    if (!m) throw ConfigError("unknown built-in model '" + name + "'");
    return *m;
}

inline std::vector<CurveCell> run_curves(const ExperimentConfig& cfg) {
    std::vector<CurveCell> cells;
    if (cfg.experiment == Experiment::fig2) {
        for (const auto& m : cfg.models)
            for (int b : cfg.betas) cells.push_back({m, b, std::nullopt, DesignKind::integral, {}});
    } else {
        const DesignKind design = cfg.experiment == Experiment::fig1_point ? DesignKind::point : DesignKind::integral;
        for (const auto& m : cfg.models)
            for (double d : cfg.deltas) cells.push_back({m, 1, d, design, {}});
    }
    parallel_cells(cells.size(), cfg.threads, [&](std::size_t i) {
        CurveCell& cell = cells[i];
        const BuiltinModel missp = builtin_or_throw(cell.model);
        const bool fig2 = cfg.experiment == Experiment::fig2;
        const double delta = cell.delta.value_or(10.0);
        const ModelSpec truth = builtin_model(fig2 ? BuiltinModel::base42 : BuiltinModel::base41, cell.beta, delta);
        const ModelSpec wrong = builtin_model(missp, cell.beta, delta);
        if (cell.design == DesignKind::point)
            cell.curve = efficiency_curve_point(truth, wrong, cfg.point, cfg.n_values, cfg.N);
        else
            cell.curve = efficiency_curve_integral(truth, wrong, cfg.N, cfg.n_values, cfg.per_target);
    });
    return cells;
}

// ---------------------------------------------------------------------------
// driver

struct RunResult {
    std::vector<std::string> artifacts;
    json summary;
};

inline void write_text(const std::filesystem::path& p, const std::string& text, RunResult& result) {
    std::ofstream os(p, std::ios::binary);
    if (!os) throw ConfigError("cannot write " + p.string());
    os << text;
    if (!os) throw ConfigError("failed writing " + p.string());
    result.artifacts.push_back(p.filename().string());
}

inline std::string model_label(const json& ref, std::size_t index) {
    if (ref.contains("builtin") && ref["builtin"].is_string()) return ref["builtin"].get<std::string>();
    return "model" + std::to_string(index);
}

inline json curve_summary(const std::vector<CurveCell>& cells) {
    json s = json::array();
    for (const auto& c : cells) {
        json row{{"model", c.model}, {"beta", c.beta}, {"n", c.curve.n_values}, {"e_max", c.curve.e_max},
                 {"argmax_target", c.curve.argmax_target}, {"condition", c.curve.condition},
                 {"flagged", c.curve.flagged}, {"optimal", curve_indicates_optimal(c.curve)}};
        if (c.delta) row["delta"] = *c.delta;
        std::for_each(row["argmax_target"].begin(), row["argmax_target"].end(), [](json& t) { t = t.get<int>() + 1; });
        s.push_back(row);
    }
    return s;
}

inline RunResult run_experiment(const ExperimentConfig& cfg) {
    namespace fs = std::filesystem;
    const auto t0 = std::chrono::steady_clock::now();
    std::error_code ec;
    fs::create_directories(cfg.out, ec);
    if (ec) throw ConfigError("cannot create output directory " + cfg.out + ": " + ec.message());
    const fs::path out(cfg.out);
    RunResult result;

    switch (cfg.experiment) {
        case Experiment::fig1_integral:
        case Experiment::fig1_point:
        case Experiment::fig2: {
            const auto cells = run_curves(cfg);
            write_text(out / "curves.csv", curves_csv(cfg.experiment, cells), result);
            if (cfg.plot) write_text(out / "curves.svg", curves_svg(cells, std::string(to_string(cfg.experiment))), result);
            result.summary["curves"] = curve_summary(cells);
            break;
        }
        case Experiment::matern_check: {
            std::vector<MaternComparison> cmp(cfg.model_refs.size());
            std::vector<ModelSpec> models;
            for (std::size_t i = 0; i < cfg.model_refs.size(); ++i)
                models.push_back(model_from_json(cfg.model_refs[i], "config.models[" + std::to_string(i) + "]"));
            parallel_cells(models.size(), cfg.threads,
                           [&](std::size_t i) { cmp[i] = compare_fem_vs_matern(models[i], cfg.N, cfg.offsets); });
            std::string csv = "model,beta,h,fem,matern,rel_error\n";
            json s = json::array();
            for (std::size_t i = 0; i < cmp.size(); ++i) {
                for (std::size_t k = 0; k < cmp[i].offsets.size(); ++k)
                    csv += model_label(cfg.model_refs[i], i) + "," + format_real(models[i].beta) + "," + format_real(cmp[i].offsets[k]) +
                           "," + format_real(cmp[i].fem[k]) + "," + format_real(cmp[i].reference[k]) + "," +
                           format_real(cmp[i].rel_error[k]) + "\n";
                s.push_back({{"model", cfg.model_refs[i]}, {"variance_at_centre", cmp[i].fem.empty() ? 0.0 : cmp[i].fem[0]},
                             {"max_rel_error", cmp[i].max_rel_error}});
            }
            write_text(out / "matern.csv", csv, result);
            result.summary["comparisons"] = s;
            break;
        }
        case Experiment::diagnose: {
            const ModelSpec m = model_from_json(cfg.model, "config.model");
            const ModelSpec mt = model_from_json(cfg.model_t, "config.model_t");
            const SplineBasis basis = build_basis(cfg.N, cfg.pencil_order, ConstraintMode::dirichlet);
            const OperatorPair pair = operator_pair(m, mt, basis);
            DiagnosticsReport rep = hs_curve(pair, cfg.gamma, cfg.c, cfg.truncations);
            json cm = json::array();
            if (cfg.cm) {
                for (int r : cfg.truncations) {
                    const auto q = cm_equivalence_constants(pair, m.beta, r);
                    cm.push_back({{"rank", r}, {"inf_q", q.first}, {"sup_q", q.second}});
                }
                rep.cm_constants = cm_equivalence_constants(pair, m.beta, cfg.truncations.back());
            }
            json j = to_json(rep);
            j["cm_by_truncation"] = cm;
            j["orthogonality_defect"] = cross_orthogonality_defect(pair);
            write_text(out / "diagnostics.json", j.dump(2) + "\n", result);
            write_text(out / "diagnostics.csv", to_csv(rep), result);
            result.summary["classification"] = std::string(to_string(rep.classification));
            break;
        }
        case Experiment::verdict: {
            const VerdictInput in = cfg.verdict_input
                                        ? verdict_input_from_json(*cfg.verdict_input)
                                        : verdict_input_from_models(model_from_json(cfg.model, "config.model"),
                                                                    model_from_json(cfg.model_t, "config.model_t"));
            const Verdict v = table1_verdict(in);
            json j = to_json(v);
            j["input"] = to_json(in);
            write_text(out / "verdict.json", j.dump(2) + "\n", result);
            result.summary["verdict"] = to_json(v);
            break;
        }
        case Experiment::sample: {
            const ModelSpec m = model_from_json(cfg.model, "config.model");
            const SplineBasis basis = basis_for(m, cfg.N);
            const CovarianceMatrix cov = build_covariance(m, basis);
            const Eigen::MatrixXd w = sample_field(cov, cfg.seed, cfg.n_samples);
            write_dense_file((out / "samples.bin").string(), w);
            result.artifacts.push_back("samples.bin");
            std::vector<double> s(cfg.n_grid);
            for (int i = 0; i < cfg.n_grid; ++i) s[i] = (i + 1.0) / (cfg.n_grid + 1.0);
            const Eigen::MatrixXd values = point_obs_matrix(basis, s) * w;
            std::string csv = "sample,s,value\n";
            for (int k = 0; k < cfg.n_samples; ++k)
                for (int i = 0; i < cfg.n_grid; ++i)
                    csv += std::to_string(k) + "," + format_real(s[i]) + "," + format_real(values(i, k)) + "\n";
            write_text(out / "samples.csv", csv, result);
            result.summary["rng"] = CounterRng::kName;
            break;
        }
    }

    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    json manifest{{"config", to_json(cfg)},
                  {"library_version", kVersion},
                  {"wall_time_s", wall},
                  {"artifacts", result.artifacts},
                  {"summary", result.summary}};
    write_text(out / "manifest.json", manifest.dump(2) + "\n", result);
    return result;
}

}  // namespace wmlab
