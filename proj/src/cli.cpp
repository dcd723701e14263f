#include "ltsim/cli.hpp"

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>

#include "CLI11.hpp"
#include "json.hpp"
#include "ltsim/data_io.hpp"
#include "ltsim/errors.hpp"
#include "ltsim/path_simulator.hpp"
#include "ltsim/stats_suite.hpp"

namespace ltsim {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct RunManifest {
    std::string command;
    json config = json::object();
    std::optional<std::uint64_t> seed;
    std::vector<std::string> outputs;
};

std::size_t threads_from_env() {
    const char* env = std::getenv("LTSIM_THREADS");
    if (!env || !*env) return 0;
    char* end = nullptr;
    const unsigned long v = std::strtoul(env, &end, 10);
    if (*end != '\0') throw ValidationError("LTSIM_THREADS must be a non-negative integer");
    return v;
}

void write_manifest(const fs::path& path, const RunManifest& m, int code, const std::string& error, double seconds) {
    json doc{{"schema_version", kSchemaVersion},
             {"kind", "run"},
             {"command", m.command},
             {"config", m.config},
             {"versions", {{"ltsim", kVersion}, {"schema", kSchemaVersion}}},
             {"outputs", m.outputs},
             {"exit_code", code},
             {"wall_time_seconds", seconds}};
    doc["seed"] = m.seed ? json(*m.seed) : json(nullptr);
    if (!error.empty()) doc["error"] = error;
    write_text(path, doc.dump(2) + "\n");
}

std::vector<std::size_t> select_assets(const std::vector<std::string>& ids, const std::string& which) {
    std::vector<std::size_t> out;
    if (which.empty()) {
        for (std::size_t a = 0; a < ids.size(); ++a) out.push_back(a);
        return out;
    }
    for (std::size_t a = 0; a < ids.size(); ++a)
        if (ids[a] == which) return {a};
    throw ValidationError("unknown asset '" + which + "'");
}

std::string file_stem(const std::string& name) {
    std::string s = name;
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_') c = '_';
    return s.empty() ? "process" : s;
}

struct SimulateArgs {
    std::string cma, spec, history, out = "ensembles";
    double years = 20.0;
    std::size_t paths = 50000;
    std::uint64_t seed = 1;
    std::size_t retain_every = 1;
    bool skip_faults = false;
    bool wide = false;
};

struct StatsArgs {
    std::string ensemble, prices, cma, which, out = "report", asset, statistic = "returns";
    std::vector<double> horizons;
    bool wide = false;
};

struct CalibrateArgs {
    std::string prices, out = "cma.json";
    std::vector<std::string> classes;
    bool wide = false;
};

void cmd_simulate(const SimulateArgs& a, std::size_t threads, RunManifest& m, std::ostream& out) {
    m.config = {{"cma", a.cma}, {"spec", a.spec}, {"history", a.history}, {"years", a.years}, {"paths", a.paths},
                {"retain_every", a.retain_every}, {"skip_faults", a.skip_faults}};
    m.seed = a.seed;
    const CmaParameters cma = load_cma(a.cma);
    const std::vector<ProcessSpec> specs = load_specs(a.spec);
    std::optional<MarketHistory> history;
    if (!a.history.empty()) history = load_prices(a.history, a.wide ? PriceLayout::Wide : PriceLayout::Long);

    if (!(a.years > 0.0)) throw ValidationError("--years must be positive");
    const std::size_t n_steps = TimeGrid::monthly(1).steps_for_years(a.years);
    if (n_steps == 0) throw ValidationError("--years is shorter than one month");
    const TimeGrid grid = history ? TimeGrid::monthly(n_steps, history->grid.date_at(history->grid.n_steps()))
                                  : TimeGrid::monthly(n_steps);
    if (a.retain_every == 0) throw ValidationError("--retain-every must be at least 1");

    SimulationOptions options;
    options.threads = threads;
    options.fault_mode = a.skip_faults ? FaultMode::SkipAndReport : FaultMode::FailFast;
    if (a.retain_every > 1) {
        for (std::size_t k = 0; k <= n_steps; k += a.retain_every) options.retained_steps.push_back(k);
        if (options.retained_steps.back() != n_steps) options.retained_steps.push_back(n_steps);
    }

    std::vector<std::string> stems;
    for (const auto& spec : specs) {
        std::string stem = file_stem(spec.name);
        if (std::find(stems.begin(), stems.end(), stem) != stems.end())
            throw ValidationError("two processes share the name '" + spec.name + "'");
        stems.push_back(stem);
    }
    for (std::size_t i = 0; i < specs.size(); ++i) {
        const EnsembleResult result = PathSimulator(specs[i], cma, grid, history).simulate(a.paths, a.seed, options);
        for (const auto& f : write_ensemble(result, fs::path(a.out) / stems[i])) m.outputs.push_back(f.string());
        out << specs[i].name << ": " << a.paths << " paths x " << n_steps << " steps";
        if (result.partial()) out << " (" << result.faults.size() << " faulted paths)";
        out << "\n";
    }
}

void cmd_stats(const StatsArgs& a, std::size_t threads, RunManifest& m, std::ostream& out) {
    m.config = {{"ensemble", a.ensemble}, {"prices", a.prices}, {"cma", a.cma}, {"which", a.which},
                {"horizons", a.horizons}, {"asset", a.asset}, {"statistic", a.statistic}};
    const int inputs = !a.ensemble.empty() + !a.prices.empty() + !a.cma.empty();
    if (inputs != 1) throw ValidationError("give exactly one of --ensemble, --prices or --cma");

    std::optional<EnsembleResult> ensemble;
    std::optional<MarketHistory> history;
    if (!a.ensemble.empty()) {
        ensemble = load_ensemble(a.ensemble);
        m.seed = ensemble->master_seed;
    }
    if (!a.prices.empty()) history = load_prices(a.prices, a.wide ? PriceLayout::Wide : PriceLayout::Long);

    StatReport report;
    report.statistic = a.which;
    const auto& ids = ensemble ? ensemble->cma.asset_ids : history ? history->asset_ids : std::vector<std::string>{};
    report.metadata["source"] = ensemble ? "ensemble" : history ? "prices" : "cma";
    if (ensemble) {
        report.metadata["seed"] = std::to_string(ensemble->master_seed);
        report.metadata["spec_hash"] = spec_hash(ensemble->spec, ensemble->cma);
        report.metadata["process"] = ensemble->spec.name;
        report.metadata["paths"] = std::to_string(ensemble->n_paths);
    }

    auto step_horizons = [&](std::vector<std::size_t> fallback) {
        if (a.horizons.empty()) return fallback;
        std::vector<std::size_t> h;
        for (double v : a.horizons) {
            if (!(v >= 1.0) || v != std::floor(v)) throw ValidationError("--horizons must be whole steps for this statistic");
            h.push_back(static_cast<std::size_t>(v));
        }
        return h;
    };

    if (a.which == "crossover") {
        const CmaParameters cma = ensemble ? ensemble->cma : history ? estimate_cma(*history) : load_cma(a.cma);
        report.curves.push_back(to_curve(crossover_table(cma), "crossover"));
    } else if (a.which == "wealth") {
        if (!ensemble) throw ValidationError("wealth statistics need --ensemble");
        std::vector<double> horizons = a.horizons;
        if (horizons.empty())
            for (double y = 1.0; ensemble->grid.steps_for_years(y) <= ensemble->grid.n_steps(); y += 1.0)
                if (ensemble->point_of_step(ensemble->grid.steps_for_years(y))) horizons.push_back(y);
        report.metadata["horizon_unit"] = "years";
        for (std::size_t asset : select_assets(ids, a.asset))
            report.curves.push_back(to_curve(wealth_statistics(*ensemble, horizons, asset), "wealth_" + ids[asset]));
    } else if (a.which == "dist") {
        if (a.cma.size()) throw ValidationError("dist needs --ensemble or --prices");
        report.metadata["horizon_unit"] = "steps";
        for (std::size_t asset : select_assets(ids, a.asset)) {
            for (std::size_t h : step_horizons({1})) {
                const std::string name = "dist_" + ids[asset] + "_" + std::to_string(h);
                try {
                    const SeriesSample s = ensemble ? simulated_innovations(*ensemble, asset, h)
                                                    : empirical_innovations(*history, asset, h);
                    report.curves.push_back(to_curve(folded_cdf(s.values), name));
                } catch (const InsufficientDataError& e) {
                    report.curves.push_back(Curve{name, {"x", "cdf", "fold"}, {}, {}, {e.what()}});
                }
            }
        }
    } else if (a.which == "lagcorr") {
        if (a.cma.size()) throw ValidationError("lagcorr needs --ensemble or --prices");
        LagOneStatistic statistic;
        if (a.statistic == "returns") statistic = LagOneStatistic::Returns;
        else if (a.statistic == "volatility") statistic = LagOneStatistic::Volatility;
        else throw ValidationError("--statistic must be returns or volatility");
        report.metadata["statistic"] = std::string(to_string(statistic));
        report.metadata["horizon_unit"] = "steps";
        const std::vector<std::size_t> horizons = step_horizons({1, 2, 3, 6, 9, 12, 18, 24, 36, 48});
        const LmarchKernel kernel = build_kernel(KernelConfig{});
        for (std::size_t asset : select_assets(ids, a.asset)) {
            const LagOneCurve curve =
                ensemble ? mc_lag_one_bands(*ensemble, asset, horizons, statistic, kernel, threads)
                         : lag_one_curve(history->series(asset), horizons, statistic, kernel, ids[asset]);
            report.curves.push_back(to_curve(curve, "lagcorr_" + std::string(to_string(statistic)) + "_" + ids[asset]));
        }
    } else {
        throw ValidationError("--which must be wealth, dist, lagcorr or crossover");
    }

    for (const auto& f : write_report(report, a.out)) m.outputs.push_back(f.string());
    for (const auto& c : report.curves) {
        out << c.name << ": " << c.rows.size() << " rows";
        for (const auto& n : c.notes) out << "; " << n;
        out << "\n";
    }
}

void cmd_calibrate(const CalibrateArgs& a, RunManifest& m, std::ostream& out) {
    m.config = {{"prices", a.prices}, {"classes", a.classes}};
    const MarketHistory history = load_prices(a.prices, a.wide ? PriceLayout::Wide : PriceLayout::Long);
    std::vector<AssetClass> classes;
    for (const auto& c : a.classes) classes.push_back(asset_class_from_string(c));
    const CmaParameters cma = estimate_cma(history, classes);
    write_cma(cma, a.out);
    m.outputs.push_back(a.out);
    out << "calibrated " << cma.size() << " assets over " << history.grid.n_steps() << " months\n";
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Long-horizon multi-asset market simulator", "ltsim"};
    app.set_version_flag("--version", kVersion);
    app.require_subcommand(1);
    std::size_t threads = 0;
    std::string manifest_path;
    app.add_option("--threads", threads, "Worker cap (0 = all cores; default from LTSIM_THREADS)");
    app.add_option("--manifest", manifest_path, "Run manifest path (default: inside the output location)");

    SimulateArgs sim;
    auto* simulate = app.add_subcommand("simulate", "Generate price ensembles");
    simulate->add_option("--cma", sim.cma, "CMA JSON")->required();
    simulate->add_option("--spec", sim.spec, "Process JSON (one process or a list)")->required();
    simulate->add_option("--history", sim.history, "Price CSV seeding the drift and covariance memory");
    simulate->add_option("--years", sim.years, "Simulated span in years")->capture_default_str();
    simulate->add_option("--paths", sim.paths, "Number of paths")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Master seed")->capture_default_str();
    simulate->add_option("--out", sim.out, "Output directory")->capture_default_str();
    simulate->add_option("--retain-every", sim.retain_every, "Keep every n-th step (plus the last)")->capture_default_str();
    simulate->add_flag("--skip-faults", sim.skip_faults, "Report faulted paths instead of aborting");
    simulate->add_flag("--wide", sim.wide, "History CSV uses the wide layout");

    StatsArgs st;
    auto* stats = app.add_subcommand("stats", "Statistics of an ensemble, a price panel or a CMA file");
    stats->add_option("--ensemble", st.ensemble, "Ensemble prefix (without .csv/.json)");
    stats->add_option("--prices", st.prices, "Price CSV");
    stats->add_option("--cma", st.cma, "CMA JSON (crossover only)");
    stats->add_option("--which", st.which, "wealth | dist | lagcorr | crossover")->required();
    stats->add_option("--horizons", st.horizons, "Years for wealth, steps otherwise")->delimiter(',');
    stats->add_option("--asset", st.asset, "Restrict to one asset id");
    stats->add_option("--statistic", st.statistic, "lagcorr leg: returns | volatility")->capture_default_str();
    stats->add_option("--out", st.out, "Report directory")->capture_default_str();
    stats->add_flag("--wide", st.wide, "Price CSV uses the wide layout");

    CalibrateArgs cal;
    auto* calibrate = app.add_subcommand("calibrate", "Estimate CMA parameters from a price panel");
    calibrate->add_option("--prices", cal.prices, "Price CSV")->required();
    calibrate->add_option("--out", cal.out, "CMA JSON output")->capture_default_str();
    calibrate->add_option("--classes", cal.classes, "Asset class per asset")->delimiter(',');
    calibrate->add_flag("--wide", cal.wide, "Price CSV uses the wide layout");

    for (auto* sub : {simulate, stats, calibrate}) sub->fallthrough();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e, out, err);
        return code == 0 ? kExitOk : kExitValidation;
    }

    RunManifest manifest;
    manifest.command = app.get_subcommands().front()->get_name();
    if (manifest_path.empty()) {
        if (simulate->parsed()) manifest_path = (fs::path(sim.out) / "run.json").string();
        else if (stats->parsed()) manifest_path = (fs::path(st.out) / "run.json").string();
        else manifest_path = fs::path(cal.out).replace_extension(".run.json").string();
    }

    const auto start = std::chrono::steady_clock::now();
    int code = kExitOk;
    std::string message;
    try {
        const std::size_t cap = app.get_option("--threads")->count() ? threads : threads_from_env();
        if (simulate->parsed()) cmd_simulate(sim, cap, manifest, out);
        else if (stats->parsed()) cmd_stats(st, cap, manifest, out);
        else cmd_calibrate(cal, manifest, out);
    } catch (const NumericalFault& e) {
        code = kExitNumeric;
        message = e.what();
    } catch (const IoError& e) {
        code = kExitIo;
        message = e.what();
    } catch (const Error& e) {
        code = kExitValidation;
        message = e.what();
    }
    if (!message.empty()) err << "error: " << message << "\n";

    const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    try {
        write_manifest(manifest_path, manifest, code, message, seconds);
    } catch (const IoError& e) {
        err << "error: " << e.what() << "\n";
        if (code == kExitOk) code = kExitIo;
    }
    return code;
}

}  // namespace ltsim
