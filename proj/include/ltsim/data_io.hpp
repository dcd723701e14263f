#pragma once

// Price panels, CMA and process documents, ensemble and report files.
//
// Price CSV (long): header date,asset_id,price; ISO month-end dates. Each
// asset must cover consecutive months without gaps; assets are aligned on the
// intersection of their date ranges. The wide layout (date,<id>,<id>,...) is
// accepted on request. Prices are taken in their home currency.
//
// CMA JSON:
//   {"schema_version": 1,
//    "assets": [{"id": "X", "class": "Equity", "mu": 0.08, "sigma": 0.16}, ...],
//    "correlation": [[1, 0.3], [0.3, 1]]}
// "class" defaults to Equity; "correlation" may be omitted for one asset.
//
// Process JSON: one process object, or {"processes": [...]}. Omitted blocks
// take the defaults of ProcessSpec:
//   {"name": "...",
//    "drift": {"du": {"calibration_years": 25} | false,
//              "nrc": true | false | {"Equity": [{"steps": 6, "gamma": 0.1}, ...], ...}},
//    "covariance": {"model": "constant" | "lmarch", "w_inf": 0.4,
//                   "kernel": {"taus": [...], "l_max": 120, "decay": 96}},
//    "innovations": {"model": "normal" | "student", "nu": 8,
//                    "gamma_by_class": {"Equity": -0.3, ...}, "gamma_asym": [...]},
//    "p_min_fraction": 0.01, "p_min_absolute": 5.0}

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "json.hpp"
#include "ltsim/market_history.hpp"
#include "ltsim/market_model.hpp"
#include "ltsim/path_simulator.hpp"
#include "ltsim/stats_suite.hpp"

namespace ltsim {

inline constexpr int kSchemaVersion = 1;

enum class PriceLayout { Long, Wide };

MarketHistory parse_prices(std::istream& in, PriceLayout layout = PriceLayout::Long,
                           const std::string& source = "<stream>");
MarketHistory load_prices(const std::filesystem::path& path, PriceLayout layout = PriceLayout::Long);
/// Long layout, 17 significant digits.
void write_prices(const MarketHistory& history, const std::filesystem::path& path);

CmaParameters cma_from_json(const nlohmann::json& doc);
nlohmann::json cma_to_json(const CmaParameters& cma);
CmaParameters load_cma(const std::filesystem::path& path);
void write_cma(const CmaParameters& cma, const std::filesystem::path& path);

ProcessSpec spec_from_json(const nlohmann::json& doc, const std::string& where = "spec");
nlohmann::json spec_to_json(const ProcessSpec& spec);
std::vector<ProcessSpec> load_specs(const std::filesystem::path& path);
/// Exactly one process in the file.
ProcessSpec load_spec(const std::filesystem::path& path);
void write_specs(const std::vector<ProcessSpec>& specs, const std::filesystem::path& path);

nlohmann::json grid_to_json(const TimeGrid& grid);
TimeGrid grid_from_json(const nlohmann::json& doc);

/// mu = 12 * mean monthly return, sigma = sqrt(12 * mean squared return),
/// rho = sample correlation of monthly returns. Needs 24 monthly returns;
/// throws NotPositiveDefiniteError rather than repairing rho. Classes default
/// to Equity when not given.
CmaParameters estimate_cma(const MarketHistory& history, std::vector<AssetClass> classes = {},
                           double eps_min = kDefaultEpsMin);

/// FNV-1a over the canonical JSON of the process and the CMA, as 16 hex digits.
std::string spec_hash(const ProcessSpec& spec, const CmaParameters& cma);

/// Shortest text with 17 significant digits; integers print without exponent.
std::string format_number(double value);

/// Writes <prefix>.csv (path,step,<asset ids>) and <prefix>.json (seed,
/// spec hash, grid, process, CMA, retained steps, faults). Returns both paths.
std::vector<std::filesystem::path> write_ensemble(const EnsembleResult& result, const std::filesystem::path& prefix);
EnsembleResult load_ensemble(const std::filesystem::path& prefix);

/// One CSV per curve plus report.json naming each curve and its file.
std::vector<std::filesystem::path> write_report(const StatReport& report, const std::filesystem::path& directory);

/// Whole-file helpers surfacing failures as IoError with the path.
std::string read_text(const std::filesystem::path& path);
void write_text(const std::filesystem::path& path, const std::string& text);

}  // namespace ltsim
