#include "ltsim/data_io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "ltsim/errors.hpp"

namespace ltsim {

using nlohmann::json;

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::vector<std::string_view> split(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const std::size_t comma = line.find(',', start);
        out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
        if (comma == std::string_view::npos) break;
        start = comma + 1;
    }
    return out;
}

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
    return out;
}

std::string at_row(const std::string& source, std::size_t row) { return source + ":" + std::to_string(row) + ": "; }

std::optional<double> parse_double(std::string_view s) {
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
    return v;
}

/// Months since year 0 of an ISO month-end date.
long parse_month_end(std::string_view s, const std::string& where) {
    int y = 0;
    unsigned m = 0, d = 0;
    const bool shape = s.size() == 10 && s[4] == '-' && s[7] == '-';
    const auto num = [&](std::size_t pos, std::size_t len, auto& out) {
        return std::from_chars(s.data() + pos, s.data() + pos + len, out).ec == std::errc();
    };
    if (!shape || !num(0, 4, y) || !num(5, 2, m) || !num(8, 2, d))
        throw ValidationError(where + "date '" + std::string(s) + "' is not YYYY-MM-DD");
    using namespace std::chrono;
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw ValidationError(where + "date '" + std::string(s) + "' does not exist");
    if (year_month_day_last{year{y}, month_day_last{month{m}}}.day() != day{d})
        throw ValidationError(where + "date '" + std::string(s) + "' is not a month end");
    return static_cast<long>(y) * 12 + static_cast<long>(m) - 1;
}

std::chrono::year_month_day month_end_of(long months) {
    using namespace std::chrono;
    const year y{static_cast<int>(months / 12)};
    const month m{static_cast<unsigned>(months % 12 + 1)};
    return year_month_day{year_month_day_last{y, month_day_last{m}}};
}

std::string format_date(std::chrono::year_month_day d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

std::chrono::year_month_day parse_date_field(const std::string& s, const std::string& where) {
    using namespace std::chrono;
    int y = 0;
    unsigned m = 0, d = 0;
    if (std::sscanf(s.c_str(), "%d-%u-%u", &y, &m, &d) != 3)
        throw ValidationError(where + ": date '" + s + "' is not YYYY-MM-DD");
    const year_month_day ymd{year{y}, month{m}, day{d}};
    if (!ymd.ok()) throw ValidationError(where + ": date '" + s + "' does not exist");
    return ymd;
}

struct Cell {
    double price;
    std::size_t row;
};

MarketHistory assemble(const std::string& source, const std::vector<std::string>& order,
                       const std::map<std::string, std::map<long, Cell>>& cells) {
    if (order.empty()) throw ValidationError(source + ": no price rows");
    long first = std::numeric_limits<long>::min();
    long last = std::numeric_limits<long>::max();
    for (const auto& id : order) {
        const auto& series = cells.at(id);
        long prev = series.begin()->first;
        for (auto it = std::next(series.begin()); it != series.end(); ++it) {
            if (it->first != prev + 1)
                throw ValidationError(at_row(source, it->second.row) + "asset '" + id + "' jumps from " +
                                      format_date(month_end_of(prev)) + " to " + format_date(month_end_of(it->first)) +
                                      " (missing months are not filled)");
            prev = it->first;
        }
        first = std::max(first, series.begin()->first);
        last = std::min(last, series.rbegin()->first);
    }
    if (last - first < 1) throw ValidationError(source + ": assets share fewer than two common month ends");

    MarketHistory h;
    h.asset_ids = order;
    h.grid = TimeGrid::monthly(static_cast<std::size_t>(last - first), month_end_of(first));
    h.prices.resize(last - first + 1, static_cast<Eigen::Index>(order.size()));
    for (std::size_t a = 0; a < order.size(); ++a) {
        const auto& series = cells.at(order[a]);
        for (long m = first; m <= last; ++m) h.prices(m - first, static_cast<Eigen::Index>(a)) = series.at(m).price;
    }
    return h;
}

double positive_price(std::string_view text, const std::string& where) {
    const auto v = parse_double(text);
    if (!v) throw ValidationError(where + "price '" + std::string(text) + "' is not a number");
    if (!(*v > 0.0) || !std::isfinite(*v))
        throw ValidationError(where + "price " + std::string(text) + " is not strictly positive");
    return *v;
}

// JSON field access with the field path in every error.

const json& field(const json& obj, const std::string& key, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    const auto it = obj.find(key);
    if (it == obj.end()) throw ValidationError(where + "." + key + ": missing");
    return *it;
}

double number(const json& v, const std::string& where) {
    if (!v.is_number()) throw ValidationError(where + ": expected a number");
    return v.get<double>();
}

std::size_t count(const json& v, const std::string& where) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        throw ValidationError(where + ": expected a non-negative integer");
    return v.get<std::size_t>();
}

std::string text(const json& v, const std::string& where) {
    if (!v.is_string()) throw ValidationError(where + ": expected a string");
    return v.get<std::string>();
}

void check_schema(const json& doc, const std::string& where) {
    if (!doc.is_object()) throw ValidationError(where + ": expected an object");
    const auto it = doc.find("schema_version");
    if (it != doc.end() && (!it->is_number_integer() || it->get<int>() != kSchemaVersion))
        throw ValidationError(where + ".schema_version: unsupported (expected " + std::to_string(kSchemaVersion) + ")");
}

std::vector<double> number_list(const json& v, const std::string& where) {
    if (!v.is_array()) throw ValidationError(where + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(number(v[i], where + "[" + std::to_string(i) + "]"));
    return out;
}

json parse_json(const std::filesystem::path& path) {
    const std::string body = read_text(path);
    try {
        return json::parse(body);
    } catch (const json::parse_error& e) {
        throw ValidationError(path.string() + ": malformed JSON: " + e.what());
    }
}

std::string csv_cell(std::string_view s) {
    if (s.find_first_of(",\"\n") == std::string_view::npos) return std::string(s);
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

}  // namespace

// ---------------------------------------------------------------------------

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string() + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path.string());
    return ss.str();
}

void write_text(const std::filesystem::path& path, const std::string& body) {
    std::error_code ec;
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path(), ec);
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out.write(body.data(), static_cast<std::streamsize>(body.size()));
    out.close();
    if (!out) throw IoError("write failure on " + path.string());
}

std::string format_number(double value) {
    if (std::isnan(value)) return "nan";
    if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
    if (value == std::trunc(value) && std::abs(value) < 1e15) {
        char buf[32];
        const auto r = std::to_chars(buf, buf + sizeof buf, static_cast<long long>(value));
        return std::string(buf, r.ptr);
    }
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, value, std::chars_format::general, 17);
    return std::string(buf, r.ptr);
}

// ---------------------------------------------------------------------------

MarketHistory parse_prices(std::istream& in, PriceLayout layout, const std::string& source) {
    std::string line;
    std::size_t row = 1;
    if (!std::getline(in, line)) throw ValidationError(source + ": empty price file");
    const auto header = split(line);

    std::vector<std::string> order;
    std::map<std::string, std::map<long, Cell>> cells;
    auto put = [&](const std::string& id, long month, double price) {
        auto [it, fresh] = cells.try_emplace(id);
        if (fresh) order.push_back(id);
        if (!it->second.emplace(month, Cell{price, row}).second)
            throw ValidationError(at_row(source, row) + "duplicate date for asset '" + id + "'");
    };

    if (layout == PriceLayout::Long) {
        if (header.size() != 3 || lower(header[0]) != "date" || lower(header[1]) != "asset_id" ||
            lower(header[2]) != "price")
            throw ValidationError(source + ":1: header must be date,asset_id,price");
        while (std::getline(in, line)) {
            ++row;
            if (trim(line).empty()) continue;
            const auto f = split(line);
            if (f.size() != 3) throw ValidationError(at_row(source, row) + "expected 3 fields");
            if (f[1].empty()) throw ValidationError(at_row(source, row) + "empty asset_id");
            put(std::string(f[1]), parse_month_end(f[0], at_row(source, row)),
                positive_price(f[2], at_row(source, row)));
        }
    } else {
        if (header.size() < 2 || lower(header[0]) != "date")
            throw ValidationError(source + ":1: header must be date,<asset>,...");
        for (std::size_t c = 1; c < header.size(); ++c) {
            if (header[c].empty()) throw ValidationError(source + ":1: empty asset name in column " + std::to_string(c + 1));
            if (cells.contains(std::string(header[c])))
                throw ValidationError(source + ":1: duplicate asset '" + std::string(header[c]) + "'");
            cells[std::string(header[c])];
            order.emplace_back(header[c]);
        }
        while (std::getline(in, line)) {
            ++row;
            if (trim(line).empty()) continue;
            const auto f = split(line);
            if (f.size() != header.size())
                throw ValidationError(at_row(source, row) + "expected " + std::to_string(header.size()) + " fields");
            const long month = parse_month_end(f[0], at_row(source, row));
            for (std::size_t c = 1; c < f.size(); ++c) {
                if (f[c].empty())
                    throw ValidationError(at_row(source, row) + "missing price for '" + order[c - 1] + "'");
                auto& series = cells[order[c - 1]];
                if (!series.emplace(month, Cell{positive_price(f[c], at_row(source, row)), row}).second)
                    throw ValidationError(at_row(source, row) + "duplicate date");
            }
        }
        for (const auto& id : order)
            if (cells[id].empty()) throw ValidationError(source + ": no price rows");
    }
    return assemble(source, order, cells);
}

MarketHistory load_prices(const std::filesystem::path& path, PriceLayout layout) {
    std::istringstream in(read_text(path));
    return parse_prices(in, layout, path.string());
}

void write_prices(const MarketHistory& history, const std::filesystem::path& path) {
    std::string out = "date,asset_id,price\n";
    for (std::size_t k = 0; k < history.n_points(); ++k) {
        const std::string date = format_date(history.grid.date_at(k));
        for (std::size_t a = 0; a < history.n_assets(); ++a)
            out += date + "," + history.asset_ids[a] + "," +
                   format_number(history.prices(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(a))) + "\n";
    }
    write_text(path, out);
}

// ---------------------------------------------------------------------------

CmaParameters cma_from_json(const json& doc) {
    check_schema(doc, "cma");
    const json& assets = field(doc, "assets", "cma");
    if (!assets.is_array() || assets.empty()) throw ValidationError("cma.assets: expected a non-empty array");
    const auto n = static_cast<Eigen::Index>(assets.size());
    CmaParameters cma;
    cma.mu_annual.resize(n);
    cma.sigma_annual.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const std::string where = "cma.assets[" + std::to_string(i) + "]";
        const json& a = assets[static_cast<std::size_t>(i)];
        cma.asset_ids.push_back(text(field(a, "id", where), where + ".id"));
        const auto cls = a.find("class");
        try {
            cma.asset_classes.push_back(cls == a.end() ? AssetClass::Equity
                                                       : asset_class_from_string(text(*cls, where + ".class")));
        } catch (const ValidationError& e) {
            throw ValidationError(where + ".class: " + e.what());
        }
        cma.mu_annual(i) = number(field(a, "mu", where), where + ".mu");
        cma.sigma_annual(i) = number(field(a, "sigma", where), where + ".sigma");
        if (!(cma.sigma_annual(i) > 0.0)) throw ValidationError(where + ".sigma: must be positive");
    }
    std::vector<std::string> sorted = cma.asset_ids;
    std::sort(sorted.begin(), sorted.end());
    if (std::adjacent_find(sorted.begin(), sorted.end()) != sorted.end())
        throw ValidationError("cma.assets: duplicate asset id");

    const auto rho = doc.find("correlation");
    if (rho == doc.end()) {
        if (n != 1) throw ValidationError("cma.correlation: missing");
        cma.correlation = Eigen::MatrixXd::Identity(1, 1);
    } else {
        if (!rho->is_array() || rho->size() != assets.size())
            throw ValidationError("cma.correlation: expected " + std::to_string(n) + " rows");
        cma.correlation.resize(n, n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const std::string where = "cma.correlation[" + std::to_string(i) + "]";
            const auto r = number_list((*rho)[static_cast<std::size_t>(i)], where);
            if (static_cast<Eigen::Index>(r.size()) != n)
                throw ValidationError(where + ": expected " + std::to_string(n) + " entries");
            for (Eigen::Index j = 0; j < n; ++j) cma.correlation(i, j) = r[static_cast<std::size_t>(j)];
        }
    }
    const CmaValidation v = validate_cma(cma);
    if (!v.ok()) {
        const std::string msg = "cma: " + v.message;
        if (v.issue == CmaValidation::Issue::NotPositiveDefinite)
            throw NotPositiveDefiniteError(msg, v.min_eigenvalue.value_or(0.0));
        throw ValidationError(msg);
    }
    return cma;
}

json cma_to_json(const CmaParameters& cma) {
    json doc{{"schema_version", kSchemaVersion}, {"assets", json::array()}, {"correlation", json::array()}};
    for (std::size_t a = 0; a < cma.size(); ++a) {
        const auto i = static_cast<Eigen::Index>(a);
        doc["assets"].push_back({{"id", cma.asset_ids[a]},
                                 {"class", std::string(to_string(cma.asset_classes[a]))},
                                 {"mu", cma.mu_annual(i)},
                                 {"sigma", cma.sigma_annual(i)}});
        json row = json::array();
        for (Eigen::Index j = 0; j < cma.correlation.cols(); ++j) row.push_back(cma.correlation(i, j));
        doc["correlation"].push_back(std::move(row));
    }
    return doc;
}

CmaParameters load_cma(const std::filesystem::path& path) {
    try {
        return cma_from_json(parse_json(path));
    } catch (const NotPositiveDefiniteError& e) {
        throw NotPositiveDefiniteError(path.string() + ": " + e.what(), e.eigenvalue());
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
}

void write_cma(const CmaParameters& cma, const std::filesystem::path& path) {
    write_text(path, cma_to_json(cma).dump(2) + "\n");
}

// ---------------------------------------------------------------------------

ProcessSpec spec_from_json(const json& doc, const std::string& where) {
    check_schema(doc, where);
    ProcessSpec spec;
    if (const auto it = doc.find("name"); it != doc.end()) spec.name = text(*it, where + ".name");

    if (const auto drift = doc.find("drift"); drift != doc.end()) {
        const std::string w = where + ".drift";
        if (!drift->is_object()) throw ValidationError(w + ": expected an object");
        if (const auto du = drift->find("du"); du != drift->end()) {
            if (du->is_boolean()) {
                if (du->get<bool>()) spec.du = DuConfig{};
            } else if (du->is_object()) {
                spec.du = DuConfig{};
                if (const auto c = du->find("calibration_years"); c != du->end())
                    spec.du->calibration_years = number(*c, w + ".du.calibration_years");
            } else if (!du->is_null()) {
                throw ValidationError(w + ".du: expected an object or a boolean");
            }
        }
        if (const auto nrc = drift->find("nrc"); nrc != drift->end()) {
            if (nrc->is_boolean()) {
                if (nrc->get<bool>()) spec.nrc = NrcConfig::defaults();
            } else if (nrc->is_object()) {
                spec.nrc = NrcConfig{};
                for (const auto& [cls_name, list] : nrc->items()) {
                    const std::string wc = w + ".nrc." + cls_name;
                    AssetClass cls;
                    try {
                        cls = asset_class_from_string(cls_name);
                    } catch (const ValidationError& e) {
                        throw ValidationError(wc + ": " + e.what());
                    }
                    if (!list.is_array()) throw ValidationError(wc + ": expected an array");
                    auto& out = spec.nrc->horizons[cls];
                    for (std::size_t i = 0; i < list.size(); ++i) {
                        const std::string wi = wc + "[" + std::to_string(i) + "]";
                        out.push_back({count(field(list[i], "steps", wi), wi + ".steps"),
                                       number(field(list[i], "gamma", wi), wi + ".gamma")});
                    }
                }
            } else if (!nrc->is_null()) {
                throw ValidationError(w + ".nrc: expected an object or a boolean");
            }
        }
    }

    if (const auto cov = doc.find("covariance"); cov != doc.end()) {
        const std::string w = where + ".covariance";
        if (!cov->is_object()) throw ValidationError(w + ": expected an object");
        if (const auto m = cov->find("model"); m != cov->end()) {
            const std::string model = lower(text(*m, w + ".model"));
            if (model == "constant") spec.covariance.model = CovarianceModel::Constant;
            else if (model == "lmarch") spec.covariance.model = CovarianceModel::AffineLmarch;
            else throw ValidationError(w + ".model: expected \"constant\" or \"lmarch\"");
        }
        if (const auto wi = cov->find("w_inf"); wi != cov->end() && !wi->is_null()) {
            spec.covariance.w_inf = number(*wi, w + ".w_inf");
            if (!(*spec.covariance.w_inf >= 0.0 && *spec.covariance.w_inf <= 1.0))
                throw ValidationError(w + ".w_inf: must lie in [0, 1]");
        }
        if (const auto k = cov->find("kernel"); k != cov->end()) {
            if (!k->is_object()) throw ValidationError(w + ".kernel: expected an object");
            if (const auto t = k->find("taus"); t != k->end()) spec.covariance.kernel.taus = number_list(*t, w + ".kernel.taus");
            if (const auto l = k->find("l_max"); l != k->end()) spec.covariance.kernel.l_max = count(*l, w + ".kernel.l_max");
            if (const auto d = k->find("decay"); d != k->end()) spec.covariance.kernel.decay = number(*d, w + ".kernel.decay");
        }
    }

    if (const auto inn = doc.find("innovations"); inn != doc.end()) {
        const std::string w = where + ".innovations";
        if (!inn->is_object()) throw ValidationError(w + ": expected an object");
        if (const auto m = inn->find("model"); m != inn->end()) {
            const std::string model = lower(text(*m, w + ".model"));
            if (model == "normal") spec.innovations.model = InnovationModel::Normal;
            else if (model == "student") spec.innovations.model = InnovationModel::NonCentralStudent;
            else throw ValidationError(w + ".model: expected \"normal\" or \"student\"");
        }
        if (const auto nu = inn->find("nu"); nu != inn->end()) spec.innovations.nu = number(*nu, w + ".nu");
        if (const auto g = inn->find("gamma_by_class"); g != inn->end()) {
            if (!g->is_object()) throw ValidationError(w + ".gamma_by_class: expected an object");
            for (const auto& [cls_name, v] : g->items()) {
                try {
                    spec.innovations.gamma_by_class[asset_class_from_string(cls_name)] =
                        number(v, w + ".gamma_by_class." + cls_name);
                } catch (const ValidationError& e) {
                    throw ValidationError(w + ".gamma_by_class." + cls_name + ": " + e.what());
                }
            }
        }
        if (const auto g = inn->find("gamma_asym"); g != inn->end() && !g->is_null())
            spec.innovations.gamma_asym = number_list(*g, w + ".gamma_asym");
    }

    if (const auto f = doc.find("p_min_fraction"); f != doc.end()) spec.p_min_fraction = number(*f, where + ".p_min_fraction");
    if (const auto a = doc.find("p_min_absolute"); a != doc.end() && !a->is_null())
        spec.p_min_absolute = number(*a, where + ".p_min_absolute");

    try {
        validate_spec(spec);
    } catch (const ValidationError& e) {
        throw ValidationError(where + "." + e.what());
    }
    return spec;
}

json spec_to_json(const ProcessSpec& spec) {
    json doc{{"schema_version", kSchemaVersion}, {"name", spec.name}};
    json drift = json::object();
    drift["du"] = spec.du ? json{{"calibration_years", spec.du->calibration_years}} : json(false);
    if (spec.nrc) {
        json nrc = json::object();
        for (const auto& [cls, list] : spec.nrc->horizons) {
            json arr = json::array();
            for (const auto& h : list) arr.push_back({{"steps", h.steps}, {"gamma", h.gamma}});
            nrc[std::string(to_string(cls))] = std::move(arr);
        }
        drift["nrc"] = std::move(nrc);
    } else {
        drift["nrc"] = false;
    }
    doc["drift"] = std::move(drift);

    json cov{{"model", spec.covariance.model == CovarianceModel::AffineLmarch ? "lmarch" : "constant"},
             {"kernel",
              {{"taus", spec.covariance.kernel.taus},
               {"l_max", spec.covariance.kernel.l_max},
               {"decay", spec.covariance.kernel.decay}}}};
    cov["w_inf"] = spec.covariance.w_inf ? json(*spec.covariance.w_inf) : json(nullptr);
    doc["covariance"] = std::move(cov);

    json inn{{"model", spec.innovations.model == InnovationModel::NonCentralStudent ? "student" : "normal"},
             {"nu", spec.innovations.nu}};
    json g = json::object();
    for (const auto& [cls, v] : spec.innovations.gamma_by_class) g[std::string(to_string(cls))] = v;
    inn["gamma_by_class"] = std::move(g);
    inn["gamma_asym"] = spec.innovations.gamma_asym ? json(*spec.innovations.gamma_asym) : json(nullptr);
    doc["innovations"] = std::move(inn);

    doc["p_min_fraction"] = spec.p_min_fraction;
    doc["p_min_absolute"] = spec.p_min_absolute ? json(*spec.p_min_absolute) : json(nullptr);
    return doc;
}

std::vector<ProcessSpec> load_specs(const std::filesystem::path& path) {
    const json doc = parse_json(path);
    std::vector<ProcessSpec> out;
    try {
        if (doc.is_object() && doc.contains("processes")) {
            check_schema(doc, "spec");
            const json& list = doc["processes"];
            if (!list.is_array() || list.empty()) throw ValidationError("spec.processes: expected a non-empty array");
            for (std::size_t i = 0; i < list.size(); ++i)
                out.push_back(spec_from_json(list[i], "spec.processes[" + std::to_string(i) + "]"));
        } else {
            out.push_back(spec_from_json(doc));
        }
    } catch (const ValidationError& e) {
        throw ValidationError(path.string() + ": " + e.what());
    }
    return out;
}

ProcessSpec load_spec(const std::filesystem::path& path) {
    auto specs = load_specs(path);
    if (specs.size() != 1)
        throw ValidationError(path.string() + ": expected one process, found " + std::to_string(specs.size()));
    return std::move(specs.front());
}

void write_specs(const std::vector<ProcessSpec>& specs, const std::filesystem::path& path) {
    json doc{{"schema_version", kSchemaVersion}, {"processes", json::array()}};
    for (const auto& s : specs) doc["processes"].push_back(spec_to_json(s));
    write_text(path, doc.dump(2) + "\n");
}

json grid_to_json(const TimeGrid& grid) {
    return {{"step_years", grid.step_years()}, {"n_steps", grid.n_steps()}, {"origin", format_date(grid.origin())}};
}

TimeGrid grid_from_json(const json& doc) {
    return TimeGrid(number(field(doc, "step_years", "grid"), "grid.step_years"),
                    count(field(doc, "n_steps", "grid"), "grid.n_steps"),
                    parse_date_field(text(field(doc, "origin", "grid"), "grid.origin"), "grid.origin"));
}

// ---------------------------------------------------------------------------

CmaParameters estimate_cma(const MarketHistory& history, std::vector<AssetClass> classes, double eps_min) {
    const std::size_t n = history.n_assets();
    if (n == 0) throw ValidationError("history has no assets");
    if (history.n_points() < 25) throw InsufficientDataError("CMA estimation needs at least 24 monthly returns");
    if (!history.grid.is_monthly()) throw ValidationError("CMA estimation expects a monthly grid");
    if (!classes.empty() && classes.size() != n) throw ValidationError("one asset class per asset is required");
    if (classes.empty()) classes.assign(n, AssetClass::Equity);

    const Eigen::Index t = history.prices.rows() - 1;
    const Eigen::MatrixXd r =
        (history.prices.bottomRows(t).array() / history.prices.topRows(t).array() - 1.0).matrix();
    const double periods = 1.0 / history.grid.step_years();

    CmaParameters cma;
    cma.asset_ids = history.asset_ids;
    cma.asset_classes = std::move(classes);
    const Eigen::RowVectorXd mean = r.colwise().mean();
    cma.mu_annual = periods * mean.transpose();
    cma.sigma_annual = (periods * r.array().square().colwise().mean()).sqrt().matrix().transpose();
    const Eigen::MatrixXd centered = r.rowwise() - mean;
    const Eigen::MatrixXd cov = centered.transpose() * centered;
    const Eigen::VectorXd sd = cov.diagonal().array().sqrt();
    for (Eigen::Index i = 0; i < sd.size(); ++i)
        if (!(sd(i) > 0.0)) throw ValidationError("asset '" + cma.asset_ids[static_cast<std::size_t>(i)] + "' has constant returns");
    cma.correlation = sd.asDiagonal().inverse() * cov * sd.asDiagonal().inverse();
    cma.correlation.diagonal().setOnes();
    cma.correlation = 0.5 * (cma.correlation + cma.correlation.transpose());
    require_valid(cma, eps_min);
    return cma;
}

std::string spec_hash(const ProcessSpec& spec, const CmaParameters& cma) {
    const std::string body = spec_to_json(spec).dump() + "\n" + cma_to_json(cma).dump();
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : body) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// ---------------------------------------------------------------------------

std::vector<std::filesystem::path> write_ensemble(const EnsembleResult& result, const std::filesystem::path& prefix) {
    const std::filesystem::path csv_path = prefix.string() + ".csv";
    const std::filesystem::path json_path = prefix.string() + ".json";

    std::string csv = "path,step";
    for (const auto& id : result.cma.asset_ids) csv += "," + csv_cell(id);
    csv += "\n";
    csv.reserve(csv.size() + result.prices.size() * 20);
    for (std::size_t p = 0; p < result.n_paths; ++p) {
        for (std::size_t k = 0; k < result.n_points(); ++k) {
            csv += std::to_string(p);
            csv += ',';
            csv += std::to_string(result.steps[k]);
            for (std::size_t a = 0; a < result.n_assets(); ++a) {
                csv += ',';
                csv += format_number(result.price(p, k, a));
            }
            csv += '\n';
        }
    }

    json faults = json::array();
    for (const auto& f : result.faults) faults.push_back({{"path", f.path}, {"step", f.step}, {"message", f.message}});
    const json manifest{{"schema_version", kSchemaVersion},
                        {"kind", "ensemble"},
                        {"seed", result.master_seed},
                        {"spec_hash", spec_hash(result.spec, result.cma)},
                        {"grid", grid_to_json(result.grid)},
                        {"n_paths", result.n_paths},
                        {"steps", result.steps},
                        {"seeded_history", result.seeded_history},
                        {"partial", result.partial()},
                        {"faults", faults},
                        {"data", csv_path.filename().string()},
                        {"process", spec_to_json(result.spec)},
                        {"cma", cma_to_json(result.cma)}};
    write_text(csv_path, csv);
    write_text(json_path, manifest.dump(2) + "\n");
    return {csv_path, json_path};
}

EnsembleResult load_ensemble(const std::filesystem::path& prefix) {
    const std::filesystem::path json_path = prefix.string() + ".json";
    const json m = parse_json(json_path);
    EnsembleResult r;
    try {
        check_schema(m, "ensemble");
        r.spec = spec_from_json(field(m, "process", "ensemble"), "ensemble.process");
        r.cma = cma_from_json(field(m, "cma", "ensemble"));
        r.grid = grid_from_json(field(m, "grid", "ensemble"));
        r.master_seed = field(m, "seed", "ensemble").get<std::uint64_t>();
        r.n_paths = count(field(m, "n_paths", "ensemble"), "ensemble.n_paths");
        r.seeded_history = field(m, "seeded_history", "ensemble").get<bool>();
        r.steps = field(m, "steps", "ensemble").get<std::vector<std::size_t>>();
        for (const auto& f : field(m, "faults", "ensemble"))
            r.faults.push_back({f.at("path").get<std::size_t>(), f.at("step").get<std::size_t>(),
                                f.at("message").get<std::string>()});
    } catch (const json::exception& e) {
        throw ValidationError(json_path.string() + ": " + e.what());
    } catch (const ValidationError& e) {
        throw ValidationError(json_path.string() + ": " + e.what());
    }

    const std::filesystem::path csv_path =
        prefix.parent_path() / text(field(m, "data", "ensemble"), "ensemble.data");
    std::istringstream in(read_text(csv_path));
    std::string line;
    std::getline(in, line);
    const std::size_t n = r.cma.size();
    const std::size_t points = r.steps.size();
    r.prices.assign(r.n_paths * points * n, 0.0);
    std::size_t row = 1;
    std::size_t filled = 0;
    while (std::getline(in, line)) {
        ++row;
        if (trim(line).empty()) continue;
        const auto f = split(line);
        const std::string where = at_row(csv_path.string(), row);
        if (f.size() != n + 2) throw ValidationError(where + "expected " + std::to_string(n + 2) + " fields");
        const auto p = parse_double(f[0]);
        const auto s = parse_double(f[1]);
        if (!p || !s || *p < 0 || static_cast<std::size_t>(*p) >= r.n_paths)
            throw ValidationError(where + "path index out of range");
        const auto point = r.point_of_step(static_cast<std::size_t>(*s));
        if (!point) throw ValidationError(where + "step is not listed in the manifest");
        double* dst = r.prices.data() + (static_cast<std::size_t>(*p) * points + *point) * n;
        for (std::size_t a = 0; a < n; ++a) {
            const auto v = parse_double(f[a + 2]);
            if (!v) throw ValidationError(where + "price is not a number");
            dst[a] = *v;
        }
        ++filled;
    }
    if (filled != r.n_paths * points)
        throw ValidationError(csv_path.string() + ": expected " + std::to_string(r.n_paths * points) + " rows, found " +
                              std::to_string(filled));
    return r;
}

std::vector<std::filesystem::path> write_report(const StatReport& report, const std::filesystem::path& directory) {
    std::error_code ec;
    std::filesystem::create_directories(directory, ec);
    if (ec) throw IoError("cannot create " + directory.string() + ": " + ec.message());

    std::vector<std::filesystem::path> files;
    json curves = json::array();
    for (const auto& c : report.curves) {
        std::string stem = c.name;
        for (char& ch : stem)
            if (!std::isalnum(static_cast<unsigned char>(ch)) && ch != '-' && ch != '_' && ch != '.') ch = '_';
        const std::filesystem::path file = directory / (stem + ".csv");
        std::string csv;
        const bool labelled = !c.labels.empty();
        if (labelled) csv += "label,";
        for (std::size_t i = 0; i < c.columns.size(); ++i) csv += (i ? "," : "") + c.columns[i];
        csv += "\n";
        for (std::size_t r = 0; r < c.rows.size(); ++r) {
            if (labelled) csv += csv_cell(c.labels[r]) + ",";
            for (std::size_t i = 0; i < c.rows[r].size(); ++i) csv += (i ? "," : "") + format_number(c.rows[r][i]);
            csv += "\n";
        }
        write_text(file, csv);
        files.push_back(file);
        curves.push_back({{"name", c.name},
                          {"file", file.filename().string()},
                          {"columns", c.columns},
                          {"rows", c.rows.size()},
                          {"notes", c.notes}});
    }
    const json manifest{{"schema_version", kSchemaVersion},
                        {"kind", "report"},
                        {"statistic", report.statistic},
                        {"metadata", report.metadata},
                        {"curves", curves}};
    const std::filesystem::path manifest_path = directory / "report.json";
    write_text(manifest_path, manifest.dump(2) + "\n");
    files.push_back(manifest_path);
    return files;
}

}  // namespace ltsim
