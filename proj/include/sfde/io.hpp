#pragma once

#include <Eigen/Dense>
#include <array>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "sfde/delay_measure.hpp"
#include "sfde/model.hpp"
#include "sfde/montecarlo.hpp"
#include "sfde/rng.hpp"
#include "sfde/simulate.hpp"

namespace sfde {

inline constexpr std::string_view library_version = "0.1.0";

/// Raised for malformed configs and input files; the CLI maps it to exit 2.
class config_error : public std::runtime_error {
  public:
    using std::runtime_error::runtime_error;
};

namespace io {

/// Shortest round-trip decimal representation.
inline std::string format_double(double v) {
    std::array<char, 40> buf{};
    const auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), res.ptr);
}

inline double parse_double(std::string_view text, const std::string& context) {
    double v = 0.0;
    const char* first = text.data();
    const char* last = text.data() + text.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc() || res.ptr != last) {
        throw config_error("non-numeric value '" + std::string(text) + "' in " + context);
    }
    return v;
}

/// FNV-1a 64-bit hash; used to fingerprint configs in run manifests.
inline std::uint64_t fnv1a64(std::string_view bytes) {
    std::uint64_t h = UINT64_C(0xcbf29ce484222325);
    for (unsigned char b : bytes) {
        h ^= b;
        h *= UINT64_C(0x100000001b3);
    }
    return h;
}

// ---------------------------------------------------------------------------
// Path CSV:  one metadata comment line, a header row, then t,x1..xd rows.
// ---------------------------------------------------------------------------

inline void write_path_csv(std::ostream& out, const PathGrid& path) {
    out << "# n=" << path.n << ", delta=" << format_double(path.delta)
        << ", epsilon=" << format_double(path.epsilon) << ", seed=" << path.seed
        << ", scheme=" << path.scheme << ", rng=" << rng_algorithm_name << "\n";
    out << "t";
    for (int i = 1; i <= path.d(); ++i) {
        out << ",x" << i;
    }
    out << "\n";
    for (int k = -path.history_len; k <= path.n; ++k) {
        out << format_double(path.time_of(k));
        const Eigen::VectorXd& x = path.at(k);
        for (int i = 0; i < path.d(); ++i) {
            out << ',' << format_double(x[i]);
        }
        out << "\n";
    }
}

inline PathGrid read_path_csv(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# ", 0) != 0) {
        throw config_error("path csv: missing metadata header line");
    }
    PathGrid path;
    {
        std::istringstream meta(line.substr(2));
        std::string item;
        while (std::getline(meta, item, ',')) {
            const auto eq = item.find('=');
            if (eq == std::string::npos) {
                continue;
            }
            std::string key = item.substr(0, eq);
            std::string value = item.substr(eq + 1);
            key.erase(0, key.find_first_not_of(' '));
            if (key == "n") {
                path.n = static_cast<int>(parse_double(value, "path metadata n"));
            } else if (key == "delta") {
                path.delta = parse_double(value, "path metadata delta");
            } else if (key == "epsilon") {
                path.epsilon = parse_double(value, "path metadata epsilon");
            } else if (key == "seed") {
                std::uint64_t seed = 0;
                const auto res = std::from_chars(value.data(), value.data() + value.size(), seed);
                if (res.ec != std::errc()) {
                    throw config_error("path csv: bad seed in metadata");
                }
                path.seed = seed;
            } else if (key == "scheme") {
                path.scheme = value;
            }
        }
    }
    if (path.n < 1 || !(path.delta > 0.0)) {
        throw config_error("path csv: metadata must carry n >= 1 and delta > 0");
    }
    if (!std::getline(in, line)) {
        throw config_error("path csv: missing column header");
    }
    int columns = 0;
    for (char ch : line) {
        if (ch == ',') {
            ++columns;
        }
    }
    if (columns < 1) {
        throw config_error("path csv: expected columns t,x1,...");
    }
    const int d = columns;

    path.history_len = delay_steps(path.n, path.delta);
    const int expected_rows = path.history_len + path.n + 1;
    std::vector<Eigen::VectorXd> values;
    values.reserve(expected_rows);
    int row = 0;
    while (std::getline(in, line)) {
        if (line.empty()) {
            continue;
        }
        ++row;
        std::istringstream cells(line);
        std::string cell;
        std::ostringstream ctx;
        ctx << "path csv row " << row;
        if (!std::getline(cells, cell, ',')) {
            throw config_error("path csv: empty row " + std::to_string(row));
        }
        (void)parse_double(cell, ctx.str());  // time column, re-derived from the grid
        Eigen::VectorXd x(d);
        for (int i = 0; i < d; ++i) {
            if (!std::getline(cells, cell, ',')) {
                throw config_error("path csv: too few cells in row " + std::to_string(row));
            }
            x[i] = parse_double(cell, ctx.str());
        }
        values.push_back(std::move(x));
    }
    if (static_cast<int>(values.size()) != expected_rows) {
        std::ostringstream msg;
        msg << "path csv: expected " << expected_rows << " data rows, found " << values.size();
        throw config_error(msg.str());
    }
    path.values = std::move(values);
    return path;
}

// ---------------------------------------------------------------------------
// Experiment outputs
// ---------------------------------------------------------------------------

inline std::vector<std::string> coordinate_names(int p, int q) {
    std::vector<std::string> names;
    for (int i = 1; i <= p; ++i) {
        names.push_back("alpha" + std::to_string(i));
    }
    for (int j = 1; j <= q; ++j) {
        names.push_back("beta" + std::to_string(j));
    }
    return names;
}

inline void write_summary_csv(std::ostream& out, const MonteCarloSummary& summary) {
    const auto names = coordinate_names(summary.p, summary.q);
    out << "n,epsilon,coord,mean,sd,failures\n";
    for (const auto& cell : summary.cells) {
        for (std::size_t c = 0; c < names.size(); ++c) {
            out << cell.n << ',' << format_double(cell.epsilon) << ',' << names[c] << ','
                << format_double(cell.mean[static_cast<Eigen::Index>(c)]) << ','
                << format_double(cell.sd[static_cast<Eigen::Index>(c)]) << ','
                << cell.failure_count << "\n";
        }
    }
}

inline void write_qq_csv(std::ostream& out, const std::string& kind,
                         const std::vector<std::pair<double, double>>& pairs) {
    out << "kind,theoretical,sample\n";
    for (const auto& [theo, sample] : pairs) {
        out << kind << ',' << format_double(theo) << ',' << format_double(sample) << "\n";
    }
}

inline void write_chi2_samples_csv(std::ostream& out, const std::vector<double>& samples) {
    out << "chi2\n";
    for (double s : samples) {
        out << format_double(s) << "\n";
    }
}

inline void write_estimate_csv(std::ostream& out, int p, int q, const Eigen::VectorXd& theta,
                               double contrast_value, bool converged) {
    const auto names = coordinate_names(p, q);
    for (std::size_t i = 0; i < names.size(); ++i) {
        out << names[i] << ',';
    }
    out << "contrast,converged\n";
    for (Eigen::Index i = 0; i < theta.size(); ++i) {
        out << format_double(theta[i]) << ',';
    }
    out << format_double(contrast_value) << ',' << (converged ? 1 : 0) << "\n";
}

inline void write_manifest(std::ostream& out, std::string_view command, std::uint64_t config_hash,
                           std::uint64_t master_seed) {
    out << "command=" << command << "\n"
        << "config_hash=0x" << std::hex << config_hash << std::dec << "\n"
        << "master_seed=" << master_seed << "\n"
        << "version=" << library_version << "\n"
        << "rng_algorithm=" << rng_algorithm_name << "\n";
}

// ---------------------------------------------------------------------------
// Experiment config (JSON document, strict schema)
// ---------------------------------------------------------------------------

struct SimulateSection {
    int n = 0;
    double epsilon = 0.0;
    std::uint64_t seed = 0;
    int substeps = 1;
};

struct MonteCarloSection {
    std::vector<std::pair<int, double>> grid;
    int replications = 1;
    std::uint64_t master_seed = 0;
    EstimatorKind estimator = EstimatorKind::closed_form;
    bool warm_start = false;
};

struct AppConfig {
    std::string model = "benchmark2d";
    Eigen::VectorXd theta_true;
    std::optional<DelayMeasure> delay_override;
    std::optional<SimulateSection> simulate;
    std::optional<MonteCarloSection> montecarlo;
    std::string output_dir = ".";
    int workers = 1;
    int verbosity = 0;
    std::uint64_t config_hash = 0;
};

namespace detail {

inline void require_keys(const nlohmann::json& obj, const std::string& where,
                         std::initializer_list<std::string_view> allowed) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool known = false;
        for (std::string_view a : allowed) {
            if (key == a) {
                known = true;
                break;
            }
        }
        if (!known) {
            throw config_error("config: unknown key '" + key + "' in " + where);
        }
    }
}

template <class T>
T require_field(const nlohmann::json& obj, const std::string& where, const char* key) {
    if (!obj.contains(key)) {
        throw config_error("config: missing key '" + std::string(key) + "' in " + where);
    }
    try {
        return obj.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw config_error("config: key '" + std::string(key) + "' in " + where +
                           " has the wrong type");
    }
}

inline DelayMeasure parse_delay(const nlohmann::json& obj) {
    require_keys(obj, "delay", {"delta", "atoms", "density"});
    const double delta = require_field<double>(obj, "delay", "delta");
    std::vector<std::pair<double, double>> atoms;
    if (obj.contains("atoms")) {
        for (const auto& a : obj.at("atoms")) {
            if (!a.is_array() || a.size() != 2) {
                throw config_error("config: delay.atoms entries must be [location, mass]");
            }
            atoms.emplace_back(a.at(0).get<double>(), a.at(1).get<double>());
        }
    }
    std::vector<DelayMeasure::DensityPiece> density;
    if (obj.contains("density")) {
        for (const auto& piece : obj.at("density")) {
            if (!piece.is_array() || piece.size() != 3) {
                throw config_error("config: delay.density entries must be [a, b, height]");
            }
            density.push_back({piece.at(0).get<double>(), piece.at(1).get<double>(),
                               piece.at(2).get<double>()});
        }
    }
    try {
        return DelayMeasure(delta, std::move(atoms), std::move(density));
    } catch (const std::invalid_argument& e) {
        throw config_error(std::string("config: invalid delay measure: ") + e.what());
    }
}

} // namespace detail

inline AppConfig parse_config(const std::string& text) {
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
        throw config_error(std::string("config: ") + e.what());
    }
    if (!doc.is_object()) {
        throw config_error("config: top level must be an object");
    }
    detail::require_keys(doc, "top level",
                         {"model", "theta_true", "delay", "simulate", "montecarlo", "output_dir",
                          "workers", "verbosity"});

    AppConfig cfg;
    cfg.config_hash = fnv1a64(text);
    cfg.model = detail::require_field<std::string>(doc, "top level", "model");
    if (cfg.model != "benchmark2d") {
        throw config_error("config: unknown model '" + cfg.model +
                           "' (only 'benchmark2d' is config-selectable)");
    }
    const auto theta = detail::require_field<std::vector<double>>(doc, "top level", "theta_true");
    cfg.theta_true = Eigen::Map<const Eigen::VectorXd>(theta.data(),
                                                       static_cast<Eigen::Index>(theta.size()));

    if (doc.contains("delay")) {
        cfg.delay_override = detail::parse_delay(doc.at("delay"));
    }
    if (doc.contains("simulate")) {
        const auto& sim = doc.at("simulate");
        detail::require_keys(sim, "simulate", {"n", "epsilon", "seed", "substeps"});
        SimulateSection s;
        s.n = detail::require_field<int>(sim, "simulate", "n");
        s.epsilon = detail::require_field<double>(sim, "simulate", "epsilon");
        s.seed = detail::require_field<std::uint64_t>(sim, "simulate", "seed");
        s.substeps = sim.contains("substeps") ? sim.at("substeps").get<int>() : 1;
        cfg.simulate = s;
    }
    if (doc.contains("montecarlo")) {
        const auto& mc = doc.at("montecarlo");
        detail::require_keys(mc, "montecarlo",
                             {"grid", "replications", "master_seed", "estimator", "warm_start"});
        MonteCarloSection m;
        if (!mc.contains("grid") || !mc.at("grid").is_array() || mc.at("grid").empty()) {
            throw config_error("config: montecarlo.grid must be a nonempty array");
        }
        for (const auto& cell : mc.at("grid")) {
            if (!cell.is_object()) {
                throw config_error("config: montecarlo.grid entries must be {n, epsilon} objects");
            }
            detail::require_keys(cell, "montecarlo.grid entry", {"n", "epsilon"});
            m.grid.emplace_back(detail::require_field<int>(cell, "montecarlo.grid entry", "n"),
                                detail::require_field<double>(cell, "montecarlo.grid entry",
                                                              "epsilon"));
        }
        m.replications = detail::require_field<int>(mc, "montecarlo", "replications");
        m.master_seed = detail::require_field<std::uint64_t>(mc, "montecarlo", "master_seed");
        if (mc.contains("estimator")) {
            const auto est = mc.at("estimator").get<std::string>();
            if (est == "closed_form") {
                m.estimator = EstimatorKind::closed_form;
            } else if (est == "optimizer") {
                m.estimator = EstimatorKind::optimizer;
            } else {
                throw config_error("config: montecarlo.estimator must be closed_form or optimizer");
            }
        }
        if (mc.contains("warm_start")) {
            m.warm_start = mc.at("warm_start").get<bool>();
        }
        cfg.montecarlo = m;
    }
    if (doc.contains("output_dir")) {
        cfg.output_dir = doc.at("output_dir").get<std::string>();
    }
    if (doc.contains("workers")) {
        cfg.workers = doc.at("workers").get<int>();
        if (cfg.workers < 1) {
            throw config_error("config: workers must be >= 1");
        }
    }
    if (doc.contains("verbosity")) {
        cfg.verbosity = doc.at("verbosity").get<int>();
    }
    return cfg;
}

inline AppConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) {
        throw config_error("config: cannot open '" + path + "'");
    }
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_config(buffer.str());
}

/// Model named by the config, with the optional delay override applied.
inline ModelSpec model_from_config(const AppConfig& cfg) {
    ModelSpec spec = builtin_benchmark();
    if (cfg.delay_override.has_value()) {
        spec.delay = *cfg.delay_override;
    }
    if (cfg.theta_true.size() != spec.box.dim()) {
        throw config_error("config: theta_true has the wrong dimension for the model");
    }
    return spec;
}

} // namespace io
} // namespace sfde
