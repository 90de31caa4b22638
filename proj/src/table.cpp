#include "qdsq/table.hpp"

#include <charconv>
#include <chrono>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <json.hpp>

#include "qdsq/errors.hpp"

namespace qdsq {

namespace {

std::vector<double> observable_cells(const SweepRow& r) {
    const Observables& o = r.obs;
    return {o.p_out_watts, o.g2, o.var_x, o.var_y, o.dn_rel, o.uncertainty_product, o.squeeze_db,
            r.converged ? 1.0 : 0.0, o.n_mean, o.dn2, o.p_out_photons, std::abs(o.a_mean), std::abs(o.daa)};
}

const std::vector<std::string> observable_header = {"p_out_w",    "g2",        "var_x",     "var_y",
                                                     "dn_rel",     "product",   "squeeze_db", "converged",
                                                     "n_mean",     "dn2",       "p_out_photons", "abs_a",   "abs_daa"};

}  // namespace

Table to_table(const SweepResult& r) {
    Table t;
    const bool pump = r.parameter == SweepParameter::pump;
    const bool by_gamma_c = r.parameter == SweepParameter::gamma_c;
    t.header.push_back(to_string(r.parameter));
    if (!pump) {
        if (!by_gamma_c) t.header.push_back("gamma_c");
        t.header.push_back("pump");
    }
    t.header.insert(t.header.end(), observable_header.begin(), observable_header.end());
    if (pump) t.header.push_back("gamma_c");
    t.header.push_back("coupled_bins");
    t.header.push_back("residual");
    t.header.push_back("states");
    t.header.push_back("symmetry_residual");
    t.header.push_back("population_excess");
    for (const auto& row : r.rows) {
        std::vector<double> cells{row.value};
        if (!pump) {
            if (!by_gamma_c) cells.push_back(row.gamma_c);
            cells.push_back(row.pump);
        }
        const auto obs = observable_cells(row);
        cells.insert(cells.end(), obs.begin(), obs.end());
        if (pump) cells.push_back(row.gamma_c);
        cells.push_back(static_cast<double>(row.coupled_bins));
        cells.push_back(row.residual);
        cells.push_back(static_cast<double>(row.audit.states));
        cells.push_back(row.audit.symmetry_residual);
        cells.push_back(row.audit.population_excess);
        t.rows.push_back(std::move(cells));
    }
    return t;
}

Table to_table(const CavityResult& r) {
    Table t;
    t.header = {"gamma_c", "max_squeeze_db", "max_pump", "onset_pump", "onset_p_out_w"};
    for (double target : r.targets) {
        const std::string tag = "target_" + format_double(target) + "db";
        t.header.push_back(tag + "_pump");
        t.header.push_back(tag + "_p_out_w");
    }
    t.header.push_back("converged");
    t.header.push_back("states");
    t.header.push_back("symmetry_residual");
    t.header.push_back("population_excess");
    for (const auto& row : r.rows) {
        std::vector<double> cells{row.gamma_c, row.max_squeeze_db, row.max_pump, row.onset_pump, row.onset_p_out_w};
        for (std::size_t i = 0; i < r.targets.size(); ++i) {
            cells.push_back(row.target_pump[i]);
            cells.push_back(row.target_p_out_w[i]);
        }
        cells.push_back(row.converged ? 1.0 : 0.0);
        cells.push_back(static_cast<double>(row.audit.states));
        cells.push_back(row.audit.symmetry_residual);
        cells.push_back(row.audit.population_excess);
        t.rows.push_back(std::move(cells));
    }
    return t;
}

void write_table(const Table& t, const std::string& path) {
    for (const auto& row : t.rows)
        if (row.size() != t.header.size()) throw invalid_parameter("table rows are not rectangular");
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write '" + path + "'");
    for (std::size_t i = 0; i < t.header.size(); ++i) f << (i ? "," : "") << t.header[i];
    f << '\n';
    for (const auto& row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i) f << (i ? "," : "") << format_double(row[i]);
        f << '\n';
    }
    f.flush();
    if (!f) throw io_error("failed writing '" + path + "'");
}

Table read_table(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot read '" + path + "'");
    Table t;
    std::string line;
    if (!std::getline(f, line)) throw io_error("'" + path + "' is empty");
    std::stringstream hs(line);
    for (std::string cell; std::getline(hs, cell, ',');) t.header.push_back(cell);
    int line_no = 1;
    while (std::getline(f, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::vector<double> row;
        std::stringstream rs(line);
        for (std::string cell; std::getline(rs, cell, ',');) {
            double x = 0;
            auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), x);
            if (ec != std::errc() || ptr != cell.data() + cell.size())
                throw io_error(path + ":" + std::to_string(line_no) + ": bad number '" + cell + "'");
            row.push_back(x);
        }
        if (row.size() != t.header.size())
            throw io_error(path + ":" + std::to_string(line_no) + ": wrong number of columns");
        t.rows.push_back(std::move(row));
    }
    return t;
}

std::string manifest_path(const std::string& table_path) {
    const auto slash = table_path.find_last_of('/');
    const auto dot = table_path.find_last_of('.');
    const std::string stem =
        dot != std::string::npos && (slash == std::string::npos || dot > slash) ? table_path.substr(0, dot) : table_path;
    return stem + ".manifest.json";
}

void write_manifest(const std::string& table_path, const RunSpec& spec, const ManifestInfo& info) {
    const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::ostringstream stamp;
    stamp << std::put_time(std::gmtime(&now), "%Y-%m-%dT%H:%M:%SZ");
    nlohmann::ordered_json j;
    j["schema_version"] = table_schema_version;
    j["config_schema_version"] = config_schema_version;
    j["tool"] = "qdsq";
    j["version"] = info.version;
    j["subcommand"] = info.subcommand;
    j["table"] = table_path;
    j["rows"] = info.rows;
    j["seed"] = spec.sweep.seed;
    j["threads"] = spec.sweep.threads;
    j["wall_time_s"] = info.wall_time_s;
    j["created_utc"] = stamp.str();
    j["run_spec"] = serialize_config(spec);
    const std::string path = manifest_path(table_path);
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw io_error("cannot write '" + path + "'");
    f << j.dump(2) << '\n';
    if (!f) throw io_error("failed writing '" + path + "'");
}

}  // namespace qdsq
