#pragma once

#include <string>
#include <vector>

#include "qdsq/config.hpp"
#include "qdsq/experiments.hpp"

namespace qdsq {

inline constexpr int table_schema_version = 1;

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;   // booleans as 0/1, missing values as nan
};

// Pump sweeps lead with pump, p_out_w, g2, var_x, var_y, dn_rel, product, squeeze_db, converged;
// other sweeps replace the leading column by the swept quantity and add gamma_c and pump.
Table to_table(const SweepResult& r);
Table to_table(const CavityResult& r);

// Comma-separated, header first, doubles in shortest round-trip form. Throws io_error.
void write_table(const Table& t, const std::string& path);
Table read_table(const std::string& path);

struct ManifestInfo {
    std::string subcommand;
    std::string version;
    double wall_time_s = 0;
    std::size_t rows = 0;
};

// <stem>.manifest.json next to the table.
std::string manifest_path(const std::string& table_path);
void write_manifest(const std::string& table_path, const RunSpec& spec, const ManifestInfo& info);

}  // namespace qdsq
