#pragma once

#include <string>

#include "qdsq/experiments.hpp"
#include "qdsq/oracle.hpp"

namespace qdsq {

inline constexpr int config_schema_version = 1;

// Everything a run needs. sweep carries the model, ensemble and integration settings.
struct RunSpec {
    SweepSpec sweep;
    OracleCheckSpec oracle;
    std::string output;

    const ModelParams& model() const { return sweep.model; }
    const EnsembleSpec& ensemble() const { return sweep.ensemble; }
    const IntegrationConfig& integration() const { return sweep.integration; }

    // Component invariants; the sweep grid may still be empty.
    void validate() const;
    bool operator==(const RunSpec&) const = default;
};

// INI-style document with sections [model], [ensemble], [integration], [sweep], [oracle].
// Physical quantities carry a unit suffix ("gamma_c = 2e10 /s", "fwhm = 10 meV"). Missing keys
// keep their defaults; unknown sections or keys, duplicates and bad units throw config_error
// with the line number.
RunSpec parse_config(const std::string& text);
RunSpec load_config(const std::string& path);

// Canonical text with every value in base units; parse_config(serialize_config(r)) == r.
std::string serialize_config(const RunSpec& r);

// Shortest decimal that parses back to the same double.
std::string format_double(double x);

}  // namespace qdsq
