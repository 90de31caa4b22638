#include "qdsq/config.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "qdsq/errors.hpp"

namespace qdsq {

namespace {

enum class Kind { rate, angular, frequency, length, energy, power, time, dipole, density, decibel, real };

struct Unit {
    const char* name;
    double factor;
};

const std::vector<Unit>& units(Kind k) {
    static const std::map<Kind, std::vector<Unit>> table = {
        {Kind::rate, {{"/s", 1}, {"1/s", 1}, {"s^-1", 1}, {"/ms", 1e3}, {"/us", 1e6}, {"/µs", 1e6}, {"/ns", 1e9},
                      {"1/ns", 1e9}, {"/ps", 1e12}, {"1/ps", 1e12}}},
        {Kind::angular, {{"rad/s", 1}, {"/s", 1}, {"rad/ns", 1e9}, {"rad/ps", 1e12}, {"/ps", 1e12}}},
        {Kind::frequency, {{"Hz", 1}, {"kHz", 1e3}, {"MHz", 1e6}, {"GHz", 1e9}, {"THz", 1e12}}},
        {Kind::length, {{"m", 1}, {"mm", 1e-3}, {"um", 1e-6}, {"µm", 1e-6}, {"nm", 1e-9}}},
        {Kind::energy, {{"eV", 1}, {"meV", 1e-3}, {"ueV", 1e-6}, {"µeV", 1e-6}, {"J", 1 / phys::e_charge}}},
        {Kind::power, {{"W", 1}, {"mW", 1e-3}, {"uW", 1e-6}, {"µW", 1e-6}, {"nW", 1e-9}}},
        {Kind::time, {{"s", 1}, {"ms", 1e-3}, {"us", 1e-6}, {"µs", 1e-6}, {"ns", 1e-9}, {"ps", 1e-12}, {"fs", 1e-15}}},
        {Kind::dipole, {{"Cm", 1}, {"em", phys::e_charge}, {"enm", phys::e_charge * 1e-9}, {"D", 3.33564095198152e-30}}},
        {Kind::density, {{"/m^2", 1}, {"/m2", 1}, {"m^-2", 1}, {"/cm^2", 1e4}, {"/cm2", 1e4}, {"cm^-2", 1e4}}},
        {Kind::decibel, {{"dB", 1}}},
        {Kind::real, {}},
    };
    return table.at(k);
}

const char* base_unit(Kind k) {
    switch (k) {
        case Kind::rate: return " /s";
        case Kind::angular: return " rad/s";
        case Kind::frequency: return " Hz";
        case Kind::length: return " m";
        case Kind::energy: return " eV";
        case Kind::power: return " W";
        case Kind::time: return " s";
        case Kind::dipole: return " C m";
        case Kind::density: return " /m^2";
        case Kind::decibel: return " dB";
        case Kind::real: return "";
    }
    return "";
}

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& s) {
    std::vector<std::string> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(trim(item));
    if (!s.empty() && s.back() == ',') out.emplace_back();
    return out;
}

struct Entry {
    std::string value;
    int line = 0;
};

class SectionReader {
public:
    SectionReader(std::string name, std::map<std::string, Entry> entries)
        : name_(std::move(name)), entries_(std::move(entries)) {}

    bool has(const std::string& key) const { return entries_.count(key) > 0; }
    int line(const std::string& key) const { return has(key) ? entries_.at(key).line : 0; }

    void quantity(const std::string& key, Kind k, double& dst) {
        if (auto e = take(key)) dst = parse_quantity(e->value, k, key, e->line);
    }
    void quantity(const std::string& key, Kind k, std::optional<double>& dst) {
        if (auto e = take(key)) dst = parse_quantity(e->value, k, key, e->line);
    }
    void list(const std::string& key, Kind k, std::vector<double>& dst) {
        if (auto e = take(key)) {
            dst.clear();
            if (trim(e->value).empty()) return;
            for (const auto& item : split_list(e->value)) dst.push_back(parse_quantity(item, k, key, e->line));
        }
    }
    void text_list(const std::string& key, std::vector<std::string>& dst) {
        if (auto e = take(key)) {
            dst.clear();
            if (trim(e->value).empty()) return;
            for (const auto& item : split_list(e->value)) {
                if (item.empty()) throw config_error("empty item in list '" + key + "'", e->line);
                dst.push_back(item);
            }
        }
    }
    template <class Int>
    void integer(const std::string& key, Int& dst) {
        if (auto e = take(key)) {
            const std::string v = trim(e->value);
            Int x{};
            auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
            if (ec != std::errc() || ptr != v.data() + v.size())
                throw config_error("'" + key + "' needs an integer, got '" + v + "'", e->line);
            dst = x;
        }
    }
    void boolean(const std::string& key, bool& dst) {
        if (auto e = take(key)) {
            const std::string v = trim(e->value);
            if (v == "true" || v == "yes" || v == "on" || v == "1")
                dst = true;
            else if (v == "false" || v == "no" || v == "off" || v == "0")
                dst = false;
            else
                throw config_error("'" + key + "' needs true or false, got '" + v + "'", e->line);
        }
    }
    std::optional<Entry> text(const std::string& key) {
        auto e = take(key);
        if (e) e->value = trim(e->value);
        return e;
    }

    void finish() const {
        if (entries_.empty()) return;
        const auto& [key, e] = *std::min_element(entries_.begin(), entries_.end(), [](const auto& a, const auto& b) {
            return a.second.line < b.second.line;
        });
        throw config_error("unknown key '" + key + "' in [" + name_ + "]", e.line);
    }

    static double parse_quantity(const std::string& raw, Kind k, const std::string& key, int line) {
        const std::string v = trim(raw);
        double x = 0;
        auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), x);
        if (ec != std::errc() || ptr == v.data())
            throw config_error("'" + key + "' needs a number, got '" + v + "'", line);
        std::string unit;
        for (const char* c = ptr; c != v.data() + v.size(); ++c)
            if (*c != ' ' && *c != '\t' && *c != '*') unit.push_back(*c);
        const auto& allowed = units(k);
        if (k == Kind::real) {
            if (!unit.empty() && unit != "1")
                throw config_error("'" + key + "' is dimensionless, got unit '" + unit + "'", line);
            return x;
        }
        std::string names;
        for (const auto& u : allowed) {
            if (unit == u.name) return x * u.factor;
            names += names.empty() ? "" : ", ";
            names += u.name;
        }
        if (unit.empty()) throw config_error("'" + key + "' needs a unit (one of " + names + ")", line);
        throw config_error("unit '" + unit + "' does not fit '" + key + "' (expected one of " + names + ")", line);
    }

private:
    std::optional<Entry> take(const std::string& key) {
        auto it = entries_.find(key);
        if (it == entries_.end()) return std::nullopt;
        Entry e = it->second;
        entries_.erase(it);
        return e;
    }

    std::string name_;
    std::map<std::string, Entry> entries_;
};

Kind grid_kind(SweepParameter p) {
    switch (p) {
        case SweepParameter::pump: return Kind::rate;
        case SweepParameter::inj_power: return Kind::power;
        case SweepParameter::inj_rate: return Kind::rate;
        case SweepParameter::gamma_c: return Kind::rate;
        case SweepParameter::fwhm: return Kind::frequency;
    }
    return Kind::real;
}

void read_model(SectionReader& r, ModelParams& m) {
    r.quantity("wavelength", Kind::length, m.wavelength);
    r.quantity("cavity_diameter", Kind::length, m.cavity_diameter);
    r.quantity("cavity_length", Kind::length, m.cavity_length);
    r.quantity("gamma_c", Kind::rate, m.gamma_c);
    r.quantity("gamma", Kind::rate, m.gamma);
    r.quantity("gamma_nr", Kind::rate, m.gamma_nr);
    r.quantity("gamma_nl", Kind::rate, m.gamma_nl);
    r.quantity("pump", Kind::rate, m.pump);
    r.quantity("dipole", Kind::dipole, m.dipole);
    r.quantity("background_index", Kind::real, m.background_index);
    if (r.has("inj_rate") && r.has("inj_power"))
        throw config_error("inj_rate and inj_power are mutually exclusive",
                           std::max(r.line("inj_rate"), r.line("inj_power")));
    r.quantity("inj_rate", Kind::rate, m.inj_rate);
    r.quantity("inj_power", Kind::power, m.inj_power);
    r.quantity("detuning_inj", Kind::angular, m.detuning_inj);
    if (auto e = r.text("inj_units")) {
        if (e->value == "picosecond")
            m.inj_units = InjectionUnits::picosecond;
        else if (e->value == "si")
            m.inj_units = InjectionUnits::si;
        else
            throw config_error("inj_units must be picosecond or si", e->line);
    }
    r.boolean("inj_doublet_terms", m.inj_doublet_terms);
    r.boolean("pump_correlation_decay", m.pump_correlation_decay);
    r.finish();
}

void read_ensemble(SectionReader& r, EnsembleSpec& e) {
    r.integer("n_bins", e.n_bins);
    r.quantity("fwhm", Kind::energy, e.inhomogeneous_fwhm);
    r.quantity("center_energy", Kind::energy, e.center_energy);
    r.quantity("span_sigmas", Kind::real, e.span_sigmas);
    r.quantity("qd_density", Kind::density, e.qd_density);
    r.finish();
}

void read_integration(SectionReader& r, IntegrationConfig& c) {
    r.quantity("rel_tol", Kind::real, c.rel_tol);
    r.quantity("abs_tol", Kind::real, c.abs_tol);
    r.quantity("dt_init", Kind::time, c.dt_init);
    r.quantity("dt_max", Kind::time, c.dt_max);
    r.quantity("t_max", Kind::time, c.t_max);
    r.quantity("steady_tol", Kind::real, c.steady_tol);
    r.integer("symmetry_interval", c.symmetry_interval);
    r.integer("max_steps", c.max_steps);
    r.boolean("newton_polish", c.newton_polish);
    r.quantity("newton_switch", Kind::real, c.newton_switch);
    r.quantity("newton_interval", Kind::time, c.newton_interval);
    r.finish();
}

void read_sweep(SectionReader& r, RunSpec& spec) {
    SweepSpec& s = spec.sweep;
    if (auto e = r.text("parameter")) {
        try {
            s.parameter = parse_sweep_parameter(e->value);
        } catch (const invalid_parameter& ex) {
            throw config_error(ex.what(), e->line);
        }
    }
    const Kind gk = grid_kind(s.parameter);
    const bool range = r.has("start") || r.has("stop") || r.has("points") || r.has("spacing");
    if (r.has("values") && range)
        throw config_error("give either values or start/stop/points, not both", r.line("values"));
    r.list("values", gk, s.grid);
    if (range) {
        const int line = std::max({r.line("start"), r.line("stop"), r.line("points"), r.line("spacing")});
        double start = 0, stop = 0;
        int points = 0;
        if (!r.has("start") || !r.has("stop") || !r.has("points"))
            throw config_error("a range needs start, stop and points", line);
        r.quantity("start", gk, start);
        r.quantity("stop", gk, stop);
        r.integer("points", points);
        bool log = false;
        if (auto e = r.text("spacing")) {
            if (e->value == "log")
                log = true;
            else if (e->value != "linear")
                throw config_error("spacing must be linear or log", e->line);
        }
        if (points < 1) throw config_error("points must be >= 1", line);
        if (log && !(start > 0 && stop > 0)) throw config_error("log spacing needs positive start and stop", line);
        s.grid.clear();
        for (int i = 0; i < points; ++i) {
            const double f = points == 1 ? 0.0 : static_cast<double>(i) / (points - 1);
            s.grid.push_back(i == points - 1 ? stop
                             : log         ? std::exp(std::log(start) + f * (std::log(stop) - std::log(start)))
                                           : start + f * (stop - start));
        }
    }
    r.list("gamma_c_list", Kind::rate, s.gamma_c_list);
    r.quantity("pump_min", Kind::rate, s.pump_search.p_min);
    r.quantity("pump_max", Kind::rate, s.pump_search.p_max);
    r.integer("pump_scan", s.pump_search.scan_points);
    r.quantity("pump_tol", Kind::real, s.pump_search.rel_tol);
    r.boolean("optimize_pump", s.optimize_pump);
    r.list("targets", Kind::decibel, s.targets);

    const bool jitter = s.parameter == SweepParameter::fwhm || r.has("jitter_distribution") ||
                        r.has("jitter_samples") || r.has("jitter_cutoff") || r.has("average_squeeze");
    if (jitter) {
        JitterSpec js;
        if (auto e = r.text("jitter_distribution")) {
            if (e->value == "lorentzian")
                js.distribution = JitterDistribution::lorentzian;
            else if (e->value == "gaussian")
                js.distribution = JitterDistribution::gaussian;
            else
                throw config_error("jitter_distribution must be lorentzian or gaussian", e->line);
        }
        r.integer("jitter_samples", js.n_samples);
        r.quantity("jitter_cutoff", Kind::real, js.cutoff);
        r.boolean("average_squeeze", js.average_squeeze);
        s.jitter = js;
    }
    r.integer("seed", s.seed);
    r.integer("threads", s.threads);
    if (auto e = r.text("output")) spec.output = e->value;
    r.finish();
}

void read_oracle(SectionReader& r, OracleCheckSpec& o) {
    OracleConfig& c = o.oracle;
    r.integer("n_dots", c.n_dots);
    r.integer("fock_cutoff", c.fock_cutoff);
    r.quantity("g", Kind::rate, c.g);
    r.quantity("gamma_c", Kind::rate, c.gamma_c);
    r.quantity("gamma", Kind::rate, c.gamma);
    r.quantity("gamma_nr", Kind::rate, c.gamma_nr);
    r.quantity("gamma_nl", Kind::rate, c.gamma_nl);
    r.quantity("pump", Kind::rate, c.pump);
    const bool dots_given = r.has("n_dots");
    if (r.has("detuning")) {
        r.list("detuning", Kind::angular, c.detuning);
    } else if (dots_given) {
        c.detuning.assign(static_cast<std::size_t>(std::max(c.n_dots, 0)), 0.0);
    }
    double re = c.a_inj.real(), im = c.a_inj.imag();
    r.quantity("inj_amplitude", Kind::rate, re);
    r.quantity("inj_amplitude_im", Kind::rate, im);
    c.a_inj = {re, im};
    r.quantity("delta_inj", Kind::angular, c.delta_inj);
    r.quantity("t_end", Kind::time, c.t_end);
    r.integer("samples", c.n_samples);
    double a_re = o.alpha0.real(), a_im = o.alpha0.imag();
    r.quantity("alpha0", Kind::real, a_re);
    r.quantity("alpha0_im", Kind::real, a_im);
    o.alpha0 = {a_re, a_im};
    r.quantity("fe0", Kind::real, o.fe0);
    r.quantity("fh0", Kind::real, o.fh0);
    r.quantity("tolerance", Kind::real, o.tolerance);
    r.text_list("fields", o.fields);
    r.finish();
}

// --- serialization ---------------------------------------------------------

class Writer {
public:
    void section(const char* name) {
        if (!out_.str().empty()) out_ << '\n';
        out_ << '[' << name << "]\n";
    }
    void q(const char* key, double v, Kind k) { out_ << key << " = " << format_double(v) << base_unit(k) << '\n'; }
    void list(const char* key, const std::vector<double>& v, Kind k) {
        out_ << key << " =";
        for (std::size_t i = 0; i < v.size(); ++i) out_ << (i ? ", " : " ") << format_double(v[i]) << base_unit(k);
        out_ << '\n';
    }
    template <class T>
    void raw(const char* key, const T& v) {
        out_ << key << " = " << v << '\n';
    }
    void flag(const char* key, bool v) { raw(key, v ? "true" : "false"); }
    std::string str() const { return out_.str(); }

private:
    std::ostringstream out_;
};

}  // namespace

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, ptr);
}

void RunSpec::validate() const {
    SweepSpec s = sweep;
    if (s.grid.empty()) s.grid = {0.0};
    s.validate();
    oracle.validate();
}

RunSpec parse_config(const std::string& text) {
    std::map<std::string, std::map<std::string, Entry>> sections;
    std::map<std::string, int> section_line;
    static const std::vector<std::string> known = {"model", "ensemble", "integration", "sweep", "oracle"};
    std::string current;
    std::istringstream in(text);
    std::string raw;
    int line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        std::string line = raw;
        if (line_no == 1 && line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
        const auto hash = line.find_first_of("#;");
        if (hash != std::string::npos) line.erase(hash);
        line = trim(line);
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw config_error("malformed section header", line_no);
            current = trim(line.substr(1, line.size() - 2));
            if (std::find(known.begin(), known.end(), current) == known.end())
                throw config_error("unknown section [" + current + "]", line_no);
            if (section_line.count(current)) throw config_error("section [" + current + "] repeated", line_no);
            section_line[current] = line_no;
            sections[current];
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw config_error("expected key = value", line_no);
        const std::string key = trim(line.substr(0, eq));
        const std::string value = trim(line.substr(eq + 1));
        if (key.empty()) throw config_error("missing key before '='", line_no);
        if (current.empty()) {
            if (key != "schema_version") throw config_error("key '" + key + "' outside of a section", line_no);
            if (value != std::to_string(config_schema_version))
                throw config_error("unsupported schema_version " + value, line_no);
            continue;
        }
        auto& sec = sections[current];
        if (sec.count(key)) throw config_error("key '" + key + "' repeated in [" + current + "]", line_no);
        sec[key] = Entry{value, line_no};
    }

    RunSpec spec;
    auto reader = [&](const char* name) { return SectionReader(name, sections[name]); };
    {
        auto r = reader("model");
        read_model(r, spec.sweep.model);
    }
    {
        auto r = reader("ensemble");
        read_ensemble(r, spec.sweep.ensemble);
    }
    {
        auto r = reader("integration");
        read_integration(r, spec.sweep.integration);
    }
    {
        auto r = reader("sweep");
        read_sweep(r, spec);
    }
    {
        auto r = reader("oracle");
        read_oracle(r, spec.oracle);
    }
    spec.validate();
    return spec;
}

RunSpec load_config(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw io_error("cannot read config '" + path + "'");
    std::ostringstream ss;
    ss << f.rdbuf();
    try {
        return parse_config(ss.str());
    } catch (const config_error& e) {
        throw config_error(path + ": " + e.what());
    }
}

std::string serialize_config(const RunSpec& r) {
    Writer w;
    w.raw("schema_version", config_schema_version);
    const ModelParams& m = r.sweep.model;
    w.section("model");
    w.q("wavelength", m.wavelength, Kind::length);
    w.q("cavity_diameter", m.cavity_diameter, Kind::length);
    w.q("cavity_length", m.cavity_length, Kind::length);
    w.q("gamma_c", m.gamma_c, Kind::rate);
    w.q("gamma", m.gamma, Kind::rate);
    w.q("gamma_nr", m.gamma_nr, Kind::rate);
    w.q("gamma_nl", m.gamma_nl, Kind::rate);
    w.q("pump", m.pump, Kind::rate);
    w.q("dipole", m.dipole, Kind::dipole);
    w.q("background_index", m.background_index, Kind::real);
    if (m.inj_rate) w.q("inj_rate", *m.inj_rate, Kind::rate);
    if (m.inj_power) w.q("inj_power", *m.inj_power, Kind::power);
    w.q("detuning_inj", m.detuning_inj, Kind::angular);
    w.raw("inj_units", m.inj_units == InjectionUnits::si ? "si" : "picosecond");
    w.flag("inj_doublet_terms", m.inj_doublet_terms);
    w.flag("pump_correlation_decay", m.pump_correlation_decay);

    const EnsembleSpec& e = r.sweep.ensemble;
    w.section("ensemble");
    w.raw("n_bins", e.n_bins);
    w.q("fwhm", e.inhomogeneous_fwhm, Kind::energy);
    if (e.center_energy) w.q("center_energy", *e.center_energy, Kind::energy);
    w.q("span_sigmas", e.span_sigmas, Kind::real);
    w.q("qd_density", e.qd_density, Kind::density);

    const IntegrationConfig& c = r.sweep.integration;
    w.section("integration");
    w.q("rel_tol", c.rel_tol, Kind::real);
    w.q("abs_tol", c.abs_tol, Kind::real);
    w.q("dt_init", c.dt_init, Kind::time);
    w.q("dt_max", c.dt_max, Kind::time);
    w.q("t_max", c.t_max, Kind::time);
    w.q("steady_tol", c.steady_tol, Kind::real);
    w.raw("symmetry_interval", c.symmetry_interval);
    w.raw("max_steps", c.max_steps);
    w.flag("newton_polish", c.newton_polish);
    w.q("newton_switch", c.newton_switch, Kind::real);
    w.q("newton_interval", c.newton_interval, Kind::time);

    const SweepSpec& s = r.sweep;
    w.section("sweep");
    w.raw("parameter", to_string(s.parameter));
    w.list("values", s.grid, grid_kind(s.parameter));
    w.list("gamma_c_list", s.gamma_c_list, Kind::rate);
    w.q("pump_min", s.pump_search.p_min, Kind::rate);
    w.q("pump_max", s.pump_search.p_max, Kind::rate);
    w.raw("pump_scan", s.pump_search.scan_points);
    w.q("pump_tol", s.pump_search.rel_tol, Kind::real);
    w.flag("optimize_pump", s.optimize_pump);
    w.list("targets", s.targets, Kind::decibel);
    if (s.jitter) {
        w.raw("jitter_distribution",
              s.jitter->distribution == JitterDistribution::gaussian ? "gaussian" : "lorentzian");
        w.raw("jitter_samples", s.jitter->n_samples);
        w.q("jitter_cutoff", s.jitter->cutoff, Kind::real);
        w.flag("average_squeeze", s.jitter->average_squeeze);
    }
    w.raw("seed", s.seed);
    w.raw("threads", s.threads);
    if (!r.output.empty()) w.raw("output", r.output);

    const OracleCheckSpec& o = r.oracle;
    const OracleConfig& oc = o.oracle;
    w.section("oracle");
    w.raw("n_dots", oc.n_dots);
    w.raw("fock_cutoff", oc.fock_cutoff);
    w.q("g", oc.g, Kind::rate);
    w.q("gamma_c", oc.gamma_c, Kind::rate);
    w.q("gamma", oc.gamma, Kind::rate);
    w.q("gamma_nr", oc.gamma_nr, Kind::rate);
    w.q("gamma_nl", oc.gamma_nl, Kind::rate);
    w.q("pump", oc.pump, Kind::rate);
    w.list("detuning", oc.detuning, Kind::angular);
    w.q("inj_amplitude", oc.a_inj.real(), Kind::rate);
    w.q("inj_amplitude_im", oc.a_inj.imag(), Kind::rate);
    w.q("delta_inj", oc.delta_inj, Kind::angular);
    w.q("t_end", oc.t_end, Kind::time);
    w.raw("samples", oc.n_samples);
    w.q("alpha0", o.alpha0.real(), Kind::real);
    w.q("alpha0_im", o.alpha0.imag(), Kind::real);
    w.q("fe0", o.fe0, Kind::real);
    w.q("fh0", o.fh0, Kind::real);
    w.q("tolerance", o.tolerance, Kind::real);
    std::string fields;
    for (std::size_t i = 0; i < o.fields.size(); ++i) fields += (i ? ", " : "") + o.fields[i];
    w.raw("fields", fields);
    return w.str();
}

}  // namespace qdsq
