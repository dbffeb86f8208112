#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "lamella/common.hpp"
#include "lamella/geometry.hpp"
#include "lamella/modal.hpp"
#include "lamella/radiation.hpp"

namespace lamella {

inline constexpr const char* tool_version = "0.1.0";

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path);
    out << content;
}

/// Shortest representation that round-trips a double (17 significant digits).
inline std::string fmt17(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// ---------------------------------------------------------------------------
// Profile JSON: {"transitions": [...], "heights": [...]}
// ---------------------------------------------------------------------------

inline nlohmann::json profile_to_json(const RectangularProfile& p) {
    return nlohmann::json{{"transitions", p.transitions}, {"heights", p.heights}};
}

inline RectangularProfile profile_from_json(const nlohmann::json& j) {
    RectangularProfile p;
    p.transitions = j.at("transitions").get<std::vector<double>>();
    p.heights = j.at("heights").get<std::vector<double>>();
    return p;
}

inline void save_profile(const std::string& path, const RectangularProfile& p) {
    write_file(path, profile_to_json(p).dump(2) + "\n");
}

inline RectangularProfile load_profile(const std::string& path) {
    return profile_from_json(nlohmann::json::parse(read_file(path)));
}

// ---------------------------------------------------------------------------
// Minimal TOML subset for scenario files: comments (#), [section] headers
// (flattened to "section.key"), and key = value with value one of
// bool / number / "string" / [array of numbers or strings].
// ---------------------------------------------------------------------------

using TomlValue =
    std::variant<bool, double, std::string, std::vector<double>, std::vector<std::string>>;

class TomlTable {
public:
    std::map<std::string, TomlValue> values;

    bool has(const std::string& key) const { return values.count(key) > 0; }

    double number(const std::string& key) const {
        auto it = require(key);
        if (auto* d = std::get_if<double>(&it->second)) return *d;
        throw Error("toml key '" + key + "' is not a number");
    }
    double number_or(const std::string& key, double fallback) const {
        return has(key) ? number(key) : fallback;
    }
    long long integer(const std::string& key) const {
        double d = number(key);
        auto r = static_cast<long long>(d);
        if (static_cast<double>(r) != d) throw Error("toml key '" + key + "' is not an integer");
        return r;
    }
    long long integer_or(const std::string& key, long long fallback) const {
        return has(key) ? integer(key) : fallback;
    }
    bool boolean_or(const std::string& key, bool fallback) const {
        if (!has(key)) return fallback;
        auto it = require(key);
        if (auto* b = std::get_if<bool>(&it->second)) return *b;
        throw Error("toml key '" + key + "' is not a boolean");
    }
    std::string text_or(const std::string& key, const std::string& fallback) const {
        if (!has(key)) return fallback;
        auto it = require(key);
        if (auto* s = std::get_if<std::string>(&it->second)) return *s;
        throw Error("toml key '" + key + "' is not a string");
    }
    std::vector<double> numbers(const std::string& key) const {
        auto it = require(key);
        if (auto* v = std::get_if<std::vector<double>>(&it->second)) return *v;
        if (auto* d = std::get_if<double>(&it->second)) return {*d};
        throw Error("toml key '" + key + "' is not a numeric array");
    }
    std::vector<double> numbers_or(const std::string& key, std::vector<double> fallback) const {
        return has(key) ? numbers(key) : std::move(fallback);
    }

private:
    std::map<std::string, TomlValue>::const_iterator require(const std::string& key) const {
        auto it = values.find(key);
        if (it == values.end()) throw Error("missing toml key '" + key + "'");
        return it;
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline TomlValue parse_toml_scalar(const std::string& raw) {
    std::string v = trim(raw);
    if (v == "true") return true;
    if (v == "false") return false;
    if (!v.empty() && v.front() == '"') {
        if (v.size() < 2 || v.back() != '"') throw Error("unterminated toml string: " + v);
        return v.substr(1, v.size() - 2);
    }
    try {
        std::size_t used = 0;
        double d = std::stod(v, &used);
        if (used == v.size()) return d;
    } catch (const std::exception&) {
    }
    throw Error("cannot parse toml value: " + v);
}

} // namespace detail

inline TomlTable parse_toml(const std::string& text) {
    TomlTable table;
    std::istringstream in(text);
    std::string line, prefix;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        // Strip comments, but not inside quoted strings.
        bool quoted = false;
        for (std::size_t i = 0; i < line.size(); ++i) {
            if (line[i] == '"') quoted = !quoted;
            if (line[i] == '#' && !quoted) {
                line = line.substr(0, i);
                break;
            }
        }
        std::string s = detail::trim(line);
        if (s.empty()) continue;
        if (s.front() == '[') {
            if (s.back() != ']') throw Error("bad toml section at line " + std::to_string(lineno));
            prefix = detail::trim(s.substr(1, s.size() - 2));
            if (!prefix.empty()) prefix += ".";
            continue;
        }
        auto eq = s.find('=');
        if (eq == std::string::npos)
            throw Error("expected key = value at line " + std::to_string(lineno));
        std::string key = prefix + detail::trim(s.substr(0, eq));
        std::string val = detail::trim(s.substr(eq + 1));
        if (!val.empty() && val.front() == '[') {
            if (val.back() != ']') throw Error("unterminated toml array at line " + std::to_string(lineno));
            std::string inner = val.substr(1, val.size() - 2);
            std::vector<double> nums;
            std::vector<std::string> strs;
            bool is_str = false;
            std::string item;
            std::istringstream items(inner);
            while (std::getline(items, item, ',')) {
                std::string t = detail::trim(item);
                if (t.empty()) continue;
                TomlValue v = detail::parse_toml_scalar(t);
                if (auto* d = std::get_if<double>(&v))
                    nums.push_back(*d);
                else if (auto* str = std::get_if<std::string>(&v)) {
                    is_str = true;
                    strs.push_back(*str);
                } else
                    throw Error("unsupported array element at line " + std::to_string(lineno));
            }
            if (is_str)
                table.values[key] = strs;
            else
                table.values[key] = nums;
        } else {
            table.values[key] = detail::parse_toml_scalar(val);
        }
    }
    return table;
}

inline TomlTable load_toml(const std::string& path) { return parse_toml(read_file(path)); }

// ---------------------------------------------------------------------------
// Scenario files shared by the forward and oracle pipelines.
// ---------------------------------------------------------------------------

struct Scenario {
    MediumPair media;
    PlaneWaveIncidence inc;
    int N = 40;
    double b = 0.0;
    int nsamples = 256;
    // Oracle grid; zero means "derive from defaults".
    int nx = 0, ny = 0;
    double H = 0.0;
};

inline Scenario scenario_from_toml(const TomlTable& t) {
    Scenario s;
    s.media.k1 = t.number("k1");
    s.media.k2 = complexd(t.number("k2"), t.number_or("k2_im", 0.0));
    s.media.lambda = t.number_or("lambda", 1.0);
    s.inc.k1 = s.media.k1;
    s.inc.theta = t.number("theta");
    s.N = static_cast<int>(t.integer_or("N", 40));
    s.b = t.number_or("b", 0.0);
    s.nsamples = static_cast<int>(t.integer_or("nsamples", 256));
    s.nx = static_cast<int>(t.integer_or("nx", 0));
    s.ny = static_cast<int>(t.integer_or("ny", 0));
    s.H = t.number_or("H", 0.0);
    return s;
}

inline Scenario load_scenario(const std::string& path) {
    return scenario_from_toml(load_toml(path));
}

// ---------------------------------------------------------------------------
// CSV writers/readers. Columns are fixed and documented in the README; all
// numbers carry full round-trip precision.
// ---------------------------------------------------------------------------

inline void write_trace_csv(const std::string& path, const NearFieldTrace& tr) {
    std::ostringstream out;
    out << "x1,re,im\n";
    for (std::size_t j = 0; j < tr.u.size(); ++j)
        out << fmt17(tr.x1[j]) << ',' << fmt17(tr.u[j].real()) << ',' << fmt17(tr.u[j].imag())
            << '\n';
    write_file(path, out.str());
}

inline NearFieldTrace read_trace_csv(const std::string& path) {
    std::istringstream in(read_file(path));
    std::string line;
    if (!std::getline(in, line)) throw Error("empty trace csv: " + path);
    NearFieldTrace tr;
    while (std::getline(in, line)) {
        if (detail::trim(line).empty()) continue;
        double x, re, im;
        if (std::sscanf(line.c_str(), "%lf,%lf,%lf", &x, &re, &im) != 3)
            throw Error("bad trace row: " + line);
        tr.x1.push_back(x);
        tr.u.emplace_back(re, im);
    }
    return tr;
}

inline void write_efficiency_csv(const std::string& path, const EfficiencyTable& table) {
    std::ostringstream out;
    out << "n,side,beta,A2,e\n";
    for (const auto& r : table.rows)
        out << r.n << ',' << (r.side == Side::plus ? '+' : '-') << ',' << fmt17(r.beta) << ','
            << fmt17(r.amplitude_sq) << ',' << fmt17(r.efficiency) << '\n';
    write_file(path, out.str());
}

inline void write_spectrum_csv(const std::string& path, const RayleighSpectrum& s) {
    std::ostringstream out;
    out << "n,alpha_n,re_beta_plus,im_beta_plus,re_beta_minus,im_beta_minus,"
           "re_A_plus,im_A_plus,re_A_minus,im_A_minus,prop_plus,prop_minus\n";
    for (int n = -s.N; n <= s.N; ++n) {
        const int i = s.index(n);
        out << n << ',' << fmt17(s.alpha_n(n)) << ',' << fmt17(s.beta_plus[i].real()) << ','
            << fmt17(s.beta_plus[i].imag()) << ',' << fmt17(s.beta_minus[i].real()) << ','
            << fmt17(s.beta_minus[i].imag()) << ',' << fmt17(s.A_plus[i].real()) << ','
            << fmt17(s.A_plus[i].imag()) << ',' << fmt17(s.A_minus[i].real()) << ','
            << fmt17(s.A_minus[i].imag()) << ',' << (s.propagating_plus(n) ? 1 : 0) << ','
            << (s.propagating_minus(n) ? 1 : 0) << '\n';
    }
    write_file(path, out.str());
}

/// Generic tiny CSV reader: returns rows of doubles, skipping the header.
inline std::vector<std::vector<double>> read_numeric_csv(const std::string& path,
                                                         bool skip_header = true) {
    std::istringstream in(read_file(path));
    std::string line;
    std::vector<std::vector<double>> rows;
    bool first = true;
    while (std::getline(in, line)) {
        if (first && skip_header) {
            first = false;
            continue;
        }
        first = false;
        std::string s = detail::trim(line);
        if (s.empty()) continue;
        std::vector<double> row;
        std::istringstream cells(s);
        std::string cell;
        bool numeric = true;
        while (std::getline(cells, cell, ',')) {
            try {
                row.push_back(std::stod(detail::trim(cell)));
            } catch (const std::exception&) {
                numeric = false;
                break;
            }
        }
        if (numeric && !row.empty()) rows.push_back(std::move(row));
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Run records: enough provenance to replay a run bit for bit.
// ---------------------------------------------------------------------------

struct RunRecord {
    std::string subcommand;
    nlohmann::json inputs = nlohmann::json::object();  // name -> {path, fnv1a, content}
    std::vector<std::string> outputs;
    nlohmann::json timings = nlohmann::json::object(); // name -> seconds
    std::string note;

    void add_input(const std::string& name, const std::string& path, const std::string& content) {
        char hash[32];
        std::snprintf(hash, sizeof(hash), "%016llx",
                      static_cast<unsigned long long>(fnv1a(content)));
        inputs[name] = {{"path", path}, {"fnv1a", hash}, {"content", content}};
    }

    nlohmann::json to_json() const {
        return nlohmann::json{{"tool", "lamella"},       {"version", tool_version},
                              {"subcommand", subcommand}, {"inputs", inputs},
                              {"outputs", outputs},       {"timings", timings},
                              {"environment", note}};
    }
};

inline void write_run_record(const std::string& path, const RunRecord& rec) {
    write_file(path, rec.to_json().dump(2) + "\n");
}

} // namespace lamella
