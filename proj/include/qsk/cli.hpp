#pragma once

#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "qsk/acceptance.hpp"
#include "qsk/annealed.hpp"
#include "qsk/constants.hpp"
#include "qsk/disorder.hpp"
#include "qsk/hilbert.hpp"
#include "qsk/variational.hpp"

namespace qsk::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kUsage = 2, kNumerical = 3 };

struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

inline std::string trim(const std::string& s) {
    std::size_t a = 0, b = s.size();
    while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
    while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
    return s.substr(a, b - a);
}

inline std::string num(double x) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

// ---- config -----------------------------------------------------------------

// Flat "key = value" lines under [section] headers; '#' starts a comment.
struct ConfigFile {
    struct Entry {
        std::string value;
        std::string origin;  // "file:line" or "--set"
    };
    std::map<std::string, Entry> entries;  // "section.key"

    static ConfigFile parse(std::istream& in, const std::string& source) {
        ConfigFile c;
        std::string line, section;
        int no = 0;
        while (std::getline(in, line)) {
            ++no;
            std::string where = source + ":" + std::to_string(no);
            auto hash = line.find('#');
            if (hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') throw UsageError(where + ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                if (section.empty()) throw UsageError(where + ": empty section name");
                continue;
            }
            auto eq = line.find('=');
            if (eq == std::string::npos) throw UsageError(where + ": expected 'key = value'");
            if (section.empty()) throw UsageError(where + ": key outside of any [section]");
            std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
            if (key.empty()) throw UsageError(where + ": empty key");
            std::string full = section + "." + key;
            if (c.entries.count(full)) throw UsageError(where + ": duplicate key '" + full + "'");
            c.entries[full] = {value, where};
        }
        return c;
    }

    static ConfigFile load(const std::string& path) {
        std::ifstream f(path);
        if (!f) throw UsageError("cannot open config file '" + path + "'");
        return parse(f, path);
    }

    void set(const std::string& assignment) {
        auto eq = assignment.find('=');
        if (eq == std::string::npos) throw UsageError("--set expects section.key=value, got '" + assignment + "'");
        std::string key = trim(assignment.substr(0, eq));
        if (key.find('.') == std::string::npos) throw UsageError("--set key '" + key + "' lacks a section");
        entries[key] = {trim(assignment.substr(eq + 1)), "--set"};
    }
};

struct KeySpec {
    std::string key;
    std::string default_value;
};

// Effective parameter block of one subcommand: defaults overlaid by the config.
class Params {
public:
    Params(const std::vector<KeySpec>& schema, const ConfigFile& cfg, const std::vector<std::string>& all_keys) {
        for (const auto& [k, e] : cfg.entries)
            if (std::find(all_keys.begin(), all_keys.end(), k) == all_keys.end())
                throw UsageError(e.origin + ": unknown key '" + k + "'");
        for (const auto& s : schema) {
            auto it = cfg.entries.find(s.key);
            values_[s.key] = it == cfg.entries.end() ? Entry{s.default_value, "default"} : Entry{it->second.value, it->second.origin};
        }
    }

    const std::map<std::string, std::string> echo() const {
        std::map<std::string, std::string> m;
        for (const auto& [k, e] : values_) m[k] = e.value;
        return m;
    }

    std::string str(const std::string& k) const { return at(k).value; }

    double real(const std::string& k) const {
        const auto& e = at(k);
        return parse_real(e.value, k, e.origin);
    }

    int integer(const std::string& k) const {
        const auto& e = at(k);
        std::size_t pos = 0;
        long v = 0;
        try {
            v = std::stol(e.value, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != e.value.size()) throw UsageError(e.origin + ": '" + k + "' expects an integer, got '" + e.value + "'");
        return static_cast<int>(v);
    }

    bool boolean(const std::string& k) const {
        const auto& e = at(k);
        if (e.value == "true" || e.value == "1") return true;
        if (e.value == "false" || e.value == "0") return false;
        throw UsageError(e.origin + ": '" + k + "' expects true or false, got '" + e.value + "'");
    }

    std::vector<double> reals(const std::string& k) const {
        std::vector<double> out;
        const auto& e = at(k);
        std::stringstream ss(e.value);
        std::string item;
        while (std::getline(ss, item, ',')) {
            item = trim(item);
            if (!item.empty()) out.push_back(parse_real(item, k, e.origin));
        }
        return out;
    }

    std::vector<int> integers(const std::string& k) const {
        std::vector<int> out;
        for (double x : reals(k)) {
            if (x != std::floor(x)) throw UsageError(at(k).origin + ": '" + k + "' expects integers");
            out.push_back(static_cast<int>(x));
        }
        return out;
    }

    // Reports a value rejected by a domain check with its origin.
    [[noreturn]] void reject(const std::string& k, const std::string& why) const {
        throw UsageError(at(k).origin + ": '" + k + "' " + why);
    }

private:
    struct Entry {
        std::string value, origin;
    };
    std::map<std::string, Entry> values_;

    const Entry& at(const std::string& k) const {
        auto it = values_.find(k);
        if (it == values_.end()) throw std::logic_error("Params: key not in schema: " + k);
        return it->second;
    }

    static double parse_real(const std::string& s, const std::string& k, const std::string& origin) {
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size() || !std::isfinite(v))
            throw UsageError(origin + ": '" + k + "' expects a finite number, got '" + s + "'");
        return v;
    }
};

inline const std::map<std::string, std::vector<KeySpec>>& schemas() {
    static const std::map<std::string, std::vector<KeySpec>> s{
        {"constants",
         {{"constants.beta_b_min", "0.1"},
          {"constants.beta_b_max", "10"},
          {"constants.points", "50"},
          {"constants.spacing", "log"},
          {"constants.n_max", "64"},
          {"model.n", "4"},
          {"model.lambda", "0.2"},
          {"mc.quad_nodes", "64"}}},
        {"exactdiag",
         {{"model.n", "4"}, {"model.lambda", "0.2"}, {"model.beta_b", "1"}, {"exactdiag.samples", "10"},
          {"exactdiag.spectra", "false"}}},
        {"annealed",
         {{"annealed.n_list", "2,3,4,6"},
          {"annealed.lambda_list", "0.05,0.125,0.225"},
          {"annealed.beta_b_list", "0.5,1,2"},
          {"mc.ensembles", "100000"},
          {"mc.quad_nodes", "64"}}},
        {"variational",
         {{"model.lambda", "0.1"},
          {"model.beta_b", "1"},
          {"variational.cells", "64"},
          {"variational.start", "mu"},
          {"variational.tol", "1e-8"},
          {"variational.max_iter", "200"},
          {"variational.n_max", "64"},
          {"mc.paths", "200000"}}},
        {"static",
         {{"static.beta_b_list", "0.5,1,3"},
          {"static.lambda_min", "0.001"},
          {"static.lambda_max", "20"},
          {"static.points", "40"}}},
        {"quenched",
         {{"model.n", "6"},
          {"model.lambda", "0.125"},
          {"model.beta_b", "1"},
          {"quenched.samples", "2000"},
          {"quenched.delta", "0"},
          {"quenched.trend_n", ""},
          {"quenched.gamma_list", ""},
          {"quenched.pair_systems", "4000"}}},
        {"region",
         {{"region.inv_beta_v_min", "0.05"},
          {"region.inv_beta_v_max", "2"},
          {"region.inv_beta_v_points", "100"},
          {"region.b_over_v_min", "0"},
          {"region.b_over_v_max", "3"},
          {"region.b_over_v_points", "100"},
          {"region.n_max", "64"},
          {"region.advisory_points", "101"}}},
        {"verify", {}},
    };
    return s;
}

inline std::vector<std::string> all_keys() {
    std::vector<std::string> k;
    for (const auto& [cmd, list] : schemas())
        for (const auto& s : list)
            if (std::find(k.begin(), k.end(), s.key) == k.end()) k.push_back(s.key);
    return k;
}

// ---- run options and output ---------------------------------------------------

struct Options {
    std::string command;
    std::uint64_t seed = 20240601;
    unsigned workers = 1;
    std::string out;  // empty: stdout
    std::string format = "csv";
    std::string config_path;
    std::vector<std::string> sets;
    std::vector<std::string> only;
    bool allow_noncontractive = false;
};

struct Output {
    // Deterministic artifact; timing metadata is written separately.
    std::string body;
    int exit_code = kOk;
};

class Table {
public:
    explicit Table(std::vector<std::string> columns) : cols_(std::move(columns)) {}

    void add(std::vector<std::string> row) {
        if (row.size() != cols_.size()) throw std::logic_error("Table: row width mismatch");
        rows_.push_back(std::move(row));
    }

    std::string csv() const {
        std::string s = join(cols_);
        for (const auto& r : rows_) s += join(r);
        return s;
    }

    nlohmann::json json() const {
        auto a = nlohmann::json::array();
        for (const auto& r : rows_) {
            nlohmann::json o = nlohmann::json::object();
            for (std::size_t i = 0; i < cols_.size(); ++i) o[cols_[i]] = typed(r[i]);
            a.push_back(o);
        }
        return a;
    }

private:
    std::vector<std::string> cols_;
    std::vector<std::vector<std::string>> rows_;

    static std::string quote(const std::string& s) {
        if (s.find_first_of(",\"\n") == std::string::npos) return s;
        std::string q = "\"";
        for (char c : s) q += c == '"' ? std::string("\"\"") : std::string(1, c);
        return q + "\"";
    }
    static std::string join(const std::vector<std::string>& r) {
        std::string s;
        for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + quote(r[i]);
        return s + "\n";
    }
    static nlohmann::json typed(const std::string& s) {
        if (s.empty()) return nullptr;
        char* end = nullptr;
        double v = std::strtod(s.c_str(), &end);
        if (end && *end == '\0') {
            if (s.find_first_of(".eEn") == std::string::npos) return static_cast<long long>(v);
            return v;
        }
        if (s == "true") return true;
        if (s == "false") return false;
        return s;
    }
};

inline const char* verdict(bool ok) { return ok ? "PASS" : "FAIL"; }

struct Artifact {
    Table table{{}};
    nlohmann::json summary = nlohmann::json::object();  // scalar results and verdicts
    bool any_fail = false;
    bool gate_tripped = false;
    std::string gate_reason;
    std::optional<Table> side_table;  // extra CSV written next to the main output
    std::string side_name;
};

inline std::string render(const Options& o, const Params& p, const Artifact& a) {
    if (o.format == "json") {
        nlohmann::json j;
        j["tool"] = "qsk";
        j["version"] = kVersion;
        j["command"] = o.command;
        j["seed"] = o.seed;
        j["config"] = p.echo();
        j["summary"] = a.summary;
        j["rows"] = a.table.json();
        if (a.side_table) j[a.side_name] = a.side_table->json();
        return j.dump(2) + "\n";
    }
    std::string s = std::string("# qsk ") + kVersion + "\n# command: " + o.command + "\n# seed: " + std::to_string(o.seed) + "\n";
    for (const auto& [k, v] : p.echo()) s += "# config: " + k + " = " + v + "\n";
    for (const auto& [k, v] : a.summary.items()) s += "# summary: " + k + " = " + (v.is_string() ? v.get<std::string>() : v.dump()) + "\n";
    return s + a.table.csv();
}

// ---- subcommands ------------------------------------------------------------

inline std::vector<double> sweep(double lo, double hi, int n, bool log_spacing) {
    std::vector<double> x;
    if (n <= 0) return x;
    if (n == 1) return {lo};
    for (int i = 0; i < n; ++i) {
        double t = static_cast<double>(i) / (n - 1);
        x.push_back(log_spacing ? lo * std::pow(hi / lo, t) : lo + (hi - lo) * t);
    }
    return x;
}

inline Artifact cmd_constants(const Options&, const Params& p) {
    double lo = p.real("constants.beta_b_min"), hi = p.real("constants.beta_b_max");
    int points = p.integer("constants.points"), n = p.integer("model.n"), n_max = p.integer("constants.n_max");
    double lambda = p.real("model.lambda");
    int nodes = p.integer("mc.quad_nodes");
    std::string spacing = p.str("constants.spacing");
    if (spacing != "log" && spacing != "linear") p.reject("constants.spacing", "must be log or linear");
    if (!(lo > 0) && spacing == "log") p.reject("constants.beta_b_min", "must be positive for log spacing");
    if (!(lo >= 0) || hi < lo) p.reject("constants.beta_b_max", "must satisfy 0 <= beta_b_min <= beta_b_max");
    if (points < 0) p.reject("constants.points", "must be >= 0");
    if (n < 2) p.reject("model.n", "must be >= 2");
    if (!(lambda > 0)) p.reject("model.lambda", "must be positive");
    if (n_max < 2) p.reject("constants.n_max", "must be >= 2");
    if (nodes < 2) p.reject("mc.quad_nodes", "must be >= 2");

    Artifact a;
    a.table = Table({"beta_b", "m", "p", "c0", "p_n", "g_n_over_n", "inf_g_n_over_n", "w_n", "w_n_error", "m2_lt_p",
                     "p_lt_m", "m_lt_min_1_2p", "2p_lt_1pm", "g_corridor"});
    const double slack = 1e-12;
    long fails = 0;
    for (double x : sweep(lo, hi, points, spacing == "log")) {
        auto cf = closed_forms(n, lambda, x, nodes);
        auto w = w_n_of(n, lambda, x, nodes);
        auto ig = inf_g_n_over_n(lambda, x, n_max);
        double m = cf.m, pp = cf.p;
        bool c1 = m * m < pp + slack, c2 = pp < m + slack, c3 = m < std::min(1.0, 2 * pp) + slack,
             c4 = 2 * pp < (1 + pp) * m + slack;
        auto gc = g_corridor(n, lambda, x);
        bool c5 = gc.upper_gap > 0 && gc.lower_gap > 0;
        // at beta b = 0 the chain degenerates to equalities
        if (x == 0.0) c1 = c2 = c3 = c4 = true;
        fails += !(c1 && c2 && c3 && c4 && c5);
        a.table.add({num(x), num(m), num(pp), num(cf.c0), num(cf.p_n), num(cf.g_n / n), num(ig.value), num(w.value),
                     num(w.error), verdict(c1), verdict(c2), verdict(c3), verdict(c4), verdict(c5)});
    }
    a.summary["rows"] = points;
    a.summary["failed_rows"] = fails;
    a.any_fail = fails > 0;
    return a;
}

inline Artifact cmd_exactdiag(const Options& o, const Params& p) {
    int n = p.integer("model.n"), samples = p.integer("exactdiag.samples");
    double lambda = p.real("model.lambda"), bb = p.real("model.beta_b");
    bool spectra = p.boolean("exactdiag.spectra");
    if (n < 2 || n > 12) p.reject("model.n", "must be in [2, 12]");
    if (!(lambda >= 0)) p.reject("model.lambda", "must be >= 0");
    if (!(bb >= 0)) p.reject("model.beta_b", "must be >= 0");
    if (samples < 0) p.reject("exactdiag.samples", "must be >= 0");
    auto params = ModelParams::dimensionless(n, lambda, bb);
    Artifact a;
    std::vector<std::string> cols{"sample", "log_z", "beta_f", "zz12", "zz_sq_pair_mean", "ground_energy"};
    if (spectra) cols.push_back("eigenvalues");
    a.table = Table(cols);
    std::vector<std::vector<std::string>> rows(samples);
    parallel_for(samples, o.workers, [&](std::size_t i) {
        auto s = DisorderSample::draw(n, o.seed, i);
        auto g = gibbs_by_parity(params, s);
        std::vector<std::string> r{std::to_string(i), num(g.log_z), num(-g.log_z / n), num(zz_from_rho(g.rho, 1, 2)),
                                   num(analyze_sample(params, s).zz_sq_pair_mean), num(g.eigenvalues.front())};
        if (spectra) {
            std::string e;
            for (std::size_t k = 0; k < g.eigenvalues.size(); ++k) e += (k ? " " : "") + num(g.eigenvalues[k]);
            r.push_back(e);
        }
        rows[i] = std::move(r);
    });
    for (auto& r : rows) a.table.add(std::move(r));
    if (n == 2 && lambda > 0) {
        a.summary["beta_f2_quenched_exact"] = f2_quenched_exact(lambda, bb).value;
        a.summary["beta_f2_annealed_exact"] = f2_annealed_exact(lambda, bb).value;
    }
    a.summary["samples"] = samples;
    return a;
}

inline Artifact cmd_annealed(const Options& o, const Params& p) {
    auto ns = p.integers("annealed.n_list");
    auto lambdas = p.reals("annealed.lambda_list");
    auto bbs = p.reals("annealed.beta_b_list");
    int ens = p.integer("mc.ensembles"), nodes = p.integer("mc.quad_nodes");
    for (int n : ns)
        if (n < 2) p.reject("annealed.n_list", "entries must be >= 2");
    for (double l : lambdas)
        if (!(l > 0)) p.reject("annealed.lambda_list", "entries must be positive");
    for (double b : bbs)
        if (!(b >= 0)) p.reject("annealed.beta_b_list", "entries must be >= 0");
    if (ens < 2) p.reject("mc.ensembles", "must be >= 2");
    Artifact a;
    a.table = Table({"n", "lambda", "beta_b", "f_hat", "f_hat_std_err", "ess", "lower_n_pn_lambda", "g_n", "w_n",
                     "beta_f_ann", "beta_f_ann_std_err", "sandwich"});
    double min_ess = INFINITY;
    std::uint64_t idx = 0;
    for (int n : ns)
        for (double l : lambdas)
            for (double b : bbs) {
                auto params = ModelParams::dimensionless(n, l, b);
                auto f = estimate_f_n(params, ens, mix64(o.seed + idx++), o.workers);
                auto fa = annealed_from_f_n(params, f);
                double lo = n * p_n_of(n, b) * l, g = g_n_of(n, l, b);
                auto w = w_n_of(n, l, b, nodes);
                bool ok = f.value >= lo - 3 * f.std_err && f.value <= std::min(w.value, g) + 3 * f.std_err;
                a.any_fail |= !ok;
                min_ess = std::min(min_ess, f.ess);
                a.table.add({std::to_string(n), num(l), num(b), num(f.value), num(f.std_err), num(f.ess), num(lo), num(g),
                             num(w.value), num(fa.value), num(fa.std_err), verdict(ok)});
            }
    if (min_ess < kMinEss) {
        a.gate_tripped = true;
        a.gate_reason = "effective sample size " + num(min_ess) + " below " + num(kMinEss);
    }
    return a;
}

inline Artifact cmd_variational(const Options& o, const Params& p) {
    double lambda = p.real("model.lambda"), bb = p.real("model.beta_b"), tol = p.real("variational.tol");
    int cells = p.integer("variational.cells"), iters = p.integer("variational.max_iter"), paths = p.integer("mc.paths");
    int n_max = p.integer("variational.n_max");
    std::string start = p.str("variational.start");
    if (!(lambda >= 0)) p.reject("model.lambda", "must be >= 0");
    if (2 * lambda >= 1 && !o.allow_noncontractive)
        p.reject("model.lambda", "gives 2 lambda >= 1 where the iteration need not contract; pass --allow-noncontractive");
    if (!(bb > 0)) p.reject("model.beta_b", "must be positive");
    if (cells < 2) p.reject("variational.cells", "must be >= 2");
    if (paths < 2) p.reject("mc.paths", "must be >= 2");
    if (start != "mu" && start != "one") p.reject("variational.start", "must be mu or one");
    if (!(tol > 0)) p.reject("variational.tol", "must be positive");

    auto ens = sample_ensemble(paths, bb, o.seed, o.workers);
    auto proj = project(ens, cells, o.workers);
    auto rep = fixed_point_solve(lambda, bb, proj, tol, iters,
                                 start == "mu" ? FixedPointStart::two_lambda_mu : FixedPointStart::two_lambda_one, o.workers);
    Artifact a;
    a.summary = report_to_json(rep, lambda, bb, o.seed);
    a.summary.erase("psi");
    a.table = Table({"i", "j", "t_i", "t_j", "psi", "psi_std_err", "two_lambda_mu"});
    auto mu_grid = discretize_mu(cells, bb);
    for (int i = 0; i < cells; ++i)
        for (int j = 0; j < cells; ++j) {
            std::size_t c = static_cast<std::size_t>(i) * cells + j;
            a.table.add({std::to_string(i), std::to_string(j), num((i + 0.5) / cells), num((j + 0.5) / cells),
                         num(rep.psi.values[c]), num(rep.psi_std_err.values.empty() ? 0.0 : rep.psi_std_err.values[c]),
                         num(2 * lambda * mu_grid.values[c])});
        }
    if (lambda > 0) {
        double om = rep.omega_value.value, s = rep.omega_value.std_err;
        double pp = p_of(bb), m = m_of(bb), l3 = lambda * lambda * lambda;
        double ig = inf_g_n_over_n(lambda, bb, n_max).value;
        bool sandwich = om >= -ig - 3 * s && om <= -pp * lambda + 3 * s;
        auto gap = omega_difference(mu_grid * (2 * lambda), rep.psi, lambda, proj, o.workers);
        bool gap_ok = gap.value >= -3 * gap.std_err && gap.value <= 4 * l3 + 3 * gap.std_err;
        double taylor = taylor_prediction(lambda, bb);
        bool taylor_ok = std::fabs(om - taylor) <= (4 + 4.0 / 3.0 * m * m * m) * l3 + 3 * s;
        double threshold = (pp - m * m) / (2 * pp * (1 - m));
        a.summary["sandwich"] = {{"lower", -ig}, {"upper", -pp * lambda}, {"verdict", verdict(sandwich)}};
        a.summary["gap"] = {{"value", gap.value}, {"std_err", gap.std_err}, {"bound", 4 * l3}, {"verdict", verdict(gap_ok)}};
        a.summary["taylor"] = {{"prediction", taylor}, {"verdict", verdict(taylor_ok)}};
        if (lambda < threshold) {
            double j = static_approximation(lambda, bb).j;
            bool sep = j > -pp * lambda;
            a.summary["static"] = {{"j", j}, {"threshold", threshold}, {"verdict", verdict(sep)}};
            a.any_fail |= !sep;
        } else {
            a.summary["static"] = {{"threshold", threshold}, {"verdict", "n/a"}};
        }
        a.any_fail |= !(sandwich && gap_ok && taylor_ok && rep.converged);
        if (rep.min_ess < kMinEss) {
            a.gate_tripped = true;
            a.gate_reason = "effective sample size " + num(rep.min_ess) + " below " + num(kMinEss);
        }
    }
    return a;
}

inline Artifact cmd_static(const Options&, const Params& p) {
    auto bbs = p.reals("static.beta_b_list");
    double lo = p.real("static.lambda_min"), hi = p.real("static.lambda_max");
    int points = p.integer("static.points");
    if (!(lo > 0) || hi < lo) p.reject("static.lambda_max", "must satisfy 0 < lambda_min <= lambda_max");
    if (points < 0) p.reject("static.points", "must be >= 0");
    for (double b : bbs)
        if (!(b > 0)) p.reject("static.beta_b_list", "entries must be positive");
    Artifact a;
    a.table = Table({"beta_b", "lambda", "j", "j_over_lambda", "x_min", "minus_p_lambda", "minus_m2_lambda", "taylor",
                     "separation"});
    for (double b : bbs) {
        double pp = p_of(b), m = m_of(b);
        double threshold = (pp - m * m) / (2 * pp * (1 - m));
        for (double l : sweep(lo, hi, points, true)) {
            auto s = static_approximation(l, b);
            std::string sep = "n/a";
            if (l < threshold) {
                bool ok = s.j > -pp * l;
                a.any_fail |= !ok;
                sep = verdict(ok);
            }
            a.table.add({num(b), num(l), num(s.j), num(s.j / l), num(s.x), num(-pp * l), num(-m * m * l),
                         num(taylor_prediction(l, b)), sep});
        }
    }
    return a;
}

inline Artifact cmd_quenched(const Options& o, const Params& p) {
    int n = p.integer("model.n"), samples = p.integer("quenched.samples"), systems = p.integer("quenched.pair_systems");
    double lambda = p.real("model.lambda"), bb = p.real("model.beta_b"), delta = p.real("quenched.delta");
    auto trend_n = p.integers("quenched.trend_n");
    auto gammas = p.reals("quenched.gamma_list");
    if (n < 2 || n > 10) p.reject("model.n", "must be in [2, 10]");
    if (!(lambda > 0) || 4 * lambda >= 1) p.reject("model.lambda", "must satisfy 0 < 4 lambda < 1");
    if (!(bb >= 0)) p.reject("model.beta_b", "must be >= 0");
    if (samples < 10) p.reject("quenched.samples", "must be >= 10");
    if (delta < 0) p.reject("quenched.delta", "must be >= 0 (0 selects 0.3 beta v / sqrt(N))");
    for (int t : trend_n)
        if (t < 2 || t > 10) p.reject("quenched.trend_n", "entries must be in [2, 10]");
    if (!gammas.empty() && n > 4) p.reject("quenched.gamma_list", "needs model.n <= 4");
    for (double g : gammas)
        if (!(4 * (lambda + g) < 1) || lambda + g < 0) p.reject("quenched.gamma_list", "entries need 0 <= 4(lambda+gamma) < 1");

    auto params = ModelParams::dimensionless(n, lambda, bb);
    double beta_v = params.beta * params.v;
    if (delta == 0) delta = 0.3 * beta_v / std::sqrt(static_cast<double>(n));
    DisorderStudyConfig cfg{params, samples, o.seed, delta, o.workers};
    auto r = run_study(cfg);
    double c = second_moment_constant(lambda);
    Artifact a;
    auto est = [](const EstimateWithError& e) { return nlohmann::json{{"value", e.value}, {"std_err", e.std_err}}; };
    auto prop = [](const Proportion& e) { return nlohmann::json{{"value", e.value}, {"std_err", e.std_err}}; };
    bool smr = r.second_moment_ratio.value <= c + 3 * r.second_moment_ratio.std_err;
    bool pz = r.paley_zygmund.value >= 1 / (4 * c) - 3 * r.paley_zygmund.std_err;
    bool tail = r.tail_frequency.value <= r.tail_bound + 3 * r.tail_frequency.std_err;
    auto ann = annealed_free_energy(params, 100000, mix64(o.seed ^ 0x5eedULL), o.workers);
    bool jensen = r.quenched_mean.value >= ann.value - 3 * std::hypot(r.quenched_mean.std_err, ann.std_err);
    a.summary["quenched_beta_f"] = est(r.quenched_mean);
    a.summary["annealed_beta_f"] = est(ann);
    a.summary["jensen"] = verdict(jensen);
    a.summary["second_moment_ratio"] = est(r.second_moment_ratio);
    a.summary["second_moment_constant"] = c;
    a.summary["second_moment"] = verdict(smr);
    a.summary["paley_zygmund"] = prop(r.paley_zygmund);
    a.summary["paley_zygmund_bound"] = 1 / (4 * c);
    a.summary["paley_zygmund_verdict"] = verdict(pz);
    a.summary["delta"] = delta;
    a.summary["tail_frequency"] = prop(r.tail_frequency);
    a.summary["tail_bound"] = r.tail_bound;
    a.summary["concentration"] = verdict(tail);
    a.summary["order_parameter"] = est(r.order_parameter);
    a.any_fail = !(smr && pz && tail && jensen);
    if (!trend_n.empty()) {
        auto t = order_parameter_trend(params, trend_n, samples, mix64(o.seed + 1), o.workers);
        auto arr = nlohmann::json::array();
        for (std::size_t i = 0; i < t.size(); ++i) arr.push_back({{"n", trend_n[i]}, {"value", t[i].value}, {"std_err", t[i].std_err}});
        a.summary["order_parameter_trend"] = arr;
    }
    if (!gammas.empty()) {
        auto arr = nlohmann::json::array();
        for (std::size_t i = 0; i < gammas.size(); ++i) {
            auto g = generalized_second_moment(params, gammas[i], systems, mix64(o.seed + 100 + i), o.workers);
            bool ok = g.value <= 1 + 3 * g.std_err;
            a.any_fail |= !ok;
            arr.push_back({{"gamma", gammas[i]}, {"ratio", g.value}, {"std_err", g.std_err}, {"verdict", verdict(ok)}});
        }
        a.summary["generalized_second_moment"] = arr;
    }
    a.table = Table({"sample", "beta_f", "zz12", "zz_sq_pair_mean", "log_z"});
    for (std::size_t i = 0; i < r.samples.size(); ++i) {
        const auto& s = r.samples[i];
        a.table.add({std::to_string(i), num(s.beta_f), num(s.zz12), num(s.zz_sq_pair_mean), num(s.log_z)});
    }
    return a;
}

inline Artifact cmd_region(const Options& o, const Params& p) {
    RegionGrid g;
    g.inv_beta_v_min = p.real("region.inv_beta_v_min");
    g.inv_beta_v_max = p.real("region.inv_beta_v_max");
    g.n_inv_beta_v = p.integer("region.inv_beta_v_points");
    g.b_over_v_min = p.real("region.b_over_v_min");
    g.b_over_v_max = p.real("region.b_over_v_max");
    g.n_b_over_v = p.integer("region.b_over_v_points");
    g.n_max = p.integer("region.n_max");
    int adv = p.integer("region.advisory_points");
    if (!(g.inv_beta_v_min > 0) || g.inv_beta_v_max < g.inv_beta_v_min)
        p.reject("region.inv_beta_v_max", "must satisfy 0 < inv_beta_v_min <= inv_beta_v_max");
    if (g.b_over_v_min < 0 || g.b_over_v_max < g.b_over_v_min)
        p.reject("region.b_over_v_max", "must satisfy 0 <= b_over_v_min <= b_over_v_max");
    if (g.n_inv_beta_v < 2) p.reject("region.inv_beta_v_points", "must be >= 2");
    if (g.n_b_over_v < 2) p.reject("region.b_over_v_points", "must be >= 2");
    if (g.n_max < 2) p.reject("region.n_max", "must be >= 2");
    if (adv < 2) p.reject("region.advisory_points", "must be >= 2");
    Artifact a;
    a.table = Table({"inv_beta_v", "b_over_v", "delta_lower", "delta_upper", "lower_bound_positive", "weak_disorder",
                     "classification"});
    long counts[3] = {0, 0, 0};
    for (const auto& r : region_scan(g, o.workers)) {
        ++counts[static_cast<int>(r.classification)];
        a.table.add({num(r.inv_beta_v), num(r.b_over_v), num(r.delta_lower), num(r.delta_upper),
                     r.lower_bound_positive ? "true" : "false", r.weak_disorder ? "true" : "false",
                     to_string(r.classification)});
    }
    a.summary["zero"] = counts[0];
    a.summary["positive"] = counts[1];
    a.summary["unknown"] = counts[2];
    Table side({"inv_beta_v", "b_over_v"});
    for (auto [x, y] : advisory_curve(adv)) side.add({num(x), num(y)});
    a.side_table = std::move(side);
    a.side_name = "advisory";
    return a;
}

inline Artifact cmd_verify(const Options& o, const Params&, std::ostream& log) {
    acceptance::Context ctx{o.seed, o.workers};
    for (const auto& s : o.only) {
        bool known = false;
        for (const auto& c : acceptance::criteria()) known |= s == c.group || s == std::to_string(c.id);
        if (!known) throw UsageError("--only: unknown criterion or group '" + s + "'");
    }
    auto results = acceptance::run(ctx, o.only, [&](const acceptance::CriterionResult& r) {
        log << (r.pass ? "PASS" : "FAIL") << " criterion " << r.id << " (" << r.name << ") "
            << acceptance::fmt("%.1f s", r.seconds) << "\n";
        log.flush();
    });
    Artifact a;
    a.table = Table({"criterion", "name", "verdict", "check"});
    long failed = 0;
    for (const auto& r : results) {
        failed += !r.pass;
        for (const auto& d : r.details) a.table.add({std::to_string(r.id), r.name, verdict(r.pass), d});
    }
    a.summary["criteria"] = results.size();
    a.summary["failed"] = failed;
    a.any_fail = failed > 0;
    return a;
}

inline std::string side_path(const std::string& out, const std::string& name, const std::string& ext) {
    return out + "." + name + "." + ext;
}

inline std::string utc_now() {
    std::time_t t = std::time(nullptr);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
    return buf;
}

// Runs one subcommand. Artifacts go to o.out (or `out`), diagnostics to `log`.
inline int execute(const Options& o, std::ostream& out, std::ostream& log) {
    auto started = utc_now();
    auto t0 = std::chrono::steady_clock::now();
    try {
        auto it = schemas().find(o.command);
        if (it == schemas().end()) throw UsageError("unknown subcommand '" + o.command + "'");
        if (o.format != "csv" && o.format != "json") throw UsageError("--format must be csv or json");
        if (o.workers < 1) throw UsageError("--workers must be >= 1");
        ConfigFile cfg;
        if (!o.config_path.empty()) cfg = ConfigFile::load(o.config_path);
        for (const auto& s : o.sets) cfg.set(s);
        Params params(it->second, cfg, all_keys());

        Artifact a;
        if (o.command == "constants") a = cmd_constants(o, params);
        else if (o.command == "exactdiag") a = cmd_exactdiag(o, params);
        else if (o.command == "annealed") a = cmd_annealed(o, params);
        else if (o.command == "variational") a = cmd_variational(o, params);
        else if (o.command == "static") a = cmd_static(o, params);
        else if (o.command == "quenched") a = cmd_quenched(o, params);
        else if (o.command == "region") a = cmd_region(o, params);
        else a = cmd_verify(o, params, log);

        std::string body = render(o, params, a);
        if (o.out.empty()) {
            out << body;
        } else {
            std::ofstream f(o.out, std::ios::binary);
            if (!f) throw UsageError("cannot write '" + o.out + "'");
            f << body;
            if (a.side_table && o.format == "csv") {
                std::ofstream s(side_path(o.out, a.side_name, "csv"), std::ios::binary);
                s << a.side_table->csv();
            }
        }
        double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        nlohmann::json timing{{"started_utc", started}, {"finished_utc", utc_now()}, {"elapsed_seconds", secs},
                              {"workers", o.workers}, {"command", o.command}};
        if (!o.out.empty()) {
            std::ofstream t(side_path(o.out, "timing", "json"));
            t << timing.dump(2) << "\n";
        }
        log << "qsk " << o.command << ": " << acceptance::fmt("%.2f s", secs) << ", started " << started << "\n";
        if (a.gate_tripped) {
            log << "numerical gate: " << a.gate_reason << "\n";
            return kNumerical;
        }
        return a.any_fail ? kCheckFailed : kOk;
    } catch (const UsageError& e) {
        log << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const DomainError& e) {
        log << "error: " << e.what() << "\n";
        return kUsage;
    } catch (const NumericalError& e) {
        log << "numerical error: " << e.what() << "\n";
        return kNumerical;
    }
}

}  // namespace qsk::cli
