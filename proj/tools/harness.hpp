// Command layer of the wpsle tool: key=value configs with [sections], CSV
// tables tagged with the config hash, and the eight subcommands.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "wpsle/boundary.hpp"
#include "wpsle/checkpoint.hpp"
#include "wpsle/error.hpp"
#include "wpsle/exponents.hpp"
#include "wpsle/format.hpp"
#include "wpsle/montecarlo.hpp"
#include "wpsle/operator.hpp"

namespace wpsle::cli {

inline std::string trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const auto next = s.find(',', pos);
        const auto item = trim(s.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos));
        if (!item.empty()) out.push_back(item);
        if (next == std::string_view::npos) break;
        pos = next + 1;
    }
    return out;
}

class Config {
public:
    struct Entry {
        std::string value;
        int line = 0;
    };

    static Config parse(std::string_view text) {
        Config c;
        std::string section;
        int line_no = 0;
        std::size_t pos = 0;
        while (pos <= text.size()) {
            const auto nl = text.find('\n', pos);
            std::string line(text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos));
            pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;
            ++line_no;
            if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
            line = trim(line);
            if (line.empty()) continue;
            if (line.front() == '[') {
                if (line.back() != ']') fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": unterminated section header");
                section = trim(std::string_view(line).substr(1, line.size() - 2));
                if (section.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": empty section name");
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": expected key = value");
            const auto key = trim(std::string_view(line).substr(0, eq));
            if (key.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": empty key");
            if (section.empty()) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": key outside any section");
            auto& sec = c.data_[section];
            if (sec.count(key)) fail(ErrorCode::ConfigError, "line " + std::to_string(line_no) + ": duplicate field " + section + "." + key);
            sec[key] = {trim(std::string_view(line).substr(eq + 1)), line_no};
        }
        return c;
    }

    static Config load(const std::filesystem::path& file) {
        std::ifstream is(file, std::ios::binary);
        if (!is) fail(ErrorCode::ConfigError, "cannot read config " + file.string());
        std::ostringstream ss;
        ss << is.rdbuf();
        return parse(ss.str());
    }

    bool has(const std::string& sec, const std::string& key) const {
        const auto it = data_.find(sec);
        return it != data_.end() && it->second.count(key);
    }
    void set(const std::string& sec, const std::string& key, const std::string& value) { data_[sec][key] = {value, 0}; }

    /// Rejects sections and keys outside `allowed`.
    void restrict_to(const std::map<std::string, std::set<std::string>>& allowed) const {
        for (const auto& [sec, kv] : data_) {
            const auto a = allowed.find(sec);
            if (a == allowed.end()) fail(ErrorCode::ConfigError, "unknown section [" + sec + "]");
            for (const auto& [k, e] : kv)
                if (!a->second.count(k)) fail(ErrorCode::ConfigError, where(sec, k) + ": unknown field");
        }
    }

    std::string text(const std::string& sec, const std::string& key, std::optional<std::string> def = std::nullopt) const {
        if (!has(sec, key)) {
            if (def) return *def;
            fail(ErrorCode::ConfigError, "missing field " + sec + "." + key);
        }
        return data_.at(sec).at(key).value;
    }

    double real(const std::string& sec, const std::string& key, std::optional<double> def = std::nullopt) const {
        if (!has(sec, key)) {
            if (def) return *def;
            fail(ErrorCode::ConfigError, "missing field " + sec + "." + key);
        }
        return to_real(sec, key, data_.at(sec).at(key).value);
    }

    std::uint64_t integer(const std::string& sec, const std::string& key, std::optional<std::uint64_t> def = std::nullopt) const {
        if (!has(sec, key)) {
            if (def) return *def;
            fail(ErrorCode::ConfigError, "missing field " + sec + "." + key);
        }
        const auto& v = data_.at(sec).at(key).value;
        std::uint64_t out = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size()) fail(ErrorCode::ConfigError, where(sec, key) + ": not a non-negative integer '" + v + "'");
        return out;
    }

    bool flag(const std::string& sec, const std::string& key, bool def) const {
        if (!has(sec, key)) return def;
        const auto v = data_.at(sec).at(key).value;
        if (v == "true" || v == "1") return true;
        if (v == "false" || v == "0") return false;
        fail(ErrorCode::ConfigError, where(sec, key) + ": expected true or false");
    }

    /// `key = a, b, c`, or `key_range = lo, hi, n` for n evenly spaced values.
    std::vector<double> reals(const std::string& sec, const std::string& key, std::optional<std::vector<double>> def = std::nullopt) const {
        const std::string rk = key + "_range";
        if (has(sec, key) && has(sec, rk)) fail(ErrorCode::ConfigError, where(sec, key) + ": give either " + key + " or " + rk);
        std::vector<double> out;
        if (has(sec, rk)) {
            const auto items = split_list(data_.at(sec).at(rk).value);
            if (items.size() != 3) fail(ErrorCode::ConfigError, where(sec, rk) + ": expected lo, hi, n");
            const double lo = to_real(sec, rk, items[0]), hi = to_real(sec, rk, items[1]);
            const double n = to_real(sec, rk, items[2]);
            if (!(n >= 1) || n != std::floor(n)) fail(ErrorCode::ConfigError, where(sec, rk) + ": n must be a positive integer");
            for (int i = 0; i < int(n); ++i) out.push_back(n == 1 ? lo : lo + (hi - lo) * i / (n - 1));
        } else if (has(sec, key)) {
            for (const auto& it : split_list(data_.at(sec).at(key).value)) out.push_back(to_real(sec, key, it));
        } else if (def) {
            return *def;
        } else {
            fail(ErrorCode::ConfigError, "missing field " + sec + "." + key);
        }
        if (out.empty()) fail(ErrorCode::ConfigError, where(sec, has(sec, key) ? key : rk) + ": empty list");
        return out;
    }

    std::vector<std::string> words(const std::string& sec, const std::string& key, std::vector<std::string> def) const {
        if (!has(sec, key)) return def;
        auto out = split_list(data_.at(sec).at(key).value);
        if (out.empty()) fail(ErrorCode::ConfigError, where(sec, key) + ": empty list");
        return out;
    }

    /// Sections and keys sorted, values verbatim.
    std::string canonical() const {
        std::string s;
        for (const auto& [sec, kv] : data_) {
            s += "[" + sec + "]\n";
            for (const auto& [k, e] : kv) s += k + "=" + e.value + "\n";
        }
        return s;
    }
    std::uint64_t hash() const { return fnv1a64(canonical()); }

    std::string where(const std::string& sec, const std::string& key) const {
        const int line = has(sec, key) ? data_.at(sec).at(key).line : 0;
        return (line > 0 ? "line " + std::to_string(line) + ": " : std::string()) + "field " + sec + "." + key;
    }

private:
    double to_real(const std::string& sec, const std::string& key, const std::string& v) const {
        double out = 0;
        const auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
        if (ec != std::errc() || p != v.data() + v.size() || !std::isfinite(out))
            fail(ErrorCode::ConfigError, where(sec, key) + ": not a finite number '" + v + "'");
        return out;
    }

    std::map<std::string, std::map<std::string, Entry>> data_;
};

struct Table {
    std::vector<std::string> columns;
    std::vector<std::vector<std::string>> rows;

    void add(std::vector<std::string> row) { rows.push_back(std::move(row)); }

    std::string render(std::uint64_t config_hash) const {
        std::string s = "# config_hash=" + format_hex(config_hash) + "\n";
        for (std::size_t i = 0; i < columns.size(); ++i) s += (i ? "," : "") + columns[i];
        s += "\n";
        for (const auto& r : rows) {
            for (std::size_t i = 0; i < r.size(); ++i) s += (i ? "," : "") + r[i];
            s += "\n";
        }
        return s;
    }

    /// Column index by name.
    std::size_t col(std::string_view name) const {
        for (std::size_t i = 0; i < columns.size(); ++i)
            if (columns[i] == name) return i;
        fail(ErrorCode::ConfigError, "no column " + std::string(name));
    }
};

inline std::string cell(double v) { return format_double(v); }
inline std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }
inline std::string cell(int v) { return std::to_string(v); }
inline std::string cell(std::uint64_t v) { return std::to_string(v); }

struct RunOptions {
    std::filesystem::path out_dir = ".";
    std::optional<std::filesystem::path> resume;
    std::optional<std::uint64_t> seed;
    std::optional<unsigned> threads;
};

struct Outcome {
    /// File name (inside the output directory) and its table.
    std::vector<std::pair<std::string, Table>> files;
    std::vector<std::string> violations;
};

/// Module errors thrown before `computing` is set count as config errors.
struct Phase {
    bool computing = false;
};

namespace detail {

inline std::vector<Parameters> grid(const Config& c, const std::string& sec) {
    const auto ks = c.reals(sec, "kappa");
    const auto ts = c.reals(sec, "t");
    std::vector<Parameters> out;
    for (double k : ks)
        for (double t : ts) out.push_back(make_parameters(k, t));
    return out;
}

inline std::filesystem::path checkpoint_path(const Config& c, const RunOptions& o) {
    const auto name = c.text("simulate", "checkpoint", "simulate.ckpt");
    if (name.find('/') != std::string::npos || name.find('\\') != std::string::npos || name == ".." || name == ".")
        fail(ErrorCode::ConfigError, c.where("simulate", "checkpoint") + ": must be a plain file name");
    return o.out_dir / name;
}

inline const std::set<std::string> simulate_keys{"kappa", "t", "t_range", "radii", "k_min", "k_max", "n_theta", "arcs",
                                                 "n_paths", "seed", "dtau", "c_step", "escape_radius", "horizon",
                                                 "chunk_paths", "checkpoint", "checkpoint_every"};

inline MonteCarloConfig mc_config(const Config& c, const RunOptions& o) {
    MonteCarloConfig mc;
    mc.kappa = c.real("simulate", "kappa");
    if (!(mc.kappa > 0)) fail(ErrorCode::ConfigError, c.where("simulate", "kappa") + ": must be > 0");
    mc.t_values = c.reals("simulate", "t");
    if (c.has("simulate", "radii")) {
        if (c.has("simulate", "k_min") || c.has("simulate", "k_max"))
            fail(ErrorCode::ConfigError, c.where("simulate", "radii") + ": give either radii or k_min/k_max");
        mc.radii = c.reals("simulate", "radii");
    } else {
        const auto lo = c.integer("simulate", "k_min", 4), hi = c.integer("simulate", "k_max", 9);
        if (lo > hi || hi > 40) fail(ErrorCode::ConfigError, c.where("simulate", "k_max") + ": need k_min <= k_max <= 40");
        mc.radii = dyadic_ladder(int(lo), int(hi));
    }
    const auto nth = c.integer("simulate", "n_theta", 256);
    if (nth < 1 || nth > (1u << 20)) fail(ErrorCode::ConfigError, c.where("simulate", "n_theta") + ": out of range");
    mc.thetas = uniform_angles(int(nth));
    mc.exclusion_arcs = c.reals("simulate", "arcs", std::vector<double>{0.0});
    mc.n_paths = c.integer("simulate", "n_paths");
    mc.master_seed = o.seed ? *o.seed : c.integer("simulate", "seed", 1);
    mc.dtau = c.real("simulate", "dtau", 1e-2);
    mc.flow.c_step = c.real("simulate", "c_step", 0.05);
    mc.flow.escape_radius = c.real("simulate", "escape_radius", 1e3);
    if (c.has("simulate", "horizon")) mc.horizon = c.real("simulate", "horizon");
    mc.chunk_paths = c.integer("simulate", "chunk_paths", 32);
    if (!(mc.flow.c_step > 0)) fail(ErrorCode::ConfigError, c.where("simulate", "c_step") + ": must be > 0");
    if (!(mc.flow.escape_radius > 1)) fail(ErrorCode::ConfigError, c.where("simulate", "escape_radius") + ": must be > 1");
    mc.threads = o.threads.value_or(0);
    mc.validate();
    return mc;
}

inline LadderRun load_run(const Config& c, const RunOptions& o) {
    const auto mc = mc_config(c, o);
    const auto file = o.resume ? *o.resume : checkpoint_path(c, o);
    if (!std::filesystem::exists(file)) fail(ErrorCode::ConfigError, "no checkpoint at " + file.string() + "; run simulate first");
    return load_checkpoint(mc, file);
}

inline double ols_order(const std::vector<double>& lh, const std::vector<double>& le) {
    double xm = 0, ym = 0;
    for (std::size_t i = 0; i < lh.size(); ++i) {
        xm += lh[i];
        ym += le[i];
    }
    xm /= double(lh.size());
    ym /= double(lh.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < lh.size(); ++i) {
        sxx += (lh[i] - xm) * (lh[i] - xm);
        sxy += (lh[i] - xm) * (le[i] - ym);
    }
    return sxy / sxx;
}

}  // namespace detail

inline Outcome cmd_exponents(const Config& c, const RunOptions&, Phase& ph) {
    c.restrict_to({{"exponents", {"kappa", "kappa_range", "t", "t_range"}}});
    const auto g = detail::grid(c, "exponents");
    ph.computing = true;
    Table tb{{"kappa", "t", "gamma0", "gamma1", "beta0", "beta1", "beta_tip", "beta_lin", "a", "b", "c", "alpha", "sigma"}, {}};
    for (const auto& p : g) {
        const auto e = exponent_set(p);
        tb.add({cell(p.kappa), cell(p.t), cell(e.gamma0), cell(e.gamma1), cell(e.beta0), cell(e.beta1), cell(e.beta_tip),
                cell(e.beta_lin), cell(e.a), cell(e.b), cell(e.c), cell(e.alpha), cell(e.sigma)});
    }
    return {{{"exponents.csv", std::move(tb)}}, {}};
}

inline Outcome cmd_spectrum_table(const Config& c, const RunOptions&, Phase& ph) {
    c.restrict_to({{"spectrum", {"kappa", "kappa_range", "t", "t_range"}}});
    const auto g = detail::grid(c, "spectrum");
    ph.computing = true;
    Table tb{{"kappa", "t", "beta_tip", "beta0", "beta1", "beta_lin", "branch_i", "branch_ii", "t1", "t2", "t3", "s", "nu"}, {}};
    for (const auto& p : g) {
        const auto e = exponent_set(p);
        const auto ts = transitions(p.kappa);
        std::optional<double> s, nu;
        if (p.t <= ts.t1) {
            s = packing_and_nu(p.kappa, p.t, Direction::Forward);
            nu = packing_and_nu(p.kappa, *s, Direction::Inverse);
        }
        tb.add({cell(p.kappa), cell(p.t), cell(e.beta_tip), cell(e.beta0), cell(e.beta1), cell(e.beta_lin),
                to_string(theorem_spectrum(p, true).branch), to_string(theorem_spectrum(p, false).branch), cell(ts.t1),
                cell(ts.t2), cell(ts.t3), cell(s), cell(nu)});
    }
    return {{{"spectrum.csv", std::move(tb)}}, {}};
}

inline Outcome cmd_g0_profile(const Config& c, const RunOptions&, Phase& ph) {
    c.restrict_to({{"g0", {"kappa", "kappa_range", "t", "t_range", "u", "u_range", "max_residual"}}});
    const auto g = detail::grid(c, "g0");
    std::vector<double> us;
    for (int i = 1; i <= 399; ++i) us.push_back(0.01 * i);
    us = c.reals("g0", "u", us);
    for (double u : us)
        if (!(u > 0 && u < 4)) fail(ErrorCode::ConfigError, c.where("g0", "u") + ": values must lie in (0, 4)");
    const std::optional<double> limit = c.has("g0", "max_residual") ? std::optional(c.real("g0", "max_residual")) : std::nullopt;
    for (const auto& p : g) need(exponent_set(p).gamma0, "gamma0");
    ph.computing = true;
    Outcome out;
    Table tb{{"kappa", "t", "u", "g0", "g0_prime", "residual"}, {}};
    for (const auto& p : g) {
        const auto sol = build_g0(p);
        for (double u : us) {
            const auto j = sol.eval(u);
            const double res = ode_residual(sol, u).hypergeometric;
            if (limit && !(res <= *limit))
                out.violations.push_back("g0 residual " + cell(res) + " above " + cell(*limit) + " at kappa=" + cell(p.kappa) +
                                         " t=" + cell(p.t) + " u=" + cell(u));
            tb.add({cell(p.kappa), cell(p.t), cell(u), cell(j.value), cell(j.d1), cell(res)});
        }
    }
    out.files.emplace_back("g0_profile.csv", std::move(tb));
    return out;
}

inline TrialFunction trial_of(const std::string& kind, const Parameters& p, double delta) {
    if (kind == "psi0") return TrialFunction::hypergeometric(p);
    if (kind == "psi1") return TrialFunction::pure_power(p);
    if (kind == "mixed") return TrialFunction::mixed(p, delta);
    fail(ErrorCode::ConfigError, "field pde.kinds: unknown kind '" + kind + "' (psi0, psi1, mixed)");
}

inline Outcome cmd_pde_verify(const Config& c, const RunOptions&, Phase& ph) {
    c.restrict_to({{"pde", {"kappa", "kappa_range", "t", "t_range", "kinds", "r", "theta", "delta", "levels", "max_rel_error"}}});
    const auto g = detail::grid(c, "pde");
    const auto kinds = c.words("pde", "kinds", {"psi0", "psi1", "mixed"});
    const auto rs = c.reals("pde", "r", std::vector<double>{1.1, 1.2, 1.3});
    const auto ths = c.reals("pde", "theta", std::vector<double>{0.5, 1.5, 3.0});
    const double delta = c.real("pde", "delta", 0.5);
    const auto levels = c.integer("pde", "levels", 5);
    const double limit = c.real("pde", "max_rel_error", 1e-4);
    if (levels < 2 || levels > 12) fail(ErrorCode::ConfigError, c.where("pde", "levels") + ": must lie in [2, 12]");
    for (double r : rs)
        if (!(r > 1 && r * r - 1 < 1)) fail(ErrorCode::ConfigError, c.where("pde", "r") + ": need 1 < r < sqrt(2)");
    std::vector<TrialFunction> trials;
    for (const auto& p : g)
        for (const auto& k : kinds) trials.push_back(trial_of(k, p, delta));
    ph.computing = true;

    Outcome out;
    Table pts{{"kappa", "t", "kind", "r", "theta", "level", "h_r", "h_theta", "analytic", "numeric", "rel_error"}, {}};
    Table sum{{"kappa", "t", "kind", "order", "max_rel_error"}, {}};
    std::size_t ki = 0;
    for (const auto& tf : trials) {
        const auto& kind = kinds[ki++ % kinds.size()];
        const auto& p = tf.params();
        const GridFunction F = [&](double r, double th) { return tf(r, th); };
        std::vector<double> lh, le;
        double finest = 0;
        for (std::uint64_t l = 0; l < levels; ++l) {
            const double s = std::ldexp(1.0, -int(l));
            double worst = 0;
            for (double r : rs)
                for (double th : ths) {
                    const PolarPoint z{r, th};
                    const double hr = (r - 1) / 8 * s, ht = 0.05 * s;
                    const double a = lambda_analytic(tf, z), n = lambda_numeric(F, p, z, hr, ht);
                    const double rel = std::abs(n - a) / std::abs(a);
                    worst = std::max(worst, rel);
                    pts.add({cell(p.kappa), cell(p.t), kind, cell(r), cell(th), cell(int(l)), cell(hr), cell(ht), cell(a), cell(n), cell(rel)});
                }
            // levels in the rounding floor carry no order information
            if (worst > 1e-8 || lh.size() < 2) {
                lh.push_back(std::log(s));
                le.push_back(std::log(worst));
            }
            finest = worst;
        }
        const double order = detail::ols_order(lh, le);
        sum.add({cell(p.kappa), cell(p.t), kind, cell(order), cell(finest)});
        if (!(finest < limit))
            out.violations.push_back("max relative mismatch " + cell(finest) + " not below " + cell(limit) + " for " + kind +
                                     " kappa=" + cell(p.kappa) + " t=" + cell(p.t));
    }
    out.files.emplace_back("pde_points.csv", std::move(pts));
    out.files.emplace_back("pde_summary.csv", std::move(sum));
    return out;
}

inline Outcome cmd_subsolution_scan(const Config& c, const RunOptions&, Phase& ph) {
    c.restrict_to({{"scan", {"kappa", "t", "delta", "kind", "k_min", "k_max", "n_theta"}}});
    const auto p = make_parameters(c.real("scan", "kappa"), c.real("scan", "t"));
    const double delta = c.real("scan", "delta");
    const auto kind_name = c.text("scan", "kind", "mixed");
    if (kind_name != "mixed" && kind_name != "psi0") fail(ErrorCode::ConfigError, c.where("scan", "kind") + ": expected mixed or psi0");
    const auto kind = kind_name == "mixed" ? TrialKind::Mixed : TrialKind::Hypergeometric;
    const auto kmin = c.integer("scan", "k_min", 4), kmax = c.integer("scan", "k_max", 14);
    const auto nth = c.integer("scan", "n_theta", 512);
    if (kmin > kmax || kmax > 40 || nth < 1 || nth > 65536) fail(ErrorCode::ConfigError, "field scan.k_min/k_max/n_theta: out of range");
    const auto grid = AnnulusGrid::ladder(int(kmin), int(kmax), int(nth));
    ph.computing = true;
    const auto rep = sign_scan(p, delta, grid, kind, true);
    Table tb{{"kappa", "t", "r", "theta", "u", "psi", "lambda_over_psi", "sign", "term_I", "term_II", "term_III", "term_IV"}, {}};
    for (const auto& s : rep.samples)
        tb.add({cell(p.kappa), cell(p.t), cell(s.at.r), cell(s.at.theta), cell(s.at.u()), cell(s.psi), cell(s.lambda_over_psi),
                cell(s.sign), cell(s.terms.I), cell(s.terms.II), cell(s.terms.III), cell(s.terms.IV)});
    Table sum{{"kappa", "t", "delta", "expected_sign", "r0", "violations"}, {}};
    sum.add({cell(p.kappa), cell(p.t), cell(delta), cell(rep.expected_sign), cell(rep.r0_empirical),
             cell(std::uint64_t(rep.violations.size()))});
    return {{{"scan.csv", std::move(tb)}, {"scan_summary.csv", std::move(sum)}}, {}};
}

inline Outcome cmd_simulate(const Config& c, const RunOptions& o, Phase& ph) {
    c.restrict_to({{"simulate", detail::simulate_keys}});
    const auto mc = detail::mc_config(c, o);
    const auto ckpt = detail::checkpoint_path(c, o);
    const auto every = c.integer("simulate", "checkpoint_every", 16);
    if (every < 1) fail(ErrorCode::ConfigError, c.where("simulate", "checkpoint_every") + ": must be >= 1");
    auto run = o.resume ? load_checkpoint(mc, *o.resume) : make_ladder_run(mc);
    ph.computing = true;
    std::filesystem::create_directories(o.out_dir);
    std::uint64_t chunks = 0;
    AdvanceOptions ao;
    ao.on_chunk = [&](const LadderRun& r) {
        if (++chunks % every == 0) save_checkpoint(r, ckpt);
    };
    advance(run, ao);
    save_checkpoint(run, ckpt);

    Table tb{{"kappa", "t", "r", "theta", "mean", "stderr", "n"}, {}};
    for (std::size_t ri = 0; ri < run.nr(); ++ri)
        for (std::size_t ti = 0; ti < run.nt(); ++ti) {
            const auto m = moment_estimate(run, ri, ti);
            for (std::size_t j = 0; j < m.mean.size(); ++j)
                tb.add({cell(mc.kappa), cell(m.t), cell(m.r), cell(mc.thetas[j]), cell(m.mean[j]), cell(m.std_error[j]), cell(m.n_paths)});
        }
    Table diag{{"kappa", "t", "r", "n_used", "n_singular", "bias_flag", "top_share", "heavy_tail", "T", "dtau"}, {}};
    for (std::size_t ti = 0; ti < run.nt(); ++ti)
        for (std::size_t ri = 0; ri < run.nr(); ++ri) {
            const auto m = moment_estimate(run, ri, ti);
            diag.add({cell(mc.kappa), cell(m.t), cell(m.r), cell(m.n_paths), cell(m.n_singular), cell(int(m.bias_flag)),
                      m.t < 0 ? cell(m.top_share) : std::string(), cell(int(m.heavy_tail)), cell(m.T_used), cell(m.dtau_used)});
        }
    return {{{"moments.csv", std::move(tb)}, {"diagnostics.csv", std::move(diag)}}, {}};
}

inline std::vector<SpectrumFit> all_fits(const LadderRun& run) {
    std::vector<SpectrumFit> out;
    for (std::size_t ti = 0; ti < run.nt(); ++ti)
        for (std::size_t ai = 0; ai < run.na(); ++ai) out.push_back(fit_from_run(run, ti, ai));
    return out;
}

inline Outcome cmd_fit(const Config& c, const RunOptions& o, Phase& ph) {
    c.restrict_to({{"simulate", detail::simulate_keys}, {"compare", {"max_deviation", "max_z"}}});
    auto run = detail::load_run(c, o);
    ph.computing = true;
    Table tb{{"kappa", "t", "arc", "r", "G", "G_se", "logG", "fitted"}, {}};
    Table sum{{"kappa", "t", "arc", "slope", "slope_se", "intercept", "n_paths", "top_share", "heavy_tail"}, {}};
    for (const auto& f : all_fits(run)) {
        for (std::size_t i = 0; i < f.radii.size(); ++i)
            tb.add({cell(f.kappa), cell(f.t), cell(f.exclusion_arc), cell(f.radii[i]), cell(f.G[i]), cell(f.G_se[i]),
                    cell(f.logG[i]), cell(f.fitted[i])});
        sum.add({cell(f.kappa), cell(f.t), cell(f.exclusion_arc), cell(f.slope), cell(f.slope_se), cell(f.intercept),
                 cell(f.n_paths), f.t < 0 ? cell(f.top_share) : std::string(), cell(int(f.heavy_tail))});
    }
    return {{{"fit.csv", std::move(tb)}, {"fit_summary.csv", std::move(sum)}}, {}};
}

inline Outcome cmd_compare(const Config& c, const RunOptions& o, Phase& ph) {
    c.restrict_to({{"simulate", detail::simulate_keys}, {"compare", {"max_deviation", "max_z"}}});
    auto run = detail::load_run(c, o);
    const std::optional<double> max_dev = c.has("compare", "max_deviation") ? std::optional(c.real("compare", "max_deviation")) : std::nullopt;
    const std::optional<double> max_z = c.has("compare", "max_z") ? std::optional(c.real("compare", "max_z")) : std::nullopt;
    ph.computing = true;
    Outcome out;
    Table tb{{"kappa", "t", "arc", "slope", "slope_se", "statement", "branch", "theorem", "deviation", "z_score"}, {}};
    for (const auto& f : all_fits(run)) {
        // a zero arc keeps the tip: statement i; any positive arc: statement ii
        const bool tip = f.exclusion_arc == 0;
        const auto th = theorem_spectrum(make_parameters(f.kappa, f.t), tip);
        const double dev = f.slope - th.value;
        const double z = f.slope_se > 0 ? dev / f.slope_se : (dev == 0 ? 0.0 : std::copysign(INFINITY, dev));
        tb.add({cell(f.kappa), cell(f.t), cell(f.exclusion_arc), cell(f.slope), cell(f.slope_se), tip ? "i" : "ii",
                to_string(th.branch), cell(th.value), cell(dev), cell(z)});
        const std::string at = " at kappa=" + cell(f.kappa) + " t=" + cell(f.t) + " arc=" + cell(f.exclusion_arc);
        if (max_dev && !(std::abs(dev) < *max_dev)) out.violations.push_back("|deviation| " + cell(std::abs(dev)) + " not below " + cell(*max_dev) + at);
        if (max_z && !(std::abs(z) < *max_z)) out.violations.push_back("|z| " + cell(std::abs(z)) + " not below " + cell(*max_z) + at);
    }
    out.files.emplace_back("compare.csv", std::move(tb));
    return out;
}

using Command = std::function<Outcome(const Config&, const RunOptions&, Phase&)>;

inline const std::map<std::string, Command>& commands() {
    static const std::map<std::string, Command> m{
        {"exponents", cmd_exponents},         {"spectrum-table", cmd_spectrum_table}, {"g0-profile", cmd_g0_profile},
        {"pde-verify", cmd_pde_verify},       {"subsolution-scan", cmd_subsolution_scan},
        {"simulate", cmd_simulate},           {"fit", cmd_fit},                       {"compare", cmd_compare},
    };
    return m;
}

enum ExitCode { Ok = 0, ConfigFailure = 2, NumericFailure = 3, AcceptanceViolation = 4 };

inline std::string quoted(std::string_view s) {
    std::string q = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') q += '\\';
        q += ch == '\n' ? ' ' : ch;
    }
    return q + "\"";
}

/// Runs one subcommand on an already parsed config. Diagnostics go to `err`,
/// one line each.
inline int run_command(const std::string& name, Config cfg, const RunOptions& opts, std::ostream& err) {
    const auto it = commands().find(name);
    if (it == commands().end()) {
        err << "wpsle: status=error code=ConfigError exit=2 command=" << name << " message=" << quoted("unknown subcommand") << "\n";
        return ConfigFailure;
    }
    // overrides that change results are part of the hash
    if (opts.seed) cfg.set("simulate", "seed", std::to_string(*opts.seed));
    Phase ph;
    Outcome out;
    try {
        out = it->second(cfg, opts, ph);
        std::filesystem::create_directories(opts.out_dir);
        for (const auto& [file, table] : out.files) {
            std::ofstream os(opts.out_dir / file, std::ios::binary | std::ios::trunc);
            if (!os) fail(ErrorCode::ConfigError, "cannot write " + (opts.out_dir / file).string());
            os << table.render(cfg.hash());
        }
    } catch (const Error& e) {
        const int code = e.code() == ErrorCode::ConfigError || !ph.computing ? ConfigFailure : NumericFailure;
        err << "wpsle: status=error code=" << to_string(e.code()) << " exit=" << code << " command=" << name
            << " message=" << quoted(e.what()) << "\n";
        return code;
    } catch (const std::exception& e) {
        err << "wpsle: status=error code=Internal exit=3 command=" << name << " message=" << quoted(e.what()) << "\n";
        return NumericFailure;
    }
    for (const auto& v : out.violations)
        err << "wpsle: status=violation exit=4 command=" << name << " message=" << quoted(v) << "\n";
    return out.violations.empty() ? Ok : AcceptanceViolation;
}

}  // namespace wpsle::cli
