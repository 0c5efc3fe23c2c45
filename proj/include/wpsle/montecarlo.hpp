// Monte Carlo moments E|e^{-T} f'_T(r e^{i theta})|^t under the backward flow,
// for a ladder of radii, a set of angles and several t at once (common
// random numbers throughout), and the log-log slope fit of the integral means.
#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdlib>
#include <exception>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <numbers>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "wpsle/driving.hpp"
#include "wpsle/error.hpp"
#include "wpsle/exponents.hpp"
#include "wpsle/flow.hpp"
#include "wpsle/format.hpp"

namespace wpsle {

/// Default flow horizon for radius r.
inline double default_horizon(double r) { return std::max(-2 * std::log(r - 1) + 5, 10.0); }

/// theta_j = 2 pi j / n, j = 0..n-1.
inline std::vector<double> uniform_angles(int n) {
    std::vector<double> th(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) th[static_cast<std::size_t>(j)] = 2 * std::numbers::pi * j / n;
    return th;
}

/// Trapezoid weights of a uniform angle grid, zero on (-arc, arc) and half
/// weight on its endpoints when they fall on the grid.
inline std::vector<double> arc_weights(int n, double arc) {
    std::vector<double> w(static_cast<std::size_t>(n), 2 * std::numbers::pi / n);
    if (arc <= 0) return w;
    for (int j = 0; j < n; ++j) {
        double th = 2 * std::numbers::pi * j / n;
        if (th > std::numbers::pi) th -= 2 * std::numbers::pi;
        const double a = std::abs(th);
        if (std::abs(a - arc) < 1e-12)
            w[static_cast<std::size_t>(j)] *= 0.5;
        else if (a < arc)
            w[static_cast<std::size_t>(j)] = 0;
    }
    return w;
}

/// Worker count: WPSLE_THREADS if set and positive, else available parallelism.
inline unsigned default_threads() {
    if (const char* env = std::getenv("WPSLE_THREADS")) {
        const long v = std::strtol(env, nullptr, 10);
        if (v > 0) return static_cast<unsigned>(v);
    }
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

struct MonteCarloConfig {
    double kappa = 6;
    std::vector<double> t_values{1.0};
    std::vector<double> radii;
    std::vector<double> thetas = uniform_angles(256);
    /// Arcs for the integral means; each needs a uniform theta grid.
    std::vector<double> exclusion_arcs{0.0};
    std::uint64_t n_paths = 1000;
    std::uint64_t master_seed = 1;
    double dtau = 1e-2;
    /// Overrides default_horizon(r) for every radius.
    std::optional<double> horizon;
    FlowOptions flow{0.05, 1e-9, 1e3};
    std::uint64_t chunk_paths = 32;
    /// 0 selects default_threads(). Never changes results.
    unsigned threads = 0;

    double horizon_for(double r) const { return horizon ? *horizon : default_horizon(r); }

    /// Everything that affects results, in a fixed textual form.
    std::string canonical() const {
        std::string s = "mc/1\nkappa=" + format_double(kappa) + "\n";
        auto list = [&](const char* key, const std::vector<double>& v) {
            s += key;
            s += '=';
            for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + format_double(v[i]);
            s += '\n';
        };
        list("t", t_values);
        list("radii", radii);
        list("thetas", thetas);
        list("arcs", exclusion_arcs);
        s += "n_paths=" + std::to_string(n_paths) + "\nseed=" + std::to_string(master_seed) + "\ndtau=" +
             format_double(dtau) + "\nhorizon=" + (horizon ? format_double(*horizon) : std::string("default")) +
             "\nc_step=" + format_double(flow.c_step) + "\nsingular_tol=" + format_double(flow.singular_tol) +
             "\nescape=" + format_double(flow.escape_radius) + "\nchunk=" + std::to_string(chunk_paths) + "\n";
        return s;
    }
    std::uint64_t hash() const { return fnv1a64(canonical()); }

    void validate() const {
        if (!(kappa >= 0) || !std::isfinite(kappa)) fail(ErrorCode::DomainError, "kappa must be finite and >= 0");
        if (t_values.empty() || radii.empty() || thetas.empty()) fail(ErrorCode::DomainError, "empty t, radius or angle set");
        for (double t : t_values)
            if (!std::isfinite(t)) fail(ErrorCode::DomainError, "t must be finite");
        for (double r : radii) {
            if (!(r > 1) || !std::isfinite(r)) fail(ErrorCode::DomainError, "radii must be > 1");
            if (horizon && !(*horizon >= -2 * std::log(r - 1) + 5))
                fail(ErrorCode::DomainError, "horizon below -2 log(r-1) + 5 for r = " + format_double(r));
        }
        for (double a : exclusion_arcs)
            if (!(a >= 0 && a < std::numbers::pi / 2)) fail(ErrorCode::DomainError, "exclusion arc must lie in [0, pi/2)");
        if (n_paths < 1) fail(ErrorCode::DomainError, "n_paths must be >= 1");
        if (!(dtau > 0 && dtau <= 1e-2)) fail(ErrorCode::DomainError, "dtau must lie in (0, 1e-2]");
        if (chunk_paths < 1) fail(ErrorCode::DomainError, "chunk_paths must be >= 1");
        if (exclusion_arcs.size() > 1 || exclusion_arcs.front() != 0) {
            const auto u = uniform_angles(static_cast<int>(thetas.size()));
            if (u != thetas) fail(ErrorCode::DomainError, "exclusion arcs need the uniform angle grid");
        }
    }
};

/// Running state of a ladder run: per-(r, t, theta) sums and per-path
/// integral means, complete for paths [0, next_path).
struct LadderRun {
    MonteCarloConfig config;
    std::uint64_t next_path = 0;
    std::uint64_t n_used = 0;
    std::uint64_t n_singular = 0;
    std::vector<double> sum, sum_sq;
    /// G per (r, t, arc, path); NaN for excluded paths.
    std::vector<double> G;

    std::size_t nr() const { return config.radii.size(); }
    std::size_t nt() const { return config.t_values.size(); }
    std::size_t nth() const { return config.thetas.size(); }
    std::size_t na() const { return config.exclusion_arcs.size(); }
    std::size_t rec(std::size_t ri, std::size_t ti, std::size_t j) const { return (ri * nt() + ti) * nth() + j; }
    std::size_t gidx(std::size_t ri, std::size_t ti, std::size_t ai, std::uint64_t path) const {
        return ((ri * nt() + ti) * na() + ai) * config.n_paths + path;
    }
    bool complete() const { return next_path >= config.n_paths; }
};

inline LadderRun make_ladder_run(const MonteCarloConfig& cfg) {
    cfg.validate();
    LadderRun run;
    run.config = cfg;
    const std::size_t nrec = cfg.radii.size() * cfg.t_values.size() * cfg.thetas.size();
    run.sum.assign(nrec, 0.0);
    run.sum_sq.assign(nrec, 0.0);
    run.G.assign(cfg.radii.size() * cfg.t_values.size() * cfg.exclusion_arcs.size() * cfg.n_paths,
                 std::numeric_limits<double>::quiet_NaN());
    return run;
}

namespace detail {

struct ChunkPartial {
    std::uint64_t used = 0, singular = 0;
    std::vector<double> sum, sum_sq;
};

class PathWorker {
public:
    explicit PathWorker(const MonteCarloConfig& cfg) : cfg_(cfg), batch_(cfg.flow) {
        for (double r : cfg.radii) {
            T_max_ = std::max(T_max_, cfg.horizon_for(r));
            for (double th : cfg.thetas) {
                z_.push_back(std::polar(r, th));
                H_.push_back(cfg.horizon_for(r));
            }
        }
        ell_.resize(z_.size());
        const int n = static_cast<int>(cfg.thetas.size());
        for (double a : cfg.exclusion_arcs)
            weights_.push_back(a == 0 && cfg.thetas != uniform_angles(n) ? std::vector<double>(cfg.thetas.size(), 2 * std::numbers::pi / n)
                                                                           : arc_weights(n, a));
    }

    /// Runs path `index`; false when it hit SingularApproach.
    bool run(std::uint64_t index, LadderRun& run, ChunkPartial& part) {
        const auto path = sample_driving(derive_path_seed(cfg_.master_seed, index), cfg_.kappa, T_max_, cfg_.dtau);
        try {
            batch_.run(path, z_, H_, ell_);
        } catch (const Error& e) {
            if (e.code() != ErrorCode::SingularApproach) throw;
            ++part.singular;
            return false;
        }
        ++part.used;
        const std::size_t nth = cfg_.thetas.size();
        for (std::size_t ri = 0; ri < cfg_.radii.size(); ++ri)
            for (std::size_t ti = 0; ti < cfg_.t_values.size(); ++ti) {
                const double t = cfg_.t_values[ti];
                const double* ell = ell_.data() + ri * nth;
                for (std::size_t j = 0; j < nth; ++j) {
                    const double v = t == 0 ? 1.0 : std::exp(t * ell[j]);
                    if (!std::isfinite(v)) fail(ErrorCode::NonFinite, "moment sample overflowed");
                    const std::size_t k = run.rec(ri, ti, j);
                    part.sum[k] += v;
                    part.sum_sq[k] += v * v;
                }
                for (std::size_t ai = 0; ai < weights_.size(); ++ai) {
                    double g = 0;
                    for (std::size_t j = 0; j < nth; ++j)
                        if (weights_[ai][j] != 0) g += weights_[ai][j] * (t == 0 ? 1.0 : std::exp(t * ell[j]));
                    run.G[run.gidx(ri, ti, ai, index)] = g;
                }
            }
        return true;
    }

private:
    const MonteCarloConfig& cfg_;
    FlowBatch batch_;
    double T_max_ = 0;
    std::vector<std::complex<double>> z_;
    std::vector<double> H_, ell_;
    std::vector<std::vector<double>> weights_;
};

}  // namespace detail

struct AdvanceOptions {
    /// Stop after this many paths in total (for interrupted runs); default all.
    std::optional<std::uint64_t> stop_at;
    /// Called after every merged chunk with the consistent state.
    std::function<void(const LadderRun&)> on_chunk;
};

/// Advance a run chunk by chunk. Chunks are merged strictly in index order,
/// so the result is independent of the worker count.
inline void advance(LadderRun& run, const AdvanceOptions& opts = {}) {
    const auto& cfg = run.config;
    const std::uint64_t end = std::min(cfg.n_paths, opts.stop_at.value_or(cfg.n_paths));
    if (run.next_path >= end) return;
    const std::uint64_t first_chunk = run.next_path / cfg.chunk_paths;
    if (run.next_path % cfg.chunk_paths != 0) fail(ErrorCode::CheckpointMismatch, "run state is not at a chunk boundary");
    const std::uint64_t n_chunks = (end + cfg.chunk_paths - 1) / cfg.chunk_paths;
    const unsigned threads = std::max(1u, cfg.threads ? cfg.threads : default_threads());
    const std::size_t nrec = run.sum.size();

    std::atomic<std::uint64_t> next_chunk{first_chunk};
    std::mutex mu;
    std::map<std::uint64_t, detail::ChunkPartial> pending;
    std::uint64_t merge_next = first_chunk;
    std::exception_ptr error;
    std::atomic<bool> abort{false};

    auto worker = [&] {
        detail::PathWorker pw(cfg);
        while (!abort) {
            const std::uint64_t c = next_chunk++;
            if (c >= n_chunks) break;
            detail::ChunkPartial part;
            part.sum.assign(nrec, 0.0);
            part.sum_sq.assign(nrec, 0.0);
            try {
                const std::uint64_t lo = c * cfg.chunk_paths, hi = std::min(end, lo + cfg.chunk_paths);
                for (std::uint64_t i = lo; i < hi; ++i) pw.run(i, run, part);
            } catch (...) {
                std::lock_guard lock(mu);
                if (!error) error = std::current_exception();
                abort = true;
                break;
            }
            std::lock_guard lock(mu);
            pending.emplace(c, std::move(part));
            while (!abort) {
                auto it = pending.find(merge_next);
                if (it == pending.end()) break;
                auto& p = it->second;
                for (std::size_t k = 0; k < nrec; ++k) {
                    run.sum[k] += p.sum[k];
                    run.sum_sq[k] += p.sum_sq[k];
                }
                run.n_used += p.used;
                run.n_singular += p.singular;
                run.next_path = std::min(end, (merge_next + 1) * cfg.chunk_paths);
                pending.erase(it);
                ++merge_next;
                if (opts.on_chunk) {
                    try {
                        opts.on_chunk(run);
                    } catch (...) {
                        if (!error) error = std::current_exception();
                        abort = true;
                    }
                }
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (unsigned i = 0; i < threads; ++i) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }
    if (error) std::rethrow_exception(error);
}

inline LadderRun run_ladder(const MonteCarloConfig& cfg) {
    auto run = make_ladder_run(cfg);
    advance(run);
    return run;
}

struct MeanSE {
    double mean;
    double se;
};

inline MeanSE mean_se(double sum, double sum_sq, std::uint64_t n) {
    if (n == 0) return {std::nan(""), std::nan("")};
    const double nn = double(n);
    const double mean = sum / nn;
    if (n == 1) return {mean, 0.0};
    const double var = std::max(0.0, (sum_sq - sum * mean) / (nn - 1));
    return {mean, std::sqrt(var / nn)};
}

/// Share of the total carried by the largest ceil(0.1%) of the samples.
inline double top_share(std::vector<double> v) {
    std::erase_if(v, [](double x) { return std::isnan(x); });
    if (v.empty()) return std::nan("");
    const std::size_t k = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(0.001 * double(v.size()))));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(k - 1), v.end(), std::greater<>());
    double top = 0, total = 0;
    for (std::size_t i = 0; i < v.size(); ++i) (i < k ? top : total) += v[i];
    total += top;
    return total == 0 ? 0.0 : top / total;
}

struct MomentEstimate {
    double r = 0;
    std::vector<double> theta_set;
    double t = 0;
    std::vector<double> mean, std_error;
    std::uint64_t n_paths = 0;
    std::uint64_t n_singular = 0;
    /// More than 0.1% of paths excluded as singular.
    bool bias_flag = false;
    /// For t < 0: top-0.1% share of the per-path theta-average; flagged above 1/2.
    double top_share = 0;
    bool heavy_tail = false;
    double T_used = 0, dtau_used = 0;
};

inline MomentEstimate moment_estimate(const LadderRun& run, std::size_t ri, std::size_t ti) {
    const auto& cfg = run.config;
    MomentEstimate m;
    m.r = cfg.radii[ri];
    m.theta_set = cfg.thetas;
    m.t = cfg.t_values[ti];
    m.n_paths = run.n_used;
    m.n_singular = run.n_singular;
    m.bias_flag = double(run.n_singular) > 1e-3 * double(run.n_used + run.n_singular);
    m.T_used = cfg.horizon_for(m.r);
    m.dtau_used = cfg.dtau;
    for (std::size_t j = 0; j < run.nth(); ++j) {
        const auto ms = mean_se(run.sum[run.rec(ri, ti, j)], run.sum_sq[run.rec(ri, ti, j)], run.n_used);
        m.mean.push_back(ms.mean);
        m.std_error.push_back(ms.se);
    }
    if (m.t < 0) {
        const std::size_t ai = 0;
        std::vector<double> g(run.G.begin() + static_cast<std::ptrdiff_t>(run.gidx(ri, ti, ai, 0)),
                              run.G.begin() + static_cast<std::ptrdiff_t>(run.gidx(ri, ti, ai, 0) + run.next_path));
        m.top_share = top_share(std::move(g));
        m.heavy_tail = m.top_share > 0.5;
    }
    return m;
}

struct MonteCarloOptions {
    FlowOptions flow{0.05, 1e-9, 1e3};
    unsigned threads = 0;
    std::uint64_t chunk_paths = 32;
};

inline MomentEstimate estimate_moments(const Parameters& p, double r, const std::vector<double>& theta_set,
                                       std::uint64_t n_paths, double T, double dtau, std::uint64_t master_seed,
                                       const MonteCarloOptions& opts = {}) {
    if (!(r > 1)) fail(ErrorCode::DomainError, "estimate_moments needs r > 1");
    if (!(T >= -2 * std::log(r - 1) + 5)) fail(ErrorCode::DomainError, "T must be >= -2 log(r-1) + 5");
    MonteCarloConfig cfg;
    cfg.kappa = p.kappa;
    cfg.t_values = {p.t};
    cfg.radii = {r};
    cfg.thetas = theta_set;
    cfg.n_paths = n_paths;
    cfg.master_seed = master_seed;
    cfg.dtau = dtau;
    cfg.horizon = T;
    cfg.flow = opts.flow;
    cfg.threads = opts.threads;
    cfg.chunk_paths = opts.chunk_paths;
    return moment_estimate(run_ladder(cfg), 0, 0);
}

struct SpectrumFit {
    double t = 0, kappa = 0, exclusion_arc = 0;
    std::vector<double> radii, G, G_se, logG, x, fitted, residuals;
    double slope = 0, intercept = 0, slope_se = 0;
    std::uint64_t n_paths = 0;
    /// Largest top-0.1% share over the ladder (t < 0 only).
    double top_share = 0;
    bool heavy_tail = false;
};

/// OLS of log G against x = -log(r - 1); slope error by the delta method
/// from the per-path covariance of G across radii.
inline SpectrumFit fit_from_run(const LadderRun& run, std::size_t ti, std::size_t ai) {
    const auto& cfg = run.config;
    const std::size_t nr = run.nr();
    if (nr < 4) fail(ErrorCode::InsufficientLadder, "the ladder needs at least 4 radii");
    SpectrumFit fit;
    fit.t = cfg.t_values[ti];
    fit.kappa = cfg.kappa;
    fit.exclusion_arc = cfg.exclusion_arcs[ai];
    fit.radii = cfg.radii;
    fit.n_paths = run.n_used;
    const std::uint64_t np = run.next_path;

    std::vector<const double*> g(nr);
    for (std::size_t ri = 0; ri < nr; ++ri) g[ri] = run.G.data() + run.gidx(ri, ti, ai, 0);
    std::vector<double> mean(nr, 0.0);
    std::uint64_t n = 0;
    for (std::uint64_t i = 0; i < np; ++i) {
        if (std::isnan(g[0][i])) continue;
        ++n;
        for (std::size_t ri = 0; ri < nr; ++ri) mean[ri] += g[ri][i];
    }
    if (n < 2) fail(ErrorCode::NonFinite, "fewer than two usable paths");
    for (auto& m : mean) m /= double(n);
    std::vector<double> cov(nr * nr, 0.0);
    for (std::uint64_t i = 0; i < np; ++i) {
        if (std::isnan(g[0][i])) continue;
        for (std::size_t a = 0; a < nr; ++a)
            for (std::size_t b = 0; b < nr; ++b) cov[a * nr + b] += (g[a][i] - mean[a]) * (g[b][i] - mean[b]);
    }
    for (auto& c : cov) c /= double(n - 1) * double(n);  // covariance of the means

    for (std::size_t ri = 0; ri < nr; ++ri) {
        if (!(mean[ri] > 0) || !std::isfinite(mean[ri])) fail(ErrorCode::NonFinite, "integral mean is not positive and finite");
        fit.G.push_back(mean[ri]);
        fit.G_se.push_back(std::sqrt(cov[ri * nr + ri]));
        fit.logG.push_back(std::log(mean[ri]));
        fit.x.push_back(-std::log(cfg.radii[ri] - 1));
    }
    double xm = 0, ym = 0;
    for (std::size_t i = 0; i < nr; ++i) {
        xm += fit.x[i];
        ym += fit.logG[i];
    }
    xm /= double(nr);
    ym /= double(nr);
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < nr; ++i) {
        sxx += (fit.x[i] - xm) * (fit.x[i] - xm);
        sxy += (fit.x[i] - xm) * (fit.logG[i] - ym);
    }
    fit.slope = sxy / sxx;
    fit.intercept = ym - fit.slope * xm;
    double var = 0;
    for (std::size_t a = 0; a < nr; ++a)
        for (std::size_t b = 0; b < nr; ++b) {
            const double ca = (fit.x[a] - xm) / sxx, cb = (fit.x[b] - xm) / sxx;
            var += ca * cb * cov[a * nr + b] / (mean[a] * mean[b]);
        }
    fit.slope_se = std::sqrt(std::max(0.0, var));
    for (std::size_t i = 0; i < nr; ++i) {
        fit.fitted.push_back(fit.intercept + fit.slope * fit.x[i]);
        fit.residuals.push_back(fit.logG[i] - fit.fitted.back());
    }
    if (fit.t < 0) {
        for (std::size_t ri = 0; ri < nr; ++ri)
            fit.top_share = std::max(fit.top_share, top_share(std::vector<double>(g[ri], g[ri] + np)));
        fit.heavy_tail = fit.top_share > 0.5;
    }
    if (!std::isfinite(fit.slope) || !std::isfinite(fit.slope_se)) fail(ErrorCode::NonFinite, "non-finite fit");
    return fit;
}

/// Radii 1 + 2^-k for k = k_min..k_max.
inline std::vector<double> dyadic_ladder(int k_min, int k_max) {
    std::vector<double> r;
    for (int k = k_min; k <= k_max; ++k) r.push_back(1 + std::ldexp(1.0, -k));
    return r;
}

inline void check_ladder(const std::vector<double>& r_ladder) {
    if (r_ladder.size() < 4) fail(ErrorCode::InsufficientLadder, "the ladder needs at least 4 radii");
    for (double r : r_ladder)
        if (!(r > 1)) fail(ErrorCode::DomainError, "radii must be > 1");
    const double q = (r_ladder[1] - 1) / (r_ladder[0] - 1);
    for (std::size_t i = 1; i < r_ladder.size(); ++i)
        if (std::abs((r_ladder[i] - 1) / (r_ladder[i - 1] - 1) - q) > 1e-9 * std::abs(q))
            fail(ErrorCode::DomainError, "the ladder must be geometric in r - 1");
}

inline SpectrumFit fit_spectrum(const Parameters& p, const std::vector<double>& r_ladder, double exclusion_arc,
                                MonteCarloConfig mc) {
    check_ladder(r_ladder);
    mc.kappa = p.kappa;
    mc.t_values = {p.t};
    mc.radii = r_ladder;
    mc.exclusion_arcs = {exclusion_arc};
    return fit_from_run(run_ladder(mc), 0, 0);
}

}  // namespace wpsle
