// Acceptance suite: one PASS/FAIL line per criterion.
#include <algorithm>
#include <chrono>
#include <cstring>
#include <cmath>
#include <functional>
#include <iostream>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "wpsle/boundary.hpp"
#include "wpsle/exponents.hpp"
#include "wpsle/flow.hpp"
#include "wpsle/montecarlo.hpp"
#include "wpsle/operator.hpp"

using namespace wpsle;

namespace {

struct Verdict {
    bool pass = true;
    std::ostringstream detail;
    std::vector<std::string> failures;

    void check(bool ok, const std::string& what) {
        if (ok) return;
        pass = false;
        failures.push_back(what);
    }
};

std::string fmt(double v) {
    std::ostringstream s;
    s.precision(4);
    s << v;
    return s.str();
}

const std::vector<double> kappas{0.5, 1, 2, 8.0 / 3, 4, 6, 8};

std::vector<double> t_grid(double lo, double hi, int n) {
    std::vector<double> g;
    for (int i = 0; i < n; ++i) g.push_back(lo + (hi - lo) * (i + 0.5) / n);
    return g;
}

void ex1(Verdict& v) {
    double worst = 0, worst_d = 0;
    for (double k : kappas) {
        const auto ts = transitions(k);
        const auto rel = [](double a, double b) { return std::abs(a - b) / (1 + std::abs(b)); };
        worst = std::max({worst, rel(beta1_of(k, ts.t1), beta0_of(k, ts.t1)), rel(beta_tip_of(k, ts.t2), beta0_of(k, ts.t2)),
                          rel(beta_lin_of(k, ts.t3), beta0_of(k, ts.t3))});
        const double h = 1e-4;
        const double d = (beta0_of(k, ts.t3 + h) - beta0_of(k, ts.t3 - h)) / (2 * h);
        worst_d = std::max(worst_d, std::abs(d - 1));
    }
    v.check(worst < 1e-12, "branch mismatch " + fmt(worst));
    v.check(worst_d < 1e-6, "d beta0/dt at t3 off by " + fmt(worst_d));
    v.detail << "max branch mismatch " << fmt(worst) << ", max |d beta0/dt(t3) - 1| " << fmt(worst_d);
}

void ex2(Verdict& v) {
    int points = 0, bad = 0;
    double worst_id = 0, worst_tk = 0;
    for (double k : kappas) {
        const auto ts = transitions(k);
        for (double t : t_grid(-50, 20, 1000)) {
            const auto e = exponent_set(make_parameters(k, t));
            if (e.b) {
                ++points;
                bad += (0.5 - *e.b > 0) != (t > ts.t1);
            }
            if (e.beta0 && e.beta1) bad += (*e.beta1 > *e.beta0) != (t < ts.t1);
            if (e.beta1 && e.beta_tip) {
                bad += (*e.beta1 < *e.beta_tip) != (t < 0);
                worst_id = std::max(worst_id, std::abs(*e.beta_tip - *e.beta1 - k / 2 * *e.b) / (1 + std::abs(t)));
            }
            if (e.gamma0 && e.gamma1) bad += (*e.gamma0 + *e.gamma1 > 2 / k) != (t < 0);
        }
        for (const auto& [n, tn] : ts.t_seq) {
            const auto e = exponent_set(make_parameters(k, tn));
            worst_tk = std::max(worst_tk, std::abs(*e.b - (n + 0.5)) / (1 + n));
        }
    }
    v.check(bad == 0, std::to_string(bad) + " iff violations");
    v.check(worst_id < 1e-12, "beta_tip - beta1 identity off by " + fmt(worst_id));
    v.check(worst_tk < 1e-12, "b = n + 1/2 on T_kappa off by " + fmt(worst_tk));
    v.detail << points << " grid points, 0 iff violations, identity residual " << fmt(worst_id) << ", T_kappa residual " << fmt(worst_tk);
}

void ex3(Verdict& v) {
    const double k = 4;
    const auto ts = transitions(k);
    const auto e = exponent_set(make_parameters(k, ts.t1));
    double worst = 0;
    for (const auto& [got, want] : std::vector<std::pair<double, double>>{
             {ts.t1, -6}, {ts.t2, -2.5}, {ts.t3, 1.5}, {*e.beta0, 2}, {*e.beta1, 2}, {*e.b, 0.5}})
        worst = std::max(worst, std::abs(got - want));
    v.check(worst < 1e-12, "max deviation " + fmt(worst));
    v.detail << "max deviation " << fmt(worst);
}

// Random (kappa, t) away from T_kappa and from degenerate c.
std::vector<Parameters> random_parameters(int n, std::uint64_t seed, bool need_beta1) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uk(0.5, 8), uf(0, 1);
    std::vector<Parameters> out;
    while (static_cast<int>(out.size()) < n) {
        const double k = uk(rng);
        const auto ts = transitions(k);
        const double hi = need_beta1 ? std::min(ts.t3, 1 / (2 * k)) : ts.t3;
        const double lo = ts.t1 - 4;
        const double t = lo + (hi - 0.05 - lo) * uf(rng);
        const auto g = build_g0(make_parameters(k, t));
        if (g.near_tk() || g.degenerate_c()) continue;
        const double c = 0.5 + (g.a() + g.b()).real();
        if (c < 0 && std::abs(c - std::round(c)) < 1e-3) continue;
        out.push_back(make_parameters(k, t));
    }
    return out;
}

// g0 near u = 4 from the two-term connection form, extrapolated to u = 4.
double g0_at_four_from_connection(const BoundarySolution& g) {
    const auto a = g.a(), b = g.b();
    const double s = g.s();
    std::vector<double> h, y;
    for (int i = 1; i <= 7; ++i) {
        const double x = 1 - 0.0125 * i;
        const auto F1 = hyp2f1_series(a, b, 0.5 + a + b, x, 100000);
        const auto F2 = hyp2f1_series(0.5 - a, 0.5 - b, 1.5 - a - b, x, 100000);
        h.push_back(1 - x);
        y.push_back(g.C0() * F1.value.real() - g.C0_prime() * std::pow(x, s) * F2.value.real());
    }
    // Neville at h = 0
    for (std::size_t m = 1; m < h.size(); ++m)
        for (std::size_t i = h.size() - 1; i >= m; --i) y[i] = (h[i] * y[i - 1] - h[i - m] * y[i]) / (h[i] - h[i - m]);
    return y.back();
}

void hy1(Verdict& v) {
    double worst_res = 0, worst_end = 0;
    for (const auto& p : random_parameters(20, 3, false)) {
        const auto g = build_g0(p);
        for (int i = 1; i <= 399; ++i) worst_res = std::max(worst_res, ode_residual(g, 0.01 * i).hypergeometric);
        const double expect = g.s() / std::sqrt(std::numbers::pi);
        worst_end = std::max({worst_end, std::abs(g(4.0) - expect), std::abs(g0_at_four_from_connection(g) - expect)});
    }
    v.check(worst_res < 1e-8, "residual " + fmt(worst_res));
    v.check(worst_end < 1e-6, "g0(4) mismatch " + fmt(worst_end));

    int intervals = 0;
    for (double k : {0.5, 4.0}) {
        const auto ts = transitions(k);
        // interval n lies between t_seq[n + 1] and t_seq[n]; the last one is unbounded below
        for (std::size_t n = 0; n < ts.t_seq.size(); ++n) {
            const double hi = ts.t_seq[n].second;
            const double lo = n + 1 < ts.t_seq.size() ? ts.t_seq[n + 1].second : hi - 30;
            for (double f : {0.1, 0.5, 0.9}) {
                const double t = hi - f * (hi - lo);
                const int count = count_zeros(build_g0(make_parameters(k, t))).count;
                v.check(count == int(n) + 1, "kappa=" + fmt(k) + " t=" + fmt(t) + ": " + std::to_string(count) + " zeros, expected " +
                                                 std::to_string(n + 1));
            }
            ++intervals;
        }
    }
    v.detail << "max residual " << fmt(worst_res) << ", max g0(4) mismatch " << fmt(worst_end) << ", zero counts on " << intervals
             << " intervals";
}

double ols_slope(const std::vector<double>& x, const std::vector<double>& y) {
    double xm = 0, ym = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        xm += x[i];
        ym += y[i];
    }
    xm /= double(x.size());
    ym /= double(x.size());
    double sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sxx += (x[i] - xm) * (x[i] - xm);
        sxy += (x[i] - xm) * (y[i] - ym);
    }
    return sxy / sxx;
}

void pd1(Verdict& v) {
    std::mt19937_64 rng(99);
    std::uniform_real_distribution<double> ur(1.1, 1.3), uth(0.5, 3.0);
    double lo_order = INFINITY, hi_order = -INFINITY, worst = 0;
    int cases = 0;
    for (const auto& p : random_parameters(10, 21, true)) {
        std::vector<PolarPoint> pts;
        for (int i = 0; i < 6; ++i) pts.push_back({ur(rng), uth(rng)});
        for (const auto& tf : {TrialFunction::hypergeometric(p), TrialFunction::pure_power(p), TrialFunction::mixed(p, 0.5)}) {
            const GridFunction F = [&](double r, double th) { return tf(r, th); };
            std::vector<PolarPoint> use;
            for (const auto& z : pts)
                if (std::abs(tf(z)) > 1e-6 * std::abs(tf.psi1(z))) use.push_back(z);
            std::vector<double> lh, le;
            double finest = 0;
            for (int l = 0; l < 5; ++l) {
                const double s = std::ldexp(1.0, -l);
                finest = 0;
                for (const auto& z : use) {
                    const double exact = lambda_analytic(tf, z);
                    const double num = lambda_numeric(F, p, z, (z.r - 1) / 8 * s, 0.05 * s);
                    finest = std::max(finest, std::abs(num - exact) / std::abs(exact));
                }
                // levels in the rounding floor carry no order information
                if (finest > 1e-8 || lh.size() < 2) {
                    lh.push_back(std::log(s));
                    le.push_back(std::log(finest));
                }
            }
            const double order = ols_slope(lh, le);
            lo_order = std::min(lo_order, order);
            hi_order = std::max(hi_order, order);
            worst = std::max(worst, finest);
            v.check(order >= 3.5 && order <= 4.5, "order " + fmt(order) + " at kappa=" + fmt(p.kappa) + " t=" + fmt(p.t));
            v.check(finest < 1e-4, "finest mismatch " + fmt(finest) + " at kappa=" + fmt(p.kappa) + " t=" + fmt(p.t));
            ++cases;
        }
    }
    v.detail << cases << " cases, fitted orders in [" << fmt(lo_order) << ", " << fmt(hi_order) << "], max finest mismatch " << fmt(worst);
}

void pd2(Verdict& v) {
    const auto grid = AnnulusGrid::ladder();
    int runs = 0;
    double min_r0 = INFINITY;
    for (double k : {2.0, 4.0, 6.0}) {
        const auto ts = transitions(k);
        for (double dt : {0.5, 2.0, 6.0}) {
            const auto p = make_parameters(k, ts.t1 - dt);
            const std::string at = " at kappa=" + fmt(k) + " t=" + fmt(p.t);
            for (const auto& [n, tn] : ts.t_seq) v.check(std::abs(p.t - tn) > 1e-6, "t in T_kappa" + at);
            const auto pos = positivity_scan(p, grid);
            v.check(pos.ok, "psi not positive on any annulus" + at);
            for (double delta : {0.5, -0.5}) {
                const auto rep = sign_scan(p, delta, grid, TrialKind::Mixed, true);
                v.check(rep.expected_sign == (delta > 0 ? -1 : 1), "wrong expected sign" + at);
                v.check(rep.r0_empirical > 1, "empty sign annulus" + at);
                const double r0 = std::min(rep.r0_empirical, pos.r0);
                v.check(r0 > 1, "empty common annulus" + at);
                min_r0 = std::min(min_r0, r0);
                for (const auto& s : rep.samples)
                    if (s.at.r <= r0) v.check(s.sign == rep.expected_sign && s.psi > 0, "sign violation" + at);
                ++runs;
            }
            const auto c3 = case3_domination(p, grid, 0.05);
            v.check(c3.holds && c3.points > 0, "domination fails" + at + " ratio " + fmt(c3.max_ratio) + " bound " + fmt(c3.bound));
        }
    }
    v.detail << runs << " sign scans on 9 (kappa, t), smallest reported annulus r0 - 1 = " << fmt(min_r0 - 1)
             << ", domination holds at all sampled points";
}

MonteCarloConfig mc1_config() {
    MonteCarloConfig c;
    c.kappa = 6;
    c.t_values = {0.0, 0.5, 1.0};
    c.radii = dyadic_ladder(4, 9);
    c.thetas = uniform_angles(256);
    c.exclusion_arcs = {0.0};
    c.n_paths = 50000;
    c.master_seed = 20240601;
    c.dtau = 1e-2;
    c.flow.c_step = 0.05;
    c.flow.escape_radius = 1e3;
    c.chunk_paths = 64;
    return c;
}

void mc1(Verdict& v) {
    const auto cfg = mc1_config();
    const auto run = run_ladder(cfg);
    for (std::size_t ti = 0; ti < cfg.t_values.size(); ++ti) {
        const auto f = fit_from_run(run, ti, 0);
        const double t = cfg.t_values[ti];
        if (t == 0) {
            v.check(std::abs(f.slope) <= 2 * f.slope_se + 1e-15, "t=0 slope " + fmt(f.slope) + " beyond 2 SE " + fmt(f.slope_se));
            v.detail << "t=0 slope " << fmt(f.slope) << " (SE " << fmt(f.slope_se) << "); ";
        } else {
            const double target = beta0_of(cfg.kappa, t);
            v.check(std::abs(f.slope - target) < 0.1, "t=" + fmt(t) + " slope " + fmt(f.slope) + " vs " + fmt(target));
            v.detail << "t=" << fmt(t) << " slope " << fmt(f.slope) << " (SE " << fmt(f.slope_se) << ") vs beta0 " << fmt(target) << "; ";
        }
    }
    v.detail << run.n_used << " paths, " << run.n_singular << " singular";
}

void mc2(Verdict& v) {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> uk(0.5, 8), ur(1.005, 1.5), uth(-3.1, 3.1);
    double worst = 0;
    for (int i = 0; i < 100; ++i) {
        const auto path = sample_driving(derive_path_seed(3, i), uk(rng), 4, 1e-3);
        const std::complex<double> z = std::polar(ur(rng), uth(rng)), w = z * (1 + 1e-6);
        const auto [a, b] = reverse_flow_pair(path, z, w);
        const auto exact = std::exp(a.logd);
        worst = std::max(worst, std::abs((b.f - a.f) / (w - z) - exact) / std::abs(exact));
    }
    v.check(worst < 1e-4, "chain rule mismatch " + fmt(worst));

    double lo = INFINITY, hi = -INFINITY;
    const double T = 20;
    std::mt19937_64 rng2(12);
    std::uniform_real_distribution<double> uth2(-3, 3);
    for (int i = 0; i < 10; ++i) {
        const auto path = sample_driving(derive_path_seed(21, i), 6, T, 1e-2);
        std::vector<double> taus, comp;
        std::vector<std::complex<double>> fs;
        reverse_flow(path, std::polar(1.05, uth2(rng2)), {}, [&](const FlowState& s) {
            taus.push_back(s.tau);
            comp.push_back(s.compensated());
            fs.push_back(s.f);
        });
        std::vector<double> x, y;
        for (int win = int(T / 2); win < int(T); ++win) {
            double peak = 0;
            for (std::size_t k = 0; k < taus.size(); ++k) {
                if (taus[k] < win || taus[k] >= win + 1) continue;
                const auto xi = path.xi(taus[k]);
                peak = std::max(peak, 2 * std::exp(comp[k]) * std::abs(std::real(xi * xi / ((fs[k] - xi) * (fs[k] - xi)))));
            }
            x.push_back(win + 0.5);
            y.push_back(std::log(peak));
        }
        const double slope = ols_slope(x, y);
        lo = std::min(lo, slope);
        hi = std::max(hi, slope);
    }
    v.check(lo >= -2.3 && hi <= -1.7, "tail slopes in [" + fmt(lo) + ", " + fmt(hi) + "]");

    MonteCarloConfig c;
    c.kappa = 6;
    c.t_values = {-1.0, 0.5, 1.0};
    c.radii = dyadic_ladder(3, 6);
    c.thetas = uniform_angles(32);
    c.exclusion_arcs = {0.0, std::numbers::pi / 8};
    c.n_paths = 96;
    c.master_seed = 2718;
    c.chunk_paths = 8;
    c.threads = 1;
    const auto one = run_ladder(c);
    bool same = true;
    for (unsigned n : {2u, 4u, 7u}) {
        c.threads = n;
        const auto many = run_ladder(c);
        same = same && one.sum == many.sum && one.sum_sq == many.sum_sq && one.n_used == many.n_used;
        for (std::size_t i = 0; i < one.G.size(); ++i)
            same = same && std::memcmp(&one.G[i], &many.G[i], sizeof(double)) == 0;
    }
    v.check(same, "results depend on the worker count");
    v.detail << "chain rule max rel error " << fmt(worst) << ", tail slopes in [" << fmt(lo) << ", " << fmt(hi)
             << "], bit-identical for 1/2/4/7 workers";
}

void mc3(Verdict& v) {
    MonteCarloConfig c;
    c.kappa = 4;
    c.t_values = {-2.0, -4.0};
    c.radii = dyadic_ladder(4, 9);
    c.thetas = uniform_angles(256);
    c.exclusion_arcs = {0.0, std::numbers::pi / 8};
    c.n_paths = 4000;
    c.master_seed = 4242;
    c.flow.c_step = 0.05;
    c.flow.escape_radius = 1e3;
    c.chunk_paths = 64;
    const auto run = run_ladder(c);
    for (std::size_t ti = 0; ti < c.t_values.size(); ++ti) {
        const auto inc = fit_from_run(run, ti, 0), exc = fit_from_run(run, ti, 1);
        const double se = std::hypot(inc.slope_se, exc.slope_se);
        const double diff = inc.slope - exc.slope;
        const double t = c.t_values[ti];
        v.detail << "t=" << fmt(t) << ": included " << fmt(inc.slope) << " (SE " << fmt(inc.slope_se) << "), excluded " << fmt(exc.slope)
                 << " (SE " << fmt(exc.slope_se) << "), difference " << fmt(diff / se) << " combined SE";
        if (inc.heavy_tail || exc.heavy_tail) v.detail << " [heavy tail]";
        v.detail << "; ";
        if (t == -2.0) {
            v.check(std::abs(diff) <= 2 * se, "t=-2 slopes differ by " + fmt(diff / se) + " combined SE");
        } else {
            v.check(diff > 2 * se, "t=-4 included slope not above excluded by 2 combined SE");
            v.check(beta_tip_of(4, t) > beta0_of(4, t), "tip branch not above bulk");
        }
    }
    v.detail << run.n_used << " paths";
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::vector<std::string> only;
    app.add_option("--only", only, "criteria to run (default all)");
    CLI11_PARSE(app, argc, argv);

    const std::vector<std::pair<std::string, std::pair<std::function<void(Verdict&)>, double>>> criteria{
        {"EX-1", {ex1, 1}},  {"EX-2", {ex2, 1}},   {"EX-3", {ex3, 1}},      {"HY-1", {hy1, 10}}, {"PD-1", {pd1, 60}},
        {"PD-2", {pd2, 300}}, {"MC-1", {mc1, 0}}, {"MC-2", {mc2, 60}}, {"MC-3", {mc3, 0}},
    };
    for (const auto& o : only)
        if (std::none_of(criteria.begin(), criteria.end(), [&](const auto& c) { return c.first == o; })) {
            std::cerr << "unknown criterion " << o << "\n";
            return 2;
        }
    bool all = true;
    for (const auto& [name, entry] : criteria) {
        if (!only.empty() && std::find(only.begin(), only.end(), name) == only.end()) continue;
        const auto& [fn, budget] = entry;
        Verdict v;
        const auto start = std::chrono::steady_clock::now();
        try {
            fn(v);
        } catch (const std::exception& e) {
            v.check(false, std::string("exception: ") + e.what());
        }
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        if (budget > 0) v.check(secs < budget, "runtime " + fmt(secs) + " s over " + fmt(budget) + " s");
        all = all && v.pass;
        std::cout << name << " " << (v.pass ? "PASS" : "FAIL") << " " << v.detail.str() << " [" << fmt(secs) << " s]";
        for (std::size_t i = 0; i < v.failures.size() && i < 5; ++i) std::cout << (i ? "; " : " failed: ") << v.failures[i];
        if (v.failures.size() > 5) std::cout << "; +" << v.failures.size() - 5 << " more";
        std::cout << std::endl;
    }
    return all ? 0 : 1;
}
