// The boundary function g0(u), u = |1 - z|^2, solving the hypergeometric
// boundary equation and regular at u = 4, plus its residual and zero checks.
#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "wpsle/error.hpp"
#include "wpsle/exponents.hpp"
#include "wpsle/special.hpp"

namespace wpsle {

/// g0 for one (kappa, t), normalised by g0(0) = C0. Immutable once built.
///
/// For u/4 <= 1/2 the function is assembled from the two Frobenius
/// solutions at u = 0,
///     g0 = C0 F(a, b; c; u/4) - C0' (u/4)^(1/2-a-b) F(a', b'; c'; u/4),
/// and for u/4 > 1/2 from the solution analytic at u = 4,
///     g0 = (1/2 - a - b)/sqrt(pi) F(a, b; 1/2; 1 - u/4),
/// which is the same function (the connection formula for this pair). The
/// second form also continues g0 analytically past u = 4, as needed off
/// the unit circle where u runs up to (1 + |z|)^2.
class BoundarySolution {
public:
    explicit BoundarySolution(const Parameters& p) : params_(p), exps_(exponent_set(p)) {
        const auto ts = transitions(p.kappa);
        if (!(p.t < ts.t3)) fail(ErrorCode::DomainError, "g0 is bounded only for t < t3");
        const auto [a, b] = hypergeometric_ab(p);
        a_ = a;
        b_ = b;
        s_ = 0.5 - need(exps_.ab_sum, "a+b");
        const double c = 0.5 + (a_ + b_).real();
        degenerate_c_ = c <= 1e-8 && std::abs(c - std::round(c)) < 1e-8;

        C0_ = (std::exp(log_gamma(cplx(1.5 - (a_ + b_).real()))) * reciprocal_gamma(0.5 - a_) * reciprocal_gamma(0.5 - b_)).real();
        C0_prime_ = degenerate_c_ ? std::nan("")
                                  : (std::exp(log_gamma(cplx(c))) * reciprocal_gamma(a_) * reciprocal_gamma(b_)).real();
        for (const auto& [n, tn] : ts.t_seq)
            if (std::abs(p.t - tn) < 1e-6) near_tk_ = true;
    }

    const Parameters& params() const { return params_; }
    const ExponentSet& exponents() const { return exps_; }
    cplx a() const { return a_; }
    cplx b() const { return b_; }
    /// 1/2 - a - b, the exponent of the second Frobenius solution.
    double s() const { return s_; }
    double C0() const { return C0_; }
    double C0_prime() const { return C0_prime_; }
    /// t within 1e-6 of a point of T_kappa, where C0 ~ 0.
    bool near_tk() const { return near_tk_; }
    bool degenerate_c() const { return degenerate_c_; }

    /// g0 and its first two u-derivatives, u in [0, 8).
    Jet<double> eval(double u) const {
        if (!(u >= 0.0 && u < 8.0)) fail(ErrorCode::DomainError, "g0 is evaluated on u in [0, 8)");
        const double x = u / 4;
        if (x > 0.5) {
            const double scale = s_ / std::sqrt(std::numbers::pi);
            const auto F = hyp2f1_series(a_, b_, 0.5, 1 - x);
            return {scale * F.value.real(), -scale * F.d1.real() / 4, scale * F.d2.real() / 16};
        }
        if (degenerate_c_)
            fail(ErrorCode::DegenerateC, "c = 1/2 + a + b is a nonpositive integer; logarithmic case not implemented");
        const auto F1 = hyp2f1_series(a_, b_, 0.5 + a_ + b_, x);
        if (x == 0.0) return {C0_, std::nan(""), std::nan("")};
        const auto F2 = hyp2f1_series(0.5 - a_, 0.5 - b_, 1.5 - a_ - b_, x);
        const double p0 = std::pow(x, s_), p1 = s_ * p0 / x, p2 = s_ * (s_ - 1) * p0 / (x * x);
        const double f2 = F2.value.real(), f2d = F2.d1.real(), f2dd = F2.d2.real();
        const double w = p0 * f2;
        const double wd = p1 * f2 + p0 * f2d;
        const double wdd = p2 * f2 + 2 * p1 * f2d + p0 * f2dd;
        return {C0_ * F1.value.real() - C0_prime_ * w, (C0_ * F1.d1.real() - C0_prime_ * wd) / 4,
                (C0_ * F1.d2.real() - C0_prime_ * wdd) / 16};
    }

    double operator()(double u) const { return eval(u).value; }

private:
    Parameters params_;
    ExponentSet exps_;
    cplx a_, b_;
    double s_ = 0;
    double C0_ = 0, C0_prime_ = 0;
    bool near_tk_ = false;
    bool degenerate_c_ = false;
};

inline BoundarySolution build_g0(const Parameters& p) { return BoundarySolution(p); }

struct Residuals {
    /// Hypergeometric equation for g0, relative to its largest term.
    double hypergeometric;
    /// Boundary equation for g = u^gamma0 g0 with beta = beta0, relative likewise.
    double boundary;
};

inline Residuals ode_residual(const BoundarySolution& sol, double u) {
    if (!(u > 0.0 && u < 4.0)) fail(ErrorCode::DomainError, "ode_residual needs u in (0, 4)");
    const auto& p = sol.params();
    const double k = p.kappa, t = p.t;
    const double gamma = need(sol.exponents().gamma0, "gamma0");
    const double beta = need(sol.exponents().beta0, "beta0");
    const double A = quadratics(p, gamma).A;
    const auto g = sol.eval(u);

    auto relative = [](double x, double y, double z) {
        const double scale = std::max({std::abs(x), std::abs(y), std::abs(z)});
        return scale == 0 ? 0.0 : std::abs(x + y + z) / scale;
    };
    const double h0 = A * g.value;
    const double h1 = (k / 2 * (2 - u) + (k * gamma - 1) * (4 - u)) * g.d1;
    const double h2 = k / 2 * (4 - u) * u * g.d2;

    // g = u^gamma g0
    const double ug = std::pow(u, gamma);
    const double G = ug * g.value;
    const double Gd = ug * (gamma * g.value / u + g.d1);
    const double Gdd = ug * (gamma * (gamma - 1) * g.value / (u * u) + 2 * gamma * g.d1 / u + g.d2);
    const double b0 = (t * (2 - u) - 2 * beta) * G;
    const double b1 = (k / 2 * (2 - u) - (4 - u)) * u * Gd;
    const double b2 = k / 2 * (4 - u) * u * u * Gdd;
    return {relative(h0, h1, h2), relative(b0, b1, b2)};
}

/// Weight of the (4 - u)^(1/2) component of C0 F(a, b; c; u/4) - C0' w at
/// u = 4, relative to the regular one, for C0 and C0' scaled as given. Zero
/// for g0 itself; both Frobenius solutions solve the equation, so this is the
/// check that separates g0 from its neighbours.
inline double singular_defect(const BoundarySolution& sol, double c0_scale = 1, double c0p_scale = 1) {
    if (sol.degenerate_c()) fail(ErrorCode::DegenerateC, "c = 1/2 + a + b is a nonpositive integer");
    const cplx a = sol.a(), b = sol.b();
    const cplx c = 0.5 + a + b, ap = 0.5 - a, bp = 0.5 - b, cp = 1.5 - a - b;
    const double rpi = std::sqrt(std::numbers::pi);
    // F(a, b; a + b + 1/2; x) = A1 F(.; 1/2; 1 - x) + A2 (1 - x)^(1/2) F(.; 3/2; 1 - x)
    const cplx gc = std::exp(log_gamma(c)), gcp = std::exp(log_gamma(cp));
    const cplx A1 = gc * rpi * reciprocal_gamma(c - a) * reciprocal_gamma(c - b);
    const cplx A2 = gc * (-2 * rpi) * reciprocal_gamma(a) * reciprocal_gamma(b);
    const cplx B1 = gcp * rpi * reciprocal_gamma(cp - ap) * reciprocal_gamma(cp - bp);
    const cplx B2 = gcp * (-2 * rpi) * reciprocal_gamma(ap) * reciprocal_gamma(bp);
    const double C0 = c0_scale * sol.C0(), C0p = c0p_scale * sol.C0_prime();
    const double regular = std::abs(C0 * A1 - C0p * B1);
    const double singular = std::abs(C0 * A2 - C0p * B2);
    return singular / std::max(regular, std::abs(C0 * A2) + std::abs(C0p * B2));
}

struct ZeroReport {
    int count = 0;
    std::vector<double> locations;
    double refinement_width = 0;
};

/// Sign changes of g0 on (0, 4): uniform scan, then bisection of each cell.
inline ZeroReport count_zeros(const BoundarySolution& sol, int cells = 10000, double width = 1e-9) {
    const auto& p = sol.params();
    const auto ts = transitions(p.kappa);
    if (!(p.t < ts.t1)) fail(ErrorCode::DomainError, "count_zeros needs t < t1");
    for (const auto& [n, tn] : ts.t_seq)
        if (std::abs(p.t - tn) < 1e-9) fail(ErrorCode::DomainError, "count_zeros needs t outside T_kappa");

    auto sgn = [](double v) { return (v > 0) - (v < 0); };
    ZeroReport rep;
    const double h = 4.0 / cells;
    double prev_u = 0, prev = sol(0);
    for (int i = 1; i <= cells; ++i) {
        const double u = i == cells ? 4.0 - 1e-12 : i * h;
        const double cur = sol(u);
        if (sgn(prev) * sgn(cur) < 0) {
            // one refinement pass: the cell must hold exactly one sign change
            constexpr int sub = 16;
            int changes = 0;
            double lo = prev_u, hi = u;
            double sv = prev;
            for (int j = 1; j <= sub; ++j) {
                const double uj = prev_u + (u - prev_u) * j / sub;
                const double vj = j == sub ? cur : sol(uj);
                if (sgn(sv) * sgn(vj) < 0) {
                    ++changes;
                    lo = prev_u + (u - prev_u) * (j - 1) / sub;
                    hi = uj;
                }
                if (vj != 0) sv = vj;
            }
            if (changes != 1)
                fail(ErrorCode::GridTooCoarse, "several sign changes of g0 in one cell near u = " + std::to_string(u));
            double flo = sol(lo);
            while (hi - lo > width) {
                const double mid = 0.5 * (lo + hi);
                const double fm = sol(mid);
                if (fm == 0) {
                    lo = hi = mid;
                    break;
                }
                if (sgn(fm) == sgn(flo)) {
                    lo = mid;
                    flo = fm;
                } else {
                    hi = mid;
                }
            }
            rep.locations.push_back(0.5 * (lo + hi));
            rep.refinement_width = std::max(rep.refinement_width, hi - lo);
        }
        if (cur != 0) {
            prev = cur;
            prev_u = u;
        }
    }
    rep.count = static_cast<int>(rep.locations.size());
    return rep;
}

}  // namespace wpsle
