// Closed-form exponents of the averaged integral means spectrum of exterior
// whole-plane SLE: the quadratic exponent maps, the transition orders and
// the piecewise spectrum itself.
#pragma once

#include <cmath>
#include <complex>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "wpsle/error.hpp"

namespace wpsle {

struct Parameters {
    double kappa = 4.0;
    double t = 0.0;
};

inline Parameters make_parameters(double kappa, double t) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorCode::DomainError, "kappa must be finite and > 0");
    if (!std::isfinite(t)) fail(ErrorCode::DomainError, "t must be finite");
    return {kappa, t};
}

/// beta(gamma), A(gamma) and C(gamma) = A(gamma) + (1 + kappa/2) gamma.
struct Quadratics {
    double beta;
    double A;
    double C;
};

inline Quadratics quadratics(const Parameters& p, double gamma) {
    const double k = p.kappa;
    const double beta = k * gamma * gamma - (k / 2 + 2) * gamma + p.t;
    const double A = -(k / 2) * gamma * gamma + gamma - p.t;
    // C written out in expanded form; equals A + (1 + k/2) gamma
    const double C = -(k / 2) * gamma * gamma + (2 + k / 2) * gamma - p.t;
    return {beta, A, C};
}

// Discriminants under the two square roots.
inline double bulk_discriminant(const Parameters& p) {
    const double s = 4 + p.kappa;
    return s * s - 8 * p.kappa * p.t;
}
inline double power_discriminant(const Parameters& p) { return 1 - 2 * p.kappa * p.t; }

struct TransitionSet {
    double t1 = 0, t2 = 0, t3 = 0;
    /// (n, t_{1-n}) for admissible n, strictly decreasing in t.
    std::vector<std::pair<int, double>> t_seq;
    int j_max = 0;
    /// n in [0, j_max] dropped because n * kappa == 1 (divergent denominator).
    std::vector<int> excluded;
};

inline double t_one_minus_n(double kappa, int n) {
    const double nk = n * kappa;
    const double num = (1 + 2.0 * n) * (8 + kappa - 2 * nk) * (4 + kappa + 2 * nk) * (4 + kappa - 2 * nk);
    return -num / (128 * (1 - nk) * (1 - nk));
}

inline TransitionSet transitions(double kappa) {
    if (!(kappa > 0.0) || !std::isfinite(kappa)) fail(ErrorCode::DomainError, "kappa must be finite and > 0");
    TransitionSet ts;
    const double s = 4 + kappa;
    ts.t1 = -s * s * (8 + kappa) / 128;
    ts.t2 = -1 - 3 * kappa / 8;
    ts.t3 = 3 * s * s / (32 * kappa);
    // floor(1/kappa) with slack so that e.g. kappa = 1/3 keeps n = 3
    ts.j_max = static_cast<int>(std::floor(1.0 / kappa + 1e-12));
    for (int n = 0; n <= ts.j_max; ++n) {
        if (std::abs(n * kappa - 1.0) < 1e-9) {
            ts.excluded.push_back(n);
            continue;
        }
        ts.t_seq.emplace_back(n, t_one_minus_n(kappa, n));
    }
    return ts;
}

/// Sign of g0(0) from the alternation rule: +1 above t1, (-1)^(n-1) on the
/// n-th interval below it. At a member of T_kappa the interval below is used.
inline int sigma_of(const Parameters& p, const TransitionSet& ts) {
    if (p.t > ts.t1) return +1;
    int above = 0;
    for (const auto& [n, tn] : ts.t_seq)
        if (tn >= p.t) ++above;
    const int n = above - 1;
    return (n % 2 == 0) ? -1 : +1;
}

struct ExponentSet {
    Parameters params;
    std::optional<double> gamma0, gamma1, gamma_plus, gamma_minus;
    std::optional<double> beta0, beta1, beta_tip;
    double beta_lin = 0;
    std::optional<double> a, b, a_prime, b_prime;
    /// Real whenever gamma0 is, even when a and b are a complex-conjugate pair.
    std::optional<double> c, c_prime, ab_sum, ab_product;
    std::optional<double> alpha;
    int sigma = +1;
    bool c0_vanishes = false;
};

/// Unwraps an optional exponent or throws AbsentExponent naming the field.
inline double need(const std::optional<double>& v, const char* name) {
    if (!v) fail(ErrorCode::AbsentExponent, std::string(name) + " is outside its real domain");
    return *v;
}

namespace detail {
inline bool near_nonpositive_integer(double x, double tol) {
    if (x > tol) return false;
    return std::abs(x - std::round(x)) < tol;
}
}  // namespace detail

inline ExponentSet exponent_set(const Parameters& p) {
    const double k = p.kappa, t = p.t;
    ExponentSet e;
    e.params = p;
    e.beta_lin = t - (4 + k) * (4 + k) / (16 * k);

    const double d0 = bulk_discriminant(p);
    if (d0 >= 0) {
        const double g0 = (4 + k - std::sqrt(d0)) / (2 * k);
        e.gamma0 = g0;
        e.beta0 = -t + (4 + k) / (4 * k) * (4 + k - std::sqrt(d0));
        e.beta_tip = *e.beta0 - 2 * g0 - 1;
        // a + b = 2 gamma0 - 2/kappa and ab = -2 A(gamma0)/kappa hold for either root pair
        const double sum = 2 * g0 - 2 / k;
        e.ab_sum = sum;
        e.ab_product = -2 * quadratics(p, g0).A / k;
        e.c = 0.5 + sum;
        e.c_prime = 1.5 - sum;
    }
    const double d1 = power_discriminant(p);
    if (d1 >= 0) {
        const double root = std::sqrt(d1);
        e.gamma_plus = (1 + root) / k;
        e.gamma_minus = (1 - root) / k;
        e.gamma1 = e.gamma_plus;
        e.beta1 = -t - 0.5 * (1 + root);
        if (e.gamma0) {
            e.a = *e.gamma0 - *e.gamma_plus;
            e.b = *e.gamma0 - *e.gamma_minus;
            e.a_prime = 0.5 - *e.a;
            e.b_prime = 0.5 - *e.b;
            e.c0_vanishes = detail::near_nonpositive_integer(*e.a_prime, 1e-9) ||
                            detail::near_nonpositive_integer(*e.b_prime, 1e-9);
        }
    }
    if (e.ab_sum) {
        const double s = 0.5 - *e.ab_sum;
        e.alpha = e.c0_vanishes ? s : std::min(s, 1.0);
    }
    e.sigma = sigma_of(p, transitions(k));
    return e;
}

/// The hypergeometric pair (a, b); complex conjugates when 1 - 2 kappa t < 0.
inline std::pair<std::complex<double>, std::complex<double>> hypergeometric_ab(const Parameters& p) {
    const double d0 = bulk_discriminant(p);
    if (d0 < 0) fail(ErrorCode::AbsentExponent, "gamma0 is outside its real domain");
    const double k = p.kappa;
    const double g0 = (4 + k - std::sqrt(d0)) / (2 * k);
    const std::complex<double> root = std::sqrt(std::complex<double>(power_discriminant(p), 0.0));
    const std::complex<double> gp = (1.0 + root) / k, gm = (1.0 - root) / k;
    return {g0 - gp, g0 - gm};
}

enum class Branch { Tip, One, Bulk, Linear };

constexpr const char* to_string(Branch b) {
    switch (b) {
    case Branch::Tip: return "tip";
    case Branch::One: return "one";
    case Branch::Bulk: return "bulk";
    case Branch::Linear: return "linear";
    }
    return "?";
}

struct SpectrumValue {
    double value;
    Branch branch;
};

inline double beta0_of(double k, double t) {
    return -t + (4 + k) / (4 * k) * (4 + k - std::sqrt((4 + k) * (4 + k) - 8 * k * t));
}
inline double beta_tip_of(double k, double t) {
    return -t - 1 + 0.25 * (4 + k - std::sqrt((4 + k) * (4 + k) - 8 * k * t));
}
inline double beta1_of(double k, double t) { return -t - 0.5 * (1 + std::sqrt(1 - 2 * k * t)); }
inline double beta_lin_of(double k, double t) { return t - (4 + k) * (4 + k) / (16 * k); }

inline double branch_value(Branch b, double k, double t) {
    switch (b) {
    case Branch::Tip: return beta_tip_of(k, t);
    case Branch::One: return beta1_of(k, t);
    case Branch::Bulk: return beta0_of(k, t);
    case Branch::Linear: return beta_lin_of(k, t);
    }
    return 0;
}

/// Piecewise spectrum. At a transition point the lower-t branch is reported.
inline SpectrumValue theorem_spectrum(const Parameters& p, bool tip_included) {
    const auto ts = transitions(p.kappa);
    Branch br;
    if (tip_included)
        br = p.t <= ts.t2 ? Branch::Tip : (p.t <= ts.t3 ? Branch::Bulk : Branch::Linear);
    else
        br = p.t <= ts.t1 ? Branch::One : (p.t <= ts.t3 ? Branch::Bulk : Branch::Linear);
    return {branch_value(br, p.kappa, p.t), br};
}

enum class Direction { Forward, Inverse };

/// Forward: packing spectrum s(t) on t <= t1. Inverse: nu(s), with t = -nu(s).
inline double packing_and_nu(double kappa, double t_or_s, Direction dir) {
    const auto ts = transitions(kappa);
    auto forward = [kappa](double t) { return -2 * t + 0.5 - 0.5 * std::sqrt(1 - 2 * kappa * t); };
    if (dir == Direction::Forward) {
        if (!(t_or_s <= ts.t1)) fail(ErrorCode::DomainError, "packing spectrum needs t <= t1");
        return forward(t_or_s);
    }
    // s is decreasing in t, so the forward image of (-inf, t1] is [s(t1), inf)
    const double s_min = forward(ts.t1);
    if (!(t_or_s >= s_min * (1 - 1e-14) - 1e-14))
        fail(ErrorCode::DomainError, "nu(s) needs s >= s(t1)");
    const double s = t_or_s;
    return s / 2 + (kappa - 4 + std::sqrt((4 - kappa) * (4 - kappa) + 16 * kappa * s)) / 16;
}

}  // namespace wpsle
