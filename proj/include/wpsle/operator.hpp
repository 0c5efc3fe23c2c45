// The stationary operator Lambda acting on trial functions
//     psi = (|z|^2 - 1)^(-beta) u^gamma g(u),  u = |1 - z|^2,
// optionally times l_delta = (-log(|z|^2 - 1))^delta: closed-form actions,
// a fourth-order finite-difference evaluation in (r, theta), and the
// positivity and sign scans near the unit circle.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <vector>

#include "wpsle/boundary.hpp"
#include "wpsle/error.hpp"
#include "wpsle/exponents.hpp"

namespace wpsle {

struct PolarPoint {
    double r;
    double theta;

    double u() const { return r * r - 2 * r * std::cos(theta) + 1; }
    /// z zbar - 1
    double rho() const { return r * r - 1; }
};

enum class TrialKind { Hypergeometric, PurePower, Mixed };

/// psi0 = (zz-1)^-beta0 u^gamma0 g0(u), psi1 = (zz-1)^-beta1 u^gamma1, or
/// sigma psi0 + psi1; each optionally times l_delta.
class TrialFunction {
public:
    static TrialFunction hypergeometric(const Parameters& p, double delta = 0) {
        TrialFunction f(TrialKind::Hypergeometric, p, delta);
        f.g0_ = std::make_shared<const BoundarySolution>(p);
        f.beta0_ = need(f.exps_.beta0, "beta0");
        f.gamma0_ = need(f.exps_.gamma0, "gamma0");
        return f;
    }
    static TrialFunction pure_power(const Parameters& p, double delta = 0) {
        TrialFunction f(TrialKind::PurePower, p, delta);
        f.beta1_ = need(f.exps_.beta1, "beta1");
        f.gamma1_ = need(f.exps_.gamma1, "gamma1");
        return f;
    }
    /// sigma defaults to the sign of g0(0) given by the alternation rule.
    static TrialFunction mixed(const Parameters& p, double delta = 0, std::optional<int> sigma = std::nullopt) {
        TrialFunction f(TrialKind::Mixed, p, delta);
        f.g0_ = std::make_shared<const BoundarySolution>(p);
        f.beta0_ = need(f.exps_.beta0, "beta0");
        f.gamma0_ = need(f.exps_.gamma0, "gamma0");
        f.beta1_ = need(f.exps_.beta1, "beta1");
        f.gamma1_ = need(f.exps_.gamma1, "gamma1");
        f.sigma_ = sigma.value_or(f.exps_.sigma);
        return f;
    }

    TrialKind kind() const { return kind_; }
    const Parameters& params() const { return params_; }
    const ExponentSet& exponents() const { return exps_; }
    double delta() const { return delta_; }
    int sigma() const { return sigma_; }
    const BoundarySolution& g0() const { return *g0_; }
    TrialFunction with_delta(double delta) const {
        TrialFunction f = *this;
        f.delta_ = delta;
        return f;
    }

    double psi0(const PolarPoint& z) const {
        const double u = z.u();
        return std::pow(z.rho(), -beta0_) * std::pow(u, gamma0_) * (*g0_)(u);
    }
    double psi1(const PolarPoint& z) const { return std::pow(z.rho(), -beta1_) * std::pow(z.u(), gamma1_); }

    /// psi without the logarithmic factor.
    double psi(const PolarPoint& z) const {
        switch (kind_) {
        case TrialKind::Hypergeometric: return psi0(z);
        case TrialKind::PurePower: return psi1(z);
        case TrialKind::Mixed: return sigma_ * psi0(z) + psi1(z);
        }
        return 0;
    }

    double log_factor(const PolarPoint& z) const {
        if (delta_ == 0) return 1.0;
        return std::pow(-std::log(z.rho()), delta_);
    }

    /// psi * l_delta.
    double operator()(const PolarPoint& z) const { return psi(z) * log_factor(z); }
    double operator()(double r, double theta) const { return (*this)({r, theta}); }

private:
    TrialFunction(TrialKind k, const Parameters& p, double delta)
        : kind_(k), params_(p), exps_(exponent_set(p)), delta_(delta) {}

    TrialKind kind_;
    Parameters params_;
    ExponentSet exps_;
    std::shared_ptr<const BoundarySolution> g0_;
    double beta0_ = 0, gamma0_ = 0, beta1_ = 0, gamma1_ = 0;
    double delta_ = 0;
    int sigma_ = +1;
};

namespace detail {

inline void check_action_domain(const PolarPoint& z, double delta) {
    if (!(z.r > 1.0)) fail(ErrorCode::DomainError, "the action is defined for |z| > 1");
    const double u = z.u();
    if (!(u > 0.0 && u < 8.0)) fail(ErrorCode::DomainError, "the action needs u in (0, 8)");
    if (delta != 0 && !(z.rho() < 1.0)) fail(ErrorCode::DomainError, "l_delta needs |z|^2 - 1 < 1");
}

// Lambda psi0 / ((zz-1)^-beta u^gamma), i.e. g0 X + g0' Y with the
// removable 1/(4-u) singularity resolved.
inline double bs_bracket(const Parameters& p, double beta, double gamma, const BoundarySolution& g0, double rho, double u) {
    const double k = p.kappa, t = p.t;
    const double A = quadratics(p, gamma).A;
    const auto g = g0.eval(u);
    const double w = rho * rho / (u * u);
    // regular part
    double out = g.value * (rho * (t + gamma - beta) / u + w * (1 + k / 2) * gamma) +
                 g.d1 * (rho * (1 - k / 2) + w * (1 + k / 2) * u);
    // E = -2A g0 + 2k g0' and H = 4A g0 - k u g0' both vanish at u = 4
    const double E = -2 * A * g.value + 2 * k * g.d1;
    const double H = 4 * A * g.value - k * u * g.d1;
    if (std::abs(4 - u) > 1e-6) {
        out += (rho * E + w * H) / (4 - u);
    } else {
        const double Ed = -2 * A * g.d1 + 2 * k * g.d2;
        const double Hd = 4 * A * g.d1 - k * g.d1 - k * u * g.d2;
        out += -(rho * Ed + w * Hd);
    }
    return out;
}

}  // namespace detail

/// Lambda psi0 / psi0 for psi0 = (zz-1)^-beta0 u^gamma0 g0(u).
inline double action_psi0(const TrialFunction& tf, const PolarPoint& z) {
    const auto& e = tf.exponents();
    const double u = z.u();
    const double g = tf.g0()(u);
    return detail::bs_bracket(tf.params(), *e.beta0, *e.gamma0, tf.g0(), z.rho(), u) / g;
}

/// Lambda psi1 / psi1 for the pure power psi1 = (zz-1)^-beta1 u^gamma1.
inline double action_psi1(const TrialFunction& tf, const PolarPoint& z) {
    const auto& p = tf.params();
    const double g1 = *tf.exponents().gamma1;
    const double rho = z.rho(), u = z.u();
    return rho / u * (2 * p.t + (1 + p.kappa / 2) * g1) + rho * rho / (u * u) * (1 + p.kappa / 2) * g1;
}

/// The l_delta correction: Lambda(psi l)/(psi l) - Lambda psi / psi.
inline double action_log_term(double delta, const PolarPoint& z) {
    if (delta == 0) return 0;
    return -2 * delta * z.r * z.r / (z.u() * (-std::log(z.rho())));
}

/// Closed-form action. Hypergeometric and PurePower: Lambda(psi l)/(psi l).
/// Mixed: Lambda(psi l)/l, which stays finite across zeros of psi0.
inline double action_analytic(const TrialFunction& tf, const PolarPoint& z) {
    detail::check_action_domain(z, tf.delta());
    const double logt = action_log_term(tf.delta(), z);
    switch (tf.kind()) {
    case TrialKind::Hypergeometric: return action_psi0(tf, z) + logt;
    case TrialKind::PurePower: return action_psi1(tf, z) + logt;
    case TrialKind::Mixed: {
        const auto& e = tf.exponents();
        const double u = z.u(), rho = z.rho();
        const double pre0 = std::pow(rho, -*e.beta0) * std::pow(u, *e.gamma0);
        const double lam0 = pre0 * detail::bs_bracket(tf.params(), *e.beta0, *e.gamma0, tf.g0(), rho, u);
        const double psi1 = tf.psi1(z);
        return tf.sigma() * lam0 + psi1 * action_psi1(tf, z) + tf.psi(z) * logt;
    }
    }
    return 0;
}

/// Lambda applied to the trial function itself (not divided by anything).
inline double lambda_analytic(const TrialFunction& tf, const PolarPoint& z) {
    const double a = action_analytic(tf, z);
    if (tf.kind() == TrialKind::Mixed) return a * tf.log_factor(z);
    return a * tf(z);
}

/// Radial ladder r - 1 = 2^-k and uniform angles on (0, pi]. psi depends on
/// theta through cos(theta) only, so the lower half-plane mirrors these.
struct AnnulusGrid {
    std::vector<double> radii;   // ascending
    std::vector<double> thetas;  // ascending in (0, pi]

    static AnnulusGrid ladder(int k_min = 4, int k_max = 14, int n_theta = 512) {
        AnnulusGrid g;
        for (int k = k_max; k >= k_min; --k) g.radii.push_back(1.0 + std::ldexp(1.0, -k));
        for (int j = 1; j <= n_theta; ++j) g.thetas.push_back(std::numbers::pi * j / n_theta);
        return g;
    }

    /// Default finite-difference steps at radius r.
    static double h_r(double r) { return (r - 1) / 64; }
    static constexpr double h_theta = 2 * std::numbers::pi / 8192;
};

using GridFunction = std::function<double(double r, double theta)>;

/// Fourth-order central-difference evaluation of
///   t ((r^4 + 4r^2(1 - r cos) - 1)/u^2 - 1) F + r(r^2 - 1)/u F_r
///     - 2 r sin / u F_theta + (kappa/2) F_theta_theta.
inline double lambda_numeric(const GridFunction& F, const Parameters& p, const PolarPoint& z, double h_r, double h_theta) {
    if (!(z.r - 2 * h_r > 1.0)) fail(ErrorCode::StencilOutOfGrid, "radial stencil crosses the unit circle");
    if (!(h_r > 0 && h_theta > 0)) fail(ErrorCode::StencilOutOfGrid, "steps must be positive");
    const double r = z.r, th = z.theta;
    const double c = std::cos(th), s = std::sin(th);
    const double u = r * r - 2 * r * c + 1;
    const double f0 = F(r, th);
    const double fr = (-F(r + 2 * h_r, th) + 8 * F(r + h_r, th) - 8 * F(r - h_r, th) + F(r - 2 * h_r, th)) / (12 * h_r);
    const double fp1 = F(r, th + h_theta), fm1 = F(r, th - h_theta);
    const double fp2 = F(r, th + 2 * h_theta), fm2 = F(r, th - 2 * h_theta);
    const double ft = (-fp2 + 8 * fp1 - 8 * fm1 + fm2) / (12 * h_theta);
    const double ftt = (-fp2 + 16 * fp1 - 30 * f0 + 16 * fm1 - fm2) / (12 * h_theta * h_theta);
    const double zeroth = p.t * ((r * r * r * r + 4 * r * r * (1 - r * c) - 1) / (u * u) - 1);
    return zeroth * f0 + r * (r * r - 1) / u * fr - 2 * r * s / u * ft + p.kappa / 2 * ftt;
}

inline double lambda_numeric(const GridFunction& F, const Parameters& p, const PolarPoint& z) {
    return lambda_numeric(F, p, z, AnnulusGrid::h_r(z.r), AnnulusGrid::h_theta);
}

struct PositivityReport {
    bool ok = false;
    /// Largest ladder radius such that psi > 0 at every sampled point with |z| <= r0.
    double r0 = 1.0;
    std::vector<PolarPoint> offending;
};

/// Positivity scan of psi = sigma psi0 + psi1 on the grid.
inline PositivityReport positivity_scan(const Parameters& p, const AnnulusGrid& grid, std::optional<int> sigma = std::nullopt) {
    const auto tf = TrialFunction::mixed(p, 0, sigma);
    PositivityReport rep;
    bool clean = true;
    for (double r : grid.radii) {
        bool all_pos = true;
        for (double th : grid.thetas) {
            const PolarPoint z{r, th};
            if (!(tf.psi(z) > 0)) {
                all_pos = false;
                rep.offending.push_back(z);
            }
        }
        if (clean && all_pos) rep.r0 = r;
        clean = clean && all_pos;
    }
    rep.ok = !grid.radii.empty() && rep.r0 > 1.0;
    return rep;
}

/// The four leading pieces of Lambda(psi l)/l for the mixed function, plus the rest.
struct TermProfile {
    PolarPoint at{0, 0};
    double I = 0, II = 0, III = 0, IV = 0;
    /// sigma Lambda psi0, treated as lower order.
    double rest = 0;
};

inline TermProfile four_terms(const TrialFunction& tf, const PolarPoint& z) {
    const auto& p = tf.params();
    const double g1 = *tf.exponents().gamma1;
    const double rho = z.rho(), u = z.u();
    const double logt = action_log_term(tf.delta(), z);
    const double s0 = tf.sigma() * tf.psi0(z), p1 = tf.psi1(z);
    TermProfile tp;
    tp.at = z;
    tp.I = s0 * logt;
    tp.II = p1 * rho / u * (2 * p.t + (1 + p.kappa / 2) * g1);
    tp.III = p1 * rho * rho / (u * u) * (1 + p.kappa / 2) * g1;
    tp.IV = p1 * logt;
    const auto& e = tf.exponents();
    tp.rest = tf.sigma() * std::pow(rho, -*e.beta0) * std::pow(u, *e.gamma0) *
              detail::bs_bracket(p, *e.beta0, *e.gamma0, tf.g0(), rho, u);
    return tp;
}

struct SignSample {
    PolarPoint at;
    double psi;
    double lambda_over_psi;
    int sign;
    TermProfile terms;
};

struct SignScanReport {
    TrialKind kind = TrialKind::Mixed;
    double delta = 0;
    int expected_sign = 0;
    double r0_empirical = 1.0;
    std::vector<PolarPoint> violations;
    /// Point of the reported annulus where |Lambda| is smallest relative to
    /// the summed magnitudes of its pieces.
    TermProfile term_profile;
    std::vector<SignSample> samples;
};

namespace detail {
inline int sign_of(double v) { return (v > 0) - (v < 0); }
}  // namespace detail

/// Sign scan. Mixed kind: sign of Lambda(psi l_delta) must be
/// -sign(delta) at every sampled point of the annulus. Hypergeometric kind
/// (t1 < t < t3): |Lambda psi0 / psi0| must stay below the log term.
inline SignScanReport sign_scan(const Parameters& p, double delta, const AnnulusGrid& grid,
                                TrialKind kind = TrialKind::Mixed, bool keep_samples = false) {
    if (delta == 0) fail(ErrorCode::DomainError, "sign_scan needs delta != 0");
    if (kind == TrialKind::PurePower) fail(ErrorCode::DomainError, "sign_scan runs on the mixed or hypergeometric function");
    const auto ts = transitions(p.kappa);
    if (kind == TrialKind::Mixed) {
        if (!(p.t < ts.t1)) fail(ErrorCode::DomainError, "the mixed sign scan needs t < t1");
        for (const auto& [n, tn] : ts.t_seq)
            if (std::abs(p.t - tn) < 1e-9) fail(ErrorCode::DomainError, "the sign scan needs t outside T_kappa");
    } else if (!(p.t > ts.t1 && p.t < ts.t3)) {
        fail(ErrorCode::DomainError, "the hypergeometric scan needs t1 < t < t3");
    }

    const auto tf = kind == TrialKind::Mixed ? TrialFunction::mixed(p, delta) : TrialFunction::hypergeometric(p, delta);
    SignScanReport rep;
    rep.kind = kind;
    rep.delta = delta;
    rep.expected_sign = -detail::sign_of(delta);
    bool clean = true;
    bool inner_done = false;
    bool inner_mixed = false;
    double worst = std::numeric_limits<double>::infinity();
    for (double r : grid.radii) {
        bool all_ok = true;
        int seen_pos = 0, seen_neg = 0;
        for (double th : grid.thetas) {
            const PolarPoint z{r, th};
            bool ok;
            SignSample smp{z, tf.psi(z), 0, 0, {}};
            if (kind == TrialKind::Mixed) {
                const double lam = action_analytic(tf, z);  // Lambda(psi l)/l
                smp.lambda_over_psi = lam / smp.psi;
                smp.sign = detail::sign_of(lam);
                ok = smp.sign == rep.expected_sign;
                smp.terms = four_terms(tf, z);
                const auto& tp = smp.terms;
                const double mass = std::abs(tp.I) + std::abs(tp.II) + std::abs(tp.III) + std::abs(tp.IV) + std::abs(tp.rest);
                const double ratio = mass > 0 ? std::abs(lam) / mass : 0;
                if (clean && ok && ratio < worst) {
                    worst = ratio;
                    rep.term_profile = tp;
                }
            } else {
                const double bare = action_psi0(tf, z);
                const double logt = action_log_term(delta, z);
                smp.lambda_over_psi = bare + logt;
                smp.sign = detail::sign_of(smp.psi) * detail::sign_of(bare + logt);
                ok = std::abs(bare) <= std::abs(logt) && smp.sign == rep.expected_sign;
                const double ratio = std::abs(logt) > 0 ? 1 - std::abs(bare) / std::abs(logt) : 0;
                if (clean && ok && ratio < worst) {
                    worst = ratio;
                    rep.term_profile = TermProfile{z, 0, 0, 0, smp.psi * logt, smp.psi * bare};
                }
            }
            if (smp.sign > 0) ++seen_pos;
            if (smp.sign < 0) ++seen_neg;
            if (!ok) {
                all_ok = false;
                rep.violations.push_back(z);
            }
            if (keep_samples) rep.samples.push_back(smp);
        }
        if (!inner_done) {
            inner_done = true;
            inner_mixed = !all_ok;
        }
        if (clean && all_ok) rep.r0_empirical = r;
        clean = clean && all_ok;
    }
    if (inner_mixed)
        fail(ErrorCode::NoValidAnnulus, "the innermost ladder radius already violates the sign condition");
    return rep;
}

struct Case3Report {
    double eps = 0.05;
    int points = 0;
    /// min over checked points of sigma psi0 (must be > 0)
    double min_sigma_psi0 = 0;
    /// max of psi1 / (sigma psi0 u^(1/2)) over checked points
    double max_ratio = 0;
    /// 2^(beta0 - beta1) / min sigma g0: the explicit constant of the bound
    double bound = 0;
    /// gamma1 + eps (2 gamma0 + 1); must be >= 0 for the bound to close
    double power = 0;
    bool holds = false;
};

/// Checks psi1 <= K sigma psi0 u^(1/2) at sampled points with r - 1 > u^(1/2 + eps), t < t1.
inline Case3Report case3_domination(const Parameters& p, const AnnulusGrid& grid, double eps = 0.05) {
    const auto tf = TrialFunction::mixed(p);
    const auto& e = tf.exponents();
    Case3Report rep;
    rep.eps = eps;
    rep.power = *e.gamma1 + eps * (2 * *e.gamma0 + 1);
    double min_sg0 = std::numeric_limits<double>::infinity();
    rep.min_sigma_psi0 = std::numeric_limits<double>::infinity();
    for (double r : grid.radii)
        for (double th : grid.thetas) {
            const PolarPoint z{r, th};
            const double u = z.u();
            if (!(r - 1 > std::pow(u, 0.5 + eps))) continue;
            ++rep.points;
            const double sp0 = tf.sigma() * tf.psi0(z);
            rep.min_sigma_psi0 = std::min(rep.min_sigma_psi0, sp0);
            min_sg0 = std::min(min_sg0, tf.sigma() * tf.g0()(u));
            rep.max_ratio = std::max(rep.max_ratio, tf.psi1(z) / (sp0 * std::sqrt(u)));
        }
    rep.bound = std::pow(2.0, *e.beta0 - *e.beta1) / min_sg0;
    rep.holds = rep.points > 0 && rep.min_sigma_psi0 > 0 && rep.power >= 0 && rep.max_ratio <= rep.bound;
    return rep;
}

}  // namespace wpsle
