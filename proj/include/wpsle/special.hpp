// Gamma-function and Gauss hypergeometric kernels on the real line, with
// complex parameters allowed so that conjugate pairs (a, b = conj a) stay real.
#pragma once

#include <cmath>
#include <complex>
#include <numbers>

#include "wpsle/error.hpp"

namespace wpsle {

using cplx = std::complex<double>;

struct LogGamma {
    double log_abs;
    int sign;
};

/// log|Gamma(x)| and sign(Gamma(x)) for real x.
inline LogGamma log_gamma(double x) {
    if (!std::isfinite(x)) fail(ErrorCode::DomainError, "log_gamma of non-finite argument");
    if (x <= 0 && std::abs(x - std::round(x)) < 1e-12) fail(ErrorCode::PoleError, "Gamma has a pole at " + std::to_string(x));
    if (x >= 0.5) return {std::lgamma(x), +1};
    // reflection: Gamma(x) Gamma(1-x) = pi / sin(pi x), and Gamma(1-x) > 0 here
    const double s = std::sin(std::numbers::pi * x);
    return {std::log(std::numbers::pi) - std::log(std::abs(s)) - std::lgamma(1 - x), s > 0 ? +1 : -1};
}

namespace detail {

// Lanczos, g = 7, nine terms.
inline cplx lanczos_log_gamma(cplx z) {
    static constexpr double coef[] = {0.99999999999980993,  676.5203681218851,     -1259.1392167224028,
                                      771.32342877765313,   -176.61502916214059,   12.507343278686905,
                                      -0.13857109526572012, 9.9843695780195716e-6, 1.5056327351493116e-7};
    constexpr double g = 7;
    z -= 1.0;
    cplx x = coef[0];
    for (int i = 1; i < 9; ++i) x += coef[i] / (z + double(i));
    const cplx t = z + g + 0.5;
    return 0.5 * std::log(2 * std::numbers::pi) + (z + 0.5) * std::log(t) - t + std::log(x);
}

}  // namespace detail

/// Principal-ish complex log Gamma; only exp() of the result is meaningful.
inline cplx log_gamma(cplx z) {
    if (z.real() < 0.5) {
        if (z.imag() == 0 && z.real() <= 0 && std::abs(z.real() - std::round(z.real())) < 1e-12)
            fail(ErrorCode::PoleError, "Gamma has a pole at a nonpositive integer");
        return std::log(std::numbers::pi) - std::log(std::sin(std::numbers::pi * z)) - detail::lanczos_log_gamma(1.0 - z);
    }
    return detail::lanczos_log_gamma(z);
}

/// 1/Gamma(z), entire: vanishes at the poles of Gamma.
inline cplx reciprocal_gamma(cplx z) {
    if (z.real() < 0.5)
        return std::sin(std::numbers::pi * z) * std::exp(detail::lanczos_log_gamma(1.0 - z)) / std::numbers::pi;
    return std::exp(-detail::lanczos_log_gamma(z));
}

/// Value and first two x-derivatives.
template <class T>
struct Jet {
    T value{};
    T d1{};
    T d2{};
};

/// Gauss series 2F1(a, b; c; x) summed term by term together with its
/// term-wise derivatives. Intended for |x| <= 1/2; converges for |x| < 1.
inline Jet<cplx> hyp2f1_series(cplx a, cplx b, cplx c, double x, int max_terms = 5000) {
    Jet<cplx> out;
    cplx coef = 1.0;  // (a)_n (b)_n / ((c)_n n!)
    double xn = 1.0, xn1 = 0.0, xn2 = 0.0;  // x^n, x^(n-1), x^(n-2)
    int quiet = 0;
    const double floor_n = std::abs(a) + std::abs(b) + std::abs(c) + 2;
    for (int n = 0; n < max_terms; ++n) {
        const cplx tv = coef * xn;
        const cplx t1 = n >= 1 ? coef * double(n) * xn1 : cplx{};
        const cplx t2 = n >= 2 ? coef * double(n) * double(n - 1) * xn2 : cplx{};
        out.value += tv;
        out.d1 += t1;
        out.d2 += t2;
        const double tol = 1e-17;
        const bool small = std::abs(tv) <= tol * std::abs(out.value) && std::abs(t1) <= tol * std::abs(out.d1) + 1e-300 &&
                           std::abs(t2) <= tol * std::abs(out.d2) + 1e-300;
        if (coef == 0.0 && n > 0) return out;  // terminating series
        quiet = (small && n > floor_n) ? quiet + 1 : 0;
        if (quiet >= 3) return out;
        coef *= (a + double(n)) * (b + double(n)) / ((c + double(n)) * double(n + 1));
        xn2 = xn1;
        xn1 = xn;
        xn *= x;
    }
    fail(ErrorCode::NonConvergent, "2F1 series did not converge at x = " + std::to_string(x));
}

namespace detail {

inline bool near_integer(double v, double tol) { return std::abs(v - std::round(v)) < tol; }

inline void check_c(cplx c) {
    if (std::abs(c.imag()) < 1e-300 && c.real() <= 1e-8 && near_integer(c.real(), 1e-8))
        fail(ErrorCode::DegenerateC, "c = " + std::to_string(c.real()) + " is a nonpositive integer");
}

}  // namespace detail

/// 2F1(a, b; c; x) for x in [0, 1). Direct series up to x = 1/2, the 1 - x
/// connection formula beyond. Complex a, b are allowed; a conjugate pair
/// yields a real result (the imaginary part is rounding noise).
inline cplx gauss_2f1(cplx a, cplx b, cplx c, double x) {
    if (!(x >= 0.0 && x < 1.0)) fail(ErrorCode::DomainError, "gauss_2f1 needs x in [0, 1)");
    detail::check_c(c);
    if (a == 0.0 || b == 0.0 || x == 0.0) return 1.0;
    if (x <= 0.5) return hyp2f1_series(a, b, c, x).value;

    const cplx d = c - a - b;
    if (std::abs(d.imag()) < 1e-300 && detail::near_integer(d.real(), 1e-8)) {
        // logarithmic connection case: fall back on the slowly converging series
        return hyp2f1_series(a, b, c, x, 200000).value;
    }
    const double y = 1 - x;
    const cplx lg_c = log_gamma(c);
    const cplx A1 = std::exp(lg_c + log_gamma(d)) * reciprocal_gamma(c - a) * reciprocal_gamma(c - b);
    const cplx A2 = std::exp(lg_c + log_gamma(-d)) * reciprocal_gamma(a) * reciprocal_gamma(b);
    cplx out = A1 * hyp2f1_series(a, b, 1.0 - d, y).value;
    if (A2 != 0.0) out += A2 * std::pow(cplx(y), d) * hyp2f1_series(c - a, c - b, 1.0 + d, y).value;
    return out;
}

inline double gauss_2f1(double a, double b, double c, double x) { return gauss_2f1(cplx(a), cplx(b), cplx(c), x).real(); }

}  // namespace wpsle
