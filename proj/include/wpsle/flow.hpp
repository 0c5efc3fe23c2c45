// Backward radial Loewner flow d f/dtau = f (f + xi)/(f - xi), f_0 = z, with
// the log-derivative carried alongside. Steps are aligned to the driving
// nodes; a node interval is taken in one RK4 step when the stiffness bound
// allows it, otherwise it is split into dyadic substeps on which the driving
// is refined by Brownian bridges down to the step size.
#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <functional>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include "wpsle/driving.hpp"
#include "wpsle/error.hpp"

namespace wpsle {

struct FlowState {
    std::complex<double> f;
    /// log f'_tau(z).
    std::complex<double> logd;
    double tau = 0;

    /// log |e^{-tau} f'_tau(z)|.
    double compensated() const { return logd.real() - tau; }
};

struct FlowOptions {
    double c_step = 0.1;
    double singular_tol = 1e-9;
    /// Stop once |f| exceeds this; the remaining change of the compensated
    /// log-derivative is O(|f|^-2). Infinity integrates to the horizon.
    double escape_radius = std::numeric_limits<double>::infinity();
};

namespace detail {

struct FlowVec {
    double fr, fi, qr, qi;
};

// Right-hand side for (f, G) with G = e^-tau f':
//   f' = f + 2 f xi/(f - xi),   G' = q G,   q = -2 (xi/(f - xi))^2.
// G obeys the variational equation, so RK4 on (f, G) gives the exact
// z-derivative of the discrete map.
inline FlowVec flow_rhs(double fr, double fi, double xr, double xi) {
    const double qr = fr - xr, qi = fi - xi;
    const double n = 1.0 / (qr * qr + qi * qi);
    // w = xi/(f - xi)
    const double wr = (xr * qr + xi * qi) * n, wi = (xi * qr - xr * qi) * n;
    return {fr + 2 * (fr * wr - fi * wi), fi + 2 * (fr * wi + fi * wr), -2 * (wr * wr - wi * wi), -4 * wr * wi};
}

inline void rk4(double& fr, double& fi, double& gr, double& gi, double h, std::complex<double> x0,
                std::complex<double> xm, std::complex<double> x1) {
    const auto k1 = flow_rhs(fr, fi, x0.real(), x0.imag());
    const double l1r = k1.qr * gr - k1.qi * gi, l1i = k1.qr * gi + k1.qi * gr;
    const auto k2 = flow_rhs(fr + 0.5 * h * k1.fr, fi + 0.5 * h * k1.fi, xm.real(), xm.imag());
    const double a2r = gr + 0.5 * h * l1r, a2i = gi + 0.5 * h * l1i;
    const double l2r = k2.qr * a2r - k2.qi * a2i, l2i = k2.qr * a2i + k2.qi * a2r;
    const auto k3 = flow_rhs(fr + 0.5 * h * k2.fr, fi + 0.5 * h * k2.fi, xm.real(), xm.imag());
    const double a3r = gr + 0.5 * h * l2r, a3i = gi + 0.5 * h * l2i;
    const double l3r = k3.qr * a3r - k3.qi * a3i, l3i = k3.qr * a3i + k3.qi * a3r;
    const auto k4 = flow_rhs(fr + h * k3.fr, fi + h * k3.fi, x1.real(), x1.imag());
    const double a4r = gr + h * l3r, a4i = gi + h * l3i;
    const double l4r = k4.qr * a4r - k4.qi * a4i, l4i = k4.qr * a4i + k4.qi * a4r;
    const double w = h / 6;
    fr += w * (k1.fr + 2 * k2.fr + 2 * k3.fr + k4.fr);
    fi += w * (k1.fi + 2 * k2.fi + 2 * k3.fi + k4.fi);
    gr += w * (l1r + 2 * l2r + 2 * l3r + l4r);
    gi += w * (l1i + 2 * l2i + 2 * l3i + l4i);
}

// Whole node interval in one step: the bound must hold at the distance from
// f to the arc swept by xi (|f| - 1 when f points into the arc).
inline bool fast_step_ok(double fr, double fi, double x0r, double x0i, double x1r, double x1i, double xmr, double xmi,
                         double cos_half_width, double c, double dt) {
    const double af = std::sqrt(fr * fr + fi * fi);
    const double inside = (fr * xmr + fi * xmi) / af;
    const double d0 = std::sqrt((fr - x0r) * (fr - x0r) + (fi - x0i) * (fi - x0i));
    const double d1 = std::sqrt((fr - x1r) * (fr - x1r) + (fi - x1i) * (fi - x1i));
    const double d = inside >= cos_half_width ? af - 1 : (d0 < d1 ? d0 : d1);
    return c * d * d >= dt * af;
}

struct Lane {
    double fr, fi, gr, gi;
};

// Dyadic substeps across the node interval held by `bc`. A step of length
// dtau 2^-L is taken when dtau 2^-L |f| <= c d^2 with
// d = max(|f| - 1, |f - xi_start| - |arc|), a lower bound for |f - xi| on it.
// Each step may at most double the previous one. lanes[0] chooses the steps;
// any further lanes follow the same steps.
inline void advance_substeps(Lane* lanes, int n, BridgeCache& bc, double dtau, const FlowOptions& o) {
    int level = 0, prev = 1;
    std::uint64_t j = 0;
    auto p0 = bc.at(0, 0);
    Lane& lead = lanes[0];
    while (!(level == 0 && j == 1)) {
        const double af = std::sqrt(lead.fr * lead.fr + lead.fi * lead.fi);
        const double qr = lead.fr - p0.xi.real(), qi = lead.fi - p0.xi.imag();
        const double d0 = std::sqrt(qr * qr + qi * qi);
        if (d0 < o.singular_tol) fail(ErrorCode::SingularApproach, "flow came within singular_tol of the driving point");
        int L = level;
        std::uint64_t jj = j;
        for (; L < prev - 1; ++L) jj *= 2;
        BridgeCache::Point p1;
        for (;;) {
            p1 = bc.at(L, jj + 1);
            const double d = std::max(af - 1, d0 - bc.scale() * std::abs(p1.b - p0.b));
            if (o.c_step * d * d >= std::ldexp(dtau, -L) * af) break;
            if (L >= BridgeCache::max_level) fail(ErrorCode::SingularApproach, "step size collapsed");
            ++L;
            jj *= 2;
        }
        // angular midpoint of the two driving values
        const std::complex<double> sum = p0.xi + p1.xi;
        const std::complex<double> xm = bc.scale() * std::abs(p1.b - p0.b) < 3
                                            ? sum / std::abs(sum)
                                            : std::polar(1.0, 0.5 * bc.scale() * (p0.b + p1.b));
        for (int i = 0; i < n; ++i) rk4(lanes[i].fr, lanes[i].fi, lanes[i].gr, lanes[i].gi, std::ldexp(dtau, -L), p0.xi, xm, p1.xi);
        prev = L;
        level = L;
        j = jj + 1;
        while (level > 0 && (j & 1) == 0) {
            j >>= 1;
            --level;
        }
        p0 = p1;
    }
}

struct NodeArc {
    double x0r, x0i, x1r, x1i, xmr, xmi, cw;
};

inline NodeArc node_arc(double b0, double b1) {
    const double width = std::abs(b1 - b0);
    return {std::cos(b0),
            std::sin(b0),
            std::cos(b1),
            std::sin(b1),
            std::cos(0.5 * (b0 + b1)),
            std::sin(0.5 * (b0 + b1)),
            width >= 2 * std::numbers::pi ? -2.0 : std::cos(width / 2)};
}

}  // namespace detail

namespace detail {

inline FlowState lane_state(const Lane& l, double tau) {
    return {{l.fr, l.fi}, std::log(std::complex<double>(l.gr, l.gi)) + tau, tau};
}

inline FlowState lane_state(const Lane& l, const DrivingPath& path, std::size_t steps) {
    return lane_state(l, double(steps) * path.dtau);
}

inline void check_lane(const Lane& l) {
    if (!std::isfinite(l.fr) || !std::isfinite(l.fi) || !std::isfinite(l.gr) || !std::isfinite(l.gi))
        fail(ErrorCode::NonFinite, "non-finite flow state");
}

// Integrates lanes[0] (and any followers on its steps) over whole node
// intervals up to the first node at or after path.horizon, or to escape.
inline void flow_lanes(const DrivingPath& path, Lane* lanes, int n, const FlowOptions& opts,
                       const std::function<void(const FlowState&)>& observe) {
    const double sk = std::sqrt(path.kappa);
    const double dt = path.dtau;
    const double R2 = opts.escape_radius * opts.escape_radius;
    BridgeCache bc(path);
    const std::size_t K = path.intervals();
    for (std::size_t k = 0; k < K; ++k) {
        const auto a = node_arc(sk * path.B[k], sk * path.B[k + 1]);
        if (fast_step_ok(lanes[0].fr, lanes[0].fi, a.x0r, a.x0i, a.x1r, a.x1i, a.xmr, a.xmi, a.cw, opts.c_step, dt)) {
            for (int i = 0; i < n; ++i)
                rk4(lanes[i].fr, lanes[i].fi, lanes[i].gr, lanes[i].gi, dt, {a.x0r, a.x0i}, {a.xmr, a.xmi}, {a.x1r, a.x1i});
        } else {
            bc.reset(k);
            advance_substeps(lanes, n, bc, dt, opts);
        }
        for (int i = 0; i < n; ++i) check_lane(lanes[i]);
        const double tau = double(k + 1) * dt;
        if (observe) observe(lane_state(lanes[0], tau));
        if (lanes[0].fr * lanes[0].fr + lanes[0].fi * lanes[0].fi >= R2) break;
    }
}


}  // namespace detail

/// Integrate one starting point over whole node intervals up to the first
/// node at or after path.horizon, or until |f| passes the escape radius.
/// `observe`, if given, is called at tau = 0 and after every node interval.
inline FlowState reverse_flow(const DrivingPath& path, std::complex<double> z, const FlowOptions& opts = {},
                              const std::function<void(const FlowState&)>& observe = {}) {
    if (!(std::abs(z) > 1)) fail(ErrorCode::DomainError, "reverse_flow needs |z| > 1");
    detail::Lane lane{z.real(), z.imag(), 1, 0};
    if (observe) observe({z, 0.0, 0.0});
    std::size_t steps = 0;
    detail::flow_lanes(path, &lane, 1, opts, [&](const FlowState& st) {
        steps = static_cast<std::size_t>(std::llround(st.tau / path.dtau));
        if (observe) observe(st);
    });
    return detail::lane_state(lane, path, steps);
}

/// Flow of z together with a nearby point w carried on exactly the steps
/// chosen for z, so that (f(w) - f(z))/(w - z) is a finite difference of
/// one discrete map.
inline std::pair<FlowState, FlowState> reverse_flow_pair(const DrivingPath& path, std::complex<double> z,
                                                         std::complex<double> w, const FlowOptions& opts = {}) {
    if (!(std::abs(z) > 1) || !(std::abs(w) > 1)) fail(ErrorCode::DomainError, "reverse_flow needs |z| > 1");
    detail::Lane lanes[2] = {{z.real(), z.imag(), 1, 0}, {w.real(), w.imag(), 1, 0}};
    std::size_t steps = 0;
    detail::flow_lanes(path, lanes, 2, opts, [&](const FlowState& st) {
        steps = static_cast<std::size_t>(std::llround(st.tau / path.dtau));
    });
    return {detail::lane_state(lanes[0], path, steps), detail::lane_state(lanes[1], path, steps)};
}

/// Many starting points under one driving path, stepped in lockstep.
/// Lane i stops at the first node at or after horizons[i] (or on escape);
/// its log|e^{-tau} f'_tau| there is written to compensated[i].
class FlowBatch {
public:
    explicit FlowBatch(FlowOptions opts = {}) : opts_(opts) {}

    void run(const DrivingPath& path, std::span<const std::complex<double>> z, std::span<const double> horizons,
             std::span<double> compensated) {
        const std::size_t n = z.size();
        if (horizons.size() != n || compensated.size() != n) fail(ErrorCode::DomainError, "FlowBatch size mismatch");
        fr_.resize(n);
        fi_.resize(n);
        gr_.resize(n);
        gi_.resize(n);
        last_.resize(n);
        lane_.resize(n);
        flag_.resize(n);
        for (std::size_t i = 0; i < n; ++i) {
            if (!(std::abs(z[i]) > 1)) fail(ErrorCode::DomainError, "reverse_flow needs |z| > 1");
            fr_[i] = z[i].real();
            fi_[i] = z[i].imag();
            gr_[i] = 1;
            gi_[i] = 0;
            lane_[i] = static_cast<std::uint32_t>(i);
            last_[i] = static_cast<std::uint32_t>(std::max(1.0, std::ceil(horizons[i] / path.dtau - 1e-9)));
        }
        std::size_t m = n;
        const double sk = std::sqrt(path.kappa);
        const double R2 = opts_.escape_radius * opts_.escape_radius;
        const double c = opts_.c_step;
        const double dt = path.dtau;
        const std::size_t K = path.intervals();
        BridgeCache bc(path);
        for (std::size_t k = 0; k < K && m > 0; ++k) {
            const auto arc = detail::node_arc(sk * path.B[k], sk * path.B[k + 1]);
            const double x0r = arc.x0r, x0i = arc.x0i, x1r = arc.x1r, x1i = arc.x1i, xmr = arc.xmr, xmi = arc.xmi;
            const double cw = arc.cw;
            double* __restrict fr = fr_.data();
            double* __restrict fi = fi_.data();
            double* __restrict gr = gr_.data();
            double* __restrict gi = gi_.data();
            std::uint8_t* __restrict flag = flag_.data();
            for (std::size_t i = 0; i < m; ++i) {
                const double a = fr[i], b = fi[i];
                const bool fast = detail::fast_step_ok(a, b, x0r, x0i, x1r, x1i, xmr, xmi, cw, c, dt);
                const double g0r = gr[i], g0i = gi[i];
                const auto k1 = detail::flow_rhs(a, b, x0r, x0i);
                const double l1r = k1.qr * g0r - k1.qi * g0i, l1i = k1.qr * g0i + k1.qi * g0r;
                const auto k2 = detail::flow_rhs(a + 0.5 * dt * k1.fr, b + 0.5 * dt * k1.fi, xmr, xmi);
                const double a2r = g0r + 0.5 * dt * l1r, a2i = g0i + 0.5 * dt * l1i;
                const double l2r = k2.qr * a2r - k2.qi * a2i, l2i = k2.qr * a2i + k2.qi * a2r;
                const auto k3 = detail::flow_rhs(a + 0.5 * dt * k2.fr, b + 0.5 * dt * k2.fi, xmr, xmi);
                const double a3r = g0r + 0.5 * dt * l2r, a3i = g0i + 0.5 * dt * l2i;
                const double l3r = k3.qr * a3r - k3.qi * a3i, l3i = k3.qr * a3i + k3.qi * a3r;
                const auto k4 = detail::flow_rhs(a + dt * k3.fr, b + dt * k3.fi, x1r, x1i);
                const double a4r = g0r + dt * l3r, a4i = g0i + dt * l3i;
                const double l4r = k4.qr * a4r - k4.qi * a4i, l4i = k4.qr * a4i + k4.qi * a4r;
                const double w = dt / 6;
                const double na = a + w * (k1.fr + 2 * k2.fr + 2 * k3.fr + k4.fr);
                const double nb = b + w * (k1.fi + 2 * k2.fi + 2 * k3.fi + k4.fi);
                const double ngr = g0r + w * (l1r + 2 * l2r + 2 * l3r + l4r);
                const double ngi = g0i + w * (l1i + 2 * l2i + 2 * l3i + l4i);
                fr[i] = fast ? na : a;
                fi[i] = fast ? nb : b;
                gr[i] = fast ? ngr : gr[i];
                gi[i] = fast ? ngi : gi[i];
                flag[i] = fast ? 0 : 1;
            }
            const auto step_no = static_cast<std::uint32_t>(k + 1);
            for (std::size_t i = 0; i < m;) {
                if (flag_[i]) {
                    bc.reset(k);
                    detail::Lane lane{fr_[i], fi_[i], gr_[i], gi_[i]};
                    detail::advance_substeps(&lane, 1, bc, dt, opts_);
                    fr_[i] = lane.fr;
                    fi_[i] = lane.fi;
                    gr_[i] = lane.gr;
                    gi_[i] = lane.gi;
                }
                const double f2 = fr_[i] * fr_[i] + fi_[i] * fi_[i];
                const double g2 = gr_[i] * gr_[i] + gi_[i] * gi_[i];
                if (!std::isfinite(f2) || !std::isfinite(g2)) fail(ErrorCode::NonFinite, "non-finite flow state");
                if (f2 >= R2 || last_[i] == step_no || k + 1 == K) {
                    compensated[lane_[i]] = 0.5 * std::log(g2);
                    --m;
                    fr_[i] = fr_[m];
                    fi_[i] = fi_[m];
                    gr_[i] = gr_[m];
                    gi_[i] = gi_[m];
                    last_[i] = last_[m];
                    lane_[i] = lane_[m];
                    flag_[i] = flag_[m];
                    continue;
                }
                ++i;
            }
        }
    }

    const FlowOptions& options() const { return opts_; }

private:
    FlowOptions opts_;
    std::vector<double> fr_, fi_, gr_, gi_;
    std::vector<std::uint32_t> last_, lane_;
    std::vector<std::uint8_t> flag_;
};

}  // namespace wpsle
