// Brownian driving on the unit circle, xi(tau) = exp(i sqrt(kappa) B(tau)),
// sampled on a uniform grid and linearly interpolated in B between nodes.
// Finer values inside a node interval come from Brownian-bridge midpoints
// that are pure functions of (seed, interval, level, index).
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

#include "wpsle/error.hpp"

namespace wpsle {

/// SplitMix64 finaliser.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z += 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Per-path seed: a function of (master, index) only, so any worker layout
/// reproduces the same paths.
constexpr std::uint64_t derive_path_seed(std::uint64_t master, std::uint64_t index) {
    return mix64(mix64(master) ^ mix64(index + 0x632BE59BD9B4E019ull));
}

struct DrivingPath {
    std::uint64_t seed = 0;
    double kappa = 0;
    double horizon = 0;
    double dtau = 0;
    /// B at tau_k = k dtau, k = 0..nodes-1; B[0] = 0.
    std::vector<double> B;

    std::size_t intervals() const { return B.empty() ? 0 : B.size() - 1; }

    double brownian(double tau) const {
        if (tau <= 0) return 0;
        const double s = tau / dtau;
        auto k = static_cast<std::size_t>(s);
        if (k >= intervals()) return B.back();
        const double w = s - double(k);
        return B[k] + (B[k + 1] - B[k]) * w;
    }

    std::complex<double> xi(double tau) const { return std::polar(1.0, std::sqrt(kappa) * brownian(tau)); }
};

inline DrivingPath sample_driving(std::uint64_t seed, double kappa, double T, double dtau) {
    if (!(T > 0)) fail(ErrorCode::DomainError, "driving horizon must be > 0");
    if (!(dtau > 0 && dtau <= 1e-2)) fail(ErrorCode::DomainError, "dtau must lie in (0, 1e-2]");
    if (!(kappa >= 0) || !std::isfinite(kappa)) fail(ErrorCode::DomainError, "kappa must be finite and >= 0");
    DrivingPath path;
    path.seed = seed;
    path.kappa = kappa;
    path.horizon = T;
    path.dtau = dtau;
    const auto n = static_cast<std::size_t>(std::ceil(T / dtau - 1e-9));
    path.B.resize(n + 1);
    path.B[0] = 0;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal(0.0, std::sqrt(dtau));
    for (std::size_t k = 1; k <= n; ++k) path.B[k] = path.B[k - 1] + normal(rng);
    return path;
}

/// Standard normal attached to bridge node (k, level, j) of a path.
inline double bridge_normal(std::uint64_t seed, std::uint64_t k, int level, std::uint64_t j) {
    const std::uint64_t h = mix64(seed ^ mix64(k * 0x9E3779B97F4A7C15ull + std::uint64_t(level)) ^ mix64(j + 0xD1B54A32D192ED03ull));
    const double u1 = (double(mix64(h) >> 11) + 0.5) * 0x1p-53;
    const double u2 = double(mix64(h ^ 0x5851F42D4C957F2Dull) >> 11) * 0x1p-53;
    return std::sqrt(-2 * std::log(u1)) * std::cos(2 * std::numbers::pi * u2);
}

/// B and xi at the dyadic points tau_k + j 2^-level dtau of one node
/// interval. Values persist until reset() moves to another interval.
class BridgeCache {
public:
    static constexpr int max_level = 48;

    struct Point {
        double b;
        std::complex<double> xi;
    };

    explicit BridgeCache(const DrivingPath& path) : path_(&path), sk_(std::sqrt(path.kappa)), slots_(1024) {}

    void reset(std::size_t k) {
        if (k == k_) return;
        k_ = k;
        ++gen_;
        used_ = 0;
        ends_[0] = make(path_->B[k]);
        ends_[1] = make(path_->B[k + 1]);
    }
    std::size_t interval() const { return k_; }
    /// sqrt(kappa), the factor from B to the driving angle.
    double scale() const { return sk_; }

    Point at(int level, std::uint64_t j) {
        while (level > 0 && (j & 1) == 0) {
            j >>= 1;
            --level;
        }
        if (level == 0) return ends_[j];
        const std::uint64_t key = (std::uint64_t(level) << 52) | j;
        std::size_t i = slot_of(key);
        if (slots_[i].gen == gen_) return slots_[i].p;
        const double mid = 0.5 * (at(level - 1, (j - 1) / 2).b + at(level - 1, (j + 1) / 2).b);
        const double sd = std::sqrt(std::ldexp(path_->dtau, -level) / 2);
        const Point p = make(mid + sd * bridge_normal(path_->seed, k_, level, j));
        if (2 * (used_ + 1) > slots_.size()) grow();
        i = slot_of(key);
        slots_[i] = {key, gen_, p};
        ++used_;
        return p;
    }

private:
    struct Slot {
        std::uint64_t key = 0;
        std::uint64_t gen = 0;
        Point p{};
    };

    Point make(double b) const { return {b, std::polar(1.0, sk_ * b)}; }

    // Slot holding `key`, or the empty slot where it belongs.
    std::size_t slot_of(std::uint64_t key) const {
        const std::size_t mask = slots_.size() - 1;
        std::size_t i = static_cast<std::size_t>(mix64(key)) & mask;
        while (slots_[i].gen == gen_ && slots_[i].key != key) i = (i + 1) & mask;
        return i;
    }

    void grow() {
        std::vector<Slot> old(slots_.size() * 2);
        old.swap(slots_);
        for (const auto& sl : old)
            if (sl.gen == gen_) slots_[slot_of(sl.key)] = sl;
    }

    const DrivingPath* path_;
    double sk_;
    std::size_t k_ = static_cast<std::size_t>(-1);
    std::uint64_t gen_ = 0;
    std::size_t used_ = 0;
    std::vector<Slot> slots_;
    Point ends_[2]{};
};

}  // namespace wpsle
