#include <gtest/gtest.h>

#include <cmath>
#include <cstring>
#include <set>

#include "wpsle/driving.hpp"

using namespace wpsle;

TEST(Driving, Reproducible) {
    const auto a = sample_driving(42, 6, 10, 1e-3);
    const auto b = sample_driving(42, 6, 10, 1e-3);
    ASSERT_EQ(a.B.size(), b.B.size());
    EXPECT_EQ(std::memcmp(a.B.data(), b.B.data(), a.B.size() * sizeof(double)), 0);
    const auto c = sample_driving(43, 6, 10, 1e-3);
    EXPECT_NE(a.B.back(), c.B.back());
}

TEST(Driving, ZeroKappaIsConstant) {
    const auto p = sample_driving(7, 0, 5, 1e-2);
    for (double tau = 0; tau <= 5; tau += 0.0137) {
        EXPECT_EQ(p.xi(tau), std::complex<double>(1, 0));
    }
    BridgeCache cache(p);
    cache.reset(3);
    EXPECT_EQ(cache.at(5, 17).xi, std::complex<double>(1, 0));
}

TEST(Driving, NodeCountAndInterpolation) {
    const auto p = sample_driving(1, 4, 1.0, 1e-2);
    EXPECT_EQ(p.intervals(), 100u);
    EXPECT_EQ(p.B[0], 0);
    EXPECT_EQ(p.brownian(0.0), 0);
    EXPECT_NEAR(p.brownian(0.035), p.B[3] + 0.5 * (p.B[4] - p.B[3]), 1e-12);
    EXPECT_EQ(p.brownian(2.0), p.B.back());
    EXPECT_NEAR(std::abs(p.xi(0.5)), 1, 1e-15);
    EXPECT_NEAR(std::arg(p.xi(0.3)), std::remainder(2 * p.brownian(0.3), 2 * std::numbers::pi), 1e-12);
}

TEST(Driving, TerminalVariance) {
    const int n = 10000;
    const double T = 2.0;
    double s = 0, s2 = 0;
    for (int i = 0; i < n; ++i) {
        const auto p = sample_driving(derive_path_seed(2024, i), 1, T, 1e-2);
        const double b = p.B.back();
        s += b;
        s2 += b * b;
    }
    const double var = s2 / n - (s / n) * (s / n);
    // var of the sample variance of a Gaussian: 2 T^2 / (n - 1)
    const double se = std::sqrt(2.0 / (n - 1)) * T;
    EXPECT_NEAR(var, T, 5 * se);
    EXPECT_NEAR(s / n, 0, 5 * std::sqrt(T / n));
}

TEST(Driving, Preconditions) {
    EXPECT_THROW(sample_driving(1, 4, 0, 1e-3), Error);
    EXPECT_THROW(sample_driving(1, 4, 1, 0), Error);
    EXPECT_THROW(sample_driving(1, 4, 1, 0.1), Error);
    EXPECT_THROW(sample_driving(1, -1, 1, 1e-3), Error);
    EXPECT_NO_THROW(sample_driving(1, 4, 1, 1e-2));
}

TEST(Driving, PathSeedsAreDistinct) {
    std::set<std::uint64_t> seen;
    for (std::uint64_t m : {0ull, 1ull, 2ull})
        for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(derive_path_seed(m, i));
    EXPECT_EQ(seen.size(), 3000u);
}

TEST(Bridge, EndpointsAndOrderIndependence) {
    const auto p = sample_driving(9, 6, 1, 1e-2);
    BridgeCache a(p), b(p);
    a.reset(10);
    b.reset(10);
    EXPECT_EQ(a.at(0, 0).b, p.B[10]);
    EXPECT_EQ(a.at(0, 1).b, p.B[11]);
    EXPECT_EQ(a.at(3, 8).b, p.B[11]);
    const double fine = a.at(6, 37).b;
    b.at(2, 1);
    b.at(4, 9);
    const double coarse_first = b.at(6, 37).b;
    EXPECT_EQ(fine, coarse_first);
    // revisiting after another interval reproduces the same value
    a.reset(11);
    a.reset(10);
    EXPECT_EQ(a.at(6, 37).b, fine);
    EXPECT_NEAR(std::arg(a.at(6, 37).xi), std::remainder(a.scale() * fine, 2 * std::numbers::pi), 1e-12);
}

TEST(Bridge, MidpointVariance) {
    const int n = 20000;
    const double dtau = 1e-2;
    double s2 = 0;
    for (int i = 0; i < n; ++i) {
        const auto p = sample_driving(derive_path_seed(5, i), 1, dtau, dtau);
        BridgeCache c(p);
        c.reset(0);
        const double dev = c.at(1, 1).b - 0.5 * (p.B[0] + p.B[1]);
        s2 += dev * dev;
    }
    const double var = s2 / n, expect = dtau / 4;
    EXPECT_NEAR(var, expect, 5 * std::sqrt(2.0 / n) * expect);
}

TEST(Bridge, NormalsLookStandard) {
    const int n = 100000;
    double s = 0, s2 = 0;
    for (int j = 0; j < n; ++j) {
        const double z = bridge_normal(77, 3, 2, j);
        s += z;
        s2 += z * z;
    }
    EXPECT_NEAR(s / n, 0, 5 / std::sqrt(double(n)));
    EXPECT_NEAR(s2 / n, 1, 5 * std::sqrt(2.0 / n));
}
