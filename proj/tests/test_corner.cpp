#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lamella/corner.hpp"
#include "lamella/modal.hpp"

using namespace lamella;
using Catch::Approx;

namespace {

complexd harmonic_term(int n, complexd an, complexd bn, double x, double y) {
    const double r = std::hypot(x, y);
    const double t = std::atan2(y, x);
    return std::pow(r, n) * (an * std::sin(n * t) + bn * std::cos(n * t));
}

} // namespace

TEST_CASE("exact harmonic input is recovered to near machine precision") {
    Corner c{0.0, 0.0, pi};
    auto sampler = [](double x, double y) { return harmonic_term(2, 1.0, 0.0, x, y); };
    auto fit = fit_harmonic_expansion(sampler, c, default_fit_radii(), 3);
    CHECK(std::abs(fit.a[2] - complexd(1, 0)) < 1e-10);
    for (int n = 0; n <= 3; ++n) {
        if (n != 2) {
            CHECK(std::abs(fit.a[n]) < 1e-10);
            CHECK(std::abs(fit.b[n]) < 1e-10);
        }
    }
    CHECK(fit.lowest_order == 2);
    // Residuals are at the numerical floor.
    for (double rho : fit.residuals) CHECK(rho < 1e-10);
}

TEST_CASE("constructed quartic remainder is detected with exponent near four") {
    Corner c{0.0, 0.0, pi};
    auto sampler = [](double x, double y) {
        const double r2 = x * x + y * y;
        return harmonic_term(2, 1.0, 0.0, x, y) + complexd(r2 * r2, 0);
    };
    auto fit = fit_harmonic_expansion(sampler, c, default_fit_radii(), 3);
    CHECK(fit.residual_exponent == Approx(4.0).margin(0.6));
    // The non-harmonic remainder bleeds a little into b0, so only the
    // dominant harmonic coefficient is pinned here.
    CHECK(std::abs(fit.a[2] - complexd(1, 0)) < 1e-3);
}

TEST_CASE("random finite harmonic series are reproduced") {
    std::mt19937 rng(31);
    std::normal_distribution<double> g(0.0, 1.0);
    Corner c{0.3, -0.2, pi};
    for (int trial = 0; trial < 20; ++trial) {
        const int n_max = 4;
        std::vector<complexd> a(n_max + 1), b(n_max + 1);
        for (int n = 0; n <= n_max; ++n) {
            a[n] = (n == 0) ? complexd(0, 0) : complexd(g(rng), g(rng));
            b[n] = complexd(g(rng), g(rng));
        }
        auto sampler = [&](double x, double y) {
            complexd acc = b[0];
            for (int n = 1; n <= n_max; ++n)
                acc += harmonic_term(n, a[n], b[n], x - c.x1, y - c.x2);
            return acc;
        };
        auto fit = fit_harmonic_expansion(sampler, c, default_fit_radii(), n_max);
        for (int n = 0; n <= n_max; ++n) {
            REQUIRE(std::abs(fit.a[n] - a[n]) < 1e-9);
            REQUIRE(std::abs(fit.b[n] - b[n]) < 1e-9);
        }
        for (double rho : fit.residuals) REQUIRE(rho < 1e-9);
    }
}

TEST_CASE("special solution residuals for the basic Dirichlet case") {
    TrigPoly p = TrigPoly::zero(0);
    p.cos_c[0] = 1.0;
    auto s = build_special_solution(0, complexd(1, 0), complexd(0, 0), p, SectorBc::dirichlet);
    auto res = s.verify();
    CHECK(res.max() < 1e-12);
}

TEST_CASE("equal sector data keeps the logarithm away") {
    TrigPoly p = TrigPoly::zero(0);
    p.cos_c[0] = 1.0;
    auto s = build_special_solution(0, complexd(1, 0), complexd(1, 0), p, SectorBc::dirichlet);
    CHECK(std::abs(s.C) < 1e-15);
    // Matching data produce matching angular factors.
    for (int i = 0; i <= 16; ++i) {
        const double t = pi * i / 16;
        CHECK(std::abs(s.f_plus.eval(t) - s.f_minus.eval(t)) < 1e-14);
    }
    auto res = s.verify();
    CHECK(res.max() < 1e-12);
}

TEST_CASE("vanishing data forces a vanishing logarithmic coefficient") {
    std::mt19937 rng(7);
    std::normal_distribution<double> g(0.0, 1.0);
    for (int k = 0; k <= 6; ++k) {
        TrigPoly p = TrigPoly::zero(k);
        for (int j = k % 2; j <= k; j += 2) {
            p.cos_c[j] = complexd(g(rng), g(rng));
            p.sin_c[j] = complexd(g(rng), g(rng));
        }
        for (SectorBc bc : {SectorBc::dirichlet, SectorBc::neumann}) {
            auto s = build_special_solution(k, complexd(0, 0), complexd(0, 0), p, bc);
            CHECK(s.C == complexd(0, 0));
            CHECK(s.verify().max() < 1e-12);
        }
    }
}

TEST_CASE("random battery of special solutions verifies to 1e-12") {
    std::mt19937 rng(101);
    std::normal_distribution<double> g(0.0, 1.0);
    std::uniform_int_distribution<int> uk(0, 6);
    for (int trial = 0; trial < 100; ++trial) {
        const int k = uk(rng);
        TrigPoly p = TrigPoly::zero(k);
        for (int j = k % 2; j <= k; j += 2) {
            p.cos_c[j] = complexd(g(rng), g(rng));
            p.sin_c[j] = complexd(g(rng), g(rng));
        }
        const complexd cp(g(rng), g(rng)), cm(g(rng), g(rng));
        const SectorBc bc = (trial % 2 == 0) ? SectorBc::dirichlet : SectorBc::neumann;
        auto s = build_special_solution(k, cp, cm, p, bc);
        REQUIRE(s.verify().max() < 1e-12);
    }
}

TEST_CASE("special solution satisfies the PDE pointwise (finite differences)") {
    TrigPoly p = TrigPoly::zero(1);
    p.sin_c[1] = complexd(0.7, -0.3);
    const complexd cp(1.1, 0.4), cm(-0.6, 0.2);
    auto s = build_special_solution(1, cp, cm, p, SectorBc::dirichlet);

    auto u = [&](double x, double y) {
        const double r = std::hypot(x, y);
        double t = std::atan2(y, x);
        return s.eval(r, t);
    };
    const double h = 1e-4;
    // Interior points of both sectors, away from the rays.
    for (auto [r, t] : {std::pair{0.5, 0.4}, {0.7, 1.1}, {0.6, 2.0}, {0.5, 2.9}}) {
        const double x = r * std::cos(t), y = r * std::sin(t);
        complexd lap = (u(x + h, y) + u(x - h, y) + u(x, y + h) + u(x, y - h) - 4.0 * u(x, y)) /
                       (h * h);
        const complexd c = (t > 0.5 * pi) ? cp : cm;
        const complexd want = c * std::pow(r, 1) * p.eval(t);
        REQUIRE(std::abs(lap - want) < 1e-5 * std::max(1.0, std::abs(want)));
    }
}

TEST_CASE("overly deep fits are refused as ill conditioned") {
    Corner c{0.0, 0.0, pi};
    auto sampler = [](double x, double y) { return harmonic_term(2, 1.0, 0.0, x, y); };
    // Weighted columns spread like (r_max/r_min)^n_max ~ 5^20 here.
    REQUIRE_THROWS_AS(fit_harmonic_expansion(sampler, c, default_fit_radii(), 20),
                      IllConditionedFit);
}

TEST_CASE("corner clearance accounts for periodic images") {
    auto p = binary_profile({0.0, pi}, 0.0, 1.0);
    // Corners: (0,0),(0,1),(pi,0),(pi,1). Nearest neighbour of each is at
    // distance 1 (vertically).
    for (std::size_t i = 0; i < 4; ++i)
        CHECK(corner_clearance(p, i) == Approx(1.0));
    auto radii = default_fit_radii(corner_clearance(p, 0));
    CHECK(radii.back() <= 0.5);
}

TEST_CASE("modal field at a grating corner has a harmonic lowest-order expansion") {
    auto p = binary_profile({0.0, pi}, 0.0, 1.0);
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(p, media, inc, 48);
    auto corners = corners_of(p);
    const Corner& c = corners[3]; // (pi, 1)
    auto sampler = [&](double x, double y) { return sol.evaluate(x, y); };
    auto radii = default_fit_radii(corner_clearance(p, 3));
    auto fit = fit_harmonic_expansion(sampler, c, radii, 4);
    INFO("m = " << fit.lowest_order << ", exponent = " << fit.residual_exponent);
    REQUIRE(fit.lowest_order <= 2);
    CHECK(fit.residual_exponent >= fit.lowest_order + 2 - 0.3);
}
