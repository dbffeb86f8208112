#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lamella/invert.hpp"

using namespace lamella;
using Catch::Approx;

namespace {

InverseProblemSpec reference_spec(int n_data, int nsamples = 128) {
    auto truth = binary_profile({0.7, 3.9}, 0.0, 0.8);
    MediumPair media{1.0, complexd(1.6, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.2};
    InverseProblemSpec spec;
    spec.data = solve_forward(truth, media, inc, n_data).trace(1.2, nsamples);
    spec.k1 = 1.0;
    spec.theta = 0.2;
    spec.lambda = 1.0;
    spec.b = 1.2;
    spec.M = 2;
    spec.h_min = -0.5;
    spec.h_max = 1.1;
    spec.k2_min = 1.05;
    spec.k2_max = 2.5;
    return spec;
}

Eigen::VectorXd truth_vector() {
    Eigen::VectorXd x(5);
    x << 0.7, 3.9, 0.0, 0.8, 1.6;
    return x;
}

} // namespace

TEST_CASE("spec validation catches inconsistent setups") {
    auto spec = reference_spec(10, 32);
    SECTION("odd transition count") {
        spec.M = 3;
        REQUIRE_THROWS_AS(spec.validate(), Error);
    }
    SECTION("measurement line below admissible tops") {
        spec.b = 1.0;
        spec.h_max = 1.1;
        REQUIRE_THROWS_AS(spec.validate(), Error);
    }
    SECTION("k2 bracket straddling k1") {
        spec.k2_min = 0.9;
        spec.k2_max = 1.4;
        REQUIRE_THROWS_AS(spec.validate(), Error);
    }
    SECTION("reference setup is accepted") {
        REQUIRE_NOTHROW(spec.validate());
    }
}

TEST_CASE("objective self-consistency at the truth") {
    auto spec = reference_spec(24);
    CHECK(objective(truth_vector(), spec, 24) < 1e-12);
}

TEST_CASE("objective is strictly positive away from the truth") {
    auto spec = reference_spec(24);
    Eigen::VectorXd x = truth_vector();
    x(4) *= 1.01; // one percent in k2
    const double f = objective(x, spec, 24);
    CHECK(f > 1e-4);
}

TEST_CASE("flat candidates are either invalid or far from a corrugated truth") {
    auto spec = reference_spec(24);
    Eigen::VectorXd x = truth_vector();
    x(2) = x(3) = 0.4; // exactly flat: fails validation
    CHECK(std::isinf(objective(x, spec, 24)));
    x(3) = 0.4 + 1e-9; // effectively flat
    const double f = objective(x, spec, 24);
    CHECK(f > 0.1);
    CHECK(f < 10.0);
}

TEST_CASE("empirical global minimum at the truth on a local scan") {
    auto spec = reference_spec(10, 64);
    const double f0 = objective(truth_vector(), spec, 10);
    REQUIRE(f0 < 1e-12);
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int i = 0; i < 10000; ++i) {
        Eigen::VectorXd x = truth_vector();
        x(0) += 0.3 * u(rng);
        x(1) += 0.3 * u(rng);
        x(2) += 0.2 * u(rng);
        x(3) += 0.2 * u(rng);
        x(4) += 0.1 * u(rng);
        const double f = objective(x, spec, 10);
        REQUIRE(f >= f0);
    }
}

TEST_CASE("identifiability probes") {
    const double k1 = 1.0, theta = 0.2, b = 1.2;
    auto p1 = binary_profile({0.0, pi}, 0.0, 1.0);
    // Same corner set, opposite groove opening.
    auto p2 = binary_profile({0.0, pi}, 1.0, 0.0);

    SECTION("identical inputs give exactly zero") {
        CHECK(identifiability_probe(p1, 1.5, p1, 1.5, k1, theta, 1.0, b, 40) == 0.0);
    }
    SECTION("coincident corners with different openings are distinguishable") {
        const double d = identifiability_probe(p1, 1.5, p2, 1.5, k1, theta, 1.0, b, 40);
        CHECK(d > 1e-6);
    }
    SECTION("medium contrast alone is distinguishable") {
        const double d = identifiability_probe(p1, 1.5, p1, 1.6, k1, theta, 1.0, b, 40);
        CHECK(d > 1e-6);
    }
    SECTION("probe is symmetric") {
        const double d12 = identifiability_probe(p1, 1.5, p2, 1.7, k1, theta, 1.0, b, 24);
        const double d21 = identifiability_probe(p2, 1.7, p1, 1.5, k1, theta, 1.0, b, 24);
        CHECK(d12 == Approx(d21).epsilon(1e-12));
    }
}

TEST_CASE("reconstruction recovers the truth with a reduced budget") {
    auto spec = reference_spec(28);
    InversionConfig cfg;
    cfg.restarts = 8;
    cfg.n_schedule = {10, 20};
    cfg.n_polish = 28;
    cfg.stage_iters = 250;
    cfg.polish_iters = 500;
    cfg.seed = 424242;
    auto res = reconstruct(spec, cfg);
    INFO("misfit " << res.misfit << " k2 " << res.k2);
    REQUIRE(res.misfit < 1e-6);
    CHECK(std::abs(res.profile.transitions[0] - 0.7) < 1e-3 * two_pi);
    CHECK(std::abs(res.profile.transitions[1] - 3.9) < 1e-3 * two_pi);
    CHECK(std::abs(res.profile.heights[0] - 0.0) < 2e-3);
    CHECK(std::abs(res.profile.heights[1] - 0.8) < 2e-3);
    CHECK(std::abs(res.k2 - 1.6) / 1.6 < 2e-3);
    CHECK(validate_profile(res.profile).inversion_ok);
    // Restarts landing on the same canonical profile through permuted raw
    // parameters must not be reported as a second basin.
    CHECK_FALSE(res.ambiguous);

    SECTION("determinism under a fixed seed") {
        auto res2 = reconstruct(spec, cfg);
        REQUIRE(res2.misfit == res.misfit);
        REQUIRE(res2.k2 == res.k2);
        for (int i = 0; i < 2; ++i)
            REQUIRE(res2.profile.transitions[i] == res.profile.transitions[i]);
    }
}

TEST_CASE("coarse-to-fine schedule does not lose accuracy") {
    auto spec = reference_spec(24);
    InversionConfig sched;
    sched.restarts = 6;
    sched.n_schedule = {10, 24};
    sched.n_polish = 24;
    sched.stage_iters = 250;
    sched.polish_iters = 400;
    sched.seed = 777;
    InversionConfig single = sched;
    single.n_schedule = {24};
    auto rs = reconstruct(spec, sched);
    auto r1 = reconstruct(spec, single);
    CHECK(rs.misfit <= r1.misfit * 1.5 + 1e-10);
}

TEST_CASE("noisy data degrade gracefully") {
    auto spec = reference_spec(28);
    spec.data = add_trace_noise(spec.data, 0.01, 99);
    spec.noise_level = 0.01;
    InversionConfig cfg;
    cfg.restarts = 8;
    cfg.n_schedule = {10, 20};
    cfg.n_polish = 28;
    cfg.stage_iters = 250;
    cfg.polish_iters = 400;
    cfg.seed = 31337;
    auto res = reconstruct(spec, cfg);
    INFO("misfit " << res.misfit);
    CHECK(res.misfit < 0.05);
    CHECK(std::abs(res.profile.transitions[0] - 0.7) < 5e-2 * two_pi);
    CHECK(std::abs(res.profile.transitions[1] - 3.9) < 5e-2 * two_pi);
    CHECK(std::abs(res.profile.heights[0] - 0.0) < 5e-2);
    CHECK(std::abs(res.profile.heights[1] - 0.8) < 5e-2);
    CHECK(std::abs(res.k2 - 1.6) / 1.6 < 5e-2);
}

TEST_CASE("degenerate configuration reports no feasible start") {
    auto spec = reference_spec(10, 32);
    InversionConfig cfg;
    cfg.restarts = 0;
    REQUIRE_THROWS_AS(reconstruct(spec, cfg), NoFeasibleStart);
}

TEST_CASE("forcing the wrong corner count keeps the misfit off the noise floor") {
    // Truth has four transitions; the search space is pinned to two.
    auto truth = binary_profile({0.5, 2.0, 3.5, 5.0}, 0.0, 0.7);
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.2};
    InverseProblemSpec spec;
    spec.data = solve_forward(truth, media, inc, 28).trace(1.2, 128);
    spec.k1 = 1.0;
    spec.theta = 0.2;
    spec.b = 1.2;
    spec.M = 2;
    spec.h_min = -0.5;
    spec.h_max = 1.1;
    spec.k2_min = 1.05;
    spec.k2_max = 2.5;
    InversionConfig cfg;
    cfg.restarts = 8;
    cfg.n_schedule = {10, 20};
    cfg.n_polish = 28;
    cfg.stage_iters = 250;
    cfg.polish_iters = 400;
    cfg.seed = 2;
    auto res = reconstruct(spec, cfg);
    INFO("misfit " << res.misfit);
    CHECK(res.misfit > 1e-3);
}

TEST_CASE("model selection loop runs the search over several M") {
    auto spec = reference_spec(12, 64);
    InversionConfig cfg;
    cfg.restarts = 2;
    cfg.n_schedule = {8};
    cfg.n_polish = 12;
    cfg.stage_iters = 80;
    cfg.polish_iters = 80;
    cfg.seed = 5;
    auto sweep = reconstruct_over_M(spec, cfg, {2, 4});
    REQUIRE(sweep.size() == 2);
    CHECK(sweep[0].first == 2);
    CHECK(sweep[1].first == 4);
    for (auto& [m, res] : sweep) {
        CHECK(static_cast<int>(res.profile.transitions.size()) == m);
        CHECK(std::isfinite(res.misfit));
    }
    // The correct complexity class fits at least as well on noiseless data.
    CHECK(sweep[0].second.misfit <= sweep[1].second.misfit + 0.05);
}

TEST_CASE("trace noise has the requested relative scale") {
    auto spec = reference_spec(10, 256);
    auto noisy = add_trace_noise(spec.data, 0.05, 4);
    double dn = 0, d0 = 0;
    for (std::size_t i = 0; i < noisy.u.size(); ++i) {
        dn += std::norm(noisy.u[i] - spec.data.u[i]);
        d0 += std::norm(spec.data.u[i]);
    }
    CHECK(std::sqrt(dn / d0) == Approx(0.05).epsilon(0.3));
}
