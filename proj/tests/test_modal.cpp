#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "lamella/io.hpp"
#include "lamella/modal.hpp"

using namespace lamella;
using Catch::Approx;

namespace {

const RectangularProfile flat0{{0.0}, {0.0}};
const RectangularProfile binary_ref = binary_profile({0.0, pi}, 0.0, 1.0);

complexd fresnel_r(double k1, double k2, double theta, double lambda) {
    const double beta = k1 * std::cos(theta);
    const double alpha = k1 * std::sin(theta);
    const complexd betam = beta_exponent(0, k2, alpha);
    return (beta - lambda * betam) / (beta + lambda * betam);
}

complexd fresnel_t(double k1, double k2, double theta, double lambda) {
    const double beta = k1 * std::cos(theta);
    const double alpha = k1 * std::sin(theta);
    const complexd betam = beta_exponent(0, k2, alpha);
    return 2.0 * beta / (beta + lambda * betam);
}

} // namespace

TEST_CASE("flat interface reproduces the Fresnel coefficients") {
    MediumPair media{1.0, complexd(2.0, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.0};
    auto sol = solve_forward(flat0, media, inc, 10);
    auto spec = sol.spectrum();
    CHECK(std::abs(spec.A_plus[spec.index(0)] - complexd(-1.0 / 3.0, 0)) < 1e-12);
    CHECK(std::abs(spec.A_minus[spec.index(0)] - complexd(2.0 / 3.0, 0)) < 1e-12);
    for (int n = -10; n <= 10; ++n) {
        if (n == 0) continue;
        CHECK(std::abs(spec.A_plus[spec.index(n)]) < 1e-12);
        CHECK(std::abs(spec.A_minus[spec.index(n)]) < 1e-12);
    }
}

TEST_CASE("flat interface at nonzero height carries the right phase") {
    const double h = 0.37;
    RectangularProfile flat{{0.0}, {h}};
    MediumPair media{1.0, complexd(2.0, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.0};
    auto sol = solve_forward(flat, media, inc, 6);
    auto spec = sol.spectrum();
    const complexd want = -std::exp(complexd(0, -2.0 * inc.beta() * h)) / 3.0;
    CHECK(std::abs(spec.A_plus[spec.index(0)] - want) < 1e-12);
}

TEST_CASE("flat interface with general transmission constant") {
    const double k1 = 1.3, k2 = 0.8, theta = 0.25, lambda = 1.7;
    MediumPair media{k1, complexd(k2, 0.0), lambda};
    PlaneWaveIncidence inc{k1, theta};
    auto sol = solve_forward(flat0, media, inc, 8);
    auto spec = sol.spectrum();
    CHECK(std::abs(spec.A_plus[spec.index(0)] - fresnel_r(k1, k2, theta, lambda)) < 1e-12);
    CHECK(std::abs(spec.A_minus[spec.index(0)] - fresnel_t(k1, k2, theta, lambda)) < 1e-12);
    auto table = efficiencies(spec, inc, media);
    CHECK(table.defect < 1e-13);
}

TEST_CASE("homogeneous layers diagonalize trivially") {
    PlaneWaveIncidence inc{1.0, 0.3};
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    const int N = 6;
    LamellarLayer layer;
    layer.y_lo = 0.0;
    layer.y_hi = 0.5;
    layer.x_start = {0.0};

    SECTION("upper medium: gamma^2 matches (i beta_plus)^2") {
        layer.lower = {false};
        auto modes = assemble_layer(layer, media, inc, N);
        std::vector<double> got, want;
        for (int i = 0; i < modes.gamma.size(); ++i) {
            got.push_back((modes.gamma(i) * modes.gamma(i)).real());
            complexd b = beta_exponent(i - N, media.k1, inc.alpha());
            want.push_back((-b * b).real());
        }
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == Approx(want[i]).margin(1e-12));
        // Eigenvectors are the identity basis up to ordering and phase.
        for (int c = 0; c < modes.W.cols(); ++c) {
            Eigen::VectorXd col = modes.W.col(c).cwiseAbs();
            CHECK(col.maxCoeff() == Approx(1.0).epsilon(1e-12));
            CHECK(col.sum() == Approx(1.0).epsilon(1e-9));
        }
    }
    SECTION("lower medium: gamma matches beta_exponent for k2 up to factor i") {
        layer.lower = {true};
        auto modes = assemble_layer(layer, media, inc, N);
        std::vector<double> got, want;
        for (int i = 0; i < modes.gamma.size(); ++i) {
            got.push_back((modes.gamma(i) * modes.gamma(i)).real());
            complexd b = beta_exponent(i - N, media.k2, inc.alpha());
            want.push_back((-b * b).real());
        }
        std::sort(got.begin(), got.end());
        std::sort(want.begin(), want.end());
        for (std::size_t i = 0; i < got.size(); ++i)
            CHECK(got[i] == Approx(want[i]).margin(1e-12));
    }
}

TEST_CASE("binary reference case conserves energy") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(binary_ref, media, inc, 40);
    auto table = efficiencies(sol.spectrum(), inc, media);
    CHECK(table.defect < 1e-8);
    CHECK(sol.max_block_norm <= 1.0 + 1e-8);
}

TEST_CASE("general transmission constant conserves the weighted flux") {
    MediumPair media{1.0, complexd(1.4, 0.0), 2.2};
    PlaneWaveIncidence inc{1.0, -0.2};
    auto sol = solve_forward(binary_ref, media, inc, 30);
    auto table = efficiencies(sol.spectrum(), inc, media);
    CHECK(table.defect < 1e-10);
    CHECK(sol.max_block_norm <= 1.0 + 1e-8);
}

TEST_CASE("Wood anomaly solve completes with zero-flux grazing orders") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.0}; // beta_{+-1} = 0 exactly
    auto sol = solve_forward(binary_ref, media, inc, 40);
    auto spec = sol.spectrum();
    CHECK(spec.grazing_plus(1));
    CHECK(spec.grazing_plus(-1));
    auto table = efficiencies(spec, inc, media);
    CHECK(table.defect < 1e-6);
}

TEST_CASE("spectral symmetry at normal incidence on a symmetric profile") {
    // Profile symmetric under x1 -> -x1.
    auto p = binary_profile({0.5 * pi, 1.5 * pi}, 1.0, 0.0);
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.0};
    auto sol = solve_forward(p, media, inc, 20);
    auto spec = sol.spectrum();
    for (int n = 1; n <= 20; ++n) {
        CHECK(std::abs(spec.A_plus[spec.index(n)] - spec.A_plus[spec.index(-n)]) <
              1e-9 * std::max(1.0, std::abs(spec.A_plus[spec.index(n)])));
        CHECK(std::abs(spec.A_minus[spec.index(n)] - spec.A_minus[spec.index(-n)]) <
              1e-9 * std::max(1.0, std::abs(spec.A_minus[spec.index(n)])));
    }
}

TEST_CASE("field evaluator is alpha-quasiperiodic") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(binary_ref, media, inc, 20);
    const complexd shift = std::exp(complexd(0, two_pi * inc.alpha()));
    std::mt19937 rng(5);
    std::uniform_real_distribution<double> ux(0.0, two_pi), uy(-1.0, 2.2);
    for (int i = 0; i < 50; ++i) {
        double x = ux(rng), y = uy(rng);
        complexd a = sol.evaluate(x, y);
        complexd b = sol.evaluate(x + two_pi, y);
        REQUIRE(std::abs(b - shift * a) <= 1e-10 * std::max(1.0, std::abs(a)));
    }
}

TEST_CASE("zero contrast propagates the incident wave unchanged") {
    MediumPair media{1.0, complexd(1.0, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.2};
    auto sol = solve_forward(binary_ref, media, inc, 12);
    std::mt19937 rng(9);
    std::uniform_real_distribution<double> ux(0.0, two_pi), uy(-1.5, 2.5);
    const complexd I(0, 1);
    for (int i = 0; i < 60; ++i) {
        double x = ux(rng), y = uy(rng);
        complexd ui = std::exp(I * (inc.alpha() * x - inc.beta() * y));
        complexd u = sol.evaluate(x, y);
        REQUIRE(std::abs(u - ui) < 1e-10);
    }
}

TEST_CASE("transmission conditions hold across horizontal interface pieces") {
    PlaneWaveIncidence inc{1.0, 0.3};
    const double eps = 1e-9;

    SECTION("continuity of u for the TE case") {
        MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
        auto sol = solve_forward(binary_ref, media, inc, 40);
        double worst = 0.0;
        for (int j = 0; j < 64; ++j) {
            // Horizontal piece of the interface at y=0 over (0, pi).
            double x = 0.05 + (pi - 0.1) * j / 63.0;
            complexd up = sol.evaluate(x, 0.0 + eps);
            complexd dn = sol.evaluate(x, 0.0 - eps);
            worst = std::max(worst, std::abs(up - dn));
        }
        CHECK(worst < 1e-6);
    }
    SECTION("lambda-weighted normal jump decays with truncation") {
        MediumPair media{1.0, complexd(1.4, 0.0), 2.0};
        auto residual = [&](int N) {
            auto sol = solve_forward(binary_ref, media, inc, N);
            double worst = 0.0;
            for (int j = 0; j < 64; ++j) {
                double x = 0.08 + (pi - 0.16) * j / 63.0;
                // Above y=0 on (0, pi) is the upper medium, below the lower.
                complexd fl_up = sol.evaluate_d2(x, 0.0 + eps);
                complexd fl_dn = media.lambda * sol.evaluate_d2(x, 0.0 - eps);
                worst = std::max(worst, std::abs(fl_up - fl_dn));
            }
            return worst;
        };
        double r16 = residual(16);
        double r48 = residual(48);
        CHECK(r48 < r16);
    }
}

TEST_CASE("mirror symmetry and specular reciprocity") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    auto p = binary_profile({0.7, 3.9}, 0.0, 0.8);
    auto pm = mirror_x(p);
    const double theta = 0.31;
    auto a = solve_forward(p, media, {1.0, theta}, 30).spectrum();
    auto b = solve_forward(pm, media, {1.0, -theta}, 30).spectrum();
    // Reflecting the geometry together with the incidence direction
    // reproduces the specular amplitude exactly.
    CHECK(std::abs(a.A_plus[a.index(0)] - b.A_plus[b.index(0)]) < 1e-10);
    // Specular efficiency is invariant under mirroring at fixed incidence.
    auto c = solve_forward(pm, media, {1.0, theta}, 30).spectrum();
    CHECK(std::abs(std::abs(c.A_plus[c.index(0)]) - std::abs(a.A_plus[a.index(0)])) < 1e-10);
}

TEST_CASE("near-field trace") {
    MediumPair media{1.0, complexd(2.0, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.0};
    SECTION("flat interface trace is constant in x1") {
        auto sol = solve_forward(flat0, media, inc, 6);
        const double b = 0.9;
        auto tr = sol.trace(b, 32);
        auto spec = sol.spectrum();
        const complexd I(0, 1);
        complexd want = std::exp(-I * inc.beta() * b) +
                        spec.A_plus[spec.index(0)] * std::exp(I * inc.beta() * b);
        for (auto& u : tr.u) REQUIRE(std::abs(u - want) < 1e-12);
    }
    SECTION("trace equals field evaluation on the same grid") {
        auto sol = solve_forward(binary_ref, {1.0, complexd(1.5, 0), 1.0}, {1.0, 0.3}, 20);
        auto tr = sol.trace(1.2, 256);
        for (int j = 0; j < 256; ++j) {
            complexd direct = sol.evaluate(two_pi * j / 256.0, 1.2);
            REQUIRE(tr.u[j] == direct);
        }
    }
    SECTION("trace line below the grating top is rejected") {
        auto sol = solve_forward(binary_ref, {1.0, complexd(1.5, 0), 1.0}, {1.0, 0.3}, 8);
        REQUIRE_THROWS_AS(sol.trace(0.99, 16), BelowGratingTop);
    }
}

TEST_CASE("energy defect stays at the conservation floor as N grows") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    double prev = 1.0;
    for (int N : {8, 16, 24, 32, 40}) {
        auto sol = solve_forward(binary_ref, media, inc, N);
        auto table = efficiencies(sol.spectrum(), inc, media);
        // Monotone up to a roundoff floor.
        CHECK(table.defect <= prev + 1e-10);
        prev = table.defect;
    }
}

TEST_CASE("binary reference case matches the frozen regression data") {
    const std::string dir = LAMELLA_TEST_DATA_DIR;
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(binary_ref, media, inc, 40);

    SECTION("per-order efficiencies") {
        auto table = efficiencies(sol.spectrum(), inc, media);
        auto rows = read_numeric_csv(dir + "/binary_ref_efficiencies.csv");
        // The parser keeps only fully numeric rows; re-read with side labels.
        std::istringstream in(read_file(dir + "/binary_ref_efficiencies.csv"));
        std::string line;
        std::getline(in, line);
        std::size_t matched = 0;
        while (std::getline(in, line)) {
            int n = 0;
            char side = 0;
            double beta = 0, a2 = 0, e = 0;
            REQUIRE(std::sscanf(line.c_str(), "%d,%c,%lf,%lf,%lf", &n, &side, &beta, &a2, &e) == 5);
            for (const auto& r : table.rows) {
                if (r.n == n && r.side == (side == '+' ? Side::plus : Side::minus)) {
                    CHECK(r.beta == Approx(beta).epsilon(1e-12));
                    CHECK(r.amplitude_sq == Approx(a2).epsilon(1e-9));
                    CHECK(r.efficiency == Approx(e).epsilon(1e-9));
                    ++matched;
                }
            }
        }
        REQUIRE(matched == table.rows.size());
    }
    SECTION("near-field trace") {
        auto tr = sol.trace(1.2, 64);
        auto golden = read_trace_csv(dir + "/binary_ref_trace.csv");
        REQUIRE(golden.u.size() == tr.u.size());
        for (std::size_t j = 0; j < tr.u.size(); ++j)
            REQUIRE(std::abs(tr.u[j] - golden.u[j]) < 1e-9);
    }
}

TEST_CASE("half-filled layer eigenvalues match the frozen study") {
    const std::string dir = LAMELLA_TEST_DATA_DIR;
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    LamellarLayer layer;
    layer.y_lo = 0.0;
    layer.y_hi = 1.0;
    layer.x_start = {0.0, pi};
    layer.lower = {false, true};
    auto modes = assemble_layer(layer, media, inc, 8);
    std::vector<double> got;
    for (int i = 0; i < modes.gamma.size(); ++i)
        got.push_back((modes.gamma(i) * modes.gamma(i)).real());
    std::sort(got.begin(), got.end());
    auto rows = read_numeric_csv(dir + "/halflayer_gamma2.csv");
    REQUIRE(rows.size() == got.size());
    for (std::size_t i = 0; i < got.size(); ++i) {
        // Eigenvalues are real (Hermitian pencil) and squared exponents.
        REQUIRE(got[i] == Approx(rows[i][0]).margin(1e-10));
        complexd g = modes.gamma(i);
        REQUIRE((g.real() == 0.0 || g.imag() == 0.0));
    }
}

TEST_CASE("deep groove stays stable") {
    auto deep = binary_profile({0.0, pi}, -2.0, 2.0);
    MediumPair media{1.0, complexd(1.6, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.4};
    auto sol = solve_forward(deep, media, inc, 32);
    CHECK(sol.max_block_norm <= 1.0 + 1e-8);
    auto table = efficiencies(sol.spectrum(), inc, media);
    CHECK(table.defect < 1e-8);
}

TEST_CASE("interface-referenced amplitudes decay for far evanescent orders") {
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(binary_ref, media, inc, 40);
    auto tail_max = [&](const Eigen::VectorXcd& v) {
        double m = 0.0;
        for (int n = 30; n <= 40; ++n)
            m = std::max({m, std::abs(v(n + 40)), std::abs(v(-n + 40))});
        return m;
    };
    auto mid_max = [&](const Eigen::VectorXcd& v) {
        double m = 0.0;
        for (int n = 0; n <= 10; ++n)
            m = std::max({m, std::abs(v(n + 40)), std::abs(v(-n + 40))});
        return m;
    };
    // Corner-limited algebraic decay: the far tail sits orders of magnitude
    // below the propagating block.
    CHECK(tail_max(sol.r_top) < 1e-3 * mid_max(sol.r_top));
    CHECK(tail_max(sol.t_bot) < 1e-3 * mid_max(sol.t_bot));
}

TEST_CASE("lossy lower medium is accepted by the solver") {
    MediumPair media{1.0, complexd(1.5, 0.2), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};
    auto sol = solve_forward(binary_ref, media, inc, 24);
    auto spec = sol.spectrum();
    // Absorption: reflected flux strictly below the incident flux.
    double reflected = 0.0;
    for (int n = -24; n <= 24; ++n)
        if (spec.propagating_plus(n))
            reflected += spec.beta_plus[spec.index(n)].real() *
                         std::norm(spec.A_plus[spec.index(n)]) / inc.beta();
    CHECK(reflected > 0.0);
    CHECK(reflected < 0.999);
    // Field evaluation stays quasi-periodic.
    const complexd shift = std::exp(complexd(0, two_pi * inc.alpha()));
    complexd a = sol.evaluate(1.1, 0.4);
    complexd b = sol.evaluate(1.1 + two_pi, 0.4);
    CHECK(std::abs(b - shift * a) < 1e-10 * std::max(1.0, std::abs(a)));
    // And the efficiency bookkeeping refuses the lossy case.
    REQUIRE_THROWS_AS(efficiencies(spec, inc, media), NotLossless);
}
