#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "lamella/common.hpp"

namespace lamella {

/// Incoming plane wave exp(i*alpha*x1 - i*beta*x2) with alpha = k1*sin(theta),
/// beta = k1*cos(theta) > 0.
struct PlaneWaveIncidence {
    double k1 = 1.0;
    double theta = 0.0; // radians, in (-pi/2, pi/2)

    double alpha() const { return k1 * std::sin(theta); }
    double beta() const { return k1 * std::cos(theta); }

    bool valid() const {
        return k1 > 0.0 && theta > -0.5 * pi && theta < 0.5 * pi;
    }
};

/// Relative flux threshold below which an order counts as grazing (Wood anomaly).
inline constexpr double grazing_tol = 1e-10;

/// Upper/lower wavenumbers and the transmission constant of the jump
/// condition du+/dnu = lambda * du-/dnu (lambda = 1 for TE).
struct MediumPair {
    double k1 = 1.0;
    complexd k2 = complexd(1.5, 0.0);
    double lambda = 1.0;

    bool lossless() const { return k2.imag() == 0.0; }
    double k2_real() const { return k2.real(); }
};

struct WellPosednessReport {
    bool condition_i = false;  // lambda >= 1 and k1^2 > lambda*k2^2
    bool condition_ii = false; // lambda <= 1 and k1^2 < lambda*k2^2
    bool te_case = false;      // lambda == 1, real k2 != k1
    std::string note;

    bool proven() const { return condition_i || condition_ii || te_case; }
};

inline WellPosednessReport check_well_posedness(const MediumPair& m) {
    WellPosednessReport r;
    const double k1sq = m.k1 * m.k1;
    const double k2sq = std::norm(m.k2);
    r.condition_i = m.lambda >= 1.0 && k1sq > m.lambda * k2sq;
    r.condition_ii = m.lambda <= 1.0 && k1sq < m.lambda * k2sq;
    r.te_case = m.lambda == 1.0 && m.lossless() && m.k2.real() != m.k1;
    r.note = r.proven() ? "within proven regime" : "outside proven regime";
    return r;
}

/// Vertical wavenumber of order n: sqrt(k^2 - alpha_n^2) for propagating
/// orders, i*sqrt(alpha_n^2 - k^2) for evanescent ones (alpha_n = n + alpha).
/// The explicit two-case form keeps the branch stable across the cut.
inline complexd beta_exponent(int n, double k, double alpha) {
    const double an = static_cast<double>(n) + alpha;
    const double disc = k * k - an * an;
    if (std::abs(an) <= k) return complexd(std::sqrt(disc), 0.0);
    return complexd(0.0, std::sqrt(-disc));
}

/// Same with complex wavenumber (lossy lower medium); branch with Im >= 0.
inline complexd beta_exponent(int n, complexd k, double alpha) {
    if (k.imag() == 0.0) return beta_exponent(n, k.real(), alpha);
    const double an = static_cast<double>(n) + alpha;
    complexd w = std::sqrt(k * k - an * an);
    if (w.imag() < 0.0 || (w.imag() == 0.0 && w.real() < 0.0)) w = -w;
    return w;
}

enum class Side { plus, minus };

/// DtN map in coefficient space: (T^+- f)_n = +-i beta_n^+- f_n.
/// coeffs holds orders n = -N..N; entry i corresponds to n = i - N.
inline std::vector<complexd> dtn_apply(Side side, const std::vector<complexd>& coeffs,
                                       double k, double alpha) {
    const int N = (static_cast<int>(coeffs.size()) - 1) / 2;
    std::vector<complexd> out(coeffs.size());
    const complexd sign = (side == Side::plus) ? complexd(0, 1) : complexd(0, -1);
    for (int i = 0; i < static_cast<int>(coeffs.size()); ++i)
        out[i] = sign * beta_exponent(i - N, k, alpha) * coeffs[i];
    return out;
}

/// Real and imaginary parts of the quadratic form <+-T^+- f, f> in
/// coefficient space: the real part collects evanescent orders (<= 0), the
/// imaginary part propagating ones (>= 0).
inline std::pair<double, double> dtn_quadratic_forms(Side /*side*/,
                                                     const std::vector<complexd>& coeffs,
                                                     double k, double alpha) {
    const int N = (static_cast<int>(coeffs.size()) - 1) / 2;
    double re = 0.0, im = 0.0;
    for (int i = 0; i < static_cast<int>(coeffs.size()); ++i) {
        const int n = i - N;
        const double an = static_cast<double>(n) + alpha;
        const double b = std::abs(beta_exponent(n, k, alpha));
        const double w = b * std::norm(coeffs[i]);
        if (std::abs(an) > k)
            re -= w;
        else
            im += w;
    }
    return {re, im};
}

/// Rayleigh data of a converged forward solve. Orders n = -N..N, entry
/// index i = n + N. Coefficients follow the expansions referenced at x2 = 0.
struct RayleighSpectrum {
    int N = 0;
    double alpha = 0.0;
    double k1 = 1.0;
    complexd k2 = complexd(1.5, 0.0);
    double lambda = 1.0;
    std::vector<complexd> beta_plus, beta_minus;
    std::vector<complexd> A_plus, A_minus;

    int size() const { return 2 * N + 1; }
    int index(int n) const { return n + N; }
    double alpha_n(int n) const { return static_cast<double>(n) + alpha; }

    bool propagating_plus(int n) const { return std::abs(alpha_n(n)) <= k1; }
    bool propagating_minus(int n) const {
        return k2.imag() == 0.0 && std::abs(alpha_n(n)) <= k2.real();
    }
    bool grazing_plus(int n) const {
        return std::abs(beta_plus[index(n)]) < grazing_tol * k1;
    }
    bool grazing_minus(int n) const {
        return std::abs(beta_minus[index(n)]) < grazing_tol * std::abs(k2);
    }
};

struct EfficiencyRow {
    int n = 0;
    Side side = Side::plus;
    double beta = 0.0;
    double amplitude_sq = 0.0;
    double efficiency = 0.0;
    bool grazing = false;
};

struct EfficiencyTable {
    std::vector<EfficiencyRow> rows;
    double reflected_sum = 0.0;
    double transmitted_sum = 0.0;
    double defect = 0.0; // |1 - sum of all efficiencies|
};

/// Diffraction efficiencies of the propagating orders, normalized by the
/// incident flux beta: e_n^+ = (beta_n^+/beta)|A_n^+|^2 and
/// e_n^- = lambda (beta_n^-/beta)|A_n^-|^2. Grazing orders carry zero flux.
inline EfficiencyTable efficiencies(const RayleighSpectrum& spec,
                                    const PlaneWaveIncidence& inc,
                                    const MediumPair& media) {
    if (!media.lossless())
        throw NotLossless("efficiencies require a real lower wavenumber");
    EfficiencyTable table;
    const double beta0 = inc.beta();
    for (int n = -spec.N; n <= spec.N; ++n) {
        const int i = spec.index(n);
        if (spec.propagating_plus(n)) {
            EfficiencyRow row;
            row.n = n;
            row.side = Side::plus;
            row.beta = spec.beta_plus[i].real();
            row.amplitude_sq = std::norm(spec.A_plus[i]);
            row.grazing = spec.grazing_plus(n);
            row.efficiency = row.grazing ? 0.0 : (row.beta / beta0) * row.amplitude_sq;
            table.reflected_sum += row.efficiency;
            table.rows.push_back(row);
        }
        if (spec.propagating_minus(n)) {
            EfficiencyRow row;
            row.n = n;
            row.side = Side::minus;
            row.beta = spec.beta_minus[i].real();
            row.amplitude_sq = std::norm(spec.A_minus[i]);
            row.grazing = spec.grazing_minus(n);
            row.efficiency =
                row.grazing ? 0.0 : media.lambda * (row.beta / beta0) * row.amplitude_sq;
            table.transmitted_sum += row.efficiency;
            table.rows.push_back(row);
        }
    }
    table.defect = std::abs(1.0 - table.reflected_sum - table.transmitted_sum);
    return table;
}

} // namespace lamella
