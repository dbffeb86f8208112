#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>
#include <vector>

#include "lamella/common.hpp"
#include "lamella/geometry.hpp"
#include "lamella/radiation.hpp"

namespace lamella {

namespace detail {

/// Exact Fourier coefficients c_m, |m| <= mmax, of a piecewise constant
/// 2*pi-periodic function given by values[j] on [x_start[j], x_start[j+1]).
inline std::vector<complexd> piecewise_fourier(const std::vector<double>& x_start,
                                               const std::vector<complexd>& values,
                                               int mmax) {
    const std::size_t m = x_start.size();
    std::vector<complexd> coeffs(2 * mmax + 1, complexd(0, 0));
    for (std::size_t j = 0; j < m; ++j) {
        const double xa = x_start[j];
        const double xb = (j + 1 < m) ? x_start[j + 1] : x_start[0] + two_pi;
        coeffs[mmax] += values[j] * (xb - xa) / two_pi;
        for (int q = 1; q <= mmax; ++q) {
            // (1/2pi) * integral of exp(-i q x) over [xa, xb)
            const complexd num = std::exp(complexd(0, -q * xb)) - std::exp(complexd(0, -q * xa));
            const complexd c = num / complexd(0, -q * two_pi);
            coeffs[mmax + q] += values[j] * c;
            coeffs[mmax - q] += values[j] * std::conj(c);
        }
    }
    // For real-valued pieces the conjugate symmetry above is exact; for
    // complex values (lossy k2) recompute the negative orders directly.
    bool complex_values = false;
    for (const auto& v : values) complex_values = complex_values || v.imag() != 0.0;
    if (complex_values) {
        for (int q = 1; q <= mmax; ++q) {
            coeffs[mmax - q] = complexd(0, 0);
            for (std::size_t j = 0; j < m; ++j) {
                const double xa = x_start[j];
                const double xb = (j + 1 < m) ? x_start[j + 1] : x_start[0] + two_pi;
                const complexd num =
                    std::exp(complexd(0, q * xb)) - std::exp(complexd(0, q * xa));
                coeffs[mmax - q] += values[j] * num / complexd(0, q * two_pi);
            }
        }
    }
    return coeffs;
}

inline Eigen::MatrixXcd toeplitz(const std::vector<complexd>& coeffs, int N) {
    const int n = 2 * N + 1;
    Eigen::MatrixXcd T(n, n);
    for (int p = 0; p < n; ++p)
        for (int q = 0; q < n; ++q) T(p, q) = coeffs[2 * N + (p - q)];
    return T;
}

/// Branch of gamma = sqrt(-mu) with Re >= 0, ties broken by Im >= 0.
inline complexd growth_exponent(complexd mu) {
    if (mu.imag() == 0.0) {
        const double m = mu.real();
        if (m >= 0.0) return complexd(0.0, std::sqrt(m));
        return complexd(std::sqrt(-m), 0.0);
    }
    complexd g = std::sqrt(-mu);
    if (g.real() < 0.0 || (g.real() == 0.0 && g.imag() < 0.0)) g = -g;
    return g;
}

} // namespace detail

/// Eigenmodes of one lamellar layer: columns of W are the transverse mode
/// shapes in Fourier space, gamma holds the vertical exponents, and V is the
/// flux matrix [a] W diag(gamma) used in the interface matching.
struct LayerModes {
    double y_lo = 0.0;
    double y_hi = 0.0;
    Eigen::MatrixXcd W;
    Eigen::MatrixXcd V;
    Eigen::VectorXcd gamma;
    double cond_w = 1.0;

    double thickness() const { return y_hi - y_lo; }
};

/// Spectral assembly of the layer eigenproblem K w = mu F w with
/// K = [a k^2] - A [a] A and F = [a], using exact Fourier coefficients of
/// the piecewise constant material (no quadrature error). For real media the
/// pencil is Hermitian definite and solved as such.
inline LayerModes assemble_layer(const LamellarLayer& layer, const MediumPair& media,
                                 const PlaneWaveIncidence& inc, int N) {
    if (N < 1) throw Error("truncation order must be at least 1");
    const int n = 2 * N + 1;
    const double alpha = inc.alpha();

    std::vector<complexd> ak2(layer.x_start.size()), aval(layer.x_start.size());
    for (std::size_t j = 0; j < layer.x_start.size(); ++j) {
        const bool low = layer.lower[j];
        const complexd k2sq = media.k2 * media.k2;
        ak2[j] = low ? media.lambda * k2sq : complexd(media.k1 * media.k1, 0.0);
        aval[j] = low ? complexd(media.lambda, 0.0) : complexd(1.0, 0.0);
    }

    Eigen::VectorXd A(n);
    for (int i = 0; i < n; ++i) A(i) = alpha + (i - N);

    const Eigen::MatrixXcd Tak2 = detail::toeplitz(detail::piecewise_fourier(layer.x_start, ak2, 2 * N), N);
    LayerModes modes;
    modes.y_lo = layer.y_lo;
    modes.y_hi = layer.y_hi;

    const bool unit_lambda = media.lambda == 1.0;
    Eigen::MatrixXcd F;
    Eigen::MatrixXcd K;
    if (unit_lambda) {
        K = Tak2;
        for (int i = 0; i < n; ++i) K(i, i) -= A(i) * A(i);
    } else {
        F = detail::toeplitz(detail::piecewise_fourier(layer.x_start, aval, 2 * N), N);
        K = Tak2 - A.asDiagonal() * F * A.asDiagonal();
    }

    Eigen::VectorXcd mu(n);
    if (media.lossless()) {
        if (unit_lambda) {
            Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> es(K);
            if (es.info() != Eigen::Success)
                throw EigensolverFailure("layer eigenproblem did not converge");
            modes.W = es.eigenvectors();
            mu = es.eigenvalues().cast<complexd>();
            modes.cond_w = 1.0; // unitary
        } else {
            Eigen::GeneralizedSelfAdjointEigenSolver<Eigen::MatrixXcd> es(K, F);
            if (es.info() != Eigen::Success)
                throw EigensolverFailure("layer pencil eigenproblem did not converge");
            modes.W = es.eigenvectors();
            mu = es.eigenvalues().cast<complexd>();
            Eigen::JacobiSVD<Eigen::MatrixXcd> svd(modes.W);
            modes.cond_w = svd.singularValues()(0) / svd.singularValues()(n - 1);
        }
    } else {
        Eigen::MatrixXcd M;
        if (unit_lambda) {
            M = K;
        } else {
            M = F.partialPivLu().solve(K);
        }
        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> es(M);
        if (es.info() != Eigen::Success)
            throw EigensolverFailure("layer eigenproblem did not converge");
        modes.W = es.eigenvectors();
        mu = es.eigenvalues();
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(modes.W);
        modes.cond_w = svd.singularValues()(0) / svd.singularValues()(n - 1);
        if (modes.cond_w > 1e13)
            throw EigensolverFailure("layer eigenvector matrix numerically singular");
    }

    modes.gamma.resize(n);
    for (int i = 0; i < n; ++i) modes.gamma(i) = detail::growth_exponent(mu(i));

    if (unit_lambda)
        modes.V = modes.W * modes.gamma.asDiagonal();
    else
        modes.V = F * modes.W * modes.gamma.asDiagonal();
    return modes;
}

/// Uniform samples of the total field on the line x2 = b above the grating.
struct NearFieldTrace {
    double b = 0.0;
    double alpha = 0.0;
    std::vector<double> x1;
    std::vector<complexd> u;
};

/// Result of a modal forward solve: Rayleigh amplitudes referenced at the
/// top/bottom profile levels plus the per-layer modal amplitudes needed to
/// evaluate the field anywhere.
class ForwardSolution {
public:
    RectangularProfile profile;
    MediumPair media;
    PlaneWaveIncidence inc;
    int N = 1;

    std::vector<double> z;          // interface levels, z.front()=Lambda-, z.back()=Lambda+
    std::vector<LayerModes> layers; // bottom to top, between consecutive z levels
    std::vector<Eigen::VectorXcd> d_amp, u_amp;
    Eigen::VectorXcd r_top; // scattered, referenced at z.back()
    Eigen::VectorXcd t_bot; // transmitted, referenced at z.front()

    double max_block_norm = 0.0; // largest intermediate S/reflection block 2-norm
    double min_rcond = 1.0;      // worst reciprocal condition among interface solves

    int size() const { return 2 * N + 1; }
    double alpha() const { return inc.alpha(); }
    double alpha_n(int n) const { return alpha() + n; }
    double z_top() const { return z.back(); }
    double z_bot() const { return z.front(); }

    complexd beta_plus(int n) const { return beta_exponent(n, media.k1, alpha()); }
    complexd beta_minus(int n) const { return beta_exponent(n, media.k2, alpha()); }

    complexd evaluate(double x1, double x2) const {
        return evaluate_impl(x1, x2, 0);
    }

    /// Vertical derivative of the total field.
    complexd evaluate_d2(double x1, double x2) const {
        return evaluate_impl(x1, x2, 1);
    }

    std::vector<complexd> evaluate(const std::vector<std::pair<double, double>>& pts) const {
        std::vector<complexd> out(pts.size());
        for (std::size_t i = 0; i < pts.size(); ++i)
            out[i] = evaluate(pts[i].first, pts[i].second);
        return out;
    }

    RayleighSpectrum spectrum() const {
        RayleighSpectrum s;
        s.N = N;
        s.alpha = alpha();
        s.k1 = media.k1;
        s.k2 = media.k2;
        s.lambda = media.lambda;
        s.beta_plus.resize(size());
        s.beta_minus.resize(size());
        s.A_plus.resize(size());
        s.A_minus.resize(size());
        for (int n = -N; n <= N; ++n) {
            const int i = n + N;
            const complexd bp = beta_plus(n), bm = beta_minus(n);
            s.beta_plus[i] = bp;
            s.beta_minus[i] = bm;
            // Shift references from the profile levels to x2 = 0.
            s.A_plus[i] = r_top(i) * std::exp(complexd(0, -1) * bp * z_top());
            s.A_minus[i] = t_bot(i) * std::exp(complexd(0, 1) * bm * z_bot());
        }
        return s;
    }

    NearFieldTrace trace(double b, int nsamples) const {
        if (b <= profile.lambda_plus())
            throw BelowGratingTop("trace line must lie above the grating top");
        NearFieldTrace t;
        t.b = b;
        t.alpha = alpha();
        t.x1.resize(nsamples);
        t.u.resize(nsamples);
        for (int j = 0; j < nsamples; ++j) {
            t.x1[j] = two_pi * j / nsamples;
            t.u[j] = evaluate(t.x1[j], b);
        }
        return t;
    }

private:
    complexd evaluate_impl(double x1, double x2, int deriv) const {
        const double a = alpha();
        const complexd I(0, 1);
        complexd acc(0, 0);
        if (x2 >= z_top()) {
            // Incident plus upward Rayleigh expansion.
            const complexd binc = complexd(inc.beta(), 0);
            complexd inc_amp = std::exp(I * (a * x1 - inc.beta() * x2));
            if (deriv == 1) inc_amp *= -I * binc;
            acc += inc_amp;
            for (int n = -N; n <= N; ++n) {
                const complexd bp = beta_plus(n);
                complexd term = r_top(n + N) *
                                std::exp(I * (alpha_n(n) * x1 + bp * (x2 - z_top())));
                if (deriv == 1) term *= I * bp;
                acc += term;
            }
            return acc;
        }
        if (x2 <= z_bot()) {
            for (int n = -N; n <= N; ++n) {
                const complexd bm = beta_minus(n);
                complexd term = t_bot(n + N) *
                                std::exp(I * (alpha_n(n) * x1 - bm * (x2 - z_bot())));
                if (deriv == 1) term *= -I * bm;
                acc += term;
            }
            return acc;
        }
        // Inside the slab: locate the layer and sum its modal expansion.
        std::size_t l = 0;
        while (l + 1 < layers.size() && x2 > layers[l].y_hi) ++l;
        const LayerModes& m = layers[l];
        const int n = size();
        Eigen::VectorXcd up(n), dn(n);
        for (int i = 0; i < n; ++i) {
            const complexd g = m.gamma(i);
            dn(i) = std::exp(-g * (x2 - m.y_lo)) * d_amp[l](i);
            up(i) = std::exp(g * (x2 - m.y_hi)) * u_amp[l](i);
        }
        Eigen::VectorXcd uhat;
        if (deriv == 0) {
            uhat = m.W * (dn + up);
        } else {
            uhat = m.W * (m.gamma.asDiagonal() * (up - dn));
        }
        for (int i = 0; i < n; ++i)
            acc += uhat(i) * std::exp(I * alpha_n(i - N) * x1);
        return acc;
    }
};

namespace detail {

struct GapAttachment {
    Eigen::VectorXcd reflect; // diagonal reflection of a half space in gap basis
    Eigen::VectorXcd to_field; // diagonal map from gap c- to the half-space amplitude
};

} // namespace detail

struct SolveOptions {
    bool track_block_norms = true; // spectral norms of intermediate blocks
};

/// Solve the transmission problem by matching the lamellar-layer mode
/// expansions through a scattering-matrix sweep. All interface algebra is
/// carried out in a fictitious gap basis c+- = (u -+ i u')/2, so no inverse
/// of a mode propagator or of a vertical wavenumber ever appears; grazing
/// orders (Wood anomalies) need no special casing.
inline ForwardSolution solve_forward(const RectangularProfile& profile,
                                     const MediumPair& media,
                                     const PlaneWaveIncidence& inc, int N,
                                     const SolveOptions& options = {}) {
    auto rep = validate_profile(profile);
    if (!rep.forward_ok) throw Error("profile failed validation");
    if (!inc.valid()) throw Error("invalid plane-wave incidence");
    if (media.k1 <= 0.0 || media.lambda <= 0.0 || media.k2 == complexd(0, 0))
        throw Error("invalid medium pair");

    ForwardSolution sol;
    sol.profile = profile;
    sol.media = media;
    sol.inc = inc;
    sol.N = N;

    const int n = 2 * N + 1;
    const complexd I(0, 1);
    const double alpha = inc.alpha();

    Eigen::VectorXcd betap(n), betam(n);
    for (int i = 0; i < n; ++i) {
        betap(i) = beta_exponent(i - N, media.k1, alpha);
        betam(i) = beta_exponent(i - N, media.k2, alpha);
    }

    auto layer_geom = layer_decomposition(profile);
    if (layer_geom.empty()) {
        sol.z = {profile.heights.front(), profile.heights.front()};
    } else {
        sol.z.resize(layer_geom.size() + 1);
        for (std::size_t l = 0; l < layer_geom.size(); ++l) sol.z[l] = layer_geom[l].y_lo;
        sol.z.back() = layer_geom.back().y_hi;
    }

    // Bottom half space in gap basis: c+ = R c-, amplitude t = to_field .* c-.
    detail::GapAttachment bottom;
    bottom.reflect.resize(n);
    bottom.to_field.resize(n);
    for (int i = 0; i < n; ++i) {
        const complexd lb = media.lambda * betam(i);
        bottom.reflect(i) = (1.0 - lb) / (1.0 + lb);
        bottom.to_field(i) = 2.0 / (1.0 + lb);
    }

    Eigen::MatrixXcd R = bottom.reflect.asDiagonal();
    sol.max_block_norm = std::max(sol.max_block_norm, bottom.reflect.cwiseAbs().maxCoeff());

    struct LayerWork {
        Eigen::MatrixXcd P, Q, S11, S12, G;
        Eigen::MatrixXcd Rbelow;
    };
    std::vector<LayerWork> work(layer_geom.size());
    sol.layers.reserve(layer_geom.size());

    auto block_norm = [&](const Eigen::MatrixXcd& M) {
        if (!options.track_block_norms) return 0.0;
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(M);
        return svd.singularValues()(0);
    };

    for (std::size_t l = 0; l < layer_geom.size(); ++l) {
        LayerModes modes = assemble_layer(layer_geom[l], media, inc, N);
        const double d = modes.thickness();
        Eigen::VectorXcd D(n);
        for (int i = 0; i < n; ++i) D(i) = std::exp(-modes.gamma(i) * d);

        const Eigen::MatrixXcd A = modes.W - I * modes.V;
        const Eigen::MatrixXcd B = modes.W + I * modes.V;
        const Eigen::MatrixXcd AD = A * D.asDiagonal();
        const Eigen::MatrixXcd BD = B * D.asDiagonal();

        Eigen::PartialPivLU<Eigen::MatrixXcd> luP(B + AD);
        Eigen::PartialPivLU<Eigen::MatrixXcd> luQ(B - AD);
        const double rc = std::min(luP.rcond(), luQ.rcond());
        sol.min_rcond = std::min(sol.min_rcond, rc);
        if (rc < 1e-13)
            throw SingularMatching("layer interface system nearly singular, rcond=" +
                                   std::to_string(rc));

        LayerWork& w = work[l];
        w.P = luP.solve(Eigen::MatrixXcd::Identity(n, n));
        w.Q = luQ.solve(Eigen::MatrixXcd::Identity(n, n));
        const Eigen::MatrixXcd U1 = (A + BD) * w.P;
        const Eigen::MatrixXcd U2 = (A - BD) * w.Q;
        w.S11 = 0.5 * (U1 + U2);
        w.S12 = 0.5 * (U1 - U2);
        w.Rbelow = R;

        Eigen::PartialPivLU<Eigen::MatrixXcd> luG(Eigen::MatrixXcd::Identity(n, n) -
                                                  w.S11 * R);
        sol.min_rcond = std::min(sol.min_rcond, luG.rcond());
        w.G = luG.solve(w.S12);
        R = w.S11 + w.S12 * R * w.G; // S22 = S11, S21 = S12 for a uniform slab

        sol.max_block_norm = std::max({sol.max_block_norm, block_norm(w.S11),
                                       block_norm(w.S12), block_norm(R)});
        sol.layers.push_back(std::move(modes));
    }

    // Top half space attachment: [(I+Bp) - R (I-Bp)] r = [R (I+Bp) - (I-Bp)] inc.
    const double ztop = sol.z.back();
    Eigen::VectorXcd inc_amp = Eigen::VectorXcd::Zero(n);
    inc_amp(N) = std::exp(-I * complexd(inc.beta(), 0) * ztop);

    Eigen::MatrixXcd PB = (Eigen::VectorXcd::Ones(n) + betap).asDiagonal();
    Eigen::MatrixXcd MB = (Eigen::VectorXcd::Ones(n) - betap).asDiagonal();
    Eigen::PartialPivLU<Eigen::MatrixXcd> luTop(PB - R * MB);
    sol.min_rcond = std::min(sol.min_rcond, luTop.rcond());
    if (luTop.rcond() < 1e-13)
        throw SingularMatching("top attachment system nearly singular");
    sol.r_top = luTop.solve((R * PB - MB) * inc_amp);

    // Downward sweep for the internal amplitudes and the transmitted wave.
    Eigen::VectorXcd cminus = 0.5 * (MB * sol.r_top + PB * inc_amp);
    sol.d_amp.resize(layer_geom.size());
    sol.u_amp.resize(layer_geom.size());
    for (std::size_t li = layer_geom.size(); li-- > 0;) {
        LayerWork& w = work[li];
        Eigen::VectorXcd tm = cminus;             // gap c- at the layer top
        Eigen::VectorXcd bm = w.G * tm;           // gap c- at the layer bottom
        Eigen::VectorXcd bp = w.Rbelow * bm;      // gap c+ at the layer bottom
        sol.d_amp[li] = w.P * (bp + tm) + w.Q * (bp - tm);
        sol.u_amp[li] = w.P * (bp + tm) - w.Q * (bp - tm);
        cminus = bm;
    }
    sol.t_bot = bottom.to_field.asDiagonal() * cminus;
    return sol;
}

inline NearFieldTrace near_field_trace(const ForwardSolution& sol, double b, int nsamples) {
    return sol.trace(b, nsamples);
}

} // namespace lamella
