#pragma once

#include <Eigen/Dense>
#include <Eigen/SVD>

#include <cmath>
#include <functional>
#include <limits>
#include <vector>

#include "lamella/common.hpp"
#include "lamella/geometry.hpp"

namespace lamella {

/// Trigonometric polynomial sum_j (cos_c[j] cos(j t) + sin_c[j] sin(j t)).
struct TrigPoly {
    std::vector<complexd> cos_c, sin_c;

    static TrigPoly zero(int degree) {
        TrigPoly p;
        p.cos_c.assign(degree + 1, complexd(0, 0));
        p.sin_c.assign(degree + 1, complexd(0, 0));
        return p;
    }
    int degree() const { return static_cast<int>(cos_c.size()) - 1; }

    complexd eval(double t) const {
        complexd acc(0, 0);
        for (int j = 0; j <= degree(); ++j)
            acc += cos_c[j] * std::cos(j * t) + sin_c[j] * std::sin(j * t);
        return acc;
    }
    complexd deriv(double t) const {
        complexd acc(0, 0);
        for (int j = 1; j <= degree(); ++j)
            acc += static_cast<double>(j) * (-cos_c[j] * std::sin(j * t) + sin_c[j] * std::cos(j * t));
        return acc;
    }
    complexd deriv2(double t) const {
        complexd acc(0, 0);
        for (int j = 1; j <= degree(); ++j)
            acc -= static_cast<double>(j * j) *
                   (cos_c[j] * std::cos(j * t) + sin_c[j] * std::sin(j * t));
        return acc;
    }
};

enum class SectorBc { dirichlet, neumann };

/// Special solution of the sector problem with homogeneous-polynomial data:
/// u = r^(k+2) f^{+-}(theta) + C r^(k+2) (log term), where f satisfies
/// f'' + (k+2)^2 f = c^{+-} p_k per sector with transmission at theta = pi/2
/// and the chosen boundary condition on theta = 0, pi.
struct SectorSpecialSolution {
    int k = 0;
    SectorBc bc = SectorBc::dirichlet;
    complexd c_plus, c_minus;
    TrigPoly p; // right-hand side angular factor, degree <= k
    TrigPoly f_plus, f_minus;
    complexd a_plus, a_minus, b_plus, b_minus;
    complexd C;

    int order() const { return k + 2; }

    /// Angular factor of the logarithmic companion and its theta derivative.
    complexd log_angular(double r, double theta) const {
        const double K = order();
        if (bc == SectorBc::dirichlet)
            return std::log(r) * std::sin(K * theta) + theta * std::cos(K * theta);
        return std::log(r) * std::cos(K * theta) - theta * std::sin(K * theta);
    }

    /// Total special solution at polar coordinates around the corner.
    complexd eval(double r, double theta) const {
        const TrigPoly& f = theta > 0.5 * pi ? f_plus : f_minus;
        return std::pow(r, order()) * (f.eval(theta) + C * log_angular(r, theta));
    }

    struct Residuals {
        double ode_plus = 0.0;
        double ode_minus = 0.0;
        double transmission_value = 0.0;
        double transmission_deriv = 0.0;
        double bc_zero = 0.0;
        double bc_pi = 0.0;
        double max() const {
            return std::max({ode_plus, ode_minus, transmission_value, transmission_deriv,
                             bc_zero, bc_pi});
        }
    };

    /// Angular-system residuals sampled on a theta grid; all analytic pieces
    /// are evaluated exactly, so a correct construction sits at roundoff.
    Residuals verify(int grid_points = 200) const {
        Residuals res;
        const double K = order();
        const double K2 = K * K;
        for (int i = 0; i <= grid_points; ++i) {
            const double t = pi * i / grid_points;
            if (t < 0.5 * pi) {
                res.ode_minus = std::max(
                    res.ode_minus,
                    std::abs(f_minus.deriv2(t) + K2 * f_minus.eval(t) - c_minus * p.eval(t)));
            } else if (t > 0.5 * pi) {
                res.ode_plus = std::max(
                    res.ode_plus,
                    std::abs(f_plus.deriv2(t) + K2 * f_plus.eval(t) - c_plus * p.eval(t)));
            }
        }
        res.transmission_value = std::abs(f_plus.eval(0.5 * pi) - f_minus.eval(0.5 * pi));
        res.transmission_deriv = std::abs(f_plus.deriv(0.5 * pi) - f_minus.deriv(0.5 * pi));
        const double sgn = (k % 2 == 0) ? 1.0 : -1.0;
        if (bc == SectorBc::dirichlet) {
            res.bc_zero = std::abs(f_minus.eval(0.0));
            res.bc_pi = std::abs(f_plus.eval(pi) + C * pi * sgn);
        } else {
            res.bc_zero = std::abs(f_minus.deriv(0.0));
            res.bc_pi = std::abs(f_plus.deriv(pi) - C * pi * K * sgn);
        }
        return res;
    }
};

/// Constructive solution of the angular system. The particular part is the
/// zero-initial-data Duhamel solution, written with exact antiderivatives of
/// the trigonometric products (degree of p stays below k+2, so no resonance).
inline SectorSpecialSolution build_special_solution(int k, complexd c_plus, complexd c_minus,
                                                    const TrigPoly& p, SectorBc bc) {
    if (k < 0) throw Error("order k must be nonnegative");
    if (p.degree() > k) throw Error("angular polynomial degree exceeds k");
    SectorSpecialSolution s;
    s.k = k;
    s.bc = bc;
    s.c_plus = c_plus;
    s.c_minus = c_minus;
    s.p = p;

    const int K = k + 2;
    const double Kd = K;

    // h(theta) = (c/K) int_0^theta sin(K(theta-tau)) p(tau) dtau expands to
    // mode-j terms p_j/(K^2-j^2) plus a K-mode correction enforcing
    // h(0) = h'(0) = 0.
    auto duhamel = [&](complexd c) {
        TrigPoly h = TrigPoly::zero(K);
        complexd corr_cos(0, 0), corr_sin(0, 0);
        for (int j = 0; j <= p.degree(); ++j) {
            const double denom = Kd * Kd - static_cast<double>(j) * j;
            h.cos_c[j] += c * p.cos_c[j] / denom;
            h.sin_c[j] += c * p.sin_c[j] / denom;
            corr_cos -= c * p.cos_c[j] / denom;
            corr_sin -= c * p.sin_c[j] * (static_cast<double>(j) / (Kd * denom));
        }
        h.cos_c[K] += corr_cos;
        h.sin_c[K] += corr_sin;
        return h;
    };

    const TrigPoly h_plus = duhamel(c_plus);
    const TrigPoly h_minus = duhamel(c_minus);

    const complexd p1 = h_minus.eval(0.5 * pi) - h_plus.eval(0.5 * pi);
    const complexd p2 = (h_minus.deriv(0.5 * pi) - h_plus.deriv(0.5 * pi)) / Kd;

    // cos(K pi/2), sin(K pi/2) for integer K, exactly.
    const int km = ((K % 4) + 4) % 4;
    const double cK = (km == 0) ? 1.0 : (km == 2) ? -1.0 : 0.0;
    const double sK = (km == 1) ? 1.0 : (km == 3) ? -1.0 : 0.0;

    const double sgn = (k % 2 == 0) ? 1.0 : -1.0; // (-1)^k
    s.a_minus = complexd(0, 0);
    s.b_minus = complexd(0, 0); // gauge: the under-determined pair is pinned at zero
    s.a_plus = p1 * cK - p2 * sK;
    s.b_plus = p1 * sK + p2 * cK;

    if (bc == SectorBc::dirichlet) {
        // f+(pi) = (-1)^(k+1) C pi with f+(pi) = a+ (-1)^k + h+(pi).
        s.C = -(s.a_plus + sgn * h_plus.eval(pi)) / pi;
    } else {
        // f+'(pi) = C pi K (-1)^k with f+'(pi) = b+ K (-1)^k + h+'(pi).
        s.C = (s.b_plus * Kd + sgn * h_plus.deriv(pi)) / (pi * Kd);
    }

    auto compose = [&](const TrigPoly& h, complexd a, complexd b) {
        TrigPoly f = h;
        f.cos_c[K] += a;
        f.sin_c[K] += b;
        return f;
    };
    s.f_plus = compose(h_plus, s.a_plus, s.b_plus);
    s.f_minus = compose(h_minus, s.a_minus, s.b_minus);
    return s;
}

/// Least-squares fit of a truncated harmonic series
///   u ~ sum_n r^n [a_n sin(n t) + b_n cos(n t)]
/// on concentric circles around a corner, with per-circle weights favouring
/// the small radii so the fitted coefficients are anchored where the
/// expansion is valid. The per-radius residuals estimate the remainder
/// exponent by log-log regression.
struct HarmonicExpansion {
    std::vector<complexd> a, b; // index n = 0..n_max (a[0] unused)
    std::vector<double> radii;
    std::vector<double> residuals; // rms residual per circle
    double residual_exponent = 0.0;
    int lowest_order = 0; // smallest n with |a_n|+|b_n| above the noise floor
    double condition = 0.0;
};

inline HarmonicExpansion fit_harmonic_expansion(
    const std::function<complexd(double, double)>& sampler, const Corner& corner,
    const std::vector<double>& radii, int n_max, int n_theta = 192) {
    if (radii.size() < 2) throw Error("need at least two fit radii");
    const int cols = 2 * n_max + 1;
    const int rows = static_cast<int>(radii.size()) * n_theta;

    double r_ref = 1.0;
    for (double r : radii) r_ref *= r;
    r_ref = std::pow(r_ref, 1.0 / radii.size());

    Eigen::MatrixXd Adm(rows, cols);
    Eigen::VectorXcd rhs(rows);
    double scale_u = 0.0;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double r = radii[ri];
        const double w = std::pow(r_ref / r, n_max);
        for (int ti = 0; ti < n_theta; ++ti) {
            const double t = two_pi * ti / n_theta;
            const int row = static_cast<int>(ri) * n_theta + ti;
            int col = 0;
            Adm(row, col++) = w; // n = 0 cosine term
            for (int n = 1; n <= n_max; ++n) {
                const double rn = std::pow(r, n);
                Adm(row, col++) = w * rn * std::sin(n * t);
                Adm(row, col++) = w * rn * std::cos(n * t);
            }
            const complexd u = sampler(corner.x1 + r * std::cos(t), corner.x2 + r * std::sin(t));
            rhs(row) = w * u;
            scale_u = std::max(scale_u, std::abs(u));
        }
    }

    Eigen::BDCSVD<Eigen::MatrixXd> svd(Adm, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double cond =
        svd.singularValues()(0) / svd.singularValues()(svd.singularValues().size() - 1);
    if (cond > 1e12) throw IllConditionedFit("harmonic fit design matrix condition " +
                                             std::to_string(cond));

    Eigen::VectorXd sol_re = svd.solve(rhs.real());
    Eigen::VectorXd sol_im = svd.solve(rhs.imag());

    HarmonicExpansion fit;
    fit.condition = cond;
    fit.radii = radii;
    fit.a.assign(n_max + 1, complexd(0, 0));
    fit.b.assign(n_max + 1, complexd(0, 0));
    fit.b[0] = complexd(sol_re(0), sol_im(0));
    for (int n = 1; n <= n_max; ++n) {
        fit.a[n] = complexd(sol_re(2 * n - 1), sol_im(2 * n - 1));
        fit.b[n] = complexd(sol_re(2 * n), sol_im(2 * n));
    }

    // Unweighted per-circle rms residuals.
    fit.residuals.assign(radii.size(), 0.0);
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        const double r = radii[ri];
        double acc = 0.0;
        for (int ti = 0; ti < n_theta; ++ti) {
            const double t = two_pi * ti / n_theta;
            complexd model = fit.b[0];
            for (int n = 1; n <= n_max; ++n)
                model += std::pow(r, n) * (fit.a[n] * std::sin(n * t) + fit.b[n] * std::cos(n * t));
            const complexd u = sampler(corner.x1 + r * std::cos(t), corner.x2 + r * std::sin(t));
            acc += std::norm(u - model);
        }
        fit.residuals[ri] = std::sqrt(acc / n_theta);
    }

    // Log-log slope over circles with residual above the numerical floor.
    const double floor = 1e-12 * std::max(1.0, scale_u);
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    int used = 0;
    for (std::size_t ri = 0; ri < radii.size(); ++ri) {
        if (fit.residuals[ri] <= floor) continue;
        const double lx = std::log(radii[ri]);
        const double ly = std::log(fit.residuals[ri]);
        sx += lx;
        sy += ly;
        sxx += lx * lx;
        sxy += lx * ly;
        ++used;
    }
    if (used >= 2 && sxx * used - sx * sx > 0)
        fit.residual_exponent = (sxy * used - sx * sy) / (sxx * used - sx * sx);
    else
        fit.residual_exponent = std::numeric_limits<double>::infinity();

    double max_coef = 0.0;
    for (int n = 0; n <= n_max; ++n)
        max_coef = std::max(max_coef, std::abs(fit.a[n]) + std::abs(fit.b[n]));
    const double coef_floor = std::max(1e-8 * max_coef, 1e-12 * std::max(1.0, scale_u));
    fit.lowest_order = n_max + 1;
    for (int n = 0; n <= n_max; ++n) {
        if (std::abs(fit.a[n]) + std::abs(fit.b[n]) > coef_floor) {
            fit.lowest_order = n;
            break;
        }
    }
    return fit;
}

/// Distance from one corner to the nearest other corner, accounting for the
/// periodic images in x1.
inline double corner_clearance(const RectangularProfile& p, std::size_t corner_index) {
    auto cs = corners_of(p);
    if (corner_index >= cs.size()) throw Error("corner index out of range");
    const Corner& c = cs[corner_index];
    double best = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < cs.size(); ++i) {
        if (i == corner_index) continue;
        for (int shift = -1; shift <= 1; ++shift) {
            const double dx = cs[i].x1 + shift * two_pi - c.x1;
            const double dy = cs[i].x2 - c.x2;
            best = std::min(best, std::hypot(dx, dy));
        }
    }
    return best;
}

/// Default fit radii 0.05 * 1.5^j, j = 0..4, scaled down when the corner
/// clearance requires it.
inline std::vector<double> default_fit_radii(double clearance = 1.0) {
    const double scale = std::min(1.0, 0.5 * clearance / 0.25);
    std::vector<double> r(5);
    for (int j = 0; j < 5; ++j) r[j] = scale * 0.05 * std::pow(1.5, j);
    return r;
}

} // namespace lamella
