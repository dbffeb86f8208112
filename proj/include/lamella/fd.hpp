#pragma once

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <Eigen/SparseLU>

#include <cmath>
#include <functional>
#include <vector>

#include "lamella/common.hpp"
#include "lamella/geometry.hpp"
#include "lamella/modal.hpp"
#include "lamella/radiation.hpp"

namespace lamella {

/// Uniform quasi-periodic grid on the cell S_H = (0,2pi) x (-H,H).
/// Nodes x_i = i*hx (i = 0..nx-1, wrap with phase), y_j = -H + j*hy
/// (j = 0..ny). The profile is snapped onto grid lines before assembly.
struct FdGrid {
    int nx = 64;
    int ny = 64;
    double H = 0.0;     // 0: max(|Lambda+|, |Lambda-|) + 0.5
    int dtn_modes = 0;  // 0: ceil(nx/2) - 1
    bool strict = false; // refuse profiles that need snapping

    double hx() const { return two_pi / nx; }
    double hy() const { return 2.0 * H / ny; }
};

struct FdSolution {
    RectangularProfile snapped;
    MediumPair media;
    PlaneWaveIncidence inc;
    FdGrid grid;
    double snap_distance = 0.0;
    Eigen::MatrixXcd field;     // total field, (ny+1) x nx
    Eigen::MatrixXcd scattered; // field - incident samples

    double hx() const { return grid.hx(); }
    double hy() const { return grid.hy(); }
    double x(int i) const { return i * hx(); }
    double y(int j) const { return -grid.H + j * hy(); }

    NearFieldTrace trace() const {
        NearFieldTrace t;
        t.b = grid.H;
        t.alpha = inc.alpha();
        t.x1.resize(grid.nx);
        t.u.resize(grid.nx);
        for (int i = 0; i < grid.nx; ++i) {
            t.x1[i] = x(i);
            t.u[i] = field(grid.ny, i);
        }
        return t;
    }

    /// Rayleigh coefficients estimated by discrete Fourier projection of the
    /// boundary rows. Evanescent orders grow when referenced back to x2 = 0
    /// and are only meaningful for small |n|.
    RayleighSpectrum spectrum(int Nrep) const {
        RayleighSpectrum s;
        s.N = Nrep;
        s.alpha = inc.alpha();
        s.k1 = media.k1;
        s.k2 = media.k2;
        s.lambda = media.lambda;
        s.beta_plus.resize(s.size());
        s.beta_minus.resize(s.size());
        s.A_plus.assign(s.size(), complexd(0, 0));
        s.A_minus.assign(s.size(), complexd(0, 0));
        const complexd I(0, 1);
        for (int n = -Nrep; n <= Nrep; ++n) {
            const int idx = s.index(n);
            s.beta_plus[idx] = beta_exponent(n, media.k1, s.alpha);
            s.beta_minus[idx] = beta_exponent(n, media.k2, s.alpha);
            complexd top(0, 0), bot(0, 0);
            for (int i = 0; i < grid.nx; ++i) {
                const complexd ph = std::exp(-I * s.alpha_n(n) * x(i));
                top += scattered(grid.ny, i) * ph;
                bot += field(0, i) * ph;
            }
            top /= static_cast<double>(grid.nx);
            bot /= static_cast<double>(grid.nx);
            s.A_plus[idx] = top * std::exp(-I * s.beta_plus[idx] * grid.H);
            s.A_minus[idx] = bot * std::exp(-I * s.beta_minus[idx] * grid.H);
        }
        return s;
    }
};

namespace detail {

inline RectangularProfile snap_profile(const RectangularProfile& p, const FdGrid& g,
                                       double* max_dist) {
    RectangularProfile q = p;
    *max_dist = 0.0;
    const double hx = g.hx(), hy = g.hy();
    for (auto& t : q.transitions) {
        long i = std::lround(t / hx) % g.nx;
        if (i < 0) i += g.nx;
        double snapped = i * hx;
        *max_dist = std::max(*max_dist, std::abs(snapped - t));
        t = snapped;
    }
    for (auto& h : q.heights) {
        long j = std::lround((h + g.H) / hy);
        double snapped = -g.H + j * hy;
        *max_dist = std::max(*max_dist, std::abs(snapped - h));
        h = snapped;
    }
    // Snapping may leave duplicate transitions or equal neighbours; merge.
    RectangularProfile merged;
    for (std::size_t j = 0; j < q.transitions.size(); ++j) {
        if (!merged.transitions.empty() &&
            (q.transitions[j] - merged.transitions.back() <= abscissa_tol ||
             q.heights[j] == merged.heights.back())) {
            continue;
        }
        merged.transitions.push_back(q.transitions[j]);
        merged.heights.push_back(q.heights[j]);
    }
    while (merged.heights.size() >= 2 && merged.heights.front() == merged.heights.back()) {
        merged.transitions.erase(merged.transitions.begin());
        merged.heights.erase(merged.heights.begin());
    }
    return merged;
}

/// Offset table of the discrete DtN kernel: K(d) = (1/nx) sum_n s*i*beta_n
/// exp(i alpha_n hx d). Applying it to samples of exp(i alpha_n x) returns
/// s*i*beta_n times those samples, exactly, for every represented mode.
inline std::vector<complexd> dtn_kernel(int nx, int modes, complexd k, double alpha,
                                        double sign) {
    std::vector<complexd> kernel(2 * nx - 1);
    const double hx = two_pi / nx;
    const complexd I(0, 1);
    for (int d = -(nx - 1); d <= nx - 1; ++d) {
        complexd acc(0, 0);
        for (int n = -modes; n <= modes; ++n) {
            const complexd bn = beta_exponent(n, k, alpha);
            acc += sign * I * bn * std::exp(I * ((n + alpha) * hx * d));
        }
        kernel[d + nx - 1] = acc / static_cast<double>(nx);
    }
    return kernel;
}

} // namespace detail

namespace detail {

/// Finite-volume assembly of the quasi-periodic system on (ny+1) x nx nodes.
/// With bg = true the upper medium fills the whole cell (background matrix
/// of the scattered-field formulation).
inline Eigen::SparseMatrix<complexd> assemble_fd(const RectangularProfile& snapped,
                                                 const MediumPair& media,
                                                 const PlaneWaveIncidence& inc,
                                                 const FdGrid& grid, bool bg) {
    const int nx = grid.nx, ny = grid.ny;
    const double hx = grid.hx(), hy = grid.hy();
    const double alpha = inc.alpha();
    const complexd I(0, 1);
    const complexd wrap = std::exp(I * (alpha * two_pi));
    const int nun = nx * (ny + 1);
    auto id = [nx](int i, int j) { return j * nx + i; };

    // Cell material flags (cell (i,j) spans [x_i,x_{i+1}] x [y_j, y_{j+1}]).
    std::vector<char> cell_lower(static_cast<std::size_t>(nx) * ny);
    for (int j = 0; j < ny; ++j)
        for (int i = 0; i < nx; ++i) {
            const double cx = (i + 0.5) * hx;
            const double cy = -grid.H + (j + 0.5) * hy;
            cell_lower[static_cast<std::size_t>(j) * nx + i] = snapped.in_lower(cx, cy);
        }

    const complexd k1sq(media.k1 * media.k1, 0);
    const complexd k2sq = media.k2 * media.k2;

    auto a_cell = [&](int i, int j) -> double {
        if (bg) return 1.0;
        return cell_lower[static_cast<std::size_t>(j) * nx + ((i % nx + nx) % nx)] ? media.lambda
                                                                                   : 1.0;
    };
    auto ak2_cell = [&](int i, int j) -> complexd {
        if (bg) return k1sq;
        return cell_lower[static_cast<std::size_t>(j) * nx + ((i % nx + nx) % nx)]
                   ? media.lambda * k2sq
                   : k1sq;
    };

    auto kernel_top = dtn_kernel(nx, grid.dtn_modes, complexd(media.k1, 0), alpha, +1.0);
    auto kernel_bot = dtn_kernel(nx, grid.dtn_modes, bg ? complexd(media.k1, 0) : media.k2,
                                 alpha, -1.0);
    const double a_bot = bg ? 1.0 : media.lambda;

    using Trip = Eigen::Triplet<complexd>;
    std::vector<Trip> trips;
    trips.reserve(static_cast<std::size_t>(nun) * 6 + 2ull * nx * nx);
    auto add = [&](int row, int i, int j, complexd v) {
        complexd phase(1, 0);
        if (i < 0) {
            i += nx;
            phase = std::conj(wrap);
        } else if (i >= nx) {
            i -= nx;
            phase = wrap;
        }
        trips.emplace_back(row, id(i, j), v * phase);
    };

    for (int j = 0; j <= ny; ++j) {
        for (int i = 0; i < nx; ++i) {
            const int row = id(i, j);
            const bool top = (j == ny), bot = (j == 0);
            // Face heights for the (half) control volume.
            const double ew_len = (top || bot) ? 0.5 * hy : hy;
            complexd diag(0, 0);

            // East / west fluxes. Adjacent cells: (i, j-1) and (i, j).
            double aE = 0, aW = 0;
            if (!bot && !top) {
                aE = 0.5 * (a_cell(i, j - 1) + a_cell(i, j));
                aW = 0.5 * (a_cell(i - 1, j - 1) + a_cell(i - 1, j));
            } else if (bot) {
                aE = a_cell(i, 0);
                aW = a_cell(i - 1, 0);
            } else {
                aE = a_cell(i, ny - 1);
                aW = a_cell(i - 1, ny - 1);
            }
            add(row, i + 1, j, aE * ew_len / hx);
            diag -= aE * ew_len / hx;
            add(row, i - 1, j, aW * ew_len / hx);
            diag -= aW * ew_len / hx;

            // North / south fluxes.
            if (!top) {
                const double aN = 0.5 * (a_cell(i - 1, j) + a_cell(i, j));
                add(row, i, j + 1, aN * hx / hy);
                diag -= aN * hx / hy;
            }
            if (!bot) {
                const double aS = 0.5 * (a_cell(i - 1, j - 1) + a_cell(i, j - 1));
                add(row, i, j - 1, aS * hx / hy);
                diag -= aS * hx / hy;
            }

            // Volume term: average a*k^2 over the touching cells.
            complexd vol(0, 0);
            if (!bot && !top) {
                vol = 0.25 * (ak2_cell(i - 1, j - 1) + ak2_cell(i, j - 1) +
                              ak2_cell(i - 1, j) + ak2_cell(i, j)) *
                      (hx * hy);
            } else {
                const int jc = bot ? 0 : ny - 1;
                vol = 0.5 * (ak2_cell(i - 1, jc) + ak2_cell(i, jc)) * (hx * 0.5 * hy);
            }
            diag += vol;

            // Radiating closures couple the whole boundary row. The top face
            // contributes +a*d2u, the bottom face -a*d2u (outward normals).
            if (top) {
                for (int m = 0; m < nx; ++m)
                    trips.emplace_back(row, id(m, ny), hx * kernel_top[i - m + nx - 1]);
            }
            if (bot) {
                for (int m = 0; m < nx; ++m)
                    trips.emplace_back(row, id(m, 0), -a_bot * hx * kernel_bot[i - m + nx - 1]);
            }
            trips.emplace_back(row, row, diag);
        }
    }
    Eigen::SparseMatrix<complexd> A(nun, nun);
    A.setFromTriplets(trips.begin(), trips.end());
    return A;
}

} // namespace detail

/// Assemble and solve the quasi-periodic 5-point system with DtN closure on
/// both horizontal boundaries, in the scattered-field (volume contrast)
/// formulation: A u_s = (A_bg - A) u_i. The background matrix uses the upper
/// medium everywhere, so zero contrast yields an identically zero scattered
/// field and the incident wave needs no separate boundary forcing.
inline FdSolution fd_solve(const RectangularProfile& profile, const MediumPair& media,
                           const PlaneWaveIncidence& inc, FdGrid grid) {
    auto rep = validate_profile(profile);
    if (!rep.forward_ok) throw Error("profile failed validation");
    if (grid.nx < 8 || grid.ny < 8) throw Error("fd grid too coarse");
    if (grid.H <= 0.0)
        grid.H = std::max(std::abs(profile.lambda_plus()), std::abs(profile.lambda_minus())) + 0.5;
    if (grid.H <= profile.lambda_plus() || -grid.H >= profile.lambda_minus())
        throw Error("fd box does not contain the grating");
    if (grid.dtn_modes <= 0) grid.dtn_modes = (grid.nx + 1) / 2 - 1;

    FdSolution sol;
    sol.media = media;
    sol.inc = inc;
    sol.grid = grid;
    sol.snapped = detail::snap_profile(profile, grid, &sol.snap_distance);
    if (!validate_profile(sol.snapped).forward_ok)
        throw GridMisaligned("snapping degenerates the profile; refine the grid");
    if (grid.strict && sol.snap_distance > 1e-9)
        throw GridMisaligned("profile is not grid aligned, snap distance " +
                             std::to_string(sol.snap_distance));

    const int nx = grid.nx, ny = grid.ny;
    const double hx = grid.hx(), hy = grid.hy();
    const double alpha = inc.alpha();
    const complexd I(0, 1);
    const int nun = nx * (ny + 1);
    auto id = [nx](int i, int j) { return j * nx + i; };

    Eigen::SparseMatrix<complexd> A = detail::assemble_fd(sol.snapped, media, inc, grid, false);
    Eigen::SparseMatrix<complexd> Abg = detail::assemble_fd(sol.snapped, media, inc, grid, true);

    Eigen::VectorXcd ui(nun);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i)
            ui(id(i, j)) = std::exp(I * (alpha * (i * hx) - inc.beta() * (-grid.H + j * hy)));

    Eigen::VectorXcd rhs = (Abg - A) * ui;

    Eigen::SparseLU<Eigen::SparseMatrix<complexd>> lu;
    lu.compute(A);
    if (lu.info() != Eigen::Success) throw SolverDiverged("sparse factorization failed");
    Eigen::VectorXcd us = lu.solve(rhs);
    if (lu.info() != Eigen::Success) throw SolverDiverged("sparse solve failed");

    sol.field.resize(ny + 1, nx);
    sol.scattered.resize(ny + 1, nx);
    for (int j = 0; j <= ny; ++j)
        for (int i = 0; i < nx; ++i) {
            sol.scattered(j, i) = us(id(i, j));
            sol.field(j, i) = us(id(i, j)) + ui(id(i, j));
        }
    return sol;
}

/// Build an FdSolution from an analytic field (no solve); used to probe the
/// Rellich identity with manufactured data.
inline FdSolution manufactured_solution(const RectangularProfile& profile,
                                        const MediumPair& media, const PlaneWaveIncidence& inc,
                                        FdGrid grid,
                                        const std::function<complexd(double, double)>& u) {
    if (grid.H <= 0.0)
        grid.H = std::max(std::abs(profile.lambda_plus()), std::abs(profile.lambda_minus())) + 0.5;
    FdSolution sol;
    sol.media = media;
    sol.inc = inc;
    sol.grid = grid;
    sol.snapped = detail::snap_profile(profile, grid, &sol.snap_distance);
    sol.field.resize(grid.ny + 1, grid.nx);
    sol.scattered.setZero(grid.ny + 1, grid.nx);
    for (int j = 0; j <= grid.ny; ++j)
        for (int i = 0; i < grid.nx; ++i) sol.field(j, i) = u(sol.x(i), sol.y(j));
    return sol;
}

struct RellichReport {
    double I_plus = 0.0;
    double I_minus = 0.0;
    double defect = 0.0; // max(|I+|, |I-|)
};

namespace detail {

struct GradField {
    Eigen::MatrixXcd d1, d2_up, d2_dn; // d2 one-sided variants per row
};

} // namespace detail

/// Quadrature evaluation of the two Rellich identities obtained by pairing
/// the Helmholtz equation with (x2 - c) d2(conj u) on the upper and lower
/// subdomains. Both vanish for a transmission solution; the report carries
/// the discrete residuals.
inline RellichReport rellich_check(const FdSolution& sol, double c) {
    const int nx = sol.grid.nx, ny = sol.grid.ny;
    const double hx = sol.hx(), hy = sol.hy();
    const double alpha = sol.inc.alpha();
    const complexd wrap = std::exp(complexd(0, alpha * two_pi));
    const auto& u = sol.field;

    auto at = [&](int j, int i) -> complexd {
        int ii = i;
        complexd ph(1, 0);
        if (ii < 0) {
            ii += nx;
            ph = std::conj(wrap);
        } else if (ii >= nx) {
            ii -= nx;
            ph = wrap;
        }
        return ph * u(j, ii);
    };
    auto d1 = [&](int j, int i) { return (at(j, i + 1) - at(j, i - 1)) / (2.0 * hx); };
    // One-sided second-order vertical derivatives.
    auto d2_from_above = [&](int j, int i) {
        if (j + 2 <= ny)
            return (-3.0 * u(j, i) + 4.0 * u(j + 1, i) - u(j + 2, i)) / (2.0 * hy);
        return (u(j, i) - u(j - 1, i)) / hy;
    };
    auto d2_from_below = [&](int j, int i) {
        if (j - 2 >= 0) return (3.0 * u(j, i) - 4.0 * u(j - 1, i) + u(j - 2, i)) / (2.0 * hy);
        return (u(j + 1, i) - u(j, i)) / hy;
    };
    auto d2_central = [&](int j, int i) {
        if (j == 0) return d2_from_above(j, i);
        if (j == ny) return d2_from_below(j, i);
        return (u(j + 1, i) - u(j - 1, i)) / (2.0 * hy);
    };

    const double k1sq = sol.media.k1 * sol.media.k1;
    const double k2sq = std::norm(sol.media.k2) > 0 ? (sol.media.k2 * sol.media.k2).real()
                                                    : 0.0;

    auto row_of = [&](double y) { return static_cast<int>(std::lround((y + sol.grid.H) / hy)); };

    // Volume sums, split by material at the node.
    double vol_plus = 0.0, vol_minus = 0.0;
    for (int j = 0; j <= ny; ++j) {
        const double y = sol.y(j);
        const double wy = (j == 0 || j == ny) ? 0.5 : 1.0;
        for (int i = 0; i < nx; ++i) {
            const double h = sol.snapped.height_at(sol.x(i));
            const bool on_iface = std::abs(y - h) < 0.25 * hy;
            const complexd g1 = d1(j, i);
            if (on_iface) {
                // Shared row: half weight to each side, one-sided d2.
                const complexd gu = d2_from_above(j, i);
                const complexd gd = d2_from_below(j, i);
                const double nu2 = std::norm(u(j, i));
                vol_plus += 0.5 * wy * hx * hy *
                            (std::norm(g1) + std::norm(gu) - k1sq * nu2 - 2.0 * std::norm(gu));
                vol_minus += 0.5 * wy * hx * hy *
                             (std::norm(g1) + std::norm(gd) - k2sq * nu2 - 2.0 * std::norm(gd));
            } else {
                const complexd g2 = d2_central(j, i);
                const double integrand =
                    std::norm(g1) + std::norm(g2) -
                    (y > h ? k1sq : k2sq) * std::norm(u(j, i)) - 2.0 * std::norm(g2);
                if (y > h)
                    vol_plus += wy * hx * hy * integrand;
                else
                    vol_minus += wy * hx * hy * integrand;
            }
        }
    }

    // Top and bottom boundary terms.
    double top = 0.0, bot = 0.0;
    for (int i = 0; i < nx; ++i) {
        const complexd g1 = d1(ny, i);
        const complexd g2 = d2_from_below(ny, i);
        top += hx * (sol.grid.H - c) *
               (-(std::norm(g1) + std::norm(g2)) + k1sq * std::norm(u(ny, i)) +
                2.0 * std::norm(g2));
        const complexd g1b = d1(0, i);
        const complexd g2b = d2_from_above(0, i);
        bot += hx * (-sol.grid.H - c) *
               ((std::norm(g1b) + std::norm(g2b)) - k2sq * std::norm(u(0, i)) -
                2.0 * std::norm(g2b));
    }

    // Interface terms on the horizontal pieces (nu2 = 1 there; vertical
    // pieces carry nu2 = 0 and drop out).
    double lam_plus = 0.0, lam_minus = 0.0;
    {
        const auto& p = sol.snapped;
        const std::size_t m = p.pieces();
        for (std::size_t pc = 0; pc < m; ++pc) {
            const double xa = p.transitions[pc];
            const double xb = (pc + 1 < m) ? p.transitions[pc + 1] : p.transitions[0] + two_pi;
            const double yl = p.heights[pc];
            if (yl <= -sol.grid.H || yl >= sol.grid.H) continue;
            const int r = row_of(yl);
            const int ia = static_cast<int>(std::lround(xa / hx));
            const int ib = static_cast<int>(std::lround(xb / hx));
            for (int ii = ia; ii <= ib; ++ii) {
                const double w = (ii == ia || ii == ib) ? 0.5 * hx : hx;
                const int i = ((ii % nx) + nx) % nx;
                const complexd g1 = d1(r, i);
                const complexd gu = d2_from_above(r, i);
                const complexd gd = d2_from_below(r, i);
                const double nu = std::norm(u(r, i));
                // I+ takes -integral over Lambda, I- takes +integral.
                lam_plus -= w * (yl - c) *
                            (-(std::norm(g1) + std::norm(gu)) + k1sq * nu + 2.0 * std::norm(gu));
                lam_minus += w * (yl - c) *
                             (-(std::norm(g1) + std::norm(gd)) + k2sq * nu + 2.0 * std::norm(gd));
            }
        }
    }

    RellichReport rep;
    rep.I_plus = top + lam_plus + vol_plus;
    rep.I_minus = bot + lam_minus + vol_minus;
    rep.defect = std::max(std::abs(rep.I_plus), std::abs(rep.I_minus));
    return rep;
}

} // namespace lamella
