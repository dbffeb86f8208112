#pragma once

#include <boost/multiprecision/cpp_int.hpp>

#include <vector>

#include "lamella/common.hpp"

namespace lamella {

using bigint = boost::multiprecision::cpp_int;
using bigrat = boost::multiprecision::cpp_rational;

// Entries of the banded coefficient matrix tying a_j, a_{j+2}, a_{j+4} in the
// biharmonic recursion for homogeneous polynomials of degree n+2.
inline bigint dmatrix_entry_A(long long n, long long j) {
    return bigint(n - j - 1) * (n - j) * (n - j + 1) * (n - j + 2);
}
inline bigint dmatrix_entry_B(long long n, long long j) {
    return bigint(2) * (j + 2) * (j + 1) * (n - j - 1) * (n - j);
}
inline bigint dmatrix_entry_C(long long /*n*/, long long j) {
    return bigint(j + 4) * (j + 3) * (j + 2) * (j + 1);
}

/// The (n-1) x (n-1) matrix D_{n-1}: row j holds A_j two columns left of the
/// diagonal, B_j on it and C_j two columns right.
inline std::vector<std::vector<bigint>> build_dmatrix(long long n) {
    if (n < 2) throw Error("dmatrix requires n >= 2");
    const long long m = n - 1;
    std::vector<std::vector<bigint>> D(m, std::vector<bigint>(m, bigint(0)));
    for (long long j = 0; j <= n - 2; ++j) {
        D[j][j] = dmatrix_entry_B(n, j);
        if (j + 2 <= n - 2) D[j][j + 2] = dmatrix_entry_C(n, j);
        if (j >= 2) D[j][j - 2] = dmatrix_entry_A(n, j);
    }
    return D;
}

/// Fraction-free (Bareiss) determinant over exact integers.
inline bigint bareiss_determinant(std::vector<std::vector<bigint>> M) {
    const std::size_t m = M.size();
    if (m == 0) return bigint(1);
    bigint prev(1);
    int sign = 1;
    for (std::size_t k = 0; k + 1 < m; ++k) {
        if (M[k][k] == 0) {
            std::size_t p = k + 1;
            while (p < m && M[p][k] == 0) ++p;
            if (p == m) return bigint(0);
            std::swap(M[k], M[p]);
            sign = -sign;
        }
        for (std::size_t i = k + 1; i < m; ++i)
            for (std::size_t j = k + 1; j < m; ++j)
                M[i][j] = (M[i][j] * M[k][k] - M[i][k] * M[k][j]) / prev;
        prev = M[k][k];
    }
    return sign > 0 ? M[m - 1][m - 1] : -M[m - 1][m - 1];
}

struct DMatrixReport {
    long long n = 0;
    bigint determinant;
    bool nonzero = false;
    bool product_identity_exact = false; // B_j B_{j-2} - A_j C_{j-2} factorization
    bool pivot_route_matches = false;    // tridiagonal pivot recursion equals Bareiss
};

/// Exact determinant of D_{n-1} plus two independent certificates: the
/// closed-form product identity
///   B_j B_{j-2} - A_j C_{j-2} = 3 (j-1) j (j+1) (j+2) (n-j-1)(n-j)(n-j+1)(n-j+2)
/// checked entrywise, and the pivot recursion p_j = B_j - A_j C_{j-2} / p_{j-2}
/// whose product reproduces the determinant in exact rational arithmetic.
inline DMatrixReport dmatrix_determinant(long long n) {
    DMatrixReport rep;
    rep.n = n;
    if (n < 2) throw Error("dmatrix requires n >= 2");

    rep.determinant = bareiss_determinant(build_dmatrix(n));
    rep.nonzero = rep.determinant != 0;

    rep.product_identity_exact = true;
    for (long long j = 2; j <= n - 2; ++j) {
        const bigint lhs = dmatrix_entry_B(n, j) * dmatrix_entry_B(n, j - 2) -
                           dmatrix_entry_A(n, j) * dmatrix_entry_C(n, j - 2);
        const bigint rhs = bigint(3) * (j - 1) * j * (j + 1) * (j + 2) * (n - j - 1) *
                           (n - j) * (n - j + 1) * (n - j + 2);
        if (lhs != rhs) rep.product_identity_exact = false;
    }

    // The even/odd sublattices of D_{n-1} are tridiagonal; eliminate them
    // jointly through the j -> j-2 coupling.
    std::vector<bigrat> pivots(static_cast<std::size_t>(n - 1));
    bigrat det_rat(1);
    bool pivot_ok = true;
    for (long long j = 0; j <= n - 2; ++j) {
        bigrat p(dmatrix_entry_B(n, j));
        if (j >= 2) {
            if (pivots[j - 2] == 0) {
                pivot_ok = false;
                break;
            }
            p -= bigrat(dmatrix_entry_A(n, j) * dmatrix_entry_C(n, j - 2)) / pivots[j - 2];
        }
        pivots[j] = p;
        det_rat *= p;
    }
    rep.pivot_route_matches =
        pivot_ok && boost::multiprecision::denominator(det_rat) == 1 &&
        boost::multiprecision::numerator(det_rat) == rep.determinant;
    return rep;
}

/// Homogeneous bivariate polynomial sum_j coef[j] x1^(degree-j) x2^j with
/// exact rational coefficients.
struct HomogeneousPoly {
    long long degree = 0;
    std::vector<bigrat> coef; // size degree + 1

    static HomogeneousPoly zero(long long deg) {
        HomogeneousPoly p;
        p.degree = deg;
        p.coef.assign(static_cast<std::size_t>(deg) + 1, bigrat(0));
        return p;
    }
};

/// Laplacian of a homogeneous polynomial (degree drops by two).
inline HomogeneousPoly laplacian(const HomogeneousPoly& p) {
    if (p.degree < 2) return HomogeneousPoly::zero(0);
    HomogeneousPoly out = HomogeneousPoly::zero(p.degree - 2);
    for (long long j = 0; j <= p.degree - 2; ++j) {
        const long long d = p.degree;
        out.coef[j] = bigrat((d - j) * (d - j - 1)) * p.coef[j] +
                      bigrat((j + 2) * (j + 1)) * p.coef[j + 2];
    }
    return out;
}

inline bool is_zero(const HomogeneousPoly& p) {
    for (const auto& c : p.coef)
        if (c != 0) return false;
    return true;
}

inline bool is_harmonic(const HomogeneousPoly& p) { return is_zero(laplacian(p)); }

/// Harmonic basis polynomials Re (x1 + i x2)^n and Im (x1 + i x2)^n.
inline HomogeneousPoly harmonic_re(long long n) {
    HomogeneousPoly p = HomogeneousPoly::zero(n);
    bigint binom(1);
    for (long long j = 0; j <= n; ++j) {
        if (j % 2 == 0) p.coef[j] = bigrat((j / 2) % 2 == 0 ? binom : -binom);
        binom = binom * (n - j) / (j + 1);
    }
    return p;
}

inline HomogeneousPoly harmonic_im(long long n) {
    HomogeneousPoly p = HomogeneousPoly::zero(n);
    bigint binom(1);
    for (long long j = 0; j <= n; ++j) {
        if (j % 2 == 1) p.coef[j] = bigrat(((j - 1) / 2) % 2 == 0 ? binom : -binom);
        binom = binom * (n - j) / (j + 1);
    }
    return p;
}

struct SectorPolynomialResult {
    HomogeneousPoly q_plus, q_minus;
    bool equal = false;            // exact coefficientwise equality
    bool laplacian_matches = false; // Delta q == H re-verified symbolically
    DMatrixReport certificate;     // nonsingularity of the difference system (n >= 2)
};

/// Solve Delta q^+- = H_n in the two quarter-sectors with vanishing Cauchy
/// data on the bottom rays and matched data on the vertical ray, in exact
/// rational arithmetic, and certify q^+ = q^-.
inline SectorPolynomialResult polynomial_sector_solve(const HomogeneousPoly& H) {
    if (!is_harmonic(H)) throw NotHarmonic("right-hand side polynomial is not harmonic");
    const long long n = H.degree;

    auto solve_side = [&]() {
        HomogeneousPoly q = HomogeneousPoly::zero(n + 2);
        // Vanishing value and vertical derivative on x2 = 0 kill a_0, a_1;
        // the Poisson recursion then fixes every higher coefficient.
        for (long long j = 0; j <= n; ++j) {
            const bigrat num = H.coef[j] - bigrat((n + 2 - j) * (n + 1 - j)) * q.coef[j];
            q.coef[j + 2] = num / bigrat((j + 1) * (j + 2));
        }
        return q;
    };

    SectorPolynomialResult res;
    res.q_plus = solve_side();
    res.q_minus = solve_side();
    res.equal = res.q_plus.coef == res.q_minus.coef;
    const HomogeneousPoly back = laplacian(res.q_plus);
    res.laplacian_matches = back.coef == H.coef;
    if (n >= 2) res.certificate = dmatrix_determinant(n);
    else {
        res.certificate.n = n;
        res.certificate.nonzero = true;
        res.certificate.product_identity_exact = true;
        res.certificate.pivot_route_matches = true;
        res.certificate.determinant = 1;
    }
    return res;
}

} // namespace lamella
