#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "lamella/common.hpp"

namespace lamella {

/// Absolute tolerance used when comparing / deduplicating abscissae.
inline constexpr double abscissa_tol = 1e-12 * two_pi;

/// 2*pi-periodic piecewise-constant graph x2 = h(x1).
///
/// The graph takes the value heights[j] on [transitions[j], transitions[j+1])
/// and heights[M-1] on [transitions[M-1], transitions[0] + 2*pi). Storing the
/// profile as (transitions, heights) makes the graph property structural:
/// every normal has a non-negative vertical component and the upward
/// translation invariance of the upper domain holds by construction.
struct RectangularProfile {
    std::vector<double> transitions; // strictly increasing, in [0, 2*pi)
    std::vector<double> heights;     // one level per piece

    std::size_t pieces() const { return transitions.size(); }

    double lambda_plus() const {
        return *std::max_element(heights.begin(), heights.end());
    }
    double lambda_minus() const {
        return *std::min_element(heights.begin(), heights.end());
    }

    bool is_flat() const {
        for (double h : heights)
            if (h != heights.front()) return false;
        return true;
    }

    /// Piece index owning abscissa x (x arbitrary real, reduced mod 2*pi).
    std::size_t piece_of(double x) const {
        double xr = std::fmod(x, two_pi);
        if (xr < 0) xr += two_pi;
        // [0, t_0) belongs to the wrapped last piece.
        if (xr < transitions.front()) return transitions.size() - 1;
        auto it = std::upper_bound(transitions.begin(), transitions.end(), xr);
        return static_cast<std::size_t>(it - transitions.begin()) - 1;
    }

    double height_at(double x) const { return heights[piece_of(x)]; }

    /// True if (x1, x2) lies strictly below the graph, i.e. in the lower medium.
    bool in_lower(double x1, double x2) const { return x2 < height_at(x1); }
    bool in_upper(double x1, double x2) const { return x2 > height_at(x1); }
};

struct ValidationCheck {
    std::string name;
    bool pass = false;
    std::string detail;
};

struct ValidationReport {
    std::vector<ValidationCheck> checks;
    bool forward_ok = false;   // accepted by the forward solvers
    bool inversion_ok = false; // additionally non-degenerate for inversion

    const ValidationCheck* find(const std::string& name) const {
        for (const auto& c : checks)
            if (c.name == name) return &c;
        return nullptr;
    }
};

inline ValidationReport validate_profile(const RectangularProfile& p) {
    ValidationReport rep;
    auto add = [&rep](const std::string& name, bool pass, const std::string& detail = "") {
        rep.checks.push_back({name, pass, detail});
        return pass;
    };

    const std::size_t m = p.transitions.size();
    bool ok = add("size_match", m >= 1 && p.heights.size() == m,
                  "one height per piece, at least one piece");

    bool finite = true;
    for (double t : p.transitions) finite = finite && std::isfinite(t);
    for (double h : p.heights) finite = finite && std::isfinite(h);
    ok = add("finite_values", finite) && ok;

    if (!ok) {
        rep.forward_ok = rep.inversion_ok = false;
        return rep;
    }

    bool in_period = true;
    for (double t : p.transitions) in_period = in_period && t >= 0.0 && t < two_pi;
    ok = add("transitions_in_period", in_period, "abscissae in [0, 2*pi)") && ok;

    bool increasing = true;
    for (std::size_t j = 0; j + 1 < m; ++j)
        increasing = increasing && (p.transitions[j + 1] - p.transitions[j] > abscissa_tol);
    ok = add("transitions_increasing", increasing, "strictly increasing abscissae") && ok;

    bool adj_distinct = true;
    if (m >= 2) {
        for (std::size_t j = 0; j < m; ++j)
            adj_distinct = adj_distinct && (p.heights[j] != p.heights[(j + 1) % m]);
    }
    ok = add("adjacent_heights_distinct", adj_distinct,
             "each transition carries an actual jump") && ok;

    const bool non_constant = !p.is_flat();
    add("non_constant", non_constant,
        "flat profiles are degenerate for inversion, allowed for forward runs");

    rep.forward_ok = ok;
    rep.inversion_ok = ok && non_constant;
    return rep;
}

/// Interface corner. The interior angle is the opening of the lower domain
/// at the corner and is always pi/2 or 3*pi/2 for a rectangular graph.
struct Corner {
    double x1 = 0.0;
    double x2 = 0.0;
    double interior_angle = 0.0;
};

/// Two corners per transition: at the lower end of the vertical segment the
/// lower medium fills three quadrants (3*pi/2), at the upper end one (pi/2).
inline std::vector<Corner> corners_of(const RectangularProfile& p) {
    std::vector<Corner> corners;
    const std::size_t m = p.transitions.size();
    if (p.is_flat()) return corners;
    for (std::size_t j = 0; j < m; ++j) {
        const double left = p.heights[(j + m - 1) % m];
        const double right = p.heights[j];
        if (left == right) continue;
        const double lo = std::min(left, right);
        const double hi = std::max(left, right);
        corners.push_back({p.transitions[j], lo, 1.5 * pi});
        corners.push_back({p.transitions[j], hi, 0.5 * pi});
    }
    return corners;
}

/// Horizontal slab in which the material indicator depends on x1 only.
/// Interval j is [x_start[j], x_start[j+1]) (the last one wraps); lower[j]
/// tells whether that column belongs to the lower medium.
struct LamellarLayer {
    double y_lo = 0.0;
    double y_hi = 0.0;
    std::vector<double> x_start;
    std::vector<bool> lower;

    double thickness() const { return y_hi - y_lo; }
};

/// Partition of the slab [Lambda-, Lambda+] into lamellar layers, one per
/// consecutive pair of distinct profile levels. A binary profile yields a
/// single modulated layer; a flat profile yields none.
inline std::vector<LamellarLayer> layer_decomposition(const RectangularProfile& p) {
    std::vector<LamellarLayer> layers;
    std::vector<double> levels = p.heights;
    std::sort(levels.begin(), levels.end());
    levels.erase(std::unique(levels.begin(), levels.end()), levels.end());
    if (levels.size() < 2) return layers;

    for (std::size_t l = 0; l + 1 < levels.size(); ++l) {
        LamellarLayer layer;
        layer.y_lo = levels[l];
        layer.y_hi = levels[l + 1];
        layer.x_start = p.transitions;
        layer.lower.resize(p.pieces());
        for (std::size_t j = 0; j < p.pieces(); ++j) {
            // A column is in the lower medium iff the graph covers the layer.
            layer.lower[j] = p.heights[j] >= layer.y_hi;
        }
        layers.push_back(std::move(layer));
    }
    return layers;
}

/// Binary profile: exactly two alternating levels across an even number of
/// transitions. heights[0] = first, heights[1] = second, alternating.
inline RectangularProfile binary_profile(std::vector<double> transitions,
                                         double first, double second) {
    RectangularProfile p;
    p.transitions = std::move(transitions);
    p.heights.resize(p.transitions.size());
    for (std::size_t j = 0; j < p.heights.size(); ++j)
        p.heights[j] = (j % 2 == 0) ? first : second;
    return p;
}

inline bool is_binary(const RectangularProfile& p) {
    if (p.pieces() < 2 || p.pieces() % 2 != 0) return false;
    for (std::size_t j = 0; j < p.pieces(); ++j)
        if (p.heights[j] != p.heights[j % 2]) return false;
    return p.heights[0] != p.heights[1];
}

/// Translate the profile by dx in x1 (mod 2*pi), preserving the invariants.
inline RectangularProfile shift_x(const RectangularProfile& p, double dx) {
    const std::size_t m = p.pieces();
    std::vector<std::pair<double, double>> pieces(m);
    for (std::size_t j = 0; j < m; ++j) {
        double t = std::fmod(p.transitions[j] + dx, two_pi);
        if (t < 0) t += two_pi;
        pieces[j] = {t, p.heights[j]};
    }
    std::sort(pieces.begin(), pieces.end());
    RectangularProfile q;
    q.transitions.resize(m);
    q.heights.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        q.transitions[j] = pieces[j].first;
        q.heights[j] = pieces[j].second;
    }
    return q;
}

/// Reflect the profile through x1 = 0: the image graph is h(-x1).
inline RectangularProfile mirror_x(const RectangularProfile& p) {
    const std::size_t m = p.pieces();
    std::vector<std::pair<double, double>> pieces(m);
    for (std::size_t j = 0; j < m; ++j) {
        // Piece [t_j, t_{j+1}) maps to the piece starting at -t_{j+1}.
        double s = std::fmod(two_pi - p.transitions[(j + 1) % m], two_pi);
        if (s < 0) s += two_pi;
        pieces[j] = {s, p.heights[j]};
    }
    std::sort(pieces.begin(), pieces.end());
    RectangularProfile q;
    q.transitions.resize(m);
    q.heights.resize(m);
    for (std::size_t j = 0; j < m; ++j) {
        q.transitions[j] = pieces[j].first;
        q.heights[j] = pieces[j].second;
    }
    return q;
}

} // namespace lamella
