#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "lamella/common.hpp"

namespace lamella {

/// Fold a point into [lo, hi] by reflection at the walls (triangle wave);
/// continuous, so the simplex sees no artificial cliffs at the bounds.
inline double reflect_into(double x, double lo, double hi) {
    if (hi <= lo) return lo;
    const double w = hi - lo;
    double t = std::fmod(x - lo, 2.0 * w);
    if (t < 0) t += 2.0 * w;
    return lo + (t <= w ? t : 2.0 * w - t);
}

struct NelderMeadOptions {
    int max_iters = 400;
    double ftol = 1e-14;     // absolute spread of simplex values
    double xtol_rel = 1e-12; // simplex diameter relative to bound width
};

struct NelderMeadResult {
    Eigen::VectorXd x;
    double fval = 0.0;
    int iterations = 0;
    int evaluations = 0;
    std::vector<double> history; // best value after each iteration
};

/// Bound-constrained Nelder-Mead simplex search. Every trial point is folded
/// into the box before evaluation.
inline NelderMeadResult nelder_mead(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, const Eigen::VectorXd& step,
                                    const Eigen::VectorXd& lo, const Eigen::VectorXd& hi,
                                    const NelderMeadOptions& opt = {}) {
    const int dim = static_cast<int>(x0.size());
    NelderMeadResult out;

    auto fold = [&](Eigen::VectorXd x) {
        for (int i = 0; i < dim; ++i) x(i) = reflect_into(x(i), lo(i), hi(i));
        return x;
    };
    auto eval = [&](const Eigen::VectorXd& x) {
        ++out.evaluations;
        return f(x);
    };

    std::vector<Eigen::VectorXd> xs(dim + 1);
    std::vector<double> fs(dim + 1);
    xs[0] = fold(x0);
    fs[0] = eval(xs[0]);
    for (int i = 0; i < dim; ++i) {
        Eigen::VectorXd p = xs[0];
        p(i) += step(i);
        xs[i + 1] = fold(p);
        fs[i + 1] = eval(xs[i + 1]);
    }

    std::vector<int> order(dim + 1);
    for (int it = 0; it < opt.max_iters; ++it) {
        ++out.iterations;
        for (int i = 0; i <= dim; ++i) order[i] = i;
        std::sort(order.begin(), order.end(), [&](int a, int b) { return fs[a] < fs[b]; });
        const int best = order[0], worst = order[dim], second = order[dim - 1];
        out.history.push_back(fs[best]);

        if (fs[worst] - fs[best] < opt.ftol) break;
        double diam = 0.0;
        for (int i = 1; i <= dim; ++i)
            diam = std::max(diam, (xs[order[i]] - xs[best]).cwiseAbs().maxCoeff());
        double width = (hi - lo).maxCoeff();
        if (diam < opt.xtol_rel * std::max(width, 1.0)) break;

        Eigen::VectorXd centroid = Eigen::VectorXd::Zero(dim);
        for (int i = 0; i <= dim; ++i)
            if (i != worst) centroid += xs[i];
        centroid /= dim;

        Eigen::VectorXd xr = fold(centroid + (centroid - xs[worst]));
        const double fr = eval(xr);
        if (fr < fs[best]) {
            Eigen::VectorXd xe = fold(centroid + 2.0 * (centroid - xs[worst]));
            const double fe = eval(xe);
            if (fe < fr) {
                xs[worst] = xe;
                fs[worst] = fe;
            } else {
                xs[worst] = xr;
                fs[worst] = fr;
            }
        } else if (fr < fs[second]) {
            xs[worst] = xr;
            fs[worst] = fr;
        } else {
            const bool outside = fr < fs[worst];
            Eigen::VectorXd xc = outside ? fold(centroid + 0.5 * (xr - centroid))
                                         : fold(centroid - 0.5 * (centroid - xs[worst]));
            const double fc = eval(xc);
            if (fc < std::min(fr, fs[worst])) {
                xs[worst] = xc;
                fs[worst] = fc;
            } else {
                // Shrink toward the best vertex.
                for (int i = 0; i <= dim; ++i) {
                    if (i == best) continue;
                    xs[i] = fold(xs[best] + 0.5 * (xs[i] - xs[best]));
                    fs[i] = eval(xs[i]);
                }
            }
        }
    }

    int best = 0;
    for (int i = 1; i <= dim; ++i)
        if (fs[i] < fs[best]) best = i;
    out.x = xs[best];
    out.fval = fs[best];
    return out;
}

} // namespace lamella
