// Generate a synthetic near-field trace above a binary grating, then recover
// the grating and the lower wavenumber from that single measurement.

#include <cstdio>

#include "lamella/invert.hpp"

using namespace lamella;

int main() {
    auto truth = binary_profile({0.7, 3.9}, 0.0, 0.8);
    const double k2_truth = 1.6;
    MediumPair media{1.0, complexd(k2_truth, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.2};

    InverseProblemSpec spec;
    spec.data = solve_forward(truth, media, inc, 32).trace(1.2, 128);
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
    cfg.n_polish = 32;
    cfg.seed = 1;

    auto result = reconstruct(spec, cfg);
    std::printf("misfit %.3e after restart %d%s\n", result.misfit, result.best_restart,
                result.ambiguous ? " (ambiguous)" : "");
    std::printf("%-12s %10s %10s\n", "", "truth", "recovered");
    for (int i = 0; i < 2; ++i)
        std::printf("transition %d %10.6f %10.6f\n", i, truth.transitions[i],
                    result.profile.transitions[i]);
    for (int i = 0; i < 2; ++i)
        std::printf("height %d     %10.6f %10.6f\n", i, truth.heights[i],
                    result.profile.heights[i]);
    std::printf("k2           %10.6f %10.6f\n", k2_truth, result.k2);
    return 0;
}
