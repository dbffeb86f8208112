// Solve a binary grating and print the diffraction efficiency table.

#include <cstdio>

#include "lamella/modal.hpp"

using namespace lamella;

int main() {
    auto grating = binary_profile({0.0, pi}, 0.0, 1.0);
    MediumPair media{1.0, complexd(1.5, 0.0), 1.0};
    PlaneWaveIncidence inc{1.0, 0.3};

    auto solution = solve_forward(grating, media, inc, 40);
    auto table = efficiencies(solution.spectrum(), inc, media);

    std::printf("%4s %5s %12s %12s\n", "n", "side", "beta_n", "e_n");
    for (const auto& row : table.rows)
        std::printf("%4d %5s %12.6f %12.8f%s\n", row.n, row.side == Side::plus ? "+" : "-",
                    row.beta, row.efficiency, row.grazing ? "  (grazing)" : "");
    std::printf("\nreflected %.8f  transmitted %.8f  defect %.2e\n", table.reflected_sum,
                table.transmitted_sum, table.defect);
    return 0;
}
