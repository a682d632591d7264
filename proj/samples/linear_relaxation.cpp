// Relaxation D^alpha y = -2 y, y(0) = 1 on [0, 2] with all five methods.

#include "fde/fde.hpp"

#include <cstdio>

int main() {
    const double alpha = 0.5;
    const auto problem = fde::make_linear(alpha, -2.0, 0.0, 2.0, {1.0});
    const std::size_t N = 512;
    for (auto method : fde::all_methods) {
        const auto grid = fde::default_grid(method, alpha, 0.0, 2.0, N);
        const auto sol = fde::solve(problem, method, grid);
        std::printf("%-5s y(2) = %.12f  (%zu Newton iterations, %.3f ms)\n",
                    std::string(fde::to_string(method)).c_str(), sol.final_value()(0),
                    sol.stats.newton_iterations, 1e3 * sol.stats.wall_seconds);
    }
}
