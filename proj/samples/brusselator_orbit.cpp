// Brusselator with alpha = 0.8, (a, mu) = (1, 4): prints t, x1, x2 every
// 64 steps. The orbit settles on a limit cycle around (1, 4).

#include "fde/fde.hpp"

#include <cstdio>

int main() {
    const auto problem = fde::make_brusselator(0.8, 1.0, 4.0, 50.0);
    const auto sol = fde::solve(problem, fde::MethodKind::FT, fde::Grid::uniform(0.0, 50.0, 4096));
    for (std::size_t n = 0; n < sol.times.size(); n += 64) {
        std::printf("%8.4f %12.8f %12.8f\n", sol.times[n], sol.values[n](0), sol.values[n](1));
    }
}
