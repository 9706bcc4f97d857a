// Glauber chain on a random 5-regular graph below, near and above beta_c:
// prints |In|/m and the component count along each trajectory.
#include <cstdio>

#include "rclab/dynamics.hpp"

using namespace rclab;

int main() {
    const Graph g = generate_random_regular(200, 5, 1);
    const std::size_t m = g.num_edges();
    const double q = 30.0;
    const double bc = beta_c(q, 5).value;
    std::printf("n=%zu m=%zu q=%g beta_c=%.4f\n", g.num_vertices(), m, q, bc);
    for (double f : {0.7, 1.0, 1.3}) {
        const ModelParams mp(q, f * bc, 5, {.delta_class = 0.45, .eta = 0.25});
        for (bool from_in : {false, true}) {
            const auto x0 = from_in ? Configuration::all_in(m) : Configuration::all_out(m);
            const auto run = run_chain(g, mp, x0, 40 * m, 7, 8 * m);
            std::printf("beta=%.2f beta_c, from %-7s:", f, from_in ? "all-in" : "all-out");
            for (const auto& p : run.series) {
                std::printf(" %.2f/%zu", static_cast<double>(p.in_count) / m, p.components);
            }
            std::printf("  [%s]\n", to_string(run.series.back().phase));
        }
    }
}
