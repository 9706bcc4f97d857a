// Ordered revealing coupling on a 16-cycle: outcome tags over many seeds and
// the reveal trace of one run.
#include <cstdio>
#include <map>

#include "rclab/coupling_lab.hpp"

using namespace rclab;

int main() {
    const Graph g = families::cycle(16);
    const ModelParams mp(2.0, 2.0, 2, {.delta_class = 0.05, .eta = 0.45});
    OracleRevealSampler sampler(g, mp);
    std::map<OutcomeTag, int> tags;
    for (std::uint64_t seed = 0; seed < 500; ++seed) {
        ++tags[revealing_coupling_ordered(g, 0, 2, mp, seed, sampler).tag];
    }
    for (auto [t, c] : tags) {
        std::printf("%-24s %d\n", to_string(t), c);
    }
    for (std::uint64_t seed = 0;; ++seed) {
        const auto out = revealing_coupling_ordered(g, 0, 2, mp, seed, sampler);
        if (out.iterations < 2) {
            continue;
        }
        std::printf("\nseed %llu: gate %.1f, occupancy %zu, %zu iterations -> %s\n",
                    static_cast<unsigned long long>(seed), out.gate, out.occupancy_at_gate, out.iterations,
                    to_string(out.tag));
        for (const auto& s : out.trace) {
            std::printf("  i=%zu revealed=%zu  ordered=%s\n          plus   =%s\n", s.i, s.revealed.size(),
                        s.phase_side.to_string().c_str(), s.ball_side.to_string().c_str());
        }
        break;
    }
}
