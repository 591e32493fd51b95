#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace driftnet {

struct CheckResult {
    std::string name;
    bool pass = false;
    std::string detail;
};

/// Density clustering against a brute-force neighborhood-graph oracle
/// (dense distance matrix + union-find over core points). Requires exact
/// label equality on every instance.
CheckResult check_dbscan_oracle(int instances, int max_points, std::uint64_t seed);

/// Adjusted Rand index against a pair-counting oracle, exact to 1e-12.
CheckResult check_ari_oracle(int partitions, std::uint64_t seed);

/// Analytic gradients of every architecture against central finite
/// differences (h = 1e-5), relative tolerance 1e-4 per coordinate.
CheckResult check_gradient_finite_difference(int points_per_arch, std::uint64_t seed);

/// Reservoir inclusion frequencies within 3 binomial standard errors of
/// capacity/t for every item, over `trials` independent fills.
CheckResult check_reservoir_uniformity(int trials, int items, int capacity, std::uint64_t seed);

/// t-test and rank-sum p-values against Monte Carlo permutation oracles,
/// absolute tolerance 0.02 over `cases` random small samples.
CheckResult check_stat_tests_vs_permutation(int cases, std::uint64_t seed);

/// Full property suite at the standard instance counts.
std::vector<CheckResult> run_selfchecks();

}  // namespace driftnet
