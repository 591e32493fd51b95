#include "driftnet/selfcheck.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <sstream>

#include "driftnet/analysis.hpp"
#include "driftnet/memory.hpp"
#include "driftnet/models.hpp"
#include "driftnet/numkernel.hpp"
#include "driftnet/random.hpp"

namespace driftnet {

namespace {

// Independent DBSCAN route: dense adjacency, union-find over core points,
// borders attached to their smallest-index core neighbor.
std::vector<int> dbscan_oracle(const Matrix& pts, double eps, int min_pts, Metric metric) {
    const std::size_t n = pts.rows();
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;

    std::vector<std::vector<bool>> adj(n, std::vector<bool>(n, false));
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
            double d;
            if (metric == Metric::Cosine) {
                d = cosine_distance(pts.row(a), pts.row(b));
            } else {
                double s = 0.0;
                for (std::size_t j = 0; j < pts.cols(); ++j) {
                    const double t = pts(a, j) - pts(b, j);
                    s += t * t;
                }
                d = std::sqrt(s);
            }
            adj[a][b] = adj[b][a] = d < eps;
        }

    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 1;
        for (std::size_t j = 0; j < n; ++j)
            if (j != i && adj[i][j]) ++count;
        core[i] = count >= static_cast<std::size_t>(min_pts);
    }

    std::vector<std::size_t> parent(n);
    std::iota(parent.begin(), parent.end(), std::size_t{0});
    auto find = [&](std::size_t x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (core[a] && core[b] && adj[a][b]) parent[find(a)] = find(b);

    // Root per point: own component for cores, smallest-index core neighbor
    // for borders, none otherwise. Components numbered by smallest member.
    std::vector<std::size_t> roots(n, n);
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            roots[i] = find(i);
        } else {
            for (std::size_t j = 0; j < n; ++j)
                if (j != i && adj[i][j] && core[j]) {
                    roots[i] = find(j);
                    break;
                }
        }
    }
    int next = 0;
    std::map<std::size_t, int> final_id;
    for (std::size_t i = 0; i < n; ++i) {
        if (roots[i] == n) {
            labels[i] = -1;
            continue;
        }
        if (!final_id.contains(roots[i])) final_id[roots[i]] = next++;
        labels[i] = final_id[roots[i]];
    }
    return labels;
}

// Pair-counting route for the adjusted Rand index.
double ari_oracle(const std::vector<int>& a, const std::vector<int>& b) {
    const std::size_t n = a.size();
    double s11 = 0, s10 = 0, s01 = 0, s00 = 0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            const bool same_a = a[i] == a[j];
            const bool same_b = b[i] == b[j];
            if (same_a && same_b)
                ++s11;
            else if (same_a && !same_b)
                ++s10;
            else if (!same_a && same_b)
                ++s01;
            else
                ++s00;
        }
    const double denom = (s11 + s10) * (s10 + s00) + (s11 + s01) * (s01 + s00);
    if (denom == 0.0) {
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j)
                if ((a[i] == a[j]) != (b[i] == b[j])) return 0.0;
        return 1.0;
    }
    return 2.0 * (s11 * s00 - s10 * s01) / denom;
}

double permutation_p_mean_diff(const std::vector<double>& x, const std::vector<double>& y,
                               int permutations, RandomSource& rng) {
    auto mean = [](const std::vector<double>& v, std::size_t begin, std::size_t end) {
        double m = 0.0;
        for (std::size_t i = begin; i < end; ++i) m += v[i];
        return m / static_cast<double>(end - begin);
    };
    std::vector<double> pool(x);
    pool.insert(pool.end(), y.begin(), y.end());
    const std::size_t n1 = x.size();
    const double observed =
        std::abs(mean(pool, 0, n1) - mean(pool, n1, pool.size()));
    int extreme = 0;
    for (int b = 0; b < permutations; ++b) {
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.uniform_below(i)]);
        const double diff = std::abs(mean(pool, 0, n1) - mean(pool, n1, pool.size()));
        if (diff >= observed - 1e-12) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(permutations);
}

double u_center_distance(const std::vector<double>& pool, std::size_t n1) {
    // |U1 - n1 n2 / 2| computed from mid-ranks; extremeness of the rank-sum split.
    const std::size_t n = pool.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return pool[a] < pool[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && pool[order[j + 1]] == pool[order[i]]) ++j;
        const double rank = (static_cast<double>(i + j)) / 2.0 + 1.0;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    double r1 = 0.0;
    for (std::size_t k = 0; k < n1; ++k) r1 += ranks[k];
    const double n2 = static_cast<double>(n - n1);
    const double u1 =
        static_cast<double>(n1) * n2 + static_cast<double>(n1) * (static_cast<double>(n1) + 1.0) / 2.0 - r1;
    return std::abs(u1 - static_cast<double>(n1) * n2 / 2.0);
}

double permutation_p_rank(const std::vector<double>& x, const std::vector<double>& y,
                          int permutations, RandomSource& rng) {
    std::vector<double> pool(x);
    pool.insert(pool.end(), y.begin(), y.end());
    const double observed = u_center_distance(pool, x.size());
    int extreme = 0;
    for (int b = 0; b < permutations; ++b) {
        for (std::size_t i = pool.size(); i > 1; --i)
            std::swap(pool[i - 1], pool[rng.uniform_below(i)]);
        if (u_center_distance(pool, x.size()) >= observed - 1e-12) ++extreme;
    }
    return static_cast<double>(extreme) / static_cast<double>(permutations);
}

}  // namespace

CheckResult check_dbscan_oracle(int instances, int max_points, std::uint64_t seed) {
    RandomSource rng(seed, 0xDB5C);
    for (int inst = 0; inst < instances; ++inst) {
        const std::size_t n = 1 + rng.uniform_below(static_cast<std::uint64_t>(max_points));
        const std::size_t dim = 2 + rng.uniform_below(3);
        const int clumps = 1 + static_cast<int>(rng.uniform_below(4));
        Matrix pts(n, dim);
        std::vector<std::vector<double>> centers;
        for (int c = 0; c < clumps; ++c) {
            std::vector<double> center(dim);
            for (double& v : center) v = rng.normal(0.0, 3.0);
            centers.push_back(std::move(center));
        }
        for (std::size_t i = 0; i < n; ++i) {
            if (rng.uniform() < 0.15) {
                for (std::size_t j = 0; j < dim; ++j) pts(i, j) = rng.normal(0.0, 6.0);
            } else {
                const auto& c = centers[rng.uniform_below(centers.size())];
                for (std::size_t j = 0; j < dim; ++j) pts(i, j) = c[j] + rng.normal(0.0, 0.4);
            }
        }
        const Metric metric = (inst % 2 == 0) ? Metric::Euclidean : Metric::Cosine;
        const double eps = metric == Metric::Euclidean ? 0.3 + rng.uniform() * 1.5
                                                       : 0.05 + rng.uniform() * 0.8;
        const int min_pts = 2 + static_cast<int>(rng.uniform_below(4));

        const auto got = dbscan(pts, eps, min_pts, metric);
        const auto want = dbscan_oracle(pts, eps, min_pts, metric);
        if (got != want) {
            std::ostringstream detail;
            detail << "instance " << inst << " (n=" << n << ", eps=" << eps
                   << ", min_pts=" << min_pts << ") diverged from the oracle";
            return {"dbscan-vs-oracle", false, detail.str()};
        }
        if (n >= 2) {
            std::vector<int> a(got), b(want);
            if (adjusted_rand_index(a, b) != 1.0)
                return {"dbscan-vs-oracle", false, "label match but ARI != 1"};
        }
    }
    return {"dbscan-vs-oracle", true,
            std::to_string(instances) + " random instances matched exactly"};
}

CheckResult check_ari_oracle(int partitions, std::uint64_t seed) {
    RandomSource rng(seed, 0xA21);
    double worst = 0.0;
    for (int p = 0; p < partitions; ++p) {
        const std::size_t n = 2 + rng.uniform_below(29);
        const int ka = 1 + static_cast<int>(rng.uniform_below(6));
        const int kb = 1 + static_cast<int>(rng.uniform_below(6));
        std::vector<int> a(n), b(n);
        for (std::size_t i = 0; i < n; ++i) {
            a[i] = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(ka)));
            b[i] = static_cast<int>(rng.uniform_below(static_cast<std::uint64_t>(kb)));
        }
        const double got = adjusted_rand_index(a, b);
        const double want = ari_oracle(a, b);
        worst = std::max(worst, std::abs(got - want));
        if (std::abs(got - want) > 1e-12) {
            std::ostringstream detail;
            detail << "partition " << p << ": formula " << got << " vs pair-counting " << want;
            return {"ari-vs-oracle", false, detail.str()};
        }
    }
    std::ostringstream detail;
    detail << partitions << " partitions, max |diff| = " << worst;
    return {"ari-vs-oracle", true, detail.str()};
}

CheckResult check_gradient_finite_difference(int points_per_arch, std::uint64_t seed) {
    RandomSource rng(seed, 0xF0);
    const double h = 1e-5;
    double worst = 0.0;

    auto check_model = [&](Model model, Criterion crit, const char* name) -> CheckResult {
        const std::size_t batch_n = 5;
        for (int point = 0; point < points_per_arch; ++point) {
            Batch batch;
            batch.inputs = gaussian_matrix(rng, batch_n, model.input_dim(), 0.0, 1.0);
            batch.labels.resize(batch_n);
            for (double& v : batch.labels)
                v = crit == Criterion::Mse
                        ? rng.normal()
                        : static_cast<double>(rng.uniform_below(model.output_dim()));
            std::vector<double> params(model.param_count());
            for (double& v : params) v = rng.normal(0.0, 0.7);
            model.set_params(params);

            const std::vector<double> analytic = model.gradient(batch, crit);
            for (std::size_t i = 0; i < params.size(); ++i) {
                std::vector<double> shifted = params;
                shifted[i] = params[i] + h;
                model.set_params(shifted);
                const double up = criterion_value(crit, model.predict(batch.inputs), batch.labels);
                shifted[i] = params[i] - h;
                model.set_params(shifted);
                const double down =
                    criterion_value(crit, model.predict(batch.inputs), batch.labels);
                const double fd = (up - down) / (2.0 * h);
                const double err = std::abs(analytic[i] - fd) / (1.0 + std::abs(analytic[i]));
                worst = std::max(worst, err);
                if (err > 1e-4) {
                    std::ostringstream detail;
                    detail << name << " point " << point << " coord " << i << ": analytic "
                           << analytic[i] << " vs fd " << fd;
                    return {"gradient-vs-finite-difference", false, detail.str()};
                }
            }
            model.set_params(params);
        }
        return {"gradient-vs-finite-difference", true, ""};
    };

    RandomSource init = rng.derive(1);
    Matrix w0 = gaussian_matrix(init, 3, 4, 0.0, 0.5);
    const std::vector<std::pair<Model, Criterion>> cases = {
        {Model::linear_regression(3), Criterion::Mse},
        {Model::softmax_linear(4, 3, init), Criterion::CrossEntropy},
        {Model::mlp_one_hidden(4, 6, 3, 0.0, init), Criterion::CrossEntropy},
        {Model::lora_linear(w0, 2, 0.5, init), Criterion::CrossEntropy},
    };
    const char* names[] = {"linear-regression", "softmax-linear", "mlp-1h", "lora-linear"};
    for (std::size_t i = 0; i < cases.size(); ++i) {
        CheckResult r = check_model(cases[i].first, cases[i].second, names[i]);
        if (!r.pass) return r;
    }
    std::ostringstream detail;
    detail << "4 architectures x " << points_per_arch << " points, max rel err = " << worst;
    return {"gradient-vs-finite-difference", true, detail.str()};
}

CheckResult check_reservoir_uniformity(int trials, int items, int capacity, std::uint64_t seed) {
    RandomSource rng(seed, 0xB0FF);
    std::vector<long> included(static_cast<std::size_t>(items), 0);
    Batch tiny;
    tiny.inputs = Matrix(1, 1);
    tiny.labels = {0.0};
    for (int trial = 0; trial < trials; ++trial) {
        ReservoirBuffer buf(static_cast<std::size_t>(capacity));
        for (int t = 1; t <= items; ++t) {
            tiny.inputs(0, 0) = static_cast<double>(t - 1);
            tiny.step = t;
            buf.update(tiny, t, rng);
        }
        for (std::size_t s = 0; s < buf.size(); ++s)
            ++included[static_cast<std::size_t>(buf.batch(s).inputs(0, 0))];
    }
    const double p = static_cast<double>(capacity) / static_cast<double>(items);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(trials));
    double worst_z = 0.0;
    int worst_item = -1;
    for (int i = 0; i < items; ++i) {
        const double freq =
            static_cast<double>(included[static_cast<std::size_t>(i)]) / static_cast<double>(trials);
        const double z = std::abs(freq - p) / se;
        if (z > worst_z) {
            worst_z = z;
            worst_item = i;
        }
    }
    std::ostringstream detail;
    detail << "max |z| = " << worst_z << " at item " << worst_item << " (3-sigma bound)";
    return {"reservoir-uniformity", worst_z <= 3.0, detail.str()};
}

CheckResult check_stat_tests_vs_permutation(int cases, std::uint64_t seed) {
    RandomSource rng(seed, 0x57A7);
    constexpr int kPermutations = 20000;
    double worst_t = 0.0, worst_u = 0.0;
    for (int c = 0; c < cases; ++c) {
        const std::size_t n1 = 8 + rng.uniform_below(7);
        const std::size_t n2 = 8 + rng.uniform_below(7);
        const double shift = (c % 3 == 0) ? 0.0 : rng.uniform() * 1.2;
        std::vector<double> x(n1), y(n2);
        for (double& v : x) v = rng.normal();
        for (double& v : y) v = rng.normal(shift, 1.0);

        RandomSource perm_rng = rng.derive(static_cast<std::uint64_t>(c) + 17);
        const double p_t = t_test(x, y).p_value;
        const double p_t_perm = permutation_p_mean_diff(x, y, kPermutations, perm_rng);
        worst_t = std::max(worst_t, std::abs(p_t - p_t_perm));

        RandomSource perm_rng2 = rng.derive(static_cast<std::uint64_t>(c) + 9001);
        const double p_u = mann_whitney_u(x, y).p_value;
        const double p_u_perm = permutation_p_rank(x, y, kPermutations, perm_rng2);
        worst_u = std::max(worst_u, std::abs(p_u - p_u_perm));
    }
    std::ostringstream detail;
    detail << cases << " cases: max |t-test diff| = " << worst_t
           << ", max |rank-test diff| = " << worst_u << " (tolerance 0.02)";
    return {"stat-tests-vs-permutation", worst_t <= 0.02 && worst_u <= 0.02, detail.str()};
}

std::vector<CheckResult> run_selfchecks() {
    return {
        check_dbscan_oracle(200, 40, 20240817),
        check_ari_oracle(500, 811),
        check_gradient_finite_difference(20, 4242),
        check_reservoir_uniformity(20000, 1000, 10, 902),
        check_stat_tests_vs_permutation(50, 77),
    };
}

}  // namespace driftnet
