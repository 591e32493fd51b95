#pragma once

#include <map>
#include <span>
#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/numkernel.hpp"
#include "driftnet/retrieval.hpp"

namespace driftnet {

/// Fraction of exact matches between predicted and true class indices.
double test_accuracy(const std::vector<int>& predictions, const std::vector<int>& labels);

struct RetrievalAccuracy {
    std::map<int, double> per_task;
    double overall = 0.0;  // mean of per-task accuracies
};

/// An event succeeds iff a strict majority of the chosen group's members
/// carry the event's test-task id.
RetrievalAccuracy retrieval_accuracy(const std::vector<RetrievalEvent>& events);

/// Adjusted Rand index between two labelings of the same elements, in [-1, 1].
/// When both partitions are trivial (denominator zero): 1 if the partitions
/// are identical, else 0.
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);

// Feature snapshots of a fixed probe-input set along a training trajectory.
// snapshots[k] holds the (inputs x q) features at time k+1; reference_time t0
// is 1-based and must leave at least two later time points.
struct DriftTrace {
    int t0 = 0;
    std::vector<Matrix> snapshots;
};

/// Rows (z_t(x) - z_t0(x)) / |z_t0(x)| for all t > t0, dropping inputs whose
/// reference feature norm is below 1e-12. Throws DegenerateTrace if nothing
/// remains.
Matrix drift_normalized(const DriftTrace& trace);

/// Participation-ratio ceiling of a spectrum: ceil((sum s)^2 / sum s^2).
int effective_dimension(const Spectrum& spectrum);

/// PCA on normalized drifts -> effective dimension d -> project raw drifts
/// onto the d leading components -> per-input covariance trace over time ->
/// mean over probe inputs. Returns 0 when features never move.
double drift_rate(const DriftTrace& trace);

struct TestResult {
    double statistic = 0.0;
    double p_value = 1.0;  // two-sided
};

/// Pooled two-sample t-test, df = n1 + n2 - 2, p via the regularized
/// incomplete beta function. Zero pooled variance degenerates to p = 1 when
/// the means are equal, 0 otherwise.
TestResult t_test(std::span<const double> x, std::span<const double> y);

/// Rank-sum test with mid-ranks for ties; the statistic is min(U, n1*n2 - U);
/// two-sided p via the tie-corrected normal approximation with continuity
/// correction.
TestResult mann_whitney_u(std::span<const double> x, std::span<const double> y);

/// Spearman rank correlation (mid-ranks for ties).
double spearman(std::span<const double> x, std::span<const double> y);

/// Regularized incomplete beta function I_x(a, b).
double incomplete_beta(double a, double b, double x);

}  // namespace driftnet
