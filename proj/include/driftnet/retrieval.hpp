#pragma once

#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/memory.hpp"

namespace driftnet {

enum class Measure { Entropy, HardLabelVariance, SoftLabelVariance, RegressionVariance };

// Outcome of one batch-level retrieval. Groups are the clustered labels in
// ascending order followed by one singleton pseudo-group per noise-labeled
// snapshot, so knowledge is reachable before a cluster forms.
struct RetrievalEvent {
    int chosen_group = -1;
    std::vector<int> group_labels;
    std::vector<double> uncertainties;          // parallel to group_labels
    Matrix prediction;                          // member-mean output for the batch
    int tasks_seen = 0;                         // filled by the caller
    int test_task = -1;                         // evaluation-only
    std::vector<std::vector<int>> group_member_tasks;  // evaluation-only
};

/// Batch-level disagreement across one group's member outputs: the per-input
/// value, averaged over the batch rows. Variance measures use the population
/// convention and are exactly 0 for a single member.
double uncertainty(const std::vector<Matrix>& member_outputs, Measure measure);

/// Evaluates every group on x_test, picks the minimum-uncertainty group
/// (ties to the smallest label) and returns its member-mean prediction
/// (probability rows renormalized for classifiers).
RetrievalEvent retrieve(const KnowledgeBase& kb, const Matrix& x_test, Measure measure);

}  // namespace driftnet
