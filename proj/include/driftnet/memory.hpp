#pragma once

#include <filesystem>
#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/models.hpp"
#include "driftnet/random.hpp"
#include "driftnet/tasks.hpp"

namespace driftnet {

// Capacity-bounded store of past batches where every item seen so far has
// inclusion probability capacity/t (uniform reservoir scheme).
class ReservoirBuffer {
public:
    explicit ReservoirBuffer(std::size_t capacity) : capacity_(capacity) {}

    /// t is the 1-based count of items seen so far, strictly increasing
    /// across calls.
    void update(const Batch& batch, long t, RandomSource& rng);

    std::size_t size() const { return slots_.size(); }
    std::size_t capacity() const { return capacity_; }
    bool empty() const { return slots_.empty(); }
    const Batch& batch(std::size_t i) const { return slots_[i]; }

private:
    std::size_t capacity_;
    std::vector<Batch> slots_;
};

struct ModelSnapshot {
    std::vector<double> params;
    long step = 0;
    int hidden_task = -1;  // evaluation-only; never read by the learner path
};

enum class PvMode { Raw, Thresholded };
enum class Metric { Cosine, Euclidean };

/// Density clustering: a core point has >= min_pts neighbors strictly within
/// eps (counting itself); clusters are connected components of core points
/// plus border points; everything else is labeled -1. Clusters are numbered
/// by smallest member index, border points join the cluster of their
/// smallest-index core neighbor, so labeling is deterministic.
std::vector<int> dbscan(const Matrix& points, double eps, int min_pts, Metric metric);

// Ordered snapshots of local minima plus their current grouping. groups()[i]
// is -1 for noise/ungrouped snapshots; re-encoding recomputes all labels
// against the current buffer.
class KnowledgeBase {
public:
    KnowledgeBase(Model prototype, int per_group_cap)
        : prototype_(std::move(prototype)), per_group_cap_(per_group_cap) {}

    /// Appends a snapshot; step must exceed the last stored step.
    void add_snapshot(std::span<const double> params, long step, int hidden_task = -1);

    /// Criterion of every snapshot on every buffered batch. Thresholded mode
    /// maps values to 1 if above tau else 0.
    Matrix performance_vectors(const ReservoirBuffer& buffer, PvMode mode, double tau) const;

    /// Recomputes performance vectors, reclusters them with cosine-distance
    /// density clustering, assigns groups, then enforces the per-group cap.
    void encode(const ReservoirBuffer& buffer, double eps, int min_pts, PvMode mode,
                double tau);

    /// Keeps the per-group-cap most recent snapshots per group; noise-labeled
    /// snapshots are exempt until the next encode.
    void enforce_capacity();

    std::size_t size() const { return snapshots_.size(); }
    bool empty() const { return snapshots_.empty(); }
    const std::vector<ModelSnapshot>& snapshots() const { return snapshots_; }
    const std::vector<int>& groups() const { return groups_; }
    void set_groups(std::vector<int> groups);
    const Model& prototype() const { return prototype_; }
    int per_group_cap() const { return per_group_cap_; }

    /// Prototype model loaded with snapshot i's parameters.
    Model member_model(std::size_t i) const;

    void save(const std::filesystem::path& dir) const;
    static KnowledgeBase load(const std::filesystem::path& dir, Model prototype);

private:
    Model prototype_;
    int per_group_cap_;
    std::vector<ModelSnapshot> snapshots_;
    std::vector<int> groups_;
};

}  // namespace driftnet
