#include "driftnet/memory.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "driftnet/errors.hpp"
#include "driftnet/numkernel.hpp"

namespace driftnet {

void ReservoirBuffer::update(const Batch& batch, long t, RandomSource& rng) {
    if (slots_.size() < capacity_) {
        slots_.push_back(batch);
        return;
    }
    const std::uint64_t i = rng.uniform_below(static_cast<std::uint64_t>(t));
    if (i < capacity_) slots_[static_cast<std::size_t>(i)] = batch;
}

std::vector<int> dbscan(const Matrix& points, double eps, int min_pts, Metric metric) {
    const std::size_t n = points.rows();
    std::vector<int> labels(n, -1);
    if (n == 0) return labels;
    if (eps <= 0.0) throw std::invalid_argument("dbscan: eps must be > 0");

    auto distance = [&](std::size_t a, std::size_t b) {
        if (metric == Metric::Cosine) return cosine_distance(points.row(a), points.row(b));
        double d2 = 0.0;
        for (std::size_t j = 0; j < points.cols(); ++j) {
            const double d = points(a, j) - points(b, j);
            d2 += d * d;
        }
        return std::sqrt(d2);
    };

    // Neighborhoods use a strict d < eps. With cosine distance the grouping
    // features can be exactly orthogonal 0-1 vectors (distance exactly 1);
    // those must not read as neighbors at eps = 1.
    std::vector<std::vector<std::size_t>> nbrs(n);
    for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b)
            if (distance(a, b) < eps) {
                nbrs[a].push_back(b);
                nbrs[b].push_back(a);
            }

    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i)
        core[i] = nbrs[i].size() + 1 >= static_cast<std::size_t>(min_pts);

    // Connected components over core points, explored in index order.
    std::vector<int> component(n, -1);
    int next = 0;
    for (std::size_t i = 0; i < n; ++i) {
        if (!core[i] || component[i] != -1) continue;
        const int comp = next++;
        std::deque<std::size_t> queue{i};
        component[i] = comp;
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (std::size_t v : nbrs[u]) {
                if (!core[v] || component[v] != -1) continue;
                component[v] = comp;
                queue.push_back(v);
            }
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) {
            labels[i] = component[i];
            continue;
        }
        for (std::size_t v : nbrs[i]) {  // ascending, so smallest core neighbor wins
            if (core[v]) {
                labels[i] = component[v];
                break;
            }
        }
    }

    // Renumber clusters by smallest member index.
    std::map<int, int> renumber;
    for (std::size_t i = 0; i < n; ++i)
        if (labels[i] >= 0 && !renumber.contains(labels[i]))
            renumber[labels[i]] = static_cast<int>(renumber.size());
    for (int& l : labels)
        if (l >= 0) l = renumber[l];
    return labels;
}

void KnowledgeBase::add_snapshot(std::span<const double> params, long step, int hidden_task) {
    if (!snapshots_.empty() && step <= snapshots_.back().step)
        throw std::invalid_argument("add_snapshot: step must increase");
    if (params.size() != prototype_.param_count())
        throw std::invalid_argument("add_snapshot: parameter size mismatch");
    snapshots_.push_back({std::vector<double>(params.begin(), params.end()), step, hidden_task});
    groups_.push_back(-1);
}

Model KnowledgeBase::member_model(std::size_t i) const {
    Model m = prototype_;
    m.set_params(snapshots_.at(i).params);
    return m;
}

Matrix KnowledgeBase::performance_vectors(const ReservoirBuffer& buffer, PvMode mode,
                                          double tau) const {
    if (buffer.empty()) throw InsufficientData("performance_vectors: buffer is empty");
    const Criterion crit = prototype_.default_criterion();
    Matrix pv(snapshots_.size(), buffer.size());
    Model scratch = prototype_;
    for (std::size_t i = 0; i < snapshots_.size(); ++i) {
        scratch.set_params(snapshots_[i].params);
        for (std::size_t j = 0; j < buffer.size(); ++j) {
            const Batch& b = buffer.batch(j);
            const double value = criterion_value(crit, scratch.predict(b.inputs), b.labels);
            pv(i, j) = (mode == PvMode::Thresholded) ? (value > tau ? 1.0 : 0.0) : value;
        }
    }
    return pv;
}

void KnowledgeBase::encode(const ReservoirBuffer& buffer, double eps, int min_pts,
                           PvMode mode, double tau) {
    if (snapshots_.empty()) throw InsufficientData("encode: no snapshots");
    const Matrix pv = performance_vectors(buffer, mode, tau);
    groups_ = dbscan(pv, eps, min_pts, Metric::Cosine);
    enforce_capacity();
}

void KnowledgeBase::enforce_capacity() {
    if (per_group_cap_ <= 0) return;
    std::map<int, std::vector<std::size_t>> members;
    for (std::size_t i = 0; i < groups_.size(); ++i)
        if (groups_[i] >= 0) members[groups_[i]].push_back(i);

    std::vector<bool> evict(snapshots_.size(), false);
    for (auto& [label, idx] : members) {
        if (idx.size() <= static_cast<std::size_t>(per_group_cap_)) continue;
        // Snapshots are stored in step order, so the oldest come first.
        for (std::size_t k = 0; k + static_cast<std::size_t>(per_group_cap_) < idx.size(); ++k)
            evict[idx[k]] = true;
    }

    std::vector<ModelSnapshot> kept_snaps;
    std::vector<int> kept_groups;
    for (std::size_t i = 0; i < snapshots_.size(); ++i) {
        if (evict[i]) continue;
        kept_snaps.push_back(std::move(snapshots_[i]));
        kept_groups.push_back(groups_[i]);
    }
    snapshots_ = std::move(kept_snaps);
    groups_ = std::move(kept_groups);
}

void KnowledgeBase::set_groups(std::vector<int> groups) {
    if (groups.size() != snapshots_.size())
        throw std::invalid_argument("set_groups: size mismatch");
    groups_ = std::move(groups);
}

void KnowledgeBase::save(const std::filesystem::path& dir) const {
    std::filesystem::create_directories(dir);
    std::ofstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("KnowledgeBase::save: cannot open manifest");
    for (std::size_t i = 0; i < snapshots_.size(); ++i) {
        const std::string file = "snapshot_" + std::to_string(i) + ".bin";
        save_params({prototype_.arch_tag(), snapshots_[i].params}, dir / file);
        manifest << file << ' ' << snapshots_[i].step << ' ' << groups_[i] << ' '
                 << snapshots_[i].hidden_task << '\n';
    }
}

KnowledgeBase KnowledgeBase::load(const std::filesystem::path& dir, Model prototype) {
    std::ifstream manifest(dir / "manifest.txt");
    if (!manifest) throw IoError("KnowledgeBase::load: cannot open manifest");
    KnowledgeBase kb(std::move(prototype), 0);
    std::string line;
    while (std::getline(manifest, line)) {
        if (line.empty()) continue;
        std::istringstream row(line);
        std::string file;
        long step = 0;
        int group = -1, hidden = -1;
        if (!(row >> file >> step >> group >> hidden))
            throw IoError("KnowledgeBase::load: bad manifest line: " + line);
        const ParamVector pv = load_params(dir / file);
        if (pv.arch_tag != kb.prototype_.arch_tag())
            throw IoError("KnowledgeBase::load: architecture tag mismatch");
        kb.snapshots_.push_back({pv.values, step, hidden});
        kb.groups_.push_back(group);
    }
    return kb;
}

}  // namespace driftnet
