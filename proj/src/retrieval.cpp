#include "driftnet/retrieval.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <stdexcept>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

// argmax with ties broken toward the smallest class index
std::size_t hard_label(std::span<const double> row) {
    std::size_t best = 0;
    for (std::size_t k = 1; k < row.size(); ++k)
        if (row[k] > row[best]) best = k;
    return best;
}

double population_variance(const std::vector<double>& values) {
    const double n = static_cast<double>(values.size());
    double mean = 0.0;
    for (double v : values) mean += v;
    mean /= n;
    double var = 0.0;
    for (double v : values) var += (v - mean) * (v - mean);
    return var / n;
}

double row_entropy(std::span<const double> p) {
    double h = 0.0;
    for (double v : p)
        if (v > 1e-12) h -= v * std::log(v);
    return h;
}

}  // namespace

double uncertainty(const std::vector<Matrix>& member_outputs, Measure measure) {
    if (member_outputs.empty()) throw std::invalid_argument("uncertainty: no member outputs");
    const std::size_t rows = member_outputs[0].rows();
    const std::size_t cols = member_outputs[0].cols();
    for (const Matrix& m : member_outputs)
        if (m.rows() != rows || m.cols() != cols)
            throw std::invalid_argument("uncertainty: member output shapes differ");
    if (measure == Measure::RegressionVariance && cols != 1)
        throw std::invalid_argument("uncertainty: regression variance expects scalar outputs");

    const std::size_t members = member_outputs.size();
    double total = 0.0;
    std::vector<double> scratch(members);
    for (std::size_t i = 0; i < rows; ++i) {
        switch (measure) {
            case Measure::Entropy: {
                std::vector<double> mean(cols, 0.0);
                for (const Matrix& m : member_outputs)
                    for (std::size_t k = 0; k < cols; ++k) mean[k] += m(i, k);
                for (double& v : mean) v /= static_cast<double>(members);
                total += row_entropy(mean);
                break;
            }
            case Measure::HardLabelVariance: {
                for (std::size_t j = 0; j < members; ++j)
                    scratch[j] = static_cast<double>(hard_label(member_outputs[j].row(i)));
                total += population_variance(scratch);
                break;
            }
            case Measure::SoftLabelVariance: {
                double trace = 0.0;
                for (std::size_t k = 0; k < cols; ++k) {
                    for (std::size_t j = 0; j < members; ++j)
                        scratch[j] = member_outputs[j](i, k);
                    trace += population_variance(scratch);
                }
                total += trace;
                break;
            }
            case Measure::RegressionVariance: {
                for (std::size_t j = 0; j < members; ++j) scratch[j] = member_outputs[j](i, 0);
                total += population_variance(scratch);
                break;
            }
        }
    }
    return total / static_cast<double>(rows);
}

RetrievalEvent retrieve(const KnowledgeBase& kb, const Matrix& x_test, Measure measure) {
    if (kb.empty()) throw NoKnowledge("retrieve: knowledge base is empty");

    // Clustered groups by ascending label. Noise-labeled snapshots form
    // singleton pseudo-groups only while no cluster exists yet (their
    // variance is identically zero, so once real groups form they would
    // always win the argmin).
    std::map<int, std::vector<std::size_t>> clustered;
    std::vector<std::size_t> noise;
    const auto& groups = kb.groups();
    for (std::size_t i = 0; i < kb.size(); ++i) {
        if (groups[i] >= 0)
            clustered[groups[i]].push_back(i);
        else
            noise.push_back(i);
    }
    std::vector<std::pair<int, std::vector<std::size_t>>> all_groups(clustered.begin(),
                                                                     clustered.end());
    if (all_groups.empty()) {
        int next_label = 0;
        for (std::size_t i : noise) all_groups.push_back({next_label++, {i}});
    }

    RetrievalEvent event;
    const bool classification = kb.prototype().arch() != Arch::LinearRegression;
    std::size_t best = 0;
    std::vector<Matrix> best_outputs;
    for (std::size_t g = 0; g < all_groups.size(); ++g) {
        std::vector<Matrix> outputs;
        outputs.reserve(all_groups[g].second.size());
        std::vector<int> member_tasks;
        for (std::size_t idx : all_groups[g].second) {
            outputs.push_back(kb.member_model(idx).predict(x_test));
            member_tasks.push_back(kb.snapshots()[idx].hidden_task);
        }
        const double u = uncertainty(outputs, measure);
        event.group_labels.push_back(all_groups[g].first);
        event.uncertainties.push_back(u);
        event.group_member_tasks.push_back(std::move(member_tasks));
        if (g == 0 || u < event.uncertainties[best]) {
            best = g;
            best_outputs = std::move(outputs);
        }
    }

    event.chosen_group = event.group_labels[best];
    Matrix mean(x_test.rows(), best_outputs[0].cols());
    for (const Matrix& m : best_outputs)
        for (std::size_t i = 0; i < mean.data().size(); ++i) mean.data()[i] += m.data()[i];
    for (double& v : mean.data()) v /= static_cast<double>(best_outputs.size());
    if (classification) {
        for (std::size_t i = 0; i < mean.rows(); ++i) {
            double sum = 0.0;
            for (double v : mean.row(i)) sum += v;
            if (sum > 0.0)
                for (double& v : mean.row(i)) v /= sum;
        }
    }
    event.prediction = std::move(mean);
    return event;
}

}  // namespace driftnet
