#include "driftnet/explorer.hpp"

#include <cmath>
#include <stdexcept>

namespace driftnet {

double lr_at(const LrSchedule& schedule, long step, long steps_per_epoch) {
    if (steps_per_epoch < 1) throw std::invalid_argument("lr_at: steps_per_epoch must be >= 1");
    if (schedule.kind == LrSchedule::Kind::Constant) return schedule.base;
    const double cycle_len =
        static_cast<double>(steps_per_epoch) / std::max(1, schedule.cycles_per_epoch);
    const double pos = std::fmod(static_cast<double>(step), cycle_len) / cycle_len;
    const double tri = 1.0 - std::abs(2.0 * pos - 1.0);
    return schedule.lo + (schedule.hi - schedule.lo) * tri;
}

Model noisy_update(const Model& model, const Batch& batch, const NoiseSpec& spec,
                   double lr, RandomSource& rng) {
    if (lr <= 0.0) throw std::invalid_argument("noisy_update: lr must be > 0");

    const Criterion crit = model.default_criterion();
    const bool dropout_active = spec.type == NoiseSpec::Type::Dropout;

    std::vector<double> grad;
    if (spec.type == NoiseSpec::Type::Input && spec.sigma > 0.0) {
        Batch noised = batch;
        for (double& v : noised.inputs.data()) v += rng.normal(0.0, spec.sigma);
        grad = model.gradient(noised, crit, &rng, dropout_active);
    } else {
        grad = model.gradient(batch, crit, &rng, dropout_active);
    }

    if (spec.type == NoiseSpec::Type::Gradient && spec.sigma > 0.0) {
        if (spec.relative_gradient_noise) {
            for (const LayerSpec& layer : model.layout()) {
                double norm2 = 0.0;
                for (std::size_t i = 0; i < layer.size(); ++i) {
                    const double g = grad[layer.offset + i];
                    norm2 += g * g;
                }
                const double std =
                    spec.sigma * std::sqrt(norm2 / static_cast<double>(layer.size()));
                if (std == 0.0) continue;
                for (std::size_t i = 0; i < layer.size(); ++i)
                    grad[layer.offset + i] += rng.normal(0.0, std);
            }
        } else {
            for (double& g : grad) g += rng.normal(0.0, spec.sigma);
        }
    }

    std::vector<double> params(model.params().begin(), model.params().end());
    for (std::size_t i = 0; i < params.size(); ++i) params[i] -= lr * grad[i];
    Model updated = model;
    updated.set_params(params);
    return updated;
}

}  // namespace driftnet
