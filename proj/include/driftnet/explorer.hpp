#pragma once

#include "driftnet/models.hpp"
#include "driftnet/random.hpp"
#include "driftnet/tasks.hpp"

namespace driftnet {

// Noise injected into a single training step. sigma == 0 with Input or
// Gradient type degenerates to batch-only noise (no draws are consumed).
// dropout_p is the preset value applied to the model at construction time;
// the step itself only toggles whether dropout masks are sampled.
struct NoiseSpec {
    enum class Type { None, BatchOnly, Input, Gradient, Dropout };
    Type type = Type::None;
    double sigma = 0.0;
    bool relative_gradient_noise = false;  // per-layer std sigma*|g_layer|/sqrt(layer dim)
    double dropout_p = 0.0;

    static NoiseSpec none() { return {}; }
    static NoiseSpec gradient(double sigma, bool relative = false) {
        return {Type::Gradient, sigma, relative, 0.0};
    }
    static NoiseSpec input(double sigma) { return {Type::Input, sigma, false, 0.0}; }
    static NoiseSpec dropout(double p) { return {Type::Dropout, 0.0, false, p}; }
};

struct LrSchedule {
    enum class Kind { Constant, Cyclic };
    Kind kind = Kind::Constant;
    double base = 1e-3;
    double lo = 1e-5;
    double hi = 1e-2;
    int cycles_per_epoch = 4;

    static LrSchedule constant(double lr) { return {Kind::Constant, lr, 0, 0, 0}; }
    static LrSchedule cyclic(double lo, double hi, int cycles_per_epoch) {
        return {Kind::Cyclic, lo, lo, hi, cycles_per_epoch};
    }
};

/// Learning rate at a 0-based global step. Cyclic schedules are triangle
/// waves that start and end each cycle at lo, peaking at hi mid-cycle.
double lr_at(const LrSchedule& schedule, long step, long steps_per_epoch);

/// One noisy SGD step: optional input noise before the gradient, optional
/// gradient noise after it, then theta <- theta - lr * g. The input batch is
/// not mutated; the updated model is returned.
Model noisy_update(const Model& model, const Batch& batch, const NoiseSpec& spec,
                   double lr, RandomSource& rng);

}  // namespace driftnet
