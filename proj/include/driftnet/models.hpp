#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "driftnet/matrix.hpp"
#include "driftnet/random.hpp"
#include "driftnet/tasks.hpp"

namespace driftnet {

enum class Arch { LinearRegression, SoftmaxLinear, MlpOneHidden, LoraLinear };
enum class Criterion { Mse, CrossEntropy };

struct LayerSpec {
    std::string name;
    std::size_t offset = 0;
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::size_t size() const { return rows * cols; }
};

// Flat parameter snapshot with an architecture tag; the binary codec below is
// the persistence format for stored minima.
struct ParamVector {
    std::string arch_tag;
    std::vector<double> values;
};

std::vector<std::uint8_t> encode_params(const ParamVector& pv);
ParamVector decode_params(std::span<const std::uint8_t> bytes);
void save_params(const ParamVector& pv, const std::filesystem::path& file);
ParamVector load_params(const std::filesystem::path& file);

// Value-like predictor with exact hand-computed gradients. predict/features
// never consume randomness; gradient consumes rng only when dropout is active.
class Model {
public:
    static Model linear_regression(std::size_t input_dim);
    static Model softmax_linear(std::size_t input_dim, std::size_t classes, RandomSource& rng);
    static Model mlp_one_hidden(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                                double dropout_p, RandomSource& rng);
    /// Softmax classifier over merged weights W0 + alpha * B * A; only A and B
    /// are trainable. frozen_base is (classes x input_dim).
    static Model lora_linear(Matrix frozen_base, std::size_t rank, double alpha,
                             RandomSource& rng);

    /// Regression: n x 1 predictions. Classification: n x c row-stochastic
    /// probabilities. Dropout is always disabled here.
    Matrix predict(const Matrix& inputs) const;

    /// Intermediate representation: post-activation hidden layer (MLP),
    /// pre-softmax logits (linear classifiers), or per-coordinate
    /// contributions w_j * x_j (regression).
    Matrix features(const Matrix& inputs) const;

    /// Exact gradient of the mean criterion over the batch. With
    /// dropout_active and dropout_p > 0, a fresh inverted-dropout mask is
    /// drawn from rng per row and differentiated through.
    std::vector<double> gradient(const Batch& batch, Criterion crit,
                                 RandomSource* rng = nullptr,
                                 bool dropout_active = false) const;

    Arch arch() const { return arch_; }
    const std::string& arch_tag() const { return arch_tag_; }
    Criterion default_criterion() const {
        return arch_ == Arch::LinearRegression ? Criterion::Mse : Criterion::CrossEntropy;
    }

    std::span<const double> params() const { return params_; }
    void set_params(std::span<const double> values);
    ParamVector param_vector() const { return {arch_tag_, params_}; }

    const std::vector<LayerSpec>& layout() const { return layout_; }
    std::size_t param_count() const { return params_.size(); }
    std::size_t input_dim() const { return input_dim_; }
    std::size_t output_dim() const { return output_dim_; }
    double dropout_p() const { return dropout_p_; }

private:
    Model() = default;
    std::span<const double> segment(std::size_t idx) const;

    Arch arch_ = Arch::LinearRegression;
    std::string arch_tag_;
    std::size_t input_dim_ = 0;
    std::size_t output_dim_ = 1;
    std::size_t hidden_ = 0;
    double dropout_p_ = 0.0;
    std::size_t lora_rank_ = 0;
    double lora_alpha_ = 0.0;
    Matrix frozen_base_;
    std::vector<LayerSpec> layout_;
    std::vector<double> params_;
};

/// Mean criterion value. MSE for n x 1 predictions against real labels;
/// cross-entropy for row-stochastic predictions against class-index labels,
/// with probabilities clamped to [1e-12, 1] before the log.
double criterion_value(Criterion crit, const Matrix& predictions,
                       const std::vector<double>& labels);

/// W0 + alpha * B * A. W0 is m x n, A is r x n, B is m x r, r <= min(m, n).
Matrix lora_merge(const Matrix& w0, const Matrix& a, const Matrix& b, double alpha);

}  // namespace driftnet
