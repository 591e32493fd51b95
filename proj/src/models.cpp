#include "driftnet/models.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include "driftnet/errors.hpp"

namespace driftnet {

namespace {

constexpr double kProbFloor = 1e-12;

const char* tag_for(Arch a) {
    switch (a) {
        case Arch::LinearRegression: return "linear-regression";
        case Arch::SoftmaxLinear: return "softmax-linear";
        case Arch::MlpOneHidden: return "mlp-1h";
        case Arch::LoraLinear: return "lora-linear";
    }
    return "unknown";
}

void softmax_rows(Matrix& logits) {
    for (std::size_t i = 0; i < logits.rows(); ++i) {
        auto row = logits.row(i);
        double mx = row[0];
        for (double v : row) mx = std::max(mx, v);
        double sum = 0.0;
        for (double& v : row) {
            v = std::exp(v - mx);
            sum += v;
        }
        for (double& v : row) v /= sum;
    }
}

// logits = inputs * W + broadcast bias, with W as (p x c) segment.
Matrix affine(const Matrix& inputs, std::span<const double> w, std::span<const double> b,
              std::size_t c) {
    const std::size_t n = inputs.rows();
    const std::size_t p = inputs.cols();
    Matrix out(n, c);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t k = 0; k < c; ++k) out(i, k) = b[k];
        for (std::size_t j = 0; j < p; ++j) {
            const double x = inputs(i, j);
            if (x == 0.0) continue;
            for (std::size_t k = 0; k < c; ++k) out(i, k) += x * w[j * c + k];
        }
    }
    return out;
}

int label_index(double label, std::size_t classes) {
    const int y = static_cast<int>(label);
    if (y < 0 || static_cast<std::size_t>(y) >= classes)
        throw std::invalid_argument("label index out of range");
    return y;
}

void append_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void append_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint32_t read_u32(std::span<const std::uint8_t> b, std::size_t& pos) {
    if (pos + 4 > b.size()) throw std::invalid_argument("decode_params: truncated");
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[pos + i]) << (8 * i);
    pos += 4;
    return v;
}

std::uint64_t read_u64(std::span<const std::uint8_t> b, std::size_t& pos) {
    if (pos + 8 > b.size()) throw std::invalid_argument("decode_params: truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[pos + i]) << (8 * i);
    pos += 8;
    return v;
}

}  // namespace

std::vector<std::uint8_t> encode_params(const ParamVector& pv) {
    std::vector<std::uint8_t> out;
    append_u32(out, static_cast<std::uint32_t>(pv.arch_tag.size()));
    out.insert(out.end(), pv.arch_tag.begin(), pv.arch_tag.end());
    append_u64(out, pv.values.size());
    for (double v : pv.values) append_u64(out, std::bit_cast<std::uint64_t>(v));
    return out;
}

ParamVector decode_params(std::span<const std::uint8_t> bytes) {
    std::size_t pos = 0;
    const std::uint32_t tag_len = read_u32(bytes, pos);
    if (pos + tag_len > bytes.size()) throw std::invalid_argument("decode_params: truncated tag");
    ParamVector pv;
    pv.arch_tag.assign(reinterpret_cast<const char*>(bytes.data() + pos), tag_len);
    pos += tag_len;
    const std::uint64_t n = read_u64(bytes, pos);
    pv.values.resize(n);
    for (std::uint64_t i = 0; i < n; ++i)
        pv.values[i] = std::bit_cast<double>(read_u64(bytes, pos));
    return pv;
}

void save_params(const ParamVector& pv, const std::filesystem::path& file) {
    const auto bytes = encode_params(pv);
    std::ofstream out(file, std::ios::binary);
    if (!out) throw IoError("save_params: cannot open " + file.string());
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
}

ParamVector load_params(const std::filesystem::path& file) {
    std::ifstream in(file, std::ios::binary);
    if (!in) throw IoError("load_params: cannot open " + file.string());
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());
    return decode_params(bytes);
}

Model Model::linear_regression(std::size_t input_dim) {
    Model m;
    m.arch_ = Arch::LinearRegression;
    m.arch_tag_ = tag_for(m.arch_);
    m.input_dim_ = input_dim;
    m.output_dim_ = 1;
    m.layout_ = {{"bias", 0, 1, 1}, {"weights", 1, input_dim, 1}};
    m.params_.assign(1 + input_dim, 0.0);
    return m;
}

Model Model::softmax_linear(std::size_t input_dim, std::size_t classes, RandomSource& rng) {
    Model m;
    m.arch_ = Arch::SoftmaxLinear;
    m.arch_tag_ = tag_for(m.arch_);
    m.input_dim_ = input_dim;
    m.output_dim_ = classes;
    m.layout_ = {{"w", 0, input_dim, classes}, {"b", input_dim * classes, 1, classes}};
    m.params_.assign(input_dim * classes + classes, 0.0);
    const double std = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (std::size_t i = 0; i < input_dim * classes; ++i) m.params_[i] = rng.normal(0.0, std);
    return m;
}

Model Model::mlp_one_hidden(std::size_t input_dim, std::size_t hidden, std::size_t classes,
                            double dropout_p, RandomSource& rng) {
    if (dropout_p < 0.0 || dropout_p > 1.0)
        throw std::invalid_argument("mlp_one_hidden: dropout_p outside [0, 1]");
    Model m;
    m.arch_ = Arch::MlpOneHidden;
    m.arch_tag_ = tag_for(m.arch_);
    m.input_dim_ = input_dim;
    m.output_dim_ = classes;
    m.hidden_ = hidden;
    m.dropout_p_ = dropout_p;
    std::size_t off = 0;
    m.layout_.push_back({"w1", off, input_dim, hidden});
    off += input_dim * hidden;
    m.layout_.push_back({"b1", off, 1, hidden});
    off += hidden;
    m.layout_.push_back({"w2", off, hidden, classes});
    off += hidden * classes;
    m.layout_.push_back({"b2", off, 1, classes});
    off += classes;
    m.params_.assign(off, 0.0);
    const double std1 = 1.0 / std::sqrt(static_cast<double>(input_dim));
    for (std::size_t i = 0; i < input_dim * hidden; ++i) m.params_[i] = rng.normal(0.0, std1);
    const double std2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    const std::size_t w2_off = m.layout_[2].offset;
    for (std::size_t i = 0; i < hidden * classes; ++i)
        m.params_[w2_off + i] = rng.normal(0.0, std2);
    return m;
}

Model Model::lora_linear(Matrix frozen_base, std::size_t rank, double alpha,
                         RandomSource& rng) {
    const std::size_t out_dim = frozen_base.rows();
    const std::size_t in_dim = frozen_base.cols();
    if (rank > std::min(out_dim, in_dim))
        throw std::invalid_argument("lora_linear: rank exceeds min(m, n)");
    Model m;
    m.arch_ = Arch::LoraLinear;
    m.arch_tag_ = tag_for(m.arch_);
    m.input_dim_ = in_dim;
    m.output_dim_ = out_dim;
    m.lora_rank_ = rank;
    m.lora_alpha_ = alpha;
    m.frozen_base_ = std::move(frozen_base);
    m.layout_ = {{"a", 0, rank, in_dim}, {"b", rank * in_dim, out_dim, rank}};
    m.params_.assign(rank * in_dim + out_dim * rank, 0.0);
    // A gets the fan-in init, B starts at zero so the merged map equals W0.
    const double std = 1.0 / std::sqrt(static_cast<double>(in_dim));
    for (std::size_t i = 0; i < rank * in_dim; ++i) m.params_[i] = rng.normal(0.0, std);
    return m;
}

void Model::set_params(std::span<const double> values) {
    if (values.size() != params_.size())
        throw std::invalid_argument("set_params: size mismatch");
    params_.assign(values.begin(), values.end());
}

std::span<const double> Model::segment(std::size_t idx) const {
    const LayerSpec& s = layout_[idx];
    return {params_.data() + s.offset, s.size()};
}

Matrix Model::features(const Matrix& inputs) const {
    if (inputs.cols() != input_dim_)
        throw std::invalid_argument("features: input dimension mismatch");
    switch (arch_) {
        case Arch::LinearRegression: {
            Matrix out(inputs.rows(), input_dim_);
            auto w = segment(1);
            for (std::size_t i = 0; i < inputs.rows(); ++i)
                for (std::size_t j = 0; j < input_dim_; ++j) out(i, j) = w[j] * inputs(i, j);
            return out;
        }
        case Arch::SoftmaxLinear:
            return affine(inputs, segment(0), segment(1), output_dim_);
        case Arch::MlpOneHidden: {
            Matrix h = affine(inputs, segment(0), segment(1), hidden_);
            for (double& v : h.data()) v = std::max(v, 0.0);
            return h;
        }
        case Arch::LoraLinear: {
            const std::size_t r = lora_rank_;
            Matrix a(r, input_dim_), b(output_dim_, r);
            std::copy_n(segment(0).begin(), a.data().size(), a.data().begin());
            std::copy_n(segment(1).begin(), b.data().size(), b.data().begin());
            const Matrix merged = lora_merge(frozen_base_, a, b, lora_alpha_);
            return matmul(inputs, transposed(merged));
        }
    }
    throw std::logic_error("features: unknown architecture");
}

Matrix Model::predict(const Matrix& inputs) const {
    if (inputs.cols() != input_dim_)
        throw std::invalid_argument("predict: input dimension mismatch");
    switch (arch_) {
        case Arch::LinearRegression: {
            Matrix out(inputs.rows(), 1);
            const double bias = params_[0];
            auto w = segment(1);
            for (std::size_t i = 0; i < inputs.rows(); ++i) {
                double v = bias;
                for (std::size_t j = 0; j < input_dim_; ++j) v += w[j] * inputs(i, j);
                out(i, 0) = v;
            }
            return out;
        }
        case Arch::SoftmaxLinear: {
            Matrix logits = affine(inputs, segment(0), segment(1), output_dim_);
            softmax_rows(logits);
            return logits;
        }
        case Arch::MlpOneHidden: {
            Matrix h = features(inputs);
            Matrix logits = affine(h, segment(2), segment(3), output_dim_);
            softmax_rows(logits);
            return logits;
        }
        case Arch::LoraLinear: {
            Matrix logits = features(inputs);
            softmax_rows(logits);
            return logits;
        }
    }
    throw std::logic_error("predict: unknown architecture");
}

std::vector<double> Model::gradient(const Batch& batch, Criterion crit, RandomSource* rng,
                                    bool dropout_active) const {
    const Matrix& x = batch.inputs;
    const std::size_t n = x.rows();
    if (x.cols() != input_dim_) throw std::invalid_argument("gradient: input dimension mismatch");
    if (batch.labels.size() != n) throw std::invalid_argument("gradient: label count mismatch");
    const bool is_regression = arch_ == Arch::LinearRegression;
    if (is_regression && crit != Criterion::Mse)
        throw std::invalid_argument("gradient: regression model requires mse");
    if (!is_regression && crit != Criterion::CrossEntropy)
        throw std::invalid_argument("gradient: classifier requires cross-entropy");

    std::vector<double> grad(params_.size(), 0.0);
    const double inv_n = 1.0 / static_cast<double>(n);

    switch (arch_) {
        case Arch::LinearRegression: {
            const Matrix pred = predict(x);
            auto w_spec = layout_[1];
            for (std::size_t i = 0; i < n; ++i) {
                const double e = 2.0 * inv_n * (pred(i, 0) - batch.labels[i]);
                grad[0] += e;
                for (std::size_t j = 0; j < input_dim_; ++j)
                    grad[w_spec.offset + j] += e * x(i, j);
            }
            return grad;
        }
        case Arch::SoftmaxLinear: {
            Matrix p = predict(x);
            for (std::size_t i = 0; i < n; ++i)
                p(i, static_cast<std::size_t>(label_index(batch.labels[i], output_dim_))) -= 1.0;
            // dW = X^T dlogits / n, db = colsum(dlogits) / n
            const std::size_t c = output_dim_;
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < c; ++k) {
                    const double d = p(i, k) * inv_n;
                    grad[input_dim_ * c + k] += d;
                    for (std::size_t j = 0; j < input_dim_; ++j)
                        grad[j * c + k] += x(i, j) * d;
                }
            return grad;
        }
        case Arch::MlpOneHidden: {
            const std::size_t h = hidden_;
            const std::size_t c = output_dim_;
            Matrix pre = affine(x, segment(0), segment(1), h);
            Matrix act = pre;
            for (double& v : act.data()) v = std::max(v, 0.0);

            Matrix mask(n, h, 1.0);  // multiplicative factor incl. inverted-dropout scale
            if (dropout_active && dropout_p_ > 0.0) {
                if (rng == nullptr)
                    throw std::invalid_argument("gradient: dropout requires an rng");
                const double keep = 1.0 - dropout_p_;
                const double scale = keep > 0.0 ? 1.0 / keep : 0.0;
                for (double& v : mask.data())
                    v = (keep > 0.0 && rng->uniform() >= dropout_p_) ? scale : 0.0;
                for (std::size_t i = 0; i < n; ++i)
                    for (std::size_t j = 0; j < h; ++j) act(i, j) *= mask(i, j);
            }

            Matrix logits = affine(act, segment(2), segment(3), c);
            softmax_rows(logits);
            for (std::size_t i = 0; i < n; ++i)
                logits(i, static_cast<std::size_t>(label_index(batch.labels[i], c))) -= 1.0;

            const std::size_t w1_off = layout_[0].offset;
            const std::size_t b1_off = layout_[1].offset;
            const std::size_t w2_off = layout_[2].offset;
            const std::size_t b2_off = layout_[3].offset;
            auto w2 = segment(2);
            for (std::size_t i = 0; i < n; ++i) {
                for (std::size_t k = 0; k < c; ++k) {
                    const double d = logits(i, k) * inv_n;
                    grad[b2_off + k] += d;
                    for (std::size_t j = 0; j < h; ++j) grad[w2_off + j * c + k] += act(i, j) * d;
                }
                for (std::size_t j = 0; j < h; ++j) {
                    if (pre(i, j) <= 0.0) continue;
                    double dh = 0.0;
                    for (std::size_t k = 0; k < c; ++k)
                        dh += logits(i, k) * inv_n * w2[j * c + k];
                    dh *= mask(i, j);
                    if (dh == 0.0) continue;
                    grad[b1_off + j] += dh;
                    for (std::size_t a = 0; a < input_dim_; ++a)
                        grad[w1_off + a * hidden_ + j] += x(i, a) * dh;
                }
            }
            return grad;
        }
        case Arch::LoraLinear: {
            const std::size_t r = lora_rank_;
            const std::size_t c = output_dim_;
            Matrix p = predict(x);
            for (std::size_t i = 0; i < n; ++i)
                p(i, static_cast<std::size_t>(label_index(batch.labels[i], c))) -= 1.0;
            // dW' = dlogits^T X / n  (c x p), then chain through W' = W0 + a*B*A.
            Matrix dw(c, input_dim_);
            for (std::size_t i = 0; i < n; ++i)
                for (std::size_t k = 0; k < c; ++k) {
                    const double d = p(i, k) * inv_n;
                    if (d == 0.0) continue;
                    for (std::size_t j = 0; j < input_dim_; ++j) dw(k, j) += d * x(i, j);
                }
            Matrix a_mat(r, input_dim_), b_mat(c, r);
            std::copy_n(segment(0).begin(), a_mat.data().size(), a_mat.data().begin());
            std::copy_n(segment(1).begin(), b_mat.data().size(), b_mat.data().begin());
            const Matrix da = matmul(transposed(b_mat), dw);  // r x p
            const Matrix db = matmul(dw, transposed(a_mat));  // c x r
            const std::size_t a_off = layout_[0].offset;
            const std::size_t b_off = layout_[1].offset;
            for (std::size_t i = 0; i < da.data().size(); ++i)
                grad[a_off + i] = lora_alpha_ * da.data()[i];
            for (std::size_t i = 0; i < db.data().size(); ++i)
                grad[b_off + i] = lora_alpha_ * db.data()[i];
            return grad;
        }
    }
    throw std::logic_error("gradient: unknown architecture");
}

double criterion_value(Criterion crit, const Matrix& predictions,
                       const std::vector<double>& labels) {
    const std::size_t n = predictions.rows();
    if (labels.size() != n) throw std::invalid_argument("criterion: shape mismatch");
    if (n == 0) throw std::invalid_argument("criterion: empty batch");
    double total = 0.0;
    if (crit == Criterion::Mse) {
        if (predictions.cols() != 1)
            throw std::invalid_argument("criterion: mse expects n x 1 predictions");
        for (std::size_t i = 0; i < n; ++i) {
            const double d = labels[i] - predictions(i, 0);
            total += d * d;
        }
    } else {
        for (std::size_t i = 0; i < n; ++i) {
            const int y = label_index(labels[i], predictions.cols());
            const double p =
                std::clamp(predictions(i, static_cast<std::size_t>(y)), kProbFloor, 1.0);
            total -= std::log(p);
        }
    }
    return total / static_cast<double>(n);
}

Matrix lora_merge(const Matrix& w0, const Matrix& a, const Matrix& b, double alpha) {
    const std::size_t m = w0.rows();
    const std::size_t n = w0.cols();
    const std::size_t r = a.rows();
    if (a.cols() != n || b.rows() != m || b.cols() != r)
        throw std::invalid_argument("lora_merge: shape mismatch");
    if (r > std::min(m, n)) throw std::invalid_argument("lora_merge: rank exceeds min(m, n)");
    Matrix merged = w0;
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t k = 0; k < r; ++k) {
            const double bik = alpha * b(i, k);
            if (bik == 0.0) continue;
            for (std::size_t j = 0; j < n; ++j) merged(i, j) += bik * a(k, j);
        }
    return merged;
}

}  // namespace driftnet
