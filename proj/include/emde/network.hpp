#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "emde/common.hpp"
#include "emde/sketch.hpp"

namespace emde {

/// Layer geometry of the sketch-to-sketch predictor.
struct network_shape {
    std::size_t dense_inputs = 0;              // sketches, numerical features and flag
    std::vector<std::size_t> vocab_sizes;      // per categorical feature, OOV slot included
    std::vector<std::size_t> embedding_dims;   // per categorical feature
    std::size_t hidden = 256;
    std::size_t blocks = 3;
    std::vector<sketch_shape> output_shapes;
    double leaky_slope = 0.01;
    double bn_momentum = 0.1;
    double bn_eps = 1e-5;

    std::size_t embedding_width() const {
        std::size_t w = 0;
        for (auto d : embedding_dims) w += d;
        return w;
    }
    std::size_t input_width() const { return dense_inputs + embedding_width(); }
    std::size_t output_width() const {
        std::size_t w = 0;
        for (const auto& s : output_shapes) w += s.size();
        return w;
    }
    std::size_t output_rows() const {
        std::size_t r = 0;
        for (const auto& s : output_shapes) r += s.depth;
        return r;
    }
};

enum class run_mode { train, eval };

/// Residual feed-forward network with batch norm and leaky ReLU:
///
///   h0      = W_in x + b_in                       (x = dense inputs ++ categorical embeddings)
///   h_{l+1} = h_l + leaky(bn_l(W_l h_l + b_l))    for each hidden block
///   logits  = W_out h_L + b_out
///
/// Batches are column-major: one sample per column. Gradients are computed by hand.
template <class Scalar>
class network {
public:
    using matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;
    using index_matrix = Eigen::Matrix<std::int32_t, Eigen::Dynamic, Eigen::Dynamic>;

    struct params {
        matrix w_in;
        vector b_in;
        std::vector<matrix> w;
        std::vector<vector> b;
        std::vector<vector> gamma;
        std::vector<vector> beta;
        matrix w_out;
        vector b_out;
        std::vector<matrix> tables;  // embedding_dim x vocab, one column per category

        // f(name, data, size, weight_decay)
        template <class F>
        void visit(F&& f) {
            f("w_in", w_in.data(), w_in.size(), true);
            f("b_in", b_in.data(), b_in.size(), false);
            for (std::size_t l = 0; l < w.size(); ++l) {
                const std::string s = std::to_string(l);
                f("w_" + s, w[l].data(), w[l].size(), true);
                f("b_" + s, b[l].data(), b[l].size(), false);
                f("bn_scale_" + s, gamma[l].data(), gamma[l].size(), false);
                f("bn_shift_" + s, beta[l].data(), beta[l].size(), false);
            }
            f("w_out", w_out.data(), w_out.size(), true);
            f("b_out", b_out.data(), b_out.size(), false);
            for (std::size_t t = 0; t < tables.size(); ++t)
                f("table_" + std::to_string(t), tables[t].data(), tables[t].size(), true);
        }
        template <class F>
        void visit(F&& f) const {
            const_cast<params*>(this)->visit(
                [&](const std::string& name, Scalar* data, Eigen::Index size, bool decay) {
                    f(name, static_cast<const Scalar*>(data), size, decay);
                });
        }

        void set_zero() {
            visit([](const std::string&, Scalar* data, Eigen::Index size, bool) { std::fill(data, data + size, Scalar(0)); });
        }
    };

    struct batch_norm_state {
        std::vector<vector> mean;
        std::vector<vector> var;
    };

    struct batch {
        matrix dense;              // dense_inputs x B
        index_matrix categorical;  // features x B
        std::size_t size() const { return static_cast<std::size_t>(dense.cols()); }
    };

    // Activations kept for backward.
    struct cache {
        matrix input;
        std::vector<matrix> h;     // h_0 .. h_L
        std::vector<matrix> xhat;  // normalized pre-activations per block
        std::vector<matrix> y;     // bn outputs per block
        std::vector<vector> inv_std;
        std::vector<vector> batch_mean;
        std::vector<vector> batch_var;  // biased
    };

    network() = default;

    network(network_shape shape, std::uint64_t seed) : shape_(std::move(shape)) {
        if (shape_.vocab_sizes.size() != shape_.embedding_dims.size())
            throw error("network: vocab and embedding size lists differ");
        if (shape_.hidden == 0 || shape_.output_width() == 0) throw error("network: empty layer");
        std::mt19937_64 rng(seed);
        const auto in = static_cast<Eigen::Index>(shape_.input_width());
        const auto hid = static_cast<Eigen::Index>(shape_.hidden);
        const auto out = static_cast<Eigen::Index>(shape_.output_width());
        const double gain = std::sqrt(2.0 / (1.0 + shape_.leaky_slope * shape_.leaky_slope));

        auto uniform_fill = [&](matrix& m, double bound) {
            std::uniform_real_distribution<double> u(-bound, bound);
            for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = static_cast<Scalar>(u(rng));
        };
        auto kaiming = [&](Eigen::Index rows, Eigen::Index fan_in, double scale) {
            matrix m(rows, fan_in);
            uniform_fill(m, scale * gain * std::sqrt(3.0 / static_cast<double>(std::max<Eigen::Index>(fan_in, 1))));
            return m;
        };

        p_.w_in = kaiming(hid, in, 1.0);
        p_.b_in = vector::Zero(hid);
        for (std::size_t l = 0; l < shape_.blocks; ++l) {
            p_.w.push_back(kaiming(hid, hid, 1.0));
            p_.b.push_back(vector::Zero(hid));
            p_.gamma.push_back(vector::Ones(hid));
            p_.beta.push_back(vector::Zero(hid));
            bn_.mean.push_back(vector::Zero(hid));
            bn_.var.push_back(vector::Ones(hid));
        }
        // Near-zero output weights start every row at the uniform distribution.
        p_.w_out = kaiming(out, hid, 0.01);
        p_.b_out = vector::Zero(out);
        for (std::size_t t = 0; t < shape_.vocab_sizes.size(); ++t) {
            matrix table(static_cast<Eigen::Index>(shape_.embedding_dims[t]),
                         static_cast<Eigen::Index>(shape_.vocab_sizes[t]));
            uniform_fill(table, 0.05);
            p_.tables.push_back(std::move(table));
        }
    }

    const network_shape& shape() const noexcept { return shape_; }
    params& parameters() noexcept { return p_; }
    const params& parameters() const noexcept { return p_; }
    batch_norm_state& running_stats() noexcept { return bn_; }
    const batch_norm_state& running_stats() const noexcept { return bn_; }

    params zero_like() const {
        params g = p_;
        g.set_zero();
        return g;
    }

    /// Full input matrix: dense rows followed by the looked-up categorical embeddings.
    matrix build_input(const batch& b) const {
        const auto B = static_cast<Eigen::Index>(b.size());
        if (b.dense.rows() != static_cast<Eigen::Index>(shape_.dense_inputs))
            throw error("network: dense input has wrong height");
        if (b.categorical.rows() != static_cast<Eigen::Index>(p_.tables.size()) && !(p_.tables.empty()))
            throw error("network: categorical input has wrong height");
        matrix x(static_cast<Eigen::Index>(shape_.input_width()), B);
        x.topRows(b.dense.rows()) = b.dense;
        Eigen::Index row = b.dense.rows();
        for (std::size_t t = 0; t < p_.tables.size(); ++t) {
            const auto& table = p_.tables[t];
            for (Eigen::Index j = 0; j < B; ++j) {
                const auto idx = b.categorical(static_cast<Eigen::Index>(t), j);
                if (idx < 0 || idx >= table.cols()) throw error("network: categorical index out of range");
                x.block(row, j, table.rows(), 1) = table.col(idx);
            }
            row += table.rows();
        }
        return x;
    }

    matrix forward(const batch& b, run_mode mode, cache* c = nullptr) const {
        const auto B = static_cast<Eigen::Index>(b.size());
        if (B == 0) throw error("forward: empty batch");
        if (mode == run_mode::train && B < 2) throw error("forward: batch norm needs at least 2 samples in train mode");
        cache local;
        cache& k = c ? *c : local;
        k = cache{};
        k.input = build_input(b);

        matrix h = p_.w_in * k.input;
        h.colwise() += p_.b_in;
        k.h.push_back(h);
        const Scalar eps = static_cast<Scalar>(shape_.bn_eps);
        const Scalar slope = static_cast<Scalar>(shape_.leaky_slope);
        for (std::size_t l = 0; l < p_.w.size(); ++l) {
            matrix z = p_.w[l] * k.h.back();
            z.colwise() += p_.b[l];
            vector mean, var;
            if (mode == run_mode::train) {
                mean = z.rowwise().mean();
                z.colwise() -= mean;
                var = z.array().square().rowwise().mean();
            } else {
                mean = bn_.mean[l];
                var = bn_.var[l];
                z.colwise() -= mean;
            }
            vector inv_std = (var.array() + eps).rsqrt();
            matrix xhat = inv_std.asDiagonal() * z;
            matrix y = p_.gamma[l].asDiagonal() * xhat;
            y.colwise() += p_.beta[l];
            matrix next = k.h.back() + y.unaryExpr([slope](Scalar v) { return v > Scalar(0) ? v : slope * v; });
            k.xhat.push_back(std::move(xhat));
            k.y.push_back(std::move(y));
            k.inv_std.push_back(std::move(inv_std));
            k.batch_mean.push_back(std::move(mean));
            k.batch_var.push_back(std::move(var));
            k.h.push_back(std::move(next));
        }
        matrix logits = p_.w_out * k.h.back();
        logits.colwise() += p_.b_out;
        return logits;
    }

    /// Mean over samples and depth-rows of the softmax cross-entropy of each
    /// width-row against its target region. `targets` is (total depth x B).
    Scalar loss(const matrix& logits, const index_matrix& targets, matrix* dlogits = nullptr) const {
        const Eigen::Index B = logits.cols();
        const auto rows = static_cast<Eigen::Index>(shape_.output_rows());
        if (logits.rows() != static_cast<Eigen::Index>(shape_.output_width()) || targets.rows() != rows ||
            targets.cols() != B)
            throw error("loss: shape mismatch");
        const Scalar scale = Scalar(1) / static_cast<Scalar>(rows * B);
        if (dlogits) dlogits->resize(logits.rows(), B);
        double total = 0.0;
        for (Eigen::Index j = 0; j < B; ++j) {
            Eigen::Index offset = 0, row = 0;
            for (const auto& shape : shape_.output_shapes) {
                const auto width = static_cast<Eigen::Index>(shape.width);
                for (std::uint32_t n = 0; n < shape.depth; ++n, ++row, offset += width) {
                    auto seg = logits.col(j).segment(offset, width);
                    const Scalar mx = seg.maxCoeff();
                    const Scalar sum = (seg.array() - mx).exp().sum();
                    const Scalar log_z = mx + std::log(sum);
                    const auto target = targets(row, j);
                    if (target < 0 || target >= width) throw error("loss: target region out of range");
                    total += static_cast<double>(log_z - seg(target));
                    if (dlogits) {
                        auto g = dlogits->col(j).segment(offset, width);
                        g = ((seg.array() - log_z).exp() * scale).matrix();
                        g(target) -= scale;
                    }
                }
            }
        }
        return static_cast<Scalar>(total / static_cast<double>(rows * B));
    }

    /// Row-wise softmax of the logits: the decoded output sketch, one probability field per depth-row.
    matrix row_softmax(const matrix& logits) const {
        matrix out(logits.rows(), logits.cols());
        for (Eigen::Index j = 0; j < logits.cols(); ++j) {
            Eigen::Index offset = 0;
            for (const auto& shape : shape_.output_shapes) {
                const auto width = static_cast<Eigen::Index>(shape.width);
                for (std::uint32_t n = 0; n < shape.depth; ++n, offset += width) {
                    auto seg = logits.col(j).segment(offset, width);
                    const Scalar mx = seg.maxCoeff();
                    auto e = (seg.array() - mx).exp();
                    out.col(j).segment(offset, width) = (e / e.sum()).matrix();
                }
            }
        }
        return out;
    }

    /// Accumulates d(loss)/d(params) into `grads` (expected zeroed) from a train-mode cache.
    void backward(const batch& b, const cache& k, const matrix& dlogits, params& grads) const {
        const auto B = static_cast<Scalar>(b.size());
        const Scalar slope = static_cast<Scalar>(shape_.leaky_slope);

        grads.w_out.noalias() += dlogits * k.h.back().transpose();
        grads.b_out += dlogits.rowwise().sum();
        matrix dh = p_.w_out.transpose() * dlogits;

        for (std::size_t l = p_.w.size(); l-- > 0;) {
            const matrix& y = k.y[l];
            const matrix& xhat = k.xhat[l];
            matrix dy = dh.binaryExpr(y, [slope](Scalar g, Scalar v) { return v > Scalar(0) ? g : slope * g; });
            grads.gamma[l] += (dy.array() * xhat.array()).rowwise().sum().matrix();
            grads.beta[l] += dy.rowwise().sum();
            matrix dxhat = p_.gamma[l].asDiagonal() * dy;
            const vector sum_dxhat = dxhat.rowwise().sum();
            const vector sum_dxhat_xhat = (dxhat.array() * xhat.array()).rowwise().sum();
            matrix dz = B * dxhat;
            dz.colwise() -= sum_dxhat;
            dz -= sum_dxhat_xhat.asDiagonal() * xhat;
            dz = (k.inv_std[l] / B).asDiagonal() * dz;
            grads.w[l].noalias() += dz * k.h[l].transpose();
            grads.b[l] += dz.rowwise().sum();
            dh.noalias() += p_.w[l].transpose() * dz;  // residual path keeps dh
        }

        grads.w_in.noalias() += dh * k.input.transpose();
        grads.b_in += dh.rowwise().sum();
        if (p_.tables.empty()) return;
        const auto dense = static_cast<Eigen::Index>(shape_.dense_inputs);
        const auto emb = static_cast<Eigen::Index>(shape_.embedding_width());
        const matrix dx = p_.w_in.middleCols(dense, emb).transpose() * dh;
        Eigen::Index row = 0;
        for (std::size_t t = 0; t < p_.tables.size(); ++t) {
            const Eigen::Index dim = p_.tables[t].rows();
            for (Eigen::Index j = 0; j < dx.cols(); ++j)
                grads.tables[t].col(b.categorical(static_cast<Eigen::Index>(t), j)) += dx.block(row, j, dim, 1);
            row += dim;
        }
    }

    /// Exponential moving average of batch statistics (unbiased variance), as batch norm does in training.
    void update_running_stats(const cache& k) {
        const double m = shape_.bn_momentum;
        for (std::size_t l = 0; l < bn_.mean.size(); ++l) {
            const auto n = static_cast<double>(k.h[l].cols());
            const Scalar unbias = static_cast<Scalar>(n / std::max(n - 1.0, 1.0));
            bn_.mean[l] = static_cast<Scalar>(1.0 - m) * bn_.mean[l] + static_cast<Scalar>(m) * k.batch_mean[l];
            bn_.var[l] = static_cast<Scalar>(1.0 - m) * bn_.var[l] + static_cast<Scalar>(m) * unbias * k.batch_var[l];
        }
    }

private:
    network_shape shape_;
    params p_;
    batch_norm_state bn_;
};

struct adamw_options {
    double learning_rate = 5e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
    double weight_decay = 0.01;
};

/// AdamW with decoupled weight decay: decayed parameters shrink by lr·wd·p directly,
/// outside the adaptive moment estimate. Biases, batch-norm parameters excluded.
template <class Scalar>
class adamw {
public:
    using params = typename network<Scalar>::params;

    adamw() = default;
    adamw(const network<Scalar>& net, adamw_options options)
        : options_(options), m_(net.zero_like()), v_(net.zero_like()) {}

    const adamw_options& options() const noexcept { return options_; }
    std::uint64_t steps() const noexcept { return step_; }
    void set_steps(std::uint64_t s) noexcept { step_ = s; }
    params& first_moment() noexcept { return m_; }
    params& second_moment() noexcept { return v_; }
    const params& first_moment() const noexcept { return m_; }
    const params& second_moment() const noexcept { return v_; }

    void step(params& p, const params& grads, double lr_scale = 1.0) {
        ++step_;
        const double lr = options_.learning_rate * lr_scale;
        const double b1 = options_.beta1, b2 = options_.beta2;
        const double c1 = 1.0 - std::pow(b1, static_cast<double>(step_));
        const double c2 = 1.0 - std::pow(b2, static_cast<double>(step_));
        const double decay = 1.0 - lr * options_.weight_decay;
        const double eps = options_.epsilon;

        std::vector<Scalar*> gp, mp, vp;
        std::vector<Eigen::Index> sizes;
        const_cast<params&>(grads).visit(
            [&](const std::string&, Scalar* d, Eigen::Index n, bool) { gp.push_back(d), sizes.push_back(n); });
        m_.visit([&](const std::string&, Scalar* d, Eigen::Index, bool) { mp.push_back(d); });
        v_.visit([&](const std::string&, Scalar* d, Eigen::Index, bool) { vp.push_back(d); });
        std::size_t t = 0;
        p.visit([&](const std::string&, Scalar* w, Eigen::Index n, bool decayed) {
            if (n != sizes[t]) throw error("adamw: parameter layout changed");
            Scalar* g = gp[t];
            Scalar* m = mp[t];
            Scalar* v = vp[t];
            for (Eigen::Index i = 0; i < n; ++i) {
                if (decayed) w[i] = static_cast<Scalar>(w[i] * decay);
                m[i] = static_cast<Scalar>(b1 * m[i] + (1.0 - b1) * g[i]);
                v[i] = static_cast<Scalar>(b2 * v[i] + (1.0 - b2) * g[i] * g[i]);
                const double mhat = m[i] / c1;
                const double vhat = v[i] / c2;
                w[i] = static_cast<Scalar>(w[i] - lr * mhat / (std::sqrt(vhat) + eps));
            }
            ++t;
        });
    }

private:
    adamw_options options_;
    params m_;
    params v_;
    std::uint64_t step_ = 0;
};

}  // namespace emde
