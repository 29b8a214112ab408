#ifndef PRIORSSL_MLP_HPP
#define PRIORSSL_MLP_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorssl/io.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/rng.hpp"

namespace priorssl {

// Two-layer perceptron: dense -> ReLU -> dense -> softmax.
struct MLPModel {
    std::size_t in_dim = 0, hidden_dim = 0, out_dim = 0;
    Matrix w1;                // hidden x in
    std::vector<double> b1;   // hidden
    Matrix w2;                // out x hidden
    std::vector<double> b2;   // out

    // uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) init for weights and biases
    static MLPModel init(std::size_t in, std::size_t hidden, std::size_t out,
                         std::uint64_t rng_seed) {
        if (in < 1 || hidden < 1 || out < 1)
            throw std::invalid_argument("MLPModel::init: all layer sizes must be >= 1");
        MLPModel m;
        m.in_dim = in;
        m.hidden_dim = hidden;
        m.out_dim = out;
        m.w1 = Matrix(hidden, in);
        m.b1.assign(hidden, 0.0);
        m.w2 = Matrix(out, hidden);
        m.b2.assign(out, 0.0);
        Rng rng(rng_seed);
        const double s1 = 1.0 / std::sqrt(static_cast<double>(in));
        const double s2 = 1.0 / std::sqrt(static_cast<double>(hidden));
        for (double& v : m.w1.data) v = (2.0 * rng.uniform() - 1.0) * s1;
        for (double& v : m.b1) v = (2.0 * rng.uniform() - 1.0) * s1;
        for (double& v : m.w2.data) v = (2.0 * rng.uniform() - 1.0) * s2;
        for (double& v : m.b2) v = (2.0 * rng.uniform() - 1.0) * s2;
        return m;
    }
};

struct MLPGrads {
    Matrix w1;
    std::vector<double> b1;
    Matrix w2;
    std::vector<double> b2;

    explicit MLPGrads(const MLPModel& m)
        : w1(m.hidden_dim, m.in_dim),
          b1(m.hidden_dim, 0.0),
          w2(m.out_dim, m.hidden_dim),
          b2(m.out_dim, 0.0) {}

    void scale(double s) {
        for (double& v : w1.data) v *= s;
        for (double& v : b1) v *= s;
        for (double& v : w2.data) v *= s;
        for (double& v : b2) v *= s;
    }
};

// Hidden activations kept for the backward pass.
struct ForwardCache {
    Matrix hidden;  // post-ReLU, batch x hidden
};

namespace detail {

inline void softmax_rows(Matrix& logits) {
    for (std::size_t i = 0; i < logits.rows; ++i) {
        double* row = logits.data.data() + i * logits.cols;
        double mx = row[0];
        for (std::size_t j = 1; j < logits.cols; ++j) mx = std::max(mx, row[j]);
        double total = 0.0;
        for (std::size_t j = 0; j < logits.cols; ++j) {
            row[j] = std::exp(row[j] - mx);
            total += row[j];
        }
        for (std::size_t j = 0; j < logits.cols; ++j) row[j] /= total;
    }
}

}  // namespace detail

// Softmax class probabilities for a batch; optionally fills the cache needed
// by mlp_backward.
inline Matrix mlp_forward(const MLPModel& m, const Matrix& x, ForwardCache* cache = nullptr) {
    if (x.cols != m.in_dim) throw std::invalid_argument("mlp_forward: input width mismatch");
    Matrix hidden(x.rows, m.hidden_dim);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* xi = x.data.data() + i * x.cols;
        double* hi = hidden.data.data() + i * m.hidden_dim;
        for (std::size_t h = 0; h < m.hidden_dim; ++h) {
            double acc = m.b1[h];
            const double* w = m.w1.data.data() + h * m.in_dim;
            for (std::size_t j = 0; j < m.in_dim; ++j) acc += w[j] * xi[j];
            hi[h] = acc > 0.0 ? acc : 0.0;
        }
    }
    Matrix out(x.rows, m.out_dim);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* hi = hidden.data.data() + i * m.hidden_dim;
        double* oi = out.data.data() + i * m.out_dim;
        for (std::size_t o = 0; o < m.out_dim; ++o) {
            double acc = m.b2[o];
            const double* w = m.w2.data.data() + o * m.hidden_dim;
            for (std::size_t h = 0; h < m.hidden_dim; ++h) acc += w[h] * hi[h];
            oi[o] = acc;
        }
    }
    detail::softmax_rows(out);
    if (cache) cache->hidden = std::move(hidden);
    return out;
}

// Accumulates parameter gradients given dLoss/dlogits for a batch (softmax
// and cross-entropy combine outside into dlogits = weight * (p - target)).
inline void mlp_backward(const MLPModel& m, const Matrix& x, const ForwardCache& cache,
                         const Matrix& dlogits, MLPGrads& grads) {
    if (dlogits.rows != x.rows || dlogits.cols != m.out_dim)
        throw std::invalid_argument("mlp_backward: dlogits shape mismatch");
    std::vector<double> dh(m.hidden_dim);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double* dz = dlogits.data.data() + i * m.out_dim;
        const double* hi = cache.hidden.data.data() + i * m.hidden_dim;
        const double* xi = x.data.data() + i * x.cols;

        std::fill(dh.begin(), dh.end(), 0.0);
        for (std::size_t o = 0; o < m.out_dim; ++o) {
            const double g = dz[o];
            if (g == 0.0) continue;
            double* gw = grads.w2.data.data() + o * m.hidden_dim;
            const double* w = m.w2.data.data() + o * m.hidden_dim;
            for (std::size_t h = 0; h < m.hidden_dim; ++h) {
                gw[h] += g * hi[h];
                dh[h] += g * w[h];
            }
            grads.b2[o] += g;
        }
        for (std::size_t h = 0; h < m.hidden_dim; ++h) {
            if (hi[h] <= 0.0 || dh[h] == 0.0) continue;  // ReLU gate
            double* gw = grads.w1.data.data() + h * m.in_dim;
            for (std::size_t j = 0; j < m.in_dim; ++j) gw[j] += dh[h] * xi[j];
            grads.b1[h] += dh[h];
        }
    }
}

// SGD with momentum: v = mu*v + g; w -= lr*v.
struct SgdMomentum {
    double momentum;
    Matrix vw1;
    std::vector<double> vb1;
    Matrix vw2;
    std::vector<double> vb2;

    SgdMomentum(const MLPModel& m, double mu)
        : momentum(mu),
          vw1(m.hidden_dim, m.in_dim),
          vb1(m.hidden_dim, 0.0),
          vw2(m.out_dim, m.hidden_dim),
          vb2(m.out_dim, 0.0) {}

    void step(MLPModel& m, const MLPGrads& g, double lr) {
        auto update = [&](std::vector<double>& w, std::vector<double>& v,
                          const std::vector<double>& grad) {
            for (std::size_t i = 0; i < w.size(); ++i) {
                v[i] = momentum * v[i] + grad[i];
                w[i] -= lr * v[i];
            }
        };
        update(m.w1.data, vw1.data, g.w1.data);
        update(m.b1, vb1, g.b1);
        update(m.w2.data, vw2.data, g.w2.data);
        update(m.b2, vb2, g.b2);
    }
};

// Annealed learning rate: lr0 * cos(7*pi*t / (16*total)).
inline double cosine_lr(double lr0, std::size_t t, std::size_t total_iters) {
    return lr0 * std::cos(7.0 * 3.14159265358979323846 * static_cast<double>(t) /
                          (16.0 * static_cast<double>(total_iters)));
}

inline double accuracy(const MLPModel& m, const Matrix& x, const LabelVector& y) {
    const Matrix p = mlp_forward(m, x);
    std::size_t correct = 0;
    for (std::size_t i = 0; i < p.rows; ++i) {
        const double* row = p.data.data() + i * p.cols;
        std::size_t best = 0;
        for (std::size_t j = 1; j < p.cols; ++j)
            if (row[j] > row[best]) best = j;
        if (best == static_cast<std::size_t>(y.labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(p.rows);
}

// ---------------------------------------------------------------------------
// Checkpoint: plain text, one header line per layer shape, then parameter
// blocks in fixed order.

inline void save_checkpoint(const std::string& path, const MLPModel& m) {
    std::ostringstream out;
    out << "mlp " << m.in_dim << ' ' << m.hidden_dim << ' ' << m.out_dim << "\n";
    auto block = [&](const char* name, const std::vector<double>& v) {
        out << name;
        for (double x : v) out << ' ' << fmt_double(x);
        out << "\n";
    };
    block("w1", m.w1.data);
    block("b1", m.b1);
    block("w2", m.w2.data);
    block("b2", m.b2);
    write_text_file(path, out.str());
}

inline MLPModel load_checkpoint(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("checkpoint not found: " + path);
    std::string tag;
    std::size_t din = 0, dh = 0, dout = 0;
    in >> tag >> din >> dh >> dout;
    if (tag != "mlp" || din < 1 || dh < 1 || dout < 1)
        throw std::runtime_error(path + ": malformed checkpoint header");
    MLPModel m;
    m.in_dim = din;
    m.hidden_dim = dh;
    m.out_dim = dout;
    m.w1 = Matrix(dh, din);
    m.b1.assign(dh, 0.0);
    m.w2 = Matrix(dout, dh);
    m.b2.assign(dout, 0.0);
    auto block = [&](const char* name, std::vector<double>& v) {
        std::string got;
        in >> got;
        if (got != name) throw std::runtime_error(path + ": expected block '" + name + "'");
        for (double& x : v)
            if (!(in >> x)) throw std::runtime_error(path + ": truncated block '" + name + "'");
    };
    block("w1", m.w1.data);
    block("b1", m.b1);
    block("w2", m.w2.data);
    block("b2", m.b2);
    return m;
}

}  // namespace priorssl

#endif
