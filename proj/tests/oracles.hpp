#ifndef PRIORSSL_TEST_ORACLES_HPP
#define PRIORSSL_TEST_ORACLES_HPP

// Reference implementations used to cross-check the library. Everything here
// is written straight from the mathematical definition, favors clarity over
// speed, and stays away from the code paths under test.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <utility>
#include <vector>

#include "priorssl/matrix.hpp"
#include "priorssl/mlp.hpp"

namespace oracle {

using priorssl::LabelVector;
using priorssl::Matrix;

// ---------------------------------------------------------------------------
// Clustering references.

// Within-cluster sum of squared deviations from the cluster means.
inline double clustering_cost(const Matrix& x, const std::vector<std::size_t>& assign,
                              std::size_t K) {
    const std::size_t n = x.rows, d = x.cols;
    std::vector<double> sums(K * d, 0.0);
    std::vector<std::size_t> counts(K, 0);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < d; ++j) sums[assign[i] * d + j] += x.at(i, j);
        ++counts[assign[i]];
    }
    double cost = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const std::size_t k = assign[i];
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = x.at(i, j) - sums[k * d + j] / static_cast<double>(counts[k]);
            cost += diff * diff;
        }
    }
    return cost;
}

// Global optimum by enumerating every assignment of n samples to K clusters.
// Only usable for tiny instances (K^n assignments).
inline double brute_force_kmeans_cost(const Matrix& x, std::size_t K) {
    const std::size_t n = x.rows;
    std::vector<std::size_t> assign(n, 0);
    double best = std::numeric_limits<double>::infinity();
    while (true) {
        best = std::min(best, clustering_cost(x, assign, K));
        std::size_t p = 0;
        while (p < n) {
            if (++assign[p] < K) break;
            assign[p] = 0;
            ++p;
        }
        if (p == n) break;
    }
    return best;
}

// Mean within-cluster squared deviation over several fixed clusterings:
// sum over runs and samples of ||x_i - mean(cluster of i)||^2 / (C*n).
inline double mean_within_cluster_ssq(const Matrix& x,
                                      const std::vector<std::vector<int>>& runs) {
    double total = 0.0;
    for (const auto& r : runs) {
        std::size_t K = 0;
        for (int a : r) K = std::max(K, static_cast<std::size_t>(a) + 1);
        std::vector<std::size_t> assign(r.begin(), r.end());
        total += clustering_cost(x, assign, K);
    }
    return total / (static_cast<double>(runs.size()) * static_cast<double>(x.rows));
}

// ---------------------------------------------------------------------------
// Pairwise co-clustering: equivalence classes of "same cluster in every run".

inline std::vector<std::vector<std::size_t>> co_cluster_classes(
    const std::vector<std::vector<int>>& runs) {
    const std::size_t n = runs.at(0).size();
    std::vector<char> used(n, 0);
    std::vector<std::vector<std::size_t>> classes;
    for (std::size_t i = 0; i < n; ++i) {
        if (used[i]) continue;
        std::vector<std::size_t> group{i};
        used[i] = 1;
        for (std::size_t j = i + 1; j < n; ++j) {
            if (used[j]) continue;
            bool together = true;
            for (const auto& r : runs)
                if (r[i] != r[j]) {
                    together = false;
                    break;
                }
            if (together) {
                group.push_back(j);
                used[j] = 1;
            }
        }
        classes.push_back(std::move(group));
    }
    return classes;
}

// Canonical form for partition comparison: members sorted inside each group,
// groups sorted by their contents.
inline std::vector<std::vector<std::size_t>> canonical_partition(
    std::vector<std::vector<std::size_t>> groups) {
    for (auto& g : groups) std::sort(g.begin(), g.end());
    std::sort(groups.begin(), groups.end());
    return groups;
}

// ---------------------------------------------------------------------------
// Dense prior pseudo-label accumulation, scanning the labeled list per sample
// instead of building per-cluster count tables.

inline std::pair<Matrix, std::vector<char>> dense_ppl(
    const std::vector<std::vector<int>>& runs, const priorssl::DatasetSplit& split) {
    const std::size_t n = split.total();
    const auto C = static_cast<std::size_t>(split.labeled_labels.num_classes);
    Matrix acc(n, C);
    for (const auto& r : runs) {
        for (std::size_t i = 0; i < n; ++i) {
            std::vector<double> counts(C, 0.0);
            double total = 0.0;
            for (std::size_t li = 0; li < split.labeled.size(); ++li) {
                if (r[split.labeled[li]] != r[i]) continue;
                counts[static_cast<std::size_t>(split.labeled_labels.labels[li])] += 1.0;
                total += 1.0;
            }
            if (total == 0.0) continue;
            for (std::size_t c = 0; c < C; ++c) acc.at(i, c) += counts[c] / total;
        }
    }
    std::vector<char> covered(n, 0);
    for (std::size_t i = 0; i < n; ++i) {
        double total = 0.0;
        for (std::size_t c = 0; c < C; ++c) total += acc.at(i, c);
        if (total > 0.0) {
            covered[i] = 1;
            for (std::size_t c = 0; c < C; ++c) acc.at(i, c) /= total;
        }
    }
    for (std::size_t li = 0; li < split.labeled.size(); ++li) {
        const std::size_t i = split.labeled[li];
        for (std::size_t c = 0; c < C; ++c) acc.at(i, c) = 0.0;
        acc.at(i, static_cast<std::size_t>(split.labeled_labels.labels[li])) = 1.0;
        covered[i] = 1;
    }
    return {std::move(acc), std::move(covered)};
}

// ---------------------------------------------------------------------------
// LLGC closed form: F = (1-alpha) * (I - alpha*S)^{-1} Y over the symmetric
// k-NN Gaussian graph, solved by Gaussian elimination.

inline std::vector<double> solve_linear(std::vector<double> a, std::vector<double> b,
                                        std::size_t n, std::size_t rhs) {
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t pivot = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r * n + col]) > std::abs(a[pivot * n + col])) pivot = r;
        if (a[pivot * n + col] == 0.0) throw std::runtime_error("solve_linear: singular matrix");
        if (pivot != col) {
            for (std::size_t j = 0; j < n; ++j) std::swap(a[col * n + j], a[pivot * n + j]);
            for (std::size_t j = 0; j < rhs; ++j)
                std::swap(b[col * rhs + j], b[pivot * rhs + j]);
        }
        const double inv = 1.0 / a[col * n + col];
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = a[r * n + col] * inv;
            if (f == 0.0) continue;
            for (std::size_t j = col; j < n; ++j) a[r * n + j] -= f * a[col * n + j];
            for (std::size_t j = 0; j < rhs; ++j) b[r * rhs + j] -= f * b[col * rhs + j];
        }
    }
    std::vector<double> x(n * rhs);
    for (std::size_t r = 0; r < n; ++r)
        for (std::size_t j = 0; j < rhs; ++j) x[r * rhs + j] = b[r * rhs + j] / a[r * n + r];
    return x;
}

inline Matrix llgc_closed_form(const Matrix& x, const priorssl::DatasetSplit& split, double alpha,
                               double sigma, std::size_t k_nn) {
    const std::size_t n = x.rows;
    const auto C = static_cast<std::size_t>(split.labeled_labels.num_classes);
    k_nn = std::min(k_nn, n - 1);

    // dense symmetric k-NN Gaussian affinity
    std::vector<double> w(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::pair<double, std::size_t>> dist;
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            double d2 = 0.0;
            for (std::size_t c = 0; c < x.cols; ++c) {
                const double diff = x.at(i, c) - x.at(j, c);
                d2 += diff * diff;
            }
            dist.emplace_back(d2, j);
        }
        std::sort(dist.begin(), dist.end());
        for (std::size_t t = 0; t < k_nn; ++t) {
            const auto [d2, j] = dist[t];
            const double a = std::exp(-d2 / (2.0 * sigma * sigma));
            w[i * n + j] = a;
            w[j * n + i] = a;
        }
    }
    std::vector<double> deg(n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) deg[i] += w[i * n + j];

    // system matrix I - alpha * D^{-1/2} W D^{-1/2}
    std::vector<double> a(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        a[i * n + i] = 1.0;
        if (deg[i] <= 0.0) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (w[i * n + j] == 0.0 || deg[j] <= 0.0) continue;
            a[i * n + j] -= alpha * w[i * n + j] / std::sqrt(deg[i] * deg[j]);
        }
    }
    std::vector<double> y(n * C, 0.0);
    for (std::size_t li = 0; li < split.labeled.size(); ++li)
        y[split.labeled[li] * C +
          static_cast<std::size_t>(split.labeled_labels.labels[li])] = 1.0 - alpha;

    const auto f = solve_linear(std::move(a), std::move(y), n, C);
    Matrix out(n, C);
    out.data = f;
    return out;
}

// ---------------------------------------------------------------------------
// Expected calibration error by edge scanning instead of index arithmetic.

inline double ece_brute_force(const Matrix& probs, const std::vector<char>& covered,
                              const LabelVector& truth, std::size_t bins) {
    struct Rec {
        double conf;
        bool correct;
    };
    std::vector<std::vector<Rec>> bucket(bins);
    std::size_t scored = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        if (!covered[i]) continue;
        std::size_t arg = 0;
        for (std::size_t c = 1; c < probs.cols; ++c)
            if (probs.at(i, c) > probs.at(i, arg)) arg = c;
        const double conf = probs.at(i, arg);
        std::size_t b = 0;
        while (b + 1 < bins && conf > static_cast<double>(b + 1) / static_cast<double>(bins)) ++b;
        bucket[b].push_back({conf, arg == static_cast<std::size_t>(truth.labels[i])});
        ++scored;
    }
    if (scored == 0) throw std::runtime_error("ece_brute_force: nothing to score");
    double total = 0.0;
    for (const auto& recs : bucket) {
        if (recs.empty()) continue;
        double conf_sum = 0.0, acc_sum = 0.0;
        for (const Rec& r : recs) {
            conf_sum += r.conf;
            acc_sum += r.correct ? 1.0 : 0.0;
        }
        const double inv = 1.0 / static_cast<double>(recs.size());
        total += (static_cast<double>(recs.size()) / static_cast<double>(scored)) *
                 std::abs(acc_sum * inv - conf_sum * inv);
    }
    return total;
}

// ---------------------------------------------------------------------------
// Central finite difference of a scalar function with respect to one
// parameter reachable through a pointer.

template <typename F>
inline double central_diff(F&& eval, double* param, double eps) {
    const double orig = *param;
    *param = orig + eps;
    const double hi = eval();
    *param = orig - eps;
    const double lo = eval();
    *param = orig;
    return (hi - lo) / (2.0 * eps);
}

// ---------------------------------------------------------------------------
// Scalar re-computation of the combined semi-supervised loss. Forward passes
// use long double accumulators and per-sample loops.

inline std::vector<double> scalar_forward_row(const priorssl::MLPModel& m, const double* xi) {
    std::vector<long double> h(m.hidden_dim);
    for (std::size_t k = 0; k < m.hidden_dim; ++k) {
        long double acc = m.b1[k];
        for (std::size_t j = 0; j < m.in_dim; ++j)
            acc += static_cast<long double>(m.w1.at(k, j)) * xi[j];
        h[k] = acc > 0.0L ? acc : 0.0L;
    }
    std::vector<long double> z(m.out_dim);
    long double zmax = -std::numeric_limits<long double>::infinity();
    for (std::size_t o = 0; o < m.out_dim; ++o) {
        long double acc = m.b2[o];
        for (std::size_t k = 0; k < m.hidden_dim; ++k)
            acc += static_cast<long double>(m.w2.at(o, k)) * h[k];
        z[o] = acc;
        zmax = std::max(zmax, acc);
    }
    long double total = 0.0L;
    for (auto& v : z) {
        v = std::exp(v - zmax);
        total += v;
    }
    std::vector<double> p(m.out_dim);
    for (std::size_t o = 0; o < m.out_dim; ++o) p[o] = static_cast<double>(z[o] / total);
    return p;
}

inline double scalar_ssl_loss(const priorssl::MLPModel& model, const Matrix& x_l,
                              const std::vector<int>& y_l, const Matrix& x_u_weak,
                              const Matrix& x_u_strong, const Matrix& prior_rows,
                              const std::vector<char>& prior_covered, bool fuse_now,
                              double lambda_u, const std::vector<double>& thresholds) {
    long double loss_l = 0.0L;
    for (std::size_t i = 0; i < x_l.rows; ++i) {
        const auto p = scalar_forward_row(model, x_l.data.data() + i * x_l.cols);
        loss_l -= std::log(static_cast<long double>(p[static_cast<std::size_t>(y_l[i])]));
    }
    loss_l /= static_cast<long double>(x_l.rows);

    long double loss_un = 0.0L;
    if (x_u_weak.rows > 0) {
        for (std::size_t i = 0; i < x_u_weak.rows; ++i) {
            auto posterior = scalar_forward_row(model, x_u_weak.data.data() + i * x_u_weak.cols);
            if (fuse_now && prior_covered[i]) {
                double total = 0.0;
                for (std::size_t c = 0; c < posterior.size(); ++c) {
                    posterior[c] += prior_rows.at(i, c);
                    total += posterior[c];
                }
                for (double& v : posterior) v /= total;
            }
            std::size_t hard = 0;
            for (std::size_t c = 1; c < posterior.size(); ++c)
                if (posterior[c] > posterior[hard]) hard = c;
            if (posterior[hard] > thresholds[hard]) {
                const auto ps =
                    scalar_forward_row(model, x_u_strong.data.data() + i * x_u_strong.cols);
                loss_un -= std::log(static_cast<long double>(ps[hard]));
            }
        }
        loss_un /= static_cast<long double>(x_u_weak.rows);
    }
    return static_cast<double>(loss_l + static_cast<long double>(lambda_u) * loss_un);
}

// ---------------------------------------------------------------------------
// Plain classifiers used to sanity-check dataset difficulty.

// Binary logistic regression trained by full-batch gradient descent;
// returns training accuracy.
inline double logistic_regression_accuracy(const Matrix& x, const LabelVector& y,
                                           std::size_t iters, double lr) {
    if (y.num_classes != 2)
        throw std::invalid_argument("logistic_regression_accuracy: binary only");
    const std::size_t n = x.rows, d = x.cols;
    std::vector<double> w(d, 0.0);
    double b = 0.0;
    std::vector<double> gw(d);
    for (std::size_t it = 0; it < iters; ++it) {
        std::fill(gw.begin(), gw.end(), 0.0);
        double gb = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double z = b;
            for (std::size_t j = 0; j < d; ++j) z += w[j] * x.at(i, j);
            const double s = 1.0 / (1.0 + std::exp(-z));
            const double g = s - static_cast<double>(y.labels[i]);
            for (std::size_t j = 0; j < d; ++j) gw[j] += g * x.at(i, j);
            gb += g;
        }
        for (std::size_t j = 0; j < d; ++j) w[j] -= lr * gw[j] / static_cast<double>(n);
        b -= lr * gb / static_cast<double>(n);
    }
    std::size_t correct = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double z = b;
        for (std::size_t j = 0; j < d; ++j) z += w[j] * x.at(i, j);
        if ((z > 0.0 ? 1 : 0) == y.labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(n);
}

inline Matrix class_means(const Matrix& x, const LabelVector& y) {
    const auto C = static_cast<std::size_t>(y.num_classes);
    Matrix means(C, x.cols);
    std::vector<std::size_t> counts(C, 0);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const auto c = static_cast<std::size_t>(y.labels[i]);
        for (std::size_t j = 0; j < x.cols; ++j) means.at(c, j) += x.at(i, j);
        ++counts[c];
    }
    for (std::size_t c = 0; c < C; ++c)
        for (std::size_t j = 0; j < x.cols; ++j)
            means.at(c, j) /= static_cast<double>(counts[c]);
    return means;
}

inline double nearest_center_accuracy(const Matrix& x, const LabelVector& y,
                                      const Matrix& centers) {
    std::size_t correct = 0;
    for (std::size_t i = 0; i < x.rows; ++i) {
        std::size_t best = 0;
        double best_d2 = std::numeric_limits<double>::infinity();
        for (std::size_t c = 0; c < centers.rows; ++c) {
            double d2 = 0.0;
            for (std::size_t j = 0; j < x.cols; ++j) {
                const double diff = x.at(i, j) - centers.at(c, j);
                d2 += diff * diff;
            }
            if (d2 < best_d2) {
                best_d2 = d2;
                best = c;
            }
        }
        if (best == static_cast<std::size_t>(y.labels[i])) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(x.rows);
}

// Full-batch supervised training of the library's two-layer MLP; returns
// training accuracy. Checks what the architecture can reach on a dataset,
// not the semi-supervised loop.
inline double supervised_mlp_accuracy(const Matrix& x, const LabelVector& y, std::size_t hidden,
                                      std::size_t iters, double lr, std::uint64_t seed) {
    using namespace priorssl;
    MLPModel m = MLPModel::init(x.cols, hidden, static_cast<std::size_t>(y.num_classes), seed);
    SgdMomentum opt(m, 0.9);
    const double inv_n = 1.0 / static_cast<double>(x.rows);
    for (std::size_t it = 0; it < iters; ++it) {
        ForwardCache cache;
        Matrix p = mlp_forward(m, x, &cache);
        Matrix dlogits = p;
        for (std::size_t i = 0; i < x.rows; ++i) {
            dlogits.at(i, static_cast<std::size_t>(y.labels[i])) -= 1.0;
            for (std::size_t c = 0; c < p.cols; ++c) dlogits.at(i, c) *= inv_n;
        }
        MLPGrads grads(m);
        mlp_backward(m, x, cache, dlogits, grads);
        opt.step(m, grads, lr);
    }
    return priorssl::accuracy(m, x, y);
}

// ---------------------------------------------------------------------------
// Median of the trailing k values by repeated minimum extraction.

inline double median_tail(const std::vector<double>& values, std::size_t k) {
    std::vector<double> tail(values.end() - static_cast<long>(k), values.end());
    std::vector<char> taken(k, 0);
    auto extract_min = [&]() {
        std::size_t arg = k;
        for (std::size_t i = 0; i < k; ++i)
            if (!taken[i] && (arg == k || tail[i] < tail[arg])) arg = i;
        taken[arg] = 1;
        return tail[arg];
    };
    double prev = 0.0, cur = 0.0;
    for (std::size_t rank = 0; rank <= k / 2; ++rank) {
        prev = cur;
        cur = extract_min();
    }
    if (k % 2 == 1) return cur;
    return 0.5 * (prev + cur);
}

}  // namespace oracle

#endif
