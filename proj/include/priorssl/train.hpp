#ifndef PRIORSSL_TRAIN_HPP
#define PRIORSSL_TRAIN_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorssl/io.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/mlp.hpp"
#include "priorssl/ppl.hpp"
#include "priorssl/rng.hpp"

namespace priorssl {

enum class ThresholdMode { fixed, curriculum };
enum class CurriculumVariant { linear, warped };

struct TrainConfig {
    double lambda_u = 1.0;      // unlabeled loss weight
    std::size_t mu = 7;         // unlabeled batch = mu * batch_size
    std::size_t batch_size = 64;
    double tau = 0.95;          // confidence threshold
    std::size_t T = 0;          // prior fusion active for iterations [0, T)
    std::size_t total_iters = 200;
    double lr = 0.03;
    double momentum = 0.9;
    ThresholdMode threshold_mode = ThresholdMode::fixed;
    CurriculumVariant curriculum_variant = CurriculumVariant::linear;
    double sigma_weak = -1.0;    // < 0: defaults to 0.05 * mean per-dimension std
    double sigma_strong = -1.0;  // < 0: defaults to 0.2 * mean per-dimension std
    std::size_t hidden_dim = 64;
    std::size_t log_interval = 1;
    // alternative fusion schedule: window [start, start+duration). Only one
    // schedule may be active, so duration > 0 requires T = 0.
    std::size_t injection_start = 0;
    std::size_t injection_duration = 0;
    std::uint64_t rng_seed = 0;
};

struct TrainLogEntry {
    std::size_t iter = 0;  // 1-based iteration the entry was logged at
    double loss_l = 0.0;
    double loss_un = 0.0;
    double mask_rate = 0.0;
    double pl_acc = 0.0;
    double test_acc = 0.0;
};

struct TrainRecord {
    std::vector<TrainLogEntry> entries;
    std::vector<double> checkpoint_accuracies;  // test accuracy per logged entry
};

// ---------------------------------------------------------------------------
// Augmentation: additive isotropic Gaussian noise.

inline std::vector<double> augment(std::span<const double> x, double sigma, Rng& rng) {
    if (sigma < 0.0) throw std::invalid_argument("augment: sigma must be >= 0");
    std::vector<double> out(x.begin(), x.end());
    if (sigma == 0.0) return out;
    for (double& v : out) v += sigma * rng.normal();
    return out;
}

// ---------------------------------------------------------------------------
// Posterior pseudo-label: while fusion is on and a prior exists, the L1-
// normalized sum of prior and weak prediction; afterwards the prediction
// alone.

inline std::vector<double> fuse_prior_prediction(std::span<const double> prior,
                                                 std::span<const double> pred) {
    std::vector<double> out(prior.size());
    double total = 0.0;
    for (std::size_t j = 0; j < prior.size(); ++j) {
        out[j] = prior[j] + pred[j];
        total += out[j];
    }
    for (double& v : out) v /= total;
    return out;
}

inline std::vector<double> posterior_pseudo_label(const std::vector<double>* prior_row,
                                                  const std::vector<double>& pred_row,
                                                  std::size_t t, std::size_t T) {
    if (t <= T && prior_row != nullptr)
        return fuse_prior_prediction(*prior_row, pred_row);
    return pred_row;
}

// ---------------------------------------------------------------------------
// Curriculum thresholds: beta(c) = count(c) / max count (1 when all counts
// are zero); linear variant tau*beta, warped variant tau*beta/(2-beta).

inline std::vector<double> flex_thresholds(const std::vector<std::size_t>& confident_counts,
                                           double tau,
                                           CurriculumVariant variant = CurriculumVariant::linear) {
    std::size_t max_count = 0;
    for (std::size_t c : confident_counts) max_count = std::max(max_count, c);
    std::vector<double> out(confident_counts.size(), tau);
    if (max_count == 0) return out;
    for (std::size_t c = 0; c < confident_counts.size(); ++c) {
        const double beta =
            static_cast<double>(confident_counts[c]) / static_cast<double>(max_count);
        out[c] = variant == CurriculumVariant::linear ? tau * beta
                                                      : tau * beta / (2.0 - beta);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Combined loss on one batch pair.

struct SslLossStats {
    double loss_l = 0.0;
    double loss_un = 0.0;
    double loss = 0.0;      // loss_l + lambda * loss_un
    double mask_rate = 0.0;
    std::vector<std::size_t> confident_counts;  // per class, max posterior > base tau
    std::size_t masked_in = 0;
};

// Inputs are already-augmented batches. The posterior for each unlabeled
// sample fuses its prior row (when fuse_now and covered) with the weak-view
// prediction; samples whose posterior max exceeds the class threshold
// contribute hard-target cross-entropy on the strong view.
inline SslLossStats ssl_loss(const MLPModel& model,
                             const Matrix& x_l_weak, const std::vector<int>& y_l,
                             const Matrix& x_u_weak, const Matrix& x_u_strong,
                             const Matrix& prior_rows, const std::vector<char>& prior_covered,
                             bool fuse_now, double lambda_u,
                             const std::vector<double>& class_thresholds, double base_tau,
                             MLPGrads* grads) {
    const std::size_t num_classes = model.out_dim;
    if (x_l_weak.rows != y_l.size() || x_l_weak.rows == 0)
        throw std::invalid_argument("ssl_loss: labeled batch size mismatch");
    if (x_u_weak.rows != x_u_strong.rows || x_u_weak.rows != prior_covered.size())
        throw std::invalid_argument("ssl_loss: unlabeled batch size mismatch");
    if (class_thresholds.size() != num_classes)
        throw std::invalid_argument("ssl_loss: need one threshold per class");

    SslLossStats stats;
    stats.confident_counts.assign(num_classes, 0);

    // supervised term: mean cross-entropy on the weak labeled view
    ForwardCache cache_l;
    const Matrix p_l = mlp_forward(model, x_l_weak, &cache_l);
    const double inv_b = 1.0 / static_cast<double>(x_l_weak.rows);
    for (std::size_t i = 0; i < p_l.rows; ++i)
        stats.loss_l -= std::log(p_l.at(i, static_cast<std::size_t>(y_l[i]))) * inv_b;
    if (grads) {
        Matrix dlogits = p_l;
        for (std::size_t i = 0; i < dlogits.rows; ++i) {
            dlogits.at(i, static_cast<std::size_t>(y_l[i])) -= 1.0;
            for (std::size_t c = 0; c < num_classes; ++c) dlogits.at(i, c) *= inv_b;
        }
        mlp_backward(model, x_l_weak, cache_l, dlogits, *grads);
    }

    // unlabeled term: confidence-masked cross-entropy against hard posteriors
    if (x_u_weak.rows > 0) {
        const Matrix p_weak = mlp_forward(model, x_u_weak);
        ForwardCache cache_s;
        const Matrix p_strong = mlp_forward(model, x_u_strong, &cache_s);
        Matrix dlogits(x_u_weak.rows, num_classes);
        const double inv_mb = 1.0 / static_cast<double>(x_u_weak.rows);

        std::vector<double> posterior(num_classes);
        for (std::size_t i = 0; i < x_u_weak.rows; ++i) {
            const double* pw = p_weak.data.data() + i * num_classes;
            if (fuse_now && prior_covered[i]) {
                const double* pr = prior_rows.data.data() + i * num_classes;
                double total = 0.0;
                for (std::size_t c = 0; c < num_classes; ++c) {
                    posterior[c] = pr[c] + pw[c];
                    total += posterior[c];
                }
                for (double& v : posterior) v /= total;
            } else {
                for (std::size_t c = 0; c < num_classes; ++c) posterior[c] = pw[c];
            }
            std::size_t hard = 0;
            for (std::size_t c = 1; c < num_classes; ++c)
                if (posterior[c] > posterior[hard]) hard = c;
            const double conf = posterior[hard];
            if (conf > base_tau) ++stats.confident_counts[hard];
            if (conf > class_thresholds[hard]) {
                ++stats.masked_in;
                stats.loss_un -= std::log(p_strong.at(i, hard)) * inv_mb;
                if (grads) {
                    double* dz = dlogits.data.data() + i * num_classes;
                    const double* ps = p_strong.data.data() + i * num_classes;
                    const double w = lambda_u * inv_mb;
                    for (std::size_t c = 0; c < num_classes; ++c) dz[c] = ps[c] * w;
                    dz[hard] -= w;
                }
            }
        }
        stats.mask_rate = static_cast<double>(stats.masked_in) * inv_mb;
        if (grads && lambda_u != 0.0 && stats.masked_in > 0)
            mlp_backward(model, x_u_strong, cache_s, dlogits, *grads);
    }

    stats.loss = stats.loss_l + lambda_u * stats.loss_un;
    return stats;
}

// ---------------------------------------------------------------------------
// Training loop.

namespace detail {

struct FusionWindow {
    std::size_t begin = 0;
    std::size_t end = 0;  // fusion active for 0-based iterations in [begin, end)
};

inline FusionWindow resolve_fusion_window(const TrainConfig& cfg) {
    if (cfg.injection_duration > 0) {
        if (cfg.T > 0)
            throw std::invalid_argument(
                "train: switching-point and injection-window schedules are mutually exclusive");
        return {cfg.injection_start, cfg.injection_start + cfg.injection_duration};
    }
    return {0, cfg.T};
}

}  // namespace detail

inline void validate_train_config(const TrainConfig& cfg) {
    if (!(cfg.tau > 0.0 && cfg.tau <= 1.0))
        throw std::invalid_argument("train: tau must be in (0, 1]");
    if (cfg.T > cfg.total_iters)
        throw std::invalid_argument("train: T exceeds total_iters");
    if (cfg.total_iters < 1) throw std::invalid_argument("train: total_iters must be >= 1");
    if (cfg.batch_size < 1) throw std::invalid_argument("train: batch_size must be >= 1");
    if (!(cfg.lr > 0.0)) throw std::invalid_argument("train: lr must be > 0");
    if (cfg.momentum < 0.0 || cfg.momentum >= 1.0)
        throw std::invalid_argument("train: momentum must be in [0, 1)");
    if (cfg.hidden_dim < 1) throw std::invalid_argument("train: hidden_dim must be >= 1");
    if (cfg.log_interval < 1) throw std::invalid_argument("train: log_interval must be >= 1");
}

// Fills in data-dependent augmentation strengths.
inline TrainConfig resolve_sigmas(TrainConfig cfg, const Matrix& x) {
    const double base = mean_column_std(x);
    if (cfg.sigma_weak < 0.0) cfg.sigma_weak = 0.05 * base;
    if (cfg.sigma_strong < 0.0) cfg.sigma_strong = 0.2 * base;
    if (!(cfg.sigma_strong > cfg.sigma_weak && cfg.sigma_weak >= 0.0))
        throw std::invalid_argument("train: need sigma_strong > sigma_weak >= 0");
    return cfg;
}

struct TrainResult {
    MLPModel model;
    TrainRecord record;
};

// Mini-batch SGD with momentum and cosine learning-rate decay. Per
// iteration, in this fixed order, the RNG supplies: B labeled indices,
// mu*B unlabeled indices, labeled weak noise, unlabeled weak noise,
// unlabeled strong noise. Prior fusion never draws, so schedules that
// disable it replay the same sample stream.
inline TrainResult train(const Matrix& x, const LabelVector& y, const DatasetSplit& split,
                         const PriorPseudoLabels& ppl, const TrainConfig& config,
                         const Matrix& x_test, const LabelVector& y_test) {
    check_sample_matrix(x, "train");
    check_labels(y, "train");
    if (split.labeled.empty() || split.unlabeled.empty())
        throw std::invalid_argument("train: split needs at least 1 labeled and 1 unlabeled sample");
    if (ppl.probs.rows != x.rows)
        throw std::invalid_argument("train: prior size does not match data");
    validate_train_config(config);
    const TrainConfig cfg = resolve_sigmas(config, x);
    const detail::FusionWindow window = detail::resolve_fusion_window(cfg);
    const auto num_classes = static_cast<std::size_t>(y.num_classes);
    const std::size_t d = x.cols;
    const std::size_t B = cfg.batch_size;
    const std::size_t MB = cfg.mu * B;

    Rng rng(cfg.rng_seed);
    MLPModel model = MLPModel::init(d, cfg.hidden_dim, num_classes, cfg.rng_seed);
    SgdMomentum opt(model, cfg.momentum);

    std::vector<std::size_t> cum_confident(num_classes, 0);
    TrainRecord record;

    Matrix x_l_weak(B, d), x_u_weak(MB, d), x_u_strong(MB, d), prior_rows(MB, num_classes);
    std::vector<int> y_l(B);
    std::vector<char> prior_covered(MB);
    std::vector<std::size_t> u_batch(MB);

    for (std::size_t t = 0; t < cfg.total_iters; ++t) {
        // sample batch indices, then augmentation noise, in fixed order
        for (std::size_t i = 0; i < B; ++i) {
            const std::size_t li = rng.below(split.labeled.size());
            const std::size_t gi = split.labeled[li];
            std::copy_n(x.data.data() + gi * d, d, x_l_weak.data.data() + i * d);
            y_l[i] = split.labeled_labels.labels[li];
        }
        for (std::size_t i = 0; i < MB; ++i) {
            const std::size_t gi = split.unlabeled[rng.below(split.unlabeled.size())];
            u_batch[i] = gi;
            std::copy_n(x.data.data() + gi * d, d, x_u_weak.data.data() + i * d);
            prior_covered[i] = ppl.covered.empty() ? 0 : ppl.covered[gi];
            if (prior_covered[i])
                std::copy_n(ppl.probs.data.data() + gi * num_classes, num_classes,
                            prior_rows.data.data() + i * num_classes);
        }
        for (double& v : x_l_weak.data) v += cfg.sigma_weak * rng.normal();
        std::copy(x_u_weak.data.begin(), x_u_weak.data.end(), x_u_strong.data.begin());
        for (double& v : x_u_weak.data) v += cfg.sigma_weak * rng.normal();
        for (double& v : x_u_strong.data) v += cfg.sigma_strong * rng.normal();

        const bool fuse_now = t >= window.begin && t < window.end;
        const std::vector<double> thresholds =
            cfg.threshold_mode == ThresholdMode::fixed
                ? std::vector<double>(num_classes, cfg.tau)
                : flex_thresholds(cum_confident, cfg.tau, cfg.curriculum_variant);

        MLPGrads grads(model);
        const SslLossStats stats =
            ssl_loss(model, x_l_weak, y_l, x_u_weak, x_u_strong, prior_rows, prior_covered,
                     fuse_now, cfg.lambda_u, thresholds, cfg.tau, &grads);
        if (!std::isfinite(stats.loss))
            throw std::runtime_error("train: non-finite loss at iteration " + std::to_string(t + 1));
        for (std::size_t c = 0; c < num_classes; ++c) cum_confident[c] += stats.confident_counts[c];

        opt.step(model, grads, cosine_lr(cfg.lr, t, cfg.total_iters));

        if ((t + 1) % cfg.log_interval == 0 || t + 1 == cfg.total_iters) {
            TrainLogEntry e;
            e.iter = t + 1;
            e.loss_l = stats.loss_l;
            e.loss_un = stats.loss_un;
            e.mask_rate = stats.mask_rate;

            // pseudo-label accuracy: hard posterior argmax vs truth over the
            // unlabeled batch, under the post-update model
            const Matrix p_weak = mlp_forward(model, x_u_weak);
            std::size_t correct = 0;
            std::vector<double> posterior(num_classes);
            for (std::size_t i = 0; i < MB; ++i) {
                const double* pw = p_weak.data.data() + i * num_classes;
                if (fuse_now && prior_covered[i]) {
                    const double* pr = prior_rows.data.data() + i * num_classes;
                    double total = 0.0;
                    for (std::size_t c = 0; c < num_classes; ++c) {
                        posterior[c] = pr[c] + pw[c];
                        total += posterior[c];
                    }
                    for (double& v : posterior) v /= total;
                } else {
                    for (std::size_t c = 0; c < num_classes; ++c) posterior[c] = pw[c];
                }
                std::size_t hard = 0;
                for (std::size_t c = 1; c < num_classes; ++c)
                    if (posterior[c] > posterior[hard]) hard = c;
                if (hard == static_cast<std::size_t>(y.labels[u_batch[i]])) ++correct;
            }
            e.pl_acc = MB > 0 ? static_cast<double>(correct) / static_cast<double>(MB) : 0.0;
            e.test_acc = x_test.rows > 0 ? accuracy(model, x_test, y_test)
                                         : std::numeric_limits<double>::quiet_NaN();
            record.checkpoint_accuracies.push_back(e.test_acc);
            record.entries.push_back(e);
        }
    }
    return {std::move(model), std::move(record)};
}

// Median of the last k checkpoint values; even k averages the two central
// values.
inline double median_last_k(const std::vector<double>& values, std::size_t k) {
    if (k < 1) throw std::invalid_argument("median_last_k: k must be >= 1");
    if (values.size() < k)
        throw std::invalid_argument("median_last_k: need at least " + std::to_string(k) +
                                    " checkpoints, have " + std::to_string(values.size()));
    std::vector<double> tail(values.end() - static_cast<long>(k), values.end());
    std::sort(tail.begin(), tail.end());
    if (k % 2 == 1) return tail[k / 2];
    return 0.5 * (tail[k / 2 - 1] + tail[k / 2]);
}

// ---------------------------------------------------------------------------
// TrainRecord dump: CSV `iter,loss_l,loss_un,mask_rate,pl_acc,test_acc`.

inline void save_train_csv(const std::string& path, const TrainRecord& record) {
    std::ostringstream out;
    out << "iter,loss_l,loss_un,mask_rate,pl_acc,test_acc\n";
    for (const auto& e : record.entries)
        out << e.iter << ',' << fmt_double(e.loss_l) << ',' << fmt_double(e.loss_un) << ','
            << fmt_double(e.mask_rate) << ',' << fmt_double(e.pl_acc) << ','
            << fmt_double(e.test_acc) << "\n";
    write_text_file(path, out.str());
}

inline TrainRecord load_train_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("train record not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty train record");
    if (split_csv_line(line) !=
        std::vector<std::string>{"iter", "loss_l", "loss_un", "mask_rate", "pl_acc", "test_acc"})
        throw std::runtime_error(path + ": unexpected train record header");
    TrainRecord record;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 6)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected 6 fields");
        TrainLogEntry e;
        e.iter = static_cast<std::size_t>(std::stoull(fields[0]));
        e.loss_l = std::stod(fields[1]);
        e.loss_un = std::stod(fields[2]);
        e.mask_rate = std::stod(fields[3]);
        e.pl_acc = std::stod(fields[4]);
        e.test_acc = std::stod(fields[5]);
        record.entries.push_back(e);
        record.checkpoint_accuracies.push_back(e.test_acc);
    }
    if (record.entries.empty()) throw std::runtime_error(path + ": no logged iterations");
    return record;
}

}  // namespace priorssl

#endif
