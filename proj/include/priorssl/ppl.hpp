#ifndef PRIORSSL_PPL_HPP
#define PRIORSSL_PPL_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorssl/io.hpp"
#include "priorssl/kmeans.hpp"
#include "priorssl/matrix.hpp"

namespace priorssl {

enum class PplSource { cluster, llgc };

// Per-sample class distributions assigned before training. Covered rows sum
// to 1; uncovered rows are exactly zero and excluded from statistics.
// Labeled rows hold their ground-truth one-hot.
struct PriorPseudoLabels {
    Matrix probs;               // n x num_classes
    std::vector<char> covered;  // per sample
    std::vector<char> labeled;  // per sample
    PplSource source = PplSource::cluster;
    int num_classes = 0;
};

namespace detail {

inline std::size_t argmax_row(const double* row, std::size_t c) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < c; ++j)
        if (row[j] > row[best]) best = j;  // strict: ties keep the smallest class id
    return best;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Cluster label propagation: per run, each cluster that contains labeled
// samples spreads its normalized labeled-class counts to every member; the
// per-run contributions are summed and the rows normalized at the end.

inline PriorPseudoLabels propagate_from_assignments(
    const std::vector<std::vector<int>>& run_assignments, const DatasetSplit& split) {
    if (run_assignments.empty())
        throw std::invalid_argument("propagate_cluster_labels: no clustering runs");
    const std::size_t n = split.total();
    for (const auto& a : run_assignments)
        if (a.size() != n)
            throw std::invalid_argument("propagate_cluster_labels: run covers " +
                                        std::to_string(a.size()) + " samples, split covers " +
                                        std::to_string(n));
    check_labels(split.labeled_labels, "propagate_cluster_labels");
    const auto num_classes = static_cast<std::size_t>(split.labeled_labels.num_classes);

    PriorPseudoLabels out;
    out.num_classes = split.labeled_labels.num_classes;
    out.probs = Matrix(n, num_classes);
    out.covered.assign(n, 0);
    out.labeled.assign(n, 0);

    for (const auto& assign : run_assignments) {
        int k_max = 0;
        for (int a : assign) k_max = std::max(k_max, a);
        const auto K = static_cast<std::size_t>(k_max) + 1;

        // labeled-member class counts per cluster
        Matrix counts(K, num_classes);
        std::vector<double> totals(K, 0.0);
        for (std::size_t li = 0; li < split.labeled.size(); ++li) {
            const auto k = static_cast<std::size_t>(assign[split.labeled[li]]);
            const auto cls = static_cast<std::size_t>(split.labeled_labels.labels[li]);
            counts.at(k, cls) += 1.0;
            totals[k] += 1.0;
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto k = static_cast<std::size_t>(assign[i]);
            if (totals[k] == 0.0) continue;  // cluster saw no labels, propagates nothing
            double* row = out.probs.data.data() + i * num_classes;
            const double* c = counts.data.data() + k * num_classes;
            for (std::size_t j = 0; j < num_classes; ++j) row[j] += c[j] / totals[k];
        }
    }

    for (std::size_t i = 0; i < n; ++i) {
        double* row = out.probs.data.data() + i * num_classes;
        double total = 0.0;
        for (std::size_t j = 0; j < num_classes; ++j) total += row[j];
        if (total > 0.0) {
            for (std::size_t j = 0; j < num_classes; ++j) row[j] /= total;
            out.covered[i] = 1;
        }
    }
    // labeled samples keep their ground truth, whatever propagation said
    for (std::size_t li = 0; li < split.labeled.size(); ++li) {
        const std::size_t i = split.labeled[li];
        double* row = out.probs.data.data() + i * num_classes;
        std::fill(row, row + num_classes, 0.0);
        row[split.labeled_labels.labels[li]] = 1.0;
        out.covered[i] = 1;
        out.labeled[i] = 1;
    }
    return out;
}

inline PriorPseudoLabels propagate_cluster_labels(const MultiClusterRun& mc,
                                                  const DatasetSplit& split) {
    std::vector<std::vector<int>> assignments;
    for (const auto& run : mc.runs) assignments.push_back(run.assignment);
    return propagate_from_assignments(assignments, split);
}

// ---------------------------------------------------------------------------
// LLGC propagation over a symmetric k-NN Gaussian affinity graph:
// F = alpha * S * F + (1 - alpha) * Y iterated to its fixed point with
// S = D^{-1/2} W D^{-1/2}.

// Mean distance from each sample to its k nearest neighbors; the usual
// bandwidth choice when none is given.
inline double mean_knn_distance(const Matrix& x, std::size_t k_nn) {
    const std::size_t n = x.rows;
    if (n < 2) throw std::invalid_argument("mean_knn_distance: need at least 2 samples");
    k_nn = std::min(k_nn, n - 1);
    double total = 0.0;
    std::vector<double> d(n);
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j)
            d[j] = (j == i) ? std::numeric_limits<double>::infinity()
                            : distance(x.row(i), x.row(j));
        std::nth_element(d.begin(), d.begin() + static_cast<long>(k_nn - 1), d.end());
        for (std::size_t j = 0; j < k_nn; ++j) total += d[j];
    }
    return total / (static_cast<double>(n) * static_cast<double>(k_nn));
}

inline PriorPseudoLabels llgc_propagate(const Matrix& x, const DatasetSplit& split, double alpha,
                                        double sigma, std::size_t k_nn,
                                        double* out_residual = nullptr) {
    check_sample_matrix(x, "llgc_propagate");
    if (!(alpha > 0.0 && alpha < 1.0))
        throw std::invalid_argument("llgc_propagate: alpha must be in (0, 1)");
    if (!(sigma > 0.0)) throw std::invalid_argument("llgc_propagate: sigma must be > 0");
    if (k_nn < 1) throw std::invalid_argument("llgc_propagate: k_nn must be >= 1");
    const std::size_t n = x.rows;
    if (split.total() != n)
        throw std::invalid_argument("llgc_propagate: split does not match sample count");
    check_labels(split.labeled_labels, "llgc_propagate");
    const auto num_classes = static_cast<std::size_t>(split.labeled_labels.num_classes);
    k_nn = std::min(k_nn, n - 1);

    // symmetric k-NN edges: i~j when either lists the other among its k nearest
    std::vector<std::vector<std::size_t>> nbr(n);
    {
        std::vector<std::pair<double, std::size_t>> d(n);
        for (std::size_t i = 0; i < n; ++i) {
            for (std::size_t j = 0; j < n; ++j)
                d[j] = {(j == i) ? std::numeric_limits<double>::infinity()
                                 : squared_distance(x.row(i), x.row(j)),
                        j};
            std::partial_sort(d.begin(), d.begin() + static_cast<long>(k_nn), d.end());
            for (std::size_t t = 0; t < k_nn; ++t) {
                const std::size_t j = d[t].second;
                nbr[i].push_back(j);
                nbr[j].push_back(i);
            }
        }
        for (auto& list : nbr) {
            std::sort(list.begin(), list.end());
            list.erase(std::unique(list.begin(), list.end()), list.end());
        }
    }

    // normalized affinities, one adjacency list per node
    std::vector<double> degree(n, 0.0);
    std::vector<std::vector<double>> weight(n);
    for (std::size_t i = 0; i < n; ++i) {
        weight[i].reserve(nbr[i].size());
        for (std::size_t j : nbr[i]) {
            const double w = std::exp(-squared_distance(x.row(i), x.row(j)) / (2.0 * sigma * sigma));
            weight[i].push_back(w);
            degree[i] += w;
        }
    }
    std::vector<std::vector<double>> s(n);
    for (std::size_t i = 0; i < n; ++i) {
        s[i].resize(nbr[i].size(), 0.0);
        if (degree[i] <= 0.0) continue;
        for (std::size_t t = 0; t < nbr[i].size(); ++t) {
            const std::size_t j = nbr[i][t];
            if (degree[j] <= 0.0) continue;
            s[i][t] = weight[i][t] / std::sqrt(degree[i] * degree[j]);
        }
    }

    Matrix y(n, num_classes);
    for (std::size_t li = 0; li < split.labeled.size(); ++li)
        y.at(split.labeled[li], static_cast<std::size_t>(split.labeled_labels.labels[li])) = 1.0;

    Matrix f = y;
    Matrix next(n, num_classes);
    const std::size_t max_sweeps = 1000000;
    double change = std::numeric_limits<double>::infinity();
    for (std::size_t sweep = 0; sweep < max_sweeps && change >= 1e-10; ++sweep) {
        change = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            double* ni = next.data.data() + i * num_classes;
            const double* yi = y.data.data() + i * num_classes;
            for (std::size_t c = 0; c < num_classes; ++c) ni[c] = (1.0 - alpha) * yi[c];
            for (std::size_t t = 0; t < nbr[i].size(); ++t) {
                const double w = alpha * s[i][t];
                if (w == 0.0) continue;
                const double* fj = f.data.data() + nbr[i][t] * num_classes;
                for (std::size_t c = 0; c < num_classes; ++c) ni[c] += w * fj[c];
            }
            for (std::size_t c = 0; c < num_classes; ++c)
                change = std::max(change, std::abs(ni[c] - f.data[i * num_classes + c]));
        }
        std::swap(f, next);
    }
    if (change >= 1e-10)
        throw std::runtime_error("llgc_propagate: no fixed point after " +
                                 std::to_string(max_sweeps) + " sweeps");
    if (out_residual) {
        // one extra application measures how far the reported F is from the fixed point
        double res = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* yi = y.data.data() + i * num_classes;
            const double* fi = f.data.data() + i * num_classes;
            for (std::size_t c = 0; c < num_classes; ++c) {
                double v = (1.0 - alpha) * yi[c];
                for (std::size_t t = 0; t < nbr[i].size(); ++t)
                    if (s[i][t] != 0.0) v += alpha * s[i][t] * f.data[nbr[i][t] * num_classes + c];
                res = std::max(res, std::abs(v - fi[c]));
            }
        }
        *out_residual = res;
    }

    PriorPseudoLabels out;
    out.source = PplSource::llgc;
    out.num_classes = split.labeled_labels.num_classes;
    out.probs = Matrix(n, num_classes);
    out.covered.assign(n, 0);
    out.labeled.assign(n, 0);
    for (std::size_t li : split.labeled) out.labeled[li] = 1;
    for (std::size_t i = 0; i < n; ++i) {
        const double* fi = f.data.data() + i * num_classes;
        double total = 0.0;
        for (std::size_t c = 0; c < num_classes; ++c) total += fi[c];
        // diffusion mass below this floor means nothing reached the node
        if (total > 1e-8) {
            double* row = out.probs.data.data() + i * num_classes;
            for (std::size_t c = 0; c < num_classes; ++c) row[c] = fi[c] / total;
            out.covered[i] = 1;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Calibration and accuracy metrics.

// Expected calibration error over the covered rows: confidence = max
// probability, binned into `bins` equal-width bins over (0, 1].
inline double ece(const Matrix& probs, const std::vector<char>& covered,
                  const LabelVector& truth, std::size_t bins) {
    if (bins < 1) throw std::invalid_argument("ece: bins must be >= 1");
    if (probs.rows != truth.labels.size() || probs.rows != covered.size())
        throw std::invalid_argument("ece: size mismatch");
    std::vector<double> conf_sum(bins, 0.0), acc_sum(bins, 0.0);
    std::vector<std::size_t> count(bins, 0);
    std::size_t scored = 0;
    for (std::size_t i = 0; i < probs.rows; ++i) {
        if (!covered[i]) continue;
        const double* row = probs.data.data() + i * probs.cols;
        const std::size_t pred = detail::argmax_row(row, probs.cols);
        const double conf = row[pred];
        // bin b holds (b/bins, (b+1)/bins]
        const auto raw = static_cast<long>(std::ceil(conf * static_cast<double>(bins))) - 1;
        const std::size_t b = static_cast<std::size_t>(std::clamp<long>(raw, 0, static_cast<long>(bins) - 1));
        conf_sum[b] += conf;
        acc_sum[b] += (pred == static_cast<std::size_t>(truth.labels[i])) ? 1.0 : 0.0;
        ++count[b];
        ++scored;
    }
    if (scored == 0) throw std::invalid_argument("ece: no covered samples to score");
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
        if (count[b] == 0) continue;
        const double inv = 1.0 / static_cast<double>(count[b]);
        total += (static_cast<double>(count[b]) / static_cast<double>(scored)) *
                 std::abs(acc_sum[b] * inv - conf_sum[b] * inv);
    }
    return total;
}

inline double ece(const PriorPseudoLabels& ppl, const LabelVector& truth, std::size_t bins) {
    return ece(ppl.probs, ppl.covered, truth, bins);
}

// prediction-matrix variant: every row is scored
inline double ece(const Matrix& probs, const LabelVector& truth, std::size_t bins) {
    return ece(probs, std::vector<char>(probs.rows, 1), truth, bins);
}

// Fraction of covered unlabeled samples whose argmax matches the truth.
// Undefined (nullopt) when no unlabeled sample is covered.
inline std::optional<double> ppl_accuracy(const PriorPseudoLabels& ppl, const LabelVector& truth) {
    if (ppl.probs.rows != truth.labels.size())
        throw std::invalid_argument("ppl_accuracy: size mismatch");
    std::size_t covered = 0, correct = 0;
    for (std::size_t i = 0; i < ppl.probs.rows; ++i) {
        if (ppl.labeled[i] || !ppl.covered[i]) continue;
        ++covered;
        const double* row = ppl.probs.data.data() + i * ppl.probs.cols;
        if (detail::argmax_row(row, ppl.probs.cols) == static_cast<std::size_t>(truth.labels[i]))
            ++correct;
    }
    if (covered == 0) return std::nullopt;
    return static_cast<double>(correct) / static_cast<double>(covered);
}

// Fraction of unlabeled samples that received any prior mass.
inline double ppl_coverage(const PriorPseudoLabels& ppl) {
    std::size_t unlabeled = 0, covered = 0;
    for (std::size_t i = 0; i < ppl.covered.size(); ++i) {
        if (ppl.labeled[i]) continue;
        ++unlabeled;
        if (ppl.covered[i]) ++covered;
    }
    if (unlabeled == 0) return 1.0;
    return static_cast<double>(covered) / static_cast<double>(unlabeled);
}

// ---------------------------------------------------------------------------
// PPL dump: CSV `sample,covered,p0,...,p{C-1}`. The labeled flags are not
// stored here; they travel with the selection artifact and are restored by
// the caller after loading.

inline void save_ppl_csv(const std::string& path, const PriorPseudoLabels& ppl) {
    std::ostringstream out;
    out << "sample,covered";
    for (std::size_t c = 0; c < ppl.probs.cols; ++c) out << ",p" << c;
    out << "\n";
    for (std::size_t i = 0; i < ppl.probs.rows; ++i) {
        out << i << ',' << (ppl.covered[i] ? 1 : 0);
        for (std::size_t c = 0; c < ppl.probs.cols; ++c)
            out << ',' << fmt_double(ppl.probs.at(i, c));
        out << "\n";
    }
    write_text_file(path, out.str());
}

inline PriorPseudoLabels load_ppl_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("ppl file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty ppl file");
    const auto header = split_csv_line(line);
    if (header.size() < 3 || header[0] != "sample" || header[1] != "covered")
        throw std::runtime_error(path + ": expected header 'sample,covered,p0,...'");
    const std::size_t num_classes = header.size() - 2;

    std::vector<double> values;
    std::vector<char> covered;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != num_classes + 2)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(num_classes + 2) + " fields");
        covered.push_back(fields[1] == "1" ? 1 : 0);
        for (std::size_t c = 0; c < num_classes; ++c) values.push_back(std::stod(fields[2 + c]));
    }
    if (covered.empty()) throw std::runtime_error(path + ": no data rows");

    PriorPseudoLabels ppl;
    ppl.num_classes = static_cast<int>(num_classes);
    ppl.probs = Matrix(covered.size(), num_classes);
    ppl.probs.data = std::move(values);
    ppl.covered = std::move(covered);
    ppl.labeled.assign(ppl.probs.rows, 0);
    return ppl;
}

}  // namespace priorssl

#endif
