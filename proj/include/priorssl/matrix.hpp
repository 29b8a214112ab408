#ifndef PRIORSSL_MATRIX_HPP
#define PRIORSSL_MATRIX_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace priorssl {

// Dense row-major matrix of doubles. Rows are samples, columns are feature
// coordinates.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c, double fill = 0.0)
        : rows(r), cols(c), data(r * c, fill) {}

    double& at(std::size_t i, std::size_t j) { return data[i * cols + j]; }
    double at(std::size_t i, std::size_t j) const { return data[i * cols + j]; }

    std::span<double> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const double> row(std::size_t i) const { return {data.data() + i * cols, cols}; }
};

using SampleMatrix = Matrix;

inline void check_sample_matrix(const Matrix& x, const char* what = "sample matrix") {
    if (x.rows < 1 || x.cols < 1)
        throw std::invalid_argument(std::string(what) + ": need at least 1 row and 1 column");
    for (double v : x.data)
        if (!std::isfinite(v))
            throw std::invalid_argument(std::string(what) + ": non-finite entry");
}

struct LabelVector {
    std::vector<int> labels;
    int num_classes = 0;
};

inline void check_labels(const LabelVector& y, const char* what = "labels") {
    if (y.num_classes < 1)
        throw std::invalid_argument(std::string(what) + ": num_classes must be >= 1");
    for (int c : y.labels)
        if (c < 0 || c >= y.num_classes)
            throw std::invalid_argument(std::string(what) + ": label out of range [0, num_classes)");
}

// Labeled/unlabeled partition of {0..n-1}. `labeled_labels` is aligned with
// `labeled`; `unlabeled` is the ascending complement.
struct DatasetSplit {
    std::vector<std::size_t> labeled;
    LabelVector labeled_labels;
    std::vector<std::size_t> unlabeled;

    std::size_t total() const { return labeled.size() + unlabeled.size(); }
};

inline DatasetSplit make_split(const LabelVector& all_labels,
                               const std::vector<std::size_t>& labeled_indices) {
    const std::size_t n = all_labels.labels.size();
    if (labeled_indices.empty())
        throw std::invalid_argument("make_split: need at least one labeled index");
    std::vector<char> taken(n, 0);
    for (std::size_t i : labeled_indices) {
        if (i >= n)
            throw std::invalid_argument("make_split: index " + std::to_string(i) + " out of range");
        if (taken[i])
            throw std::invalid_argument("make_split: duplicate index " + std::to_string(i));
        taken[i] = 1;
    }
    DatasetSplit split;
    split.labeled = labeled_indices;
    split.labeled_labels.num_classes = all_labels.num_classes;
    split.labeled_labels.labels.reserve(labeled_indices.size());
    for (std::size_t i : labeled_indices)
        split.labeled_labels.labels.push_back(all_labels.labels[i]);
    for (std::size_t i = 0; i < n; ++i)
        if (!taken[i]) split.unlabeled.push_back(i);
    return split;
}

inline double squared_distance(std::span<const double> a, std::span<const double> b) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.size(); ++j) {
        const double d = a[j] - b[j];
        s += d * d;
    }
    return s;
}

inline double distance(std::span<const double> a, std::span<const double> b) {
    return std::sqrt(squared_distance(a, b));
}

// Mean of per-column standard deviations; the default scale for augmentation
// noise.
inline double mean_column_std(const Matrix& x) {
    if (x.rows == 0 || x.cols == 0) return 0.0;
    double acc = 0.0;
    for (std::size_t j = 0; j < x.cols; ++j) {
        double mean = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) mean += x.at(i, j);
        mean /= static_cast<double>(x.rows);
        double var = 0.0;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double d = x.at(i, j) - mean;
            var += d * d;
        }
        acc += std::sqrt(var / static_cast<double>(x.rows));
    }
    return acc / static_cast<double>(x.cols);
}

}  // namespace priorssl

#endif
