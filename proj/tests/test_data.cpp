#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "priorssl/datasets.hpp"
#include "priorssl/io.hpp"
#include "priorssl/kmeans.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/rng.hpp"

using namespace priorssl;

namespace {

std::string temp_path(const std::string& name) {
    return (std::filesystem::temp_directory_path() / name).string();
}

void write_file(const std::string& path, const std::string& text) {
    std::ofstream out(path);
    out << text;
}

}  // namespace

// ---------------------------------------------------------------------------
// gen_two_moons

TEST(TwoMoons, ZeroNoiseFourPointsExact) {
    auto [x, y] = gen_two_moons(4, 0.0, 0);
    ASSERT_EQ(x.rows, 4u);
    ASSERT_EQ(x.cols, 2u);
    EXPECT_DOUBLE_EQ(x.at(0, 0), 1.0);
    EXPECT_DOUBLE_EQ(x.at(0, 1), 0.0);
    EXPECT_DOUBLE_EQ(x.at(1, 0), -1.0);
    EXPECT_NEAR(x.at(1, 1), 0.0, 1e-15);
    EXPECT_DOUBLE_EQ(x.at(2, 0), 0.0);
    EXPECT_DOUBLE_EQ(x.at(2, 1), 0.5);
    EXPECT_DOUBLE_EQ(x.at(3, 0), 2.0);
    EXPECT_NEAR(x.at(3, 1), 0.5, 1e-15);
    EXPECT_EQ(y.labels, (std::vector<int>{0, 0, 1, 1}));
    EXPECT_EQ(y.num_classes, 2);
}

TEST(TwoMoons, Deterministic) {
    auto [xa, ya] = gen_two_moons(1000, 0.1, 7);
    auto [xb, yb] = gen_two_moons(1000, 0.1, 7);
    EXPECT_EQ(xa.data, xb.data);
    EXPECT_EQ(ya.labels, yb.labels);
}

TEST(TwoMoons, SeedChangesNoise) {
    auto [xa, ya] = gen_two_moons(100, 0.1, 1);
    auto [xb, yb] = gen_two_moons(100, 0.1, 2);
    EXPECT_NE(xa.data, xb.data);
    EXPECT_EQ(ya.labels, yb.labels);
}

TEST(TwoMoons, RejectsBadArguments) {
    EXPECT_THROW(gen_two_moons(5, 0.1, 0), std::invalid_argument);
    EXPECT_THROW(gen_two_moons(0, 0.1, 0), std::invalid_argument);
    EXPECT_THROW(gen_two_moons(100, -0.1, 0), std::invalid_argument);
}

TEST(TwoMoons, ZeroNoiseUnitRadiusFromMoonCenters) {
    auto [x, y] = gen_two_moons(400, 0.0, 11);
    for (std::size_t i = 0; i < x.rows; ++i) {
        const double cx = y.labels[i] == 0 ? 0.0 : 1.0;
        const double cy = y.labels[i] == 0 ? 0.0 : 0.5;
        const double dist = std::hypot(x.at(i, 0) - cx, x.at(i, 1) - cy);
        ASSERT_NEAR(dist, 1.0, 1e-9) << "sample " << i;
    }
}

// The moons should defeat a linear classifier while a small MLP separates
// them almost perfectly.
TEST(TwoMoons, LinearlyHardButMlpSeparable) {
    auto [x, y] = gen_two_moons(200, 0.1, 3);
    const double linear_acc = oracle::logistic_regression_accuracy(x, y, 4000, 0.5);
    EXPECT_LT(linear_acc, 0.90);
    const double mlp_acc = oracle::supervised_mlp_accuracy(x, y, 64, 3000, 0.5, 1);
    EXPECT_GT(mlp_acc, 0.95);
}

// ---------------------------------------------------------------------------
// gen_blobs

TEST(Blobs, TightClustersRecoverableByKmeans) {
    auto [x, y] = gen_blobs(30, 3, 1e-6, 0);
    ClusterModel model = kmeans(x, 3, 0);
    for (std::size_t i = 0; i < x.rows; ++i)
        for (std::size_t j = i + 1; j < x.rows; ++j) {
            const bool same_cluster = model.assignment[i] == model.assignment[j];
            const bool same_label = y.labels[i] == y.labels[j];
            ASSERT_EQ(same_cluster, same_label) << "pair " << i << "," << j;
        }
}

TEST(Blobs, RoundRobinGivesOnePerClass) {
    auto [x, y] = gen_blobs(10, 10, 0.5, 1);
    std::vector<int> counts(10, 0);
    for (int c : y.labels) ++counts[c];
    for (int c : counts) EXPECT_EQ(c, 1);
}

TEST(Blobs, ClassCountsWithinOne) {
    auto [x, y] = gen_blobs(23, 5, 0.5, 2);
    std::vector<int> counts(5, 0);
    for (int c : y.labels) ++counts[c];
    const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
    EXPECT_LE(*hi - *lo, 1);
}

TEST(Blobs, NearestCenterAccuracyHigh) {
    auto [x, y] = gen_blobs(500, 5, 1.0, 2);
    const Matrix centers = oracle::class_means(x, y);
    EXPECT_GE(oracle::nearest_center_accuracy(x, y, centers), 0.99);
}

TEST(Blobs, Deterministic) {
    auto [xa, ya] = gen_blobs(200, 4, 1.0, 9);
    auto [xb, yb] = gen_blobs(200, 4, 1.0, 9);
    EXPECT_EQ(xa.data, xb.data);
    EXPECT_EQ(ya.labels, yb.labels);
}

TEST(Blobs, RejectsBadArguments) {
    EXPECT_THROW(gen_blobs(10, 1, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(gen_blobs(3, 5, 1.0, 0), std::invalid_argument);
    EXPECT_THROW(gen_blobs(10, 2, 0.0, 0), std::invalid_argument);
    EXPECT_THROW(gen_blobs(10, 2, -1.0, 0), std::invalid_argument);
}

// ---------------------------------------------------------------------------
// embedding file I/O

TEST(EmbeddingIo, LoadsSmallFile) {
    const std::string path = temp_path("priorssl_emb_small.txt");
    write_file(path, "n=2 d=3\n0 0 0\n1 1 1\n");
    Matrix x = load_embedding_matrix(path);
    ASSERT_EQ(x.rows, 2u);
    ASSERT_EQ(x.cols, 3u);
    for (std::size_t j = 0; j < 3; ++j) {
        EXPECT_DOUBLE_EQ(x.at(0, j), 0.0);
        EXPECT_DOUBLE_EQ(x.at(1, j), 1.0);
    }
}

TEST(EmbeddingIo, RandomRoundTripIsLossless) {
    Matrix x(100, 16);
    Rng rng(5);
    for (double& v : x.data) v = rng.normal() * 3.0;
    const std::string path = temp_path("priorssl_emb_round.txt");
    save_embedding(path, x);
    Matrix back = load_embedding(path);
    ASSERT_EQ(back.rows, x.rows);
    ASSERT_EQ(back.cols, x.cols);
    double max_err = 0.0;
    for (std::size_t i = 0; i < x.data.size(); ++i)
        max_err = std::max(max_err, std::abs(x.data[i] - back.data[i]));
    EXPECT_LT(max_err, 1e-12);
}

TEST(EmbeddingIo, MalformedHeaderNamesLineOne) {
    const std::string path = temp_path("priorssl_emb_badhdr.txt");
    write_file(path, "rows=2 cols=3\n0 0 0\n");
    try {
        load_embedding(path);
        FAIL() << "expected a header error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("line 1"), std::string::npos) << e.what();
        EXPECT_NE(std::string(e.what()).find("header"), std::string::npos) << e.what();
    }
}

TEST(EmbeddingIo, TruncatedFileNamesMissingLine) {
    const std::string path = temp_path("priorssl_emb_trunc.txt");
    write_file(path, "n=3 d=2\n0 0\n1 1\n");
    try {
        load_embedding(path);
        FAIL() << "expected a truncation error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("truncated at line 4"), std::string::npos) << e.what();
    }
}

TEST(EmbeddingIo, RowLengthMismatchNamesLine) {
    const std::string path = temp_path("priorssl_emb_short.txt");
    write_file(path, "n=2 d=3\n0 0 0\n1 1\n");
    try {
        load_embedding(path);
        FAIL() << "expected a row-length error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("row length mismatch at line 3"), std::string::npos)
            << e.what();
    }
}

TEST(EmbeddingIo, NonFiniteValueNamesLine) {
    const std::string path = temp_path("priorssl_emb_nan.txt");
    write_file(path, "n=2 d=2\n0 0\nnan 1\n");
    try {
        load_embedding(path);
        FAIL() << "expected a non-finite error";
    } catch (const std::runtime_error& e) {
        EXPECT_NE(std::string(e.what()).find("non-finite value at line 3"), std::string::npos)
            << e.what();
    }
}

TEST(EmbeddingIo, MissingFileFails) {
    EXPECT_THROW(load_embedding(temp_path("priorssl_emb_nosuch.txt")), std::runtime_error);
}

TEST(DatasetCsv, RoundTrip) {
    auto [x, y] = gen_blobs(40, 4, 1.0, 3);
    const std::string path = temp_path("priorssl_dataset_round.csv");
    save_dataset_csv(path, x, y);
    auto [xb, yb] = load_dataset_csv(path);
    EXPECT_EQ(xb.data, x.data);
    EXPECT_EQ(yb.labels, y.labels);
    EXPECT_EQ(yb.num_classes, y.num_classes);
}

// ---------------------------------------------------------------------------
// make_split

TEST(MakeSplit, ComplementIsUnlabeled) {
    LabelVector y;
    y.num_classes = 2;
    y.labels = {0, 1, 0, 1, 1};
    DatasetSplit split = make_split(y, {0, 4});
    EXPECT_EQ(split.labeled, (std::vector<std::size_t>{0, 4}));
    EXPECT_EQ(split.unlabeled, (std::vector<std::size_t>{1, 2, 3}));
    EXPECT_EQ(split.labeled_labels.labels, (std::vector<int>{0, 1}));
    EXPECT_EQ(split.labeled_labels.num_classes, 2);
    EXPECT_EQ(split.total(), 5u);
}

TEST(MakeSplit, AllLabeledLeavesUnlabeledEmpty) {
    LabelVector y;
    y.num_classes = 2;
    y.labels = {0, 1, 0};
    DatasetSplit split = make_split(y, {0, 1, 2});
    EXPECT_TRUE(split.unlabeled.empty());
    EXPECT_EQ(split.labeled.size(), 3u);
}

TEST(MakeSplit, RejectsBadIndexLists) {
    LabelVector y;
    y.num_classes = 2;
    y.labels = {0, 1, 0, 1, 1};
    EXPECT_THROW(make_split(y, {2, 2}), std::invalid_argument);
    EXPECT_THROW(make_split(y, {7}), std::invalid_argument);
    EXPECT_THROW(make_split(y, {}), std::invalid_argument);
}

TEST(MakeSplit, PartitionPropertyOnRandomCases) {
    Rng rng(123);
    for (int trial = 0; trial < 1000; ++trial) {
        const std::size_t n = 1 + rng.below(40);
        const std::size_t m = 1 + rng.below(n);
        LabelVector y;
        y.num_classes = 3;
        y.labels.resize(n);
        for (auto& v : y.labels) v = static_cast<int>(rng.below(3));
        const auto picks = rng.sample_without_replacement(n, m);
        DatasetSplit split = make_split(y, picks);

        ASSERT_EQ(split.labeled.size(), m);
        ASSERT_EQ(split.labeled.size() + split.unlabeled.size(), n);
        std::vector<char> seen(n, 0);
        for (std::size_t i : split.labeled) {
            ASSERT_LT(i, n);
            ASSERT_FALSE(seen[i]);
            seen[i] = 1;
        }
        for (std::size_t i : split.unlabeled) {
            ASSERT_LT(i, n);
            ASSERT_FALSE(seen[i]);
            seen[i] = 1;
        }
        ASSERT_TRUE(std::all_of(seen.begin(), seen.end(), [](char c) { return c == 1; }));
        for (std::size_t k = 0; k < split.labeled.size(); ++k)
            ASSERT_EQ(split.labeled_labels.labels[k], y.labels[split.labeled[k]]);
        ASSERT_TRUE(std::is_sorted(split.unlabeled.begin(), split.unlabeled.end()));
    }
}

// ---------------------------------------------------------------------------
// validation helpers

TEST(Validation, SampleMatrixChecks) {
    Matrix ok(2, 2);
    EXPECT_NO_THROW(check_sample_matrix(ok));
    Matrix bad(2, 2);
    bad.at(1, 1) = std::numeric_limits<double>::quiet_NaN();
    EXPECT_THROW(check_sample_matrix(bad), std::invalid_argument);
    Matrix empty(0, 0);
    EXPECT_THROW(check_sample_matrix(empty), std::invalid_argument);
}

TEST(Validation, LabelChecks) {
    LabelVector y;
    y.num_classes = 2;
    y.labels = {0, 1, 1};
    EXPECT_NO_THROW(check_labels(y));
    y.labels.push_back(2);
    EXPECT_THROW(check_labels(y), std::invalid_argument);
    y.labels.back() = -1;
    EXPECT_THROW(check_labels(y), std::invalid_argument);
}
