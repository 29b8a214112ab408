#ifndef PRIORSSL_KMEANS_HPP
#define PRIORSSL_KMEANS_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "priorssl/io.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/rng.hpp"

namespace priorssl {

struct ClusterModel {
    Matrix centers;                       // K x d
    std::vector<int> assignment;          // n entries in [0, K)
    double inertia = 0.0;                 // sum of squared distances to assigned centers
    std::size_t K = 0;
    std::vector<double> inertia_history;  // one entry per assignment pass, non-increasing
    std::size_t iterations = 0;
};

enum class ConstraintMode { seed_only, pinned };

// Labeled-sample constraints for seeded clustering.  seed_only uses the
// labels to place initial centers; pinned additionally keeps each labeled
// sample in its class-seeded cluster through every iteration.
struct SeedConstraints {
    std::vector<std::pair<std::size_t, int>> pinned;  // (sample index, class id)
    ConstraintMode mode = ConstraintMode::pinned;
};

struct MultiClusterRun {
    std::vector<ClusterModel> runs;
    std::vector<std::size_t> K_list;
    std::vector<std::uint64_t> seeds_used;
};

namespace detail {

inline std::size_t nearest_center(const Matrix& centers, const double* x, std::size_t d) {
    std::size_t best = 0;
    double best_d2 = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < centers.rows; ++k) {
        double d2 = 0.0;
        const double* c = centers.data.data() + k * d;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = x[j] - c[j];
            d2 += diff * diff;
        }
        if (d2 < best_d2) {  // strict: ties keep the lowest center index
            best_d2 = d2;
            best = k;
        }
    }
    return best;
}

inline std::vector<std::uint64_t> row_hashes(const Matrix& x) {
    std::vector<std::uint64_t> h(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i)
        h[i] = fnv1a64(x.data.data() + i * x.cols, x.cols * sizeof(double));
    return h;
}

// Weighted pick by exponential race: each candidate draws an Exp(weight)
// key from bits tied to its row content, the smallest key wins, so
// P(i wins) = w_i / sum(w).  Keying on content instead of a sequential
// stream makes seeding commute with permuting the rows.
inline std::size_t race_pick(const std::vector<std::uint64_t>& row_hash,
                             const std::vector<double>& weight,
                             std::uint64_t seed, std::uint64_t step) {
    std::size_t best = static_cast<std::size_t>(-1);
    double best_key = std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < row_hash.size(); ++i) {
        if (!(weight[i] > 0.0)) continue;
        const double u = unit_double(splitmix64(hash_combine(hash_combine(row_hash[i], seed), step)));
        const double key = -std::log(u) / weight[i];
        if (key < best_key) {
            best_key = key;
            best = i;
        }
    }
    return best;
}

// k-means++ over the rows listed in `candidates`, extending any centers
// already present in `model.centers` rows [0, filled).
inline void kmeanspp_extend(const Matrix& x, const std::vector<std::size_t>& candidates,
                            Matrix& centers, std::size_t filled, std::uint64_t seed) {
    const std::size_t d = x.cols;
    const auto hashes = row_hashes(x);
    std::vector<double> weight(x.rows, 0.0);

    // squared distance from each candidate to its nearest existing center
    auto refresh_from = [&](std::size_t center_idx) {
        const double* c = centers.data.data() + center_idx * d;
        for (std::size_t i : candidates) {
            double d2 = 0.0;
            const double* xi = x.data.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - c[j];
                d2 += diff * diff;
            }
            if (center_idx == 0 || d2 < weight[i]) weight[i] = d2;
        }
    };

    if (filled == 0) {
        // first center: uniform race over candidates
        std::vector<double> ones(x.rows, 0.0);
        for (std::size_t i : candidates) ones[i] = 1.0;
        const std::size_t pick = race_pick(hashes, ones, seed, 0);
        for (std::size_t j = 0; j < d; ++j) centers.at(0, j) = x.at(pick, j);
        filled = 1;
    }
    for (std::size_t c = 0; c < filled; ++c) refresh_from(c);

    for (std::size_t step = filled; step < centers.rows; ++step) {
        std::size_t pick = race_pick(hashes, weight, seed, step);
        if (pick == static_cast<std::size_t>(-1)) {
            // all candidates coincide with existing centers; any of them
            // works, race uniformly among them
            std::vector<double> ones(x.rows, 0.0);
            for (std::size_t i : candidates) ones[i] = 1.0;
            pick = race_pick(hashes, ones, seed, step);
        }
        for (std::size_t j = 0; j < d; ++j) centers.at(step, j) = x.at(pick, j);
        refresh_from(step);
    }
}

struct LloydOptions {
    std::size_t max_iter = 300;
    double tol = 1e-6;
    // forced[i] >= 0 pins sample i to that cluster on every pass
    std::vector<int> forced;
};

inline ClusterModel lloyd(const Matrix& x, Matrix initial_centers, const LloydOptions& opt) {
    const std::size_t n = x.rows, d = x.cols, K = initial_centers.rows;
    ClusterModel model;
    model.centers = std::move(initial_centers);
    model.assignment.assign(n, 0);
    model.K = K;

    std::vector<double> sums(K * d);
    std::vector<std::size_t> counts(K);
    const bool has_forced = !opt.forced.empty();

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        // assignment pass
        double inertia = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double* xi = x.data.data() + i * d;
            std::size_t a;
            if (has_forced && opt.forced[i] >= 0)
                a = static_cast<std::size_t>(opt.forced[i]);
            else
                a = nearest_center(model.centers, xi, d);
            model.assignment[i] = static_cast<int>(a);
            const double* c = model.centers.data.data() + a * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double diff = xi[j] - c[j];
                inertia += diff * diff;
            }
        }
        model.inertia = inertia;
        model.inertia_history.push_back(inertia);
        model.iterations = it + 1;

        // update pass: means of members
        std::fill(sums.begin(), sums.end(), 0.0);
        std::fill(counts.begin(), counts.end(), 0);
        for (std::size_t i = 0; i < n; ++i) {
            const std::size_t a = static_cast<std::size_t>(model.assignment[i]);
            const double* xi = x.data.data() + i * d;
            double* s = sums.data() + a * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += xi[j];
            ++counts[a];
        }

        double max_shift2 = 0.0;
        std::vector<std::size_t> repaired;
        for (std::size_t k = 0; k < K; ++k) {
            double* c = model.centers.data.data() + k * d;
            if (counts[k] == 0) {
                // re-seed an empty cluster at the sample farthest from its
                // former center (skipping pinned samples and this pass's
                // earlier repairs) so K stays constant
                std::size_t far = static_cast<std::size_t>(-1);
                double far_d2 = -1.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (has_forced && opt.forced[i] >= 0) continue;
                    if (std::find(repaired.begin(), repaired.end(), i) != repaired.end()) continue;
                    double d2 = 0.0;
                    const double* xi = x.data.data() + i * d;
                    for (std::size_t j = 0; j < d; ++j) {
                        const double diff = xi[j] - c[j];
                        d2 += diff * diff;
                    }
                    if (d2 > far_d2) {
                        far_d2 = d2;
                        far = i;
                    }
                }
                if (far != static_cast<std::size_t>(-1)) {
                    repaired.push_back(far);
                    for (std::size_t j = 0; j < d; ++j) c[j] = x.at(far, j);
                }
                max_shift2 = std::numeric_limits<double>::infinity();
                continue;
            }
            double shift2 = 0.0;
            for (std::size_t j = 0; j < d; ++j) {
                const double m = sums[k * d + j] / static_cast<double>(counts[k]);
                const double diff = m - c[j];
                shift2 += diff * diff;
                c[j] = m;
            }
            max_shift2 = std::max(max_shift2, shift2);
        }
        if (max_shift2 < opt.tol * opt.tol) break;
    }

    // final assignment against the converged centers
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double* xi = x.data.data() + i * d;
        std::size_t a;
        if (has_forced && opt.forced[i] >= 0)
            a = static_cast<std::size_t>(opt.forced[i]);
        else
            a = nearest_center(model.centers, xi, d);
        model.assignment[i] = static_cast<int>(a);
        const double* c = model.centers.data.data() + a * d;
        for (std::size_t j = 0; j < d; ++j) {
            const double diff = xi[j] - c[j];
            inertia += diff * diff;
        }
    }
    model.inertia = inertia;
    model.inertia_history.push_back(inertia);
    return model;
}

}  // namespace detail

inline ClusterModel kmeans(const Matrix& x, std::size_t K, std::uint64_t rng_seed,
                           std::size_t max_iter = 300, double tol = 1e-6) {
    check_sample_matrix(x, "kmeans");
    if (K < 1) throw std::invalid_argument("kmeans: K must be >= 1");
    if (K > x.rows)
        throw std::invalid_argument("kmeans: K=" + std::to_string(K) + " exceeds n=" +
                                    std::to_string(x.rows));
    if (max_iter < 1) throw std::invalid_argument("kmeans: max_iter must be >= 1");
    if (tol < 0.0) throw std::invalid_argument("kmeans: tol must be >= 0");

    std::vector<std::size_t> all(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) all[i] = i;
    Matrix centers(K, x.cols);
    detail::kmeanspp_extend(x, all, centers, 0, rng_seed);

    detail::LloydOptions opt;
    opt.max_iter = max_iter;
    opt.tol = tol;
    return detail::lloyd(x, std::move(centers), opt);
}

inline ClusterModel constrained_seed_kmeans(const Matrix& x, std::size_t K,
                                            const SeedConstraints& constraints,
                                            std::uint64_t rng_seed,
                                            std::size_t max_iter = 300, double tol = 1e-6) {
    check_sample_matrix(x, "constrained_seed_kmeans");
    if (K > x.rows)
        throw std::invalid_argument("constrained_seed_kmeans: K exceeds n");
    if (max_iter < 1) throw std::invalid_argument("constrained_seed_kmeans: max_iter must be >= 1");

    // distinct pinned classes, ascending; class i seeds center slot i
    std::vector<int> classes;
    for (const auto& [idx, cls] : constraints.pinned) {
        if (idx >= x.rows)
            throw std::invalid_argument("constrained_seed_kmeans: pinned index out of range");
        if (cls < 0) throw std::invalid_argument("constrained_seed_kmeans: negative class id");
        if (std::find(classes.begin(), classes.end(), cls) == classes.end()) classes.push_back(cls);
    }
    std::sort(classes.begin(), classes.end());
    const std::size_t L = classes.size();
    if (L > K)
        throw std::invalid_argument("constrained_seed_kmeans: " + std::to_string(L) +
                                    " pinned classes exceed K=" + std::to_string(K));

    auto slot_of = [&](int cls) {
        return static_cast<std::size_t>(
            std::lower_bound(classes.begin(), classes.end(), cls) - classes.begin());
    };

    Matrix centers(K, x.cols);
    std::vector<std::size_t> slot_count(L, 0);
    std::vector<bool> is_pinned(x.rows, false);
    for (const auto& [idx, cls] : constraints.pinned) {
        const std::size_t s = slot_of(cls);
        for (std::size_t j = 0; j < x.cols; ++j) centers.at(s, j) += x.at(idx, j);
        ++slot_count[s];
        is_pinned[idx] = true;
    }
    for (std::size_t s = 0; s < L; ++s)
        for (std::size_t j = 0; j < x.cols; ++j)
            centers.at(s, j) /= static_cast<double>(slot_count[s]);

    if (K > L) {
        std::vector<std::size_t> unpinned;
        for (std::size_t i = 0; i < x.rows; ++i)
            if (!is_pinned[i]) unpinned.push_back(i);
        if (unpinned.empty())
            throw std::invalid_argument(
                "constrained_seed_kmeans: K exceeds pinned classes but no unpinned samples remain");
        detail::kmeanspp_extend(x, unpinned, centers, L, rng_seed);
    }

    detail::LloydOptions opt;
    opt.max_iter = max_iter;
    opt.tol = tol;
    if (constraints.mode == ConstraintMode::pinned) {
        opt.forced.assign(x.rows, -1);
        for (const auto& [idx, cls] : constraints.pinned)
            opt.forced[idx] = static_cast<int>(slot_of(cls));
    }
    return detail::lloyd(x, std::move(centers), opt);
}

inline MultiClusterRun multi_cluster(const Matrix& x, const std::vector<std::size_t>& K_list,
                                     const SeedConstraints* constraints, std::uint64_t base_seed,
                                     std::size_t max_iter = 300, double tol = 1e-6) {
    if (K_list.empty()) throw std::invalid_argument("multi_cluster: empty K_list");
    MultiClusterRun out;
    out.K_list = K_list;
    for (std::size_t i = 0; i < K_list.size(); ++i) {
        const std::uint64_t seed = base_seed + i;
        out.seeds_used.push_back(seed);
        if (constraints)
            out.runs.push_back(constrained_seed_kmeans(x, K_list[i], *constraints, seed, max_iter, tol));
        else
            out.runs.push_back(kmeans(x, K_list[i], seed, max_iter, tol));
    }
    return out;
}

inline MultiClusterRun multi_cluster(const Matrix& x, const std::vector<std::size_t>& K_list,
                                     std::uint64_t base_seed) {
    return multi_cluster(x, K_list, nullptr, base_seed);
}

// Assignment dump: CSV `sample,run0,...,run{C-1}`.
inline void save_assignments_csv(const std::string& path, const MultiClusterRun& mc) {
    if (mc.runs.empty()) throw std::invalid_argument("save_assignments_csv: no runs");
    std::ostringstream out;
    out << "sample";
    for (std::size_t r = 0; r < mc.runs.size(); ++r) out << ",run" << r;
    out << "\n";
    const std::size_t n = mc.runs.front().assignment.size();
    for (std::size_t i = 0; i < n; ++i) {
        out << i;
        for (const auto& run : mc.runs) out << ',' << run.assignment[i];
        out << "\n";
    }
    write_text_file(path, out.str());
}

// Returns per-run assignment columns: result[r][i] = cluster of sample i in run r.
inline std::vector<std::vector<int>> load_assignments_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("assignments file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty assignments file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "sample")
        throw std::runtime_error(path + ": expected header 'sample,run0,...'");
    const std::size_t C = header.size() - 1;
    std::vector<std::vector<int>> runs(C);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != C + 1)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(C + 1) + " fields");
        for (std::size_t r = 0; r < C; ++r) runs[r].push_back(std::stoi(fields[r + 1]));
    }
    if (runs[0].empty()) throw std::runtime_error(path + ": no data rows");
    return runs;
}

}  // namespace priorssl

#endif
