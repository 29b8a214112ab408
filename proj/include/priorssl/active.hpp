#ifndef PRIORSSL_ACTIVE_HPP
#define PRIORSSL_ACTIVE_HPP

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "priorssl/io.hpp"
#include "priorssl/kmeans.hpp"
#include "priorssl/matrix.hpp"
#include "priorssl/rng.hpp"

namespace priorssl {

// ---------------------------------------------------------------------------
// Feature fine-tuning: a single affine map trained to pull each sample toward
// the centers of the clusters it belongs to across C fixed k-means runs.

struct FineTuneConfig {
    std::size_t C = 6;        // number of clustering runs
    std::size_t K = 10;       // clusters per run
    std::size_t epochs = 40;
    double learning_rate = 0.01;
    std::uint64_t rng_seed = 0;
};

class FinetuneDivergenceError : public std::runtime_error {
public:
    explicit FinetuneDivergenceError(std::size_t at_epoch)
        : std::runtime_error("finetune_features: non-finite loss at epoch " +
                             std::to_string(at_epoch)),
          epoch(at_epoch) {}
    std::size_t epoch;
};

// Affine map f(x) = W x + b with W stored row-major as [out][in].
struct AffineMap {
    Matrix W;                // d x d
    std::vector<double> b;   // d

    static AffineMap identity(std::size_t d) {
        AffineMap m;
        m.W = Matrix(d, d);
        for (std::size_t j = 0; j < d; ++j) m.W.at(j, j) = 1.0;
        m.b.assign(d, 0.0);
        return m;
    }

    Matrix apply(const Matrix& x) const {
        Matrix f(x.rows, x.cols);
        const std::size_t d = x.cols;
        for (std::size_t i = 0; i < x.rows; ++i) {
            const double* xi = x.data.data() + i * d;
            double* fi = f.data.data() + i * d;
            for (std::size_t o = 0; o < d; ++o) {
                double acc = b[o];
                const double* w = W.data.data() + o * d;
                for (std::size_t j = 0; j < d; ++j) acc += w[j] * xi[j];
                fi[o] = acc;
            }
        }
        return f;
    }
};

struct FineTuneResult {
    Matrix f_fine;
    AffineMap map;
    std::vector<double> loss_history;  // loss before each update, plus final
};

// Mean squared distance of mapped samples to the mapped means of their frozen
// clusters, averaged over runs and samples, with the gradient w.r.t. the map.
// Residuals inside a cluster sum to zero, so treating the means as constants
// gives the exact gradient.
inline double finetune_loss_grad(const Matrix& x,
                                 const std::vector<std::vector<int>>& run_assignments,
                                 const AffineMap& map, Matrix* dW, std::vector<double>* db) {
    const std::size_t n = x.rows, d = x.cols, C = run_assignments.size();
    if (C == 0) throw std::invalid_argument("finetune_loss_grad: no clustering runs");
    const Matrix f = map.apply(x);

    Matrix g(n, d);  // dLoss/df per sample
    double loss = 0.0;
    for (const auto& assign : run_assignments) {
        if (assign.size() != n)
            throw std::invalid_argument("finetune_loss_grad: assignment size mismatch");
        int k_max = 0;
        for (int a : assign) k_max = std::max(k_max, a);
        Matrix sums(static_cast<std::size_t>(k_max) + 1, d);
        std::vector<std::size_t> counts(static_cast<std::size_t>(k_max) + 1, 0);
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<std::size_t>(assign[i]);
            const double* fi = f.data.data() + i * d;
            double* s = sums.data.data() + a * d;
            for (std::size_t j = 0; j < d; ++j) s[j] += fi[j];
            ++counts[a];
        }
        for (std::size_t i = 0; i < n; ++i) {
            const auto a = static_cast<std::size_t>(assign[i]);
            const double* fi = f.data.data() + i * d;
            const double* s = sums.data.data() + a * d;
            const double inv = 1.0 / static_cast<double>(counts[a]);
            double* gi = g.data.data() + i * d;
            for (std::size_t j = 0; j < d; ++j) {
                const double r = fi[j] - s[j] * inv;
                loss += r * r;
                gi[j] += r;
            }
        }
    }
    const double scale = 1.0 / (static_cast<double>(C) * static_cast<double>(n));
    loss *= scale;

    if (dW && db) {
        *dW = Matrix(d, d);
        db->assign(d, 0.0);
        const double gscale = 2.0 * scale;
        for (std::size_t i = 0; i < n; ++i) {
            const double* gi = g.data.data() + i * d;
            const double* xi = x.data.data() + i * d;
            for (std::size_t o = 0; o < d; ++o) {
                const double go = gi[o] * gscale;
                double* w = dW->data.data() + o * d;
                for (std::size_t j = 0; j < d; ++j) w[j] += go * xi[j];
                (*db)[o] += go;
            }
        }
    }
    return loss;
}

inline FineTuneResult finetune_features_full(const Matrix& f_self, const FineTuneConfig& cfg) {
    check_sample_matrix(f_self, "finetune_features");
    if (cfg.epochs < 1) throw std::invalid_argument("finetune_features: epochs must be >= 1");
    if (!(cfg.learning_rate > 0.0))
        throw std::invalid_argument("finetune_features: learning_rate must be > 0");
    if (cfg.C < 1) throw std::invalid_argument("finetune_features: C must be >= 1");

    // cluster memberships are frozen from C runs on the raw features
    const std::vector<std::size_t> K_list(cfg.C, cfg.K);
    const MultiClusterRun mc = multi_cluster(f_self, K_list, cfg.rng_seed);
    std::vector<std::vector<int>> assignments;
    for (const auto& run : mc.runs) assignments.push_back(run.assignment);

    FineTuneResult out;
    out.map = AffineMap::identity(f_self.cols);
    Matrix dW;
    std::vector<double> db;
    for (std::size_t epoch = 0; epoch < cfg.epochs; ++epoch) {
        const double loss = finetune_loss_grad(f_self, assignments, out.map, &dW, &db);
        if (!std::isfinite(loss)) throw FinetuneDivergenceError(epoch);
        out.loss_history.push_back(loss);
        for (std::size_t i = 0; i < dW.data.size(); ++i)
            out.map.W.data[i] -= cfg.learning_rate * dW.data[i];
        for (std::size_t j = 0; j < db.size(); ++j) out.map.b[j] -= cfg.learning_rate * db[j];
    }
    const double final_loss = finetune_loss_grad(f_self, assignments, out.map, nullptr, nullptr);
    if (!std::isfinite(final_loss)) throw FinetuneDivergenceError(cfg.epochs);
    out.loss_history.push_back(final_loss);
    out.f_fine = out.map.apply(f_self);
    return out;
}

inline Matrix finetune_features(const Matrix& f_self, const FineTuneConfig& cfg) {
    return finetune_features_full(f_self, cfg).f_fine;
}

// ---------------------------------------------------------------------------
// Stable co-cluster groups and medoid selection.

struct StableGroup {
    std::vector<std::size_t> members;  // ascending
    std::vector<int> signature;        // cluster id per run
    std::size_t medoid = 0;
};

namespace detail {

// summed Euclidean distance from members[pos] to all members
inline double distance_sum(const Matrix& x, const std::vector<std::size_t>& members,
                           std::size_t pos) {
    double total = 0.0;
    for (std::size_t other : members)
        total += distance(x.row(members[pos]), x.row(other));
    return total;
}

inline std::size_t group_medoid(const Matrix& x, const std::vector<std::size_t>& members) {
    std::size_t best = members.front();
    double best_sum = std::numeric_limits<double>::infinity();
    for (std::size_t p = 0; p < members.size(); ++p) {
        const double s = distance_sum(x, members, p);
        if (s < best_sum) {  // strict: ties keep the smallest member index
            best_sum = s;
            best = members[p];
        }
    }
    return best;
}

}  // namespace detail

// Groups samples by identical cluster-id tuples across all runs, largest
// group first (ties by smallest member index). Medoids live in the feature
// space the runs were clustered on.
inline std::vector<StableGroup> stable_groups_from_assignments(
    const Matrix& x, const std::vector<std::vector<int>>& run_assignments) {
    if (run_assignments.empty())
        throw std::invalid_argument("stable_groups: need at least one run");
    const std::size_t n = x.rows;
    for (const auto& a : run_assignments)
        if (a.size() != n) throw std::invalid_argument("stable_groups: run size mismatch");

    std::map<std::vector<int>, std::vector<std::size_t>> by_signature;
    std::vector<int> sig(run_assignments.size());
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t r = 0; r < run_assignments.size(); ++r) sig[r] = run_assignments[r][i];
        by_signature[sig].push_back(i);
    }

    std::vector<StableGroup> groups;
    groups.reserve(by_signature.size());
    for (auto& [signature, members] : by_signature) {
        StableGroup g;
        g.signature = signature;
        g.members = std::move(members);  // ascending by construction
        g.medoid = detail::group_medoid(x, g.members);
        groups.push_back(std::move(g));
    }
    std::sort(groups.begin(), groups.end(), [](const StableGroup& a, const StableGroup& b) {
        if (a.members.size() != b.members.size()) return a.members.size() > b.members.size();
        return a.members.front() < b.members.front();
    });
    return groups;
}

inline std::vector<StableGroup> stable_groups(const Matrix& x, const MultiClusterRun& mc) {
    std::vector<std::vector<int>> assignments;
    for (const auto& run : mc.runs) assignments.push_back(run.assignment);
    return stable_groups_from_assignments(x, assignments);
}

// Medoids of the m largest groups. When fewer than m groups exist, the
// remaining picks are the next-ranked medoid candidates (next-smallest
// distance sum) of the groups in size order, never repeating an index.
inline std::vector<std::size_t> select_active(const Matrix& f_fine,
                                              const std::vector<StableGroup>& groups,
                                              std::size_t m) {
    if (m < 1) throw std::invalid_argument("select_active: m must be >= 1");
    if (m > f_fine.rows)
        throw std::invalid_argument("select_active: m=" + std::to_string(m) + " exceeds n=" +
                                    std::to_string(f_fine.rows));
    if (groups.empty()) throw std::invalid_argument("select_active: no groups");

    std::vector<std::size_t> picks;
    picks.reserve(m);
    for (std::size_t g = 0; g < groups.size() && picks.size() < m; ++g)
        picks.push_back(groups[g].medoid);
    if (picks.size() == m) return picks;

    // rank every group's members by distance sum (ties by index), then walk
    // rank 2, 3, ... across groups in size order
    std::vector<std::vector<std::size_t>> ranked(groups.size());
    for (std::size_t g = 0; g < groups.size(); ++g) {
        const auto& members = groups[g].members;
        std::vector<std::pair<double, std::size_t>> scored;
        scored.reserve(members.size());
        for (std::size_t p = 0; p < members.size(); ++p)
            scored.emplace_back(detail::distance_sum(f_fine, members, p), members[p]);
        std::sort(scored.begin(), scored.end());
        for (const auto& [s, idx] : scored) ranked[g].push_back(idx);
    }
    for (std::size_t rank = 1; picks.size() < m; ++rank) {
        bool any = false;
        for (std::size_t g = 0; g < groups.size() && picks.size() < m; ++g) {
            if (rank >= ranked[g].size()) continue;
            any = true;
            const std::size_t idx = ranked[g][rank];
            if (std::find(picks.begin(), picks.end(), idx) == picks.end()) picks.push_back(idx);
        }
        if (!any) break;  // every member of every group already picked
    }
    if (picks.size() < m)
        throw std::invalid_argument("select_active: groups cover fewer than m samples");
    return picks;
}

// ---------------------------------------------------------------------------
// Baseline selection strategies.

enum class SelectionMethod { random, k_medoids, coreset_greedy, active };

inline SelectionMethod parse_selection_method(const std::string& name) {
    if (name == "random") return SelectionMethod::random;
    if (name == "k-medoids") return SelectionMethod::k_medoids;
    if (name == "coreset-greedy") return SelectionMethod::coreset_greedy;
    if (name == "active") return SelectionMethod::active;
    throw std::invalid_argument("unknown selection method: " + name);
}

inline std::string selection_method_name(SelectionMethod m) {
    switch (m) {
        case SelectionMethod::random: return "random";
        case SelectionMethod::k_medoids: return "k-medoids";
        case SelectionMethod::coreset_greedy: return "coreset-greedy";
        case SelectionMethod::active: return "active";
    }
    return "?";
}

namespace detail {

// PAM-style k-medoids: random init, then best-improvement swaps until no
// swap lowers the summed distance to the nearest medoid.
inline std::vector<std::size_t> pam_medoids(const Matrix& x, std::size_t m, Rng& rng) {
    const std::size_t n = x.rows;
    std::vector<std::size_t> medoids = rng.sample_without_replacement(n, m);

    std::vector<double> nearest(n), second(n), dh(n);
    std::vector<std::size_t> nearest_pos(n);
    std::vector<char> is_medoid(n, 0);

    for (std::size_t pass = 0; pass < 1000; ++pass) {
        std::fill(is_medoid.begin(), is_medoid.end(), 0);
        for (std::size_t mi : medoids) is_medoid[mi] = 1;
        for (std::size_t i = 0; i < n; ++i) {
            double d1 = std::numeric_limits<double>::infinity();
            double d2 = std::numeric_limits<double>::infinity();
            std::size_t p1 = 0;
            for (std::size_t p = 0; p < m; ++p) {
                const double d = distance(x.row(i), x.row(medoids[p]));
                if (d < d1) {
                    d2 = d1;
                    d1 = d;
                    p1 = p;
                } else if (d < d2) {
                    d2 = d;
                }
            }
            nearest[i] = d1;
            second[i] = d2;
            nearest_pos[i] = p1;
        }

        double best_delta = -1e-12;
        std::size_t best_pos = 0, best_h = 0;
        bool found = false;
        for (std::size_t h = 0; h < n; ++h) {
            if (is_medoid[h]) continue;
            for (std::size_t i = 0; i < n; ++i) dh[i] = distance(x.row(i), x.row(h));
            for (std::size_t p = 0; p < m; ++p) {
                double delta = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (nearest_pos[i] == p)
                        delta += std::min(dh[i], second[i]) - nearest[i];
                    else if (dh[i] < nearest[i])
                        delta += dh[i] - nearest[i];
                }
                if (delta < best_delta) {
                    best_delta = delta;
                    best_pos = p;
                    best_h = h;
                    found = true;
                }
            }
        }
        if (!found) break;
        medoids[best_pos] = best_h;
    }
    return medoids;
}

// farthest-first traversal from a random start
inline std::vector<std::size_t> coreset_greedy(const Matrix& x, std::size_t m, Rng& rng) {
    const std::size_t n = x.rows;
    std::vector<std::size_t> picks;
    picks.reserve(m);
    std::vector<double> min_d(n, std::numeric_limits<double>::infinity());

    std::size_t cur = rng.below(n);
    picks.push_back(cur);
    while (picks.size() < m) {
        std::size_t far = 0;
        double far_d = -1.0;
        for (std::size_t i = 0; i < n; ++i) {
            min_d[i] = std::min(min_d[i], distance(x.row(i), x.row(cur)));
            if (min_d[i] > far_d) {  // strict: ties keep the smallest index
                far_d = min_d[i];
                far = i;
            }
        }
        cur = far;
        picks.push_back(cur);
    }
    return picks;
}

}  // namespace detail

inline std::vector<std::size_t> baseline_select(SelectionMethod method, const Matrix& x,
                                                std::size_t m, std::uint64_t rng_seed) {
    check_sample_matrix(x, "baseline_select");
    if (m < 1 || m > x.rows)
        throw std::invalid_argument("baseline_select: m must be in [1, n]");
    Rng rng(rng_seed);
    switch (method) {
        case SelectionMethod::random: {
            auto picks = rng.sample_without_replacement(x.rows, m);
            return picks;
        }
        case SelectionMethod::k_medoids:
            return detail::pam_medoids(x, m, rng);
        case SelectionMethod::coreset_greedy:
            return detail::coreset_greedy(x, m, rng);
        case SelectionMethod::active:
            throw std::invalid_argument("baseline_select: 'active' is not a baseline method");
    }
    throw std::invalid_argument("baseline_select: unknown method");
}

// ---------------------------------------------------------------------------
// Selection dump: CSV `rank,sample_index,group_size,signature`. Baselines use
// group_size 0 and signature "-"; active picks carry their group's data with
// a '|'-joined signature.

struct SelectionRow {
    std::size_t rank = 0;
    std::size_t sample_index = 0;
    std::size_t group_size = 0;
    std::string signature = "-";
};

inline std::vector<SelectionRow> selection_table(const std::vector<std::size_t>& picks,
                                                 const std::vector<StableGroup>* groups) {
    std::vector<SelectionRow> rows;
    rows.reserve(picks.size());
    for (std::size_t r = 0; r < picks.size(); ++r) {
        SelectionRow row;
        row.rank = r;
        row.sample_index = picks[r];
        if (groups) {
            for (const auto& g : *groups) {
                if (std::find(g.members.begin(), g.members.end(), picks[r]) == g.members.end())
                    continue;
                row.group_size = g.members.size();
                std::ostringstream sig;
                for (std::size_t c = 0; c < g.signature.size(); ++c) {
                    if (c) sig << '|';
                    sig << g.signature[c];
                }
                row.signature = sig.str();
                break;
            }
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

inline void save_selection_csv(const std::string& path, const std::vector<SelectionRow>& rows) {
    std::ostringstream out;
    out << "rank,sample_index,group_size,signature\n";
    for (const auto& r : rows)
        out << r.rank << ',' << r.sample_index << ',' << r.group_size << ',' << r.signature << "\n";
    write_text_file(path, out.str());
}

inline std::vector<SelectionRow> load_selection_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("selection file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty selection file");
    if (split_csv_line(line) != std::vector<std::string>{"rank", "sample_index", "group_size", "signature"})
        throw std::runtime_error(path + ": unexpected selection header");
    std::vector<SelectionRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != 4)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) +
                                     ": expected 4 fields");
        SelectionRow r;
        r.rank = static_cast<std::size_t>(std::stoull(fields[0]));
        r.sample_index = static_cast<std::size_t>(std::stoull(fields[1]));
        r.group_size = static_cast<std::size_t>(std::stoull(fields[2]));
        r.signature = fields[3];
        rows.push_back(std::move(r));
    }
    if (rows.empty()) throw std::runtime_error(path + ": no selection rows");
    return rows;
}

}  // namespace priorssl

#endif
