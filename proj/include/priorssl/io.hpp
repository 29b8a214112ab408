#ifndef PRIORSSL_IO_HPP
#define PRIORSSL_IO_HPP

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "priorssl/matrix.hpp"

namespace priorssl {

// Shortest-round-trip decimal for a double. "%.17g" survives parse/print
// cycles exactly, which the replay guarantees depend on.
inline std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline void write_text_file(const std::string& path, const std::string& contents) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open for writing: " + path);
    out << contents;
    if (!out) throw std::runtime_error("write failed: " + path);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open for reading: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline bool file_exists(const std::string& path) {
    std::ifstream in(path);
    return in.good();
}

// ---------------------------------------------------------------------------
// Embedding file: first line "n=<int> d=<int>", then n lines of d
// space-separated decimal reals.

inline void save_embedding(const std::string& path, const Matrix& x) {
    std::ostringstream out;
    out << "n=" << x.rows << " d=" << x.cols << "\n";
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) {
            if (j) out << ' ';
            out << fmt_double(x.at(i, j));
        }
        out << "\n";
    }
    write_text_file(path, out.str());
}

inline Matrix load_embedding(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("embedding file not found: " + path);

    std::string line;
    if (!std::getline(in, line))
        throw std::runtime_error(path + ": malformed header (line 1): empty file");
    long long n = -1, d = -1;
    if (std::sscanf(line.c_str(), "n=%lld d=%lld", &n, &d) != 2 || n < 1 || d < 1)
        throw std::runtime_error(path + ": malformed header (line 1): expected 'n=<int> d=<int>', got '" +
                                 line + "'");

    Matrix x(static_cast<std::size_t>(n), static_cast<std::size_t>(d));
    for (long long i = 0; i < n; ++i) {
        const long long line_no = i + 2;
        if (!std::getline(in, line))
            throw std::runtime_error(path + ": truncated at line " + std::to_string(line_no) +
                                     ": expected " + std::to_string(n) + " data rows");
        const char* p = line.c_str();
        for (long long j = 0; j < d; ++j) {
            char* end = nullptr;
            const double v = std::strtod(p, &end);
            if (end == p)
                throw std::runtime_error(path + ": row length mismatch at line " + std::to_string(line_no) +
                                         ": expected " + std::to_string(d) + " values, got " +
                                         std::to_string(j));
            if (!std::isfinite(v))
                throw std::runtime_error(path + ": non-finite value at line " + std::to_string(line_no));
            x.at(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) = v;
            p = end;
        }
        char* end = nullptr;
        std::strtod(p, &end);
        if (end != p)
            throw std::runtime_error(path + ": row length mismatch at line " + std::to_string(line_no) +
                                     ": more than " + std::to_string(d) + " values");
    }
    return x;
}

inline Matrix load_embedding_matrix(const std::string& path) { return load_embedding(path); }

// ---------------------------------------------------------------------------
// Dataset dump: CSV "x0,...,x{d-1},label".

inline void save_dataset_csv(const std::string& path, const Matrix& x, const LabelVector& y) {
    std::ostringstream out;
    for (std::size_t j = 0; j < x.cols; ++j) out << 'x' << j << ',';
    out << "label\n";
    for (std::size_t i = 0; i < x.rows; ++i) {
        for (std::size_t j = 0; j < x.cols; ++j) out << fmt_double(x.at(i, j)) << ',';
        out << y.labels[i] << "\n";
    }
    write_text_file(path, out.str());
}

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char ch : line) {
        if (ch == ',') {
            fields.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    fields.push_back(cur);
    return fields;
}

inline std::pair<Matrix, LabelVector> load_dataset_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("dataset file not found: " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error(path + ": empty dataset file");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header.back() != "label")
        throw std::runtime_error(path + ": expected header 'x0,...,label'");
    const std::size_t d = header.size() - 1;

    std::vector<double> values;
    std::vector<int> labels;
    std::size_t line_no = 1;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto fields = split_csv_line(line);
        if (fields.size() != d + 1)
            throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": expected " +
                                     std::to_string(d + 1) + " fields, got " +
                                     std::to_string(fields.size()));
        for (std::size_t j = 0; j < d; ++j) values.push_back(std::stod(fields[j]));
        const int lab = std::stoi(fields[d]);
        if (lab < 0) throw std::runtime_error(path + ": line " + std::to_string(line_no) + ": negative label");
        labels.push_back(lab);
        max_label = std::max(max_label, lab);
    }
    if (labels.empty()) throw std::runtime_error(path + ": no data rows");
    Matrix x(labels.size(), d);
    x.data = std::move(values);
    LabelVector y;
    y.labels = std::move(labels);
    y.num_classes = max_label + 1;
    return {std::move(x), std::move(y)};
}

// Label file: one integer class id per line.
inline LabelVector load_label_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("label file not found: " + path);
    LabelVector y;
    std::string line;
    std::size_t line_no = 0;
    int max_label = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty() || line == "\r") continue;
        char* end = nullptr;
        const long v = std::strtol(line.c_str(), &end, 10);
        if (end == line.c_str() || v < 0)
            throw std::runtime_error(path + ": bad label at line " + std::to_string(line_no));
        y.labels.push_back(static_cast<int>(v));
        max_label = std::max(max_label, static_cast<int>(v));
    }
    if (y.labels.empty()) throw std::runtime_error(path + ": no labels");
    y.num_classes = max_label + 1;
    return y;
}

inline void save_label_file(const std::string& path, const LabelVector& y) {
    std::ostringstream out;
    for (int v : y.labels) out << v << "\n";
    write_text_file(path, out.str());
}

}  // namespace priorssl

#endif
