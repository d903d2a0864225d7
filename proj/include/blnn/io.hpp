#pragma once

#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "blnn/errors.hpp"
#include "blnn/graph.hpp"
#include "blnn/matrix.hpp"

namespace blnn {

/// Embeddings as CSV: one row per node, comma-separated, no header.
inline void write_matrix_csv(const std::filesystem::path& path, const Matrix& m) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    for (std::size_t i = 0; i < m.rows(); ++i) {
        for (std::size_t j = 0; j < m.cols(); ++j) out << (j ? "," : "") << detail::format_double(m(i, j));
        out << '\n';
    }
}

inline Matrix read_matrix_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw ParseError("cannot open " + path.string());
    std::vector<double> data;
    std::size_t cols = 0, rows = 0;
    std::string line;
    for (std::size_t ln = 1; std::getline(in, line); ++ln) {
        if (detail::is_blank(line)) continue;
        const auto f = detail::split_fields(line, true);
        if (rows == 0) cols = f.size();
        if (f.size() != cols)
            throw ValidationError(detail::location(path, ln) + ": expected " + std::to_string(cols) + " values");
        for (auto tok : f) {
            double v = 0.0;
            if (!detail::parse_number(tok, v))
                throw ParseError(detail::location(path, ln) + ": bad number '" + std::string(tok) + "'");
            data.push_back(v);
        }
        ++rows;
    }
    return Matrix(rows, cols, std::move(data));
}

}  // namespace blnn
