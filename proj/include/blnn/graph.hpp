#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <json.hpp>

#include "blnn/errors.hpp"
#include "blnn/matrix.hpp"

namespace blnn {

using NodeId = std::uint32_t;

/// Undirected, unweighted graph in CSR form with a dense feature matrix.
///
/// Every undirected edge occupies two directed slots. Rows are sorted,
/// duplicate-free and never contain the row's own index.
class SparseGraph {
public:
    SparseGraph() = default;

    /// Builds a graph from an arbitrary edge list: symmetrizes, removes
    /// duplicates and drops self-loops.
    static SparseGraph from_edges(std::size_t n_nodes, std::span<const std::pair<NodeId, NodeId>> edges,
                                  Matrix features) {
        if (features.rows() != n_nodes)
            throw ValidationError("feature matrix has " + std::to_string(features.rows()) +
                                  " rows, expected " + std::to_string(n_nodes));
        std::vector<std::vector<NodeId>> adj(n_nodes);
        for (auto [u, v] : edges) {
            if (u >= n_nodes || v >= n_nodes)
                throw ValidationError("edge (" + std::to_string(u) + ", " + std::to_string(v) +
                                      ") out of range for " + std::to_string(n_nodes) + " nodes");
            if (u == v) continue;
            adj[u].push_back(v);
            adj[v].push_back(u);
        }
        SparseGraph g;
        g.row_ptr_.assign(n_nodes + 1, 0);
        for (std::size_t i = 0; i < n_nodes; ++i) {
            auto& row = adj[i];
            std::sort(row.begin(), row.end());
            row.erase(std::unique(row.begin(), row.end()), row.end());
            g.col_idx_.insert(g.col_idx_.end(), row.begin(), row.end());
            g.row_ptr_[i + 1] = g.col_idx_.size();
        }
        g.features_ = std::move(features);
        return g;
    }

    /// Adopts CSR arrays as-is after checking every invariant.
    static SparseGraph from_csr(std::vector<std::size_t> row_ptr, std::vector<NodeId> col_idx, Matrix features) {
        SparseGraph g;
        g.row_ptr_ = std::move(row_ptr);
        g.col_idx_ = std::move(col_idx);
        g.features_ = std::move(features);
        g.validate();
        return g;
    }

    std::size_t n_nodes() const noexcept { return row_ptr_.empty() ? 0 : row_ptr_.size() - 1; }
    /// Directed edge slots; twice the undirected edge count.
    std::size_t n_edges() const noexcept { return col_idx_.size(); }
    std::size_t n_undirected_edges() const noexcept { return col_idx_.size() / 2; }
    std::size_t n_features() const noexcept { return features_.cols(); }

    std::size_t degree(NodeId i) const noexcept { return row_ptr_[i + 1] - row_ptr_[i]; }
    std::span<const NodeId> neighbors(NodeId i) const noexcept {
        return {col_idx_.data() + row_ptr_[i], degree(i)};
    }

    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<NodeId>& col_idx() const noexcept { return col_idx_; }
    const Matrix& features() const noexcept { return features_; }

    /// Same structure, different feature matrix.
    SparseGraph with_features(Matrix features) const {
        if (features.rows() != n_nodes())
            throw ValidationError("feature matrix has " + std::to_string(features.rows()) + " rows, expected " +
                                  std::to_string(n_nodes()));
        SparseGraph g;
        g.row_ptr_ = row_ptr_;
        g.col_idx_ = col_idx_;
        g.features_ = std::move(features);
        return g;
    }

    bool has_edge(NodeId i, NodeId j) const noexcept {
        const auto row = neighbors(i);
        return std::binary_search(row.begin(), row.end(), j);
    }

    /// Undirected edges as (i, j) with i < j, in row order.
    std::vector<std::pair<NodeId, NodeId>> undirected_edges() const {
        std::vector<std::pair<NodeId, NodeId>> out;
        out.reserve(n_undirected_edges());
        for (NodeId i = 0; i < n_nodes(); ++i)
            for (NodeId j : neighbors(i))
                if (i < j) out.emplace_back(i, j);
        return out;
    }

    /// Throws ValidationError if any structural invariant is broken.
    void validate() const {
        const std::size_t n = n_nodes();
        if (row_ptr_.empty() || row_ptr_.front() != 0) throw ValidationError("row_ptr must start at 0");
        if (row_ptr_.back() != col_idx_.size()) throw ValidationError("row_ptr[n] != len(col_idx)");
        if (features_.rows() != n) throw ValidationError("feature rows do not match node count");
        for (std::size_t i = 0; i < n; ++i) {
            if (row_ptr_[i + 1] < row_ptr_[i]) throw ValidationError("row_ptr is decreasing at " + std::to_string(i));
            const auto row = neighbors(static_cast<NodeId>(i));
            for (std::size_t k = 0; k < row.size(); ++k) {
                if (row[k] >= n) throw ValidationError("column index out of range in row " + std::to_string(i));
                if (row[k] == i) throw ValidationError("self-loop at node " + std::to_string(i));
                if (k > 0 && row[k] <= row[k - 1])
                    throw ValidationError("row " + std::to_string(i) + " is unsorted or has duplicates");
            }
        }
        for (std::size_t i = 0; i < n; ++i)
            for (NodeId j : neighbors(static_cast<NodeId>(i)))
                if (!has_edge(j, static_cast<NodeId>(i)))
                    throw ValidationError("adjacency is not symmetric at (" + std::to_string(i) + ", " +
                                          std::to_string(j) + ")");
    }

    friend bool operator==(const SparseGraph&, const SparseGraph&) = default;

private:
    std::vector<std::size_t> row_ptr_{0};
    std::vector<NodeId> col_idx_;
    Matrix features_;
};

/// Node class labels; -1 marks an unknown label.
struct Labels {
    static constexpr int kUnknown = -1;

    std::vector<int> values;
    int n_classes = 0;

    Labels() = default;
    Labels(std::vector<int> v, int k) : values(std::move(v)), n_classes(k) { validate(); }

    std::size_t size() const noexcept { return values.size(); }
    int operator[](std::size_t i) const noexcept { return values[i]; }
    bool all_known() const noexcept {
        return std::none_of(values.begin(), values.end(), [](int y) { return y == kUnknown; });
    }

    void validate() const {
        if (n_classes < 0) throw ValidationError("n_classes must be nonnegative");
        for (std::size_t i = 0; i < values.size(); ++i) {
            const int y = values[i];
            if (y != kUnknown && (y < 0 || y >= n_classes))
                throw ValidationError("label " + std::to_string(y) + " at node " + std::to_string(i) +
                                      " outside [0, " + std::to_string(n_classes) + ")");
        }
    }
};

/// Neighbor sets N_i of the original graph. Owns a copy of the CSR
/// structure so it outlives the graph it came from.
class NeighborList {
public:
    NeighborList() = default;
    explicit NeighborList(const SparseGraph& g) : row_ptr_(g.row_ptr()), col_idx_(g.col_idx()) {}

    std::size_t n_nodes() const noexcept { return row_ptr_.size() - 1; }
    std::size_t n_pairs() const noexcept { return col_idx_.size(); }
    std::span<const NodeId> of(NodeId i) const noexcept {
        return {col_idx_.data() + row_ptr_[i], row_ptr_[i + 1] - row_ptr_[i]};
    }
    std::size_t size_of(NodeId i) const noexcept { return row_ptr_[i + 1] - row_ptr_[i]; }
    const std::vector<std::size_t>& row_ptr() const noexcept { return row_ptr_; }
    const std::vector<NodeId>& col_idx() const noexcept { return col_idx_; }

private:
    std::vector<std::size_t> row_ptr_{0};
    std::vector<NodeId> col_idx_;
};

inline NeighborList neighbor_list(const SparseGraph& g) { return NeighborList(g); }

/// CSR matrix with explicit values; the propagation operator of the encoder.
struct SparseMatrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<std::size_t> row_ptr{0};
    std::vector<NodeId> col_idx;
    std::vector<double> values;

    double at(std::size_t i, std::size_t j) const {
        for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k)
            if (col_idx[k] == j) return values[k];
        return 0.0;
    }

    Matrix to_dense() const {
        Matrix d(rows, cols);
        for (std::size_t i = 0; i < rows; ++i)
            for (std::size_t k = row_ptr[i]; k < row_ptr[i + 1]; ++k) d(i, col_idx[k]) = values[k];
        return d;
    }

    static SparseMatrix identity(std::size_t n) {
        SparseMatrix s;
        s.rows = s.cols = n;
        s.row_ptr.resize(n + 1);
        for (std::size_t i = 0; i < n; ++i) {
            s.row_ptr[i + 1] = i + 1;
            s.col_idx.push_back(static_cast<NodeId>(i));
            s.values.push_back(1.0);
        }
        return s;
    }
};

namespace linalg {

/// out = s * d
inline Matrix spmm(const SparseMatrix& s, const Matrix& d) {
    if (s.cols != d.rows())
        throw DimensionError("spmm shape mismatch " + Matrix::shape_string(s.rows, s.cols) + " * " + d.shape());
    Matrix out(s.rows, d.cols());
    const std::size_t n = d.cols();
    for (std::size_t i = 0; i < s.rows; ++i) {
        double* o = out.data().data() + i * n;
        for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
            const double v = s.values[k];
            const double* src = d.data().data() + s.col_idx[k] * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += v * src[j];
        }
    }
    return out;
}

/// out += s^T * d
inline void spmm_transposed_accumulate(const SparseMatrix& s, const Matrix& d, Matrix& out) {
    const std::size_t n = d.cols();
    for (std::size_t i = 0; i < s.rows; ++i) {
        const double* src = d.data().data() + i * n;
        for (std::size_t k = s.row_ptr[i]; k < s.row_ptr[i + 1]; ++k) {
            const double v = s.values[k];
            double* o = out.data().data() + s.col_idx[k] * n;
            for (std::size_t j = 0; j < n; ++j) o[j] += v * src[j];
        }
    }
}

}  // namespace linalg

/// Symmetric GCN operator D^{-1/2}(A+I)D^{-1/2}, D the degree matrix of A+I.
inline SparseMatrix normalize_adjacency(const SparseGraph& g) {
    const std::size_t n = g.n_nodes();
    SparseMatrix s;
    s.rows = s.cols = n;
    s.row_ptr.assign(n + 1, 0);
    s.col_idx.reserve(g.n_edges() + n);
    s.values.reserve(g.n_edges() + n);
    std::vector<double> inv_sqrt(n);
    for (NodeId i = 0; i < n; ++i) inv_sqrt[i] = 1.0 / std::sqrt(static_cast<double>(g.degree(i) + 1));
    for (NodeId i = 0; i < n; ++i) {
        bool self_done = false;
        for (NodeId j : g.neighbors(i)) {
            if (!self_done && i < j) {
                s.col_idx.push_back(i);
                s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
                self_done = true;
            }
            s.col_idx.push_back(j);
            s.values.push_back(inv_sqrt[i] * inv_sqrt[j]);
        }
        if (!self_done) {
            s.col_idx.push_back(i);
            s.values.push_back(inv_sqrt[i] * inv_sqrt[i]);
        }
        s.row_ptr[i + 1] = s.col_idx.size();
    }
    return s;
}

/// Fraction of edges whose endpoints share a label.
inline double edge_homophily(const SparseGraph& g, const Labels& labels) {
    if (labels.size() != g.n_nodes())
        throw ValidationError("labels cover " + std::to_string(labels.size()) + " nodes, graph has " +
                              std::to_string(g.n_nodes()));
    if (!labels.all_known()) throw ValidationError("edge homophily requires every node to be labeled");
    if (g.n_edges() == 0) throw UndefinedError("edge homophily is undefined for a graph without edges");
    std::size_t same = 0;
    for (NodeId i = 0; i < g.n_nodes(); ++i)
        for (NodeId j : g.neighbors(i))
            if (labels[i] == labels[j]) ++same;
    return static_cast<double>(same) / static_cast<double>(g.n_edges());
}

struct Dataset {
    SparseGraph graph;
    std::optional<Labels> labels;
};

namespace detail {

inline std::vector<std::string_view> split_fields(std::string_view line, bool comma) {
    std::vector<std::string_view> out;
    std::size_t pos = 0;
    if (comma) {
        while (true) {
            const std::size_t next = line.find(',', pos);
            auto tok = line.substr(pos, next == std::string_view::npos ? std::string_view::npos : next - pos);
            while (!tok.empty() && (tok.front() == ' ' || tok.front() == '\t')) tok.remove_prefix(1);
            while (!tok.empty() && (tok.back() == ' ' || tok.back() == '\t' || tok.back() == '\r')) tok.remove_suffix(1);
            out.push_back(tok);
            if (next == std::string_view::npos) break;
            pos = next + 1;
        }
        return out;
    }
    while (pos < line.size()) {
        while (pos < line.size() && (line[pos] == ' ' || line[pos] == '\t' || line[pos] == '\r')) ++pos;
        if (pos >= line.size()) break;
        std::size_t end = pos;
        while (end < line.size() && line[end] != ' ' && line[end] != '\t' && line[end] != '\r') ++end;
        out.push_back(line.substr(pos, end - pos));
        pos = end;
    }
    return out;
}

template <class T>
bool parse_number(std::string_view tok, T& out) {
    if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, out);
    return ec == std::errc() && ptr == end && !tok.empty();
}

inline bool is_blank(std::string_view line) {
    return line.find_first_not_of(" \t\r") == std::string_view::npos;
}

inline std::string location(const std::filesystem::path& file, std::size_t line) {
    return file.filename().string() + ":" + std::to_string(line);
}

inline std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, ptr);
}

}  // namespace detail

/// Reads a graph directory (meta.json, edges.tsv, features.csv, optional labels.txt).
inline Dataset load_graph(const std::filesystem::path& dir) {
    namespace fs = std::filesystem;
    const fs::path meta_path = dir / "meta.json";
    std::ifstream meta_in(meta_path);
    if (!meta_in) throw ParseError("cannot open " + meta_path.string());
    nlohmann::json meta;
    try {
        meta_in >> meta;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(meta_path.filename().string() + ": " + e.what());
    }
    auto read_count = [&](const char* key) -> long long {
        if (!meta.contains(key) || !meta[key].is_number_integer())
            throw ParseError("meta.json: missing integer key '" + std::string(key) + "'");
        const long long v = meta[key].get<long long>();
        if (v < 0) throw ValidationError("meta.json: '" + std::string(key) + "' is negative");
        return v;
    };
    const auto n_nodes = static_cast<std::size_t>(read_count("n_nodes"));
    const auto n_features = static_cast<std::size_t>(read_count("n_features"));
    const int n_classes = static_cast<int>(meta.contains("n_classes") ? read_count("n_classes") : 0);

    std::vector<std::pair<NodeId, NodeId>> edges;
    {
        const fs::path p = dir / "edges.tsv";
        std::ifstream in(p);
        if (!in) throw ParseError("cannot open " + p.string());
        std::string line;
        for (std::size_t ln = 1; std::getline(in, line); ++ln) {
            if (detail::is_blank(line)) continue;
            const auto f = detail::split_fields(line, false);
            long long u = 0, v = 0;
            if (f.size() != 2 || !detail::parse_number(f[0], u) || !detail::parse_number(f[1], v))
                throw ParseError(detail::location(p, ln) + ": expected two integer node indices");
            if (u < 0 || v < 0 || static_cast<std::size_t>(u) >= n_nodes || static_cast<std::size_t>(v) >= n_nodes)
                throw ValidationError(detail::location(p, ln) + ": node index out of range [0, " +
                                      std::to_string(n_nodes) + ")");
            edges.emplace_back(static_cast<NodeId>(u), static_cast<NodeId>(v));
        }
    }

    Matrix features(n_nodes, n_features);
    {
        const fs::path p = dir / "features.csv";
        std::ifstream in(p);
        if (!in) throw ParseError("cannot open " + p.string());
        std::string line;
        std::size_t row = 0;
        for (std::size_t ln = 1; std::getline(in, line); ++ln) {
            if (detail::is_blank(line) && n_features != 0) continue;
            if (row >= n_nodes) {
                if (detail::is_blank(line)) continue;
                throw ValidationError(detail::location(p, ln) + ": more feature rows than n_nodes");
            }
            const auto f = n_features == 0 ? std::vector<std::string_view>{} : detail::split_fields(line, true);
            if (f.size() != n_features)
                throw ValidationError(detail::location(p, ln) + ": expected " + std::to_string(n_features) +
                                      " values, found " + std::to_string(f.size()));
            for (std::size_t c = 0; c < n_features; ++c)
                if (!detail::parse_number(f[c], features(row, c)))
                    throw ParseError(detail::location(p, ln) + ": bad number '" + std::string(f[c]) + "'");
            ++row;
        }
        if (row != n_nodes)
            throw ValidationError(p.filename().string() + ": expected " + std::to_string(n_nodes) +
                                  " rows, found " + std::to_string(row));
    }

    Dataset ds{SparseGraph::from_edges(n_nodes, edges, std::move(features)), std::nullopt};

    const fs::path lp = dir / "labels.txt";
    if (fs::exists(lp)) {
        std::ifstream in(lp);
        std::vector<int> values;
        std::string line;
        for (std::size_t ln = 1; std::getline(in, line); ++ln) {
            if (detail::is_blank(line)) continue;
            const auto f = detail::split_fields(line, false);
            int y = 0;
            if (f.size() != 1 || !detail::parse_number(f[0], y))
                throw ParseError(detail::location(lp, ln) + ": expected one integer label");
            if (y != Labels::kUnknown && (y < 0 || y >= n_classes))
                throw ValidationError(detail::location(lp, ln) + ": label " + std::to_string(y) +
                                      " outside [0, " + std::to_string(n_classes) + ")");
            values.push_back(y);
        }
        if (values.size() != n_nodes)
            throw ValidationError("labels.txt: expected " + std::to_string(n_nodes) + " labels, found " +
                                  std::to_string(values.size()));
        ds.labels = Labels(std::move(values), n_classes);
    }
    return ds;
}

/// Writes a graph directory readable by load_graph. Features use the
/// shortest round-trip decimal representation.
inline void save_graph(const std::filesystem::path& dir, const SparseGraph& g,
                       const std::optional<Labels>& labels = std::nullopt) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    {
        nlohmann::json meta;
        meta["n_nodes"] = g.n_nodes();
        meta["n_features"] = g.n_features();
        meta["n_classes"] = labels ? labels->n_classes : 0;
        std::ofstream out(dir / "meta.json");
        out << meta.dump(2) << '\n';
    }
    {
        std::ofstream out(dir / "edges.tsv");
        for (auto [i, j] : g.undirected_edges()) out << i << '\t' << j << '\n';
    }
    {
        std::ofstream out(dir / "features.csv");
        const Matrix& x = g.features();
        for (std::size_t i = 0; i < x.rows(); ++i) {
            for (std::size_t c = 0; c < x.cols(); ++c) {
                if (c) out << ',';
                out << detail::format_double(x(i, c));
            }
            out << '\n';
        }
    }
    if (labels) {
        std::ofstream out(dir / "labels.txt");
        for (int y : labels->values) out << y << '\n';
    } else if (fs::exists(dir / "labels.txt")) {
        fs::remove(dir / "labels.txt");
    }
}

}  // namespace blnn
