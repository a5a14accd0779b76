#include "netshift/dataset.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <set>

namespace netshift {

SourceDataset::SourceDataset(std::vector<double> y, std::vector<int> d, std::vector<Cell> x,
                             std::vector<CovariateKind> kinds, const std::vector<Edge>& edges,
                             bool directed)
    : y_(std::move(y)), d_(std::move(d)), x_(std::move(x)), kinds_(std::move(kinds)),
      directed_(directed) {
    const std::size_t n = y_.size();
    if (n == 0)
        throw DataError("source dataset has no units");
    if (d_.size() != n || x_.size() != n)
        throw DataError("outcome, treatment and covariate columns differ in length");
    for (std::size_t i = 0; i < n; ++i) {
        if (d_[i] != 0 && d_[i] != 1)
            throw DataError(fmt::format("treatment of unit {} is {}, expected 0 or 1", i, d_[i]));
        if (x_[i].size() != kinds_.size())
            throw DataError(fmt::format("unit {} has {} covariates, schema declares {}", i,
                                        x_[i].size(), kinds_.size()));
    }

    std::vector<std::set<int>> adj(n);
    for (const auto& e : edges) {
        if (e.src < 0 || e.dst < 0 || static_cast<std::size_t>(e.src) >= n ||
            static_cast<std::size_t>(e.dst) >= n)
            throw DataError(fmt::format("edge ({}, {}) refers to a unit outside 0..{}", e.src,
                                        e.dst, n - 1));
        if (e.src == e.dst)
            throw DataError(fmt::format("self-loop at unit {}", e.src));
        adj[static_cast<std::size_t>(e.src)].insert(e.dst);
        if (!directed_)
            adj[static_cast<std::size_t>(e.dst)].insert(e.src);
    }
    out_.resize(n);
    degree_.resize(n);
    treated_peers_.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        out_[i].assign(adj[i].begin(), adj[i].end());
        degree_[i] = static_cast<int>(out_[i].size());
        int s = 0;
        for (int j : out_[i])
            s += d_[static_cast<std::size_t>(j)];
        treated_peers_[i] = s;
    }
}

std::vector<std::vector<int>> SourceDataset::undirected_neighbors() const {
    if (!directed_)
        return out_;
    std::vector<std::set<int>> adj(size());
    for (std::size_t i = 0; i < size(); ++i)
        for (int j : out_[i]) {
            adj[i].insert(j);
            adj[static_cast<std::size_t>(j)].insert(static_cast<int>(i));
        }
    std::vector<std::vector<int>> out(size());
    for (std::size_t i = 0; i < size(); ++i)
        out[i].assign(adj[i].begin(), adj[i].end());
    return out;
}

std::vector<Edge> SourceDataset::edges() const {
    std::vector<Edge> out;
    for (std::size_t i = 0; i < size(); ++i)
        for (int j : out_[i])
            if (directed_ || static_cast<int>(i) < j)
                out.push_back({static_cast<int>(i), j});
    return out;
}

std::vector<Cell> SourceDataset::cells() const {
    std::set<Cell> s(x_.begin(), x_.end());
    return {s.begin(), s.end()};
}

std::size_t SourceDataset::count_in_cell(const Cell& x) const {
    return static_cast<std::size_t>(std::count(x_.begin(), x_.end(), x));
}

void SourceDataset::set_outcomes(std::vector<double> y) {
    if (y.size() != y_.size())
        throw DataError("replacement outcome vector has the wrong length");
    y_ = std::move(y);
}

DiscreteDist degree_dist_conditional(const SourceDataset& data, const Cell& x) {
    std::vector<int> g;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.covariates()[i] == x)
            g.push_back(data.degree()[i]);
    if (g.empty())
        throw EmptyCellError(fmt::format("no source unit has covariates ({})", cell_label(x)));
    return DiscreteDist::empirical(g);
}

} // namespace netshift
