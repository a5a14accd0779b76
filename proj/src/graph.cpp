#include "netshift/graph.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <deque>
#include <numeric>
#include <set>
#include <utility>

namespace netshift {

namespace {

void check_sequence(const DegreeSequence& seq) {
    const auto n = static_cast<int>(seq.size());
    for (std::size_t i = 0; i < seq.size(); ++i)
        if (seq[i] < 0 || (n > 0 && seq[i] > n - 1))
            throw DataError(fmt::format("degree {} at position {} outside 0..{}", seq[i], i,
                                        std::max(0, n - 1)));
}

} // namespace

bool is_graphic(const DegreeSequence& seq) {
    check_sequence(seq);
    std::vector<long long> d(seq.begin(), seq.end());
    std::sort(d.begin(), d.end(), std::greater<>());
    const long long total = std::accumulate(d.begin(), d.end(), 0LL);
    if (total % 2 != 0)
        return false;
    const auto n = d.size();
    long long lhs = 0;
    for (std::size_t k = 1; k <= n; ++k) {
        lhs += d[k - 1];
        long long rhs = static_cast<long long>(k) * static_cast<long long>(k - 1);
        for (std::size_t i = k; i < n; ++i)
            rhs += std::min<long long>(d[i], static_cast<long long>(k));
        if (lhs > rhs)
            return false;
    }
    return true;
}

std::vector<Edge> realize(const DegreeSequence& seq, std::mt19937_64* rng, std::size_t swaps) {
    if (!is_graphic(seq))
        throw DataError("degree sequence is not graphic");
    const std::size_t n = seq.size();
    std::vector<int> residual(seq.begin(), seq.end());
    std::vector<Edge> edges;
    std::vector<int> order(n);
    for (;;) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(),
                         [&](int a, int b) { return residual[static_cast<std::size_t>(a)] >
                                                    residual[static_cast<std::size_t>(b)]; });
        const int u = order[0];
        const int du = residual[static_cast<std::size_t>(u)];
        if (du == 0)
            break;
        for (int k = 1; k <= du; ++k) {
            const int v = order[static_cast<std::size_t>(k)];
            if (residual[static_cast<std::size_t>(v)] == 0)
                throw NumericalError("Havel-Hakimi ran out of partners on a graphic sequence");
            --residual[static_cast<std::size_t>(v)];
            edges.push_back({std::min(u, v), std::max(u, v)});
        }
        residual[static_cast<std::size_t>(u)] = 0;
    }

    if (rng != nullptr && swaps > 0 && edges.size() >= 2) {
        std::set<std::pair<int, int>> present;
        for (const auto& e : edges)
            present.insert({e.src, e.dst});
        std::uniform_int_distribution<std::size_t> pick(0, edges.size() - 1);
        std::bernoulli_distribution flip(0.5);
        for (std::size_t t = 0; t < swaps; ++t) {
            const std::size_t a = pick(*rng), b = pick(*rng);
            if (a == b)
                continue;
            int p = edges[a].src, q = edges[a].dst, r = edges[b].src, s = edges[b].dst;
            if (flip(*rng))
                std::swap(r, s);
            // (p,q),(r,s) -> (p,r),(q,s)
            if (p == r || q == s)
                continue;
            const std::pair<int, int> e1{std::min(p, r), std::max(p, r)};
            const std::pair<int, int> e2{std::min(q, s), std::max(q, s)};
            if (present.count(e1) || present.count(e2))
                continue;
            present.erase({edges[a].src, edges[a].dst});
            present.erase({edges[b].src, edges[b].dst});
            present.insert(e1);
            present.insert(e2);
            edges[a] = {e1.first, e1.second};
            edges[b] = {e2.first, e2.second};
        }
    }
    std::sort(edges.begin(), edges.end(), [](const Edge& a, const Edge& b) {
        return std::pair(a.src, a.dst) < std::pair(b.src, b.dst);
    });
    return edges;
}

DegreeSequence degrees_of(std::size_t n, const std::vector<Edge>& edges) {
    DegreeSequence d(n, 0);
    for (const auto& e : edges) {
        ++d.at(static_cast<std::size_t>(e.src));
        ++d.at(static_cast<std::size_t>(e.dst));
    }
    return d;
}

ChungLuGraph chung_lu(const std::vector<double>& w, std::mt19937_64& rng) {
    double total = 0.0;
    for (double x : w) {
        if (!(x >= 0.0) || !std::isfinite(x))
            throw DataError("expected degrees must be finite and nonnegative");
        total += x;
    }
    ChungLuGraph g;
    if (total == 0.0)
        return g;
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (std::size_t i = 0; i < w.size(); ++i)
        for (std::size_t j = i + 1; j < w.size(); ++j) {
            double p = w[i] * w[j] / total;
            if (p > 1.0) {
                g.cap_binds = true;
                p = 1.0;
            }
            if (u(rng) < p)
                g.edges.push_back({static_cast<int>(i), static_cast<int>(j)});
        }
    return g;
}

DegreeSequence sequence_from_distribution(const DiscreteDist& pi, std::size_t n) {
    const auto& supp = pi.support();
    const auto& mass = pi.mass();
    std::vector<std::size_t> count(supp.size());
    std::vector<std::pair<double, std::size_t>> rem;
    std::size_t assigned = 0;
    for (std::size_t k = 0; k < supp.size(); ++k) {
        const double share = mass[k] * static_cast<double>(n);
        count[k] = static_cast<std::size_t>(std::floor(share));
        assigned += count[k];
        rem.push_back({share - std::floor(share), k});
    }
    std::stable_sort(rem.begin(), rem.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    for (std::size_t t = 0; assigned < n && t < rem.size(); ++t, ++assigned)
        ++count[rem[t].second];
    DegreeSequence seq;
    for (std::size_t k = 0; k < supp.size(); ++k)
        seq.insert(seq.end(), count[k], supp[k]);
    return seq;
}

namespace {

// Coordinates in which Euclidean distance is the Mahalanobis distance.
Eigen::MatrixXd whiten(const Eigen::MatrixXd& z) {
    const auto n = z.rows();
    if (n < 2)
        throw DataError("need at least two units for a covariance matrix");
    const Eigen::MatrixXd centered = z.rowwise() - z.colwise().mean();
    const Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov, Eigen::EigenvaluesOnly);
    const auto& ev = eig.eigenvalues();
    if (!(ev[0] > 1e-12 * ev[ev.size() - 1]))
        throw DataError("covariance of the distance covariates is singular");
    Eigen::LLT<Eigen::MatrixXd> llt(cov);
    // Row-major so that each unit's coordinates are contiguous.
    return llt.matrixL().solve(centered.transpose());
}

void nearest_row(const Eigen::MatrixXd& white, std::size_t i, std::size_t gi, std::vector<double>& dist,
                 std::vector<int>& idx, std::vector<Edge>& edges) {
    const auto n = static_cast<std::size_t>(white.cols());
    idx.clear();
    for (std::size_t j = 0; j < n; ++j) {
        dist[j] = (white.col(static_cast<Eigen::Index>(i)) - white.col(static_cast<Eigen::Index>(j))).norm();
        if (j != i)
            idx.push_back(static_cast<int>(j));
    }
    std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(gi), idx.end(), [&](int a, int b) {
        const double da = dist[static_cast<std::size_t>(a)], db = dist[static_cast<std::size_t>(b)];
        return da < db || (da == db && a < b);
    });
    for (std::size_t k = 0; k < gi; ++k)
        edges.push_back({static_cast<int>(i), idx[k]});
}

} // namespace

Eigen::MatrixXd mahalanobis_matrix(const Eigen::MatrixXd& z) {
    const Eigen::MatrixXd white = whiten(z);
    const auto n = z.rows();
    Eigen::MatrixXd d(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        d(i, i) = 0.0;
        for (Eigen::Index j = i + 1; j < n; ++j)
            d(i, j) = d(j, i) = (white.col(i) - white.col(j)).norm();
    }
    return d;
}

std::vector<Edge> mahalanobis_neighbors(const Eigen::MatrixXd& z, const DegreeSequence& degrees) {
    const auto n = static_cast<std::size_t>(z.rows());
    if (degrees.size() != n)
        throw DataError("covariate rows and degree sequence sizes disagree");
    check_sequence(degrees);
    const Eigen::MatrixXd white = whiten(z);
    std::vector<double> dist(n);
    std::vector<int> idx;
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i)
        nearest_row(white, i, static_cast<std::size_t>(degrees[i]), dist, idx, edges);
    return edges;
}

std::vector<Edge> nearest_neighbor_graph(const Eigen::MatrixXd& dist, const DegreeSequence& degrees) {
    const auto n = static_cast<std::size_t>(dist.rows());
    if (dist.cols() != dist.rows() || degrees.size() != n)
        throw DataError("distance matrix and degree sequence sizes disagree");
    check_sequence(degrees);
    std::vector<Edge> edges;
    std::vector<int> idx;
    for (std::size_t i = 0; i < n; ++i) {
        idx.clear();
        for (std::size_t j = 0; j < n; ++j)
            if (j != i)
                idx.push_back(static_cast<int>(j));
        const auto gi = static_cast<std::size_t>(degrees[i]);
        const auto row = static_cast<Eigen::Index>(i);
        std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(gi), idx.end(),
                          [&](int a, int b) {
                              const double da = dist(row, a), db = dist(row, b);
                              return da < db || (da == db && a < b);
                          });
        for (std::size_t k = 0; k < gi; ++k)
            edges.push_back({static_cast<int>(i), idx[k]});
    }
    return edges;
}

HopMatrix shortest_paths(const std::vector<std::vector<int>>& neighbors) {
    const std::size_t n = neighbors.size();
    HopMatrix h(n);
    std::deque<std::size_t> queue;
    for (std::size_t s = 0; s < n; ++s) {
        h(s, s) = 0;
        queue.assign(1, s);
        while (!queue.empty()) {
            const std::size_t u = queue.front();
            queue.pop_front();
            for (int vi : neighbors[u]) {
                const auto v = static_cast<std::size_t>(vi);
                if (h(s, v) == kDisconnected) {
                    h(s, v) = h(s, u) + 1;
                    queue.push_back(v);
                }
            }
        }
    }
    return h;
}

HopMatrix shortest_paths(std::size_t n, const std::vector<Edge>& edges) {
    std::vector<std::set<int>> adj(n);
    for (const auto& e : edges) {
        adj.at(static_cast<std::size_t>(e.src)).insert(e.dst);
        adj.at(static_cast<std::size_t>(e.dst)).insert(e.src);
    }
    std::vector<std::vector<int>> nb(n);
    for (std::size_t i = 0; i < n; ++i)
        nb[i].assign(adj[i].begin(), adj[i].end());
    return shortest_paths(nb);
}

} // namespace netshift
