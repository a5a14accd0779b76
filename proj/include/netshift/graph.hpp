#pragma once

#include "netshift/dataset.hpp"
#include "netshift/dist.hpp"

#include <Eigen/Dense>

#include <limits>
#include <random>
#include <vector>

namespace netshift {

using DegreeSequence = std::vector<int>;

/// Erdős–Gallai test. Throws DataError for negative entries or entries ≥ n.
bool is_graphic(const DegreeSequence& seq);

/// Havel–Hakimi realization (largest residual degree first, ties by index),
/// followed by `swaps` attempted degree-preserving double-edge swaps.
/// Edges are returned with src < dst. Throws DataError if not graphic.
std::vector<Edge> realize(const DegreeSequence& seq, std::mt19937_64* rng = nullptr,
                          std::size_t swaps = 0);

/// Degree sequence of an undirected edge list on n nodes.
DegreeSequence degrees_of(std::size_t n, const std::vector<Edge>& edges);

struct ChungLuGraph {
    std::vector<Edge> edges;
    /// Some pair had w_i w_j / Σw > 1, so realized degrees run low.
    bool cap_binds = false;
};

/// Independent edges with probability min(1, w_i w_j / Σw).
ChungLuGraph chung_lu(const std::vector<double>& expected_degrees, std::mt19937_64& rng);

/// Rounds n·π onto integer counts by largest remainders and lists the
/// resulting degrees; used to check graphicality of a degree distribution.
DegreeSequence sequence_from_distribution(const DiscreteDist& pi, std::size_t n);

/// Pairwise Mahalanobis distances between rows of `z` under the inverse
/// sample covariance. Throws DataError if the covariance is singular.
Eigen::MatrixXd mahalanobis_matrix(const Eigen::MatrixXd& z);

/// Directed graph linking each i to its G_i nearest units by `dist`
/// (ties broken by ascending index). Edges are (i, j) with j a neighbour of i.
std::vector<Edge> nearest_neighbor_graph(const Eigen::MatrixXd& dist, const DegreeSequence& degrees);

/// Same graph as nearest_neighbor_graph(mahalanobis_matrix(z), degrees),
/// computed row by row without storing the n × n matrix.
std::vector<Edge> mahalanobis_neighbors(const Eigen::MatrixXd& z, const DegreeSequence& degrees);

inline constexpr int kDisconnected = std::numeric_limits<int>::max();

/// Hop counts on the undirected skeleton; kDisconnected when unreachable.
class HopMatrix {
public:
    HopMatrix(std::size_t n) : n_(n), hops_(n * n, kDisconnected) {}
    std::size_t size() const { return n_; }
    int operator()(std::size_t i, std::size_t j) const { return hops_[i * n_ + j]; }
    int& operator()(std::size_t i, std::size_t j) { return hops_[i * n_ + j]; }

private:
    std::size_t n_;
    std::vector<int> hops_;
};

HopMatrix shortest_paths(const std::vector<std::vector<int>>& neighbors);
HopMatrix shortest_paths(std::size_t n, const std::vector<Edge>& edges);

} // namespace netshift
