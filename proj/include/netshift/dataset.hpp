#pragma once

#include "netshift/bounds.hpp"
#include "netshift/dist.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace netshift {

enum class CovariateKind { Categorical, Ordered };

struct Edge {
    int src = 0;
    int dst = 0;
};

/// Source sample: outcomes, treatments, discrete covariate cells and the
/// observed network. Degree and treated-peer counts are derived on
/// construction (out-degree when the network is directed).
class SourceDataset {
public:
    SourceDataset(std::vector<double> y, std::vector<int> d, std::vector<Cell> x,
                  std::vector<CovariateKind> kinds, const std::vector<Edge>& edges, bool directed);

    std::size_t size() const { return y_.size(); }
    const std::vector<double>& y() const { return y_; }
    const std::vector<int>& treatment() const { return d_; }
    const std::vector<Cell>& covariates() const { return x_; }
    const std::vector<CovariateKind>& kinds() const { return kinds_; }
    bool directed() const { return directed_; }

    /// G_i = Σ_j A_ij
    const std::vector<int>& degree() const { return degree_; }
    /// S_i = Σ_j A_ij D_j
    const std::vector<int>& treated_peers() const { return treated_peers_; }
    /// Out-neighbours of each unit (both directions when undirected).
    const std::vector<std::vector<int>>& neighbors() const { return out_; }
    /// Neighbours on the undirected skeleton.
    std::vector<std::vector<int>> undirected_neighbors() const;
    std::vector<Edge> edges() const;

    /// Distinct covariate cells present, sorted.
    std::vector<Cell> cells() const;
    std::size_t count_in_cell(const Cell& x) const;

    /// Extra real-valued unit attributes (e.g. columns for proxy distances).
    std::map<std::string, std::vector<double>> numeric;
    /// Optional block label per unit; pairs across blocks can be declared
    /// infinitely distant.
    std::optional<std::vector<int>> blocks;

    /// Replace outcomes, keeping everything else (used by simulation).
    void set_outcomes(std::vector<double> y);

private:
    std::vector<double> y_;
    std::vector<int> d_;
    std::vector<Cell> x_;
    std::vector<CovariateKind> kinds_;
    bool directed_;
    std::vector<std::vector<int>> out_;
    std::vector<int> degree_;
    std::vector<int> treated_peers_;
};

/// Empirical degree distribution among units in covariate cell x.
DiscreteDist degree_dist_conditional(const SourceDataset& data, const Cell& x);

} // namespace netshift
