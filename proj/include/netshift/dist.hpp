#pragma once

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <span>
#include <vector>

namespace netshift {

/// Probability mass function on a finite, strictly increasing set of
/// nonnegative integers (degree values).
///
/// Masses whose sum is within 1e-9 of one are renormalized on construction;
/// anything further off is rejected with a DataError.
class DiscreteDist {
public:
    DiscreteDist(std::vector<int> support, std::vector<double> mass);

    static DiscreteDist point_mass(int g);
    static DiscreteDist uniform(std::vector<int> support);
    /// Bernoulli(alpha) on {0, 1}.
    static DiscreteDist bernoulli(double alpha);
    /// Empirical distribution of a sample of nonnegative integers.
    static DiscreteDist empirical(std::span<const int> values);

    const std::vector<int>& support() const { return support_; }
    const std::vector<double>& mass() const { return mass_; }
    std::size_t size() const { return support_.size(); }

    /// Mass at g, zero when g is outside the support.
    double at(int g) const;
    double mean() const;

    /// Same distribution re-expressed on `grid`, which must contain the
    /// support; missing points get zero mass.
    DiscreteDist on_grid(const std::vector<int>& grid) const;

private:
    std::vector<int> support_;
    std::vector<double> mass_;
};

/// Sorted union of the two supports.
std::vector<int> union_support(const DiscreteDist& a, const DiscreteDist& b);

/// Coupling Γ of a reference distribution (rows, Γ row sums) and a candidate
/// distribution (columns, Γ column sums).
struct TransportPlan {
    std::vector<int> rows;
    std::vector<int> cols;
    Eigen::MatrixXd gamma;

    Eigen::VectorXd row_sums() const { return gamma.rowwise().sum(); }
    Eigen::VectorXd col_sums() const { return gamma.colwise().sum().transpose(); }
    /// Σ Γ(u,v) |u - v|^q
    double cost(double q) const;
};

/// |u - v|^q in double precision.
double transport_cost(int u, int v, double q);

/// Exact q-Wasserstein distance between two distributions on the integers,
/// via the quantile coupling (optimal on the real line).
double wasserstein(const DiscreteDist& pi, const DiscreteDist& pi_star, double q);

/// Monotone (north-west corner) coupling. Rows are indexed by the support of
/// `pi_star`, columns by the support of `pi`. The plan attains
/// wasserstein(pi, pi_star, q)^q for every q >= 1.
TransportPlan optimal_plan(const DiscreteDist& pi, const DiscreteDist& pi_star, double q);

void to_json(nlohmann::json& j, const DiscreteDist& d);
DiscreteDist dist_from_json(const nlohmann::json& j);

} // namespace netshift
