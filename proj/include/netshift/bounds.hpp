#pragma once

#include "netshift/dist.hpp"

#include <nlohmann/json.hpp>

#include <span>
#include <string>
#include <vector>

namespace netshift {

/// Covariate cell: one code per covariate column.
using Cell = std::vector<int>;

std::string cell_label(const Cell& x);

enum class Sense { Upper, Lower };

const char* to_string(Sense s);

/// Wasserstein ball 𝔹(center, radius, order), optionally intersected with
/// the set of distributions that are nonincreasing along the degree grid.
struct BallSpec {
    DiscreteDist center;
    double radius = 0.0;
    double order = 1.0;
    bool monotone = false;
};

/// m(g, x): the p(x)-weighted conditional total-effect contrast, one row per
/// covariate cell and one column per degree in `degrees`.
struct ContrastVector {
    std::vector<int> degrees;
    std::vector<Cell> cells;
    Eigen::MatrixXd values;

    /// Contrast values of cell k along `degrees`.
    std::vector<double> cell_values(std::size_t k) const;
    void validate() const;
};

/// Optimal value and one optimal plan of a single-cell problem.
struct CellSolution {
    double value = 0.0;
    TransportPlan plan;
};

/// Single cell, primal LP over transport plans (bounded-variable simplex).
/// Handles `ball.monotone`; throws InfeasibleError when the shape-restricted
/// ball is empty.
CellSolution solve_cell_primal(std::span<const double> m, const std::vector<int>& grid,
                               const BallSpec& ball, Sense sense);

struct DualSolution {
    double value = 0.0;
    double lambda = 0.0;
};

/// Single cell, exact minimization of the piecewise-linear dual
/// D(λ) = λ δ^q + Σ_u π*(u) max_v { m(v) - λ |u - v|^q } over λ >= 0.
DualSolution solve_cell_dual(std::span<const double> m, const std::vector<int>& grid,
                             const BallSpec& ball, Sense sense = Sense::Upper);

/// Evaluates D(λ) for the upper problem.
double dual_objective(std::span<const double> m, const std::vector<int>& grid,
                      const BallSpec& ball, double lambda);

/// Sum over cells of the per-cell maxima, solved by the primal simplex.
double upper_bound(const ContrastVector& m, const std::vector<BallSpec>& balls);
double lower_bound(const ContrastVector& m, const std::vector<BallSpec>& balls);

/// Same values through the exact dual; the default route for bound values.
double dual_upper_bound(const ContrastVector& m, const std::vector<BallSpec>& balls);
double dual_lower_bound(const ContrastVector& m, const std::vector<BallSpec>& balls);

/// Primal bound with the monotone (nonincreasing) shape restriction applied
/// to every cell regardless of the per-ball flag.
double bound_with_shape(const ContrastVector& m, const std::vector<BallSpec>& balls, Sense sense);

struct PerCellBounds {
    double total = 0.0;
    std::vector<double> per_cell;
};

/// Per-cell decomposition of a bound. Uses the dual unless a ball carries a
/// shape restriction, in which case that cell goes through the primal.
PerCellBounds cell_bounds(const ContrastVector& m, const std::vector<BallSpec>& balls, Sense sense);

/// Σ_x Σ_g m(g,x) π_x(g) for known target degree distributions.
double atte_point(const ContrastVector& m, const std::vector<DiscreteDist>& pi_target);

/// Vertices of the ball polytope whose objective is within `threshold` of the
/// optimum (at least optimum - a for Upper, at most optimum + a for Lower).
struct FaceSet {
    Sense sense = Sense::Upper;
    double threshold = 0.0;
    double optimum = 0.0;
    std::vector<TransportPlan> plans;
    std::vector<double> objectives;
    /// True where the cost constraint holds with equality at the vertex.
    std::vector<char> cost_binding;
};

/// Largest degree grid accepted by the vertex enumeration.
inline constexpr std::size_t kMaxFaceGrid = 8;

FaceSet enumerate_face(std::span<const double> m, const std::vector<int>& grid, const BallSpec& ball,
                       double a, Sense sense);

/// Every basic feasible solution of {Γ >= 0, Γ 1 = π*, <Γ, C> + s = δ^q, s >= 0}.
std::vector<TransportPlan> enumerate_vertices(const std::vector<int>& grid, const BallSpec& ball);

/// Objective Σ Γ(u,v) m(v) of a plan whose columns follow `m`'s grid.
double plan_objective(const TransportPlan& plan, std::span<const double> m);

void to_json(nlohmann::json& j, const FaceSet& f);

} // namespace netshift
