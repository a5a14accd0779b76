#include "netshift/bounds.hpp"

#include "netshift/errors.hpp"
#include "netshift/simplex.hpp"

#include <fmt/format.h>
#include <fmt/ranges.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace netshift {

std::string cell_label(const Cell& x) { return fmt::format("{}", fmt::join(x, "_")); }

const char* to_string(Sense s) { return s == Sense::Upper ? "upper" : "lower"; }

std::vector<double> ContrastVector::cell_values(std::size_t k) const {
    std::vector<double> out(degrees.size());
    for (std::size_t g = 0; g < out.size(); ++g)
        out[g] = values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(g));
    return out;
}

namespace {

void validate_ball(const BallSpec& ball) {
    if (!(ball.radius >= 0.0) || !std::isfinite(ball.radius))
        throw ConfigError(fmt::format("Wasserstein radius must be >= 0, got {}", ball.radius));
    if (!(ball.order >= 1.0) || !std::isfinite(ball.order))
        throw ConfigError(fmt::format("Wasserstein order must be >= 1, got {}", ball.order));
}

void validate_cell_input(std::span<const double> m, const std::vector<int>& grid,
                         const BallSpec& ball) {
    validate_ball(ball);
    if (grid.empty() || m.size() != grid.size())
        throw ConfigError(fmt::format("contrast has {} entries for a grid of {}", m.size(),
                                      grid.size()));
    for (double v : m)
        if (!std::isfinite(v))
            throw DataError("contrast vector contains a non-finite value");
}

std::vector<double> center_on(const BallSpec& ball, const std::vector<int>& grid) {
    try {
        return ball.center.on_grid(grid).mass();
    } catch (const DataError&) {
        throw ConfigError(fmt::format("reference distribution support {} is not contained in "
                                      "the degree grid {}",
                                      ball.center.support(), grid));
    }
}

double budget_of(const BallSpec& ball) {
    return ball.radius == 0.0 ? 0.0 : std::pow(ball.radius, ball.order);
}

void check_balls(const ContrastVector& m, const std::vector<BallSpec>& balls) {
    m.validate();
    if (balls.size() != m.cells.size())
        throw ConfigError(fmt::format("{} balls supplied for {} covariate cells", balls.size(),
                                      m.cells.size()));
}

} // namespace

void ContrastVector::validate() const {
    if (values.rows() != static_cast<Eigen::Index>(cells.size()) ||
        values.cols() != static_cast<Eigen::Index>(degrees.size()))
        throw ConfigError("contrast matrix shape does not match cells x degrees");
    if (!std::is_sorted(degrees.begin(), degrees.end()) ||
        std::adjacent_find(degrees.begin(), degrees.end()) != degrees.end())
        throw ConfigError("degree grid must be strictly increasing");
    if (!values.allFinite())
        throw DataError("contrast vector contains a non-finite value");
}

CellSolution solve_cell_primal(std::span<const double> m, const std::vector<int>& grid,
                               const BallSpec& ball, Sense sense) {
    validate_cell_input(m, grid, ball);
    const auto center = center_on(ball, grid);
    const std::size_t d = grid.size();
    LinearProgram lp(d * d);
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v)
            lp.set_cost(u * d + v, m[v]);
    for (std::size_t u = 0; u < d; ++u) {
        std::vector<double> row(d * d, 0.0);
        for (std::size_t v = 0; v < d; ++v)
            row[u * d + v] = 1.0;
        lp.add_row(std::move(row), RowSense::Equal, center[u]);
    }
    std::vector<double> cost_row(d * d);
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v)
            cost_row[u * d + v] = transport_cost(grid[u], grid[v], ball.order);
    lp.add_row(std::move(cost_row), RowSense::LessEqual, budget_of(ball));
    if (ball.monotone) {
        for (std::size_t k = 0; k + 1 < d; ++k) {
            std::vector<double> row(d * d, 0.0);
            for (std::size_t u = 0; u < d; ++u) {
                row[u * d + k] = 1.0;
                row[u * d + k + 1] = -1.0;
            }
            lp.add_row(std::move(row), RowSense::GreaterEqual, 0.0);
        }
    }

    const auto res = lp.solve(sense == Sense::Upper ? Objective::Maximize : Objective::Minimize);
    if (res.status == LpStatus::Infeasible) {
        if (ball.monotone)
            throw InfeasibleError(fmt::format(
                "no nonincreasing degree distribution lies within W_{} distance {} of the "
                "reference; enlarge the radius or drop the shape restriction",
                ball.order, ball.radius));
        throw NumericalError("ball LP reported infeasible although the reference plan is feasible");
    }
    if (res.status != LpStatus::Optimal)
        throw NumericalError(fmt::format("ball LP not solved: {} after {} iterations",
                                         to_string(res.status), res.iterations));

    CellSolution out{res.objective, {grid, grid, Eigen::MatrixXd::Zero(
                                                     static_cast<Eigen::Index>(d),
                                                     static_cast<Eigen::Index>(d))}};
    for (std::size_t u = 0; u < d; ++u)
        for (std::size_t v = 0; v < d; ++v)
            out.plan.gamma(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(v)) =
                res.x[u * d + v];
    return out;
}

double dual_objective(std::span<const double> m, const std::vector<int>& grid,
                      const BallSpec& ball, double lambda) {
    const auto center = center_on(ball, grid);
    double value = lambda * budget_of(ball);
    for (std::size_t u = 0; u < grid.size(); ++u) {
        if (center[u] == 0.0)
            continue;
        double best = -std::numeric_limits<double>::infinity();
        for (std::size_t v = 0; v < grid.size(); ++v)
            best = std::max(best, m[v] - lambda * transport_cost(grid[u], grid[v], ball.order));
        value += best * center[u];
    }
    return value;
}

DualSolution solve_cell_dual(std::span<const double> m, const std::vector<int>& grid,
                             const BallSpec& ball, Sense sense) {
    validate_cell_input(m, grid, ball);
    if (ball.monotone)
        throw ConfigError("the dual route does not support shape restrictions; use the primal");
    if (sense == Sense::Lower) {
        std::vector<double> neg(m.begin(), m.end());
        for (auto& v : neg)
            v = -v;
        auto s = solve_cell_dual(neg, grid, ball, Sense::Upper);
        s.value = -s.value;
        return s;
    }
    const auto center = center_on(ball, grid);
    const std::size_t d = grid.size();

    // D is convex piecewise linear in λ with kinks where the maximizing v of
    // some row changes, and nondecreasing past the last kink.
    std::vector<double> candidates{0.0};
    for (std::size_t u = 0; u < d; ++u) {
        if (center[u] == 0.0)
            continue;
        for (std::size_t v1 = 0; v1 < d; ++v1)
            for (std::size_t v2 = v1 + 1; v2 < d; ++v2) {
                const double dc = transport_cost(grid[u], grid[v1], ball.order) -
                                  transport_cost(grid[u], grid[v2], ball.order);
                if (dc == 0.0)
                    continue;
                const double lam = (m[v1] - m[v2]) / dc;
                if (lam > 0.0 && std::isfinite(lam))
                    candidates.push_back(lam);
            }
    }
    std::sort(candidates.begin(), candidates.end());
    candidates.erase(std::unique(candidates.begin(), candidates.end()), candidates.end());

    DualSolution best{std::numeric_limits<double>::infinity(), 0.0};
    for (double lam : candidates) {
        const double val = dual_objective(m, grid, ball, lam);
        if (val < best.value)
            best = {val, lam};
    }
    return best;
}

double upper_bound(const ContrastVector& m, const std::vector<BallSpec>& balls) {
    check_balls(m, balls);
    double total = 0.0;
    for (std::size_t k = 0; k < balls.size(); ++k)
        total += solve_cell_primal(m.cell_values(k), m.degrees, balls[k], Sense::Upper).value;
    return total;
}

double lower_bound(const ContrastVector& m, const std::vector<BallSpec>& balls) {
    check_balls(m, balls);
    double total = 0.0;
    for (std::size_t k = 0; k < balls.size(); ++k)
        total += solve_cell_primal(m.cell_values(k), m.degrees, balls[k], Sense::Lower).value;
    return total;
}

double dual_upper_bound(const ContrastVector& m, const std::vector<BallSpec>& balls) {
    check_balls(m, balls);
    double total = 0.0;
    for (std::size_t k = 0; k < balls.size(); ++k)
        total += solve_cell_dual(m.cell_values(k), m.degrees, balls[k], Sense::Upper).value;
    return total;
}

double dual_lower_bound(const ContrastVector& m, const std::vector<BallSpec>& balls) {
    check_balls(m, balls);
    double total = 0.0;
    for (std::size_t k = 0; k < balls.size(); ++k)
        total += solve_cell_dual(m.cell_values(k), m.degrees, balls[k], Sense::Lower).value;
    return total;
}

double bound_with_shape(const ContrastVector& m, const std::vector<BallSpec>& balls, Sense sense) {
    check_balls(m, balls);
    double total = 0.0;
    for (std::size_t k = 0; k < balls.size(); ++k) {
        BallSpec b = balls[k];
        b.monotone = true;
        total += solve_cell_primal(m.cell_values(k), m.degrees, b, sense).value;
    }
    return total;
}

PerCellBounds cell_bounds(const ContrastVector& m, const std::vector<BallSpec>& balls, Sense sense) {
    check_balls(m, balls);
    PerCellBounds out;
    out.per_cell.reserve(balls.size());
    for (std::size_t k = 0; k < balls.size(); ++k) {
        const auto mv = m.cell_values(k);
        const double v = balls[k].monotone
                             ? solve_cell_primal(mv, m.degrees, balls[k], sense).value
                             : solve_cell_dual(mv, m.degrees, balls[k], sense).value;
        out.per_cell.push_back(v);
        out.total += v;
    }
    return out;
}

double atte_point(const ContrastVector& m, const std::vector<DiscreteDist>& pi_target) {
    m.validate();
    if (pi_target.size() != m.cells.size())
        throw ConfigError("one target degree distribution per covariate cell is required");
    double total = 0.0;
    for (std::size_t k = 0; k < pi_target.size(); ++k) {
        const auto mass = pi_target[k].on_grid(m.degrees).mass();
        for (std::size_t g = 0; g < mass.size(); ++g)
            total += m.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(g)) * mass[g];
    }
    return total;
}

double plan_objective(const TransportPlan& plan, std::span<const double> m) {
    const Eigen::VectorXd cols = plan.col_sums();
    double s = 0.0;
    for (Eigen::Index v = 0; v < cols.size(); ++v)
        s += cols(v) * m[static_cast<std::size_t>(v)];
    return s;
}

namespace {

// Enumerates vertices of {Γ >= 0, Γ 1 = π*, <Γ,C> + s = δ^q, s >= 0}.
//
// A basis has one column per active row plus one more (rows with π*(u) = 0
// force their whole row to zero and are dropped). Since every Γ(u,v) touches
// only row u and the cost row, a nonsingular basis either holds the slack and
// one Γ entry per row, or holds no slack and two entries in exactly one row,
// which then splits its mass so that the cost constraint binds.
class VertexEnumerator {
public:
    VertexEnumerator(std::span<const double> m, const std::vector<int>& grid, const BallSpec& ball,
                     double sign, double floor)
        : d_(grid.size()), grid_(grid), sign_(sign), floor_(floor),
          center_(center_on(ball, grid)), budget_(budget_of(ball)),
          tol_(1e-12 * std::max(1.0, budget_of(ball))) {
        obj_.assign(m.begin(), m.end());
        for (auto& v : obj_)
            v *= sign_;
        cost_.resize(d_ * d_);
        for (std::size_t u = 0; u < d_; ++u)
            for (std::size_t v = 0; v < d_; ++v)
                cost_[u * d_ + v] = transport_cost(grid[u], grid[v], ball.order);
        for (std::size_t u = 0; u < d_; ++u)
            if (center_[u] > 0.0)
                active_.push_back(u);
        const double top = *std::max_element(obj_.begin(), obj_.end());
        suffix_best_.assign(active_.size() + 1, 0.0);
        for (std::size_t k = active_.size(); k-- > 0;)
            suffix_best_[k] = suffix_best_[k + 1] + center_[active_[k]] * top;
        pick_.assign(active_.size(), 0);
    }

    struct Vertex {
        std::vector<double> gamma;
        double objective; // in the caller's (unsigned) units
        bool cost_binding;
    };

    std::vector<Vertex> run() {
        split_ = active_.size();
        descend(0, 0.0, 0.0, 0.0);
        for (split_ = 0; split_ < active_.size(); ++split_)
            descend(0, 0.0, 0.0, 0.0);
        return std::move(found_);
    }

private:
    void descend(std::size_t k, double rest_cost, double split_lb, double obj_partial) {
        if (rest_cost + split_lb > budget_ + tol_)
            return;
        if (obj_partial + suffix_best_[k] < floor_)
            return;
        if (k == active_.size()) {
            emit(rest_cost);
            return;
        }
        const std::size_t u = active_[k];
        const double mass = center_[u];
        if (k == split_) {
            for (std::size_t v1 = 0; v1 < d_; ++v1)
                for (std::size_t v2 = v1 + 1; v2 < d_; ++v2) {
                    const double c1 = cost_[u * d_ + v1], c2 = cost_[u * d_ + v2];
                    if (c1 == c2)
                        continue;
                    split_pair_ = {v1, v2};
                    descend(k + 1, rest_cost, mass * std::min(c1, c2),
                            obj_partial + mass * std::max(obj_[v1], obj_[v2]));
                }
            return;
        }
        for (std::size_t v = 0; v < d_; ++v) {
            pick_[k] = v;
            descend(k + 1, rest_cost + mass * cost_[u * d_ + v], split_lb,
                    obj_partial + mass * obj_[v]);
        }
    }

    void emit(double rest_cost) {
        std::vector<double> gamma(d_ * d_, 0.0);
        bool binding;
        for (std::size_t k = 0; k < active_.size(); ++k)
            if (k != split_)
                gamma[active_[k] * d_ + pick_[k]] = center_[active_[k]];
        if (split_ == active_.size()) {
            binding = std::abs(budget_ - rest_cost) <= tol_;
        } else {
            const std::size_t u = active_[split_];
            const double mass = center_[u];
            const auto [v1, v2] = split_pair_;
            const double c1 = cost_[u * d_ + v1], c2 = cost_[u * d_ + v2];
            double t = (budget_ - rest_cost - mass * c2) / (c1 - c2);
            const double slack = 1e-12 * std::max(1.0, mass);
            if (t < -slack || t > mass + slack)
                return;
            t = std::clamp(t, 0.0, mass);
            if (t < 1e-15)
                t = 0.0;
            if (mass - t < 1e-15)
                t = mass;
            gamma[u * d_ + v1] = t;
            gamma[u * d_ + v2] = mass - t;
            binding = true;
        }
        double obj = 0.0;
        for (std::size_t u = 0; u < d_; ++u)
            for (std::size_t v = 0; v < d_; ++v)
                obj += gamma[u * d_ + v] * obj_[v];
        if (obj < floor_)
            return;
        std::vector<long long> key(gamma.size());
        for (std::size_t i = 0; i < gamma.size(); ++i)
            key[i] = std::llround(gamma[i] * 1e9);
        if (!seen_.insert(std::move(key)).second)
            return;
        found_.push_back({std::move(gamma), sign_ * obj, binding});
    }

    std::size_t d_;
    const std::vector<int>& grid_;
    double sign_, floor_;
    std::vector<double> center_;
    double budget_, tol_;
    std::vector<double> obj_, cost_;
    std::vector<std::size_t> active_;
    std::vector<double> suffix_best_;
    std::vector<std::size_t> pick_;
    std::size_t split_ = 0;
    std::pair<std::size_t, std::size_t> split_pair_{0, 0};
    std::set<std::vector<long long>> seen_;
    std::vector<Vertex> found_;
};

TransportPlan to_plan(const std::vector<int>& grid, const std::vector<double>& gamma) {
    const auto d = static_cast<Eigen::Index>(grid.size());
    TransportPlan p{grid, grid, Eigen::MatrixXd(d, d)};
    for (Eigen::Index u = 0; u < d; ++u)
        for (Eigen::Index v = 0; v < d; ++v)
            p.gamma(u, v) = gamma[static_cast<std::size_t>(u * d + v)];
    return p;
}

constexpr double kFaceTieTol = 1e-9;

} // namespace

FaceSet enumerate_face(std::span<const double> m, const std::vector<int>& grid, const BallSpec& ball,
                       double a, Sense sense) {
    validate_cell_input(m, grid, ball);
    if (!(a >= 0.0) || !std::isfinite(a))
        throw ConfigError(fmt::format("face threshold must be finite and >= 0, got {}", a));
    if (ball.monotone)
        throw ConfigError("face enumeration is defined for the unrestricted ball only");
    if (grid.size() > kMaxFaceGrid)
        throw ConfigError(fmt::format("face enumeration supports at most {} degree values, got {}",
                                      kMaxFaceGrid, grid.size()));
    const double optimum = solve_cell_dual(m, grid, ball, sense).value;
    const double sign = sense == Sense::Upper ? 1.0 : -1.0;
    const double floor = sign * optimum - a - kFaceTieTol * std::max(1.0, std::abs(optimum));

    auto vertices = VertexEnumerator(m, grid, ball, sign, floor).run();
    std::sort(vertices.begin(), vertices.end(), [&](const auto& x, const auto& y) {
        if (x.objective != y.objective)
            return sign * x.objective > sign * y.objective;
        return x.gamma < y.gamma;
    });

    FaceSet face;
    face.sense = sense;
    face.threshold = a;
    face.optimum = optimum;
    for (auto& v : vertices) {
        face.plans.push_back(to_plan(grid, v.gamma));
        face.objectives.push_back(v.objective);
        face.cost_binding.push_back(v.cost_binding ? 1 : 0);
    }
    if (face.plans.empty())
        throw NumericalError("face enumeration found no vertex attaining the optimum");
    return face;
}

std::vector<TransportPlan> enumerate_vertices(const std::vector<int>& grid, const BallSpec& ball) {
    if (ball.monotone)
        throw ConfigError("vertex enumeration is defined for the unrestricted ball only");
    validate_ball(ball);
    if (grid.size() > kMaxFaceGrid)
        throw ConfigError("vertex enumeration grid too large");
    const std::vector<double> zeros(grid.size(), 0.0);
    auto vertices = VertexEnumerator(zeros, grid, ball, 1.0,
                                     -std::numeric_limits<double>::infinity())
                        .run();
    std::vector<TransportPlan> out;
    out.reserve(vertices.size());
    for (auto& v : vertices)
        out.push_back(to_plan(grid, v.gamma));
    return out;
}

void to_json(nlohmann::json& j, const FaceSet& f) {
    j = nlohmann::json{{"sense", to_string(f.sense)},
                       {"threshold", f.threshold},
                       {"optimum", f.optimum},
                       {"plans", nlohmann::json::array()}};
    for (std::size_t k = 0; k < f.plans.size(); ++k) {
        const auto& p = f.plans[k];
        nlohmann::json rows = nlohmann::json::array();
        for (Eigen::Index u = 0; u < p.gamma.rows(); ++u) {
            std::vector<double> r(static_cast<std::size_t>(p.gamma.cols()));
            for (Eigen::Index v = 0; v < p.gamma.cols(); ++v)
                r[static_cast<std::size_t>(v)] = p.gamma(u, v);
            rows.push_back(r);
        }
        j["plans"].push_back({{"objective", f.objectives[k]},
                              {"cost_binding", f.cost_binding[k] != 0},
                              {"degrees", p.cols},
                              {"gamma", rows}});
    }
}

} // namespace netshift
