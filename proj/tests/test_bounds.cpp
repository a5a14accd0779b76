#include "doctest.h"
#include "oracles.hpp"

#include "netshift/bounds.hpp"
#include "netshift/errors.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <random>
#include <set>

using namespace netshift;

namespace {

ContrastVector single_cell(std::vector<int> grid, std::vector<double> m) {
    ContrastVector c;
    c.degrees = std::move(grid);
    c.cells = {Cell{0}};
    c.values = Eigen::Map<Eigen::RowVectorXd>(m.data(), static_cast<Eigen::Index>(m.size()));
    return c;
}

std::set<std::vector<long long>> plan_keys(const std::vector<TransportPlan>& plans) {
    std::set<std::vector<long long>> keys;
    for (const auto& p : plans) {
        std::vector<long long> k;
        for (Eigen::Index u = 0; u < p.gamma.rows(); ++u)
            for (Eigen::Index v = 0; v < p.gamma.cols(); ++v)
                k.push_back(std::llround(p.gamma(u, v) * 1e8));
        keys.insert(k);
    }
    return keys;
}

// Every column subset of size (rows + 1) of [Γ | slack], solved as a square
// system; the feasible solutions are the vertices.
std::vector<TransportPlan> brute_force_vertices(const std::vector<int>& grid, const BallSpec& ball) {
    const std::size_t d = grid.size();
    const std::size_t ncols = d * d + 1, nrows = d + 1;
    Eigen::MatrixXd A = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(nrows),
                                              static_cast<Eigen::Index>(ncols));
    Eigen::VectorXd b(static_cast<Eigen::Index>(nrows));
    const auto center = ball.center.on_grid(grid).mass();
    for (std::size_t u = 0; u < d; ++u) {
        for (std::size_t v = 0; v < d; ++v) {
            A(static_cast<Eigen::Index>(u), static_cast<Eigen::Index>(u * d + v)) = 1.0;
            A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(u * d + v)) =
                transport_cost(grid[u], grid[v], ball.order);
        }
        b(static_cast<Eigen::Index>(u)) = center[u];
    }
    A(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d * d)) = 1.0;
    b(static_cast<Eigen::Index>(d)) = std::pow(ball.radius, ball.order);

    std::vector<TransportPlan> out;
    std::vector<char> mask(ncols, 0);
    std::fill(mask.begin(), mask.begin() + static_cast<std::ptrdiff_t>(nrows), 1);
    do {
        std::vector<std::size_t> cols;
        for (std::size_t j = 0; j < ncols; ++j)
            if (mask[j])
                cols.push_back(j);
        Eigen::MatrixXd B(static_cast<Eigen::Index>(nrows), static_cast<Eigen::Index>(nrows));
        for (std::size_t k = 0; k < nrows; ++k)
            B.col(static_cast<Eigen::Index>(k)) = A.col(static_cast<Eigen::Index>(cols[k]));
        Eigen::FullPivLU<Eigen::MatrixXd> lu(B);
        if (lu.rank() < static_cast<Eigen::Index>(nrows))
            continue;
        Eigen::VectorXd x = lu.solve(b);
        if ((x.array() < -1e-12).any())
            continue;
        TransportPlan p{grid, grid,
                        Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(d))};
        for (std::size_t k = 0; k < nrows; ++k)
            if (cols[k] < d * d)
                p.gamma(static_cast<Eigen::Index>(cols[k] / d),
                        static_cast<Eigen::Index>(cols[k] % d)) = std::max(0.0, x(static_cast<Eigen::Index>(k)));
        out.push_back(p);
    } while (std::prev_permutation(mask.begin(), mask.end()));
    return out;
}

struct RandomInstance {
    std::vector<int> grid;
    std::vector<double> m;
    BallSpec ball;
};

RandomInstance random_instance(std::mt19937_64& rng, std::size_t max_d, std::vector<double> qs) {
    std::uniform_int_distribution<std::size_t> dd(1, max_d);
    const std::size_t d = dd(rng);
    std::vector<int> grid(d);
    for (std::size_t k = 0; k < d; ++k)
        grid[k] = static_cast<int>(k);
    auto center = oracle::random_dist(rng, d, static_cast<int>(d) - 1, true).on_grid(grid);
    std::normal_distribution<double> z(0.0, 1.0);
    std::vector<double> m(d);
    for (auto& v : m)
        v = z(rng);
    std::uniform_real_distribution<double> ud(0.0, static_cast<double>(d));
    const double q = qs[std::uniform_int_distribution<std::size_t>(0, qs.size() - 1)(rng)];
    double delta = ud(rng);
    if (delta == 0.0)
        delta = 0.5;
    return {grid, m, BallSpec{center, delta, q}};
}

} // namespace

TEST_CASE("toy Bernoulli bounds match closed forms") {
    const std::vector<int> grid{0, 1};
    for (double m0 : {0.0, -0.3}) {
        for (double m1 : {1.0, 2.5}) {
            for (double as : {0.1, 0.4, 0.6, 0.9}) {
                for (double delta : {0.05, 0.2, 0.45, 0.7, 1.5}) {
                    BallSpec ball{DiscreteDist::bernoulli(as), delta, 1.0};
                    std::vector<double> m{m0, m1};
                    const double up = m0 + std::min(1.0, as + delta) * (m1 - m0);
                    const double lo = m0 + std::max(0.0, as - delta) * (m1 - m0);
                    CHECK(solve_cell_primal(m, grid, ball, Sense::Upper).value ==
                          doctest::Approx(up).epsilon(1e-12));
                    CHECK(solve_cell_primal(m, grid, ball, Sense::Lower).value ==
                          doctest::Approx(lo).epsilon(1e-12));
                    CHECK(solve_cell_dual(m, grid, ball, Sense::Upper).value ==
                          doctest::Approx(up).epsilon(1e-12));
                    CHECK(solve_cell_dual(m, grid, ball, Sense::Lower).value ==
                          doctest::Approx(lo).epsilon(1e-12));
                }
            }
        }
    }
    // The worked example: m = (0, 1), alpha* = 0.4, delta = 0.2.
    auto c = single_cell(grid, {0.0, 1.0});
    std::vector<BallSpec> balls{{DiscreteDist::bernoulli(0.4), 0.2, 1.0}};
    CHECK(upper_bound(c, balls) == doctest::Approx(0.6));
    CHECK(lower_bound(c, balls) == doctest::Approx(0.2));
    balls[0].radius = 0.6;
    CHECK(upper_bound(c, balls) == doctest::Approx(1.0));
    CHECK(lower_bound(c, balls) == doctest::Approx(0.0));
}

TEST_CASE("dual optimum follows the two-case split") {
    const std::vector<int> grid{0, 1};
    const std::vector<double> m{0.5, 2.0};
    // delta < 1 - alpha*: lambda = m(1) - m(0)
    auto s = solve_cell_dual(m, grid, {DiscreteDist::bernoulli(0.3), 0.2, 1.0});
    CHECK(s.lambda == doctest::Approx(1.5));
    CHECK(s.value == doctest::Approx(0.5 + 1.5 * 0.5));
    // delta >= 1 - alpha*: lambda = 0, value m(1)
    s = solve_cell_dual(m, grid, {DiscreteDist::bernoulli(0.3), 0.9, 1.0});
    CHECK(s.lambda == 0.0);
    CHECK(s.value == doctest::Approx(2.0));
}

TEST_CASE("non-unique optimum on three degrees") {
    const std::vector<int> grid{1, 2, 3};
    const std::vector<double> m{1.0, 2.0, 3.0};
    BallSpec ball{DiscreteDist({1, 2, 3}, {0.5, 0.5, 0.0}), 1.0, 1.0};
    CHECK(solve_cell_primal(m, grid, ball, Sense::Upper).value == doctest::Approx(2.5));
    CHECK(solve_cell_dual(m, grid, ball).value == doctest::Approx(2.5));

    auto face = enumerate_face(m, grid, ball, 0.0, Sense::Upper);
    CHECK(face.optimum == doctest::Approx(2.5));
    CHECK(face.plans.size() >= 2);
    bool has_target_marginal = false;
    for (const auto& p : face.plans) {
        auto cs = p.col_sums();
        if (std::abs(cs(0)) < 1e-12 && std::abs(cs(1) - 0.5) < 1e-12 && std::abs(cs(2) - 0.5) < 1e-12)
            has_target_marginal = true;
    }
    CHECK(has_target_marginal);
}

TEST_CASE("single support point pins the bound") {
    auto c = single_cell({4}, {3.25});
    std::vector<BallSpec> balls{{DiscreteDist::point_mass(4), 2.0, 2.0}};
    CHECK(lower_bound(c, balls) == doctest::Approx(3.25));
    CHECK(upper_bound(c, balls) == doctest::Approx(3.25));
    CHECK(dual_lower_bound(c, balls) == doctest::Approx(3.25));
}

TEST_CASE("zero radius is the singleton ball") {
    std::mt19937_64 rng(21);
    for (int t = 0; t < 50; ++t) {
        auto inst = random_instance(rng, 6, {1.0, 2.0});
        inst.ball.radius = 0.0;
        double expect = 0.0;
        const auto mass = inst.ball.center.mass();
        for (std::size_t g = 0; g < mass.size(); ++g)
            expect += mass[g] * inst.m[g];
        CHECK(solve_cell_primal(inst.m, inst.grid, inst.ball, Sense::Upper).value ==
              doctest::Approx(expect).epsilon(1e-10));
        CHECK(solve_cell_dual(inst.m, inst.grid, inst.ball).value ==
              doctest::Approx(expect).epsilon(1e-10));
    }
}

TEST_CASE("strong duality on random instances") {
    std::mt19937_64 rng(1234);
    for (int t = 0; t < 300; ++t) {
        auto inst = random_instance(rng, 6, {1.0, 2.0});
        for (Sense s : {Sense::Upper, Sense::Lower}) {
            const double p = solve_cell_primal(inst.m, inst.grid, inst.ball, s).value;
            const double d = solve_cell_dual(inst.m, inst.grid, inst.ball, s).value;
            CHECK(std::abs(p - d) <= 1e-8);
        }
    }
}

TEST_CASE("monotone in the radius and saturating") {
    std::mt19937_64 rng(99);
    for (int t = 0; t < 60; ++t) {
        auto inst = random_instance(rng, 6, {1.0, 2.0});
        double prev_up = -1e300, prev_lo = 1e300;
        for (double delta : {0.0, 0.05, 0.2, 0.5, 1.0, 2.0, 4.0}) {
            inst.ball.radius = delta;
            const double up = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Upper).value;
            const double lo = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Lower).value;
            CHECK(up >= prev_up - 1e-12);
            CHECK(lo <= prev_lo + 1e-12);
            CHECK(lo <= up + 1e-12);
            prev_up = up;
            prev_lo = lo;
        }
        inst.ball.radius = static_cast<double>(inst.grid.back() - inst.grid.front()) + 1e-9;
        CHECK(solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Upper).value ==
              doctest::Approx(*std::max_element(inst.m.begin(), inst.m.end())));
        CHECK(solve_cell_primal(inst.m, inst.grid, inst.ball, Sense::Lower).value ==
              doctest::Approx(*std::min_element(inst.m.begin(), inst.m.end())));
    }
}

TEST_CASE("points inside the ball stay inside the bounds") {
    std::mt19937_64 rng(5150);
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng, 6, {1.0, 2.0});
        const auto center = inst.ball.center.mass();
        const double up = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Upper).value;
        const double lo = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Lower).value;
        for (int k = 0; k < 20; ++k) {
            auto pi = oracle::sample_in_ball(rng, inst.grid, center, inst.ball.radius, inst.ball.order);
            double val = 0.0;
            for (std::size_t g = 0; g < pi.size(); ++g)
                val += pi[g] * inst.m[g];
            CHECK(val <= up + 1e-10);
            CHECK(val >= lo - 1e-10);
        }
    }
}

TEST_CASE("cells add up") {
    ContrastVector c;
    c.degrees = {0, 1, 2, 3};
    c.cells = {Cell{0}, Cell{1}, Cell{2}};
    c.values.resize(3, 4);
    c.values << 0.1, 0.4, -0.2, 0.9, 1.0, 0.0, 0.5, 0.5, -1.0, 2.0, 0.3, 0.0;
    std::vector<BallSpec> balls{{DiscreteDist::uniform({0, 1, 2, 3}), 0.3, 2.0},
                                {DiscreteDist({0, 3}, {0.5, 0.5}), 0.7, 1.0},
                                {DiscreteDist::point_mass(2), 1.1, 2.0}};
    double sum_up = 0.0, sum_lo = 0.0;
    for (std::size_t k = 0; k < 3; ++k) {
        sum_up += solve_cell_primal(c.cell_values(k), c.degrees, balls[k], Sense::Upper).value;
        sum_lo += solve_cell_primal(c.cell_values(k), c.degrees, balls[k], Sense::Lower).value;
    }
    CHECK(upper_bound(c, balls) == doctest::Approx(sum_up));
    CHECK(dual_upper_bound(c, balls) == doctest::Approx(sum_up));
    CHECK(lower_bound(c, balls) == doctest::Approx(sum_lo));
    CHECK(dual_lower_bound(c, balls) == doctest::Approx(sum_lo));
    auto per = cell_bounds(c, balls, Sense::Upper);
    CHECK(per.per_cell.size() == 3);
    CHECK(per.total == doctest::Approx(sum_up));
}

TEST_CASE("monotone shape restriction") {
    auto c = single_cell({0, 1}, {0.0, 1.0});
    std::vector<BallSpec> balls{{DiscreteDist::bernoulli(0.4), 0.2, 1.0}};
    CHECK(bound_with_shape(c, balls, Sense::Upper) == doctest::Approx(0.5));
    CHECK(bound_with_shape(c, balls, Sense::Lower) == doctest::Approx(0.2));

    // Already monotone reference with a vanishing radius.
    auto c3 = single_cell({0, 1, 2}, {0.3, -0.1, 0.8});
    std::vector<BallSpec> tiny{{DiscreteDist({0, 1, 2}, {0.5, 0.3, 0.2}), 1e-9, 2.0}};
    CHECK(bound_with_shape(c3, tiny, Sense::Upper) ==
          doctest::Approx(upper_bound(c3, tiny)).epsilon(1e-9));

    // A reference far from any nonincreasing distribution.
    std::vector<BallSpec> far{{DiscreteDist({0, 1, 2}, {0.0, 0.0, 1.0}), 0.1, 1.0}};
    CHECK_THROWS_AS(bound_with_shape(c3, far, Sense::Upper), InfeasibleError);

    std::mt19937_64 rng(77);
    for (int t = 0; t < 60; ++t) {
        auto inst = random_instance(rng, 5, {1.0, 2.0});
        BallSpec shaped = inst.ball;
        shaped.monotone = true;
        try {
            const double up = solve_cell_primal(inst.m, inst.grid, shaped, Sense::Upper).value;
            const double lo = solve_cell_primal(inst.m, inst.grid, shaped, Sense::Lower).value;
            CHECK(up <= solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Upper).value + 1e-9);
            CHECK(lo >= solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Lower).value - 1e-9);
            CHECK(lo <= up + 1e-9);
        } catch (const InfeasibleError&) {
        }
    }
}

TEST_CASE("point ATTE") {
    auto c = single_cell({0, 1}, {0.0, 1.0});
    CHECK(atte_point(c, {DiscreteDist::bernoulli(0.4)}) == doctest::Approx(0.4));
    auto c3 = single_cell({0, 2, 5}, {1.5, -2.0, 7.0});
    CHECK(atte_point(c3, {DiscreteDist::point_mass(2)}) == doctest::Approx(-2.0));

    // A target at exactly the ball's radius lies within the bounds.
    std::mt19937_64 rng(8);
    for (int t = 0; t < 100; ++t) {
        auto inst = random_instance(rng, 6, {1.0, 2.0});
        auto target = oracle::random_dist(rng, inst.grid.size(), inst.grid.back(), true);
        inst.ball.radius = wasserstein(target, inst.ball.center, inst.ball.order);
        auto cv = single_cell(inst.grid, inst.m);
        const double k = atte_point(cv, {target});
        CHECK(k <= dual_upper_bound(cv, {inst.ball}) + 1e-9);
        CHECK(k >= dual_lower_bound(cv, {inst.ball}) - 1e-9);
    }
}

TEST_CASE("structured vertex enumeration equals the brute-force basis sweep") {
    std::mt19937_64 rng(4242);
    for (int t = 0; t < 40; ++t) {
        auto inst = random_instance(rng, 4, {1.0, 2.0});
        auto fast = plan_keys(enumerate_vertices(inst.grid, inst.ball));
        auto slow = plan_keys(brute_force_vertices(inst.grid, inst.ball));
        CHECK(fast == slow);
    }
}

TEST_CASE("face plans are feasible and within the threshold") {
    std::mt19937_64 rng(31337);
    for (int t = 0; t < 60; ++t) {
        auto inst = random_instance(rng, 5, {1.0, 2.0});
        const double a = (t % 3) * 0.1;
        const auto all = enumerate_vertices(inst.grid, inst.ball);
        for (Sense s : {Sense::Upper, Sense::Lower}) {
            auto face = enumerate_face(inst.m, inst.grid, inst.ball, a, s);
            double best = s == Sense::Upper ? -1e300 : 1e300;
            for (const auto& p : all) {
                const double v = plan_objective(p, inst.m);
                best = s == Sense::Upper ? std::max(best, v) : std::min(best, v);
            }
            CHECK(face.optimum == doctest::Approx(best).epsilon(1e-10));
            std::size_t expected = 0;
            for (const auto& p : all) {
                const double v = plan_objective(p, inst.m);
                if (s == Sense::Upper ? v >= best - a - 1e-9 : v <= best + a + 1e-9)
                    ++expected;
            }
            CHECK(face.plans.size() == expected);
            const double budget = std::pow(inst.ball.radius, inst.ball.order);
            const auto center = inst.ball.center.mass();
            for (std::size_t k = 0; k < face.plans.size(); ++k) {
                const auto& p = face.plans[k];
                CHECK((p.gamma.array() >= 0.0).all());
                auto rs = p.row_sums();
                for (std::size_t u = 0; u < center.size(); ++u)
                    CHECK(std::abs(rs(static_cast<Eigen::Index>(u)) - center[u]) <= 1e-10);
                CHECK(p.cost(inst.ball.order) <= budget + 1e-10);
                const double v = plan_objective(p, inst.m);
                CHECK(v == doctest::Approx(face.objectives[k]).epsilon(1e-12));
                if (s == Sense::Upper)
                    CHECK(v >= face.optimum - a - 1e-9);
                else
                    CHECK(v <= face.optimum + a + 1e-9);
            }
        }
    }
}

TEST_CASE("unique optimum gives a single-plan face") {
    // Strictly increasing m, point-mass reference, radius short of the next point:
    // the unique optimum splits the mass between 0 and 1.
    const std::vector<int> grid{0, 1, 2};
    const std::vector<double> m{0.0, 1.0, 3.0};
    BallSpec ball{DiscreteDist::point_mass(0), 0.5, 1.0};
    auto face = enumerate_face(m, grid, ball, 0.0, Sense::Upper);
    REQUIRE(face.plans.size() == 1);
    CHECK(face.optimum == doctest::Approx(0.75));
    CHECK(face.plans[0].gamma(0, 2) == doctest::Approx(0.25));
}

TEST_CASE("input guards") {
    std::vector<int> big(9);
    for (int k = 0; k < 9; ++k)
        big[static_cast<std::size_t>(k)] = k;
    std::vector<double> m(9, 0.0);
    BallSpec ball{DiscreteDist::uniform(big), 0.5, 1.0};
    CHECK_THROWS_AS(enumerate_face(m, big, ball, 0.0, Sense::Upper), ConfigError);
    BallSpec neg{DiscreteDist::point_mass(0), -1.0, 1.0};
    CHECK_THROWS_AS(solve_cell_dual(std::vector<double>{1.0}, {0}, neg), ConfigError);
    BallSpec outside{DiscreteDist::point_mass(7), 1.0, 1.0};
    CHECK_THROWS_AS(solve_cell_dual(std::vector<double>{1.0, 2.0}, {0, 1}, outside), ConfigError);
}
