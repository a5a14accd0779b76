// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failures.

#include "oracles.hpp"

#include "netshift/bootstrap.hpp"
#include "netshift/bounds.hpp"
#include "netshift/dist.hpp"
#include "netshift/graph.hpp"
#include "netshift/regression.hpp"
#include "netshift/rng.hpp"
#include "netshift/simulation.hpp"

#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>

using namespace netshift;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool ok, const std::string& name, const std::string& detail) {
    std::cout << (ok ? "PASS " : "FAIL ") << name << ": " << detail << std::endl;
    if (!ok)
        ++failures;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void toy_bounds() {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const std::vector<int> grid{0, 1};
    double worst = 0.0;
    int split_errors = 0;
    for (int k = 0; k < 50; ++k) {
        const double as = 0.05 + 0.9 * u(rng);
        const double delta = 1.2 * u(rng);
        const double m0 = u(rng) - 0.5, m1 = m0 + 0.1 + 2.0 * u(rng);
        const std::vector<double> m{m0, m1};
        const BallSpec ball{DiscreteDist::bernoulli(as), delta, 1.0};
        const double up = m0 + std::min(1.0, as + delta) * (m1 - m0);
        const double lo = m0 + std::max(0.0, as - delta) * (m1 - m0);
        for (double v : {solve_cell_primal(m, grid, ball, Sense::Upper).value - up,
                         solve_cell_primal(m, grid, ball, Sense::Lower).value - lo,
                         solve_cell_dual(m, grid, ball, Sense::Upper).value - up,
                         solve_cell_dual(m, grid, ball, Sense::Lower).value - lo})
            worst = std::max(worst, std::abs(v));
        // Upper dual: λ = m(1) - m(0) while the ball misses the point mass at 1, else 0.
        const auto s = solve_cell_dual(m, grid, ball, Sense::Upper);
        const double lambda = delta < 1.0 - as ? m1 - m0 : 0.0;
        if (s.lambda != lambda)
            ++split_errors;
    }
    report(worst <= 1e-10 && split_errors == 0, "toy closed-form bounds",
           fmt::format("50 pairs, max error {:.2e}, dual multiplier case errors {}", worst, split_errors));
}

struct Instance {
    std::vector<int> grid;
    std::vector<double> m;
    BallSpec ball;
};

Instance random_instance(std::mt19937_64& rng) {
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 6)(rng);
    std::vector<int> grid(d);
    for (std::size_t k = 0; k < d; ++k)
        grid[k] = static_cast<int>(k);
    auto center = oracle::random_dist(rng, d, static_cast<int>(d) - 1, true).on_grid(grid);
    std::normal_distribution<double> z;
    std::vector<double> m(d);
    for (auto& v : m)
        v = z(rng);
    const double q = std::bernoulli_distribution(0.5)(rng) ? 1.0 : 2.0;
    const double delta = std::uniform_real_distribution<double>(0.0, static_cast<double>(d))(rng);
    return {grid, m, BallSpec{center, delta, q}};
}

void duality() {
    std::mt19937_64 rng(2);
    const auto t0 = std::chrono::steady_clock::now();
    double worst = 0.0;
    for (int t = 0; t < 1000; ++t) {
        const auto inst = random_instance(rng);
        for (Sense s : {Sense::Upper, Sense::Lower})
            worst = std::max(worst, std::abs(solve_cell_primal(inst.m, inst.grid, inst.ball, s).value -
                                             solve_cell_dual(inst.m, inst.grid, inst.ball, s).value));
    }
    const double secs = seconds_since(t0);
    report(worst <= 1e-8 && secs < 10.0, "strong duality",
           fmt::format("1000 instances, max |primal - dual| {:.2e}, {:.2f} s", worst, secs));
}

void non_unique_optimum() {
    const std::vector<int> grid{1, 2, 3};
    const std::vector<double> m{1.0, 2.0, 3.0};
    const BallSpec ball{DiscreteDist({1, 2, 3}, {0.5, 0.5, 0.0}), 1.0, 1.0};
    const double primal = solve_cell_primal(m, grid, ball, Sense::Upper).value;
    const auto face = enumerate_face(m, grid, ball, 0.0, Sense::Upper);
    report(std::abs(primal - 2.5) < 1e-12 && std::abs(face.optimum - 2.5) < 1e-12 && face.plans.size() >= 2,
           "non-unique optimum", fmt::format("upper {}, {} optimal plans at zero threshold", primal, face.plans.size()));
}

void wasserstein_oracle() {
    std::mt19937_64 rng(4);
    double worst = 0.0;
    for (int t = 0; t < 500; ++t) {
        const auto a = oracle::random_dist(rng, 1 + t % 6, 9, true);
        const auto b = oracle::random_dist(rng, 1 + (t / 6) % 6, 9, true);
        const double q = t % 2 ? 2.0 : 1.0;
        worst = std::max(worst, std::abs(std::pow(wasserstein(a, b, q), q) - oracle::transport_lp(a, b, q)));
    }
    report(worst <= 1e-9, "Wasserstein quantile formula", fmt::format("500 pairs, max gap {:.2e}", worst));
}

SourceDataset regression_data(double noise, bool varying) {
    std::mt19937_64 rng(5);
    const std::size_t n = 600;
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> ord(0, 2), deg(0, 4), pick(0, static_cast<int>(n) - 1);
    std::vector<int> d(n);
    std::vector<Cell> x(n);
    std::vector<Edge> edges;
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = coin(rng);
        x[i] = {coin(rng) ? 1 : 0, ord(rng)};
        for (int k = deg(rng); k > 0; --k) {
            const int j = pick(rng);
            if (j != static_cast<int>(i))
                edges.push_back({static_cast<int>(i), j});
        }
    }
    SourceDataset data(std::vector<double>(n, 0.0), d, x, {CovariateKind::Categorical, CovariateKind::Ordered},
                       edges, false);
    BasisSpec basis;
    std::normal_distribution<double> eps;
    std::vector<double> y(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = exposure(data.treated_peers()[i], data.degree()[i], basis.exposure);
        const double a = varying ? x[i][0] : 0.0, o = varying ? x[i][1] : 0.0;
        Eigen::VectorXd b(6);
        b << 1.0 + a, 0.5 - 0.3 * o, 2.0 * a - 1.0, 0.25 * o, -0.4 + 0.1 * a, 0.7;
        y[i] = basis.eval(d[i], e, data.degree()[i]).dot(b) + noise * eps(rng);
    }
    data.set_outcomes(y);
    return data;
}

void regression() {
    BasisSpec basis;
    const auto clean = regression_data(0.0, true);
    const auto fit0 = fit_vc(clean, basis, {0.0, 0.0});
    double worst0 = 0.0;
    for (std::size_t k = 0; k < fit0.cells.size(); ++k) {
        const double a = fit0.cells[k][0], o = fit0.cells[k][1];
        Eigen::VectorXd b(6);
        b << 1.0 + a, 0.5 - 0.3 * o, 2.0 * a - 1.0, 0.25 * o, -0.4 + 0.1 * a, 0.7;
        worst0 = std::max(worst0, (fit0.beta[k] - b).cwiseAbs().maxCoeff());
    }
    const auto noisy = regression_data(1.0, true);
    const auto fit1 = fit_vc(noisy, basis, {1.0, 1.0});
    const Eigen::MatrixXd w = design_matrix(noisy, basis);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(noisy.y().data(), w.rows());
    const Eigen::VectorXd ols = w.colPivHouseholderQr().solve(y);
    double worst1 = 0.0;
    for (const auto& b : fit1.beta)
        worst1 = std::max(worst1, (b - ols).cwiseAbs().maxCoeff());
    report(worst0 <= 1e-10 && worst1 <= 1e-10, "regression exactness",
           fmt::format("{} cells; b = 0 max error {:.2e}; b = 1 vs pooled OLS max gap {:.2e}", fit0.cells.size(),
                       worst0, worst1));
}

void bootstrap_covariance() {
    DGPConfig cfg;
    cfg.n = 50;
    const auto draw = simulate_once(cfg, 0);
    auto dm = path_weighted_distance(draw.data, {"x2", "x3er"}, false);
    dm.bandwidth = bandwidth_rule(dm, draw.data.degree(), 4.0);
    const auto kern = build_kernel(dm, PsdPolicy::Clip);
    const Eigen::MatrixXd target = effective_covariance(kern);
    const int draws = 10000;
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(50, 50);
    for (int b = 0; b < draws; ++b) {
        auto r = substream(11, static_cast<std::uint64_t>(b), StreamTag::Eta);
        const auto eta = draw_eta(kern, r);
        acc.noalias() += eta * eta.transpose();
    }
    acc /= draws;
    const double gap = (acc - target).cwiseAbs().maxCoeff();
    const double raw_gap = (acc - kern.matrix).cwiseAbs().maxCoeff();
    report(gap < 0.05, "bootstrap covariance",
           fmt::format("50 nodes, 1e4 draws, max entry gap {:.3f} vs the clipped kernel; raw kernel min eigenvalue "
                       "{:.3f}, {} eigenvalues clipped, gap vs the raw kernel {:.3f}",
                       gap, kern.min_raw_eigenvalue, kern.clipped_count, raw_gap));
}

DGPConfig coverage_config(double rho, std::size_t reps) {
    DGPConfig cfg;
    cfg.n = 400;
    cfg.rho = rho;
    cfg.c_b = {1.0};
    cfg.c_d = {4.0};
    cfg.identity_kernel = true;
    cfg.faces = {FaceMode::Estimated};
    cfg.deltas = {0.1, 0.5};
    cfg.alphas = {0.05};
    cfg.bootstrap = 200;
    cfg.replications = reps;
    cfg.seed = 2026;
    return cfg;
}

void coverage() {
    auto t0 = std::chrono::steady_clock::now();
    const auto rep = coverage_experiment(coverage_config(0.3, 100));
    const double c1 = rep.find(1.0, FaceMode::Estimated, 4.0, 0.1, 0.95).coverage();
    const double c5 = rep.find(1.0, FaceMode::Estimated, 4.0, 0.5, 0.95).coverage();
    report(c1 >= 0.89 && c1 <= 0.99 && c5 >= 0.89 && c5 <= 0.99, "coverage at desk scale",
           fmt::format("n 400, rho 0.3, R 100, B 200: coverage {:.2f} (delta 0.1), {:.2f} (delta 0.5), {:.0f} s", c1,
                       c5, seconds_since(t0)));

    t0 = std::chrono::steady_clock::now();
    const auto dep = coverage_experiment(coverage_config(0.5, 200));
    double gap_min = 1.0;
    std::string detail;
    for (double delta : {0.1, 0.5}) {
        const double d = dep.find(1.0, FaceMode::Estimated, 4.0, delta, 0.95).coverage();
        const double i = dep.find(1.0, FaceMode::Estimated, 0.0, delta, 0.95).coverage();
        gap_min = std::min(gap_min, d - i);
        detail += fmt::format("delta {}: dependent {:.3f}, identity {:.3f}; ", delta, d, i);
    }
    report(gap_min >= 0.05, "identity kernel undercovers under dependence",
           fmt::format("rho 0.5, R 200: {}{:.0f} s", detail, seconds_since(t0)));
}

void bound_coverage() {
    std::mt19937_64 rng(8);
    std::size_t outside = 0;
    for (int t = 0; t < 200; ++t) {
        const auto inst = random_instance(rng);
        const double up = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Upper).value;
        const double lo = solve_cell_dual(inst.m, inst.grid, inst.ball, Sense::Lower).value;
        const auto pi = oracle::sample_in_ball(rng, inst.grid, inst.ball.center.mass(), inst.ball.radius,
                                               inst.ball.order);
        double v = 0.0;
        for (std::size_t g = 0; g < pi.size(); ++g)
            v += pi[g] * inst.m[g];
        if (v > up + 1e-10 || v < lo - 1e-10)
            ++outside;
    }
    report(outside == 0, "points in the ball lie within the bounds",
           fmt::format("200 instances, {} outside", outside));
}

void graph_oracle() {
    std::size_t checked = 0, mismatches = 0;
    for (int n = 1; n <= 6; ++n) {
        const auto graphic = oracle::graphic_by_enumeration(n);
        DegreeSequence seq(static_cast<std::size_t>(n), 0);
        for (;;) {
            ++checked;
            if (is_graphic(seq) != (graphic.count(seq) > 0))
                ++mismatches;
            int k = n - 1;
            while (k >= 0 && seq[static_cast<std::size_t>(k)] == n - 1)
                seq[static_cast<std::size_t>(k--)] = 0;
            if (k < 0)
                break;
            ++seq[static_cast<std::size_t>(k)];
        }
    }
    report(mismatches == 0, "graphicality oracle",
           fmt::format("{} sequences with n <= 6, {} mismatches", checked, mismatches));
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

void determinism() {
    const fs::path fixtures = NETSHIFT_FIXTURES;
    const fs::path root = fs::temp_directory_path() / "netshift_acceptance";
    fs::remove_all(root);
    const std::vector<std::pair<std::string, std::string>> runs{{"bounds", "noisy_bounds.json"},
                                                                {"wasserstein", "wasserstein.json"},
                                                                {"simulate", "simulate.json"},
                                                                {"graphcheck", "graphcheck.json"}};
    std::size_t files = 0, differing = 0, bad_exit = 0;
    for (const auto& [cmd, cfg] : runs) {
        for (const char* copy : {"a", "b"}) {
            const auto out = root / cmd / copy;
            const std::string line = fmt::format("\"{}\" {} --config \"{}\" --seed 5 --out \"{}\" > /dev/null 2>&1",
                                                 NETSHIFT_BINARY, cmd, (fixtures / cfg).string(), out.string());
            if (std::system(line.c_str()) != 0)
                ++bad_exit;
        }
        for (const auto& entry : fs::directory_iterator(root / cmd / "a")) {
            ++files;
            if (slurp(entry.path()) != slurp(root / cmd / "b" / entry.path().filename()))
                ++differing;
        }
    }
    report(bad_exit == 0 && differing == 0 && files > 0, "CLI determinism",
           fmt::format("4 subcommands run twice, {} files compared, {} differ, {} failed runs", files, differing,
                       bad_exit));
}

} // namespace

int main() {
    toy_bounds();
    duality();
    non_unique_optimum();
    wasserstein_oracle();
    regression();
    bootstrap_covariance();
    bound_coverage();
    graph_oracle();
    determinism();
    coverage();
    return failures;
}
