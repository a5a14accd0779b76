#include "netshift/simulation.hpp"

#include "netshift/errors.hpp"
#include "netshift/graph.hpp"
#include "netshift/rng.hpp"

#include <Eigen/Sparse>
#include <fmt/format.h>

#include <chrono>
#include <cmath>
#include <map>

namespace netshift {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

const std::vector<CovariateKind> kSimKinds{CovariateKind::Categorical, CovariateKind::Ordered};

} // namespace

const char* to_string(FaceMode f) { return f == FaceMode::Estimated ? "est" : "true"; }

std::vector<Bandwidth> DGPConfig::default_cv_grid() {
    std::vector<double> steps;
    for (int k = 0; k <= 20; ++k)
        steps.push_back(k / 20.0);
    return bandwidth_grid(steps, steps);
}

std::vector<int> DGPConfig::grid() const {
    std::vector<int> g(degree_law.size());
    for (std::size_t k = 0; k < g.size(); ++k)
        g[k] = static_cast<int>(k);
    return g;
}

void DGPConfig::validate() const {
    const std::size_t cells = 6;
    if (n < basis.dim() * cells * 5)
        throw ConfigError(fmt::format("n = {} is below the estimability guard {}", n, basis.dim() * cells * 5));
    if (!(std::abs(rho) < 1.0))
        throw ConfigError(fmt::format("rho = {} must lie in (-1, 1)", rho));
    if (degree_law.empty() || degree_law.size() > n)
        throw ConfigError("degree law must be nonempty with support below n");
    double s = 0.0;
    for (double p : degree_law) {
        if (!(p >= 0.0))
            throw ConfigError("degree law has a negative probability");
        s += p;
    }
    if (std::abs(s - 1.0) > 1e-9)
        throw ConfigError(fmt::format("degree law sums to {}", s));
    if (reference.size() != degree_law.size())
        throw ConfigError("reference distribution must live on the degree grid");
    if (deltas.empty() || alphas.empty())
        throw ConfigError("need at least one radius and one alpha");
    for (double d : deltas)
        if (!(d >= 0.0))
            throw ConfigError(fmt::format("radius {} is negative", d));
    for (double a : alphas)
        if (!(a > 0.0 && a < 1.0))
            throw ConfigError(fmt::format("alpha {} outside (0, 1)", a));
    for (double c : c_b)
        if (!(c > 0.0))
            throw ConfigError("c_b values must be positive");
    for (double c : c_d)
        if (!(c > 0.0))
            throw ConfigError("c_d values must be positive");
    if (c_b.empty() || faces.empty() || (c_d.empty() && !identity_kernel))
        throw ConfigError("empty c_b, face or kernel list");
    if (replications == 0 || bootstrap == 0)
        throw ConfigError("replications and bootstrap count must be positive");
    if (!bandwidth && (burnin == 0 || cv_grid.empty()))
        throw ConfigError("bandwidth selection needs burn-in draws and a grid");
    if (!(measurement_error >= 0.0))
        throw ConfigError("measurement error range must be nonnegative");
}

Eigen::VectorXd true_coefficients(int x1, int x2) {
    const double s = x1 + x2;
    const double b34 = normal_cdf(x1) + normal_cdf(x2);
    const double b56 = 0.5 * std::exp(-0.5 * s);
    Eigen::VectorXd b(6);
    b << 1.0, 1.0 + 0.5 * normal_cdf(s), b34, b34, b56, b56;
    return b;
}

SimDraw simulate_once(const DGPConfig& cfg, std::uint64_t rep) {
    const std::size_t n = cfg.n;
    auto rng = substream(cfg.seed, rep, StreamTag::Simulation);
    std::bernoulli_distribution coin(0.5);
    std::uniform_int_distribution<int> three(-1, 1);
    std::normal_distribution<double> nd(0.0, 1.0);
    std::uniform_real_distribution<double> me(-cfg.measurement_error, cfg.measurement_error);
    std::discrete_distribution<int> glaw(cfg.degree_law.begin(), cfg.degree_law.end());

    std::vector<int> d(n), deg(n);
    std::vector<Cell> x(n);
    std::vector<double> x2(n), x3(n), x3er(n);
    for (std::size_t i = 0; i < n; ++i) {
        d[i] = coin(rng) ? 1 : 0;
        const int x1 = coin(rng) ? 1 : 0;
        const int x2i = three(rng);
        x[i] = {x1, x2i};
        x2[i] = x2i;
        x3[i] = nd(rng);
        x3er[i] = x3[i] + me(rng);
        deg[i] = glaw(rng);
    }

    Eigen::MatrixXd z(static_cast<Eigen::Index>(n), 2);
    for (std::size_t i = 0; i < n; ++i)
        z.row(static_cast<Eigen::Index>(i)) << x2[i], x3[i];
    const auto edges = mahalanobis_neighbors(z, deg);

    SourceDataset data(std::vector<double>(n, 0.0), d, x, kSimKinds, edges, true);

    // (I - ρ Ã) ε = u with Ã the row-normalized adjacency.
    std::vector<Eigen::Triplet<double>> trip;
    for (std::size_t i = 0; i < n; ++i) {
        trip.emplace_back(static_cast<int>(i), static_cast<int>(i), 1.0);
        const auto& nb = data.neighbors()[i];
        for (int j : nb)
            trip.emplace_back(static_cast<int>(i), j, -cfg.rho / static_cast<double>(nb.size()));
    }
    Eigen::SparseMatrix<double> sys(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
    sys.setFromTriplets(trip.begin(), trip.end());
    Eigen::VectorXd u(static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < u.size(); ++i)
        u[i] = nd(rng);
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu(sys);
    if (lu.info() != Eigen::Success)
        throw NumericalError("network autoregressive system is singular");
    const Eigen::VectorXd eps = lu.solve(u);

    std::vector<double> y(n), errors(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double e = exposure(data.treated_peers()[i], data.degree()[i], cfg.basis.exposure);
        const auto w = cfg.basis.eval(d[i], e, data.degree()[i]);
        const Eigen::VectorXd b = true_coefficients(x[i][0], x[i][1]).head(w.size());
        errors[i] = eps[static_cast<Eigen::Index>(i)];
        y[i] = w.dot(b) + errors[i];
    }
    data.set_outcomes(y);
    data.numeric["x2"] = x2;
    data.numeric["x3"] = x3;
    data.numeric["x3er"] = x3er;
    return {std::move(data), std::move(errors)};
}

std::vector<BallSpec> Truth::balls(double delta) const {
    return std::vector<BallSpec>(m.cells.size(), BallSpec{reference, delta, order, false});
}

Truth compute_truth(const DGPConfig& cfg) {
    Truth t;
    t.order = cfg.order;
    t.reference = DiscreteDist(cfg.grid(), cfg.reference);
    t.m.degrees = cfg.grid();
    for (int x1 : {0, 1})
        for (int x2 : {-1, 0, 1})
            t.m.cells.push_back({x1, x2});
    const double p = 1.0 / static_cast<double>(t.m.cells.size());
    t.proportions.assign(t.m.cells.size(), p);
    t.m.values.resize(static_cast<Eigen::Index>(t.m.cells.size()),
                      static_cast<Eigen::Index>(t.m.degrees.size()));
    for (std::size_t k = 0; k < t.m.cells.size(); ++k) {
        const Eigen::VectorXd b = true_coefficients(t.m.cells[k][0], t.m.cells[k][1]).head(
            static_cast<Eigen::Index>(cfg.basis.dim()));
        for (std::size_t j = 0; j < t.m.degrees.size(); ++j)
            t.m.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                p * contrast_basis(cfg.basis, t.m.degrees[j]).dot(b);
    }
    for (double delta : cfg.deltas) {
        DeltaTruth dt;
        dt.delta = delta;
        const auto balls = t.balls(delta);
        dt.upper = dual_upper_bound(t.m, balls);
        dt.lower = dual_lower_bound(t.m, balls);
        for (std::size_t k = 0; k < t.m.cells.size(); ++k) {
            const auto row = t.m.cell_values(k);
            CellFaces cf;
            cf.cell = t.m.cells[k];
            cf.proportion = p;
            cf.upper = enumerate_face(row, t.m.degrees, balls[k], 0.0, Sense::Upper);
            cf.lower = enumerate_face(row, t.m.degrees, balls[k], 0.0, Sense::Lower);
            dt.faces.push_back(std::move(cf));
        }
        t.per_delta.push_back(std::move(dt));
    }
    return t;
}

Bandwidth burnin_bandwidth(const DGPConfig& cfg) {
    double bc = 0.0, bo = 0.0;
    for (std::size_t r = 0; r < cfg.burnin; ++r) {
        DGPConfig burn = cfg;
        burn.seed = substream(cfg.seed, r, StreamTag::Burnin)();
        const auto draw = simulate_once(burn, r);
        const auto cv = cv_bandwidth(draw.data, cfg.basis, cfg.cv_grid);
        bc += cv.best.categorical;
        bo += cv.best.ordered;
    }
    const auto k = static_cast<double>(cfg.burnin);
    return {bc / k, bo / k};
}

std::string CoverageRow::kernel_label() const {
    return c_d == 0.0 ? std::string("I") : fmt::format("c_d={}", c_d);
}

const CoverageRow& CoverageReport::find(double c_b, FaceMode face, double c_d, double delta,
                                        double level) const {
    for (const auto& r : rows)
        if (r.c_b == c_b && r.face == face && r.c_d == c_d && r.delta == delta && r.level == level)
            return r;
    throw ConfigError("no such coverage cell");
}

void CoverageReport::write_csv(std::ostream& os) const {
    std::vector<double> levels, deltas;
    for (const auto& r : rows) {
        if (std::find(levels.begin(), levels.end(), r.level) == levels.end())
            levels.push_back(r.level);
        if (std::find(deltas.begin(), deltas.end(), r.delta) == deltas.end())
            deltas.push_back(r.delta);
    }
    os << "n,rho,c_b,face,kernel,replications";
    for (double l : levels)
        for (double d : deltas)
            os << fmt::format(",cov{:g}_delta{:g}", 100 * l, d);
    os << '\n';
    std::map<std::tuple<double, int, double>, std::vector<const CoverageRow*>> groups;
    std::vector<std::tuple<double, int, double>> order;
    for (const auto& r : rows) {
        auto key = std::make_tuple(r.c_b, static_cast<int>(r.face), r.c_d);
        if (!groups.count(key))
            order.push_back(key);
        groups[key].push_back(&r);
    }
    for (const auto& key : order) {
        const auto& g = groups[key];
        os << fmt::format("{},{:g},{:g},{},{},{}", n, rho, std::get<0>(key), to_string(g[0]->face),
                          g[0]->kernel_label(), g[0]->total);
        for (double l : levels)
            for (double d : deltas)
                for (const auto* r : g)
                    if (r->level == l && r->delta == d)
                        os << fmt::format(",{:.4f}", r->coverage());
        os << '\n';
    }
}

CoverageReport coverage_experiment(const DGPConfig& cfg, const ProgressFn& progress) {
    cfg.validate();
    const auto start = std::chrono::steady_clock::now();
    const Truth truth = compute_truth(cfg);
    const std::vector<int> grid = cfg.grid();

    CoverageReport rep;
    rep.n = cfg.n;
    rep.rho = cfg.rho;
    rep.cv_bandwidth = cfg.bandwidth ? *cfg.bandwidth : burnin_bandwidth(cfg);
    rep.min_kernel_eigenvalue = 0.0;

    std::vector<double> kernels = cfg.c_d;
    if (cfg.identity_kernel)
        kernels.push_back(0.0);
    for (double cb : cfg.c_b)
        for (FaceMode f : cfg.faces)
            for (double cd : kernels)
                for (double a : cfg.alphas)
                    for (double delta : cfg.deltas)
                        rep.rows.push_back({cb, f, cd, delta, 1.0 - a, 0, 0});
    auto row_index = [&](std::size_t ib, std::size_t iface, std::size_t ik, std::size_t ia, std::size_t id) {
        return (((ib * cfg.faces.size() + iface) * kernels.size() + ik) * cfg.alphas.size() + ia) *
                   cfg.deltas.size() + id;
    };

    std::map<Cell, double> p_target;
    for (std::size_t k = 0; k < truth.m.cells.size(); ++k)
        p_target[truth.m.cells[k]] = truth.proportions[k];
    const double rn = std::sqrt(static_cast<double>(cfg.n));

    for (std::size_t r = 0; r < cfg.replications; ++r) {
        const auto draw = simulate_once(cfg, r);
        const auto& data = draw.data;

        std::vector<BootKernel> kerns;
        auto dm = path_weighted_distance(data, {"x2", "x3er"}, false);
        for (double cd : cfg.c_d) {
            dm.bandwidth = bandwidth_rule(dm, data.degree(), cd);
            kerns.push_back(build_kernel(dm, cfg.psd));
            const auto& k = kerns.back();
            rep.min_kernel_eigenvalue = std::min(rep.min_kernel_eigenvalue, k.min_raw_eigenvalue);
            rep.max_clipped_share = std::max(rep.max_clipped_share, k.clipped_mass / k.eigenvalues.maxCoeff());
        }
        if (cfg.identity_kernel)
            kerns.push_back(BootKernel::make_identity(cfg.n));

        BootstrapOptions opts;
        opts.replicates = cfg.bootstrap;
        opts.seed = substream(cfg.seed, r, StreamTag::Eta)();

        for (std::size_t ib = 0; ib < cfg.c_b.size(); ++ib) {
            const Bandwidth b{std::min(1.0, cfg.c_b[ib] * rep.cv_bandwidth.categorical),
                              std::min(1.0, cfg.c_b[ib] * rep.cv_bandwidth.ordered)};
            const VCFit fit = fit_vc(data, cfg.basis, b);
            const ContrastVector m = contrast_vector(fit, p_target, grid);

            // Radii ordered as faces × δ.
            std::vector<DeltaFaces> radii;
            std::vector<double> points;
            for (FaceMode f : cfg.faces)
                for (std::size_t id = 0; id < cfg.deltas.size(); ++id) {
                    auto est = estimate_faces(m, truth.proportions, truth.balls(cfg.deltas[id]), cfg.n,
                                              cfg.face_threshold_scale);
                    if (f == FaceMode::True)
                        est.cells = truth.per_delta[id].faces;
                    radii.push_back(std::move(est));
                }

            for (std::size_t ik = 0; ik < kerns.size(); ++ik) {
                const auto cis = bootstrap_bounds(fit, grid, radii, kerns[ik], opts);
                for (std::size_t iface = 0; iface < cfg.faces.size(); ++iface)
                    for (std::size_t id = 0; id < cfg.deltas.size(); ++id) {
                        const auto& ci = cis[iface * cfg.deltas.size() + id];
                        rep.failed_replicates += ci.failed;
                        const double t = rn * (ci.upper.point - truth.per_delta[id].upper);
                        for (std::size_t ia = 0; ia < cfg.alphas.size(); ++ia) {
                            const auto side = side_interval(ci.upper.point, ci.upper_stats, cfg.alphas[ia], cfg.n);
                            auto& row = rep.rows[row_index(ib, iface, ik, ia, id)];
                            ++row.total;
                            if (side.q_lo <= t && t <= side.q_hi)
                                ++row.covered;
                        }
                    }
            }
        }
        if (progress)
            progress(r + 1, cfg.replications);
    }
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return rep;
}

} // namespace netshift
