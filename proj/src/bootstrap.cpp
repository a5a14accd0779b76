#include "netshift/bootstrap.hpp"

#include "netshift/errors.hpp"
#include "netshift/graph.hpp"
#include "netshift/rng.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>

namespace netshift {

namespace {

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double path_weight(int hops) {
    if (hops == kDisconnected)
        return normal_cdf(1.0);
    if (hops <= 1)
        return 0.0;
    return normal_cdf(1.0 - 1.0 / (hops - 1.0));
}

} // namespace

double truncated_quadratic(double u) {
    const double a = std::abs(u);
    return a <= 1.0 ? (1.0 - a) * (1.0 - a) : 0.0;
}

void DistanceModel::validate() const {
    const auto n = distances.rows();
    if (distances.cols() != n)
        throw DataError("distance matrix is not square");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (distances(i, i) != 0.0)
            throw DataError(fmt::format("distance of unit {} to itself is not 0", i));
        for (Eigen::Index j = i + 1; j < n; ++j) {
            const double a = distances(i, j), b = distances(j, i);
            if (std::isnan(a) || a < 0.0)
                throw DataError(fmt::format("distance ({}, {}) is negative or NaN", i, j));
            if (a != b)
                throw DataError(fmt::format("distance matrix is not symmetric at ({}, {})", i, j));
        }
    }
    if (!(bandwidth > 0.0) || !std::isfinite(bandwidth))
        throw NumericalError(fmt::format("kernel bandwidth {} is not a positive number", bandwidth));
    if (!kernel)
        throw ConfigError("no kernel function set");
}

DistanceModel path_weighted_distance(const SourceDataset& data, const std::vector<std::string>& columns,
                                     bool cross_block_infinite) {
    if (columns.empty())
        throw ConfigError("no covariate columns given for the proxy distance");
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd z(n, static_cast<Eigen::Index>(columns.size()));
    for (std::size_t c = 0; c < columns.size(); ++c) {
        auto it = data.numeric.find(columns[c]);
        if (it == data.numeric.end())
            throw ConfigError(fmt::format("distance column '{}' is not in the dataset", columns[c]));
        if (it->second.size() != data.size())
            throw DataError(fmt::format("distance column '{}' has the wrong length", columns[c]));
        for (Eigen::Index i = 0; i < n; ++i)
            z(i, static_cast<Eigen::Index>(c)) = it->second[static_cast<std::size_t>(i)];
    }
    DistanceModel model;
    model.distances = mahalanobis_matrix(z);
    const HopMatrix hops = shortest_paths(data.undirected_neighbors());
    const bool blocks = cross_block_infinite && data.blocks.has_value();
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            if (i == j) {
                model.distances(i, j) = 0.0;
                continue;
            }
            const auto ui = static_cast<std::size_t>(i), uj = static_cast<std::size_t>(j);
            if (blocks && (*data.blocks)[ui] != (*data.blocks)[uj])
                model.distances(i, j) = std::numeric_limits<double>::infinity();
            else
                model.distances(i, j) *= path_weight(hops(ui, uj));
        }
    return model;
}

double bandwidth_rule(const DistanceModel& dist, const std::vector<int>& degrees, double c_d) {
    if (!(c_d > 0.0))
        throw ConfigError(fmt::format("bandwidth constant c_d = {} must be positive", c_d));
    const auto n = dist.distances.rows();
    if (static_cast<std::size_t>(n) != degrees.size() || n < 2)
        throw DataError("degree vector does not match the distance matrix");
    std::vector<double> off;
    off.reserve(static_cast<std::size_t>(n * (n - 1) / 2));
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = i + 1; j < n; ++j)
            if (std::isfinite(dist.distances(i, j)))
                off.push_back(dist.distances(i, j));
    if (off.empty())
        throw DataError("no finite off-diagonal distances");
    const int gmax = *std::max_element(degrees.begin(), degrees.end());
    const double level = std::min(1.0, c_d * gmax / static_cast<double>(n));
    return empirical_quantile(std::move(off), level);
}

BootKernel BootKernel::make_identity(std::size_t n) {
    BootKernel k;
    const auto m = static_cast<Eigen::Index>(n);
    k.matrix = Eigen::MatrixXd::Identity(m, m);
    k.eigenvalues = Eigen::VectorXd::Ones(m);
    k.identity = true;
    return k;
}

const char* to_string(PsdPolicy p) { return p == PsdPolicy::Fail ? "fail" : "clip"; }

PsdPolicy psd_policy_from_string(const std::string& s) {
    if (s == "fail") return PsdPolicy::Fail;
    if (s == "clip") return PsdPolicy::Clip;
    throw ConfigError(fmt::format("unknown PSD policy '{}' (expected fail or clip)", s));
}

BootKernel build_kernel(const Eigen::MatrixXd& mat, PsdPolicy policy) {
    const auto n = mat.rows();
    if (mat.cols() != n || n == 0)
        throw DataError("kernel matrix must be square and nonempty");
    if (!mat.allFinite())
        throw DataError("kernel matrix has non-finite entries");
    if ((mat - mat.transpose()).cwiseAbs().maxCoeff() > 0.0)
        throw DataError("kernel matrix is not symmetric");
    if (mat.isIdentity(0.0)) {
        auto k = BootKernel::make_identity(static_cast<std::size_t>(n));
        return k;
    }
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(mat);
    if (eig.info() != Eigen::Success)
        throw NumericalError("eigendecomposition of the bootstrap kernel failed");
    BootKernel k;
    k.matrix = mat;
    k.eigenvalues = eig.eigenvalues();
    const double top = k.eigenvalues[n - 1];
    k.min_raw_eigenvalue = k.eigenvalues[0];
    if (policy == PsdPolicy::Fail && k.min_raw_eigenvalue < -kPsdTolerance * std::max(top, 0.0))
        throw IndefiniteKernelError(fmt::format(
            "bootstrap kernel is not positive semidefinite (smallest eigenvalue {:.3g}, largest "
            "{:.3g}); positive semidefiniteness of the distance kernel is not guaranteed, try a "
            "smaller bandwidth or a different kernel",
            k.min_raw_eigenvalue, top));
    // Eigenvalues at rounding level carry no signal; zero them with the negatives.
    const double floor = static_cast<double>(n) * std::numeric_limits<double>::epsilon() * std::abs(top);
    for (Eigen::Index i = 0; i < n; ++i)
        if (k.eigenvalues[i] < floor) {
            if (k.eigenvalues[i] < -kPsdTolerance * std::abs(top)) {
                k.clipped_mass -= k.eigenvalues[i];
                ++k.clipped_count;
            }
            k.eigenvalues[i] = 0.0;
        }
    k.factor = eig.eigenvectors() * k.eigenvalues.cwiseSqrt().asDiagonal();
    k.clamp_error = (k.factor * k.factor.transpose() - mat).cwiseAbs().maxCoeff();
    return k;
}

Eigen::MatrixXd effective_covariance(const BootKernel& kern) {
    if (kern.identity)
        return kern.matrix;
    return kern.factor * kern.factor.transpose();
}

BootKernel build_kernel(const DistanceModel& dist, PsdPolicy policy) {
    dist.validate();
    const auto n = dist.distances.rows();
    Eigen::MatrixXd k(n, n);
    for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < n; ++j) {
            const double d = dist.distances(i, j);
            k(i, j) = std::isinf(d) ? 0.0 : dist.kernel(d / dist.bandwidth);
        }
    return build_kernel(k, policy);
}

Eigen::VectorXd draw_eta(const BootKernel& kern, std::mt19937_64& rng) {
    std::normal_distribution<double> nd(0.0, 1.0);
    Eigen::VectorXd z(static_cast<Eigen::Index>(kern.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i)
        z[i] = nd(rng);
    if (kern.identity)
        return z;
    return kern.factor * z;
}

double empirical_quantile(std::vector<double> values, double p) {
    if (values.empty())
        throw NumericalError("quantile of an empty sample");
    if (!(p >= 0.0 && p <= 1.0))
        throw ConfigError(fmt::format("quantile level {} outside [0, 1]", p));
    std::sort(values.begin(), values.end());
    const auto b = static_cast<double>(values.size());
    const auto k = static_cast<std::size_t>(std::max(1.0, std::ceil(b * p - 1e-12)));
    return values[std::min(k, values.size()) - 1];
}

FaceFunctional::FaceFunctional(const VCFit& fit, const std::vector<int>& degrees,
                               const std::vector<CellFaces>& faces, ContrastKind kind) {
    const auto nd = static_cast<Eigen::Index>(degrees.size());
    const auto dw = static_cast<Eigen::Index>(fit.basis.dim());
    Eigen::MatrixXd zbase(nd, dw);
    for (Eigen::Index j = 0; j < nd; ++j)
        zbase.row(j) = contrast_basis(fit.basis, degrees[static_cast<std::size_t>(j)], kind).transpose();

    auto columns = [&](const FaceSet& f, const Cell& x) {
        if (f.plans.empty())
            throw NumericalError(fmt::format("empty face for cell ({})", cell_label(x)));
        Eigen::MatrixXd c(static_cast<Eigen::Index>(f.plans.size()), nd);
        for (std::size_t k = 0; k < f.plans.size(); ++k) {
            if (f.plans[k].cols != degrees)
                throw ConfigError(fmt::format("face plans of cell ({}) use a different degree grid",
                                              cell_label(x)));
            c.row(static_cast<Eigen::Index>(k)) = f.plans[k].col_sums().transpose();
        }
        return c;
    };

    for (const auto& cf : faces) {
        if (cf.proportion == 0.0)
            continue;
        const int idx = fit.find(cf.cell);
        if (idx < 0)
            throw ConfigError(fmt::format("cell ({}) has faces but no fitted coefficients",
                                          cell_label(cf.cell)));
        terms_.push_back({static_cast<std::size_t>(idx), cf.proportion * zbase,
                          columns(cf.upper, cf.cell), columns(cf.lower, cf.cell)});
    }
}

double FaceFunctional::upper(const std::vector<Eigen::VectorXd>& dbeta) const {
    double s = 0.0;
    for (const auto& t : terms_)
        s += (t.upper_cols * (t.z * dbeta[t.fit_index])).maxCoeff();
    return s;
}

double FaceFunctional::lower(const std::vector<Eigen::VectorXd>& dbeta) const {
    double s = 0.0;
    for (const auto& t : terms_)
        s += (t.lower_cols * (t.z * dbeta[t.fit_index])).minCoeff();
    return s;
}

DeltaFaces estimate_faces(const ContrastVector& m, const std::vector<double>& proportions,
                          const std::vector<BallSpec>& balls, std::size_t n, double threshold_scale) {
    m.validate();
    if (balls.size() != m.cells.size() || proportions.size() != m.cells.size())
        throw ConfigError("contrast cells, proportions and balls differ in number");
    if (!(threshold_scale >= 0.0))
        throw ConfigError("face threshold scale must be nonnegative");
    DeltaFaces out;
    out.delta = balls.empty() ? 0.0 : balls.front().radius;
    out.order = balls.empty() ? 1.0 : balls.front().order;
    const double shrink = threshold_scale * std::pow(static_cast<double>(n), -0.4);
    for (std::size_t k = 0; k < m.cells.size(); ++k) {
        CellFaces cf;
        cf.cell = m.cells[k];
        cf.proportion = proportions[k];
        if (cf.proportion > 0.0) {
            const auto row = m.cell_values(k);
            const double up = solve_cell_dual(row, m.degrees, balls[k], Sense::Upper).value;
            const double lo = solve_cell_dual(row, m.degrees, balls[k], Sense::Lower).value;
            cf.upper = enumerate_face(row, m.degrees, balls[k], std::abs(up) * shrink, Sense::Upper);
            cf.lower = enumerate_face(row, m.degrees, balls[k], std::abs(lo) * shrink, Sense::Lower);
            out.upper_point += up;
            out.lower_point += lo;
        }
        out.cells.push_back(std::move(cf));
    }
    return out;
}

SideCI side_interval(double point, const std::vector<double>& stats, double alpha, std::size_t n) {
    if (!(alpha > 0.0 && alpha < 1.0))
        throw ConfigError(fmt::format("alpha = {} outside (0, 1)", alpha));
    SideCI ci;
    ci.point = point;
    ci.q_lo = empirical_quantile(stats, alpha / 2.0);
    ci.q_hi = empirical_quantile(stats, 1.0 - alpha / 2.0);
    const double rn = std::sqrt(static_cast<double>(n));
    ci.lo = point - ci.q_hi / rn;
    ci.hi = point - ci.q_lo / rn;
    return ci;
}

std::vector<BoundCI> bootstrap_bounds(const VCFit& fit, const std::vector<int>& degrees,
                                      const std::vector<DeltaFaces>& radii, const BootKernel& kern,
                                      const BootstrapOptions& opts) {
    if (!fit.smoother)
        throw ConfigError("fit carries no smoother; refit before bootstrapping");
    if (opts.replicates == 0)
        throw ConfigError("number of bootstrap replicates must be positive");
    const std::size_t n = static_cast<std::size_t>(fit.residuals.size());
    if (kern.size() != n)
        throw DataError(fmt::format("bootstrap kernel has size {}, data has {} units", kern.size(), n));
    const KernelSmoother& sm = *fit.smoother;

    std::vector<FaceFunctional> funcs;
    for (const auto& r : radii)
        funcs.emplace_back(fit, degrees, r.cells, opts.kind);

    // β* - β̂ = P(Ŷ) - β̂ + P(η ε̂); the first part is fixed across replicates.
    std::vector<Eigen::VectorXd> offset = sm.apply(fit.fitted);
    for (std::size_t k = 0; k < offset.size(); ++k)
        offset[k] -= fit.beta[k];

    const double rn = std::sqrt(static_cast<double>(n));
    std::vector<BoundCI> out(radii.size());
    for (std::size_t r = 0; r < radii.size(); ++r) {
        out[r].delta = radii[r].delta;
        out[r].order = radii[r].order;
        out[r].replicates = opts.replicates;
        out[r].alpha = opts.alpha;
        out[r].seed = opts.seed;
    }

    std::vector<Eigen::VectorXd> dbeta(offset.size());
    for (std::size_t b = 0; b < opts.replicates; ++b) {
        auto rng = substream(opts.seed, b, StreamTag::Eta);
        const Eigen::VectorXd eta = draw_eta(kern, rng);
        const Eigen::VectorXd u = eta.cwiseProduct(fit.residuals);
        for (std::size_t k = 0; k < offset.size(); ++k)
            dbeta[k] = offset[k] + sm.projection(k) * u;
        for (std::size_t r = 0; r < radii.size(); ++r) {
            const double up = rn * funcs[r].upper(dbeta);
            const double lo = rn * funcs[r].lower(dbeta);
            if (!std::isfinite(up) || !std::isfinite(lo)) {
                ++out[r].failed;
                continue;
            }
            out[r].upper_stats.push_back(up);
            out[r].lower_stats.push_back(lo);
        }
    }

    for (std::size_t r = 0; r < radii.size(); ++r) {
        auto& ci = out[r];
        if (static_cast<double>(ci.failed) > opts.max_failure_share * static_cast<double>(opts.replicates))
            throw NumericalError(fmt::format(
                "{} of {} bootstrap replicates at delta = {} were not finite", ci.failed,
                opts.replicates, ci.delta));
        ci.upper = side_interval(radii[r].upper_point, ci.upper_stats, opts.alpha, n);
        ci.lower = side_interval(radii[r].lower_point, ci.lower_stats, opts.alpha, n);
    }
    return out;
}

nlohmann::json kernel_diagnostics(const BootKernel& kern) {
    std::size_t clamped = 0;
    for (Eigen::Index i = 0; i < kern.eigenvalues.size(); ++i)
        clamped += kern.eigenvalues[i] == 0.0;
    return {{"size", kern.size()},
            {"identity", kern.identity},
            {"min_raw_eigenvalue", kern.min_raw_eigenvalue},
            {"max_eigenvalue", kern.eigenvalues.size() ? kern.eigenvalues.maxCoeff() : 0.0},
            {"zero_eigenvalues", clamped},
            {"clamp_error", kern.clamp_error},
            {"clipped_eigenvalues", kern.clipped_count},
            {"clipped_mass", kern.clipped_mass}};
}

} // namespace netshift
