#include "netshift/regression.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

namespace netshift {

const char* to_string(ExposureFamily f) {
    switch (f) {
    case ExposureFamily::Count: return "count";
    case ExposureFamily::Ratio: return "ratio";
    case ExposureFamily::Indicator: return "indicator";
    }
    return "?";
}

ExposureFamily exposure_family_from_string(const std::string& s) {
    if (s == "count") return ExposureFamily::Count;
    if (s == "ratio") return ExposureFamily::Ratio;
    if (s == "indicator") return ExposureFamily::Indicator;
    throw ConfigError(fmt::format("unknown exposure family '{}'", s));
}

double exposure(int s, int g, ExposureFamily family) {
    if (s < 0 || g < 0 || s > g)
        throw DataError(fmt::format("treated-peer count {} outside 0..{}", s, g));
    switch (family) {
    case ExposureFamily::Count: return s;
    case ExposureFamily::Ratio: return g == 0 ? 0.0 : static_cast<double>(s) / g;
    case ExposureFamily::Indicator: return s > 0 ? 1.0 : 0.0;
    }
    return 0.0;
}

const char* to_string(BasisFamily f) {
    switch (f) {
    case BasisFamily::Default: return "default";
    case BasisFamily::Linear: return "linear";
    }
    return "?";
}

BasisFamily basis_family_from_string(const std::string& s) {
    if (s == "default") return BasisFamily::Default;
    if (s == "linear") return BasisFamily::Linear;
    throw ConfigError(fmt::format("unknown basis family '{}'", s));
}

std::size_t BasisSpec::dim() const { return family == BasisFamily::Default ? 6 : 4; }

Eigen::VectorXd BasisSpec::eval(int d, double e, int g) const {
    Eigen::VectorXd w(static_cast<Eigen::Index>(dim()));
    w[0] = 1.0;
    w[1] = d;
    w[2] = e;
    w[3] = d * e;
    if (family == BasisFamily::Default) {
        const double lg = std::log(g + 1.0);
        w[4] = lg;
        w[5] = e * lg;
    }
    return w;
}

std::vector<std::string> BasisSpec::term_names() const {
    std::vector<std::string> names{"1", "d", "e", "d*e"};
    if (family == BasisFamily::Default) {
        names.emplace_back("log(g+1)");
        names.emplace_back("e*log(g+1)");
    }
    return names;
}

double kernel_weight(const Cell& xi, const Cell& x, const std::vector<CovariateKind>& kinds,
                     Bandwidth b) {
    if (b.categorical < 0 || b.categorical > 1 || b.ordered < 0 || b.ordered > 1)
        throw ConfigError(fmt::format("bandwidths ({}, {}) outside [0, 1]", b.categorical, b.ordered));
    if (xi.size() != kinds.size() || x.size() != kinds.size())
        throw DataError("covariate tuple length does not match the schema");
    double w = 1.0;
    for (std::size_t j = 0; j < kinds.size(); ++j) {
        if (xi[j] == x[j])
            continue;
        if (kinds[j] == CovariateKind::Categorical)
            w *= b.categorical;
        else
            w *= std::pow(b.ordered, std::abs(xi[j] - x[j]));
    }
    return w;
}

Eigen::MatrixXd design_matrix(const SourceDataset& data, const BasisSpec& basis) {
    const auto n = static_cast<Eigen::Index>(data.size());
    Eigen::MatrixXd w(n, static_cast<Eigen::Index>(basis.dim()));
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        const double e = exposure(data.treated_peers()[k], data.degree()[k], basis.exposure);
        w.row(i) = basis.eval(data.treatment()[k], e, data.degree()[k]).transpose();
    }
    return w;
}

KernelSmoother::KernelSmoother(const SourceDataset& data, const BasisSpec& basis, Bandwidth b,
                               std::vector<Cell> cells)
    : cells_(std::move(cells)), w_(design_matrix(data, basis)) {
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto p = w_.cols();
    for (const auto& x : cells_) {
        Eigen::VectorXd l(n);
        for (Eigen::Index i = 0; i < n; ++i)
            l[i] = kernel_weight(data.covariates()[static_cast<std::size_t>(i)], x, data.kinds(), b);

        // sqrt(L) W; its squared condition number is that of the Gram matrix.
        Eigen::MatrixXd sw = l.cwiseSqrt().asDiagonal() * w_;
        Eigen::JacobiSVD<Eigen::MatrixXd> svd(sw);
        const auto& sv = svd.singularValues();
        const double smax = sv[0];
        const double smin = sv[p - 1];
        const double cond = smin > 0 ? (smax / smin) * (smax / smin)
                                     : std::numeric_limits<double>::infinity();
        if (!(cond <= kMaxGramCondition))
            throw RankDeficientError(fmt::format(
                "weighted Gram matrix of cell ({}) is singular or ill-conditioned "
                "(condition {:.3g}); increase the bandwidths",
                cell_label(x), cond));

        Eigen::HouseholderQR<Eigen::MatrixXd> qr(sw);
        const Eigen::MatrixXd r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
        // P = (RᵀR)⁻¹ Wᵀ diag(L)
        Eigen::MatrixXd proj = (l.asDiagonal() * w_).transpose();
        r.transpose().triangularView<Eigen::Lower>().solveInPlace(proj);
        r.triangularView<Eigen::Upper>().solveInPlace(proj);

        weights_.push_back(std::move(l));
        proj_.push_back(std::move(proj));
        cond_.push_back(cond);
    }
}

std::vector<Eigen::VectorXd> KernelSmoother::apply(const Eigen::VectorXd& y) const {
    if (y.size() != w_.rows())
        throw DataError("outcome vector length does not match the design");
    std::vector<Eigen::VectorXd> out;
    out.reserve(proj_.size());
    for (const auto& p : proj_)
        out.emplace_back(p * y);
    return out;
}

int VCFit::find(const Cell& x) const {
    auto it = std::find(cells.begin(), cells.end(), x);
    return it == cells.end() ? -1 : static_cast<int>(it - cells.begin());
}

const Eigen::VectorXd& VCFit::coefficients(const Cell& x) const {
    const int k = find(x);
    if (k < 0)
        throw ConfigError(fmt::format("cell ({}) was not fitted", cell_label(x)));
    return beta[static_cast<std::size_t>(k)];
}

VCFit fit_vc(const SourceDataset& data, const BasisSpec& basis, Bandwidth b,
             const std::vector<Cell>& extra_cells) {
    std::set<Cell> all;
    for (const auto& x : data.covariates())
        all.insert(x);
    for (const auto& x : extra_cells) {
        if (x.size() != data.kinds().size())
            throw ConfigError(fmt::format("target cell ({}) has the wrong number of covariates",
                                          cell_label(x)));
        all.insert(x);
    }

    VCFit fit;
    fit.basis = basis;
    fit.bandwidth = b;
    fit.cells.assign(all.begin(), all.end());
    auto smoother = std::make_shared<KernelSmoother>(data, basis, b, fit.cells);

    Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(data.y().data(),
                                                           static_cast<Eigen::Index>(data.size()));
    fit.beta = smoother->apply(y);
    for (const auto& x : fit.cells) {
        const std::size_t c = data.count_in_cell(x);
        fit.exact_matches.push_back(c);
        if (c == 0)
            fit.warnings.push_back(fmt::format(
                "cell ({}) has no exact source matches; its coefficients come from smoothing only",
                cell_label(x)));
    }

    const auto n = static_cast<Eigen::Index>(data.size());
    fit.fitted.resize(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const int k = fit.find(data.covariates()[static_cast<std::size_t>(i)]);
        fit.fitted[i] = smoother->design().row(i).dot(fit.beta[static_cast<std::size_t>(k)]);
    }
    fit.residuals = y - fit.fitted;
    fit.smoother = std::move(smoother);
    return fit;
}

nlohmann::json to_json(const VCFit& fit) {
    nlohmann::json cells = nlohmann::json::array();
    for (std::size_t k = 0; k < fit.cells.size(); ++k) {
        cells.push_back({{"cell", fit.cells[k]},
                         {"label", cell_label(fit.cells[k])},
                         {"exact_matches", fit.exact_matches[k]},
                         {"condition", fit.smoother ? fit.smoother->condition(k) : 0.0},
                         {"beta", std::vector<double>(fit.beta[k].begin(), fit.beta[k].end())}});
    }
    return {{"basis", to_string(fit.basis.family)},
            {"exposure", to_string(fit.basis.exposure)},
            {"terms", fit.basis.term_names()},
            {"bandwidth", {{"categorical", fit.bandwidth.categorical},
                           {"ordered", fit.bandwidth.ordered}}},
            {"cells", cells},
            {"warnings", fit.warnings}};
}

Eigen::VectorXd contrast_basis(const BasisSpec& basis, int g, ContrastKind kind) {
    const double e_all = exposure(g, g, basis.exposure);
    const double e_none = exposure(0, g, basis.exposure);
    switch (kind) {
    case ContrastKind::Total: return basis.eval(1, e_all, g) - basis.eval(0, e_none, g);
    case ContrastKind::Direct: return basis.eval(1, e_none, g) - basis.eval(0, e_none, g);
    case ContrastKind::Spillover: return basis.eval(1, e_all, g) - basis.eval(1, e_none, g);
    }
    return {};
}

ContrastVector contrast_vector(const VCFit& fit, const std::map<Cell, double>& p_target,
                               const std::vector<int>& degrees, ContrastKind kind) {
    double total = 0.0;
    for (const auto& [x, p] : p_target) {
        if (!(p >= 0.0))
            throw DataError(fmt::format("target proportion of cell ({}) is negative", cell_label(x)));
        total += p;
    }
    if (std::abs(total - 1.0) > 1e-9)
        throw DataError(fmt::format("target cell proportions sum to {}, not 1", total));

    ContrastVector m;
    m.degrees = degrees;
    for (const auto& [x, p] : p_target)
        m.cells.push_back(x);
    m.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(m.cells.size()),
                                     static_cast<Eigen::Index>(degrees.size()));
    std::size_t k = 0;
    for (const auto& [x, p] : p_target) {
        if (p > 0.0) {
            const auto& beta = fit.coefficients(x);
            for (std::size_t j = 0; j < degrees.size(); ++j)
                m.values(static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(j)) =
                    p * contrast_basis(fit.basis, degrees[j], kind).dot(beta);
        }
        ++k;
    }
    m.validate();
    return m;
}

std::vector<Bandwidth> bandwidth_grid(const std::vector<double>& bc, const std::vector<double>& bo) {
    std::vector<Bandwidth> out;
    for (double c : bc)
        for (double o : bo)
            out.push_back({c, o});
    return out;
}

namespace {

double loo_score(const SourceDataset& data, const Eigen::MatrixXd& w, const std::vector<Cell>& cells,
                 const std::vector<int>& cell_of, Bandwidth b) {
    const auto n = w.rows();
    const auto p = w.cols();
    // Full-sample Gram and moment per cell; each unit removes itself (L = 1).
    std::vector<Eigen::MatrixXd> gram(cells.size(), Eigen::MatrixXd::Zero(p, p));
    std::vector<Eigen::VectorXd> rhs(cells.size(), Eigen::VectorXd::Zero(p));
    for (std::size_t k = 0; k < cells.size(); ++k)
        for (Eigen::Index i = 0; i < n; ++i) {
            const double l = kernel_weight(data.covariates()[static_cast<std::size_t>(i)], cells[k],
                                           data.kinds(), b);
            if (l == 0.0)
                continue;
            gram[k].noalias() += l * w.row(i).transpose() * w.row(i);
            rhs[k].noalias() += l * data.y()[static_cast<std::size_t>(i)] * w.row(i).transpose();
        }
    double sse = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(cell_of[static_cast<std::size_t>(i)]);
        const double yi = data.y()[static_cast<std::size_t>(i)];
        Eigen::MatrixXd g = gram[k] - w.row(i).transpose() * w.row(i);
        Eigen::VectorXd r = rhs[k] - yi * w.row(i).transpose();
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(g);
        if (qr.rank() < p)
            return std::numeric_limits<double>::infinity();
        const Eigen::VectorXd beta = qr.solve(r);
        const double e = yi - w.row(i).dot(beta);
        sse += e * e;
    }
    return sse / static_cast<double>(n);
}

} // namespace

CVResult cv_bandwidth(const SourceDataset& data, const BasisSpec& basis,
                      const std::vector<Bandwidth>& grid) {
    if (grid.empty())
        throw ConfigError("bandwidth grid is empty");
    const Eigen::MatrixXd w = design_matrix(data, basis);
    const auto cells = data.cells();
    std::vector<int> cell_of(data.size());
    for (std::size_t i = 0; i < data.size(); ++i)
        cell_of[i] = static_cast<int>(
            std::lower_bound(cells.begin(), cells.end(), data.covariates()[i]) - cells.begin());

    CVResult out;
    out.grid = grid;
    double best = std::numeric_limits<double>::infinity();
    for (const auto& b : grid) {
        const double s = loo_score(data, w, cells, cell_of, b);
        out.scores.push_back(s);
        if (s < best) {
            best = s;
            out.best = b;
        }
    }
    if (!std::isfinite(best))
        throw RankDeficientError("every bandwidth in the grid leaves a singular leave-one-out fit");
    return out;
}

} // namespace netshift
