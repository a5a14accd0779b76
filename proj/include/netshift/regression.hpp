#pragma once

#include "netshift/bounds.hpp"
#include "netshift/dataset.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <map>
#include <memory>
#include <string>
#include <vector>

namespace netshift {

enum class ExposureFamily { Count, Ratio, Indicator };

const char* to_string(ExposureFamily f);
ExposureFamily exposure_family_from_string(const std::string& s);

/// e(s, g). The ratio family returns 0 for an isolated unit.
double exposure(int s, int g, ExposureFamily family);

enum class BasisFamily {
    /// (1, d, e, d·e, log(g+1), e·log(g+1))
    Default,
    /// (1, d, e, d·e)
    Linear,
};

const char* to_string(BasisFamily f);
BasisFamily basis_family_from_string(const std::string& s);

struct BasisSpec {
    BasisFamily family = BasisFamily::Default;
    ExposureFamily exposure = ExposureFamily::Ratio;

    std::size_t dim() const;
    /// w(d, e, g)
    Eigen::VectorXd eval(int d, double e, int g) const;
    std::vector<std::string> term_names() const;
};

struct Bandwidth {
    double categorical = 0.0;
    double ordered = 0.0;
};

/// L_b(x_i, x): product of b_c per categorical mismatch and b_o^|diff| per
/// ordered component.
double kernel_weight(const Cell& xi, const Cell& x, const std::vector<CovariateKind>& kinds,
                     Bandwidth b);

/// n × d_w design with rows w(D_i, E_i, G_i).
Eigen::MatrixXd design_matrix(const SourceDataset& data, const BasisSpec& basis);

/// Per-cell weighted least-squares operators β(x) = P(x) y, factored once
/// so that refits on new outcome vectors are a matrix-vector product.
class KernelSmoother {
public:
    KernelSmoother(const SourceDataset& data, const BasisSpec& basis, Bandwidth b,
                   std::vector<Cell> cells);

    const std::vector<Cell>& cells() const { return cells_; }
    const Eigen::MatrixXd& design() const { return w_; }
    const Eigen::VectorXd& weights(std::size_t k) const { return weights_[k]; }
    /// d_w × n operator of cell k.
    const Eigen::MatrixXd& projection(std::size_t k) const { return proj_[k]; }
    double condition(std::size_t k) const { return cond_[k]; }

    std::vector<Eigen::VectorXd> apply(const Eigen::VectorXd& y) const;

private:
    std::vector<Cell> cells_;
    Eigen::MatrixXd w_;
    std::vector<Eigen::VectorXd> weights_;
    std::vector<Eigen::MatrixXd> proj_;
    std::vector<double> cond_;
};

inline constexpr double kMaxGramCondition = 1e12;

struct VCFit {
    BasisSpec basis;
    Bandwidth bandwidth;
    std::vector<Cell> cells;
    std::vector<Eigen::VectorXd> beta;
    std::vector<std::size_t> exact_matches;
    Eigen::VectorXd fitted;
    Eigen::VectorXd residuals;
    std::vector<std::string> warnings;
    std::shared_ptr<const KernelSmoother> smoother;

    /// Index of x in `cells`, or -1.
    int find(const Cell& x) const;
    const Eigen::VectorXd& coefficients(const Cell& x) const;
};

/// Fits every cell observed in the source plus any `extra_cells`.
/// Throws RankDeficientError when a weighted Gram matrix has condition
/// number above kMaxGramCondition.
VCFit fit_vc(const SourceDataset& data, const BasisSpec& basis, Bandwidth b,
             const std::vector<Cell>& extra_cells = {});

nlohmann::json to_json(const VCFit& fit);

enum class ContrastKind {
    /// w(1, e(g,g), g) - w(0, e(0,g), g)
    Total,
    /// w(1, e(0,g), g) - w(0, e(0,g), g)
    Direct,
    /// w(1, e(g,g), g) - w(1, e(0,g), g)
    Spillover,
};

/// z(g, x) / p(x) for one degree.
Eigen::VectorXd contrast_basis(const BasisSpec& basis, int g, ContrastKind kind = ContrastKind::Total);

/// m̂(g, x) = p(x) z(g)ᵀ β̂(x). Cells with p(x) = 0 get zero rows and need
/// not be fitted; any other target cell missing from the fit is an error.
ContrastVector contrast_vector(const VCFit& fit, const std::map<Cell, double>& p_target,
                               const std::vector<int>& degrees,
                               ContrastKind kind = ContrastKind::Total);

struct CVResult {
    Bandwidth best;
    std::vector<Bandwidth> grid;
    std::vector<double> scores;
};

/// Leave-one-out squared prediction error over a bandwidth grid. Grid points
/// where some leave-one-out system is singular score +inf.
CVResult cv_bandwidth(const SourceDataset& data, const BasisSpec& basis,
                      const std::vector<Bandwidth>& grid);

/// Cartesian grid helper.
std::vector<Bandwidth> bandwidth_grid(const std::vector<double>& bc, const std::vector<double>& bo);

} // namespace netshift
