#pragma once

#include "netshift/bounds.hpp"
#include "netshift/dataset.hpp"
#include "netshift/regression.hpp"

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

namespace netshift {

/// K(u) = 1{|u| <= 1} (1 - |u|)^2
double truncated_quadratic(double u);

/// Proxy distances Δ̃ (entries may be +inf), a kernel and a bandwidth.
struct DistanceModel {
    Eigen::MatrixXd distances;
    std::function<double(double)> kernel = truncated_quadratic;
    double bandwidth = 0.0;

    void validate() const;
};

/// Δ̃_ij = γ_ij · Mahalanobis_ij on the named numeric columns, with
/// γ = Φ(1 - 1/(path - 1)) for path >= 2 and 0 for adjacent pairs. Pairs in
/// different components get γ = Φ(1), or +inf when `cross_block_infinite`
/// and the dataset's block labels differ. Bandwidth is left at 0.
DistanceModel path_weighted_distance(const SourceDataset& data, const std::vector<std::string>& columns,
                                     bool cross_block_infinite = true);

/// Type-1 empirical quantile of the finite off-diagonal distances at level
/// min(1, c_d · max degree / n).
double bandwidth_rule(const DistanceModel& dist, const std::vector<int>& degrees, double c_d);

inline constexpr double kPsdTolerance = 1e-8;

/// What to do with eigenvalues below -kPsdTolerance · max eigenvalue.
enum class PsdPolicy {
    /// Raise IndefiniteKernelError.
    Fail,
    /// Zero them, i.e. use the nearest positive semidefinite matrix in
    /// Frobenius norm; the removed mass is reported.
    Clip,
};

const char* to_string(PsdPolicy p);
PsdPolicy psd_policy_from_string(const std::string& s);

struct BootKernel {
    Eigen::MatrixXd matrix;
    Eigen::VectorXd eigenvalues;   // clamped, ascending
    Eigen::MatrixXd factor;        // Φ Λ^{1/2}; empty for the identity
    double min_raw_eigenvalue = 1.0;
    double clamp_error = 0.0;      // ||K - Φ Λ Φᵀ||_max after clamping
    double clipped_mass = 0.0;     // Σ |negative eigenvalues| removed
    std::size_t clipped_count = 0;
    bool identity = false;

    std::size_t size() const { return static_cast<std::size_t>(matrix.rows()); }
    static BootKernel make_identity(std::size_t n);
};

/// 𝕂 = K(Δ̃/d) with an eigendecomposition. Eigenvalues below
/// -kPsdTolerance · max eigenvalue are handled per `policy`; smaller
/// negative ones are always clamped to zero.
BootKernel build_kernel(const DistanceModel& dist, PsdPolicy policy = PsdPolicy::Fail);
BootKernel build_kernel(const Eigen::MatrixXd& k, PsdPolicy policy = PsdPolicy::Fail);

/// Φ Λ Φᵀ after clamping: the covariance η actually has.
Eigen::MatrixXd effective_covariance(const BootKernel& kern);

/// η = Φ Λ^{1/2} z with z the next n standard normals from `rng`.
Eigen::VectorXd draw_eta(const BootKernel& kern, std::mt19937_64& rng);

/// Type-1 empirical quantile: the ⌈B p⌉-th order statistic.
double empirical_quantile(std::vector<double> values, double p);

/// Faces of one target cell for one (δ, q).
struct CellFaces {
    Cell cell;
    double proportion = 0.0;
    FaceSet upper;
    FaceSet lower;
};

/// Linear functional Σ Γ(u,v) z(v,x)ᵀ Δβ(x) maximized (minimized) over each
/// cell's upper (lower) face and summed over cells.
class FaceFunctional {
public:
    FaceFunctional(const VCFit& fit, const std::vector<int>& degrees, const std::vector<CellFaces>& faces,
                   ContrastKind kind = ContrastKind::Total);

    /// `dbeta` is indexed like fit.cells.
    double upper(const std::vector<Eigen::VectorXd>& dbeta) const;
    double lower(const std::vector<Eigen::VectorXd>& dbeta) const;

private:
    struct Term {
        std::size_t fit_index;
        Eigen::MatrixXd z;          // degrees × d_w, scaled by p(x)
        Eigen::MatrixXd upper_cols; // plans × degrees
        Eigen::MatrixXd lower_cols;
    };
    std::vector<Term> terms_;
};

/// Faces and point estimates for one radius.
struct DeltaFaces {
    double delta = 0.0;
    double order = 1.0;
    double upper_point = 0.0;
    double lower_point = 0.0;
    std::vector<CellFaces> cells;
};

/// Point bounds and estimated faces for one radius. The per-cell threshold
/// is `threshold_scale` · |κ̂_x| · n^{-2/5} for each side. Cells with zero
/// proportion are carried with empty faces and skipped downstream.
DeltaFaces estimate_faces(const ContrastVector& m, const std::vector<double>& proportions,
                          const std::vector<BallSpec>& balls, std::size_t n,
                          double threshold_scale = 1.0);

struct BootstrapOptions {
    std::size_t replicates = 500;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    ContrastKind kind = ContrastKind::Total;
    /// Abort when more than this share of replicates is non-finite.
    double max_failure_share = 0.01;
};

struct SideCI {
    double point = 0.0;
    double q_lo = 0.0;  // χ_{α/2}
    double q_hi = 0.0;  // χ_{1-α/2}
    double lo = 0.0;
    double hi = 0.0;
};

/// [point - q_hi/√n, point - q_lo/√n]
SideCI side_interval(double point, const std::vector<double>& stats, double alpha, std::size_t n);

struct BoundCI {
    double delta = 0.0;
    double order = 1.0;
    SideCI upper;
    SideCI lower;
    std::size_t replicates = 0;
    std::size_t failed = 0;
    double alpha = 0.05;
    std::uint64_t seed = 0;
    std::vector<double> upper_stats;
    std::vector<double> lower_stats;
};

/// Dependent wild bootstrap. Replicate b draws η from substream
/// (seed, b, Eta), refits β on Y* = Ŷ + η ε̂ with the same smoother and
/// evaluates the face functionals of every radius on the same draw.
std::vector<BoundCI> bootstrap_bounds(const VCFit& fit, const std::vector<int>& degrees,
                                      const std::vector<DeltaFaces>& radii, const BootKernel& kern,
                                      const BootstrapOptions& opts);

nlohmann::json kernel_diagnostics(const BootKernel& kern);

} // namespace netshift
