#pragma once

#include "netshift/bootstrap.hpp"
#include "netshift/bounds.hpp"
#include "netshift/dataset.hpp"
#include "netshift/regression.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

namespace netshift {

enum class FaceMode { Estimated, True };

const char* to_string(FaceMode f);

/// Monte Carlo design: binary X1 (categorical), X2 in {-1,0,1} (ordered),
/// X3 ~ N(0,1) observed with uniform measurement error, out-degrees drawn
/// from `degree_law` on 0..4 and nearest-neighbour links on (X2, X3).
struct DGPConfig {
    std::size_t n = 400;
    double rho = 0.3;
    std::vector<double> degree_law{0.2, 0.2, 0.2, 0.2, 0.2};
    double measurement_error = 0.3;
    BasisSpec basis{};
    std::vector<double> deltas{0.05, 0.1, 0.2, 0.5};
    double order = 2.0;
    std::vector<double> reference{0.2, 0.2, 0.2, 0.2, 0.2};
    std::vector<double> c_b{1.0};
    std::vector<double> c_d{4.0};
    bool identity_kernel = true;
    std::vector<FaceMode> faces{FaceMode::Estimated};
    std::vector<double> alphas{0.05, 0.01};
    std::size_t bootstrap = 200;
    std::size_t replications = 100;
    std::size_t burnin = 20;
    std::vector<Bandwidth> cv_grid = default_cv_grid();
    /// Skips the burn-in cross-validation when set.
    std::optional<Bandwidth> bandwidth;
    double face_threshold_scale = 1.0;
    /// The path-weighted kernel of this design is typically indefinite.
    PsdPolicy psd = PsdPolicy::Clip;
    std::uint64_t seed = 1;

    static std::vector<Bandwidth> default_cv_grid();
    std::vector<int> grid() const;
    void validate() const;
};

/// b_1..b_6 at (x1, x2).
Eigen::VectorXd true_coefficients(int x1, int x2);

struct SimDraw {
    SourceDataset data;
    std::vector<double> errors;
};

/// One dataset from substream (seed, rep, Simulation). Numeric columns
/// "x2", "x3" and "x3er" are attached.
SimDraw simulate_once(const DGPConfig& cfg, std::uint64_t rep);

struct DeltaTruth {
    double delta = 0.0;
    double upper = 0.0;
    double lower = 0.0;
    /// Exact argmax/argmin faces (threshold 0) per cell.
    std::vector<CellFaces> faces;
};

struct Truth {
    ContrastVector m;
    std::vector<double> proportions;
    std::vector<BallSpec> balls(double delta) const;
    std::vector<DeltaTruth> per_delta;
    double order = 2.0;
    DiscreteDist reference = DiscreteDist::point_mass(0);
};

/// True contrasts from b_1..b_6 with p(x) = 1/6, and κ̄, κ̲ per radius.
Truth compute_truth(const DGPConfig& cfg);

/// Average leave-one-out bandwidth over `cfg.burnin` draws.
Bandwidth burnin_bandwidth(const DGPConfig& cfg);

struct CoverageRow {
    double c_b = 0.0;
    FaceMode face = FaceMode::Estimated;
    /// c_d value, or 0 for the identity kernel.
    double c_d = 0.0;
    double delta = 0.0;
    double level = 0.95;
    std::size_t covered = 0;
    std::size_t total = 0;

    std::string kernel_label() const;
    double coverage() const { return total ? static_cast<double>(covered) / static_cast<double>(total) : 0.0; }
};

struct CoverageReport {
    std::size_t n = 0;
    double rho = 0.0;
    Bandwidth cv_bandwidth;
    std::vector<CoverageRow> rows;
    double seconds = 0.0;
    std::size_t failed_replicates = 0;
    double min_kernel_eigenvalue = 0.0;
    /// Largest clipped negative mass relative to the top eigenvalue.
    double max_clipped_share = 0.0;

    const CoverageRow& find(double c_b, FaceMode face, double c_d, double delta, double level) const;
    /// One line per (c_b, face, kernel) with coverage columns per level and δ.
    void write_csv(std::ostream& os) const;
};

using ProgressFn = std::function<void(std::size_t done, std::size_t total)>;

CoverageReport coverage_experiment(const DGPConfig& cfg, const ProgressFn& progress = {});

} // namespace netshift
