#include "netshift/dist.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

namespace netshift {

namespace {

constexpr double kRenormTol = 1e-9;

void check_order(double q) {
    if (!(q >= 1.0) || !std::isfinite(q))
        throw ConfigError(fmt::format("Wasserstein order q must be in [1, inf), got {}", q));
}

} // namespace

DiscreteDist::DiscreteDist(std::vector<int> support, std::vector<double> mass)
    : support_(std::move(support)), mass_(std::move(mass)) {
    if (support_.empty())
        throw DataError("distribution support is empty");
    if (support_.size() != mass_.size())
        throw DataError(fmt::format("support has {} points but mass has {}", support_.size(),
                                    mass_.size()));
    for (std::size_t k = 0; k < support_.size(); ++k) {
        if (support_[k] < 0)
            throw DataError(fmt::format("negative support point {}", support_[k]));
        if (k > 0 && support_[k] <= support_[k - 1])
            throw DataError("support must be strictly increasing");
        if (!(mass_[k] >= 0.0) || !std::isfinite(mass_[k]))
            throw DataError(fmt::format("invalid mass {} at g = {}", mass_[k], support_[k]));
    }
    const double total = std::accumulate(mass_.begin(), mass_.end(), 0.0);
    if (std::abs(total - 1.0) > kRenormTol)
        throw DataError(fmt::format("masses sum to {:.12g}, not 1", total));
    for (auto& m : mass_)
        m /= total;
}

DiscreteDist DiscreteDist::point_mass(int g) { return DiscreteDist({g}, {1.0}); }

DiscreteDist DiscreteDist::uniform(std::vector<int> support) {
    const auto k = support.size();
    return DiscreteDist(std::move(support), std::vector<double>(k, 1.0 / static_cast<double>(k)));
}

DiscreteDist DiscreteDist::bernoulli(double alpha) {
    if (!(alpha >= 0.0 && alpha <= 1.0))
        throw DataError(fmt::format("Bernoulli parameter {} outside [0, 1]", alpha));
    return DiscreteDist({0, 1}, {1.0 - alpha, alpha});
}

DiscreteDist DiscreteDist::empirical(std::span<const int> values) {
    if (values.empty())
        throw DataError("cannot build an empirical distribution from no values");
    std::map<int, std::size_t> counts;
    for (int v : values)
        ++counts[v];
    std::vector<int> support;
    std::vector<double> mass;
    const double n = static_cast<double>(values.size());
    for (const auto& [g, c] : counts) {
        support.push_back(g);
        mass.push_back(static_cast<double>(c) / n);
    }
    return DiscreteDist(std::move(support), std::move(mass));
}

double DiscreteDist::at(int g) const {
    auto it = std::lower_bound(support_.begin(), support_.end(), g);
    if (it == support_.end() || *it != g)
        return 0.0;
    return mass_[static_cast<std::size_t>(it - support_.begin())];
}

double DiscreteDist::mean() const {
    double s = 0.0;
    for (std::size_t k = 0; k < size(); ++k)
        s += support_[k] * mass_[k];
    return s;
}

DiscreteDist DiscreteDist::on_grid(const std::vector<int>& grid) const {
    std::vector<double> mass(grid.size(), 0.0);
    std::size_t placed = 0;
    for (std::size_t k = 0; k < grid.size(); ++k) {
        mass[k] = at(grid[k]);
        if (std::binary_search(support_.begin(), support_.end(), grid[k]))
            ++placed;
    }
    if (placed != support_.size())
        throw DataError("grid does not contain the distribution's support");
    return DiscreteDist(grid, std::move(mass));
}

std::vector<int> union_support(const DiscreteDist& a, const DiscreteDist& b) {
    std::vector<int> out;
    std::set_union(a.support().begin(), a.support().end(), b.support().begin(),
                   b.support().end(), std::back_inserter(out));
    return out;
}

double transport_cost(int u, int v, double q) {
    const double d = std::abs(static_cast<double>(u) - static_cast<double>(v));
    if (d == 0.0)
        return 0.0;
    return q == 1.0 ? d : std::pow(d, q);
}

double TransportPlan::cost(double q) const {
    double c = 0.0;
    for (Eigen::Index r = 0; r < gamma.rows(); ++r)
        for (Eigen::Index s = 0; s < gamma.cols(); ++s)
            c += gamma(r, s) * transport_cost(rows[static_cast<std::size_t>(r)],
                                              cols[static_cast<std::size_t>(s)], q);
    return c;
}

namespace {

// Walks both quantile functions in lockstep over [0, 1]. `visit(r, s, len)`
// receives the index of the current atom of pi_star (r) and of pi (s) and the
// length of the level interval on which they are paired.
template <typename Visit>
void quantile_walk(const DiscreteDist& pi, const DiscreteDist& pi_star, Visit&& visit) {
    const auto& a = pi_star.mass();
    const auto& b = pi.mass();
    std::size_t r = 0, s = 0;
    double left_a = a[0], left_b = b[0];
    while (r < a.size() && s < b.size()) {
        const double len = std::min(left_a, left_b);
        if (len > 0.0)
            visit(r, s, len);
        left_a -= len;
        left_b -= len;
        // Advance whichever atom is exhausted; on a tie advance both. Rounding
        // residue below 1e-15 counts as exhausted.
        const bool done_a = left_a <= 1e-15;
        const bool done_b = left_b <= 1e-15;
        if (done_a && ++r < a.size())
            left_a = a[r];
        if (done_b && ++s < b.size())
            left_b = b[s];
        if (!done_a && !done_b)
            break; // unreachable: len equals one of the two
    }
}

} // namespace

double wasserstein(const DiscreteDist& pi, const DiscreteDist& pi_star, double q) {
    check_order(q);
    double total = 0.0;
    quantile_walk(pi, pi_star, [&](std::size_t r, std::size_t s, double len) {
        total += len * transport_cost(pi_star.support()[r], pi.support()[s], q);
    });
    if (total <= 0.0)
        return 0.0;
    return q == 1.0 ? total : std::pow(total, 1.0 / q);
}

TransportPlan optimal_plan(const DiscreteDist& pi, const DiscreteDist& pi_star, double q) {
    check_order(q);
    TransportPlan plan{pi_star.support(), pi.support(),
                       Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(pi_star.size()),
                                             static_cast<Eigen::Index>(pi.size()))};
    quantile_walk(pi, pi_star, [&](std::size_t r, std::size_t s, double len) {
        plan.gamma(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(s)) += len;
    });
    return plan;
}

void to_json(nlohmann::json& j, const DiscreteDist& d) {
    j = nlohmann::json{{"support", d.support()}, {"mass", d.mass()}};
}

DiscreteDist dist_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("support") || !j.contains("mass"))
        throw DataError("distribution JSON must be an object with 'support' and 'mass'");
    for (const auto& [key, _] : j.items())
        if (key != "support" && key != "mass")
            throw DataError(fmt::format("unknown key '{}' in distribution JSON", key));
    try {
        return DiscreteDist(j.at("support").get<std::vector<int>>(),
                            j.at("mass").get<std::vector<double>>());
    } catch (const nlohmann::json::exception& e) {
        throw DataError(fmt::format("malformed distribution JSON: {}", e.what()));
    }
}

} // namespace netshift
