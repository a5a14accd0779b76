#include "netshift/simplex.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>

namespace netshift {

const char* to_string(LpStatus s) {
    switch (s) {
    case LpStatus::Optimal: return "optimal";
    case LpStatus::Infeasible: return "infeasible";
    case LpStatus::Unbounded: return "unbounded";
    case LpStatus::IterationLimit: return "iteration limit";
    }
    return "?";
}

LinearProgram::LinearProgram(std::size_t num_vars)
    : cost_(num_vars, 0.0), upper_(num_vars, kInf) {}

void LinearProgram::add_row(std::vector<double> coeffs, RowSense sense, double rhs) {
    if (coeffs.size() != num_vars())
        throw ConfigError(fmt::format("LP row has {} coefficients, expected {}", coeffs.size(),
                                      num_vars()));
    rows_.push_back({std::move(coeffs), sense, rhs});
}

namespace {

constexpr double kReducedCostTol = 1e-11;
constexpr double kPivotTol = 1e-11;
constexpr double kRatioTieTol = 1e-12;

// Bounded-variable tableau. Columns are ordered [structural | slack |
// artificial]; every row starts with its artificial basic.
class Tableau {
public:
    Tableau(std::size_t m, std::size_t ncols) : m_(m), n_(ncols), t_(m * ncols, 0.0) {}

    double& at(std::size_t i, std::size_t j) { return t_[i * n_ + j]; }
    double at(std::size_t i, std::size_t j) const { return t_[i * n_ + j]; }

    void pivot(std::size_t r, std::size_t j) {
        const double p = at(r, j);
        for (std::size_t k = 0; k < n_; ++k)
            at(r, k) /= p;
        at(r, j) = 1.0;
        for (std::size_t i = 0; i < m_; ++i) {
            if (i == r)
                continue;
            const double f = at(i, j);
            if (f == 0.0)
                continue;
            for (std::size_t k = 0; k < n_; ++k)
                at(i, k) -= f * at(r, k);
            at(i, j) = 0.0;
        }
    }

    std::size_t rows() const { return m_; }
    std::size_t cols() const { return n_; }

private:
    std::size_t m_, n_;
    std::vector<double> t_;
};

struct State {
    Tableau tab;
    std::vector<std::size_t> basis;   // basic column per row
    std::vector<char> is_basic;
    std::vector<char> at_upper;       // nonbasic at its upper bound
    std::vector<double> value;
    std::vector<double> upper;
    int iterations = 0;
};

enum class StepResult { Optimal, Unbounded, Continue };

// One Bland-rule iteration maximizing `c` over the columns with allowed[j].
StepResult step(State& s, const std::vector<double>& c, const std::vector<char>& allowed) {
    const std::size_t m = s.tab.rows();
    const std::size_t ncols = s.tab.cols();

    std::size_t enter = ncols;
    double dir = 0.0;
    for (std::size_t j = 0; j < ncols; ++j) {
        if (s.is_basic[j] || !allowed[j])
            continue;
        double rc = c[j];
        for (std::size_t i = 0; i < m; ++i)
            rc -= c[s.basis[i]] * s.tab.at(i, j);
        if (!s.at_upper[j] && rc > kReducedCostTol) {
            enter = j;
            dir = 1.0;
            break;
        }
        if (s.at_upper[j] && rc < -kReducedCostTol) {
            enter = j;
            dir = -1.0;
            break;
        }
    }
    if (enter == ncols)
        return StepResult::Optimal;

    // Ratio test. theta is the step length of the entering variable.
    double theta = LinearProgram::kInf;
    std::size_t leave_row = m;
    bool leave_to_upper = false;
    for (std::size_t i = 0; i < m; ++i) {
        const double rate = -dir * s.tab.at(i, enter); // d(basic)/d(theta)
        const std::size_t b = s.basis[i];
        double limit = LinearProgram::kInf;
        bool to_upper = false;
        if (rate < -kPivotTol) {
            limit = std::max(0.0, s.value[b]) / -rate;
        } else if (rate > kPivotTol && std::isfinite(s.upper[b])) {
            limit = std::max(0.0, s.upper[b] - s.value[b]) / rate;
            to_upper = true;
        } else {
            continue;
        }
        const bool better = limit < theta - kRatioTieTol;
        const bool tie = !better && limit <= theta + kRatioTieTol;
        if (better || (tie && leave_row < m && b < s.basis[leave_row])) {
            theta = std::min(theta, limit);
            leave_row = i;
            leave_to_upper = to_upper;
        }
    }
    const double flip = s.upper[enter];
    const bool do_flip = std::isfinite(flip) && flip <= theta + kRatioTieTol;
    if (!do_flip && leave_row == m)
        return StepResult::Unbounded;
    if (do_flip)
        theta = flip;

    s.value[enter] += dir * theta;
    for (std::size_t i = 0; i < m; ++i)
        s.value[s.basis[i]] -= dir * s.tab.at(i, enter) * theta;

    if (do_flip) {
        s.at_upper[enter] = !s.at_upper[enter];
        s.value[enter] = s.at_upper[enter] ? s.upper[enter] : 0.0;
    } else {
        const std::size_t leaving = s.basis[leave_row];
        s.value[leaving] = leave_to_upper ? s.upper[leaving] : 0.0;
        s.at_upper[leaving] = leave_to_upper;
        s.is_basic[leaving] = 0;
        s.tab.pivot(leave_row, enter);
        s.basis[leave_row] = enter;
        s.is_basic[enter] = 1;
        s.at_upper[enter] = 0;
    }
    ++s.iterations;
    return StepResult::Continue;
}

} // namespace

LinearProgram::Result LinearProgram::solve(Objective sense, int max_iterations) const {
    const std::size_t n = num_vars();
    const std::size_t m = rows_.size();
    std::size_t num_slack = 0;
    for (const auto& r : rows_)
        if (r.sense != RowSense::Equal)
            ++num_slack;
    const std::size_t first_art = n + num_slack;
    const std::size_t ncols = first_art + m;

    State s{Tableau(m, ncols), std::vector<std::size_t>(m), std::vector<char>(ncols, 0),
            std::vector<char>(ncols, 0), std::vector<double>(ncols, 0.0),
            std::vector<double>(ncols, kInf)};
    for (std::size_t j = 0; j < n; ++j) {
        if (!(upper_[j] >= 0.0))
            return {LpStatus::Infeasible, 0.0, {}, 0};
        s.upper[j] = upper_[j];
    }

    std::size_t slack = n;
    for (std::size_t i = 0; i < m; ++i) {
        const auto& row = rows_[i];
        const double sign = row.rhs < 0.0 ? -1.0 : 1.0;
        for (std::size_t j = 0; j < n; ++j)
            s.tab.at(i, j) = sign * row.coeffs[j];
        if (row.sense == RowSense::LessEqual)
            s.tab.at(i, slack++) = sign;
        else if (row.sense == RowSense::GreaterEqual)
            s.tab.at(i, slack++) = -sign;
        s.tab.at(i, first_art + i) = 1.0;
        s.basis[i] = first_art + i;
        s.is_basic[first_art + i] = 1;
        s.value[first_art + i] = sign * row.rhs;
    }

    auto run = [&](const std::vector<double>& c, const std::vector<char>& allowed) {
        while (true) {
            if (s.iterations >= max_iterations)
                return LpStatus::IterationLimit;
            switch (step(s, c, allowed)) {
            case StepResult::Optimal: return LpStatus::Optimal;
            case StepResult::Unbounded: return LpStatus::Unbounded;
            case StepResult::Continue: break;
            }
        }
    };

    // Phase 1: drive the artificials to zero.
    std::vector<double> c1(ncols, 0.0);
    for (std::size_t j = first_art; j < ncols; ++j)
        c1[j] = -1.0;
    std::vector<char> all(ncols, 1);
    if (auto st = run(c1, all); st != LpStatus::Optimal)
        return {st, 0.0, {}, s.iterations};

    double infeas = 0.0, scale = 1.0;
    for (std::size_t j = first_art; j < ncols; ++j)
        infeas += s.value[j];
    for (const auto& r : rows_)
        scale = std::max(scale, std::abs(r.rhs));
    if (infeas > 1e-9 * scale)
        return {LpStatus::Infeasible, 0.0, {}, s.iterations};

    // Pivot remaining (zero-level) artificials out where possible; rows where
    // that fails are redundant and keep their artificial basic at zero.
    for (std::size_t i = 0; i < m; ++i) {
        if (s.basis[i] < first_art)
            continue;
        for (std::size_t j = 0; j < first_art; ++j) {
            if (!s.is_basic[j] && std::abs(s.tab.at(i, j)) > 1e-9) {
                const std::size_t art = s.basis[i];
                s.value[art] = 0.0;
                s.is_basic[art] = 0;
                s.tab.pivot(i, j);
                s.basis[i] = j;
                s.is_basic[j] = 1;
                s.at_upper[j] = 0;
                break;
            }
        }
    }

    // Phase 2.
    std::vector<double> c2(ncols, 0.0);
    const double sgn = sense == Objective::Maximize ? 1.0 : -1.0;
    for (std::size_t j = 0; j < n; ++j)
        c2[j] = sgn * cost_[j];
    std::vector<char> structural(ncols, 1);
    for (std::size_t j = first_art; j < ncols; ++j)
        structural[j] = 0;
    const LpStatus st = run(c2, structural);

    Result res;
    res.status = st;
    res.iterations = s.iterations;
    res.x.assign(s.value.begin(), s.value.begin() + static_cast<std::ptrdiff_t>(n));
    for (auto& v : res.x)
        if (std::abs(v) < 1e-14)
            v = 0.0;
    for (std::size_t j = 0; j < n; ++j)
        res.objective += cost_[j] * res.x[j];
    return res;
}

} // namespace netshift
