#pragma once

#include <limits>
#include <vector>

namespace netshift {

enum class RowSense { LessEqual, Equal, GreaterEqual };
enum class Objective { Maximize, Minimize };
enum class LpStatus { Optimal, Infeasible, Unbounded, IterationLimit };

const char* to_string(LpStatus s);

/// Dense linear program  opt c'x  s.t.  A x (<=,=,>=) b,  0 <= x <= upper.
///
/// Solved by a two-phase bounded-variable tableau simplex with Bland's rule,
/// so it terminates on degenerate problems. Intended for the small problems
/// this library produces (tens of variables); no sparsity is exploited.
class LinearProgram {
public:
    static constexpr double kInf = std::numeric_limits<double>::infinity();

    explicit LinearProgram(std::size_t num_vars);

    std::size_t num_vars() const { return cost_.size(); }
    std::size_t num_rows() const { return rows_.size(); }

    void set_cost(std::size_t j, double c) { cost_.at(j) = c; }
    void set_upper(std::size_t j, double u) { upper_.at(j) = u; }
    /// Dense row of length num_vars().
    void add_row(std::vector<double> coeffs, RowSense sense, double rhs);

    struct Result {
        LpStatus status = LpStatus::IterationLimit;
        double objective = 0.0;
        std::vector<double> x;
        int iterations = 0;
    };

    Result solve(Objective sense, int max_iterations = 50000) const;

private:
    struct Row {
        std::vector<double> coeffs;
        RowSense sense;
        double rhs;
    };
    std::vector<double> cost_;
    std::vector<double> upper_;
    std::vector<Row> rows_;
};

} // namespace netshift
