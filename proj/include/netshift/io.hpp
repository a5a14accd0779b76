#pragma once

#include "netshift/dataset.hpp"

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

namespace netshift {

struct CsvTable {
    std::string name;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Column position; throws DataError naming the file when absent.
    std::size_t column(const std::string& col) const;
    bool has_column(const std::string& col) const;
    double number(std::size_t row, std::size_t col) const;
    int integer(std::size_t row, std::size_t col) const;
};

/// Comma-separated with a header line; double quotes may wrap fields.
CsvTable parse_csv(std::istream& in, const std::string& name);
CsvTable read_csv(const std::filesystem::path& path);

/// Shortest round-trip representation ("{:.17g}" style, deterministic).
std::string format_number(double x);

void write_file(const std::filesystem::path& path, const std::string& content);

struct CovariateColumn {
    std::string name;
    CovariateKind kind = CovariateKind::Categorical;
};

struct DatasetSpec {
    std::filesystem::path units;
    std::filesystem::path edges;
    bool directed = false;
    std::string id = "id";
    /// Empty means the column is not read and filled with zeros.
    std::string outcome = "Y";
    std::string treatment = "D";
    std::vector<CovariateColumn> covariates;
    std::vector<std::string> numeric;
    std::optional<std::string> block;
};

/// units.csv: id, outcome, treatment, covariate codes, extra numeric columns.
/// edges.csv: src, dst (unit ids) and an optional constant `directed` column
/// that must agree with the spec.
SourceDataset load_dataset(const DatasetSpec& spec);

} // namespace netshift
