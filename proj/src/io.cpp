#include "netshift/io.hpp"

#include "netshift/errors.hpp"

#include <fmt/format.h>

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

namespace netshift {

namespace {

std::vector<std::string> split_line(const std::string& line, const std::string& name, std::size_t lineno) {
    std::vector<std::string> out;
    std::string field;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                field += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(field));
            field.clear();
        } else {
            field += c;
        }
    }
    if (quoted)
        throw DataError(fmt::format("{}:{}: unterminated quote", name, lineno));
    out.push_back(std::move(field));
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

} // namespace

std::size_t CsvTable::column(const std::string& col) const {
    for (std::size_t k = 0; k < header.size(); ++k)
        if (header[k] == col)
            return k;
    throw DataError(fmt::format("{}: no column named '{}'", name, col));
}

bool CsvTable::has_column(const std::string& col) const {
    return std::find(header.begin(), header.end(), col) != header.end();
}

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(fmt::format("{}: row {}, column '{}': '{}' is not a number", name, row + 1,
                                    header[col], s));
    return v;
}

int CsvTable::integer(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || s.empty())
        throw DataError(fmt::format("{}: row {}, column '{}': '{}' is not an integer", name, row + 1,
                                    header[col], s));
    return v;
}

CsvTable parse_csv(std::istream& in, const std::string& name) {
    CsvTable t;
    t.name = name;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (trim(line).empty())
            continue;
        auto fields = split_line(line, name, lineno);
        for (auto& f : fields)
            f = trim(f);
        if (t.header.empty()) {
            t.header = std::move(fields);
            continue;
        }
        if (fields.size() != t.header.size())
            throw DataError(fmt::format("{}:{}: expected {} fields, found {}", name, lineno,
                                        t.header.size(), fields.size()));
        t.rows.push_back(std::move(fields));
    }
    if (t.header.empty())
        throw DataError(fmt::format("{}: file is empty", name));
    return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    return parse_csv(in, path.string());
}

std::string format_number(double x) {
    if (x == 0.0)
        return "0";
    return fmt::format("{}", x);
}

void write_file(const std::filesystem::path& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw DataError(fmt::format("cannot write '{}'", path.string()));
    out << content;
    if (!out)
        throw DataError(fmt::format("write to '{}' failed", path.string()));
}

SourceDataset load_dataset(const DatasetSpec& spec) {
    const CsvTable units = read_csv(spec.units);
    const CsvTable edges = read_csv(spec.edges);
    const std::size_t n = units.rows.size();
    if (n == 0)
        throw DataError(fmt::format("{}: no units", units.name));

    const std::size_t cid = units.column(spec.id);
    std::map<std::string, int> index;
    for (std::size_t i = 0; i < n; ++i)
        if (!index.emplace(units.rows[i][cid], static_cast<int>(i)).second)
            throw DataError(fmt::format("{}: duplicate id '{}'", units.name, units.rows[i][cid]));

    std::vector<double> y(n, 0.0);
    std::vector<int> d(n, 0);
    if (!spec.outcome.empty()) {
        const auto c = units.column(spec.outcome);
        for (std::size_t i = 0; i < n; ++i)
            y[i] = units.number(i, c);
    }
    if (!spec.treatment.empty()) {
        const auto c = units.column(spec.treatment);
        for (std::size_t i = 0; i < n; ++i)
            d[i] = units.integer(i, c);
    }
    std::vector<Cell> x(n);
    std::vector<CovariateKind> kinds;
    for (const auto& cov : spec.covariates) {
        const auto c = units.column(cov.name);
        kinds.push_back(cov.kind);
        for (std::size_t i = 0; i < n; ++i)
            x[i].push_back(units.integer(i, c));
    }

    const auto cs = edges.column("src");
    const auto cd = edges.column("dst");
    bool directed = spec.directed;
    if (edges.has_column("directed")) {
        const auto cf = edges.column("directed");
        for (std::size_t r = 0; r < edges.rows.size(); ++r) {
            const bool flag = edges.integer(r, cf) != 0;
            if (flag != spec.directed)
                throw DataError(fmt::format("{}: row {} has directed = {}, configuration says {}",
                                            edges.name, r + 1, flag ? 1 : 0, spec.directed ? 1 : 0));
        }
        directed = spec.directed;
    }
    std::vector<Edge> list;
    for (std::size_t r = 0; r < edges.rows.size(); ++r) {
        auto s = index.find(edges.rows[r][cs]);
        auto t = index.find(edges.rows[r][cd]);
        if (s == index.end() || t == index.end())
            throw DataError(fmt::format("{}: row {} refers to unknown unit id", edges.name, r + 1));
        list.push_back({s->second, t->second});
    }

    SourceDataset data(std::move(y), std::move(d), std::move(x), std::move(kinds), list, directed);
    for (const auto& col : spec.numeric) {
        const auto c = units.column(col);
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i)
            v[i] = units.number(i, c);
        data.numeric[col] = std::move(v);
    }
    if (spec.block) {
        const auto c = units.column(*spec.block);
        std::vector<int> b(n);
        for (std::size_t i = 0; i < n; ++i)
            b[i] = units.integer(i, c);
        data.blocks = std::move(b);
    }
    return data;
}

} // namespace netshift
