#include "cli.hpp"

#include "netshift/bootstrap.hpp"
#include "netshift/bounds.hpp"
#include "netshift/dist.hpp"
#include "netshift/errors.hpp"
#include "netshift/graph.hpp"
#include "netshift/io.hpp"
#include "netshift/regression.hpp"
#include "netshift/rng.hpp"
#include "netshift/simulation.hpp"

#include <CLI11.hpp>
#include <fmt/format.h>
#include <nlohmann/json.hpp>

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>

namespace netshift::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Context {
    json config;
    fs::path base;
    fs::path out;
    std::uint64_t seed = 1;
    std::ostream* log = nullptr;
};

void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    if (!j.is_object())
        throw ConfigError(fmt::format("{} must be a JSON object", where));
    for (const auto& [key, value] : j.items())
        if (!allowed.count(key))
            throw ConfigError(fmt::format("unknown key '{}' in {}", key, where));
}

template <typename T>
T get(const json& j, const std::string& key, const std::string& where) {
    if (!j.contains(key))
        throw ConfigError(fmt::format("missing key '{}' in {}", key, where));
    try {
        return j.at(key).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("key '{}' in {} has the wrong type", key, where));
    }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
    return j.contains(key) ? get<T>(j, key, where) : fallback;
}

fs::path resolve(const Context& ctx, const std::string& p) {
    fs::path path(p);
    return path.is_absolute() ? path : ctx.base / path;
}

CovariateKind kind_from_string(const std::string& s) {
    if (s == "categorical")
        return CovariateKind::Categorical;
    if (s == "ordered")
        return CovariateKind::Ordered;
    throw ConfigError(fmt::format("covariate kind '{}' is neither categorical nor ordered", s));
}

DatasetSpec dataset_spec(const Context& ctx, const json& j, const std::string& where, bool need_outcome) {
    check_keys(j, {"units", "edges", "directed", "id", "outcome", "treatment", "covariates", "numeric", "block"},
               where);
    DatasetSpec s;
    s.units = resolve(ctx, get<std::string>(j, "units", where));
    s.edges = resolve(ctx, get<std::string>(j, "edges", where));
    s.directed = get_or<bool>(j, "directed", false, where);
    s.id = get_or<std::string>(j, "id", "id", where);
    s.outcome = get_or<std::string>(j, "outcome", need_outcome ? "Y" : "", where);
    s.treatment = get_or<std::string>(j, "treatment", need_outcome ? "D" : "", where);
    if (j.contains("covariates")) {
        for (const auto& c : j.at("covariates")) {
            check_keys(c, {"name", "kind"}, where + ".covariates");
            s.covariates.push_back({get<std::string>(c, "name", where + ".covariates"),
                                    kind_from_string(get_or<std::string>(c, "kind", "categorical", where))});
        }
    }
    s.numeric = get_or<std::vector<std::string>>(j, "numeric", {}, where);
    if (j.contains("block"))
        s.block = get<std::string>(j, "block", where);
    if (s.block && std::find(s.numeric.begin(), s.numeric.end(), *s.block) != s.numeric.end())
        throw ConfigError("block column is also listed as numeric");
    return s;
}

DiscreteDist dist_from_config(const json& j, const std::string& where) {
    check_keys(j, {"support", "mass"}, where);
    return DiscreteDist(get<std::vector<int>>(j, "support", where), get<std::vector<double>>(j, "mass", where));
}

std::string csv_line(const std::vector<std::string>& fields) {
    std::string s;
    for (std::size_t k = 0; k < fields.size(); ++k) {
        if (k)
            s += ',';
        s += fields[k];
    }
    s += '\n';
    return s;
}

json dist_json(const DiscreteDist& d) {
    json j;
    to_json(j, d);
    return j;
}

// Pretty JSON with a trailing newline; key order is nlohmann's sorted order.
std::string dump(const json& j) { return j.dump(2) + "\n"; }

// ---------------------------------------------------------------- bounds

struct Target {
    std::vector<Cell> cells;
    std::vector<double> p;
    std::vector<std::optional<DiscreteDist>> degree_dist;
};

Target load_target(const Context& ctx, const json& j, const std::vector<CovariateColumn>& covs) {
    const std::string where = "target";
    check_keys(j, {"cells", "units", "degree"}, where);
    Target t;
    if (j.contains("cells") == j.contains("units"))
        throw ConfigError("target needs exactly one of 'cells' or 'units'");
    if (j.contains("cells")) {
        if (j.contains("degree"))
            throw ConfigError("target.degree applies to target.units only");
        for (const auto& c : j.at("cells")) {
            check_keys(c, {"cell", "p", "degrees"}, "target.cells");
            t.cells.push_back(get<Cell>(c, "cell", "target.cells"));
            t.p.push_back(get<double>(c, "p", "target.cells"));
            if (c.contains("degrees"))
                t.degree_dist.emplace_back(dist_from_config(c.at("degrees"), "target.cells.degrees"));
            else
                t.degree_dist.emplace_back(std::nullopt);
        }
    } else {
        const CsvTable units = read_csv(resolve(ctx, get<std::string>(j, "units", where)));
        std::vector<std::size_t> cols;
        for (const auto& c : covs)
            cols.push_back(units.column(c.name));
        std::optional<std::size_t> gcol;
        if (j.contains("degree"))
            gcol = units.column(get<std::string>(j, "degree", where));
        std::map<Cell, std::vector<int>> groups;
        for (std::size_t r = 0; r < units.rows.size(); ++r) {
            Cell x;
            for (auto c : cols)
                x.push_back(units.integer(r, c));
            auto& g = groups[x];
            if (gcol)
                g.push_back(units.integer(r, *gcol));
            else
                g.push_back(0);
        }
        if (groups.empty())
            throw DataError(fmt::format("{}: no target units", units.name));
        for (const auto& [x, g] : groups) {
            t.cells.push_back(x);
            t.p.push_back(static_cast<double>(g.size()) / static_cast<double>(units.rows.size()));
            if (gcol)
                t.degree_dist.emplace_back(DiscreteDist::empirical(g));
            else
                t.degree_dist.emplace_back(std::nullopt);
        }
    }
    std::set<Cell> seen;
    for (const auto& x : t.cells) {
        if (x.size() != covs.size())
            throw ConfigError(fmt::format("target cell ({}) has {} codes, {} covariates declared", cell_label(x),
                                          x.size(), covs.size()));
        if (!seen.insert(x).second)
            throw ConfigError(fmt::format("target cell ({}) listed twice", cell_label(x)));
    }
    return t;
}

Bandwidth choose_bandwidth(const json& j, const SourceDataset& data, const BasisSpec& basis, json& audit) {
    const std::string where = "bandwidth";
    check_keys(j, {"categorical", "ordered", "cv"}, where);
    if (j.contains("cv")) {
        if (j.contains("categorical") || j.contains("ordered"))
            throw ConfigError("bandwidth: give either fixed values or a cv block");
        const auto& cv = j.at("cv");
        check_keys(cv, {"categorical", "ordered", "scale"}, "bandwidth.cv");
        std::vector<double> steps;
        for (int k = 0; k <= 20; ++k)
            steps.push_back(k / 20.0);
        const auto bc = get_or<std::vector<double>>(cv, "categorical", steps, "bandwidth.cv");
        const auto bo = get_or<std::vector<double>>(cv, "ordered", steps, "bandwidth.cv");
        const double scale = get_or<double>(cv, "scale", 1.0, "bandwidth.cv");
        if (!(scale > 0.0))
            throw ConfigError("bandwidth.cv.scale must be positive");
        const auto res = cv_bandwidth(data, basis, bandwidth_grid(bc, bo));
        audit["cv"] = {{"categorical", res.best.categorical}, {"ordered", res.best.ordered}, {"scale", scale}};
        return {std::min(1.0, scale * res.best.categorical), std::min(1.0, scale * res.best.ordered)};
    }
    return {get<double>(j, "categorical", where), get_or<double>(j, "ordered", 0.0, where)};
}

struct KernelChoice {
    bool identity = true;
    std::vector<std::string> columns;
    double c_d = 4.0;
    bool cross_block_infinite = true;
    PsdPolicy psd = PsdPolicy::Fail;
};

int cmd_bounds(Context& ctx, std::ostream& out) {
    const json& cfg = ctx.config;
    check_keys(cfg, {"data", "basis", "exposure", "bandwidth", "target", "reference", "degrees", "deltas", "order",
                     "monotone", "bootstrap", "decomposition", "seed", "out"},
               "bounds config");
    const auto dspec = dataset_spec(ctx, get<json>(cfg, "data", "bounds config"), "data", true);
    const SourceDataset data = load_dataset(dspec);

    BasisSpec basis;
    basis.family = basis_family_from_string(get_or<std::string>(cfg, "basis", "default", "bounds config"));
    basis.exposure = exposure_family_from_string(get_or<std::string>(cfg, "exposure", "ratio", "bounds config"));

    json audit;
    const Bandwidth bw = choose_bandwidth(get<json>(cfg, "bandwidth", "bounds config"), data, basis, audit);
    const Target target = load_target(ctx, get<json>(cfg, "target", "bounds config"), dspec.covariates);

    // Degree grid.
    std::vector<int> grid;
    if (cfg.contains("degrees")) {
        grid = get<std::vector<int>>(cfg, "degrees", "bounds config");
        if (grid.empty() || !std::is_sorted(grid.begin(), grid.end()) ||
            std::adjacent_find(grid.begin(), grid.end()) != grid.end())
            throw ConfigError("degrees must be a nonempty increasing list");
    } else {
        int gmax = *std::max_element(data.degree().begin(), data.degree().end());
        for (const auto& d : target.degree_dist)
            if (d)
                gmax = std::max(gmax, d->support().back());
        for (int g = 0; g <= gmax; ++g)
            grid.push_back(g);
    }

    const double order = get_or<double>(cfg, "order", 2.0, "bounds config");
    const bool monotone = get_or<bool>(cfg, "monotone", false, "bounds config");
    const auto deltas = get<std::vector<double>>(cfg, "deltas", "bounds config");
    if (deltas.empty())
        throw ConfigError("deltas must not be empty");
    for (double d : deltas)
        if (!(d >= 0.0) || !std::isfinite(d))
            throw ConfigError(fmt::format("radius {} must be finite and nonnegative", d));

    // Reference distributions per target cell.
    std::vector<DiscreteDist> reference;
    const json ref = cfg.contains("reference") ? cfg.at("reference") : json("source");
    for (std::size_t k = 0; k < target.cells.size(); ++k) {
        const Cell& x = target.cells[k];
        if (ref.is_string()) {
            const auto s = ref.get<std::string>();
            if (s == "source") {
                if (target.p[k] == 0.0 && data.count_in_cell(x) == 0)
                    reference.push_back(DiscreteDist::uniform(grid));
                else
                    reference.push_back(degree_dist_conditional(data, x).on_grid(grid));
            } else if (s == "uniform") {
                reference.push_back(DiscreteDist::uniform(grid));
            } else {
                throw ConfigError(fmt::format("reference '{}' is not source, uniform or an object", s));
            }
        } else {
            check_keys(ref, {"cells"}, "reference");
            std::optional<DiscreteDist> found;
            for (const auto& c : ref.at("cells")) {
                check_keys(c, {"cell", "support", "mass"}, "reference.cells");
                if (get<Cell>(c, "cell", "reference.cells") == x)
                    found = DiscreteDist(get<std::vector<int>>(c, "support", "reference.cells"),
                                         get<std::vector<double>>(c, "mass", "reference.cells"));
            }
            if (!found)
                throw ConfigError(fmt::format("no reference distribution for cell ({})", cell_label(x)));
            reference.push_back(found->on_grid(grid));
        }
    }

    std::vector<Cell> fit_cells;
    std::map<Cell, double> p_target;
    for (std::size_t k = 0; k < target.cells.size(); ++k) {
        p_target[target.cells[k]] = target.p[k];
        if (target.p[k] > 0.0)
            fit_cells.push_back(target.cells[k]);
    }
    const VCFit fit = fit_vc(data, basis, bw, fit_cells);
    for (const auto& w : fit.warnings)
        *ctx.log << "warning: " << w << '\n';
    const ContrastVector m = contrast_vector(fit, p_target, grid);
    // contrast_vector orders cells as the map does; align references.
    std::vector<DiscreteDist> centers;
    std::vector<double> props;
    std::vector<std::optional<DiscreteDist>> tdist;
    for (const auto& x : m.cells) {
        const auto k = static_cast<std::size_t>(std::find(target.cells.begin(), target.cells.end(), x) -
                                                target.cells.begin());
        centers.push_back(reference[k]);
        props.push_back(target.p[k]);
        tdist.push_back(target.degree_dist[k]);
    }
    auto balls_for = [&](double delta) {
        std::vector<BallSpec> b;
        for (const auto& c : centers)
            b.push_back({c, delta, order, monotone});
        return b;
    };

    // Known target degree distributions give a plug-in point and distances.
    std::optional<double> atte;
    json distances = json::array();
    if (std::all_of(tdist.begin(), tdist.end(), [](const auto& d) { return d.has_value(); })) {
        std::vector<DiscreteDist> pis;
        for (std::size_t k = 0; k < tdist.size(); ++k) {
            pis.push_back(tdist[k]->on_grid(grid));
            distances.push_back({{"cell", cell_label(m.cells[k])}, {"w", wasserstein(pis.back(), centers[k], order)}});
        }
        atte = atte_point(m, pis);
    }

    // Bootstrap settings.
    std::optional<KernelChoice> kernel;
    std::size_t replicates = 0;
    double alpha = 0.05, face_scale = 1.0;
    if (cfg.contains("bootstrap")) {
        const auto& b = cfg.at("bootstrap");
        check_keys(b, {"replicates", "alpha", "kernel", "face_scale"}, "bootstrap");
        replicates = get_or<std::size_t>(b, "replicates", 500, "bootstrap");
        alpha = get_or<double>(b, "alpha", 0.05, "bootstrap");
        face_scale = get_or<double>(b, "face_scale", 1.0, "bootstrap");
        if (replicates == 0)
            throw ConfigError("bootstrap.replicates must be positive");
        if (!(alpha > 0.0 && alpha < 1.0))
            throw ConfigError("bootstrap.alpha must lie in (0, 1)");
        if (monotone)
            throw ConfigError("bootstrap faces are defined for the unrestricted ball only; drop 'monotone'");
        KernelChoice kc;
        const json k = b.contains("kernel") ? b.at("kernel") : json("identity");
        if (k.is_string()) {
            if (k.get<std::string>() != "identity")
                throw ConfigError("bootstrap.kernel must be 'identity' or an object");
        } else {
            check_keys(k, {"columns", "c_d", "cross_block_infinite", "psd_policy"}, "bootstrap.kernel");
            kc.identity = false;
            kc.columns = get<std::vector<std::string>>(k, "columns", "bootstrap.kernel");
            kc.c_d = get_or<double>(k, "c_d", 4.0, "bootstrap.kernel");
            kc.cross_block_infinite = get_or<bool>(k, "cross_block_infinite", true, "bootstrap.kernel");
            kc.psd = psd_policy_from_string(get_or<std::string>(k, "psd_policy", "fail", "bootstrap.kernel"));
        }
        kernel = kc;
    }

    // Point bounds per radius.
    std::string bounds_csv;
    {
        std::vector<std::string> head{"delta", "q", "lower", "upper"};
        for (const auto& x : m.cells)
            head.push_back("lower_" + cell_label(x));
        for (const auto& x : m.cells)
            head.push_back("upper_" + cell_label(x));
        bounds_csv = csv_line(head);
    }
    std::vector<PerCellBounds> uppers, lowers;
    json graphic = json::array();
    for (double delta : deltas) {
        const auto balls = balls_for(delta);
        uppers.push_back(cell_bounds(m, balls, Sense::Upper));
        lowers.push_back(cell_bounds(m, balls, Sense::Lower));
        std::vector<std::string> row{format_number(delta), format_number(order), format_number(lowers.back().total),
                                     format_number(uppers.back().total)};
        for (double v : lowers.back().per_cell)
            row.push_back(format_number(v));
        for (double v : uppers.back().per_cell)
            row.push_back(format_number(v));
        bounds_csv += csv_line(row);

        // Graphicality of the maximizing degree distribution, source cell size.
        for (std::size_t k = 0; k < m.cells.size(); ++k) {
            if (props[k] == 0.0)
                continue;
            const auto sol = solve_cell_primal(m.cell_values(k), grid, balls[k], Sense::Upper);
            const Eigen::VectorXd cs = sol.plan.col_sums();
            std::vector<double> mass(cs.data(), cs.data() + cs.size());
            for (auto& v : mass)
                v = std::max(v, 0.0);
            const DiscreteDist argmax(grid, mass);
            const std::size_t nx = std::max<std::size_t>(data.count_in_cell(m.cells[k]), 1);
            const auto seq = sequence_from_distribution(argmax, nx);
            bool ok = false;
            std::string note;
            try {
                ok = is_graphic(seq);
            } catch (const DataError& e) {
                note = e.what();
            }
            json g = {{"delta", delta}, {"cell", cell_label(m.cells[k])}, {"units", nx},
                      {"distribution", dist_json(argmax)}, {"graphic", ok}};
            if (!note.empty())
                g["note"] = note;
            graphic.push_back(g);
        }
    }

    fs::create_directories(ctx.out);
    write_file(ctx.out / "bounds.csv", bounds_csv);
    write_file(ctx.out / "fit.json", dump(to_json(fit)));

    std::vector<BoundCI> cis;
    json faces_json = json::array();
    if (kernel) {
        if (grid.size() > kMaxFaceGrid)
            throw ConfigError(fmt::format("bootstrap faces support at most {} degree values, grid has {}",
                                          kMaxFaceGrid, grid.size()));
        BootKernel kern = BootKernel::make_identity(data.size());
        if (!kernel->identity) {
            auto dm = path_weighted_distance(data, kernel->columns, kernel->cross_block_infinite);
            dm.bandwidth = bandwidth_rule(dm, data.degree(), kernel->c_d);
            audit["kernel_bandwidth"] = dm.bandwidth;
            kern = build_kernel(dm, kernel->psd);
            if (kern.clipped_count > 0)
                *ctx.log << fmt::format("warning: bootstrap kernel had {} negative eigenvalues, clipped\n",
                                        kern.clipped_count);
        }
        audit["kernel"] = kernel_diagnostics(kern);
        std::vector<DeltaFaces> radii;
        for (double delta : deltas) {
            radii.push_back(estimate_faces(m, props, balls_for(delta), data.size(), face_scale));
            json per_cell = json::array();
            for (const auto& cf : radii.back().cells) {
                if (cf.proportion == 0.0)
                    continue;
                json fu, fl;
                to_json(fu, cf.upper);
                to_json(fl, cf.lower);
                per_cell.push_back({{"cell", cell_label(cf.cell)}, {"upper", fu}, {"lower", fl}});
            }
            faces_json.push_back({{"delta", delta}, {"cells", per_cell}});
        }
        BootstrapOptions opts;
        opts.replicates = replicates;
        opts.alpha = alpha;
        opts.seed = ctx.seed;
        cis = bootstrap_bounds(fit, grid, radii, kern, opts);

        std::string ci_csv = csv_line({"delta", "q", "side", "point", "ci_lo", "ci_hi", "B", "alpha", "seed"});
        for (const auto& ci : cis)
            for (const auto& [side, s] : {std::pair{"lower", ci.lower}, std::pair{"upper", ci.upper}})
                ci_csv += csv_line({format_number(ci.delta), format_number(ci.order), side, format_number(s.point),
                                    format_number(s.lo), format_number(s.hi), std::to_string(ci.replicates),
                                    format_number(ci.alpha), std::to_string(ci.seed)});
        write_file(ctx.out / "ci.csv", ci_csv);
    }

    // Band: point bounds widened by the outer half of each side's CI.
    {
        std::vector<std::string> head{"delta", "lower", "upper", "band_lo", "band_hi"};
        if (atte)
            head.push_back("atte");
        std::string band = csv_line(head);
        for (std::size_t i = 0; i < deltas.size(); ++i) {
            const double lo = cis.empty() ? lowers[i].total : cis[i].lower.lo;
            const double hi = cis.empty() ? uppers[i].total : cis[i].upper.hi;
            std::vector<std::string> row{format_number(deltas[i]), format_number(lowers[i].total),
                                         format_number(uppers[i].total), format_number(lo), format_number(hi)};
            if (atte)
                row.push_back(format_number(*atte));
            band += csv_line(row);
        }
        write_file(ctx.out / "band.csv", band);
    }

    if (get_or<bool>(cfg, "decomposition", false, "bounds config")) {
        std::string dec = csv_line({"delta", "q", "component", "lower", "upper"});
        for (auto [kind, name] : {std::pair{ContrastKind::Direct, "direct"}, std::pair{ContrastKind::Spillover, "spillover"}}) {
            const ContrastVector mk = contrast_vector(fit, p_target, grid, kind);
            for (double delta : deltas) {
                const auto balls = balls_for(delta);
                dec += csv_line({format_number(delta), format_number(order), name,
                                 format_number(cell_bounds(mk, balls, Sense::Lower).total),
                                 format_number(cell_bounds(mk, balls, Sense::Upper).total)});
            }
        }
        write_file(ctx.out / "decomposition.csv", dec);
    }

    audit["units"] = data.size();
    audit["edges"] = data.edges().size();
    audit["degrees"] = grid;
    audit["bandwidth"] = {{"categorical", bw.categorical}, {"ordered", bw.ordered}};
    audit["seed"] = ctx.seed;
    audit["graphicality"] = graphic;
    audit["warnings"] = fit.warnings;
    json refs = json::array();
    for (std::size_t k = 0; k < m.cells.size(); ++k)
        refs.push_back({{"cell", cell_label(m.cells[k])}, {"p", props[k]}, {"reference", dist_json(centers[k])}});
    audit["cells"] = refs;
    if (atte) {
        audit["atte_point"] = *atte;
        audit["target_distance"] = distances;
    }
    if (kernel) {
        audit["faces"] = faces_json;
        json fails = json::array();
        for (const auto& ci : cis)
            fails.push_back({{"delta", ci.delta}, {"failed", ci.failed}});
        audit["bootstrap_failures"] = fails;
    }
    write_file(ctx.out / "audit.json", dump(audit));

    out << fmt::format("{:>10} {:>14} {:>14}", "delta", "lower", "upper");
    if (!cis.empty())
        out << fmt::format(" {:>14} {:>14}", "lower_ci_lo", "upper_ci_hi");
    out << '\n';
    for (std::size_t i = 0; i < deltas.size(); ++i) {
        out << fmt::format("{:>10.4g} {:>14.6f} {:>14.6f}", deltas[i], lowers[i].total, uppers[i].total);
        if (!cis.empty())
            out << fmt::format(" {:>14.6f} {:>14.6f}", cis[i].lower.lo, cis[i].upper.hi);
        out << '\n';
    }
    if (atte)
        out << fmt::format("plug-in ATTE with the target degree distributions: {:.6f}\n", *atte);
    out << "wrote " << ctx.out.string() << '\n';
    return 0;
}

// ----------------------------------------------------------- wasserstein

std::map<Cell, DiscreteDist> distributions_from_file(const fs::path& path) {
    std::ifstream in(path);
    if (!in)
        throw DataError(fmt::format("cannot open '{}'", path.string()));
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw DataError(fmt::format("{}: invalid JSON ({})", path.string(), e.what()));
    }
    const std::string where = path.string();
    try {
        check_keys(j, {"cells"}, where);
        std::map<Cell, DiscreteDist> out;
        for (const auto& c : j.at("cells")) {
            check_keys(c, {"cell", "support", "mass"}, where);
            out.emplace(get<Cell>(c, "cell", where),
                        DiscreteDist(get<std::vector<int>>(c, "support", where), get<std::vector<double>>(c, "mass", where)));
        }
        return out;
    } catch (const ConfigError& e) {
        throw DataError(e.what());
    }
}

struct CellSample {
    std::map<Cell, std::vector<int>> degrees;
};

CellSample degrees_by_cell(const SourceDataset& data) {
    CellSample s;
    for (std::size_t i = 0; i < data.size(); ++i)
        s.degrees[data.covariates()[i]].push_back(data.degree()[i]);
    return s;
}

int cmd_wasserstein(Context& ctx, std::ostream& out) {
    const json& cfg = ctx.config;
    const std::string where = "wasserstein config";
    check_keys(cfg, {"source", "target", "order", "seed", "out"}, where);
    const double order = get_or<double>(cfg, "order", 2.0, where);

    auto side = [&](const std::string& key, std::map<Cell, DiscreteDist>& dists, std::map<Cell, std::size_t>& counts,
                    std::vector<int>& pooled) {
        const json j = get<json>(cfg, key, where);
        if (j.is_object() && j.contains("distributions")) {
            check_keys(j, {"distributions"}, key);
            dists = distributions_from_file(resolve(ctx, get<std::string>(j, "distributions", key)));
            return;
        }
        const auto data = load_dataset(dataset_spec(ctx, j, key, false));
        for (const auto& [x, g] : degrees_by_cell(data).degrees) {
            dists.emplace(x, DiscreteDist::empirical(g));
            counts[x] = g.size();
        }
        pooled = data.degree();
    };
    std::map<Cell, DiscreteDist> src, tgt;
    std::map<Cell, std::size_t> nsrc, ntgt;
    std::vector<int> psrc, ptgt;
    side("source", src, nsrc, psrc);
    side("target", tgt, ntgt, ptgt);

    std::string csv = csv_line({"cell", "n_source", "n_target", "w"});
    auto count = [](const std::map<Cell, std::size_t>& c, const Cell& x) {
        auto it = c.find(x);
        return it == c.end() ? std::string() : std::to_string(it->second);
    };
    out << fmt::format("{:>12} {:>14}\n", "cell", fmt::format("W_{:g}", order));
    for (const auto& [x, pi] : tgt) {
        auto it = src.find(x);
        if (it == src.end()) {
            *ctx.log << fmt::format("warning: target cell ({}) has no source counterpart\n", cell_label(x));
            csv += csv_line({cell_label(x), "", count(ntgt, x), ""});
            continue;
        }
        const double w = wasserstein(pi, it->second, order);
        csv += csv_line({cell_label(x), count(nsrc, x), count(ntgt, x), format_number(w)});
        out << fmt::format("{:>12} {:>14.6f}\n", cell_label(x), w);
    }
    if (!psrc.empty() && !ptgt.empty()) {
        const double w = wasserstein(DiscreteDist::empirical(ptgt), DiscreteDist::empirical(psrc), order);
        csv += csv_line({"all", std::to_string(psrc.size()), std::to_string(ptgt.size()), format_number(w)});
        out << fmt::format("{:>12} {:>14.6f}\n", "all", w);
    }
    fs::create_directories(ctx.out);
    write_file(ctx.out / "wasserstein.csv", csv);
    return 0;
}

// -------------------------------------------------------------- simulate

int cmd_simulate(Context& ctx, std::ostream& out) {
    const json& cfg = ctx.config;
    const std::string where = "simulate config";
    check_keys(cfg, {"n", "rho", "degree_law", "measurement_error", "basis", "exposure", "deltas", "order", "reference",
                     "c_b", "c_d", "identity_kernel", "faces", "alphas", "bootstrap", "replications", "burnin",
                     "cv_grid", "bandwidth", "face_scale", "psd_policy", "seed", "out"},
               where);
    DGPConfig d;
    d.n = get_or<std::size_t>(cfg, "n", d.n, where);
    d.rho = get_or<double>(cfg, "rho", d.rho, where);
    d.degree_law = get_or<std::vector<double>>(cfg, "degree_law", d.degree_law, where);
    d.measurement_error = get_or<double>(cfg, "measurement_error", d.measurement_error, where);
    d.basis.family = basis_family_from_string(get_or<std::string>(cfg, "basis", "default", where));
    d.basis.exposure = exposure_family_from_string(get_or<std::string>(cfg, "exposure", "ratio", where));
    d.deltas = get_or<std::vector<double>>(cfg, "deltas", d.deltas, where);
    d.order = get_or<double>(cfg, "order", d.order, where);
    d.reference = get_or<std::vector<double>>(cfg, "reference", std::vector<double>(d.degree_law.size(),
                                                                                      1.0 / static_cast<double>(d.degree_law.size())), where);
    d.c_b = get_or<std::vector<double>>(cfg, "c_b", d.c_b, where);
    d.c_d = get_or<std::vector<double>>(cfg, "c_d", d.c_d, where);
    d.identity_kernel = get_or<bool>(cfg, "identity_kernel", d.identity_kernel, where);
    if (cfg.contains("faces")) {
        d.faces.clear();
        for (const auto& f : get<std::vector<std::string>>(cfg, "faces", where)) {
            if (f == "est")
                d.faces.push_back(FaceMode::Estimated);
            else if (f == "true")
                d.faces.push_back(FaceMode::True);
            else
                throw ConfigError(fmt::format("face mode '{}' is neither est nor true", f));
        }
    }
    d.alphas = get_or<std::vector<double>>(cfg, "alphas", d.alphas, where);
    d.bootstrap = get_or<std::size_t>(cfg, "bootstrap", d.bootstrap, where);
    d.replications = get_or<std::size_t>(cfg, "replications", d.replications, where);
    d.burnin = get_or<std::size_t>(cfg, "burnin", d.burnin, where);
    if (cfg.contains("cv_grid")) {
        const auto& g = cfg.at("cv_grid");
        check_keys(g, {"categorical", "ordered"}, "cv_grid");
        d.cv_grid = bandwidth_grid(get<std::vector<double>>(g, "categorical", "cv_grid"),
                                   get<std::vector<double>>(g, "ordered", "cv_grid"));
    }
    if (cfg.contains("bandwidth")) {
        const auto& b = cfg.at("bandwidth");
        check_keys(b, {"categorical", "ordered"}, "bandwidth");
        d.bandwidth = Bandwidth{get<double>(b, "categorical", "bandwidth"), get<double>(b, "ordered", "bandwidth")};
    }
    d.face_threshold_scale = get_or<double>(cfg, "face_scale", d.face_threshold_scale, where);
    d.psd = psd_policy_from_string(get_or<std::string>(cfg, "psd_policy", "clip", where));
    d.seed = ctx.seed;
    d.validate();

    const auto rep = coverage_experiment(d, [&](std::size_t done, std::size_t total) {
        if (done == total || done % 10 == 0)
            *ctx.log << fmt::format("replication {}/{}\n", done, total);
    });
    fs::create_directories(ctx.out);
    std::ostringstream csv;
    rep.write_csv(csv);
    write_file(ctx.out / "coverage.csv", csv.str());
    json meta = {{"n", d.n},
                 {"rho", d.rho},
                 {"seed", d.seed},
                 {"replications", d.replications},
                 {"bootstrap", d.bootstrap},
                 {"cv_bandwidth", {{"categorical", rep.cv_bandwidth.categorical}, {"ordered", rep.cv_bandwidth.ordered}}},
                 {"failed_bootstrap_replicates", rep.failed_replicates},
                 {"min_kernel_eigenvalue", rep.min_kernel_eigenvalue},
                 {"max_clipped_share", rep.max_clipped_share},
                 {"psd_policy", to_string(d.psd)}};
    write_file(ctx.out / "simulate.json", dump(meta));
    out << csv.str();
    out << fmt::format("cv bandwidth ({:.4f}, {:.4f}), {:.1f} s\n", rep.cv_bandwidth.categorical,
                       rep.cv_bandwidth.ordered, rep.seconds);
    return 0;
}

// ------------------------------------------------------------ graphcheck

int cmd_graphcheck(Context& ctx, std::ostream& out) {
    const json& cfg = ctx.config;
    const std::string where = "graphcheck config";
    check_keys(cfg, {"sequence", "distribution", "face", "n", "swaps", "seed", "out"}, where);
    const int given = static_cast<int>(cfg.contains("sequence")) + static_cast<int>(cfg.contains("distribution")) +
                      static_cast<int>(cfg.contains("face"));
    if (given != 1)
        throw ConfigError("graphcheck needs exactly one of 'sequence', 'distribution' or 'face'");
    const std::size_t swaps = get_or<std::size_t>(cfg, "swaps", 0, where);

    std::vector<std::pair<std::string, DiscreteDist>> dists;
    std::vector<DegreeSequence> seqs;
    std::vector<std::string> labels;
    if (cfg.contains("sequence")) {
        seqs.push_back(get<DegreeSequence>(cfg, "sequence", where));
        labels.push_back("sequence");
    } else {
        const auto n = get<std::size_t>(cfg, "n", where);
        if (n == 0)
            throw ConfigError("n must be positive");
        if (cfg.contains("distribution")) {
            const json& dj = cfg.at("distribution");
            if (dj.is_string()) {
                std::ifstream in(resolve(ctx, dj.get<std::string>()));
                if (!in)
                    throw DataError(fmt::format("cannot open '{}'", dj.get<std::string>()));
                json file;
                try {
                    in >> file;
                } catch (const json::exception&) {
                    throw DataError(fmt::format("'{}' is not valid JSON", dj.get<std::string>()));
                }
                dists.emplace_back("distribution", dist_from_json(file));
            } else {
                dists.emplace_back("distribution", dist_from_config(dj, "distribution"));
            }
        } else {
            std::ifstream in(resolve(ctx, get<std::string>(cfg, "face", where)));
            if (!in)
                throw DataError("cannot open the face file");
            json face;
            try {
                in >> face;
            } catch (const json::exception&) {
                throw DataError("face file is not valid JSON");
            }
            if (!face.contains("plans"))
                throw DataError("face file has no 'plans'");
            std::size_t k = 0;
            for (const auto& p : face.at("plans")) {
                const auto degrees = p.at("degrees").get<std::vector<int>>();
                const auto gamma = p.at("gamma").get<std::vector<std::vector<double>>>();
                std::vector<double> mass(degrees.size(), 0.0);
                for (const auto& row : gamma)
                    for (std::size_t c = 0; c < row.size() && c < mass.size(); ++c)
                        mass[c] += std::max(0.0, row[c]);
                dists.emplace_back(fmt::format("plan{}", k++), DiscreteDist(degrees, mass));
            }
        }
        for (const auto& [label, d] : dists) {
            seqs.push_back(sequence_from_distribution(d, n));
            labels.push_back(label);
        }
    }

    fs::create_directories(ctx.out);
    json report = json::array();
    for (std::size_t k = 0; k < seqs.size(); ++k) {
        const auto& seq = seqs[k];
        json r = {{"label", labels[k]}, {"sequence", seq}};
        bool graphic = false;
        try {
            graphic = is_graphic(seq);
        } catch (const DataError& e) {
            r["note"] = e.what();
        }
        r["graphic"] = graphic;
        std::vector<Edge> edges;
        auto rng = substream(ctx.seed, k, StreamTag::Graph);
        if (graphic) {
            edges = realize(seq, &rng, swaps);
            r["method"] = "havel-hakimi";
        } else {
            std::vector<double> w(seq.begin(), seq.end());
            auto g = chung_lu(w, rng);
            edges = std::move(g.edges);
            r["method"] = "chung-lu";
            r["cap_binds"] = g.cap_binds;
            if (g.cap_binds)
                *ctx.log << fmt::format("warning: {}: Chung-Lu probabilities capped at 1, degrees run low\n", labels[k]);
        }
        r["edges"] = edges.size();
        const std::string file = fmt::format("edges_{}.csv", labels[k]);
        std::string csv = csv_line({"src", "dst"});
        for (const auto& e : edges)
            csv += csv_line({std::to_string(e.src), std::to_string(e.dst)});
        write_file(ctx.out / file, csv);
        r["edge_file"] = file;
        report.push_back(r);
        out << fmt::format("{}: {} ({} edges via {})\n", labels[k], graphic ? "graphic" : "not graphic", edges.size(),
                           r["method"].get<std::string>());
    }
    write_file(ctx.out / "graphcheck.json", dump(report));
    return 0;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Wasserstein-ball bounds on network treatment effects under degree shift", "netshift"};
    app.require_subcommand(1);
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out_dir;
    std::string chosen;
    for (const char* name : {"bounds", "wasserstein", "simulate", "graphcheck"}) {
        auto* sub = app.add_subcommand(name);
        sub->add_option("--config", config, "JSON configuration file")->required();
        sub->add_option("--seed", seed, "random seed (overrides the config)");
        sub->add_option("--out", out_dir, "output directory (overrides the config)");
        sub->callback([&chosen, name] { chosen = name; });
    }

    std::vector<std::string> rev(args.rbegin(), args.rend());
    try {
        app.parse(rev);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        return 2;
    }

    try {
        Context ctx;
        ctx.log = &err;
        std::ifstream in(config);
        if (!in)
            throw ConfigError(fmt::format("cannot open configuration '{}'", config));
        try {
            in >> ctx.config;
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("configuration '{}' is not valid JSON: {}", config, e.what()));
        }
        if (!ctx.config.is_object())
            throw ConfigError("configuration must be a JSON object");
        ctx.base = fs::path(config).parent_path();
        ctx.seed = seed ? *seed : get_or<std::uint64_t>(ctx.config, "seed", 1, "config");
        if (!out_dir.empty())
            ctx.out = out_dir;
        else if (ctx.config.contains("out"))
            ctx.out = resolve(ctx, get<std::string>(ctx.config, "out", "config"));
        else
            ctx.out = ".";

        if (chosen == "bounds")
            return cmd_bounds(ctx, out);
        if (chosen == "wasserstein")
            return cmd_wasserstein(ctx, out);
        if (chosen == "simulate")
            return cmd_simulate(ctx, out);
        return cmd_graphcheck(ctx, out);
    } catch (const ConfigError& e) {
        err << "config error: " << e.what() << '\n';
        return 2;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 4;
    } catch (const fs::filesystem_error& e) {
        err << "data error: " << e.what() << '\n';
        return 3;
    }
}

} // namespace netshift::cli
