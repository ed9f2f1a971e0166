#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "bflab/backflow/backflow.hpp"
#include "bflab/cli/scenario.hpp"
#include "bflab/optimizer/optimizer.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/transport/csv.hpp"
#include "bflab/transport/transport.hpp"

namespace fs = std::filesystem;
using namespace bflab;
using cli::json;

namespace {

constexpr int exit_usage = 1;
constexpr int exit_numeric = 2;

std::string utc_now()
{
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

void put(std::ostream& out, double v)
{
    char buf[64];
    const auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.write(buf, r.ptr - buf);
}

json intervals_us(const std::vector< backflow::Interval >& iv)
{
    json out = json::array();
    for (const auto& i : iv)
        out.push_back({i.lo, i.hi});
    return out;
}

json tolerances()
{
    return {{"violation_floor", backflow::violation_floor},
            {"edge_resolution_of_step", 1e-3},
            {"classical_bound_rel_tol", 1e-10},
            {"boundary_threshold", phasespace::boundary_threshold},
            {"marginal_mass_tolerance", transport::MarginalPair::mass_tolerance}};
}

void write_json(const fs::path& path, const json& j)
{
    cli::write_atomically(path, [&](std::ostream& out) { out << j.dump(2) << '\n'; });
}

int run_detect(const fs::path& file, const fs::path& out_dir)
{
    const auto started = utc_now();
    const auto text = cli::read_text(file);
    const auto spec = cli::parse_scenario_text(text);
    const auto sc = cli::to_internal(spec);
    const auto report = backflow::detect(sc.state, sc.precision, sc.query);

    fs::create_directories(out_dir);
    std::vector< std::string > written;
    const bool want_series =
        std::find(spec.outputs.begin(), spec.outputs.end(), "timeseries") != spec.outputs.end();
    if (want_series) {
        const auto csv = out_dir / (spec.name + "_detect.csv");
        cli::write_atomically(csv, [&](std::ostream& out) {
            out << "t_us,j_quantum,j_classical_bound,violation,P_above,neg_momentum_prob\n";
            for (std::size_t i = 0; i < report.times.size(); ++i) {
                for (double v : {report.times[i], report.j_quantum[i], report.j_classical_bound[i],
                                 report.violation[i], report.p_above[i]}) {
                    put(out, v);
                    out << ',';
                }
                put(out, report.neg_momentum_prob[i]);
                out << '\n';
            }
        });
        written.push_back(csv.filename().string());
    }

    const auto manifest_path = out_dir / (spec.name + "_manifest.json");
    written.push_back(manifest_path.filename().string());
    cli::RunManifest m;
    m.scenario_hash = cli::scenario_hash(text);
    m.tool_version = BFLAB_VERSION;
    m.started_utc = started;
    m.outputs = written;
    m.tolerances = tolerances();
    m.results = {{"qb_intervals_us", intervals_us(report.qb_intervals)},
                 {"qb_found", !report.qb_intervals.empty()},
                 {"units", {{"t", "us"}, {"current", "1/us"}}}};
    m.finished_utc = utc_now();
    write_json(manifest_path, m.to_json());

    std::cout << spec.name << ": " << report.qb_intervals.size() << " QB interval(s)";
    for (const auto& i : report.qb_intervals)
        std::cout << " [" << i.lo << ", " << i.hi << "] us";
    std::cout << '\n';
    return 0;
}

int run_export(const fs::path& file, double t_s, std::size_t n, const fs::path& out_dir)
{
    const auto spec = cli::load_scenario(file);
    const auto sc = cli::to_internal(spec);
    const auto& u = sc.state.units();
    const double t = u.time(t_s);
    const auto grid = phasespace::default_grid(sc.state, sc.precision, t, n);
    const auto jd = phasespace::joint_density(sc.state, sc.precision, grid, t);
    const auto mx = phasespace::position_marginal(jd);
    const auto mp = phasespace::momentum_marginal(jd);

    std::vector< double > x(grid.x.size()), dx(mx.size()), p(grid.p.size()), dp(mp.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
        x[i] = u.length_si(grid.x[i]);
        dx[i] = mx[i] / u.length_unit();
    }
    for (std::size_t j = 0; j < p.size(); ++j) {
        p[j] = u.momentum_si(grid.p[j]);
        dp[j] = mp[j] / u.momentum_unit();
    }

    fs::create_directories(out_dir);
    const auto xp = out_dir / (spec.name + "_x_marginal.csv");
    const auto pp = out_dir / (spec.name + "_p_marginal.csv");
    cli::write_atomically(xp, [&](std::ostream& out) { transport::write_density_csv(out, "x_m", "density_per_m", x, dx); });
    cli::write_atomically(
        pp, [&](std::ostream& out) { transport::write_density_csv(out, "p_kg_m_s", "density_per_kg_m_s", p, dp); });
    std::cout << xp.string() << '\n' << pp.string() << '\n';
    return 0;
}

int run_transport(const fs::path& xcsv, const fs::path& pcsv, double a_m, double dt_s, double mass_kg,
                  const std::string& rule_name, const fs::path& out)
{
    if (!(mass_kg > 0.0))
        throw InputError("--mass must be positive");
    const auto u = corenum::UnitSystem::for_particle(mass_kg);
    const auto xt = transport::read_density_csv(xcsv);
    const auto pt = transport::read_density_csv(pcsv);

    auto convert = [](const transport::DensityTable& t, double scale) {
        std::vector< double > c(t.coordinate.size()), d(t.density.size());
        for (std::size_t i = 0; i < c.size(); ++i) {
            c[i] = t.coordinate[i] / scale;
            d[i] = t.density[i] * scale;
        }
        return std::pair{corenum::Grid1D(c.front(), c.back(), c.size()), d};
    };
    auto [gx, dx] = convert(xt, u.length_unit());
    auto [gp, dp] = convert(pt, u.momentum_unit());
    const transport::MarginalPair marginals{gx, dx, gp, dp};
    const auto rule = rule_name == "split" ? transport::CellRule::split : transport::CellRule::centre;
    const auto b = transport::worst_case_bound(marginals, u.length(a_m), u.time(dt_s), 1.0, rule);

    json x_side = json::array(), p_side = json::array();
    for (std::size_t i = 0; i < b.certificate.x_source_side.size(); ++i)
        if (b.certificate.x_source_side[i])
            x_side.push_back(i);
    for (std::size_t j = 0; j < b.certificate.p_source_side.size(); ++j)
        if (b.certificate.p_source_side[j])
            p_side.push_back(j);
    const json report{{"max_strip_mass", b.max_strip_mass},
                      {"p_below", b.p_below},
                      {"bound_value", b.bound_value},
                      {"negative_momentum_mass", b.negative_mass},
                      {"cell_rule", rule_name},
                      {"certificate",
                       {{"capacity", b.certificate.capacity},
                        {"verified", b.certified},
                        {"x_cells_source_side", x_side},
                        {"p_cells_source_side", p_side}}}};
    if (out.empty())
        std::cout << report.dump(2) << '\n';
    else
        write_json(out, report);
    return 0;
}

int run_optimize(const fs::path& file, std::optional< std::size_t > budget_opt, std::optional< std::uint64_t > seed_opt,
                 const fs::path& out)
{
    const auto spec = cli::load_scenario(file);
    const auto space = cli::search_space_of(spec);
    const std::size_t budget = budget_opt.value_or(spec.search ? spec.search->budget : 400);
    const std::uint64_t seed = seed_opt.value_or(spec.search ? spec.search->seed : 7);
    const auto r = optimizer::optimize(space, budget, seed);

    const auto names = optimizer::parameter_names(space.family);
    json best = json::object();
    for (std::size_t k = 0; k < names.size(); ++k)
        best[names[k]] = r.best_params[k];
    json trace = json::array();
    for (const auto& e : r.trace)
        trace.push_back({{"params", e.params},
                         {"objective", std::isfinite(e.objective) ? json(e.objective) : json(nullptr)}});
    const auto state = optimizer::make_state(space.family, space.fixed, r.best_params);
    const auto report = backflow::detect(state, space.fixed.precision, space.fixed.query);

    json result{{"family", optimizer::to_string(space.family)},
                {"objective_kind", optimizer::to_string(space.fixed.objective)},
                {"budget", budget},
                {"seed", seed},
                {"evaluations", r.evaluations},
                {"best_params", best},
                {"best_objective", r.best_objective},
                {"found_qb", r.found_qb},
                {"qb_intervals_us", intervals_us(report.qb_intervals)},
                {"trace", trace}};
    if (!r.found_qb)
        result["message"] = "no QB found in family";
    if (out.empty())
        std::cout << result.dump(2) << '\n';
    else
        write_json(out, result);
    return 0;
}

} // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Quantum backflow detection, coupling bounds and state search"};
    app.set_version_flag("--version", std::string(BFLAB_VERSION));
    app.require_subcommand(1);

    fs::path out_dir = ".";
    fs::path out_file;

    auto* detect = app.add_subcommand("detect", "scan a scenario for backflow intervals");
    fs::path detect_file;
    detect->add_option("file", detect_file, "scenario JSON")->required()->check(CLI::ExistingFile);
    detect->add_option("--out", out_dir, "output directory");

    auto* transport_cmd = app.add_subcommand("transport", "worst-case coupling bound from measured marginals");
    fs::path xcsv, pcsv;
    double a = 0.0, dt = 0.0, mass = 0.0;
    std::string rule = "centre";
    transport_cmd->add_option("xcsv", xcsv, "position marginal CSV (x_m, density)")->required()->check(CLI::ExistingFile);
    transport_cmd->add_option("pcsv", pcsv, "momentum marginal CSV (p_kg_m_s, density)")
        ->required()
        ->check(CLI::ExistingFile);
    transport_cmd->add_option("--a", a, "detection level in m")->required();
    transport_cmd->add_option("--dt", dt, "horizon in s")->required();
    transport_cmd->add_option("--mass", mass, "particle mass in kg")->required();
    transport_cmd->add_option("--rule", rule, "cell rule")->check(CLI::IsMember({"centre", "split"}));
    transport_cmd->add_option("--out", out_file, "report file (default stdout)");

    auto* optimize = app.add_subcommand("optimize", "search a state family for the strongest backflow");
    fs::path opt_file;
    std::optional< std::size_t > budget;
    std::optional< std::uint64_t > seed;
    optimize->add_option("file", opt_file, "scenario template JSON")->required()->check(CLI::ExistingFile);
    optimize->add_option("--budget", budget, "objective evaluations (at least 50)");
    optimize->add_option("--seed", seed, "random seed");
    optimize->add_option("--out", out_file, "result file (default stdout)");

    auto* export_cmd = app.add_subcommand("export-marginals", "write smoothed marginals at one time");
    fs::path export_file;
    double t_s = 0.0;
    std::size_t cells = 256;
    export_cmd->add_option("file", export_file, "scenario JSON")->required()->check(CLI::ExistingFile);
    export_cmd->add_option("--t", t_s, "time in s")->required();
    export_cmd->add_option("--cells", cells, "grid points per axis")->check(CLI::Range(2, 1 << 14));
    export_cmd->add_option("--out", out_dir, "output directory");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_usage;
    }

    std::string context;
    for (const auto* f : {&detect_file, &opt_file, &export_file})
        if (!f->empty())
            context = f->string();
    if (context.empty() && *transport_cmd)
        context = xcsv.string() + ", " + pcsv.string();

    try {
        if (*detect)
            return run_detect(detect_file, out_dir);
        if (*transport_cmd)
            return run_transport(xcsv, pcsv, a, dt, mass, rule, out_file);
        if (*optimize) {
            if (budget && *budget < optimizer::minimum_budget) {
                std::cerr << "error: --budget must be at least " << optimizer::minimum_budget << '\n';
                return exit_usage;
            }
            return run_optimize(opt_file, budget, seed, out_file);
        }
        if (*export_cmd)
            return run_export(export_file, t_s, cells, out_dir);
    } catch (const InputError& e) {
        std::cerr << "error (" << context << "): " << e.what() << '\n';
        return exit_usage;
    } catch (const std::exception& e) {
        std::cerr << "numeric failure (" << context << "): " << e.what() << '\n';
        return exit_numeric;
    }
    return exit_usage;
}
