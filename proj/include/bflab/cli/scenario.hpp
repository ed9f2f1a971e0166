#ifndef BFLAB_CLI_SCENARIO_HPP
#define BFLAB_CLI_SCENARIO_HPP

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "bflab/backflow/backflow.hpp"
#include "bflab/corenum/error.hpp"
#include "bflab/corenum/units.hpp"
#include "bflab/optimizer/optimizer.hpp"
#include "bflab/phasespace/phasespace.hpp"
#include "bflab/states/wavefunction.hpp"

namespace bflab::cli {

using json = nlohmann::json;
using states::complex;

inline constexpr int scenario_version = 1;

/// Momentum on the wire: either kg m/s or n photon recoils at a wavelength.
struct MomentumInput
{
    double si = 0.0;
    std::optional< double > recoils;
    double lambda_nm = 0.0;

    bool operator==(const MomentumInput&) const = default;
};

struct GaussianBranchInput
{
    complex weight;
    MomentumInput momentum;

    bool operator==(const GaussianBranchInput&) const = default;
};

struct GaussianStateInput
{
    double sigma_m = 0.0;
    std::vector< GaussianBranchInput > branches;

    bool operator==(const GaussianStateInput&) const = default;
};

struct CoherentBranchInput
{
    complex weight;
    complex alpha;

    bool operator==(const CoherentBranchInput&) const = default;
};

struct CoherentStateInput
{
    std::vector< CoherentBranchInput > branches;

    bool operator==(const CoherentStateInput&) const = default;
};

enum class PotentialType
{
    free,
    gravity,
    harmonic,
};

struct PotentialInput
{
    PotentialType type = PotentialType::free;
    double g_m_s2 = 0.0;
    double nu_hz = 0.0;

    bool operator==(const PotentialInput&) const = default;
};

/// Detection level either in metres or in units of sqrt(2 hbar / (m omega)).
struct QueryInput
{
    std::optional< double > a_m;
    std::optional< double > a_osc;
    double t_start_s = 0.0;
    double t_end_s = 0.0;
    std::size_t n_times = 500;
    double delta_t_s = 1e-6;

    bool operator==(const QueryInput&) const = default;
};

struct SearchInput
{
    optimizer::Family family = optimizer::Family::gaussian_2_branch;
    std::vector< optimizer::Bound > bounds;
    optimizer::ObjectiveKind objective = optimizer::ObjectiveKind::peak;
    std::size_t budget = 400;
    std::uint64_t seed = 7;
    double lambda_nm = 780.0;

    bool operator==(const SearchInput&) const = default;
};

/// A scenario file as written: SI units throughout.
struct ScenarioSpec
{
    int version = scenario_version;
    std::string name;
    double mass_kg = 0.0;
    PotentialInput potential;
    std::variant< GaussianStateInput, CoherentStateInput > state;
    double precision_sigma_m = 0.0;
    QueryInput query;
    std::vector< std::string > outputs;
    std::optional< SearchInput > search;

    bool operator==(const ScenarioSpec&) const = default;
};

/// A scenario in internal units, ready to run.
struct Scenario
{
    std::string name;
    states::WavefunctionState state;
    phasespace::PrecisionSpec precision;
    backflow::DetectionQuery query;
};

inline const std::vector< std::string >& known_outputs()
{
    static const std::vector< std::string > k{"timeseries", "manifest", "marginals"};
    return k;
}

namespace detail {

inline const json& require(const json& j, const std::string& path, const char* key)
{
    if (!j.is_object())
        throw ParseError(path, "expected an object");
    const auto it = j.find(key);
    if (it == j.end())
        throw ParseError(path + "." + key, "missing required field");
    return *it;
}

inline double number(const json& j, const std::string& path)
{
    if (!j.is_number())
        throw ParseError(path, "expected a number");
    const double v = j.get< double >();
    if (!std::isfinite(v))
        throw ParseError(path, "must be finite");
    return v;
}

inline double positive(const json& j, const std::string& path)
{
    const double v = number(j, path);
    if (!(v > 0.0))
        throw ParseError(path, "must be positive");
    return v;
}

inline std::string text(const json& j, const std::string& path)
{
    if (!j.is_string())
        throw ParseError(path, "expected a string");
    return j.get< std::string >();
}

inline std::size_t count(const json& j, const std::string& path)
{
    if (!j.is_number_integer() || j.get< std::int64_t >() < 0)
        throw ParseError(path, "expected a non-negative integer");
    return j.get< std::size_t >();
}

/// [re, im], {abs, arg_pi} or a plain real number.
inline complex complex_value(const json& j, const std::string& path)
{
    if (j.is_number())
        return {number(j, path), 0.0};
    if (j.is_array()) {
        if (j.size() != 2)
            throw ParseError(path, "complex value needs [re, im]");
        return {number(j[0], path + "[0]"), number(j[1], path + "[1]")};
    }
    if (j.is_object()) {
        const double r = number(require(j, path, "abs"), path + ".abs");
        if (r < 0.0)
            throw ParseError(path + ".abs", "must be non-negative");
        const double arg = number(require(j, path, "arg_pi"), path + ".arg_pi");
        return std::polar(r, std::numbers::pi * arg);
    }
    throw ParseError(path, "expected [re, im], {abs, arg_pi} or a number");
}

inline json complex_json(complex z) { return json::array({z.real(), z.imag()}); }

inline MomentumInput momentum_value(const json& j, const std::string& path)
{
    MomentumInput m;
    if (j.is_number()) {
        m.si = number(j, path);
        return m;
    }
    if (j.is_object()) {
        m.recoils = number(require(j, path, "recoils"), path + ".recoils");
        m.lambda_nm = positive(require(j, path, "lambda_nm"), path + ".lambda_nm");
        return m;
    }
    throw ParseError(path, "expected kg m/s or {recoils, lambda_nm}");
}

inline json momentum_json(const MomentumInput& m)
{
    if (m.recoils)
        return {{"recoils", *m.recoils}, {"lambda_nm", m.lambda_nm}};
    return m.si;
}

inline std::vector< optimizer::Bound > bounds_value(const json& j, const std::string& path, optimizer::Family f)
{
    auto out = optimizer::default_bounds(f);
    if (j.is_null())
        return out;
    if (!j.is_object())
        throw ParseError(path, "expected an object of [lo, hi] pairs");
    const auto names = optimizer::parameter_names(f);
    for (const auto& [key, value] : j.items()) {
        const auto it = std::find(names.begin(), names.end(), key);
        if (it == names.end())
            throw ParseError(path + "." + key, "unknown parameter for " + std::string(optimizer::to_string(f)));
        if (!value.is_array() || value.size() != 2)
            throw ParseError(path + "." + key, "expected [lo, hi]");
        const optimizer::Bound b{number(value[0], path + "." + key + "[0]"),
                                 number(value[1], path + "." + key + "[1]")};
        if (!(b.lo < b.hi))
            throw ParseError(path + "." + key, "lower bound must be below upper bound");
        out[static_cast< std::size_t >(it - names.begin())] = b;
    }
    return out;
}

} // namespace detail

/// Parses a scenario document. Errors name the offending field.
inline ScenarioSpec parse_scenario(const json& root)
{
    using namespace detail;
    ScenarioSpec s;
    if (!root.is_object())
        throw ParseError("$", "scenario must be a JSON object");

    const auto version = require(root, "$", "version");
    if (!version.is_number_integer() || version.get< int >() != scenario_version)
        throw ParseError("$.version", "unsupported version; expected " + std::to_string(scenario_version));
    s.name = text(require(root, "$", "name"), "$.name");
    if (s.name.empty())
        throw ParseError("$.name", "must not be empty");
    if (const auto it = root.find("units"); it != root.end() && text(*it, "$.units") != "SI")
        throw ParseError("$.units", "only SI input units are supported");

    s.mass_kg = positive(require(require(root, "$", "particle"), "$.particle", "mass_kg"), "$.particle.mass_kg");

    const auto& pot = require(root, "$", "potential");
    const auto type = text(require(pot, "$.potential", "type"), "$.potential.type");
    if (type == "free") {
        s.potential.type = PotentialType::free;
    } else if (type == "gravity") {
        s.potential.type = PotentialType::gravity;
        s.potential.g_m_s2 = number(require(pot, "$.potential", "g_m_s2"), "$.potential.g_m_s2");
    } else if (type == "harmonic") {
        s.potential.type = PotentialType::harmonic;
        s.potential.nu_hz = positive(require(pot, "$.potential", "nu_hz"), "$.potential.nu_hz");
    } else {
        throw ParseError("$.potential.type", "expected free, gravity or harmonic");
    }

    const auto& st = require(root, "$", "state");
    const auto kind = text(require(st, "$.state", "kind"), "$.state.kind");
    const auto& branches = require(st, "$.state", "branches");
    if (!branches.is_array() || branches.empty())
        throw ParseError("$.state.branches", "expected a non-empty array");
    if (kind == "gaussian_superposition") {
        if (s.potential.type == PotentialType::harmonic)
            throw ParseError("$.state.kind", "harmonic potential requires coherent_superposition");
        GaussianStateInput g;
        g.sigma_m = positive(require(st, "$.state", "sigma_m"), "$.state.sigma_m");
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const auto path = "$.state.branches[" + std::to_string(i) + "]";
            g.branches.push_back({complex_value(require(branches[i], path, "weight"), path + ".weight"),
                                  momentum_value(require(branches[i], path, "momentum"), path + ".momentum")});
        }
        s.state = std::move(g);
    } else if (kind == "coherent_superposition") {
        if (s.potential.type != PotentialType::harmonic)
            throw ParseError("$.state.kind", "coherent_superposition requires a harmonic potential");
        CoherentStateInput c;
        for (std::size_t i = 0; i < branches.size(); ++i) {
            const auto path = "$.state.branches[" + std::to_string(i) + "]";
            c.branches.push_back({complex_value(require(branches[i], path, "weight"), path + ".weight"),
                                  complex_value(require(branches[i], path, "alpha"), path + ".alpha")});
        }
        s.state = std::move(c);
    } else {
        throw ParseError("$.state.kind", "expected gaussian_superposition or coherent_superposition");
    }

    const auto& prec = require(root, "$", "precision");
    if (text(require(prec, "$.precision", "kind"), "$.precision.kind") != "gaussian")
        throw ParseError("$.precision.kind", "only gaussian precision functions are supported");
    s.precision_sigma_m = positive(require(prec, "$.precision", "sigma_m"), "$.precision.sigma_m");

    const auto& q = require(root, "$", "query");
    const bool has_m = q.contains("a_m");
    const bool has_osc = q.contains("a_osc");
    if (has_m == has_osc)
        throw ParseError("$.query.a_m", "give exactly one of a_m or a_osc");
    if (has_m)
        s.query.a_m = number(q["a_m"], "$.query.a_m");
    else if (s.potential.type != PotentialType::harmonic)
        throw ParseError("$.query.a_osc", "oscillator units need a harmonic potential");
    else
        s.query.a_osc = number(q["a_osc"], "$.query.a_osc");
    s.query.t_start_s = number(require(q, "$.query", "t_start_s"), "$.query.t_start_s");
    s.query.t_end_s = number(require(q, "$.query", "t_end_s"), "$.query.t_end_s");
    if (s.query.t_start_s < 0.0)
        throw ParseError("$.query.t_start_s", "must be non-negative");
    if (!(s.query.t_end_s > s.query.t_start_s))
        throw ParseError("$.query.t_end_s", "must exceed t_start_s");
    if (const auto it = q.find("n_times"); it != q.end()) {
        s.query.n_times = count(*it, "$.query.n_times");
        if (s.query.n_times < 2)
            throw ParseError("$.query.n_times", "must be at least 2");
    }
    if (const auto it = q.find("delta_t_s"); it != q.end())
        s.query.delta_t_s = positive(*it, "$.query.delta_t_s");

    if (const auto it = root.find("outputs"); it != root.end()) {
        if (!it->is_array())
            throw ParseError("$.outputs", "expected an array of artifact names");
        for (std::size_t i = 0; i < it->size(); ++i) {
            const auto path = "$.outputs[" + std::to_string(i) + "]";
            auto o = text((*it)[i], path);
            const auto& k = known_outputs();
            if (std::find(k.begin(), k.end(), o) == k.end())
                throw ParseError(path, "unknown artifact '" + o + "'");
            s.outputs.push_back(std::move(o));
        }
    } else {
        s.outputs = {"timeseries", "manifest"};
    }

    if (const auto it = root.find("search"); it != root.end()) {
        SearchInput in;
        const auto& sj = *it;
        try {
            in.family = optimizer::parse_family(text(require(sj, "$.search", "family"), "$.search.family"));
        } catch (const ParseError&) {
            throw;
        } catch (const InputError& e) {
            throw ParseError("$.search.family", e.what());
        }
        const bool gaussian_state = std::holds_alternative< GaussianStateInput >(s.state);
        if (gaussian_state != (in.family == optimizer::Family::gaussian_2_branch))
            throw ParseError("$.search.family", "family does not match the state kind");
        in.bounds = bounds_value(sj.contains("bounds") ? sj["bounds"] : json(), "$.search.bounds", in.family);
        if (sj.contains("objective")) {
            const auto o = text(sj["objective"], "$.search.objective");
            if (o != "peak" && o != "integrated")
                throw ParseError("$.search.objective", "expected peak or integrated");
            in.objective = optimizer::parse_objective(o);
        }
        if (sj.contains("budget"))
            in.budget = count(sj["budget"], "$.search.budget");
        if (sj.contains("seed"))
            in.seed = count(sj["seed"], "$.search.seed");
        if (sj.contains("lambda_nm"))
            in.lambda_nm = positive(sj["lambda_nm"], "$.search.lambda_nm");
        s.search = std::move(in);
    }
    return s;
}

inline ScenarioSpec parse_scenario_text(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error& e) {
        // nlohmann reports a byte offset; convert it to a line number.
        const auto upto = text.substr(0, std::min< std::size_t >(e.byte, text.size()));
        const int line = 1 + static_cast< int >(std::count(upto.begin(), upto.end(), '\n'));
        throw ParseError("$", "malformed JSON", line);
    }
    return parse_scenario(root);
}

inline std::string read_text(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline ScenarioSpec load_scenario(const std::filesystem::path& path) { return parse_scenario_text(read_text(path)); }

/// Canonical JSON form. Complex values are written as [re, im].
inline json to_json(const ScenarioSpec& s)
{
    json root;
    root["version"] = s.version;
    root["name"] = s.name;
    root["units"] = "SI";
    root["particle"] = {{"mass_kg", s.mass_kg}};
    switch (s.potential.type) {
    case PotentialType::free:
        root["potential"] = {{"type", "free"}};
        break;
    case PotentialType::gravity:
        root["potential"] = {{"type", "gravity"}, {"g_m_s2", s.potential.g_m_s2}};
        break;
    case PotentialType::harmonic:
        root["potential"] = {{"type", "harmonic"}, {"nu_hz", s.potential.nu_hz}};
        break;
    }
    if (const auto* g = std::get_if< GaussianStateInput >(&s.state)) {
        json br = json::array();
        for (const auto& b : g->branches)
            br.push_back({{"weight", detail::complex_json(b.weight)}, {"momentum", detail::momentum_json(b.momentum)}});
        root["state"] = {{"kind", "gaussian_superposition"}, {"sigma_m", g->sigma_m}, {"branches", br}};
    } else {
        const auto& c = std::get< CoherentStateInput >(s.state);
        json br = json::array();
        for (const auto& b : c.branches)
            br.push_back({{"weight", detail::complex_json(b.weight)}, {"alpha", detail::complex_json(b.alpha)}});
        root["state"] = {{"kind", "coherent_superposition"}, {"branches", br}};
    }
    root["precision"] = {{"kind", "gaussian"}, {"sigma_m", s.precision_sigma_m}};
    json q{{"t_start_s", s.query.t_start_s},
           {"t_end_s", s.query.t_end_s},
           {"n_times", s.query.n_times},
           {"delta_t_s", s.query.delta_t_s}};
    if (s.query.a_m)
        q["a_m"] = *s.query.a_m;
    else
        q["a_osc"] = *s.query.a_osc;
    root["query"] = q;
    root["outputs"] = s.outputs;
    if (s.search) {
        json bounds = json::object();
        const auto names = optimizer::parameter_names(s.search->family);
        for (std::size_t k = 0; k < names.size(); ++k)
            bounds[names[k]] = {s.search->bounds[k].lo, s.search->bounds[k].hi};
        root["search"] = {{"family", optimizer::to_string(s.search->family)},
                          {"bounds", bounds},
                          {"objective", optimizer::to_string(s.search->objective)},
                          {"budget", s.search->budget},
                          {"seed", s.search->seed},
                          {"lambda_nm", s.search->lambda_nm}};
    }
    return root;
}

inline std::string serialize(const ScenarioSpec& s) { return to_json(s).dump(2) + "\n"; }

inline states::PhysicalParams physical_of(const ScenarioSpec& s)
{
    states::PhysicalParams p{s.mass_kg, 0.0, 0.0};
    if (s.potential.type == PotentialType::gravity)
        p.g = s.potential.g_m_s2;
    if (s.potential.type == PotentialType::harmonic)
        p.omega = 2.0 * std::numbers::pi * s.potential.nu_hz;
    return p;
}

/// Converts SI inputs to the internal unit system.
inline Scenario to_internal(const ScenarioSpec& s)
{
    const auto phys = physical_of(s);
    const auto units = corenum::UnitSystem::for_particle(s.mass_kg);
    auto build = [&]() -> states::WavefunctionState {
        if (const auto* g = std::get_if< GaussianStateInput >(&s.state)) {
            states::GaussianSuperpositionSpec spec{units.length(g->sigma_m), {}};
            for (const auto& b : g->branches) {
                const double p = b.momentum.recoils ? units.recoil_momentum(*b.momentum.recoils, b.momentum.lambda_nm)
                                                    : units.momentum(b.momentum.si);
                spec.branches.push_back({b.weight, p});
            }
            if (s.potential.type == PotentialType::gravity)
                return states::WavefunctionState::falling(phys, std::move(spec));
            return states::WavefunctionState::free(phys, std::move(spec));
        }
        states::CoherentSuperpositionSpec spec;
        for (const auto& b : std::get< CoherentStateInput >(s.state).branches)
            spec.branches.push_back({b.weight, b.alpha});
        return states::WavefunctionState::harmonic(phys, std::move(spec));
    };
    auto state = build();

    backflow::DetectionQuery q;
    if (s.query.a_m) {
        q.a = units.length(*s.query.a_m);
    } else {
        const double omega = state.omega();
        q.a = std::sqrt(2.0 * state.hbar() / (state.mass() * omega)) * *s.query.a_osc;
    }
    q.t_start = units.time(s.query.t_start_s);
    q.t_end = units.time(s.query.t_end_s);
    q.n_times = s.query.n_times;
    q.delta_t = units.time(s.query.delta_t_s);
    q.validate();

    return {s.name, std::move(state), phasespace::PrecisionSpec(units.length(s.precision_sigma_m)), q};
}

/// Search space built from a scenario's fixed parts and its search block.
inline optimizer::SearchSpace search_space_of(const ScenarioSpec& s)
{
    const auto sc = to_internal(s);
    optimizer::SearchSpace space;
    const SearchInput in = s.search.value_or(SearchInput{
        std::holds_alternative< GaussianStateInput >(s.state) ? optimizer::Family::gaussian_2_branch
                                                               : optimizer::Family::coherent_2_branch,
        {},
        optimizer::ObjectiveKind::peak,
        400,
        7,
        780.0});
    space.family = in.family;
    space.bounds = in.bounds.empty() ? optimizer::default_bounds(in.family) : in.bounds;
    space.fixed.physical = physical_of(s);
    if (const auto* g = std::get_if< GaussianStateInput >(&s.state))
        space.fixed.sigma = sc.state.units().length(g->sigma_m);
    space.fixed.lambda_nm = in.lambda_nm;
    space.fixed.precision = sc.precision;
    space.fixed.query = sc.query;
    space.fixed.objective = in.objective;
    space.validate();
    return space;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes)
{
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the parsed document, so whitespace and key order do not matter.
inline std::string scenario_hash(const std::string& text)
{
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error&) {
        throw ParseError("$", "malformed JSON");
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast< unsigned long long >(fnv1a(root.dump())));
    return buf;
}

/// Writes through a temporary file in the same directory and renames it into place.
template < typename Writer >
void write_atomically(const std::filesystem::path& path, Writer&& writer)
{
    auto tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out)
            throw InputError("cannot write " + tmp.string());
        writer(out);
        out.flush();
        if (!out)
            throw InputError("failed while writing " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp, ec);
        throw InputError("cannot move output into place: " + path.string());
    }
}

struct RunManifest
{
    std::string scenario_hash;
    std::string tool_version;
    std::string started_utc;
    std::string finished_utc;
    std::vector< std::string > outputs;
    json tolerances;
    json results;

    json to_json() const
    {
        return {{"scenario_hash", scenario_hash}, {"tool_version", tool_version}, {"started_utc", started_utc},
                {"finished_utc", finished_utc},   {"outputs", outputs},           {"tolerances", tolerances},
                {"results", results}};
    }
};

} // namespace bflab::cli

#endif // BFLAB_CLI_SCENARIO_HPP
