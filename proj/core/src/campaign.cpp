#include "sfbm/campaign.hpp"

#include "sfbm/errors.hpp"
#include "sfbm/excursions.hpp"
#include "sfbm/path_io.hpp"
#include "sfbm/picard.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <exception>
#include <fstream>
#include <functional>
#include <iomanip>
#include <limits>
#include <mutex>
#include <set>
#include <sstream>
#include <thread>

namespace sfbm {

using nlohmann::json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// ---- config parsing -------------------------------------------------------

void require_object(const json& j, const std::string& where) {
    if (!j.is_object()) throw DomainError("config: '" + where + "' must be an object");
}

void reject_unknown(const json& j, std::initializer_list<const char*> allowed, const std::string& where) {
    for (const auto& item : j.items()) {
        const bool known = std::any_of(allowed.begin(), allowed.end(),
                                       [&](const char* key) { return item.key() == key; });
        if (!known) {
            throw DomainError("config: unknown key '" + (where.empty() ? "" : where + ".") + item.key() + "'");
        }
    }
}

std::string qualified(const std::string& where, const char* key) {
    return where.empty() ? std::string(key) : where + "." + key;
}

void read_number(const json& j, const char* key, const std::string& where, double& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number()) throw DomainError("config: '" + qualified(where, key) + "' must be a number");
    out = v.get<double>();
    if (!std::isfinite(out)) throw DomainError("config: '" + qualified(where, key) + "' must be finite");
}

template <class Int>
void read_count(const json& j, const char* key, const std::string& where, Int& out) {
    if (!j.contains(key)) return;
    const auto& v = j.at(key);
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
        throw DomainError("config: '" + qualified(where, key) + "' must be a nonnegative integer");
    }
    out = static_cast<Int>(v.get<std::uint64_t>());
}

std::string read_string(const json& j, const char* key, const std::string& where, std::string fallback) {
    if (!j.contains(key)) return fallback;
    const auto& v = j.at(key);
    if (!v.is_string()) throw DomainError("config: '" + qualified(where, key) + "' must be a string");
    return v.get<std::string>();
}

void positive(double value, const std::string& name) {
    if (!(value > 0.0)) throw DomainError("config: '" + name + "' must be positive");
}

std::string_view to_string(NoiseMode mode) { return mode == NoiseMode::fbm ? "fbm" : "zero"; }

NoiseMode parse_noise(const std::string& name) {
    if (name == "fbm") return NoiseMode::fbm;
    if (name == "zero") return NoiseMode::zero;
    throw DomainError("config: 'noise' must be \"fbm\" or \"zero\"");
}

}  // namespace

ExperimentConfig parse_config(const json& doc) {
    require_object(doc, "<root>");
    reject_unknown(doc,
                   {"spec", "grid", "ladder", "seeds", "generator", "noise", "step_rule", "tolerances", "continuity",
                    "residual", "picard", "allowances", "checks", "output_dir", "csv_paths", "threads"},
                   "");
    ExperimentConfig cfg;

    double x0 = cfg.spec.x0, a = cfg.spec.a, b = cfg.spec.b, sigma = cfg.spec.sigma, hurst = cfg.spec.hurst.value();
    if (doc.contains("spec")) {
        const auto& s = doc.at("spec");
        require_object(s, "spec");
        reject_unknown(s, {"x0", "a", "b", "sigma", "hurst"}, "spec");
        read_number(s, "x0", "spec", x0);
        read_number(s, "a", "spec", a);
        read_number(s, "b", "spec", b);
        read_number(s, "sigma", "spec", sigma);
        read_number(s, "hurst", "spec", hurst);
    }
    cfg.spec = SdeSpec(x0, a, b, sigma, HurstParam(hurst));

    double horizon = cfg.grid.horizon();
    std::size_t steps = cfg.grid.steps();
    if (doc.contains("grid")) {
        const auto& g = doc.at("grid");
        require_object(g, "grid");
        reject_unknown(g, {"horizon", "steps"}, "grid");
        read_number(g, "horizon", "grid", horizon);
        read_count(g, "steps", "grid", steps);
    }
    cfg.grid = TimeGrid(horizon, steps);

    double eps0 = cfg.ladder.base(), ratio = cfg.ladder.ratio();
    std::size_t depth = cfg.ladder.depth();
    if (doc.contains("ladder")) {
        const auto& l = doc.at("ladder");
        require_object(l, "ladder");
        reject_unknown(l, {"eps0", "ratio", "depth"}, "ladder");
        read_number(l, "eps0", "ladder", eps0);
        read_number(l, "ratio", "ladder", ratio);
        read_count(l, "depth", "ladder", depth);
    }
    cfg.ladder = EpsilonLadder(eps0, ratio, depth);
    if (cfg.ladder.depth() < 2) throw DomainError("config: 'ladder.depth' must be at least 2");

    if (doc.contains("seeds")) {
        const auto& s = doc.at("seeds");
        require_object(s, "seeds");
        reject_unknown(s, {"master_seed", "paths"}, "seeds");
        read_count(s, "master_seed", "seeds", cfg.master_seed);
        read_count(s, "paths", "seeds", cfg.paths);
    }
    if (cfg.paths < 1) throw DomainError("config: 'seeds.paths' must be at least 1");

    cfg.generator = parse_generator(read_string(doc, "generator", "", std::string(to_string(cfg.generator))));
    cfg.noise = parse_noise(read_string(doc, "noise", "", "fbm"));
    cfg.rule = parse_step_rule(read_string(doc, "step_rule", "", std::string(to_string(cfg.rule))));

    if (doc.contains("tolerances")) {
        const auto& t = doc.at("tolerances");
        require_object(t, "tolerances");
        reject_unknown(t, {"tol_mono", "tol_bound", "tol_nonneg", "picard", "measure_threshold", "endpoint"},
                       "tolerances");
        auto& tol = cfg.tolerances;
        read_number(t, "tol_mono", "tolerances", tol.tol_mono);
        read_number(t, "tol_bound", "tolerances", tol.tol_bound);
        read_number(t, "tol_nonneg", "tolerances", tol.tol_nonneg);
        read_number(t, "picard", "tolerances", tol.picard);
        read_number(t, "measure_threshold", "tolerances", tol.measure_threshold);
        read_number(t, "endpoint", "tolerances", tol.endpoint);
    }
    // tol_mono = 0 is a supported negative control; the rest must be positive.
    if (!(cfg.tolerances.tol_mono >= 0.0)) throw DomainError("config: 'tolerances.tol_mono' must be nonnegative");
    positive(cfg.tolerances.tol_bound, "tolerances.tol_bound");
    positive(cfg.tolerances.tol_nonneg, "tolerances.tol_nonneg");
    positive(cfg.tolerances.picard, "tolerances.picard");
    positive(cfg.tolerances.measure_threshold, "tolerances.measure_threshold");
    positive(cfg.tolerances.endpoint, "tolerances.endpoint");

    if (doc.contains("continuity")) {
        const auto& c = doc.at("continuity");
        require_object(c, "continuity");
        reject_unknown(c, {"eps_star", "h"}, "continuity");
        read_number(c, "eps_star", "continuity", cfg.continuity.eps_star);
        if (c.contains("h")) {
            const auto& h = c.at("h");
            if (!h.is_array() || h.empty()) throw DomainError("config: 'continuity.h' must be a nonempty array");
            cfg.continuity.h.clear();
            for (const auto& v : h) {
                if (!v.is_number()) throw DomainError("config: 'continuity.h' entries must be numbers");
                cfg.continuity.h.push_back(v.get<double>());
            }
        }
    }
    positive(cfg.continuity.eps_star, "continuity.eps_star");
    for (std::size_t i = 0; i < cfg.continuity.h.size(); ++i) {
        const double h = cfg.continuity.h[i];
        if (!(h > 0.0 && h < cfg.continuity.eps_star) || (i > 0 && !(h < cfg.continuity.h[i - 1]))) {
            throw DomainError("config: 'continuity.h' must be positive, strictly decreasing and below eps_star");
        }
    }

    if (doc.contains("residual")) {
        const auto& r = doc.at("residual");
        require_object(r, "residual");
        reject_unknown(r, {"margin", "min_interior_nodes"}, "residual");
        read_count(r, "margin", "residual", cfg.residual.margin);
        read_count(r, "min_interior_nodes", "residual", cfg.residual.min_interior_nodes);
    }

    if (doc.contains("picard")) {
        const auto& p = doc.at("picard");
        require_object(p, "picard");
        reject_unknown(p, {"steps", "check_nodes", "beta", "consistency_slack", "consistency_depth"}, "picard");
        read_count(p, "steps", "picard", cfg.picard.steps);
        read_count(p, "check_nodes", "picard", cfg.picard.check_nodes);
        if (p.contains("beta") && !p.at("beta").is_null()) {
            double beta = 0.0;
            read_number(p, "beta", "picard", beta);
            cfg.picard.beta = beta;
        }
        read_number(p, "consistency_slack", "picard", cfg.picard.consistency_slack);
        read_count(p, "consistency_depth", "picard", cfg.picard.consistency_depth);
    }
    if (cfg.picard.steps < 1) throw DomainError("config: 'picard.steps' must be positive");
    if (cfg.picard.check_nodes < 100) throw DomainError("config: 'picard.check_nodes' must be at least 100");
    if (cfg.picard.beta && !(*cfg.picard.beta > 0.0 && *cfg.picard.beta < hurst)) {
        throw DomainError("config: 'picard.beta' must lie in (0, H)");
    }
    positive(cfg.picard.consistency_slack, "picard.consistency_slack");
    if (cfg.picard.consistency_depth < 1) throw DomainError("config: 'picard.consistency_depth' must be positive");

    if (doc.contains("allowances")) {
        const auto& al = doc.at("allowances");
        require_object(al, "allowances");
        const auto& ids = all_check_ids();
        for (const auto& item : al.items()) {
            if (std::find(ids.begin(), ids.end(), item.key()) == ids.end()) {
                throw DomainError("config: unknown key 'allowances." + item.key() + "'");
            }
            double fraction = 0.0;
            read_number(al, item.key().c_str(), "allowances", fraction);
            if (!(fraction >= 0.0 && fraction < 1.0)) {
                throw DomainError("config: 'allowances." + item.key() + "' must lie in [0, 1)");
            }
            cfg.allowances[item.key()] = fraction;
        }
    }

    if (doc.contains("checks")) {
        const auto& c = doc.at("checks");
        if (!c.is_array()) throw DomainError("config: 'checks' must be an array of check ids");
        std::set<std::string> wanted;
        for (const auto& v : c) {
            if (!v.is_string()) throw DomainError("config: 'checks' entries must be strings");
            const auto id = v.get<std::string>();
            const auto& ids = all_check_ids();
            if (std::find(ids.begin(), ids.end(), id) == ids.end()) {
                throw DomainError("config: unknown check id '" + id + "'");
            }
            wanted.insert(id);
        }
        cfg.checks.clear();
        for (const auto& id : all_check_ids()) {
            if (wanted.count(id)) cfg.checks.push_back(id);
        }
    }

    const char* env_dir = std::getenv(kOutputDirEnv);
    cfg.output_dir = read_string(doc, "output_dir", "", env_dir && *env_dir ? env_dir : "sfbm_out");
    read_count(doc, "csv_paths", "", cfg.csv_paths);
    read_count(doc, "threads", "", cfg.threads);
    return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& file) {
    std::ifstream in(file);
    if (!in) throw std::runtime_error("cannot open config file '" + file.string() + "'");
    json doc;
    try {
        in >> doc;
    } catch (const json::parse_error& e) {
        throw DomainError("config: '" + file.string() + "' is not valid JSON: " + e.what());
    }
    return parse_config(doc);
}

json canonical_config(const ExperimentConfig& cfg) {
    json doc;
    doc["spec"] = {{"x0", cfg.spec.x0},
                   {"a", cfg.spec.a},
                   {"b", cfg.spec.b},
                   {"sigma", cfg.spec.sigma},
                   {"hurst", cfg.spec.hurst.value()}};
    doc["grid"] = {{"horizon", cfg.grid.horizon()}, {"steps", cfg.grid.steps()}};
    doc["ladder"] = {{"eps0", cfg.ladder.base()}, {"ratio", cfg.ladder.ratio()}, {"depth", cfg.ladder.depth()}};
    doc["seeds"] = {{"master_seed", cfg.master_seed}, {"paths", cfg.paths}};
    doc["generator"] = std::string(to_string(cfg.generator));
    doc["noise"] = std::string(to_string(cfg.noise));
    doc["step_rule"] = std::string(to_string(cfg.rule));
    const auto& t = cfg.tolerances;
    doc["tolerances"] = {{"tol_mono", t.tol_mono},   {"tol_bound", t.tol_bound},
                         {"tol_nonneg", t.tol_nonneg}, {"picard", t.picard},
                         {"measure_threshold", t.measure_threshold}, {"endpoint", t.endpoint}};
    doc["continuity"] = {{"eps_star", cfg.continuity.eps_star}, {"h", cfg.continuity.h}};
    doc["residual"] = {{"margin", cfg.residual.margin}, {"min_interior_nodes", cfg.residual.min_interior_nodes}};
    doc["picard"] = {{"steps", cfg.picard.steps},
                     {"check_nodes", cfg.picard.check_nodes},
                     {"beta", cfg.picard.beta ? json(*cfg.picard.beta) : json(nullptr)},
                     {"consistency_slack", cfg.picard.consistency_slack},
                     {"consistency_depth", cfg.picard.consistency_depth}};
    doc["allowances"] = cfg.allowances;
    doc["checks"] = cfg.checks;
    doc["csv_paths"] = cfg.csv_paths;
    return doc;
}

std::string config_hash(const ExperimentConfig& cfg) {
    std::uint64_t hash = 0xcbf29ce484222325ULL;
    for (unsigned char c : canonical_config(cfg).dump()) {
        hash ^= c;
        hash *= 0x100000001b3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

std::string_view check_anchor(std::string_view id) {
    static const std::map<std::string_view, std::string_view> anchors{
        {"comparison", "comparison criterion: shared-noise ordering across the eps ladder"},
        {"nestedness", "comparison criterion: nested nonpositive sets across the eps ladder"},
        {"upper_bound", "uniform bound X^eps <= X0 + a T^{2H}/(H X0) + 2 sigma sup|B|"},
        {"measure_decay", "measure of {X^eps <= 0} decreases to zero"},
        {"nonnegativity", "the limit process is nonnegative"},
        {"singular_integral", "int_0^t s^{2H-1}/X_s ds is finite"},
        {"compensator", "the compensator L is nonnegative"},
        {"eps_continuity", "X^eps is continuous in eps"},
        {"picard", "local solution as the fixed point of a contraction"},
        {"excursions", "{X > 0} is a disjoint union of maximal intervals"},
        {"endpoint_limits", "X tends to 0 at excursion endpoints"},
        {"restart_identity", "drift identity restarted inside excursions"},
        {"initial_identity", "drift identity on the initial excursion"},
    };
    const auto it = anchors.find(id);
    if (it == anchors.end()) throw DomainError("unknown check id '" + std::string(id) + "'");
    return it->second;
}

namespace {

FbmPath make_noise(const ExperimentConfig& cfg, const TimeGrid& grid, std::size_t path_index) {
    const SeedRecord seed{cfg.master_seed, path_index};
    if (cfg.noise == NoiseMode::zero) {
        return FbmPath{grid, cfg.spec.hurst, seed, cfg.generator, std::vector<double>(grid.size(), 0.0)};
    }
    return generate_fbm(grid, cfg.spec.hurst, seed, cfg.generator);
}

std::string noise_label(const ExperimentConfig& cfg, const FbmPath& noise) {
    if (cfg.noise == NoiseMode::zero) return "zero:n=" + std::to_string(noise.grid.steps());
    return noise.reference();
}

double sup_distance(std::span<const double> u, std::span<const double> v) {
    double d = 0.0;
    for (std::size_t k = 0; k < u.size(); ++k) d = std::max(d, std::abs(u[k] - v[k]));
    return d;
}

std::ofstream open_output(const std::filesystem::path& file, std::size_t path_index) {
    std::ofstream out(file);
    if (!out) {
        throw std::runtime_error("path " + std::to_string(path_index) + ": cannot write '" + file.string() + "'");
    }
    return out;
}

void finish_output(std::ofstream& out, const std::filesystem::path& file, std::size_t path_index) {
    out.flush();
    if (!out) {
        throw std::runtime_error("path " + std::to_string(path_index) + ": write failed for '" + file.string() + "'");
    }
}

// Per-path state shared between checks; everything expensive is computed once.
class PathContext {
public:
    PathContext(const ExperimentConfig& cfg, std::size_t index)
        : cfg_(cfg), index_(index), noise_(make_noise(cfg, cfg.grid, index)) {
        try {
            family_.emplace(build_family(cfg.spec, cfg.grid, noise_.values, noise_label(cfg, noise_), cfg.ladder,
                                         {cfg.tolerances.tol_mono, cfg.rule, false}));
        } catch (const std::exception& e) {
            family_error_ = e.what();
        }
    }

    const ExperimentConfig& cfg() const { return cfg_; }
    std::size_t index() const { return index_; }
    const FbmPath& noise() const { return noise_; }

    const EpsilonFamily& family() const {
        if (!family_) throw NumericalFailure("ladder construction failed: " + family_error_);
        return *family_;
    }
    bool has_family() const { return family_.has_value(); }

    double floor() const { return default_truncation_floor(cfg_.spec); }
    double beta() const { return cfg_.picard.beta.value_or(0.5 * cfg_.spec.hurst.value()); }

    const HolderEstimate& noise_holder() {
        if (!holder_) holder_.emplace(estimate_holder(noise_.values, cfg_.grid, beta()));
        return *holder_;
    }

    std::optional<PicardSolution> picard_log;

private:
    const ExperimentConfig& cfg_;
    std::size_t index_;
    FbmPath noise_;
    std::optional<EpsilonFamily> family_;
    std::string family_error_;
    std::optional<HolderEstimate> holder_;
};

CheckOutcome check_comparison(PathContext& ctx) {
    const auto& m = ctx.family().monotonicity;
    return {m.violations == 0, m.worst_drop, m.tolerance, {{"violations", static_cast<double>(m.violations)}}, {}};
}

CheckOutcome check_nestedness(PathContext& ctx) {
    const auto r = check_nestedness(ctx.family());
    return {r.nested,
            static_cast<double>(r.broken_pairs),
            0.0,
            {{"first_broken_level", r.nested ? -1.0 : static_cast<double>(r.first_broken_level)}},
            {}};
}

CheckOutcome check_upper_bound(PathContext& ctx) {
    const auto cert = verify_upper_bound(ctx.family(), ctx.cfg().tolerances.tol_bound);
    return {cert.passed(), cert.max_violation, cert.tolerance, {{"constant", cert.constant}, {"bound", cert.bound}}, {}};
}

CheckOutcome check_measure_decay(PathContext& ctx) {
    const double threshold = ctx.cfg().tolerances.measure_threshold * ctx.cfg().grid.horizon();
    const auto d = verify_measure_decay(ctx.family(), threshold);
    return {d.passed(),
            d.measures.back(),
            threshold,
            {{"first_measure", d.measures.front()},
             {"last_measure", d.measures.back()},
             {"nonincreasing", d.nonincreasing ? 1.0 : 0.0}},
            {}};
}

CheckOutcome check_nonnegativity(PathContext& ctx) {
    const auto& f = ctx.family();
    const double tol = f.cauchy_gap + ctx.cfg().tolerances.tol_nonneg;
    const auto r = verify_limit_nonnegativity(f, tol);
    return {r.passed, -r.worst_value, tol, {{"worst_node", static_cast<double>(r.worst_node)}}, {}};
}

CheckOutcome check_singular_integral(PathContext& ctx) {
    const auto& f = ctx.family();
    const auto si = singular_integral(f.limit_estimate, f.grid, f.spec.hurst, ctx.floor());
    const double total = si.running.back();
    return {std::isfinite(total),
            total,
            kNaN,
            {{"flagged_nodes", static_cast<double>(si.flagged.size())}, {"flagged_kernel_mass", si.flagged_kernel_mass}},
            {}};
}

CheckOutcome check_compensator(PathContext& ctx) {
    const auto est = compute_compensator(ctx.family(), ctx.floor());
    if (ctx.cfg().noise == NoiseMode::zero) {
        double worst = 0.0;
        for (double v : est.values) worst = std::max(worst, std::abs(v));
        return {worst <= est.smooth_budget(), worst, est.smooth_budget(),
                {{"min_value", est.min_value()}, {"quadrature_budget", est.quadrature_budget}}, {}};
    }
    const double worst = -est.min_value();
    return {worst <= est.truncated_budget(),
            worst,
            est.truncated_budget(),
            {{"truncation_budget", est.truncation_budget},
             {"flagged_nodes", static_cast<double>(est.flagged_nodes.size())}},
            {}};
}

CheckOutcome check_eps_continuity(PathContext& ctx) {
    const auto& cfg = ctx.cfg();
    const auto table = verify_eps_continuity(cfg.spec, ctx.noise(), cfg.continuity.eps_star, cfg.continuity.h, cfg.rule);
    auto ratio = [](const std::vector<double>& gaps) { return gaps.front() > 0.0 ? gaps.back() / gaps.front() : 0.0; };
    const double above = ratio(table.gaps_above);
    const double below = ratio(table.gaps_below);
    return {table.passed(),
            std::max(above, below),
            0.25,
            {{"ratio_above", above},
             {"ratio_below", below},
             {"above_passed", table.above_passed ? 1.0 : 0.0},
             {"below_passed", table.below_passed ? 1.0 : 0.0}},
            {}};
}

CheckOutcome check_picard(PathContext& ctx) {
    const auto& cfg = ctx.cfg();
    const auto& spec = cfg.spec;
    std::vector<double> driver(ctx.noise().values.size());
    for (std::size_t k = 0; k < driver.size(); ++k) driver[k] = spec.sigma * ctx.noise().values[k];
    HolderEstimate holder = ctx.noise_holder();
    holder.constant *= spec.sigma;
    const LocalProblem problem{spec.x0, spec.a, spec.b, spec.hurst, cfg.grid, std::move(driver), holder};

    const auto cert = select_delta(problem, cfg.picard.check_nodes);
    const double tol = cfg.tolerances.picard;
    auto sol = picard_solve(problem, cert, cfg.picard.steps, tol);
    const auto other = picard_solve(problem, cert, cfg.picard.steps, tol, 2.0 * spec.x0);
    const double uniqueness = sup_distance(sol.values, other.values);

    // The eps-scheme on the same window and the same (interpolated) driver.
    std::vector<double> local_noise(sol.grid.size());
    for (std::size_t k = 0; k < local_noise.size(); ++k) {
        local_noise[k] = problem.driver_at(sol.grid.node(k)) / spec.sigma;
    }
    local_noise[0] = 0.0;
    const auto family = build_family(spec, sol.grid, local_noise, "picard-window",
                                     EpsilonLadder(cert.delta, 0.5, cfg.picard.consistency_depth),
                                     {cfg.tolerances.tol_mono, cfg.rule, false});
    const double consistency = sup_distance(sol.values, family.limit_estimate);
    const double consistency_allowed = family.cauchy_gap + cfg.picard.consistency_slack;

    const double excess = sol.max_ratio() - cert.modulus;
    const bool passed = excess <= 0.05 && sol.residual <= 2.0 * tol && uniqueness <= 10.0 * tol &&
                        consistency <= consistency_allowed;
    CheckOutcome out{passed,
                     excess,
                     0.05,
                     {{"delta", cert.delta},
                      {"modulus", cert.modulus},
                      {"iterations", static_cast<double>(sol.log.size())},
                      {"iteration_budget", static_cast<double>(sol.iteration_budget)},
                      {"residual", sol.residual},
                      {"uniqueness_gap", uniqueness},
                      {"consistency_gap", consistency},
                      {"consistency_allowed", consistency_allowed},
                      {"holder_constant", holder.constant}},
                     {}};
    ctx.picard_log = std::move(sol);
    return out;
}

CheckOutcome check_excursions(PathContext& ctx) {
    const auto& x = ctx.family().limit_estimate;
    const auto set = decompose_excursions(x, 0.0);
    std::vector<char> covered(x.size(), 0);
    std::size_t bad = 0;
    for (std::size_t i = 0; i < set.intervals.size(); ++i) {
        const auto& ex = set.intervals[i];
        for (std::size_t k = ex.first; k <= ex.last; ++k) covered[k] = 1;
        if (i > 0 && ex.first < set.intervals[i - 1].last + 2) ++bad;  // adjacent runs should have merged
    }
    for (std::size_t k = 0; k < x.size(); ++k) bad += (covered[k] != 0) != (x[k] > 0.0) ? 1 : 0;
    return {bad == 0,
            static_cast<double>(bad),
            0.0,
            {{"intervals", static_cast<double>(set.intervals.size())},
             {"closed_left", set.first_interval_closed_left ? 1.0 : 0.0}},
            {}};
}

CheckOutcome check_endpoint_limits(PathContext& ctx) {
    const auto& f = ctx.family();
    const double tol = f.cauchy_gap + ctx.cfg().tolerances.endpoint;
    const auto set = decompose_excursions(f.limit_estimate, 0.0);
    const auto report = verify_endpoint_limits(f.limit_estimate, f.grid, set, f.spec, ctx.noise_holder(), tol);
    return {report.passed(),
            report.worst_excess(),
            0.0,
            {{"bounded_intervals", static_cast<double>(report.checks.size())}, {"endpoint_tolerance", tol}},
            {}};
}

CheckOutcome check_restart_identity(PathContext& ctx) {
    const auto& cfg = ctx.cfg();
    const TimeGrid fine_grid(cfg.grid.horizon(), 2 * cfg.grid.steps());
    const auto fine_noise = make_noise(cfg, fine_grid, ctx.index());
    const auto coarse_noise = restrict_path(fine_noise, 2);
    const FamilyOptions options{cfg.tolerances.tol_mono, cfg.rule, false};
    const auto coarse = build_family(cfg.spec, cfg.grid, coarse_noise.values, noise_label(cfg, coarse_noise) + ":restricted",
                                     cfg.ladder, options);
    const auto fine = build_family(cfg.spec, fine_grid, fine_noise.values, noise_label(cfg, fine_noise), cfg.ladder,
                                   options);
    const double threshold = coarse.cauchy_gap + cfg.tolerances.endpoint;
    const auto windows = residual_refinement(coarse, fine, threshold, cfg.residual.margin,
                                             cfg.residual.min_interior_nodes, ctx.floor());
    double worst = 0.0;
    bool passed = true;
    for (const auto& w : windows) {
        worst = std::max(worst, w.coarse_residual > 0.0 ? w.fine_residual / w.coarse_residual : 0.0);
        passed = passed && w.decreased();
    }
    return {passed, worst, 1.0, {{"windows", static_cast<double>(windows.size())}}, {}};
}

CheckOutcome check_initial_identity(PathContext& ctx) {
    const auto& f = ctx.family();
    const auto r = verify_initial_identity(f, f.cauchy_gap + ctx.cfg().tolerances.endpoint, ctx.cfg().residual.margin,
                                           ctx.floor());
    return {r.passed(), r.sup_residual, r.budget, {{"window_end", static_cast<double>(r.window_end)}}, {}};
}

using CheckFn = CheckOutcome (*)(PathContext&);

const std::map<std::string, CheckFn>& check_table() {
    static const std::map<std::string, CheckFn> table{
        {"comparison", check_comparison},
        {"nestedness", check_nestedness},
        {"upper_bound", check_upper_bound},
        {"measure_decay", check_measure_decay},
        {"nonnegativity", check_nonnegativity},
        {"singular_integral", check_singular_integral},
        {"compensator", check_compensator},
        {"eps_continuity", check_eps_continuity},
        {"picard", check_picard},
        {"excursions", check_excursions},
        {"endpoint_limits", check_endpoint_limits},
        {"restart_identity", check_restart_identity},
        {"initial_identity", check_initial_identity},
    };
    return table;
}

void write_path_files(PathContext& ctx, const std::filesystem::path& dir, const std::string& hash) {
    const std::size_t index = ctx.index();
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw std::runtime_error("path " + std::to_string(index) + ": cannot create '" + dir.string() + "'");
    const Metadata meta{{"config_hash", hash}};

    {
        const auto file = dir / "noise.csv";
        auto out = open_output(file, index);
        write_path_csv(ctx.noise(), out, meta);
        finish_output(out, file, index);
    }
    if (!ctx.has_family()) return;
    const auto& f = ctx.family();
    {
        const auto file = dir / "family.csv";
        auto out = open_output(file, index);
        write_family_csv(f, out, {{"config_hash", hash}, {"master_seed", std::to_string(ctx.cfg().master_seed)}});
        finish_output(out, file, index);
    }
    {
        const auto set = decompose_excursions(f.limit_estimate, 0.0);
        std::vector<std::optional<double>> residuals(set.intervals.size());
        for (std::size_t i = 0; i < set.intervals.size(); ++i) {
            try {
                residuals[i] = restart_residual(f.limit_estimate, f.noise, f.grid, f.spec, set, i,
                                                ctx.cfg().residual.margin, ctx.floor())
                                   .sup_residual;
            } catch (const IntervalTooShort&) {
            }
        }
        const auto file = dir / "excursions.csv";
        auto out = open_output(file, index);
        write_excursion_csv(set, f.limit_estimate, f.grid, residuals, out,
                            {{"config_hash", hash}, {"master_seed", std::to_string(ctx.cfg().master_seed)}});
        finish_output(out, file, index);
    }
    if (ctx.picard_log) {
        const auto file = dir / "picard_log.csv";
        auto out = open_output(file, index);
        write_iteration_log(*ctx.picard_log, out);
        finish_output(out, file, index);
    }
}

std::string utc_timestamp() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    std::ostringstream out;
    out << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
    return out.str();
}

json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

PathOutcome evaluate_path(const ExperimentConfig& cfg, std::size_t path_index,
                          const std::optional<std::filesystem::path>& csv_dir) {
    PathContext ctx(cfg, path_index);
    PathOutcome out;
    out.path_index = path_index;
    for (const auto& id : cfg.checks) {
        const auto start = std::chrono::steady_clock::now();
        CheckOutcome outcome;
        try {
            outcome = check_table().at(id)(ctx);
        } catch (const std::exception& e) {
            outcome = CheckOutcome{false, kNaN, kNaN, {}, e.what()};
        }
        outcome.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
        out.checks.emplace(id, std::move(outcome));
    }
    if (csv_dir) write_path_files(ctx, *csv_dir, config_hash(cfg));
    return out;
}

CampaignResult run_campaign(const ExperimentConfig& cfg, bool write_files) {
    const auto started = std::chrono::steady_clock::now();
    const std::string hash = config_hash(cfg);
    if (write_files) {
        std::error_code ec;
        std::filesystem::create_directories(cfg.output_dir, ec);
        if (ec) throw std::runtime_error("cannot create output directory '" + cfg.output_dir.string() + "'");
    }

    CampaignResult result;
    result.paths.resize(cfg.paths);
    std::atomic<std::size_t> next{0};
    std::exception_ptr failure;
    std::mutex failure_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cfg.paths; i = next++) {
            try {
                std::optional<std::filesystem::path> dir;
                if (write_files && i < cfg.csv_paths) {
                    char name[32];
                    std::snprintf(name, sizeof name, "path_%04zu", i);
                    dir = cfg.output_dir / name;
                }
                result.paths[i] = evaluate_path(cfg, i, dir);
            } catch (...) {
                std::lock_guard lock(failure_mutex);
                if (!failure) failure = std::current_exception();
            }
        }
    };
    unsigned threads = cfg.threads ? cfg.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, cfg.paths));
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    if (failure) std::rethrow_exception(failure);

    json checks = json::array();
    bool all_passed = true;
    for (const auto& id : cfg.checks) {
        std::size_t passes = 0, fails = 0;
        double worst = -std::numeric_limits<double>::infinity();
        double tolerance_at_worst = kNaN;
        double seconds = 0.0;
        json failed = json::array();
        json failures = json::array();
        std::map<std::string, double> detail_max;
        double first_sum = 0.0, last_sum = 0.0;
        for (const auto& path : result.paths) {
            const auto& c = path.checks.at(id);
            seconds += c.seconds;
            if (c.passed) {
                ++passes;
            } else {
                ++fails;
                failed.push_back(path.path_index);
                json record{{"path", path.path_index}, {"value", number_or_null(c.value)}};
                if (!c.message.empty()) record["message"] = c.message;
                failures.push_back(record);
            }
            if (std::isfinite(c.value) && c.value > worst) {
                worst = c.value;
                tolerance_at_worst = c.tolerance;
            }
            for (const auto& [key, value] : c.details) {
                auto it = detail_max.find(key);
                if (it == detail_max.end() || value > it->second) detail_max[key] = value;
            }
            if (id == "measure_decay" && c.details.count("first_measure")) {
                first_sum += c.details.at("first_measure");
                last_sum += c.details.at("last_measure");
            }
        }
        const auto allow = cfg.allowances.count(id) ? cfg.allowances.at(id) : 0.0;
        const auto allowed = static_cast<std::size_t>(std::floor(allow * static_cast<double>(cfg.paths)));
        bool passed = fails <= allowed;

        json details;
        for (const auto& [key, value] : detail_max) details[key + "_max"] = number_or_null(value);
        if (id == "measure_decay") {
            const double mean_first = first_sum / static_cast<double>(cfg.paths);
            const double mean_last = last_sum / static_cast<double>(cfg.paths);
            details["mean_first_measure"] = mean_first;
            details["mean_last_measure"] = mean_last;
            const bool mean_decreased = !(mean_first > 0.0) || mean_last < mean_first;
            details["mean_decreased"] = mean_decreased;
            passed = passed && mean_decreased;
        }
        all_passed = all_passed && passed;

        checks.push_back({{"id", id},
                          {"anchor", std::string(check_anchor(id))},
                          {"pass", passes},
                          {"fail", fails},
                          {"allowed_failures", allowed},
                          {"passed", passed},
                          {"worst_value", number_or_null(worst)},
                          {"tolerance", number_or_null(tolerance_at_worst)},
                          {"seeds", cfg.paths},
                          {"failed_seeds", failed},
                          {"failures", failures},
                          {"details", details},
                          {"runtime_s", seconds}});
    }

    result.passed = all_passed;
    result.report = {{"tool", "sfbm"},
                     {"version", std::string(kVersion)},
                     {"config_hash", hash},
                     {"config", canonical_config(cfg)},
                     {"master_seed", cfg.master_seed},
                     {"paths", cfg.paths},
                     {"checks", checks},
                     {"passed", all_passed},
                     {"timestamp", utc_timestamp()},
                     {"runtime_s", std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count()}};

    if (write_files) {
        const auto file = cfg.output_dir / "report.json";
        std::ofstream out(file);
        if (!out) throw std::runtime_error("cannot write '" + file.string() + "'");
        out << result.report.dump(2) << '\n';
        if (!out) throw std::runtime_error("write failed for '" + file.string() + "'");
    }
    return result;
}

json strip_timing(const json& report) {
    if (report.is_object()) {
        json out = json::object();
        for (const auto& item : report.items()) {
            if (item.key() == "timestamp" || item.key() == "runtime_s") continue;
            out[item.key()] = strip_timing(item.value());
        }
        return out;
    }
    if (report.is_array()) {
        json out = json::array();
        for (const auto& v : report) out.push_back(strip_timing(v));
        return out;
    }
    return report;
}

std::string render_report(const json& report) {
    auto number = [](const json& v) -> std::string {
        if (!v.is_number()) return "-";
        char buf[32];
        std::snprintf(buf, sizeof buf, "%.3e", v.get<double>());
        return buf;
    };
    std::ostringstream out;
    out << "sfbm " << report.value("version", "?") << "  config " << report.value("config_hash", "?")
        << "  seed " << report.value("master_seed", json(0)).dump() << "  paths " << report.value("paths", json(0)).dump()
        << '\n';
    char line[256];
    std::snprintf(line, sizeof line, "%-18s %6s %6s %7s %11s %11s  %s\n", "check", "pass", "fail", "allowed", "worst",
                  "tolerance", "status");
    out << line;
    for (const auto& c : report.at("checks")) {
        std::snprintf(line, sizeof line, "%-18s %6llu %6llu %7llu %11s %11s  %s\n",
                      c.at("id").get<std::string>().c_str(), c.at("pass").get<unsigned long long>(),
                      c.at("fail").get<unsigned long long>(), c.at("allowed_failures").get<unsigned long long>(),
                      number(c.at("worst_value")).c_str(), number(c.at("tolerance")).c_str(),
                      c.at("passed").get<bool>() ? "PASS" : "FAIL");
        out << line;
    }
    out << "overall: " << (report.value("passed", false) ? "PASS" : "FAIL") << '\n';
    return out.str();
}

}  // namespace sfbm
