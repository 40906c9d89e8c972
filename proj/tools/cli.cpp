#include "cli.hpp"

#include "sfbm/campaign.hpp"
#include "sfbm/errors.hpp"
#include "sfbm/fbm.hpp"
#include "sfbm/limit.hpp"
#include "sfbm/path_io.hpp"
#include "sfbm/sde.hpp"

#include <CLI11.hpp>

#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

namespace sfbm::cli {

namespace {

struct NoiseFlags {
    double hurst = 0.25;
    std::size_t steps = 1024;
    double horizon = 1.0;
    std::uint64_t seed = 42;
    std::uint64_t path_index = 0;
    std::string method = "circulant";
    bool zero_noise = false;

    void attach(CLI::App& app) {
        app.add_option("--hurst", hurst, "Hurst index in (0, 1/2)")->capture_default_str();
        app.add_option("--steps", steps, "number of grid steps n")->capture_default_str();
        app.add_option("--horizon", horizon, "time horizon T")->capture_default_str();
        app.add_option("--seed", seed, "master seed")->capture_default_str();
        app.add_option("--path-index", path_index, "path index within the seed stream")->capture_default_str();
        app.add_option("--method", method, "cholesky | hosking | circulant")
            ->check(CLI::IsMember({"cholesky", "hosking", "circulant"}))
            ->capture_default_str();
    }

    FbmPath make() const {
        const TimeGrid grid(horizon, steps);
        const HurstParam h(hurst);
        const SeedRecord record{seed, path_index};
        if (zero_noise) return FbmPath{grid, h, record, parse_generator(method), std::vector<double>(grid.size(), 0.0)};
        return generate_fbm(grid, h, record, parse_generator(method));
    }

    std::string label(const FbmPath& path) const {
        return zero_noise ? "zero:n=" + std::to_string(steps) : path.reference();
    }
};

struct SpecFlags {
    double x0 = 1.0;
    double a = 1.0;
    double b = 0.0;
    double sigma = 1.0;
    std::string rule = "drift_implicit";

    void attach(CLI::App& app) {
        app.add_option("--x0", x0, "initial value X_0 > 0")->capture_default_str();
        app.add_option("--a", a, "singular drift coefficient a > 0")->capture_default_str();
        app.add_option("--b", b, "linear drift coefficient b >= 0")->capture_default_str();
        app.add_option("--sigma", sigma, "noise scale sigma > 0")->capture_default_str();
        app.add_option("--rule", rule, "drift_implicit | frozen_explicit")
            ->check(CLI::IsMember({"drift_implicit", "frozen_explicit"}))
            ->capture_default_str();
    }

    SdeSpec make(double hurst) const { return SdeSpec(x0, a, b, sigma, HurstParam(hurst)); }
};

// Runs `body` with the --out target (or stdout when empty).
void with_output(const std::string& path, std::ostream& fallback, const std::function<void(std::ostream&)>& body) {
    if (path.empty()) {
        body(fallback);
        return;
    }
    std::ofstream file(path);
    if (!file) throw std::runtime_error("cannot open '" + path + "' for writing");
    body(file);
    file.flush();
    if (!file) throw std::runtime_error("write failed for '" + path + "'");
}

}  // namespace

int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Numerical laboratory for a singular SDE driven by rough fractional Brownian motion", "sfbm"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    NoiseFlags noise;
    SpecFlags spec;
    std::string out_path;
    std::optional<int> status;

    auto* fbm = app.add_subcommand("fbm", "generate an fBm path and export it as CSV (t, value)");
    noise.attach(*fbm);
    fbm->add_option("--out", out_path, "output file (stdout when omitted)");
    bool archive = false;
    fbm->add_flag("--archive", archive, "write the text archive format instead of CSV");

    auto* solve = app.add_subcommand("solve", "solve the eps-regularized equation on one path");
    double eps = 1e-3;
    noise.attach(*solve);
    spec.attach(*solve);
    solve->add_option("--eps", eps, "regularization eps > 0")->capture_default_str();
    solve->add_flag("--zero-noise", noise.zero_noise, "drive with B = 0");
    solve->add_option("--out", out_path, "output file (stdout when omitted)");

    auto* ladder = app.add_subcommand("ladder", "build a shared-noise eps family and export it as CSV");
    double eps0 = 0.1, ratio = 0.5;
    std::size_t depth = 10;
    std::string preset;
    noise.attach(*ladder);
    spec.attach(*ladder);
    ladder->add_option("--eps0", eps0, "largest eps")->capture_default_str();
    ladder->add_option("--ratio", ratio, "ladder ratio in (0, 1)")->capture_default_str();
    ladder->add_option("--depth", depth, "ladder depth J")->capture_default_str();
    ladder->add_flag("--zero-noise", noise.zero_noise, "drive with B = 0");
    ladder->add_option("--preset", preset,
                       "deterministic: zero noise, X_0=a=1, b=0, H=1/4, T=1/2, n=2^14, eps0=0.1, ratio=0.5, J=20")
        ->check(CLI::IsMember({"deterministic"}));
    ladder->add_option("--out", out_path, "output file (stdout when omitted)");

    auto* verify = app.add_subcommand("verify", "run a verification campaign from a JSON config");
    std::string config_path, output_dir;
    unsigned threads = 0;
    verify->add_option("--config", config_path, "campaign config (JSON)")->required()->check(CLI::ExistingFile);
    verify->add_option("--output-dir", output_dir, "override the configured output directory");
    verify->add_option("--threads", threads, "worker threads (0 = all cores)");

    auto* report = app.add_subcommand("report", "render a stored JSON report as a table");
    std::string report_path;
    report->add_option("report", report_path, "report.json written by verify")->required()->check(CLI::ExistingFile);

    fbm->callback([&] {
        const auto path = noise.make();
        with_output(out_path, out, [&](std::ostream& os) {
            if (archive) {
                write_path_archive(path, os);
            } else {
                write_path_csv(path, os);
            }
        });
    });

    solve->callback([&] {
        const auto path = noise.make();
        const auto s = spec.make(noise.hurst);
        const auto sol =
            solve_regularized(s, eps, path.grid, path.values, noise.label(path), parse_step_rule(spec.rule));
        with_output(out_path, out, [&](std::ostream& os) {
            write_solution_csv(sol, path.values, os, {{"master_seed", std::to_string(noise.seed)}});
        });
    });

    ladder->callback([&] {
        if (preset == "deterministic") {
            noise.zero_noise = true;
            noise.hurst = 0.25;
            noise.horizon = 0.5;
            noise.steps = std::size_t{1} << 14;
            spec.x0 = 1.0;
            spec.a = 1.0;
            spec.b = 0.0;
            eps0 = 0.1;
            ratio = 0.5;
            depth = 20;
        }
        const auto path = noise.make();
        const auto s = spec.make(noise.hurst);
        FamilyOptions options;
        options.rule = parse_step_rule(spec.rule);
        const auto family =
            build_family(s, path.grid, path.values, noise.label(path), EpsilonLadder(eps0, ratio, depth), options);
        with_output(out_path, out, [&](std::ostream& os) {
            write_family_csv(family, os, {{"master_seed", std::to_string(noise.seed)}});
        });
        if (family.monotonicity.violations > 0) {
            err << "warning: " << family.monotonicity.violations << " ordering violations across the ladder\n";
        }
    });

    verify->callback([&] {
        auto config = load_config(config_path);
        if (!output_dir.empty()) config.output_dir = output_dir;
        if (threads) config.threads = threads;
        const auto result = run_campaign(config);
        out << render_report(result.report);
        out << "report: " << (config.output_dir / "report.json").string() << '\n';
        status = result.passed ? 0 : 1;
    });

    report->callback([&] {
        std::ifstream in(report_path);
        nlohmann::json doc;
        try {
            in >> doc;
        } catch (const nlohmann::json::exception& e) {
            throw DomainError("'" + report_path + "' is not a valid report: " + e.what());
        }
        out << render_report(doc);
    });

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion&) {
        out << kVersion << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        const auto* culprit = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << culprit->help();
        return kUsageError;
    } catch (const DomainError& e) {
        err << "error: " << e.what() << '\n';
        return kUsageError;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return 1;
    }
    return status.value_or(0);
}

}  // namespace sfbm::cli
