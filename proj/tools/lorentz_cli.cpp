// Command-line front end: validates a configuration, runs the experiments and
// writes their verdicts, tables and manifests under --out.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/io.hpp"

namespace fs = std::filesystem;
using namespace lorentz;

namespace {

struct Options {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::string out{"results"};
    int workers{0};
    std::optional<double> cap;
    bool invariance{false};
};

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw SchemaError("SchemaError: cannot read config file " + path);
    return {std::istreambuf_iterator<char>(in), {}};
}

class Runner {
public:
    Runner(const Options& opt, ParsedConfig parsed)
        : opt_(opt), pc_(std::move(parsed)), seed_(opt.seed.value_or(pc_.seed)), out_(opt.out) {
        if (opt.cap) {
            pc_.params.position_return.time_cap = *opt.cap;
            pc_.params.phase_return.time_cap = *opt.cap;
            pc_.params.rates.position_time_cap = *opt.cap;
        }
    }

    [[nodiscard]] bool all_passed() const { return all_pass_; }
    const ParsedConfig& parsed() const { return pc_; }

    template <class Fn>
    void run(const std::string& name, Fn&& fn) {
        std::cout << name << " ..." << std::flush;
        const auto t0 = std::chrono::steady_clock::now();
        const Verdict v = fn();
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        write_verdict(out_, v);
        RunManifest m;
        m.config_digest = pc_.digest;
        m.seed = seed_;
        m.experiment = v.name;
        m.parameters = v.parameters;
        m.version = tool_version();
        m.wall_clock_seconds = secs;
        m.events = v.statistics.contains("events") ? v.statistics["events"].get<std::uint64_t>() : 0;
        m.workers = opt_.workers;
        m.pass = v.pass;
        append_manifest(out_, m);
        std::cout << " " << (v.pass ? "PASS" : "FAIL") << " (" << secs << " s)\n";
        all_pass_ = all_pass_ && v.pass;
    }

    void validate() const {
        const auto& c = pc_.config;
        std::cout << "disks: " << c.size() << "\n"
                  << "margin: " << c.min_gap() << "\n"
                  << "tau_minus: " << c.tau_minus() << "\n"
                  << "tau_plus: " << c.tau_plus() << "\n"
                  << "gamma: " << c.gamma() << "\n"
                  << "config_digest: " << pc_.digest << "\n";
    }

    void invariance() {
        run("invariance", [&] { return exp_invariance(pc_.params.invariance, seed_, pc_.config, opt_.workers); });
    }

    void constants() {
        run("centering", [&] { return exp_centering(pc_.params.centering, seed_, pc_.config, opt_.workers); });
        SigmaFixture fixture;
        run("covariance",
            [&] { return exp_covariance(pc_.params.covariance, seed_, pc_.config, opt_.workers, fixture); });
        write_fixture(fixture_path(), fixture, pc_.digest);
        std::cout << "beta: " << fixture.beta.beta << "  beta0: " << fixture.beta.beta0
                  << "  beta1: " << fixture.beta.beta1 << "\nfixture: " << fixture_path().string() << "\n";
    }

    void llt() {
        const SigmaFixture f = read_fixture(fixture_path(), pc_.digest);
        run("llt", [&] { return exp_llt(pc_.params.llt, seed_, f, pc_.config, opt_.workers); });
    }

    void decay() {
        run("decay", [&] { return exp_decay(pc_.params.decay, seed_, pc_.config, opt_.workers); });
    }

    void measures() {
        run("measures", [&] { return exp_measure_lemmas(pc_.params.measures, seed_, pc_.config, opt_.workers); });
    }

    void exp_law() {
        run("exp-law", [&] { return exp_exponential_law(pc_.params.exp_law, seed_, pc_.config, opt_.workers); });
    }

    void mixture_law() {
        run("mixture-law", [&] { return exp_mixture_law(pc_.params.mixture_law, seed_, pc_.config, opt_.workers); });
    }

    void rates() {
        std::optional<SigmaFixture> f;
        if (fs::exists(fixture_path())) f = read_fixture(fixture_path(), pc_.digest);
        run("rates", [&] {
            return exp_recurrence_rates(pc_.params.rates, seed_, pc_.config, opt_.workers, f ? &*f : nullptr);
        });
    }

    void position_return() {
        const SigmaFixture f = read_fixture(fixture_path(), pc_.digest);
        run("position-return", [&] {
            return exp_position_return_law(pc_.params.position_return, seed_, f, pc_.config, opt_.workers);
        });
    }

    void phase_return() {
        const SigmaFixture f = read_fixture(fixture_path(), pc_.digest);
        run("phase-return", [&] {
            return exp_phase_return_law(pc_.params.phase_return, seed_, f, pc_.config, opt_.workers);
        });
    }

private:
    [[nodiscard]] fs::path fixture_path() const { return out_ / "sigma2.json"; }

    const Options& opt_;
    ParsedConfig pc_;
    std::uint64_t seed_;
    fs::path out_;
    bool all_pass_{true};
};

int report(const Options& opt) {
    const Table t = collate_verdicts(opt.out);
    fs::create_directories(opt.out);
    std::ofstream(fs::path(opt.out) / "report.csv", std::ios::binary) << t.to_csv();
    if (t.rows.empty()) {
        std::cout << "no verdicts in " << opt.out << "\n";
        return 0;
    }
    for (const auto& r : t.rows) std::cout << r[1] << "  " << r[0] << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Recurrence and return-time experiments for the periodic Lorentz gas"};
    app.require_subcommand(1, 1);
    app.fallthrough();
    Options opt;
    app.add_option("--config", opt.config_path, "Configuration JSON (built-in default when omitted)");
    app.add_option("--seed", opt.seed, "Master seed (overrides the config)");
    app.add_option("--out", opt.out, "Output directory")->capture_default_str();
    app.add_option("--workers", opt.workers, "Worker threads, 0 = all cores")->check(CLI::NonNegativeNumber);
    app.add_option("--cap", opt.cap, "Time cap override for the flow return experiments")
        ->check(CLI::PositiveNumber);

    auto* validate = app.add_subcommand("validate", "Validate the configuration and print its margin and flight bounds");
    validate->add_flag("--invariance", opt.invariance, "Also run the invariance suite");
    app.add_subcommand("constants", "Centering, covariance (writes the sigma2.json fixture) and beta constants");
    app.add_subcommand("llt", "Local limit theorem check (needs the fixture)");
    app.add_subcommand("exp-law", "Exponential law of ball hitting and return times");
    app.add_subcommand("mixture-law", "Mixture law of map return times");
    app.add_subcommand("phase-return", "Phase-space return law on the reachable range (needs the fixture)");
    app.add_subcommand("position-return", "Position return law (needs the fixture)");
    app.add_subcommand("rates", "Recurrence rates");
    app.add_subcommand("measures", "Monte Carlo checks of the two measure identities");
    app.add_subcommand("decay", "Correlation decay of the cell shift");
    app.add_subcommand("all", "Every experiment in dependency order");
    app.add_subcommand("report", "Collate the verdicts in --out into report.csv");

    CLI11_PARSE(app, argc, argv);
    const std::string cmd = app.get_subcommands().front()->get_name();

    try {
        if (cmd == "report") return report(opt);
        const std::string document = opt.config_path.empty() ? default_config_document() : read_file(opt.config_path);
        Runner runner(opt, parse_config(document));
        if (cmd == "validate") {
            runner.validate();
            if (opt.invariance) runner.invariance();
        } else if (cmd == "constants") {
            runner.constants();
        } else if (cmd == "llt") {
            runner.llt();
        } else if (cmd == "exp-law") {
            runner.exp_law();
        } else if (cmd == "mixture-law") {
            runner.mixture_law();
        } else if (cmd == "phase-return") {
            runner.phase_return();
        } else if (cmd == "position-return") {
            runner.position_return();
        } else if (cmd == "rates") {
            runner.rates();
        } else if (cmd == "measures") {
            runner.measures();
        } else if (cmd == "decay") {
            runner.decay();
        } else if (cmd == "all") {
            runner.validate();
            runner.invariance();
            runner.constants();
            runner.llt();
            runner.decay();
            runner.measures();
            runner.exp_law();
            runner.mixture_law();
            runner.rates();
            runner.position_return();
            runner.phase_return();
            report(opt);
        }
        return runner.all_passed() ? 0 : 4;
    } catch (const SchemaError& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const NonPositiveMargin& e) {
        std::cerr << e.what() << "\n";
        return 1;
    } catch (const InfiniteHorizonSuspected& e) {
        std::cerr << e.what() << "\n";
        return 2;
    } catch (const MissingFixture& e) {
        std::cerr << e.what() << "\n";
        return 3;
    } catch (const LorentzError& e) {
        std::cerr << e.what() << "\n";
        return 4;
    }
}
