// Acceptance suite: one PASS/FAIL line per criterion at the scales of the
// default configuration document. Verdicts, tables and the covariance fixture
// are written under --out.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iomanip>
#include <iostream>
#include <iterator>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "lorentz/errors.hpp"
#include "lorentz/experiments.hpp"
#include "lorentz/io.hpp"
#include "lorentz/recurrence.hpp"
#include "naive.hpp"

using namespace lorentz;
namespace fs = std::filesystem;

namespace {

struct Line {
    bool pass{false};
    std::string detail;
};

std::string fmt(double x, int digits = 4) {
    std::ostringstream os;
    os << std::setprecision(digits) << x;
    return os.str();
}

class Suite {
public:
    Suite(ParsedConfig pc, fs::path out, int workers, std::uint64_t seed)
        : pc_(std::move(pc)), out_(std::move(out)), workers_(workers), seed_(seed) {}

    Verdict record(Verdict v, double seconds) {
        write_verdict(out_, v);
        RunManifest m;
        m.config_digest = pc_.digest;
        m.seed = seed_;
        m.experiment = v.name;
        m.parameters = v.parameters;
        m.version = tool_version();
        m.wall_clock_seconds = seconds;
        m.events = v.statistics.contains("events") ? v.statistics["events"].get<std::uint64_t>() : 0;
        m.workers = workers_;
        m.pass = v.pass;
        append_manifest(out_, m);
        return v;
    }

    template <class Fn>
    Verdict timed(Fn&& fn) {
        const auto t0 = std::chrono::steady_clock::now();
        Verdict v = fn();
        return record(std::move(v), std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count());
    }

    const ScattererConfig& config() const { return pc_.config; }
    const ExperimentParams& params() const { return pc_.params; }
    int workers() const { return workers_; }
    std::uint64_t seed() const { return seed_; }
    const std::optional<SigmaFixture>& fixture() const { return fixture_; }
    void set_fixture(const SigmaFixture& f) {
        fixture_ = f;
        write_fixture(out_ / "sigma2.json", f, pc_.digest);
    }
    std::optional<Verdict>& measures() { return measures_; }

private:
    ParsedConfig pc_;
    fs::path out_;
    int workers_;
    std::uint64_t seed_;
    std::optional<SigmaFixture> fixture_;
    std::optional<Verdict> measures_;
};

std::string count_of(const Json& j, std::uint64_t samples) {
    return std::to_string(j.get<std::uint64_t>()) + " of " + std::to_string(samples);
}

const SigmaFixture& need_fixture(const Suite& s) {
    if (!s.fixture()) throw MissingFixture("MissingFixture: criterion 5 did not produce the covariance fixture");
    return *s.fixture();
}

Line invariance(Suite& s) {
    const Verdict v = s.timed([&] { return exp_invariance(s.params().invariance, s.seed(), s.config(), s.workers()); });
    const auto& m = v.statistics["map"];
    const auto& f = v.statistics["flow"];
    return {v.pass, "map chi2 " + fmt(m["statistic"].get<double>()) + " vs 99% quantile " +
                        fmt(m["critical"].get<double>()) + "; flow chi2 " + fmt(f["statistic"].get<double>()) +
                        " vs " + fmt(f["critical"].get<double>()) + "; samples " +
                        std::to_string(s.params().invariance.samples)};
}

Line centering(Suite& s) {
    const Verdict v = s.timed([&] { return exp_centering(s.params().centering, s.seed(), s.config(), s.workers()); });
    const auto& mean = v.statistics["mean"];
    return {v.pass, "mean (" + fmt(mean[0].get<double>(), 3) + ", " + fmt(mean[1].get<double>(), 3) + "), max |z| " +
                        fmt(v.statistics["max_z"].get<double>(), 3) + " <= " + fmt(s.params().centering.max_z)};
}

const Verdict& measures(Suite& s) {
    if (!s.measures())
        s.measures() =
            s.timed([&] { return exp_measure_lemmas(s.params().measures, s.seed(), s.config(), s.workers()); });
    return *s.measures();
}

Line measure_kind(Suite& s, const std::string& kind, const std::string& label) {
    const Verdict& v = measures(s);
    bool pass = true;
    std::string detail = label + " ratios";
    for (const auto& t : v.tables) {
        if (t.name != "measures") continue;
        for (const auto& row : t.rows) {
            if (row[0] != kind) continue;
            const double ratio = std::stod(row[7]);
            pass = pass && std::abs(ratio - 1.0) <= s.params().measures.tolerance;
            detail += " eps=" + row[1] + ":" + fmt(ratio, 5);
        }
    }
    return {pass, detail + " (band +/-" + fmt(s.params().measures.tolerance) + ")"};
}

Line covariance(Suite& s) {
    SigmaFixture f;
    const Verdict v = s.timed(
        [&] { return exp_covariance(s.params().covariance, s.seed(), s.config(), s.workers(), f); });
    s.set_fixture(f);
    const auto& st = v.statistics;
    return {v.pass, "direct xx " + fmt(f.sigma2.xx) + " yy " + fmt(f.sigma2.yy) + " xy " + fmt(f.sigma2.xy, 2) +
                        "; n-stability xx " + fmt(st["stability"][0]["sigma2"]["xx"].get<double>()) + " (n=" +
                        std::to_string(st["stability"][0]["n"].get<std::uint64_t>()) + ") vs " +
                        fmt(st["stability"][1]["sigma2"]["xx"].get<double>()) + " (n=" +
                        std::to_string(st["stability"][1]["n"].get<std::uint64_t>()) + "); methods agree " + (st["methods_agree"].get<bool>() ? "yes" : "no") + ", diagonal equal " +
                        (st["diagonal_equal"].get<bool>() ? "yes" : "no") + ", n-stable " +
                        (st["n_stable"].get<bool>() ? "yes" : "no") + "; beta " + fmt(f.beta.beta)};
}

Line llt(Suite& s) {
    const SigmaFixture& f = need_fixture(s);
    const Verdict v = s.timed([&] { return exp_llt(s.params().llt, s.seed(), f, s.config(), s.workers()); });
    std::string detail = "P/prediction at l=0:";
    for (const auto& t : v.tables) {
        if (t.name != "llt") continue;
        for (const auto& row : t.rows)
            if (row[1] == "0" && row[2] == "0") detail += " n=" + row[0] + ":" + fmt(std::stod(row[9]), 4);
    }
    return {v.pass, detail + " (band +/-" + fmt(s.params().llt.band) + "); spread " +
                        fmt(v.statistics["n_times_p_spread"].get<double>(), 3)};
}

Line exp_law(Suite& s) {
    const Verdict v = s.timed([&] { return exp_exponential_law(s.params().exp_law, s.seed(), s.config(), s.workers()); });
    return {v.pass, "KS return " + fmt(v.statistics["ks_return"]["statistic"].get<double>(), 3) + ", KS entrance " +
                        fmt(v.statistics["ks_entrance"]["statistic"].get<double>(), 3) + " (limit " +
                        fmt(s.params().exp_law.ks_max) + ")"};
}

Line mixture(Suite& s) {
    const Verdict v = s.timed([&] { return exp_mixture_law(s.params().mixture_law, s.seed(), s.config(), s.workers()); });
    return {v.pass, "KS exponential " + fmt(v.statistics["ks_exponential"]["statistic"].get<double>(), 3) +
                        ", KS mixture " + fmt(v.statistics["ks_mixture"]["statistic"].get<double>(), 3) + " (limit " +
                        fmt(s.params().mixture_law.ks_max) + ")"};
}

Line position(Suite& s) {
    const SigmaFixture& f = need_fixture(s);
    const Verdict v = s.timed(
        [&] { return exp_position_return_law(s.params().position_return, s.seed(), f, s.config(), s.workers()); });
    const auto& st = v.statistics;
    return {v.pass, "KS " + fmt(st["ks"]["statistic"].get<double>(), 3) + " (limit " + fmt(s.params().position_return.ks_max) +
                        ") on [0, " + fmt(st["ks"]["range_upper"].get<double>(), 3) + "]; returns at t=eps " +
                        count_of(st["returns_at_eps"], s.params().position_return.samples) + "; bracketing " +
                        (st["bracketing"].get<bool>() ? "ok" : "violated") + ", monotone " +
                        (st["monotone"].get<bool>() ? "ok" : "violated")};
}

Line phase(Suite& s) {
    const SigmaFixture& f = need_fixture(s);
    const Verdict v = s.timed(
        [&] { return exp_phase_return_law(s.params().phase_return, s.seed(), f, s.config(), s.workers()); });
    const auto& st = v.statistics;
    return {v.pass, "max |S - 1/(1+beta0 t)| " + fmt(st["max_pointwise_deviation"].get<double>(), 3) + " at t=" +
                        fmt(st["at"].get<double>(), 3) + " (limit " + fmt(s.params().phase_return.tolerance) +
                        "); returns at t=eps " + count_of(st["returns_at_eps"], s.params().phase_return.samples) +
                        "; bracketing " +
                        (st["bracketing"].get<bool>() ? "ok" : "violated") + ", monotone " +
                        (st["monotone"].get<bool>() ? "ok" : "violated")};
}

Line rates(Suite& s) {
    const SigmaFixture* f = s.fixture() ? &*s.fixture() : nullptr;
    const Verdict v = s.timed(
        [&] { return exp_recurrence_rates(s.params().rates, s.seed(), s.config(), s.workers(), f); });
    std::string detail = "medians";
    for (const auto& m : v.statistics["w_bar_medians"]) detail += " " + fmt(m.get<double>(), 3);
    return {v.pass, detail + " in [" + fmt(s.params().rates.band_lo) + ", " + fmt(s.params().rates.band_hi) +
                        "]; slope " + fmt(v.statistics["trend_slope"].get<double>(), 3) + " (|slope| <= " +
                        fmt(s.params().rates.max_slope) + ")"};
}

// Independent map coordinates of the brute-force flight from psi(m).
struct NaiveStep {
    Cell cell;
    int disk{-1};
    double r{0.0};
    double phi{0.0};
    double tau{0.0};
};

NaiveStep naive_step(const MapPoint& m, const ScattererConfig& c) {
    const PhasePoint x = psi(m, c);
    const auto h = naive::collision(x.q, x.v, c);
    if (!h) throw LorentzError("naive collision finder found nothing");
    const Vec2 q = x.q + h->t * x.v;
    const Vec2 n = (q - h->center) * (1.0 / h->radius);
    const Vec2 v = naive::mirror(x.v, n);
    double theta = std::atan2(n.y, n.x);
    if (theta < 0.0) theta += 2.0 * std::numbers::pi;
    const double phi = std::atan2(n.x * v.y - n.y * v.x, n.x * v.x + n.y * v.y);
    return {h->cell, h->disk, theta * h->radius, phi, h->t};
}

Line oracles(Suite& s) {
    const ScattererConfig& c = s.config();
    // dense-sampling corpus
    const int trajectories = 100;
    const double cap = 30.0;
    double worst = 0.0;
    double worst_drift = 0.0;
    int mismatched = 0, hits = 0, compared = 0;
    for (int k = 0; k < trajectories; ++k) {
        Rng rng = sample_rng(s.seed(), "oracle_corpus", static_cast<std::uint64_t>(k));
        const PhasePoint x = sample_free_phase(rng, c);
        double drift = 0.0;
        const auto traj = naive::Trajectory::shadow(x.q, x.v, cap + 2.0, c, drift);
        worst_drift = std::max(worst_drift, drift);
        const std::vector<std::tuple<ReturnKind, naive::Metric, double>> cases{
            {ReturnKind::Phase, naive::Metric::Phase, s.params().phase_return.eps},
            {ReturnKind::Position, naive::Metric::Position, s.params().position_return.eps},
            {ReturnKind::PositionModulo, naive::Metric::PositionModulo, s.params().position_return.eps}};
        for (const auto& [kind, metric, eps] : cases) {
            const ReturnOutcome r = flow_returns(x, kind, {eps}, cap, c).front();
            const auto ref = naive::dense_return(traj, eps, cap, metric);
            ++compared;
            if (r.hit() != ref.has_value()) {
                ++mismatched;
                continue;
            }
            if (ref) {
                ++hits;
                worst = std::max(worst, std::abs(r.value - *ref));
            }
        }
    }
    // step_T against the brute-force flight
    const auto pts = sample_mu_bar(s.seed() + 0x5eed, 10000, c);
    double step_err = 0.0;
    int step_mismatch = 0;
    for (const auto& m : pts) {
        const MapStep st = step_T(m, c);
        const NaiveStep ref = naive_step(m, c);
        if (!(st.next.cell == ref.cell) || st.next.obstacle != ref.disk) {
            ++step_mismatch;
            continue;
        }
        step_err = std::max({step_err, arc_distance(st.next.r, ref.r, c.perimeter(static_cast<std::size_t>(ref.disk))),
                             std::abs(st.next.phi - ref.phi), std::abs(st.tau - ref.tau)});
    }
    const bool pass = mismatched == 0 && worst <= 1e-3 && worst_drift <= 1e-9 && step_mismatch == 0 && step_err <= 1e-8;
    return {pass, std::to_string(trajectories) + " trajectories x 3 radii (" + std::to_string(hits) + " returns of " +
                      std::to_string(compared) + "): max |event - dense| " + fmt(worst, 3) + ", flight drift " + fmt(worst_drift, 2) + ", outcome mismatches " +
                      std::to_string(mismatched) + "; step_T on " + std::to_string(pts.size()) + " points: max error " +
                      fmt(step_err, 3) + ", obstacle mismatches " + std::to_string(step_mismatch)};
}

std::map<std::string, std::string> read_outputs(const fs::path& dir) {
    std::map<std::string, std::string> files;
    for (const auto& e : fs::directory_iterator(dir)) {
        if (e.path().filename() == "manifest.jsonl") continue;
        std::ifstream in(e.path(), std::ios::binary);
        files[e.path().filename().string()] = {std::istreambuf_iterator<char>(in), {}};
    }
    return files;
}

// Small instances of every experiment, written to `dir`.
void small_run(const ScattererConfig& c, std::uint64_t seed, int workers, const fs::path& dir, const std::string& digest) {
    fs::remove_all(dir);
    ExperimentParams p;
    p.invariance.samples = 20000;
    p.centering.samples = 20000;
    p.measures.samples = 20000;
    p.covariance.fixture_n = 200;
    p.covariance.stability_n = {100, 300};
    p.covariance.samples = 20000;
    p.covariance.max_lag = 30;
    p.llt.n = {100, 200};
    p.llt.samples = 20000;
    p.exp_law.centers = 4;
    p.exp_law.samples_per_center = 200;
    p.exp_law.eps = 0.04;
    p.mixture_law.samples = 500;
    p.mixture_law.max_cap = 100000;
    p.position_return.samples = 500;
    p.position_return.time_cap = 1000;
    p.phase_return.samples = 300;
    p.phase_return.time_cap = 2000;
    p.phase_return.grid_hi = 0.9;
    p.rates.eps = {0.04, 0.02};
    p.rates.samples = 200;
    p.rates.cap_scale = 50;
    p.rates.extended_samples = 20;
    p.rates.extended_cap = 2000;
    p.rates.position_eps = {0.3, 0.2};
    p.rates.position_samples = 50;
    p.rates.position_time_cap = 500;
    p.rates.min_uncensored = 10;
    p.decay.samples = 20000;
    p.decay.max_lag = 30;
    p.decay.by_lag = 30;

    write_verdict(dir, exp_invariance(p.invariance, seed, c, workers));
    write_verdict(dir, exp_centering(p.centering, seed, c, workers));
    write_verdict(dir, exp_measure_lemmas(p.measures, seed, c, workers));
    SigmaFixture f;
    write_verdict(dir, exp_covariance(p.covariance, seed, c, workers, f));
    write_fixture(dir / "sigma2.json", f, digest);
    write_verdict(dir, exp_llt(p.llt, seed, f, c, workers));
    write_verdict(dir, exp_decay(p.decay, seed, c, workers));
    write_verdict(dir, exp_exponential_law(p.exp_law, seed, c, workers));
    write_verdict(dir, exp_mixture_law(p.mixture_law, seed, c, workers));
    write_verdict(dir, exp_position_return_law(p.position_return, seed, f, c, workers));
    write_verdict(dir, exp_phase_return_law(p.phase_return, seed, f, c, workers));
    write_verdict(dir, exp_recurrence_rates(p.rates, seed, c, workers, &f));
    RunManifest m;
    m.config_digest = digest;
    m.experiment = "small_run";
    m.workers = workers;
    append_manifest(dir, m);
}

Line reproducibility(Suite& s, const fs::path& out) {
    const fs::path base = out / "reproducibility";
    const std::string digest = sha256_hex(canonical_json(default_config_document()));
    small_run(s.config(), s.seed(), 1, base / "w1_a", digest);
    small_run(s.config(), s.seed(), 1, base / "w1_b", digest);
    small_run(s.config(), s.seed(), 3, base / "w3", digest);
    const auto a = read_outputs(base / "w1_a");
    const auto b = read_outputs(base / "w1_b");
    const auto c = read_outputs(base / "w3");
    std::size_t bytes = 0;
    for (const auto& [name, content] : a) bytes += content.size();
    const bool repeat = a == b;
    const bool workers = a == c;
    return {repeat && workers && a.size() > 20,
            std::to_string(a.size()) + " CSV/JSON files (" + std::to_string(bytes) + " bytes): repeated run " +
                (repeat ? "identical" : "DIFFERS") + ", workers 1 vs 3 " + (workers ? "identical" : "DIFFERS")};
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Acceptance criteria"};
    std::string out = "acceptance_out";
    int workers = 0;
    std::vector<int> only;
    app.add_option("--out", out, "Output directory");
    app.add_option("--workers", workers, "Worker threads, 0 = all cores");
    app.add_option("--only", only, "Run only these criteria");
    CLI11_PARSE(app, argc, argv);

    fs::create_directories(out);
    ParsedConfig pc = parse_config(default_config_document());
    const std::uint64_t seed = pc.seed;
    Suite suite(std::move(pc), out, workers, seed);

    const std::vector<std::pair<std::string, std::function<Line()>>> criteria{
        {"invariance", [&] { return invariance(suite); }},
        {"centering", [&] { return centering(suite); }},
        {"projected phase-ball measure", [&] { return measure_kind(suite, "phase_ball", "mu/4eps^2"); }},
        {"position-tube measure", [&] { return measure_kind(suite, "a_eps", "mu/(4 pi eps)"); }},
        {"covariance", [&] { return covariance(suite); }},
        {"local limit theorem", [&] { return llt(suite); }},
        {"exponential law", [&] { return exp_law(suite); }},
        {"mixture law", [&] { return mixture(suite); }},
        {"position-return law", [&] { return position(suite); }},
        {"phase-return law", [&] { return phase(suite); }},
        {"recurrence rate", [&] { return rates(suite); }},
        {"oracle equivalence", [&] { return oracles(suite); }},
        {"reproducibility", [&] { return reproducibility(suite, out); }},
    };

    std::ofstream summary(fs::path(out) / "acceptance.txt", std::ios::binary);
    int evaluated = 0, passed = 0;
    for (std::size_t i = 0; i < criteria.size(); ++i) {
        const int number = static_cast<int>(i) + 1;
        // criterion 5 feeds the fixture to 6, 9 and 10
        const bool wanted = only.empty() || std::find(only.begin(), only.end(), number) != only.end();
        const bool feeds = number == 5 && std::any_of(only.begin(), only.end(), [](int n) { return n == 6 || n == 9 || n == 10; });
        if (!wanted && !feeds) continue;
        const auto t0 = std::chrono::steady_clock::now();
        Line line;
        try {
            line = criteria[i].second();
        } catch (const std::exception& e) {
            line = {false, std::string("error: ") + e.what()};
        }
        if (!wanted) continue;
        const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        std::ostringstream os;
        os << (line.pass ? "PASS" : "FAIL") << "  " << std::setw(2) << number << "  " << criteria[i].first << ": "
           << line.detail << "  [" << std::fixed << std::setprecision(1) << secs << " s]";
        std::cout << os.str() << std::endl;
        summary << os.str() << "\n" << std::flush;
        ++evaluated;
        passed += line.pass;
    }
    std::ostringstream os;
    os << "acceptance: " << evaluated << " criteria evaluated, " << passed << " PASS, " << evaluated - passed << " FAIL";
    std::cout << os.str() << std::endl;
    summary << os.str() << "\n";
    return passed == evaluated ? 0 : 1;
}
