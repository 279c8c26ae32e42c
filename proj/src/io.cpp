#include "lorentz/io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>

#include <openssl/evp.h>

#include "lorentz/errors.hpp"

#ifndef LORENTZ_VERSION
#define LORENTZ_VERSION "0.0.0"
#endif

namespace lorentz {

namespace {

using Doc = nlohmann::json;

[[noreturn]] void schema(const std::string& where, const std::string& what) {
    throw SchemaError("SchemaError: " + where + ": " + what);
}

void only_keys(const Doc& obj, const std::string& where, std::initializer_list<const char*> keys) {
    if (!obj.is_object()) schema(where, "expected an object");
    for (const auto& [k, _] : obj.items()) {
        if (std::none_of(keys.begin(), keys.end(), [&](const char* key) { return k == key; }))
            schema(where, "unknown key \"" + k + "\"");
    }
}

double number(const Doc& v, const std::string& where) {
    if (!v.is_number()) schema(where, "expected a number");
    const double x = v.get<double>();
    if (!std::isfinite(x)) schema(where, "expected a finite number");
    return x;
}

std::uint64_t count(const Doc& v, const std::string& where) {
    if (!v.is_number_integer() || v.get<std::int64_t>() < 0) schema(where, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

Vec2 point(const Doc& v, const std::string& where) {
    if (!v.is_array() || v.size() != 2) schema(where, "expected [x, y]");
    return {number(v[0], where + "[0]"), number(v[1], where + "[1]")};
}

// Typed field readers: each leaves the target untouched when the key is absent.
struct Section {
    const Doc& obj;
    std::string where;

    [[nodiscard]] bool has(const char* key) const { return obj.contains(key); }
    [[nodiscard]] std::string at(const char* key) const { return where + "." + key; }

    void get(const char* key, double& out) const {
        if (has(key)) out = number(obj[key], at(key));
    }
    void get(const char* key, std::uint64_t& out) const {
        if (has(key)) out = count(obj[key], at(key));
    }
    void get(const char* key, int& out) const {
        if (!has(key)) return;
        const std::uint64_t v = count(obj[key], at(key));
        if (v > 1'000'000) schema(at(key), "value too large");
        out = static_cast<int>(v);
    }
    void get(const char* key, Vec2& out) const {
        if (has(key)) out = point(obj[key], at(key));
    }
    void get(const char* key, std::vector<double>& out) const {
        if (!has(key)) return;
        const Doc& a = obj[key];
        if (!a.is_array() || a.empty()) schema(at(key), "expected a non-empty array of numbers");
        out.clear();
        for (std::size_t i = 0; i < a.size(); ++i) out.push_back(number(a[i], at(key)));
    }
    void get(const char* key, std::vector<std::uint64_t>& out) const {
        if (!has(key)) return;
        const Doc& a = obj[key];
        if (!a.is_array() || a.empty()) schema(at(key), "expected a non-empty array of integers");
        out.clear();
        for (std::size_t i = 0; i < a.size(); ++i) out.push_back(count(a[i], at(key)));
    }
    void get(const char* key, std::vector<Cell>& out) const {
        if (!has(key)) return;
        const Doc& a = obj[key];
        if (!a.is_array() || a.empty()) schema(at(key), "expected a non-empty array of [x, y]");
        out.clear();
        for (const auto& e : a) {
            if (!e.is_array() || e.size() != 2 || !e[0].is_number_integer() || !e[1].is_number_integer())
                schema(at(key), "expected integer pairs");
            out.push_back(Cell{e[0].get<std::int64_t>(), e[1].get<std::int64_t>()});
        }
    }
};

void positive(double x, const std::string& where) {
    if (!(x > 0.0)) schema(where, "must be positive");
}

void read_experiments(const Doc& e, ExperimentParams& p) {
    only_keys(e, "experiments",
              {"invariance", "centering", "measures", "covariance", "llt", "exp_law", "mixture_law",
               "position_return", "phase_return", "rates", "decay"});
    if (e.contains("invariance")) {
        auto& q = p.invariance;
        only_keys(e["invariance"], "experiments.invariance",
                  {"samples", "map_steps", "arc_bins", "sine_bins", "flow_time", "spatial_bins", "angle_bins",
                   "level"});
        Section s{e["invariance"], "experiments.invariance"};
        s.get("samples", q.samples);
        s.get("map_steps", q.map_steps);
        s.get("arc_bins", q.arc_bins);
        s.get("sine_bins", q.sine_bins);
        s.get("flow_time", q.flow_time);
        s.get("spatial_bins", q.spatial_bins);
        s.get("angle_bins", q.angle_bins);
        s.get("level", q.level);
        if (q.arc_bins < 1 || q.sine_bins < 1 || q.spatial_bins < 1 || q.angle_bins < 1)
            schema("experiments.invariance", "bin counts must be >= 1");
        if (!(q.level > 0.0 && q.level < 1.0)) schema("experiments.invariance.level", "must lie in (0, 1)");
    }
    if (e.contains("centering")) {
        auto& q = p.centering;
        only_keys(e["centering"], "experiments.centering", {"samples", "n", "max_z"});
        Section s{e["centering"], "experiments.centering"};
        s.get("samples", q.samples);
        s.get("n", q.n);
        s.get("max_z", q.max_z);
        if (q.samples < 1000) schema("experiments.centering.samples", "must be >= 1000");
    }
    if (e.contains("measures")) {
        auto& q = p.measures;
        only_keys(e["measures"], "experiments.measures", {"eps", "samples", "center", "direction", "tolerance"});
        Section s{e["measures"], "experiments.measures"};
        s.get("eps", q.eps);
        s.get("samples", q.samples);
        s.get("center", q.center);
        s.get("direction", q.direction);
        s.get("tolerance", q.tolerance);
        for (double x : q.eps) positive(x, "experiments.measures.eps");
    }
    if (e.contains("covariance")) {
        auto& q = p.covariance;
        only_keys(e["covariance"], "experiments.covariance", {"fixture_n", "stability_n", "samples", "max_lag"});
        Section s{e["covariance"], "experiments.covariance"};
        s.get("fixture_n", q.fixture_n);
        s.get("stability_n", q.stability_n);
        s.get("samples", q.samples);
        s.get("max_lag", q.max_lag);
    }
    if (e.contains("llt")) {
        auto& q = p.llt;
        only_keys(e["llt"], "experiments.llt", {"n", "ell", "samples", "band", "flatness"});
        Section s{e["llt"], "experiments.llt"};
        s.get("n", q.n);
        s.get("ell", q.ell);
        s.get("samples", q.samples);
        s.get("band", q.band);
        s.get("flatness", q.flatness);
    }
    if (e.contains("exp_law")) {
        auto& q = p.exp_law;
        only_keys(e["exp_law"], "experiments.exp_law", {"centers", "eps", "samples_per_center", "cap_scale", "ks_max"});
        Section s{e["exp_law"], "experiments.exp_law"};
        s.get("centers", q.centers);
        s.get("eps", q.eps);
        s.get("samples_per_center", q.samples_per_center);
        s.get("cap_scale", q.cap_scale);
        s.get("ks_max", q.ks_max);
        positive(q.eps, "experiments.exp_law.eps");
        positive(q.cap_scale, "experiments.exp_law.cap_scale");
    }
    if (e.contains("mixture_law")) {
        auto& q = p.mixture_law;
        only_keys(e["mixture_law"], "experiments.mixture_law", {"eps", "samples", "cap_scale", "ks_max", "max_cap"});
        Section s{e["mixture_law"], "experiments.mixture_law"};
        s.get("eps", q.eps);
        s.get("samples", q.samples);
        s.get("cap_scale", q.cap_scale);
        s.get("ks_max", q.ks_max);
        s.get("max_cap", q.max_cap);
        positive(q.eps, "experiments.mixture_law.eps");
    }
    if (e.contains("position_return")) {
        auto& q = p.position_return;
        only_keys(e["position_return"], "experiments.position_return",
                  {"eps", "scaling_eps", "samples", "time_cap", "ks_max", "scaling_lo", "scaling_hi"});
        Section s{e["position_return"], "experiments.position_return"};
        s.get("eps", q.eps);
        s.get("scaling_eps", q.scaling_eps);
        s.get("samples", q.samples);
        s.get("time_cap", q.time_cap);
        s.get("ks_max", q.ks_max);
        s.get("scaling_lo", q.scaling_lo);
        s.get("scaling_hi", q.scaling_hi);
        positive(q.eps, "experiments.position_return.eps");
        if (!(q.time_cap > q.eps)) schema("experiments.position_return.time_cap", "must exceed eps");
    }
    if (e.contains("phase_return")) {
        auto& q = p.phase_return;
        only_keys(e["phase_return"], "experiments.phase_return",
                  {"eps", "eps_outer", "samples", "time_cap", "grid_lo", "grid_hi", "grid_step", "tolerance"});
        Section s{e["phase_return"], "experiments.phase_return"};
        s.get("eps", q.eps);
        s.get("eps_outer", q.eps_outer);
        s.get("samples", q.samples);
        s.get("time_cap", q.time_cap);
        s.get("grid_lo", q.grid_lo);
        s.get("grid_hi", q.grid_hi);
        s.get("grid_step", q.grid_step);
        s.get("tolerance", q.tolerance);
        positive(q.eps, "experiments.phase_return.eps");
        positive(q.grid_step, "experiments.phase_return.grid_step");
        if (!(q.time_cap > q.eps)) schema("experiments.phase_return.time_cap", "must exceed eps");
    }
    if (e.contains("rates")) {
        auto& q = p.rates;
        only_keys(e["rates"], "experiments.rates",
                  {"eps", "samples", "cap_scale", "band_lo", "band_hi", "max_slope", "min_uncensored",
                   "extended_samples", "extended_cap", "position_eps", "position_samples", "position_time_cap"});
        Section s{e["rates"], "experiments.rates"};
        s.get("eps", q.eps);
        s.get("samples", q.samples);
        s.get("cap_scale", q.cap_scale);
        s.get("band_lo", q.band_lo);
        s.get("band_hi", q.band_hi);
        s.get("max_slope", q.max_slope);
        s.get("min_uncensored", q.min_uncensored);
        s.get("extended_samples", q.extended_samples);
        s.get("extended_cap", q.extended_cap);
        s.get("position_eps", q.position_eps);
        s.get("position_samples", q.position_samples);
        s.get("position_time_cap", q.position_time_cap);
        for (double x : q.eps) positive(x, "experiments.rates.eps");
    }
    if (e.contains("decay")) {
        auto& q = p.decay;
        only_keys(e["decay"], "experiments.decay", {"samples", "max_lag", "by_lag"});
        Section s{e["decay"], "experiments.decay"};
        s.get("samples", q.samples);
        s.get("max_lag", q.max_lag);
        s.get("by_lag", q.by_lag);
    }
}

Doc parse_document(const std::string& document) {
    try {
        return Doc::parse(document);
    } catch (const Doc::parse_error& e) {
        throw SchemaError(std::string("SchemaError: not valid JSON: ") + e.what());
    }
}

Json sym_json(const Sym2& s) { return Json{{"xx", s.xx}, {"xy", s.xy}, {"yy", s.yy}}; }

Sym2 read_sym(const Doc& d, const std::string& where) {
    if (!d.is_object() || !d.contains("xx") || !d.contains("xy") || !d.contains("yy"))
        throw MissingFixture("MissingFixture: malformed " + where);
    return {d["xx"].get<double>(), d["xy"].get<double>(), d["yy"].get<double>()};
}

}  // namespace

std::string tool_version() { return LORENTZ_VERSION; }

std::string sha256_hex(const std::string& bytes) {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), md, &len, EVP_sha256(), nullptr) != 1)
        throw LorentzError("SHA-256 computation failed");
    static constexpr char hex[] = "0123456789abcdef";
    std::string out;
    out.reserve(2 * len);
    for (unsigned int i = 0; i < len; ++i) {
        out += hex[md[i] >> 4];
        out += hex[md[i] & 0xF];
    }
    return out;
}

std::string canonical_json(const std::string& document) { return parse_document(document).dump(); }

ParsedConfig parse_config(const std::string& document) {
    const Doc doc = parse_document(document);
    only_keys(doc, "config", {"disks", "horizon", "experiments", "seed"});
    if (!doc.contains("disks")) schema("config", "missing \"disks\"");
    const Doc& disks_doc = doc["disks"];
    if (!disks_doc.is_array() || disks_doc.empty()) schema("disks", "expected a non-empty array");
    std::vector<Disk> disks;
    for (std::size_t i = 0; i < disks_doc.size(); ++i) {
        const std::string where = "disks[" + std::to_string(i) + "]";
        const Doc& d = disks_doc[i];
        only_keys(d, where, {"center", "radius"});
        if (!d.contains("center")) schema(where, "missing \"center\"");
        if (!d.contains("radius")) schema(where, "missing \"radius\"");
        Disk disk{point(d["center"], where + ".center"), number(d["radius"], where + ".radius")};
        if (!(disk.radius > 0.0)) schema(where + ".radius", "must be positive");
        disks.push_back(disk);
    }
    int probe_grid = 200;
    double flight_cap = 50.0;
    if (doc.contains("horizon")) {
        only_keys(doc["horizon"], "horizon", {"probe_grid", "flight_cap"});
        Section s{doc["horizon"], "horizon"};
        s.get("probe_grid", probe_grid);
        s.get("flight_cap", flight_cap);
        if (probe_grid < 2) schema("horizon.probe_grid", "must be >= 2");
        positive(flight_cap, "horizon.flight_cap");
    }
    ExperimentParams params;
    if (doc.contains("experiments")) read_experiments(doc["experiments"], params);
    std::uint64_t seed = 42;
    if (doc.contains("seed")) seed = count(doc["seed"], "seed");

    validate_disjoint(disks);
    ParsedConfig out{certify(disks, probe_grid, flight_cap), params, seed, probe_grid, flight_cap,
                     sha256_hex(doc.dump())};
    return out;
}

std::string default_config_document() {
    const ExperimentParams p;
    Json disks = Json::array();
    for (const Disk& d : default_disks()) disks.push_back({{"center", {d.center.x, d.center.y}}, {"radius", d.radius}});
    Json ells = Json::array();
    for (const Cell& c : p.llt.ell) ells.push_back({c.x, c.y});
    Json doc = {
        {"disks", disks},
        {"horizon", {{"probe_grid", 200}, {"flight_cap", 50.0}}},
        {"seed", 42},
        {"experiments",
         {{"invariance",
           {{"samples", p.invariance.samples},
            {"map_steps", p.invariance.map_steps},
            {"arc_bins", p.invariance.arc_bins},
            {"sine_bins", p.invariance.sine_bins},
            {"flow_time", p.invariance.flow_time},
            {"spatial_bins", p.invariance.spatial_bins},
            {"angle_bins", p.invariance.angle_bins},
            {"level", p.invariance.level}}},
          {"centering", {{"samples", p.centering.samples}, {"n", p.centering.n}, {"max_z", p.centering.max_z}}},
          {"measures",
           {{"eps", p.measures.eps},
            {"samples", p.measures.samples},
            {"center", {p.measures.center.x, p.measures.center.y}},
            {"direction", p.measures.direction},
            {"tolerance", p.measures.tolerance}}},
          {"covariance",
           {{"fixture_n", p.covariance.fixture_n},
            {"stability_n", p.covariance.stability_n},
            {"samples", p.covariance.samples},
            {"max_lag", p.covariance.max_lag}}},
          {"llt",
           {{"n", p.llt.n}, {"ell", ells}, {"samples", p.llt.samples}, {"band", p.llt.band},
            {"flatness", p.llt.flatness}}},
          {"exp_law",
           {{"centers", p.exp_law.centers},
            {"eps", p.exp_law.eps},
            {"samples_per_center", p.exp_law.samples_per_center},
            {"cap_scale", p.exp_law.cap_scale},
            {"ks_max", p.exp_law.ks_max}}},
          {"mixture_law",
           {{"eps", p.mixture_law.eps},
            {"samples", p.mixture_law.samples},
            {"cap_scale", p.mixture_law.cap_scale},
            {"ks_max", p.mixture_law.ks_max},
            {"max_cap", p.mixture_law.max_cap}}},
          {"position_return",
           {{"eps", p.position_return.eps},
            {"scaling_eps", p.position_return.scaling_eps},
            {"samples", p.position_return.samples},
            {"time_cap", p.position_return.time_cap},
            {"ks_max", p.position_return.ks_max},
            {"scaling_lo", p.position_return.scaling_lo},
            {"scaling_hi", p.position_return.scaling_hi}}},
          {"phase_return",
           {{"eps", p.phase_return.eps},
            {"eps_outer", p.phase_return.eps_outer},
            {"samples", p.phase_return.samples},
            {"time_cap", p.phase_return.time_cap},
            {"grid_lo", p.phase_return.grid_lo},
            {"grid_hi", p.phase_return.grid_hi},
            {"grid_step", p.phase_return.grid_step},
            {"tolerance", p.phase_return.tolerance}}},
          {"rates",
           {{"eps", p.rates.eps},
            {"samples", p.rates.samples},
            {"cap_scale", p.rates.cap_scale},
            {"band_lo", p.rates.band_lo},
            {"band_hi", p.rates.band_hi},
            {"max_slope", p.rates.max_slope},
            {"min_uncensored", p.rates.min_uncensored},
            {"extended_samples", p.rates.extended_samples},
            {"extended_cap", p.rates.extended_cap},
            {"position_eps", p.rates.position_eps},
            {"position_samples", p.rates.position_samples},
            {"position_time_cap", p.rates.position_time_cap}}},
          {"decay", {{"samples", p.decay.samples}, {"max_lag", p.decay.max_lag}, {"by_lag", p.decay.by_lag}}}}}};
    return doc.dump(2) + "\n";
}

void write_fixture(const std::filesystem::path& path, const SigmaFixture& f, const std::string& config_digest) {
    const Json doc = {{"config_digest", config_digest},
                      {"sigma2", sym_json(f.sigma2)},
                      {"half_widths", sym_json(f.half_widths)},
                      {"n", f.n},
                      {"samples", f.samples},
                      {"seed", f.seed},
                      {"gamma", f.gamma},
                      {"beta", f.beta.beta},
                      {"beta0", f.beta.beta0},
                      {"beta1", f.beta.beta1}};
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << doc.dump(2) << "\n";
    if (!out) throw LorentzError("cannot write " + path.string());
}

SigmaFixture read_fixture(const std::filesystem::path& path, const std::string& config_digest) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MissingFixture("MissingFixture: " + path.string() + " not found; run `constants` first");
    Doc doc;
    try {
        doc = Doc::parse(std::string(std::istreambuf_iterator<char>(in), {}));
    } catch (const Doc::parse_error&) {
        throw MissingFixture("MissingFixture: " + path.string() + " is not valid JSON");
    }
    if (!doc.contains("config_digest") || doc["config_digest"] != config_digest)
        throw MissingFixture("MissingFixture: " + path.string() + " was produced from a different configuration");
    SigmaFixture f;
    try {
        f.sigma2 = read_sym(doc.at("sigma2"), "sigma2");
        f.half_widths = read_sym(doc.at("half_widths"), "half_widths");
        f.n = doc.at("n").get<std::uint64_t>();
        f.samples = doc.at("samples").get<std::uint64_t>();
        f.seed = doc.at("seed").get<std::uint64_t>();
        f.gamma = doc.at("gamma").get<double>();
    } catch (const Doc::exception& e) {
        throw MissingFixture(std::string("MissingFixture: malformed fixture: ") + e.what());
    }
    // the constants are recomputed from the matrix rather than trusted from the file
    f.beta = beta_constants(f.sigma2, f.gamma);
    return f;
}

std::vector<std::filesystem::path> write_verdict(const std::filesystem::path& dir, const Verdict& v) {
    std::filesystem::create_directories(dir);
    std::vector<std::filesystem::path> written;
    const Json doc = {{"name", v.name}, {"parameters", v.parameters}, {"statistics", v.statistics}, {"pass", v.pass}};
    const auto json_path = dir / (v.name + ".json");
    {
        std::ofstream out(json_path, std::ios::binary);
        out << doc.dump(2) << "\n";
        if (!out) throw LorentzError("cannot write " + json_path.string());
    }
    written.push_back(json_path);
    for (const Table& t : v.tables) {
        const auto path = dir / (v.name + "_" + t.name + ".csv");
        std::ofstream out(path, std::ios::binary);
        out << t.to_csv();
        if (!out) throw LorentzError("cannot write " + path.string());
        written.push_back(path);
    }
    return written;
}

void append_manifest(const std::filesystem::path& dir, const RunManifest& m) {
    std::filesystem::create_directories(dir);
    const Json line = {{"config_digest", m.config_digest},
                       {"seed", m.seed},
                       {"experiment", m.experiment},
                       {"parameters", m.parameters},
                       {"version", m.version},
                       {"wall_clock_seconds", m.wall_clock_seconds},
                       {"events", m.events},
                       {"workers", m.workers},
                       {"pass", m.pass}};
    std::ofstream out(dir / "manifest.jsonl", std::ios::binary | std::ios::app);
    out << line.dump() << "\n";
    if (!out) throw LorentzError("cannot append to " + (dir / "manifest.jsonl").string());
}

Table collate_verdicts(const std::filesystem::path& dir) {
    Table t{"report", {"experiment", "verdict", "file"}, {}};
    std::vector<std::filesystem::path> files;
    if (std::filesystem::is_directory(dir))
        for (const auto& e : std::filesystem::directory_iterator(dir))
            if (e.path().extension() == ".json") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    for (const auto& f : files) {
        std::ifstream in(f, std::ios::binary);
        Doc doc;
        try {
            doc = Doc::parse(std::string(std::istreambuf_iterator<char>(in), {}));
        } catch (const Doc::parse_error&) {
            continue;
        }
        if (!doc.is_object() || !doc.contains("name") || !doc.contains("pass")) continue;
        t.add({doc["name"].get<std::string>(), doc["pass"].get<bool>() ? "PASS" : "FAIL", f.filename().string()});
    }
    return t;
}

}  // namespace lorentz
