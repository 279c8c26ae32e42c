#include <doctest.h>

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <string>

#include "lorentz/errors.hpp"
#include "lorentz/io.hpp"
#include "lorentz/table.hpp"

using namespace lorentz;
namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

fs::path scratch_dir(const std::string& name) {
    const fs::path d = fs::temp_directory_path() / ("lorentz_test_" + name);
    fs::remove_all(d);
    return d;
}

}  // namespace

TEST_CASE("number formatting round-trips") {
    CHECK(format_number(0.1) == "0.1");
    CHECK(format_number(1.0) == "1");
    CHECK(format_number(-2.5e-300) == "-2.5e-300");
    CHECK(format_number(std::numeric_limits<double>::infinity()) == "inf");
    CHECK(format_number(-std::numeric_limits<double>::infinity()) == "-inf");
    CHECK(format_number(std::nan("")) == "nan");
    CHECK(format_number(std::uint64_t{18446744073709551615ull}) == "18446744073709551615");
    CHECK(format_number(-7) == "-7");
    Rng rng(1, 0);
    for (int k = 0; k < 10000; ++k) {
        const double x = std::ldexp(rng.uniform(-1.0, 1.0), static_cast<int>(rng.below(200)) - 100);
        const std::string s = format_number(x);
        double back = 0.0;
        std::from_chars(s.data(), s.data() + s.size(), back);
        CHECK(back == x);
        CHECK(s.find(',') == std::string::npos);
    }
}

TEST_CASE("csv layout") {
    Table t{"demo", {"a", "b"}, {}};
    t.add({"1", "0.5"});
    t.add({"2", "nan"});
    CHECK(t.to_csv() == "a,b\n1,0.5\n2,nan\n");
}

TEST_CASE("sha-256 known answer") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("default document parses to the default configuration") {
    const ParsedConfig pc = parse_config(default_config_document());
    REQUIRE(pc.config.size() == default_config().size());
    for (std::size_t i = 0; i < pc.config.size(); ++i) {
        CHECK(pc.config.disk(i).radius == default_config().disk(i).radius);
        CHECK(pc.config.disk(i).center == default_config().disk(i).center);
    }
    CHECK(pc.config.tau_plus() == default_config().tau_plus());
    CHECK(pc.seed == 42);
    CHECK(pc.digest == sha256_hex(canonical_json(default_config_document())));
    CHECK(pc.params.phase_return.eps == 0.35);
    CHECK(pc.params.position_return.time_cap == 1e6);
}

TEST_CASE("digest ignores whitespace and key order") {
    const std::string a = R"({"disks":[{"center":[0,0],"radius":0.3},{"center":[0.5,0.5],"radius":0.36}],"seed":7})";
    const std::string b = "{ \"seed\" : 7,\n \"disks\": [ {\"radius\":0.3, \"center\":[0,0]},"
                          " {\"radius\":0.36, \"center\":[0.5,0.5]} ] }";
    CHECK(parse_config(a).digest == parse_config(b).digest);
    const std::string c = R"({"disks":[{"center":[0,0],"radius":0.3},{"center":[0.5,0.5],"radius":0.36}],"seed":8})";
    CHECK(parse_config(a).digest != parse_config(c).digest);
}

TEST_CASE("schema errors") {
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0]}]})"), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":0.3,"colour":1}]})"), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":0.3}],"sed":1})"), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"disks":[]})"), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":"big"}]})"), SchemaError);
    CHECK_THROWS_AS(parse_config("not json"), SchemaError);
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":0.3},{"center":[0.5,0.5],"radius":0.36}],
        "experiments":{"llt":{"samples":-3}}})"),
                    SchemaError);
    try {
        parse_config(R"({"disks":[{"center":[0,0]}]})");
    } catch (const SchemaError& e) {
        CHECK(std::string(e.what()).find("radius") != std::string::npos);
    }
}

TEST_CASE("geometry errors surface through the parser") {
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":0.3}]})"), InfiniteHorizonSuspected);
    CHECK_THROWS_AS(parse_config(R"({"disks":[{"center":[0,0],"radius":0.6},{"center":[0.5,0.5],"radius":0.2}]})"),
                    NonPositiveMargin);
}

TEST_CASE("experiment parameters are read") {
    const ParsedConfig pc = parse_config(
        R"({"disks":[{"center":[0,0],"radius":0.3},{"center":[0.5,0.5],"radius":0.36}],
            "experiments":{"mixture_law":{"eps":0.01,"samples":500},"llt":{"n":[100,300]}}})");
    CHECK(pc.params.mixture_law.eps == 0.01);
    CHECK(pc.params.mixture_law.samples == 500);
    CHECK(pc.params.mixture_law.ks_max == 0.05);
    CHECK(pc.params.llt.n == std::vector<std::uint64_t>{100, 300});
}

TEST_CASE("fixture round trip") {
    const fs::path dir = scratch_dir("fixture");
    SigmaFixture f;
    f.sigma2 = {0.0301, 0.0002, 0.0297};
    f.half_widths = {0.0004, 0.0003, 0.0004};
    f.n = 1000;
    f.samples = 12345;
    f.seed = 42;
    f.gamma = default_config().gamma();
    f.beta = beta_constants(f.sigma2, f.gamma);
    write_fixture(dir / "sigma2.json", f, "abc");
    const SigmaFixture g = read_fixture(dir / "sigma2.json", "abc");
    CHECK(g.sigma2.xx == f.sigma2.xx);
    CHECK(g.sigma2.xy == f.sigma2.xy);
    CHECK(g.half_widths.yy == f.half_widths.yy);
    CHECK(g.n == 1000);
    CHECK(g.beta.beta == f.beta.beta);
    CHECK(g.beta.beta1 / g.beta.beta0 == doctest::Approx(kPi).epsilon(1e-15));
    CHECK_THROWS_AS(read_fixture(dir / "sigma2.json", "other"), MissingFixture);
    CHECK_THROWS_AS(read_fixture(dir / "absent.json", "abc"), MissingFixture);
    fs::remove_all(dir);
}

TEST_CASE("verdict files and append-only manifest") {
    const fs::path dir = scratch_dir("verdict");
    Verdict v;
    v.name = "demo";
    v.parameters = {{"eps", 0.02}};
    v.statistics = {{"ks", 0.01}};
    v.pass = true;
    v.tables.push_back(Table{"curve", {"t", "empirical", "reference"}, {{"0", "1", "1"}}});
    const auto paths = write_verdict(dir, v);
    REQUIRE(paths.size() == 2);
    CHECK(slurp(dir / "demo_curve.csv") == "t,empirical,reference\n0,1,1\n");
    const std::string json = slurp(dir / "demo.json");
    CHECK(json.find("\"pass\": true") != std::string::npos);

    RunManifest m;
    m.experiment = "demo";
    m.config_digest = "abc";
    append_manifest(dir, m);
    const std::string first = slurp(dir / "manifest.jsonl");
    m.seed = 9;
    append_manifest(dir, m);
    const std::string both = slurp(dir / "manifest.jsonl");
    CHECK(both.rfind(first, 0) == 0);
    CHECK(std::count(both.begin(), both.end(), '\n') == 2);

    const Table report = collate_verdicts(dir);
    REQUIRE(report.rows.size() == 1);
    CHECK(report.rows[0][0] == "demo");
    CHECK(report.rows[0][1] == "PASS");
    fs::remove_all(dir);
}
