#include "hopflab/config.hpp"

#include <doctest.h>

#include <fstream>

using namespace hopflab;

namespace {

Json base() {
    return Json::parse(R"({
        "task": "verify-weak-max",
        "operator": {"preset": "laplacian", "dimension": 2},
        "domain": {"shape": "ball", "center": [0, 0], "radius": 1}
    })");
}

template <class F>
std::string config_error(F&& f) {
    try {
        f();
    } catch (const ConfigError& e) {
        return e.what();
    }
    return {};
}

}  // namespace

TEST_CASE("every preset builds in its dimensions") {
    for (const auto& name : operator_preset_names()) {
        const auto op = operator_preset(name, 2);
        CHECK(op.dim() == 2);
        CHECK(op.name == name);
    }
    CHECK(operator_preset("laplacian", 1).dim() == 1);
    CHECK_THROWS_AS(operator_preset("anisotropic", 1), ConfigError);
    CHECK_THROWS_AS(operator_preset("nope", 2), ConfigError);
}

TEST_CASE("two-point-jump preset carries unit atoms at plus and minus e1") {
    const auto op = operator_preset("two-point-jump", 2);
    const auto& k = std::get<FiniteActivityKernel>(op.kernel);
    REQUIRE(k.atoms.size() == 2);
    CHECK(k.atoms[0].y.norm() == doctest::Approx(1.0));
    CHECK((k.atoms[0].y + k.atoms[1].y).norm() == doctest::Approx(0.0));
}

TEST_CASE("defaults are filled and x0 falls back to the bounding box centre") {
    const auto s = parse_scenario(base());
    CHECK(s.h == doctest::Approx(0.05));
    CHECK(s.n_seeds == 1);
    CHECK(s.out_dir == "verify-weak-max");
    CHECK(s.x0.norm() == doctest::Approx(0.0));
}

TEST_CASE("unknown keys name the valid alternatives") {
    auto j = base();
    j["grid"] = {{"hh", 0.1}};
    const auto msg = config_error([&] { parse_scenario(j); });
    CHECK(msg.find("grid.hh") != std::string::npos);
    CHECK(msg.find("valid keys: h") != std::string::npos);

    j = base();
    j["extra"] = Json::object();
    CHECK_FALSE(config_error([&] { parse_scenario(j); }).empty());
}

TEST_CASE("ranges are validated before dispatch") {
    const std::vector<std::string> bad = {"grid.h=0",          "grid.h=5",           "mc.dt=-1",
                                          "mc.n_paths=0",      "seeds.count=0",      "barrier.K=0",
                                          "point.x0=[3,0]",    "output.dir=\"../x\"", "task=\"nope\"",
                                          "domain.radius=-1",  "operator.dimension=4", "killing.kind=\"odd\"",
                                          "mc.antithetic=1",   "tolerance.margin=-1"};
    for (const auto& o : bad) {
        auto j = base();
        apply_override(j, o);
        CAPTURE(o);
        CHECK_THROWS_AS(parse_scenario(j), ConfigError);
    }
}

TEST_CASE("mismatched dimensions are rejected") {
    auto j = base();
    j["operator"]["dimension"] = 1;
    CHECK(config_error([&] { parse_scenario(j); }).find("does not match") != std::string::npos);
}

TEST_CASE("overrides parse JSON values and fall back to strings") {
    Json j = Json::object();
    apply_override(j, "grid.h=0.025");
    apply_override(j, "a.b.c=[1,2]");
    apply_override(j, "suite.name=smoke");
    CHECK(j["grid"]["h"].get<double>() == 0.025);
    CHECK(j["a"]["b"]["c"].size() == 2);
    CHECK(j["suite"]["name"] == "smoke");
    CHECK_THROWS_AS(apply_override(j, "novalue"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "grid..h=1"), ConfigError);
    CHECK_THROWS_AS(apply_override(j, "grid.h.x=1"), ConfigError);
}

TEST_CASE("custom operators round-trip through JSON") {
    const auto j = Json::parse(R"({
        "dimension": 2, "q": [[1.0, 0.25], [0.25, 0.5]], "b": [0.5, -1.0],
        "kernel": {"variant": "atomic", "intensity": 3.0,
                   "atoms": [{"y": [0.5, 0.0], "p": 0.25}, {"y": [0.0, -0.5], "p": 0.75}]}
    })");
    const auto op = operator_from_json(j);
    CHECK(operator_to_json(op) == j);
    const auto again = operator_from_json(operator_to_json(op));
    CHECK((*again.coeffs.q_constant - *op.coeffs.q_constant).norm() == 0.0);

    for (const auto& name : operator_preset_names()) {
        const auto p = operator_preset(name, 2);
        CHECK(operator_to_json(operator_from_json(operator_to_json(p))) == operator_to_json(p));
    }
}

TEST_CASE("operator JSON rejects asymmetric, indefinite and unnormalised inputs") {
    const std::vector<std::string> bad = {
        R"({"dimension": 2, "q": [[1, 0.5], [0, 1]]})",
        R"({"dimension": 2, "q": [[1, 0], [0, -1]]})",
        R"({"dimension": 1, "kernel": {"variant": "atomic", "intensity": 1, "atoms": [{"y": [1], "p": 0.5}]}})",
        R"({"dimension": 1, "kernel": {"variant": "atomic", "intensity": 1, "atoms": [{"y": [0], "p": 1}]}})",
        R"({"dimension": 1, "kernel": {"variant": "truncated-stable", "index": 2.5}})",
        R"({"preset": "laplacian", "dimension": 2, "b": [1, 0]})",
        R"({"q": [[1]]})"};
    for (const auto& s : bad) {
        CAPTURE(s);
        CHECK_THROWS_AS(operator_from_json(Json::parse(s)), ConfigError);
    }
}

TEST_CASE("domains round-trip through JSON") {
    for (const auto& s : {R"({"shape": "ball", "center": [0.5, 0.0], "radius": 2.0})",
                          R"({"shape": "box", "lo": [-1.0], "hi": [2.0]})",
                          R"({"shape": "annulus", "center": [0.0, 0.0], "r_in": 0.5, "r_out": 1.0})"}) {
        const auto j = Json::parse(s);
        CHECK(domain_to_json(domain_from_json(j)) == j);
    }
    for (const auto& name : implicit_domain_names()) {
        const Json j{{"shape", "implicit"}, {"name", name}};
        CHECK(domain_to_json(domain_from_json(j)) == j);
    }
    CHECK_THROWS_AS(domain_from_json(Json::parse(R"({"shape": "box", "lo": [1.0], "hi": [0.0]})")), ConfigError);
    CHECK_THROWS_AS(domain_from_json(Json::parse(R"({"shape": "implicit", "name": "?"})")), ConfigError);
}

TEST_CASE("killing specs build the matching rate") {
    const auto k = killing_from_json(Json::parse(R"({"kind": "ball", "value": 2, "center": [0, 0], "radius": 0.5})"), 2);
    const auto c = k.rate();
    CHECK(c(Vec::Zero(2)) == doctest::Approx(2.0));
    CHECK(c(make_vec({0.9, 0.0})) == doctest::Approx(0.0));
    CHECK(killing_to_json(k) == Json::parse(R"({"kind": "ball", "value": 2.0, "center": [0.0, 0.0], "radius": 0.5})"));
    CHECK(killing_from_json(Json::parse(R"({"kind": "uniform", "value": 0.5})"), 1).rate().constant);
    CHECK_THROWS_AS(killing_from_json(Json::parse(R"({"kind": "uniform", "value": -1})"), 1), ConfigError);
}

TEST_CASE("killing is applied to the parsed operator") {
    auto j = base();
    j["killing"] = {{"kind", "uniform"}, {"value", 1.5}};
    const auto s = parse_scenario(j);
    CHECK(s.op.c().upper == doctest::Approx(1.5));
    CHECK(s.op.c().lower == doctest::Approx(1.5));
}

TEST_CASE("load_config reads files and reports malformed JSON as a config error") {
    const auto dir = std::filesystem::temp_directory_path() / "hopflab-test-config";
    std::filesystem::create_directories(dir);
    {
        std::ofstream(dir / "ok.json") << base().dump();
        std::ofstream(dir / "bad.json") << "{ \"task\": ";
    }
    const auto j = load_config(dir / "ok.json", {"grid.h=0.1"});
    CHECK(parse_scenario(j).h == doctest::Approx(0.1));
    CHECK_THROWS_AS(load_config(dir / "bad.json", {}), ConfigError);
    CHECK_THROWS_AS(load_config(dir / "missing.json", {}), ConfigError);
    std::filesystem::remove_all(dir);
}

TEST_CASE("suite and report tasks need no problem tables") {
    CHECK(parse_scenario(Json{{"task", "suite"}, {"suite", {{"name", "smoke"}}}}).suite == "smoke");
    CHECK_NOTHROW(parse_scenario(Json{{"task", "report"}, {"output", {{"dir", "eigen"}}}}));
}
