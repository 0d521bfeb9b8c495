#include <doctest.h>

#include "sampler/config.hpp"
#include "sampler/errors.hpp"

using namespace sampler;
using nlohmann::ordered_json;

namespace {

ordered_json minimal()
{
    return ordered_json::parse(R"({
        "name": "small",
        "model": {"kind": "damped_sinusoid_1d", "K": 1},
        "theta": {"alpha1": 1.0, "f1": 0.2, "beta1": 0.1, "phi1": 0.5},
        "grid": {"sizes": [20], "origin": 1},
        "noise": {"variance": 0.1},
        "design": {"gamma": 6}
    })");
}

}  // namespace

TEST_SUITE("config") {

TEST_CASE("every preset survives a round trip through its configuration")
{
    for (const auto& name : preset_names()) {
        const Scenario s = preset(name);
        const ordered_json doc = scenario_to_json(s, std::string("out"));
        const Config c = parse_config(doc);
        CHECK(c.output_path == std::optional<std::string>("out"));
        CHECK(scenario_to_json(c.scenario, c.output_path).dump() == doc.dump());
        CHECK(c.scenario.theta == s.theta);
        CHECK(c.scenario.budgets == s.budgets);
        CHECK(c.scenario.grid.size() == s.grid.size());
        CHECK(c.scenario.variants.size() == s.variants.size());
    }
}

TEST_CASE("a minimal configuration fills in defaults")
{
    const Config c = parse_config(minimal());
    const Scenario& s = c.scenario;
    CHECK(s.name == "small");
    CHECK(s.grid.size() == 20);
    CHECK(s.grid.point(0)[0] == 1.0);
    CHECK(s.budgets == std::vector<double>{6.0});
    REQUIRE(s.variants.size() == 1);
    CHECK(s.variants.front().psi == Eigen::VectorXd::Ones(4));
    CHECK_FALSE(c.output_path.has_value());
}

TEST_CASE("psi objects default missing entries to one and caps to infinity")
{
    ordered_json doc = minimal();
    doc["design"]["psi"] = {{"f1", 3.0}};
    doc["design"]["caps"] = {{"beta1", 0.5}};
    const Scenario s = parse_config(doc).scenario;
    CHECK(s.variants.front().psi == Eigen::Vector4d(1.0, 3.0, 1.0, 1.0));
    REQUIRE(s.caps.has_value());
    CHECK((*s.caps)[2] == 0.5);
    CHECK(std::isinf((*s.caps)[0]));
}

TEST_CASE("malformed configurations name the offending key")
{
    auto message = [](const ordered_json& doc) {
        try {
            parse_config(doc);
        } catch (const ConfigError& e) {
            return std::string(e.what());
        } catch (const Error& e) {
            return std::string("other: ") + e.what();
        }
        return std::string();
    };
    ordered_json doc = minimal();
    doc["design"]["gama"] = 3;
    CHECK(message(doc).find("gama") != std::string::npos);
    doc = minimal();
    doc["noise"]["variance"] = "high";
    CHECK(message(doc).find("variance") != std::string::npos);
    doc = minimal();
    doc["theta"] = {{"alpha1", 1.0}, {"f1", 0.2}};
    CHECK_FALSE(message(doc).empty());
    doc = minimal();
    doc.erase("grid");
    CHECK(message(doc).find("grid") != std::string::npos);
    CHECK_THROWS_AS(load_config("/nonexistent/config.json"), ConfigError);
}

}
