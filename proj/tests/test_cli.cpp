#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include <doctest.h>

#include "cli.hpp"
#include "json.hpp"

namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir()
    {
        std::random_device rd;
        path = fs::temp_directory_path() / ("sampler_test_" + std::to_string(rd()) + std::to_string(rd()));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
};

struct Run {
    int code;
    std::string out;
    std::string err;
};

Run run(std::vector<std::string> args)
{
    std::ostringstream out, err;
    const int code = sampler::cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
}

nlohmann::ordered_json small_config()
{
    return nlohmann::ordered_json::parse(R"({
        "name": "small",
        "model": {"kind": "damped_sinusoid_1d", "K": 1},
        "theta": [1.0, 0.2, 0.1, 0.5],
        "grid": {"sizes": [20], "origin": 1},
        "noise": {"variance": 0.1},
        "design": {"gamma_sweep": [6, 8]},
        "eval": {"trials": 100, "seed": 5, "baseline_trials": 50,
                 "estimation_grid": {"width": 3, "points": 5, "polish": true}}
    })");
}

fs::path write_config(const TempDir& d, const nlohmann::ordered_json& doc, const std::string& name = "c.json")
{
    const fs::path p = d.path / name;
    std::ofstream(p) << doc.dump(2);
    return p;
}

std::vector<std::vector<std::string>> csv_rows(const std::string& text)
{
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        std::vector<std::string> f;
        std::stringstream ls(line);
        std::string cell;
        while (std::getline(ls, cell, ',')) f.push_back(cell);
        rows.push_back(f);
    }
    return rows;
}

}  // namespace

TEST_SUITE("cli") {

TEST_CASE("missing configuration exits with a configuration error")
{
    const Run r = run({"design", "--config", "/nonexistent/sampler.json"});
    CHECK(r.code == 1);
    CHECK(r.err.find("/nonexistent/sampler.json") != std::string::npos);
    CHECK(run({"design"}).code == 1);
    CHECK(run({"frobnicate", "--scenario", "fig1"}).code == 1);
}

TEST_CASE("impossible caps exit with an infeasibility certificate")
{
    TempDir d;
    auto doc = small_config();
    doc["design"].erase("gamma_sweep");
    doc["design"]["gamma"] = 6;
    doc["design"]["caps"] = {{"f1", 1e-14}};
    const Run r = run({"design", "--config", write_config(d, doc).string(), "--out", d.path.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("infeasible") != std::string::npos);
}

TEST_CASE("design writes weights and bounds that evaluate reproduces")
{
    TempDir d;
    const fs::path cfg = write_config(d, small_config());
    const fs::path a = d.path / "a", b = d.path / "b";
    REQUIRE(run({"design", "--config", cfg.string(), "--out", a.string()}).code == 0);
    const auto weights = csv_rows(slurp(a / "weights.csv"));
    REQUIRE(weights.size() == 1 + 2 * 20);
    CHECK(weights[0] == std::vector<std::string>{"variant", "budget", "index", "t1", "w", "selected"});
    const Run e = run({"evaluate", "--config", cfg.string(), "--weights", (a / "weights.csv").string(), "--out", b.string()});
    CHECK(e.code == 0);
    CHECK(slurp(a / "crlb.csv") == slurp(b / "crlb.csv"));
}

TEST_CASE("weights of the wrong length are rejected")
{
    TempDir d;
    const fs::path cfg = write_config(d, small_config());
    std::ofstream(d.path / "w.csv") << "w\n0.5\n0.5\n0.5\n";
    const Run r = run({"evaluate", "--config", cfg.string(), "--weights", (d.path / "w.csv").string(), "--out", d.path.string()});
    CHECK(r.code == 1);
    CHECK(run({"evaluate", "--config", cfg.string(), "--out", d.path.string()}).code == 1);
}

TEST_CASE("compare writes three rows per budget and is reproducible")
{
    TempDir d;
    const fs::path cfg = write_config(d, small_config());
    REQUIRE(run({"compare", "--config", cfg.string(), "--out", (d.path / "a").string()}).code == 0);
    REQUIRE(run({"compare", "--config", cfg.string(), "--out", (d.path / "b").string()}).code == 0);
    const std::string a = slurp(d.path / "a" / "report.csv");
    CHECK(a == slurp(d.path / "b" / "report.csv"));
    const auto rows = csv_rows(a);
    REQUIRE(rows.size() == 1 + 3 * 2);
    CHECK(rows[1][2] == "design");
    CHECK(rows[2][2] == "random");
    CHECK(rows[3][2] == "uniform");
    REQUIRE(run({"compare", "--config", cfg.string(), "--seed", "6", "--out", (d.path / "c").string()}).code == 0);
    CHECK(slurp(d.path / "c" / "report.csv") != a);

    auto doc = small_config();
    doc["eval"]["baseline_trials"] = 0;
    CHECK(run({"compare", "--config", write_config(d, doc, "n.json").string(), "--out", d.path.string()}).code == 1);
}

TEST_CASE("simulate needs an estimation grid and is exact without noise")
{
    TempDir d;
    auto doc = small_config();
    doc["eval"].erase("estimation_grid");
    CHECK(run({"simulate", "--config", write_config(d, doc, "n.json").string(), "--out", d.path.string()}).code == 1);

    doc = small_config();
    doc["noise"]["variance"] = 0.0;
    REQUIRE(run({"simulate", "--config", write_config(d, doc).string(), "--out", d.path.string()}).code == 0);
    const auto rows = csv_rows(slurp(d.path / "report.csv"));
    REQUIRE(rows.size() == 3);
    for (std::size_t c = 0; c < rows[0].size(); ++c)
        if (rows[0][c].rfind("rmse_", 0) == 0) {
            CHECK(std::stod(rows[1][c]) < 1e-12);
            CHECK(std::stod(rows[2][c]) < 1e-12);
        }
}

TEST_CASE("presets can be dumped and run by name")
{
    const Run r = run({"--dump-preset", "fig1"});
    REQUIRE(r.code == 0);
    CHECK(nlohmann::ordered_json::parse(r.out)["name"] == "fig1");
    TempDir d;
    const Run des = run({"design", "--scenario", "fig1", "--beta", "0.1", "--out", d.path.string()});
    CHECK(des.code == 0);
    CHECK(des.out.find("13 of 50") != std::string::npos);
}

}
