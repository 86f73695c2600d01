#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>

#include "cli_helpers.hpp"
#include "drgate/cli.hpp"
#include "drgate/data.hpp"
#include "drgate/error.hpp"
#include "drgate/schema.hpp"
#include "drgate/sim.hpp"

using namespace drgate;
using nlohmann::json;
using testing::read_json;
using testing::run_cli;
using testing::scratch;
using testing::write_config;

namespace {

json synthetic_run(std::size_t n, const std::string& shape, const json& bandwidth) {
  return {{"data", {{"synthetic", {{"n", n}, {"tau_shape", shape}, {"seed", 4}}}}},
          {"pipeline", {{"learners", "parametric"}, {"bandwidth", bandwidth}}},
          {"seed", 9}};
}

}  // namespace

TEST_SUITE("cli") {
  TEST_CASE("schema validator") {
    const json schema = json::parse(R"({
      "type": "object", "additionalProperties": false, "required": ["a"],
      "properties": {
        "a": {"type": "integer", "minimum": 1},
        "b": {"anyOf": [{"type": "string", "enum": ["x"]}, {"type": "array", "items": {"$ref": "#/$defs/n"}}]}
      },
      "$defs": {"n": {"type": "number", "exclusiveMinimum": 0}}
    })");
    CHECK(schema_violations(json{{"a", 2}}, schema).empty());
    CHECK(schema_violations(json{{"a", 2.0}}, schema).empty());
    CHECK_FALSE(schema_violations(json{{"a", 2.5}}, schema).empty());
    CHECK_FALSE(schema_violations(json{{"a", 0}}, schema).empty());
    CHECK_FALSE(schema_violations(json::object(), schema).empty());
    CHECK_FALSE(schema_violations(json{{"a", 1}, {"c", 1}}, schema).empty());
    CHECK(schema_violations(json{{"a", 1}, {"b", "x"}}, schema).empty());
    CHECK_FALSE(schema_violations(json{{"a", 1}, {"b", "y"}}, schema).empty());
    CHECK(schema_violations(json{{"a", 1}, {"b", {1, 2}}}, schema).empty());
    CHECK_FALSE(schema_violations(json{{"a", 1}, {"b", {1, 0}}}, schema).empty());
  }

  TEST_CASE("published schema accepts the bundled configurations") {
    for (const char* name : {"quickcheck.json", "replicate-cattaneo.json"}) {
      CAPTURE(name);
      const auto path = std::filesystem::path(DRGATE_SOURCE_DIR) / "configs" / name;
      CHECK(schema_violations(read_json(path), cli::run_config_schema()).empty());
    }
    CHECK_THROWS_AS(cli::RunConfig::from_json(json{{"pipeline", {{"kernel_order", 3}}}}), Error);
    CHECK_THROWS_AS(cli::RunConfig::from_json(json{{"colour", "blue"}}), Error);
  }

  TEST_CASE("user errors exit with 2") {
    const auto dir = scratch("errors");
    sim::DgpSpec s;
    s.n = 60;
    write_csv(sim::generate(s).data, (dir / "data.csv").string());
    const auto cfg = write_config(dir, {{"data", {{"path", "data.csv"}, {"outcome", "y"}, {"treatment", "d"}, {"moderators", {"age"}}}},
                                        {"output_dir", "out"}});
    const auto r = run_cli({"estimate-gate", "--config", cfg.string()});
    CHECK(r.code == 2);
    CHECK(r.err.find("age") != std::string::npos);

    const auto sim_cfg = write_config(dir, {{"simulation", {{"replications", 0}}}, {"output_dir", "out"}}, "sim.json");
    const auto s0 = run_cli({"simulate", "--config", sim_cfg.string()});
    CHECK(s0.code == 2);
    CHECK(s0.err.find("replications") != std::string::npos);

    CHECK(run_cli({"estimate-gate"}).code == 2);
    CHECK(run_cli({"estimate-gate", "--config", (dir / "missing.json").string()}).code == 2);
    CHECK(run_cli({"bandwidth-range", "--lambda-z", "1"}).code == 2);
    CHECK(run_cli({"no-such-command"}).code == 2);
    std::ofstream(dir / "bad.json") << "{ not json";
    CHECK(run_cli({"estimate-ate", "--config", (dir / "bad.json").string()}).code == 2);
    const auto bad_key = write_config(dir, {{"pipeline", {{"folds", 1}}}}, "bad_key.json");
    const auto bk = run_cli({"estimate-ate", "--config", bad_key.string()});
    CHECK(bk.code == 2);
    CHECK(bk.err.find("folds") != std::string::npos);
  }

  TEST_CASE("bandwidth range command") {
    const auto r = run_cli({"bandwidth-range", "--lambda-z", "1", "--kernel-order", "2", "--delta-p", "0.35", "--delta-m", "0.35"});
    REQUIRE(r.code == 0);
    const auto j = json::parse(r.out);
    CHECK(j["lower"].get<double>() == doctest::Approx(0.2));
    CHECK(j["upper"].get<double>() == doctest::Approx(0.4));
    CHECK(j["feasible"].get<bool>());
    CHECK(j["threshold"].get<double>() == doctest::Approx(0.6));
    const auto a = run_cli({"bandwidth-range", "--lambda-z", "1", "--kernel-order", "2", "--delta-p", "0.25", "--delta-m",
                            "0.25", "--regime", "ate"});
    REQUIRE(a.code == 0);
    CHECK_FALSE(json::parse(a.out)["feasible"].get<bool>());
    CHECK(run_cli({"bandwidth-range", "--lambda-z", "1", "--kernel-order", "3", "--delta-p", "0.3", "--delta-m", "0.3"}).code ==
          2);
    CHECK(run_cli({"--version"}).out == std::string(cli::version()) + "\n");
  }

  TEST_CASE("gate command writes the curve and sensitivity files") {
    const auto dir = scratch("gate");
    auto j = synthetic_run(1500, "constant", {{"mode", "loocv"}});
    j["output_dir"] = "out";
    j["queries"] = 9;
    j["theory"] = {{"delta_p", 0.4}, {"delta_m", 0.4}};
    const auto cfg = write_config(dir, j);
    const auto r = run_cli({"estimate-gate", "--config", cfg.string(), "--sensitivity", "0.5,0.7,0.8,0.9,1.0,1.5",
                            "--export-scores"});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto out = dir / "out";
    for (const char* m : {"0.5", "0.7", "0.8", "0.9", "1", "1.5"}) {
      CAPTURE(m);
      CHECK(std::filesystem::exists(out / ("gate_bw_x" + std::string(m) + ".csv")));
    }
    for (const char* f : {"gate.csv", "gate.json", "support.json", "scores.csv", "manifest.json"})
      CHECK(std::filesystem::exists(out / f));
    CHECK(read_json(out / "gate.json")["points"].size() == 9);
    const auto manifest = read_json(out / "manifest.json");
    CHECK(manifest["command"] == "estimate-gate");
    CHECK(manifest["seed"] == 9);
    CHECK(manifest["config_hash"].get<std::string>().size() == 16);
    CHECK(manifest.contains("rate_conditions"));
    CHECK(read_json(out / "support.json")["fits"].size() > 0);
  }

  TEST_CASE("constant effects give a flat curve") {
    // A single draw can wander by chance, so look at several.
    const auto dir = scratch("flat-curve");
    const json grid = {0.1, 0.15, 0.2, 0.3, 0.4, 0.5, 0.7, 1.0, 1.5, 2.0, 3.0};
    int flat = 0;
    for (int seed = 1; seed <= 6; ++seed) {
      auto j = synthetic_run(1500, "constant", {{"mode", "loocv"}, {"grid", grid}});
      j["data"]["synthetic"]["seed"] = seed;
      j["output_dir"] = "out";
      j["queries"] = 9;
      REQUIRE(run_cli({"estimate-gate", "--config", write_config(dir, j).string()}).code == 0);
      double lo = 1e300, hi = -1e300, max_se = 0;
      for (const auto& p : read_json(dir / "out" / "gate.json")["points"]) {
        lo = std::min(lo, p["estimate"].get<double>());
        hi = std::max(hi, p["estimate"].get<double>());
        max_se = std::max(max_se, p["se"].get<double>());
      }
      flat += hi - lo < 2 * max_se;
    }
    CHECK(flat >= 4);
  }

  TEST_CASE("a flat kernel reproduces the averaged AIPW estimate") {
    const auto dir = scratch("flat");
    auto j = synthetic_run(800, "sine", {{"mode", "manual"}, {"value", 1e8}});
    j["output_dir"] = "out";
    const auto r = run_cli({"estimate-ate", "--config", write_config(dir, j).string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto est = json::parse(r.out)["estimates"];
    REQUIRE(est.size() == 3);
    CHECK(est[0]["method"] == "SMOOTHED_AIPW");
    CHECK(est[1]["method"] == "AVERAGED_AIPW");
    CHECK(std::abs(est[0]["estimate"].get<double>() - est[1]["estimate"].get<double>()) < 1e-12);
    CHECK(est[0]["se"].get<double>() == est[1]["se"].get<double>());
    CHECK(est[2]["se"].get<double>() > est[1]["se"].get<double>());
  }

  TEST_CASE("moderator sets give consistent ATE estimates") {
    const auto dir = scratch("sets");
    auto j = synthetic_run(1500, "sine", {{"mode", "loocv"}});
    j["output_dir"] = "out";
    j["moderator_sets"] = {{"x1"}, {"x2"}, {"x1", "x2"}};
    const auto r = run_cli({"estimate-ate", "--config", write_config(dir, j).string()});
    INFO(r.err);
    REQUIRE(r.code == 0);
    const auto est = json::parse(r.out)["estimates"];
    REQUIRE(est.size() == 5);
    const double avg = est[3]["estimate"].get<double>(), se = est[3]["se"].get<double>();
    for (int k = 0; k < 3; ++k) CHECK(std::abs(est[k]["estimate"].get<double>() - avg) < se);
    CHECK(est[2]["smoothing_moderators"].size() == 2);
    const auto csv = testing::slurp(dir / "out" / "ate.csv");
    CHECK(csv.find("x1;x2") != std::string::npos);
  }

  TEST_CASE("reruns are byte identical") {
    const auto dir = scratch("determinism");
    auto j = synthetic_run(400, "sine", {{"mode", "loocv"}});
    j["pipeline"]["learners"] = "ensemble";
    j["queries"] = 5;
    j["simulation"] = {{"dgp", {{"n", 200}}}, {"pipeline", {{"learners", "parametric"}}}, {"replications", 3}};
    const auto cfg = write_config(dir, j).string();
    for (const std::string cmd : {"estimate-gate", "estimate-ate", "simulate"}) {
      CAPTURE(cmd);
      const auto a = dir / (cmd + "-a"), b = dir / (cmd + "-b");
      std::vector<std::string> args{cmd, "--config", cfg, "--out-dir", a.string()};
      if (cmd != "simulate") args.push_back("--export-scores");
      REQUIRE(run_cli(args).code == 0);
      args[4] = b.string();
      REQUIRE(run_cli(args).code == 0);
      CHECK(testing::same_outputs(a, b));
    }
    const auto c = dir / "seeded";
    REQUIRE(run_cli({"estimate-ate", "--config", cfg, "--out-dir", c.string(), "--seed", "10"}).code == 0);
    CHECK(testing::slurp(c / "ate.csv") != testing::slurp(dir / "estimate-ate-a" / "ate.csv"));
  }

  TEST_CASE("bundled quick check runs in minutes") {
    const auto dir = scratch("quickcheck");
    const auto cfg = std::filesystem::path(DRGATE_SOURCE_DIR) / "configs" / "quickcheck.json";
    const auto t0 = std::chrono::steady_clock::now();
    const auto r = run_cli({"simulate", "--config", cfg.string(), "--out-dir", (dir / "out").string()});
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    INFO(r.err);
    REQUIRE(r.code == 0);
    CHECK(secs < 300);
    const auto report = read_json(dir / "out" / "mc_report.json");
    CHECK(report["replications"] == 20);
    CHECK(read_json(dir / "out" / "manifest.json")["report_hash"].get<std::string>().size() == 16);
  }
}
