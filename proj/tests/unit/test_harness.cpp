#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "escada/config.hpp"
#include "escada/errors.hpp"
#include "escada/runner.hpp"

using namespace escada;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("escada-harness-" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

ExperimentConfig small(Scenario scenario, int events, int recs, PolicyKind policy = PolicyKind::Escada) {
    ExperimentConfig c = default_config();
    c.scenario = scenario;
    c.meal_events = events;
    c.recommendations = recs;
    c.policies = {policy};
    c.threads = 1;
    c.validate();
    return c;
}

int run_cli(const std::string& args) {
    const std::string cmd = std::string(ESCADA_BENCH_PATH) + " " + args + " > /dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    REQUIRE(WIFEXITED(status));
    return WEXITSTATUS(status);
}

void write_file(const fs::path& p, const std::string& text) {
    std::ofstream out(p);
    out << text;
}

}  // namespace

TEST_CASE("config parsing is strict and reports every problem") {
    nlohmann::json j = to_json(default_config());
    CHECK_NOTHROW(config_from_json(j));
    j["lamda"] = 3;
    j["environment"]["patiens"] = 2;
    try {
        (void)config_from_json(j);
        FAIL("unknown keys must be rejected");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Config);
        const std::string what = e.what();
        CHECK(what.find("lamda") != std::string::npos);
        CHECK(what.find("patiens") != std::string::npos);
    }

    nlohmann::json bad = to_json(default_config());
    bad["lambda"] = 25.0;  // not below epsilon
    CHECK_THROWS_AS(config_from_json(bad), Error);
    bad["allow_coarse_grid"] = true;
    const ExperimentConfig coarse = config_from_json(bad);
    CHECK_FALSE(coarse.warnings.empty());

    nlohmann::json wrong = to_json(default_config());
    wrong["policies"] = {"escada", "oracle-bot"};
    CHECK_THROWS_AS(config_from_json(wrong), Error);
    wrong = to_json(default_config());
    wrong["eval_resolution"] = "four";
    CHECK_THROWS_AS(config_from_json(wrong), Error);

    const ExperimentConfig round = config_from_json(to_json(default_config()));
    CHECK(to_json(round) == to_json(default_config()));
}

TEST_CASE("dotted config paths") {
    nlohmann::json doc = to_json(default_config());
    set_config_path(doc, "environment.noise_variance", 4.0);
    CHECK(doc["environment"]["noise_variance"] == 4.0);
    set_config_path(doc, "seed", 9);
    CHECK(config_from_json(doc).seed == 9);
}

TEST_CASE("SME with one event gives one record per recommendation") {
    const ExperimentResult r = run_experiment(small(Scenario::SME, 1, 15));
    REQUIRE(r.runs.size() == 1);
    const auto& recs = r.runs[0].records;
    CHECK(recs.size() == 15);
    for (std::size_t i = 0; i < recs.size(); ++i) {
        CHECK(recs[i].round == static_cast<int>(i) + 1);
        CHECK(recs[i].context_id == 0);
        CHECK(recs[i].regret == doctest::Approx(std::abs(recs[i].f - 112.5)));
    }
    CHECK(r.runs[0].summary.final_regret == doctest::Approx(r.runs[0].summary.cumulative_regret.back()));
}

TEST_CASE("SME runs one bandit per event") {
    const ExperimentResult r = run_experiment(small(Scenario::SME, 3, 4, PolicyKind::Taco));
    CHECK(r.runs.size() == 3);
    for (const auto& run : r.runs) CHECK(run.records.size() == 4);
}

TEST_CASE("MME cycles through every event") {
    const ExperimentResult r = run_experiment(small(Scenario::MME, 30, 15, PolicyKind::Calculator));
    REQUIRE(r.runs.size() == 1);
    CHECK(r.runs[0].records.size() == 450);

    const ExperimentResult two = run_experiment(small(Scenario::MME, 2, 5));
    const auto& recs = two.runs[0].records;
    REQUIRE(recs.size() == 10);
    for (std::size_t i = 0; i < recs.size(); ++i) CHECK(recs[i].context_id == static_cast<int>(i % 2));
}

TEST_CASE("identical configs give byte-identical outputs") {
    ExperimentConfig c = small(Scenario::SME, 3, 6);
    c.policies = {PolicyKind::Escada, PolicyKind::Ts, PolicyKind::RandomSafe};
    c.seed_count = 2;
    const fs::path a = scratch("det-a");
    const fs::path b = scratch("det-b");
    write_outputs(run_experiment(c), a.string());
    c.threads = 3;
    write_outputs(run_experiment(c), b.string());
    CHECK(slurp(a / "records.csv") == slurp(b / "records.csv"));
    CHECK(slurp(a / "aggregate.csv") == slurp(b / "aggregate.csv"));
    CHECK(fs::exists(a / "summary.json"));
    CHECK(fs::exists(a / "safesets.json"));
    const auto header = slurp(a / "records.csv").substr(0, round_record_csv_header().size());
    CHECK(header == round_record_csv_header());
}

TEST_CASE("quantiles") {
    CHECK(quantile({1.0, 2.0, 3.0, 4.0}, 0.5) == doctest::Approx(2.5));
    CHECK(quantile({5.0}, 0.9) == 5.0);
    CHECK(quantile({4.0, 1.0, 3.0, 2.0}, 0.25) == doctest::Approx(1.75));
    CHECK_THROWS_AS(quantile({}, 0.5), Error);
}

TEST_CASE("command-line exit codes and artifacts") {
    const fs::path dir = scratch("cli");
    CHECK(run_cli("--version") == 0);
    CHECK(run_cli("run -c " + (dir / "missing.json").string()) == 1);
    write_file(dir / "broken.json", "{\"lambda\": ");
    CHECK(run_cli("run -c " + (dir / "broken.json").string()) == 1);
    write_file(dir / "unknown.json", "{\"policy\": \"escada\"}");
    CHECK(run_cli("run -c " + (dir / "unknown.json").string()) == 1);

    nlohmann::json cfg = to_json(small(Scenario::SME, 2, 5));
    cfg["policies"] = {"escada", "taco"};
    cfg["seed_count"] = 2;
    write_file(dir / "ok.json", cfg.dump());
    const fs::path out = dir / "run";
    REQUIRE(run_cli("run -c " + (dir / "ok.json").string() + " -o " + out.string()) == 0);
    CHECK(fs::exists(out / "records.csv"));
    REQUIRE(run_cli("export-plots -i " + out.string()) == 0);
    CHECK(fs::exists(out / "plots" / "regret_curves.csv"));
    CHECK(fs::exists(out / "plots" / "boxplot_quantiles.csv"));
    CHECK(fs::exists(out / "plots" / "safeset_trajectories.csv"));
    CHECK(run_cli("export-plots -i " + (dir / "nowhere").string()) != 0);

    // An unsafe fixed start with no safe neighbourhood still runs; an oracle
    // start for a response that is never in the band is skipped, not fatal.
    nlohmann::json never = cfg;
    never["environment"]["patient_ranges"]["offset"] = {500, 501};
    never["init"] = "oracle";
    write_file(dir / "never.json", never.dump());
    CHECK(run_cli("run -c " + (dir / "never.json").string() + " -o " + (dir / "never").string()) == 0);

    nlohmann::json grid = {{"seed", {1, 2}}, {"environment.noise_variance", {1.0, 25.0}}};
    write_file(dir / "grid.json", grid.dump());
    cfg["output_dir"] = (dir / "sweep").string();
    write_file(dir / "base.json", cfg.dump());
    REQUIRE(run_cli("sweep -c " + (dir / "base.json").string() + " -g " + (dir / "grid.json").string()) == 0);
    CHECK(fs::exists(dir / "sweep" / "sweep.csv"));
    CHECK(fs::exists(dir / "sweep" / "sweep-003" / "records.csv"));
    write_file(dir / "badgrid.json", R"({"seed": [1, "x"]})");
    CHECK(run_cli("sweep -c " + (dir / "base.json").string() + " -g " + (dir / "badgrid.json").string()) == 1);
}

TEST_CASE("shipped configs load") {
    for (const char* name : {"default.json", "mme.json", "tuned.json"}) {
        const ExperimentConfig c = load_config(std::string(ESCADA_SOURCE_DIR) + "/configs/" + name);
        CHECK(c.policies.size() == 9);
    }
}
