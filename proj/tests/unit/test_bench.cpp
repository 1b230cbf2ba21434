#include <doctest.h>

#include <filesystem>

#include <lodom/bench.hpp>
#include <lodom/dataio.hpp>
#include <lodom/error.hpp>
#include <lodom/run_config.hpp>

#include <json.hpp>

using namespace lodom;

namespace {

RunConfig small_suite() {
  return parse_run_config(R"({
    "seed": 5,
    "input": {"synthetic": {"preset": "corridor", "frames": 6,
                            "trajectory": {"kind": "constant_velocity", "step_v": [0.4, 0, 0], "step_w": [0, 0, 0]}}},
    "synthetic_skymasks": false,
    "runs": [{"name": "icp", "method": "icp", "downsample_cell": 0.5},
             {"name": "loam", "method": "loam"},
             {"name": "lego", "method": "lego"}]
  })");
}

}  // namespace

TEST_CASE("suite run and reports") {
  const RunConfig cfg = small_suite();
  const SuiteInput input = load_suite_input(cfg);
  CHECK(input.scans.size() == 6);
  CHECK(input.ground_truth.size() == 6);
  REQUIRE(input.factors.labels);
  CHECK(!input.factors.skymasks);

  const SuiteResult r = run_suite(cfg, input);
  REQUIRE(r.outcomes.size() == 3);
  for (const auto& o : r.outcomes) CHECK(o.run);
  REQUIRE(r.evaluation);

  const auto report = nlohmann::json::parse(report_json(r, run_config_to_json(cfg)));
  CHECK(report.contains("methods"));
  // Summary values equal recomputation from the raw series in the report.
  for (const auto& m : report["methods"]) {
    std::vector<double> t;
    for (const auto& e : m["translation_errors_m"]) t.push_back(e.get<double>());
    CHECK(m["translation_rmse_m"].get<double>() == rmse(t));
    CHECK(m["translation_mean_m"].get<double>() == mean_abs(t));
  }
  CHECK(report_json(r, run_config_to_json(cfg)) == report_json(run_suite(cfg, input), run_config_to_json(cfg)));
  const std::string csv = report_csv(r);
  CHECK(csv.find("icp") != std::string::npos);
  CHECK(csv.find("lego") != std::string::npos);
  const std::string eff = efficiency_csv(r);
  CHECK(eff.find("N/A") != std::string::npos);
  CHECK(frame_errors_csv(r).find('\n') != std::string::npos);
  CHECK(ptpf_csv(*r.outcomes[0].run).find('\n') != std::string::npos);
}

TEST_CASE("failing runs are recorded and the suite continues") {
  RunConfig cfg = small_suite();
  SuiteInput input = load_suite_input(cfg);
  for (auto& scan : input.scans) scan.points.resize(std::min<std::size_t>(scan.size(), 3));
  const SuiteResult r = run_suite(cfg, input);
  REQUIRE(r.outcomes.size() == 3);
  const std::string json = report_json(r);
  CHECK(!json.empty());
}

TEST_CASE("artifacts and datasets on disk") {
  const auto dir = std::filesystem::temp_directory_path() / "lodom_test_bench";
  std::filesystem::remove_all(dir);
  const RunConfig cfg = small_suite();
  const SuiteInput input = load_suite_input(cfg);
  const SuiteResult r = run_suite(cfg, input);
  write_suite_artifacts(r, run_config_to_json(cfg), dir / "out");
  for (const char* f : {"icp.traj", "icp_ptpf.csv", "report.json", "report.csv", "frame_errors.csv", "efficiency.csv"})
    CHECK(std::filesystem::exists(dir / "out" / f));
  CHECK(read_trajectory(dir / "out" / "loam.traj").size() == 6);

  ScenarioSpec s = *cfg.synthetic;
  s.seed = cfg.seed;
  const SyntheticSequence seq = generate_sequence(s);
  write_synthetic_dataset(seq, dir / "data");
  CHECK(std::filesystem::exists(dir / "data" / "ground_truth.traj"));
  CHECK(std::filesystem::exists(dir / "data" / "scan_000005.lcd"));

  // The dataset files reproduce the synthetic input.
  nlohmann::json wrapped;
  wrapped["input"]["dataset"] = nlohmann::json::parse(read_text_file(dir / "data" / "dataset.json"));
  wrapped["runs"] = nlohmann::json::array({{{"name", "icp"}, {"method", "icp"}}});
  const RunConfig from_files = parse_run_config(wrapped.dump(), dir / "data");
  REQUIRE(from_files.dataset);
  const SuiteInput loaded = load_suite_input(from_files);
  REQUIRE(loaded.scans.size() == input.scans.size());
  CHECK(loaded.scans[3].size() == input.scans[3].size());
  CHECK(loaded.scans[3].points.back().xyz == input.scans[3].points.back().xyz);
  REQUIRE(loaded.factors.labels);
  CHECK(loaded.factors.labels->size() == 6);
}
