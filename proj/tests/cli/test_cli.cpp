#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <set>
#include <string>

#include <json.hpp>

#include "drcnn/dataset.hpp"
#include "drcnn/ensemble.hpp"
#include "drcnn/experiment.hpp"
#include "drcnn/features.hpp"
#include "drcnn/io.hpp"
#include "drcnn/layout.hpp"

namespace fs = std::filesystem;
using namespace drcnn;

namespace {

const fs::path& work() {
  static const fs::path dir = [] {
    fs::path d = fs::temp_directory_path() / "drcnn_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

/// Runs the CLI with `args` inside the work directory; returns its exit code.
int run(const std::string& args) {
  const std::string cmd = "cd '" + work().string() + "' && '" DRCNN_CLI_PATH "' " + args + " >> cli.log 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

void put(const std::string& name, const std::string& text) { write_file_atomic(work() / name, text); }
std::string get(const std::string& name) { return read_file(work() / name); }

const char* kSynth = R"({"nx": 12, "ny": 12, "target_hotspot_rate": 0.1, "blockage_fraction": 0, "seed": 5})";

}  // namespace

TEST_CASE("gen-synth") {
  put("synth.json", kSynth);
  REQUIRE(run("gen-synth --config synth.json --out one") == 0);
  const LayoutGrid g = parse_layout(get("one/synth.layout.json"));
  CHECK(g.nx == 12);
  CHECK(parse_drc(get("one/synth.drc.json")).boxes.size() > 0);

  REQUIRE(run("gen-synth --config synth.json --out again") == 0);
  CHECK(get("again/synth.layout.json") == get("one/synth.layout.json"));
  REQUIRE(run("gen-synth --config synth.json --seed 6 --out other") == 0);
  CHECK(get("other/synth.layout.json") != get("one/synth.layout.json"));

  REQUIRE(run("gen-synth --config synth.json --designs 14 --out suite") == 0);
  CHECK(std::distance(fs::directory_iterator(work() / "suite"), fs::directory_iterator{}) == 42);
}

TEST_CASE("pipeline") {
  put("synth.json", kSynth);
  REQUIRE(run("gen-synth --config synth.json --designs 2 --out data") == 0);
  for (const char* d : {"synth_00", "synth_01"}) {
    const std::string base = std::string("data/") + d;
    REQUIRE(run("extract --layout " + base + ".layout.json --drc " + base + ".drc.json --out " + base +
                ".jsonl --csv " + base + ".csv") == 0);
  }
  const std::vector<Sample> s0 = parse_samples_jsonl(get("data/synth_00.jsonl"));
  REQUIRE(s0.size() == 144);
  std::set<std::pair<int, int>> positives;
  for (const Sample& s : s0) {
    CHECK(s.features.size() == 387);
    CHECK(s.design == "synth_00");
    if (s.label) positives.insert({s.gcell.col, s.gcell.row});
  }
  std::set<std::pair<int, int>> plants;
  for (const auto& p : nlohmann::json::parse(get("data/synth_00.plants.json"))) plants.insert({p[0].get<int>(), p[1].get<int>()});
  CHECK(positives == plants);
  CHECK_FALSE(positives.empty());

  REQUIRE(run("split data/synth_00.jsonl data/synth_01.jsonl --holdout synth_01 --seed 3 --out split.json") == 0);
  const SplitManifest m = parse_manifest(get("split.json"));
  const SplitResult r = resolve_manifest(m, work());
  CHECK(r.tests.at("synth_01").size() == 144);
  CHECK(r.train.size() + r.valid.size() + r.tests.at("synth_00").size() == 144);

  put("train.json", R"({"epochs": 3, "selection": {"num_voters": 5, "subset_size": 8}})");
  REQUIRE(run("train --manifest split.json --config train.json --setting 4 --seed 2 --out model.json") == 0);
  const EnsembleModel model = load_model(get("model.json"));
  CHECK(model.num_voters() == 5);
  CHECK(model.masks[0].size() == 8);
  REQUIRE(run("train --manifest split.json --config train.json --setting 4 --seed 2 --out model2.json") == 0);
  CHECK(get("model2.json") == get("model.json"));

  REQUIRE(run("predict --model model.json --samples data/synth_01.jsonl --out scores.csv") == 0);
  CHECK(parse_scores_csv(get("scores.csv")).size() == 144);
  REQUIRE(run("evaluate --scores scores.csv --labels data/synth_01.jsonl --curves curves --out report.json") == 0);
  const auto report = nlohmann::json::parse(get("report.json"));
  CHECK(report.at("a_roc").is_number());
  CHECK(report.at("n_pos").get<int>() > 0);
  CHECK(fs::exists(work() / "curves.roc.csv"));
  CHECK(fs::exists(work() / "curves.pr.csv"));

  put("rf.json", R"({"num_trees": 4})");
  REQUIRE(run("rf-train --manifest split.json --config rf.json --out rf_model.json") == 0);
  REQUIRE(run("predict --model rf_model.json --samples data/synth_01.jsonl --out rf_scores.csv") == 0);
  CHECK(parse_scores_csv(get("rf_scores.csv")).size() == 144);

  put("matrix.json",
      R"({"train": {"epochs": 1}, "voters": 3, "subset_size": 6, "rf": {"num_trees": 3}})");
  REQUIRE(run("matrix --manifest split.json --config matrix.json --seed 4 --out matrix") == 0);
  for (const char* f : {"table.md", "table.csv", "reports.json", "run.json", "models/setting1.json"}) {
    CHECK(fs::exists(work() / "matrix" / f));
  }
  CHECK(nlohmann::json::parse(get("matrix/run.json")).at("sources").size() == 2);

  put("grid.json", R"({"base": {"selection": {"num_voters": 2, "subset_size": 4}}, "epochs": [1, 2]})");
  const int grid = run("grid-search --manifest split.json --config grid.json --out grid");
  if (r.valid.empty() || std::none_of(r.valid.begin(), r.valid.end(), [](const Sample& s) { return s.label; })) {
    CHECK(grid == 3);
  } else {
    REQUIRE(grid == 0);
    CHECK(fs::exists(work() / "grid/grid.csv"));
    CHECK(train_config_from_json(nlohmann::json::parse(get("grid/best.json"))).selection.num_voters == 2);
  }
}

TEST_CASE("exit codes") {
  CHECK(run("--help") == 0);
  CHECK(run("no-such-command") == 1);
  CHECK(run("extract --layout missing.json --drc missing.json --out x.jsonl") == 1);
  put("broken.layout.json", "{\"nx\": ");
  put("empty.drc.json", "[]");
  CHECK(run("extract --layout broken.layout.json --drc empty.drc.json --out x.jsonl") == 2);

  std::vector<Sample> clean = parse_samples_jsonl(get("data/synth_00.jsonl"));
  for (Sample& s : clean) s.label = false;
  put("clean.jsonl", write_samples_jsonl(clean));
  REQUIRE(run("predict --model model.json --samples clean.jsonl --out clean_scores.csv") == 0);
  CHECK(run("evaluate --scores clean_scores.csv --labels clean.jsonl --curves clean") == 3);
  CHECK_FALSE(fs::exists(work() / "clean.roc.csv"));
}
