#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "drcnn/dataset.hpp"
#include "drcnn/ensemble.hpp"
#include "drcnn/error.hpp"
#include "drcnn/experiment.hpp"
#include "drcnn/features.hpp"
#include "drcnn/forest.hpp"
#include "drcnn/io.hpp"
#include "drcnn/json_util.hpp"
#include "drcnn/metrics.hpp"
#include "drcnn/parallel.hpp"
#include "drcnn/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace drcnn;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kUndefined = 3 };

struct Globals {
  std::optional<std::uint64_t> seed;
  std::string config;
  std::string out;
  int threads = 0;

  int thread_count() const { return threads > 0 ? threads : default_threads(); }
  const std::string& need_out(const char* cmd) const {
    if (out.empty()) throw CLI::RequiredError(std::string(cmd) + ": --out");
    return out;
  }
  std::optional<json> config_json() const {
    if (config.empty()) return std::nullopt;
    return json_util::parse(read_file(config));
  }
};

std::string hash_hex(const std::string& bytes) { return hex64(hash_bytes(bytes)); }

SplitResult load_split(const std::string& manifest_path) {
  const SplitManifest m = parse_manifest(read_file(manifest_path));
  return resolve_manifest(m, fs::path(manifest_path).parent_path());
}

std::string stem_of(const std::string& path) {
  std::string s = fs::path(path).filename().string();
  if (const auto dot = s.find('.'); dot != std::string::npos) s.resize(dot);
  return s;
}

void cmd_gen_synth(const Globals& g, int designs, const std::string& name) {
  SynthConfig cfg;
  if (auto j = g.config_json()) cfg = synth_config_from_json(*j);
  if (g.seed) cfg.seed = *g.seed;
  validate_synth_config(cfg);
  const fs::path out = g.need_out("gen-synth");
  std::vector<SynthDesign> suite;
  if (designs == 1 && !name.empty()) {
    suite.push_back(generate(cfg));
    suite.back().name = name;
  } else if (designs == 1) {
    suite.push_back(generate(cfg));
    suite.back().name = "synth";
  } else {
    suite = generate_suite(cfg, designs, cfg.seed);
  }
  for (const SynthDesign& d : suite) {
    write_file_atomic(out / (d.name + ".layout.json"), write_layout(d.grid));
    write_file_atomic(out / (d.name + ".drc.json"), write_drc(d.drc));
    json plants = json::array();
    for (std::size_t off : d.hotspots) {
      plants.push_back({static_cast<int>(off % static_cast<std::size_t>(d.grid.nx)),
                        static_cast<int>(off / static_cast<std::size_t>(d.grid.nx))});
    }
    write_file_atomic(out / (d.name + ".plants.json"), plants.dump() + "\n");
    std::cout << d.name << ": " << d.grid.num_gcells() << " g-cells, " << d.hotspots.size() << " hotspots\n";
  }
}

void cmd_extract(const Globals& g, const std::string& layout, const std::string& drc, std::string design,
                 const std::string& csv) {
  const LayoutGrid grid = parse_layout(read_file(layout));
  const DrcReport report = parse_drc(read_file(drc));
  if (design.empty()) design = stem_of(layout);
  const std::vector<Sample> samples = extract_design(grid, report, design);
  write_file_atomic(g.need_out("extract"), write_samples_jsonl(samples));
  if (!csv.empty()) write_file_atomic(csv, write_samples_csv(samples));
  std::size_t pos = 0;
  for (const Sample& s : samples) pos += s.label ? 1 : 0;
  std::cout << design << ": " << samples.size() << " samples, " << pos << " positive, "
            << grid.layers.feature_length() << " features\n";
}

void cmd_split(const Globals& g, const std::vector<std::string>& inputs, const std::vector<std::string>& holdout) {
  SplitSpec spec;
  if (auto j = g.config_json()) spec = split_spec_from_json(*j);
  for (const std::string& h : holdout) spec.holdout_designs.insert(h);
  if (g.seed) spec.seed = *g.seed;
  const fs::path out = g.need_out("split");
  const fs::path base = fs::absolute(out).parent_path();
  std::vector<Sample> all;
  std::vector<SourceFile> sources;
  for (const std::string& in : inputs) {
    const std::string bytes = read_file(in);
    std::vector<Sample> s = parse_samples_jsonl(bytes);
    all.insert(all.end(), std::make_move_iterator(s.begin()), std::make_move_iterator(s.end()));
    sources.push_back({fs::relative(fs::absolute(in), base), hash_hex(bytes)});
  }
  const SplitResult r = split(all, spec);
  write_file_atomic(out, write_manifest(make_manifest(r, spec, sources)));
  std::cout << "train " << r.train.size() << ", valid " << r.valid.size();
  for (const auto& [d, s] : r.tests) std::cout << ", test[" << d << "] " << s.size();
  std::cout << "\n";
}

void cmd_train(const Globals& g, const std::string& manifest, int setting) {
  TrainConfig cfg;
  if (auto j = g.config_json()) cfg = train_config_from_json(*j);
  if (setting > 0) {
    cfg = table_settings(cfg, cfg.selection.num_voters, cfg.selection.subset_size)
              .at(static_cast<std::size_t>(setting - 1))
              .cfg;
  }
  if (g.seed) cfg.seed = *g.seed;
  const fs::path out = g.need_out("train");
  const SplitResult data = load_split(manifest);
  TrainLog log;
  const EnsembleModel model = train(data.train, cfg, g.thread_count(), &log);
  for (std::size_t e = 0; e < log.epoch_loss.size(); ++e) {
    std::cout << "epoch " << (e + 1) << " mean loss " << format_double(log.epoch_loss[e]) << "\n";
  }
  write_file_atomic(out, save_model(model));
}

void cmd_rf_train(const Globals& g, const std::string& manifest) {
  RfConfig cfg;
  if (auto j = g.config_json()) cfg = rf_config_from_json(*j);
  if (g.seed) cfg.seed = *g.seed;
  const fs::path out = g.need_out("rf-train");
  const SplitResult data = load_split(manifest);
  const RandomForest forest = rf_train(data.train, cfg, g.thread_count());
  write_file_atomic(out, save_forest(forest));
  std::cout << "rf: " << forest.trees.size() << " trees\n";
}

void cmd_predict(const Globals& g, const std::string& model_path, const std::string& samples_path) {
  const std::string doc = read_file(model_path);
  const json root = json_util::parse(doc);
  const std::vector<Sample> samples = parse_samples_jsonl(read_file(samples_path));
  Eigen::VectorXd scores;
  if (root.is_object() && root.value("kind", "") == "random_forest") {
    scores = rf_predict(load_forest(doc), samples);
  } else {
    scores = predict(load_model(doc), samples, g.thread_count());
  }
  write_file_atomic(g.need_out("predict"),
                    write_scores_csv(samples, std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size()))));
}

void cmd_evaluate(const Globals& g, const std::string& scores_path, const std::string& labels_path,
                  const std::string& curves) {
  const std::vector<ScoredKey> scored = parse_scores_csv(read_file(scores_path));
  std::map<SampleKey, bool> labels;
  for (const Sample& s : parse_samples_jsonl(read_file(labels_path))) labels[key_of(s)] = s.label;
  std::vector<double> scores;
  std::vector<bool> y;
  for (const ScoredKey& k : scored) {
    const auto it = labels.find(k.key);
    if (it == labels.end()) {
      throw ValidationError("evaluate: no label for " + k.key.design + " (" + std::to_string(k.key.col) + "," +
                            std::to_string(k.key.row) + ")");
    }
    scores.push_back(k.score);
    y.push_back(it->second);
  }
  const EvalReport report = evaluate(scores, y);
  const std::string text = report_json(report).dump(2) + "\n";
  if (g.out.empty()) std::cout << text;
  else write_file_atomic(g.out, text);
  if (!curves.empty()) emit_curves(report, curves);
}

void cmd_grid(const Globals& g, const std::string& manifest, const std::string& metric) {
  if (g.config.empty()) throw CLI::RequiredError("grid-search: --config");
  GridSpec spec = grid_spec_from_json(*g.config_json());
  if (!metric.empty()) {
    if (metric != "a_roc" && metric != "acc_e" && metric != "a_prc") {
      throw CLI::ValidationError("--metric", "must be a_roc, acc_e or a_prc");
    }
    spec.metric = metric;
  }
  if (g.seed) spec.base.seed = *g.seed;
  const fs::path out = g.need_out("grid-search");
  const SplitResult data = load_split(manifest);
  const GridResult result = grid_search(data.train, data.valid, spec, g.thread_count());
  const std::string table = render_grid_csv(result, spec.metric);
  write_file_atomic(out / "grid.csv", table);
  write_file_atomic(out / "best.json", to_json(result.ranked.front().cfg).dump(2) + "\n");
  std::cout << table;
}

void cmd_matrix(const Globals& g, const std::string& manifest) {
  MatrixConfig cfg;
  std::string config_bytes;
  if (!g.config.empty()) {
    config_bytes = read_file(g.config);
    cfg = matrix_config_from_json(json_util::parse(config_bytes));
  }
  if (g.seed) {
    cfg.base.seed = *g.seed;
    cfg.rf.seed = *g.seed;
  }
  const fs::path out = g.need_out("matrix");
  const std::string manifest_bytes = read_file(manifest);
  const SplitManifest m = parse_manifest(manifest_bytes);
  const SplitResult data = resolve_manifest(m, fs::path(manifest).parent_path());
  const MatrixResult result = run_matrix(data, cfg, g.thread_count(), &std::cerr);
  write_matrix(result, out);

  json run;
  run["config"] = to_json(cfg);
  run["manifest"] = {{"path", fs::absolute(manifest).lexically_normal().string()}, {"fnv1a64", hash_hex(manifest_bytes)}};
  json sources = json::array();
  for (const SourceFile& s : m.sources) sources.push_back({{"path", s.path.generic_string()}, {"fnv1a64", s.fnv1a64}});
  run["sources"] = sources;
  if (!config_bytes.empty()) run["config_file"] = {{"fnv1a64", hash_hex(config_bytes)}};
  write_file_atomic(out / "run.json", run.dump(2) + "\n");
  std::cout << render_markdown(result);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"DRC hotspot prediction with neural-network ensembles"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  std::uint64_t seed = 0;
  auto* seed_opt = app.add_option("--seed", seed, "Seed overriding the config seed");
  app.add_option("--config", g.config, "JSON config file")->check(CLI::ExistingFile);
  app.add_option("--out", g.out, "Output path");
  app.add_option("--threads", g.threads, "Worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  int designs = 1;
  std::string name;
  auto* gen = app.add_subcommand("gen-synth", "Generate synthetic layouts and DRC reports into --out");
  gen->add_option("--designs", designs, "Number of designs")->check(CLI::PositiveNumber);
  gen->add_option("--name", name, "Design name when generating one design");

  std::string layout, drc, design, csv;
  auto* ext = app.add_subcommand("extract", "Extract g-cell samples (JSON lines) to --out");
  ext->add_option("--layout", layout)->required()->check(CLI::ExistingFile);
  ext->add_option("--drc", drc)->required()->check(CLI::ExistingFile);
  ext->add_option("--design", design, "Design id (default: layout file stem)");
  ext->add_option("--csv", csv, "Also write the samples as CSV");

  std::vector<std::string> inputs, holdout;
  auto* spl = app.add_subcommand("split", "Split sample files into a manifest at --out");
  spl->add_option("samples", inputs, "Sample files")->required()->check(CLI::ExistingFile);
  spl->add_option("--holdout", holdout, "Designs used only for testing");

  std::string manifest;
  int setting = 0;
  auto* trn = app.add_subcommand("train", "Train an NN ensemble");
  trn->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  trn->add_option("--setting", setting, "Use ensemble setting 1-4")->check(CLI::Range(1, 4));

  auto* rf = app.add_subcommand("rf-train", "Train a random forest");
  rf->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);

  std::string model, samples;
  auto* prd = app.add_subcommand("predict", "Score samples with a model");
  prd->add_option("--model", model)->required()->check(CLI::ExistingFile);
  prd->add_option("--samples", samples)->required()->check(CLI::ExistingFile);

  std::string scores, labels, curves;
  auto* evl = app.add_subcommand("evaluate", "Compute Acc_e, A_roc and A_prc");
  evl->add_option("--scores", scores)->required()->check(CLI::ExistingFile);
  evl->add_option("--labels", labels, "Sample file holding the labels")->required()->check(CLI::ExistingFile);
  evl->add_option("--curves", curves, "Prefix for .roc.csv and .pr.csv");

  std::string metric;
  auto* grd = app.add_subcommand("grid-search", "Select hyperparameters on the validation set");
  grd->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);
  grd->add_option("--metric", metric, "a_roc (default), acc_e or a_prc");

  auto* mtx = app.add_subcommand("matrix", "Run settings 1-4 and RF on every test set");
  mtx->add_option("--manifest", manifest)->required()->check(CLI::ExistingFile);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  if (*seed_opt) g.seed = seed;

  try {
    if (*gen) cmd_gen_synth(g, designs, name);
    else if (*ext) cmd_extract(g, layout, drc, design, csv);
    else if (*spl) cmd_split(g, inputs, holdout);
    else if (*trn) cmd_train(g, manifest, setting);
    else if (*rf) cmd_rf_train(g, manifest);
    else if (*prd) cmd_predict(g, model, samples);
    else if (*evl) cmd_evaluate(g, scores, labels, curves);
    else if (*grd) cmd_grid(g, manifest, metric);
    else if (*mtx) cmd_matrix(g, manifest);
  } catch (const CLI::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kUsage;
  } catch (const UndefinedMetricError& e) {
    std::cerr << "undefined metric: " << e.what() << "\n";
    return kUndefined;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kData;
  }
  return kOk;
}
