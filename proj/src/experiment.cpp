#include "drcnn/experiment.hpp"

#include <algorithm>
#include <functional>
#include <ostream>
#include <sstream>

#include "drcnn/error.hpp"
#include "drcnn/io.hpp"
#include "drcnn/json_util.hpp"

namespace drcnn {

using json_util::json;

std::vector<NamedConfig> table_settings(const TrainConfig& base, int voters, int subset) {
  auto make = [&](const char* name, int m, SelectionMode mode) {
    TrainConfig cfg = base;
    cfg.selection.num_voters = m;
    cfg.selection.mode = mode;
    cfg.selection.subset_size = subset;
    cfg.pca.reset();
    return NamedConfig{name, cfg};
  };
  return {make("setting1", 1, SelectionMode::all), make("setting2", voters, SelectionMode::all),
          make("setting3", voters, SelectionMode::largest_variance), make("setting4", voters, SelectionMode::srs)};
}

json to_json(const MatrixConfig& cfg) {
  return {{"train", to_json(cfg.base)},
          {"rf", to_json(cfg.rf)},
          {"voters", cfg.voters},
          {"subset_size", cfg.subset_size},
          {"include_rf", cfg.include_rf}};
}

MatrixConfig matrix_config_from_json(const json& j) {
  using namespace json_util;
  object(j, "");
  MatrixConfig cfg;
  for (const auto& [key, v] : j.items()) {
    if (key == "train") cfg.base = train_config_from_json(v);
    else if (key == "rf") cfg.rf = rf_config_from_json(v);
    else if (key == "voters") cfg.voters = static_cast<int>(as_int(v, key));
    else if (key == "subset_size") cfg.subset_size = static_cast<int>(as_int(v, key));
    else if (key == "include_rf") cfg.include_rf = as_bool(v, key);
    else throw SchemaError(key, "unknown key");
  }
  return cfg;
}

std::string write_scores_csv(std::span<const Sample> samples, std::span<const double> scores) {
  if (samples.size() != scores.size()) throw ValidationError("score count does not match sample count");
  std::string out = "design,col,row,score\n";
  for (std::size_t i = 0; i < samples.size(); ++i) {
    out += samples[i].design + "," + std::to_string(samples[i].gcell.col) + "," +
           std::to_string(samples[i].gcell.row) + "," + format_double(scores[i]) + "\n";
  }
  return out;
}

std::vector<ScoredKey> parse_scores_csv(std::string_view document) {
  std::vector<ScoredKey> out;
  std::istringstream in{std::string(document)};
  std::string line;
  std::size_t offset = 0;
  bool header = true;
  while (std::getline(in, line)) {
    const std::size_t here = offset;
    offset += line.size() + 1;
    if (header) {
      if (line.rfind("design,col,row,score", 0) != 0) throw ParseError("scores: bad header", here);
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 4) throw ParseError("scores: expected 4 columns", here);
    try {
      out.push_back({{cells[0], std::stoi(cells[1]), std::stoi(cells[2])}, std::stod(cells[3])});
    } catch (const std::exception&) {
      throw ParseError("scores: bad number", here);
    }
  }
  if (header) throw ParseError("scores: empty file", 0);
  return out;
}

MatrixResult run_matrix(const SplitResult& data, const MatrixConfig& cfg, int threads, std::ostream* log) {
  if (data.train.size() < 2) throw ValidationError("matrix: training set too small");
  if (data.tests.empty()) throw ValidationError("matrix: no test sets");

  MatrixResult result;
  std::vector<Sample> pooled;
  for (const auto& [design, samples] : data.tests) {
    result.designs.push_back(design);
    pooled.insert(pooled.end(), samples.begin(), samples.end());
  }
  const Eigen::MatrixXd train_x = feature_matrix(data.train);
  const std::vector<bool> train_y = label_vector(data.train);

  auto evaluate_column = [&](ModelColumn& col, const std::function<Eigen::VectorXd(const Eigen::MatrixXd&)>& score) {
    std::vector<double> all;
    for (const auto& [design, samples] : data.tests) {
      const Eigen::VectorXd s = samples.empty() ? Eigen::VectorXd() : score(feature_matrix(samples));
      std::vector<double> v(s.data(), s.data() + s.size());
      col.per_design[design] = samples.empty() ? EvalReport{} : evaluate(v, label_vector(samples));
      all.insert(all.end(), v.begin(), v.end());
    }
    col.pooled = evaluate(all, label_vector(pooled));
    col.scores_file = write_scores_csv(pooled, all);
    if (log) {
      *log << col.name << ": pooled a_roc " << format_metric(col.pooled.a_roc) << ", a_prc "
           << format_metric(col.pooled.a_prc) << ", acc_e " << format_metric(col.pooled.acc_e) << "\n";
    }
  };

  for (const NamedConfig& nc : table_settings(cfg.base, cfg.voters, cfg.subset_size)) {
    if (log) *log << "training " << nc.name << " (" << nc.cfg.selection.num_voters << " voters, "
                  << to_string(nc.cfg.selection.mode) << ")\n";
    const EnsembleModel model = train(train_x, train_y, nc.cfg, threads);
    ModelColumn col;
    col.name = nc.name;
    col.model_file = save_model(model);
    evaluate_column(col, [&](const Eigen::MatrixXd& x) { return predict(model, x, threads); });
    result.columns.push_back(std::move(col));
  }
  if (cfg.include_rf) {
    if (log) *log << "training rf (" << cfg.rf.num_trees << " trees)\n";
    const RandomForest forest = rf_train(train_x, train_y, cfg.rf, threads);
    ModelColumn col;
    col.name = "rf";
    col.model_file = save_forest(forest);
    evaluate_column(col, [&](const Eigen::MatrixXd& x) { return rf_predict(forest, x); });
    result.columns.push_back(std::move(col));
  }
  return result;
}

namespace {

std::vector<std::pair<std::string, std::vector<const EvalReport*>>> table_rows(const MatrixResult& r) {
  std::vector<std::pair<std::string, std::vector<const EvalReport*>>> rows;
  for (const std::string& d : r.designs) {
    std::vector<const EvalReport*> cells;
    for (const ModelColumn& c : r.columns) cells.push_back(&c.per_design.at(d));
    rows.emplace_back(d, std::move(cells));
  }
  std::vector<const EvalReport*> cells;
  for (const ModelColumn& c : r.columns) cells.push_back(&c.pooled);
  rows.emplace_back(kPooledRow, std::move(cells));
  return rows;
}

}  // namespace

std::string render_markdown(const MatrixResult& result) {
  std::ostringstream out;
  out << "| Test set |";
  for (const ModelColumn& c : result.columns) out << ' ' << c.name << " Acc_e | " << c.name << " A_roc | " << c.name << " A_prc |";
  out << "\n|---|";
  for (std::size_t i = 0; i < result.columns.size(); ++i) out << "---:|---:|---:|";
  out << '\n';
  for (const auto& [name, cells] : table_rows(result)) {
    out << "| " << name << " |";
    for (const EvalReport* e : cells) {
      out << ' ' << format_metric(e->acc_e) << " | " << format_metric(e->a_roc) << " | " << format_metric(e->a_prc) << " |";
    }
    out << '\n';
  }
  return out.str();
}

std::string render_csv(const MatrixResult& result) {
  std::ostringstream out;
  out << "test_set";
  for (const ModelColumn& c : result.columns) out << ',' << c.name << "_acc_e," << c.name << "_a_roc," << c.name << "_a_prc";
  out << '\n';
  for (const auto& [name, cells] : table_rows(result)) {
    out << name;
    for (const EvalReport* e : cells) {
      out << ',' << format_metric(e->acc_e) << ',' << format_metric(e->a_roc) << ',' << format_metric(e->a_prc);
    }
    out << '\n';
  }
  return out.str();
}

void write_matrix(const MatrixResult& result, const std::filesystem::path& out_dir) {
  json reports = json::object();
  for (const ModelColumn& c : result.columns) {
    write_file_atomic(out_dir / "models" / (c.name + ".json"), c.model_file);
    write_file_atomic(out_dir / "scores" / (c.name + ".csv"), c.scores_file);
    json col = json::object();
    for (const auto& [design, rep] : c.per_design) col[design] = report_json(rep);
    col[kPooledRow] = report_json(c.pooled);
    reports[c.name] = std::move(col);
  }
  write_file_atomic(out_dir / "reports.json", reports.dump(2) + "\n");
  write_file_atomic(out_dir / "table.md", render_markdown(result));
  write_file_atomic(out_dir / "table.csv", render_csv(result));
}

GridSpec grid_spec_from_json(const json& j) {
  using namespace json_util;
  object(j, "");
  GridSpec spec;
  auto ints = [](const json& v, const std::string& key) {
    array(v, key);
    std::vector<int> out;
    for (std::size_t i = 0; i < v.size(); ++i) out.push_back(static_cast<int>(as_int(v[i], join(key, i))));
    return out;
  };
  for (const auto& [key, v] : j.items()) {
    if (key == "base") spec.base = train_config_from_json(v);
    else if (key == "learning_rate") {
      array(v, key);
      for (std::size_t i = 0; i < v.size(); ++i) spec.learning_rates.push_back(as_double(v[i], join(key, i)));
    } else if (key == "epochs") spec.epochs = ints(v, key);
    else if (key == "num_voters") spec.voters = ints(v, key);
    else if (key == "subset_size") spec.subset_sizes = ints(v, key);
    else if (key == "metric") spec.metric = as_string(v, key);
    else throw SchemaError(key, "unknown key");
  }
  if (spec.metric != "a_roc" && spec.metric != "acc_e" && spec.metric != "a_prc") {
    throw ConfigError("grid: metric must be a_roc, acc_e or a_prc");
  }
  return spec;
}

namespace {

double pick_metric(const EvalReport& r, const std::string& metric) {
  if (metric == "acc_e") return *r.acc_e;
  if (metric == "a_prc") return *r.a_prc;
  return *r.a_roc;
}

}  // namespace

GridResult grid_search(std::span<const Sample> train_set, std::span<const Sample> valid, const GridSpec& spec,
                       int threads) {
  if (valid.empty()) throw ValidationError("grid: empty validation set");
  const std::vector<bool> valid_y = label_vector(valid);
  if (std::none_of(valid_y.begin(), valid_y.end(), [](bool b) { return b; }) ||
      std::all_of(valid_y.begin(), valid_y.end(), [](bool b) { return b; })) {
    throw UndefinedMetricError("grid: validation set lacks one class; metrics are undefined");
  }
  auto or_base = [](auto list, auto base) { return list.empty() ? decltype(list){base} : list; };
  const auto lrs = or_base(spec.learning_rates, spec.base.learning_rate);
  const auto eps = or_base(spec.epochs, spec.base.epochs);
  const auto ms = or_base(spec.voters, spec.base.selection.num_voters);
  const auto ns = or_base(spec.subset_sizes, spec.base.selection.subset_size);

  const Eigen::MatrixXd train_x = feature_matrix(train_set);
  const std::vector<bool> train_y = label_vector(train_set);
  const Eigen::MatrixXd valid_x = feature_matrix(valid);

  GridResult result;
  for (double lr : lrs) {
    for (int e : eps) {
      for (int m : ms) {
        for (int n : ns) {
          TrainConfig cfg = spec.base;
          cfg.learning_rate = lr;
          cfg.epochs = e;
          cfg.selection.num_voters = m;
          cfg.selection.subset_size = n;
          const EnsembleModel model = train(train_x, train_y, cfg, threads);
          const Eigen::VectorXd s = predict(model, valid_x, threads);
          GridEntry entry{cfg, evaluate(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), valid_y), 0.0};
          entry.score = pick_metric(entry.valid, spec.metric);
          result.ranked.push_back(std::move(entry));
        }
      }
    }
  }
  std::stable_sort(result.ranked.begin(), result.ranked.end(), [](const GridEntry& a, const GridEntry& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.cfg.selection.num_voters != b.cfg.selection.num_voters) {
      return a.cfg.selection.num_voters < b.cfg.selection.num_voters;
    }
    if (a.cfg.selection.subset_size != b.cfg.selection.subset_size) {
      return a.cfg.selection.subset_size < b.cfg.selection.subset_size;
    }
    if (a.cfg.learning_rate != b.cfg.learning_rate) return a.cfg.learning_rate < b.cfg.learning_rate;
    return a.cfg.epochs < b.cfg.epochs;
  });
  return result;
}

std::string render_grid_csv(const GridResult& result, const std::string& metric) {
  std::string out = "rank,learning_rate,epochs,num_voters,subset_size," + metric + "\n";
  for (std::size_t i = 0; i < result.ranked.size(); ++i) {
    const GridEntry& e = result.ranked[i];
    out += std::to_string(i + 1) + "," + format_double(e.cfg.learning_rate) + "," + std::to_string(e.cfg.epochs) +
           "," + std::to_string(e.cfg.selection.num_voters) + "," + std::to_string(e.cfg.selection.subset_size) +
           "," + format_double(e.score) + "\n";
  }
  return out;
}

}  // namespace drcnn
