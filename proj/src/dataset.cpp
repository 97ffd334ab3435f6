#include "drcnn/dataset.hpp"

#include <algorithm>
#include <cmath>

#include "drcnn/error.hpp"
#include "drcnn/io.hpp"
#include "drcnn/json_util.hpp"
#include "drcnn/random.hpp"

namespace drcnn {

namespace {

void check_spec(const SplitSpec& spec) {
  const double sum = spec.train_frac + spec.valid_frac + spec.test_frac;
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split fractions must sum to 1");
  if (spec.train_frac < 0.0 || spec.valid_frac < 0.0 || spec.test_frac < 0.0) {
    throw ConfigError("split fractions must be non-negative");
  }
}

}  // namespace

SplitSpec split_spec_from_json(const json_util::json& j) {
  using namespace json_util;
  object(j, "");
  SplitSpec spec;
  for (const auto& [key, v] : j.items()) {
    if (key == "train_frac") spec.train_frac = as_double(v, key);
    else if (key == "valid_frac") spec.valid_frac = as_double(v, key);
    else if (key == "test_frac") spec.test_frac = as_double(v, key);
    else if (key == "seed") spec.seed = as_u64(v, key);
    else if (key == "holdout") {
      array(v, key);
      for (std::size_t i = 0; i < v.size(); ++i) spec.holdout_designs.insert(as_string(v[i], join(key, i)));
    } else {
      throw SchemaError(key, "unknown key");
    }
  }
  check_spec(spec);
  return spec;
}

json_util::json to_json(const SplitSpec& spec) {
  return {{"train_frac", spec.train_frac},
          {"valid_frac", spec.valid_frac},
          {"test_frac", spec.test_frac},
          {"holdout", spec.holdout_designs},
          {"seed", spec.seed}};
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec, bool holdout) {
  check_spec(spec);
  if (holdout) return {0, 0, n};
  const auto nd = static_cast<double>(n);
  const auto train = std::min<std::size_t>(n, static_cast<std::size_t>(std::llround(spec.train_frac * nd)));
  const auto valid =
      std::min<std::size_t>(n - train, static_cast<std::size_t>(std::llround(spec.valid_frac * nd)));
  return {train, valid, n - train - valid};
}

SplitResult split(std::span<const Sample> samples, const SplitSpec& spec) {
  check_spec(spec);
  std::map<std::string, std::vector<std::size_t>> by_design;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].design.empty()) throw ValidationError("sample without design id");
    by_design[samples[i].design].push_back(i);
  }

  SplitResult out;
  for (auto& [design, idx] : by_design) {
    const bool holdout = spec.holdout_designs.contains(design);
    const SplitCounts counts = split_counts(idx.size(), spec, holdout);
    Rng rng(derive_seed(spec.seed, fnv1a64(design.data(), design.size())));
    if (!holdout) rng.shuffle(idx);
    std::size_t k = 0;
    for (; k < counts.train; ++k) out.train.push_back(samples[idx[k]]);
    for (; k < counts.train + counts.valid; ++k) out.valid.push_back(samples[idx[k]]);
    auto& test = out.tests[design];
    for (; k < idx.size(); ++k) test.push_back(samples[idx[k]]);
  }
  return out;
}

NormStats NormStats::restore(Eigen::VectorXd mean, Eigen::VectorXd stddev) {
  if (mean.size() != stddev.size()) throw ValidationError("norm: mean/std length mismatch");
  if (!mean.allFinite() || !stddev.allFinite() || (stddev.array() < 0.0).any()) {
    throw ValidationError("norm: invalid statistics");
  }
  return NormStats(std::move(mean), std::move(stddev));
}

NormStats fit_norm(const Eigen::Ref<const Eigen::MatrixXd>& train) {
  if (train.rows() < 1) throw ValidationError("fit_norm: empty training set");
  const double n = static_cast<double>(train.rows());
  Eigen::VectorXd mean = train.colwise().sum().transpose() / n;
  Eigen::VectorXd var = (train.rowwise() - mean.transpose()).array().square().colwise().sum().transpose() / n;
  return NormStats(std::move(mean), var.cwiseSqrt());
}

NormStats fit_norm(std::span<const Sample> train) { return fit_norm(feature_matrix(train)); }

Eigen::MatrixXd apply_norm(const NormStats& stats, const Eigen::Ref<const Eigen::MatrixXd>& x) {
  if (x.cols() != stats.dim()) {
    throw ValidationError("apply_norm: expected " + std::to_string(stats.dim()) + " features, got " +
                          std::to_string(x.cols()));
  }
  Eigen::RowVectorXd scale(stats.dim());
  for (Eigen::Index j = 0; j < stats.dim(); ++j) {
    scale(j) = stats.stddev()(j) > 0.0 ? 1.0 / stats.stddev()(j) : 0.0;
  }
  return (x.rowwise() - stats.mean().transpose()).array().rowwise() * scale.array();
}

Eigen::MatrixXd apply_norm(const NormStats& stats, std::span<const Sample> samples) {
  return apply_norm(stats, feature_matrix(samples));
}

Eigen::MatrixXd feature_matrix(std::span<const Sample> samples) {
  if (samples.empty()) return {};
  const Eigen::Index dim = samples.front().features.size();
  Eigen::MatrixXd x(static_cast<Eigen::Index>(samples.size()), dim);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (samples[i].features.size() != dim) throw ValidationError("inconsistent feature length");
    x.row(static_cast<Eigen::Index>(i)) = samples[i].features.transpose();
  }
  return x;
}

std::vector<bool> label_vector(std::span<const Sample> samples) {
  std::vector<bool> y(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) y[i] = samples[i].label;
  return y;
}

SampleKey key_of(const Sample& s) { return {s.design, s.gcell.col, s.gcell.row}; }

namespace {

using json_util::json;

json keys_to(const std::vector<SampleKey>& keys) {
  json out = json::array();
  for (const SampleKey& k : keys) out.push_back(json::array({k.design, k.col, k.row}));
  return out;
}

std::vector<SampleKey> keys_from(const json& j, const std::string& path) {
  using namespace json_util;
  array(j, path);
  std::vector<SampleKey> out;
  out.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = join(path, i);
    const json& e = array(j[i], p);
    if (e.size() != 3) throw SchemaError(p, "expected [design, col, row]");
    out.push_back({as_string(e[0], p), static_cast<int>(as_int(e[1], p)), static_cast<int>(as_int(e[2], p))});
  }
  return out;
}

std::vector<SampleKey> keys(const std::vector<Sample>& s) {
  std::vector<SampleKey> out;
  out.reserve(s.size());
  for (const Sample& x : s) out.push_back(key_of(x));
  return out;
}

}  // namespace

SplitManifest make_manifest(const SplitResult& result, const SplitSpec& spec,
                            std::vector<SourceFile> sources) {
  SplitManifest m;
  m.sources = std::move(sources);
  m.spec = spec;
  m.train = keys(result.train);
  m.valid = keys(result.valid);
  for (const auto& [design, s] : result.tests) m.tests[design] = keys(s);
  return m;
}

std::string write_manifest(const SplitManifest& m) {
  json root;
  root["version"] = 1;
  json sources = json::array();
  for (const SourceFile& s : m.sources) {
    sources.push_back({{"path", s.path.generic_string()}, {"fnv1a64", s.fnv1a64}});
  }
  root["sources"] = std::move(sources);
  root["split"] = {{"train_frac", m.spec.train_frac},
                   {"valid_frac", m.spec.valid_frac},
                   {"test_frac", m.spec.test_frac},
                   {"holdout", m.spec.holdout_designs},
                   {"seed", m.spec.seed}};
  root["train"] = keys_to(m.train);
  root["valid"] = keys_to(m.valid);
  json tests = json::object();
  for (const auto& [design, k] : m.tests) tests[design] = keys_to(k);
  root["tests"] = std::move(tests);
  return root.dump() + "\n";
}

SplitManifest parse_manifest(std::string_view document) {
  using namespace json_util;
  const json root = json_util::parse(document);
  object(root, "");
  if (get_int(root, "version", "") != 1) throw ValidationError("manifest: unsupported version");
  SplitManifest m;
  const json& sources = array(field(root, "sources", ""), "sources");
  for (std::size_t i = 0; i < sources.size(); ++i) {
    const std::string p = join("sources", i);
    m.sources.push_back({as_string(field(sources[i], "path", p), join(p, "path")),
                         as_string(field(sources[i], "fnv1a64", p), join(p, "fnv1a64"))});
  }
  const json& sp = field(root, "split", "");
  m.spec.train_frac = get_double(sp, "train_frac", "split");
  m.spec.valid_frac = get_double(sp, "valid_frac", "split");
  m.spec.test_frac = get_double(sp, "test_frac", "split");
  m.spec.seed = as_u64(field(sp, "seed", "split"), "split.seed");
  const json& holdout = array(field(sp, "holdout", "split"), "split.holdout");
  for (std::size_t i = 0; i < holdout.size(); ++i) {
    m.spec.holdout_designs.insert(as_string(holdout[i], join("split.holdout", i)));
  }
  m.train = keys_from(field(root, "train", ""), "train");
  m.valid = keys_from(field(root, "valid", ""), "valid");
  const json& tests = object(field(root, "tests", ""), "tests");
  for (const auto& [design, k] : tests.items()) m.tests[design] = keys_from(k, join("tests", design));
  return m;
}

SplitResult resolve_manifest(const SplitManifest& m, const std::filesystem::path& manifest_dir) {
  std::map<SampleKey, Sample> pool;
  for (const SourceFile& src : m.sources) {
    const std::filesystem::path path = src.path.is_absolute() ? src.path : manifest_dir / src.path;
    const std::string bytes = read_file(path);
    if (hex64(hash_bytes(bytes)) != src.fnv1a64) {
      throw ValidationError("manifest: source " + path.string() + " changed since split");
    }
    for (Sample& s : parse_samples_jsonl(bytes)) {
      SampleKey k = key_of(s);
      pool.insert_or_assign(std::move(k), std::move(s));
    }
  }
  auto take = [&](const std::vector<SampleKey>& keys) {
    std::vector<Sample> out;
    out.reserve(keys.size());
    for (const SampleKey& k : keys) {
      auto it = pool.find(k);
      if (it == pool.end()) {
        throw ValidationError("manifest: sample (" + k.design + ", " + std::to_string(k.col) + ", " +
                              std::to_string(k.row) + ") not found in sources");
      }
      out.push_back(it->second);
    }
    return out;
  };
  SplitResult r;
  r.train = take(m.train);
  r.valid = take(m.valid);
  for (const auto& [design, k] : m.tests) r.tests[design] = take(k);
  return r;
}

}  // namespace drcnn
