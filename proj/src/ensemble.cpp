#include "drcnn/ensemble.hpp"

#include <algorithm>
#include <numeric>
#include <set>

#include "drcnn/error.hpp"
#include "drcnn/json_util.hpp"
#include "drcnn/parallel.hpp"

namespace drcnn {

using json_util::json;

namespace {

// Stream id for per-voter initialization and batch shuffling.
constexpr std::uint64_t kVoterStream = 0x766F746572ULL;
constexpr std::uint64_t kMaskStream = 0x6D61736BULL;

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

void check_keys(const json& j, std::initializer_list<std::string_view> allowed, const std::string& path) {
  json_util::object(j, path);
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw SchemaError(json_util::join(path, key), "unknown key");
    }
  }
}

}  // namespace

json to_json(const TrainConfig& cfg) {
  json j = {{"learning_rate", cfg.learning_rate},
            {"epochs", cfg.epochs},
            {"batch_size", cfg.batch_size},
            {"hidden", cfg.hidden},
            {"seed", cfg.seed},
            {"selection",
             {{"mode", to_string(cfg.selection.mode)},
              {"subset_size", cfg.selection.subset_size},
              {"num_voters", cfg.selection.num_voters},
              {"seed", cfg.selection.seed}}},
            {"loss", {{"w0", cfg.loss.w0}, {"w1", cfg.loss.w1}}}};
  j["pca"] = cfg.pca ? json(*cfg.pca) : json(nullptr);
  return j;
}

TrainConfig train_config_from_json(const json& j) {
  using namespace json_util;
  check_keys(j, {"learning_rate", "epochs", "batch_size", "hidden", "seed", "selection", "loss", "pca"}, "");
  TrainConfig cfg;
  if (auto* v = optional_field(j, "learning_rate")) cfg.learning_rate = as_double(*v, "learning_rate");
  if (auto* v = optional_field(j, "epochs")) cfg.epochs = static_cast<int>(as_int(*v, "epochs"));
  if (auto* v = optional_field(j, "batch_size")) cfg.batch_size = static_cast<int>(as_int(*v, "batch_size"));
  if (auto* v = optional_field(j, "hidden")) cfg.hidden = static_cast<int>(as_int(*v, "hidden"));
  if (auto* v = optional_field(j, "seed")) cfg.seed = as_u64(*v, "seed");
  if (auto* v = optional_field(j, "pca"); v && !v->is_null()) cfg.pca = as_bool(*v, "pca");
  if (auto* s = optional_field(j, "selection")) {
    check_keys(*s, {"mode", "subset_size", "num_voters", "seed"}, "selection");
    if (auto* v = optional_field(*s, "mode")) {
      cfg.selection.mode = selection_mode_from(as_string(*v, "selection.mode"));
    }
    if (auto* v = optional_field(*s, "subset_size")) {
      cfg.selection.subset_size = static_cast<int>(as_int(*v, "selection.subset_size"));
    }
    if (auto* v = optional_field(*s, "num_voters")) {
      cfg.selection.num_voters = static_cast<int>(as_int(*v, "selection.num_voters"));
    }
    if (auto* v = optional_field(*s, "seed")) cfg.selection.seed = as_u64(*v, "selection.seed");
  }
  if (auto* l = optional_field(j, "loss")) {
    check_keys(*l, {"w0", "w1"}, "loss");
    if (auto* v = optional_field(*l, "w0")) cfg.loss.w0 = as_double(*v, "loss.w0");
    if (auto* v = optional_field(*l, "w1")) cfg.loss.w1 = as_double(*v, "loss.w1");
  }
  return cfg;
}

namespace {

void check_config(const TrainConfig& cfg) {
  if (!(cfg.learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
  if (cfg.epochs < 0) throw ConfigError("epochs must be non-negative");
  if (cfg.batch_size < 1) throw ConfigError("batch_size must be positive");
  if (cfg.hidden < 1) throw ConfigError("hidden must be positive");
  if (cfg.selection.num_voters < 1) throw ConfigError("need at least one voter");
  if (cfg.loss.w0 < 0.0 || cfg.loss.w1 < 0.0) throw ConfigError("class weights must be non-negative");
}

struct VoterResult {
  VoterNet<double> net;
  std::vector<double> epoch_loss;
};

VoterResult train_voter(const Eigen::MatrixXd& inputs, const SubsetMask& mask, const std::vector<char>& y,
                        const TrainConfig& cfg, std::uint64_t voter_seed) {
  const RowMatrix x = inputs(Eigen::all, mask);
  const Eigen::Index n = x.rows();
  Rng rng(voter_seed);
  VoterResult out;
  out.net = init_voter<double>(x.cols(), cfg.hidden, rng);
  auto adam = AdamState<double>::for_net(out.net, cfg.learning_rate);
  VoterGradient<double> grad = VoterNet<double>::zeros(x.cols(), cfg.hidden);

  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  RowMatrix batch;
  std::vector<char> batch_y;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(order);
    double loss = 0.0;
    for (Eigen::Index start = 0; start < n; start += cfg.batch_size) {
      const Eigen::Index len = std::min<Eigen::Index>(cfg.batch_size, n - start);
      batch.resize(len, x.cols());
      batch_y.resize(static_cast<std::size_t>(len));
      for (Eigen::Index i = 0; i < len; ++i) {
        const Eigen::Index src = order[static_cast<std::size_t>(start + i)];
        batch.row(i) = x.row(src);
        batch_y[static_cast<std::size_t>(i)] = y[static_cast<std::size_t>(src)];
      }
      loss += batch_gradient(out.net, batch, batch_y, cfg.loss, grad);
      adam_step(adam, out.net, grad);
    }
    out.epoch_loss.push_back(loss / static_cast<double>(n));
  }
  return out;
}

}  // namespace

EnsembleModel train(const Eigen::Ref<const Eigen::MatrixXd>& features, const std::vector<bool>& labels,
                    const TrainConfig& cfg, int threads, TrainLog* log) {
  check_config(cfg);
  if (features.rows() < 2) throw ValidationError("train: need at least 2 training samples");
  if (static_cast<std::size_t>(features.rows()) != labels.size()) {
    throw ValidationError("train: feature/label count mismatch");
  }
  const Eigen::Index dim = features.cols();
  if (cfg.selection.mode != SelectionMode::all && cfg.selection.subset_size > dim) {
    throw ConfigError("subset size " + std::to_string(cfg.selection.subset_size) +
                      " exceeds feature count " + std::to_string(dim));
  }

  EnsembleModel model{fit_norm(features), std::nullopt, {}, {}, json::object()};
  Eigen::MatrixXd inputs = apply_norm(model.norm, features);
  Eigen::VectorXd variances;
  if (cfg.use_pca()) {
    model.pca = pca_fit(inputs);
    inputs = pca_transform(*model.pca, inputs);
    variances = model.pca->variances;
  } else {
    // Without PCA the largest_variance/srs modes rank normalized raw columns.
    const Eigen::RowVectorXd mean = inputs.colwise().mean();
    variances = ((inputs.rowwise() - mean).array().square().colwise().sum() /
                 static_cast<double>(inputs.rows()))
                    .transpose();
  }
  SelectionConfig selection = cfg.selection;
  selection.seed = derive_seed(derive_seed(cfg.seed, kMaskStream), cfg.selection.seed);
  model.masks = build_masks(selection, variances);

  std::vector<char> y(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) y[i] = labels[i] ? 1 : 0;

  const std::size_t m = model.masks.size();
  std::vector<VoterResult> results(m);
  const std::uint64_t voter_base = derive_seed(cfg.seed, kVoterStream);
  parallel_for(m, threads, [&](std::size_t v) {
    results[v] = train_voter(inputs, model.masks[v], y, cfg, derive_seed(voter_base, v));
  });

  model.voters.reserve(m);
  for (auto& r : results) model.voters.push_back(std::move(r.net));
  if (log != nullptr) {
    log->epoch_loss.assign(static_cast<std::size_t>(cfg.epochs), 0.0);
    for (const auto& r : results) {
      for (std::size_t e = 0; e < r.epoch_loss.size(); ++e) log->epoch_loss[e] += r.epoch_loss[e] / static_cast<double>(m);
    }
  }
  model.meta = {{"config", to_json(cfg)},
                {"num_features", dim},
                {"num_train_samples", features.rows()}};
  return model;
}

EnsembleModel train(std::span<const Sample> samples, const TrainConfig& cfg, int threads, TrainLog* log) {
  if (samples.empty()) throw ValidationError("train: empty training set");
  return train(feature_matrix(samples), label_vector(samples), cfg, threads, log);
}

Eigen::MatrixXd transformed_features(const EnsembleModel& model,
                                     const Eigen::Ref<const Eigen::MatrixXd>& raw) {
  Eigen::MatrixXd x = apply_norm(model.norm, raw);
  if (model.pca) x = pca_transform(*model.pca, x);
  return x;
}

Eigen::MatrixXd voter_outputs(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& raw,
                              int threads) {
  const Eigen::MatrixXd x = transformed_features(model, raw);
  Eigen::MatrixXd out(x.rows(), static_cast<Eigen::Index>(model.voters.size()));
  parallel_for(model.voters.size(), threads, [&](std::size_t v) {
    const Eigen::MatrixXd xv = x(Eigen::all, model.masks[v]);
    out.col(static_cast<Eigen::Index>(v)) = forward_batch(model.voters[v], xv);
  });
  return out;
}

Eigen::VectorXd predict(const EnsembleModel& model, const Eigen::Ref<const Eigen::MatrixXd>& raw, int threads) {
  const Eigen::MatrixXd p = voter_outputs(model, raw, threads);
  // Summed in voter order so the result does not depend on thread count.
  Eigen::VectorXd score = Eigen::VectorXd::Zero(p.rows());
  for (Eigen::Index v = 0; v < p.cols(); ++v) score += p.col(v);
  return score;
}

Eigen::VectorXd predict(const EnsembleModel& model, std::span<const Sample> samples, int threads) {
  if (samples.empty()) return {};
  return predict(model, feature_matrix(samples), threads);
}

std::vector<bool> classify(std::span<const double> scores, double threshold) {
  std::vector<bool> out(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i) out[i] = scores[i] > threshold;
  return out;
}

namespace {

json vector_to(const Eigen::VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

json matrix_to(const Eigen::MatrixXd& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    std::vector<double> row(static_cast<std::size_t>(m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c) row[static_cast<std::size_t>(c)] = m(r, c);
    rows.push_back(std::move(row));
  }
  return rows;
}

Eigen::VectorXd vector_from(const json& j, const std::string& path) {
  using namespace json_util;
  array(j, path);
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = as_double(j[i], join(path, i));
  return v;
}

Eigen::MatrixXd matrix_from(const json& j, const std::string& path) {
  using namespace json_util;
  array(j, path);
  if (j.empty()) return {};
  const std::size_t cols = array(j[0], join(path, 0)).size();
  Eigen::MatrixXd m(static_cast<Eigen::Index>(j.size()), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < j.size(); ++r) {
    const std::string p = join(path, r);
    const json& row = array(j[r], p);
    if (row.size() != cols) throw ValidationError(p + ": ragged matrix row");
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = as_double(row[c], join(p, c));
    }
  }
  return m;
}

}  // namespace

void validate_model(const EnsembleModel& model) {
  const Eigen::Index dim = model.norm.dim();
  if (dim < 1) throw ValidationError("model: empty feature dimension");
  if (model.masks.empty() || model.masks.size() != model.voters.size()) {
    throw ValidationError("model: masks and voters must be non-empty and equally many");
  }
  if (model.pca) {
    const auto& p = *model.pca;
    if (p.components.rows() != dim || p.components.cols() != dim || p.variances.size() != dim) {
      throw ValidationError("model: PCA shape does not match feature dimension");
    }
    if (!p.components.allFinite() || !p.variances.allFinite()) throw ValidationError("model: non-finite PCA");
  }
  for (std::size_t v = 0; v < model.masks.size(); ++v) {
    const std::string name = "model: voter " + std::to_string(v);
    const SubsetMask& mask = model.masks[v];
    if (mask.empty()) throw ValidationError(name + " has an empty mask");
    for (std::size_t k = 0; k < mask.size(); ++k) {
      if (mask[k] < 0 || mask[k] >= dim) throw ValidationError(name + " mask index out of range");
      if (k > 0 && mask[k] <= mask[k - 1]) throw ValidationError(name + " mask not strictly ascending");
    }
    const VoterNet<double>& net = model.voters[v];
    if (net.w1.cols() != static_cast<Eigen::Index>(mask.size()) || net.w1.rows() < 1 ||
        net.b1.size() != net.w1.rows() || net.w2.size() != net.w1.rows()) {
      throw ValidationError(name + " weight shapes do not match its mask");
    }
    if (!net.w1.allFinite() || !net.b1.allFinite() || !net.w2.allFinite() || !std::isfinite(net.b2)) {
      throw ValidationError(name + " has non-finite weights");
    }
  }
}

std::string save_model(const EnsembleModel& model) {
  json root;
  root["version"] = kModelFormatVersion;
  root["kind"] = "nn_ensemble";
  root["norm"] = {{"mean", vector_to(model.norm.mean())}, {"std", vector_to(model.norm.stddev())}};
  if (model.pca) {
    root["pca"] = {{"components", matrix_to(model.pca->components)},
                   {"variances", vector_to(model.pca->variances)}};
  } else {
    root["pca"] = nullptr;
  }
  root["masks"] = model.masks;
  json voters = json::array();
  for (const auto& net : model.voters) {
    voters.push_back({{"W1", matrix_to(net.w1)}, {"b1", vector_to(net.b1)}, {"w2", vector_to(net.w2)}, {"b2", net.b2}});
  }
  root["voters"] = std::move(voters);
  root["meta"] = model.meta;
  return root.dump() + "\n";
}

EnsembleModel load_model(std::string_view document) {
  using namespace json_util;
  const json root = json_util::parse(document);
  object(root, "");
  const auto version = get_int(root, "version", "");
  if (version != kModelFormatVersion) {
    throw ValidationError("model: unsupported version " + std::to_string(version));
  }
  if (auto* kind = optional_field(root, "kind"); kind && as_string(*kind, "kind") != "nn_ensemble") {
    throw ValidationError("model: not an ensemble model");
  }
  const json& norm = field(root, "norm", "");
  EnsembleModel model{NormStats::restore(vector_from(field(norm, "mean", "norm"), "norm.mean"),
                                         vector_from(field(norm, "std", "norm"), "norm.std")),
                      std::nullopt,
                      {},
                      {},
                      json::object()};
  const json& pca = field(root, "pca", "");
  if (!pca.is_null()) {
    model.pca = PcaModel<double>{matrix_from(field(pca, "components", "pca"), "pca.components"),
                                 vector_from(field(pca, "variances", "pca"), "pca.variances")};
  }
  const json& masks = array(field(root, "masks", ""), "masks");
  for (std::size_t v = 0; v < masks.size(); ++v) {
    const std::string p = join("masks", v);
    const json& mask = array(masks[v], p);
    SubsetMask m;
    for (std::size_t k = 0; k < mask.size(); ++k) m.push_back(static_cast<int>(as_int(mask[k], join(p, k))));
    model.masks.push_back(std::move(m));
  }
  const json& voters = array(field(root, "voters", ""), "voters");
  for (std::size_t v = 0; v < voters.size(); ++v) {
    const std::string p = join("voters", v);
    VoterNet<double> net;
    net.w1 = matrix_from(field(voters[v], "W1", p), join(p, "W1"));
    net.b1 = vector_from(field(voters[v], "b1", p), join(p, "b1"));
    net.w2 = vector_from(field(voters[v], "w2", p), join(p, "w2"));
    net.b2 = get_double(voters[v], "b2", p);
    model.voters.push_back(std::move(net));
  }
  if (auto* meta = optional_field(root, "meta")) model.meta = *meta;
  validate_model(model);
  return model;
}

}  // namespace drcnn
