#include "ifm/config.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ifm {

using nlohmann::json;

namespace {

void check_keys(const json& obj, const std::set<std::string>& allowed,
                const std::string& section) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key()))
      throw std::invalid_argument("config: unknown key '" + it.key() +
                                  "' in section '" + section + "'");
}

template <typename T>
void get_to(const json& obj, const char* key, T& out) {
  if (obj.contains(key)) obj.at(key).get_to(out);
}

Objective objective_from(const std::string& s) {
  if (s == "infonce") return Objective::infonce;
  if (s == "ifm") return Objective::ifm;
  if (s == "combined") return Objective::combined;
  throw std::invalid_argument("config: objective must be one of "
                              "infonce|ifm|combined, got '" + s + "'");
}

LossVariant variant_from(const std::string& s) {
  if (s == "standard") return LossVariant::standard;
  if (s == "post_norm") return LossVariant::post_norm;
  if (s == "pre_norm") return LossVariant::pre_norm;
  throw std::invalid_argument("config: loss.variant must be one of "
                              "standard|post_norm|pre_norm, got '" + s + "'");
}

void parse_data(const json& obj, SyntheticDatasetSpec& spec) {
  check_keys(obj,
             {"preset", "n_features", "cardinalities", "saliences", "code_dim",
              "nuisance_dim", "identity_aug_prob", "jitter_sigma", "seed"},
             "data");
  if (obj.contains("preset")) {
    const std::string preset = obj.at("preset").get<std::string>();
    if (preset == "trifeature")
      spec = SyntheticDatasetSpec::trifeature();
    else if (preset == "two_feature_skew")
      spec = SyntheticDatasetSpec::two_feature_skew();
    else
      throw std::invalid_argument("config: data.preset must be "
                                  "trifeature|two_feature_skew, got '" +
                                  preset + "'");
  }
  get_to(obj, "n_features", spec.n_features);
  get_to(obj, "cardinalities", spec.cardinalities);
  get_to(obj, "saliences", spec.saliences);
  get_to(obj, "code_dim", spec.code_dim);
  get_to(obj, "nuisance_dim", spec.nuisance_dim);
  get_to(obj, "identity_aug_prob", spec.identity_aug_prob);
  get_to(obj, "jitter_sigma", spec.jitter_sigma);
  get_to(obj, "seed", spec.seed);
}

void parse_loss(const json& obj, LossConfig& loss) {
  check_keys(obj, {"tau", "eps", "eps_pos", "eps_neg", "alpha", "beta", "variant"},
             "loss");
  if (obj.contains("eps") && (obj.contains("eps_pos") || obj.contains("eps_neg")))
    throw std::invalid_argument(
        "config: loss.eps conflicts with loss.eps_pos/eps_neg");
  if (obj.contains("eps")) {
    const double eps = obj.at("eps").get<double>();
    loss.eps_pos = eps;
    loss.eps_neg = {eps};
  }
  get_to(obj, "tau", loss.tau);
  get_to(obj, "eps_pos", loss.eps_pos);
  if (obj.contains("eps_neg")) {
    const json& en = obj.at("eps_neg");
    if (en.is_number())
      loss.eps_neg = {en.get<double>()};
    else
      en.get_to(loss.eps_neg);
  }
  get_to(obj, "alpha", loss.alpha);
  get_to(obj, "beta", loss.beta);
  if (obj.contains("variant"))
    loss.variant = variant_from(obj.at("variant").get<std::string>());
}

}  // namespace

const char* objective_name(Objective o) {
  switch (o) {
    case Objective::infonce: return "infonce";
    case Objective::ifm: return "ifm";
    case Objective::combined: return "combined";
  }
  return "combined";
}

const char* variant_name(LossVariant v) {
  switch (v) {
    case LossVariant::standard: return "standard";
    case LossVariant::post_norm: return "post_norm";
    case LossVariant::pre_norm: return "pre_norm";
  }
  return "standard";
}

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw std::invalid_argument(std::string("config: malformed JSON: ") + e.what());
  }
  if (!root.is_object())
    throw std::invalid_argument("config: top level must be an object");
  check_keys(root,
             {"version", "seed", "out_dir", "data", "encoder", "loss",
              "objective", "optimizer", "train", "eval", "sweep", "gen_data",
              "retrieve", "robust_split", "probe", "report"},
             "(top level)");

  RunConfig cfg;
  get_to(root, "version", cfg.version);
  if (cfg.version != 1)
    throw std::invalid_argument("config: unsupported version " +
                                std::to_string(cfg.version));
  get_to(root, "seed", cfg.seed);
  get_to(root, "out_dir", cfg.out_dir);

  if (root.contains("data")) parse_data(root.at("data"), cfg.data);

  if (root.contains("encoder")) {
    const json& obj = root.at("encoder");
    check_keys(obj, {"hidden", "embed_dim"}, "encoder");
    get_to(obj, "hidden", cfg.train.hidden_dims);
    get_to(obj, "embed_dim", cfg.train.embed_dim);
  }
  if (root.contains("loss")) parse_loss(root.at("loss"), cfg.train.loss);
  if (root.contains("objective"))
    cfg.train.objective = objective_from(root.at("objective").get<std::string>());
  if (root.contains("optimizer")) {
    const json& obj = root.at("optimizer");
    check_keys(obj, {"lr", "beta1", "beta2", "eps_hat", "weight_decay"},
               "optimizer");
    get_to(obj, "lr", cfg.train.adam.lr);
    get_to(obj, "beta1", cfg.train.adam.beta1);
    get_to(obj, "beta2", cfg.train.adam.beta2);
    get_to(obj, "eps_hat", cfg.train.adam.eps_hat);
    get_to(obj, "weight_decay", cfg.train.adam.weight_decay);
  }
  if (root.contains("train")) {
    const json& obj = root.at("train");
    check_keys(obj, {"steps", "negatives", "pairs_per_step", "held_features"},
               "train");
    get_to(obj, "steps", cfg.train.steps);
    get_to(obj, "negatives", cfg.train.negatives);
    get_to(obj, "pairs_per_step", cfg.train.pairs_per_step);
    get_to(obj, "held_features", cfg.train.held_features);
  }
  if (root.contains("eval")) {
    const json& obj = root.at("eval");
    check_keys(obj,
               {"probe_samples", "probe_iters", "probe_l2", "probe_lr",
                "eval_batches", "eval_negatives", "tau_eval", "augment"},
               "eval");
    get_to(obj, "probe_samples", cfg.eval.n_samples);
    get_to(obj, "probe_iters", cfg.eval.probe.iters);
    get_to(obj, "probe_l2", cfg.eval.probe.l2);
    get_to(obj, "probe_lr", cfg.eval.probe.lr);
    get_to(obj, "eval_batches", cfg.eval.eval_batches);
    get_to(obj, "eval_negatives", cfg.eval.eval_negatives);
    get_to(obj, "tau_eval", cfg.eval.tau_eval);
    get_to(obj, "augment", cfg.eval.augment);
  }
  if (root.contains("sweep")) {
    const json& obj = root.at("sweep");
    check_keys(obj, {"tau", "beta", "eps", "alpha", "seeds"}, "sweep");
    get_to(obj, "tau", cfg.sweep.tau);
    get_to(obj, "beta", cfg.sweep.beta);
    get_to(obj, "eps", cfg.sweep.eps);
    get_to(obj, "alpha", cfg.sweep.alpha);
    get_to(obj, "seeds", cfg.sweep.seeds);
  }
  if (root.contains("gen_data")) {
    const json& obj = root.at("gen_data");
    check_keys(obj, {"n_samples", "augment"}, "gen_data");
    get_to(obj, "n_samples", cfg.gen_data.n_samples);
    get_to(obj, "augment", cfg.gen_data.augment);
  }
  if (root.contains("retrieve")) {
    const json& obj = root.at("retrieve");
    check_keys(obj,
               {"bank_samples", "query_index", "anchor_index", "eps", "k",
                "checkpoint"},
               "retrieve");
    get_to(obj, "bank_samples", cfg.retrieve.bank_samples);
    get_to(obj, "query_index", cfg.retrieve.query_index);
    get_to(obj, "anchor_index", cfg.retrieve.anchor_index);
    get_to(obj, "eps", cfg.retrieve.eps);
    get_to(obj, "k", cfg.retrieve.k);
    get_to(obj, "checkpoint", cfg.retrieve.checkpoint);
  }
  if (root.contains("robust_split")) {
    const json& obj = root.at("robust_split");
    check_keys(obj, {"feature", "eps_step", "max_steps", "n_samples", "checkpoint"},
               "robust_split");
    get_to(obj, "feature", cfg.robust_split.feature);
    get_to(obj, "eps_step", cfg.robust_split.eps_step);
    get_to(obj, "max_steps", cfg.robust_split.max_steps);
    get_to(obj, "n_samples", cfg.robust_split.n_samples);
    get_to(obj, "checkpoint", cfg.robust_split.checkpoint);
  }
  if (root.contains("probe")) {
    const json& obj = root.at("probe");
    check_keys(obj, {"checkpoint"}, "probe");
    get_to(obj, "checkpoint", cfg.probe.checkpoint);
  }
  if (root.contains("report")) {
    const json& obj = root.at("report");
    check_keys(obj, {"metrics"}, "report");
    get_to(obj, "metrics", cfg.report.metrics);
  }

  cfg.validate();
  return cfg;
}

void RunConfig::validate() const {
  data.validate();
  train.loss.validate(train.negatives);
  if (train.steps < 1)
    throw std::invalid_argument("config: train.steps must be >= 1");
  if (train.negatives < 1)
    throw std::invalid_argument("config: train.negatives must be >= 1");
  if (train.pairs_per_step < 1)
    throw std::invalid_argument("config: train.pairs_per_step must be >= 1");
  if (train.embed_dim < 2)
    throw std::invalid_argument("config: encoder.embed_dim must be >= 2");
  for (int h : train.hidden_dims)
    if (h < 1) throw std::invalid_argument("config: encoder.hidden must be positive");
  for (int j : train.held_features)
    if (j < 0 || j >= data.n_features)
      throw std::invalid_argument("config: train.held_features out of range");
  if (eval.n_samples < 10)
    throw std::invalid_argument("config: eval.probe_samples too small");
  if (!(eval.tau_eval > 0.0))
    throw std::invalid_argument("config: eval.tau_eval must be > 0");
  if (sweep.tau.empty() || sweep.beta.empty() || sweep.eps.empty() ||
      sweep.alpha.empty() || sweep.seeds.empty())
    throw std::invalid_argument("config: sweep grids must be nonempty");
  if (out_dir.empty())
    throw std::invalid_argument("config: out_dir must be nonempty");
  if (gen_data.n_samples < 1)
    throw std::invalid_argument("config: gen_data.n_samples must be >= 1");
  if (retrieve.k < 1)
    throw std::invalid_argument("config: retrieve.k must be >= 1");
  if (retrieve.bank_samples < 2)
    throw std::invalid_argument("config: retrieve.bank_samples must be >= 2");
  if (robust_split.feature < 0 || robust_split.feature >= data.n_features)
    throw std::invalid_argument("config: robust_split.feature out of range");
  if (!(robust_split.eps_step > 0.0))
    throw std::invalid_argument("config: robust_split.eps_step must be > 0");
  if (robust_split.max_steps < 1)
    throw std::invalid_argument("config: robust_split.max_steps must be >= 1");
  if (robust_split.n_samples < 10)
    throw std::invalid_argument("config: robust_split.n_samples too small");
}

std::string serialize_config(const RunConfig& cfg) {
  json root;
  root["version"] = cfg.version;
  root["seed"] = cfg.seed;
  root["out_dir"] = cfg.out_dir;
  root["data"] = {{"n_features", cfg.data.n_features},
                  {"cardinalities", cfg.data.cardinalities},
                  {"saliences", cfg.data.saliences},
                  {"code_dim", cfg.data.code_dim},
                  {"nuisance_dim", cfg.data.nuisance_dim},
                  {"identity_aug_prob", cfg.data.identity_aug_prob},
                  {"jitter_sigma", cfg.data.jitter_sigma},
                  {"seed", cfg.data.seed}};
  root["encoder"] = {{"hidden", cfg.train.hidden_dims},
                     {"embed_dim", cfg.train.embed_dim}};
  root["loss"] = {{"tau", cfg.train.loss.tau},
                  {"eps_pos", cfg.train.loss.eps_pos},
                  {"eps_neg", cfg.train.loss.eps_neg},
                  {"alpha", cfg.train.loss.alpha},
                  {"beta", cfg.train.loss.beta},
                  {"variant", variant_name(cfg.train.loss.variant)}};
  root["objective"] = objective_name(cfg.train.objective);
  root["optimizer"] = {{"lr", cfg.train.adam.lr},
                       {"beta1", cfg.train.adam.beta1},
                       {"beta2", cfg.train.adam.beta2},
                       {"eps_hat", cfg.train.adam.eps_hat},
                       {"weight_decay", cfg.train.adam.weight_decay}};
  root["train"] = {{"steps", cfg.train.steps},
                   {"negatives", cfg.train.negatives},
                   {"pairs_per_step", cfg.train.pairs_per_step},
                   {"held_features", cfg.train.held_features}};
  root["eval"] = {{"probe_samples", cfg.eval.n_samples},
                  {"probe_iters", cfg.eval.probe.iters},
                  {"probe_l2", cfg.eval.probe.l2},
                  {"probe_lr", cfg.eval.probe.lr},
                  {"eval_batches", cfg.eval.eval_batches},
                  {"eval_negatives", cfg.eval.eval_negatives},
                  {"tau_eval", cfg.eval.tau_eval},
                  {"augment", cfg.eval.augment}};
  root["sweep"] = {{"tau", cfg.sweep.tau},
                   {"beta", cfg.sweep.beta},
                   {"eps", cfg.sweep.eps},
                   {"alpha", cfg.sweep.alpha},
                   {"seeds", cfg.sweep.seeds}};
  root["gen_data"] = {{"n_samples", cfg.gen_data.n_samples},
                      {"augment", cfg.gen_data.augment}};
  root["retrieve"] = {{"bank_samples", cfg.retrieve.bank_samples},
                      {"query_index", cfg.retrieve.query_index},
                      {"anchor_index", cfg.retrieve.anchor_index},
                      {"eps", cfg.retrieve.eps},
                      {"k", cfg.retrieve.k},
                      {"checkpoint", cfg.retrieve.checkpoint}};
  root["robust_split"] = {{"feature", cfg.robust_split.feature},
                          {"eps_step", cfg.robust_split.eps_step},
                          {"max_steps", cfg.robust_split.max_steps},
                          {"n_samples", cfg.robust_split.n_samples},
                          {"checkpoint", cfg.robust_split.checkpoint}};
  root["probe"] = {{"checkpoint", cfg.probe.checkpoint}};
  root["report"] = {{"metrics", cfg.report.metrics}};
  return root.dump(2) + "\n";
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

}  // namespace ifm
