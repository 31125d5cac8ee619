#include "ifm/cli.hpp"

#include "ifm/fdiff.hpp"
#include "ifm/latent_analysis.hpp"
#include "ifm/theorycheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace ifm::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double x, const char* spec = "%.17g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, x);
  return buf;
}

std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t tag) {
  std::uint64_t x = seed ^ (tag * 0x9e3779b97f4a7c15ULL);
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

constexpr std::uint64_t kEvalTag = 0xEu;
constexpr std::uint64_t kBankTag = 0xBu;
constexpr std::uint64_t kSplitTag = 0x5u;

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  out << content;
  if (!out) throw std::runtime_error("write failed: " + path);
}

std::string metrics_row(const std::string& id, const RunConfig& cfg,
                        const ProbeResult& probe) {
  std::ostringstream row;
  row << id << ',' << fmt(cfg.train.loss.tau) << ',' << fmt(cfg.train.loss.beta)
      << ',' << fmt(cfg.train.loss.eps_pos) << ',' << fmt(cfg.train.loss.alpha)
      << ',' << cfg.seed;
  for (double acc : probe.accuracy) row << ',' << fmt(acc);
  row << ',' << fmt(probe.eval_loss);
  return row.str();
}

std::string default_checkpoint(const RunConfig& cfg) {
  return cfg.out_dir + "/" + run_id(cfg) + ".ckpt";
}

Encoder load_run_encoder(const RunConfig& cfg, const std::string& explicit_path) {
  const std::string path =
      explicit_path.empty() ? default_checkpoint(cfg) : explicit_path;
  return load_checkpoint_file(path);
}

}  // namespace

std::string run_id(const RunConfig& cfg) {
  std::ostringstream id;
  id << objective_name(cfg.train.objective) << "_t"
     << fmt(cfg.train.loss.tau, "%g") << "_b" << fmt(cfg.train.loss.beta, "%g")
     << "_e" << fmt(cfg.train.loss.eps_pos, "%g") << "_a"
     << fmt(cfg.train.loss.alpha, "%g") << "_s" << cfg.seed;
  return id.str();
}

std::string metrics_header(int n_features) {
  std::ostringstream h;
  h << "run_id,tau,beta,eps,alpha,seed";
  for (int j = 0; j < n_features; ++j) h << ",acc_f" << j;
  h << ",eval_loss";
  return h.str();
}

TrainOutput cmd_train(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);

  TrainOptions opts = cfg.train;
  opts.seed = cfg.seed;
  const TrainResult trained = train_encoder(cfg.data, opts);

  const Codebooks codes = make_codes(cfg.data);
  SeededRng eval_rng(mix_seed(cfg.seed, kEvalTag));
  const ProbeResult probe =
      readout(trained.encoder, cfg.data, codes, eval_rng, cfg.eval);

  TrainOutput out;
  out.run_id = run_id(cfg);
  out.metrics_row = metrics_row(out.run_id, cfg, probe);
  out.checkpoint_path = cfg.out_dir + "/" + out.run_id + ".ckpt";
  out.metrics_path = cfg.out_dir + "/" + out.run_id + ".metrics.csv";

  save_checkpoint_file(trained.encoder, out.checkpoint_path);
  write_file(out.metrics_path, metrics_header(cfg.data.n_features) + "\n" +
                                   out.metrics_row + "\n");
  return out;
}

std::string cmd_gen_data(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const Codebooks codes = make_codes(cfg.data);
  SeededRng rng(cfg.seed);
  const ProbeDataset ds = probe_dataset(cfg.data, codes, cfg.gen_data.n_samples,
                                        rng, cfg.gen_data.augment);
  const std::string path = cfg.out_dir + "/dataset.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_dataset(out, cfg.data, ds.inputs, ds.latents);
  return path;
}

std::string cmd_probe(const RunConfig& cfg) {
  cfg.validate();
  const Encoder enc = load_run_encoder(cfg, cfg.probe.checkpoint);
  const Codebooks codes = make_codes(cfg.data);
  SeededRng eval_rng(mix_seed(cfg.seed, kEvalTag));
  const ProbeResult probe = readout(enc, cfg.data, codes, eval_rng, cfg.eval);
  return metrics_header(cfg.data.n_features) + "\n" +
         metrics_row(run_id(cfg), cfg, probe) + "\n";
}

std::vector<std::string> cmd_sweep(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const std::string path = cfg.out_dir + "/sweep.csv";
  const std::string header = metrics_header(cfg.data.n_features);

  std::map<std::string, std::string> done;  // run_id -> row
  if (fs::exists(path)) {
    std::ifstream in(path);
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (first) {
        first = false;
        if (line != header)
          throw std::runtime_error("sweep: existing " + path +
                                   " has a different header; refusing to mix");
        continue;
      }
      if (line.empty()) continue;
      done[line.substr(0, line.find(','))] = line;
    }
  }

  std::vector<std::string> rows;
  for (double tau : cfg.sweep.tau)
    for (double beta : cfg.sweep.beta)
      for (double eps : cfg.sweep.eps)
        for (double alpha : cfg.sweep.alpha)
          for (std::uint64_t seed : cfg.sweep.seeds) {
            RunConfig r = cfg;
            r.train.loss.tau = tau;
            r.train.loss.beta = beta;
            r.train.loss.eps_pos = eps;
            r.train.loss.eps_neg = {eps};
            r.train.loss.alpha = alpha;
            r.seed = seed;
            const std::string id = run_id(r);
            auto it = done.find(id);
            if (it != done.end()) {
              log << "skip " << id << " (already present)\n";
              rows.push_back(it->second);
              continue;
            }
            log << "run  " << id << "\n";
            const TrainOutput out = cmd_train(r);
            rows.push_back(out.metrics_row);
            done[id] = out.metrics_row;
          }

  std::ostringstream content;
  content << header << "\n";
  for (const auto& row : rows) content << row << "\n";
  write_file(path, content.str());
  return rows;
}

namespace {

EmbeddingBatch random_unit_batch(int d, int m, SeededRng& rng) {
  EmbeddingBatch b;
  b.anchor = sphere_vector(d, rng);
  b.positive = sphere_vector(d, rng);
  for (int i = 0; i < m; ++i) b.negatives.push_back(sphere_vector(d, rng));
  return b;
}

struct VerifyContext {
  std::ostream& out;
  int failures = 0;

  void check(bool ok, const std::string& name, const std::string& detail = "") {
    if (ok)
      out << "ok   " << name << "\n";
    else {
      out << "FAIL " << name << (detail.empty() ? "" : " (" + detail + ")")
          << "\n";
      ++failures;
    }
  }
};

double loss_grad_max_rel_err(SeededRng& rng, int batches) {
  double worst = 0.0;
  for (int t = 0; t < batches; ++t) {
    const int d = 2 + static_cast<int>(rng.bounded(15));
    const int m = 1 + static_cast<int>(rng.bounded(8));
    EmbeddingBatch b = random_unit_batch(d, m, rng);
    LossConfig cfg = LossConfig::with_eps(0.2 + rng.uniform(), rng.uniform(0.0, 0.3));
    cfg.alpha = rng.uniform(0.0, 2.0);

    const LossGrad g = combined_grads(b, cfg);
    EmbeddingBatch probe = b;
    probe.unit_norm = false;  // finite differences step off the sphere
    auto objective = [&]() { return combined_objective(probe, cfg); };

    auto fd_against = [&](Vector& target, const Vector& analytic) {
      const Vector fd_grad = fd::gradient(objective, target);
      worst = std::max(worst, fd::rel_err(analytic, fd_grad));
    };
    fd_against(probe.anchor, g.d_anchor);
    fd_against(probe.positive, g.d_positive);
    for (int i = 0; i < m; ++i) fd_against(probe.negatives[i], g.d_negatives[i]);
  }
  return worst;
}

}  // namespace

int cmd_verify(std::ostream& out) {
  VerifyContext ctx{out};
  SeededRng rng(20240901);

  // Loss-level gradients against central finite differences.
  {
    const double worst = loss_grad_max_rel_err(rng, 30);
    ctx.check(worst < 1e-6, "loss gradients vs finite differences",
              "max rel err " + fmt(worst, "%.3g"));
  }

  // Encoder backprop against finite differences.
  {
    double worst = 0.0;
    for (int t = 0; t < 3; ++t) {
      SeededRng net_rng(100 + t);
      Encoder enc = Encoder::make_mlp({6, 10, 5}, net_rng);
      Vector x = gaussian_vector(6, net_rng);
      const Vector target = sphere_vector(5, net_rng);
      const ForwardTape tape = forward(enc, x);
      const Vector d_emb = tape.embedding - target;
      const ParamGrads g = backward(enc, tape, d_emb);
      const Vector fd_grad = fd::gradient(
          [&]() {
            const Vector e = forward(enc, x).embedding;
            return 0.5 * (e - target).squaredNorm();
          },
          x, 1e-6);
      worst = std::max(worst, fd::rel_err(g.d_input, fd_grad));
    }
    ctx.check(worst < 1e-5, "encoder backprop vs finite differences",
              "max rel err " + fmt(worst, "%.3g"));
  }

  // Closed form equals the eps-ball search.
  {
    double worst_gap = 0.0, worst_excess = 0.0;
    for (int t = 0; t < 10; ++t) {
      EmbeddingBatch b = random_unit_batch(8, 4, rng);
      const LossConfig cfg = LossConfig::with_eps(0.5, 0.1);
      const double closed = ifm_pointwise(b, cfg);
      OracleOptions opts;
      opts.seed = 7000 + t;
      const double searched = eps_ball_oracle(b, cfg, opts);
      worst_gap = std::max(worst_gap, closed - searched);
      worst_excess = std::max(worst_excess, searched - closed);
    }
    ctx.check(worst_gap <= 1e-4 && worst_excess <= 1e-9,
              "eps-ball search reaches the closed form",
              "gap " + fmt(worst_gap, "%.3g") + ", excess " +
                  fmt(worst_excess, "%.3g"));
  }

  // Strict monotonicity in every epsilon component.
  {
    bool ok = true;
    for (int t = 0; t < 100 && ok; ++t) {
      EmbeddingBatch b = random_unit_batch(6, 3, rng);
      const double tau = 0.3 + rng.uniform();
      const double e1 = rng.uniform(0.0, 0.3);
      const double e2 = e1 + rng.uniform(0.0, 0.3) + 1e-6;
      LossConfig lo = LossConfig::with_eps(tau, e1);
      LossConfig hi_pos = lo, hi_neg = lo;
      hi_pos.eps_pos = e2;
      hi_neg.eps_neg = {e2};
      ok = ifm_pointwise(b, hi_pos) > ifm_pointwise(b, lo) &&
           ifm_pointwise(b, hi_neg) > ifm_pointwise(b, lo);
    }
    ctx.check(ok, "ifm loss strictly increasing in eps");
  }

  // Positive-pair perturbation side symmetry.
  {
    double worst = 0.0;
    for (int t = 0; t < 100; ++t) {
      EmbeddingBatch b = random_unit_batch(8, 4, rng);
      const LossConfig cfg = LossConfig::with_eps(0.5, rng.uniform(0.0, 0.5));
      worst = std::max(worst, std::abs(ifm_pointwise(b, cfg) -
                                       ifm_pointwise_anchor_side(b, cfg)));
    }
    ctx.check(worst <= 1e-12, "perturbation side symmetry",
              "max |diff| " + fmt(worst, "%.3g"));
  }

  // eps = 0 reductions and beta = 0 equivalence. The closed-form and
  // reweighted paths are bit-exact; post-norm re-normalizes and picks up ulps.
  {
    double worst = 0.0, worst_postnorm = 0.0;
    for (int t = 0; t < 50; ++t) {
      EmbeddingBatch b = random_unit_batch(5, 3, rng);
      const LossConfig cfg = LossConfig::with_eps(0.7, 0.0);
      const double base = infonce_pointwise(b, cfg.tau);
      worst = std::max(worst, std::abs(ifm_pointwise(b, cfg) - base));
      worst = std::max(worst,
                       std::abs(hardness_weighted_pointwise(b, cfg.tau, 0.0) - base));
      worst_postnorm =
          std::max(worst_postnorm, std::abs(ifm_postnorm_pointwise(b, cfg) - base));
    }
    ctx.check(worst == 0.0 && worst_postnorm <= 1e-12,
              "eps=0 and beta=0 reduce to InfoNCE",
              "closed-form |diff| " + fmt(worst, "%.3g") + ", post-norm |diff| " +
                  fmt(worst_postnorm, "%.3g"));
  }

  // Hardness weighting nondecreasing in beta.
  {
    bool ok = true;
    for (int t = 0; t < 20 && ok; ++t) {
      EmbeddingBatch b = random_unit_batch(6, 4, rng);
      double prev = hardness_weighted_pointwise(b, 0.5, 0.0);
      for (double beta = 0.5; beta <= 5.0; beta += 0.5) {
        const double cur = hardness_weighted_pointwise(b, 0.5, beta);
        if (cur < prev - 1e-12) ok = false;
        prev = cur;
      }
    }
    ctx.check(ok, "hardness-weighted loss nondecreasing in beta");
  }

  // Pre-normalization identities.
  {
    double worst_norm = 0.0, worst_orth = 0.0;
    for (int t = 0; t < 50; ++t) {
      const Vector v = sphere_vector(6, rng);
      const Vector u = sphere_vector(6, rng);
      const Vector g = cosine_similarity_grad(v, u);
      const double sim = cosine_similarity(v, u);
      worst_norm = std::max(
          worst_norm, std::abs(norm(g) - std::sqrt(1.0 - sim * sim)));
      worst_orth = std::max(worst_orth, std::abs(dot(v, g)));
    }
    bool monotone = true;
    for (int t = 0; t < 20 && monotone; ++t) {
      EmbeddingBatch b = random_unit_batch(8, 4, rng);
      const LossConfig cfg = LossConfig::with_eps(0.5, 0.1);
      const double before = prenorm_pointwise(b, cfg.tau);
      const double one = prenorm_pointwise(prenorm_ascent(b, cfg, 1), cfg.tau);
      const double fifty = prenorm_pointwise(prenorm_ascent(b, cfg, 50), cfg.tau);
      monotone = one >= before - 1e-12 && fifty >= one - 1e-9;
    }
    ctx.check(worst_norm <= 1e-8 && worst_orth <= 1e-10 && monotone,
              "pre-normalization gradient identities",
              "norm err " + fmt(worst_norm, "%.3g") + ", orth err " +
                  fmt(worst_orth, "%.3g"));
  }

  // Limiting-loss anchors and the circle demonstration.
  {
    CircleOptimumOptions opts;
    opts.n_mc = 20000;
    SeededRng prng(424242);
    const CircleOptimumReport report = circle_optimum_check(opts, prng);
    ctx.check(report.collapse_matches, "collapse encoder uniformity = 1/tau",
              "got " + fmt(report.collapse_unif, "%.8g"));
    ctx.check(report.anchors_hold, "uniform-circle total = log I0(1/tau)",
              "supp " + fmt(report.supp.total(), "%.6g") + ", disc " +
                  fmt(report.disc.total(), "%.6g") + ", analytic " +
                  fmt(report.analytic_total, "%.6g"));
    ctx.check(report.losses_indistinguishable,
              "suppressing and distinguishing encoders tie at the optimum");
    ctx.check(report.probes_separated,
              "probe separates the two encoders on the target feature",
              "disc " + fmt(report.probe_acc_disc, "%.3g") + ", supp " +
                  fmt(report.probe_acc_supp, "%.3g"));
  }

  out << (ctx.failures == 0 ? "verify: all checks passed\n"
                            : "verify: FAILURES present\n");
  return ctx.failures == 0 ? 0 : 1;
}

std::string cmd_report(const RunConfig& cfg) {
  const std::string path =
      cfg.report.metrics.empty() ? cfg.out_dir + "/sweep.csv" : cfg.report.metrics;
  std::ifstream in(path);
  if (!in) throw std::runtime_error("report: cannot open " + path);

  std::string header;
  if (!std::getline(in, header))
    throw std::runtime_error("report: empty metrics file " + path);

  int n_features = 0;
  {
    std::stringstream hs(header);
    std::string col;
    while (std::getline(hs, col, ','))
      if (col.rfind("acc_f", 0) == 0) ++n_features;
  }
  if (n_features == 0)
    throw std::runtime_error("report: no acc_f columns in " + path);

  struct Row {
    std::string id;
    double tau, beta, eps, alpha;
    std::uint64_t seed;
    std::vector<double> acc;
    double loss;
  };
  std::vector<Row> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ls(line);
    std::string cell;
    Row r;
    std::getline(ls, r.id, ',');
    auto next_double = [&]() {
      if (!std::getline(ls, cell, ','))
        throw std::runtime_error("report: malformed row in " + path);
      return std::stod(cell);
    };
    r.tau = next_double();
    r.beta = next_double();
    r.eps = next_double();
    r.alpha = next_double();
    r.seed = static_cast<std::uint64_t>(next_double());
    for (int j = 0; j < n_features; ++j) r.acc.push_back(next_double());
    r.loss = next_double();
    rows.push_back(std::move(r));
  }
  if (rows.empty()) throw std::runtime_error("report: no data rows in " + path);

  std::ostringstream text;
  text << "setting,seeds";
  for (int j = 0; j < n_features; ++j)
    text << ",acc_f" << j << "_mean,acc_f" << j << "_std";
  text << ",eval_loss_mean\n";

  std::map<std::string, std::vector<const Row*>> groups;
  for (const auto& r : rows) {
    std::ostringstream key;
    key << "tau=" << fmt(r.tau, "%g") << " beta=" << fmt(r.beta, "%g")
        << " eps=" << fmt(r.eps, "%g") << " alpha=" << fmt(r.alpha, "%g");
    groups[key.str()].push_back(&r);
  }
  for (const auto& [key, members] : groups) {
    text << key << "," << members.size();
    for (int j = 0; j < n_features; ++j) {
      double mean = 0.0;
      for (const Row* r : members) mean += r->acc[j];
      mean /= members.size();
      double var = 0.0;
      for (const Row* r : members) var += (r->acc[j] - mean) * (r->acc[j] - mean);
      const double stddev =
          members.size() > 1 ? std::sqrt(var / (members.size() - 1)) : 0.0;
      text << ',' << fmt(mean, "%.6g") << ',' << fmt(stddev, "%.6g");
    }
    double loss_mean = 0.0;
    for (const Row* r : members) loss_mean += r->loss;
    text << ',' << fmt(loss_mean / members.size(), "%.6g") << "\n";
  }

  text << "\nerror/loss correlation per feature\n";
  if (rows.size() >= 3) {
    std::vector<ProbeResult> results;
    for (const auto& r : rows) {
      ProbeResult pr;
      pr.accuracy = r.acc;
      pr.chance.assign(r.acc.size(), 0.0);
      pr.eval_loss = r.loss;
      results.push_back(std::move(pr));
    }
    try {
      const std::vector<double> corr = sweep_correlate(results);
      for (int j = 0; j < n_features; ++j)
        text << "f" << j << "," << fmt(corr[j], "%.6g") << "\n";
    } catch (const std::domain_error&) {
      text << "n/a (constant series)\n";
    }
  } else {
    text << "n/a (need >= 3 rows)\n";
  }
  return text.str();
}

std::string cmd_retrieve(const RunConfig& cfg) {
  cfg.validate();
  const Encoder enc = load_run_encoder(cfg, cfg.retrieve.checkpoint);
  const Codebooks codes = make_codes(cfg.data);
  SeededRng rng(mix_seed(cfg.seed, kBankTag));
  const ProbeDataset ds =
      probe_dataset(cfg.data, codes, cfg.retrieve.bank_samples, rng, true);

  MemoryBank bank;
  bank.embeddings = embed_all(enc, ds.inputs);
  for (std::size_t i = 0; i < bank.embeddings.size(); ++i)
    bank.ids.push_back(static_cast<std::int64_t>(i));

  const int qi = cfg.retrieve.query_index;
  const int ai = cfg.retrieve.anchor_index;
  if (qi < 0 || qi >= cfg.retrieve.bank_samples || ai < 0 ||
      ai >= cfg.retrieve.bank_samples)
    throw std::invalid_argument("retrieve: query/anchor index out of range");

  const Vector& vq = bank.embeddings[static_cast<std::size_t>(qi)];
  const Vector& va = bank.embeddings[static_cast<std::size_t>(ai)];

  std::ostringstream text;
  text << "eps,rank,id,similarity\n";
  for (const double eps : {0.0, cfg.retrieve.eps, 2.0 * cfg.retrieve.eps}) {
    const Vector query = vq - eps * va;
    const auto top = nn_retrieve(bank, query, cfg.retrieve.k);
    for (std::size_t r = 0; r < top.size(); ++r)
      text << fmt(eps, "%g") << ',' << r << ',' << top[r].id << ','
           << fmt(top[r].similarity, "%.6g") << "\n";
  }
  return text.str();
}

std::string cmd_robust_split(const RunConfig& cfg) {
  cfg.validate();
  fs::create_directories(cfg.out_dir);
  const Encoder enc = load_run_encoder(cfg, cfg.robust_split.checkpoint);
  const Codebooks codes = make_codes(cfg.data);
  const int feature = cfg.robust_split.feature;

  SeededRng rng(mix_seed(cfg.seed, kSplitTag));
  const int n_test = std::max(10, cfg.robust_split.n_samples / 4);
  const ProbeDataset train_ds =
      probe_dataset(cfg.data, codes, cfg.robust_split.n_samples, rng, true);
  const ProbeDataset test_ds = probe_dataset(cfg.data, codes, n_test, rng, true);

  LabeledDataset train, test;
  train.n_classes = test.n_classes = cfg.data.cardinalities[feature];
  train.inputs = train_ds.inputs;
  for (int i = 0; i < cfg.robust_split.n_samples; ++i)
    train.labels.push_back(train_ds.label(i, feature));
  test.inputs = test_ds.inputs;
  for (int i = 0; i < n_test; ++i) test.labels.push_back(test_ds.label(i, feature));

  const LinearProbe probe =
      train_probe(embed_all(enc, train.inputs), train.labels, train.n_classes);
  const RobustSplit split =
      fgsm_split(enc, probe, train, cfg.robust_split.eps_step,
                 cfg.robust_split.max_steps, rng);
  if (split.adv_inputs.empty())
    throw std::runtime_error("robust-split: every sample was dropped");

  const RefinetuneResult result = refinetune_eval(enc, train, split, test);

  const std::string path = cfg.out_dir + "/robust_split.csv";
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot open for writing: " + path);
  write_robust_split(out, split);

  std::ostringstream text;
  text << "feature," << feature << "\n"
       << "samples," << train.inputs.size() << "\n"
       << "dropped," << split.dropped << "\n"
       << "mean_steps," << fmt(split.mean_steps(), "%.6g") << "\n"
       << "acc_original," << fmt(result.acc_original, "%.6g") << "\n"
       << "acc_robust," << fmt(result.acc_robust, "%.6g") << "\n"
       << "acc_nonrobust," << fmt(result.acc_nonrobust, "%.6g") << "\n"
       << "split_file," << path << "\n";
  return text.str();
}

}  // namespace ifm::cli
