// Experiment orchestrator: train/evaluate runs, alpha-beta sweeps, gradient
// checks, gradient-curve export, multi-seed comparisons with significance
// tests. Exit codes: 0 success, 1 verification failure, 2 usage/config
// error, 3 numeric divergence.

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crl/data.hpp"
#include "crl/eval.hpp"
#include "crl/gradcheck.hpp"
#include "crl/losses.hpp"
#include "crl/models.hpp"
#include "crl/optim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace crl;

namespace {

constexpr const char* kToolVersion = "0.1.0";

class config_error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string fmt(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& ctx) {
  if (!j.is_object()) throw config_error(ctx + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k))
      throw config_error("unknown key '" + k + "' in " + ctx);
}

struct RunConfig {
  json raw;
  std::string dataset_name;
  fs::path mnist_dir;
  std::vector<fs::path> cifar_train_files, cifar_test_files;
  std::size_t limit = 0;
  std::size_t classes = 0, per_class = 0, dim = 0;
  double separation = 0.0, overlap = 0.0;
  std::uint64_t data_seed = 0;
  bool do_normalize = false;

  std::string model_preset = "logreg";
  losses::LossSpec loss;
  optim::OptimSpec optim;
  std::vector<std::uint64_t> seeds{1};
  fs::path output_dir;
  data::AugmentSpec augment;
  bool has_augment = false;
};

losses::LossSpec parse_loss(const json& j) {
  check_keys(j, {"variant", "alpha", "beta"}, "loss");
  losses::LossSpec spec;
  spec.variant = losses::variant_from_name(j.at("variant").get<std::string>());
  if (j.contains("alpha")) spec.alpha = j.at("alpha").get<double>();
  if (j.contains("beta")) spec.beta = j.at("beta").get<double>();
  if (!positivity_guaranteed(spec))
    std::cerr << "warning: CRL with alpha < 1 does not guarantee a positive "
                 "loss value\n";
  return spec;
}

optim::OptimSpec parse_optim(const json& j) {
  check_keys(j,
             {"lr0", "momentum", "nesterov", "weight_decay", "schedule",
              "epochs", "batch_size"},
             "optim");
  optim::OptimSpec spec;
  if (j.contains("lr0")) spec.lr0 = j.at("lr0").get<double>();
  if (j.contains("momentum")) spec.momentum = j.at("momentum").get<double>();
  if (j.contains("nesterov")) spec.nesterov = j.at("nesterov").get<bool>();
  if (j.contains("weight_decay"))
    spec.weight_decay = j.at("weight_decay").get<double>();
  if (j.contains("epochs")) spec.epochs = j.at("epochs").get<std::size_t>();
  if (j.contains("batch_size"))
    spec.batch_size = j.at("batch_size").get<std::size_t>();
  if (j.contains("schedule")) {
    spec.schedule.clear();
    for (const auto& pair : j.at("schedule"))
      spec.schedule.emplace_back(pair.at(0).get<double>(),
                                 pair.at(1).get<double>());
  }
  spec.validate();
  return spec;
}

RunConfig load_config(const fs::path& path) {
  std::ifstream is(path);
  if (!is) throw config_error("cannot open config file: " + path.string());
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception& e) {
    throw config_error("config parse error: " + std::string(e.what()));
  }
  check_keys(j,
             {"dataset", "model", "loss", "optim", "seeds", "output_dir",
              "augment"},
             "config");

  RunConfig cfg;
  cfg.raw = j;

  const json& d = j.at("dataset");
  cfg.dataset_name = d.at("name").get<std::string>();
  if (cfg.dataset_name == "mnist") {
    check_keys(d, {"name", "dir", "limit", "normalize"}, "dataset");
    cfg.mnist_dir = d.at("dir").get<std::string>();
    cfg.do_normalize = d.value("normalize", true);
    cfg.limit = d.value("limit", std::size_t{0});
  } else if (cfg.dataset_name == "cifar10") {
    check_keys(d, {"name", "train_files", "test_files", "limit", "normalize"},
               "dataset");
    for (const auto& f : d.at("train_files"))
      cfg.cifar_train_files.emplace_back(f.get<std::string>());
    for (const auto& f : d.at("test_files"))
      cfg.cifar_test_files.emplace_back(f.get<std::string>());
    cfg.do_normalize = d.value("normalize", true);
    cfg.limit = d.value("limit", std::size_t{0});
  } else if (cfg.dataset_name == "blobs") {
    check_keys(d, {"name", "classes", "per_class", "dim", "separation",
                   "seed"},
               "dataset");
    cfg.classes = d.at("classes").get<std::size_t>();
    cfg.per_class = d.at("per_class").get<std::size_t>();
    cfg.dim = d.at("dim").get<std::size_t>();
    cfg.separation = d.at("separation").get<double>();
    cfg.data_seed = d.value("seed", std::uint64_t{0});
  } else if (cfg.dataset_name == "ordinal") {
    check_keys(d, {"name", "classes", "per_class", "overlap", "seed"},
               "dataset");
    cfg.classes = d.at("classes").get<std::size_t>();
    cfg.per_class = d.at("per_class").get<std::size_t>();
    cfg.overlap = d.at("overlap").get<double>();
    cfg.data_seed = d.value("seed", std::uint64_t{0});
  } else {
    throw config_error("unknown dataset name: " + cfg.dataset_name);
  }

  cfg.model_preset = j.at("model").get<std::string>();
  cfg.loss = parse_loss(j.at("loss"));
  cfg.optim = parse_optim(j.value("optim", json::object()));
  if (j.contains("seeds")) {
    cfg.seeds.clear();
    for (const auto& s : j.at("seeds"))
      cfg.seeds.push_back(s.get<std::uint64_t>());
    if (cfg.seeds.empty()) throw config_error("seeds must be non-empty");
  }
  if (j.contains("augment")) {
    const json& a = j.at("augment");
    check_keys(a, {"hflip_prob", "pad", "crop"}, "augment");
    cfg.augment.hflip_prob = a.value("hflip_prob", 0.0);
    if (a.contains("pad"))
      cfg.augment.pad_crop = {a.at("pad").get<std::size_t>(),
                              a.at("crop").get<std::size_t>()};
    cfg.has_augment = true;
  }

  if (j.contains("output_dir")) {
    cfg.output_dir = j.at("output_dir").get<std::string>();
  } else if (const char* env = std::getenv("CRL_OUT_DIR")) {
    cfg.output_dir = env;
  } else {
    cfg.output_dir = "runs";
  }
  return cfg;
}

struct LoadedData {
  data::Dataset ds;
  bool ordinal = false;
};

void truncate_batch(data::LabeledBatch& batch, std::size_t limit) {
  if (limit == 0 || batch.size() <= limit) return;
  const std::size_t per = batch.inputs.numel() / batch.size();
  std::vector<std::size_t> shape = batch.inputs.shape;
  shape[0] = limit;
  batch.inputs.data.resize(limit * per);
  batch.inputs.shape = shape;
  batch.labels.resize(limit);
}

void reshape_for_model(data::Dataset& ds, const std::string& preset) {
  const std::size_t per = Tensor::numel_of(ds.input_shape);
  std::vector<std::size_t> sample_shape;
  if (preset == "shallow_cnn") {
    if (ds.input_shape.size() == 3)
      sample_shape = ds.input_shape;
    else if (ds.input_shape.size() == 2)
      sample_shape = {1, ds.input_shape[0], ds.input_shape[1]};
    else
      throw config_error("shallow_cnn needs image-shaped inputs");
  } else {
    sample_shape = {per};
  }
  ds.input_shape = sample_shape;
  auto fix = [&](data::LabeledBatch& b) {
    std::vector<std::size_t> s{b.size()};
    for (std::size_t d : sample_shape) s.push_back(d);
    b.inputs = b.inputs.reshaped(s);
  };
  fix(ds.train);
  fix(ds.test);
}

LoadedData load_dataset(const RunConfig& cfg) {
  LoadedData out;
  if (cfg.dataset_name == "mnist") {
    data::Dataset ds;
    ds.train = data::load_idx(cfg.mnist_dir / "train-images-idx3-ubyte",
                              cfg.mnist_dir / "train-labels-idx1-ubyte");
    ds.test = data::load_idx(cfg.mnist_dir / "t10k-images-idx3-ubyte",
                             cfg.mnist_dir / "t10k-labels-idx1-ubyte");
    truncate_batch(ds.train, cfg.limit);
    ds.class_count = 10;
    ds.input_shape.assign(ds.train.inputs.shape.begin() + 1,
                          ds.train.inputs.shape.end());
    ds.norm_stats = data::compute_stats(ds.train);
    if (cfg.do_normalize) {
      ds.train = data::normalize(ds.train, ds.norm_stats);
      ds.test = data::normalize(ds.test, ds.norm_stats);
    }
    out.ds = std::move(ds);
  } else if (cfg.dataset_name == "cifar10") {
    data::Dataset ds;
    ds.train = data::load_cifar10_bin(cfg.cifar_train_files, cfg.limit);
    ds.test = data::load_cifar10_bin(cfg.cifar_test_files, cfg.limit);
    ds.class_count = 10;
    ds.input_shape = {3, 32, 32};
    ds.norm_stats = data::compute_stats(ds.train);
    if (cfg.do_normalize) {
      ds.train = data::normalize(ds.train, ds.norm_stats);
      ds.test = data::normalize(ds.test, ds.norm_stats);
    }
    out.ds = std::move(ds);
  } else if (cfg.dataset_name == "blobs") {
    out.ds = data::make_blobs(cfg.classes, cfg.per_class, cfg.dim,
                              cfg.separation, cfg.data_seed);
  } else {
    out.ds = data::make_ordinal(cfg.classes, cfg.per_class, cfg.overlap,
                                cfg.data_seed);
    out.ordinal = true;
  }
  reshape_for_model(out.ds, cfg.model_preset);
  return out;
}

struct SingleRun {
  std::vector<optim::EpochLog> logs;
  eval::MetricsReport metrics;
  models::Model model;
};

SingleRun run_training(const RunConfig& cfg, const LoadedData& ld,
                       const losses::LossSpec& loss, std::uint64_t seed) {
  models::Model model = models::build_model(
      cfg.model_preset, ld.ds.input_shape, ld.ds.class_count, seed);
  // Train-time augmentation happens once up front with a seed-derived
  // stream; test images are never augmented.
  const data::Dataset* dsp = &ld.ds;
  data::Dataset augmented;
  if (cfg.has_augment) {
    std::mt19937_64 aug_rng(seed ^ 0x1f83d9abfb41bd6bull);
    augmented = ld.ds;
    augmented.train = data::augment(ld.ds.train, cfg.augment, aug_rng);
    dsp = &augmented;
  }
  auto logs = optim::fit(model, *dsp, loss, cfg.optim, seed);
  const auto preds = model.predict(ld.ds.test.inputs);
  auto metrics = eval::compute_metrics(preds, ld.ds.test.labels,
                                       ld.ds.class_count, ld.ordinal);
  return SingleRun{std::move(logs), std::move(metrics), std::move(model)};
}

void write_epoch_csv(const fs::path& path,
                     const std::vector<optim::EpochLog>& logs) {
  std::ofstream os(path);
  os << "epoch,train_loss,test_error_pct,lr,wall_time_s\n";
  for (const auto& l : logs)
    os << l.epoch << ',' << fmt(l.train_loss) << ',' << fmt(l.test_error_pct)
       << ',' << fmt(l.lr) << ',' << fmt(l.wall_time_s) << '\n';
}

std::string metrics_row(std::uint64_t seed, const losses::LossSpec& loss,
                        const eval::MetricsReport& m) {
  const bool crl = loss.variant == losses::Variant::CRL;
  std::string row = std::to_string(seed) + ',' +
                    std::string(losses::variant_name(loss.variant)) + ',' +
                    fmt(crl ? loss.alpha : 0.0) + ',' +
                    fmt(crl ? loss.beta : 0.0) + ',' +
                    fmt(m.top1_error_pct) + ',' + fmt(m.macro_f1_pct) + ',';
  if (m.one_off_acc_pct) row += fmt(*m.one_off_acc_pct);
  return row;
}

json epoch_logs_json(const std::vector<optim::EpochLog>& logs) {
  json arr = json::array();
  for (const auto& l : logs)
    arr.push_back({{"epoch", l.epoch},
                   {"train_loss", l.train_loss},
                   {"test_error_pct", l.test_error_pct},
                   {"lr", l.lr},
                   {"wall_time_s", l.wall_time_s}});
  return arr;
}

int cmd_train(const fs::path& config_path,
              const std::vector<std::uint64_t>& seed_override) {
  const auto t0 = std::chrono::steady_clock::now();
  RunConfig cfg = load_config(config_path);
  if (!seed_override.empty()) cfg.seeds = seed_override;
  LoadedData ld = load_dataset(cfg);
  cfg.loss.validate(ld.ds.class_count);
  fs::create_directories(cfg.output_dir);

  std::ofstream metrics_csv(cfg.output_dir / "metrics.csv");
  metrics_csv
      << "seed,loss,alpha,beta,top1_error_pct,macro_f1_pct,one_off_acc_pct\n";

  json report;
  report["tool_version"] = kToolVersion;
  report["config"] = cfg.raw;
  report["runs"] = json::array();
  for (std::uint64_t seed : cfg.seeds) {
    SingleRun run = run_training(cfg, ld, cfg.loss, seed);
    const fs::path epoch_path =
        cfg.output_dir / ("epochs_seed" + std::to_string(seed) + ".csv");
    write_epoch_csv(epoch_path, run.logs);
    metrics_csv << metrics_row(seed, cfg.loss, run.metrics) << '\n';
    const fs::path ckpt =
        cfg.output_dir / ("checkpoint_seed" + std::to_string(seed) + ".bin");
    models::save_checkpoint(run.model, ckpt);

    json jr;
    jr["seed"] = seed;
    jr["epochs"] = epoch_logs_json(run.logs);
    jr["metrics"] = {{"top1_error_pct", run.metrics.top1_error_pct},
                     {"macro_f1_pct", run.metrics.macro_f1_pct}};
    if (run.metrics.one_off_acc_pct)
      jr["metrics"]["one_off_acc_pct"] = *run.metrics.one_off_acc_pct;
    jr["checkpoint"] = ckpt.string();
    report["runs"].push_back(jr);
  }
  report["wall_time_s"] =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
          .count();
  std::ofstream(cfg.output_dir / "report.json") << report.dump(2) << '\n';
  std::cout << "wrote " << (cfg.output_dir / "report.json").string() << '\n';
  return 0;
}

int cmd_sweep(const fs::path& config_path, std::vector<double> alphas,
              std::vector<double> betas) {
  if (alphas.empty() || betas.empty())
    throw config_error("sweep: alpha and beta lists must be non-empty");
  RunConfig cfg = load_config(config_path);
  LoadedData ld = load_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  std::sort(betas.begin(), betas.end());
  std::ofstream long_csv(cfg.output_dir / "sweep.csv");
  long_csv << "alpha,beta,seed,top1_error_pct\n";

  // mean error per (beta, alpha) cell
  std::map<std::pair<double, double>, std::vector<double>> cells;
  std::map<std::uint64_t, double> beta0_errors;

  for (std::uint64_t seed : cfg.seeds) {
    for (double beta : betas) {
      if (beta == 0.0) {
        // alpha-independent: computed once per seed
        losses::LossSpec spec{losses::Variant::CRL, alphas.front(), 0.0};
        SingleRun run = run_training(cfg, ld, spec, seed);
        beta0_errors[seed] = run.metrics.top1_error_pct;
        long_csv << ",0," << seed << ',' << fmt(run.metrics.top1_error_pct)
                 << '\n';
        continue;
      }
      for (double alpha : alphas) {
        losses::LossSpec spec{losses::Variant::CRL, alpha, beta};
        SingleRun run = run_training(cfg, ld, spec, seed);
        cells[{beta, alpha}].push_back(run.metrics.top1_error_pct);
        long_csv << fmt(alpha) << ',' << fmt(beta) << ',' << seed << ','
                 << fmt(run.metrics.top1_error_pct) << '\n';
      }
    }
  }

  // Pivot: rows beta, columns alpha, mean over seeds; the beta = 0 cell is
  // replicated across alpha columns.
  std::ofstream pivot(cfg.output_dir / "sweep_pivot.csv");
  pivot << "beta";
  for (double a : alphas) pivot << ",alpha=" << fmt(a);
  pivot << '\n';
  for (double beta : betas) {
    pivot << fmt(beta);
    for (double alpha : alphas) {
      double mean = 0.0;
      if (beta == 0.0) {
        for (const auto& [seed, err] : beta0_errors) mean += err;
        mean /= static_cast<double>(beta0_errors.size());
      } else {
        const auto& v = cells[{beta, alpha}];
        for (double e : v) mean += e;
        mean /= static_cast<double>(v.size());
      }
      pivot << ',' << fmt(mean);
    }
    pivot << '\n';
  }
  std::cout << "wrote " << (cfg.output_dir / "sweep.csv").string() << " and "
            << (cfg.output_dir / "sweep_pivot.csv").string() << '\n';
  return 0;
}

int cmd_gradcheck(std::size_t cases, std::uint64_t seed,
                  bool crl_sign_flipped) {
  if (cases < 1) throw config_error("gradcheck: --cases must be >= 1");
  auto results = gradcheck::check_losses(cases, seed, 1e-6, crl_sign_flipped);
  auto layer_results = gradcheck::check_layers(seed);
  results.insert(results.end(), layer_results.begin(), layer_results.end());

  bool ok = true;
  for (const auto& r : results) {
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << r.component
              << "  worst_rel_err=" << fmt(r.worst_rel_err)
              << "  threshold=" << fmt(r.threshold) << '\n';
    if (!r.pass) {
      std::cout << "      worst case: " << r.worst_case << '\n';
      ok = false;
    }
  }
  return ok ? 0 : 1;
}

int cmd_curves(double alpha, std::vector<double> betas, double p_j,
               std::size_t grid_n, const fs::path& out) {
  if (grid_n < 2) throw config_error("curves: --grid must be >= 2");
  if (betas.empty()) betas = {0.0, 0.25, 0.5, 0.75, 1.0, 1.25};

  std::vector<double> grid(grid_n);
  for (std::size_t i = 0; i < grid_n; ++i)
    grid[i] = static_cast<double>(i + 1) / static_cast<double>(grid_n + 1);

  std::vector<losses::LossSpec> family;
  family.push_back({losses::Variant::CEL});
  family.push_back({losses::Variant::NLLR});
  for (double beta : betas)
    family.push_back({losses::Variant::CRL, alpha, beta});

  const auto samples = losses::gradient_curve(family, grid, p_j);
  std::ofstream os(out);
  if (!os) throw config_error("curves: cannot open output file " +
                              out.string());
  os << "loss,beta,alpha,p_c,value_printed,value_analytic\n";
  for (const auto& s : samples)
    os << s.loss_label << ',' << fmt(s.beta) << ',' << fmt(s.alpha) << ','
       << fmt(s.p_c) << ',' << fmt(s.value_printed) << ','
       << fmt(s.value_analytic) << '\n';
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

int cmd_compare(const fs::path& config_path, const std::string& loss_a,
                const std::string& loss_b, std::size_t n_runs) {
  if (n_runs < 2) throw config_error("compare: --runs must be >= 2");
  RunConfig cfg = load_config(config_path);
  LoadedData ld = load_dataset(cfg);
  fs::create_directories(cfg.output_dir);

  auto arm_spec = [&](const std::string& name) {
    losses::LossSpec spec = cfg.loss;  // inherits alpha/beta from config
    spec.variant = losses::variant_from_name(name);
    return spec;
  };
  const losses::LossSpec spec_a = arm_spec(loss_a);
  const losses::LossSpec spec_b = arm_spec(loss_b);

  // Paired seeding: seed i drives init and data order in both arms.
  std::vector<std::uint64_t> seeds = cfg.seeds;
  if (seeds.size() < n_runs) {
    seeds.clear();
    for (std::size_t i = 1; i <= n_runs; ++i) seeds.push_back(i);
  }
  seeds.resize(n_runs);

  std::ofstream per_seed(cfg.output_dir / "compare_runs.csv");
  per_seed << "seed,loss,alpha,beta,top1_error_pct,macro_f1_pct,"
              "one_off_acc_pct\n";
  std::vector<double> errs_a, errs_b;
  for (std::uint64_t seed : seeds) {
    SingleRun ra = run_training(cfg, ld, spec_a, seed);
    SingleRun rb = run_training(cfg, ld, spec_b, seed);
    errs_a.push_back(ra.metrics.top1_error_pct);
    errs_b.push_back(rb.metrics.top1_error_pct);
    per_seed << metrics_row(seed, spec_a, ra.metrics) << '\n';
    per_seed << metrics_row(seed, spec_b, rb.metrics) << '\n';
  }

  const auto t = eval::paired_t_test(errs_a, errs_b);
  json out;
  out["loss_a"] = losses::variant_name(spec_a.variant);
  out["loss_b"] = losses::variant_name(spec_b.variant);
  out["metric"] = "top1_error_pct";
  out["mean_a"] = t.mean_a;
  out["mean_b"] = t.mean_b;
  out["std_a"] = t.std_a;
  out["std_b"] = t.std_b;
  out["t_stat"] = t.t_stat;
  out["dof"] = t.dof;
  out["p_value"] = t.p_value;
  out["n_pairs"] = t.n_pairs;
  out["degenerate"] = t.degenerate;
  std::ofstream(cfg.output_dir / "compare.json") << out.dump(2) << '\n';
  std::cout << out.dump(2) << '\n';
  return 0;
}

int cmd_heatmap(const fs::path& checkpoint, const fs::path& config_path,
                const std::vector<std::size_t>& ids, const fs::path& out) {
  RunConfig cfg = load_config(config_path);
  LoadedData ld = load_dataset(cfg);
  models::Model model = models::load_checkpoint(checkpoint);
  model.eval_mode();

  const auto& test = ld.ds.test;
  const std::size_t per = test.inputs.numel() / test.size();
  std::vector<std::size_t> shape = test.inputs.shape;
  shape[0] = ids.size();
  Tensor selected(shape);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] >= test.size())
      throw config_error("heatmap: sample id " + std::to_string(ids[i]) +
                         " out of range (test set has " +
                         std::to_string(test.size()) + " samples)");
    std::copy_n(test.inputs.data.begin() + ids[i] * per, per,
                selected.data.begin() + i * per);
  }

  const Tensor heat = eval::softmax_heatmap(model, selected);
  std::ofstream os(out);
  if (!os) throw config_error("heatmap: cannot open output file " +
                              out.string());
  os << "sample_id";
  for (std::size_t c = 0; c < heat.shape[1]; ++c) os << ",p_" << c;
  os << '\n';
  for (std::size_t i = 0; i < ids.size(); ++i) {
    os << ids[i];
    for (std::size_t c = 0; c < heat.shape[1]; ++c)
      os << ',' << fmt(heat.data[i * heat.shape[1] + c]);
    os << '\n';
  }
  std::cout << "wrote " << out.string() << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"competing-ratio loss experiments"};
  app.require_subcommand(1);

  std::string config_path;
  std::vector<std::uint64_t> seed_override;
  auto* train = app.add_subcommand("train", "train and evaluate per seed");
  train->add_option("--config", config_path, "JSON run config")->required();
  train->add_option("--seed", seed_override, "override config seeds");

  std::string sweep_config;
  std::vector<double> sweep_alphas, sweep_betas;
  auto* sweep = app.add_subcommand("sweep", "alpha/beta grid sweep");
  sweep->add_option("--config", sweep_config, "JSON run config")->required();
  sweep->add_option("--alpha", sweep_alphas, "alpha grid")->required();
  sweep->add_option("--beta", sweep_betas, "beta grid")->required();

  std::size_t gc_cases = 1000;
  std::uint64_t gc_seed = 1234;
  bool gc_flip = false;
  auto* gradcheck_cmd =
      app.add_subcommand("gradcheck", "finite-difference gradient checks");
  gradcheck_cmd->add_option("--cases", gc_cases, "random cases per variant");
  gradcheck_cmd->add_option("--seed", gc_seed, "rng seed");
  gradcheck_cmd->add_flag(
      "--crl-sign-flipped", gc_flip,
      "check the sign-flipped ratio-form gradient instead (mutation test; "
      "expected to fail)");

  double cv_alpha = 1.5, cv_pj = 0.5;
  std::vector<double> cv_betas;
  std::size_t cv_grid = 99;
  std::string cv_out;
  auto* curves = app.add_subcommand("curves", "gradient-vs-p_c curve export");
  curves->add_option("--alpha", cv_alpha, "CRL alpha");
  curves->add_option("--beta", cv_betas, "CRL beta values");
  curves->add_option("--pj", cv_pj, "fixed competing-class probability");
  curves->add_option("--grid", cv_grid, "number of p_c grid points");
  curves->add_option("--out", cv_out, "output CSV")->required();

  std::string cmp_config, cmp_a, cmp_b;
  std::size_t cmp_runs = 10;
  auto* compare =
      app.add_subcommand("compare", "paired multi-seed loss comparison");
  compare->add_option("--config", cmp_config, "JSON run config")->required();
  compare->add_option("--loss-a", cmp_a, "first loss name")->required();
  compare->add_option("--loss-b", cmp_b, "second loss name")->required();
  compare->add_option("--runs", cmp_runs, "number of paired runs");

  std::string hm_checkpoint, hm_config, hm_out;
  std::vector<std::size_t> hm_ids;
  auto* heatmap = app.add_subcommand("heatmap", "softmax posterior export");
  heatmap->add_option("--checkpoint", hm_checkpoint, "model checkpoint")
      ->required();
  heatmap->add_option("--config", hm_config, "JSON run config (dataset)")
      ->required();
  heatmap->add_option("--ids", hm_ids, "test-sample indices")->required();
  heatmap->add_option("--out", hm_out, "output CSV")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (train->parsed()) return cmd_train(config_path, seed_override);
    if (sweep->parsed()) return cmd_sweep(sweep_config, sweep_alphas,
                                          sweep_betas);
    if (gradcheck_cmd->parsed())
      return cmd_gradcheck(gc_cases, gc_seed, gc_flip);
    if (curves->parsed())
      return cmd_curves(cv_alpha, cv_betas, cv_pj, cv_grid, cv_out);
    if (compare->parsed()) return cmd_compare(cmp_config, cmp_a, cmp_b,
                                              cmp_runs);
    if (heatmap->parsed())
      return cmd_heatmap(hm_checkpoint, hm_config, hm_ids, hm_out);
  } catch (const optim::divergence_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (const config_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  }
  return 2;
}
