#include "hmmgl/cli.hpp"

#include "hmmgl/baselines.hpp"
#include "hmmgl/em_engine.hpp"
#include "hmmgl/io.hpp"
#include "hmmgl/model_selection.hpp"
#include "hmmgl/pruning.hpp"
#include "hmmgl/simbench.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

namespace hmmgl::cli {

namespace {

class UsageError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

class StateCollapse : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by fit and prune.
struct FitFlags {
  std::string data;
  std::string lambda = "uni";
  std::string penalty = "parcor";
  double eps = 1e-3;
  std::string pi_min = "auto";
  int max_iter = 500;
  std::string init = "kmeans";
  std::string init_file;
  int restarts = 100;
  std::uint64_t seed = 1;
  std::string out;
  std::string delimiter = ",";
  bool header = false;
  int threads = 1;
};

void add_fit_flags(CLI::App* cmd, FitFlags& f) {
  cmd->add_option("--data", f.data, "CSV/TSV data matrix, one observation per row")->required();
  cmd->add_option("--lambda", f.lambda, "penalty level: 'uni' or a nonnegative number")
      ->capture_default_str();
  cmd->add_option("--penalty", f.penalty, "invcov | parcor | invcor")
      ->check(CLI::IsMember({"invcov", "parcor", "invcor"}))
      ->capture_default_str();
  cmd->add_option("--eps", f.eps, "relative covariance change threshold")->capture_default_str();
  cmd->add_option("--pi-min", f.pi_min, "minimum scaled state size: 'auto' (5/n) or a number")
      ->capture_default_str();
  cmd->add_option("--max-iter", f.max_iter, "EM iteration cap")->capture_default_str();
  cmd->add_option("--init", f.init, "kmeans | file")
      ->check(CLI::IsMember({"kmeans", "file"}))
      ->capture_default_str();
  cmd->add_option("--init-file", f.init_file,
                  "initial labels (one column, 0-based) or responsibilities (K columns)");
  cmd->add_option("--restarts", f.restarts, "K-means random starts")->capture_default_str();
  cmd->add_option("--seed", f.seed, "random seed")->capture_default_str();
  cmd->add_option("--out", f.out, "output document")->required();
  cmd->add_option("--delimiter", f.delimiter, "field delimiter ('tab' for TSV)")->capture_default_str();
  cmd->add_flag("--header", f.header, "skip the first row of the data file");
  cmd->add_option("--threads", f.threads, "internal parallelism bound")->capture_default_str();
}

char delimiter_of(const std::string& s) {
  if (s == "tab" || s == "\\t") return '\t';
  if (s.size() != 1) throw UsageError("delimiter must be a single character or 'tab'");
  return s[0];
}

double parse_number(const std::string& s, const char* flag) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string(flag) + ": '" + s + "' is not a number");
  }
}

// Validates everything that does not need the data.
FitConfig config_from(const FitFlags& f) {
  FitConfig c;
  if (f.lambda != "uni") {
    c.lambda = parse_number(f.lambda, "--lambda");
    if (*c.lambda < 0.0) throw UsageError("--lambda must be nonnegative");
  }
  c.penalty = parse_penalty_kind(f.penalty);
  if (!(f.eps > 0.0)) throw UsageError("--eps must be positive");
  c.eps = f.eps;
  if (f.pi_min != "auto") {
    c.pi_min = parse_number(f.pi_min, "--pi-min");
    if (!(*c.pi_min > 0.0 && *c.pi_min < 1.0)) throw UsageError("--pi-min must lie in (0, 1)");
  }
  if (f.max_iter < 1) throw UsageError("--max-iter must be at least 1");
  c.max_iter = f.max_iter;
  if (f.init == "file" && f.init_file.empty()) throw UsageError("--init file requires --init-file");
  if (f.init != "file" && !f.init_file.empty()) throw UsageError("--init-file requires --init file");
  if (f.restarts < 1) throw UsageError("--restarts must be at least 1");
  if (f.threads < 1) throw UsageError("--threads must be at least 1");
  delimiter_of(f.delimiter);
  return c;
}

Matrix load_data(const FitFlags& f) {
  try {
    return read_matrix(f.data, CsvOptions{delimiter_of(f.delimiter), f.header});
  } catch (const UsageError&) {
    throw;
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
}

EmInit init_from_file(const std::string& path, Index n, int k) {
  Matrix m;
  try {
    m = read_matrix(path);
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  if (m.rows() != n) {
    throw UsageError("--init-file has " + std::to_string(m.rows()) + " rows, data has " +
                     std::to_string(n));
  }
  if (m.cols() == 1) {
    std::vector<int> labels(static_cast<std::size_t>(n));
    for (Index t = 0; t < n; ++t) labels[static_cast<std::size_t>(t)] = static_cast<int>(m(t, 0));
    try {
      return init_from_labels(labels, k);
    } catch (const std::invalid_argument& e) {
      throw UsageError(std::string("--init-file: ") + e.what());
    }
  }
  if (m.cols() != k) throw UsageError("--init-file must have 1 or K columns");
  EmInit init;
  init.u = m;
  init.transition = Matrix::Constant(k, k, 1.0 / k);
  init.pi = m.colwise().sum().transpose() / static_cast<double>(n);
  return init;
}

EmInit make_init(const FitFlags& f, const Matrix& data, int k) {
  if (f.init == "file") return init_from_file(f.init_file, data.rows(), k);
  return kmeans_init(data, k, f.restarts, derive_seed(f.seed, static_cast<std::uint64_t>(k)));
}

void write_json(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write '" + path + "'");
  out << j.dump(2) << '\n';
}

int cmd_fit(const FitFlags& f, int k, const std::string& method, std::ostream& out) {
  FitConfig config = config_from(f);
  if (k < 1) throw UsageError("--k must be at least 1");
  const Matrix data = load_data(f);
  if (data.rows() < k) throw UsageError("fewer observations than states");
  const EmInit init = make_init(f, data, k);

  FitResult fit;
  if (method == "unpen") {
    fit = fit_unpenalized(data, k, config, init);
    config.lambda = 0.0;
    config.pi_min = static_cast<double>(data.cols()) / static_cast<double>(data.rows());
  } else if (method == "diagcov") {
    fit = fit_diagcov(data, k, config, init);
    config.lambda = 0.0;
  } else {
    fit = fit_hmmglasso(data, k, config, init);
  }
  const ModelDocument doc = make_document(fit, config);
  save_document(f.out, doc);
  out << "fit: K=" << k << " lambda=" << doc.lambda << " log-likelihood=" << doc.log_likelihood
      << " BIC=" << doc.bic << " MMDL=" << doc.mmdl << " termination=" << to_string(doc.termination)
      << " iterations=" << doc.iterations << '\n';
  if (fit.termination == Termination::state_collapsed) {
    std::ostringstream msg;
    msg << "state " << fit.collapsed_state << " collapsed: its scaled size fell below pi_min = "
        << doc.pi_min << " (document written with the last valid iterate)";
    throw StateCollapse(msg.str());
  }
  return kOk;
}

int cmd_prune(const FitFlags& f, int k_min, int k_max, const std::string& criterion,
              const std::string& divergence, std::ostream& out) {
  const FitConfig config = config_from(f);
  if (k_min < 1 || k_min >= k_max) throw UsageError("need 1 <= --kmin < --kmax");
  const Criterion crit = parse_criterion(criterion);
  PruneOptions opts;
  opts.divergence = divergence == "printed" ? DivergenceForm::printed : DivergenceForm::standard;
  opts.threads = f.threads;
  const Matrix data = load_data(f);
  if (data.rows() < k_max) throw UsageError("fewer observations than --kmax");

  const PruneTrace trace = backward_prune(
      data, k_min, k_max, config, crit,
      [&](const Matrix& d, int k) { return make_init(f, d, k); }, opts);
  write_json(f.out, to_json(trace, config));
  out << "prune: criterion=" << criterion << " selected K=" << trace.selected_k << '\n';
  for (const auto& s : trace.steps) {
    out << "  K=" << s.num_states << " BIC=" << s.bic.total << " MMDL=" << s.mmdl.total << '\n';
  }
  return kOk;
}

struct SimFlags {
  int model = 1;
  int k = 2;
  double alpha = 2.0;
  std::optional<Index> n;
  std::optional<Index> p;
  std::uint64_t seed = 1;
  std::string prefix;
  bool uneven = false;
};

SimSpec spec_from(int model, int k, double alpha, std::optional<Index> n, std::optional<Index> p,
                  bool uneven) {
  if (model < 1 || model > 4) throw UsageError("--model must be 1, 2, 3 or 4");
  SimSpec spec = SimSpec::defaults(model, k, alpha);
  if (n) spec.n = *n;
  if (p) spec.p = *p;
  spec.uneven_mean_blocks = uneven;
  return spec;
}

int cmd_simulate(const SimFlags& f, std::ostream& out) {
  SimSpec spec = spec_from(f.model, f.k, f.alpha, f.n, f.p, f.uneven);
  spec.seed = f.seed;
  SimData sim;
  try {
    sim = generate(spec);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  write_matrix(f.prefix + "_data.csv", sim.data);
  write_labels(f.prefix + "_labels.csv", sim.labels);
  json truth = {{"spec", to_json(spec)}, {"model", to_json(sim.truth)}};
  json edges = json::array();
  for (const auto& s : sim.truth.states) {
    json e = json::array();
    for (const auto& [a, b] : graph_of(s.precision())) e.push_back({a, b});
    edges.push_back(std::move(e));
  }
  truth["edges"] = std::move(edges);
  write_json(f.prefix + "_truth.json", truth);
  out << "simulate: wrote " << f.prefix << "_data.csv (" << sim.data.rows() << " x "
      << sim.data.cols() << "), " << f.prefix << "_labels.csv, " << f.prefix << "_truth.json\n";
  return kOk;
}

int cmd_eval(const std::string& model_path, const std::string& data_path, const std::string& delim,
             bool header, const std::string& out_path, std::ostream& out) {
  const char d = delimiter_of(delim);
  ModelDocument doc;
  try {
    doc = load_document(model_path);
  } catch (const NumericError&) {
    throw;
  } catch (const std::exception& e) {
    throw UsageError(model_path + ": " + e.what());
  }
  Matrix data;
  try {
    data = read_matrix(data_path, CsvOptions{d, header});
  } catch (const std::runtime_error& e) {
    throw UsageError(e.what());
  }
  if (data.cols() != doc.model.dim()) {
    throw UsageError("data has " + std::to_string(data.cols()) + " columns, model expects " +
                     std::to_string(doc.model.dim()));
  }
  const Responsibilities resp = forward_backward(data, doc.model);
  json record = {{"n", data.rows()},
                 {"p", data.cols()},
                 {"num_states", doc.model.num_states()},
                 {"log_likelihood", resp.log_likelihood},
                 {"log_likelihood_per_observation", resp.log_likelihood / static_cast<double>(data.rows())}};
  if (out_path.empty()) {
    out << record.dump() << '\n';
  } else {
    std::ofstream o(out_path);
    if (!o) throw UsageError("cannot write '" + out_path + "'");
    o << record.dump() << '\n';
  }
  return kOk;
}

struct BenchFlags {
  int experiment = 1;
  std::vector<int> models{1};
  std::vector<int> ks{2};
  std::vector<double> alphas{2.0};
  std::optional<Index> n;
  std::optional<Index> p;
  int replicates = 10;
  std::uint64_t seed = 1;
  int restarts = 100;
  int k_max = 8;
  int k_extra = 2;
  std::vector<std::string> methods;
  std::vector<std::string> criteria{"bic", "mmdl"};
  std::string penalty = "parcor";
  int threads = 1;
  bool uneven = false;
  std::string out;
};

int cmd_bench(const BenchFlags& f, std::ostream& out) {
  if (f.experiment != 1 && f.experiment != 2) throw UsageError("--experiment must be 1 or 2");
  if (f.replicates < 1) throw UsageError("--replicates must be at least 1");
  if (f.restarts < 1) throw UsageError("--restarts must be at least 1");
  if (f.threads < 1) throw UsageError("--threads must be at least 1");
  std::vector<Method> methods;
  std::vector<Criterion> criteria;
  try {
    std::vector<std::string> names = f.methods;
    if (names.empty()) {
      names = f.experiment == 1 ? std::vector<std::string>{"bwprun", "hmmgl", "unpen", "diagcov"}
                                : std::vector<std::string>{"bwprun", "hmmgl", "kmeans_glasso", "pooled_glasso"};
    }
    for (const auto& m : names) methods.push_back(parse_method(m));
    for (const auto& c : f.criteria) criteria.push_back(parse_criterion(c));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }

  std::vector<SimSpec> specs;
  for (int model : f.models)
    for (int k : f.ks)
      for (double alpha : f.alphas) {
        SimSpec s = spec_from(model, k, alpha, f.n, f.p, f.uneven);
        try {
          build_truth(s);
        } catch (const std::invalid_argument& e) {
          throw UsageError(e.what());
        }
        specs.push_back(s);
      }

  ExperimentOptions opts;
  opts.k_max = f.k_max;
  opts.k_extra = f.k_extra;
  opts.restarts = f.restarts;
  opts.threads = f.threads;
  opts.fit.penalty = parse_penalty_kind(f.penalty);

  std::ofstream file;
  std::ostream* sink = &out;
  if (!f.out.empty()) {
    file.open(f.out);
    if (!file) throw UsageError("cannot write '" + f.out + "'");
    sink = &file;
  }
  if (f.experiment == 1) {
    for (const auto& row : run_experiment_1(specs, methods, criteria, f.replicates, f.seed, opts)) {
      *sink << to_json(row).dump() << '\n';
    }
  } else {
    for (const auto& row : run_experiment_2(specs, methods, f.replicates, f.seed, opts)) {
      *sink << to_json(row).dump() << '\n';
    }
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Sparse Gaussian hidden Markov models with state-specific graphical lassos", "hmmgl"};
  app.require_subcommand(1);

  FitFlags fit_flags;
  int fit_k = 0;
  std::string fit_method = "hmmgl";
  auto* fit = app.add_subcommand("fit", "fit an HMM with K states");
  add_fit_flags(fit, fit_flags);
  fit->add_option("--k", fit_k, "number of states")->required();
  fit->add_option("--method", fit_method, "hmmgl | unpen | diagcov")
      ->check(CLI::IsMember({"hmmgl", "unpen", "diagcov"}))
      ->capture_default_str();

  FitFlags prune_flags;
  int k_min = 1;
  int k_max = 0;
  std::string criterion = "mmdl";
  std::string divergence = "standard";
  auto* prune = app.add_subcommand("prune", "greedy backward pruning from --kmax to --kmin states");
  add_fit_flags(prune, prune_flags);
  prune->add_option("--kmin", k_min, "smallest K")->capture_default_str();
  prune->add_option("--kmax", k_max, "starting K")->required();
  prune->add_option("--criterion", criterion, "bic | mmdl")
      ->check(CLI::IsMember({"bic", "mmdl"}))
      ->capture_default_str();
  prune->add_option("--divergence", divergence, "mean term of the merge distance: standard | printed")
      ->check(CLI::IsMember({"standard", "printed"}))
      ->capture_default_str();

  SimFlags sim_flags;
  auto* simulate = app.add_subcommand("simulate", "draw data from a benchmark model");
  simulate->add_option("--model", sim_flags.model, "benchmark model 1-4")->capture_default_str();
  simulate->add_option("--k", sim_flags.k, "true number of states")->capture_default_str();
  simulate->add_option("--alpha", sim_flags.alpha, "mean separation")->capture_default_str();
  simulate->add_option("--n", sim_flags.n, "length (default per model)");
  simulate->add_option("--p", sim_flags.p, "dimension (default per model)");
  simulate->add_option("--seed", sim_flags.seed, "random seed")->capture_default_str();
  simulate->add_option("--out-prefix", sim_flags.prefix, "output prefix")->required();
  simulate->add_flag("--allow-uneven", sim_flags.uneven, "allow p not divisible by K");

  std::string eval_model, eval_data, eval_delim = ",", eval_out;
  bool eval_header = false;
  auto* eval = app.add_subcommand("eval", "held-out log-likelihood of data under a saved model");
  eval->add_option("--model", eval_model, "model document")->required();
  eval->add_option("--data", eval_data, "data matrix")->required();
  eval->add_option("--delimiter", eval_delim, "field delimiter")->capture_default_str();
  eval->add_flag("--header", eval_header, "skip the first row");
  eval->add_option("--out", eval_out, "output record (default stdout)");

  BenchFlags bench_flags;
  auto* bench = app.add_subcommand("bench", "run the simulation experiments");
  bench->add_option("--experiment", bench_flags.experiment, "1 (state recovery) or 2 (graphs)")
      ->capture_default_str();
  bench->add_option("--model", bench_flags.models, "benchmark models")->delimiter(',')->capture_default_str();
  bench->add_option("--k", bench_flags.ks, "true numbers of states")->delimiter(',')->capture_default_str();
  bench->add_option("--alpha", bench_flags.alphas, "mean separations")->delimiter(',')->capture_default_str();
  bench->add_option("--n", bench_flags.n, "override n");
  bench->add_option("--p", bench_flags.p, "override p");
  bench->add_option("--replicates", bench_flags.replicates, "data sets per setting")->capture_default_str();
  bench->add_option("--seed", bench_flags.seed, "random seed")->capture_default_str();
  bench->add_option("--restarts", bench_flags.restarts, "K-means random starts")->capture_default_str();
  bench->add_option("--kmax", bench_flags.k_max, "starting K for pruning")->capture_default_str();
  bench->add_option("--kextra", bench_flags.k_extra, "brute force tries K up to k_true + kextra")
      ->capture_default_str();
  bench->add_option("--methods", bench_flags.methods, "methods to run")->delimiter(',');
  bench->add_option("--criteria", bench_flags.criteria, "bic, mmdl")->delimiter(',')->capture_default_str();
  bench->add_option("--penalty", bench_flags.penalty, "invcov | parcor | invcor")
      ->check(CLI::IsMember({"invcov", "parcor", "invcor"}))
      ->capture_default_str();
  bench->add_option("--threads", bench_flags.threads, "replicates run concurrently")->capture_default_str();
  bench->add_flag("--allow-uneven", bench_flags.uneven, "allow p not divisible by K");
  bench->add_option("--out", bench_flags.out, "line-delimited JSON report (default stdout)");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp& e) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e, out, err);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*fit) return cmd_fit(fit_flags, fit_k, fit_method, out);
    if (*prune) return cmd_prune(prune_flags, k_min, k_max, criterion, divergence, out);
    if (*simulate) return cmd_simulate(sim_flags, out);
    if (*eval) return cmd_eval(eval_model, eval_data, eval_delim, eval_header, eval_out, out);
    if (*bench) return cmd_bench(bench_flags, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const StateCollapse& e) {
    err << "error: " << e.what() << '\n';
    return kStateCollapse;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return kNumericFailure;
  } catch (const std::invalid_argument& e) {
    err << "error: " << e.what() << '\n';
    return kUsageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kNumericFailure;
  }
  return kUsageError;
}

}  // namespace hmmgl::cli
