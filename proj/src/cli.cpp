#include "sievei/cli.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iostream>
#include <sstream>

#include "sievei/mc.hpp"
#include "sievei/parallel.hpp"
#include "sievei/prob.hpp"

namespace sievei {

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitNumeric = 3;

struct CommonModelFlags {
  std::string data_path;
  std::string cols = "y1,y2,x";
  std::string model = "npiv";
  double gamma = 0.5;
  std::string qbasis = "pol:4";
  std::string pbasis = "pol:7";
  double lambda = 1e-5;
  std::string weighting = "default";
  bool tensor_x = false;
  bool numeric_deriv = false;
  std::uint64_t seed = 12345;
  int threads = 0;
  int restarts = 5;
  int max_iters = 2000;
  double xtol = 1e-8;
  double ftol = 1e-10;
};

// Flat key=value config support. CLI11 2.x does not process per-subcommand
// config files, so the file is expanded into --key=value tokens placed right
// after the subcommand name; later command-line flags override them under
// the take-last policy, and unknown keys fail the parse.
std::vector<std::string> expand_config(std::vector<std::string> args) {
  std::vector<std::string> out;
  std::vector<std::string> from_file;
  for (size_t i = 0; i < args.size(); ++i) {
    std::string file;
    if (args[i] == "--config") {
      if (i + 1 >= args.size())
        throw ConfigError("--config needs a file path");
      file = args[++i];
    } else if (args[i].rfind("--config=", 0) == 0) {
      file = args[i].substr(9);
    } else {
      out.push_back(args[i]);
      continue;
    }
    std::ifstream in(file);
    if (!in) throw ConfigError("cannot open config file: " + file);
    std::string line;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty() || line[0] == '#') continue;
      const auto eq = line.find('=');
      if (eq == std::string::npos)
        throw ConfigError("config line is not key=value: " + line);
      const std::string key = line.substr(0, eq);
      if (key.empty() || key == "config")
        throw ConfigError("bad config key: " + line);
      from_file.push_back("--" + key + "=" + line.substr(eq + 1));
    }
  }
  if (!from_file.empty() && !out.empty())
    out.insert(out.begin() + 1, from_file.begin(), from_file.end());
  return out;
}

void add_model_flags(CLI::App* cmd, CommonModelFlags& f) {
  cmd->add_option("--data", f.data_path, "input CSV file")->required();
  cmd->add_option("--cols", f.cols,
                  "column names: y1,y2,x[,x2,...] (default y1,y2,x)");
  cmd->add_option("--model", f.model, "npiv or npqiv")
      ->check(CLI::IsMember({"npiv", "npqiv"}));
  cmd->add_option("--gamma", f.gamma, "NPQIV quantile in (0,1)");
  cmd->add_option("--qbasis", f.qbasis, "structural basis, pol:J or pspline:r:k");
  cmd->add_option("--pbasis", f.pbasis, "instrument basis, pol:J or pspline:r:k");
  cmd->add_option("--lambda", f.lambda, "penalty weight");
  cmd->add_option("--weighting", f.weighting,
                  "default|identity|optimal|sigma0|known:<v>");
  cmd->add_flag("--tensor-x", f.tensor_x, "tensor-product instruments");
  cmd->add_flag("--numeric-deriv", f.numeric_deriv,
                "NPQIV smoothed-indicator derivative");
  cmd->add_option("--seed", f.seed, "random seed");
  cmd->add_option("--threads", f.threads, "worker threads (0: auto)");
  cmd->add_option("--restarts", f.restarts, "simplex restarts");
  cmd->add_option("--max-iters", f.max_iters, "simplex iteration cap");
  cmd->add_option("--xtol", f.xtol, "simplex point tolerance");
  cmd->add_option("--ftol", f.ftol, "simplex value tolerance");
}

ColumnSchema parse_cols(const std::string& text) {
  std::vector<std::string> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) parts.push_back(item);
  if (parts.size() < 3)
    throw ConfigError("--cols needs at least y1,y2,x names");
  ColumnSchema schema;
  schema.y1 = parts[0];
  schema.y2 = parts[1];
  schema.x.assign(parts.begin() + 2, parts.end());
  return schema;
}

ModelSpec build_model(const CommonModelFlags& f, const Dataset& data) {
  ModelSpec spec;
  spec.kind = (f.model == "npqiv") ? ModelKind::NPQIV : ModelKind::NPIV;
  spec.gamma = f.gamma;
  spec.qbasis = parse_basis(f.qbasis, data.y2);
  spec.pbasis = parse_basis(f.pbasis, data.x.col(0));
  spec.lambda = f.lambda;
  spec.tensor_x = f.tensor_x;
  spec.numeric_derivative = f.numeric_deriv;
  if (f.weighting == "default") {
    if (spec.kind == ModelKind::NPQIV) {
      spec.weighting = WeightingRule::KnownScalar;
      spec.known_sigma_sq = spec.gamma * (1.0 - spec.gamma);
    } else {
      spec.weighting = WeightingRule::Identity;
    }
  } else if (f.weighting == "identity") {
    spec.weighting = WeightingRule::Identity;
  } else if (f.weighting == "optimal") {
    if (spec.kind == ModelKind::NPQIV) {
      spec.weighting = WeightingRule::KnownScalar;
      spec.known_sigma_sq = spec.gamma * (1.0 - spec.gamma);
    } else {
      spec.weighting = WeightingRule::SeriesSigma0;
    }
  } else if (f.weighting == "sigma0") {
    spec.weighting = WeightingRule::SeriesSigma0;
  } else if (f.weighting.rfind("known:", 0) == 0) {
    spec.weighting = WeightingRule::KnownScalar;
    spec.known_sigma_sq = std::atof(f.weighting.c_str() + 6);
  } else {
    throw ConfigError("unknown --weighting: " + f.weighting);
  }
  spec.validate();
  return spec;
}

OptimConfig build_optim(const CommonModelFlags& f) {
  OptimConfig oc;
  oc.max_iters = f.max_iters;
  oc.restarts = f.restarts;
  oc.xtol = f.xtol;
  oc.ftol = f.ftol;
  oc.seed = f.seed;
  oc.validate();
  return oc;
}

bool model_weighting_is_optimal(const ModelSpec& spec) {
  if (spec.weighting == WeightingRule::SeriesSigma0) return true;
  if (spec.kind == ModelKind::NPQIV &&
      spec.weighting == WeightingRule::KnownScalar)
    return std::fabs(spec.known_sigma_sq - spec.gamma * (1.0 - spec.gamma)) <
           1e-12;
  return false;
}

Weight make_weight(const std::string& preset, const Vec& y2) {
  std::vector<double> sorted(y2.data(), y2.data() + y2.size());
  std::sort(sorted.begin(), sorted.end());
  if (preset == "gauss") return Weight::trunc_gauss_from(y2);
  if (preset == "uniform")
    return Weight::uniform(empirical_quantile(sorted, 0.01),
                           empirical_quantile(sorted, 0.99));
  if (preset == "iqr")
    return Weight::uniform(empirical_quantile(sorted, 0.25),
                           empirical_quantile(sorted, 0.75));
  throw ConfigError("unknown --weight preset: " + preset);
}

// ---------------------------------------------------------------- fit ----

struct FitFlags {
  CommonModelFlags common;
  std::string out = "fit_report.csv";
  std::string curve_out;
  int grid = 101;
};

int do_fit(const FitFlags& flags) {
  const Dataset data = load_dataset(flags.common.data_path,
                                    parse_cols(flags.common.cols));
  const ModelSpec spec = build_model(flags.common, data);
  const OptimConfig oc = build_optim(flags.common);
  const FitResult fr = fit(spec, data, oc);

  std::vector<std::pair<std::string, Cell>> kv;
  kv.emplace_back("model", flags.common.model);
  if (spec.kind == ModelKind::NPQIV) kv.emplace_back("gamma", spec.gamma);
  kv.emplace_back("qbasis", basis_to_string(spec.qbasis));
  kv.emplace_back("pbasis", basis_to_string(spec.pbasis));
  kv.emplace_back("lambda", spec.lambda);
  kv.emplace_back("n", static_cast<double>(data.n));
  kv.emplace_back("qhat", fr.qhat);
  kv.emplace_back("penalized_value", fr.penalized_value);
  kv.emplace_back("iterations", static_cast<double>(fr.iterations));
  kv.emplace_back("converged", fr.converged ? std::string("true")
                                            : std::string("false"));
  kv.emplace_back("method", fr.method == FitMethod::ClosedForm
                                ? std::string("closed-form")
                                : std::string("simplex"));
  for (Eigen::Index j = 0; j < fr.beta.size(); ++j)
    kv.emplace_back("beta_" + std::to_string(j), fr.beta(j));
  write_kv(kv, flags.out);

  // h evaluated on a grid over the support.
  const std::string curve_path =
      flags.curve_out.empty() ? flags.out + ".curve.csv" : flags.curve_out;
  Table curve;
  curve.columns = {"y2", "h"};
  const auto& qb = spec.qbasis;
  Vec ys(flags.grid);
  for (int i = 0; i < flags.grid; ++i)
    ys(i) = qb.support_lo +
            (qb.support_hi - qb.support_lo) * i / (flags.grid - 1.0);
  const Vec hs = eval_basis(qb, ys, 0) * fr.beta;
  for (int i = 0; i < flags.grid; ++i)
    curve.add_row({Cell{ys(i)}, Cell{hs(i)}});
  write_table(curve, curve_path);
  std::cout << "fit report written to " << flags.out << "\n";
  return kExitOk;
}

// --------------------------------------------------------------- test ----

struct TestFlags {
  CommonModelFlags common;
  std::string functional = "eval:0";
  std::string weight_preset = "gauss";
  double null_value = 0.0;
  std::string stat = "sqlr";
  std::string variance = "v1";
  std::string boot = "none";
  int B = 200;
  double level = 0.95;
  bool with_ci = false;
  std::string out = "test_report.csv";
  std::string boot_dist;
};

int do_test(const TestFlags& flags) {
  const Dataset data = load_dataset(flags.common.data_path,
                                    parse_cols(flags.common.cols));
  const ModelSpec spec = build_model(flags.common, data);
  const OptimConfig oc = build_optim(flags.common);
  const Functional functional =
      parse_functional(flags.functional, make_weight(flags.weight_preset,
                                                     data.y2));
  WeightScheme scheme;
  const bool use_boot = flags.boot != "none";
  if (flags.boot == "iid")
    scheme.kind = WeightScheme::Kind::IIDExponential;
  else if (flags.boot == "multinomial")
    scheme.kind = WeightScheme::Kind::Multinomial;
  else if (use_boot)
    throw ConfigError("unknown --boot: " + flags.boot);

  FitProblem prob(spec, data);
  InferenceReport rep;
  std::optional<BootstrapRun> brun;
  double phi_hat = 0.0;

  if (flags.stat == "wald") {
    const FitResult fr = fit_problem(prob, oc);
    phi_hat = value(functional, spec.qbasis, fr.beta);
    double variance_sq;
    if (flags.variance == "slope") {
      variance_sq = slope_variance_problem(prob, fr, functional, -1.0, oc);
    } else {
      const Vec rho = residuals_from_fit(spec, prob.y1, prob.Q * fr.beta);
      const Mat dmhat =
          dmhat_from_parts(spec, prob.y1, prob.Q, fr.beta, prob.cache);
      const Mat D = d_matrix(dmhat, prob.sigma);
      const Vec F = gradient(functional, spec.qbasis, fr.beta);
      Mat middle;
      if (flags.variance == "v2") {
        const SigmaHat sig0 = sigma0_series(spec, data, fr.beta, prob.cache);
        middle = omega_matrix(dmhat, prob.sigma, sig0);
      } else {
        middle = upsilon_matrix(dmhat, prob.sigma, rho);
      }
      variance_sq = variance_plugin(D, middle, F);
    }
    rep = wald_test(fr, functional, spec.qbasis, flags.null_value, variance_sq,
                    data.n, flags.with_ci ? flags.level : 0.0);
    if (use_boot) {
      const BootWaldFlavor flavor = (flags.variance == "v2")
                                        ? BootWaldFlavor::W2
                                        : BootWaldFlavor::W1;
      brun = bootstrap_wald(prob, fr, functional, variance_sq, scheme, flags.B,
                            oc, flavor, flags.common.threads);
      double count = 0, total = 0;
      for (double s : brun->stats)
        if (std::isfinite(s)) {
          ++total;
          if (std::fabs(s) >= std::fabs(rep.statistic)) ++count;
        }
      rep.pvalue = total > 0 ? count / total : 1.0;
    }
  } else if (flags.stat == "sqlr") {
    const SqlrFits fits = sqlr_fits(prob, functional, flags.null_value, oc);
    const FitResult& fr = fits.unrestricted;
    phi_hat = value(functional, spec.qbasis, fr.beta);
    rep = sqlr_test(fits.unrestricted, fits.restricted, data.n,
                    model_weighting_is_optimal(spec));
    if (use_boot) {
      brun = bootstrap_sqlr(prob, fr, functional, scheme, flags.B, oc,
                            flags.common.threads);
      rep.pvalue = brun->pvalue_of(rep.statistic);
      if (flags.with_ci)
        rep.ci = bootstrap_ci(prob, fr, functional, *brun, flags.level, oc);
    } else if (flags.with_ci && rep.method == InferenceMethod::OptSQLR) {
      rep.ci = invert_ci_with_crit(prob, fr, functional,
                                   chi2_quantile_1(flags.level), oc);
    }
  } else if (flags.stat == "score") {
    const FitResult frR =
        fit_restricted_problem(prob, functional, flags.null_value, oc);
    phi_hat = value(functional, spec.qbasis, frR.beta);
    rep = score_test(spec, data, frR, functional, prob.cache);
    if (use_boot) {
      brun = bootstrap_score(spec, data, frR, functional, prob.cache, scheme,
                             flags.B, flags.common.seed);
      double count = 0, total = 0;
      for (double s : brun->stats)
        if (std::isfinite(s)) {
          ++total;
          if (std::fabs(s) >= std::fabs(rep.statistic)) ++count;
        }
      rep.pvalue = total > 0 ? count / total : 1.0;
    }
  } else {
    throw ConfigError("unknown --stat: " + flags.stat);
  }

  std::vector<std::pair<std::string, Cell>> kv;
  kv.emplace_back("method", method_name(rep.method));
  kv.emplace_back("statistic", rep.statistic);
  kv.emplace_back("null", flags.null_value);
  kv.emplace_back("phi_hat", phi_hat);
  kv.emplace_back("n", static_cast<double>(data.n));
  if (rep.variance) kv.emplace_back("variance", *rep.variance);
  if (rep.pvalue) kv.emplace_back("pvalue", *rep.pvalue);
  if (rep.ci) {
    kv.emplace_back("ci_level", flags.level);
    kv.emplace_back("ci_lo", rep.ci->unbounded_lo
                                 ? Cell{std::string("-inf")}
                                 : Cell{rep.ci->lo});
    kv.emplace_back("ci_hi", rep.ci->unbounded_hi ? Cell{std::string("inf")}
                                                  : Cell{rep.ci->hi});
  }
  if (brun) {
    kv.emplace_back("B", static_cast<double>(brun->B));
    kv.emplace_back("boot_failures", static_cast<double>(brun->failures));
  }
  kv.emplace_back("seed", static_cast<double>(flags.common.seed));
  write_kv(kv, flags.out);

  if (brun && !flags.boot_dist.empty()) {
    Table t;
    t.columns = {"replication", "statistic"};
    for (size_t b = 0; b < brun->stats.size(); ++b)
      t.add_row({Cell{static_cast<double>(b)}, Cell{brun->stats[b]}});
    write_table(t, flags.boot_dist);
  }
  std::cout << "test report written to " << flags.out << "\n";
  return kExitOk;
}

// ----------------------------------------------------------------- mc ----

struct McFlags {
  std::string design;
  int reps = -1;
  int B = -1;
  Eigen::Index n = 750;
  std::uint64_t seed = 1;
  std::string qbasis, pbasis;
  double lambda = -1.0;
  double gamma = 0.5;
  std::string boot = "multinomial";
  bool full = false;
  int threads = 0;
  std::string out = "mc_table.csv";
  std::string qq_out;
};

int do_mc(const McFlags& flags) {
  ExperimentConfig cfg;
  cfg.dgp.n = flags.n;
  cfg.dgp.seed = flags.seed;
  cfg.dgp.gamma = flags.gamma;
  cfg.threads = flags.threads;
  cfg.optim.seed = flags.seed;

  auto pick = [](const std::string& v, const std::string& dflt) {
    return v.empty() ? dflt : v;
  };

  if (flags.design == "npqiv-sqlr") {
    cfg.dgp.kind = ModelKind::NPQIV;
    cfg.qbasis = pick(flags.qbasis, "pol:4");
    cfg.pbasis = pick(flags.pbasis, "pol:7");
    cfg.lambda = flags.lambda >= 0.0 ? flags.lambda : 2e-4;
    cfg.reps = flags.reps > 0 ? flags.reps : (flags.full ? 5000 : 500);
    cfg.functional = FunctionalKind::PointEval;
    cfg.phi0 = 0.0;
    const SizeResult res = run_size_experiment(cfg);
    Table t;
    t.columns = {"qbasis", "pbasis", "lambda", "rej_10", "rej_5", "rej_1",
                 "se_10", "se_5", "se_1", "reps", "excluded"};
    t.add_row({Cell{cfg.qbasis}, Cell{cfg.pbasis}, Cell{cfg.lambda},
               Cell{res.rejection[0]}, Cell{res.rejection[1]},
               Cell{res.rejection[2]}, Cell{res.se[0]}, Cell{res.se[1]},
               Cell{res.se[2]}, Cell{static_cast<double>(res.reps_used)},
               Cell{static_cast<double>(res.excluded)}});
    write_table(t, flags.out);
  } else if (flags.design == "npiv-ve" ||
             flags.design == "npiv-ve-nonlinear") {
    const bool nonlinear = flags.design == "npiv-ve-nonlinear";
    cfg.dgp.kind = ModelKind::NPIV;
    cfg.qbasis = pick(flags.qbasis, "pol:4");
    cfg.pbasis = pick(flags.pbasis, nonlinear ? "pol:6" : "pol:16");
    cfg.lambda = flags.lambda >= 0.0 ? flags.lambda : 1e-5;
    cfg.reps = flags.reps > 0 ? flags.reps : (flags.full ? 5000 : 500);
    cfg.functional =
        nonlinear ? FunctionalKind::ExpPointEval : FunctionalKind::PointEval;
    cfg.phi0 = nonlinear ? 1.0 : 0.0;
    const VarianceResult res = run_variance_experiment(cfg);
    Table t;
    t.columns = {"qbasis",  "pbasis",  "med_v1",  "med_v2",  "rej5_v1",
                 "rej5_v2", "rej10_v1", "rej10_v2", "se_5",   "se_10",
                 "ks_t1",   "ks_t2",   "mc_variance", "reps", "excluded"};
    t.add_row({Cell{cfg.qbasis}, Cell{cfg.pbasis}, Cell{res.med_v1},
               Cell{res.med_v2}, Cell{res.rej_t1[0]}, Cell{res.rej_t2[0]},
               Cell{res.rej_t1[1]}, Cell{res.rej_t2[1]}, Cell{res.se[0]},
               Cell{res.se[1]}, Cell{res.ks_t1}, Cell{res.ks_t2},
               Cell{res.mc_variance}, Cell{static_cast<double>(res.reps_used)},
               Cell{static_cast<double>(res.excluded)}});
    write_table(t, flags.out);
    if (!flags.qq_out.empty()) {
      const QQData q1 = qq_data(res.t1);
      const QQData q2 = qq_data(res.t2);
      Table qq;
      qq.columns = {"theoretical", "t1", "t2"};
      for (Eigen::Index i = 0; i < q1.theoretical.size(); ++i)
        qq.add_row({Cell{q1.theoretical(i)}, Cell{q1.empirical(i)},
                    Cell{q2.empirical(i)}});
      write_table(qq, flags.qq_out);
    }
  } else if (flags.design == "power") {
    cfg.dgp.kind = ModelKind::NPQIV;
    cfg.qbasis = pick(flags.qbasis, "pol:4");
    cfg.pbasis = pick(flags.pbasis, "pol:7");
    cfg.lambda = flags.lambda >= 0.0 ? flags.lambda : 2e-4;
    cfg.reps = flags.reps > 0 ? flags.reps : (flags.full ? 1000 : 300);
    cfg.functional = FunctionalKind::PointEval;
    cfg.levels = {0.05, 0.01};
    BootConfig bc;
    bc.B = flags.B > 0 ? flags.B : (flags.full ? 500 : 200);
    bc.scheme.kind = flags.boot == "iid" ? WeightScheme::Kind::IIDExponential
                                         : WeightScheme::Kind::Multinomial;
    cfg.boot = bc;
    std::vector<double> grid;
    const double scale = 1.0 / std::sqrt(static_cast<double>(cfg.dgp.n));
    for (int i = 0; i <= 4; ++i) grid.push_back(2.0 * i * scale);
    const PowerResult res = run_power_curve(cfg, grid);
    Table t;
    t.columns = {"r",          "rej_sqlr_5", "rej_boot_5",
                 "rej_sqlr_1", "rej_boot_1", "reps",
                 "excluded"};
    for (size_t g = 0; g < grid.size(); ++g)
      t.add_row({Cell{grid[g]},
                 Cell{res.rej_asym(static_cast<Eigen::Index>(g), 0)},
                 Cell{res.rej_boot(static_cast<Eigen::Index>(g), 0)},
                 Cell{res.rej_asym(static_cast<Eigen::Index>(g), 1)},
                 Cell{res.rej_boot(static_cast<Eigen::Index>(g), 1)},
                 Cell{static_cast<double>(res.reps_used)},
                 Cell{static_cast<double>(res.excluded)}});
    write_table(t, flags.out);
  } else {
    throw ConfigError("unknown --design: " + flags.design);
  }
  std::cout << "mc table written to " << flags.out << "\n";
  return kExitOk;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"sievei: penalized sieve minimum distance estimation and "
               "inference for NPIV / NPQIV models"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);
  app.footer("Every subcommand accepts --config FILE, a flat key=value file "
             "whose keys are the long option names; command-line flags "
             "override file values.");

  FitFlags fit_flags;
  auto* fit_cmd = app.add_subcommand("fit", "estimate h by PSMD");
  add_model_flags(fit_cmd, fit_flags.common);
  fit_cmd->add_option("--out", fit_flags.out, "report path");
  fit_cmd->add_option("--curve-out", fit_flags.curve_out,
                      "fitted-curve CSV path");
  fit_cmd->add_option("--grid", fit_flags.grid, "curve grid points");

  TestFlags test_flags;
  auto* test_cmd = app.add_subcommand("test", "test H0: phi(h) = null");
  add_model_flags(test_cmd, test_flags.common);
  test_cmd->add_option("--functional", test_flags.functional,
                       "eval:Y | expeval:Y | wderiv | quad | curv");
  test_cmd->add_option("--weight", test_flags.weight_preset,
                       "weight preset for integral functionals: "
                       "gauss|uniform|iqr");
  test_cmd->add_option("--null", test_flags.null_value, "phi0 under H0")
      ->required();
  test_cmd->add_option("--stat", test_flags.stat, "wald|sqlr|score")
      ->check(CLI::IsMember({"wald", "sqlr", "score"}));
  test_cmd->add_option("--variance", test_flags.variance,
                       "wald variance: v1|v2|slope");
  test_cmd->add_option("--boot", test_flags.boot, "none|iid|multinomial");
  test_cmd->add_option("--B", test_flags.B, "bootstrap replications");
  test_cmd->add_option("--level", test_flags.level, "confidence level");
  test_cmd->add_flag("--ci", test_flags.with_ci, "include a confidence set");
  test_cmd->add_option("--out", test_flags.out, "report path");
  test_cmd->add_option("--boot-dist", test_flags.boot_dist,
                       "bootstrap distribution CSV path");

  McFlags mc_flags;
  auto* mc_cmd = app.add_subcommand("mc", "Monte Carlo tables");
  mc_cmd->add_option("--design", mc_flags.design,
                     "npqiv-sqlr|npiv-ve|npiv-ve-nonlinear|power")
      ->required();
  mc_cmd->add_option("--reps", mc_flags.reps, "MC replications");
  mc_cmd->add_option("--B", mc_flags.B, "bootstrap replications (power)");
  mc_cmd->add_option("--n", mc_flags.n, "sample size");
  mc_cmd->add_option("--seed", mc_flags.seed, "random seed");
  mc_cmd->add_option("--qbasis", mc_flags.qbasis, "override structural basis");
  mc_cmd->add_option("--pbasis", mc_flags.pbasis, "override instrument basis");
  mc_cmd->add_option("--lambda", mc_flags.lambda, "override penalty weight");
  mc_cmd->add_option("--gamma", mc_flags.gamma, "NPQIV quantile");
  mc_cmd->add_option("--boot", mc_flags.boot, "iid|multinomial (power)");
  mc_cmd->add_flag("--full", mc_flags.full,
                   "full-scale run (reps=5000, B=500)");
  mc_cmd->add_option("--threads", mc_flags.threads, "worker threads (0: auto)");
  mc_cmd->add_option("--out", mc_flags.out, "table path");
  mc_cmd->add_option("--qq-out", mc_flags.qq_out, "QQ pairs CSV (npiv-ve)");

  try {
    std::vector<std::string> forward;
    for (int i = 1; i < argc; ++i) forward.emplace_back(argv[i]);
    forward = expand_config(std::move(forward));
    std::vector<std::string> args(forward.rbegin(), forward.rend());
    app.parse(args);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*fit_cmd) return do_fit(fit_flags);
    if (*test_cmd) return do_test(test_flags);
    if (*mc_cmd) return do_mc(mc_flags);
    return kExitConfig;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const ParseError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return kExitNumeric;
  }
}

}  // namespace sievei
