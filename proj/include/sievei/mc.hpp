#pragma once

#include <optional>

#include "sievei/bootstrap.hpp"

namespace sievei {

struct DGPSpec {
  ModelKind kind = ModelKind::NPIV;
  double gamma = 0.5;  // NPQIV quantile
  Eigen::Index n = 750;
  std::uint64_t seed = 1;

  void validate() const {
    if (n < 10) throw ConfigError("DGPSpec: n must be >= 10");
  }
};

// One draw of the simulation design: (Y2*, X*, U*) trivariate normal with
// corr(Y2*,X*) = 0.8, corr(Y2*,U*) = 0.5, corr(X*,U*) = 0; Y2 and X mapped
// into (-1,1) by 2(Phi(./3) - 0.5); h0(y) = 2 sin(pi y). NPIV adds 0.76 U*;
// NPQIV adds U = 2(Phi(U*) - gamma) so that Pr(U <= 0 | X) = gamma.
Dataset gen_dgp(const DGPSpec& spec, RngStream& rng);

struct BootConfig {
  WeightScheme scheme;
  int B = 200;
};

struct ExperimentConfig {
  DGPSpec dgp;
  std::string qbasis = "pol:4";
  std::string pbasis = "pol:7";
  double lambda = 2e-4;
  FunctionalKind functional = FunctionalKind::PointEval;
  double ybar = 0.0;
  double phi0 = 0.0;
  int reps = 500;
  std::optional<BootConfig> boot;
  std::vector<double> levels = {0.10, 0.05, 0.01};
  OptimConfig optim;
  int threads = 0;
};

// Builds the per-replication model: bases resolved against the drawn sample,
// optimal weighting for NPQIV (gamma(1-gamma)), identity for NPIV.
ModelSpec resolve_model(const ExperimentConfig& cfg, const Dataset& data);

struct SizeResult {
  std::vector<double> levels;
  std::vector<double> rejection;
  std::vector<double> se;  // binomial standard errors
  int reps_used = 0;
  int excluded = 0;
};

// SQLR size: test the true null phi(h0) = phi0 per replication against the
// chi^2_1 critical values (optimal weighting).
SizeResult run_size_experiment(const ExperimentConfig& cfg);

struct VarianceResult {
  double mc_variance = 0.0;  // Var_MC(sqrt(n) phi_hat), the reference
  double med_v1 = 0.0;       // Med_MC |V1/ref - 1|
  double med_v2 = 0.0;
  std::vector<double> levels;  // t-test levels (5%, 10%)
  std::vector<double> rej_t1, rej_t2, se;
  double ks_t1 = 0.0, ks_t2 = 0.0;
  std::vector<double> t1, t2;  // raw statistics (QQ export)
  int reps_used = 0;
  int excluded = 0;
};

// Sieve t with the two plug-in variance estimators; pass 1 collects
// phi_hat per replication for the MC-variance reference, pass 2 turns the
// stored V1/V2/t statistics into the table.
VarianceResult run_variance_experiment(const ExperimentConfig& cfg);

struct PowerResult {
  std::vector<double> r_grid;
  std::vector<double> levels;
  Mat rej_asym;  // |r_grid| x |levels|
  Mat rej_boot;
  int reps_used = 0;
  int excluded = 0;
};

// SQLR and bootstrap-SQLR rejection rates of H0: phi(h0) = r on
// null-generated data (size at r = 0, power elsewhere).
PowerResult run_power_curve(const ExperimentConfig& cfg,
                            const std::vector<double>& r_grid);

struct QQData {
  Vec theoretical;  // Phi^-1((i - 0.5)/m)
  Vec empirical;    // sorted statistics
  double ks = 0.0;  // Kolmogorov-Smirnov distance to N(0,1)
};

QQData qq_data(const std::vector<double>& stats);

}  // namespace sievei
