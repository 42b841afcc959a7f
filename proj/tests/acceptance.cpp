// Acceptance suite: one check per release criterion, each printing a single
// pass/fail line. Run with no arguments for the full set, or pass criterion
// numbers to run a subset (the heat and Neumann checks share cached chains).

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "fmala/chain_io.hpp"
#include "fmala/experiments.hpp"

using namespace fmala;

namespace {

struct CheckResult {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// shared chain caches

const char* kHeatConfig =
    "experiment = heat-source\n"
    "name = acceptance-heat\n"
    "seed = 20240501\n"
    "[run]\n"
    "samplers = pcn, adamala, fishermala\n"
    "burn_in = 20000\n"
    "collection = 20000\n"
    "replicates = 6\n"
    "[forward]\n"
    "nx = 100\n"
    "nt = 100\n"
    "[adapt]\n"
    "precond_snapshots = 40\n"
    "[pcn]\n"
    "beta = 0.02\n"
    "[diagnostics]\n"
    "lag = 500\n";

std::string neumann_config(double eps) {
  std::ostringstream text;
  text << "experiment = neumann-id\n"
          "name = acceptance-neumann\n"
          "seed = 20240502\n"
          "[run]\n"
          "samplers = pcn, adamala, fishermala\n"
          "burn_in = 20000\n"
          "collection = 20000\n"
          "[adapt]\n"
          "init_phase = 5000\n"
          "[forward]\n"
          "noise_eps = "
       << eps
       << "\n"
          "[pcn]\n"
          "beta = 0.055\n"
          "[diagnostics]\n"
          "lag = 500\n";
  return text.str();
}

struct HeatRuns {
  ExperimentConfig cfg;
  HeatProblem problem;
  std::map<SamplerKind, std::vector<ChainRecord>> records;
};

struct NeumannRuns {
  ExperimentConfig cfg;
  NeumannProblem problem;
  std::map<SamplerKind, ChainRecord> records;
};

struct Context {
  std::optional<HeatRuns> heat;
  std::map<double, NeumannRuns> neumann;

  const HeatRuns& heat_runs() {
    if (!heat) {
      HeatRuns runs{ExperimentConfig::from_text(kHeatConfig), {}, {}};
      runs.problem = build_heat_problem(runs.cfg);
      struct Task {
        SamplerKind kind;
        int rep;
      };
      std::vector<Task> tasks;
      for (const SamplerKind kind : runs.cfg.samplers) {
        for (int rep = 0; rep < runs.cfg.replicates; ++rep) tasks.push_back({kind, rep});
      }
      std::vector<ChainRecord> results(tasks.size());
      std::atomic<std::size_t> next{0};
      const unsigned workers =
          std::min<unsigned>(std::max(std::thread::hardware_concurrency(), 2u),
                             static_cast<unsigned>(tasks.size()));
      std::vector<std::thread> pool;
      for (unsigned w = 0; w < workers; ++w) {
        pool.emplace_back([&]() {
          for (;;) {
            const std::size_t i = next.fetch_add(1);
            if (i >= tasks.size()) return;
            results[i] = run_chain(runs.problem.target_for(tasks[i].kind),
                                   runs.cfg.chain_settings(tasks[i].kind),
                                   derive_seed(runs.cfg.seed, 1000 + i),
                                   runs.problem.init_target_for(tasks[i].kind));
          }
        });
      }
      for (auto& t : pool) t.join();
      for (std::size_t i = 0; i < tasks.size(); ++i) {
        runs.records[tasks[i].kind].push_back(std::move(results[i]));
      }
      heat = std::move(runs);
    }
    return *heat;
  }

  const NeumannRuns& neumann_runs(double eps, bool all_samplers) {
    auto it = neumann.find(eps);
    if (it == neumann.end() || (all_samplers && it->second.records.size() < 3)) {
      NeumannRuns runs{ExperimentConfig::from_text(neumann_config(eps)), {}, {}};
      runs.problem = build_neumann_problem(runs.cfg);
      const std::vector<SamplerKind> kinds =
          all_samplers ? runs.cfg.samplers : std::vector<SamplerKind>{SamplerKind::FisherMala};
      std::vector<ChainRecord> results(kinds.size());
      std::vector<std::thread> pool;
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        pool.emplace_back([&, i]() {
          results[i] = run_chain(runs.problem.target_for(kinds[i]),
                                 runs.cfg.chain_settings(kinds[i]),
                                 derive_seed(runs.cfg.seed, 2000 + i));
        });
      }
      for (auto& t : pool) t.join();
      for (std::size_t i = 0; i < kinds.size(); ++i) {
        runs.records.emplace(kinds[i], std::move(results[i]));
      }
      it = neumann.insert_or_assign(eps, std::move(runs)).first;
    }
    return it->second;
  }

  // Replicate-averaged reconstruction, then its error: the averaging
  // protocol the summary tables use for independent runs.
  double heat_err(SamplerKind kind) {
    const HeatRuns& runs = heat_runs();
    const auto& records = runs.records.at(kind);
    Vector mean = Vector::Zero(runs.problem.data.truth.size());
    for (const ChainRecord& rec : records) mean += rec.posterior_mean();
    mean /= static_cast<double>(records.size());
    return relative_error(mean, runs.problem.data.truth);
  }

  double heat_ess(SamplerKind kind) {
    const HeatRuns& runs = heat_runs();
    double total = 0.0;
    for (const ChainRecord& rec : runs.records.at(kind)) {
      total += ess(rec.collection_samples(), runs.cfg.lag).ess_monolithic;
    }
    return total / static_cast<double>(runs.records.at(kind).size());
  }
};

// ---------------------------------------------------------------------------
// criteria

CheckResult check_sqrt_woodbury(Context&) {
  RandomStream rng(101);
  const double lambda = 10.0;
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const Eigen::Index d = 2 + static_cast<Eigen::Index>(rng.uniform01() * 18.99);
    const int steps = 10 + static_cast<int>(rng.uniform01() * 190.99);
    const double scale = std::pow(10.0, 2.0 * rng.uniform01() - 1.0);
    Matrix r;
    Matrix acc = lambda * Matrix::Identity(d, d);
    for (int n = 0; n < steps; ++n) {
      const Vector s = scale * rng.normal_vector(d);
      acc += s * s.transpose();
      if (n == 0) {
        r = sqrt_precond_init(s, lambda);
      } else {
        sqrt_precond_update_inplace(r, s);
      }
    }
    const Matrix direct = acc.llt().solve(Matrix::Identity(d, d));
    worst = std::max(worst, (r * r.transpose() - direct).norm() / direct.norm());
  }
  std::ostringstream detail;
  detail << "max relative deviation " << worst << " (tolerance 1e-7)";
  return {worst <= 1e-7, detail.str()};
}

CheckResult check_rate(Context&) {
  const Eigen::Index d = 5;
  Matrix sigma(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) {
      sigma(i, j) = std::pow(0.5, std::abs(static_cast<double>(i - j)));
    }
  }
  const GaussianScoreTarget target(Vector::Zero(d), sigma);
  const RateCurve curve = rate_experiment(target, LearningRateSchedule::inverse_n(), 10000, 100,
                                          20240503, 15, 100, 10.0);
  std::ostringstream detail;
  detail << "log-log slope " << curve.slope << " (window [-1.25, -0.75])";
  return {curve.slope >= -1.25 && curve.slope <= -0.75, detail.str()};
}

CheckResult check_acceptance_tuning(Context&) {
  const GaussianScoreTarget target(Vector::Zero(10), Matrix(Matrix::Identity(10, 10)));
  ChainSettings s;
  s.kind = SamplerKind::FisherMala;
  s.burn_in = 20000;
  s.collection = 20000;
  const ChainRecord rec = run_chain(target, s, 20240504);
  const double rate = rec.collection_acceptance();
  std::ostringstream detail;
  detail << "collection acceptance " << rate << " (window [0.524, 0.624])";
  return {rate >= 0.524 && rate <= 0.624, detail.str()};
}

CheckResult check_gaussian_moments(Context&) {
  const auto cfg = ExperimentConfig::from_text(
      "experiment = gaussian-sanity\n"
      "seed = 20240505\n"
      "[run]\n"
      "samplers = fishermala, adamala, pcn\n"
      "burn_in = 20000\n"
      "collection = 20000\n"
      "[target]\n"
      "dim = 10\n"
      "cov = ar1\n"
      "cov_rho = 0.5\n"
      "[pcn]\n"
      "beta = 0.25\n"
      "[diagnostics]\n"
      "lag = 500\n");
  const GaussianProblem problem = build_gaussian_problem(cfg);
  bool pass = true;
  std::ostringstream detail;
  for (std::size_t i = 0; i < cfg.samplers.size(); ++i) {
    const SamplerKind kind = cfg.samplers[i];
    const ChainRecord rec = run_chain(problem.target_for(kind), cfg.chain_settings(kind),
                                      derive_seed(cfg.seed, 3000 + i));
    const EssReport report = ess(rec.collection_samples(), cfg.lag);
    const Vector mean = rec.posterior_mean();
    double worst_mean_z = 0.0;
    for (Eigen::Index j = 0; j < mean.size(); ++j) {
      const double band = 4.0 * std::sqrt(problem.sigma(j, j)) / std::sqrt(report.ess[j]);
      worst_mean_z = std::max(worst_mean_z, std::abs(mean[j]) / band);
    }
    const auto block = rec.collection_samples();
    const Matrix centered = block.rowwise() - mean.transpose();
    const Matrix cov = centered.transpose() * centered / static_cast<double>(block.rows() - 1);
    const double cov_err = (cov - problem.sigma).norm() / problem.sigma.norm();
    const bool ok = worst_mean_z <= 1.0 && cov_err <= 0.15;
    pass = pass && ok;
    detail << to_string(kind) << ": mean |z|max " << worst_mean_z << ", cov rel "
           << cov_err << (ok ? " ok" : " FAIL") << "; ";
  }
  return {pass, detail.str() + "(mean within 4 sd/sqrt(ESS), cov within 15%)"};
}

CheckResult check_heat_errors(Context& ctx) {
  const double pcn = ctx.heat_err(SamplerKind::Pcn);
  const double ada = ctx.heat_err(SamplerKind::AdaMala);
  const double fisher = ctx.heat_err(SamplerKind::FisherMala);
  const bool below = pcn <= 2.5 && ada <= 2.5 && fisher <= 2.5;
  const bool ordered = fisher <= ada + 0.5 && ada <= pcn + 0.5;
  std::ostringstream detail;
  detail << "err% pcn " << pcn << ", adamala " << ada << ", fishermala " << fisher
         << " (each <= 2.5, ordering with 0.5pp slack)";
  return {below && ordered, detail.str()};
}

CheckResult check_heat_precond(Context&) {
  // Runs the adaptation for the figure's full-length burn-in; the curve has
  // an early transient rise, so the contraction is judged against it.
  const auto cfg = ExperimentConfig::from_text(
      "experiment = heat-source\n"
      "seed = 20240507\n"
      "[run]\n"
      "samplers = fishermala\n"
      "burn_in = 100000\n"
      "collection = 1000\n"
      "[forward]\n"
      "nx = 100\n"
      "nt = 100\n"
      "[adapt]\n"
      "precond_snapshots = 40\n"
      "[diagnostics]\n"
      "lag = 500\n");
  const HeatProblem problem = build_heat_problem(cfg);
  const ChainRecord rec = run_chain(problem.target_for(SamplerKind::FisherMala),
                                    cfg.chain_settings(SamplerKind::FisherMala),
                                    derive_seed(cfg.seed, 1500));
  const Matrix reference = problem.analytic_posterior().covariance();
  const auto& trace = rec.precond_trace;
  const auto at_100 = std::find_if(trace.begin(), trace.end(),
                                   [](const auto& s) { return s.update_count == 100; });
  if (at_100 == trace.end() || trace.empty()) {
    return {false, "missing snapshot at update count 100"};
  }
  const Vector curve = precond_convergence(trace, reference);
  const double early = curve[static_cast<Eigen::Index>(at_100 - trace.begin())];
  const double final_err = curve[curve.size() - 1];
  // over the second half of adaptation the curve must have stopped rising
  bool tail_monotone = true;
  for (Eigen::Index i = curve.size() / 2; i + 1 < curve.size(); ++i) {
    tail_monotone = tail_monotone && curve[i + 1] <= 1.05 * curve[i];
  }
  std::ostringstream detail;
  detail << "normalized error " << early << " at n=100 -> " << final_err << " at n="
         << trace.back().update_count << " (final below 25% of early), tail "
         << (tail_monotone ? "non-increasing" : "RISING");
  return {final_err < 0.25 * early && tail_monotone, detail.str()};
}

CheckResult check_neumann(Context& ctx) {
  const NeumannRuns& runs = ctx.neumann_runs(0.01, true);
  const ChainRecord& fisher = runs.records.at(SamplerKind::FisherMala);
  const double err = relative_error(fisher.posterior_mean(), runs.problem.data.truth);

  const Vector lo = empirical_quantile(fisher.collection_samples(), 0.025);
  const Vector hi = empirical_quantile(fisher.collection_samples(), 0.975);
  bool covered = true;
  for (Eigen::Index i = 0; i < lo.size(); ++i) {
    covered = covered && lo[i] <= runs.problem.data.truth[i] &&
              runs.problem.data.truth[i] <= hi[i];
  }

  const double ess_fisher = ess(fisher.collection_samples(), runs.cfg.lag).ess_monolithic;
  const double ess_ada =
      ess(runs.records.at(SamplerKind::AdaMala).collection_samples(), runs.cfg.lag).ess_monolithic;
  const double ess_pcn =
      ess(runs.records.at(SamplerKind::Pcn).collection_samples(), runs.cfg.lag).ess_monolithic;

  const bool pass = err <= 5.0 && covered && ess_fisher > ess_ada && ess_ada > ess_pcn;
  std::ostringstream detail;
  detail << "fisher err " << err << "% (<= 5), CI cover " << (covered ? "yes" : "NO")
         << ", ESS " << ess_fisher << " > " << ess_ada << " > " << ess_pcn;
  return {pass, detail.str()};
}

CheckResult check_ess_calibration(Context&) {
  RandomStream rng(20240506);
  const double phi = 0.9;
  const double innovation = std::sqrt(1.0 - phi * phi);
  double x = rng.normal();
  for (int i = 0; i < 2000; ++i) x = phi * x + innovation * rng.normal();
  Vector series(1000000);
  for (Eigen::Index i = 0; i < series.size(); ++i) {
    x = phi * x + innovation * rng.normal();
    series[i] = x;
  }
  const EssReport report = ess(series, 500);
  const double target = (1.0 + phi) / (1.0 - phi);  // 19
  const double rel = std::abs(report.iat[0] - target) / target;
  std::ostringstream detail;
  detail << "estimated IAT " << report.iat[0] << " vs 19 (relative " << rel << " <= 0.15)";
  return {rel <= 0.15, detail.str()};
}

CheckResult check_noise_stability(Context& ctx) {
  const std::vector<double> levels = {0.05, 0.01, 0.001};
  std::vector<double> errs;
  for (const double eps : levels) {
    const NeumannRuns& runs = ctx.neumann_runs(eps, false);
    const ChainRecord& rec = runs.records.at(SamplerKind::FisherMala);
    errs.push_back(relative_error(rec.posterior_mean(), runs.problem.data.truth));
  }
  const bool pass = errs[1] <= errs[0] + 1.0 && errs[2] <= errs[1] + 1.0;
  std::ostringstream detail;
  detail << "fisher err% " << errs[0] << " (eps 0.05) -> " << errs[1] << " (0.01) -> " << errs[2]
         << " (0.001), non-increasing within 1pp";
  return {pass, detail.str()};
}

CheckResult check_ess_per_sample(Context& ctx) {
  const double fisher = ctx.heat_ess(SamplerKind::FisherMala);
  const double pcn = ctx.heat_ess(SamplerKind::Pcn);
  std::ostringstream detail;
  detail << "monolithic ESS fishermala " << fisher << " vs pcn " << pcn << " (ratio "
         << fisher / pcn << " >= 10)";
  return {fisher >= 10.0 * pcn, detail.str()};
}

struct Criterion {
  int id;
  const char* title;
  std::function<CheckResult(Context&)> check;
};

const std::vector<Criterion> kCriteria = {
    {1, "square-root factor matches the rank-one-updated inverse", check_sqrt_woodbury},
    {2, "online Fisher estimate converges at the 1/n rate", check_rate},
    {3, "step size settles at the target acceptance rate", check_acceptance_tuning},
    {4, "Gaussian mean and covariance recovery for all samplers", check_gaussian_moments},
    {5, "heat-source reconstruction errors and sampler ordering", check_heat_errors},
    {6, "preconditioner approaches the analytic posterior covariance", check_heat_precond},
    {7, "Neumann identification accuracy, coverage and ESS ordering", check_neumann},
    {8, "IAT estimator calibrated on an AR(1) chain", check_ess_calibration},
    {9, "reconstruction error stable as the noise level decreases", check_noise_stability},
    {10, "ESS per sample beats the prior-reversible baseline tenfold", check_ess_per_sample},
};

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  for (int i = 1; i < argc; ++i) selected.insert(std::atoi(argv[i]));

  Context ctx;
  int failures = 0;
  for (const Criterion& criterion : kCriteria) {
    if (!selected.empty() && !selected.count(criterion.id)) continue;
    CheckResult result;
    try {
      result = criterion.check(ctx);
    } catch (const std::exception& err) {
      result = {false, std::string("exception: ") + err.what()};
    }
    std::printf("[%s] criterion %2d: %s — %s\n", result.pass ? "PASS" : "FAIL", criterion.id,
                criterion.title, result.detail.c_str());
    std::fflush(stdout);
    if (!result.pass) ++failures;
  }
  return failures == 0 ? 0 : 1;
}
