#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include <json.hpp>

#include "fmala/chain_io.hpp"
#include "fmala/experiments.hpp"

using namespace fmala;

namespace {

std::filesystem::path scratch(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / "fmala_exp_test" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

const char* kTinyGauss =
    "experiment = gaussian-sanity\n"
    "name = tiny\n"
    "seed = 5\n"
    "[run]\n"
    "samplers = fishermala, pcn\n"
    "burn_in = 1200\n"
    "collection = 800\n"
    "workers = 2\n"
    "[adapt]\n"
    "init_phase = 300\n"
    "[target]\n"
    "dim = 4\n"
    "cov = ar1\n"
    "cov_rho = 0.4\n"
    "[pcn]\n"
    "beta = 0.5\n"
    "[diagnostics]\n"
    "lag = 80\n";

}  // namespace

TEST_CASE("gaussian problem builder: posterior form reproduces the target moments") {
  auto cfg = ExperimentConfig::from_text(kTinyGauss);
  const GaussianProblem problem = build_gaussian_problem(cfg);
  // the posterior construction must have mean zero and covariance sigma
  const auto* posterior = dynamic_cast<const Posterior*>(problem.target.get());
  REQUIRE(posterior != nullptr);
  const auto& linear = dynamic_cast<const LinearForwardModel&>(posterior->forward());
  const LinearGaussianPosterior analytic = linear_posterior_moments(
      linear.matrix(), posterior->prior(), posterior->noise(), posterior->data());
  CHECK(analytic.mean().norm() < 1e-12);
  CHECK((analytic.covariance() - problem.sigma).norm() / problem.sigma.norm() < 1e-10);
}

TEST_CASE("heat problem builder wires the dataset, priors and analytic posterior") {
  auto cfg = ExperimentConfig::from_text(
      "experiment = heat-source\nseed = 2\n[run]\nburn_in = 1000\ncollection = 500\n"
      "[forward]\nnx = 30\nnt = 20\n[diagnostics]\nlag = 60\n");
  const HeatProblem problem = build_heat_problem(cfg);
  CHECK(problem.data.y.size() == 30);
  CHECK(problem.data.truth.size() == 30);
  CHECK(problem.data.nx_data == 61);
  // pCN prior is the correlated one, the MALA-family prior is isotropic
  CHECK(problem.posterior_pcn->prior().covariance()(0, 1) != 0.0);
  CHECK(problem.posterior_iso->prior().covariance()(0, 1) == 0.0);
  // analytic moments agree with a direct assembly
  const LinearGaussianPosterior analytic = problem.analytic_posterior();
  CHECK(analytic.covariance().rows() == 30);
  // the posterior mean should already be a decent reconstruction
  CHECK(relative_error(analytic.mean(), problem.data.truth) < 5.0);
}

TEST_CASE("neumann problem builder solves near the truth") {
  auto cfg = ExperimentConfig::from_text(
      "experiment = neumann-id\nseed = 3\n[run]\nburn_in = 800\ncollection = 400\n"
      "[adapt]\ninit_phase = 100\n[diagnostics]\nlag = 50\n");
  const NeumannProblem problem = build_neumann_problem(cfg);
  CHECK(problem.data.truth.size() == 3);
  // at the truth the misfit is pure noise: Phi ~ n/2 in expectation
  const double phi = problem.posterior->potential(problem.data.truth);
  CHECK(phi > 20.0);
  CHECK(phi < 120.0);
  // noise override produces a different dataset
  const NeumannProblem louder = build_neumann_problem(cfg, 0.05);
  CHECK((louder.data.y - problem.data.y).norm() > 0.0);
}

TEST_CASE("neumann posterior score agrees with finite differences of the log density") {
  auto cfg = ExperimentConfig::from_text(
      "experiment = neumann-id\nseed = 3\n[run]\nburn_in = 800\ncollection = 400\n"
      "[diagnostics]\nlag = 50\n");
  const NeumannProblem problem = build_neumann_problem(cfg);
  Vector theta(3);
  theta << 1.9, 0.9, 1.05;
  const TargetEval ev = problem.posterior->evaluate(theta);
  const double step = 1e-5;
  for (int i = 0; i < 3; ++i) {
    Vector hi = theta, lo = theta;
    hi[i] += step;
    lo[i] -= step;
    const double fd = (problem.posterior->evaluate(hi).log_density -
                       problem.posterior->evaluate(lo).log_density) /
                      (2.0 * step);
    CHECK(std::abs(ev.score[i] - fd) <= 1e-3 * std::abs(fd));
  }
}

TEST_CASE("summarize_chain fills the comparison fields") {
  Matrix sigma(3, 3);
  sigma.setIdentity();
  const GaussianScoreTarget target(Vector::Zero(3), sigma);
  ChainSettings s;
  s.kind = SamplerKind::FisherMala;
  s.burn_in = 900;
  s.collection = 600;
  const ChainRecord rec = run_chain(target, s, 8);
  SummaryRefs refs;
  refs.covariance = &sigma;
  const SamplerSummary summary = summarize_chain(rec, 60, refs);
  CHECK(summary.err_pct > 0.0);
  CHECK(summary.ess_monolithic > 0.0);
  CHECK(summary.ess_monolithic <= 600.0 * (1 + 1e-9));
  CHECK(summary.accept_rate > 0.3);
  CHECK(summary.posterior_mean.size() == 3);
  CHECK(summary.ci_low.size() == 3);
  for (int i = 0; i < 3; ++i) CHECK(summary.ci_low[i] < summary.ci_high[i]);
}

TEST_CASE("empirical quantiles bracket the median") {
  Matrix samples(101, 1);
  for (int i = 0; i <= 100; ++i) samples(i, 0) = double(i);
  CHECK(empirical_quantile(samples, 0.5)[0] == doctest::Approx(50.0));
  CHECK(empirical_quantile(samples, 0.025)[0] == doctest::Approx(2.5));
  CHECK(empirical_quantile(samples, 0.975)[0] == doctest::Approx(97.5));
}

TEST_CASE("run_experiment writes the full artifact set and reproduces digests") {
  const auto out = scratch("artifacts");
  const auto cfg = ExperimentConfig::from_text(kTinyGauss);
  const RunResult result = run_experiment(cfg, out);
  CHECK(result.summaries.size() == 2);
  CHECK(std::filesystem::exists(result.dir / "config.ini"));
  CHECK(std::filesystem::exists(result.dir / "summary.json"));
  CHECK(std::filesystem::exists(result.dir / "summary.csv"));
  CHECK(std::filesystem::exists(result.dir / "fishermala-r0.chain"));
  CHECK(std::filesystem::exists(result.dir / "fishermala-r0.chain.meta.json"));
  CHECK(std::filesystem::exists(result.dir / "pcn-r0.chain"));

  // chains reload and carry the config hash
  const LoadedChain loaded = read_chain(result.dir / "fishermala-r0.chain");
  CHECK(loaded.config_hash == cfg.hash);

  // rerunning the same config overwrites with identical payloads
  const RunResult again = run_experiment(cfg, out);
  for (std::size_t i = 0; i < result.summaries.size(); ++i) {
    CHECK(result.summaries[i].digest == again.summaries[i].digest);
  }

  // diagnose produces reports next to the chain
  diagnose_chain_file(result.dir / "fishermala-r0.chain", 50);
  CHECK(std::filesystem::exists(result.dir / "fishermala-r0.diag.json"));
  CHECK(std::filesystem::exists(result.dir / "fishermala-r0.acf.csv"));
  CHECK(std::filesystem::exists(result.dir / "fishermala-r0.ess_time.csv"));

  // table aggregation over the summary
  const std::string csv = aggregate_table({result.dir / "summary.json"});
  CHECK(csv.find("fishermala") != std::string::npos);
  CHECK(csv.find("pcn") != std::string::npos);
}

TEST_CASE("summary errors are recomputable from the stored chain and truth") {
  const auto out = scratch("recompute");
  const auto cfg = ExperimentConfig::from_text(
      "experiment = heat-source\nseed = 6\n[run]\nsamplers = fishermala\n"
      "burn_in = 1200\ncollection = 600\n[forward]\nnx = 24\nnt = 16\n"
      "[diagnostics]\nlag = 60\n");
  const RunResult result = run_experiment(cfg, out);
  REQUIRE(result.summaries.size() == 1);

  // the dataset serializes with seed, noise level, grid metadata and truth
  std::ifstream dataset_in(result.dir / "dataset.json");
  REQUIRE(dataset_in.good());
  nlohmann::json dataset;
  dataset_in >> dataset;
  CHECK(dataset.at("format") == "fmala-dataset");
  CHECK(dataset.at("nx_data") == 49);  // fine grid: 2 (nx + 1) - 1
  CHECK(dataset.at("nx_inverse") == 24);
  CHECK(dataset.at("noise_level") == doctest::Approx(0.01));
  CHECK(dataset.at("truth").size() == 24);
  CHECK(dataset.at("y").size() == 24);

  std::ifstream in(result.dir / "summary.json");
  nlohmann::json doc;
  in >> doc;
  const auto truth_json = doc.at("truth");
  Vector truth(truth_json.size());
  for (std::size_t i = 0; i < truth_json.size(); ++i) truth[i] = truth_json[i];

  const LoadedChain loaded =
      read_chain(result.dir / doc.at("rows")[0].at("chain_file").get<std::string>());
  const double err = relative_error(loaded.record.posterior_mean(), truth);
  CHECK(err == doctest::Approx(doc.at("rows")[0].at("err_pct").get<double>()).epsilon(1e-12));
  CHECK(err == doctest::Approx(result.summaries[0].err_pct).epsilon(1e-12));
}

TEST_CASE("aggregate_table rejects mixed experiments") {
  const auto out = scratch("table_mix");
  const auto gauss = ExperimentConfig::from_text(kTinyGauss);
  const RunResult a = run_experiment(gauss, out);
  const auto heat = ExperimentConfig::from_text(
      "experiment = heat-source\nseed = 2\n[run]\nburn_in = 900\ncollection = 300\n"
      "[forward]\nnx = 20\nnt = 16\n[diagnostics]\nlag = 40\n");
  const RunResult b = run_experiment(heat, out);
  CHECK_THROWS_AS(aggregate_table({a.dir / "summary.json", b.dir / "summary.json"}), ConfigError);
}

TEST_CASE("rate experiment artifact") {
  const auto out = scratch("rate");
  const auto cfg = ExperimentConfig::from_text(
      "experiment = gaussian-rate\nseed = 4\n[target]\ndim = 3\ncov = iso\n"
      "[rate]\nn_max = 2000\nreplicates = 20\ncheckpoints = 8\n");
  const RunResult result = run_experiment(cfg, out);
  REQUIRE(result.rate.has_value());
  CHECK(result.rate->slope < -0.5);
  CHECK(std::filesystem::exists(result.dir / "rate.json"));
  CHECK(std::filesystem::exists(result.dir / "rate.csv"));
}
