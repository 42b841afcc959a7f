#include "fmala/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "fmala/chain_io.hpp"

namespace fmala {

namespace {

using nlohmann::json;

constexpr std::uint64_t kDataStream = 0;
constexpr std::uint64_t kChainStreamBase = 1000;

std::string hex64(std::uint64_t value) {
  char buffer[17];
  std::snprintf(buffer, sizeof(buffer), "%016llx", static_cast<unsigned long long>(value));
  return buffer;
}

json to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path.string());
  out << text;
}

Matrix sample_covariance(const Eigen::Ref<const Matrix>& samples) {
  const Eigen::Index n = samples.rows();
  const Matrix centered = samples.rowwise() - samples.colwise().mean();
  return (centered.transpose() * centered) / static_cast<double>(n - 1);
}

}  // namespace

Matrix squared_exponential_covariance(const Vector& nodes, double gamma, double length) {
  if (!(gamma > 0.0) || !(length > 0.0)) {
    throw std::invalid_argument("squared_exponential_covariance: parameters must be positive");
  }
  const Eigen::Index n = nodes.size();
  Matrix cov(n, n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j <= i; ++j) {
      const double z = (nodes[i] - nodes[j]) / length;
      cov(i, j) = cov(j, i) = gamma * std::exp(-0.5 * z * z);
    }
  }
  cov.diagonal().array() += 1e-10 * gamma;
  return cov;
}

LinearGaussianPosterior HeatProblem::analytic_posterior() const {
  const auto& model = dynamic_cast<const LinearForwardModel&>(posterior_iso->forward());
  return linear_posterior_moments(model.matrix(), posterior_iso->prior(), posterior_iso->noise(),
                                  data.y - model.offset());
}

HeatProblem build_heat_problem(const ExperimentConfig& cfg) {
  HeatProblem problem;
  problem.op = std::make_shared<HeatSourceOperator>(cfg.nx, cfg.nt, cfg.final_time);
  const int fine_nx = cfg.fine_factor * (cfg.nx + 1) - 1;
  const HeatSourceOperator fine(fine_nx, cfg.fine_factor * cfg.nt, cfg.final_time);
  const auto truth = [](double x) { return 2.0 * std::numbers::pi * std::numbers::pi *
                                            std::sin(std::numbers::pi * x); };
  problem.data = heat_synthesize(fine, cfg.nx, truth, cfg.noise_eps,
                                 derive_seed(cfg.seed, kDataStream));

  auto forward = std::make_shared<LinearForwardModel>(problem.op->source_map(),
                                                      problem.op->initial_contribution());
  auto noise = GaussianNoiseModel::isotropic(cfg.nx, cfg.noise_eps * cfg.noise_eps);
  problem.posterior_iso = std::make_shared<Posterior>(
      forward, GaussianPrior::isotropic(cfg.nx, cfg.prior_variance), noise, problem.data.y);
  if (cfg.pcn_prior_correlated) {
    const Matrix cov = squared_exponential_covariance(problem.op->grid(), cfg.pcn_prior_gamma,
                                                      cfg.pcn_prior_length);
    problem.posterior_pcn = std::make_shared<Posterior>(
        forward, GaussianPrior(Vector::Zero(cfg.nx), cov), noise, problem.data.y);
  } else {
    problem.posterior_pcn = problem.posterior_iso;
  }
  return problem;
}

NeumannProblem build_neumann_problem(const ExperimentConfig& cfg,
                                     std::optional<double> eps_override) {
  const double eps = eps_override.value_or(cfg.noise_eps);
  if (!(eps > 0.0)) throw std::invalid_argument("build_neumann_problem: noise level must be positive");
  NeumannProblem problem;
  const Vector theta = cfg.theta_truth;
  // Source chosen so the state at the true parameter is cos(pi x).
  auto source = [theta](double x) {
    const double pi = std::numbers::pi;
    Vector node(1);
    node[0] = x;
    const double q = trig_coefficient(theta, node)[0];
    return q * std::cos(pi * x) + pi * pi * std::cos(pi * x);
  };
  const int basis = static_cast<int>(theta.size());
  problem.model = std::make_shared<NeumannBvpModel>(basis, cfg.nx, source, cfg.fd_step);
  const NeumannBvpModel fine(basis, cfg.fine_factor * cfg.nx, source, cfg.fd_step);
  problem.data = neumann_synthesize(fine, *problem.model, theta, eps,
                                    derive_seed(cfg.seed, kDataStream));
  problem.posterior = std::make_shared<Posterior>(
      problem.model, GaussianPrior::isotropic(basis, cfg.prior_variance),
      GaussianNoiseModel::isotropic(problem.model->output_dim(), eps * eps), problem.data.y);
  return problem;
}

GaussianProblem build_gaussian_problem(const ExperimentConfig& cfg) {
  GaussianProblem problem;
  problem.sigma = cfg.target.covariance();
  const Eigen::Index d = problem.sigma.rows();
  if (cfg.target.as_posterior) {
    // Prior 2 Sigma and noise 2 Sigma with F = I, y = 0 make the posterior
    // exactly N(0, Sigma) while keeping an honest data-misfit term for pCN.
    auto forward = std::make_shared<LinearForwardModel>(Matrix::Identity(d, d));
    problem.target = std::make_shared<Posterior>(
        forward, GaussianPrior(Vector::Zero(d), 2.0 * problem.sigma),
        GaussianNoiseModel(2.0 * problem.sigma), Vector::Zero(d));
  } else {
    problem.target = std::make_shared<GaussianScoreTarget>(Vector::Zero(d), problem.sigma);
  }
  return problem;
}

Vector empirical_quantile(const Eigen::Ref<const Matrix>& samples, double p) {
  if (!(p >= 0.0 && p <= 1.0)) throw std::invalid_argument("empirical_quantile: p outside [0,1]");
  const Eigen::Index n = samples.rows();
  if (n < 2) throw std::invalid_argument("empirical_quantile: need at least two samples");
  Vector out(samples.cols());
  std::vector<double> column(static_cast<std::size_t>(n));
  for (Eigen::Index j = 0; j < samples.cols(); ++j) {
    for (Eigen::Index i = 0; i < n; ++i) column[static_cast<std::size_t>(i)] = samples(i, j);
    std::sort(column.begin(), column.end());
    const double pos = p * static_cast<double>(n - 1);
    const auto lo = static_cast<std::size_t>(pos);
    const std::size_t hi = std::min(lo + 1, column.size() - 1);
    const double w = pos - static_cast<double>(lo);
    out[j] = (1.0 - w) * column[lo] + w * column[hi];
  }
  return out;
}

SamplerSummary summarize_chain(const ChainRecord& record, int lag, const SummaryRefs& refs) {
  SamplerSummary s;
  s.kind = record.kind;
  s.seed = record.seed;
  s.accept_rate = record.collection_acceptance();
  s.esjd_value = esjd(record);
  s.wall_seconds = record.total_seconds();
  s.nan_rejections = record.nan_rejections;
  s.digest = chain_digest(record);
  s.posterior_mean = record.posterior_mean();

  const EssReport report = ess(record.collection_samples(), lag);
  s.ess_monolithic = report.ess_monolithic;
  s.ess_per_dim = report.ess;
  s.iat_per_dim = report.iat;

  if (refs.truth) {
    s.err_pct = relative_error(s.posterior_mean, *refs.truth);
  } else if (refs.covariance) {
    const Matrix cov = sample_covariance(record.collection_samples());
    s.err_pct = (cov - *refs.covariance).norm() / refs.covariance->norm() * 100.0;
  }
  if (record.dim() <= 20) {
    s.ci_low = empirical_quantile(record.collection_samples(), 0.025);
    s.ci_high = empirical_quantile(record.collection_samples(), 0.975);
  }
  return s;
}

namespace {

json summary_to_json(const SamplerSummary& s) {
  json row{{"sampler", to_string(s.kind)},
           {"replicate", s.replicate},
           {"seed", s.seed},
           {"err_pct", s.err_pct},
           {"ess_monolithic", s.ess_monolithic},
           {"accept_rate", s.accept_rate},
           {"esjd", s.esjd_value},
           {"wall_seconds", s.wall_seconds},
           {"nan_rejections", s.nan_rejections},
           {"chain_digest", hex64(s.digest)},
           {"chain_file", s.chain_file}};
  if (s.posterior_mean.size() <= 1000) row["posterior_mean"] = to_json(s.posterior_mean);
  if (s.ess_per_dim.size() <= 1000) {
    row["ess_per_dim"] = to_json(s.ess_per_dim);
    row["iat_per_dim"] = to_json(s.iat_per_dim);
  }
  if (s.ci_low.size() > 0) {
    row["ci_low"] = to_json(s.ci_low);
    row["ci_high"] = to_json(s.ci_high);
  }
  return row;
}

std::string summary_csv(const ExperimentConfig& cfg, const std::vector<SamplerSummary>& rows) {
  std::ostringstream out;
  out << "experiment,sampler,replicate,seed,err_pct,ess_monolithic,accept_rate,esjd,wall_seconds\n";
  out.precision(10);
  for (const auto& s : rows) {
    out << to_string(cfg.experiment) << ',' << to_string(s.kind) << ',' << s.replicate << ','
        << s.seed << ',' << s.err_pct << ',' << s.ess_monolithic << ',' << s.accept_rate << ','
        << s.esjd_value << ',' << s.wall_seconds << '\n';
  }
  return out.str();
}

void write_dataset(const std::filesystem::path& path, const SyntheticDataset& data) {
  json doc{{"format", "fmala-dataset"},
           {"version", 1},
           {"seed", data.seed},
           {"noise_level", data.noise_level},
           {"nx_data", data.nx_data},
           {"nx_inverse", data.nx_inverse},
           {"truth", to_json(data.truth)},
           {"y", to_json(data.y)}};
  write_text(path, doc.dump(2) + "\n");
}

void write_chain_meta(const std::filesystem::path& path, const ExperimentConfig& cfg,
                      const ChainRecord& rec) {
  json meta{{"format", "fmala-chain-meta"},
            {"version", 1},
            {"experiment", to_string(cfg.experiment)},
            {"sampler", to_string(rec.kind)},
            {"seed", rec.seed},
            {"config_hash", hex64(cfg.hash)},
            {"payload_digest", hex64(chain_digest(rec))},
            {"dim", rec.dim()},
            {"total", rec.total()},
            {"init_phase", rec.init_phase},
            {"warmup", rec.warmup},
            {"burn_in", rec.burn_in},
            {"collection", rec.collection},
            {"nan_rejections", rec.nan_rejections},
            {"wall_seconds", rec.total_seconds()}};
  write_text(path, meta.dump(2) + "\n");
}

struct ChainTask {
  SamplerKind kind;
  int replicate;
  std::uint64_t seed;
};

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_root) {
  RunResult result;
  result.dir = out_root / (cfg.name + "-seed" + std::to_string(cfg.seed) + "-" +
                           hex64(cfg.hash).substr(8));
  std::filesystem::create_directories(result.dir);
  write_text(result.dir / "config.ini", cfg.raw_text);

  if (cfg.experiment == ExperimentKind::GaussianRate) {
    const GaussianScoreTarget target(Vector::Zero(cfg.target.dim), cfg.target.covariance());
    const RateCurve curve =
        rate_experiment(target, cfg.rate.schedule, cfg.rate.n_max, cfg.rate.replicates,
                        derive_seed(cfg.seed, kChainStreamBase), cfg.rate.checkpoints,
                        cfg.rate.n_min, cfg.lambda);
    json doc{{"format", "fmala-rate"},
             {"version", 1},
             {"dim", cfg.target.dim},
             {"schedule", cfg.rate.schedule.to_string()},
             {"replicates", cfg.rate.replicates},
             {"seed", cfg.seed},
             {"config_hash", hex64(cfg.hash)},
             {"n", cfg.rate.n_max},
             {"slope", curve.slope},
             {"checkpoints", json::array()}};
    for (std::size_t i = 0; i < curve.n.size(); ++i) {
      doc["checkpoints"].push_back(
          {{"n", curve.n[i]}, {"mse", curve.mse[static_cast<Eigen::Index>(i)]}});
    }
    write_text(result.dir / "rate.json", doc.dump(2) + "\n");
    std::ostringstream csv;
    csv << "n,mse\n";
    csv.precision(12);
    for (std::size_t i = 0; i < curve.n.size(); ++i) {
      csv << curve.n[i] << ',' << curve.mse[static_cast<Eigen::Index>(i)] << '\n';
    }
    write_text(result.dir / "rate.csv", csv.str());
    result.rate = curve;
    return result;
  }

  // Build the problem once; chains share the dataset.
  std::optional<HeatProblem> heat;
  std::optional<NeumannProblem> neumann;
  std::optional<GaussianProblem> gaussian;
  SummaryRefs refs;
  const Matrix* precond_reference = nullptr;
  Matrix analytic_cov;
  switch (cfg.experiment) {
    case ExperimentKind::HeatSource:
      heat.emplace(build_heat_problem(cfg));
      refs.truth = &heat->data.truth;
      analytic_cov = heat->analytic_posterior().covariance();
      precond_reference = &analytic_cov;
      write_dataset(result.dir / "dataset.json", heat->data);
      break;
    case ExperimentKind::NeumannId:
      neumann.emplace(build_neumann_problem(cfg));
      refs.truth = &neumann->data.truth;
      write_dataset(result.dir / "dataset.json", neumann->data);
      break;
    case ExperimentKind::GaussianSanity:
      gaussian.emplace(build_gaussian_problem(cfg));
      refs.covariance = &gaussian->sigma;
      precond_reference = &gaussian->sigma;
      break;
    default:
      break;
  }
  const auto target_for = [&](SamplerKind kind) -> const Target& {
    if (heat) return heat->target_for(kind);
    if (neumann) return neumann->target_for(kind);
    return gaussian->target_for(kind);
  };
  const auto init_target_for = [&](SamplerKind kind) -> const Target* {
    return heat ? heat->init_target_for(kind) : nullptr;
  };

  std::vector<ChainTask> tasks;
  for (std::size_t si = 0; si < cfg.samplers.size(); ++si) {
    for (int rep = 0; rep < cfg.replicates; ++rep) {
      const auto stream = kChainStreamBase + si * static_cast<std::size_t>(cfg.replicates) + rep;
      tasks.push_back({cfg.samplers[si], rep, derive_seed(cfg.seed, stream)});
    }
  }

  std::vector<ChainRecord> records(tasks.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr first_error;
  std::mutex error_mutex;
  const unsigned n_workers = std::min<std::size_t>(
      std::max(1, cfg.workers), std::max<std::size_t>(tasks.size(), 1));
  auto worker = [&]() {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size()) return;
      try {
        records[i] = run_chain(target_for(tasks[i].kind), cfg.chain_settings(tasks[i].kind),
                               tasks[i].seed, init_target_for(tasks[i].kind));
      } catch (...) {
        std::scoped_lock lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < n_workers; ++w) pool.emplace_back(worker);
  for (auto& t : pool) t.join();
  if (first_error) std::rethrow_exception(first_error);

  std::ostringstream precond_csv;
  precond_csv << "sampler,replicate,update_count,frobenius_error\n";
  bool have_precond_rows = false;

  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const ChainRecord& rec = records[i];
    const std::string stem =
        to_string(tasks[i].kind) + "-r" + std::to_string(tasks[i].replicate);
    const auto chain_path = result.dir / (stem + ".chain");
    write_chain(chain_path, rec, cfg.hash);
    write_chain_meta(result.dir / (stem + ".chain.meta.json"), cfg, rec);

    SamplerSummary summary = summarize_chain(rec, cfg.lag, refs);
    summary.replicate = tasks[i].replicate;
    summary.chain_file = chain_path.filename().string();
    result.summaries.push_back(std::move(summary));

    if (precond_reference && !rec.precond_trace.empty()) {
      const Vector curve = precond_convergence(rec.precond_trace, *precond_reference);
      for (std::size_t k = 0; k < rec.precond_trace.size(); ++k) {
        precond_csv << to_string(tasks[i].kind) << ',' << tasks[i].replicate << ','
                    << rec.precond_trace[k].update_count << ','
                    << curve[static_cast<Eigen::Index>(k)] << '\n';
        have_precond_rows = true;
      }
    }
  }
  if (have_precond_rows) write_text(result.dir / "precond_curve.csv", precond_csv.str());

  json doc{{"format", "fmala-summary"},
           {"version", 1},
           {"experiment", to_string(cfg.experiment)},
           {"name", cfg.name},
           {"seed", cfg.seed},
           {"config_hash", hex64(cfg.hash)},
           {"rows", json::array()}};
  if (refs.truth) doc["truth"] = to_json(*refs.truth);
  for (const auto& s : result.summaries) doc["rows"].push_back(summary_to_json(s));
  write_text(result.dir / "summary.json", doc.dump(2) + "\n");
  write_text(result.dir / "summary.csv", summary_csv(cfg, result.summaries));
  return result;
}

void diagnose_chain_file(const std::filesystem::path& chain_path, int lag,
                         std::optional<std::filesystem::path> out_dir,
                         std::optional<int> acf_dim) {
  const LoadedChain loaded = read_chain(chain_path);
  const ChainRecord& rec = loaded.record;
  if (rec.collection <= lag) {
    throw std::invalid_argument("diagnose: lag must be smaller than the collection phase");
  }
  const auto dir = out_dir.value_or(chain_path.parent_path());
  std::filesystem::create_directories(dir);
  const std::string stem = chain_path.stem().string();

  const auto block = rec.collection_samples();
  const EssReport report = ess(block, lag);

  json doc{{"format", "fmala-diagnostics"},
           {"version", 1},
           {"chain_file", chain_path.filename().string()},
           {"config_hash", hex64(loaded.config_hash)},
           {"payload_digest", hex64(chain_digest(rec))},
           {"sampler", to_string(rec.kind)},
           {"dim", rec.dim()},
           {"collection", rec.collection},
           {"lag", lag},
           {"accept_rate", rec.collection_acceptance()},
           {"esjd", esjd(rec)},
           {"ess_monolithic", report.ess_monolithic},
           {"wall_seconds", rec.total_seconds()},
           {"nan_rejections", rec.nan_rejections}};
  if (rec.dim() <= 1000) {
    doc["ess_per_dim"] = to_json(report.ess);
    doc["iat_per_dim"] = to_json(report.iat);
  }
  write_text(dir / (stem + ".diag.json"), doc.dump(2) + "\n");

  // ACF for one coordinate; default is the middle of the state vector.
  const int dim = acf_dim.value_or(static_cast<int>(rec.dim() / 2));
  if (dim < 0 || dim >= rec.dim()) throw std::invalid_argument("diagnose: acf dimension out of range");
  const AcfResult a = acf(block.col(dim), lag);
  std::ostringstream acf_csv;
  acf_csv << "lag,rho\n";
  acf_csv.precision(10);
  for (int k = 0; k <= a.lag; ++k) acf_csv << k << ',' << a.rho[k] << '\n';
  write_text(dir / (stem + ".acf.csv"), acf_csv.str());

  // Monolithic ESS over growing collection prefixes against elapsed time.
  std::ostringstream ess_csv;
  ess_csv << "samples,seconds,ess_monolithic\n";
  ess_csv.precision(10);
  const int points = 10;
  const double t_start = rec.burn_in > 0 ? rec.seconds[rec.burn_in - 1] : 0.0;
  for (int p = 1; p <= points; ++p) {
    const long k = rec.collection * p / points;
    if (k <= lag + 1) continue;
    const EssReport prefix = ess(block.topRows(k), std::min<long>(lag, k / 4));
    const double seconds = rec.seconds[rec.burn_in + k - 1] - t_start;
    ess_csv << k << ',' << seconds << ',' << prefix.ess_monolithic << '\n';
  }
  write_text(dir / (stem + ".ess_time.csv"), ess_csv.str());
}

std::string aggregate_table(const std::vector<std::filesystem::path>& summary_files) {
  if (summary_files.empty()) throw ConfigError("table: no summary files given");
  std::string experiment;
  struct Bucket {
    std::vector<double> err, ess, accept, wall;
  };
  std::map<std::string, Bucket> buckets;
  for (const auto& path : summary_files) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("table: cannot open " + path.string());
    json doc;
    try {
      in >> doc;
    } catch (const json::exception& err) {
      throw std::runtime_error("table: " + path.string() + ": " + err.what());
    }
    if (doc.value("format", "") != "fmala-summary") {
      throw std::runtime_error("table: " + path.string() + " is not a summary file");
    }
    const std::string this_experiment = doc.at("experiment");
    if (experiment.empty()) {
      experiment = this_experiment;
    } else if (experiment != this_experiment) {
      throw ConfigError("table: mixed experiments '" + experiment + "' and '" + this_experiment +
                        "'");
    }
    for (const auto& row : doc.at("rows")) {
      Bucket& b = buckets[row.at("sampler")];
      b.err.push_back(row.at("err_pct"));
      b.ess.push_back(row.at("ess_monolithic"));
      b.accept.push_back(row.at("accept_rate"));
      b.wall.push_back(row.at("wall_seconds"));
    }
  }
  const auto mean = [](const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
  };
  const auto spread = [&](const std::vector<double>& v) {
    if (v.size() < 2) return 0.0;
    const double m = mean(v);
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  std::ostringstream out;
  out << "experiment,sampler,runs,err_mean,err_sd,ess_mean,ess_sd,accept_mean,wall_mean\n";
  out.precision(10);
  for (const auto& [sampler, b] : buckets) {
    out << experiment << ',' << sampler << ',' << b.err.size() << ',' << mean(b.err) << ','
        << spread(b.err) << ',' << mean(b.ess) << ',' << spread(b.ess) << ',' << mean(b.accept)
        << ',' << mean(b.wall) << '\n';
  }
  return out.str();
}

std::filesystem::path default_output_root() {
  if (const char* env = std::getenv("FMALA_OUT")) return env;
  return "runs";
}

}  // namespace fmala
