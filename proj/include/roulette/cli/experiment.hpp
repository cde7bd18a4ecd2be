#pragma once

// End-to-end runs of every method arm, run comparison and chain diagnosis.

#include <cmath>
#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "roulette/bingham.hpp"
#include "roulette/cli/config.hpp"
#include "roulette/cli/io.hpp"
#include "roulette/diagnostics.hpp"
#include "roulette/estimators.hpp"
#include "roulette/ising.hpp"
#include "roulette/log.hpp"
#include "roulette/normalizers.hpp"
#include "roulette/pilot.hpp"
#include "roulette/pm_mcmc.hpp"
#include "roulette/worker_pool.hpp"

namespace roulette::cli {

using Json = nlohmann::ordered_json;

struct Dataset {
  std::string text;    // canonical serialisation, hashed for provenance
  std::string digest;
  std::optional<ising::IsingLattice> lattice;
  std::vector<bingham::SpherePoint> points;
};

inline Dataset load_dataset(const ExperimentConfig& c) {
  Dataset d;
  if (c.model == Model::ising) {
    d.lattice = read_lattice(c.data_path);
    d.text = d.lattice->to_text();
  } else if (c.data_simulate) {
    Rng rng = make_stream(c.seed, "data");
    d.points = bingham::simulate_bingham_data(bingham::BinghamParams({0.0, 0.0, c.data_lambda3}),
                                              static_cast<std::size_t>(c.data_points), rng);
    d.text = points_to_csv(d.points);
  } else {
    d.points = points_from_csv(read_file(c.data_path));
    d.text = points_to_csv(d.points);
  }
  d.digest = sha256_hex(d.text);
  return d;
}

namespace detail {

inline LikelihoodEstimate to_likelihood(const EstimatorResult& r) {
  LikelihoodEstimate e;
  e.value = r.value;
  e.n_terms = r.n_terms;
  e.n_normalizer_draws = r.n_normalizer_draws;
  e.capped = r.capped;
  return e;
}

inline AnnealingLadder ladder_of(const ExperimentConfig& c) {
  return AnnealingLadder{static_cast<std::size_t>(c.ais_temps), static_cast<std::size_t>(c.ais_samples),
                         static_cast<std::size_t>(c.updates_per_temp)};
}

// Ising partition-function draws at one parameter point.
inline std::function<double(Rng&)> ising_source(const ExperimentConfig& c, std::size_t n, const ising::IsingParams& p,
                                                WorkerPool* pool) {
  const ising::IsingTarget target{n, p};
  if (c.normalizer == Normalizer::smc) {
    auto src = std::make_shared<SmcSource<ising::IsingTarget>>(target, ladder_of(c), c.smc_threshold, pool);
    return [src](Rng& rng) { return (*src)(rng); };
  }
  auto src = std::make_shared<AisSource<ising::IsingTarget>>(target, ladder_of(c), pool);
  return [src](Rng& rng) { return (*src)(rng); };
}

inline Truncation truncation_for(const ExperimentConfig& c, double q) {
  if (c.method == Method::poisson_geometric) return IndexDistribution::poisson(c.poisson_lambda);
  return RouletteSchedule::constant(q, static_cast<std::size_t>(c.safety_cap));
}

inline QRule q_rule_of(const ExperimentConfig& c, double factors = 1.0) {
  return QRule{c.q_min, c.q_max, c.variance_target / factors};
}

inline TiltingOptions tilting_of(const ExperimentConfig& c) {
  TiltingOptions t;
  t.kappa_target = c.kappa_target;
  t.sign_margin = c.sign_margin;
  return t;
}

}  // namespace detail

struct RunResult {
  ChainResult chain;
  Json summary;
  std::string chain_csv;     // path, empty when files are not written
  std::string summary_json;
};

inline Json summarize(const ExperimentConfig& c, const Dataset& data, const ChainResult& chain,
                      std::size_t pilot_nodes_built) {
  const std::size_t burn = static_cast<std::size_t>(c.burn_in);
  Json j;
  j["schema"] = 1;
  j["model"] = to_string(c.model);
  j["method"] = to_string(c.method);
  j["seed"] = c.seed;
  j["n_iters"] = c.n_iters;
  j["burn_in"] = c.burn_in;
  j["config_digest"] = config_digest(c);
  j["dataset_digest"] = data.digest;
  const auto& m = chain.metadata;
  if (chain.records.size() > burn) {
    const auto s = sign_corrected_expectation(chain.records, burn, [](const Theta& t) { return t[0]; });
    std::vector<double> theta;
    std::size_t accepted = 0;
    for (std::size_t i = burn; i < chain.records.size(); ++i) {
      theta.push_back(chain.records[i].theta[0]);
      if (chain.records[i].accepted) ++accepted;
    }
    j["mean"] = s.estimate;
    j["sd"] = s.sd;
    j["variance"] = s.variance;
    j["ess"] = theta.size() >= 10 ? ess(theta) : static_cast<double>(theta.size());
    j["ess_sign_corrected"] = s.ess;
    j["r_hat"] = s.r_hat;
    j["v_hat"] = s.v_hat;
    j["negative_fraction"] = s.negative_fraction;
    j["acceptance_rate"] = static_cast<double>(accepted) / static_cast<double>(theta.size());
  } else {
    j["mean"] = nullptr;
    j["sd"] = nullptr;
    j["variance"] = nullptr;
    j["ess"] = nullptr;
    j["ess_sign_corrected"] = nullptr;
    j["r_hat"] = nullptr;
    j["v_hat"] = nullptr;
    j["negative_fraction"] = nullptr;
    j["acceptance_rate"] = nullptr;
  }
  j["negative_count"] = m.negative_count;
  j["zero_count"] = m.zero_count;
  j["capped_count"] = m.capped_count;
  j["total_normalizer_draws"] = m.total_normalizer_draws;
  j["init_resamples"] = m.init_resamples;
  j["final_proposal_scale"] = m.final_scale.empty() ? 0.0 : m.final_scale[0];
  j["pilot_nodes_built"] = pilot_nodes_built;
  j["wall_time_s"] = m.wall_time_s;
  return j;
}

// Runs one configured experiment. With write_files the chain streams to
// <output_dir>/chain.csv and the summary goes to <output_dir>/summary.json.
inline RunResult run_experiment(const ExperimentConfig& c, bool write_files = true) {
  const Dataset data = load_dataset(c);
  std::unique_ptr<ChainCsvWriter> writer;
  RunResult result;
  if (write_files) {
    std::filesystem::create_directories(c.output_dir);
    result.chain_csv = (std::filesystem::path(c.output_dir) / "chain.csv").string();
    result.summary_json = (std::filesystem::path(c.output_dir) / "summary.json").string();
    writer = std::make_unique<ChainCsvWriter>(result.chain_csv);
    if (c.model == Model::bingham) write_file((std::filesystem::path(c.output_dir) / "data.csv").string(), data.text);
  }

  WorkerPool pool(static_cast<std::size_t>(c.workers));
  WorkerPool* pool_ptr = c.workers > 1 ? &pool : nullptr;
  Rng rng = make_stream(c.seed, "chain");
  GaussianRandomWalk proposal{{c.proposal_scale}};
  const BoxPrior prior{{c.prior_lower}, {c.prior_upper}};
  ChainOptions options;
  options.n_iters = static_cast<std::size_t>(c.n_iters);
  options.burn_in = static_cast<std::size_t>(c.burn_in);
  options.adapt = c.adapt;
  options.target_accept = c.target_accept;
  if (writer) options.on_record = [&](std::size_t it, const ChainRecord& r) { writer->write(it + 1, r); };
  const Theta theta0{c.init};
  const std::uint64_t pilot_seed = derive_seed(c.seed, "pilot");
  std::unique_ptr<PilotTable> table;

  auto run = [&]() -> ChainResult {
    if (c.model == Model::ising) {
      const ising::IsingLattice& y = *data.lattice;
      const std::size_t n = y.side();
      const ising::ParamMap map{c.ising_infer == "alpha" ? ising::IsingParam::alpha : ising::IsingParam::beta,
                                ising::IsingParams{c.ising_alpha, c.ising_beta}};
      switch (c.method) {
        case Method::exact_reference: {
          auto estimator = [&](const Theta& t, Rng&) {
            const auto p = map(t);
            LikelihoodEstimate e;
            e.value = SignedValue::from_log(ising::unnorm_loglik(y, p) - ising::transfer_matrix_logZ(n, p));
            return e;
          };
          return run_chain(theta0, proposal, prior, estimator, options, rng);
        }
        case Method::exchange_exact:
        case Method::exchange_approx: {
          ising::ExchangeSampler sampler;
          using Kind = ising::ExchangeSampler::Kind;
          sampler.kind = c.method == Method::exchange_approx  ? Kind::gibbs
                         : c.perfect_sampler == "heat_bath" ? Kind::exact_cftp
                                                            : Kind::exact_cluster_cftp;
          sampler.gibbs_steps = static_cast<std::size_t>(c.gibbs_steps);
          sampler.cftp.max_sweeps = static_cast<std::uint64_t>(c.cftp_max_sweeps);
          auto step = [&](const ChainRecord& cur, GaussianRandomWalk& prop, Rng& r) {
            return ising::exchange_step(cur, y, map, sampler, prop, prior, r);
          };
          ChainRecord init;
          init.theta = theta0;
          return run_kernel(init, proposal, step, options, rng);
        }
        default: break;
      }
      table = std::make_unique<PilotTable>(
          c.prior_lower, c.prior_upper, static_cast<std::size_t>(c.pilot_nodes),
          static_cast<std::size_t>(c.pilot_draws), detail::tilting_of(c), detail::q_rule_of(c), pilot_seed,
          [&](double theta, Rng& r) { return detail::ising_source(c, n, map(Theta{theta}), pool_ptr)(r); });
      auto estimator = [&](const Theta& t, Rng& r) {
        const auto p = map(t);
        const auto entry = table->at(t[0]);
        auto source = detail::ising_source(c, n, p, pool_ptr);
        const double loglik = ising::unnorm_loglik(y, p);
        if (c.method == Method::exponential_series) {
          const auto aux = ExponentialAuxiliary::propose(entry.plan.log_z_tilde, r);
          auto e = detail::to_likelihood(
              exponential_estimate(loglik, aux, entry.plan, source,
                                   RouletteSchedule::constant(c.exponential_q, static_cast<std::size_t>(c.safety_cap)),
                                   r));
          e.aux_nu = aux.nu();
          e.log_aux_density = aux.log_proposal_density(entry.plan.log_z_tilde);
          return e;
        }
        return detail::to_likelihood(
            geometric_estimate(loglik, entry.plan, source, detail::truncation_for(c, entry.q), r));
      };
      return run_chain(theta0, proposal, prior, estimator, options, rng);
    }

    // Bingham: theta = lambda_3 with lambda_1 = lambda_2 = 0.
    const auto& y = data.points;
    const double n_points = static_cast<double>(y.size());
    auto params_of = [](double l3) { return bingham::BinghamParams({0.0, 0.0, l3}); };
    if (c.method == Method::exact_reference) {
      auto estimator = [&](const Theta& t, Rng&) {
        const auto p = params_of(t[0]);
        LikelihoodEstimate e;
        e.value = SignedValue::from_log(bingham::unnorm_loglik(y, p) -
                                        n_points * std::log(bingham::bingham_Z_quadrature(p)));
        return e;
      };
      return run_chain(theta0, proposal, prior, estimator, options, rng);
    }
    PilotTable::LogBound bound;
    if (c.z_tilde == "bound") bound = [&](double l3) { return std::log(bingham::z_tilde_upper_bound(params_of(l3))); };
    table = std::make_unique<PilotTable>(
        c.prior_lower, c.prior_upper, static_cast<std::size_t>(c.pilot_nodes), static_cast<std::size_t>(c.pilot_draws),
        detail::tilting_of(c), detail::q_rule_of(c, n_points), pilot_seed,
        [&](double l3, Rng& r) { return bingham::IsSource{params_of(l3), static_cast<std::size_t>(c.is_samples)}(r); },
        bound);
    // Z^-n as the product of n independent geometric-series estimates.
    auto estimator = [&](const Theta& t, Rng& r) {
      const auto p = params_of(t[0]);
      const auto entry = table->at(t[0]);
      const bingham::IsSource source{p, static_cast<std::size_t>(c.is_samples)};
      const Truncation how = detail::truncation_for(c, entry.q);
      LikelihoodEstimate total;
      total.value = SignedValue::one();
      for (std::size_t i = 0; i < y.size(); ++i) {
        const double loglik = i == 0 ? bingham::unnorm_loglik(y, p) : 0.0;
        const auto part = geometric_estimate(loglik, entry.plan, source, how, r);
        total.value *= part.value;
        total.n_terms += part.n_terms;
        total.n_normalizer_draws += part.n_normalizer_draws;
        total.capped = total.capped || part.capped;
      }
      return total;
    };
    return run_chain(theta0, proposal, prior, estimator, options, rng);
  };

  try {
    result.chain = run();
  } catch (const ChainAborted& e) {
    if (writer) {
      writer->flush();
      Json cp;
      cp["schema"] = 1;
      cp["iteration"] = e.iteration();
      cp["rng_state"] = e.rng_state();
      const auto& recs = e.partial().records;
      if (!recs.empty()) {
        cp["theta"] = recs.back().theta;
        cp["log_abs_estimate"] = recs.back().log_abs_estimate;
        cp["sign"] = recs.back().sign;
      }
      cp["proposal_scale"] = e.partial().metadata.final_scale;
      cp["error"] = e.what();
      write_file((std::filesystem::path(c.output_dir) / "checkpoint.json").string(), cp.dump(2) + "\n");
    }
    log::error(e.what());
    std::rethrow_exception(e.cause());
  }
  result.summary = summarize(c, data, result.chain, table ? table->built_nodes() : 0);
  if (writer) {
    writer->flush();
    write_file(result.summary_json, result.summary.dump(2) + "\n");
  }
  return result;
}

struct Comparison {
  std::vector<Json> summaries;
  std::vector<std::vector<double>> z;  // pairwise z-scores of mean differences
  std::string table;
};

inline Comparison compare_runs(const std::vector<Json>& summaries) {
  if (summaries.size() < 2) throw ConfigError("compare needs at least two summaries");
  const std::string digest = summaries[0].value("dataset_digest", "");
  for (const auto& s : summaries) {
    if (s.value("dataset_digest", "") != digest)
      throw DatasetMismatch("summaries were computed on different datasets; refusing to compare");
    if (!s.contains("mean") || s["mean"].is_null()) throw ConfigError("summary has no posterior mean");
  }
  Comparison out;
  out.summaries = summaries;
  const std::size_t k = summaries.size();
  out.z.assign(k, std::vector<double>(k, 0.0));
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      const double diff = summaries[a]["mean"].get<double>() - summaries[b]["mean"].get<double>();
      const double var = summaries[a]["variance"].get<double>() + summaries[b]["variance"].get<double>();
      out.z[a][b] = diff == 0.0 ? 0.0 : diff / std::sqrt(var);
    }
  }
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof line, "%-3s %-20s %12s %12s %10s %10s\n", "#", "method", "mean", "sd", "ess", "r_hat");
  os << line;
  for (std::size_t a = 0; a < k; ++a) {
    const auto& s = summaries[a];
    std::snprintf(line, sizeof line, "%-3zu %-20s %12.6f %12.6f %10.1f %10.4f\n", a, s.value("method", "?").c_str(),
                  s["mean"].get<double>(), s["sd"].get<double>(), s["ess"].get<double>(), s["r_hat"].get<double>());
    os << line;
  }
  os << "\npairwise z-scores of mean differences\n";
  for (std::size_t a = 0; a < k; ++a) {
    for (std::size_t b = 0; b < k; ++b) {
      std::snprintf(line, sizeof line, "%8.3f", out.z[a][b]);
      os << line;
    }
    os << '\n';
  }
  out.table = os.str();
  return out;
}

inline Json diagnose_chain(const std::string& csv_path, std::size_t burn_in) {
  const auto cols = read_chain_csv(csv_path);
  if (cols.theta.size() <= burn_in) throw ConfigError("burn-in leaves no draws in " + csv_path);
  std::vector<double> theta(cols.theta.begin() + static_cast<std::ptrdiff_t>(burn_in), cols.theta.end());
  std::vector<int> sign(cols.sign.begin() + static_cast<std::ptrdiff_t>(burn_in), cols.sign.end());
  const auto s = sign_corrected_expectation(theta, sign);
  std::size_t accepted = 0;
  for (std::size_t i = burn_in; i < cols.accepted.size(); ++i) accepted += static_cast<std::size_t>(cols.accepted[i]);
  Json j;
  j["schema"] = 1;
  j["draws"] = theta.size();
  j["mean"] = s.estimate;
  j["sd"] = s.sd;
  j["variance"] = s.variance;
  j["ess"] = theta.size() >= 10 ? ess(theta) : static_cast<double>(theta.size());
  j["ess_sign_corrected"] = s.ess;
  j["r_hat"] = s.r_hat;
  j["v_hat"] = s.v_hat;
  j["negative_fraction"] = s.negative_fraction;
  j["acceptance_rate"] = static_cast<double>(accepted) / static_cast<double>(theta.size());
  return j;
}

}  // namespace roulette::cli
