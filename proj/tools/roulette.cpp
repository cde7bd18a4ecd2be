// Command-line driver: ising-simulate, run, compare, diagnose.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "roulette/cli/config.hpp"
#include "roulette/cli/experiment.hpp"
#include "roulette/cli/io.hpp"
#include "roulette/error.hpp"
#include "roulette/ising.hpp"
#include "roulette/log.hpp"

namespace {

enum Exit { kOk = 0, kConfig = 2, kNumerical = 3, kCftp = 4 };

int exit_code_for(const std::exception_ptr& err) {
  try {
    std::rethrow_exception(err);
  } catch (const roulette::CftpFailure& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kCftp;
  } catch (const roulette::ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const roulette::DatasetMismatch& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kConfig;
  } catch (const roulette::Error& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kNumerical;
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  }
}

// Mirrors log lines to stderr and, once a run directory exists, to run.log.
class RunLog {
 public:
  void open(const std::string& path) { file_.open(path, std::ios::app); }

  void install(roulette::log::Level threshold) {
    roulette::log::set_threshold(threshold);
    roulette::log::set_sink([this](roulette::log::Level level, std::string_view msg) {
      std::clog << "[" << roulette::log::level_name(level) << "] " << msg << '\n';
      if (file_) file_ << "[" << roulette::log::level_name(level) << "] " << msg << '\n' << std::flush;
    });
  }

 private:
  std::ofstream file_;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Pseudo-marginal MCMC with Russian-roulette likelihood estimates"};
  app.require_subcommand(1);
  bool verbose = false;
  app.add_flag("-v,--verbose", verbose, "log info messages");

  auto* sim = app.add_subcommand("ising-simulate", "draw an Ising lattice by coupling from the past");
  std::size_t sim_n = 10;
  double sim_alpha = 0.0, sim_beta = 0.2;
  std::uint64_t sim_seed = 1, sim_sweeps = std::uint64_t{1} << 20;
  std::string sim_out;
  sim->add_option("-n,--side", sim_n, "lattice side length")->check(CLI::PositiveNumber);
  sim->add_option("--alpha", sim_alpha, "external field");
  sim->add_option("--beta", sim_beta, "coupling (must be >= 0)");
  sim->add_option("--seed", sim_seed, "root seed");
  sim->add_option("--max-sweeps", sim_sweeps, "CFTP horizon budget in sweeps");
  sim->add_option("-o,--out", sim_out, "output lattice file")->required();

  auto* run = app.add_subcommand("run", "run one method arm from a config file");
  std::string run_config;
  std::vector<std::string> overrides;
  run->add_option("config", run_config, "INI or JSON config")->required();
  run->add_option("-s,--set", overrides, "override a key, e.g. --set experiment.seed=7");

  auto* cmp = app.add_subcommand("compare", "compare summaries computed on one dataset");
  std::vector<std::string> cmp_paths;
  std::string cmp_out;
  cmp->add_option("summaries", cmp_paths, "summary.json files")->required();
  cmp->add_option("-o,--out", cmp_out, "also write the report as JSON");

  auto* diag = app.add_subcommand("diagnose", "recompute ESS and the sign-corrected summary from a chain CSV");
  std::string diag_csv;
  std::size_t diag_burn = 0;
  diag->add_option("chain", diag_csv, "chain.csv")->required();
  diag->add_option("-b,--burn-in", diag_burn, "iterations to discard");

  CLI11_PARSE(app, argc, argv);

  RunLog runlog;
  runlog.install(verbose ? roulette::log::Level::info : roulette::log::Level::warning);

  try {
    if (*sim) {
      roulette::Rng rng = roulette::make_stream(sim_seed, "data");
      roulette::ising::CftpOptions opt;
      opt.max_sweeps = sim_sweeps;
      roulette::ising::CftpStats stats;
      const auto lattice = roulette::ising::cftp_sample(sim_n, {sim_alpha, sim_beta}, rng, opt, &stats);
      roulette::cli::write_file(sim_out, lattice.to_text());
      std::cout << "wrote " << sim_out << " (coalesced after " << stats.sweeps << " sweeps, sha256 "
                << roulette::cli::sha256_hex(lattice.to_text()) << ")\n";
      return kOk;
    }
    if (*run) {
      std::ifstream in(run_config);
      if (!in) throw roulette::ConfigError("cannot open config file " + run_config);
      const bool json = run_config.size() >= 5 && run_config.substr(run_config.size() - 5) == ".json";
      auto flat = json ? roulette::cli::flatten_json_text(in) : roulette::cli::flatten_ini(in);
      for (const auto& o : overrides) {
        const auto eq = o.find('=');
        if (eq == std::string::npos) throw roulette::ConfigError("override '" + o + "' is not key=value");
        flat[o.substr(0, eq)] = o.substr(eq + 1);
      }
      const auto config = roulette::cli::config_from_flat(flat);
      std::filesystem::create_directories(config.output_dir);
      runlog.open((std::filesystem::path(config.output_dir) / "run.log").string());
      const auto result = roulette::cli::run_experiment(config);
      std::cout << result.summary.dump(2) << '\n';
      return kOk;
    }
    if (*cmp) {
      std::vector<roulette::cli::Json> summaries;
      for (const auto& p : cmp_paths) summaries.push_back(roulette::cli::Json::parse(roulette::cli::read_file(p)));
      const auto report = roulette::cli::compare_runs(summaries);
      std::cout << report.table;
      if (!cmp_out.empty()) {
        roulette::cli::Json j;
        j["schema"] = 1;
        j["inputs"] = cmp_paths;
        j["z"] = report.z;
        roulette::cli::write_file(cmp_out, j.dump(2) + "\n");
      }
      return kOk;
    }
    if (*diag) {
      std::cout << roulette::cli::diagnose_chain(diag_csv, diag_burn).dump(2) << '\n';
      return kOk;
    }
  } catch (...) {
    return exit_code_for(std::current_exception());
  }
  return kOk;
}
