#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <string>
#include <vector>

#include <openssl/evp.h>

#include "roulette/bingham.hpp"
#include "roulette/cli/config.hpp"
#include "roulette/error.hpp"
#include "roulette/ising/lattice.hpp"
#include "roulette/pm_mcmc.hpp"

namespace roulette::cli {

inline std::string sha256_hex(const std::string& bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(), nullptr) != 1)
    throw Error("SHA-256 computation failed");
  std::ostringstream os;
  for (unsigned int i = 0; i < len; ++i) os << std::hex << std::setw(2) << std::setfill('0') << int{digest[i]};
  return os.str();
}

inline std::string config_digest(const ExperimentConfig& c) {
  std::string canonical;
  for (const auto& [k, v] : c.flat) canonical += k + "=" + v + "\n";
  return sha256_hex(canonical);
}

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open " + path);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write " + path);
  out << text;
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

// Unit vectors, one "x,y,z" row each; rows are renormalised on load.
inline std::string points_to_csv(const std::vector<bingham::SpherePoint>& pts) {
  std::string out = "x,y,z\n";
  for (const auto& p : pts) out += format_double(p[0]) + "," + format_double(p[1]) + "," + format_double(p[2]) + "\n";
  return out;
}

inline std::vector<bingham::SpherePoint> points_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::vector<bingham::SpherePoint> pts;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty() || line == "x,y,z") continue;
    double v[3];
    char c1 = 0, c2 = 0;
    std::istringstream ls(line);
    if (!(ls >> v[0] >> c1 >> v[1] >> c2 >> v[2]) || c1 != ',' || c2 != ',')
      throw ConfigError("malformed point on row " + std::to_string(row));
    const auto p = bingham::SpherePoint::normalized(v[0], v[1], v[2]);
    pts.push_back(p);
  }
  if (pts.empty()) throw ConfigError("point file holds no data");
  return pts;
}

inline const char* kChainHeader = "iter,theta,sign,log_abs_estimate,accepted,n_terms,n_normalizer_draws";

inline std::string chain_row(std::size_t iter, const ChainRecord& r) {
  std::string s = std::to_string(iter);
  for (double t : r.theta) s += "," + format_double(t);
  s += "," + std::to_string(r.sign) + "," + format_double(r.log_abs_estimate) + "," + (r.accepted ? "1" : "0") + "," +
       std::to_string(r.n_terms) + "," + std::to_string(r.n_normalizer_draws) + "\n";
  return s;
}

// Streams rows as the chain runs so an aborted run leaves its prefix behind.
class ChainCsvWriter {
 public:
  explicit ChainCsvWriter(const std::string& path) : out_(path, std::ios::binary) {
    if (!out_) throw ConfigError("cannot write " + path);
    out_ << kChainHeader << '\n';
  }

  void write(std::size_t iter, const ChainRecord& r) { out_ << chain_row(iter, r); }
  void flush() { out_.flush(); }

 private:
  std::ofstream out_;
};

struct ChainColumns {
  std::vector<double> theta;
  std::vector<int> sign;
  std::vector<int> accepted;
};

inline ChainColumns read_chain_csv(const std::string& path) {
  std::istringstream in(read_file(path));
  std::string line;
  if (!std::getline(in, line) || line != kChainHeader) throw ConfigError(path + " is not a chain CSV");
  ChainColumns cols;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::stringstream ls(line);
    std::string cell;
    while (std::getline(ls, cell, ',')) f.push_back(cell);
    if (f.size() != 7) throw ConfigError("row " + std::to_string(row) + " of " + path + " has the wrong width");
    try {
      cols.theta.push_back(std::stod(f[1]));
      cols.sign.push_back(std::stoi(f[2]));
      cols.accepted.push_back(std::stoi(f[4]));
    } catch (const std::exception&) {
      throw ConfigError("row " + std::to_string(row) + " of " + path + " is malformed");
    }
  }
  return cols;
}

inline ising::IsingLattice read_lattice(const std::string& path) {
  std::istringstream in(read_file(path));
  try {
    return ising::IsingLattice::from_text(in);
  } catch (const SizeError& e) {
    throw ConfigError(path + ": " + e.what());
  }
}

}  // namespace roulette::cli
