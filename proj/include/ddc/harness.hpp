#pragma once

#include <cstdint>
#include <functional>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <boost/property_tree/ptree.hpp>

#include "ddc/io.hpp"

namespace ddc::harness {

enum Exit : int { kOk = 0, kHard = 1, kPartial = 2 };

struct RunOptions {
  std::filesystem::path config;  // empty: defaults only
  std::filesystem::path out = "out";
  int threads = 1;
  uint64_t seed = 1;
};

/// INI configuration. Every value read is recorded with its effective setting; the hash
/// covers those values, the command and the seed, so defaults are part of the provenance.
class Config {
 public:
  Config(const std::string& command, const RunOptions& ro);

  double num(const std::string& key, double def);
  int integer(const std::string& key, int def);
  bool flag(const std::string& key, bool def);
  std::string text(const std::string& key, const std::string& def);
  std::vector<double> list(const std::string& key, const std::string& def);

  /// Physical parameters from [params].
  Params params();

  /// Rejects keys in the named sections that nothing has read.
  void check_unused(const std::vector<std::string>& sections) const;

  Provenance provenance() const;

 private:
  std::string raw(const std::string& key, const std::string& def);

  std::string command_;
  uint64_t seed_;
  boost::property_tree::ptree tree_;
  std::map<std::string, std::string> used_;
};

/// Runs f(i) for i in [0, n) on up to `threads` workers.
void parallel_for(size_t n, int threads, const std::function<void(size_t)>& f);

int run_critical(const RunOptions& ro);
int run_branch(const RunOptions& ro);
int run_floquet(const RunOptions& ro);
int run_simulate(const RunOptions& ro);
int run_sweep_eps(const RunOptions& ro);
int run_plots(const RunOptions& ro);

/// Dispatch by name; returns the exit code.
int run(const std::string& command, const RunOptions& ro);

}  // namespace ddc::harness
