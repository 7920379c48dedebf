#include <algorithm>
#include <atomic>
#include <sstream>
#include <thread>

#include <boost/property_tree/ini_parser.hpp>

#include "ddc/harness.hpp"

namespace ddc::harness {

Config::Config(const std::string& command, const RunOptions& ro) : command_(command), seed_(ro.seed) {
  if (ro.config.empty()) return;
  try {
    boost::property_tree::ini_parser::read_ini(ro.config.string(), tree_);
  } catch (const boost::property_tree::ini_parser_error& e) {
    throw Error(ErrorCode::InvalidArgument, std::string("config: ") + e.what());
  }
}

std::string Config::raw(const std::string& key, const std::string& def) {
  std::string v = tree_.get<std::string>(key, def);
  v.erase(0, v.find_first_not_of(" \t"));
  v.erase(v.find_last_not_of(" \t") + 1);
  used_[key] = v;
  return v;
}

double Config::num(const std::string& key, double def) {
  const std::string v = raw(key, fmt(def));
  try {
    size_t pos = 0;
    const double x = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw Error(ErrorCode::InvalidArgument, "config key " + key + " = '" + v + "' is not a number");
  }
}

int Config::integer(const std::string& key, int def) {
  const double x = num(key, def);
  if (x != static_cast<int>(x)) throw Error(ErrorCode::InvalidArgument, "config key " + key + " must be an integer");
  return static_cast<int>(x);
}

bool Config::flag(const std::string& key, bool def) {
  const std::string v = raw(key, def ? "true" : "false");
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw Error(ErrorCode::InvalidArgument, "config key " + key + " = '" + v + "' is not a boolean");
}

std::string Config::text(const std::string& key, const std::string& def) { return raw(key, def); }

std::vector<double> Config::list(const std::string& key, const std::string& def) {
  const std::string v = raw(key, def);
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item.erase(0, item.find_first_not_of(" \t"));
    item.erase(item.find_last_not_of(" \t") + 1);
    if (item.empty()) continue;
    try {
      size_t pos = 0;
      out.push_back(std::stod(item, &pos));
      if (pos != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw Error(ErrorCode::InvalidArgument, "config key " + key + ": '" + item + "' is not a number");
    }
  }
  return out;
}

Params Config::params() {
  Params p;
  p.Pr = num("params.Pr", p.Pr);
  p.d = num("params.d", p.d);
  p.R2 = num("params.R2", 10.0);
  p.alpha = num("params.alpha", p.alpha);
  p.J = integer("params.J", p.J);
  p.K = integer("params.K", p.K);
  p.validate();
  return p;
}

void Config::check_unused(const std::vector<std::string>& sections) const {
  for (const auto& sec : sections) {
    auto it = tree_.find(sec);
    if (it == tree_.not_found()) continue;
    for (const auto& kv : it->second) {
      const std::string key = sec + "." + kv.first;
      if (!used_.count(key)) throw Error(ErrorCode::InvalidArgument, "unknown config key " + key);
    }
  }
}

Provenance Config::provenance() const {
  std::string canon = "command=" + command_ + "\nseed=" + std::to_string(seed_) + "\n";
  json cfg = json::object();
  for (const auto& [k, v] : used_) {
    canon += k + "=" + v + "\n";
    cfg[k] = v;
  }
  cfg["command"] = command_;
  cfg["seed"] = seed_;
  Provenance pv;
  pv.config_hash = hex64(fnv1a64(canon));
  pv.config = cfg;
  return pv;
}

void parallel_for(size_t n, int threads, const std::function<void(size_t)>& f) {
  const size_t nw = std::min<size_t>(n, static_cast<size_t>(std::max(1, threads)));
  if (nw <= 1) {
    for (size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::atomic<size_t> next{0};
  std::vector<std::thread> pool;
  for (size_t w = 0; w < nw; ++w)
    pool.emplace_back([&] {
      for (size_t i = next++; i < n; i = next++) f(i);
    });
  for (auto& t : pool) t.join();
}

}  // namespace ddc::harness
