#pragma once

#include <json.hpp>

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "ddc/hopf_branch.hpp"

namespace ddc {

using json = nlohmann::json;

inline uint64_t fnv1a64(const std::string& s) {
  uint64_t h = 14695981039346656037ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

/// Shortest round-trip decimal form; fixed across runs for identical input.
inline std::string fmt(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct Provenance {
  std::string config_hash;
  json config = json::object();
  std::string header() const { return std::string("# ddc ") + kVersion + " config_hash=" + config_hash; }
};

inline json to_json(const Params& p) {
  return {{"Pr", p.Pr}, {"d", p.d}, {"R1", p.R1}, {"R2", p.R2}, {"alpha", p.alpha}, {"eps", p.eps},
          {"J", p.J},   {"K", p.K}};
}

inline Params params_from_json(const json& j) {
  Params p;
  p.Pr = j.at("Pr");
  p.d = j.at("d");
  p.R1 = j.at("R1");
  p.R2 = j.at("R2");
  p.alpha = j.at("alpha");
  p.eps = j.at("eps");
  p.J = j.at("J");
  p.K = j.at("K");
  p.validate();
  return p;
}

/// Field as {params, layout: [[var, j, k], ...], re: [...], im: [...]}.
template <class T>
json field_to_json(const SpectralField<T>& u) {
  json lay = json::array(), re = json::array(), im = json::array();
  const auto& t = u.table();
  for (int i = 0; i < u.size(); ++i) {
    lay.push_back({var_name(t[i].var), t[i].mode.j, t[i].mode.k});
    const cplx z(u.coeffs()[i]);
    re.push_back(z.real());
    im.push_back(z.imag());
  }
  json j = {{"params", to_json(u.params())}, {"layout", lay}, {"re", re}};
  if constexpr (std::is_same_v<T, cplx>) j["im"] = im;
  return j;
}

inline Var var_from_name(const std::string& s) {
  for (Var v : kAllVars)
    if (s == var_name(v)) return v;
  throw Error(ErrorCode::InvalidArgument, "unknown variable '" + s + "'");
}

template <class T>
SpectralField<T> field_from_json(const json& j) {
  const Params p = params_from_json(j.at("params"));
  SpectralField<T> u(p);
  const auto& t = u.table();
  const json& lay = j.at("layout");
  if (static_cast<int>(lay.size()) != u.size())
    throw Error(ErrorCode::Mismatch, "layout length differs from the mode table");
  for (int i = 0; i < u.size(); ++i) {
    const int idx = t.index(var_from_name(lay[i][0]), lay[i][1], lay[i][2]);
    if (idx < 0) throw Error(ErrorCode::Mismatch, "inadmissible entry in layout");
    const double re = j.at("re")[i];
    if constexpr (std::is_same_v<T, cplx>)
      u.coeffs()[idx] = cplx(re, j.contains("im") ? double(j["im"][i]) : 0.0);
    else
      u.coeffs()[idx] = re;
  }
  return u;
}

/// Harmonics m = 0..M only; negative ones follow by conjugation.
inline json tpfield_to_json(const TimePeriodicField& f) {
  json h = json::array();
  for (int m = 0; m <= f.M; ++m) h.push_back(field_to_json(f[m]));
  return {{"M", f.M}, {"a_base", f.a_base}, {"harmonics", h}};
}

inline TimePeriodicField tpfield_from_json(const json& j) {
  const json& h = j.at("harmonics");
  const ComplexField f0 = field_from_json<cplx>(h.at(0));
  TimePeriodicField f = TimePeriodicField::zeros(f0.params(), j.at("M"), j.at("a_base"));
  for (int m = 0; m <= f.M; ++m) {
    f[m] = field_from_json<cplx>(h.at(m));
    f[-m] = conjugate(f[m]);
  }
  return f;
}

inline void write_json(const std::filesystem::path& path, json j, const Provenance& pv) {
  j["ddc_version"] = kVersion;
  j["config_hash"] = pv.config_hash;
  j["config"] = pv.config;
  std::ofstream f(path);
  if (!f) throw Error(ErrorCode::Io, "cannot open " + path.string());
  f << j.dump(1) << "\n";
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& cols, const Provenance& pv)
      : f_(path), ncol_(cols.size()) {
    if (!f_) throw Error(ErrorCode::Io, "cannot open " + path.string());
    f_ << pv.header() << "\n";
    for (size_t i = 0; i < cols.size(); ++i) f_ << (i ? "," : "") << cols[i];
    f_ << "\n";
  }
  void row(const std::vector<std::string>& cells) {
    if (cells.size() != ncol_) throw Error(ErrorCode::InvalidArgument, "CSV row width differs from header");
    for (size_t i = 0; i < cells.size(); ++i) f_ << (i ? "," : "") << cells[i];
    f_ << "\n";
  }

 private:
  std::ofstream f_;
  size_t ncol_;
};

inline json fit_to_json(const FitResult& f) {
  json pts = json::array();
  for (auto [x, y] : f.points) pts.push_back({x, y});
  return {{"slope", f.slope}, {"intercept", f.intercept}, {"r_squared", f.r_squared}, {"points", pts}};
}

}  // namespace ddc
