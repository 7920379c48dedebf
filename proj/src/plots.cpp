#include <fstream>
#include <iostream>

#include "ddc/harness.hpp"

namespace ddc::harness {

namespace fs = std::filesystem;

namespace {

struct Script {
  const char* name;
  const char* input;
  const char* body;
};

// Columns refer to the CSV headers written by the other commands.
constexpr Script kScripts[] = {
    {"plot_critical.gp", "critical.csv",
     "set xlabel 'eps^2'\n"
     "set ylabel 'R1_crit'\n"
     "set y2label 'a'\n"
     "set y2tics\n"
     "plot 'critical.csv' using ($1**2):3 with linespoints title 'R1_crit', \\\n"
     "     '' using ($1**2):4 axes x1y2 with linespoints title 'a'\n"},
    {"plot_branch.gp", "branch.csv",
     "set xlabel 'delta^2'\n"
     "set ylabel 'eta / delta^2'\n"
     "plot 'branch.csv' using ($2**2):5 with linespoints title 'eta~', \\\n"
     "     '' using ($2**2):6 with linespoints title 'omega~'\n"},
    {"plot_floquet.gp", "floquet.csv",
     "set xlabel 'delta^2'\n"
     "set ylabel 'Floquet exponent'\n"
     "plot 'floquet.csv' using ($2**2):5 with points title 'monodromy', \\\n"
     "     '' using ($2**2):6 with lines title 'predicted', \\\n"
     "     '' using ($2**2):3 with points title 'Hill'\n"},
    {"plot_energy.gp", "simulate_orbit.csv",
     "set xlabel 't'\n"
     "set ylabel 'E'\n"
     "set logscale y\n"
     "plot 'simulate_orbit.csv' using 1:2 with lines title 'E', \\\n"
     "     '' using 1:3 with lines title 'D'\n"},
};

}  // namespace

int run_plots(const RunOptions& ro) {
  Config cfg("plots", ro);
  cfg.check_unused({"plots"});
  const Provenance pv = cfg.provenance();
  std::vector<std::string> missing;
  int written = 0;
  for (const Script& s : kScripts) {
    if (!fs::exists(ro.out / s.input)) {
      missing.push_back(s.input);
      continue;
    }
    std::ofstream f(ro.out / s.name);
    if (!f) throw Error(ErrorCode::Io, "cannot write " + (ro.out / s.name).string());
    f << pv.header() << "\n"
      << "set datafile separator ','\n"
      << "set key autotitle columnhead\n"
      << "set terminal pngcairo size 900,600\n"
      << "set output '" << fs::path(s.name).replace_extension(".png").string() << "'\n"
      << s.body;
    ++written;
  }
  if (!missing.empty()) {
    std::cerr << "ddc plots: missing in " << ro.out.string() << ":";
    for (const auto& m : missing) std::cerr << " " << m;
    std::cerr << "\n";
  }
  if (written == 0) return kHard;
  return missing.empty() ? kOk : kPartial;
}

}  // namespace ddc::harness
