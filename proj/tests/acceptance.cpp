// Acceptance run: one PASS/FAIL line per criterion, details indented below it.
#include <hdivwave/hdivwave.hpp>

#include <chrono>
#include <cstdio>
#include <iostream>

using namespace hdivwave;

namespace {

// Reference discrete errors on triangles for h = 2^-3 .. 2^-6.
constexpr double kReference[] = {0.270790, 0.060266, 0.016328, 0.004343};

CheckResult check_convergence() {
  CheckResult out{"convergence", true, ""};
  RunOptions opt;
  opt.final_time = 2.0;
  opt.tau = 0.001;
  const std::vector<int> levels{3, 4, 5, 6};
  for (MeshKind kind : {MeshKind::structured_triangle, MeshKind::structured_quad, MeshKind::hybrid}) {
    MeshFamily family = detail::family_of(kind, 1);
    family.sizing = MeshSizing::diameter;
    const auto t0 = std::chrono::steady_clock::now();
    const auto table = run_convergence(family, levels, plane_wave(), opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    std::vector<std::optional<double>> re, rd;
    std::string energy, discrete;
    for (const auto& r : table) {
      re.push_back(r.eoc_energy);
      rd.push_back(r.eoc_discrete);
      energy += " " + detail::fmt(r.energy_error);
      discrete += " " + detail::fmt(r.discrete_error);
    }
    const double me = mean_rate(re).value_or(0.0), md = mean_rate(rd).value_or(0.0);
    const bool ok_e = me >= 1.8 && me <= 2.2, ok_d = md >= 1.8 && md <= 2.2;
    out.detail += std::string(to_string(kind)) + " (" + detail::fmt(secs) + " s)\n";
    out.detail += "  energy  " + energy.substr(1) + "  rates " + detail::fmt_rates(re) + "  mean " + detail::fmt(me) +
                  (ok_e ? "" : "  OUT OF RANGE") + "\n";
    out.detail += "  discrete " + discrete.substr(1) + "  rates " + detail::fmt_rates(rd) + "  mean " + detail::fmt(md) +
                  (ok_d ? "" : "  OUT OF RANGE") + "\n";
    out.passed = out.passed && ok_e && ok_d;

    if (kind == MeshKind::structured_triangle) {
      std::string factors;
      bool ok_m = true;
      for (std::size_t i = 0; i < table.size(); ++i) {
        for (double e : {table[i].energy_error, table[i].discrete_error}) {
          const double f = e / kReference[i];
          ok_m = ok_m && f <= 5.0 && f >= 0.2;
        }
        factors += " " + detail::fmt(table[i].discrete_error / kReference[i]);
      }
      out.detail += "  discrete/reference" + factors + (ok_m ? "" : "  OUTSIDE FACTOR 5") + "\n";
      out.passed = out.passed && ok_m;
    }
  }
  return out;
}

}  // namespace

int main() {
  std::vector<CheckResult> results;
  try {
    results.push_back(check_convergence());
    for (auto& r : run_property_suite()) results.push_back(std::move(r));
  } catch (const std::exception& e) {
    std::cout << "FAIL acceptance aborted: " << e.what() << "\n";
    return 1;
  }
  int failed = 0;
  for (const auto& r : results) {
    std::cout << (r.passed ? "PASS " : "FAIL ") << r.name << "\n";
    std::string line;
    for (char ch : r.detail) {
      if (ch == '\n') {
        std::cout << "    " << line << "\n";
        line.clear();
      } else {
        line += ch;
      }
    }
    if (!line.empty()) std::cout << "    " << line << "\n";
    failed += r.passed ? 0 : 1;
  }
  std::cout << results.size() - failed << "/" << results.size() << " criteria passed\n";
  return failed == 0 ? 0 : 1;
}
