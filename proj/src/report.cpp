#include "l20mc/report.hpp"

#include <fstream>

#include "json.hpp"

namespace l20mc {

std::string report_to_json(const SolveReport& rep, bool include_traces) {
  nlohmann::json j;
  j["solver"] = rep.solver;
  j["n"] = rep.n;
  j["m"] = rep.m;
  j["r"] = rep.r;
  j["iters"] = rep.iters;
  j["terminated_by"] = rep.terminated_by;
  j["rank"] = rep.rank;
  j["rank_tol"] = rep.rank_tol;
  j["balance"] = rep.balance;
  j["wall_ms"] = rep.wall_ms;
  if (rep.kappa >= 0) j["kappa"] = rep.kappa;
  if (rep.phase1_iters >= 0) j["phase1_iters"] = rep.phase1_iters;
  if (rep.phase2_iters >= 0) j["phase2_iters"] = rep.phase2_iters;
  if (rep.has_xi) j["xi_monotone"] = rep.xi_monotone;
  if (include_traces) {
    j["phi_trace"] = rep.phi_trace;
    j["residual_trace"] = rep.residual_trace;
    j["rank_trace"] = rep.rank_trace;
    if (!rep.fmu_trace.empty()) j["fmu_trace"] = rep.fmu_trace;
    if (!rep.j_trace.empty()) j["j_trace"] = rep.j_trace;
    if (rep.has_xi) j["xi_trace"] = rep.xi_trace;
  }
  if (!rep.config_echo.empty()) {
    j["config"] = nlohmann::json::parse(rep.config_echo, nullptr, false);
  }
  return j.dump(2);
}

void write_report_file(const std::string& path, const SolveReport& rep, bool include_traces) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << report_to_json(rep, include_traces) << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

}  // namespace l20mc
