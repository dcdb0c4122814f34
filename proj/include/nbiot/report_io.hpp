#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "nbiot/analytic.hpp"
#include "nbiot/sim.hpp"

namespace nbiot::io {

using Json = nlohmann::ordered_json;

/// Bumped whenever a column or key is renamed, removed or reordered.
inline constexpr int kSchemaVersion = 1;

/// Shortest text that parses back to the same double.
std::string format_number(double v);

/// One row per class. Column order is fixed:
/// class, D_sy, D_ra, D_rar, D_rr, D_tx, D_rx, D_u, D_d, E_sy, E_ra, E_rar, E_rr,
/// E_tx, E_rx, E_u, E_d, L, contenders, P_rach, P_rar, P, Q, DD_t, D_w, w, y, rho, nu
std::string analytic_csv(const analytic::AnalyticReport& report);
Json analytic_json(const analytic::AnalyticReport& report);

/// One row per class. Column order is fixed:
/// class, D_u, D_u_ci, D_u_n, D_d, D_d_ci, D_d_n, E_u, E_u_ci, E_d, E_d_ci, L,
/// generated, served, abandoned, in_flight, attempts, collisions, rar_timeouts,
/// windows, preamble_success_rate, mean_contenders, w, y, rho, nu
std::string sim_csv(const sim::SimReport& report);
Json sim_json(const sim::SimReport& report);

/// One JSON object per log entry and line.
std::string trace_jsonl(const std::vector<sim::DeviceSession>& sessions);

}  // namespace nbiot::io
