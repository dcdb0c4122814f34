#include "nbiot/report_io.hpp"

#include <charconv>
#include <cmath>
#include <sstream>

namespace nbiot::io {

std::string format_number(double v)
{
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

namespace {

Json number(double v)
{
  return std::isfinite(v) ? Json(v) : Json(nullptr);
}

Json estimate(const stats::Estimate& e)
{
  return Json{{"mean", number(e.mean)}, {"ci95", number(e.half_width)}, {"samples", e.samples}};
}

void row(std::ostringstream& out, std::initializer_list<double> values)
{
  for (double v : values) {
    out << ',' << format_number(v);
  }
}

}  // namespace

std::string analytic_csv(const analytic::AnalyticReport& r)
{
  std::ostringstream out;
  out << "class,D_sy,D_ra,D_rar,D_rr,D_tx,D_rx,D_u,D_d,E_sy,E_ra,E_rar,E_rr,E_tx,E_rx,E_u,E_d,L,contenders,P_rach,"
         "P_rar,P,Q,DD_t,D_w,w,y,rho,nu\n";
  for (std::size_t j = 0; j < r.classes.size(); ++j) {
    const auto& m = r.classes[j];
    out << j + 1;
    row(out, {m.D_sy, m.D_ra, m.D_rar, m.D_rr, m.D_tx, m.D_rx, m.D_u, m.D_d, m.E_sy, m.E_ra, m.E_rar, m.E_rr, m.E_tx,
              m.E_rx, m.E_u, m.E_d, m.L, m.contenders, m.P_rach, m.P_rar, m.P, r.Q, r.DD_t, r.D_w, r.w, r.y, r.rho,
              r.nu});
    out << '\n';
  }
  return out.str();
}

Json analytic_json(const analytic::AnalyticReport& r)
{
  Json classes = Json::array();
  for (std::size_t j = 0; j < r.classes.size(); ++j) {
    const auto& m = r.classes[j];
    classes.push_back(Json{{"class", j + 1},
                           {"D_sy", m.D_sy}, {"D_ra", m.D_ra}, {"D_rar", m.D_rar}, {"D_rr", m.D_rr},
                           {"D_tx", m.D_tx}, {"D_rx", m.D_rx}, {"D_u", m.D_u}, {"D_d", m.D_d},
                           {"E_sy", m.E_sy}, {"E_ra", m.E_ra}, {"E_rar", m.E_rar}, {"E_rr", m.E_rr},
                           {"E_tx", m.E_tx}, {"E_rx", m.E_rx}, {"E_u", m.E_u}, {"E_d", m.E_d},
                           {"L", number(m.L)}, {"contenders", m.contenders},
                           {"P_rach", m.P_rach}, {"P_rar", m.P_rar}, {"P", m.P}});
  }
  return Json{{"schema_version", kSchemaVersion},
              {"kind", "analytic"},
              {"system",
               {{"G_u", r.G_u}, {"G_d", r.G_d}, {"Q", r.Q}, {"DD_t", r.DD_t}, {"D_w", r.D_w}, {"w", r.w},
                {"y", r.y}, {"G_batch", r.G_batch}, {"GG_batch", r.GG_batch}, {"s1", r.s1}, {"s2", r.s2},
                {"h1", r.h1}, {"h2", r.h2}, {"rho", r.rho}, {"nu", r.nu}}},
              {"classes", classes},
              {"diagnostics", r.diagnostics}};
}

std::string sim_csv(const sim::SimReport& r)
{
  std::ostringstream out;
  out << "class,D_u,D_u_ci,D_u_n,D_d,D_d_ci,D_d_n,E_u,E_u_ci,E_d,E_d_ci,L,generated,served,abandoned,in_flight,"
         "attempts,collisions,rar_timeouts,windows,preamble_success_rate,mean_contenders,w,y,rho,nu\n";
  for (std::size_t j = 0; j < r.classes.size(); ++j) {
    const auto& c = r.classes[j];
    out << j + 1;
    row(out, {c.D_u.mean, c.D_u.half_width, static_cast<double>(c.D_u.samples), c.D_d.mean, c.D_d.half_width,
              static_cast<double>(c.D_d.samples), c.E_u.mean, c.E_u.half_width, c.E_d.mean, c.E_d.half_width, c.L,
              static_cast<double>(c.generated), static_cast<double>(c.served), static_cast<double>(c.abandoned),
              static_cast<double>(c.in_flight), static_cast<double>(c.attempts), static_cast<double>(c.collisions),
              static_cast<double>(c.rar_timeouts), static_cast<double>(c.windows), c.preamble_success_rate,
              c.mean_contenders, r.w, r.y, r.rho, r.nu});
    out << '\n';
  }
  return out.str();
}

namespace {

Json sim_body(const sim::SimReport& r)
{
  Json classes = Json::array();
  for (std::size_t j = 0; j < r.classes.size(); ++j) {
    const auto& c = r.classes[j];
    classes.push_back(Json{{"class", j + 1},
                           {"D_u", estimate(c.D_u)},
                           {"D_d", estimate(c.D_d)},
                           {"E_u", estimate(c.E_u)},
                           {"E_d", estimate(c.E_d)},
                           {"L", number(c.L)},
                           {"generated", c.generated},
                           {"served", c.served},
                           {"abandoned", c.abandoned},
                           {"in_flight", c.in_flight},
                           {"attempts", c.attempts},
                           {"collisions", c.collisions},
                           {"rar_timeouts", c.rar_timeouts},
                           {"windows", c.windows},
                           {"preamble_success_rate", c.preamble_success_rate},
                           {"mean_contenders", c.mean_contenders},
                           {"attempts_histogram", c.attempts_histogram}});
  }
  return Json{{"seed", r.seed},
              {"horizon", r.horizon},
              {"warmup", r.warmup},
              {"counters",
               {{"generated", r.generated}, {"served", r.served}, {"abandoned", r.abandoned},
                {"in_flight", r.in_flight}, {"collisions", r.collisions}, {"rar_timeouts", r.rar_timeouts}}},
              {"occupancy",
               {{"w", r.w}, {"y", r.y}, {"rho", r.rho}, {"nu", r.nu}, {"npdcch", r.npdcch_fraction}}},
              {"npdcch_queue",
               {{"arrival_rate", r.npdcch_arrival_rate},
                {"mean_sojourn", r.npdcch_mean_sojourn},
                {"mean_length", r.npdcch_mean_queue}}},
              {"classes", classes}};
}

}  // namespace

Json sim_json(const sim::SimReport& r)
{
  Json j{{"schema_version", kSchemaVersion}, {"kind", "simulation"}};
  Json body = sim_body(r);
  for (auto& [k, v] : body.items()) {
    j[k] = v;
  }
  Json reps = Json::array();
  for (const auto& rep : r.replications) {
    reps.push_back(sim_body(rep));
  }
  j["replications"] = reps;
  return j;
}

std::string trace_jsonl(const std::vector<sim::DeviceSession>& sessions)
{
  std::ostringstream out;
  for (const auto& s : sessions) {
    for (const auto& e : s.log) {
      Json line{{"session", s.id},
                {"class", s.cls + 1},
                {"direction", sim::to_string(s.direction)},
                {"time", e.time},
                {"event", sim::to_string(e.kind)},
                {"state", sim::to_string(e.state)},
                {"power", e.power}};
      if (e.lump != 0.0) {
        line["lump"] = e.lump;
      }
      out << line.dump() << '\n';
    }
    Json summary{{"session", s.id},
                 {"class", s.cls + 1},
                 {"direction", sim::to_string(s.direction)},
                 {"event", "summary"},
                 {"attempts", s.attempt_count()},
                 {"terminal", s.terminal == sim::Terminal::served      ? "served"
                              : s.terminal == sim::Terminal::abandoned ? "abandoned"
                                                                       : "in_flight"},
                 {"energy", s.energy}};
    out << summary.dump() << '\n';
  }
  return out.str();
}

}  // namespace nbiot::io
