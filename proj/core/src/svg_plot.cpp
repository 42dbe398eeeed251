#include "diffplan/svg_plot.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

namespace diffplan::sim {

namespace {

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.3f", v);
  return buf;
}

}  // namespace

std::string render_report_svg(const EvalReport& report, const SceneSpec* scene) {
  constexpr double kPanel = 480.0;
  constexpr double kMargin = 20.0;
  double w = scene != nullptr ? scene->width : 0.0;
  double h = scene != nullptr ? scene->height : 0.0;
  double t_max = 0.0;
  double v_max = 0.0;
  for (const RunRecord& r : report.runs) {
    if (r.plan) {
      for (const Pose& p : r.plan->poses) {
        w = std::max(w, p.x);
        h = std::max(h, p.y);
      }
      t_max = std::max(t_max, r.plan->dt * static_cast<double>(r.executed.size()));
    }
    for (const VehicleState& s : r.executed) v_max = std::max(v_max, std::abs(s.v));
  }
  w = std::max(w, 1.0);
  h = std::max(h, 1.0);
  t_max = std::max(t_max, 1.0);
  v_max = std::max(v_max, 0.1);
  const double scale = kPanel / std::max(w, h);
  auto mx = [&](double x) { return kMargin + x * scale; };
  auto my = [&](double y) { return kMargin + kPanel - y * scale; };
  const double ox = 2 * kMargin + kPanel;
  auto tx = [&](double t) { return ox + kMargin + t / t_max * kPanel; };
  auto vy = [&](double v) { return kMargin + kPanel / 2 - v / v_max * (kPanel / 2); };

  std::ostringstream o;
  o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << num(2 * kPanel + 4 * kMargin) << "\" height=\""
    << num(kPanel + 2 * kMargin) << "\">\n";
  o << "<rect x=\"" << num(kMargin) << "\" y=\"" << num(my(h)) << "\" width=\"" << num(w * scale) << "\" height=\""
    << num(h * scale) << "\" fill=\"white\" stroke=\"black\"/>\n";
  if (scene != nullptr) {
    for (const ConvexPolygon& poly : scene->static_polygons()) {
      o << "<polygon fill=\"#555\" points=\"";
      for (const Vec2& v : poly.vertices) o << num(mx(v.x)) << ',' << num(my(v.y)) << ' ';
      o << "\"/>\n";
    }
    for (const DynamicObstacle& d : scene->dynamic) {
      const Vec2 a = d.position(0.0);
      const Vec2 b = d.position(d.duration);
      o << "<line x1=\"" << num(mx(a.x)) << "\" y1=\"" << num(my(a.y)) << "\" x2=\"" << num(mx(b.x)) << "\" y2=\""
        << num(my(b.y)) << "\" stroke=\"orange\" stroke-width=\"4\" stroke-dasharray=\"6,3\"/>\n";
    }
    if (scene->goal) {
      o << "<circle cx=\"" << num(mx(scene->goal->x)) << "\" cy=\"" << num(my(scene->goal->y))
        << "\" r=\"5\" fill=\"green\"/>\n";
    }
  }
  for (const RunRecord& r : report.runs) {
    if (r.failed) {
      o << "<circle cx=\"" << num(mx(r.start.x)) << "\" cy=\"" << num(my(r.start.y))
        << "\" r=\"4\" fill=\"none\" stroke=\"red\"/>\n";
      continue;
    }
    if (r.plan) {
      o << "<polyline fill=\"none\" stroke=\"#36c\" stroke-width=\"1\" points=\"";
      for (const Pose& p : r.plan->poses) o << num(mx(p.x)) << ',' << num(my(p.y)) << ' ';
      o << "\"/>\n";
    }
    if (!r.executed.empty()) {
      const char* color = r.collided ? "red" : "#2a2";
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" stroke-opacity=\"0.7\" points=\"";
      for (const VehicleState& s : r.executed) o << num(mx(s.x)) << ',' << num(my(s.y)) << ' ';
      o << "\"/>\n";
      const double dt = r.plan ? r.plan->dt : 0.1;
      o << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"1\" stroke-opacity=\"0.6\" points=\"";
      for (std::size_t k = 0; k < r.executed.size(); ++k)
        o << num(tx(static_cast<double>(k) * dt)) << ',' << num(vy(r.executed[k].v)) << ' ';
      o << "\"/>\n";
    }
  }
  o << "<rect x=\"" << num(ox + kMargin) << "\" y=\"" << num(kMargin) << "\" width=\"" << num(kPanel)
    << "\" height=\"" << num(kPanel) << "\" fill=\"none\" stroke=\"black\"/>\n";
  o << "<line x1=\"" << num(tx(0)) << "\" y1=\"" << num(vy(0)) << "\" x2=\"" << num(tx(t_max)) << "\" y2=\""
    << num(vy(0)) << "\" stroke=\"#999\"/>\n";
  o << "<text x=\"" << num(ox + kMargin + 4) << "\" y=\"" << num(kMargin + 14)
    << "\" font-size=\"12\">speed (m/s), max " << num(v_max) << "</text>\n";
  o << "<text x=\"" << num(kMargin + 4) << "\" y=\"" << num(kMargin + 14) << "\" font-size=\"12\">" << report.planner
    << " F.Rate " << num(report.f_rate) << " C.Rate " << num(report.c_rate) << "</text>\n";
  o << "</svg>\n";
  return o.str();
}

}  // namespace diffplan::sim
