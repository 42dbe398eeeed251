#include "diffplan/scene.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "diffplan/error.hpp"

namespace diffplan::sim {

Vec2 DynamicObstacle::position(double t) const {
  const double tt = std::clamp(t, 0.0, duration);
  const double yaw = start.yaw();
  return {start.x + tt * speed * std::cos(yaw), start.y + tt * speed * std::sin(yaw)};
}

ConvexPolygon DynamicObstacle::footprint(double t) const {
  const Vec2 p = position(t);
  if (length == 0.0 && width == 0.0) return {{p}};
  return ConvexPolygon::oriented_box(p, start.yaw(), length, width);
}

ObstacleTrack DynamicObstacle::sample(double dt, int horizon) const {
  ObstacleTrack track(2, horizon);
  for (int j = 0; j < horizon; ++j) {
    const Vec2 p = position(j * dt);
    track(0, j) = p.x;
    track(1, j) = p.y;
  }
  return track;
}

int OccupancyGrid::col_of(double x) const { return static_cast<int>(std::floor(x / resolution)); }
int OccupancyGrid::row_of(double y) const { return static_cast<int>(std::floor(y / resolution)); }

void SceneSpec::validate() const {
  if (!(resolution > 0.0)) throw Error(ErrorCode::kConfigValidation, "scene resolution must be positive");
  if (!(width > 0.0 && height > 0.0)) throw Error(ErrorCode::kConfigValidation, "scene bounds must be positive");
  for (const DynamicObstacle& d : dynamic) {
    if (d.speed < 0.0 || d.duration < 0.0)
      throw Error(ErrorCode::kConfigValidation, "dynamic obstacle speed and duration must be non-negative");
    for (double t : {0.0, d.duration}) {
      const Vec2 p = d.position(t);
      if (p.x < 0.0 || p.y < 0.0 || p.x > width || p.y > height)
        throw Error(ErrorCode::kConfigValidation, "dynamic obstacle track leaves the map bounds");
    }
  }
}

std::vector<ConvexPolygon> SceneSpec::static_polygons() const {
  std::vector<ConvexPolygon> out = polygons;
  for (const OccupancyRun& r : grid_runs) {
    out.push_back(ConvexPolygon::rectangle(r.col * resolution, r.row * resolution, (r.col + r.length) * resolution,
                                           (r.row + 1) * resolution));
  }
  return out;
}

OccupancyGrid SceneSpec::rasterize() const {
  OccupancyGrid g;
  g.resolution = resolution;
  g.cols = static_cast<int>(std::ceil(width / resolution - 1e-9));
  g.rows = static_cast<int>(std::ceil(height / resolution - 1e-9));
  g.cells.assign(static_cast<std::size_t>(g.rows) * g.cols, 0);
  for (const ConvexPolygon& poly : polygons) {
    Vec2 lo, hi;
    poly.bounds(lo, hi);
    const int c0 = std::max(0, g.col_of(lo.x) - 1);
    const int c1 = std::min(g.cols - 1, g.col_of(hi.x) + 1);
    const int r0 = std::max(0, g.row_of(lo.y) - 1);
    const int r1 = std::min(g.rows - 1, g.row_of(hi.y) + 1);
    for (int r = r0; r <= r1; ++r) {
      for (int c = c0; c <= c1; ++c) {
        const ConvexPolygon cell = ConvexPolygon::rectangle(c * resolution, r * resolution, (c + 1) * resolution,
                                                            (r + 1) * resolution);
        // Touching along an edge does not count as occupancy.
        if (polygon_distance(cell, poly) == 0.0) {
          Vec2 clo, chi;
          cell.bounds(clo, chi);
          const double eps = 1e-9;
          const ConvexPolygon shrunk =
              ConvexPolygon::rectangle(clo.x + eps, clo.y + eps, chi.x - eps, chi.y - eps);
          if (polygon_distance(shrunk, poly) == 0.0) g.set(r, c, true);
        }
      }
    }
  }
  for (const OccupancyRun& run : grid_runs) {
    for (int c = run.col; c < run.col + run.length; ++c) {
      if (g.in_bounds(run.row, c)) g.set(run.row, c, true);
    }
  }
  return g;
}

SceneSpec SceneSpec::static_only() const {
  SceneSpec s = *this;
  s.dynamic.clear();
  return s;
}

SceneSpec SceneSpec::dynamic_only() const {
  SceneSpec s = *this;
  s.polygons.clear();
  s.grid_runs.clear();
  return s;
}

namespace {

std::string fmt_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

struct LineReader {
  std::istringstream in;
  std::uint64_t offset = 0;
  std::uint64_t line_offset = 0;

  explicit LineReader(const std::string& text) : in(text) {}

  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in, line)) {
      line_offset = offset;
      offset += line.size() + 1;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      std::istringstream ls(line);
      tokens.clear();
      std::string tok;
      while (ls >> tok) tokens.push_back(tok);
      if (!tokens.empty()) return true;
    }
    return false;
  }
};

double to_double(const std::string& s, std::uint64_t offset) {
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size() || !std::isfinite(v))
    throw FormatError("scene: expected a number, got '" + s + "'", offset);
  return v;
}

int to_int(const std::string& s, std::uint64_t offset) {
  int v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("scene: expected an integer, got '" + s + "'", offset);
  return v;
}

void expect_args(const std::vector<std::string>& t, std::size_t n, std::uint64_t offset) {
  if (t.size() != n + 1) throw FormatError("scene: '" + t[0] + "' expects " + std::to_string(n) + " values", offset);
}

}  // namespace

SceneSpec parse_scene(const std::string& text) {
  SceneSpec s;
  LineReader reader(text);
  std::vector<std::string> t;
  if (!reader.next(t) || t.size() != 2 || t[0] != "scene" || t[1] != "v1")
    throw FormatError("scene: missing 'scene v1' header", reader.line_offset);
  while (reader.next(t)) {
    const std::uint64_t off = reader.line_offset;
    const std::string& key = t[0];
    auto num = [&](std::size_t i) { return to_double(t.at(i), off); };
    if (key == "name") {
      expect_args(t, 1, off);
      s.name = t[1];
    } else if (key == "bounds") {
      expect_args(t, 2, off);
      s.width = num(1);
      s.height = num(2);
    } else if (key == "resolution") {
      expect_args(t, 1, off);
      s.resolution = num(1);
    } else if (key == "goal") {
      expect_args(t, 4, off);
      s.goal = Pose{num(1), num(2), num(3), num(4)}.normalized();
    } else if (key == "start_region") {
      expect_args(t, 4, off);
      s.start_region = std::array<double, 4>{num(1), num(2), num(3), num(4)};
    } else if (key == "max_path_length") {
      expect_args(t, 1, off);
      s.max_path_length = num(1);
    } else if (key == "mpc_gamma") {
      expect_args(t, 1, off);
      s.mpc_gamma = num(1);
    } else if (key == "mpc_alpha") {
      expect_args(t, 1, off);
      s.mpc_alpha = num(1);
    } else if (key == "rect") {
      expect_args(t, 4, off);
      s.polygons.push_back(ConvexPolygon::rectangle(num(1), num(2), num(3), num(4)));
    } else if (key == "polygon") {
      if (t.size() < 2) throw FormatError("scene: polygon needs a vertex count", off);
      const int n = to_int(t[1], off);
      if (n < 1 || t.size() != static_cast<std::size_t>(2 + 2 * n))
        throw FormatError("scene: polygon vertex count does not match its coordinates", off);
      ConvexPolygon poly;
      for (int i = 0; i < n; ++i) poly.vertices.push_back({num(2 + 2 * i), num(3 + 2 * i)});
      s.polygons.push_back(std::move(poly));
    } else if (key == "dynamic") {
      if (t.size() != 7 && t.size() != 9) throw FormatError("scene: dynamic expects 6 or 8 values", off);
      DynamicObstacle d;
      d.start = Pose{num(1), num(2), num(3), num(4)}.normalized();
      d.speed = num(5);
      d.duration = num(6);
      if (t.size() == 9) {
        d.length = num(7);
        d.width = num(8);
      }
      s.dynamic.push_back(d);
    } else if (key == "row") {
      if (t.size() < 2 || (t.size() - 2) % 2 != 0) throw FormatError("scene: row expects index and run pairs", off);
      const int row = to_int(t[1], off);
      for (std::size_t i = 2; i < t.size(); i += 2) {
        const int col = to_int(t[i], off);
        const int len = to_int(t[i + 1], off);
        if (row < 0 || col < 0 || len <= 0) throw FormatError("scene: invalid occupancy run", off);
        s.grid_runs.push_back({row, col, len});
      }
    } else {
      throw FormatError("scene: unknown key '" + key + "'", off);
    }
  }
  s.validate();
  return s;
}

std::string format_scene(const SceneSpec& s) {
  std::ostringstream o;
  auto f = fmt_double;
  o << "scene v1\n";
  o << "name " << s.name << "\n";
  o << "bounds " << f(s.width) << " " << f(s.height) << "\n";
  o << "resolution " << f(s.resolution) << "\n";
  if (s.goal) o << "goal " << f(s.goal->x) << " " << f(s.goal->y) << " " << f(s.goal->qz) << " " << f(s.goal->qw) << "\n";
  if (s.start_region) {
    const auto& r = *s.start_region;
    o << "start_region " << f(r[0]) << " " << f(r[1]) << " " << f(r[2]) << " " << f(r[3]) << "\n";
  }
  if (s.max_path_length > 0.0) o << "max_path_length " << f(s.max_path_length) << "\n";
  if (s.mpc_gamma) o << "mpc_gamma " << f(*s.mpc_gamma) << "\n";
  if (s.mpc_alpha) o << "mpc_alpha " << f(*s.mpc_alpha) << "\n";
  for (const ConvexPolygon& p : s.polygons) {
    o << "polygon " << p.vertices.size();
    for (const Vec2& v : p.vertices) o << " " << f(v.x) << " " << f(v.y);
    o << "\n";
  }
  for (const DynamicObstacle& d : s.dynamic) {
    o << "dynamic " << f(d.start.x) << " " << f(d.start.y) << " " << f(d.start.qz) << " " << f(d.start.qw) << " "
      << f(d.speed) << " " << f(d.duration) << " " << f(d.length) << " " << f(d.width) << "\n";
  }
  std::vector<OccupancyRun> runs = s.grid_runs;
  std::stable_sort(runs.begin(), runs.end(), [](const OccupancyRun& a, const OccupancyRun& b) { return a.row < b.row; });
  for (std::size_t i = 0; i < runs.size();) {
    o << "row " << runs[i].row;
    const int row = runs[i].row;
    for (; i < runs.size() && runs[i].row == row; ++i) o << " " << runs[i].col << " " << runs[i].length;
    o << "\n";
  }
  return o.str();
}

SceneSpec load_scene(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kFileNotFound, "cannot open scene file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_scene(ss.str());
}

void save_scene(const SceneSpec& scene, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kFileNotFound, "cannot write scene file: " + path);
  out << format_scene(scene);
}

std::uint64_t fnv1a64(const void* data, std::size_t n, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 1099511628211ULL;
  }
  return h;
}

std::uint64_t scene_hash(const SceneSpec& scene) {
  const std::string text = format_scene(scene);
  return fnv1a64(text.data(), text.size());
}

CollisionWorld::CollisionWorld(const SceneSpec& scene) : scene_(scene) {
  std::vector<ConvexPolygon> polys = scene.static_polygons();
  // Boundary walls, 1 m thick, just outside the map extent.
  const double w = scene.width;
  const double h = scene.height;
  polys.push_back(ConvexPolygon::rectangle(-1.0, -1.0, w + 1.0, 0.0));
  polys.push_back(ConvexPolygon::rectangle(-1.0, h, w + 1.0, h + 1.0));
  polys.push_back(ConvexPolygon::rectangle(-1.0, 0.0, 0.0, h));
  polys.push_back(ConvexPolygon::rectangle(w, 0.0, w + 1.0, h));
  for (ConvexPolygon& p : polys) {
    Entry e;
    p.bounds(e.lo, e.hi);
    e.poly = std::move(p);
    statics_.push_back(std::move(e));
  }
}

double CollisionWorld::static_distance(const ConvexPolygon& body) const {
  Vec2 lo, hi;
  body.bounds(lo, hi);
  double best = std::numeric_limits<double>::infinity();
  for (const Entry& e : statics_) {
    if (bbox_distance(lo, hi, e.lo, e.hi) >= best) continue;
    best = std::min(best, polygon_distance(body, e.poly));
    if (best == 0.0) break;
  }
  return best;
}

double CollisionWorld::dynamic_distance(const ConvexPolygon& body, double t) const {
  double best = std::numeric_limits<double>::infinity();
  for (const DynamicObstacle& d : scene_.dynamic) {
    best = std::min(best, polygon_distance(body, d.footprint(t)));
    if (best == 0.0) break;
  }
  return best;
}

double CollisionWorld::distance(const ConvexPolygon& body, double t) const {
  const double s = static_distance(body);
  if (s == 0.0) return 0.0;
  return std::min(s, dynamic_distance(body, t));
}

}  // namespace diffplan::sim
