#pragma once

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "rbfcpm/errors.hpp"
#include "rbfcpm/geometry.hpp"
#include "rbfcpm/problems.hpp"
#include "rbfcpm/trimesh.hpp"

namespace rbfcpm {

namespace detail {
inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t p = s.find(sep, start);
    out.push_back(s.substr(start, p == std::string_view::npos ? s.npos : p - start));
    if (p == std::string_view::npos) break;
    start = p + 1;
  }
  return out;
}

template <class T>
bool parse_number(std::string_view s, T& out) {
  s = trim(s);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  const auto r = std::from_chars(s.data(), s.data() + s.size(), out);
  return r.ec == std::errc() && r.ptr == s.data() + s.size();
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}
}  // namespace detail

/// Flat key=value configuration. Blank lines and lines starting with '#'
/// are skipped.
using ConfigMap = std::map<std::string, std::string>;

inline ConfigMap parse_config(std::istream& in) {
  ConfigMap out;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    const std::string_view s = detail::trim(line);
    if (s.empty() || s.front() == '#') continue;
    const std::size_t eq = s.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError("config line " + std::to_string(n) + ": expected key=value");
    const std::string key(detail::trim(s.substr(0, eq)));
    if (key.empty()) throw ConfigError("config line " + std::to_string(n) + ": empty key");
    out[key] = std::string(detail::trim(s.substr(eq + 1)));
  }
  return out;
}

inline ConfigMap read_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  return parse_config(in);
}

/// Everything a CLI command needs.
struct RunConfig {
  ExperimentSpec spec;
  std::vector<double> levels;
  std::string mesh;
  std::string out;
  int threads = 0;
  long dump_every = 0;
  int verbosity = 1;
  bool timing = true;
  double spectrum_dt = 1e-6;
};

inline constexpr std::string_view config_keys[] = {
    "problem", "dx",  "levels", "m",         "eps",     "dt_rule", "t_final",
    "seed",    "mesh", "out",   "threads",   "dump_every", "F",    "k",
    "Du",      "Dv",  "lambda", "steps",     "noise",   "decay",   "alignment",
    "verbosity", "timing", "dt"};

inline StepRule parse_step_rule(std::string_view s, double Du) {
  const std::size_t colon = s.find(':');
  const std::string_view kind = detail::trim(s.substr(0, colon));
  double c = 0.0;
  if (colon == std::string_view::npos || !detail::parse_number(s.substr(colon + 1), c) ||
      !(c > 0.0))
    throw ConfigError("dt_rule must look like diffusive:0.1, advective:0.5 or scaled:0.1");
  if (kind == "diffusive") return StepRule::diffusive(c);
  if (kind == "advective") return StepRule::advective(c);
  if (kind == "scaled") return StepRule::scaled_diffusive(c, Du);
  throw ConfigError("unknown dt_rule kind '" + std::string(kind) + "'");
}

inline std::vector<double> parse_levels(std::string_view s) {
  std::vector<double> out;
  for (auto part : detail::split(s, ',')) {
    part = detail::trim(part);
    if (part.empty()) continue;
    double v = 0.0;
    if (!detail::parse_number(part, v) || !(v > 0.0))
      throw ConfigError("bad grid level '" + std::string(part) + "'");
    out.push_back(v);
  }
  return out;
}

/// Applies a key=value map; unknown keys and malformed values throw ConfigError.
inline void apply_config(const ConfigMap& map, RunConfig& cfg) {
  for (const auto& [key, value] : map)
    if (std::find(std::begin(config_keys), std::end(config_keys), key) == std::end(config_keys))
      throw ConfigError("unknown config key '" + key + "'");

  auto number = [&](const std::string& key, auto& target) {
    auto it = map.find(key);
    if (it == map.end()) return false;
    if (!detail::parse_number(it->second, target))
      throw ConfigError("bad value for '" + key + "': '" + it->second + "'");
    return true;
  };
  auto text = [&](const std::string& key) -> const std::string* {
    auto it = map.find(key);
    return it == map.end() ? nullptr : &it->second;
  };

  ExperimentSpec& s = cfg.spec;
  if (auto v = text("problem")) s.problem = parse_problem(*v);
  number("dx", s.dx);
  number("m", s.m);
  number("eps", s.eps);
  double tf = 0.0;
  if (number("t_final", tf)) s.t_final = tf;
  number("seed", s.seed);
  number("F", s.gray_scott.F);
  number("k", s.gray_scott.k);
  number("Du", s.gray_scott.Du);
  number("Dv", s.gray_scott.Dv);
  number("lambda", s.pm_lambda);
  number("steps", s.pm_steps);
  number("noise", s.pm_noise);
  number("threads", cfg.threads);
  number("dump_every", cfg.dump_every);
  number("verbosity", cfg.verbosity);
  number("dt", cfg.spectrum_dt);
  if (auto v = text("dt_rule")) s.dt_rule = parse_step_rule(*v, s.gray_scott.Du);
  if (auto v = text("levels")) cfg.levels = parse_levels(*v);
  if (auto v = text("mesh")) cfg.mesh = *v;
  if (auto v = text("out")) cfg.out = *v;
  if (auto v = text("decay")) {
    if (*v == "printed") s.advdiff_decay = AdvDiffDecay::printed;
    else if (*v == "squared") s.advdiff_decay = AdvDiffDecay::squared;
    else throw ConfigError("decay must be 'printed' or 'squared'");
  }
  if (auto v = text("alignment")) {
    if (*v == "cell") s.alignment = GridAlignment::cell;
    else if (*v == "node") s.alignment = GridAlignment::node;
    else throw ConfigError("alignment must be 'cell' or 'node'");
  }
  if (auto v = text("timing")) {
    if (*v == "true" || *v == "1") cfg.timing = true;
    else if (*v == "false" || *v == "0") cfg.timing = false;
    else throw ConfigError("timing must be true or false");
  }
  if (cfg.threads < 0) throw ConfigError("threads must be non-negative");
  if (cfg.dump_every < 0) throw ConfigError("dump_every must be non-negative");
}

/// Per-node field values at one time.
struct FieldDump {
  int dim = 3;
  double t = 0.0;
  std::vector<std::string> names;
  std::vector<Point> points;
  std::vector<std::vector<double>> values;  ///< one vector per component
};

/// CSV with a "# t=<time>" line, a header x,y[,z],<names...>, then one row
/// per node; every number has 17 significant digits.
inline void write_field_csv(std::ostream& os, const FieldDump& d) {
  os << "# t=" << detail::format_double(d.t) << '\n';
  os << "x,y";
  if (d.dim == 3) os << ",z";
  for (const auto& n : d.names) os << ',' << n;
  os << '\n';
  for (std::size_t i = 0; i < d.points.size(); ++i) {
    for (int a = 0; a < d.dim; ++a) os << (a ? "," : "") << detail::format_double(d.points[i][a]);
    for (const auto& v : d.values) os << ',' << detail::format_double(v[i]);
    os << '\n';
  }
}

inline FieldDump read_field_csv(std::istream& in) {
  FieldDump d;
  std::string line;
  long n = 0;
  auto fail = [&](const std::string& msg) { throw ParseError("field CSV line " + std::to_string(n) + ": " + msg, n); };
  if (!std::getline(in, line)) throw ParseError("field CSV is empty", 0);
  ++n;
  if (line.rfind("# t=", 0) != 0 || !detail::parse_number(std::string_view(line).substr(4), d.t))
    fail("expected '# t=<time>'");
  if (!std::getline(in, line)) fail("missing header");
  ++n;
  const auto header = detail::split(line, ',');
  if (header.size() < 2 || header[0] != "x" || header[1] != "y") fail("header must start with x,y");
  d.dim = header.size() >= 3 && header[2] == "z" ? 3 : 2;
  for (std::size_t c = static_cast<std::size_t>(d.dim); c < header.size(); ++c)
    d.names.emplace_back(header[c]);
  d.values.resize(d.names.size());
  while (std::getline(in, line)) {
    ++n;
    if (detail::trim(line).empty()) continue;
    const auto cells = detail::split(line, ',');
    if (cells.size() != header.size()) fail("expected " + std::to_string(header.size()) + " columns");
    Point p = Point::Zero();
    for (int a = 0; a < d.dim; ++a)
      if (!detail::parse_number(cells[a], p[a])) fail("bad number");
    d.points.push_back(p);
    for (std::size_t c = 0; c < d.names.size(); ++c) {
      double v = 0.0;
      if (!detail::parse_number(cells[c + d.dim], v)) fail("bad number");
      d.values[c].push_back(v);
    }
  }
  return d;
}

/// Legacy ASCII VTK polydata: one vertex cell per point, scalars per component.
inline void write_vtk(std::ostream& os, const FieldDump& d) {
  const std::size_t n = d.points.size();
  os << "# vtk DataFile Version 3.0\nrbfcpm field t=" << detail::format_double(d.t)
     << "\nASCII\nDATASET POLYDATA\nPOINTS " << n << " double\n";
  for (const auto& p : d.points)
    os << detail::format_double(p[0]) << ' ' << detail::format_double(p[1]) << ' '
       << detail::format_double(d.dim == 3 ? p[2] : 0.0) << '\n';
  os << "VERTICES " << n << ' ' << 2 * n << '\n';
  for (std::size_t i = 0; i < n; ++i) os << "1 " << i << '\n';
  os << "POINT_DATA " << n << '\n';
  for (std::size_t c = 0; c < d.names.size(); ++c) {
    os << "SCALARS " << d.names[c] << " double 1\nLOOKUP_TABLE default\n";
    for (double v : d.values[c]) os << detail::format_double(v) << '\n';
  }
}

/// ASCII OBJ: v and f records; polygons are fan-triangulated, other records
/// ignored. Face indices may be negative (relative) and carry /vt/vn parts.
inline TriMesh parse_obj(std::istream& in) {
  std::vector<Point> verts;
  std::vector<std::array<int, 3>> tris;
  std::string line;
  long n = 0;
  while (std::getline(in, line)) {
    ++n;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "v") {
      std::string a, b, c;
      Point p;
      if (!(ls >> a >> b >> c) || !detail::parse_number(a, p[0]) ||
          !detail::parse_number(b, p[1]) || !detail::parse_number(c, p[2]))
        throw ParseError("OBJ line " + std::to_string(n) + ": bad vertex", n);
      verts.push_back(p);
    } else if (tag == "f") {
      std::vector<int> face;
      std::string tok;
      while (ls >> tok) {
        const std::string_view head = detail::split(tok, '/').front();
        long idx = 0;
        if (!detail::parse_number(head, idx) || idx == 0)
          throw ParseError("OBJ line " + std::to_string(n) + ": bad face index '" + tok + "'", n);
        const long count = static_cast<long>(verts.size());
        const long resolved = idx > 0 ? idx - 1 : count + idx;
        if (resolved < 0 || resolved >= count)
          throw ParseError("OBJ line " + std::to_string(n) + ": face index " +
                               std::to_string(idx) + " out of range (" + std::to_string(count) +
                               " vertices)",
                           n);
        face.push_back(static_cast<int>(resolved));
      }
      if (face.size() < 3)
        throw ParseError("OBJ line " + std::to_string(n) + ": face needs 3 vertices", n);
      for (std::size_t k = 1; k + 1 < face.size(); ++k) tris.push_back({face[0], face[k], face[k + 1]});
    }
  }
  return TriMesh(std::move(verts), std::move(tris));
}

inline TriMesh load_obj(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open mesh file '" + path + "'");
  return parse_obj(in);
}

inline void write_obj(std::ostream& os, const TriMesh& mesh) {
  for (const auto& v : mesh.vertices())
    os << "v " << detail::format_double(v[0]) << ' ' << detail::format_double(v[1]) << ' '
       << detail::format_double(v[2]) << '\n';
  for (const auto& t : mesh.triangles())
    os << "f " << t[0] + 1 << ' ' << t[1] + 1 << ' ' << t[2] + 1 << '\n';
}

}  // namespace rbfcpm
