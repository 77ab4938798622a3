#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>

#include <gtest/gtest.h>

#include "rbfcpm/io.hpp"
#include "rbfcpm/trimesh.hpp"

using namespace rbfcpm;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("rbfcpm_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Runs the tool with stdout and stderr captured to files; returns the exit code.
int tool(const std::string& args, const fs::path& dir, std::string* out = nullptr,
         std::string* err = nullptr) {
  const fs::path o = dir / "stdout.txt", e = dir / "stderr.txt";
  const std::string cmd = std::string(RBFCPM_TOOL) + " " + args + " >" + o.string() + " 2>" + e.string();
  const int status = std::system(cmd.c_str());
  auto slurp = [](const fs::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
  };
  if (out) *out = slurp(o);
  if (err) *err = slurp(e);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Config, ParsesKeyValueLines) {
  std::istringstream in("# comment\n\nproblem = heat_sphere\ndx=0.1\n  levels = 0.2, 0.1 ,0.05\n");
  const ConfigMap m = parse_config(in);
  EXPECT_EQ(m.at("problem"), "heat_sphere");
  EXPECT_EQ(m.at("dx"), "0.1");
  RunConfig cfg;
  apply_config(m, cfg);
  EXPECT_EQ(cfg.spec.problem, ProblemId::heat_sphere);
  EXPECT_EQ(cfg.spec.dx, 0.1);
  EXPECT_EQ(cfg.levels, (std::vector<double>{0.2, 0.1, 0.05}));
}

TEST(Config, RejectsUnknownKeysAndMalformedLines) {
  std::istringstream bad("dx 0.1\n");
  EXPECT_THROW(parse_config(bad), ConfigError);
  RunConfig cfg;
  try {
    apply_config(ConfigMap{{"dxx", "0.1"}}, cfg);
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("dxx"), std::string::npos);
  }
  EXPECT_THROW(apply_config(ConfigMap{{"dx", "abc"}}, cfg), ConfigError);
  EXPECT_THROW(apply_config(ConfigMap{{"problem", "wave"}}, cfg), ConfigError);
  EXPECT_THROW(apply_config(ConfigMap{{"timing", "maybe"}}, cfg), ConfigError);
}

TEST(Config, StepRules) {
  EXPECT_DOUBLE_EQ(step_size(parse_step_rule("diffusive:0.1", 1.0), 0.1), 1e-3);
  EXPECT_DOUBLE_EQ(step_size(parse_step_rule("advective:0.5", 1.0), 0.05), 0.025);
  EXPECT_DOUBLE_EQ(step_size(parse_step_rule("scaled:0.1", 5e-5), 0.025), 1.25);
  EXPECT_THROW(parse_step_rule("implicit:1", 1.0), ConfigError);
  EXPECT_THROW(parse_step_rule("diffusive", 1.0), ConfigError);
}

TEST(FieldCsv, RoundTripIsBitExact) {
  FieldDump d;
  d.dim = 3;
  d.t = 0.1 + 0.2;
  d.names = {"u", "v"};
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  for (int i = 0; i < 200; ++i) {
    d.points.emplace_back(g(rng), g(rng), g(rng) * 1e-300);
  }
  d.values.resize(2);
  for (int i = 0; i < 200; ++i) {
    d.values[0].push_back(g(rng) * 1e10);
    d.values[1].push_back(std::nextafter(1.0, 2.0) * g(rng));
  }
  std::stringstream ss;
  write_field_csv(ss, d);
  const FieldDump back = read_field_csv(ss);
  EXPECT_EQ(back.dim, 3);
  EXPECT_EQ(back.t, d.t);
  EXPECT_EQ(back.names, d.names);
  EXPECT_EQ(back.points, d.points);
  EXPECT_EQ(back.values, d.values);
}

TEST(FieldCsv, ReportsBadLines) {
  std::istringstream in("# t=0\nx,y,u\n1,2,3\n1,2\n");
  try {
    read_field_csv(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
}

TEST(Vtk, WritesPolydata) {
  FieldDump d;
  d.dim = 2;
  d.names = {"u"};
  d.points = {Point(1, 0, 0), Point(0, 1, 0)};
  d.values = {{0.5, -0.5}};
  std::ostringstream os;
  write_vtk(os, d);
  const std::string s = os.str();
  EXPECT_NE(s.find("DATASET POLYDATA"), std::string::npos);
  EXPECT_NE(s.find("POINTS 2 double"), std::string::npos);
  EXPECT_NE(s.find("SCALARS u double 1"), std::string::npos);
}

TEST(Obj, CubeQuadsAreTriangulated) {
  std::istringstream in(
      "# cube\nv 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n"
      "vn 0 0 1\nf 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 2/1 3/2 7/3 6/4\nf 3//1 4//1 8//1 7//1\n"
      "f -8 -4 -1 -5\n");
  const TriMesh m = parse_obj(in);
  EXPECT_EQ(m.vertices().size(), 8u);
  EXPECT_EQ(m.triangles().size(), 12u);
  std::ostringstream os;
  write_obj(os, m);
  std::istringstream again(os.str());
  const TriMesh m2 = parse_obj(again);
  EXPECT_EQ(m2.vertices(), m.vertices());
  EXPECT_EQ(m2.triangles(), m.triangles());
}

TEST(Obj, ErrorsCarryLineNumbers) {
  std::istringstream in("v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n");
  try {
    parse_obj(in);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
    EXPECT_NE(std::string(e.what()).find("99"), std::string::npos);
  }
  std::istringstream bad_vertex("v 0 zero 0\n");
  EXPECT_THROW(parse_obj(bad_vertex), ParseError);
  std::istringstream empty("v 0 0 0\n");
  EXPECT_THROW(parse_obj(empty), EmptyMesh);
}

TEST(Tool, RunWritesReportAndFields) {
  const fs::path dir = scratch_dir("run");
  std::string out;
  ASSERT_EQ(tool("run --problem heat_circle --dx 0.1 --out " + (dir / "o").string(), dir, &out), 0);
  EXPECT_EQ(out.substr(0, out.find('\n')), "problem,dx,N,m,eps,dt,t_final,rel_error,rate,runtime_seconds");
  EXPECT_NE(out.find("heat_circle,0.1,336,13,1,"), std::string::npos);
  EXPECT_TRUE(fs::exists(dir / "o" / "report.csv"));
  std::ifstream csv(dir / "o" / "field.csv");
  const FieldDump d = read_field_csv(csv);
  EXPECT_EQ(d.points.size(), 336u);
  EXPECT_EQ(d.t, 1.0);
  EXPECT_TRUE(fs::exists(dir / "o" / "field.vtk"));
}

TEST(Tool, ConfigFileAndFlagsAgree) {
  const fs::path dir = scratch_dir("config");
  {
    std::ofstream c(dir / "a.cfg");
    c << "problem = adv_ellipse\ndx = 0.1\ntiming = false\n";
  }
  std::string a, b;
  ASSERT_EQ(tool("run --config " + (dir / "a.cfg").string(), dir, &a), 0);
  ASSERT_EQ(tool("run --problem adv_ellipse --dx 0.1 --timing false", dir, &b), 0);
  EXPECT_EQ(a, b);
}

TEST(Tool, OutputIndependentOfThreadCount) {
  const fs::path dir = scratch_dir("threads");
  std::string one, four;
  const std::string base = "run --problem heat_sphere --dx 0.2 --m 33 --timing false --out ";
  ASSERT_EQ(tool(base + (dir / "a").string() + " --threads 1", dir, &one), 0);
  ASSERT_EQ(tool(base + (dir / "b").string() + " --threads 4", dir, &four), 0);
  EXPECT_EQ(one, four);
  EXPECT_EQ(read_file(dir / "a" / "field.csv"), read_file(dir / "b" / "field.csv"));
}

TEST(Tool, ExitCodes) {
  const fs::path dir = scratch_dir("codes");
  std::string err;
  EXPECT_EQ(tool("run --dxx 0.1", dir, nullptr, &err), 3);
  EXPECT_NE(err.find("dxx"), std::string::npos);
  {
    std::ofstream c(dir / "bad.cfg");
    c << "dxx = 0.1\n";
  }
  EXPECT_EQ(tool("run --config " + (dir / "bad.cfg").string(), dir, nullptr, &err), 3);
  EXPECT_NE(err.find("unknown config key 'dxx'"), std::string::npos);
  EXPECT_EQ(tool("run --problem heat_circle --m 12", dir, nullptr, &err), 3);
  EXPECT_NE(err.find("13"), std::string::npos);
  EXPECT_EQ(tool("converge --problem heat_circle --levels 0.2,0.15", dir), 3);
  EXPECT_EQ(tool("run --problem heat_circle --dx 0.1 --dt-rule diffusive:2 --t-final 20", dir), 2);
  EXPECT_EQ(tool("run --problem gray_scott --mesh " + (dir / "missing.obj").string(), dir), 1);
  EXPECT_EQ(tool("--help", dir), 0);
}

TEST(Tool, ConvergePrintsRatesAndTubeComparison) {
  const fs::path dir = scratch_dir("converge");
  std::string out;
  ASSERT_EQ(tool("converge --problem heat_circle --levels 0.2,0.1 --timing false", dir, &out), 0);
  EXPECT_NE(out.find("heat_circle,0.2,172,"), std::string::npos);
  EXPECT_NE(out.find("heat_circle,0.1,336,"), std::string::npos);
  EXPECT_NE(out.find("# 0.2,172,"), std::string::npos);
}

TEST(Tool, MeshInfoRoundTripsIcosphere) {
  const fs::path dir = scratch_dir("mesh");
  const fs::path obj = dir / "ico.obj";
  std::string out;
  ASSERT_EQ(tool("mesh-info --icosphere 2 --out " + obj.string(), dir, &out), 0);
  EXPECT_NE(out.find("triangles=320"), std::string::npos);
  ASSERT_EQ(tool("mesh-info --mesh " + obj.string(), dir, &out), 0);
  EXPECT_NE(out.find("vertices=162"), std::string::npos);
  EXPECT_NE(out.find("triangles=320"), std::string::npos);
  {
    std::ofstream bad(dir / "bad.obj");
    bad << "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n";
  }
  std::string err;
  EXPECT_EQ(tool("mesh-info --mesh " + (dir / "bad.obj").string(), dir, nullptr, &err), 3);
  EXPECT_NE(err.find("line 4"), std::string::npos);
}
