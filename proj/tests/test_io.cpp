#include <gtest/gtest.h>

#include <unistd.h>

#include <filesystem>

#include "prodisc/run.hpp"

using namespace prodisc;
namespace fs = std::filesystem;

namespace {

std::string code_of_config(const std::string& text) {
  try {
    parse_config(text);
  } catch (const Error& e) {
    return e.code() + " " + e.detail();
  }
  return "";
}

fs::path scratch(const std::string& name) {
  fs::path p = fs::temp_directory_path() / ("prodisc_test_io_" + std::to_string(::getpid())) / name;
  fs::create_directories(p);
  return p;
}

std::string config_path(const std::string& name) { return std::string(PRODISC_CONFIG_DIR) + "/" + name; }

}  // namespace

TEST(Config, MinimalVerify) {
  auto c = parse_config(R"({"mode": "verify", "grid": {"n1": 2, "n2": 2},
                            "demoulin": {"constant": {"H": 2, "K": 2, "A": 0.5, "Q": 1.5}}})");
  EXPECT_EQ(c.mode, "verify");
  EXPECT_EQ(c.n1, 2);
  EXPECT_EQ(c.n2, 2);
  EXPECT_GT(c.tol, 0);
}

TEST(Config, SchemaErrorsCarryPointers) {
  EXPECT_EQ(code_of_config(R"({"mode": "verify"})").rfind("SchemaError /grid/n1", 0), 0u);
  EXPECT_EQ(code_of_config(R"({"grid": {"n2": 3}})").rfind("SchemaError /grid/n1", 0), 0u);
  EXPECT_EQ(code_of_config(R"({"grid": {"n1": 2, "n2": 2}, "tol": -1e-9})").rfind("SchemaError /tol", 0), 0u);
  EXPECT_EQ(code_of_config(R"({"grid": {"n1": 2, "n2": 2}, "lambda": 0})").rfind("SchemaError /lambda", 0), 0u);
  EXPECT_EQ(code_of_config(R"({"grid": {"n1": 2, "n2": 2}, "mode": "fly"})").rfind("SchemaError /mode", 0), 0u);
  EXPECT_EQ(code_of_config(R"({"grid": {"n1": 2, "n2": 2}, "chart": 4})").rfind("SchemaError /chart", 0), 0u);
  EXPECT_EQ(code_of_config("not json").rfind("SchemaError", 0), 0u);
}

TEST(Config, Generators) {
  EXPECT_EQ(generate(Json::parse(R"({"constant": 2.5})"), 3, 0, "/x"), std::vector<double>(3, 2.5));
  EXPECT_EQ(generate(Json::parse(R"({"linear-ramp": {"start": 1, "step": 0.5}})"), 3, 0, "/x"),
            (std::vector<double>{1, 1.5, 2}));
  auto a = generate(Json::parse(R"({"random": {"min": -1, "max": 1}})"), 5, 7, "/a");
  auto b = generate(Json::parse(R"({"random": {"min": -1, "max": 1}})"), 5, 7, "/a");
  auto c = generate(Json::parse(R"({"random": {"min": -1, "max": 1}})"), 5, 7, "/b");
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
  for (double x : a) EXPECT_TRUE(x >= -1 && x <= 1);
  EXPECT_THROW(generate(Json::parse("[1, 2]"), 3, 0, "/x"), Error);
}

TEST(LatticeJson, RoundTripIsByteIdentical) {
  auto D = dem_random(5, 4, 2);
  std::string text = dump_lattice(to_file(D));
  EXPECT_EQ(text.back(), '\n');
  EXPECT_EQ(text.find('\r'), std::string::npos);
  auto f = parse_lattice(text);
  EXPECT_EQ(f.n1, 5);
  EXPECT_EQ(f.n2, 4);
  EXPECT_EQ(dump_lattice(f), text);
  auto back = demoulin_from_file(f);
  for (int i = 0; i < 5; ++i)
    for (int j = 0; j < 4; ++j) {
      EXPECT_EQ(back(i, j).H, D(i, j).H);
      if (i + 1 < 5) EXPECT_EQ(back(i, j).A, D(i, j).A);
      else EXPECT_TRUE(std::isnan(back(i, j).A));
    }
}

TEST(LatticeJson, GmcRoundTrip) {
  auto d = random_cauchy(4, 4, 1);
  auto L = evolve(d.row, d.col);
  auto f = parse_lattice(dump_lattice(to_file(L)));
  ASSERT_TRUE(is_gmc_file(f));
  auto M = gmc_from_file(f);
  for (int k = 0; k < 16; ++k) {
    EXPECT_EQ(M.data()[k].g, L.data()[k].g);
    EXPECT_EQ(M.data()[k].alpha_bar, L.data()[k].alpha_bar);
  }
}

TEST(LatticeJson, SchemaErrors) {
  EXPECT_THROW(parse_lattice(R"({"n1": 2, "fields": {}})"), Error);
  EXPECT_THROW(parse_lattice(R"({"n1": 2, "n2": 2, "fields": {"x": [1, 2, 3]}})"), Error);
  EXPECT_THROW(parse_lattice(R"({"n1": 1, "n2": 1, "fields": {"x": ["a"]}})"), Error);
}

TEST(Obj, PlanarTwoByTwo) {
  Grid<HPoint> P(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) P(i, j) = HPoint(i, j, 0, 1);
  auto m = export_obj(P);
  EXPECT_EQ(m.vertices, 4);
  EXPECT_EQ(m.faces, 1);
  EXPECT_TRUE(m.skipped.empty());
  EXPECT_EQ(m.text, "v 0 0 0\nv 0 1 0\nv 1 0 0\nv 1 1 0\nf 1 3 4 2\n");
  EXPECT_EQ(export_obj(P).text, m.text);
}

TEST(Obj, ChartFailureSkipsVertex) {
  Grid<HPoint> P(2, 2);
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < 2; ++j) P(i, j) = HPoint(i, j, 0, 1);
  P(1, 1)[3] = 0;
  auto m = export_obj(P);
  EXPECT_EQ(m.vertices, 3);
  EXPECT_EQ(m.faces, 0);
  ASSERT_EQ(m.skipped.size(), 1u);
  EXPECT_EQ(m.skipped[0], std::make_pair(1, 1));
}

TEST(Obj, FullPrecisionAndErrors) {
  Grid<HPoint> P(1, 1, HPoint(1.0 / 3, 0, 0, 1));
  EXPECT_EQ(export_obj(P).text, "v 0.33333333333333331 0 0\n");
  Grid<HPoint> Z(1, 1, HPoint(1, 1, 1, 0));
  EXPECT_THROW(export_obj(Z), Error);
  EXPECT_THROW(export_obj(P, 5), Error);
}

TEST(Run, VerifyConstantExitsZero) {
  auto out = scratch("verify");
  RunArtifacts a;
  EXPECT_EQ(run({"verify", config_path("verify_constant.json"), out.string(), {}, {}, {}, {}}, &a), 0);
  EXPECT_TRUE(fs::exists(out / "report.json"));
  EXPECT_TRUE(a.report.passed());
}

TEST(Run, ComplexBranchExitsThreeWithSite) {
  auto dir = scratch("branch");
  write_file((dir / "c.json").string(), R"({"mode": "evolve", "grid": {"n1": 3, "n2": 3},
    "cauchy": {"row": {"alpha": {"constant": 1}, "a": {"constant": 2}, "b": {"constant": 1},
                       "f": {"constant": 0}, "g": {"constant": 0}},
               "col": {"alpha": {"constant": 1}, "a": {"constant": 2}, "b": {"constant": 1},
                       "f": {"constant": 0}, "g": {"constant": 0}}}})");
  RunArtifacts a;
  EXPECT_EQ(run({"evolve", (dir / "c.json").string(), dir.string(), {}, {}, {}, {}}, &a), 3);
  ASSERT_TRUE(a.report.error.has_value());
  EXPECT_EQ(a.report.error->code(), "ComplexBranch");
  ASSERT_TRUE(a.report.error->site().has_value());
  auto rep = Json::parse(read_file((dir / "report.json").string()));
  EXPECT_EQ(rep["error"]["site"], Json::array({0, 0}));
  EXPECT_EQ(rep["exit_code"], 3);
}

TEST(Run, UnadmissibleBacklundExitsThree) {
  auto out = scratch("bt");
  RunArtifacts a;
  EXPECT_EQ(run({"backlund", config_path("backlund_unadmissible.json"), out.string(), {}, {}, {}, {}}, &a), 3);
  ASSERT_TRUE(a.report.error.has_value());
  EXPECT_EQ(a.report.error->code(), "ConstraintViolated");
}

TEST(Run, NonMinimalExitsFour) {
  auto out = scratch("nonmin");
  EXPECT_EQ(run({"evolve", config_path("evolve_nonminimal.json"), out.string(), {}, {}, {}, {}}), 4);
}

TEST(Run, ConfigErrorsExitTwo) {
  auto dir = scratch("cfg");
  write_file((dir / "bad.json").string(), R"({"mode": "verify", "grid": {"n2": 2}})");
  RunArtifacts a;
  EXPECT_EQ(run({"verify", (dir / "bad.json").string(), dir.string(), {}, {}, {}, {}}, &a), 2);
  EXPECT_NE(std::string(a.report.error->what()).find("/grid/n1"), std::string::npos);
  EXPECT_EQ(run({"evolve", config_path("verify_constant.json"), dir.string(), {}, {}, {}, {}}), 2);
  EXPECT_EQ(run({"verify", config_path("verify_constant.json"), dir.string(), -1.0, {}, {}, {}}), 2);
  EXPECT_EQ(run({"verify", (dir / "missing.json").string(), dir.string(), {}, {}, {}, {}}), 2);
}

TEST(Run, OverridesChangeTheHash) {
  auto out = scratch("hash");
  RunArtifacts a, b, c;
  run({"verify", config_path("verify_constant.json"), out.string(), {}, {}, {}, {}}, &a);
  run({"verify", config_path("verify_constant.json"), out.string(), {}, {}, {}, {}}, &b);
  run({"verify", config_path("verify_constant.json"), out.string(), 1e-8, {}, {}, {}}, &c);
  EXPECT_EQ(a.report.config_hash, b.report.config_hash);
  EXPECT_NE(a.report.config_hash, c.report.config_hash);
  EXPECT_EQ(c.report.tol, 1e-8);
}

TEST(Run, ExportDeterministic) {
  auto o1 = scratch("exp1"), o2 = scratch("exp2");
  EXPECT_EQ(run({"export", config_path("export_points.json"), o1.string(), {}, {}, {}, {}}), 0);
  EXPECT_EQ(run({"export", config_path("export_points.json"), o2.string(), {}, {}, {}, {}}), 0);
  EXPECT_EQ(read_file((o1 / "mesh.obj").string()), "v 0 0 0\nv 0 1 0\nv 1 0 0\nv 1 1 0\nf 1 3 4 2\n");
  EXPECT_EQ(read_file((o1 / "mesh.obj").string()), read_file((o2 / "mesh.obj").string()));
  EXPECT_EQ(read_file((o1 / "report.json").string()), read_file((o2 / "report.json").string()));
}

TEST(Tolerance, EnvironmentOverride) {
  ::setenv("PRODISC_TOL", "1e-7", 1);
  EXPECT_EQ(default_tol(), 1e-7);
  ::setenv("PRODISC_TOL", "garbage", 1);
  EXPECT_EQ(default_tol(), 1e-9);
  ::unsetenv("PRODISC_TOL");
  EXPECT_EQ(default_tol(), 1e-9);
}
