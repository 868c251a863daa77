#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "prodisc/backlund.hpp"

namespace prodisc {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------- lattice JSON

// { "n1", "n2", "fields": { name: [row-major values] } }; NaN <-> null.
struct LatticeFile {
  int n1 = 0, n2 = 0;
  std::vector<std::pair<std::string, std::vector<double>>> fields;

  void add(const std::string& name, std::vector<double> v) { fields.emplace_back(name, std::move(v)); }
  const std::vector<double>* find(const std::string& name) const {
    for (const auto& [k, v] : fields)
      if (k == name) return &v;
    return nullptr;
  }
  bool has(const std::string& name) const { return find(name) != nullptr; }
  Grid<double> grid(const std::string& name) const {
    const auto* v = find(name);
    if (!v) throw config_error("SchemaError", "/fields/" + name + ": missing");
    Grid<double> g(n1, n2, kNaN);
    g.data() = *v;
    return g;
  }
};

inline Json number_or_null(double x) { return finite(x) ? Json(x) : Json(nullptr); }

inline std::string dump_lattice(const LatticeFile& f) {
  Json j;
  j["n1"] = f.n1;
  j["n2"] = f.n2;
  Json fields = Json::object();
  for (const auto& [name, v] : f.fields) {
    Json arr = Json::array();
    for (double x : v) arr.push_back(number_or_null(x));
    fields[name] = std::move(arr);
  }
  j["fields"] = std::move(fields);
  return j.dump(1) + "\n";
}

inline LatticeFile parse_lattice(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw config_error("SchemaError", std::string("lattice is not JSON: ") + e.what());
  }
  auto need_int = [&](const char* k) {
    if (!j.contains(k) || !j[k].is_number_integer() || j[k].get<long long>() < 1)
      throw config_error("SchemaError", std::string("/") + k + ": positive integer required");
    return j[k].get<int>();
  };
  LatticeFile f;
  f.n1 = need_int("n1");
  f.n2 = need_int("n2");
  if (!j.contains("fields") || !j["fields"].is_object()) throw config_error("SchemaError", "/fields: object required");
  for (const auto& [name, arr] : j["fields"].items()) {
    std::string path = "/fields/" + name;
    if (!arr.is_array() || arr.size() != static_cast<size_t>(f.n1) * f.n2)
      throw config_error("SchemaError", path + ": array of n1*n2 values required");
    std::vector<double> v;
    v.reserve(arr.size());
    for (const auto& x : arr) {
      if (x.is_null()) v.push_back(kNaN);
      else if (x.is_number()) v.push_back(x.get<double>());
      else throw config_error("SchemaError", path + ": numbers or null only");
    }
    f.add(name, std::move(v));
  }
  return f;
}

template <class T, class Get>
std::vector<double> flatten(const Grid<T>& g, Get get) {
  std::vector<double> v;
  v.reserve(g.data().size());
  for (const auto& s : g.data()) v.push_back(get(s));
  return v;
}

inline LatticeFile to_file(const GmcLattice& L) {
  LatticeFile f{L.n1(), L.n2(), {}};
  f.add("alpha", flatten(L, [](const GmcState& s) { return s.alpha; }));
  f.add("a", flatten(L, [](const GmcState& s) { return s.a; }));
  f.add("b", flatten(L, [](const GmcState& s) { return s.b; }));
  f.add("f", flatten(L, [](const GmcState& s) { return s.f; }));
  f.add("g", flatten(L, [](const GmcState& s) { return s.g; }));
  f.add("alpha_bar", flatten(L, [](const GmcState& s) { return s.alpha_bar; }));
  f.add("a_bar", flatten(L, [](const GmcState& s) { return s.a_bar; }));
  f.add("b_bar", flatten(L, [](const GmcState& s) { return s.b_bar; }));
  f.add("f_bar", flatten(L, [](const GmcState& s) { return s.f_bar; }));
  f.add("g_bar", flatten(L, [](const GmcState& s) { return s.g_bar; }));
  return f;
}

inline LatticeFile to_file(const DemLattice& L) {
  LatticeFile f{L.n1(), L.n2(), {}};
  f.add("H", flatten(L, [](const DemState& s) { return s.H; }));
  f.add("K", flatten(L, [](const DemState& s) { return s.K; }));
  f.add("A", flatten(L, [](const DemState& s) { return s.A; }));
  f.add("Q", flatten(L, [](const DemState& s) { return s.Q; }));
  return f;
}

inline bool is_gmc_file(const LatticeFile& f) { return f.has("alpha") && f.has("alpha_bar"); }
inline bool is_demoulin_file(const LatticeFile& f) { return f.has("H") && f.has("K"); }

inline GmcLattice gmc_from_file(const LatticeFile& f) {
  GmcLattice L(f.n1, f.n2);
  const char* names[10] = {"alpha", "a", "b", "f", "g", "alpha_bar", "a_bar", "b_bar", "f_bar", "g_bar"};
  double GmcState::*members[10] = {&GmcState::alpha,     &GmcState::a,     &GmcState::b,     &GmcState::f,
                                   &GmcState::g,         &GmcState::alpha_bar, &GmcState::a_bar, &GmcState::b_bar,
                                   &GmcState::f_bar,     &GmcState::g_bar};
  for (int k = 0; k < 10; ++k) {
    auto g = f.grid(names[k]);
    for (size_t n = 0; n < g.data().size(); ++n) L.data()[n].*members[k] = g.data()[n];
  }
  return L;
}

inline DemLattice demoulin_from_file(const LatticeFile& f) {
  DemLattice L(f.n1, f.n2);
  auto H = f.grid("H"), K = f.grid("K"), A = f.grid("A"), Q = f.grid("Q");
  for (size_t n = 0; n < L.data().size(); ++n) L.data()[n] = {H.data()[n], K.data()[n], A.data()[n], Q.data()[n]};
  return L;
}

inline void add_points(LatticeFile& f, const std::string& prefix, const Grid<HPoint>& P) {
  for (int k = 0; k < 4; ++k)
    f.add(prefix + std::to_string(k), flatten(P, [k](const HPoint& x) { return x[k]; }));
}

// ------------------------------------------------------------------------ OBJ

inline std::string fmt17(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

struct ObjMesh {
  std::string text;
  int vertices = 0, faces = 0;
  std::vector<std::pair<int, int>> skipped;   // chart failures
};

// Vertices in row-major order; a quad for every cell whose four corners were
// exported. Indices are 1-based as the format requires.
inline ObjMesh export_obj(const Grid<Eigen::Vector3d>& P, const Grid<char>& present) {
  ObjMesh m;
  Grid<int> index(P.n1(), P.n2(), 0);
  std::string out;
  for (int i = 0; i < P.n1(); ++i)
    for (int j = 0; j < P.n2(); ++j) {
      if (!present(i, j)) {
        m.skipped.emplace_back(i, j);
        continue;
      }
      const auto& x = P(i, j);
      out += "v " + fmt17(x[0]) + " " + fmt17(x[1]) + " " + fmt17(x[2]) + "\n";
      index(i, j) = ++m.vertices;
    }
  if (m.vertices == 0) throw degeneracy("EmptyMesh", "no vertex survived the chart");
  for (int i = 0; i + 1 < P.n1(); ++i)
    for (int j = 0; j + 1 < P.n2(); ++j) {
      int a = index(i, j), b = index(i + 1, j), c = index(i + 1, j + 1), d = index(i, j + 1);
      if (a && b && c && d) {
        out += "f " + std::to_string(a) + " " + std::to_string(b) + " " + std::to_string(c) + " " + std::to_string(d) + "\n";
        ++m.faces;
      }
    }
  m.text = std::move(out);
  return m;
}

inline ObjMesh export_obj(const Grid<Eigen::Vector3d>& P) {
  Grid<char> present(P.n1(), P.n2(), 1);
  for (int i = 0; i < P.n1(); ++i)
    for (int j = 0; j < P.n2(); ++j) present(i, j) = P(i, j).allFinite();
  return export_obj(P, present);
}

// Homogeneous points through the affine chart x[chart] = 1.
inline ObjMesh export_obj(const Grid<HPoint>& P, int chart = 3) {
  if (chart < 0 || chart > 3) throw config_error("BadChart", "chart index must be 0..3");
  Grid<Eigen::Vector3d> A(P.n1(), P.n2(), Eigen::Vector3d::Zero());
  Grid<char> present(P.n1(), P.n2(), 0);
  for (int i = 0; i < P.n1(); ++i)
    for (int j = 0; j < P.n2(); ++j) {
      const HPoint& x = P(i, j);
      if (!x.allFinite() || !(std::abs(x[chart]) > 1e-12 * x.norm())) continue;
      for (int k = 0, m = 0; k < 4; ++k)
        if (k != chart) A(i, j)[m++] = x[k] / x[chart];
      present(i, j) = 1;
    }
  return export_obj(A, present);
}

inline Grid<HPoint> frame_points(const Grid<Mat4>& F) {
  Grid<HPoint> P(F.n1(), F.n2(), HPoint::Zero());
  for (int i = 0; i < F.n1(); ++i)
    for (int j = 0; j < F.n2(); ++j) P(i, j) = F(i, j).row(0).transpose();
  return P;
}

// --------------------------------------------------------------------- config

inline uint64_t fnv1a(const std::string& s) {
  uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

inline std::string hex64(uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

inline const std::vector<std::string>& known_modes() {
  static const std::vector<std::string> m = {"evolve", "demoulin", "tzitzeica", "envelopes",
                                             "backlund", "verify", "limit", "export"};
  return m;
}

struct RunConfig {
  std::string mode;
  int n1 = 0, n2 = 0;
  uint64_t seed = 0;
  double tol = 0;
  double lambda = 1.0, lambda0 = 1.0;
  int branch = 1;
  MinimalClass cls = MinimalClass::Generic;
  int chart = 3;
  Json raw;   // validated document, used by the mode runners for data blocks
  std::string hash;
};

[[noreturn]] inline void schema_error(const std::string& pointer, const std::string& what) {
  throw config_error("SchemaError", pointer + ": " + what);
}

inline double get_number(const Json& j, const std::string& key, const std::string& base, double dflt) {
  if (!j.contains(key)) return dflt;
  if (!j[key].is_number()) schema_error(base + "/" + key, "number required");
  return j[key].get<double>();
}

inline RunConfig parse_config(const std::string& text) {
  Json j;
  try {
    j = Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw config_error("SchemaError", std::string("config is not JSON: ") + e.what());
  }
  if (!j.is_object()) schema_error("", "object required");
  RunConfig c;
  if (j.contains("mode")) {
    if (!j["mode"].is_string()) schema_error("/mode", "string required");
    c.mode = j["mode"].get<std::string>();
    const auto& m = known_modes();
    if (std::find(m.begin(), m.end(), c.mode) == m.end()) schema_error("/mode", "unknown mode '" + c.mode + "'");
  }
  if (!j.contains("grid") || !j["grid"].is_object()) schema_error("/grid/n1", "grid dimensions required");
  for (const char* k : {"n1", "n2"}) {
    std::string p = std::string("/grid/") + k;
    if (!j["grid"].contains(k)) schema_error(p, "required");
    if (!j["grid"][k].is_number_integer() || j["grid"][k].get<long long>() < 1) schema_error(p, "positive integer required");
    if (j["grid"][k].get<long long>() > 4096) schema_error(p, "at most 4096");
  }
  c.n1 = j["grid"]["n1"].get<int>();
  c.n2 = j["grid"]["n2"].get<int>();
  if (j.contains("seed")) {
    if (!j["seed"].is_number_unsigned() && !(j["seed"].is_number_integer() && j["seed"].get<long long>() >= 0))
      schema_error("/seed", "non-negative integer required");
    c.seed = j["seed"].get<uint64_t>();
  }
  c.tol = get_number(j, "tol", "", default_tol());
  if (!(c.tol > 0)) schema_error("/tol", "must be positive");
  c.lambda = get_number(j, "lambda", "", 1.0);
  c.lambda0 = get_number(j, "lambda0", "", 1.0);
  if (c.lambda == 0) schema_error("/lambda", "must be nonzero");
  if (c.lambda0 == 0) schema_error("/lambda0", "must be nonzero");
  if (j.contains("branch")) {
    if (!j["branch"].is_number_integer() || std::abs(j["branch"].get<int>()) != 1) schema_error("/branch", "must be 1 or -1");
    c.branch = j["branch"].get<int>();
  }
  if (j.contains("class")) {
    if (!j["class"].is_string()) schema_error("/class", "string required");
    try {
      c.cls = class_from_string(j["class"].get<std::string>());
    } catch (const Error&) {
      schema_error("/class", "unknown class '" + j["class"].get<std::string>() + "'");
    }
  }
  if (j.contains("chart")) {
    if (!j["chart"].is_number_integer() || j["chart"].get<int>() < 0 || j["chart"].get<int>() > 3)
      schema_error("/chart", "integer 0..3 required");
    c.chart = j["chart"].get<int>();
  }
  c.raw = j;
  return c;
}

// Array generator: an explicit list, or {"constant": v}, {"linear-ramp":
// {"start", "step"}}, {"random": {"min", "max"}}. Random draws use the run
// seed mixed with the JSON pointer so blocks are independent.
inline std::vector<double> generate(const Json& g, int n, uint64_t seed, const std::string& pointer) {
  if (g.is_array()) {
    if (static_cast<int>(g.size()) != n) schema_error(pointer, "expected " + std::to_string(n) + " values");
    std::vector<double> v;
    for (size_t k = 0; k < g.size(); ++k) {
      if (!g[k].is_number()) schema_error(pointer + "/" + std::to_string(k), "number required");
      v.push_back(g[k].get<double>());
    }
    return v;
  }
  if (g.is_number()) return std::vector<double>(n, g.get<double>());
  if (!g.is_object() || g.size() != 1) schema_error(pointer, "array or single-key generator object required");
  if (g.contains("constant")) {
    if (!g["constant"].is_number()) schema_error(pointer + "/constant", "number required");
    return std::vector<double>(n, g["constant"].get<double>());
  }
  if (g.contains("linear-ramp")) {
    const Json& r = g["linear-ramp"];
    std::string p = pointer + "/linear-ramp";
    if (!r.is_object()) schema_error(p, "object with start and step required");
    for (const char* k : {"start", "step"})
      if (!r.contains(k) || !r[k].is_number()) schema_error(p + "/" + k, "number required");
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = r["start"].get<double>() + k * r["step"].get<double>();
    return v;
  }
  if (g.contains("random")) {
    const Json& r = g["random"];
    std::string p = pointer + "/random";
    if (!r.is_object()) schema_error(p, "object with min and max required");
    for (const char* k : {"min", "max"})
      if (!r.contains(k) || !r[k].is_number()) schema_error(p + "/" + k, "number required");
    double lo = r["min"].get<double>(), hi = r["max"].get<double>();
    if (!(lo <= hi)) schema_error(p, "min must not exceed max");
    std::mt19937_64 rng(seed ^ fnv1a(pointer));
    std::uniform_real_distribution<double> U(lo, hi);
    std::vector<double> v(n);
    for (auto& x : v) x = U(rng);
    return v;
  }
  schema_error(pointer, "unknown generator '" + g.begin().key() + "'");
}

// ---------------------------------------------------------------------- report

struct Check {
  std::string name;
  Stat stat;
  double threshold = 0;
  bool gating = true;   // diagnostics are reported but never fail a run
  bool passed() const { return !gating || stat.max <= threshold; }
};

struct Report {
  std::string mode;
  std::string config_hash;
  uint64_t seed = 0;
  double tol = 0;
  std::vector<Check> checks;
  Json info = Json::object();
  std::optional<Error> error;

  void add(const std::string& name, const Stat& s, double threshold, bool gating = true) {
    checks.push_back({name, s, threshold, gating});
  }
  void add(const std::string& name, double v, double threshold, bool gating = true) {
    Stat s;
    s.add(v);
    add(name, s, threshold, gating);
  }
  bool passed() const {
    for (const auto& c : checks)
      if (!c.passed()) return false;
    return true;
  }
  int exit_code() const {
    if (error) return prodisc::exit_code(error->kind());
    return passed() ? 0 : 4;
  }

  std::string dump() const {
    Json j;
    j["mode"] = mode;
    j["config_hash"] = config_hash;
    j["seed"] = seed;
    j["tol"] = tol;
    Json arr = Json::array();
    for (const auto& c : checks) {
      Json e;
      e["name"] = c.name;
      e["max"] = number_or_null(c.stat.max);
      e["mean"] = number_or_null(c.stat.mean());
      e["count"] = c.stat.count;
      if (c.stat.wi >= 0) e["worst_site"] = Json::array({c.stat.wi, c.stat.wj});
      else e["worst_site"] = nullptr;
      e["threshold"] = c.threshold;
      e["gating"] = c.gating;
      e["pass"] = c.passed();
      arr.push_back(std::move(e));
    }
    j["checks"] = std::move(arr);
    j["info"] = info;
    if (error) {
      Json e;
      e["code"] = error->code();
      e["message"] = error->what();
      if (error->site()) e["site"] = Json::array({error->site()->first, error->site()->second});
      j["error"] = std::move(e);
    }
    j["status"] = error ? "error" : (passed() ? "pass" : "fail");
    j["exit_code"] = exit_code();
    return j.dump(1) + "\n";
  }
};

inline std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw config_error("FileError", "cannot read " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw config_error("FileError", "cannot write " + path);
  out << text;
}

}  // namespace prodisc
