#pragma once

#include <filesystem>

#include "prodisc/envelopes.hpp"
#include "prodisc/io.hpp"

namespace prodisc {

struct RunOptions {
  std::string mode;
  std::string config_path;
  std::string out_dir = ".";
  std::optional<double> tol, lambda, lambda0;
  std::optional<uint64_t> seed;
};

struct RunArtifacts {
  Report report;
  std::optional<std::string> lattice_json;
  std::optional<ObjMesh> mesh;
};

namespace detail {

inline const Json* block(const RunConfig& c, const char* key) {
  return c.raw.contains(key) ? &c.raw[key] : nullptr;
}

inline double num(const Json& j, const std::string& key, const std::string& base, double dflt) {
  return get_number(j, key, base, dflt);
}

inline std::string resolve(const RunConfig& c, const std::string& path) {
  namespace fs = std::filesystem;
  fs::path p(path);
  if (p.is_absolute() || !c.raw.contains("__dir")) return path;
  return (fs::path(c.raw["__dir"].get<std::string>()) / p).string();
}

inline std::optional<LatticeFile> lattice_file(const RunConfig& c) {
  if (!c.raw.contains("lattice_file")) return std::nullopt;
  if (!c.raw["lattice_file"].is_string()) schema_error("/lattice_file", "path string required");
  return parse_lattice(read_file(resolve(c, c.raw["lattice_file"].get<std::string>())));
}

// Row and column Cauchy data for the net evolution. Without a "cauchy" block
// the data are drawn from the seeded generator; drawn data are projected onto
// T = 0 and/or T_bar = 0 when the class asks for it.
inline CauchyData gmc_cauchy(const RunConfig& c) {
  const Json* b = block(c, "cauchy");
  bool drawn = !b || b->contains("random");
  CauchyData d;
  if (drawn) {
    double ab = 0.2, fg = 0.1;
    if (b) {
      const Json& r = (*b)["random"];
      if (!r.is_object()) schema_error("/cauchy/random", "object required");
      ab = num(r, "ab_scale", "/cauchy/random", ab);
      fg = num(r, "fg_scale", "/cauchy/random", fg);
    }
    d = random_cauchy(c.n1, c.n2, c.seed, ab, fg);
    bool zT = c.cls == MinimalClass::Demoulin || c.cls == MinimalClass::Tzitzeica ||
              c.cls == MinimalClass::GodeauxRozetT0;
    bool zTb = c.cls == MinimalClass::Demoulin || c.cls == MinimalClass::Tzitzeica ||
               c.cls == MinimalClass::GodeauxRozetTbar0;
    if (zT)
      for (auto& s : d.row) s.a = -s.g * s.g / s.b;
    if (zTb)
      for (auto& s : d.col) s.a = -s.g * s.g / s.b;
    return d;
  }
  if (!b->is_object()) schema_error("/cauchy", "object required");
  for (const char* side : {"row", "col"}) {
    std::string base = std::string("/cauchy/") + side;
    if (!b->contains(side) || !(*b)[side].is_object()) schema_error(base, "object required");
    const Json& s = (*b)[side];
    int n = std::string(side) == "row" ? c.n1 : c.n2;
    std::array<std::vector<double>, 5> v;
    const char* names[5] = {"alpha", "a", "b", "f", "g"};
    for (int k = 0; k < 5; ++k) {
      if (!s.contains(names[k])) schema_error(base + "/" + names[k], "required");
      v[k] = generate(s[names[k]], n, c.seed, base + "/" + names[k]);
    }
    for (int i = 0; i < n; ++i) {
      if (std::string(side) == "row") d.row.push_back({v[0][i], v[1][i], v[2][i], v[3][i], v[4][i]});
      else d.col.push_back({v[0][i], v[1][i], v[2][i], v[3][i], v[4][i]});
    }
  }
  return d;
}

inline GmcLattice gmc_lattice(const RunConfig& c) {
  if (auto f = lattice_file(c)) {
    if (!is_gmc_file(*f)) schema_error("/lattice_file", "net fields (alpha ... g_bar) required");
    return gmc_from_file(*f);
  }
  auto d = gmc_cauchy(c);
  if (c.cls == MinimalClass::NonMinimal) {
    double inc = num(c.raw, "increment", "", 1e-4);
    return evolve_asymptotic(d.row, d.col, [inc](int, int) { return inc; }, c.branch);
  }
  return evolve(d.row, d.col, c.cls, c.branch, c.tol);
}

// Demoulin data: {"constant": {H,K,A,Q}}, {"random": {H0,K0,A0,Q0,spread}}
// or explicit axis generators. The Tzitzeica variant carries K = H.
inline DemLattice dem_lattice(const RunConfig& c, bool tzitzeica, const char* dflt) {
  if (auto f = lattice_file(c)) {
    if (!is_demoulin_file(*f)) schema_error("/lattice_file", "fields H, K, A, Q required");
    return demoulin_from_file(*f);
  }
  Json b = c.raw.contains("demoulin") ? c.raw["demoulin"] : Json::parse(dflt);
  if (!b.is_object()) schema_error("/demoulin", "object required");
  if (b.contains("constant")) {
    const Json& k = b["constant"];
    std::string p = "/demoulin/constant";
    double H = num(k, "H", p, 2.0);
    double K = tzitzeica ? H : num(k, "K", p, H);
    return dem_constant(c.n1, c.n2, H, K, num(k, "A", p, 0.5), num(k, "Q", p, 1.5));
  }
  if (b.contains("random")) {
    const Json& r = b["random"];
    std::string p = "/demoulin/random";
    double e = num(r, "spread", p, 0.05);
    if (tzitzeica)
      return tz_random(c.n1, c.n2, c.seed, num(r, "H0", p, -1.0), num(r, "A0", p, 0.3), num(r, "Q0", p, -0.1), e);
    return dem_random(c.n1, c.n2, c.seed, num(r, "H0", p, 0.5), num(r, "K0", p, 0.45), num(r, "A0", p, 0.5),
                      num(r, "Q0", p, -1.5), e);
  }
  auto gen = [&](const char* k, int n) {
    std::string p = std::string("/demoulin/") + k;
    if (!b.contains(k)) schema_error(p, "required");
    return generate(b[k], n, c.seed, p);
  };
  if (tzitzeica) return tz_evolve({gen("H_row", c.n1), gen("A_row", c.n1), gen("H_col", c.n2), gen("Q_col", c.n2)});
  return dem_evolve({gen("H_row", c.n1), gen("K_row", c.n1), gen("A_row", c.n1), gen("H_col", c.n2),
                     gen("K_col", c.n2), gen("Q_col", c.n2)});
}

// Default seed I + ones/4: every coordinate of r is nonzero at the origin so
// the exported mesh does not start at infinity in the chart.
inline Mat4 frame_seed(const RunConfig& c) {
  Mat4 s = Mat4::Identity() + Mat4::Constant(0.25);
  if (!c.raw.contains("frame_seed")) return s;
  const Json& j = c.raw["frame_seed"];
  if (!j.is_array() || j.size() != 16) schema_error("/frame_seed", "16 numbers (row-major) required");
  for (int k = 0; k < 16; ++k) {
    if (!j[k].is_number()) schema_error("/frame_seed/" + std::to_string(k), "number required");
    s(k / 4, k % 4) = j[k].get<double>();
  }
  return s;
}

inline Label label_of(const RunConfig& c, const char* key, double dflt) {
  return Label(num(c.raw, key, "", dflt));
}

inline void gmc_suite(Report& r, const GmcLattice& L, const RunConfig& c, const FrameField& fr) {
  auto cls = classify(L, c.tol);
  r.info["class"] = to_string(cls);
  r.info["requested_class"] = to_string(c.cls);
  r.add("class_matches_request", cls == c.cls ? 0.0 : 1.0, 0.5);
  auto m = minimality_report(L);
  r.add("T_drift", m.T_drift, c.tol, cls != MinimalClass::NonMinimal);
  r.add("T_bar_drift", m.Tbar_drift, c.tol, cls != MinimalClass::NonMinimal);
  r.add("T_balance", m.teqn, c.tol, cls != MinimalClass::NonMinimal);
  r.add("alpha_law", m.alpha_law, c.tol);
  r.add("unit_determinant", determinant_law(L, c.lambda), c.tol);
  r.add("frame_path", fr.path, c.tol);
}

inline void demoulin_suite(Report& r, const DemLattice& D, const RunConfig& c, GaugeResult* gauge_out = nullptr) {
  auto dr = dem_residuals(D);
  r.add("face_map", dr.face, c.tol);
  r.add("edge_relations", dr.first, c.tol);
  auto bp = bp_of(D);
  r.add("B1P2", b1p2_residual(D, bp), c.tol);
  auto ch = chi_fields(D, c.tol);
  r.add("chi_face", ch.face, c.tol);
  r.add("wilczynski_compatibility", wilczynski_compatibility(D, ch), c.tol);
  auto g = gauge_to_canonical(D, ch);
  r.add("gauge_pattern", g.pattern, c.tol);
  r.add("gauge_off_pattern", g.off_pattern, c.tol);
  r.add("gauge_invariants_vanish", g.e52, c.tol);
  r.add("gauge_xi_path", g.xi_path, c.tol);
  r.info["canonical_class"] = to_string(classify(g.states, c.tol));
  if (gauge_out) *gauge_out = std::move(g);
}

inline void write_outputs(const RunArtifacts& a, const RunOptions& o, const Json& raw) {
  namespace fs = std::filesystem;
  fs::create_directories(o.out_dir);
  auto name = [&](const char* key, const char* dflt) {
    if (raw.contains("outputs") && raw["outputs"].is_object() && raw["outputs"].contains(key) &&
        raw["outputs"][key].is_string())
      return raw["outputs"][key].get<std::string>();
    return std::string(dflt);
  };
  if (a.lattice_json) write_file((fs::path(o.out_dir) / name("lattice", "lattice.json")).string(), *a.lattice_json);
  if (a.mesh) write_file((fs::path(o.out_dir) / name("mesh", "mesh.obj")).string(), a.mesh->text);
  write_file((fs::path(o.out_dir) / name("report", "report.json")).string(), a.report.dump());
}

inline void attach_mesh(RunArtifacts& a, ObjMesh m) {
  a.report.info["mesh_vertices"] = m.vertices;
  a.report.info["mesh_faces"] = m.faces;
  Json sk = Json::array();
  for (auto [i, j] : m.skipped) sk.push_back(Json::array({i, j}));
  a.report.info["mesh_skipped"] = sk;
  a.mesh = std::move(m);
}

// ------------------------------------------------------------------- modes

inline void run_evolve(RunArtifacts& a, const RunConfig& c) {
  auto L = gmc_lattice(c);
  auto fr = build_frames(L, frame_seed(c), c.lambda);
  gmc_suite(a.report, L, c, fr);
  a.lattice_json = dump_lattice(to_file(L));
  attach_mesh(a, export_obj(frame_points(fr.F), c.chart));
}

inline void run_envelopes(RunArtifacts& a, const RunConfig& c) {
  auto L = gmc_lattice(c);
  auto fr = build_frames(L, frame_seed(c), 1.0);
  auto& r = a.report;
  gmc_suite(r, L, c, fr);
  auto cls = classify(L, c.tol);
  // Lie quadrics of the first cells: implicit equation, label matching, C1.
  Stat c1, imp, match;
  const int qn1 = std::min(L.n1() - 1, 8), qn2 = std::min(L.n2() - 1, 8);
  for (int i = 0; i < qn1; ++i)
    for (int j = 0; j < qn2; ++j) {
      auto Q = make_quadric(fr.F(i, j)), Q1 = make_quadric(fr.F(i + 1, j)), Q2 = make_quadric(fr.F(i, j + 1));
      c1.add(std::max(c1_residual(Q, Q1, 1), c1_residual(Q, Q2, 2)), i, j);
      imp.add(implicit_residual(Q), i, j);
      for (double t : {-1.0, 0.3, 2.0})
        match.add(std::max(label_matching_residual(fr.F(i, j), fr.F(i + 1, j), 1, t),
                           label_matching_residual(fr.F(i, j), fr.F(i, j + 1), 2, t)),
                  i, j);
    }
  r.add("quadric_implicit", imp, c.tol);
  r.add("quadric_label_matching", match, c.tol);
  r.add("quadric_tangent_planes", c1, c.tol);
  LatticeFile out = to_file(L);
  const EnvelopeField* mesh_field = nullptr;
  EnvelopeField generic;
  GrEnvelopes gr;
  DemoulinEnvelopes dem;
  if (cls == MinimalClass::Generic) {
    generic = build_envelope_generic(L, fr.F, label_of(c, "mu0", 0.3), label_of(c, "nu0", -0.7), c.tol);
    auto t = tangency_residuals(L, fr.F, generic);
    r.add("tangency_determinant", t.det, c.tol);
    r.add("tangency_factored", t.factored, c.tol, false);
    r.add("riccati_linear_agreement", linear_riccati_agreement(L, generic), c.tol);
    r.add("mu_compatibility", mu_compatibility(L, generic.mu), c.tol);
    r.add("nu_compatibility", nu_compatibility(L, generic.nu), c.tol);
    r.info["poles"] = generic.poles.size();
    mesh_field = &generic;
    add_points(out, "envelope", generic.points);
  } else if (cls == MinimalClass::GodeauxRozetT0 || cls == MinimalClass::GodeauxRozetTbar0) {
    gr = build_envelopes_gr(L, fr.F, label_of(c, "free0", 0.8), c.tol);
    r.add("shift_coincidence", gr.coincidence, c.tol);
    r.add("tangency_determinant", tangency_residuals(L, fr.F, gr.unshifted).det, c.tol);
    mesh_field = &gr.unshifted;
    add_points(out, "envelope", gr.unshifted.points);
    add_points(out, "envelope_shifted", gr.shifted.points);
  } else if (cls == MinimalClass::Demoulin || cls == MinimalClass::Tzitzeica) {
    dem = build_envelopes_demoulin(L, fr.F, c.tol);
    r.add("shift_coincidence", dem.coincidence, c.tol);
    r.add("tangency_determinant", tangency_residuals(L, fr.F, dem.fields[0]).det, c.tol);
    mesh_field = &dem.fields[0];
    for (int k = 0; k < 4; ++k) add_points(out, "envelope" + std::to_string(k) + "_", dem.fields[k].points);
  } else {
    throw degeneracy("NotApplicable", "no envelope construction for " + to_string(cls));
  }
  a.lattice_json = dump_lattice(out);
  attach_mesh(a, export_obj(mesh_field->points, c.chart));
}

inline void run_demoulin(RunArtifacts& a, const RunConfig& c) {
  auto D = dem_lattice(c, false, R"({"random": {}})");
  GaugeResult g;
  demoulin_suite(a.report, D, c, &g);
  auto fr = build_frames(g.states, frame_seed(c), 1.0);
  a.report.add("canonical_frame_path", fr.path, c.tol, false);
  LatticeFile f = to_file(D);
  auto bp = bp_of(D);
  f.add("B", bp.B.data());
  f.add("P", bp.P.data());
  f.add("kappa", g.kappa.data());
  f.add("xi", g.xi.data());
  a.lattice_json = dump_lattice(f);
  attach_mesh(a, export_obj(frame_points(fr.F), c.chart));
}

inline void run_tzitzeica(RunArtifacts& a, const RunConfig& c) {
  auto D = dem_lattice(c, true, R"({"random": {}})");
  auto& r = a.report;
  auto dr = dem_residuals(D);
  r.add("face_map", dr.face, c.tol);
  r.add("edge_relations", dr.first, c.tol);
  Mat4 seed = c.raw.contains("frame_seed") ? frame_seed(c) : affine_seed(D(0, 0).H);
  auto fr = scaled_frame(D, seed);
  r.add("scaled_frame_path", fr.path, c.tol, false);
  auto sph = affine_spheres(D, fr.F, c.chart, c.tol);
  r.add("conserved_vector_spread", sph.c_spread, c.tol);
  r.add("chart_coordinate_spread", sph.chart_spread, c.tol);
  r.add("difference_form", sph.e54, c.tol);
  r.add("second_order_projective", sph.e55, c.tol);
  r.add("affine_n1", sph.e57_1, c.tol);
  r.add("affine_mixed", sph.e57_2, c.tol);
  r.add("affine_n2", sph.e57_3, c.tol);
  r.info["conserved_vector"] = {sph.c[0], sph.c[1], sph.c[2], sph.c[3]};

  std::vector<double> s(D.n1(), num(c.raw, "s", "", 1.0)), sb(D.n2(), num(c.raw, "s_bar", "", 1.0));
  auto tf = tau_from_solution(D, 1.0, num(c.raw, "tau10", "", 0.9), num(c.raw, "tau01", "", 1.1), s, sb, c.tol);
  auto rec = tau_recover(tf, D);
  r.add("tau_recover_H", rec.H, c.tol);
  r.add("tau_recover_A", rec.A, c.tol);
  r.add("tau_recover_Q", rec.Q, c.tol);
  r.add("tau_determinant_identity", tau_determinant_identity(tf), c.tol);

  auto ch = chi_fields(D, c.tol);
  auto g = gauge_to_canonical(D, ch);
  if (g.states.n1() >= 5 && g.states.n2() >= 5) {
    auto tc = tau_layer_canonical(g.states, 1.0, c.tol);
    r.add("canonical_constraint", tc.e59, c.tol);
    r.add("canonical_tau_edge", tc.e60, c.tol);
    r.add("canonical_tau_second_order", tc.e62, c.tol);
    r.add("canonical_tau_shifted", tc.e61, c.tol);
    r.add("first_integral_s", tc.s_spread, c.tol);
    r.add("first_integral_s_bar", tc.s_bar_spread, c.tol);
    r.add("canonical_determinant_identity", tau_determinant_identity(tc.field), c.tol);
  }
  LatticeFile f = to_file(D);
  f.add("tau", tf.tau.data());
  a.lattice_json = dump_lattice(f);
  attach_mesh(a, export_obj(sph.points));
}

inline void run_backlund(RunArtifacts& a, const RunConfig& c) {
  auto D = dem_lattice(c, false, R"({"constant": {"H": 2, "K": 2, "A": 0.5, "Q": 1.5}})");
  auto& r = a.report;
  auto bp = bp_of(D);
  Json e = c.raw.contains("eigenfunction") ? c.raw["eigenfunction"] : Json::object({{"family", "plane-wave"}});
  if (!e.is_object()) schema_error("/eigenfunction", "object required");
  Grid<double> phi0, psi0;
  if (e.contains("family")) {
    if (e["family"] != "plane-wave") schema_error("/eigenfunction/family", "only 'plane-wave' is available");
    const auto& s = D(0, 0);
    for (const auto& x : D.data())
      if (x.H != s.H || x.K != s.H || (finite(x.A) && x.A != s.A) || (finite(x.Q) && x.Q != s.Q))
        throw config_error("NotConstant", "plane waves need a constant lattice with K = H");
    auto fam = plane_wave_family(D.n1(), D.n2(), plane_wave_basis(s.H, s.A, c.lambda0));
    if (e.contains("t")) {
      std::tie(phi0, psi0) = fam(num(e, "t", "/eigenfunction", 0.0));
    } else {
      double lo = -10, hi = 10;
      if (e.contains("bracket")) {
        const Json& br = e["bracket"];
        if (!br.is_array() || br.size() != 2 || !br[0].is_number() || !br[1].is_number())
          schema_error("/eigenfunction/bracket", "two numbers required");
        lo = br[0].get<double>();
        hi = br[1].get<double>();
      }
      auto cs = constraint_seed(D, fam, lo, hi, c.tol);
      phi0 = cs.phi;
      psi0 = cs.psi;
      r.info["t"] = cs.t;
      r.add("admissibility_constant", cs.constant, c.tol);
    }
  } else if (e.contains("seeds")) {
    auto three = [&](const char* k) {
      std::string p = std::string("/eigenfunction/seeds/") + k;
      if (!e["seeds"].contains(k)) schema_error(p, "required");
      auto v = generate(e["seeds"][k], 3, c.seed, p);
      return std::array<double, 3>{v[0], v[1], v[2]};
    };
    auto f = psi12_propagate<double>(D, bp, c.lambda0, three("phi"), three("psi"), c.tol);
    phi0 = f.phi;
    psi0 = f.psi;
  } else {
    schema_error("/eigenfunction", "family or seeds required");
  }
  LiftField<double> base{phi0, psi0};
  r.add("eigenfunction_linear_system", psi12_residuals(D, bp, c.lambda0, base).worst(), c.tol);
  auto e73 = e73_field(D, phi0, psi0);
  r.add("admissibility_constancy", e73.spread, c.tol);

  std::mt19937_64 rng(c.seed);
  std::normal_distribution<double> N01;
  std::array<double, 3> fs{N01(rng), N01(rng), N01(rng)}, ps{N01(rng), N01(rng), N01(rng)};
  auto lv = psi12_propagate<double>(D, bp, c.lambda, fs, ps, c.tol);
  auto pot = bilinear_potentials(D, phi0, psi0, lv, c.lambda, c.lambda0, c.tol);
  r.add("potential_closure", pot.closure, c.tol);
  r.add("potential_sum_vs_closed_form", pot.agreement, c.tol);
  auto bt = backlund_apply(D, bp, phi0, psi0, pot, c.lambda, c.tol);
  r.add("primed_face_map", bt.dem.face, c.tol);
  r.add("primed_edge_relations", bt.dem.first, c.tol);
  r.add("primed_BP", bt.bp_formula, c.tol);
  r.add("primed_B1P2", bt.b1p2, c.tol);
  r.add("primed_linear_system", bt.psi12.worst(), c.tol);
  r.info["H_prime_spread"] = bt.H_spread;
  auto coef = bt_coefficients(c.lambda, c.lambda0);
  r.info["coefficients"] = {coef.c0, coef.c1, coef.c2, coef.c3};

  std::array<double, 3> tseed{1.0, 1.1, 0.9}, sseed{1.2, 0.8, 1.05};
  auto ts = tau_sigma_layer(D, bp, tseed, sseed, c.tol);
  auto rep = tau_sigma_report(ts, D, bp);
  r.add("tau_sigma_recovery", rep.recovery, c.tol);
  r.add("tau_sigma_system", rep.e77, c.tol);
  r.add("tau_sigma_constraints", rep.e78, c.tol);
  auto tp = tau_sigma_transform(ts, phi0, psi0, bt.L.n1(), bt.L.n2());
  r.add("tau_sigma_transformed", tau_sigma_recovery(tp, bt.L, bt.bp), c.tol);

  LatticeFile f = to_file(bt.L);
  f.add("B", bt.bp.B.data());
  f.add("P", bt.bp.P.data());
  a.lattice_json = dump_lattice(f);
}

inline void run_verify(RunArtifacts& a, const RunConfig& c) {
  auto f = lattice_file(c);
  if (f && is_gmc_file(*f)) {
    auto L = gmc_from_file(*f);
    auto fr = build_frames(L, frame_seed(c), c.lambda);
    RunConfig cc = c;
    if (!c.raw.contains("class")) cc.cls = classify(L, c.tol);
    gmc_suite(a.report, L, cc, fr);
    return;
  }
  auto D = dem_lattice(c, false, R"({"constant": {"H": 2, "K": 2, "A": 0.5, "Q": 1.5}})");
  demoulin_suite(a.report, D, c);
}

inline void run_limit(RunArtifacts& a, const RunConfig& c) {
  std::vector<int> sizes = {4, 8, 16, 32, 64};
  if (c.raw.contains("sizes")) {
    const Json& s = c.raw["sizes"];
    if (!s.is_array() || s.size() < 2) schema_error("/sizes", "at least two grid sizes required");
    sizes.clear();
    for (size_t k = 0; k < s.size(); ++k) {
      if (!s[k].is_number_integer()) schema_error("/sizes/" + std::to_string(k), "integer required");
      sizes.push_back(s[k].get<int>());
    }
  }
  double min_order = num(c.raw, "min_order", "", 0.9);
  auto rows = continuum_convergence(default_smooth_seed(), sizes);
  Json table = Json::array();
  Stat increase, deficit;
  for (size_t k = 0; k < rows.size(); ++k) {
    table.push_back({{"n", rows[k].n}, {"defect", rows[k].defect}, {"order", number_or_null(rows[k].order)}});
    if (k > 0) {
      increase.add(std::max(0.0, rows[k].defect - rows[k - 1].defect), rows[k].n, 0);
      deficit.add(std::max(0.0, min_order - rows[k].order), rows[k].n, 0);
    }
  }
  a.report.info["convergence"] = table;
  a.report.add("defect_increase", increase, 0.0);
  a.report.add("order_deficit", deficit, 0.0);
}

inline void run_export(RunArtifacts& a, const RunConfig& c) {
  auto f = lattice_file(c);
  if (!f) schema_error("/lattice_file", "required for export");
  Grid<HPoint> P(f->n1, f->n2, HPoint::Zero());
  std::string prefix = c.raw.contains("points") && c.raw["points"].is_string() ? c.raw["points"].get<std::string>() : "x";
  if (f->has(prefix + "0")) {
    std::array<Grid<double>, 4> g{f->grid(prefix + "0"), f->grid(prefix + "1"), f->grid(prefix + "2"),
                                  f->grid(prefix + "3")};
    for (int i = 0; i < f->n1; ++i)
      for (int j = 0; j < f->n2; ++j) P(i, j) = HPoint(g[0](i, j), g[1](i, j), g[2](i, j), g[3](i, j));
  } else if (is_gmc_file(*f)) {
    P = frame_points(build_frames(gmc_from_file(*f), frame_seed(c), c.lambda).F);
  } else if (is_demoulin_file(*f)) {
    auto D = demoulin_from_file(*f);
    P = frame_points(wilczynski_frames(D, chi_fields(D, c.tol), frame_seed(c)).F);
  } else {
    schema_error("/lattice_file", "no point, net or Demoulin fields found");
  }
  attach_mesh(a, export_obj(P, c.chart));
}

}  // namespace detail

// Parses, overrides, runs the mode and writes the report (always), lattice
// JSON and OBJ mesh into out_dir. Returns the process exit code.
inline int run(const RunOptions& o, RunArtifacts* keep = nullptr) {
  RunArtifacts a;
  a.report.mode = o.mode;
  Json raw = Json::object();
  try {
    const auto& m = known_modes();
    if (std::find(m.begin(), m.end(), o.mode) == m.end()) throw config_error("UnknownMode", "mode '" + o.mode + "'");
    RunConfig c = parse_config(read_file(o.config_path));
    if (!c.mode.empty() && c.mode != o.mode) schema_error("/mode", "config is for '" + c.mode + "'");
    if (o.tol) {
      if (!(*o.tol > 0)) throw config_error("SchemaError", "--tol: must be positive");
      c.tol = *o.tol;
    }
    if (o.seed) c.seed = *o.seed;
    if (o.lambda) c.lambda = *o.lambda;
    if (o.lambda0) c.lambda0 = *o.lambda0;
    if (c.lambda == 0 || c.lambda0 == 0) throw config_error("ZeroLambda", "spectral parameters must be nonzero");
    c.raw["tol"] = c.tol;
    c.raw["seed"] = c.seed;
    c.raw["lambda"] = c.lambda;
    c.raw["lambda0"] = c.lambda0;
    raw = c.raw;
    c.hash = hex64(fnv1a(o.mode + "\n" + c.raw.dump()));
    c.raw["__dir"] = std::filesystem::path(o.config_path).parent_path().string();
    a.report.config_hash = c.hash;
    a.report.seed = c.seed;
    a.report.tol = c.tol;
    if (o.mode == "evolve") detail::run_evolve(a, c);
    else if (o.mode == "envelopes") detail::run_envelopes(a, c);
    else if (o.mode == "demoulin") detail::run_demoulin(a, c);
    else if (o.mode == "tzitzeica") detail::run_tzitzeica(a, c);
    else if (o.mode == "backlund") detail::run_backlund(a, c);
    else if (o.mode == "verify") detail::run_verify(a, c);
    else if (o.mode == "limit") detail::run_limit(a, c);
    else detail::run_export(a, c);
  } catch (const Error& e) {
    a.report.error = e;
  }
  RunOptions out = o;
  detail::write_outputs(a, out, raw);
  int code = a.report.exit_code();
  if (keep) *keep = std::move(a);
  return code;
}

}  // namespace prodisc
