#include "holodisc/cli.hpp"

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "holodisc/arc.hpp"
#include "holodisc/dbar.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"
#include "holodisc/runge.hpp"

namespace holodisc {

namespace {

using json = nlohmann::json;
using ojson = nlohmann::ordered_json;

constexpr double kTwoPi = 2.0 * kPi;

// ---------------------------------------------------------------------------
// Schema

json common_defaults() {
  return json{{"command", "solve"}, {"structure", "standard"}, {"resolution", 64},
              {"alpha", 0.5},       {"c0", 0.0},               {"tol", 0.0},
              {"epsilon", 0.1},     {"seed", 7},               {"target", "plane"},
              {"output", "out"}};
}

json command_defaults(const std::string& command) {
  if (command == "solve") {
    return json{{"initial_guess",
                 {{"kind", "polynomial"},
                  {"terms",
                   json::array({{{"component", 0}, {"coef", {1.0, 0.0}}, {"zeta", 1}, {"zetabar", 0}},
                                {{"component", 0}, {"coef", {0.05, 0.0}}, {"zeta", 0}, {"zetabar", 1}}})}}},
                {"domain", {{"kind", "disc"}, {"radius", 1.0}}},
                {"centered", false},
                {"full_newton", false},
                {"max_iter", 50},
                {"lipschitz_trials", 12}};
  }
  if (command == "arc") {
    return json{{"arc", {{"kind", "exp"}, {"x0", -0.5}, {"x1", 0.5}, {"samples", 129}}},
                {"m_start", 8},
                {"max_doublings", 10},
                {"nodes_across", 12},
                {"max_nodes", 40000},
                {"scaling_ms", json::array()},
                {"max_iter", 50},
                {"lipschitz_trials", 12}};
  }
  if (command == "graft-demo") {
    return json{{"phi",
                 {{"kind", "polynomial"},
                  {"terms",
                   json::array({{{"component", 0}, {"coef", {1.0, 0.0}}, {"zeta", 1}, {"zetabar", 0}},
                                {{"component", 0}, {"coef", {0.3, 0.0}}, {"zeta", 0}, {"zetabar", 1}}})}}},
                {"center", {0.0, 0.0}},
                {"radius", 0.1},
                {"blend_exponent", 0.5},
                {"identity_samples", 256}};
  }
  if (command == "poletsky" || command == "estimate") {
    json d{{"p", json::array({{0.0, 0.0}})},
           {"loop", nullptr},
           {"open_set", nullptr},
           {"boundary_samples", 4096},
           {"m_start", 8},
           {"center_radius", 0.05},
           {"max_grafts", 8},
           {"graft_max_radius", 0.1},
           {"blend_exponent", 0.5},
           {"max_piece_angle", kPi / 2.0}};
    if (command == "estimate") d["function"] = {{"kind", "neg_indicator"}};
    return d;
  }
  if (command == "catalog") return json::object();
  throw ConfigError("unknown command '" + command + "'");
}

/// 1-based line of the first occurrence of "key" in the raw text, or 0.
int key_line(const std::string& text, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  const auto pos = text.find(needle);
  if (pos == std::string::npos) return 0;
  int line = 1;
  for (std::size_t k = 0; k < pos; ++k)
    if (text[k] == '\n') ++line;
  return line;
}

std::string at_line(const std::string& text, const std::string& key) {
  const int l = key_line(text, key);
  return l > 0 ? "line " + std::to_string(l) + ": " : "";
}

json parse_json(const std::string& text) {
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("invalid JSON: ") + e.what());
  }
}

/// Merged, range-checked config including "output".
json validated(const std::string& text) {
  const json in = parse_json(text);
  if (!in.is_object()) throw ConfigError("line 1: config must be a JSON object");
  if (!in.contains("command") || !in["command"].is_string())
    throw ConfigError(at_line(text, "command") + "missing string key 'command'");
  const std::string command = in["command"];
  json cfg = common_defaults();
  json extra;
  try {
    extra = command_defaults(command);
  } catch (const ConfigError& e) {
    throw ConfigError(at_line(text, "command") + e.what());
  }
  cfg.update(extra);
  for (auto it = in.begin(); it != in.end(); ++it) {
    if (!cfg.contains(it.key()))
      throw ConfigError(at_line(text, it.key()) + "unknown key '" + it.key() + "' for command " + command);
    const json& def = cfg[it.key()];
    const json& val = it.value();
    const bool ok = def.is_null() || (def.is_number() && val.is_number()) ||
                    (def.is_boolean() && val.is_boolean()) ||
                    (def.is_string() && (val.is_string() || val.is_object())) ||
                    (def.is_array() && val.is_array()) ||
                    (def.is_object() && (val.is_object() || val.is_string()));
    if (!ok) throw ConfigError(at_line(text, it.key()) + "wrong type for '" + it.key() + "'");
    if (def.is_number_integer() && !val.is_number_integer())
      throw ConfigError(at_line(text, it.key()) + "'" + it.key() + "' must be an integer");
    cfg[it.key()] = val;
  }
  auto fail = [&](const std::string& key, const std::string& msg) {
    throw ConfigError(at_line(text, key) + "'" + key + "' " + msg);
  };
  const double alpha = cfg["alpha"];
  if (!(alpha > 0.0 && alpha < 1.0)) fail("alpha", "must lie in (0, 1)");
  if (cfg["resolution"].get<int>() < 8) fail("resolution", "must be at least 8");
  if (!(cfg["epsilon"].get<double>() > 0.0)) fail("epsilon", "must be positive");
  if (cfg["c0"].get<double>() < 0.0) fail("c0", "must be non-negative");
  if (cfg["tol"].get<double>() < 0.0) fail("tol", "must be non-negative");
  const std::string target = cfg["target"].is_string() ? cfg["target"].get<std::string>() : "";
  if (target != "plane" && target != "riemann_sphere") fail("target", "must be plane or riemann_sphere");
  if (command == "poletsky" || command == "estimate") {
    if (cfg["open_set"].is_null()) fail("open_set", "is required");
    if (cfg["boundary_samples"].get<int>() < 4096) fail("boundary_samples", "must be at least 4096");
  }
  if (command == "arc" && cfg["m_start"].get<int>() < 1) fail("m_start", "must be positive");
  if (command == "graft-demo" && !(cfg["radius"].get<double>() > 0.0)) fail("radius", "must be positive");
  return cfg;
}

std::string canonical(json cfg) {
  cfg.erase("output");
  return cfg.dump();
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

// ---------------------------------------------------------------------------
// Value parsing

cplx parse_cplx(const json& j, const std::string& what) {
  if (j.is_number()) return {j.get<double>(), 0.0};
  if (j.is_array() && j.size() == 2 && j[0].is_number() && j[1].is_number())
    return {j[0].get<double>(), j[1].get<double>()};
  throw ConfigError("'" + what + "' expects a number or [re, im]");
}

CVector parse_cvector(const json& j, int n, const std::string& what) {
  if (n == 1 && (j.is_number() || (j.is_array() && j.size() == 2 && j[0].is_number())))
    return CVector::Constant(1, parse_cplx(j, what));
  if (!j.is_array() || static_cast<int>(j.size()) != n)
    throw ConfigError("'" + what + "' expects " + std::to_string(n) + " complex entries");
  CVector v(n);
  for (int k = 0; k < n; ++k) v[k] = parse_cplx(j[k], what);
  return v;
}

TargetPoint parse_point(const json& j, const Target& t, const std::string& what) {
  if (j.is_string()) {
    if (j.get<std::string>() == "inf" && t.is_sphere()) return TargetPoint::infinity();
    throw ConfigError("'" + what + "': only \"inf\" on the sphere is a valid string point");
  }
  return TargetPoint::finite(parse_cvector(j, t.dimension(), what));
}

double num(const json& obj, const std::string& key, double def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number()) throw ConfigError("'" + key + "' must be a number");
  return obj[key].get<double>();
}

int inum(const json& obj, const std::string& key, int def) {
  if (!obj.contains(key)) return def;
  if (!obj[key].is_number_integer()) throw ConfigError("'" + key + "' must be an integer");
  return obj[key].get<int>();
}

void check_keys(const json& obj, const std::set<std::string>& allowed, const std::string& what) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!allowed.count(it.key())) throw ConfigError("unknown key '" + it.key() + "' in " + what);
}

struct StructureSpec {
  FieldPtr field;
  std::vector<StructureCatalogEntry> entry;  // empty or one catalog entry
};

StructureSpec parse_structure(const json& j) {
  auto by_name = [](const std::string& name, const json& params) -> StructureSpec {
    if (name == "standard") {
      const int n = inum(params, "dimension", 1);
      if (n < 1) throw ConfigError("structure dimension must be positive");
      StructureSpec s{make_standard(n), {}};
      for (auto& e : catalog())
        if ((n == 1 && e.name == "standard") || (n == 2 && e.name == "standard2")) s.entry = {e};
      return s;
    }
    if (name == "standard2") return {make_standard(2), {catalog()[1]}};
    if (name == "constant") {
      const cplx a = params.contains("a") ? parse_cplx(params["a"], "a") : cplx(0.5, 0.0);
      auto e = constant_entry(a);
      return {e.field, {e}};
    }
    if (name == "A_lambda") {
      auto e = a_lambda_entry(num(params, "lambda", 0.3));
      return {e.field, {e}};
    }
    throw ConfigError("unknown structure '" + name + "'");
  };
  if (j.is_string()) return by_name(j.get<std::string>(), json::object());
  if (!j.is_object()) throw ConfigError("'structure' must be a name or an object");
  if (j.contains("name")) {
    check_keys(j, {"name", "dimension", "a", "lambda"}, "structure");
    return by_name(j["name"].get<std::string>(), j);
  }
  const std::string kind = j.value("kind", "");
  if (kind == "constant_matrix") {
    check_keys(j, {"kind", "matrix"}, "structure");
    const json& m = j.at("matrix");
    const int n = static_cast<int>(m.size());
    if (n < 1) throw ConfigError("constant matrix must be non-empty");
    CMatrix a(n, n);
    for (int r = 0; r < n; ++r) {
      if (!m[r].is_array() || static_cast<int>(m[r].size()) != n)
        throw ConfigError("constant matrix must be square");
      for (int c = 0; c < n; ++c) a(r, c) = parse_cplx(m[r][c], "matrix");
    }
    return {std::make_shared<ConstantField>(a), {}};
  }
  if (kind == "polynomial") {
    check_keys(j, {"kind", "dimension", "terms", "label"}, "structure");
    const int n = inum(j, "dimension", 1);
    std::vector<PolynomialField::Term> terms;
    for (const auto& t : j.at("terms")) {
      check_keys(t, {"row", "col", "coef", "z_powers", "zbar_powers"}, "structure term");
      PolynomialField::Term term;
      term.row = inum(t, "row", 0);
      term.col = inum(t, "col", 0);
      term.coef = parse_cplx(t.at("coef"), "coef");
      term.z_powers = t.value("z_powers", std::vector<int>(n, 0));
      term.zbar_powers = t.value("zbar_powers", std::vector<int>(n, 0));
      if (term.row < 0 || term.row >= n || term.col < 0 || term.col >= n ||
          static_cast<int>(term.z_powers.size()) != n || static_cast<int>(term.zbar_powers.size()) != n)
        throw ConfigError("polynomial structure term out of range");
      terms.push_back(term);
    }
    return {std::make_shared<PolynomialField>(n, terms, j.value("label", "polynomial")), {}};
  }
  throw ConfigError("structure object needs 'name' or kind constant_matrix / polynomial");
}

/// Polynomial map sum coef * zeta^p conj(zeta)^q per component.
std::function<CVector(cplx)> parse_polynomial_map(const json& j, int n, const std::string& what) {
  check_keys(j, {"kind", "terms"}, what);
  struct Term {
    int comp, p, q;
    cplx coef;
  };
  std::vector<Term> terms;
  for (const auto& t : j.at("terms")) {
    check_keys(t, {"component", "coef", "zeta", "zetabar"}, what + " term");
    Term term{inum(t, "component", 0), inum(t, "zeta", 0), inum(t, "zetabar", 0),
              parse_cplx(t.at("coef"), "coef")};
    if (term.comp < 0 || term.comp >= n || term.p < 0 || term.q < 0)
      throw ConfigError(what + " term out of range");
    terms.push_back(term);
  }
  return [terms, n](cplx z) {
    CVector v = CVector::Zero(n);
    for (const auto& t : terms)
      v[t.comp] += t.coef * std::pow(z, t.p) * std::pow(std::conj(z), t.q);
    return v;
  };
}

Domain parse_domain(const json& j) {
  const std::string kind = j.value("kind", "disc");
  if (kind == "disc") {
    check_keys(j, {"kind", "radius"}, "domain");
    return Domain::disc(num(j, "radius", 1.0));
  }
  if (kind == "tube") {
    check_keys(j, {"kind", "x0", "x1", "width"}, "domain");
    return Domain::tube(num(j, "x0", -0.5), num(j, "x1", 0.5), num(j, "width", 0.1));
  }
  if (kind == "annulus") {
    check_keys(j, {"kind", "r0", "r1"}, "domain");
    return Domain::annulus(num(j, "r0", 0.5), num(j, "r1", 1.0));
  }
  throw ConfigError("unknown domain kind '" + kind + "'");
}

Target parse_target(const json& cfg, const StructureSpec& s) {
  if (cfg["target"] == "riemann_sphere") return Target::sphere();
  return Target::plane(s.field);
}

// ---------------------------------------------------------------------------
// Output

class Output {
 public:
  explicit Output(std::string dir) : dir_(std::move(dir)) {
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw InvalidArgument("cannot create output directory " + dir_ + ": " + ec.message());
  }
  std::string path(const std::string& name) {
    files_.push_back(name);
    return (std::filesystem::path(dir_) / name).string();
  }
  const std::vector<std::string>& files() const { return files_; }

 private:
  std::string dir_;
  std::vector<std::string> files_;
};

std::string fmt(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

/// Chart-z coordinates of a target map (non-finite at the point at infinity).
GridMap chart_z(const TargetMap& u) {
  if (std::all_of(u.chart.begin(), u.chart.end(), [](std::uint8_t c) { return c == 0; }))
    return GridMap(u.coords.grid, u.coords.values);
  GridMap out(u.coords.grid, 1);
  for (std::size_t i = 0; i < u.size(); ++i) out.values(static_cast<Eigen::Index>(i), 0) = u.coordinate(i, 0);
  return out;
}

ojson grid_json(const DiscGrid& g) {
  return ojson{{"domain", g.domain().name()},
               {"resolution", g.resolution()},
               {"nodes", g.size()},
               {"spacing", g.spacing()}};
}

ojson vec_json(const CVector& v) {
  ojson a = ojson::array();
  for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back({v[k].real(), v[k].imag()});
  return a;
}

NewtonOptions newton_options(const json& cfg) {
  NewtonOptions o;
  o.c0 = cfg["c0"];
  o.tol = cfg["tol"];
  o.seed = cfg["seed"].get<std::uint64_t>();
  if (cfg.contains("max_iter")) o.max_iter = cfg["max_iter"];
  if (cfg.contains("lipschitz_trials")) o.lipschitz_trials = cfg["lipschitz_trials"];
  if (cfg.contains("centered")) o.centered = cfg["centered"];
  if (cfg.contains("full_newton")) o.full_newton = cfg["full_newton"];
  return o;
}

// ---------------------------------------------------------------------------
// Commands

int cmd_solve(const json& cfg, ojson& rep, Output& out) {
  const StructureSpec s = parse_structure(cfg["structure"]);
  const int n = s.field->dimension();
  const GridPtr grid = build_grid(parse_domain(cfg["domain"]), cfg["resolution"]);
  rep["grid"] = grid_json(*grid);
  const json& ig = cfg["initial_guess"];
  const std::string kind = ig.value("kind", "polynomial");
  std::function<CVector(cplx)> phi_fn;
  std::function<CVector(cplx)> exact;
  if (kind == "polynomial") {
    phi_fn = parse_polynomial_map(ig, n, "initial_guess");
  } else if (kind == "catalog_solution") {
    check_keys(ig, {"kind", "index", "bump_amplitude", "bump_center", "bump_radius"}, "initial_guess");
    if (s.entry.empty()) throw ConfigError("catalog_solution needs a catalog structure");
    const auto& sols = s.entry.front().known_solutions;
    const int idx = inum(ig, "index", 0);
    if (idx < 0 || idx >= static_cast<int>(sols.size())) throw ConfigError("catalog solution index out of range");
    exact = sols[idx].value;
    const double amp = num(ig, "bump_amplitude", 0.0);
    const cplx c = ig.contains("bump_center") ? parse_cplx(ig["bump_center"], "bump_center") : cplx(0.0, 0.0);
    const double r = num(ig, "bump_radius", 0.5);
    if (!(r > 0.0)) throw ConfigError("bump_radius must be positive");
    phi_fn = [exact, amp, c, r, n](cplx z) {
      CVector v = exact(z);
      const double s2 = std::norm(z - c) / (r * r);
      if (s2 < 1.0) v += CVector::Constant(n, amp * std::exp(1.0 - 1.0 / (1.0 - s2)));
      return v;
    };
    rep["known_solution"] = sols[idx].formula;
  } else {
    throw ConfigError("unknown initial_guess kind '" + kind + "'");
  }
  const GridMap phi = sample_map(grid, n, phi_fn);
  DbarProblem problem{s.field, grid, phi, cfg["alpha"]};
  rep["structure"] = s.field->describe();
  rep["residual_initial_sup"] = interior_sup(residual(problem, phi));
  write_csv(phi, out.path("phi.csv"), problem.alpha);
  NewtonResult res = newton_solve(problem, newton_options(cfg));
  rep["certificate"] = ojson::parse(certificate_json(res.cert));
  if (exact) rep["known_solution_error"] = sup_norm(res.u - sample_map(grid, n, exact));
  write_csv(res.u, out.path("u.csv"), problem.alpha);
  return res.cert.hypothesis_met ? 0 : 2;
}

ArcData parse_arc(const json& a) {
  const std::string kind = a.value("kind", "exp");
  check_keys(a, {"kind", "x0", "x1", "samples", "power", "path"}, "arc");
  if (kind == "csv") {
    if (!a.contains("path")) throw ConfigError("csv arc needs 'path'");
    return ArcData::from_csv(a["path"].get<std::string>());
  }
  const double x0 = num(a, "x0", -0.5), x1 = num(a, "x1", 0.5);
  const int samples = inum(a, "samples", 129);
  if (kind == "exp") {
    auto f = [](double x) { return CVector::Constant(1, cplx(std::exp(x), 0.0)); };
    return ArcData::from_function(x0, x1, samples, f, f, f);
  }
  if (kind == "power") {
    const int k = inum(a, "power", 2);
    if (k < 0) throw ConfigError("power must be non-negative");
    auto p = [k](double x, int d) {
      double c = 1.0;
      for (int j = 0; j < d; ++j) c *= (k - j);
      return CVector::Constant(1, cplx(k >= d ? c * std::pow(x, k - d) : 0.0, 0.0));
    };
    return ArcData::from_function(x0, x1, samples, [p](double x) { return p(x, 0); },
                                  [p](double x) { return p(x, 1); }, [p](double x) { return p(x, 2); });
  }
  throw ConfigError("unknown arc kind '" + kind + "'");
}

int cmd_arc(const json& cfg, ojson& rep, Output& out) {
  const StructureSpec s = parse_structure(cfg["structure"]);
  const ArcData arc = parse_arc(cfg["arc"]);
  if (arc.dimension() != s.field->dimension()) throw ConfigError("arc data dimension does not match the structure");
  rep["structure"] = s.field->describe();
  rep["arc"] = {{"x0", arc.x0()}, {"x1", arc.x1()}, {"samples", arc.sample_count()},
                {"consistency_defect", arc.consistency_defect()}};
  const int nodes_across = cfg["nodes_across"];
  // Jet residual scaling over the requested m.
  ojson scaling = ojson::array();
  std::vector<double> lm, lr;
  for (const auto& mj : cfg["scaling_ms"]) {
    const int m = mj.get<int>();
    const TubeDomain tube = make_tube(arc, m, nodes_across);
    const GridMap jet = jet_extension(arc, *s.field, tube.grid);
    DbarProblem pr{s.field, tube.grid, jet, cfg["alpha"]};
    const GridMap f = residual(pr, jet);
    const double sup_all = sup_norm(f);
    scaling.push_back({{"m", m},
                       {"resolution", tube.grid->resolution()},
                       {"nodes", tube.grid->size()},
                       {"residual_sup", sup_all},
                       {"residual_interior_sup", interior_sup(f)}});
    if (sup_all > 0.0) {
      lm.push_back(std::log(static_cast<double>(m)));
      lr.push_back(std::log(sup_all));
    }
  }
  rep["jet_scaling"] = scaling;
  if (lm.size() >= 2) {
    double mx = 0, my = 0;
    for (std::size_t k = 0; k < lm.size(); ++k) mx += lm[k], my += lr[k];
    mx /= lm.size();
    my /= lm.size();
    double sxy = 0, sxx = 0;
    for (std::size_t k = 0; k < lm.size(); ++k) sxy += (lm[k] - mx) * (lr[k] - my), sxx += (lm[k] - mx) * (lm[k] - mx);
    rep["jet_scaling_slope"] = sxy / sxx;
  }
  ShrinkOptions so;
  so.alpha = cfg["alpha"];
  so.max_doublings = cfg["max_doublings"];
  so.nodes_across = nodes_across;
  so.max_nodes = cfg["max_nodes"].get<std::size_t>();
  so.newton = newton_options(cfg);
  ShrinkResult res;
  try {
    res = shrink_solve(arc, s.field, cfg["epsilon"], cfg["m_start"], so);
  } catch (const Exhausted& e) {
    rep["error"] = {{"stage", "shrink_solve"}, {"kind", e.kind()}, {"message", e.what()}};
    return 1;
  }
  rep["grid"] = grid_json(*res.u.grid);
  rep["m"] = res.m;
  rep["shrink_log"] = ojson::parse(shrink_log_json(res.log));
  rep["certificate"] = ojson::parse(certificate_json(res.cert));
  write_csv(res.u, out.path("tube_solution.csv"), so.alpha);
  write_csv(jet_extension(arc, *s.field, res.u.grid), out.path("jet.csv"), so.alpha);
  return res.cert.hypothesis_met ? 0 : 2;
}

int cmd_graft(const json& cfg, ojson& rep, Output& out) {
  const StructureSpec s = parse_structure(cfg["structure"]);
  const Target t = parse_target(cfg, s);
  const GridPtr grid = build_grid(Domain::unit_disc(), cfg["resolution"]);
  rep["grid"] = grid_json(*grid);
  rep["target"] = t.name();
  const auto phi_fn = parse_polynomial_map(cfg["phi"], t.dimension(), "phi");
  const TargetMap phi = make_target_map(t, grid, [&](cplx z) {
    const CVector v = phi_fn(z);
    return t.is_sphere() ? TargetPoint::scalar(v[0]) : TargetPoint::finite(v);
  });
  const cplx z0 = parse_cplx(cfg["center"], "center");
  const double r = cfg["radius"];
  const std::size_t near = grid->nearest(z0, 1).front();
  const int chart = phi.chart[near];
  const LocalExpansion le = local_expansion(phi, z0, chart);
  Graft g{z0, le.c, le.a, le.b, r, cfg["blend_exponent"], chart};
  double identity = 0.0;
  const int ns = cfg["identity_samples"];
  for (int k = 0; k < ns; ++k) {
    const cplx d = std::polar(r, kTwoPi * k / ns);
    const CVector lin = g.c + d * g.a + std::conj(d) * g.b;
    identity = std::max(identity, (g.value(z0 + d) - lin).norm());
  }
  GraftReport gr;
  const TargetMap grafted = apply_graft(t, phi, g, &gr);
  rep["graft"] = ojson::parse(graft_json(g));
  rep["circle_identity_error"] = identity;
  rep["residual_before_inside"] = gr.residual_before_inside;
  rep["residual_after_inside"] = gr.residual_after_inside;
  rep["residual_blend"] = gr.residual_blend;
  write_csv(chart_z(phi), out.path("phi.csv"), cfg["alpha"]);
  write_csv(chart_z(grafted), out.path("grafted.csv"), cfg["alpha"]);
  return 0;
}

OpenSet parse_open_set(const json& j, const Target& t, const BoundaryLoop* loop) {
  if (!j.is_object()) throw ConfigError("'open_set' must be an object");
  const std::string kind = j.value("kind", "");
  if (kind == "ball") {
    check_keys(j, {"kind", "center", "radius"}, "open_set");
    return OpenSet::ball(t, parse_point(j.at("center"), t, "center"), num(j, "radius", 1.0));
  }
  if (kind == "chordal_ball") {
    check_keys(j, {"kind", "center", "radius"}, "open_set");
    if (!t.is_sphere()) throw ConfigError("chordal_ball needs the riemann_sphere target");
    return OpenSet::chordal_ball(parse_point(j.at("center"), t, "center"), num(j, "radius", 0.3));
  }
  if (kind == "annulus") {
    check_keys(j, {"kind", "center", "r_inner", "r_outer"}, "open_set");
    const CVector c = j.contains("center") ? parse_cvector(j["center"], t.dimension(), "center")
                                           : CVector::Zero(t.dimension());
    return OpenSet::annulus(t, c, num(j, "r_inner", 0.5), num(j, "r_outer", 1.0));
  }
  if (kind == "loop_neighborhood") {
    check_keys(j, {"kind", "radius"}, "open_set");
    if (!loop) throw ConfigError("loop_neighborhood needs an explicit 'loop'");
    return OpenSet::loop_neighborhood(*loop, num(j, "radius", 0.1));
  }
  throw ConfigError("unknown open_set kind '" + kind + "'");
}

BoundaryLoop parse_loop(const json& j, const Target& t) {
  if (!j.is_object()) throw ConfigError("'loop' must be an object");
  const std::string kind = j.value("kind", "");
  if (kind == "circle") {
    check_keys(j, {"kind", "center", "radius"}, "loop");
    const int n = t.dimension();
    const CVector c = j.contains("center") ? parse_cvector(j["center"], n, "center") : CVector::Zero(n);
    CVector rv = CVector::Zero(n);
    if (j.contains("radius")) {
      if (j["radius"].is_number()) rv[0] = j["radius"].get<double>();
      else rv = parse_cvector(j["radius"], n, "radius");
    } else {
      rv[0] = 1.0;
    }
    return BoundaryLoop::circle(t, c, rv);
  }
  if (kind == "constant") {
    check_keys(j, {"kind", "value"}, "loop");
    return BoundaryLoop::constant(t, parse_point(j.at("value"), t, "value"));
  }
  if (kind == "excursion") {
    check_keys(j, {"kind", "amplitude", "k"}, "loop");
    if (!t.is_sphere()) throw ConfigError("excursion loops need the riemann_sphere target");
    return BoundaryLoop::excursion(num(j, "amplitude", 1.0), inum(j, "k", 1));
  }
  throw ConfigError("unknown loop kind '" + kind + "'");
}

int cmd_poletsky(const json& cfg, ojson& rep, Output& out, bool estimate) {
  const StructureSpec s = parse_structure(cfg["structure"]);
  const Target t = parse_target(cfg, s);
  rep["target"] = t.name();
  const TargetPoint p = parse_point(cfg["p"], t, "p");
  std::unique_ptr<BoundaryLoop> loop;
  if (!cfg["loop"].is_null()) loop = std::make_unique<BoundaryLoop>(parse_loop(cfg["loop"], t));
  const OpenSet u_set = parse_open_set(cfg["open_set"], t, loop.get());
  PoletskyOptions po;
  po.resolution = cfg["resolution"];
  po.boundary_samples = cfg["boundary_samples"];
  po.m_start = cfg["m_start"];
  po.center_radius = cfg["center_radius"];
  po.alpha = cfg["alpha"];
  po.max_grafts = cfg["max_grafts"];
  po.graft_max_radius = cfg["graft_max_radius"];
  po.blend_exponent = cfg["blend_exponent"];
  po.max_piece_angle = cfg["max_piece_angle"];
  const double eps = cfg["epsilon"];
  PoletskyDisc disc;
  try {
    disc = poletsky_disc(t, p, u_set, eps, loop.get(), po);
  } catch (const PipelineFailed& e) {
    rep["stages"] = ojson::parse(e.report());
    rep["error"] = {{"stage", e.stage()}, {"kind", e.kind()}, {"message", e.what()}};
    return 1;
  }
  rep["grid"] = grid_json(*disc.u.coords.grid);
  rep["stages"] = ojson::parse(stages_json(disc.provenance));
  ojson grafts = ojson::array();
  for (const auto& g : disc.grafts) grafts.push_back(ojson::parse(graft_json(g)));
  rep["grafts"] = grafts;
  rep["exceptional_measure"] = disc.exceptional_measure;
  rep["exceptional_measure_2n"] = disc.exceptional_measure_2n;
  rep["boundary_samples"] = disc.boundary_samples;
  rep["base_point_error"] = disc.base_point_error;
  rep["success"] = disc.success;

  // Boundary trace: t, chart-z value, in_U flag and distance to the loop.
  const BoundaryLoop& lam = loop ? *loop : BoundaryLoop::constant(t, u_set.center);
  const TargetSampler sampler(disc.u);
  {
    std::ofstream f(out.path("boundary_trace.csv"));
    const int n = t.dimension();
    f << "t";
    for (int k = 0; k < n; ++k) f << ",re_u" << k + 1;
    for (int k = 0; k < n; ++k) f << ",im_u" << k + 1;
    f << ",in_U,dist_lambda\n";
    const int ns = disc.boundary_samples;
    for (int j = 0; j < ns; ++j) {
      const double tj = kTwoPi * j / ns;
      const TargetPoint q = sampler(std::polar(1.0, tj));
      f << fmt(tj);
      for (int k = 0; k < n; ++k) f << "," << (q.at_infinity ? "inf" : fmt(q.z[k].real()));
      for (int k = 0; k < n; ++k) f << "," << (q.at_infinity ? "inf" : fmt(q.z[k].imag()));
      f << "," << (u_set.contains(q) ? 1 : 0) << "," << fmt(target_distance(t, q, lam.eval(tj))) << "\n";
    }
  }
  write_csv(chart_z(disc.u), out.path("disc.csv"), po.alpha);

  if (estimate) {
    const json& fn = cfg["function"];
    check_keys(fn, {"kind"}, "function");
    if (fn.value("kind", "") != "neg_indicator") throw ConfigError("function kind must be neg_indicator");
    const double est = functional_estimate(
        [&](const TargetPoint& q) { return u_set.contains(q) ? -1.0 : 0.0; }, p, {disc},
        disc.boundary_samples);
    rep["estimate"] = est;
    rep["indicator_bound"] = -(1.0 - eps / kTwoPi) + kTwoPi / disc.boundary_samples;
  }
  return disc.success ? 0 : 1;
}

int cmd_catalog(ojson& rep) {
  ojson list = ojson::array();
  for (const auto& e : catalog()) {
    ojson sols = ojson::array();
    for (const auto& s : e.known_solutions) sols.push_back({{"formula", s.formula}, {"derivation", s.provenance}});
    list.push_back({{"name", e.name},
                    {"dimension", e.field->dimension()},
                    {"description", e.field->describe()},
                    {"known_solutions", sols}});
  }
  rep["entries"] = list;
  return 0;
}

}  // namespace

std::uint64_t fnv1a(const std::string& data) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : data) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string validate_config(const std::string& text) { return canonical(validated(text)); }

RunResult run_config(const std::string& text, const std::string& output_dir, bool sequential) {
  if (sequential) force_sequential(true);
  RunResult result;
  json cfg;
  ojson rep;
  rep["version"] = std::string(kVersion);
  try {
    cfg = validated(text);
  } catch (const ConfigError& e) {
    result.exit_code = 1;
    result.message = e.what();
    rep["error"] = {{"stage", "config"}, {"kind", e.kind()}, {"message", e.what()}};
    result.report = rep.dump(2) + "\n";
    return result;
  }
  const std::string canon = canonical(cfg);
  const std::string command = cfg["command"];
  rep["command"] = command;
  rep["config_hash"] = hex64(fnv1a(canon));
  rep["config"] = ojson::parse(canon);
  Output out(output_dir.empty() ? cfg["output"].get<std::string>() : output_dir);
  try {
    if (command == "solve") result.exit_code = cmd_solve(cfg, rep, out);
    else if (command == "arc") result.exit_code = cmd_arc(cfg, rep, out);
    else if (command == "graft-demo") result.exit_code = cmd_graft(cfg, rep, out);
    else if (command == "poletsky") result.exit_code = cmd_poletsky(cfg, rep, out, false);
    else if (command == "estimate") result.exit_code = cmd_poletsky(cfg, rep, out, true);
    else result.exit_code = cmd_catalog(rep);
  } catch (const Error& e) {
    result.exit_code = 1;
    if (!rep.contains("error")) rep["error"] = {{"stage", command}, {"kind", e.kind()}, {"message", e.what()}};
  } catch (const json::exception& e) {
    result.exit_code = 1;
    rep["error"] = {{"stage", "config"}, {"kind", "ConfigError"}, {"message", e.what()}};
  }
  rep["exit_code"] = result.exit_code;
  if (rep.contains("error")) {
    result.message = rep["error"]["stage"].get<std::string>() + ": " + rep["error"]["message"].get<std::string>();
  } else {
    result.message = command + " finished with exit code " + std::to_string(result.exit_code);
  }
  result.report = rep.dump(2) + "\n";
  {
    std::ofstream f(out.path("report.json"), std::ios::binary);
    f << result.report;
  }
  result.files = out.files();
  return result;
}

}  // namespace holodisc
