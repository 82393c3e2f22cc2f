// Acceptance run: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include <json.hpp>

#include "holodisc/cli.hpp"
#include "holodisc/dbar.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"
#include "holodisc/runge.hpp"

using namespace holodisc;
using nlohmann::json;

namespace {

constexpr double kTwoPi = 2.0 * kPi;

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[128];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

CVector vec1(cplx a) { return CVector::Constant(1, a); }

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot read " + path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::string config_dir;
std::string scratch_dir;

RunResult run_shipped(const std::string& name, const std::string& tag) {
  const std::string out = scratch_dir + "/" + name + "_" + tag;
  std::filesystem::remove_all(out);
  return run_config(read_file(config_dir + "/" + name + ".json"), out, true);
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// 1. Structure algebra.
Outcome structure_algebra() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-0.7, 0.7);
  double worst = 0.0, worst_st = 0.0;
  for (const auto& e : catalog()) {
    const int n = e.field->dimension();
    const RealStructureField j = real_structure_of(e.field);
    for (int k = 0; k < 200; ++k) {
      RVector x(2 * n);
      for (int i = 0; i < 2 * n; ++i) x[i] = u(rng);
      const RMatrix m = j.eval(x);
      worst = std::max(worst, (m * m + RMatrix::Identity(2 * n, 2 * n)).norm());
      worst_st = std::max(worst_st, complex_matrix_of(standard_structure(n)).cwiseAbs().maxCoeff());
    }
  }
  const double t = seconds_since(t0);
  return {worst <= 1e-10 && worst_st == 0.0 && t < 1.0,
          "max |J^2+I| = " + fmt("%.2e", worst) + ", max |A(J_st)| = " + fmt("%.1g", worst_st) +
              ", " + fmt("%.2f s", t)};
}

// 2. Cauchy-Green identity and dbar o T convergence.
Outcome cauchy_green_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  double t1err[3], dbar[3];
  const int res[3] = {32, 64, 128};
  for (int k = 0; k < 3; ++k) {
    const GridPtr g = build_grid(Domain::unit_disc(), res[k]);
    const GridMap one = constant_map(g, vec1(1.0));
    const GridMap zbar = sample_map(g, 1, [](cplx z) { return vec1(std::conj(z)); });
    t1err[k] = sup_norm(cauchy_green(one) - zbar);
    const GridMap zeta = sample_map(g, 1, [](cplx z) { return vec1(z); });
    dbar[k] = sup_norm(wirtinger(cauchy_green(zeta)).second - zeta, g->interior_nodes());
  }
  const double order = std::log2(dbar[0] / dbar[2]) / 2.0;
  const double t = seconds_since(t0);
  const bool ok = t1err[1] <= 5e-3 && t1err[2] <= t1err[1] / 2.0 && order >= 1.0 && t < 30.0;
  return {ok, "T(1) error " + fmt("%.2e", t1err[1]) + " (64), " + fmt("%.2e", t1err[2]) +
                  " (128); dbar T order " + fmt("%.2f", order) + ", " + fmt("%.1f s", t)};
}

// 3. One-step Newton exactness.
Outcome one_step_newton() {
  const GridPtr g = build_grid(Domain::unit_disc(), 64);
  const GridMap phi = sample_map(g, 1, [](cplx z) { return vec1(z + 0.05 * std::conj(z)); });
  const NewtonResult r = newton_solve({make_standard(1), g, phi, 0.5});
  const double err = sup_norm(r.u - sample_map(g, 1, [](cplx z) { return vec1(z); }));
  const RunResult cli = run_shipped("solve", "a");
  const json rep = json::parse(cli.report);
  const bool ok = r.cert.iterations == 1 && err <= 1e-4 && cli.exit_code == 0 &&
                  rep["certificate"]["iterations"] == 1;
  return {ok, "iterations " + std::to_string(r.cert.iterations) + ", |u - zeta| = " + fmt("%.2e", err) +
                  ", cli exit " + std::to_string(cli.exit_code)};
}

// 4. Certified perturbation recovery for A_lambda.
Outcome perturbation_recovery() {
  const auto t0 = std::chrono::steady_clock::now();
  const double lam = 0.3;
  const GridPtr g = build_grid(Domain::unit_disc(), 64);
  const GridMap phi = sample_map(g, 2, [&](cplx z) {
    const double bump = 0.01 * std::exp(-4.0 * std::norm(z));
    CVector v(2);
    v << z + bump, -lam * std::norm(z) + bump;
    return v;
  });
  NewtonOptions o;
  o.tol = 1e-9;
  const NewtonResult r = newton_solve({make_a_lambda(lam), g, phi, 0.5}, o);
  const GridMap exact = sample_map(g, 2, [&](cplx z) {
    CVector v(2);
    v << z, -lam * std::norm(z);
    return v;
  });
  const double t = seconds_since(t0);
  const bool bound_ok = !r.cert.hypothesis_met || r.cert.achieved_distance <= 1.05 * r.cert.posterior_bound;
  return {r.cert.final_residual <= 1e-7 && bound_ok && t < 120.0,
          "final residual " + fmt("%.2e", r.cert.final_residual) + ", hypothesis_met " +
              (r.cert.hypothesis_met ? "true" : "false") + ", distance " + fmt("%.3e", r.cert.achieved_distance) +
              " vs bound " + fmt("%.3e", r.cert.posterior_bound) + ", |u - exact| " +
              fmt("%.1e", sup_norm(r.u - exact)) + ", " + fmt("%.1f s", t)};
}

// 5. Jet residual scaling and shrink_solve.
Outcome jet_scaling() {
  const RunResult cli = run_shipped("arc", "a");
  const json rep = json::parse(cli.report);
  if (!rep.contains("jet_scaling_slope")) return {false, "arc run failed: " + cli.message};
  const double slope = rep["jet_scaling_slope"];
  const double dist = rep["shrink_log"].back()["distance"];
  const bool shrink_ok = rep["shrink_log"].back()["success"] == true && dist < 1e-2;
  auto sq = ArcData::from_function(
      -0.5, 0.5, 65, [](double x) { return vec1(x * x); }, [](double x) { return vec1(2.0 * x); },
      [](double) { return vec1(2.0); });
  const FieldPtr st = make_standard(1);
  double sq_res = 0.0;
  for (int m : {8, 16, 32, 64}) {
    const TubeDomain tube = make_tube(sq, m);
    const GridMap jet = jet_extension(sq, *st, tube.grid);
    sq_res = std::max(sq_res, sup_norm(residual({st, tube.grid, jet, 0.5}, jet)));
  }
  return {std::abs(slope + 2.0) <= 0.2 && shrink_ok && sq_res <= 1e-10,
          "slope " + fmt("%.3f", slope) + ", shrink distance " + fmt("%.2e", dist) + " at m = " +
              std::to_string(rep["m"].get<int>()) + ", x^2 jet residual " + fmt("%.1e", sq_res)};
}

// 6. Graft identity and effect.
Outcome graft_identity() {
  const Graft probe{{0.2, 0.1}, vec1(0.0), vec1(1.0), vec1(0.2), 0.1, 0.5, 0};
  double identity = 0.0;
  for (int k = 0; k < 1000; ++k) {
    const cplx d = std::polar(0.1, kTwoPi * k / 1000.0);
    identity = std::max(identity, std::abs(probe.value(probe.center + d)[0] - (d + 0.2 * std::conj(d))));
  }
  const GridPtr grid = build_grid(Domain::unit_disc(), 64);
  const Target s = Target::sphere();
  const TargetMap phi =
      make_target_map(s, grid, [](cplx z) { return TargetPoint::scalar(z + 0.3 * std::conj(z)); });
  const LocalExpansion le = local_expansion(phi, 0.0, 0);
  GraftReport rep;
  apply_graft(s, phi, Graft{0.0, le.c, le.a, le.b, 0.1, 0.5, 0}, &rep);
  return {identity <= 1e-12 && rep.residual_after_inside <= 0.01 &&
              std::abs(rep.residual_before_inside - 0.3) <= 1e-6,
          "circle identity " + fmt("%.1e", identity) + ", interior residual " +
              fmt("%.3f", rep.residual_before_inside) + " -> " + fmt("%.1e", rep.residual_after_inside)};
}

// 7. Plane pipeline; the run also feeds criterion 10.
Outcome plane_pipeline() {
  const auto t0 = std::chrono::steady_clock::now();
  const RunResult cli = run_shipped("poletsky_plane", "a");
  const double t = seconds_since(t0);
  const json rep = json::parse(cli.report);
  if (!rep.contains("exceptional_measure")) return {false, "pipeline failed: " + cli.message};
  const double e = rep["exceptional_measure"], base = rep["base_point_error"];
  return {cli.exit_code == 0 && e < 0.1 && base <= 1e-6 && t < 300.0,
          "exceptional measure " + fmt("%.4f", e) + ", |u(0) - p| " + fmt("%.1e", base) + ", " +
              fmt("%.1f s", t)};
}

// 8. Sphere pipeline on the shipped default config.
Outcome sphere_pipeline() {
  const RunResult cli = run_shipped("poletsky_sphere", "a");
  const json rep = json::parse(cli.report);
  if (!rep.contains("exceptional_measure")) {
    const std::string stage = rep.contains("error") ? rep["error"]["stage"].get<std::string>() : "?";
    return {false, "PipelineFailed at stage " + stage + ": " + cli.message};
  }
  const double e = rep["exceptional_measure"];
  const std::size_t grafts = rep["grafts"].size();
  return {cli.exit_code == 0 && e < 0.2 && grafts >= 1,
          "exceptional measure " + fmt("%.4f", e) + ", " + std::to_string(grafts) + " graft records (measured)"};
}

// 9. Functional estimate of -chi_U on the criterion 7 disc.
Outcome functional_bound() {
  const RunResult cli = run_shipped("estimate", "a");
  const json rep = json::parse(cli.report);
  if (!rep.contains("estimate")) return {false, "estimate run failed: " + cli.message};
  const double est = rep["estimate"];
  const double bound = -(1.0 - 0.1 / kTwoPi) + kTwoPi / 4096.0;
  return {est <= bound, "estimate " + fmt("%.5f", est) + " <= " + fmt("%.5f", bound)};
}

// 10. Byte-identical reports under sequential reruns.
Outcome reproducibility() {
  std::string detail;
  bool ok = true;
  for (const char* name : {"solve", "arc", "poletsky_plane"}) {
    const RunResult again = run_shipped(name, "b");
    const std::string a = read_file(scratch_dir + "/" + name + "_a/report.json");
    const std::string b = read_file(scratch_dir + "/" + name + "_b/report.json");
    const bool same = !a.empty() && a == b;
    ok = ok && same;
    detail += std::string(detail.empty() ? "" : ", ") + name + (same ? " identical" : " DIFFERS");
  }
  return {ok, detail};
}

}  // namespace

int main(int argc, char** argv) {
  config_dir = argc > 1 ? argv[1] : "configs";
  scratch_dir = (std::filesystem::temp_directory_path() / "holodisc_acceptance").string();
  std::filesystem::create_directories(scratch_dir);
  force_sequential(true);

  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"structure algebra", structure_algebra},
      {"Cauchy-Green identity", cauchy_green_identity},
      {"one-step Newton", one_step_newton},
      {"perturbation recovery", perturbation_recovery},
      {"jet scaling", jet_scaling},
      {"graft identity", graft_identity},
      {"plane pipeline", plane_pipeline},
      {"sphere pipeline", sphere_pipeline},
      {"functional estimate", functional_bound},
      {"reproducibility", reproducibility},
  };
  int failed = 0;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    Outcome o;
    try {
      o = criteria[k].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2zu %-22s %s  %s\n", k + 1, criteria[k].first.c_str(), o.pass ? "PASS" : "FAIL",
                o.detail.c_str());
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
