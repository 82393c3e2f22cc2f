#include <doctest.h>

#include <json.hpp>

#include "helpers.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/runge.hpp"

using namespace holodisc;
using testing::vec;

namespace {

constexpr double kTwoPi = 2.0 * kPi;

Target plane1() { return Target::plane(make_standard(1)); }

TargetMap plane_of(const GridPtr& g, const std::function<cplx(cplx)>& f) {
  return plane_map(sample_map(g, 1, [&](cplx z) { return vec({f(z)}); }));
}

double sup_dbar_inside(const TargetMap& u, cplx z0, double r) {
  const auto [dz, dzb] = target_wirtinger(u);
  const GridPtr& g = u.coords.grid;
  double worst = 0.0;
  for (std::size_t i : g->interior_nodes())
    if (std::abs(g->node(i) - z0) < r) worst = std::max(worst, dzb.row(i).norm());
  return worst;
}

BoundaryLoop plane_circle(double radius) {
  return BoundaryLoop::circle(plane1(), vec({0.0}), vec({radius}));
}

}  // namespace

TEST_SUITE("runge") {
  TEST_CASE("sphere charts and the chordal metric") {
    const Target s = Target::sphere();
    const TargetPoint zero = TargetPoint::scalar(0.0), inf = TargetPoint::infinity();
    CHECK(target_distance(s, zero, inf) == doctest::Approx(2.0).epsilon(1e-15));
    CHECK(target_distance(s, inf, inf) == 0.0);
    const TargetPoint a = TargetPoint::scalar({0.3, -1.2}), b = TargetPoint::scalar({5.0, 2.0});
    CHECK(target_distance(s, a, b) == doctest::Approx(target_distance(s, b, a)).epsilon(1e-15));
    CHECK(target_distance(s, a, b) <= 2.0);
    const TargetPoint w = TargetPoint::from_chart(1, {0.25, 0.0});
    CHECK(std::abs(w.chart_coordinate(0) - cplx(4.0, 0.0)) <= 1e-15);
    CHECK(preferred_chart(w) == 1);
    CHECK(preferred_chart(a) == 0);
    CHECK(preferred_chart(inf) == 1);
    CHECK(target_distance(s, target_path(s, a, b, 0.0), a) <= 1e-12);
    CHECK(target_distance(s, target_path(s, a, b, 1.0), b) <= 1e-12);
    const Target p = plane1();
    CHECK(std::abs(target_path(p, a, b, 0.5).z[0] - (a.z[0] + b.z[0]) / 2.0) <= 1e-15);
  }

  TEST_CASE("loops close up and open sets measure membership") {
    const BoundaryLoop c = plane_circle(2.0);
    CHECK(c.closure_defect() <= 1e-12);
    const OpenSet nb = OpenSet::loop_neighborhood(c, 0.1);
    for (const auto& q : c.samples(64)) CHECK(nb.contains(q));
    CHECK(!nb.contains(TargetPoint::scalar(0.0)));
    const OpenSet ball = OpenSet::ball(plane1(), TargetPoint::scalar(1.0), 0.5);
    CHECK(ball.margin(TargetPoint::scalar(1.2)) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(!ball.contains(TargetPoint::scalar(1.6)));
    const OpenSet cb = OpenSet::chordal_ball(TargetPoint::infinity(), 0.3);
    CHECK(cb.contains(TargetPoint::infinity()));
    CHECK(cb.contains(TargetPoint::scalar(100.0)));
    CHECK(!cb.contains(TargetPoint::scalar(1.0)));
  }

  TEST_CASE("a loop inside one chart is covered by a single arc") {
    const double eps = 0.1;
    const ArcCover plane = arc_cover(plane_circle(2.0), eps);
    REQUIRE(plane.arcs.size() == 1);
    CHECK(plane.arcs[0].length() >= kTwoPi - eps);
    const ArcCover sphere = arc_cover(BoundaryLoop::circle(Target::sphere(), vec({0.0}), vec({2.0})), eps);
    CHECK(sphere.arcs.size() == 1);
    CHECK(sphere.complement_measure < eps);
  }

  TEST_CASE("an excursion loop gets disjoint single-chart arcs") {
    const double eps = 0.1;
    const BoundaryLoop loop = BoundaryLoop::excursion(2.0, 2);
    const ArcCover cover = arc_cover(loop, eps);
    REQUIRE(cover.arcs.size() >= 2);
    double covered = 0.0;
    for (std::size_t k = 0; k < cover.arcs.size(); ++k) {
      const ParameterArc& a = cover.arcs[k];
      const ParameterArc& next = cover.arcs[(k + 1) % cover.arcs.size()];
      const double gap = std::remainder(next.t0 - a.t1, kTwoPi);
      CHECK(gap > 0.0);
      covered += a.length();
      for (int j = 0; j <= 200; ++j) {
        const TargetPoint q = loop.eval(a.t0 + a.length() * j / 200.0);
        const cplx c = q.chart_coordinate(a.chart);
        CHECK(std::isfinite(std::abs(c)));
        CHECK(std::abs(c) <= Target::kChartLimit);
      }
    }
    CHECK(kTwoPi - covered == doctest::Approx(cover.complement_measure).epsilon(1e-9));
    CHECK(cover.complement_measure < eps);
  }

  TEST_CASE("split arcs respect the maximal angle and overlap") {
    const ParameterArc a{0.1, 6.0, 0};
    const auto parts = split_arc(a, kPi / 2.0);
    REQUIRE(parts.size() >= 4);
    CHECK(parts.front().t0 == a.t0);
    CHECK(parts.back().t1 == a.t1);
    for (std::size_t k = 0; k < parts.size(); ++k) {
      CHECK(parts[k].length() <= kPi / 2.0 + 1e-12);
      if (k > 0) CHECK(parts[k].t0 < parts[k - 1].t1);
    }
  }

  TEST_CASE("local expansions recover the affine part") {
    const GridPtr g = build_grid(Domain::unit_disc(), 64);
    const GridMap lin = sample_map(g, 1, [](cplx z) { return vec({2.0 * z + 0.3 * std::conj(z)}); });
    const LocalExpansion e1 = local_expansion(lin, 0.0);
    CHECK(std::abs(e1.a[0] - 2.0) <= 1e-6);
    CHECK(std::abs(e1.b[0] - 0.3) <= 1e-6);
    const GridMap hol = sample_map(g, 1, [](cplx z) { return vec({std::exp(z)}); });
    CHECK(std::abs(local_expansion(hol, {0.1, 0.1}).b[0]) <= 1e-4);
    const GridMap cub = sample_map(g, 1, [](cplx z) { return vec({z + 0.1 * std::conj(z) + z * z * z}); });
    const LocalExpansion e3 = local_expansion(cub, 0.2);
    CHECK(std::abs(e3.a[0] - 1.12) <= 1e-3);
    CHECK(std::abs(e3.b[0] - 0.1) <= 1e-3);
    CHECK(std::abs(e3.c[0] - (0.2 + 0.02 + 0.008)) <= 1e-3);
  }

  TEST_CASE("graft circle identity and poles") {
    Graft g;
    g.center = {0.1, -0.2};
    g.c = vec({0.0});
    g.a = vec({1.0});
    g.b = vec({0.2});
    g.radius = 0.1;
    double worst = 0.0;
    for (int k = 0; k < 720; ++k) {
      const cplx d = std::polar(g.radius, kTwoPi * k / 720.0);
      worst = std::max(worst, std::abs(g.value(g.center + d)[0] - (d + 0.2 * std::conj(d))));
    }
    CHECK(worst <= 1e-12);
    CHECK(std::abs(g.value(g.center + 1e-6)[0]) > 1e3);
    CHECK(g.cutoff(g.center + 0.05) == 1.0);
    CHECK(g.cutoff(g.center + 1.01 * g.outer_radius()) == 0.0);
    Graft flat = g;
    flat.b = vec({0.0});
    CHECK(!flat.has_pole());
    CHECK(std::abs(flat.value(flat.center)[0]) == 0.0);
    CHECK(std::abs(flat.value(flat.center + cplx(0.03, 0.01))[0] - cplx(0.03, 0.01)) <= 1e-16);
  }

  TEST_CASE("grafting removes the affine dbar residual") {
    const GridPtr grid = build_grid(Domain::unit_disc(), 64);
    const Target p = plane1();
    const cplx z0(0.013, -0.007);  // off the lattice: the pole is not a node
    const TargetMap phi = plane_of(grid, [](cplx z) { return z + 0.3 * std::conj(z); });
    const LocalExpansion le = local_expansion(phi, z0);
    const Graft g{z0, le.c, le.a, le.b, 0.1, 0.5, 0};
    GraftReport rep;
    const TargetMap out = apply_graft(p, phi, g, &rep);
    CHECK(rep.residual_before_inside == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rep.residual_after_inside <= 1e-10);
    CHECK(sup_dbar_inside(out, z0, 0.1) <= 0.01);
    CHECK(rep.residual_blend > 0.0);
  }

  TEST_CASE("grafting without an antiholomorphic part") {
    const GridPtr grid = build_grid(Domain::unit_disc(), 48);
    const TargetMap phi = plane_of(grid, [](cplx z) { return std::exp(z); });
    const LocalExpansion le = local_expansion(phi, 0.0);
    const Graft g{0.0, le.c, le.a, vec({0.0}), 0.1, 0.5, 0};
    const TargetMap out = apply_graft(plane1(), phi, g);
    const auto before = target_residual(plane1(), phi), after = target_residual(plane1(), out);
    for (std::size_t i : grid->within(0.0, g.radius)) CHECK(std::abs(after[i] - before[i]) <= 1e-8);
    // Outside the disc only the blend moves the map, by the Taylor remainder.
    const double rho = g.outer_radius();
    CHECK(testing::max_abs_diff(out.coords, phi.coords) <= std::exp(rho) * rho * rho / 2.0);
    const TargetMap affine = plane_of(grid, [](cplx z) { return 1.0 + 2.0 * z; });
    const LocalExpansion la = local_expansion(affine, 0.0);
    const TargetMap same = apply_graft(plane1(), affine, Graft{0.0, la.c, la.a, vec({0.0}), 0.1, 0.5, 0});
    CHECK(testing::max_abs_diff(same.coords, affine.coords) <= 1e-12);
  }

  TEST_CASE("grafting on the sphere switches to the pole chart") {
    const GridPtr grid = build_grid(Domain::unit_disc(), 64);
    const Target s = Target::sphere();
    const TargetMap phi = make_target_map(s, grid, [](cplx z) { return TargetPoint::scalar(z + 0.3 * std::conj(z)); });
    const LocalExpansion le = local_expansion(phi, 0.0, 0);
    const Graft g{0.0, le.c, le.a, le.b, 0.1, 0.5, 0};
    GraftReport rep;
    const TargetMap out = apply_graft(s, phi, g, &rep);
    const std::size_t o = static_cast<std::size_t>(grid->origin_index());
    CHECK(out.point(o).at_infinity);
    CHECK(out.chart[o] == 1);
    // Nodes where the graft leaves the chart-z disc of radius 2 are stored
    // in the pole chart, and only those.
    for (std::size_t i : grid->within(0.0, g.radius)) {
      if (i == o) continue;
      const bool large = std::abs(g.value(grid->node(i))[0]) > Target::kChartLimit;
      CHECK((out.chart[i] == 1) == large);
    }
    const double tiny = 1e-4;
    CHECK(std::abs(g.value(tiny)[0]) > Target::kChartLimit);
    CHECK(rep.residual_before_inside == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(rep.residual_after_inside <= 0.01);
  }

  TEST_CASE("center discs") {
    const CenterDisc flat = center_disc(vec({0.5}), make_standard(1));
    CHECK(flat.cert.iterations == 0);
    const GridMap expect = sample_map(flat.u.grid, 1, [](cplx z) { return vec({0.5 + z}); });
    CHECK(testing::max_abs_diff(flat.u, expect) == 0.0);
    const CenterDisc cst = center_disc(vec({0.2}), make_constant(0.3));
    CHECK(cst.cert.final_residual <= 1e-8);
    const CVector p = vec({0.0, 0.0});
    const CenterDisc al = center_disc(p, make_a_lambda(0.3));
    CHECK((al.u.at(al.u.grid->origin_index()) - p).norm() <= 1e-8);
    CHECK(al.cert.final_residual <= al.cert.tol);
  }

  TEST_CASE("gluing constant pieces gives the constant map") {
    const Target p = plane1();
    const CVector q = vec({0.4});
    const GridPtr grid = build_grid(Domain::unit_disc(), 32);
    const GridPtr tube = build_grid(Domain::tube(-1.0, 1.0, 0.3), 64);
    std::vector<BoundaryPiece> pieces(2);
    for (int k = 0; k < 2; ++k) {
      pieces[k].arc = {0.2 + k * kPi, 1.6 + k * kPi, 0};
      pieces[k].center_angle = 0.9 + k * kPi;
      pieces[k].scale = 1.0;
      pieces[k].rho_inner = 0.8;
      pieces[k].tube_solution = constant_map(tube, q);
    }
    const CenterDisc base = center_disc(q, make_standard(1), 0.05, 32, vec({0.0}));
    CHECK(base.cert.iterations == 0);
    const TargetMap u = glue(p, grid, pieces, base, q);
    CHECK((u.coords.values.array() - q[0]).abs().maxCoeff() <= 1e-14);
  }

  TEST_CASE("two antipodal pieces glue continuously through the center") {
    const Target p = plane1();
    const BoundaryLoop loop = plane_circle(2.0);
    const GridPtr grid = build_grid(Domain::unit_disc(), 48);
    std::vector<BoundaryPiece> pieces;
    for (int k = 0; k < 2; ++k) pieces.push_back(solve_piece(p, loop, {0.2 + k * kPi, 1.6 + k * kPi, 0}, 0.05));
    const CVector q = vec({0.0});
    const TargetMap u = glue(p, grid, pieces, center_disc(q, make_standard(1)), q);
    // Modulus of continuity on lattice neighbours, in units of the spacing.
    double worst = 0.0;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      if (!grid->on_lattice(i)) continue;
      const long j = grid->lattice_node(grid->lattice_i(i) + 1, grid->lattice_j(i));
      if (j >= 0) worst = std::max(worst, (u.coords.at(i) - u.coords.at(j)).norm() / grid->spacing());
    }
    CHECK(std::isfinite(worst));
    CHECK(worst <= 40.0);
    CHECK(u.coords.at(grid->origin_index()).norm() == 0.0);
    for (double t : {0.9, 0.9 + kPi}) {
      const TargetPoint v = target_interpolate(u, std::polar(1.0, t));
      CHECK(target_distance(p, v, loop.eval(t)) <= 0.05);
    }
  }

  TEST_CASE("global correction on the plane") {
    const GridPtr grid = build_grid(Domain::unit_disc(), 64);
    const std::vector<ParameterArc> k = {{0.0, kTwoPi - 1e-9, 0}};
    CorrectionReport rep;
    const TargetMap u = global_correct(plane1(), plane_of(grid, [](cplx z) { return z + 0.05 * std::conj(z); }), k,
                                       0.1, {}, &rep);
    CHECK(testing::max_abs_diff(u.coords, sample_map(grid, 1, [](cplx z) { return vec({z}); })) <= 1e-4);
    CHECK(std::abs(u.coords.values(grid->origin_index(), 0)) <= 1e-12);
    const TargetMap hol = plane_of(grid, [](cplx z) { return std::exp(z) - 1.0; });
    CHECK(testing::max_abs_diff(global_correct(plane1(), hol, k, 0.1).coords, hol.coords) == 0.0);
    const TargetMap soft = plane_of(grid, [](cplx z) { return 2.0 * z + 0.01 * std::conj(z); });
    CorrectionReport rs;
    global_correct(plane1(), soft, k, 0.1, {}, &rs);
    CHECK(rs.distance_on_k <= 0.05);
    CHECK(rs.residual_after <= rs.residual_before);
  }

  TEST_CASE("a constant loop gives the constant disc") {
    const Target p = plane1();
    const TargetPoint q = TargetPoint::scalar({0.3, -0.2});
    const BoundaryLoop loop = BoundaryLoop::constant(p, q);
    PoletskyOptions o;
    o.resolution = 32;
    const PoletskyDisc d = poletsky_disc(p, q, OpenSet::ball(p, q, 0.1), 0.1, &loop, o);
    CHECK(d.success);
    CHECK(d.exceptional_measure == 0.0);
    CHECK((d.u.coords.values.array() - q.z[0]).abs().maxCoeff() <= 1e-12);
  }

  TEST_CASE("plane pipeline for the circle of radius two") {
    const Target p = plane1();
    const double eps = 0.1;
    const BoundaryLoop loop = plane_circle(2.0);
    const OpenSet u_set = OpenSet::loop_neighborhood(loop, 0.1);
    const TargetPoint base = TargetPoint::scalar(0.0);
    const PoletskyDisc d = poletsky_disc(p, base, u_set, eps, &loop);
    CHECK(d.success);
    CHECK(d.exceptional_measure < eps);
    CHECK(std::abs(d.exceptional_measure_2n - d.exceptional_measure) < 0.05 * eps);
    CHECK(d.base_point_error <= 1e-6);
    std::vector<std::string> stages;
    for (const auto& s : d.provenance) {
      stages.push_back(s.stage);
      CHECK(nlohmann::json::parse(s.detail).is_object());
    }
    CHECK(stages == std::vector<std::string>{"arc_cover", "shrink", "center_disc", "glue", "graft",
                                             "global_correct", "measure"});
    const auto chi = [&](const TargetPoint& q) { return u_set.contains(q) ? -1.0 : 0.0; };
    const int n = 4096;
    const double est = functional_estimate(chi, base, {d}, n);
    CHECK(est + 1.0 <= d.exceptional_measure / kTwoPi + kTwoPi / n);
    CHECK(functional_estimate([](const TargetPoint&) { return 0.25; }, base, {d}, n) ==
          doctest::Approx(0.25).epsilon(1e-15));
    // A constant disc at the base point adds the value of f there.
    PoletskyDisc flat = d;
    flat.u = plane_of(d.u.coords.grid, [](cplx) { return cplx(0.0, 0.0); });
    CHECK(functional_estimate(chi, base, {d, flat}, n) <= est);
  }

  TEST_CASE("sphere pipeline around the point at infinity") {
    const Target s = Target::sphere();
    const double eps = 0.2;
    const OpenSet u_set = OpenSet::chordal_ball(TargetPoint::infinity(), 0.3);
    const PoletskyDisc d = poletsky_disc(s, TargetPoint::scalar(0.0), u_set, eps, nullptr);
    CHECK(d.success);
    CHECK(d.exceptional_measure < eps);
    CHECK(!d.grafts.empty());
    CHECK(std::abs(d.exceptional_measure_2n - d.exceptional_measure) < 0.05 * eps);
    for (const auto& st : d.provenance) {
      if (st.stage != "graft") continue;
      const auto j = nlohmann::json::parse(st.detail);
      for (const auto& rec : j["records"])
        if (rec.contains("residual_after_inside"))
          CHECK(rec["residual_after_inside"].get<double>() <= rec["residual_before_inside"].get<double>());
    }
  }

  TEST_CASE("pipeline failures carry their stage") {
    const Target p = plane1();
    const BoundaryLoop loop = plane_circle(2.0);
    try {
      poletsky_disc(p, TargetPoint::scalar(5.0), OpenSet::loop_neighborhood(loop, 0.1), 0.1, &loop);
      FAIL("expected a failure");
    } catch (const PipelineFailed& e) {
      CHECK(!e.stage().empty());
      CHECK(nlohmann::json::parse(e.report()).is_array());
    } catch (const Error& e) {
      CHECK(std::string(e.what()).size() > 0);
    }
  }
}
