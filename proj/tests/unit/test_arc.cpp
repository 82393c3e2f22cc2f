#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "holodisc/arc.hpp"
#include "holodisc/errors.hpp"

using namespace holodisc;
using testing::vec;

namespace {

ArcData exp_arc() {
  auto f = [](double x) { return vec({std::exp(x)}); };
  return ArcData::from_function(-0.5, 0.5, 65, f, f, f);
}

ArcData square_arc() {
  return ArcData::from_function(
      -0.5, 0.5, 65, [](double x) { return vec({x * x}); }, [](double x) { return vec({2.0 * x}); },
      [](double) { return vec({2.0}); });
}

double jet_residual(const ArcData& arc, const FieldPtr& f, int m) {
  const TubeDomain tube = make_tube(arc, m);
  const GridMap jet = jet_extension(arc, *f, tube.grid);
  return sup_norm(residual({f, tube.grid, jet, 0.5}, jet));
}

}  // namespace

TEST_SUITE("arc") {
  TEST_CASE("hermite data reproduces its samples and is consistent") {
    const ArcData a = exp_arc();
    CHECK(a.dimension() == 1);
    CHECK(a.sample_count() == 65);
    for (double x : {-0.5, -0.123, 0.0, 0.377, 0.5}) {
      CHECK(std::abs(a.value(x)[0] - std::exp(x)) <= 1e-12);
      CHECK(std::abs(a.first(x)[0] - std::exp(x)) <= 1e-9);
    }
    CHECK(a.consistency_defect() <= 1e-3);
  }

  TEST_CASE("csv arc data round-trips") {
    const auto path = std::filesystem::temp_directory_path() / "holodisc_arc.csv";
    {
      std::ofstream f(path);
      f.precision(17);
      f << "x,re_phi1,im_phi1\n";
      for (int k = 0; k <= 40; ++k) {
        const double x = -0.5 + k / 40.0;
        f << x << "," << std::cos(x) << "," << std::sin(x) << "\n";
      }
    }
    const ArcData a = ArcData::from_csv(path.string());
    CHECK(a.sample_count() == 41);
    CHECK(std::abs(a.value(0.1)[0] - std::polar(1.0, 0.1)) <= 1e-8);
    CHECK(std::abs(a.first(0.1)[0] - cplx(0, 1) * std::polar(1.0, 0.1)) <= 1e-5);
    std::filesystem::remove(path);
  }

  TEST_CASE("straightening maps the segment onto the interval") {
    const AffineStraightening s = straighten({0.1, 0.2}, {0.5, -0.3}, -0.5, 0.5);
    CHECK(std::abs(s.forward({0.1, 0.2}) - cplx(-0.5, 0.0)) <= 1e-14);
    CHECK(std::abs(s.forward({0.5, -0.3}) - cplx(0.5, 0.0)) <= 1e-14);
    CHECK(std::abs(s.inverse(s.forward({0.3, 0.7})) - cplx(0.3, 0.7)) <= 1e-14);
  }

  TEST_CASE("the jet of x squared is zeta squared") {
    const FieldPtr st = make_standard(1);
    const TubeDomain tube = make_tube(square_arc(), 8);
    const GridMap jet = jet_extension(square_arc(), *st, tube.grid);
    CHECK(testing::max_abs_diff(jet, sample_map(tube.grid, 1, [](cplx z) { return vec({z * z}); })) <= 1e-12);
    CHECK(sup_norm(residual({st, tube.grid, jet, 0.5}, jet)) <= 1e-10);
  }

  TEST_CASE("the jet of exp has the analytic residual") {
    const FieldPtr st = make_standard(1);
    const int m = 16;
    const TubeDomain tube = make_tube(exp_arc(), m);
    const GridMap jet = jet_extension(exp_arc(), *st, tube.grid);
    const GridMap f = residual({st, tube.grid, jet, 0.5}, jet);
    // The data continuation is only C^2 across x = +-0.5; stay a stencil away.
    const double away = 0.5 - 3.0 * tube.grid->spacing();
    double worst = 0.0;
    for (std::size_t i : tube.grid->interior_nodes()) {
      const cplx z = tube.grid->node(i);
      if (std::abs(z.real()) > away) continue;
      worst = std::max(worst, std::abs(f.values(i, 0) + std::exp(z.real()) * z.imag() * z.imag() / 4.0));
    }
    CHECK(worst <= 1e-8);
    CHECK(sup_norm(f) == doctest::Approx(std::exp(0.5) / (4.0 * m * m)).epsilon(0.05));
  }

  TEST_CASE("on the arc the jet is the data and its normal derivative is J phi'") {
    const FieldPtr f = make_a_lambda(0.3);
    const ArcData a = ArcData::from_function(
        -0.5, 0.5, 65, [](double x) { return vec({x + 0.1 * x * x, 0.2 * x}); },
        [](double x) { return vec({1.0 + 0.2 * x, 0.2}); }, [](double) { return vec({0.2, 0.0}); });
    const TubeDomain tube = make_tube(a, 8);
    const GridMap jet = jet_extension(a, *f, tube.grid);
    const auto [ux, uy] = partials(jet);
    const auto nodes = arc_nodes(tube.grid, a);
    REQUIRE(!nodes.empty());
    for (std::size_t i : nodes) {
      const double x = tube.grid->node(i).real();
      CHECK((jet.at(i) - a.value(x)).norm() <= 1e-13);
      const RMatrix j = structure_from_complex_matrix(f->eval(a.value(x)));
      const RVector expect = j * realify(a.first(x));
      CHECK((realify(uy.row(i).transpose()) - expect).norm() <= 1e-8);
    }
    CHECK(sup_norm(residual({f, tube.grid, jet, 0.5}, jet), nodes) <= 1e-10);
  }

  TEST_CASE("doubling m divides the exp jet residual by about four") {
    const FieldPtr st = make_standard(1);
    double prev = jet_residual(exp_arc(), st, 8);
    for (int m : {16, 32}) {
      const double cur = jet_residual(exp_arc(), st, m);
      CHECK(prev / cur >= 3.5);
      CHECK(prev / cur <= 4.5);
      prev = cur;
    }
  }

  TEST_CASE("shrink_solve accepts an exact jet at once") {
    const ShrinkResult r = shrink_solve(square_arc(), make_standard(1), 1e-2, 8);
    CHECK(r.m == 8);
    CHECK(testing::max_abs_diff(r.u, sample_map(r.u.grid, 1, [](cplx z) { return vec({z * z}); })) <= 1e-10);
  }

  TEST_CASE("shrink_solve meets epsilon for exp") {
    const ShrinkResult r = shrink_solve(exp_arc(), make_standard(1), 1e-2, 8);
    REQUIRE(!r.log.empty());
    CHECK(r.log.back().success);
    CHECK(r.log.back().distance < 1e-2);
    CHECK(r.cert.final_residual <= r.cert.tol);
    if (r.log.size() >= 2) {
      const double slope = std::log(r.log.back().residual_initial / r.log.front().residual_initial) /
                           std::log(double(r.log.back().m) / r.log.front().m);
      CHECK(slope <= -0.8);
    }
  }

  TEST_CASE("shrink_solve recovers the A_lambda solution from its restriction") {
    const double lam = 0.3;
    const ArcData a = ArcData::from_function(
        -0.5, 0.5, 65, [&](double x) { return vec({x, -lam * x * x}); },
        [&](double x) { return vec({1.0, -2.0 * lam * x}); }, [&](double) { return vec({0.0, -2.0 * lam}); });
    const ShrinkResult r = shrink_solve(a, make_a_lambda(lam), 1e-2, 8);
    const GridMap exact = sample_map(r.u.grid, 2, [&](cplx z) { return vec({z, -lam * std::norm(z)}); });
    CHECK(testing::max_abs_diff(r.u, exact) <= 1e-4);
  }

  TEST_CASE("an unreachable epsilon exhausts the node budget") {
    ShrinkOptions o;
    o.max_nodes = 3000;
    CHECK_THROWS_AS(shrink_solve(exp_arc(), make_standard(1), 1e-9, 8, o), Exhausted);
  }
}
