#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "helpers.hpp"
#include "holodisc/errors.hpp"
#include "holodisc/grid.hpp"

using namespace holodisc;
using testing::vec;

namespace {

GridMap conj_map(const GridPtr& g) {
  return sample_map(g, 1, [](cplx z) { return vec({std::conj(z)}); });
}

double t1_error(int res) {
  const GridPtr g = build_grid(Domain::unit_disc(), res);
  return testing::max_abs_diff(cauchy_green(constant_map(g, CVector::Ones(1))), conj_map(g));
}

double dbar_t_error(int res, const std::function<CVector(cplx)>& f) {
  const GridPtr g = build_grid(Domain::unit_disc(), res);
  const GridMap gm = sample_map(g, 1, f);
  const auto [dz, dzb] = wirtinger(cauchy_green(gm));
  return sup_norm(dzb - gm, g->interior_nodes());
}

}  // namespace

TEST_SUITE("grid") {
  TEST_CASE("cell weights integrate the domain area") {
    const GridPtr g = build_grid(Domain::unit_disc(), 64);
    double s = 0.0;
    for (double w : g->weights()) s += w;
    CHECK(std::abs(s - kPi) / kPi <= 1e-6);
    const GridPtr a = build_grid(Domain::annulus(0.3, 1.0), 48);
    s = 0.0;
    for (double w : a->weights()) s += w;
    CHECK(std::abs(s - a->domain().area()) / a->domain().area() <= 1e-6);
  }

  TEST_CASE("tube nodes stay within the tube width") {
    const GridPtr g = build_grid(Domain::tube(-0.5, 0.5, 0.1), 128);
    double worst = 0.0;
    for (cplx z : g->nodes()) {
      const double x = std::clamp(z.real(), -0.5, 0.5);
      worst = std::max(worst, std::abs(z - cplx(x, 0.0)));
    }
    CHECK(worst <= 0.1 + 1e-12);
  }

  TEST_CASE("tube thinner than two lattice steps is degenerate") {
    CHECK_THROWS_AS(build_grid(Domain::tube(-0.5, 0.5, 0.01), 64), DegenerateDomain);
  }

  TEST_CASE("wirtinger derivatives of simple maps") {
    const GridPtr g = build_grid(Domain::unit_disc(), 32);
    const auto [az, azb] = wirtinger(sample_map(g, 1, [](cplx z) { return vec({z}); }));
    CHECK((az.values.array() - 1.0).abs().maxCoeff() <= 1e-12);
    CHECK(azb.values.cwiseAbs().maxCoeff() <= 1e-12);
    const auto [bz, bzb] = wirtinger(conj_map(g));
    CHECK(bz.values.cwiseAbs().maxCoeff() <= 1e-12);
    CHECK((bzb.values.array() - 1.0).abs().maxCoeff() <= 1e-12);
    const auto [cz, czb] = wirtinger(sample_map(g, 1, [](cplx z) { return vec({std::norm(z)}); }));
    const double h2 = g->spacing() * g->spacing();
    CHECK(testing::max_abs_diff(cz, conj_map(g)) <= h2);
    CHECK(testing::max_abs_diff(czb, sample_map(g, 1, [](cplx z) { return vec({z}); })) <= h2);
  }

  TEST_CASE("wirtinger is linear") {
    std::mt19937_64 rng(2);
    const GridPtr g = build_grid(Domain::unit_disc(), 24);
    const GridMap u = sample_map(g, 2, testing::RandomPoly(rng, 2, 1.0));
    const GridMap v = sample_map(g, 2, [](cplx z) { return vec({std::exp(z), std::sin(std::conj(z))}); });
    const cplx a(0.7, -1.3), b(-2.0, 0.4);
    const auto [wz, wzb] = wirtinger(u * a + v * b);
    const auto [uz, uzb] = wirtinger(u);
    const auto [vz, vzb] = wirtinger(v);
    CHECK(testing::max_abs_diff(wz, uz * a + vz * b) <= 1e-12);
    CHECK(testing::max_abs_diff(wzb, uzb * a + vzb * b) <= 1e-12);
  }

  TEST_CASE("holder norm examples") {
    const GridPtr g = build_grid(Domain::unit_disc(), 32);
    const cplx c(0.6, -0.8);
    CHECK(holder_norm(constant_map(g, vec({c})), 0.5, 0).total == doctest::Approx(std::abs(c)).epsilon(1e-14));
    const GridMap z = sample_map(g, 1, [](cplx w) { return vec({w}); });
    const double expected = 1.0 + std::sqrt(2.0);
    CHECK(std::abs(holder_norm(z, 0.5, 0).total - expected) <= 0.05 * expected);
    for (int order : {0, 1}) {
      const double one = holder_norm(z, 0.5, order).total;
      CHECK(holder_norm(z * 2.0, 0.5, order).total == 2.0 * one);
    }
  }

  TEST_CASE("holder estimates are subadditive") {
    std::mt19937_64 rng(9);
    const GridPtr g = build_grid(Domain::unit_disc(), 24);
    for (int trial = 0; trial < 5; ++trial) {
      const GridMap u = sample_map(g, 1, testing::RandomPoly(rng, 1, 1.0));
      const GridMap v = sample_map(g, 1, testing::RandomPoly(rng, 1, 1.0));
      for (int order : {0, 1}) {
        const double lhs = holder_norm(u + v, 0.5, order).total;
        const double rhs = holder_norm(u, 0.5, order).total + holder_norm(v, 0.5, order).total;
        CHECK(lhs <= rhs + 1e-12);
      }
    }
  }

  TEST_CASE("cauchy_green of zero and of one") {
    const GridPtr g = build_grid(Domain::unit_disc(), 64);
    CHECK(cauchy_green(constant_map(g, vec({0.0}))).values.cwiseAbs().maxCoeff() == 0.0);
    CHECK(t1_error(64) <= 5e-3);
  }

  TEST_CASE("refining the grid never worsens the T(1) error by more than 10 percent") {
    const double e16 = t1_error(16), e32 = t1_error(32), e64 = t1_error(64);
    CHECK(e32 <= 1.1 * e16);
    CHECK(e64 <= 1.1 * e32);
  }

  TEST_CASE("dbar inverts the Cauchy-Green transform at first order") {
    const std::vector<std::function<CVector(cplx)>> gs = {
        [](cplx z) { return vec({z}); },
        [](cplx z) { return vec({std::conj(z) * z}); },
        [](cplx z) { return vec({std::exp(z)}); },
        [](cplx z) { return vec({std::cos(2.0 * z.real()) + cplx(0, 1) * z.imag()}); },
        [](cplx z) { return vec({1.0 / (2.5 - z)}); },
    };
    const int res[3] = {32, 64, 128};
    for (std::size_t k = 0; k < gs.size(); ++k) {
      double e[3];
      for (int r = 0; r < 3; ++r) e[r] = dbar_t_error(res[r], gs[k]);
      // Least-squares slope of log2 error against log2 resolution.
      const double order = -(std::log2(e[2]) - std::log2(e[0])) / 2.0;
      INFO("g #" << k << " errors " << e[0] << " " << e[1] << " " << e[2]);
      CHECK(e[2] <= 1e-3);
      CHECK(order >= 1.0);
    }
  }

  TEST_CASE("centered transform vanishes at the origin") {
    const GridPtr g = build_grid(Domain::unit_disc(), 32);
    const GridMap t = cauchy_green_centered(sample_map(g, 1, [](cplx z) { return vec({std::exp(z)}); }));
    REQUIRE(g->origin_index() >= 0);
    CHECK(std::abs(t.values(g->origin_index(), 0)) == 0.0);
  }

  TEST_CASE("interpolation and boundary traces reproduce polynomials") {
    const GridPtr g = build_grid(Domain::unit_disc(), 32);
    auto f = [](cplx z) { return vec({z * z - 0.5 * std::conj(z)}); };
    const GridMap u = sample_map(g, 1, f);
    std::mt19937_64 rng(4);
    for (int k = 0; k < 20; ++k) {
      const cplx z = testing::random_point(rng, 1.0);
      CHECK((interpolate(u, z) - f(z)).norm() <= 1e-10);
    }
    for (const auto& s : boundary_trace(u, 64))
      CHECK((s.value - f(std::polar(1.0, s.t))).norm() <= 1e-10);
  }

  TEST_CASE("csv output carries grid metadata") {
    const GridPtr g = build_grid(Domain::unit_disc(), 8);
    const auto path = std::filesystem::temp_directory_path() / "holodisc_grid_test.csv";
    write_csv(conj_map(g), path.string(), 0.5);
    std::ifstream in(path);
    std::string header, columns;
    std::getline(in, header);
    std::getline(in, columns);
    CHECK(header.find("resolution=8") != std::string::npos);
    CHECK(header.find("alpha=0.5") != std::string::npos);
    CHECK(columns == "x,y,re_u1,im_u1");
    std::size_t rows = 0;
    for (std::string line; std::getline(in, line);) ++rows;
    CHECK(rows == g->size());
    std::filesystem::remove(path);
  }
}
