#include "holodisc/runge.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <limits>

#include <json.hpp>

#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"

namespace holodisc {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kTwoPi = 2.0 * kPi;

bool all_finite(cplx v) { return std::isfinite(v.real()) && std::isfinite(v.imag()); }

bool all_finite(const CVector& v) {
  for (Eigen::Index k = 0; k < v.size(); ++k)
    if (!all_finite(v[k])) return false;
  return true;
}

CVector scalar_vec(cplx v) {
  CVector out(1);
  out[0] = v;
  return out;
}

/// Quintic smoothstep on [0, 1], clamped.
double smoothstep(double s) {
  s = std::clamp(s, 0.0, 1.0);
  return s * s * s * (10.0 - 15.0 * s + 6.0 * s * s);
}

/// Angle reduced to [0, 2 pi).
double wrap(double t) {
  double r = std::fmod(t, kTwoPi);
  if (r < 0.0) r += kTwoPi;
  return r;
}

/// Inverse stereographic image on the unit sphere; infinity is (0, 0, 1).
std::array<double, 3> to_sphere(const TargetPoint& p) {
  if (p.at_infinity) return {0.0, 0.0, 1.0};
  const cplx z = p.z[0];
  const double a = std::norm(z);
  if (a <= 1.0) return {2.0 * z.real() / (1.0 + a), 2.0 * z.imag() / (1.0 + a), (a - 1.0) / (a + 1.0)};
  const cplx w = 1.0 / z;
  const double b = std::norm(w);
  return {2.0 * w.real() / (1.0 + b), -2.0 * w.imag() / (1.0 + b), (1.0 - b) / (1.0 + b)};
}

TargetPoint from_sphere(const std::array<double, 3>& x) {
  const double n = std::sqrt(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]);
  const double x1 = x[0] / n, x2 = x[1] / n, x3 = x[2] / n;
  if (x3 <= 0.0) return TargetPoint::scalar(cplx(x1, x2) / (1.0 - x3));
  return TargetPoint::from_chart(1, cplx(x1, -x2) / (1.0 + x3));
}

/// Derivatives of 1/v given derivatives of v.
cplx invert_derivative(cplx v, cplx dv) { return -dv / (v * v); }

nlohmann::ordered_json point_json(const TargetPoint& p) {
  if (p.at_infinity) return "inf";
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (Eigen::Index k = 0; k < p.z.size(); ++k) a.push_back({p.z[k].real(), p.z[k].imag()});
  return a;
}

}  // namespace

// ---------------------------------------------------------------------------
// Targets and points

Target Target::plane(FieldPtr field) {
  if (!field) throw InvalidArgument("plane target needs a structure");
  return Target{TargetKind::plane, std::move(field)};
}

Target Target::sphere() { return Target{TargetKind::riemann_sphere, make_standard(1)}; }

std::string Target::name() const { return is_sphere() ? "riemann_sphere" : "plane"; }

TargetPoint TargetPoint::scalar(cplx z) { return {scalar_vec(z), false}; }

TargetPoint TargetPoint::infinity() { return {scalar_vec(0.0), true}; }

cplx TargetPoint::chart_coordinate(int chart) const {
  if (chart == 0) return at_infinity ? cplx(kInf, 0.0) : z[0];
  if (at_infinity) return 0.0;
  if (z[0] == cplx(0.0, 0.0)) return cplx(kInf, 0.0);
  return 1.0 / z[0];
}

TargetPoint TargetPoint::from_chart(int chart, cplx value) {
  if (chart == 0) return all_finite(value) ? scalar(value) : infinity();
  if (!all_finite(value)) return scalar(0.0);
  if (value == cplx(0.0, 0.0)) return infinity();
  return scalar(1.0 / value);
}

int preferred_chart(const TargetPoint& p) {
  if (p.at_infinity) return 1;
  return std::abs(p.z[0]) > Target::kChartLimit ? 1 : 0;
}

double target_distance(const Target& t, const TargetPoint& a, const TargetPoint& b) {
  if (!t.is_sphere()) return (a.z - b.z).norm();
  const auto x = to_sphere(a);
  const auto y = to_sphere(b);
  const double d0 = x[0] - y[0], d1 = x[1] - y[1], d2 = x[2] - y[2];
  return std::sqrt(d0 * d0 + d1 * d1 + d2 * d2);
}

TargetPoint target_path(const Target& t, const TargetPoint& a, const TargetPoint& b, double s) {
  if (!t.is_sphere()) return TargetPoint::finite((1.0 - s) * a.z + s * b.z);
  const auto x = to_sphere(a);
  const auto y = to_sphere(b);
  const double dot = std::clamp(x[0] * y[0] + x[1] * y[1] + x[2] * y[2], -1.0, 1.0);
  const double omega = std::acos(dot);
  if (omega < 1e-12) return s < 0.5 ? a : b;
  if (kPi - omega < 1e-9)
    throw DisconnectedTarget("no unique great-circle path between antipodal points");
  const double ca = std::sin((1.0 - s) * omega) / std::sin(omega);
  const double cb = std::sin(s * omega) / std::sin(omega);
  return from_sphere({ca * x[0] + cb * y[0], ca * x[1] + cb * y[1], ca * x[2] + cb * y[2]});
}

// ---------------------------------------------------------------------------
// Target maps

TargetPoint TargetMap::point(std::size_t i) const {
  if (chart[i] == 0) return TargetPoint::finite(coords.at(i));
  return TargetPoint::from_chart(1, coords.values(static_cast<Eigen::Index>(i), 0));
}

cplx TargetMap::coordinate(std::size_t i, int c) const {
  const cplx v = coords.values(static_cast<Eigen::Index>(i), 0);
  if (chart[i] == c) return v;
  if (!all_finite(v)) return 0.0;
  if (v == cplx(0.0, 0.0)) return cplx(kInf, 0.0);
  return 1.0 / v;
}

TargetMap make_target_map(const Target& t, const GridPtr& grid,
                          const std::function<TargetPoint(cplx)>& f) {
  std::vector<TargetPoint> pts(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) pts[i] = f(grid->node(i));
  if (t.is_sphere()) return sphere_map_from_points(grid, pts);
  TargetMap out;
  out.coords = GridMap(grid, t.dimension());
  out.chart.assign(grid->size(), 0);
  for (std::size_t i = 0; i < grid->size(); ++i)
    out.coords.values.row(static_cast<Eigen::Index>(i)) = pts[i].z.transpose();
  return out;
}

TargetMap plane_map(const GridMap& u) {
  TargetMap out;
  out.coords = u;
  out.chart.assign(u.size(), 0);
  return out;
}

TargetMap sphere_map_from_points(const GridPtr& grid, const std::vector<TargetPoint>& pts) {
  TargetMap out;
  out.coords = GridMap(grid, 1);
  out.chart.resize(grid->size());
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const int c = preferred_chart(pts[i]);
    out.chart[i] = static_cast<std::uint8_t>(c);
    out.coords.values(static_cast<Eigen::Index>(i), 0) = pts[i].chart_coordinate(c);
  }
  return out;
}

std::pair<CMatrix, CMatrix> target_wirtinger(const TargetMap& u) {
  const bool single_chart =
      std::all_of(u.chart.begin(), u.chart.end(), [](std::uint8_t c) { return c == 0; });
  if (u.coords.derivs || single_chart) {
    auto [dz, dzb] = wirtinger(u.coords);
    return {dz.values, dzb.values};
  }
  const DiscGrid& g = *u.coords.grid;
  const auto& ptr = g.stencil_ptr();
  const auto& col = g.stencil_col();
  const auto& wx = g.stencil_wx();
  const auto& wy = g.stencil_wy();
  const Eigen::Index n = static_cast<Eigen::Index>(u.size());
  CMatrix dz(n, 1), dzb(n, 1);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (Eigen::Index i = 0; i < n; ++i) {
    const int c = u.chart[i];
    cplx ux = 0.0, uy = 0.0;
    for (std::size_t q = ptr[i]; q < ptr[i + 1]; ++q) {
      const cplx v = u.coordinate(col[q], c);
      ux += wx[q] * v;
      uy += wy[q] * v;
    }
    const cplx iu(0.0, 1.0);
    dz(i, 0) = 0.5 * (ux - iu * uy);
    dzb(i, 0) = 0.5 * (ux + iu * uy);
  }
  return {dz, dzb};
}

std::vector<double> target_residual(const Target& t, const TargetMap& u) {
  std::vector<double> out(u.size(), kNaN);
  if (!t.is_sphere()) {
    DbarProblem problem{t.field, u.coords.grid, u.coords, 0.5};
    const GridMap f = residual(problem, u.coords);
    for (std::size_t i = 0; i < u.size(); ++i)
      out[i] = f.values.row(static_cast<Eigen::Index>(i)).norm();
    return out;
  }
  const auto [dz, dzb] = target_wirtinger(u);
  for (std::size_t i = 0; i < u.size(); ++i) {
    const cplx v = dzb(static_cast<Eigen::Index>(i), 0);
    const cplx w = dz(static_cast<Eigen::Index>(i), 0);
    if (all_finite(v) && all_finite(w)) out[i] = std::abs(v);
  }
  return out;
}

TargetSampler::TargetSampler(const TargetMap& u) : u_(&u) {
  sphere_ = std::any_of(u.chart.begin(), u.chart.end(), [](std::uint8_t c) { return c != 0; });
  if (!sphere_) return;
  for (int c = 0; c < 2; ++c) {
    charts_[c] = GridMap(u.coords.grid, 1);
    for (std::size_t i = 0; i < u.size(); ++i)
      charts_[c].values(static_cast<Eigen::Index>(i), 0) = u.coordinate(i, c);
  }
}

CVector TargetSampler::coordinate(cplx z, int chart) const {
  if (!sphere_) return interpolate(u_->coords, z);
  return interpolate(charts_[chart], z);
}

TargetPoint TargetSampler::operator()(cplx z) const {
  if (!sphere_) return TargetPoint::finite(interpolate(u_->coords, z));
  const std::size_t k = u_->coords.grid->nearest(z, 1).front();
  const int c = u_->chart[k];
  const CVector v = interpolate(charts_[c], z);
  if (!all_finite(v)) return u_->point(k);
  return TargetPoint::from_chart(c, v[0]);
}

TargetPoint target_interpolate(const TargetMap& u, cplx z) { return TargetSampler(u)(z); }

// ---------------------------------------------------------------------------
// Loops and open sets

BoundaryLoop BoundaryLoop::circle(const Target& t, const CVector& center, const CVector& radius_vec) {
  if (center.size() != t.dimension() || radius_vec.size() != t.dimension())
    throw InvalidArgument("loop dimension does not match the target");
  BoundaryLoop l;
  l.target = t;
  l.eval = [center, radius_vec](double s) {
    return TargetPoint::finite(center + std::polar(1.0, s) * radius_vec);
  };
  l.description = "circle";
  return l;
}

BoundaryLoop BoundaryLoop::constant(const Target& t, const TargetPoint& q) {
  BoundaryLoop l;
  l.target = t;
  l.eval = [q](double) { return q; };
  l.description = "constant";
  return l;
}

BoundaryLoop BoundaryLoop::excursion(double amplitude, int k) {
  BoundaryLoop l;
  l.target = Target::sphere();
  l.eval = [amplitude, k](double s) {
    return TargetPoint::scalar(std::exp(amplitude * std::cos(k * s)) * std::polar(1.0, s));
  };
  l.description = "excursion";
  return l;
}

std::vector<TargetPoint> BoundaryLoop::samples(int n) const {
  std::vector<TargetPoint> out(static_cast<std::size_t>(n));
  for (int j = 0; j < n; ++j) out[j] = eval(kTwoPi * j / n);
  return out;
}

double BoundaryLoop::closure_defect() const { return target_distance(target, eval(0.0), eval(kTwoPi)); }

OpenSet OpenSet::ball(const Target& t, const TargetPoint& c, double r) {
  OpenSet s;
  s.kind = t.is_sphere() ? Kind::chordal_ball : Kind::ball;
  s.target = t;
  s.center = c;
  s.radius = r;
  return s;
}

OpenSet OpenSet::annulus(const Target& t, const CVector& c, double r_inner, double r_outer) {
  if (!(r_outer > r_inner) || r_inner < 0.0) throw InvalidArgument("annulus radii must satisfy 0 <= r_inner < r_outer");
  OpenSet s;
  s.kind = Kind::annulus;
  s.target = t;
  s.center = TargetPoint::finite(c);
  s.r_inner = r_inner;
  s.r_outer = r_outer;
  return s;
}

OpenSet OpenSet::chordal_ball(const TargetPoint& c, double r) {
  OpenSet s;
  s.kind = Kind::chordal_ball;
  s.target = Target::sphere();
  s.center = c;
  s.radius = r;
  return s;
}

OpenSet OpenSet::loop_neighborhood(const BoundaryLoop& loop, double r, int samples) {
  OpenSet s;
  s.kind = Kind::loop_neighborhood;
  s.target = loop.target;
  s.radius = r;
  s.loop_samples = loop.samples(samples);
  return s;
}

double OpenSet::margin(const TargetPoint& p) const {
  switch (kind) {
    case Kind::ball:
    case Kind::chordal_ball:
      return radius - target_distance(target, p, center);
    case Kind::annulus: {
      if (p.at_infinity) return -kInf;
      const double d = (p.z - center.z).norm();
      return std::min(d - r_inner, r_outer - d);
    }
    case Kind::loop_neighborhood: {
      double best = kInf;
      const std::size_t n = loop_samples.size();
      for (std::size_t j = 0; j < n; ++j) {
        const TargetPoint& a = loop_samples[j];
        if (target.is_sphere() || p.at_infinity) {
          best = std::min(best, target_distance(target, p, a));
          continue;
        }
        // Distance to the segment from sample j to sample j + 1.
        const TargetPoint& b = loop_samples[(j + 1) % n];
        const CVector ab = b.z - a.z;
        const double len2 = ab.squaredNorm();
        double s = len2 > 0.0 ? (ab.dot(p.z - a.z)).real() / len2 : 0.0;
        s = std::clamp(s, 0.0, 1.0);
        best = std::min(best, (p.z - a.z - s * ab).norm());
      }
      return radius - best;
    }
  }
  return -kInf;
}

bool ParameterArc::contains(double t) const { return wrap(t - t0) <= length() + 1e-15; }

// ---------------------------------------------------------------------------
// Arc covers

ArcCover arc_cover(const BoundaryLoop& loop, double epsilon, int samples) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (samples < 16) throw InvalidArgument("arc cover needs at least 16 samples");
  const auto pts = loop.samples(samples);
  const int charts = loop.target.is_sphere() ? 2 : 1;
  auto in_chart = [&](int j, int c) {
    if (!loop.target.is_sphere()) return all_finite(pts[j].z);
    const TargetPoint& p = pts[j];
    if (c == 0) return !p.at_infinity && std::abs(p.z[0]) < Target::kChartLimit;
    return p.at_infinity || std::abs(p.z[0]) > 1.0 / Target::kChartLimit;
  };
  for (int j = 0; j < samples; ++j) {
    bool any = false;
    for (int c = 0; c < charts; ++c) any = any || in_chart(j, c);
    if (!any)
      throw NoCover("loop point at t = " + std::to_string(kTwoPi * j / samples) +
                    " lies in no chart");
  }
  ArcCover out;
  for (int c = 0; c < charts; ++c) {
    bool all = true;
    for (int j = 0; j < samples && all; ++j) all = in_chart(j, c);
    if (all) {
      // One arc with a single gap of epsilon / 2 centred at t = 0.
      out.arcs.push_back({epsilon / 4.0, kTwoPi - epsilon / 4.0, c});
      out.complement_measure = epsilon / 2.0;
      return out;
    }
  }
  // Start where chart 0 is unavailable, so that every run has a start.
  int j0 = 0;
  while (j0 < samples && in_chart(j0, 0)) ++j0;
  auto run_length = [&](int j, int c) {
    int len = 0;
    while (len < samples && in_chart((j + len) % samples, c)) ++len;
    return len;
  };
  struct Run {
    int start, len, chart;
  };
  std::vector<Run> runs;
  int done = 0;
  while (done < samples) {
    const int j = (j0 + done) % samples;
    int best_c = -1, best_len = 0;
    for (int c = 0; c < charts; ++c) {
      const int len = std::min(run_length(j, c), samples - done);
      if (len > best_len) {
        best_len = len;
        best_c = c;
      }
    }
    runs.push_back({j, best_len, best_c});
    done += best_len;
  }
  const double dt = kTwoPi / samples;
  const double k = static_cast<double>(runs.size());
  const double shrink = epsilon / (4.0 * k);
  double covered = 0.0;
  for (const Run& r : runs) {
    const double t0 = r.start * dt + shrink;
    const double t1 = (r.start + r.len - 1) * dt - shrink;
    if (t1 <= t0) continue;
    out.arcs.push_back({t0, t1, r.chart});
    covered += t1 - t0;
  }
  out.complement_measure = kTwoPi - covered;
  if (!(out.complement_measure < epsilon))
    throw NoCover("chart runs leave " + std::to_string(out.complement_measure) +
                  " uncovered; increase the loop samples");
  return out;
}

std::vector<ParameterArc> split_arc(const ParameterArc& arc, double max_angle) {
  if (!(max_angle > 0.0)) throw InvalidArgument("piece angle must be positive");
  if (arc.length() <= max_angle) return {arc};
  // Interior sub-arcs carry a full overlap, so 1.125 step <= max_angle.
  const int q = static_cast<int>(std::ceil(1.125 * arc.length() / max_angle));
  const double step = arc.length() / q;
  const double overlap = 0.125 * step;
  std::vector<ParameterArc> out;
  for (int k = 0; k < q; ++k) {
    ParameterArc s = arc;
    s.t0 = arc.t0 + k * step - (k > 0 ? 0.5 * overlap : 0.0);
    s.t1 = arc.t0 + (k + 1) * step + (k + 1 < q ? 0.5 * overlap : 0.0);
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Grafts

LocalExpansion local_expansion(const TargetMap& phi, cplx z0, int chart, double rho) {
  const DiscGrid& g = *phi.coords.grid;
  if (rho <= 0.0) rho = 4.0 * g.spacing();
  if (g.domain().margin(z0) < rho)
    throw InvalidArgument("local expansion circle leaves the domain");
  constexpr int kSamples = 32;
  const TargetSampler sampler(phi);
  const int n = phi.coords.dim();
  Eigen::MatrixXcd m(kSamples, 3);
  Eigen::MatrixXcd rhs(kSamples, n);
  for (int k = 0; k < kSamples; ++k) {
    const cplx e = std::polar(rho, kTwoPi * k / kSamples);
    m(k, 0) = 1.0;
    m(k, 1) = e;
    m(k, 2) = std::conj(e);
    const CVector v = sampler.coordinate(z0 + e, chart);
    if (!all_finite(v)) throw PoleEvaluation("map is undefined in the chosen chart near the site");
    rhs.row(k) = v.transpose();
  }
  const Eigen::MatrixXcd sol = m.colPivHouseholderQr().solve(rhs);
  LocalExpansion out;
  out.c = sol.row(0).transpose();
  out.a = sol.row(1).transpose();
  out.b = sol.row(2).transpose();
  return out;
}

LocalExpansion local_expansion(const GridMap& phi, cplx z0, double rho) {
  return local_expansion(plane_map(phi), z0, 0, rho);
}

double Graft::outer_radius() const { return radius * (1.0 + std::pow(radius, blend_exponent)); }

CVector Graft::value(cplx z) const {
  const cplx d = z - center;
  if (!has_pole()) return c + d * a;
  if (d == cplx(0.0, 0.0)) return CVector::Constant(c.size(), cplx(kInf, 0.0));
  return c + d * a + (radius * radius / d) * b;
}

CVector Graft::dz(cplx z) const {
  const cplx d = z - center;
  if (!has_pole()) return a;
  if (d == cplx(0.0, 0.0)) return CVector::Constant(c.size(), cplx(kInf, 0.0));
  return a - (radius * radius / (d * d)) * b;
}

double Graft::cutoff(cplx z) const {
  const double rho = std::abs(z - center);
  const double outer = outer_radius();
  if (rho <= radius) return 1.0;
  if (rho >= outer) return 0.0;
  const double s = (rho - radius) / (outer - radius);
  return std::exp(1.0 - 1.0 / (1.0 - s * s));
}

CVector graft_map(const Target& t, const Graft& g, cplx z) {
  if (!t.is_sphere() && g.has_pole() && std::abs(z - g.center) < 1e-14)
    throw PoleEvaluation("graft pole evaluated in the plane target");
  return g.value(z);
}

TargetMap apply_graft(const Target& t, const TargetMap& phi, const Graft& g, GraftReport* report) {
  const GridPtr grid = phi.coords.grid;
  const double outer = g.outer_radius();
  if (!(g.radius > 0.0)) throw InvalidArgument("graft radius must be positive");
  if (grid->domain().margin(g.center) < outer)
    throw BlendOverlap("blend annulus of the graft leaves the domain");
  const bool sphere = t.is_sphere();
  const int n = phi.coords.dim();
  const int gc = sphere ? g.chart : 0;

  const auto [dz, dzb] = target_wirtinger(phi);
  const std::vector<double> before = target_residual(t, phi);

  TargetMap out = phi;
  CMatrix odz = dz, odzb = dzb;
  const auto touched = grid->within(g.center, outer);
  for (std::size_t i : touched) {
    const cplx z = grid->node(i);
    if (!sphere && g.has_pole() && std::abs(z - g.center) < 1e-14)
      throw PoleEvaluation("grid node on the graft pole in the plane target");
  }
  const double r2 = g.radius * g.radius;
  for (std::size_t i : touched) {
    const Eigen::Index ii = static_cast<Eigen::Index>(i);
    const cplx z = grid->node(i);
    const cplx d = z - g.center;
    const double rho = std::abs(d);
    if (rho >= outer) continue;

    if (sphere && rho == 0.0 && g.has_pole()) {
      // Pole: the other chart sees 1/H, with derivative 1/(b r^2).
      out.chart[i] = static_cast<std::uint8_t>(1 - gc);
      out.coords.values(ii, 0) = 0.0;
      odz(ii, 0) = 1.0 / (g.b[0] * r2);
      odzb(ii, 0) = 0.0;
      continue;
    }
    // phi and its derivatives in the graft chart.
    CVector v(n), vz(n), vzb(n);
    if (!sphere || phi.chart[i] == gc) {
      v = phi.coords.at(i);
      vz = dz.row(ii).transpose();
      vzb = dzb.row(ii).transpose();
    } else {
      const cplx w = phi.coords.values(ii, 0);
      v[0] = phi.coordinate(i, gc);
      vz[0] = invert_derivative(w, dz(ii, 0));
      vzb[0] = invert_derivative(w, dzb(ii, 0));
    }
    const CVector h = g.value(z);
    const CVector hz = g.dz(z);
    CVector u(n), uz(n), uzb(n);
    if (rho <= g.radius) {
      u = h;
      uz = hz;
      uzb.setZero();
    } else {
      if (!all_finite(v) || !all_finite(vz) || !all_finite(vzb))
        throw BlendOverlap("map is undefined in the graft chart on the blend annulus");
      const double chi = g.cutoff(z);
      const double s = (rho - g.radius) / (outer - g.radius);
      const double dchi = chi * (-2.0 * s / ((1.0 - s * s) * (1.0 - s * s))) / (outer - g.radius);
      const cplx chi_z = dchi * std::conj(d) / (2.0 * rho);
      const cplx chi_zb = dchi * d / (2.0 * rho);
      u = chi * h + (1.0 - chi) * v;
      uz = chi_z * (h - v) + chi * hz + (1.0 - chi) * vz;
      uzb = chi_zb * (h - v) + (1.0 - chi) * vzb;
    }
    if (sphere) {
      int c = gc;
      if (std::abs(u[0]) > Target::kChartLimit) {
        const cplx w = 1.0 / u[0];
        uz[0] = invert_derivative(u[0], uz[0]);
        uzb[0] = invert_derivative(u[0], uzb[0]);
        u[0] = w;
        c = 1 - gc;
      }
      out.chart[i] = static_cast<std::uint8_t>(c);
    }
    out.coords.values.row(ii) = u.transpose();
    odz.row(ii) = uz.transpose();
    odzb.row(ii) = uzb.transpose();
  }
  auto cache = std::make_shared<DerivativeCache>();
  cache->dz = std::move(odz);
  cache->dzbar = std::move(odzb);
  out.coords.derivs = std::move(cache);

  if (report) {
    const std::vector<double> after = target_residual(t, out);
    *report = GraftReport{};
    for (std::size_t i : touched) {
      const double rho = std::abs(grid->node(i) - g.center);
      if (rho <= g.radius) {
        if (std::isfinite(before[i]))
          report->residual_before_inside = std::max(report->residual_before_inside, before[i]);
        if (std::isfinite(after[i]))
          report->residual_after_inside = std::max(report->residual_after_inside, after[i]);
      } else if (rho < outer && std::isfinite(after[i])) {
        report->residual_blend = std::max(report->residual_blend, after[i]);
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Center discs

CenterDisc center_disc(const CVector& p, FieldPtr field, double radius, int resolution,
                       const CVector& direction) {
  if (p.size() != field->dimension()) throw InvalidArgument("base point dimension mismatch");
  if (!(radius > 0.0)) throw InvalidArgument("center radius must be positive");
  CVector v = direction;
  if (v.size() == 0) {
    v = CVector::Zero(p.size());
    v[0] = 1.0;
  }
  if (v.size() != p.size() || !all_finite(v)) throw InvalidArgument("bad center direction");
  if (v.norm() > 0.0) v /= v.norm();
  std::string last;
  for (int halvings = 0; halvings <= 6; ++halvings) {
    const double r = radius / std::ldexp(1.0, halvings);
    try {
      const GridPtr grid = build_grid(Domain::disc(r), resolution);
      const GridMap phi = sample_map(grid, static_cast<int>(p.size()),
                                     [&](cplx z) -> CVector { return p + z * v; });
      DbarProblem problem{field, grid, phi, 0.5};
      NewtonOptions opts;
      opts.centered = true;
      NewtonResult res = newton_solve(problem, opts);
      return CenterDisc{std::move(res.u), r, res.cert, halvings};
    } catch (const Error& e) {
      last = e.what();
    }
  }
  throw SolveFailed("center disc failed after 6 halvings: " + last);
}

// ---------------------------------------------------------------------------
// Boundary pieces and glue

cplx BoundaryPiece::to_tube(cplx zeta) const {
  const cplx w = zeta * std::polar(1.0, -center_angle);
  return cplx(std::arg(w), -std::log(std::abs(w))) / scale;
}

TargetPoint BoundaryPiece::value(cplx zeta) const {
  const CVector v = interpolate(tube_solution, to_tube(zeta));
  if (kind == TargetKind::plane) return TargetPoint::finite(v);
  return TargetPoint::from_chart(arc.chart, v[0]);
}

BoundaryPiece solve_piece(const Target& t, const BoundaryLoop& loop, const ParameterArc& arc,
                          double epsilon, int m_start, int arc_samples) {
  if (arc.length() <= 0.0 || arc.length() >= kTwoPi) throw InvalidArgument("bad parameter arc");
  BoundaryPiece piece;
  piece.arc = arc;
  piece.kind = t.kind;
  piece.center_angle = 0.5 * (arc.t0 + arc.t1);
  const double half = 0.5 * arc.length();
  // Straightened arc plus tube width stays inside the unit disc.
  piece.scale = half / (0.95 - 1.0 / m_start);
  const double xe = half / piece.scale;
  std::vector<double> xs(static_cast<std::size_t>(arc_samples));
  std::vector<CVector> vals(xs.size());
  for (int j = 0; j < arc_samples; ++j) {
    xs[j] = -xe + 2.0 * xe * j / (arc_samples - 1);
    const TargetPoint p = loop.eval(piece.center_angle + piece.scale * xs[j]);
    if (t.is_sphere()) {
      const cplx c = p.chart_coordinate(arc.chart);
      if (!all_finite(c)) throw NoCover("loop leaves the chart of its arc");
      vals[j] = scalar_vec(c);
    } else {
      vals[j] = p.z;
    }
  }
  const ArcData data = ArcData::from_values(xs, vals);
  const FieldPtr field = t.is_sphere() ? make_standard(1) : t.field;
  ShrinkResult res = shrink_solve(data, field, epsilon, m_start);
  piece.tube_solution = std::move(res.u);
  piece.log = std::move(res.log);
  piece.m = res.m;
  piece.rho_inner = std::exp(-piece.scale * 0.5 / res.m);
  return piece;
}

TargetMap glue(const Target& t, const GridPtr& grid, const std::vector<BoundaryPiece>& pieces,
               const CenterDisc& base, const CVector& p) {
  if (pieces.empty()) throw InvalidArgument("glue needs at least one boundary piece");
  std::vector<const BoundaryPiece*> sorted;
  for (const auto& pc : pieces) sorted.push_back(&pc);
  std::sort(sorted.begin(), sorted.end(),
            [](const BoundaryPiece* a, const BoundaryPiece* b) { return wrap(a->arc.t0) < wrap(b->arc.t0); });
  double rho1 = 0.0;
  for (const auto* pc : sorted) rho1 = std::max(rho1, pc->rho_inner);
  const double rho0 = base.radius;
  if (!(rho0 < rho1)) throw InvalidArgument("center disc overlaps the boundary pieces");

  auto center_value = [&](cplx z) {
    const CVector v = interpolate(base.u, z);
    return t.is_sphere() ? TargetPoint::scalar(v[0]) : TargetPoint::finite(v);
  };
  auto outer_value = [&](double rho, double theta) {
    const BoundaryPiece* first = nullptr;
    const BoundaryPiece* second = nullptr;
    for (const auto* pc : sorted) {
      if (!pc->arc.contains(theta)) continue;
      if (!first) first = pc;
      else second = pc;
    }
    if (first && second) {
      // Overlap of consecutive pieces: blend from the one ending first.
      if (wrap(second->arc.t1 - theta) < wrap(first->arc.t1 - theta)) std::swap(first, second);
      const double s = smoothstep(wrap(theta - second->arc.t0) / wrap(first->arc.t1 - second->arc.t0));
      return target_path(t, first->value(std::polar(rho, theta)),
                         second->value(std::polar(rho, theta)), s);
    }
    if (first) return first->value(std::polar(rho, theta));
    // Gap: between the piece ending before theta and the one starting after.
    const BoundaryPiece* prev = nullptr;
    const BoundaryPiece* next = nullptr;
    double gap_prev = kInf, gap_next = kInf;
    for (const auto* pc : sorted) {
      const double dp = wrap(theta - pc->arc.t1);
      const double dn = wrap(pc->arc.t0 - theta);
      if (dp < gap_prev) gap_prev = dp, prev = pc;
      if (dn < gap_next) gap_next = dn, next = pc;
    }
    const double s = smoothstep(gap_prev / (gap_prev + gap_next));
    return target_path(t, prev->value(std::polar(rho, prev->arc.t1)),
                       next->value(std::polar(rho, next->arc.t0)), s);
  };

  std::vector<TargetPoint> pts(grid->size());
  const long n = static_cast<long>(grid->size());
  std::vector<std::string> errors(grid->size());
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
  for (long i = 0; i < n; ++i) {
    try {
      const cplx z = grid->node(static_cast<std::size_t>(i));
      const double rho = std::min(std::abs(z), 1.0);
      const double theta = std::arg(z);
      if (rho <= rho0) {
        pts[i] = center_value(z);
      } else if (rho >= rho1) {
        pts[i] = outer_value(rho, theta);
      } else {
        const double s = smoothstep((rho - rho0) / (rho1 - rho0));
        pts[i] = target_path(t, center_value(std::polar(rho0, theta)), outer_value(rho1, theta), s);
      }
    } catch (const Error& e) {
      errors[i] = e.what();
    }
  }
  for (const auto& e : errors)
    if (!e.empty()) throw DisconnectedTarget(e);
  const long o = grid->origin_index();
  if (o >= 0) pts[o] = TargetPoint::finite(p);

  if (t.is_sphere()) return sphere_map_from_points(grid, pts);
  TargetMap out;
  out.coords = GridMap(grid, t.dimension());
  out.chart.assign(grid->size(), 0);
  for (std::size_t i = 0; i < grid->size(); ++i)
    out.coords.values.row(static_cast<Eigen::Index>(i)) = pts[i].z.transpose();
  return out;
}

// ---------------------------------------------------------------------------
// Global correction

namespace {

/// Boundary sample parameters lying in K.
std::vector<double> k_samples(const std::vector<ParameterArc>& k, int n) {
  std::vector<double> out;
  for (int j = 0; j < n; ++j) {
    const double t = kTwoPi * j / n;
    for (const auto& a : k)
      if (a.contains(t)) {
        out.push_back(t);
        break;
      }
  }
  return out;
}

double interior_finite_sup(const DiscGrid& g, const std::vector<double>& r) {
  double m = 0.0;
  for (std::size_t i : g.interior_nodes())
    if (std::isfinite(r[i])) m = std::max(m, r[i]);
  return m;
}

}  // namespace

TargetMap global_correct(const Target& t, const TargetMap& phi, const std::vector<ParameterArc>& k,
                         double epsilon, const std::vector<Graft>& grafts, CorrectionReport* report) {
  const GridPtr grid = phi.coords.grid;
  if (grid->origin_index() < 0) throw InvalidArgument("global correction needs a node at the origin");
  CorrectionReport rep;
  rep.residual_before = interior_finite_sup(*grid, target_residual(t, phi));
  TargetMap u;
  if (!t.is_sphere()) {
    rep.method = "centered_newton";
    DbarProblem problem{t.field, grid, phi.coords, 0.5};
    NewtonOptions opts;
    opts.centered = true;
    opts.max_iter = 20;
    NewtonResult res;
    try {
      res = newton_solve(problem, opts);
    } catch (const Error& e) {
      if (e.kind() != "MaxIter" && e.kind() != "Diverged") throw;
      // Far from a solution the frozen iteration can stall; the full
      // iteration is not covered by the certificate (mode "full").
      rep.method = "centered_newton_full";
      opts.full_newton = true;
      opts.max_iter = 50;
      res = newton_solve(problem, opts);
    }
    rep.cert = res.cert;
    u = plane_map(res.u);
  } else {
    rep.method = "chart_z_cauchy_green";
    const auto [dz, dzb] = target_wirtinger(phi);
    GridMap f(grid, 1);
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const cplx zc = phi.coordinate(i, 0);
      cplx d = 0.0;
      if (all_finite(zc) && std::abs(zc) < 4.0) {
        d = phi.chart[i] == 0 ? dzb(ii, 0) : invert_derivative(phi.coords.values(ii, 0), dzb(ii, 0));
        const double chi = 1.0 - smoothstep((std::abs(zc) - 2.0) / 2.0);
        d *= chi;
      }
      for (const auto& g : grafts)
        if (std::abs(grid->node(i) - g.center) < 0.5 * g.radius) d = 0.0;
      f.values(ii, 0) = all_finite(d) ? d : cplx(0.0, 0.0);
    }
    const GridMap delta = cauchy_green_centered(f) * cplx(-1.0, 0.0);
    const auto [ddz, ddzb] = wirtinger(delta);
    u = phi;
    CMatrix udz = dz, udzb = dzb;
    for (std::size_t i = 0; i < grid->size(); ++i) {
      const Eigen::Index ii = static_cast<Eigen::Index>(i);
      const cplx dl = delta.values(ii, 0);
      const cplx v = phi.coords.values(ii, 0);
      if (phi.chart[i] == 0) {
        u.coords.values(ii, 0) = v + dl;
        udz(ii, 0) += ddz.values(ii, 0);
        udzb(ii, 0) += ddzb.values(ii, 0);
      } else {
        const cplx q = 1.0 + dl * v;
        const cplx w = v / q;
        u.coords.values(ii, 0) = w;
        udz(ii, 0) = dz(ii, 0) / (q * q) - w * w * ddz.values(ii, 0);
        udzb(ii, 0) = dzb(ii, 0) / (q * q) - w * w * ddzb.values(ii, 0);
      }
      // Re-chart when the value crossed the chart limit.
      const cplx val = u.coords.values(ii, 0);
      if (std::abs(val) > Target::kChartLimit) {
        u.coords.values(ii, 0) = 1.0 / val;
        udz(ii, 0) = invert_derivative(val, udz(ii, 0));
        udzb(ii, 0) = invert_derivative(val, udzb(ii, 0));
        u.chart[i] = static_cast<std::uint8_t>(1 - u.chart[i]);
      }
    }
    auto cache = std::make_shared<DerivativeCache>();
    cache->dz = std::move(udz);
    cache->dzbar = std::move(udzb);
    u.coords.derivs = std::move(cache);
  }
  rep.residual_after = interior_finite_sup(*grid, target_residual(t, u));
  const long o = grid->origin_index();
  rep.origin_shift = target_distance(t, u.point(static_cast<std::size_t>(o)),
                                     phi.point(static_cast<std::size_t>(o)));
  const TargetSampler su(u), sp(phi);
  for (double s : k_samples(k, 1024)) {
    const cplx z = std::polar(1.0, s);
    rep.distance_on_k = std::max(rep.distance_on_k, target_distance(t, su(z), sp(z)));
  }
  if (report) *report = rep;
  if (!(rep.distance_on_k < epsilon))
    throw CorrectionTooLarge("correction moves the boundary on K by " +
                             std::to_string(rep.distance_on_k));
  return u;
}

// ---------------------------------------------------------------------------
// Pipeline

double exceptional_measure(const Target& t, const TargetMap& u, const BoundaryLoop& loop,
                           double epsilon, int n) {
  if (n < 1) throw InvalidArgument("sample count must be positive");
  const TargetSampler s(u);
  const double radius = u.coords.grid->domain().radius;
  std::vector<char> bad(static_cast<std::size_t>(n), 0);
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int j = 0; j < n; ++j) {
    const double tj = kTwoPi * j / n;
    bad[j] = target_distance(t, s(std::polar(radius, tj)), loop.eval(tj)) >= epsilon;
  }
  long count = 0;
  for (char b : bad) count += b;
  return kTwoPi * static_cast<double>(count) / n;
}

namespace {

struct Site {
  std::size_t node;
  double residual;
};

/// Residual maxima above the threshold, greedily separated, strongest first.
std::vector<Site> graft_sites(const DiscGrid& g, const std::vector<double>& r, double threshold,
                              double min_separation, int max_sites) {
  std::vector<Site> cand;
  const double h = g.spacing();
  for (std::size_t i : g.interior_nodes()) {
    if (!std::isfinite(r[i]) || r[i] <= threshold) continue;
    bool is_max = true;
    for (std::size_t q : g.within(g.node(i), 2.0 * h))
      if (std::isfinite(r[q]) && (r[q] > r[i] || (r[q] == r[i] && q < i))) {
        is_max = false;
        break;
      }
    if (is_max) cand.push_back({i, r[i]});
  }
  std::sort(cand.begin(), cand.end(), [](const Site& a, const Site& b) {
    return a.residual != b.residual ? a.residual > b.residual : a.node < b.node;
  });
  std::vector<Site> out;
  for (const Site& s : cand) {
    if (static_cast<int>(out.size()) >= max_sites) break;
    bool ok = true;
    for (const Site& o : out)
      if (std::abs(g.node(s.node) - g.node(o.node)) < min_separation) ok = false;
    if (ok) out.push_back(s);
  }
  return out;
}

/// r with r (1 + r^eps) = outer.
double radius_for_outer(double outer, double eps) {
  double lo = 0.0, hi = outer;
  for (int it = 0; it < 100; ++it) {
    const double mid = 0.5 * (lo + hi);
    (mid * (1.0 + std::pow(mid, eps)) < outer ? lo : hi) = mid;
  }
  return lo;
}

}  // namespace

std::string graft_json(const Graft& g) {
  nlohmann::ordered_json j;
  j["center"] = {g.center.real(), g.center.imag()};
  j["radius"] = g.radius;
  j["outer_radius"] = g.outer_radius();
  j["blend_exponent"] = g.blend_exponent;
  j["chart"] = g.chart == 0 ? "z" : "w";
  auto vec = [](const CVector& v) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (Eigen::Index k = 0; k < v.size(); ++k) a.push_back({v[k].real(), v[k].imag()});
    return a;
  };
  j["c"] = vec(g.c);
  j["a"] = vec(g.a);
  j["b"] = vec(g.b);
  return j.dump();
}

std::string stages_json(const std::vector<StageRecord>& stages) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& s : stages) {
    nlohmann::ordered_json j;
    j["stage"] = s.stage;
    j["detail"] = nlohmann::ordered_json::parse(s.detail);
    a.push_back(j);
  }
  return a.dump();
}

PoletskyDisc poletsky_disc(const Target& t, const TargetPoint& p, const OpenSet& u_set,
                           double epsilon, const BoundaryLoop* loop_in, const PoletskyOptions& opts) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (opts.boundary_samples < 4096) throw InvalidArgument("boundary samples must be at least 4096");
  if (p.at_infinity || (t.is_sphere() && std::abs(p.z[0]) > Target::kChartLimit))
    throw InvalidArgument("base point must lie in chart z");
  if (p.z.size() != t.dimension()) throw InvalidArgument("base point dimension mismatch");

  BoundaryLoop loop;
  if (loop_in) {
    loop = *loop_in;
  } else {
    switch (u_set.kind) {
      case OpenSet::Kind::ball:
      case OpenSet::Kind::chordal_ball:
        loop = BoundaryLoop::constant(t, u_set.center);
        break;
      case OpenSet::Kind::annulus: {
        CVector rv = CVector::Zero(t.dimension());
        rv[0] = 0.5 * (u_set.r_inner + u_set.r_outer);
        loop = BoundaryLoop::circle(t, u_set.center.z, rv);
        break;
      }
      case OpenSet::Kind::loop_neighborhood:
        throw InvalidArgument("a loop neighbourhood needs an explicit loop");
    }
  }
  for (double s : {0.0, 1.0, 2.0, 3.0, 4.0, 5.0, 6.0})
    if (!u_set.contains(loop.eval(s)))
      throw InvalidArgument("loop leaves the open set U");

  PoletskyDisc out;
  out.target = t;
  out.p = p;
  out.epsilon = epsilon;
  out.boundary_samples = opts.boundary_samples;
  std::string stage;
  auto record = [&](const std::string& name, const nlohmann::ordered_json& j) {
    out.provenance.push_back({name, j.dump()});
  };
  try {
    stage = "arc_cover";
    const ArcCover cover = arc_cover(loop, epsilon, opts.boundary_samples);
    {
      nlohmann::ordered_json j;
      j["arcs"] = nlohmann::ordered_json::array();
      for (const auto& a : cover.arcs)
        j["arcs"].push_back({{"t0", a.t0}, {"t1", a.t1}, {"chart", a.chart == 0 ? "z" : "w"}});
      j["complement_measure"] = cover.complement_measure;
      record(stage, j);
    }

    stage = "shrink";
    std::vector<BoundaryPiece> pieces;
    for (const auto& a : cover.arcs)
      for (const auto& sub : split_arc(a, opts.max_piece_angle))
        pieces.push_back(solve_piece(t, loop, sub, epsilon / 4.0, opts.m_start));
    {
      nlohmann::ordered_json j = nlohmann::ordered_json::array();
      for (const auto& pc : pieces)
        j.push_back({{"t0", pc.arc.t0},
                     {"t1", pc.arc.t1},
                     {"m", pc.m},
                     {"scale", pc.scale},
                     {"rho_inner", pc.rho_inner},
                     {"log", nlohmann::ordered_json::parse(shrink_log_json(pc.log))}});
      record(stage, {{"pieces", j}});
    }

    stage = "center_disc";
    const FieldPtr field = t.is_sphere() ? make_standard(1) : t.field;
    // Plane: the center disc follows the winding of the loop (its first
    // Fourier coefficient); a loop without one gets the constant disc.
    CVector direction;
    if (!t.is_sphere()) {
      const int ns = 256;
      direction = CVector::Zero(p.z.size());
      for (int j = 0; j < ns; ++j) {
        const double tj = kTwoPi * j / ns;
        direction += loop.eval(tj).z * std::polar(1.0 / ns, -tj);
      }
      if (direction.norm() <= 1e-12 * (1.0 + p.z.norm())) direction.setZero();
    }
    const CenterDisc base = center_disc(p.z, field, opts.center_radius, 32, direction);
    record(stage, {{"radius", base.radius},
                   {"halvings", base.halvings},
                   {"final_residual", base.cert.final_residual},
                   {"iterations", base.cert.iterations}});

    stage = "glue";
    const GridPtr grid = build_grid(Domain::unit_disc(), opts.resolution);
    TargetMap phi = glue(t, grid, pieces, base, p.z);
    const std::vector<double> glue_res = target_residual(t, phi);
    const double glue_sup = interior_finite_sup(*grid, glue_res);
    record(stage, {{"resolution", opts.resolution},
                   {"nodes", grid->size()},
                   {"residual_sup", glue_sup}});

    stage = "graft";
    {
      const double budget = epsilon / 4.0;
      const double h = grid->spacing();
      const double r_max = opts.graft_max_radius;
      const double outer_max = r_max * (1.0 + std::pow(r_max, opts.blend_exponent));
      auto sites = graft_sites(*grid, glue_res, 2.0 * budget, 2.0 * outer_max, opts.max_grafts);
      nlohmann::ordered_json j;
      j["threshold"] = 2.0 * budget;
      j["sites_found"] = sites.size();
      j["records"] = nlohmann::ordered_json::array();
      if (!t.is_sphere()) {
        j["skipped"] = "poles are not admissible in the plane target";
      } else {
        for (const Site& s : sites) {
          const cplx z0 = grid->node(s.node);
          double d = grid->domain().margin(z0);
          for (const Site& o : sites)
            if (o.node != s.node) d = std::min(d, std::abs(grid->node(o.node) - z0));
          const double r = std::min(r_max, radius_for_outer(0.5 * d, opts.blend_exponent));
          nlohmann::ordered_json rec;
          rec["site"] = {z0.real(), z0.imag()};
          if (r < h) {
            rec["skipped"] = "site too close to the boundary or another site";
            j["records"].push_back(rec);
            continue;
          }
          try {
            const int chart = phi.chart[s.node];
            const LocalExpansion le = local_expansion(phi, z0, chart, std::min(4.0 * h, 0.5 * d));
            Graft g{z0, le.c, le.a, le.b, r, opts.blend_exponent, chart};
            GraftReport gr;
            phi = apply_graft(t, phi, g, &gr);
            out.grafts.push_back(g);
            rec["graft"] = nlohmann::ordered_json::parse(graft_json(g));
            rec["residual_before_inside"] = gr.residual_before_inside;
            rec["residual_after_inside"] = gr.residual_after_inside;
            rec["residual_blend"] = gr.residual_blend;
          } catch (const Error& e) {
            rec["skipped"] = e.what();
          }
          j["records"].push_back(rec);
        }
      }
      j["applied"] = out.grafts.size();
      record(stage, j);
    }

    stage = "global_correct";
    CorrectionReport cr;
    out.u = global_correct(t, phi, cover.arcs, epsilon, out.grafts, &cr);
    {
      nlohmann::ordered_json j;
      j["method"] = cr.method;
      j["residual_before"] = cr.residual_before;
      j["residual_after"] = cr.residual_after;
      j["distance_on_k"] = cr.distance_on_k;
      j["origin_shift"] = cr.origin_shift;
      if (!t.is_sphere()) j["certificate"] = nlohmann::ordered_json::parse(certificate_json(cr.cert));
      record(stage, j);
    }

    stage = "measure";
    const long o = grid->origin_index();
    out.base_point_error = target_distance(t, out.u.point(static_cast<std::size_t>(o)), p);
    out.exceptional_measure = exceptional_measure(t, out.u, loop, epsilon, opts.boundary_samples);
    out.exceptional_measure_2n =
        exceptional_measure(t, out.u, loop, epsilon, 2 * opts.boundary_samples);
    out.success = out.exceptional_measure < epsilon && out.base_point_error <= 1e-6;
    record(stage, {{"exceptional_measure", out.exceptional_measure},
                   {"exceptional_measure_2n", out.exceptional_measure_2n},
                   {"base_point_error", out.base_point_error},
                   {"u0", point_json(out.u.point(static_cast<std::size_t>(o)))},
                   {"success", out.success}});
  } catch (const Error& e) {
    throw PipelineFailed(stage, e.what(), stages_json(out.provenance));
  }
  return out;
}

double functional_estimate(const std::function<double(const TargetPoint&)>& f,
                           const TargetPoint& p, const std::vector<PoletskyDisc>& discs,
                           int samples) {
  if (discs.empty()) throw InvalidArgument("functional estimate needs at least one disc");
  if (samples < 1) throw InvalidArgument("sample count must be positive");
  double best = kInf;
  for (const auto& d : discs) {
    const GridPtr grid = d.u.coords.grid;
    const long o = grid->origin_index();
    if (o < 0) throw InvalidArgument("disc grid has no node at the origin");
    const double err = target_distance(d.target, d.u.point(static_cast<std::size_t>(o)), p);
    if (err > 1e-6)
      throw BasePointMismatch("disc center is " + std::to_string(err) + " away from p");
    const TargetSampler s(d.u);
    double sum = 0.0;
    for (int j = 0; j < samples; ++j) sum += f(s(std::polar(1.0, kTwoPi * j / samples)));
    best = std::min(best, sum / samples);
  }
  return best;
}

}  // namespace holodisc
