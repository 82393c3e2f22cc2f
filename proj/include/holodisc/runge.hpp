#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "holodisc/arc.hpp"
#include "holodisc/dbar.hpp"

namespace holodisc {

// ---------------------------------------------------------------------------
// Target models

enum class TargetKind { plane, riemann_sphere };

/// The plane C^n with a structure A, or the Riemann sphere with its standard
/// structure and the two charts z and w = 1/z.
struct Target {
  TargetKind kind = TargetKind::plane;
  FieldPtr field;

  static Target plane(FieldPtr field);
  static Target sphere();
  int dimension() const { return field->dimension(); }
  bool is_sphere() const { return kind == TargetKind::riemann_sphere; }
  std::string name() const;

  /// Sphere charts hold |coordinate| <= kChartLimit; beyond it the other
  /// chart takes over.
  static constexpr double kChartLimit = 2.0;
};

/// A point of the target. On the sphere z is the coordinate in chart z and
/// `at_infinity` marks the point w = 0.
struct TargetPoint {
  CVector z;
  bool at_infinity = false;

  static TargetPoint finite(const CVector& z) { return {z, false}; }
  static TargetPoint scalar(cplx z);
  static TargetPoint infinity();
  /// Coordinate in chart 0 (z) or 1 (w = 1/z); non-finite when undefined.
  cplx chart_coordinate(int chart) const;
  static TargetPoint from_chart(int chart, cplx value);
};

/// Preferred chart of a point: 0 unless |z| exceeds the chart limit.
int preferred_chart(const TargetPoint& p);

/// Euclidean distance on the plane, chordal distance
/// 2 |z - w| / sqrt((1 + |z|^2)(1 + |w|^2)) on the sphere.
double target_distance(const Target& t, const TargetPoint& a, const TargetPoint& b);

/// Point at parameter s in [0, 1] on the path from a to b: the segment in
/// the plane, the shorter great-circle arc on the sphere. Throws
/// DisconnectedTarget for antipodal sphere points.
TargetPoint target_path(const Target& t, const TargetPoint& a, const TargetPoint& b, double s);

/// A map from a grid into the target. Values are chart coordinates; on the
/// plane every node uses chart 0. `coords.derivs`, when present, holds the
/// Wirtinger derivatives in each node's chart.
struct TargetMap {
  GridMap coords;
  std::vector<std::uint8_t> chart;

  std::size_t size() const { return coords.size(); }
  TargetPoint point(std::size_t i) const;
  /// Coordinate of node i in the given chart.
  cplx coordinate(std::size_t i, int chart) const;
};

TargetMap make_target_map(const Target& t, const GridPtr& grid,
                          const std::function<TargetPoint(cplx)>& f);
TargetMap plane_map(const GridMap& u);
/// Re-charts every node by `preferred_chart`, converting derivative caches.
TargetMap sphere_map_from_points(const GridPtr& grid, const std::vector<TargetPoint>& pts);

/// Wirtinger derivatives in each node's chart; non-finite entries where a
/// stencil neighbour is undefined in that chart.
std::pair<CMatrix, CMatrix> target_wirtinger(const TargetMap& u);

/// |u_zetabar + A(u) conj(u_zeta)| per node, in each node's chart; NaN where
/// undefined.
std::vector<double> target_residual(const Target& t, const TargetMap& u);

/// Value at an arbitrary point of the closed domain: a local cubic fit in
/// the chart of the nearest node, that node's value when the fit is undefined.
class TargetSampler {
 public:
  explicit TargetSampler(const TargetMap& u);
  TargetPoint operator()(cplx z) const;
  /// Fitted coordinate in a fixed chart; non-finite when undefined.
  CVector coordinate(cplx z, int chart) const;

 private:
  const TargetMap* u_;
  bool sphere_ = false;
  GridMap charts_[2];
};

TargetPoint target_interpolate(const TargetMap& u, cplx z);

// ---------------------------------------------------------------------------
// Loops, open sets, arc covers

/// A C^2 loop t -> lambda(e^{it}) in the target.
struct BoundaryLoop {
  Target target;
  std::function<TargetPoint(double)> eval;
  std::string description;

  static BoundaryLoop circle(const Target& t, const CVector& center, const CVector& radius_vec);
  static BoundaryLoop constant(const Target& t, const TargetPoint& q);
  /// Sphere loop exp(amplitude cos(k t)) e^{it}, crossing between the
  /// hemispheres 2k times when amplitude > ln 2.
  static BoundaryLoop excursion(double amplitude, int k);
  /// Samples at t = 2 pi j / samples.
  std::vector<TargetPoint> samples(int samples) const;
  /// Target distance between lambda(0) and lambda(2 pi).
  double closure_defect() const;
};

/// Open set given by membership and a margin (distance to the complement).
struct OpenSet {
  enum class Kind { ball, annulus, loop_neighborhood, chordal_ball };
  Kind kind = Kind::ball;
  TargetPoint center;
  double radius = 1.0;
  double r_inner = 0.0, r_outer = 1.0;
  std::vector<TargetPoint> loop_samples;
  Target target;

  static OpenSet ball(const Target& t, const TargetPoint& c, double r);
  static OpenSet annulus(const Target& t, const CVector& c, double r_inner, double r_outer);
  static OpenSet chordal_ball(const TargetPoint& c, double r);
  static OpenSet loop_neighborhood(const BoundaryLoop& loop, double r, int samples = 4096);

  double margin(const TargetPoint& p) const;
  bool contains(const TargetPoint& p) const { return margin(p) > 0.0; }
};

struct ParameterArc {
  double t0 = 0.0;  // start angle
  double t1 = 0.0;  // end angle, t0 < t1 < t0 + 2 pi
  int chart = 0;
  double length() const { return t1 - t0; }
  bool contains(double t) const;
};

struct ArcCover {
  std::vector<ParameterArc> arcs;
  double complement_measure = 0.0;
};

/// Splits an arc into pieces no longer than about max_angle that overlap by
/// an eighth of a piece at interior seams; the ends are unchanged.
std::vector<ParameterArc> split_arc(const ParameterArc& arc, double max_angle);

/// Disjoint closed parameter arcs, each mapped into one chart, with
/// complement of measure < epsilon. Maximal chart runs are found on `samples`
/// points; every run is shortened by epsilon / (4k) at both ends. Throws
/// NoCover.
ArcCover arc_cover(const BoundaryLoop& loop, double epsilon, int samples = 4096);

// ---------------------------------------------------------------------------
// Grafts

struct LocalExpansion {
  CVector c, a, b;
};

/// Least-squares fit of c + a (z - z0) + b conj(z - z0) on the circle of
/// radius rho (4h when <= 0) around z0, in the given chart.
LocalExpansion local_expansion(const TargetMap& phi, cplx z0, int chart = 0, double rho = 0.0);
LocalExpansion local_expansion(const GridMap& phi, cplx z0, double rho = 0.0);

struct Graft {
  cplx center{0.0, 0.0};
  CVector c, a, b;
  double radius = 0.1;
  double blend_exponent = 0.5;
  int chart = 0;

  /// Outer radius r (1 + r^eps) of the blend annulus.
  double outer_radius() const;
  /// With b = 0 the graft is affine and has no pole.
  bool has_pole() const { return b.size() > 0 && b.cwiseAbs().maxCoeff() > 0.0; }
  /// c + a (z - z0) + b r^2 / (z - z0) in the graft chart; non-finite at z0.
  CVector value(cplx z) const;
  CVector dz(cplx z) const;
  /// 1 inside radius, 0 beyond the outer radius, exp(1 - 1/(1 - s^2)) between.
  double cutoff(cplx z) const;
};

/// graft.value(z); throws PoleEvaluation at the center for plane targets.
CVector graft_map(const Target& t, const Graft& g, cplx z);

struct GraftReport {
  double residual_before_inside = 0.0;
  double residual_after_inside = 0.0;
  double residual_blend = 0.0;
};

/// Blend of the graft (inside) and phi (outside) with the cutoff. Derivative
/// caches are analytic inside the graft disc. Throws BlendOverlap when the
/// blend annulus leaves the domain, and PoleEvaluation when a plane-target
/// node sits on the pole.
TargetMap apply_graft(const Target& t, const TargetMap& phi, const Graft& g,
                      GraftReport* report = nullptr);

// ---------------------------------------------------------------------------
// Center discs, glue, global correction

struct CenterDisc {
  GridMap u;  // on the disc of radius `radius`
  double radius = 0.05;
  NewtonCertificate cert;
  int halvings = 0;
};

/// Solution on |zeta| <= radius with u(0) = p, from the initial guess
/// p + zeta v. Halves the radius up to 6 times on solver failure. An empty
/// direction means e_1; a zero direction gives the constant disc.
CenterDisc center_disc(const CVector& p, FieldPtr field, double radius = 0.05,
                       int resolution = 32, const CVector& direction = CVector());

/// A solved boundary piece: the tube solution in straightened coordinates
/// xi = (-i log(zeta e^{-i c}) ) / S, valid on the parameter arc and for
/// |zeta| >= rho_inner.
struct BoundaryPiece {
  ParameterArc arc;
  TargetKind kind = TargetKind::plane;
  double center_angle = 0.0;  // c
  double scale = 1.0;         // S
  double rho_inner = 0.8;
  GridMap tube_solution;      // chart coordinates in arc.chart
  std::vector<ShrinkRecord> log;
  int m = 0;

  cplx to_tube(cplx zeta) const;
  TargetPoint value(cplx zeta) const;
};

/// Straightens the arc, extends the loop data by its jet and solves on
/// shrinking tubes.
BoundaryPiece solve_piece(const Target& t, const BoundaryLoop& loop, const ParameterArc& arc,
                          double epsilon, int m_start = 8, int arc_samples = 129);

/// Continuous map on the unit-disc grid: the center disc near 0, the pieces
/// on their supports (blended where consecutive pieces overlap),
/// interpolation along target paths elsewhere, and phi(0) = p.
TargetMap glue(const Target& t, const GridPtr& grid, const std::vector<BoundaryPiece>& pieces,
               const CenterDisc& base, const CVector& p);

struct CorrectionReport {
  double distance_on_k = 0.0;
  double residual_before = 0.0;
  double residual_after = 0.0;
  double origin_shift = 0.0;
  NewtonCertificate cert;  // plane only
  std::string method;
};

/// Plane: centered Newton from phi. Sphere: chart-z correction by the
/// centered Cauchy-Green transform of chi * dbar(phi). Throws
/// CorrectionTooLarge when the C^0 distance on K reaches epsilon.
TargetMap global_correct(const Target& t, const TargetMap& phi, const std::vector<ParameterArc>& k,
                         double epsilon, const std::vector<Graft>& grafts = {},
                         CorrectionReport* report = nullptr);

// ---------------------------------------------------------------------------
// Pipeline

struct PoletskyOptions {
  int resolution = 64;
  int boundary_samples = 4096;
  int m_start = 8;
  /// Longer cover arcs are solved as overlapping sub-arcs.
  double max_piece_angle = 1.5707963267948966;
  double center_radius = 0.05;
  double alpha = 0.5;
  int max_grafts = 8;
  double graft_max_radius = 0.1;
  double blend_exponent = 0.5;
};

struct StageRecord {
  std::string stage;
  std::string detail;  // JSON object text
};

struct PoletskyDisc {
  TargetMap u;
  Target target;
  TargetPoint p;
  double base_point_error = 0.0;
  double epsilon = 0.0;
  double exceptional_measure = 0.0;
  double exceptional_measure_2n = 0.0;
  int boundary_samples = 0;
  std::vector<Graft> grafts;
  std::vector<StageRecord> provenance;
  bool success = false;
};

/// Samples dist(u(e^{it}), lambda(e^{it})) at n points; returns
/// (2 pi / n) * #{dist >= epsilon}.
double exceptional_measure(const Target& t, const TargetMap& u, const BoundaryLoop& loop,
                           double epsilon, int n);

/// arc_cover -> per-arc shrink_solve -> grafting -> glue with the center
/// disc -> global correction. Throws PipelineFailed.
PoletskyDisc poletsky_disc(const Target& t, const TargetPoint& p, const OpenSet& u_set,
                           double epsilon, const BoundaryLoop* loop,
                           const PoletskyOptions& opts = {});

/// Minimum over discs of the boundary average of f(u(e^{it})): an upper
/// bound for the disc-functional value at p. Throws BasePointMismatch.
double functional_estimate(const std::function<double(const TargetPoint&)>& f,
                           const TargetPoint& p, const std::vector<PoletskyDisc>& discs,
                           int samples = 4096);

std::string stages_json(const std::vector<StageRecord>& stages);
std::string graft_json(const Graft& g);

}  // namespace holodisc
