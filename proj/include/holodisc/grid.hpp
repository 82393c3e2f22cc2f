#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "holodisc/types.hpp"

namespace holodisc {

enum class DomainKind { disc, tube, annulus };

/// A closed planar domain whose vertical sections are symmetric about the
/// real axis: a centered disc, a stadium around a segment of the real axis,
/// or a centered annulus.
struct Domain {
  DomainKind kind = DomainKind::disc;
  double radius = 1.0;              // disc
  double x0 = -0.5, x1 = 0.5;       // tube: segment [x0, x1] on the real axis
  double width = 0.1;               // tube: half-width 1/m
  double r0 = 0.5, r1 = 1.0;        // annulus

  static Domain unit_disc() { return Domain{}; }
  static Domain disc(double radius);
  static Domain tube(double x0, double x1, double width);
  static Domain annulus(double r0, double r1);

  std::string name() const;
  double area() const;
  /// Signed distance to the boundary, positive inside.
  double margin(cplx z) const;
  bool contains(cplx z, double tol = 0.0) const { return margin(z) >= -tol; }
  /// Nearest boundary point.
  cplx project(cplx z) const;
  /// Bounding box [xmin, xmax] x [-ymax, ymax].
  double xmin() const;
  double xmax() const;
  double ymax() const;
};

/// Exact area and first moments of {rectangle} ∩ domain.
struct CellMoments {
  double area = 0.0;
  double mx = 0.0;
  double my = 0.0;
};
CellMoments clipped_moments(const Domain& d, double xa, double xb, double ya, double yb);

/// Exact integral of 1/(z - w) dA(w) over a rectangle, and over its
/// intersection with a domain.
cplx rectangle_cauchy_integral(cplx z, double xa, double xb, double ya, double yb);

/// Near-field integrals over {rectangle} ∩ domain with expansion center c:
/// i0 = ∫ 1/(z - w), i1 = ∫ (w - c)/(z - w), i1bar = ∫ conj(w - c)/(z - w).
struct CellCauchy {
  double area = 0.0;
  cplx i0 = 0.0;
  cplx i1 = 0.0;
  cplx i1bar = 0.0;
};
CellCauchy clipped_cauchy_integrals(const Domain& d, cplx z, cplx c, double xa, double xb,
                                    double ya, double yb);

enum class NodeKind : std::uint8_t { interior, near_boundary, boundary };

struct CauchyNearField;

/// Masked Cartesian lattice on a domain. Lattice points inside the domain are
/// nodes; lattice cells that straddle the boundary from outside contribute a
/// node at the projection of their center. Each node carries the exact area
/// of its clipped cell, so weights sum to the domain area.
class DiscGrid {
 public:
  DiscGrid(Domain domain, int resolution);

  const Domain& domain() const { return domain_; }
  int resolution() const { return resolution_; }
  double spacing() const { return h_; }
  std::size_t size() const { return nodes_.size(); }

  const std::vector<cplx>& nodes() const { return nodes_; }
  const std::vector<NodeKind>& kinds() const { return kinds_; }
  const std::vector<double>& weights() const { return weights_; }
  const std::vector<cplx>& centroids() const { return centroids_; }
  cplx node(std::size_t i) const { return nodes_[i]; }
  NodeKind kind(std::size_t i) const { return kinds_[i]; }

  /// Index of the node at the origin, or -1.
  long origin_index() const { return origin_; }
  /// Node index at lattice position, or -1. Lattice coordinates (i, j) sit
  /// at (lattice_x0 + i h, j h).
  long lattice_node(long i, long j) const;
  bool on_lattice(std::size_t node) const { return lattice_i_[node] != kOffLattice; }
  long lattice_i(std::size_t node) const { return lattice_i_[node]; }
  long lattice_j(std::size_t node) const { return lattice_j_[node]; }

  /// Indices of nodes within `radius` of z, sorted by distance; at least
  /// `min_count` when available.
  std::vector<std::size_t> nearest(cplx z, std::size_t count) const;
  std::vector<std::size_t> within(cplx z, double radius) const;

  /// Interior node indices (full centered stencil available).
  const std::vector<std::size_t>& interior_nodes() const { return interior_; }

  /// Derivative stencils: u_x(i) = sum wx * u(col), u_y(i) = sum wy * u(col).
  const std::vector<std::size_t>& stencil_ptr() const { return st_ptr_; }
  const std::vector<std::size_t>& stencil_col() const { return st_col_; }
  const std::vector<double>& stencil_wx() const { return st_wx_; }
  const std::vector<double>& stencil_wy() const { return st_wy_; }

  /// Near-field Cauchy corrections, built on first use.
  const CauchyNearField& cauchy_near() const;

  std::string describe() const;

  static constexpr long kOffLattice = -(1L << 40);

 private:
  void build_nodes();
  void build_buckets();
  void build_stencils();

  Domain domain_;
  int resolution_;
  double h_;
  double lattice_x0_ = 0.0;
  long imin_ = 0, imax_ = 0, jmin_ = 0, jmax_ = 0;
  std::vector<long> lattice_index_;

  std::vector<cplx> nodes_;
  std::vector<NodeKind> kinds_;
  std::vector<double> weights_;
  std::vector<cplx> centroids_;
  std::vector<long> lattice_i_, lattice_j_;
  std::vector<std::size_t> interior_;
  long origin_ = -1;

  // Spatial buckets of side h over the bounding box.
  long bx0_ = 0, by0_ = 0, bnx_ = 0, bny_ = 0;
  std::vector<std::vector<std::size_t>> buckets_;

  std::vector<std::size_t> st_ptr_, st_col_;
  std::vector<double> st_wx_, st_wy_;

  struct Lazy;
  std::shared_ptr<Lazy> lazy_;
};

using GridPtr = std::shared_ptr<const DiscGrid>;

GridPtr build_grid(const Domain& domain, int resolution);

/// Precomputed per-target corrections for cells near the target: the exact
/// zeroth-order integral minus the centroid rule (coef0), and the exact
/// first-order integrals paired with g_w (coef1) and g_wbar (coef2). Full
/// square cells also get fourth-moment and radial-moment far-field terms.
struct CauchyNearField {
  std::vector<char> full;
  std::vector<std::size_t> ptr;
  std::vector<std::size_t> col;
  std::vector<cplx> coef0, coef1, coef2;
};

/// Analytic Wirtinger derivatives attached to a map (N x n each).
struct DerivativeCache {
  CMatrix dz;
  CMatrix dzbar;
};

/// Values of a map on the nodes of a grid: row i is u(node i) in C^n.
struct GridMap {
  GridPtr grid;
  CMatrix values;
  std::shared_ptr<const DerivativeCache> derivs;

  GridMap() = default;
  GridMap(GridPtr g, int n);
  GridMap(GridPtr g, CMatrix v);

  int dim() const { return static_cast<int>(values.cols()); }
  std::size_t size() const { return static_cast<std::size_t>(values.rows()); }
  CVector at(std::size_t i) const { return values.row(static_cast<Eigen::Index>(i)).transpose(); }

  GridMap operator+(const GridMap& o) const;
  GridMap operator-(const GridMap& o) const;
  GridMap operator*(cplx s) const;
};

GridMap sample_map(GridPtr grid, int n, const std::function<CVector(cplx)>& f);
GridMap constant_map(GridPtr grid, const CVector& c);

/// (u_zeta, u_zetabar). Fourth-order centered stencils at interior nodes,
/// least-squares cubic fits elsewhere; exact for cubic polynomials in x, y.
/// Uses the attached derivative cache when present.
std::pair<GridMap, GridMap> wirtinger(const GridMap& u);

/// Partial derivatives (u_x, u_y) from the stencils, ignoring any cache.
std::pair<CMatrix, CMatrix> partials(const GridMap& u);

struct HolderEstimate {
  double alpha = 0.5;
  int order = 0;
  double c0_norm = 0.0;
  double c1_norm = 0.0;
  double holder_quotient = 0.0;
  double total = 0.0;
  std::size_t pair_count = 0;
};

struct HolderOptions {
  double window = 0.25;
  std::size_t far_pairs = 10000;
  std::uint64_t seed = 0x5eed5eedULL;
  /// Restrict the estimate to these nodes (all nodes when empty).
  std::vector<std::size_t> subset;
};

/// Estimated C^{0,alpha} (order 0) or C^{1,alpha} (order 1) norm. Near pairs
/// are exhaustive within the window; far pairs are a fixed pseudo-random
/// sample, so the seminorm is an underestimate.
HolderEstimate holder_norm(const GridMap& u, double alpha, int order,
                           const HolderOptions& opts = {});
/// Same, for precomputed derivatives.
HolderEstimate holder_norm(const GridMap& u, const GridMap& u_z, const GridMap& u_zbar,
                           double alpha, int order, const HolderOptions& opts = {});

/// Tg(z) = (1/pi) * integral of g(w) / (z - w) over the domain.
GridMap cauchy_green(const GridMap& g);
/// Tg - (Tg)(0); requires the origin to be a node.
GridMap cauchy_green_centered(const GridMap& g);

/// Value at an arbitrary point of the closed domain by a local least-squares
/// cubic fit.
CVector interpolate(const GridMap& u, cplx z);

struct TraceSample {
  double t = 0.0;
  CVector value;
};

/// Values at center + R e^{it}, t = 2 pi k / samples, for disc grids.
std::vector<TraceSample> boundary_trace(const GridMap& u, int samples);

/// CSV with a comment header carrying domain, resolution and alpha.
void write_csv(const GridMap& u, const std::string& path, double alpha);

/// Max over the given nodes (all when empty) of the row norm.
double sup_norm(const GridMap& u, const std::vector<std::size_t>& subset = {});

}  // namespace holodisc
