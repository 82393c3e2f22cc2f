#pragma once

#include <functional>
#include <string>
#include <vector>

#include "holodisc/dbar.hpp"

namespace holodisc {

/// C^2 boundary data phi on a straight arc [x0, x1] of the real axis.
/// Between samples phi is the quintic Hermite interpolant of the value,
/// first and second derivative samples.
class ArcData {
 public:
  ArcData() = default;
  /// Samples must be strictly increasing in x and lie in (-1, 1).
  ArcData(std::vector<double> x, std::vector<CVector> phi, std::vector<CVector> dphi,
          std::vector<CVector> d2phi);

  static ArcData from_function(double x0, double x1, int samples,
                               const std::function<CVector(double)>& phi,
                               const std::function<CVector(double)>& dphi,
                               const std::function<CVector(double)>& d2phi);
  /// Derivatives by local polynomial differentiation of the value samples.
  static ArcData from_values(std::vector<double> x, std::vector<CVector> phi);
  /// Columns x, re_phi1, im_phi1, ... and optionally re_dphi1, im_dphi1, ...
  /// and re_d2phi1, im_d2phi1, ... (any order, header row required).
  static ArcData from_csv(const std::string& path);

  double x0() const { return x_.front(); }
  double x1() const { return x_.back(); }
  int dimension() const { return static_cast<int>(phi_.front().size()); }
  std::size_t sample_count() const { return x_.size(); }
  const std::vector<double>& xs() const { return x_; }

  /// Value and first two derivatives at x. Beyond the ends the data is
  /// continued by its second-order Taylor polynomial.
  CVector value(double x) const;
  CVector first(double x) const;
  CVector second(double x) const;

  /// Worst relative mismatch between derivative samples and finite
  /// differences of the lower-order samples.
  double consistency_defect() const;

 private:
  void eval(double x, CVector* v, CVector* d1, CVector* d2) const;

  std::vector<double> x_;
  std::vector<CVector> phi_, dphi_, d2phi_;
};

/// Maps a segment [p, q] of the plane onto [x0, x1] on the real axis by a
/// complex affine map z -> a z + b.
struct AffineStraightening {
  cplx a{1.0, 0.0};
  cplx b{0.0, 0.0};
  cplx forward(cplx z) const { return a * z + b; }
  cplx inverse(cplx w) const { return (w - b) / a; }
};
AffineStraightening straighten(cplx p, cplx q, double x0, double x1);

/// Boundary data along the segment from p to q, reparametrized onto [x0, x1].
ArcData straightened_arc(cplx p, cplx q, double x0, double x1, int samples,
                         const std::function<CVector(cplx)>& phi);

/// Omega_m: points within 1/m of the arc, with a grid keeping at least
/// `nodes_across` lattice steps across the width.
struct TubeDomain {
  ArcData arc;
  int m = 8;
  GridPtr grid;
};
TubeDomain make_tube(const ArcData& arc, int m, int nodes_across = 12);

/// u(x, y) = phi + y a1 + (y^2 / 2) a2 with a1 = J(phi) phi' and
/// a2 = dJ(phi)[a1] phi' + J(phi) (J(phi) phi')'. Throws RangeEscape when
/// ||A|| >= 1 along the extension.
GridMap jet_extension(const ArcData& arc, const ComplexMatrixField& field, const GridPtr& tube);

/// Node indices on the arc itself (y = 0, x0 <= x <= x1).
std::vector<std::size_t> arc_nodes(const GridPtr& tube, const ArcData& arc);

struct ShrinkRecord {
  int m = 0;
  int resolution = 0;
  std::size_t nodes = 0;
  /// Sup of F(jet) over the tube, interior nodes and all nodes.
  double residual_initial = 0.0;
  double residual_initial_all = 0.0;
  double final_residual = 0.0;
  double distance = 0.0;
  int iterations = 0;
  bool success = false;
  std::string note;
};

struct ShrinkOptions {
  double alpha = 0.5;
  int max_doublings = 10;
  int nodes_across = 12;
  /// Tubes needing more nodes than this end the loop early (Exhausted).
  std::size_t max_nodes = 40000;
  NewtonOptions newton;
};

struct ShrinkResult {
  GridMap u;
  int m = 0;
  NewtonCertificate cert;
  std::vector<ShrinkRecord> log;
};

/// Solves on Omega_m for m = m_start, 2 m_start, ... until the C^{1,alpha}
/// estimate of u - phi on the arc is below epsilon. Throws Exhausted.
ShrinkResult shrink_solve(const ArcData& arc, FieldPtr field, double epsilon, int m_start,
                          const ShrinkOptions& opts = {});

std::string shrink_log_json(const std::vector<ShrinkRecord>& log);

}  // namespace holodisc
