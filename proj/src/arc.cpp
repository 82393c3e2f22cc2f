#include "holodisc/arc.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "holodisc/errors.hpp"

namespace holodisc {

namespace {

// Quintic Hermite basis on [0, 1], coefficients of t^0 .. t^5, in the order
// p0, p0', p0'', p1, p1', p1''.
constexpr double kHermite[6][6] = {
    {1, 0, 0, -10, 15, -6},   {0, 1, 0, -6, 8, -3},    {0, 0, 0.5, -1.5, 1.5, -0.5},
    {0, 0, 0, 10, -15, 6},    {0, 0, 0, -4, 7, -3},    {0, 0, 0, 0.5, -1, 0.5},
};

/// d-th derivative of a quintic with coefficients c at t.
double poly_deriv(const double* c, double t, int d) {
  double s = 0.0;
  for (int p = 5; p >= d; --p) {
    double f = c[p];
    for (int q = 0; q < d; ++q) f *= (p - q);
    s = s * t + f;
  }
  return s;
}

/// Weights of the k-th derivative at x0 of the Lagrange polynomial through
/// the points xs (Fornberg's recursion).
std::vector<double> fd_weights(const std::vector<double>& xs, double x0, int k) {
  const int n = static_cast<int>(xs.size());
  std::vector<std::vector<double>> c(n, std::vector<double>(k + 1, 0.0));
  double c1 = 1.0, c4 = xs[0] - x0;
  c[0][0] = 1.0;
  for (int i = 1; i < n; ++i) {
    const int mn = std::min(i, k);
    double c2 = 1.0;
    const double c5 = c4;
    c4 = xs[i] - x0;
    for (int j = 0; j < i; ++j) {
      const double c3 = xs[i] - xs[j];
      c2 *= c3;
      if (j == i - 1) {
        for (int s = mn; s >= 1; --s) c[i][s] = c1 * (s * c[i - 1][s - 1] - c5 * c[i - 1][s]) / c2;
        c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
      }
      for (int s = mn; s >= 1; --s) c[j][s] = (c4 * c[j][s] - s * c[j][s - 1]) / c3;
      c[j][0] = c4 * c[j][0] / c3;
    }
    c1 = c2;
  }
  std::vector<double> w(n);
  for (int i = 0; i < n; ++i) w[i] = c[i][k];
  return w;
}

/// k-th derivative at sample i from the (up to) 7 nearest samples.
CVector sample_derivative(const std::vector<double>& x, const std::vector<CVector>& v,
                          std::size_t i, int k) {
  const std::size_t n = x.size();
  const std::size_t width = std::min<std::size_t>(7, n);
  std::size_t lo = i >= width / 2 ? i - width / 2 : 0;
  lo = std::min(lo, n - width);
  std::vector<double> xs(x.begin() + static_cast<long>(lo), x.begin() + static_cast<long>(lo + width));
  const auto w = fd_weights(xs, x[i], k);
  CVector d = CVector::Zero(v.front().size());
  for (std::size_t q = 0; q < width; ++q) d += w[q] * v[lo + q];
  return d;
}

}  // namespace

ArcData::ArcData(std::vector<double> x, std::vector<CVector> phi, std::vector<CVector> dphi,
                 std::vector<CVector> d2phi)
    : x_(std::move(x)), phi_(std::move(phi)), dphi_(std::move(dphi)), d2phi_(std::move(d2phi)) {
  if (x_.size() < 2) throw InvalidArgument("arc needs at least two samples");
  if (phi_.size() != x_.size() || dphi_.size() != x_.size() || d2phi_.size() != x_.size()) {
    throw InvalidArgument("arc sample arrays differ in length");
  }
  for (std::size_t i = 1; i < x_.size(); ++i) {
    if (!(x_[i] > x_[i - 1])) throw InvalidArgument("arc samples must increase strictly");
  }
  if (!(x_.front() > -1.0 && x_.back() < 1.0)) throw InvalidArgument("arc must lie in (-1, 1)");
  const auto n = phi_.front().size();
  for (std::size_t i = 0; i < x_.size(); ++i) {
    if (phi_[i].size() != n || dphi_[i].size() != n || d2phi_[i].size() != n) {
      throw InvalidArgument("arc samples differ in dimension");
    }
  }
}

ArcData ArcData::from_function(double x0, double x1, int samples,
                               const std::function<CVector(double)>& phi,
                               const std::function<CVector(double)>& dphi,
                               const std::function<CVector(double)>& d2phi) {
  if (samples < 2) throw InvalidArgument("arc needs at least two samples");
  std::vector<double> x(static_cast<std::size_t>(samples));
  std::vector<CVector> v, d1, d2;
  for (int k = 0; k < samples; ++k) {
    x[k] = x0 + (x1 - x0) * k / (samples - 1);
    v.push_back(phi(x[k]));
    d1.push_back(dphi(x[k]));
    d2.push_back(d2phi(x[k]));
  }
  return ArcData(std::move(x), std::move(v), std::move(d1), std::move(d2));
}

ArcData ArcData::from_values(std::vector<double> x, std::vector<CVector> phi) {
  if (x.size() < 3) throw InvalidArgument("need at least three samples to differentiate");
  std::vector<CVector> d1, d2;
  for (std::size_t i = 0; i < x.size(); ++i) {
    d1.push_back(sample_derivative(x, phi, i, 1));
    d2.push_back(sample_derivative(x, phi, i, 2));
  }
  return ArcData(std::move(x), std::move(phi), std::move(d1), std::move(d2));
}

ArcData ArcData::from_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw InvalidArgument("cannot read " + path);
  std::string line;
  std::vector<std::string> header;
  while (std::getline(f, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      cell.erase(0, cell.find_first_not_of(" \t"));
      cell.erase(cell.find_last_not_of(" \t\r") + 1);
      header.push_back(cell);
    }
    break;
  }
  std::map<std::string, std::size_t> col;
  for (std::size_t c = 0; c < header.size(); ++c) col[header[c]] = c;
  if (!col.count("x")) throw InvalidArgument(path + ": missing column x");
  int n = 0;
  while (col.count("re_phi" + std::to_string(n + 1))) ++n;
  if (n == 0) throw InvalidArgument(path + ": missing column re_phi1");
  auto need = [&](const std::string& name) {
    auto it = col.find(name);
    if (it == col.end()) throw InvalidArgument(path + ": missing column " + name);
    return it->second;
  };
  const bool has_d1 = col.count("re_dphi1") > 0;
  const bool has_d2 = col.count("re_d2phi1") > 0;
  std::vector<double> x;
  std::vector<CVector> v, d1, d2;
  int lineno = 1;
  while (std::getline(f, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::vector<double> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        cells.push_back(std::stod(cell));
      } catch (...) {
        throw InvalidArgument(path + ":" + std::to_string(lineno) + ": bad number '" + cell + "'");
      }
    }
    if (cells.size() != header.size()) {
      throw InvalidArgument(path + ":" + std::to_string(lineno) + ": expected " +
                            std::to_string(header.size()) + " columns");
    }
    x.push_back(cells[need("x")]);
    CVector a(n), b(n), c(n);
    for (int k = 1; k <= n; ++k) {
      const std::string s = std::to_string(k);
      a[k - 1] = cplx(cells[need("re_phi" + s)], cells[need("im_phi" + s)]);
      if (has_d1) b[k - 1] = cplx(cells[need("re_dphi" + s)], cells[need("im_dphi" + s)]);
      if (has_d2) c[k - 1] = cplx(cells[need("re_d2phi" + s)], cells[need("im_d2phi" + s)]);
    }
    v.push_back(a);
    d1.push_back(b);
    d2.push_back(c);
  }
  if (x.size() < 3) throw InvalidArgument(path + ": need at least three samples");
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!has_d1) d1[i] = sample_derivative(x, v, i, 1);
    if (!has_d2) d2[i] = has_d1 ? sample_derivative(x, d1, i, 1) : sample_derivative(x, v, i, 2);
  }
  return ArcData(std::move(x), std::move(v), std::move(d1), std::move(d2));
}

void ArcData::eval(double x, CVector* v, CVector* d1, CVector* d2) const {
  if (x < x_.front() || x > x_.back()) {
    const bool left = x < x_.front();
    const std::size_t e = left ? 0 : x_.size() - 1;
    const double s = x - x_[e];
    if (v) *v = phi_[e] + s * dphi_[e] + 0.5 * s * s * d2phi_[e];
    if (d1) *d1 = dphi_[e] + s * d2phi_[e];
    if (d2) *d2 = d2phi_[e];
    return;
  }
  auto it = std::upper_bound(x_.begin(), x_.end(), x);
  std::size_t k = static_cast<std::size_t>(it - x_.begin());
  k = std::clamp<std::size_t>(k, 1, x_.size() - 1) - 1;
  const double dx = x_[k + 1] - x_[k];
  const double t = (x - x_[k]) / dx;
  const CVector* data[6] = {&phi_[k], &dphi_[k], &d2phi_[k], &phi_[k + 1], &dphi_[k + 1],
                            &d2phi_[k + 1]};
  const double scale[6] = {1.0, dx, dx * dx, 1.0, dx, dx * dx};
  for (int d = 0; d < 3; ++d) {
    CVector* out = d == 0 ? v : (d == 1 ? d1 : d2);
    if (!out) continue;
    *out = CVector::Zero(dimension());
    for (int b = 0; b < 6; ++b) *out += scale[b] * poly_deriv(kHermite[b], t, d) * *data[b];
    *out /= std::pow(dx, d);
  }
}

CVector ArcData::value(double x) const {
  CVector v;
  eval(x, &v, nullptr, nullptr);
  return v;
}

CVector ArcData::first(double x) const {
  CVector v;
  eval(x, nullptr, &v, nullptr);
  return v;
}

CVector ArcData::second(double x) const {
  CVector v;
  eval(x, nullptr, nullptr, &v);
  return v;
}

double ArcData::consistency_defect() const {
  if (x_.size() < 3) return 0.0;
  double s1 = 1.0, s2 = 1.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    s1 = std::max(s1, dphi_[i].norm());
    s2 = std::max(s2, d2phi_[i].norm());
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < x_.size(); ++i) {
    worst = std::max(worst, (sample_derivative(x_, phi_, i, 1) - dphi_[i]).norm() / s1);
    worst = std::max(worst, (sample_derivative(x_, dphi_, i, 1) - d2phi_[i]).norm() / s2);
  }
  return worst;
}

// ---------------------------------------------------------------------------

AffineStraightening straighten(cplx p, cplx q, double x0, double x1) {
  if (std::abs(q - p) == 0.0) throw InvalidArgument("degenerate segment");
  AffineStraightening s;
  s.a = cplx(x1 - x0, 0.0) / (q - p);
  s.b = x0 - s.a * p;
  return s;
}

ArcData straightened_arc(cplx p, cplx q, double x0, double x1, int samples,
                         const std::function<CVector(cplx)>& phi) {
  const AffineStraightening s = straighten(p, q, x0, x1);
  std::vector<double> x(static_cast<std::size_t>(samples));
  std::vector<CVector> v;
  for (int k = 0; k < samples; ++k) {
    x[k] = x0 + (x1 - x0) * k / (samples - 1);
    v.push_back(phi(s.inverse(x[k])));
  }
  return ArcData::from_values(std::move(x), std::move(v));
}

TubeDomain make_tube(const ArcData& arc, int m, int nodes_across) {
  if (m < 1) throw InvalidArgument("m must be positive");
  const double w = 1.0 / m;
  if (std::max(std::abs(arc.x0()), std::abs(arc.x1())) + w >= 1.0) {
    throw InvalidArgument("tube around the arc leaves the unit disc");
  }
  TubeDomain t;
  t.arc = arc;
  t.m = m;
  t.grid = build_grid(Domain::tube(arc.x0(), arc.x1(), w), std::max(8, nodes_across * m));
  return t;
}

GridMap jet_extension(const ArcData& arc, const ComplexMatrixField& field, const GridPtr& tube) {
  const int n = arc.dimension();
  if (field.dimension() != n) throw InvalidArgument("field dimension does not match the arc");
  GridMap u(tube, n);
  for (std::size_t i = 0; i < tube->size(); ++i) {
    const double x = tube->node(i).real();
    const double y = tube->node(i).imag();
    CVector v, d1, d2;
    v = arc.value(x);
    d1 = arc.first(x);
    d2 = arc.second(x);
    const CMatrix a = field.eval(v);
    if (operator_norm(a) >= 1.0) {
      throw RangeEscape("||A(phi)|| >= 1 at x = " + std::to_string(x));
    }
    CVector out;
    if (field.is_standard()) {
      const cplx im(0.0, 1.0);
      out = v + y * im * d1 - 0.5 * y * y * d2;
    } else {
      const RMatrix j = structure_from_complex_matrix(a);
      const RVector rd1 = realify(d1);
      const RVector a1 = j * rd1;
      const RVector a1x =
          structure_derivative(field, v, d1) * rd1 + j * realify(d2);
      const RVector a2 = structure_derivative(field, v, complexify(a1)) * rd1 + j * a1x;
      out = complexify(realify(v) + y * a1 + 0.5 * y * y * a2);
    }
    if (operator_norm(field.eval(out)) >= 1.0) {
      throw RangeEscape("extension leaves the working region at node " + std::to_string(i));
    }
    u.values.row(static_cast<Eigen::Index>(i)) = out.transpose();
  }
  return u;
}

std::vector<std::size_t> arc_nodes(const GridPtr& tube, const ArcData& arc) {
  std::vector<std::size_t> out;
  const double tol = 1e-12;
  for (std::size_t i = 0; i < tube->size(); ++i) {
    const cplx z = tube->node(i);
    if (tube->on_lattice(i) && tube->lattice_j(i) == 0 && z.real() >= arc.x0() - tol &&
        z.real() <= arc.x1() + tol) {
      out.push_back(i);
    }
  }
  return out;
}

ShrinkResult shrink_solve(const ArcData& arc, FieldPtr field, double epsilon, int m_start,
                          const ShrinkOptions& opts) {
  if (!(epsilon > 0.0)) throw InvalidArgument("epsilon must be positive");
  if (m_start < 1) throw InvalidArgument("m_start must be positive");
  ShrinkResult out;
  for (int k = 0; k <= opts.max_doublings; ++k) {
    const int m = m_start << k;
    ShrinkRecord rec;
    rec.m = m;
    // About 6 m lattice steps per unit length and 2 nodes_across rows.
    const double expected = 6.0 * m * (arc.x1() - arc.x0() + 2.0 / m) * (opts.nodes_across + 1);
    if (expected > static_cast<double>(opts.max_nodes)) {
      rec.note = "node budget exceeded";
      out.log.push_back(rec);
      break;
    }
    TubeDomain tube;
    try {
      tube = make_tube(arc, m, opts.nodes_across);
    } catch (const Error& e) {
      rec.note = e.what();
      out.log.push_back(rec);
      break;
    }
    rec.resolution = tube.grid->resolution();
    rec.nodes = tube.grid->size();
    try {
      const GridMap jet = jet_extension(arc, *field, tube.grid);
      DbarProblem problem{field, tube.grid, jet, opts.alpha};
      const GridMap f0 = residual(problem, jet);
      rec.residual_initial = interior_sup(f0);
      rec.residual_initial_all = sup_norm(f0);
      NewtonResult res = newton_solve(problem, opts.newton);
      rec.final_residual = res.cert.final_residual;
      rec.iterations = res.cert.iterations;
      HolderOptions h;
      h.subset = arc_nodes(tube.grid, arc);
      rec.distance = holder_norm(res.u - jet, opts.alpha, 1, h).total;
      rec.success = rec.distance < epsilon;
      out.log.push_back(rec);
      if (rec.success) {
        out.u = std::move(res.u);
        out.m = m;
        out.cert = res.cert;
        return out;
      }
    } catch (const Error& e) {
      rec.note = e.what();
      out.log.push_back(rec);
    }
  }
  throw Exhausted("no m up to " + std::to_string(m_start << opts.max_doublings) +
                  " reached epsilon " + std::to_string(epsilon) + "; log " +
                  shrink_log_json(out.log));
}

std::string shrink_log_json(const std::vector<ShrinkRecord>& log) {
  nlohmann::ordered_json a = nlohmann::ordered_json::array();
  for (const auto& r : log) {
    nlohmann::ordered_json j;
    j["m"] = r.m;
    j["resolution"] = r.resolution;
    j["nodes"] = r.nodes;
    j["residual_initial"] = r.residual_initial;
    j["residual_initial_all"] = r.residual_initial_all;
    j["final_residual"] = r.final_residual;
    j["distance"] = r.distance;
    j["iterations"] = r.iterations;
    j["success"] = r.success;
    if (!r.note.empty()) j["note"] = r.note;
    a.push_back(j);
  }
  return a.dump();
}

}  // namespace holodisc
