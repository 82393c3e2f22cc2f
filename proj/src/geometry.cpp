#include <algorithm>
#include <cmath>
#include <sstream>

#include "holodisc/errors.hpp"
#include "holodisc/grid.hpp"

namespace holodisc {

Domain Domain::disc(double radius) {
  if (!(radius > 0.0)) throw InvalidArgument("disc radius must be positive");
  Domain d;
  d.kind = DomainKind::disc;
  d.radius = radius;
  return d;
}

Domain Domain::tube(double x0, double x1, double width) {
  if (!(x1 > x0)) throw InvalidArgument("tube segment must have x1 > x0");
  if (!(width > 0.0)) throw InvalidArgument("tube width must be positive");
  Domain d;
  d.kind = DomainKind::tube;
  d.x0 = x0;
  d.x1 = x1;
  d.width = width;
  return d;
}

Domain Domain::annulus(double r0, double r1) {
  if (!(r0 > 0.0 && r1 > r0)) throw InvalidArgument("annulus needs 0 < r0 < r1");
  Domain d;
  d.kind = DomainKind::annulus;
  d.r0 = r0;
  d.r1 = r1;
  return d;
}

std::string Domain::name() const {
  std::ostringstream os;
  os.precision(10);
  switch (kind) {
    case DomainKind::disc:
      os << "disc(radius=" << radius << ")";
      break;
    case DomainKind::tube:
      os << "tube(x0=" << x0 << ",x1=" << x1 << ",width=" << width << ")";
      break;
    case DomainKind::annulus:
      os << "annulus(r0=" << r0 << ",r1=" << r1 << ")";
      break;
  }
  return os.str();
}

double Domain::area() const {
  switch (kind) {
    case DomainKind::disc:
      return kPi * radius * radius;
    case DomainKind::tube:
      return 2.0 * width * (x1 - x0) + kPi * width * width;
    case DomainKind::annulus:
      return kPi * (r1 * r1 - r0 * r0);
  }
  return 0.0;
}

double Domain::margin(cplx z) const {
  switch (kind) {
    case DomainKind::disc:
      return radius - std::abs(z);
    case DomainKind::tube: {
      const double qx = std::clamp(z.real(), x0, x1);
      return width - std::abs(z - cplx(qx, 0.0));
    }
    case DomainKind::annulus: {
      const double r = std::abs(z);
      return std::min(r - r0, r1 - r);
    }
  }
  return 0.0;
}

cplx Domain::project(cplx z) const {
  switch (kind) {
    case DomainKind::disc: {
      const double r = std::abs(z);
      return r == 0.0 ? cplx(radius, 0.0) : z * (radius / r);
    }
    case DomainKind::tube: {
      const cplx q(std::clamp(z.real(), x0, x1), 0.0);
      const cplx d = z - q;
      const double r = std::abs(d);
      if (r == 0.0) return q + cplx(0.0, width);
      return q + d * (width / r);
    }
    case DomainKind::annulus: {
      const double r = std::abs(z);
      const cplx dir = r == 0.0 ? cplx(1.0, 0.0) : z / r;
      return (r - r0 < r1 - r) ? dir * r0 : dir * r1;
    }
  }
  return z;
}

double Domain::xmin() const {
  switch (kind) {
    case DomainKind::disc:
      return -radius;
    case DomainKind::tube:
      return x0 - width;
    case DomainKind::annulus:
      return -r1;
  }
  return 0.0;
}

double Domain::xmax() const {
  switch (kind) {
    case DomainKind::disc:
      return radius;
    case DomainKind::tube:
      return x1 + width;
    case DomainKind::annulus:
      return r1;
  }
  return 0.0;
}

double Domain::ymax() const {
  switch (kind) {
    case DomainKind::disc:
      return radius;
    case DomainKind::tube:
      return width;
    case DomainKind::annulus:
      return r1;
  }
  return 0.0;
}

namespace {

// One piece of the half-height s(x) of a domain symmetric about y = 0:
// constant, or a circular arc sqrt(R^2 - (x - c)^2).
struct SectionPiece {
  double a, b;
  bool arc;
  double c;      // arc center
  double value;  // constant height, or arc radius
};

double section(const SectionPiece& p, double x) {
  if (!p.arc) return p.value;
  const double t = x - p.c;
  return std::sqrt(std::max(0.0, p.value * p.value - t * t));
}

struct Integrals {
  double i0, i1, is, ixs, is2;
};

Integrals piece_integrals(const SectionPiece& p, double a, double b) {
  Integrals r{};
  r.i0 = b - a;
  r.i1 = 0.5 * (b * b - a * a);
  if (!p.arc) {
    r.is = p.value * r.i0;
    r.ixs = p.value * r.i1;
    r.is2 = p.value * p.value * r.i0;
    return r;
  }
  const double rad = p.value;
  const double r2 = rad * rad;
  auto clampt = [rad](double t) { return std::clamp(t, -rad, rad); };
  const double ta = clampt(a - p.c), tb = clampt(b - p.c);
  auto prim_s = [r2, rad](double t) {
    return 0.5 * (t * std::sqrt(std::max(0.0, r2 - t * t)) + r2 * std::asin(t / rad));
  };
  auto prim_ts = [r2](double t) {
    const double q = std::max(0.0, r2 - t * t);
    return -q * std::sqrt(q) / 3.0;
  };
  auto prim_s2 = [r2](double t) { return r2 * t - t * t * t / 3.0; };
  r.is = prim_s(tb) - prim_s(ta);
  r.ixs = prim_ts(tb) - prim_ts(ta) + p.c * r.is;
  r.is2 = prim_s2(tb) - prim_s2(ta);
  return r;
}

CellMoments symmetric_moments(const std::vector<SectionPiece>& pieces, double xa, double xb,
                              double ya, double yb) {
  CellMoments m;
  const double levels[2] = {std::abs(ya), std::abs(yb)};
  std::vector<double> cuts;
  for (const auto& p : pieces) {
    const double lo = std::max(xa, p.a), hi = std::min(xb, p.b);
    if (!(hi > lo)) continue;
    cuts.clear();
    cuts.push_back(lo);
    cuts.push_back(hi);
    if (p.arc) {
      for (double v : levels) {
        if (v <= 0.0 || v >= p.value) continue;
        const double t = std::sqrt(p.value * p.value - v * v);
        for (double x : {p.c - t, p.c + t}) {
          if (x > lo && x < hi) cuts.push_back(x);
        }
      }
    }
    std::sort(cuts.begin(), cuts.end());
    for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
      const double a = cuts[k], b = cuts[k + 1];
      if (!(b > a)) continue;
      const double s = section(p, 0.5 * (a + b));
      const bool top_s = s < yb;
      const bool bot_s = -s > ya;
      const double top = top_s ? s : yb;
      const double bot = bot_s ? -s : ya;
      if (top <= bot) continue;
      const Integrals in = piece_integrals(p, a, b);
      m.area += (top_s ? in.is : yb * in.i0) + (bot_s ? in.is : -ya * in.i0);
      m.mx += (top_s ? in.ixs : yb * in.i1) + (bot_s ? in.ixs : -ya * in.i1);
      m.my += 0.5 * ((top_s ? in.is2 : yb * yb * in.i0) - (bot_s ? in.is2 : ya * ya * in.i0));
    }
  }
  return m;
}

std::vector<SectionPiece> disc_pieces(double r) { return {{-r, r, true, 0.0, r}}; }

}  // namespace

CellMoments clipped_moments(const Domain& d, double xa, double xb, double ya, double yb) {
  switch (d.kind) {
    case DomainKind::disc:
      return symmetric_moments(disc_pieces(d.radius), xa, xb, ya, yb);
    case DomainKind::tube: {
      const double w = d.width;
      std::vector<SectionPiece> pieces = {{d.x0 - w, d.x0, true, d.x0, w},
                                          {d.x0, d.x1, false, 0.0, w},
                                          {d.x1, d.x1 + w, true, d.x1, w}};
      return symmetric_moments(pieces, xa, xb, ya, yb);
    }
    case DomainKind::annulus: {
      const CellMoments outer = symmetric_moments(disc_pieces(d.r1), xa, xb, ya, yb);
      const CellMoments inner = symmetric_moments(disc_pieces(d.r0), xa, xb, ya, yb);
      return {outer.area - inner.area, outer.mx - inner.mx, outer.my - inner.my};
    }
  }
  return {};
}

}  // namespace holodisc

namespace holodisc {

namespace {

// Contour pieces for the near-field integrals of a cell with expansion
// center c. Along the boundary we integrate
//   F0(w) = conj(w - z) / (z - w)                          dF0/dwbar = 1/(z - w)
//   F1(w) = (conj(w - c)^2 - conj(z - c)^2) / (2 (z - w))  dF1/dwbar = conj(w - c)/(z - w)
// Both are bounded near w = z, so the closed forms below need no
// principal-value treatment.

struct Pair {
  cplx i0 = 0.0;
  cplx i1 = 0.0;
  Pair& operator+=(const Pair& o) {
    i0 += o.i0;
    i1 += o.i1;
    return *this;
  }
};

Pair segment_terms(cplx z, cplx c, cplx a, cplx b) {
  const cplx d = b - a;
  if (d == cplx(0.0)) return {};
  const cplx u0 = a - z, u1 = b - z;
  const cplx r = std::conj(d) / d;
  const cplx e = std::conj(u0) - r * u0;
  const double scale = std::abs(d) + std::abs(u0);
  cplx log_ratio = 0.0;
  const bool off_line = std::abs(e) > 1e-15 * scale;
  if (off_line) log_ratio = std::log(u1 / u0);
  Pair out;
  // F0 = -conj(u)/u = -(r + e/u).
  out.i0 = -std::conj(d) - (off_line ? e * log_ratio : 0.0);
  // F1 = -(conj(u)^2 + kb conj(u)) / (2u), kb = conj(2 (z - c)).
  const cplx kb = std::conj(2.0 * (z - c));
  cplx s = r * std::conj(d) * 0.5 * (u0 + u1) + 2.0 * e * std::conj(d) + kb * std::conj(d);
  if (off_line) s += (e * e + kb * e) * log_ratio;
  out.i1 = -0.5 * s;
  return out;
}

// Arc c0 + R e^{it}, t in [t0, t1] (t1 > t0).
Pair arc_terms(cplx z, cplx c, cplx c0, double rad, double t0, double t1) {
  const cplx i(0.0, 1.0);
  const cplx zc = z - c0;
  const cplx cc = c - c0;
  const double rho = std::abs(zc);
  const cplx v0 = std::polar(rad, t0), v1 = std::polar(rad, t1);
  const double r2 = rad * rad;
  Pair out;
  // Near the center the partial fractions below cancel catastrophically;
  // the center formula is off by O(rho) there.
  if (rho < 1e-7 * rad) {
    out.i0 = rad * (std::exp(-i * t1) - std::exp(-i * t0));
    const cplx ccb = std::conj(cc);
    auto prim = [&](cplx v) { return r2 * r2 / (4.0 * v * v) - ccb * r2 / v; };
    out.i1 = prim(v1) - prim(v0);
    return out;
  }
  // Lz = integral of dv / (zc - v) along the arc.
  cplx lz;
  {
    double darg;
    if (t1 - t0 >= 2.0 * kPi - 1e-12) {
      darg = rho < rad ? 2.0 * kPi : 0.0;
    } else {
      darg = std::arg((v1 - zc) / (v0 - zc));
      if (rho < rad) {
        // arg(v - zc) increases monotonically along the circle.
        if (darg < -1e-9) darg += 2.0 * kPi;
        else if (darg < 0.0) darg = 0.0;
      }
    }
    const double d0 = std::abs(zc - v0), d1 = std::abs(zc - v1);
    const double dlog = (d0 > 0.0 && d1 > 0.0) ? std::log(d1) - std::log(d0) : 0.0;
    lz = -cplx(dlog, darg);
  }
  const cplx j1 = i * (t1 - t0);
  const cplx j2 = -(1.0 / v1 - 1.0 / v0);
  const cplx tol_scale = rad;
  // F0 on the circle: (conj(c0 - z) + R^2/zc)/(zc - v) + (R^2/zc)/v.
  const cplx a = r2 / zc;
  const cplx coef0 = std::conj(c0 - z) + a;
  out.i0 = a * j1;
  if (std::abs(coef0) > 1e-14 * std::abs(tol_scale)) out.i0 += coef0 * lz;
  // F1 on the circle, by partial fractions in v.
  const cplx ccb = std::conj(cc);
  const cplx q = std::conj(zc - cc);
  const cplx w = a - ccb;
  const cplx coef1 = w * w - q * q;
  cplx s = r2 * r2 / zc * j2 + (r2 * r2 / (zc * zc) - 2.0 * ccb * r2 / zc) * j1;
  if (std::abs(coef1) > 1e-14 * r2) s += coef1 * lz;
  out.i1 = 0.5 * s;
  return out;
}

// Angle intervals of [t0, t1] where c + r e^{it} lies in the rectangle.
std::vector<std::pair<double, double>> arc_in_rect(cplx c, double r, double t0, double t1,
                                                   double xa, double xb, double ya, double yb) {
  std::vector<double> cuts = {t0, t1};
  auto add = [&](double t) {
    // Bring t into [t0, t0 + 2 pi).
    while (t < t0) t += 2.0 * kPi;
    while (t >= t0 + 2.0 * kPi) t -= 2.0 * kPi;
    if (t > t0 && t < t1) cuts.push_back(t);
  };
  for (double x : {xa, xb}) {
    const double q = (x - c.real()) / r;
    if (std::abs(q) <= 1.0) {
      const double t = std::acos(q);
      add(t);
      add(-t);
    }
  }
  for (double y : {ya, yb}) {
    const double q = (y - c.imag()) / r;
    if (std::abs(q) <= 1.0) {
      const double t = std::asin(q);
      add(t);
      add(kPi - t);
    }
  }
  std::sort(cuts.begin(), cuts.end());
  std::vector<std::pair<double, double>> out;
  const double tol = 1e-13 * std::max(1.0, r);
  for (std::size_t k = 0; k + 1 < cuts.size(); ++k) {
    const double a = cuts[k], b = cuts[k + 1];
    if (!(b > a)) continue;
    const cplx m = c + std::polar(r, 0.5 * (a + b));
    if (m.real() >= xa - tol && m.real() <= xb + tol && m.imag() >= ya - tol && m.imag() <= yb + tol) {
      if (!out.empty() && out.back().second == a) {
        out.back().second = b;
      } else {
        out.emplace_back(a, b);
      }
    }
  }
  return out;
}

Pair rectangle_contour(cplx z, cplx c, double xa, double xb, double ya, double yb) {
  Pair sum;
  sum += segment_terms(z, c, cplx(xa, ya), cplx(xb, ya));
  sum += segment_terms(z, c, cplx(xb, ya), cplx(xb, yb));
  sum += segment_terms(z, c, cplx(xb, yb), cplx(xa, yb));
  sum += segment_terms(z, c, cplx(xa, yb), cplx(xa, ya));
  return sum;
}

// Contour integrals over the boundary of rect ∩ K for a convex K (disc of
// radius r centered at 0, or the stadium of a tube). The boundary splits
// into rectangle edges inside K and boundary arcs of K inside the rectangle,
// each counterclockwise, so no ordering of pieces is needed.
Pair convex_contour(const Domain& d, bool disc, double r, cplx z, cplx c, double xa, double xb,
                    double ya, double yb) {
  Pair sum;
  auto hspan = [&](double y, double& lo, double& hi) {
    const double rr = disc ? r : d.width;
    if (std::abs(y) > rr) return false;
    const double s = std::sqrt(rr * rr - y * y);
    lo = disc ? -s : d.x0 - s;
    hi = disc ? s : d.x1 + s;
    return true;
  };
  auto vspan = [&](double x) {
    if (disc) return std::sqrt(std::max(0.0, r * r - x * x));
    const double w = d.width;
    if (x < d.x0) return std::sqrt(std::max(0.0, w * w - (x - d.x0) * (x - d.x0)));
    if (x > d.x1) return std::sqrt(std::max(0.0, w * w - (x - d.x1) * (x - d.x1)));
    return w;
  };
  for (int e = 0; e < 2; ++e) {
    const double y = e == 0 ? ya : yb;
    double lo, hi;
    if (!hspan(y, lo, hi)) continue;
    const double a = std::max(xa, lo), b = std::min(xb, hi);
    if (!(b > a)) continue;
    if (e == 0) sum += segment_terms(z, c, cplx(a, y), cplx(b, y));
    else sum += segment_terms(z, c, cplx(b, y), cplx(a, y));
  }
  for (int e = 0; e < 2; ++e) {
    const double x = e == 0 ? xb : xa;
    const double s = vspan(x);
    const double a = std::max(ya, -s), b = std::min(yb, s);
    if (!(b > a)) continue;
    if (e == 0) sum += segment_terms(z, c, cplx(x, a), cplx(x, b));
    else sum += segment_terms(z, c, cplx(x, b), cplx(x, a));
  }
  auto arcs = [&](cplx c0, double rad, double t0, double t1) {
    for (const auto& [a, b] : arc_in_rect(c0, rad, t0, t1, xa, xb, ya, yb)) {
      sum += arc_terms(z, c, c0, rad, a, b);
    }
  };
  if (disc) {
    arcs(0.0, r, -kPi, kPi);
  } else {
    const double w = d.width;
    arcs(cplx(d.x1, 0.0), w, -0.5 * kPi, 0.5 * kPi);
    arcs(cplx(d.x0, 0.0), w, 0.5 * kPi, 1.5 * kPi);
    // Flats; half-open in y so a flat on a rectangle edge is counted once.
    if (ya <= w && w < yb) {
      const double a = std::max(xa, d.x0), b = std::min(xb, d.x1);
      if (b > a) sum += segment_terms(z, c, cplx(b, w), cplx(a, w));
    }
    if (ya < -w && -w <= yb) {
      const double a = std::max(xa, d.x0), b = std::min(xb, d.x1);
      if (b > a) sum += segment_terms(z, c, cplx(a, -w), cplx(b, -w));
    }
  }
  return sum;
}

}  // namespace

cplx rectangle_cauchy_integral(cplx z, double xa, double xb, double ya, double yb) {
  auto g1 = [](double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return 0.0;
    double v = 0.5 * y * std::log(r2);
    if (x != 0.0) v += x * std::atan(y / x);
    return v;
  };
  auto g2 = [](double x, double y) {
    const double r2 = x * x + y * y;
    if (r2 == 0.0) return 0.0;
    double v = 0.5 * x * std::log(r2);
    if (y != 0.0) v += y * std::atan(x / y);
    return v;
  };
  const double x1 = z.real() - xb, x2 = z.real() - xa;
  const double y1 = z.imag() - yb, y2 = z.imag() - ya;
  const double re = g1(x2, y2) - g1(x2, y1) - g1(x1, y2) + g1(x1, y1);
  const double im = g2(x2, y2) - g2(x2, y1) - g2(x1, y2) + g2(x1, y1);
  return {re, -im};
}

CellCauchy clipped_cauchy_integrals(const Domain& d, cplx z, cplx c, double xa, double xb,
                                    double ya, double yb) {
  const CellMoments m = clipped_moments(d, xa, xb, ya, yb);
  const double full = (xb - xa) * (yb - ya);
  if (m.area <= 1e-15 * full) return {};
  Pair p;
  if (m.area >= full * (1.0 - 1e-13)) {
    p = rectangle_contour(z, c, xa, xb, ya, yb);
    p.i0 = cplx(0.0, 2.0) * rectangle_cauchy_integral(z, xa, xb, ya, yb);
  } else {
    switch (d.kind) {
      case DomainKind::disc:
        p = convex_contour(d, true, d.radius, z, c, xa, xb, ya, yb);
        break;
      case DomainKind::tube:
        p = convex_contour(d, false, 0.0, z, c, xa, xb, ya, yb);
        break;
      case DomainKind::annulus: {
        p = convex_contour(d, true, d.r1, z, c, xa, xb, ya, yb);
        const Pair inner = convex_contour(d, true, d.r0, z, c, xa, xb, ya, yb);
        p.i0 -= inner.i0;
        p.i1 -= inner.i1;
        break;
      }
    }
  }
  // Stokes: area integral of dF/dwbar = (1/2i) * contour integral of F dw.
  const cplx two_i(0.0, 2.0);
  CellCauchy out;
  out.area = m.area;
  out.i0 = p.i0 / two_i;
  out.i1bar = p.i1 / two_i;
  out.i1 = -m.area + (z - c) * out.i0;
  return out;
}

}  // namespace holodisc
