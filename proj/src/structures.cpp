#include "holodisc/structures.hpp"

#include <cmath>
#include <sstream>

#include <Eigen/SVD>

#include "holodisc/errors.hpp"

namespace holodisc {

CMatrix FieldDerivative::directional(const CVector& v) const {
  const Eigen::Index n = v.size();
  CMatrix out = CMatrix::Zero(dz.empty() ? n : dz.front().rows(), dz.empty() ? n : dz.front().cols());
  for (Eigen::Index j = 0; j < n; ++j) {
    out += dz[j] * v[j] + dzbar[j] * std::conj(v[j]);
  }
  return out;
}

FieldDerivative ComplexMatrixField::derivative(const CVector& z) const {
  const int n = dimension();
  const double step = kFiniteDifferenceStep;
  FieldDerivative d;
  d.dz.resize(n);
  d.dzbar.resize(n);
  for (int j = 0; j < n; ++j) {
    CVector zp = z, zm = z;
    zp[j] += step;
    zm[j] -= step;
    CMatrix ax = (eval(zp) - eval(zm)) / (2.0 * step);
    zp = z;
    zm = z;
    zp[j] += cplx(0.0, step);
    zm[j] -= cplx(0.0, step);
    CMatrix ay = (eval(zp) - eval(zm)) / (2.0 * step);
    const cplx i(0.0, 1.0);
    d.dz[j] = 0.5 * (ax - i * ay);
    d.dzbar[j] = 0.5 * (ax + i * ay);
  }
  return d;
}

namespace {

FieldDerivative zero_derivative(int n) {
  FieldDerivative d;
  d.dz.assign(n, CMatrix::Zero(n, n));
  d.dzbar.assign(n, CMatrix::Zero(n, n));
  return d;
}

std::string format_cplx(cplx c) {
  std::ostringstream os;
  os.precision(6);
  os << c.real();
  if (c.imag() != 0.0) os << (c.imag() < 0 ? "-" : "+") << std::abs(c.imag()) << "i";
  return os.str();
}

cplx ipow(cplx base, int p) {
  cplx r(1.0, 0.0);
  for (int k = 0; k < p; ++k) r *= base;
  return r;
}

}  // namespace

StandardField::StandardField(int n) : n_(n) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
}

CMatrix StandardField::eval(const CVector&) const { return CMatrix::Zero(n_, n_); }

FieldDerivative StandardField::derivative(const CVector&) const { return zero_derivative(n_); }

std::string StandardField::describe() const { return "standard(n=" + std::to_string(n_) + ")"; }

ConstantField::ConstantField(CMatrix a) : a_(std::move(a)) {
  if (a_.rows() != a_.cols() || a_.rows() < 1) throw InvalidArgument("constant field must be square");
}

CMatrix ConstantField::eval(const CVector&) const { return a_; }

FieldDerivative ConstantField::derivative(const CVector&) const {
  return zero_derivative(static_cast<int>(a_.rows()));
}

std::string ConstantField::describe() const {
  if (a_.rows() == 1) return "constant(" + format_cplx(a_(0, 0)) + ")";
  return "constant(n=" + std::to_string(a_.rows()) + ")";
}

PolynomialField::PolynomialField(int n, std::vector<Term> terms, std::string label)
    : n_(n), terms_(std::move(terms)), label_(std::move(label)) {
  if (n < 1) throw InvalidArgument("dimension must be positive");
  for (auto& t : terms_) {
    if (t.row < 0 || t.row >= n || t.col < 0 || t.col >= n) {
      throw InvalidArgument("polynomial term index out of range");
    }
    t.z_powers.resize(n, 0);
    t.zbar_powers.resize(n, 0);
    for (int j = 0; j < n; ++j) {
      if (t.z_powers[j] < 0 || t.zbar_powers[j] < 0) {
        throw InvalidArgument("polynomial powers must be non-negative");
      }
    }
  }
}

CMatrix PolynomialField::eval(const CVector& z) const {
  CMatrix a = CMatrix::Zero(n_, n_);
  for (const auto& t : terms_) {
    cplx m = t.coef;
    for (int j = 0; j < n_; ++j) {
      m *= ipow(z[j], t.z_powers[j]) * ipow(std::conj(z[j]), t.zbar_powers[j]);
    }
    a(t.row, t.col) += m;
  }
  return a;
}

FieldDerivative PolynomialField::derivative(const CVector& z) const {
  FieldDerivative d = zero_derivative(n_);
  for (const auto& t : terms_) {
    for (int k = 0; k < n_; ++k) {
      // d/dz_k and d/dzbar_k of the monomial; z and zbar are independent.
      for (int which = 0; which < 2; ++which) {
        const int p = which == 0 ? t.z_powers[k] : t.zbar_powers[k];
        if (p == 0) continue;
        cplx m = t.coef * static_cast<double>(p);
        for (int j = 0; j < n_; ++j) {
          int pz = t.z_powers[j];
          int pq = t.zbar_powers[j];
          if (j == k) (which == 0 ? pz : pq) -= 1;
          m *= ipow(z[j], pz) * ipow(std::conj(z[j]), pq);
        }
        (which == 0 ? d.dz[k] : d.dzbar[k])(t.row, t.col) += m;
      }
    }
  }
  return d;
}

bool PolynomialField::is_constant() const {
  for (const auto& t : terms_) {
    for (int j = 0; j < n_; ++j) {
      if (t.z_powers[j] != 0 || t.zbar_powers[j] != 0) return false;
    }
  }
  return true;
}

FunctionField::FunctionField(int n, std::function<CMatrix(const CVector&)> fn, std::string label)
    : n_(n), fn_(std::move(fn)), label_(std::move(label)) {}

// ---------------------------------------------------------------------------

RMatrix standard_structure(int n) {
  RMatrix j = RMatrix::Zero(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) {
    j(2 * k, 2 * k + 1) = -1.0;
    j(2 * k + 1, 2 * k) = 1.0;
  }
  return j;
}

RVector realify(const CVector& v) {
  RVector r(2 * v.size());
  for (Eigen::Index k = 0; k < v.size(); ++k) {
    r[2 * k] = v[k].real();
    r[2 * k + 1] = v[k].imag();
  }
  return r;
}

CVector complexify(const RVector& v) {
  CVector c(v.size() / 2);
  for (Eigen::Index k = 0; k < c.size(); ++k) c[k] = cplx(v[2 * k], v[2 * k + 1]);
  return c;
}

RMatrix realify_linear(const CMatrix& m) {
  RMatrix r(2 * m.rows(), 2 * m.cols());
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const double a = m(j, k).real(), b = m(j, k).imag();
      r(2 * j, 2 * k) = a;
      r(2 * j, 2 * k + 1) = -b;
      r(2 * j + 1, 2 * k) = b;
      r(2 * j + 1, 2 * k + 1) = a;
    }
  }
  return r;
}

RMatrix realify_antilinear(const CMatrix& m) {
  RMatrix r(2 * m.rows(), 2 * m.cols());
  for (Eigen::Index j = 0; j < m.rows(); ++j) {
    for (Eigen::Index k = 0; k < m.cols(); ++k) {
      const double a = m(j, k).real(), b = m(j, k).imag();
      r(2 * j, 2 * k) = a;
      r(2 * j, 2 * k + 1) = b;
      r(2 * j + 1, 2 * k) = b;
      r(2 * j + 1, 2 * k + 1) = -a;
    }
  }
  return r;
}

namespace {

RMatrix conjugation(int n) {
  RMatrix c = RMatrix::Identity(2 * n, 2 * n);
  for (int k = 0; k < n; ++k) c(2 * k + 1, 2 * k + 1) = -1.0;
  return c;
}

}  // namespace

CMatrix complex_matrix_of(const RMatrix& j, double det_threshold) {
  if (j.rows() != j.cols() || j.rows() % 2 != 0) {
    throw InvalidArgument("structure matrix must be square of even size");
  }
  const int n = static_cast<int>(j.rows() / 2);
  const RMatrix jst = standard_structure(n);
  const RMatrix sum = j + jst;
  const double det = sum.determinant();
  if (!(std::abs(det) >= det_threshold)) {
    throw SingularStructure("|det(J + J_st)| = " + std::to_string(std::abs(det)));
  }
  const RMatrix b = sum.partialPivLu().solve(j - jst);
  const RMatrix a_real = b * conjugation(n);

  const RMatrix comm = a_real * jst - jst * a_real;
  const double scale = std::max(1.0, a_real.norm());
  if (comm.norm() > 1e-10 * scale) {
    throw NonComplexLinear("commutator with J_st has norm " + std::to_string(comm.norm()));
  }
  CMatrix a(n, n);
  for (int r = 0; r < n; ++r) {
    for (int c = 0; c < n; ++c) a(r, c) = cplx(a_real(2 * r, 2 * c), a_real(2 * r + 1, 2 * c));
  }
  return a;
}

CMatrix complex_matrix_of(const RealStructureField& j, const CVector& z, double det_threshold) {
  return complex_matrix_of(j.eval(realify(z)), det_threshold);
}

RMatrix structure_from_complex_matrix(const CMatrix& a) {
  const int n = static_cast<int>(a.rows());
  if (operator_norm(a) >= 1.0) throw StructureRange("||A|| >= 1");
  const RMatrix b = realify_antilinear(a);
  const RMatrix id = RMatrix::Identity(2 * n, 2 * n);
  return (id + b).partialPivLu().solve((id - b) * standard_structure(n));
}

RMatrix structure_derivative(const ComplexMatrixField& field, const CVector& z, const CVector& v) {
  const int n = field.dimension();
  const CMatrix a = field.eval(z);
  const CMatrix da = field.derivative(z).directional(v);
  const RMatrix b = realify_antilinear(a);
  const RMatrix db = realify_antilinear(da);
  const RMatrix id = RMatrix::Identity(2 * n, 2 * n);
  // J = (2 (I + B)^{-1} - I) J_st, so dJ = -2 (I + B)^{-1} dB (I + B)^{-1} J_st.
  const auto lu = (id + b).partialPivLu();
  return -2.0 * lu.solve(db) * lu.solve(standard_structure(n));
}

RealStructureField real_structure_of(FieldPtr field) {
  RealStructureField j;
  j.dimension_n = field->dimension();
  j.eval = [field](const RVector& x) {
    return structure_from_complex_matrix(field->eval(complexify(x)));
  };
  j.smoothness_hint = 2;
  return j;
}

double operator_norm(const CMatrix& a) {
  if (a.size() == 0) return 0.0;
  if (a.rows() == 1 && a.cols() == 1) return std::abs(a(0, 0));
  Eigen::JacobiSVD<CMatrix> svd(a);
  return svd.singularValues()(0);
}

// ---------------------------------------------------------------------------

FieldPtr make_standard(int n) { return std::make_shared<StandardField>(n); }

FieldPtr make_constant(cplx a) {
  if (std::abs(a) >= 1.0) throw StructureRange("|a| must be < 1");
  CMatrix m(1, 1);
  m(0, 0) = a;
  return std::make_shared<ConstantField>(m);
}

FieldPtr make_a_lambda(double lambda) {
  PolynomialField::Term t;
  t.row = 1;
  t.col = 0;
  t.coef = lambda;
  t.z_powers = {1, 0};
  t.zbar_powers = {0, 0};
  std::ostringstream label;
  label << "A_lambda(" << lambda << ")";
  return std::make_shared<PolynomialField>(2, std::vector<PolynomialField::Term>{t}, label.str());
}

namespace {

CVector vec1(cplx a) {
  CVector v(1);
  v[0] = a;
  return v;
}

CVector vec2(cplx a, cplx b) {
  CVector v(2);
  v[0] = a;
  v[1] = b;
  return v;
}

}  // namespace

StructureCatalogEntry constant_entry(cplx a) {
  StructureCatalogEntry e;
  e.name = "constant";
  e.field = make_constant(a);
  KnownSolution s1;
  s1.formula = "zeta - a*conj(zeta)";
  s1.provenance = "linear solution: beta + a*conj(alpha) = 0 with alpha = 1";
  s1.value = [a](cplx z) { return vec1(z - a * std::conj(z)); };
  s1.wirtinger = [a](cplx) { return std::make_pair(vec1(1.0), vec1(-a)); };
  KnownSolution s2;
  s2.formula = "i*zeta + i*a*conj(zeta)";
  s2.provenance = "linear solution: beta + a*conj(alpha) = 0 with alpha = i";
  const cplx i(0.0, 1.0);
  s2.value = [a, i](cplx z) { return vec1(i * z + i * a * std::conj(z)); };
  s2.wirtinger = [a, i](cplx) { return std::make_pair(vec1(i), vec1(i * a)); };
  e.known_solutions = {s1, s2};
  return e;
}

StructureCatalogEntry a_lambda_entry(double lambda) {
  StructureCatalogEntry e;
  e.name = "A_lambda";
  e.field = make_a_lambda(lambda);
  KnownSolution s;
  s.formula = "(zeta, -lambda*|zeta|^2)";
  s.provenance = "second component: -lambda*zeta + lambda*zeta*conj(1) = 0";
  s.value = [lambda](cplx z) { return vec2(z, -lambda * std::norm(z)); };
  s.wirtinger = [lambda](cplx z) {
    return std::make_pair(vec2(1.0, -lambda * std::conj(z)), vec2(0.0, -lambda * z));
  };
  e.known_solutions = {s};
  return e;
}

std::vector<StructureCatalogEntry> catalog() {
  std::vector<StructureCatalogEntry> out;

  StructureCatalogEntry standard;
  standard.name = "standard";
  standard.field = make_standard(1);
  KnownSolution id;
  id.formula = "zeta";
  id.provenance = "holomorphic";
  id.value = [](cplx z) { return vec1(z); };
  id.wirtinger = [](cplx) { return std::make_pair(vec1(1.0), vec1(0.0)); };
  standard.known_solutions = {id};
  out.push_back(standard);

  StructureCatalogEntry standard2;
  standard2.name = "standard2";
  standard2.field = make_standard(2);
  KnownSolution id2;
  id2.formula = "(zeta, zeta^2)";
  id2.provenance = "holomorphic";
  id2.value = [](cplx z) { return vec2(z, z * z); };
  id2.wirtinger = [](cplx z) { return std::make_pair(vec2(1.0, 2.0 * z), vec2(0.0, 0.0)); };
  standard2.known_solutions = {id2};
  out.push_back(standard2);

  out.push_back(constant_entry(0.5));
  out.push_back(a_lambda_entry(0.3));
  return out;
}

}  // namespace holodisc
