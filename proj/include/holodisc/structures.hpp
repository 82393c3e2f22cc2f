#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "holodisc/types.hpp"

namespace holodisc {

/// Wirtinger partials of a complex matrix field at one point:
/// dz[j] = dA/dz_j and dzbar[j] = dA/dzbar_j.
struct FieldDerivative {
  std::vector<CMatrix> dz;
  std::vector<CMatrix> dzbar;

  /// d_zA(v) = sum_j dA/dz_j v_j + dA/dzbar_j conj(v_j).
  CMatrix directional(const CVector& v) const;
};

/// The complex matrix A(z) of an almost complex structure on C^n. The
/// structure is J-holomorphicity written as u_zetabar + A(u) conj(u_zeta) = 0.
///
/// Implementations must be pure functions of the point.
class ComplexMatrixField {
 public:
  virtual ~ComplexMatrixField() = default;

  virtual int dimension() const = 0;
  virtual CMatrix eval(const CVector& z) const = 0;

  /// Analytic when the subclass knows it; central differences with step
  /// `kFiniteDifferenceStep` otherwise.
  virtual FieldDerivative derivative(const CVector& z) const;

  /// True when A vanishes identically (the standard structure).
  virtual bool is_standard() const { return false; }
  /// True when A does not depend on the point.
  virtual bool is_constant() const { return false; }

  virtual std::string describe() const = 0;

  static constexpr double kFiniteDifferenceStep = 1e-5;
};

using FieldPtr = std::shared_ptr<const ComplexMatrixField>;

class StandardField final : public ComplexMatrixField {
 public:
  explicit StandardField(int n = 1);
  int dimension() const override { return n_; }
  CMatrix eval(const CVector& z) const override;
  FieldDerivative derivative(const CVector& z) const override;
  bool is_standard() const override { return true; }
  bool is_constant() const override { return true; }
  std::string describe() const override;

 private:
  int n_;
};

class ConstantField final : public ComplexMatrixField {
 public:
  explicit ConstantField(CMatrix a);
  int dimension() const override { return static_cast<int>(a_.rows()); }
  CMatrix eval(const CVector& z) const override;
  FieldDerivative derivative(const CVector& z) const override;
  bool is_standard() const override { return a_.isZero(0.0); }
  bool is_constant() const override { return true; }
  std::string describe() const override;

 private:
  CMatrix a_;
};

/// Entry-wise polynomial in z and conj(z):
///   A_rc(z) = sum coef * prod_j z_j^p_j conj(z_j)^q_j.
/// Derivatives are exact.
class PolynomialField final : public ComplexMatrixField {
 public:
  struct Term {
    int row = 0;
    int col = 0;
    cplx coef{0.0, 0.0};
    std::vector<int> z_powers;
    std::vector<int> zbar_powers;
  };

  PolynomialField(int n, std::vector<Term> terms, std::string label = "polynomial");
  int dimension() const override { return n_; }
  CMatrix eval(const CVector& z) const override;
  FieldDerivative derivative(const CVector& z) const override;
  bool is_constant() const override;
  std::string describe() const override { return label_; }
  const std::vector<Term>& terms() const { return terms_; }

 private:
  int n_;
  std::vector<Term> terms_;
  std::string label_;
};

/// Arbitrary callable; derivatives by central differences.
class FunctionField final : public ComplexMatrixField {
 public:
  FunctionField(int n, std::function<CMatrix(const CVector&)> fn, std::string label);
  int dimension() const override { return n_; }
  CMatrix eval(const CVector& z) const override { return fn_(z); }
  std::string describe() const override { return label_; }

 private:
  int n_;
  std::function<CMatrix(const CVector&)> fn_;
  std::string label_;
};

// ---------------------------------------------------------------------------
// Real structures J on R^{2n}

/// A field of real 2n x 2n matrices J(z) with J^2 = -I, indexed by points of
/// R^{2n} in the interleaved realification.
struct RealStructureField {
  int dimension_n = 1;
  std::function<RMatrix(const RVector&)> eval;
  int smoothness_hint = 1;
};

/// Multiplication by i on R^{2n}.
RMatrix standard_structure(int n);

RVector realify(const CVector& v);
CVector complexify(const RVector& v);

/// Real matrix of the complex-linear map v -> M v.
RMatrix realify_linear(const CMatrix& m);
/// Real matrix of the antilinear map v -> M conj(v).
RMatrix realify_antilinear(const CMatrix& m);

/// A with A v = (J_st + J)^{-1} (J - J_st) conj(v).
///
/// Throws SingularStructure when |det(J + J_st)| < det_threshold and
/// NonComplexLinear when the composed map fails to commute with J_st within
/// 1e-10 (relative to its size).
CMatrix complex_matrix_of(const RMatrix& j, double det_threshold = 1e-12);
CMatrix complex_matrix_of(const RealStructureField& j, const CVector& z,
                          double det_threshold = 1e-12);

/// Inverse of complex_matrix_of: J = J_st (I + B)(I - B)^{-1} with B v = A conj(v).
/// Requires ||A|| < 1.
RMatrix structure_from_complex_matrix(const CMatrix& a);

/// Directional derivative dJ(z)[v] of the structure induced by a field.
RMatrix structure_derivative(const ComplexMatrixField& field, const CVector& z,
                             const CVector& v);

RealStructureField real_structure_of(FieldPtr field);

/// Spectral norm.
double operator_norm(const CMatrix& a);

// ---------------------------------------------------------------------------
// Catalog

struct KnownSolution {
  std::string formula;
  std::string provenance;
  /// u(zeta).
  std::function<CVector(cplx)> value;
  /// (u_zeta, u_zetabar) in closed form.
  std::function<std::pair<CVector, CVector>(cplx)> wirtinger;
};

struct StructureCatalogEntry {
  std::string name;
  FieldPtr field;
  std::vector<KnownSolution> known_solutions;
};

std::vector<StructureCatalogEntry> catalog();

FieldPtr make_standard(int n = 1);
FieldPtr make_constant(cplx a);
/// n = 2, A(z) = [[0, 0], [lambda z_1, 0]].
FieldPtr make_a_lambda(double lambda = 0.3);

StructureCatalogEntry a_lambda_entry(double lambda);
StructureCatalogEntry constant_entry(cplx a);

}  // namespace holodisc
