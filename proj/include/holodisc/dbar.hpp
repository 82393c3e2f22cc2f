#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "holodisc/grid.hpp"
#include "holodisc/structures.hpp"

namespace holodisc {

/// The equation u_zetabar + A(u) conj(u_zeta) = 0 on a grid, with an initial
/// guess phi.
struct DbarProblem {
  FieldPtr field;
  GridPtr grid;
  GridMap phi;
  double alpha = 0.5;
};

/// F(u) = u_zetabar + A(u) conj(u_zeta) at every node. Throws StructureRange
/// if ||A(u(z))|| >= 1 at some node.
GridMap residual(const DbarProblem& problem, const GridMap& u);

/// Sup of the row norm of a residual-type map over interior nodes.
double interior_sup(const GridMap& g);

/// d_phi F(h) = h_zetabar + A(phi) conj(h_zeta) + d_phi A(h) conj(phi_zeta).
///
/// Coefficients are frozen at construction. `apply` uses the grid stencils,
/// the same discretization as the collocation system of RightInverse.
class Linearization {
 public:
  Linearization(const DbarProblem& problem, const GridMap& phi);

  GridMap apply(const GridMap& h) const;
  const GridMap& base() const { return phi_; }
  const DbarProblem& problem() const { return problem_; }
  bool has_variable_coefficients() const { return !dA_zero_; }

  /// The zeroth-order part d_phi A(h) conj(phi_zeta) at node i.
  CVector zeroth_order(std::size_t i, const CVector& h) const;
  /// A(phi) at node i.
  const CMatrix& a_at(std::size_t i) const { return a_[i]; }

 private:
  DbarProblem problem_;
  GridMap phi_;
  std::vector<CMatrix> a_;
  // d_phi A(h) conj(phi_zeta) = lin * h + anti * conj(h) per node.
  std::vector<CMatrix> lin_, anti_;
  bool a_zero_ = false;
  bool dA_zero_ = false;

  friend class RightInverse;
};

Linearization linearize(const DbarProblem& problem, const GridMap& phi);

struct RightInverseOptions {
  /// Required sup of d_phi F(h) - g over interior nodes, relative to
  /// max(1, sup g).
  double tol = 1e-9;
  int max_fixed_point = 200;
  double contraction_limit = 0.9;
  /// Keep h(0) = 0 (needs a node at the origin).
  bool centered = false;
};

struct RightInverseResult {
  GridMap h;
  /// Sup of d_phi F(h) - g over interior nodes.
  double defect = 0.0;
  int fixed_point_iterations = 0;
  double contraction = 0.0;
  /// "fixed_point", "collocation" or "fixed_point+collocation".
  std::string method;
};

/// Numerical right inverse Q_phi of d_phi F. A Cauchy-Green fixed point
/// gives a smooth approximate inverse; the discrete defect is then removed
/// by a minimum-norm correction of the collocation system restricted to
/// interior nodes. The sparse factorization is built once and reused.
class RightInverse {
 public:
  RightInverse(const DbarProblem& problem, const GridMap& phi, RightInverseOptions opts = {});
  ~RightInverse();
  RightInverse(const RightInverse&) = delete;
  RightInverse& operator=(const RightInverse&) = delete;

  RightInverseResult solve(const GridMap& g) const;
  const Linearization& linearization() const { return lin_; }

  /// Same as `solve`, and folds ||h|| / ||g|| (C^{1,alpha} over
  /// C^{0,alpha}) into `norm_estimate`.
  RightInverseResult solve_tracked(const GridMap& g) const;
  double norm_estimate() const { return norm_estimate_; }

 private:
  GridMap fixed_point(const GridMap& g, int& iters, double& contraction, bool& ok) const;
  GridMap collocation_correct(const GridMap& h, const GridMap& g) const;
  void build_factorization() const;

  Linearization lin_;
  RightInverseOptions opts_;
  struct Factor;
  mutable std::unique_ptr<Factor> factor_;
  mutable double norm_estimate_ = 0.0;
};

RightInverseResult right_inverse(const DbarProblem& problem, const GridMap& phi, const GridMap& g,
                                 const RightInverseOptions& opts = {});

struct LipschitzOptions {
  int trials = 12;
  std::uint64_t seed = 7;
  /// Size of the sampled perturbations phi~ - phi in the C^{1,alpha} estimate.
  double radius = 0.5;
};

/// Sampled lower bound for c in ||d_phi~ F - d_phi F|| <= c ||phi~ - phi|| ||h||.
double estimate_lipschitz(const DbarProblem& problem, const GridMap& phi,
                          const LipschitzOptions& opts = {});

struct NewtonCertificate {
  double c0 = 0.0;
  double lipschitz_c = 0.0;
  double eta = 0.0;
  double delta = 0.0;
  double residual_initial = 0.0;
  bool hypothesis_met = false;
  double posterior_bound = 0.0;
  double achieved_distance = 0.0;
  int iterations = 0;
  double final_residual = 0.0;
  // Supporting measurements.
  double phi_norm = 0.0;
  double q_norm_estimate = 0.0;
  double tol = 0.0;
  double alpha = 0.5;
  std::string mode;
  std::vector<double> residual_history;
};

struct NewtonOptions {
  /// Bound for ||phi|| and ||Q_phi||; measured values are used when <= 0.
  double c0 = 0.0;
  /// Sup residual target; 1e-8 (1 + sup phi) when <= 0.
  double tol = 0.0;
  int max_iter = 50;
  int lipschitz_trials = 12;
  std::uint64_t seed = 7;
  /// Keep u(0) = phi(0).
  bool centered = false;
  /// Recompute the right inverse at every iterate (not covered by the
  /// certificate).
  bool full_newton = false;
};

struct NewtonResult {
  GridMap u;
  NewtonCertificate cert;
};

/// Modified Newton iteration x_{k+1} = x_k - Q_phi F(x_k) with the right
/// inverse frozen at phi. Throws Diverged or MaxIter.
NewtonResult newton_solve(const DbarProblem& problem, const NewtonOptions& opts = {});

/// Flat JSON object with the certificate fields.
std::string certificate_json(const NewtonCertificate& cert);

/// Residuals of the two equivalent forms of the equation at one node:
/// |u_y - J(u) u_x| and |u_zetabar + A(u) conj(u_zeta)|.
struct EquivalenceResidual {
  double real_form = 0.0;
  double complex_form = 0.0;
};
EquivalenceResidual equivalence_check(const ComplexMatrixField& field, const GridMap& u,
                                      std::size_t node);

}  // namespace holodisc
