#include "holodisc/dbar.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include <Eigen/Sparse>
#include <Eigen/SparseCholesky>
#include <json.hpp>

#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"

namespace holodisc {

namespace {

constexpr double kRangeLimit = 1.0;

void check_grid(const DbarProblem& p, const GridMap& u) {
  if (u.grid != p.grid) throw InvalidArgument("map lives on a different grid");
  if (u.dim() != p.field->dimension()) throw InvalidArgument("map dimension does not match field");
}

}  // namespace

GridMap residual(const DbarProblem& problem, const GridMap& u) {
  check_grid(problem, u);
  auto [uz, uzb] = wirtinger(u);
  GridMap out = uzb;
  if (problem.field->is_standard()) return out;
  const std::size_t n = u.size();
  bool escaped = false;
  std::size_t bad = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    const CMatrix a = problem.field->eval(u.at(i));
    if (operator_norm(a) >= kRangeLimit) {
      escaped = true;
      bad = i;
      break;
    }
    out.values.row(ii) += (a * uz.values.row(ii).conjugate().transpose()).transpose();
  }
  if (escaped) {
    throw StructureRange("||A(u)|| >= 1 at node " + std::to_string(bad));
  }
  return out;
}

double interior_sup(const GridMap& g) { return sup_norm(g, g.grid->interior_nodes()); }

// ---------------------------------------------------------------------------
// Linearization

Linearization::Linearization(const DbarProblem& problem, const GridMap& phi)
    : problem_(problem), phi_(phi) {
  check_grid(problem, phi);
  const std::size_t n = phi.size();
  const int dim = phi.dim();
  a_.resize(n);
  lin_.resize(n);
  anti_.resize(n);
  const ComplexMatrixField& f = *problem.field;
  a_zero_ = f.is_standard();
  dA_zero_ = f.is_constant();
  GridMap phz = wirtinger(phi).first;
  for (std::size_t i = 0; i < n; ++i) {
    const CVector z = phi.at(i);
    a_[i] = f.eval(z);
    if (operator_norm(a_[i]) >= kRangeLimit) {
      throw StructureRange("||A(phi)|| >= 1 at node " + std::to_string(i));
    }
    lin_[i] = CMatrix::Zero(dim, dim);
    anti_[i] = CMatrix::Zero(dim, dim);
    if (dA_zero_) continue;
    const FieldDerivative d = f.derivative(z);
    const CVector cphz = phz.at(i).conjugate();
    for (int k = 0; k < dim; ++k) {
      lin_[i].col(k) = d.dz[k] * cphz;
      anti_[i].col(k) = d.dzbar[k] * cphz;
    }
  }
}

CVector Linearization::zeroth_order(std::size_t i, const CVector& h) const {
  return lin_[i] * h + anti_[i] * h.conjugate();
}

GridMap Linearization::apply(const GridMap& h) const {
  if (h.grid != phi_.grid || h.dim() != phi_.dim()) throw InvalidArgument("incompatible map");
  // Stencil derivatives only: a derivative cache on h would not match the
  // collocation system.
  GridMap plain(h.grid, h.values);
  auto [hz, hzb] = wirtinger(plain);
  GridMap out = hzb;
  if (a_zero_ && dA_zero_) return out;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const auto ii = static_cast<Eigen::Index>(i);
    CVector r = a_[i] * hz.values.row(ii).conjugate().transpose();
    if (!dA_zero_) r += zeroth_order(i, h.at(i));
    out.values.row(ii) += r.transpose();
  }
  return out;
}

Linearization linearize(const DbarProblem& problem, const GridMap& phi) {
  return Linearization(problem, phi);
}

// ---------------------------------------------------------------------------
// Right inverse

struct RightInverse::Factor {
  using SpMat = Eigen::SparseMatrix<double>;
  SpMat l;  // interior rows x all unknowns, real interleaved
  Eigen::SimplicialLDLT<SpMat> ldlt;
  std::vector<std::size_t> rows;  // interior node per row block
  bool ok = false;
};

RightInverse::RightInverse(const DbarProblem& problem, const GridMap& phi, RightInverseOptions opts)
    : lin_(problem, phi), opts_(opts) {
  if (opts_.centered && problem.grid->origin_index() < 0) {
    throw InvalidArgument("centered right inverse needs a node at the origin");
  }
}

RightInverse::~RightInverse() = default;

void RightInverse::build_factorization() const {
  if (factor_) return;
  factor_ = std::make_unique<Factor>();
  Factor& fac = *factor_;
  const DiscGrid& g = *lin_.phi_.grid;
  const int dim = lin_.phi_.dim();
  const auto& ptr = g.stencil_ptr();
  const auto& col = g.stencil_col();
  const auto& wx = g.stencil_wx();
  const auto& wy = g.stencil_wy();
  fac.rows = g.interior_nodes();
  const long origin = opts_.centered ? g.origin_index() : -1;

  std::vector<Eigen::Triplet<double>> trip;
  // out = alpha h + beta conj(h) as a real 2x2 block.
  auto add = [&](Eigen::Index row, std::size_t node, int k, cplx alpha, cplx beta) {
    if (static_cast<long>(node) == origin) return;
    const auto c = static_cast<Eigen::Index>(2 * (dim * node + static_cast<std::size_t>(k)));
    trip.emplace_back(row, c, alpha.real() + beta.real());
    trip.emplace_back(row, c + 1, -alpha.imag() + beta.imag());
    trip.emplace_back(row + 1, c, alpha.imag() + beta.imag());
    trip.emplace_back(row + 1, c + 1, alpha.real() - beta.real());
  };
  for (std::size_t p = 0; p < fac.rows.size(); ++p) {
    const std::size_t i = fac.rows[p];
    for (int r = 0; r < dim; ++r) {
      const auto row = static_cast<Eigen::Index>(2 * (dim * p + static_cast<std::size_t>(r)));
      for (std::size_t q = ptr[i]; q < ptr[i + 1]; ++q) {
        const cplx d(0.5 * wx[q], 0.5 * wy[q]);
        add(row, col[q], r, d, 0.0);
        if (!lin_.a_zero_) {
          for (int k = 0; k < dim; ++k) {
            const cplx a = lin_.a_[i](r, k);
            if (a != 0.0) add(row, col[q], k, 0.0, a * d);
          }
        }
      }
      if (!lin_.dA_zero_) {
        for (int k = 0; k < dim; ++k) {
          add(row, i, k, lin_.lin_[i](r, k), lin_.anti_[i](r, k));
        }
      }
    }
  }
  const auto nrows = static_cast<Eigen::Index>(2 * dim * fac.rows.size());
  const auto ncols = static_cast<Eigen::Index>(2 * dim * g.size());
  fac.l.resize(nrows, ncols);
  fac.l.setFromTriplets(trip.begin(), trip.end());
  fac.l.makeCompressed();
  Factor::SpMat llt = fac.l * fac.l.transpose();
  fac.ldlt.compute(llt);
  fac.ok = fac.ldlt.info() == Eigen::Success;
}

GridMap RightInverse::collocation_correct(const GridMap& h, const GridMap& g) const {
  build_factorization();
  if (!factor_->ok) throw SolveFailed("collocation system could not be factored");
  const Factor& fac = *factor_;
  const int dim = h.dim();
  GridMap out = h;
  const double scale = std::max(1.0, sup_norm(g));
  for (int pass = 0; pass < 4; ++pass) {
    const GridMap lh = lin_.apply(out);
    Eigen::VectorXd r(fac.l.rows());
    double worst = 0.0;
    for (std::size_t p = 0; p < fac.rows.size(); ++p) {
      const auto i = static_cast<Eigen::Index>(fac.rows[p]);
      for (int k = 0; k < dim; ++k) {
        const cplx d = g.values(i, k) - lh.values(i, k);
        worst = std::max(worst, std::abs(d));
        const auto row = static_cast<Eigen::Index>(2 * (dim * p + static_cast<std::size_t>(k)));
        r[row] = d.real();
        r[row + 1] = d.imag();
      }
    }
    if (worst <= 0.1 * opts_.tol * scale) break;
    const Eigen::VectorXd y = fac.ldlt.solve(r);
    if (fac.ldlt.info() != Eigen::Success) throw SolveFailed("collocation back-substitution failed");
    const Eigen::VectorXd dh = fac.l.transpose() * y;
    for (std::size_t i = 0; i < out.size(); ++i) {
      for (int k = 0; k < dim; ++k) {
        const auto c = static_cast<Eigen::Index>(2 * (dim * i + static_cast<std::size_t>(k)));
        out.values(static_cast<Eigen::Index>(i), k) += cplx(dh[c], dh[c + 1]);
      }
    }
  }
  return out;
}

GridMap RightInverse::fixed_point(const GridMap& g, int& iters, double& contraction, bool& ok) const {
  auto transform = [&](const GridMap& f) {
    return opts_.centered ? cauchy_green_centered(f) : cauchy_green(f);
  };
  iters = 1;
  contraction = 0.0;
  ok = true;
  GridMap h = transform(g);
  if (lin_.a_zero_ && lin_.dA_zero_) return h;
  const std::size_t n = g.size();
  double prev_step = -1.0;
  const double scale = std::max(1e-300, sup_norm(h));
  for (int it = 1; it < opts_.max_fixed_point; ++it) {
    auto hz = wirtinger(GridMap(h.grid, h.values)).first;
    GridMap rhs = g;
    for (std::size_t i = 0; i < n; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      CVector t = lin_.a_[i] * hz.values.row(ii).conjugate().transpose();
      if (!lin_.dA_zero_) t += lin_.zeroth_order(i, h.at(i));
      rhs.values.row(ii) -= t.transpose();
    }
    GridMap next = transform(rhs);
    const double step = sup_norm(next - h);
    h = std::move(next);
    iters = it + 1;
    if (prev_step > 0.0) contraction = step / prev_step;
    if (step <= 1e-11 * scale) return h;
    if (it >= 3 && contraction > opts_.contraction_limit) {
      ok = false;
      return h;
    }
    if (!std::isfinite(step)) {
      ok = false;
      return h;
    }
    prev_step = step;
  }
  return h;
}

RightInverseResult RightInverse::solve(const GridMap& g) const {
  if (g.grid != lin_.phi_.grid || g.dim() != lin_.phi_.dim()) {
    throw InvalidArgument("right-hand side does not match the linearization");
  }
  RightInverseResult res;
  const double scale = std::max(1.0, sup_norm(g));
  if (sup_norm(g) == 0.0) {
    res.h = GridMap(g.grid, g.dim());
    res.method = "fixed_point";
    return res;
  }
  bool ok = false;
  GridMap h = fixed_point(g, res.fixed_point_iterations, res.contraction, ok);
  res.method = ok ? "fixed_point" : "collocation";
  if (!ok) h = GridMap(g.grid, g.dim());
  double defect = interior_sup(lin_.apply(h) - g);
  if (defect > opts_.tol * scale) {
    try {
      h = collocation_correct(h, g);
    } catch (const SolveFailed& e) {
      if (!ok) throw NotContracting(std::string("fixed point stalled and ") + e.what());
      throw;
    }
    if (ok) res.method = "fixed_point+collocation";
    defect = interior_sup(lin_.apply(h) - g);
  }
  if (!(defect <= opts_.tol * scale)) {
    throw SolveFailed("right inverse defect " + std::to_string(defect) + " above tolerance");
  }
  res.h = std::move(h);
  res.defect = defect;
  return res;
}

RightInverseResult RightInverse::solve_tracked(const GridMap& g) const {
  RightInverseResult res = solve(g);
  const double alpha = lin_.problem_.alpha;
  const double gn = holder_norm(g, alpha, 0).total;
  if (gn > 0.0) {
    const double hn = holder_norm(res.h, alpha, 1).total;
    norm_estimate_ = std::max(norm_estimate_, hn / gn);
  }
  return res;
}

RightInverseResult right_inverse(const DbarProblem& problem, const GridMap& phi, const GridMap& g,
                                 const RightInverseOptions& opts) {
  RightInverse q(problem, phi, opts);
  return q.solve(g);
}

// ---------------------------------------------------------------------------
// Lipschitz estimate

namespace {

/// sum over monomials zeta^a conj(zeta)^b (a + b <= 2) of c_ab v_ab.
GridMap polynomial_map(const GridPtr& grid, const std::vector<CVector>& coefs) {
  static const int kPowers[6][2] = {{0, 0}, {1, 0}, {0, 1}, {2, 0}, {1, 1}, {0, 2}};
  const int dim = static_cast<int>(coefs.front().size());
  GridMap u(grid, dim);
  auto derivs = std::make_shared<DerivativeCache>();
  derivs->dz = CMatrix::Zero(static_cast<Eigen::Index>(grid->size()), dim);
  derivs->dzbar = derivs->dz;
  for (std::size_t i = 0; i < grid->size(); ++i) {
    const cplx z = grid->node(i);
    const auto ii = static_cast<Eigen::Index>(i);
    for (std::size_t m = 0; m < coefs.size(); ++m) {
      const int a = kPowers[m][0], b = kPowers[m][1];
      const cplx zb = std::conj(z);
      const cplx v = std::pow(z, a) * std::pow(zb, b);
      const cplx vz = a > 0 ? double(a) * std::pow(z, a - 1) * std::pow(zb, b) : cplx(0.0);
      const cplx vzb = b > 0 ? double(b) * std::pow(z, a) * std::pow(zb, b - 1) : cplx(0.0);
      u.values.row(ii) += v * coefs[m].transpose();
      derivs->dz.row(ii) += vz * coefs[m].transpose();
      derivs->dzbar.row(ii) += vzb * coefs[m].transpose();
    }
  }
  u.derivs = derivs;
  return u;
}

}  // namespace

double estimate_lipschitz(const DbarProblem& problem, const GridMap& phi,
                          const LipschitzOptions& opts) {
  if (opts.trials < 1) throw InvalidArgument("trials must be positive");
  const ComplexMatrixField& f = *problem.field;
  if (f.is_constant()) return 0.0;
  const int dim = f.dimension();
  const Linearization base(problem, phi);
  std::mt19937_64 rng(opts.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.25, 1.0);
  auto random_coefs = [&] {
    std::vector<CVector> c(6, CVector::Zero(dim));
    for (auto& v : c) {
      for (int k = 0; k < dim; ++k) v[k] = cplx(normal(rng), normal(rng));
    }
    return c;
  };
  // Deterministic probes along single monomials come first so the maximum
  // does not hinge on the seed.
  std::vector<std::pair<std::vector<CVector>, std::vector<CVector>>> probes;
  for (int k = 0; k < dim; ++k) {
    for (int m : {0, 1, 2}) {
      std::vector<CVector> p(6, CVector::Zero(dim)), h(6, CVector::Zero(dim));
      p[static_cast<std::size_t>(m)][k] = 1.0;
      for (int kk = 0; kk < dim; ++kk) h[static_cast<std::size_t>(m == 0 ? 1 : 0)][kk] = 1.0;
      probes.emplace_back(p, h);
    }
  }
  for (int t = 0; t < opts.trials; ++t) probes.emplace_back(random_coefs(), random_coefs());

  const double alpha = problem.alpha;
  double best = 0.0;
  for (auto& [pc, hc] : probes) {
    GridMap p = polynomial_map(problem.grid, pc);
    const double pn = holder_norm(p, alpha, 1).total;
    if (pn == 0.0) continue;
    const double s = opts.radius * unit(rng) / pn;
    for (auto& v : pc) v *= s;
    p = polynomial_map(problem.grid, pc);
    GridMap h = polynomial_map(problem.grid, hc);
    const double hn = holder_norm(h, alpha, 1).total;
    GridMap shifted(problem.grid, CMatrix(phi.values + p.values));
    if (phi.derivs) {
      auto d = std::make_shared<DerivativeCache>();
      d->dz = phi.derivs->dz + p.derivs->dz;
      d->dzbar = phi.derivs->dzbar + p.derivs->dzbar;
      shifted.derivs = d;
    }
    try {
      const Linearization moved(problem, shifted);
      const GridMap diff = moved.apply(h) - base.apply(h);
      const double dn = holder_norm(diff, alpha, 0).total;
      const double denom = holder_norm(p, alpha, 1).total * hn;
      if (denom > 0.0) best = std::max(best, dn / denom);
    } catch (const StructureRange&) {
      // The sampled neighbour left the working region; skip it.
    }
  }
  return best;
}

// ---------------------------------------------------------------------------
// Newton

NewtonResult newton_solve(const DbarProblem& problem, const NewtonOptions& opts) {
  const GridMap& phi = problem.phi;
  check_grid(problem, phi);
  if (opts.max_iter < 0) throw InvalidArgument("max_iter must be nonnegative");
  NewtonCertificate cert;
  cert.alpha = problem.alpha;
  cert.mode = opts.full_newton ? "full" : "frozen";
  cert.tol = opts.tol > 0.0 ? opts.tol : 1e-8 * (1.0 + sup_norm(phi));
  const auto& interior = problem.grid->interior_nodes();
  HolderOptions hopt;
  hopt.subset = interior;

  const GridMap f0 = residual(problem, phi);
  cert.residual_initial = holder_norm(f0, problem.alpha, 0, hopt).total;
  cert.phi_norm = holder_norm(phi, problem.alpha, 1).total;

  RightInverseOptions ropt;
  ropt.centered = opts.centered;
  auto q = std::make_unique<RightInverse>(problem, phi, ropt);

  // Probe Q with a constant right-hand side so the norm estimate exists
  // even when phi already solves the equation.
  q->solve_tracked(constant_map(problem.grid, CVector::Ones(phi.dim())));

  GridMap x = phi;
  GridMap fx = f0;
  double res = interior_sup(fx);
  cert.residual_history.push_back(res);
  int it = 0;
  bool first = true;
  while (res > cert.tol) {
    if (it >= opts.max_iter) {
      throw MaxIter("residual " + std::to_string(res) + " after " + std::to_string(it) +
                    " iterations");
    }
    if (opts.full_newton && it > 0) q = std::make_unique<RightInverse>(problem, x, ropt);
    const RightInverseResult step = first ? q->solve_tracked(fx) : q->solve(fx);
    first = false;
    x = x - step.h;
    fx = residual(problem, x);
    res = interior_sup(fx);
    ++it;
    cert.residual_history.push_back(res);
    if (!std::isfinite(res)) throw Diverged("residual is not finite");
    const std::size_t k = cert.residual_history.size();
    if (k > 5 && res > 10.0 * cert.residual_history[k - 6]) {
      throw Diverged("residual grew from " + std::to_string(cert.residual_history[k - 6]) +
                     " to " + std::to_string(res) + " over 5 iterations");
    }
  }

  cert.q_norm_estimate = q->norm_estimate();
  cert.c0 = opts.c0 > 0.0 ? opts.c0 : std::max(cert.phi_norm, cert.q_norm_estimate);
  LipschitzOptions lopt;
  lopt.trials = opts.lipschitz_trials;
  lopt.seed = opts.seed;
  cert.lipschitz_c = estimate_lipschitz(problem, phi, lopt);
  cert.eta = cert.lipschitz_c > 0.0 ? std::min(1.0, 1.0 / (2.0 * cert.lipschitz_c * cert.c0)) : 1.0;
  cert.delta = cert.eta / (4.0 * cert.c0);
  cert.hypothesis_met = cert.residual_initial < cert.delta;
  cert.posterior_bound = 2.0 * cert.c0 * cert.residual_initial;
  cert.achieved_distance = holder_norm(x - phi, problem.alpha, 1).total;
  cert.iterations = it;
  cert.final_residual = res;
  return {x, cert};
}

std::string certificate_json(const NewtonCertificate& c) {
  nlohmann::ordered_json j;
  j["c0"] = c.c0;
  j["lipschitz_c"] = c.lipschitz_c;
  j["eta"] = c.eta;
  j["delta"] = c.delta;
  j["residual_initial"] = c.residual_initial;
  j["hypothesis_met"] = c.hypothesis_met;
  j["posterior_bound"] = c.posterior_bound;
  j["achieved_distance"] = c.achieved_distance;
  j["iterations"] = c.iterations;
  j["final_residual"] = c.final_residual;
  j["phi_norm"] = c.phi_norm;
  j["q_norm_estimate"] = c.q_norm_estimate;
  j["tol"] = c.tol;
  j["alpha"] = c.alpha;
  j["mode"] = c.mode;
  return j.dump();
}

// ---------------------------------------------------------------------------
// Equivalence of the two forms

EquivalenceResidual equivalence_check(const ComplexMatrixField& field, const GridMap& u,
                                      std::size_t node) {
  if (node >= u.size()) throw InvalidArgument("node index out of range");
  auto [uz, uzb] = wirtinger(u);
  const CVector z = uz.at(node);
  const CVector zb = uzb.at(node);
  const cplx i(0.0, 1.0);
  const CVector ux = z + zb;
  const CVector uy = i * (z - zb);
  const CMatrix a = field.eval(u.at(node));
  const RMatrix j = structure_from_complex_matrix(a);
  EquivalenceResidual r;
  r.real_form = (realify(uy) - j * realify(ux)).norm();
  r.complex_form = (zb + a * z.conjugate()).norm();
  return r;
}

}  // namespace holodisc
