#include "holodisc/grid.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <mutex>
#include <numeric>
#include <random>
#include <sstream>

#include <Eigen/QR>

#include "holodisc/errors.hpp"
#include "holodisc/parallel.hpp"

namespace holodisc {

struct DiscGrid::Lazy {
  std::once_flag near_once;
  CauchyNearField near;
  // Lattice cell centers owned by each node (merged nodes own several).
  std::vector<std::size_t> cell_ptr;
  std::vector<cplx> cell_center;
};

namespace {

// Monomials x^p y^q of total degree <= deg, in a fixed order starting with
// 1, x, y.
std::vector<std::pair<int, int>> monomials(int deg) {
  std::vector<std::pair<int, int>> out;
  for (int d = 0; d <= deg; ++d) {
    for (int q = 0; q <= d; ++q) out.emplace_back(d - q, q);
  }
  return out;
}

double ipow(double x, int p) {
  double r = 1.0;
  for (int k = 0; k < p; ++k) r *= x;
  return r;
}

// Least-squares polynomial fit centered at `center` in units of `scale`.
// Returns the rows of the pseudo-inverse for the requested coefficients
// (0 = value, 1 = d/dX, 2 = d/dY), falling back to lower degree when the
// point cloud does not determine a cubic.
RMatrix local_fit(const std::vector<cplx>& pts, cplx center, double scale) {
  for (int deg = 3; deg >= 1; --deg) {
    const auto mons = monomials(deg);
    const int m = static_cast<int>(mons.size());
    if (static_cast<int>(pts.size()) < m) continue;
    RMatrix v(pts.size(), m);
    for (std::size_t r = 0; r < pts.size(); ++r) {
      const double x = (pts[r].real() - center.real()) / scale;
      const double y = (pts[r].imag() - center.imag()) / scale;
      for (int c = 0; c < m; ++c) v(r, c) = ipow(x, mons[c].first) * ipow(y, mons[c].second);
    }
    Eigen::ColPivHouseholderQR<RMatrix> qr(v);
    qr.setThreshold(1e-10);
    if (qr.rank() < m) continue;
    // Rows 0..2 of pinv(V) = first rows of solve(V, I).
    RMatrix pinv = qr.solve(RMatrix::Identity(pts.size(), pts.size()));
    return pinv.topRows(3);
  }
  throw DegenerateDomain("cannot fit a local polynomial: too few nodes");
}

constexpr std::size_t kFitNodes = 20;

// Moments of the unit square about its center: integral of w^4 and |w|^2.
constexpr double kSquareM4 = -1.0 / 60.0;
constexpr double kSquareR2 = 1.0 / 6.0;

}  // namespace

DiscGrid::DiscGrid(Domain domain, int resolution)
    : domain_(domain), resolution_(resolution), lazy_(std::make_shared<Lazy>()) {
  if (resolution < 8) throw InvalidArgument("resolution must be >= 8");
  switch (domain_.kind) {
    case DomainKind::disc:
      h_ = 2.0 * domain_.radius / resolution;
      lattice_x0_ = 0.0;
      break;
    case DomainKind::annulus:
      h_ = 2.0 * domain_.r1 / resolution;
      lattice_x0_ = 0.0;
      break;
    case DomainKind::tube: {
      const double len = domain_.x1 - domain_.x0;
      const double segments = std::ceil(len / (2.0 / resolution) - 1e-9);
      h_ = len / segments;
      lattice_x0_ = domain_.x0;
      if (domain_.width < 2.0 * h_) {
        std::ostringstream os;
        os << "tube width " << domain_.width << " < 2h = " << 2.0 * h_
           << "; raise the resolution";
        throw DegenerateDomain(os.str());
      }
      break;
    }
  }
  build_nodes();
  build_buckets();
  build_stencils();
}

long DiscGrid::lattice_node(long i, long j) const {
  if (i < imin_ || i > imax_ || j < jmin_ || j > jmax_) return -1;
  return lattice_index_[(j - jmin_) * (imax_ - imin_ + 1) + (i - imin_)];
}

void DiscGrid::build_nodes() {
  const double h = h_;
  imin_ = static_cast<long>(std::floor((domain_.xmin() - lattice_x0_) / h)) - 1;
  imax_ = static_cast<long>(std::ceil((domain_.xmax() - lattice_x0_) / h)) + 1;
  jmax_ = static_cast<long>(std::ceil(domain_.ymax() / h)) + 1;
  jmin_ = -jmax_;
  const long nx = imax_ - imin_ + 1;
  lattice_index_.assign(static_cast<std::size_t>(nx * (jmax_ - jmin_ + 1)), -1);

  struct Accum {
    cplx pos;
    double area, mx, my;
    long li, lj;
    std::vector<cplx> cells;
  };
  std::vector<Accum> lattice, projected;
  const double tol = 1e-12 * h;

  for (long j = jmin_; j <= jmax_; ++j) {
    for (long i = imin_; i <= imax_; ++i) {
      const double x = lattice_x0_ + i * h, y = j * h;
      const CellMoments m =
          clipped_moments(domain_, x - 0.5 * h, x + 0.5 * h, y - 0.5 * h, y + 0.5 * h);
      if (m.area <= 1e-12 * h * h) continue;
      const cplx z(x, y);
      if (domain_.margin(z) >= -tol) {
        lattice.push_back({z, m.area, m.mx, m.my, i, j, {z}});
      } else {
        projected.push_back({domain_.project(z), m.area, m.mx, m.my, kOffLattice, kOffLattice, {z}});
      }
    }
  }

  // Merge projected nodes into anything within 0.05h.
  std::vector<Accum> nodes = lattice;
  for (std::size_t k = 0; k < lattice.size(); ++k) {
    lattice_index_[(lattice[k].lj - jmin_) * nx + (lattice[k].li - imin_)] = static_cast<long>(k);
  }
  std::map<std::pair<long, long>, std::vector<std::size_t>> extra;
  const double merge = 0.05 * h;
  for (auto& p : projected) {
    const long bi = static_cast<long>(std::floor((p.pos.real() - lattice_x0_) / h));
    const long bj = static_cast<long>(std::floor(p.pos.imag() / h));
    const long ri = std::lround((p.pos.real() - lattice_x0_) / h);
    const long rj = std::lround(p.pos.imag() / h);
    long target = -1;
    for (long di = -1; di <= 1 && target < 0; ++di) {
      for (long dj = -1; dj <= 1 && target < 0; ++dj) {
        const long idx = lattice_node(ri + di, rj + dj);
        if (idx >= 0 && std::abs(nodes[idx].pos - p.pos) <= merge) {
          target = idx;
          break;
        }
        auto it = extra.find({bi + di, bj + dj});
        if (it == extra.end()) continue;
        for (std::size_t e : it->second) {
          if (std::abs(nodes[e].pos - p.pos) <= merge) {
            target = static_cast<long>(e);
            break;
          }
        }
      }
    }
    if (target >= 0) {
      auto& t = nodes[target];
      t.area += p.area;
      t.mx += p.mx;
      t.my += p.my;
      t.cells.push_back(p.cells.front());
    } else {
      extra[{bi, bj}].push_back(nodes.size());
      nodes.push_back(p);
    }
  }

  const std::size_t n = nodes.size();
  nodes_.resize(n);
  weights_.resize(n);
  centroids_.resize(n);
  kinds_.resize(n);
  lattice_i_.resize(n);
  lattice_j_.resize(n);
  lazy_->cell_ptr.assign(1, 0);
  for (std::size_t k = 0; k < n; ++k) {
    const auto& a = nodes[k];
    nodes_[k] = a.pos;
    weights_[k] = a.area;
    centroids_[k] = cplx(a.mx / a.area, a.my / a.area);
    lattice_i_[k] = a.li;
    lattice_j_[k] = a.lj;
    for (const cplx& c : a.cells) lazy_->cell_center.push_back(c);
    lazy_->cell_ptr.push_back(lazy_->cell_center.size());
    if (a.pos == cplx(0.0, 0.0)) origin_ = static_cast<long>(k);
  }

  for (std::size_t k = 0; k < n; ++k) {
    if (lattice_i_[k] == kOffLattice || domain_.margin(nodes_[k]) <= 1e-9 * h) {
      kinds_[k] = NodeKind::boundary;
      continue;
    }
    bool full = true;
    const long i = lattice_i_[k], j = lattice_j_[k];
    for (long d : {-2L, -1L, 1L, 2L}) {
      if (lattice_node(i + d, j) < 0 || lattice_node(i, j + d) < 0) full = false;
    }
    kinds_[k] = full ? NodeKind::interior : NodeKind::near_boundary;
    if (full) interior_.push_back(k);
  }
}

void DiscGrid::build_buckets() {
  const double h = h_;
  bx0_ = static_cast<long>(std::floor(domain_.xmin() / h)) - 1;
  by0_ = static_cast<long>(std::floor(-domain_.ymax() / h)) - 1;
  bnx_ = static_cast<long>(std::ceil(domain_.xmax() / h)) + 2 - bx0_;
  bny_ = static_cast<long>(std::ceil(domain_.ymax() / h)) + 2 - by0_;
  buckets_.assign(static_cast<std::size_t>(bnx_ * bny_), {});
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    long bi = static_cast<long>(std::floor(nodes_[k].real() / h)) - bx0_;
    long bj = static_cast<long>(std::floor(nodes_[k].imag() / h)) - by0_;
    bi = std::clamp(bi, 0L, bnx_ - 1);
    bj = std::clamp(bj, 0L, bny_ - 1);
    buckets_[bj * bnx_ + bi].push_back(k);
  }
}

std::vector<std::size_t> DiscGrid::nearest(cplx z, std::size_t count) const {
  const double h = h_;
  count = std::min(count, nodes_.size());
  const long ci = static_cast<long>(std::floor(z.real() / h)) - bx0_;
  const long cj = static_cast<long>(std::floor(z.imag() / h)) - by0_;
  std::vector<std::pair<double, std::size_t>> found;
  const long max_ring = std::max(bnx_, bny_) + std::max(std::labs(ci), std::labs(cj)) + 2;
  for (long ring = 0; ring <= max_ring; ++ring) {
    for (long dj = -ring; dj <= ring; ++dj) {
      for (long di = -ring; di <= ring; ++di) {
        if (std::max(std::labs(di), std::labs(dj)) != ring) continue;
        const long bi = ci + di, bj = cj + dj;
        if (bi < 0 || bj < 0 || bi >= bnx_ || bj >= bny_) continue;
        for (std::size_t k : buckets_[bj * bnx_ + bi]) found.emplace_back(std::abs(nodes_[k] - z), k);
      }
    }
    if (found.size() >= count) {
      std::sort(found.begin(), found.end());
      if (found[count - 1].first <= ring * h) break;
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::size_t> out;
  out.reserve(count);
  for (std::size_t k = 0; k < count && k < found.size(); ++k) out.push_back(found[k].second);
  return out;
}

std::vector<std::size_t> DiscGrid::within(cplx z, double radius) const {
  const double h = h_;
  const long ci = static_cast<long>(std::floor(z.real() / h)) - bx0_;
  const long cj = static_cast<long>(std::floor(z.imag() / h)) - by0_;
  const long reach = static_cast<long>(std::ceil(radius / h)) + 1;
  std::vector<std::pair<double, std::size_t>> found;
  for (long bj = std::max(0L, cj - reach); bj <= std::min(bny_ - 1, cj + reach); ++bj) {
    for (long bi = std::max(0L, ci - reach); bi <= std::min(bnx_ - 1, ci + reach); ++bi) {
      for (std::size_t k : buckets_[bj * bnx_ + bi]) {
        const double d = std::abs(nodes_[k] - z);
        if (d <= radius) found.emplace_back(d, k);
      }
    }
  }
  std::sort(found.begin(), found.end());
  std::vector<std::size_t> out;
  out.reserve(found.size());
  for (const auto& f : found) out.push_back(f.second);
  return out;
}

void DiscGrid::build_stencils() {
  const double h = h_;
  const std::size_t n = nodes_.size();
  st_ptr_.assign(1, 0);
  const double c1 = 8.0 / (12.0 * h), c2 = -1.0 / (12.0 * h);
  for (std::size_t k = 0; k < n; ++k) {
    if (kinds_[k] == NodeKind::interior) {
      const long i = lattice_i_[k], j = lattice_j_[k];
      const std::pair<long, double> xs[4] = {{2, c2}, {1, c1}, {-1, -c1}, {-2, -c2}};
      for (const auto& [d, c] : xs) {
        st_col_.push_back(static_cast<std::size_t>(lattice_node(i + d, j)));
        st_wx_.push_back(c);
        st_wy_.push_back(0.0);
      }
      for (const auto& [d, c] : xs) {
        st_col_.push_back(static_cast<std::size_t>(lattice_node(i, j + d)));
        st_wx_.push_back(0.0);
        st_wy_.push_back(c);
      }
    } else {
      const auto near = nearest(nodes_[k], kFitNodes);
      std::vector<cplx> pts;
      pts.reserve(near.size());
      for (std::size_t q : near) pts.push_back(nodes_[q]);
      const RMatrix p = local_fit(pts, nodes_[k], h);
      for (std::size_t r = 0; r < near.size(); ++r) {
        st_col_.push_back(near[r]);
        st_wx_.push_back(p(1, r) / h);
        st_wy_.push_back(p(2, r) / h);
      }
    }
    st_ptr_.push_back(st_col_.size());
  }
}

const CauchyNearField& DiscGrid::cauchy_near() const {
  std::call_once(lazy_->near_once, [this] {
    const double h = h_;
    const std::size_t n = nodes_.size();
    // Cells cut by the boundary get exact integrals out to a fixed distance,
    // so the switch to the centroid rule happens where its error is O(h^4).
    const double reach = 3.0 * h;
    const double partial_reach = std::max(2.0 * reach, 0.3 * std::min(1.0, domain_.ymax()));
    struct Entry {
      std::size_t j;
      cplx c0, c1, c2;
    };
    std::vector<std::vector<Entry>> rows(n);
    const Lazy& lz = *lazy_;
    std::vector<char> partial(n, 0);
    for (std::size_t j = 0; j < n; ++j) {
      partial[j] = kinds_[j] == NodeKind::boundary || weights_[j] < h * h * (1.0 - 1e-12) ||
                   lz.cell_ptr[j + 1] - lz.cell_ptr[j] > 1;
    }
#pragma omp parallel for schedule(dynamic, 16) num_threads(thread_count())
    for (long ii = 0; ii < static_cast<long>(n); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const cplx z = nodes_[i];
      // Candidate nodes whose centroid is within reach; the node may sit up
      // to one cell away from its centroid.
      const auto cand = within(z, partial_reach + 1.5 * h);
      std::vector<std::size_t> sorted(cand.begin(), cand.end());
      std::sort(sorted.begin(), sorted.end());
      for (std::size_t j : sorted) {
        if (j != i && std::abs(z - centroids_[j]) > (partial[j] ? partial_reach : reach)) continue;
        Entry e{j, 0.0, 0.0, 0.0};
        for (std::size_t c = lz.cell_ptr[j]; c < lz.cell_ptr[j + 1]; ++c) {
          const cplx cc = lz.cell_center[c];
          const CellCauchy cell =
              clipped_cauchy_integrals(domain_, z, centroids_[j], cc.real() - 0.5 * h,
                                       cc.real() + 0.5 * h, cc.imag() - 0.5 * h, cc.imag() + 0.5 * h);
          e.c0 += cell.i0;
          e.c1 += cell.i1;
          e.c2 += cell.i1bar;
        }
        if (j != i) {
          // Subtract exactly what the far-field rule adds for this cell.
          const cplx inv = 1.0 / (z - centroids_[j]);
          e.c0 -= weights_[j] * inv;
          if (!partial[j]) {
            const cplx inv2 = inv * inv;
            e.c0 -= kSquareM4 * h * h * h * h * h * h * inv2 * inv2 * inv;
            e.c2 -= kSquareR2 * h * h * h * h * inv2;
          }
        }
        rows[i].push_back(e);
      }
    }
    auto& nf = lazy_->near;
    nf.full.resize(n);
    for (std::size_t j = 0; j < n; ++j) nf.full[j] = partial[j] ? 0 : 1;
    nf.ptr.assign(1, 0);
    for (const auto& r : rows) {
      for (const auto& e : r) {
        nf.col.push_back(e.j);
        nf.coef0.push_back(e.c0);
        nf.coef1.push_back(e.c1);
        nf.coef2.push_back(e.c2);
      }
      nf.ptr.push_back(nf.col.size());
    }
  });
  return lazy_->near;
}

std::string DiscGrid::describe() const {
  std::ostringstream os;
  os << domain_.name() << " resolution=" << resolution_ << " h=" << h_ << " nodes=" << size();
  return os.str();
}

GridPtr build_grid(const Domain& domain, int resolution) {
  return std::make_shared<const DiscGrid>(domain, resolution);
}

// ---------------------------------------------------------------------------
// GridMap

GridMap::GridMap(GridPtr g, int n) : grid(std::move(g)) {
  values = CMatrix::Zero(static_cast<Eigen::Index>(grid->size()), n);
}

GridMap::GridMap(GridPtr g, CMatrix v) : grid(std::move(g)), values(std::move(v)) {
  if (static_cast<std::size_t>(values.rows()) != grid->size()) {
    throw InvalidArgument("value array does not match grid node count");
  }
}

namespace {

void check_same(const GridMap& a, const GridMap& b) {
  if (a.grid != b.grid) throw InvalidArgument("maps live on different grids");
  if (a.dim() != b.dim()) throw InvalidArgument("maps have different dimensions");
}

}  // namespace

GridMap GridMap::operator+(const GridMap& o) const {
  check_same(*this, o);
  return GridMap(grid, CMatrix(values + o.values));
}

GridMap GridMap::operator-(const GridMap& o) const {
  check_same(*this, o);
  return GridMap(grid, CMatrix(values - o.values));
}

GridMap GridMap::operator*(cplx s) const { return GridMap(grid, CMatrix(values * s)); }

GridMap sample_map(GridPtr grid, int n, const std::function<CVector(cplx)>& f) {
  GridMap u(grid, n);
  for (std::size_t i = 0; i < grid->size(); ++i) {
    u.values.row(static_cast<Eigen::Index>(i)) = f(grid->node(i)).transpose();
  }
  return u;
}

GridMap constant_map(GridPtr grid, const CVector& c) {
  GridMap u(grid, static_cast<int>(c.size()));
  for (Eigen::Index i = 0; i < u.values.rows(); ++i) u.values.row(i) = c.transpose();
  return u;
}

std::pair<CMatrix, CMatrix> partials(const GridMap& u) {
  const DiscGrid& g = *u.grid;
  const auto& ptr = g.stencil_ptr();
  const auto& col = g.stencil_col();
  const auto& wx = g.stencil_wx();
  const auto& wy = g.stencil_wy();
  const Eigen::Index n = u.values.cols();
  CMatrix ux = CMatrix::Zero(u.values.rows(), n);
  CMatrix uy = CMatrix::Zero(u.values.rows(), n);
  for (std::size_t i = 0; i < g.size(); ++i) {
    for (std::size_t k = ptr[i]; k < ptr[i + 1]; ++k) {
      const auto r = u.values.row(static_cast<Eigen::Index>(col[k]));
      if (wx[k] != 0.0) ux.row(i) += wx[k] * r;
      if (wy[k] != 0.0) uy.row(i) += wy[k] * r;
    }
  }
  return {ux, uy};
}

std::pair<GridMap, GridMap> wirtinger(const GridMap& u) {
  if (u.derivs) {
    return {GridMap(u.grid, u.derivs->dz), GridMap(u.grid, u.derivs->dzbar)};
  }
  auto [ux, uy] = partials(u);
  const cplx i(0.0, 1.0);
  CMatrix dz = 0.5 * (ux - i * uy);
  CMatrix dzbar = 0.5 * (ux + i * uy);
  return {GridMap(u.grid, std::move(dz)), GridMap(u.grid, std::move(dzbar))};
}

// ---------------------------------------------------------------------------
// Hoelder estimates

namespace {

struct PairScan {
  double value_q = 0.0;
  double deriv_q = 0.0;
  std::size_t count = 0;
};

double row_dist(const CMatrix& m, std::size_t a, std::size_t b) {
  return (m.row(static_cast<Eigen::Index>(a)) - m.row(static_cast<Eigen::Index>(b))).norm();
}

PairScan scan_pairs(const DiscGrid& g, const CMatrix& v, const CMatrix* dz, const CMatrix* dzb,
                    double alpha, const HolderOptions& opts) {
  const std::size_t n = g.size();
  std::vector<std::size_t> subset = opts.subset;
  if (subset.empty()) {
    subset.resize(n);
    std::iota(subset.begin(), subset.end(), 0);
  }
  std::vector<char> mask(n, 0);
  for (std::size_t s : subset) mask[s] = 1;
  const double h = g.spacing();
  const long reach = static_cast<long>(std::floor(opts.window / h + 1e-9));

  // Lattice offsets in a half plane with their weights |d|^{-alpha}.
  struct Offset {
    long di, dj;
    double w;
  };
  std::vector<Offset> offsets;
  for (long dj = 0; dj <= reach; ++dj) {
    for (long di = -reach; di <= reach; ++di) {
      if (dj == 0 && di <= 0) continue;
      const double d = h * std::sqrt(static_cast<double>(di * di + dj * dj));
      if (d > opts.window) continue;
      offsets.push_back({di, dj, std::pow(d, -alpha)});
    }
  }

  auto quot = [&](std::size_t a, std::size_t b, double w, PairScan& s) {
    s.value_q = std::max(s.value_q, row_dist(v, a, b) * w);
    if (dz) s.deriv_q = std::max(s.deriv_q, (row_dist(*dz, a, b) + row_dist(*dzb, a, b)) * w);
    ++s.count;
  };

  PairScan total;
  const long m = static_cast<long>(subset.size());
  double vq = 0.0, dq = 0.0;
  std::size_t cnt = 0;
#pragma omp parallel for schedule(dynamic, 64) num_threads(thread_count()) reduction(max : vq, dq) reduction(+ : cnt)
  for (long t = 0; t < m; ++t) {
    const std::size_t a = subset[static_cast<std::size_t>(t)];
    PairScan s;
    if (g.on_lattice(a)) {
      const long i = g.lattice_i(a), j = g.lattice_j(a);
      for (const auto& o : offsets) {
        const long b = g.lattice_node(i + o.di, j + o.dj);
        if (b < 0 || !mask[static_cast<std::size_t>(b)]) continue;
        quot(a, static_cast<std::size_t>(b), o.w, s);
      }
    }
    // Pairs involving off-lattice nodes: counted once, from the off-lattice
    // end (or the smaller index when both are off-lattice).
    if (!g.on_lattice(a)) {
      for (std::size_t b : g.within(g.node(a), opts.window)) {
        if (b == a || !mask[b]) continue;
        if (!g.on_lattice(b) && b < a) continue;
        const double d = std::abs(g.node(a) - g.node(b));
        if (d == 0.0) continue;
        quot(a, b, std::pow(d, -alpha), s);
      }
    }
    vq = std::max(vq, s.value_q);
    dq = std::max(dq, s.deriv_q);
    cnt += s.count;
  }
  total.value_q = vq;
  total.deriv_q = dq;
  total.count = cnt;

  // Deterministic far pairs.
  std::mt19937_64 rng(opts.seed);
  for (std::size_t k = 0; k < opts.far_pairs && subset.size() > 1; ++k) {
    const std::size_t a = subset[rng() % subset.size()];
    const std::size_t b = subset[rng() % subset.size()];
    const double d = std::abs(g.node(a) - g.node(b));
    if (d <= opts.window) continue;
    quot(a, b, std::pow(d, -alpha), total);
  }
  // Boundary-to-boundary pairs reach the diameter.
  std::vector<std::size_t> bnd;
  for (std::size_t s : subset) {
    if (g.kind(s) == NodeKind::boundary) bnd.push_back(s);
  }
  for (std::size_t x = 0; x < bnd.size(); ++x) {
    for (std::size_t y = x + 1; y < bnd.size(); ++y) {
      const double d = std::abs(g.node(bnd[x]) - g.node(bnd[y]));
      if (d <= opts.window) continue;
      quot(bnd[x], bnd[y], std::pow(d, -alpha), total);
    }
  }
  return total;
}

double sup_rows(const CMatrix& m, const std::vector<std::size_t>& subset) {
  double s = 0.0;
  if (subset.empty()) {
    for (Eigen::Index i = 0; i < m.rows(); ++i) s = std::max(s, m.row(i).norm());
  } else {
    for (std::size_t i : subset) s = std::max(s, m.row(static_cast<Eigen::Index>(i)).norm());
  }
  return s;
}

}  // namespace

double sup_norm(const GridMap& u, const std::vector<std::size_t>& subset) {
  return sup_rows(u.values, subset);
}

HolderEstimate holder_norm(const GridMap& u, const GridMap& u_z, const GridMap& u_zbar,
                           double alpha, int order, const HolderOptions& opts) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw InvalidArgument("alpha must lie in (0, 1)");
  if (order != 0 && order != 1) throw InvalidArgument("order must be 0 or 1");
  HolderEstimate e;
  e.alpha = alpha;
  e.order = order;
  e.c0_norm = sup_rows(u.values, opts.subset);
  const PairScan s = scan_pairs(*u.grid, u.values, order == 1 ? &u_z.values : nullptr,
                                order == 1 ? &u_zbar.values : nullptr, alpha, opts);
  e.pair_count = s.count;
  if (order == 0) {
    e.holder_quotient = s.value_q;
    e.total = e.c0_norm + e.holder_quotient;
  } else {
    double c1 = 0.0;
    auto rowsup = [&](std::size_t i) {
      const auto ii = static_cast<Eigen::Index>(i);
      c1 = std::max(c1, u_z.values.row(ii).norm() + u_zbar.values.row(ii).norm());
    };
    if (opts.subset.empty()) {
      for (std::size_t i = 0; i < u.size(); ++i) rowsup(i);
    } else {
      for (std::size_t i : opts.subset) rowsup(i);
    }
    e.c1_norm = c1;
    e.holder_quotient = s.deriv_q;
    e.total = e.c0_norm + e.c1_norm + e.holder_quotient;
  }
  return e;
}

HolderEstimate holder_norm(const GridMap& u, double alpha, int order, const HolderOptions& opts) {
  if (order == 1) {
    auto [dz, dzb] = wirtinger(u);
    return holder_norm(u, dz, dzb, alpha, order, opts);
  }
  return holder_norm(u, u, u, alpha, order, opts);
}

// ---------------------------------------------------------------------------
// Cauchy-Green transform

GridMap cauchy_green(const GridMap& g) {
  const DiscGrid& grid = *g.grid;
  const std::size_t n = grid.size();
  const int dim = g.dim();
  const CauchyNearField& nf = grid.cauchy_near();

  std::vector<double> cx(n), cy(n), w(n);
  for (std::size_t j = 0; j < n; ++j) {
    cx[j] = grid.centroids()[j].real();
    cy[j] = grid.centroids()[j].imag();
    w[j] = grid.weights()[j];
  }
  // Values are expanded to first order about each cell centroid; cells
  // whose centroid is off their node use the extrapolated centroid value.
  const auto [gx, gy] = partials(g);
  const cplx iu(0.0, 1.0);
  const CMatrix gw = 0.5 * (gx - iu * gy);
  const CMatrix gwb = 0.5 * (gx + iu * gy);
  CMatrix gc = g.values;
  for (std::size_t j = 0; j < n; ++j) {
    const cplx d = grid.centroids()[j] - grid.node(j);
    if (std::abs(d) <= 1e-12 * grid.spacing()) continue;
    const auto jj = static_cast<Eigen::Index>(j);
    gc.row(jj) += d.real() * gx.row(jj) + d.imag() * gy.row(jj);
  }
  // Full square cells carry two more far-field multipole terms: the fourth
  // moment against g and the second radial moment against g_wbar.
  const double h = grid.spacing();
  const auto& full = nf.full;
  const double m4 = kSquareM4 * h * h * h * h * h * h;
  const double r2 = kSquareR2 * h * h * h * h;
  GridMap out(g.grid, dim);
  for (int k = 0; k < dim; ++k) {
    std::vector<double> gr(n), gi(n), mr(n), mi(n), sr(n), si(n);
    for (std::size_t j = 0; j < n; ++j) {
      const auto jj = static_cast<Eigen::Index>(j);
      gr[j] = w[j] * gc(jj, k).real();
      gi[j] = w[j] * gc(jj, k).imag();
      const double f = full[j] ? 1.0 : 0.0;
      mr[j] = f * m4 * gc(jj, k).real();
      mi[j] = f * m4 * gc(jj, k).imag();
      sr[j] = f * r2 * gwb(jj, k).real();
      si[j] = f * r2 * gwb(jj, k).imag();
    }
    std::vector<cplx> res(n);
#pragma omp parallel for schedule(static) num_threads(thread_count())
    for (long ii = 0; ii < static_cast<long>(n); ++ii) {
      const std::size_t i = static_cast<std::size_t>(ii);
      const double xi = grid.node(i).real(), yi = grid.node(i).imag();
      double re = 0.0, im = 0.0;
      auto body = [&](std::size_t j) {
        const double dx = xi - cx[j], dy = yi - cy[j];
        const double q = 1.0 / (dx * dx + dy * dy);
        // e = 1/(z - c) = (dx - i dy) q.
        const double er = dx * q, ei = -dy * q;
        const double e2r = er * er - ei * ei, e2i = 2.0 * er * ei;
        const double e4r = e2r * e2r - e2i * e2i, e4i = 2.0 * e2r * e2i;
        const double e5r = e4r * er - e4i * ei, e5i = e4r * ei + e4i * er;
        re += er * gr[j] - ei * gi[j] + e2r * sr[j] - e2i * si[j] + e5r * mr[j] - e5i * mi[j];
        im += er * gi[j] + ei * gr[j] + e2r * si[j] + e2i * sr[j] + e5r * mi[j] + e5i * mr[j];
      };
      for (std::size_t j = 0; j < i; ++j) body(j);
      for (std::size_t j = i + 1; j < n; ++j) body(j);
      cplx acc(re, im);
      for (std::size_t q = nf.ptr[i]; q < nf.ptr[i + 1]; ++q) {
        const auto jj = static_cast<Eigen::Index>(nf.col[q]);
        acc += nf.coef0[q] * gc(jj, k) + nf.coef1[q] * gw(jj, k) + nf.coef2[q] * gwb(jj, k);
      }
      res[i] = acc / kPi;
    }
    for (std::size_t i = 0; i < n; ++i) out.values(static_cast<Eigen::Index>(i), k) = res[i];
  }
  return out;
}

GridMap cauchy_green_centered(const GridMap& g) {
  const long o = g.grid->origin_index();
  if (o < 0) throw InvalidArgument("centered transform needs a node at the origin");
  GridMap t = cauchy_green(g);
  const Eigen::RowVectorXcd t0 = t.values.row(o);
  for (Eigen::Index i = 0; i < t.values.rows(); ++i) t.values.row(i) -= t0;
  return t;
}

// ---------------------------------------------------------------------------
// Interpolation, traces, CSV

CVector interpolate(const GridMap& u, cplx z) {
  const DiscGrid& g = *u.grid;
  const auto near = g.nearest(z, kFitNodes);
  if (!near.empty() && std::abs(g.node(near.front()) - z) < 1e-14) return u.at(near.front());
  std::vector<cplx> pts;
  pts.reserve(near.size());
  for (std::size_t q : near) pts.push_back(g.node(q));
  const RMatrix p = local_fit(pts, z, g.spacing());
  CVector out = CVector::Zero(u.dim());
  for (std::size_t r = 0; r < near.size(); ++r) out += p(0, r) * u.at(near[r]);
  return out;
}

std::vector<TraceSample> boundary_trace(const GridMap& u, int samples) {
  const Domain& d = u.grid->domain();
  if (d.kind != DomainKind::disc) throw InvalidArgument("boundary trace needs a disc grid");
  if (samples < 1) throw InvalidArgument("samples must be positive");
  std::vector<TraceSample> out(static_cast<std::size_t>(samples));
#pragma omp parallel for schedule(static) num_threads(thread_count())
  for (int k = 0; k < samples; ++k) {
    const double t = 2.0 * kPi * k / samples;
    out[k].t = t;
    out[k].value = interpolate(u, std::polar(d.radius, t));
  }
  return out;
}

void write_csv(const GridMap& u, const std::string& path, double alpha) {
  std::ofstream f(path);
  if (!f) throw InvalidArgument("cannot write " + path);
  const DiscGrid& g = *u.grid;
  f << "# domain=" << g.domain().name() << " resolution=" << g.resolution()
    << " alpha=" << alpha << " n=" << u.dim() << "\n";
  f << "x,y";
  for (int k = 0; k < u.dim(); ++k) f << ",re_u" << k + 1;
  for (int k = 0; k < u.dim(); ++k) f << ",im_u" << k + 1;
  f << "\n";
  char buf[64];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return std::string(buf);
  };
  for (std::size_t i = 0; i < g.size(); ++i) {
    f << num(g.node(i).real()) << "," << num(g.node(i).imag());
    for (int k = 0; k < u.dim(); ++k) f << "," << num(u.values(static_cast<Eigen::Index>(i), k).real());
    for (int k = 0; k < u.dim(); ++k) f << "," << num(u.values(static_cast<Eigen::Index>(i), k).imag());
    f << "\n";
  }
}

}  // namespace holodisc
