#pragma once

// Closed-form C1 potentials: a smooth partition-of-unity blend of affine
// pieces psi_tau(x) = g_tau . (x - b_tau), one per Kuhn simplex.
//
// Weights: q_tau(x) = prod_f step(d_f(x) / w), rho_tau = q_tau / sum q, where d_f
// is the signed distance (positive inside) to facet f and step is the exp
// smooth step on [-1, 1]. q_tau vanishes off the w-dilation of tau, which lies
// within reach * w = r of tau; rho_tau = 1 at points of tau at distance >= r
// from its boundary. So phi = psi_tau off the r-tube around the skeleton.

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "lusin/error.hpp"
#include "lusin/field_core.hpp"
#include "lusin/field_io.hpp"
#include "lusin/kuhn.hpp"
#include "lusin/smooth_step.hpp"

namespace lusin {

struct AffinePiece {
  std::size_t cell = 0;  ///< mesh cell (linear index)
  int perm = 0;          ///< Kuhn permutation id
  Point grad{};          ///< constant gradient of the piece
  Point anchor{};        ///< barycenter, where the piece vanishes
};

class EvaluablePotential {
 public:
  EvaluablePotential() = default;

  /// `pieces` must reference cells of `mesh`; pieces with zero gradient are dropped.
  EvaluablePotential(const kuhn::SimplicialMesh& mesh, std::vector<AffinePiece> pieces, double r)
      : dim_(mesh.dim), level_(mesh.level), H_(mesh.H), origin_(mesh.origin), dims_(mesh.dims), r_(r) {
    std::erase_if(pieces, [this](const AffinePiece& p) {
      for (int k = 0; k < dim_; ++k)
        if (p.grad[k] != 0.0) return false;
      return true;
    });
    if (!pieces.empty() && (!(r > 0.0) || !(r < H_)))
      fail(ErrorKind::invalid_argument, "blend radius must lie in (0, H)");
    w_ = r_ > 0.0 ? r_ / kuhn::reference(dim_).reach : 0.0;
    std::sort(pieces.begin(), pieces.end(), [](const AffinePiece& a, const AffinePiece& b) {
      return a.cell != b.cell ? a.cell < b.cell : a.perm < b.perm;
    });
    pieces_ = std::move(pieces);
    const int nperm = kuhn::factorial(dim_);
    for (std::size_t i = 0; i < pieces_.size(); ++i) {
      if (cells_.empty() || cells_.back() != pieces_[i].cell) {
        cells_.push_back(pieces_[i].cell);
        slots_.resize(slots_.size() + static_cast<std::size_t>(nperm), -1);
      }
      slots_[(cells_.size() - 1) * static_cast<std::size_t>(nperm) + static_cast<std::size_t>(pieces_[i].perm)] =
          static_cast<int>(i);
    }
    compute_bounds();
  }

  int dim() const { return dim_; }
  int level() const { return level_; }
  double mesh_spacing() const { return H_; }
  const Point& mesh_origin() const { return origin_; }
  const std::vector<int>& mesh_dims() const { return dims_; }
  double blend_radius() const { return r_; }
  double blend_width() const { return w_; }
  const std::vector<AffinePiece>& pieces() const { return pieces_; }
  std::size_t active_count() const { return pieces_.size(); }
  bool is_zero() const { return pieces_.empty(); }

  /// max over pieces of |psi_tau| on tau.
  double piece_sup() const { return piece_sup_; }
  /// Certified bound on sup |phi| over R^N (max of |psi_tau| over w-dilated simplices).
  double sup_bound() const { return sup_bound_; }
  /// max |g_tau|.
  double max_piece_gradient() const { return max_grad_; }
  /// Crude certified bound on sup |grad phi| including tube terms.
  double gradient_bound() const { return grad_bound_; }

  /// Upper bound on the N-measure of the open r-neighbourhood of the facets of
  /// all active simplices (exact Steiner formula for N = 2, 3; homothety bound above).
  double tube_measure_bound() const {
    if (pieces_.empty()) return 0.0;
    return static_cast<double>(pieces_.size()) * facet_tube_measure(dim_, H_, r_);
  }

  static double facet_tube_measure(int n, double H, double r) {
    const auto& ref = kuhn::reference(n);
    double total = 0.0;
    for (std::size_t f = 0; f < ref.facet_areas.size(); ++f) {
      const double area = ref.facet_areas[f] * std::pow(H, n - 1);
      if (n == 2) {
        total += 2.0 * r * area + M_PI * r * r;
      } else if (n == 3) {
        // Perimeter of the triangular facet, from its inradius: P = 2 A / rho.
        const double perim = 2.0 * area / (ref.facet_inradii[f] * H);
        total += 2.0 * area * r + 0.5 * M_PI * perim * r * r + 4.0 / 3.0 * M_PI * r * r * r;
      } else {
        const double rho = ref.facet_inradii[f] * H;
        total += 2.0 * r * area * std::pow(1.0 + r / rho, n - 1);
      }
    }
    return total;
  }

  /// True iff x lies within the r-tube of an active simplex facet, or in no
  /// position where phi equals a single affine piece (conservative).
  bool in_tube(const Point& x) const {
    if (pieces_.empty()) return false;
    Point u{};
    Index c{};
    locate_cell(x, u, c);
    const auto p = kuhn::locate(u, dim_);
    double d[kMaxDim + 1];
    kuhn::facet_distances(u, p, dim_, H_, d, nullptr);
    if (*std::min_element(d, d + dim_ + 1) >= r_) return false;
    // Close to a facet: in the tube only if some active simplex is nearby.
    return touches_active(c);
  }

  /// The active piece whose simplex contains x (ties resolved like locate), or null.
  const AffinePiece* piece_at(const Point& x) const {
    if (pieces_.empty()) return nullptr;
    Point u{};
    Index c{};
    locate_cell(x, u, c);
    return find(c, kuhn::perm_id(kuhn::locate(u, dim_), dim_));
  }

  /// Whether the segment [a, b] crosses a facet of an active simplex. Every
  /// point of such a facet lies in the open r-tube.
  bool crosses_active_facet(const Point& a, const Point& b) const {
    if (pieces_.empty()) return false;
    Point ua{}, du{};
    double len = 0.0;
    for (int k = 0; k < dim_; ++k) {
      ua[k] = (a[k] - origin_[k]) / H_;
      du[k] = (b[k] - origin_[k]) / H_ - ua[k];
      len += (b[k] - a[k]) * (b[k] - a[k]);
    }
    len = std::sqrt(len);
    if (len == 0.0) return false;
    std::vector<double> ts;
    auto collect = [&ts](double start, double delta) {
      if (delta == 0.0) return;
      const double end = start + delta;
      for (double m = std::ceil(std::min(start, end)); m <= std::floor(std::max(start, end)); m += 1.0) {
        const double t = (m - start) / delta;
        if (t > 0.0 && t < 1.0) ts.push_back(t);
      }
    };
    for (int i = 0; i < dim_; ++i) {
      collect(ua[i], du[i]);
      for (int j = i + 1; j < dim_; ++j) collect(ua[i] - ua[j], du[i] - du[j]);
    }
    const double nudge = 1e-9 * H_ / len;
    for (double t : ts) {
      for (double side : {-nudge, nudge}) {
        Point x{};
        for (int k = 0; k < dim_; ++k) x[k] = a[k] + (t + side) * (b[k] - a[k]);
        if (piece_at(x)) return true;
      }
    }
    return false;
  }

  double value(const Point& x) const {
    double v = 0.0;
    Point g{};
    evaluate(x, v, g);
    return v;
  }

  Point gradient(const Point& x) const {
    double v = 0.0;
    Point g{};
    evaluate(x, v, g);
    return g;
  }

  void evaluate(const Point& x, double& value, Point& grad) const {
    value = 0.0;
    grad = Point{};
    if (pieces_.empty()) return;
    Point u{};
    Index c{};
    locate_cell(x, u, c);
    const auto p0 = kuhn::locate(u, dim_);
    double d[kMaxDim + 1];
    kuhn::facet_distances(u, p0, dim_, H_, d, nullptr);
    if (*std::min_element(d, d + dim_ + 1) >= r_) {
      const AffinePiece* piece = find(c, kuhn::perm_id(p0, dim_));
      if (piece) affine(*piece, x, value, grad);
      return;
    }
    blend(x, c, value, grad);
  }

  void write(std::ostream& os) const {
    os << "potential N=" << dim_ << " level=" << level_ << " H=" << io::format_double(H_)
       << " origin=" << io::join(std::vector<double>(origin_.begin(), origin_.begin() + dim_), io::format_double)
       << " dims=" << io::join(dims_, [](int d) { return std::to_string(d); }) << " r=" << io::format_double(r_)
       << " w=" << io::format_double(w_) << " profile=exp_step pieces=" << pieces_.size() << '\n';
    for (const auto& p : pieces_) {
      os << p.cell << ' ' << p.perm;
      for (int k = 0; k < dim_; ++k) os << ' ' << io::format_double(p.grad[k]);
      for (int k = 0; k < dim_; ++k) os << ' ' << io::format_double(p.anchor[k]);
      os << '\n';
    }
  }

  static EvaluablePotential read(std::istream& is) {
    std::string tok;
    is >> tok;
    if (tok != "potential") fail(ErrorKind::io_error, "expected potential record");
    std::map<std::string, std::string> kv;
    std::string line;
    std::getline(is, line);
    std::istringstream ls(line);
    while (ls >> tok) {
      const auto eq = tok.find('=');
      if (eq == std::string::npos) fail(ErrorKind::io_error, "malformed potential header");
      kv[tok.substr(0, eq)] = tok.substr(eq + 1);
    }
    for (const char* key : {"N", "level", "H", "origin", "dims", "r", "pieces"})
      if (!kv.count(key)) fail(ErrorKind::io_error, std::string("potential header lacks ") + key);
    const auto count = static_cast<std::size_t>(std::stoull(kv["pieces"]));
    if (count == 0) return EvaluablePotential();
    kuhn::SimplicialMesh mesh;
    mesh.dim = io::parse_int(kv["N"]);
    mesh.level = io::parse_int(kv["level"]);
    mesh.H = io::parse_double(kv["H"]);
    const auto o = io::parse_list<double>(kv["origin"], io::parse_double);
    for (std::size_t k = 0; k < o.size() && k < kMaxDim; ++k) mesh.origin[k] = o[k];
    mesh.dims = io::parse_list<int>(kv["dims"], io::parse_int);
    const double r = io::parse_double(kv["r"]);
    std::vector<AffinePiece> pieces(count);
    for (auto& p : pieces) {
      if (!(is >> p.cell >> p.perm)) fail(ErrorKind::io_error, "truncated potential table");
      for (int k = 0; k < mesh.dim; ++k) {
        is >> tok;
        p.grad[k] = io::parse_double(tok);
      }
      for (int k = 0; k < mesh.dim; ++k) {
        is >> tok;
        p.anchor[k] = io::parse_double(tok);
      }
    }
    return EvaluablePotential(mesh, std::move(pieces), r);
  }

 private:
  int dim_ = 2;
  int level_ = 0;
  double H_ = 1.0;
  Point origin_{};
  std::vector<int> dims_;
  double r_ = 0.0;
  double w_ = 0.0;
  std::vector<AffinePiece> pieces_;
  std::vector<std::size_t> cells_;
  std::vector<int> slots_;
  double piece_sup_ = 0.0, sup_bound_ = 0.0, max_grad_ = 0.0, grad_bound_ = 0.0;

  void locate_cell(const Point& x, Point& u, Index& c) const {
    for (int k = 0; k < dim_; ++k) {
      const double s = (x[k] - origin_[k]) / H_;
      const double f = std::floor(s);
      c[k] = static_cast<int>(std::clamp(f, -2.0, static_cast<double>(dims_[static_cast<std::size_t>(k)]) + 1.0));
      u[k] = s - c[k];
    }
  }

  std::size_t linear(const Index& c) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim_; ++k)
      idx = idx * static_cast<std::size_t>(dims_[static_cast<std::size_t>(k)]) + static_cast<std::size_t>(c[k]);
    return idx;
  }

  bool in_range(const Index& c) const {
    for (int k = 0; k < dim_; ++k)
      if (c[k] < 0 || c[k] >= dims_[static_cast<std::size_t>(k)]) return false;
    return true;
  }

  const AffinePiece* find(const Index& c, int perm) const {
    if (!in_range(c)) return nullptr;
    const std::size_t idx = linear(c);
    const auto it = std::lower_bound(cells_.begin(), cells_.end(), idx);
    if (it == cells_.end() || *it != idx) return nullptr;
    const auto slot = static_cast<std::size_t>(it - cells_.begin()) * static_cast<std::size_t>(kuhn::factorial(dim_));
    const int i = slots_[slot + static_cast<std::size_t>(perm)];
    return i < 0 ? nullptr : &pieces_[static_cast<std::size_t>(i)];
  }

  bool touches_active(const Index& c) const {
    Index off{};
    for (int k = 0; k < dim_; ++k) off[k] = -1;
    while (true) {
      Index q{};
      for (int k = 0; k < dim_; ++k) q[k] = c[k] + off[k];
      if (in_range(q) && std::binary_search(cells_.begin(), cells_.end(), linear(q))) return true;
      int k = dim_ - 1;
      while (k >= 0 && ++off[k] > 1) {
        off[k] = -1;
        --k;
      }
      if (k < 0) return false;
    }
  }

  void affine(const AffinePiece& p, const Point& x, double& value, Point& grad) const {
    value = 0.0;
    for (int k = 0; k < dim_; ++k) {
      value += p.grad[k] * (x[k] - p.anchor[k]);
      grad[k] = p.grad[k];
    }
  }

  // General position: sum over all simplices of the 3^N surrounding cells.
  void blend(const Point& x, const Index& c, double& value, Point& grad) const {
    const auto& perms = kuhn::permutations(dim_);
    double G = 0.0, num = 0.0;
    Point dG{}, dnum{};
    double d[kMaxDim + 1];
    Point nrm[kMaxDim + 1];
    double s[kMaxDim + 1], ds[kMaxDim + 1];
    Index off{};
    for (int k = 0; k < dim_; ++k) off[k] = -1;
    while (true) {
      Index q{};
      Point u{};
      for (int k = 0; k < dim_; ++k) {
        q[k] = c[k] + off[k];
        u[k] = (x[k] - origin_[k]) / H_ - q[k];
      }
      for (std::size_t pi = 0; pi < perms.size(); ++pi) {
        kuhn::facet_distances(u, perms[pi], dim_, H_, d, nrm);
        bool zero = false;
        for (int f = 0; f <= dim_; ++f) {
          const double t = d[f] / w_;
          if (t <= -1.0) {
            zero = true;
            break;
          }
          s[f] = profile::step(t);
          ds[f] = profile::step_prime(t) / w_;
        }
        if (zero) continue;
        double g = 1.0;
        for (int f = 0; f <= dim_; ++f) g *= s[f];
        Point dg{};
        for (int f = 0; f <= dim_; ++f) {
          if (ds[f] == 0.0) continue;
          double rest = ds[f];
          for (int e = 0; e <= dim_; ++e)
            if (e != f) rest *= s[e];
          for (int k = 0; k < dim_; ++k) dg[k] += rest * nrm[f][k];
        }
        G += g;
        for (int k = 0; k < dim_; ++k) dG[k] += dg[k];
        const AffinePiece* piece = find(q, static_cast<int>(pi));
        if (!piece) continue;
        double psi = 0.0;
        for (int k = 0; k < dim_; ++k) psi += piece->grad[k] * (x[k] - piece->anchor[k]);
        num += g * psi;
        for (int k = 0; k < dim_; ++k) dnum[k] += dg[k] * psi + g * piece->grad[k];
      }
      int k = dim_ - 1;
      while (k >= 0 && ++off[k] > 1) {
        off[k] = -1;
        --k;
      }
      if (k < 0) break;
    }
    if (G <= 0.0) return;
    value = num / G;
    for (int k = 0; k < dim_; ++k) grad[k] = dnum[k] / G - num * dG[k] / (G * G);
  }

  void compute_bounds() {
    const auto& ref = kuhn::reference(dim_);
    const double factor = 1.0 + w_ / (ref.inradius * H_);
    const int n = dim_;
    for (const auto& p : pieces_) {
      const Index ci = [&] {
        Index c{};
        std::size_t rem = p.cell;
        for (int k = n - 1; k >= 0; --k) {
          const auto ext = static_cast<std::size_t>(dims_[static_cast<std::size_t>(k)]);
          c[k] = static_cast<int>(rem % ext);
          rem /= ext;
        }
        return c;
      }();
      const auto verts = kuhn::unit_vertices(kuhn::permutations(n)[static_cast<std::size_t>(p.perm)], n);
      // Incenter of this simplex: the reference incenter permuted along with the vertices.
      const auto& perm = kuhn::permutations(n)[static_cast<std::size_t>(p.perm)];
      Point inc{};
      for (int k = 0; k < n; ++k) inc[perm[k]] = ref.incenter[k];
      double gn = 0.0;
      for (int k = 0; k < n; ++k) gn += p.grad[k] * p.grad[k];
      max_grad_ = std::max(max_grad_, std::sqrt(gn));
      for (const auto& v : verts) {
        double on = 0.0, dil = 0.0;
        for (int k = 0; k < n; ++k) {
          const double xv = origin_[k] + H_ * (ci[k] + v[k]);
          const double xd = origin_[k] + H_ * (ci[k] + inc[k] + factor * (v[k] - inc[k]));
          on += p.grad[k] * (xv - p.anchor[k]);
          dil += p.grad[k] * (xd - p.anchor[k]);
        }
        piece_sup_ = std::max(piece_sup_, std::abs(on));
        sup_bound_ = std::max(sup_bound_, std::abs(dil));
      }
    }
    // |grad rho| <= (|grad q| + |grad G|) / G with G >= step(0)^(N+1) = 2^-(N+1) and
    // at most 3^N N! overlapping weights, each with |grad q| <= (N+1) max step' / w.
    const double step_slope = profile::step_prime(0.0);  // maximum slope of the step
    const double m = std::pow(3.0, n) * kuhn::factorial(n);
    const double qslope = (n + 1) * step_slope / w_;
    const double gmin = std::pow(0.5, n + 1);
    grad_bound_ = pieces_.empty() ? 0.0 : max_grad_ + m * sup_bound_ * (qslope + m * qslope) / gmin;
  }
};

/// Finite ordered sum of potentials (the accumulated potential of the iteration).
struct PotentialSum {
  std::vector<EvaluablePotential> terms;

  void evaluate(const Point& x, double& value, Point& grad) const {
    value = 0.0;
    grad = Point{};
    for (const auto& t : terms) {
      double v = 0.0;
      Point g{};
      t.evaluate(x, v, g);
      value += v;
      for (int k = 0; k < kMaxDim; ++k) grad[k] += g[k];
    }
  }
  double value(const Point& x) const {
    double v;
    Point g;
    evaluate(x, v, g);
    return v;
  }
  Point gradient(const Point& x) const {
    double v;
    Point g;
    evaluate(x, v, g);
    return g;
  }
  double sup_bound() const {
    double s = 0.0;
    for (const auto& t : terms) s += t.sup_bound();
    return s;
  }
};

/// Sup norms of a potential over the closure of the included cells, sampled on
/// the lattice of spacing h / oversample.
template <class Potential>
NormReport norms(const Potential& phi, const GridDomain& domain, int oversample = 2) {
  if (domain.empty()) fail(ErrorKind::empty_domain, "empty domain");
  if (oversample < 1) fail(ErrorKind::invalid_argument, "oversample must be >= 1");
  const int n = domain.dim();
  const double step = domain.h() / oversample;
  double sup = 0.0, gsup = 0.0;
  for (std::size_t c = 0; c < domain.cell_count(); ++c) {
    if (!domain.included(c)) continue;
    const Index ci = domain.cell_coords(c);
    Index off{};
    while (true) {
      Point x{};
      for (int k = 0; k < n; ++k) x[k] = domain.origin(k) + domain.h() * ci[k] + step * off[k];
      double v = 0.0;
      Point g{};
      phi.evaluate(x, v, g);
      double gn = 0.0;
      for (int k = 0; k < n; ++k) gn += g[k] * g[k];
      sup = std::max(sup, std::abs(v));
      gsup = std::max(gsup, std::sqrt(gn));
      int k = n - 1;
      while (k >= 0 && ++off[k] > oversample) {
        off[k] = 0;
        --k;
      }
      if (k < 0) break;
    }
  }
  return make_norm_report(sup, gsup);
}

}  // namespace lusin
