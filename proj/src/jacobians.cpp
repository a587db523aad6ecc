#include "dwpkit/jacobians.hpp"

#include <cmath>
#include <numbers>

namespace dwpkit::jac {

namespace {

void require_positive_diagonal(const DenseMatrix& m, std::size_t n, const char* what) {
  for (std::size_t i = 0; i < n; ++i)
    if (!(m(i, i) > 0.0)) {
      throw NonPositiveDiagonal(std::string(what) + ": diagonal entry " + std::to_string(i) +
                                " is " + std::to_string(m(i, i)));
    }
}

}  // namespace

CoordinateChart CoordinateChart::trapezoid(std::size_t p, std::size_t nu) {
  if (p == 0 || nu == 0) throw ShapeMismatch("trapezoid chart: empty");
  return {Kind::Trapezoid, p, std::min(p, nu)};
}

CoordinateChart CoordinateChart::symmetric_half(std::size_t p) {
  if (p == 0) throw ShapeMismatch("symmetric-half chart: empty");
  return {Kind::SymmetricHalf, p, p};
}

CoordinateChart CoordinateChart::symmetric_half_rank(std::size_t p, std::size_t rank) {
  if (p == 0 || rank == 0 || rank > p) throw ShapeMismatch("symmetric-half-rank chart: bad rank");
  return {Kind::SymmetricHalfRank, p, rank};
}

std::string CoordinateChart::name() const {
  switch (kind_) {
    case Kind::Trapezoid:
      return "trapezoid(" + std::to_string(p_) + "," + std::to_string(k_) + ")";
    case Kind::SymmetricHalf:
      return "symmetric-half(" + std::to_string(p_) + ")";
    case Kind::SymmetricHalfRank:
      return "symmetric-half-rank(" + std::to_string(p_) + "," + std::to_string(k_) + ")";
  }
  return "?";
}

DenseMatrix CoordinateChart::embed(const std::vector<double>& coords) const {
  if (coords.size() != dimension()) {
    throw ShapeMismatch(name() + ": expected " + std::to_string(dimension()) + " coordinates, got " +
                        std::to_string(coords.size()));
  }
  std::size_t n = 0;
  if (kind_ == Kind::Trapezoid) {
    DenseMatrix t(p_, k_, 0.0);
    for (std::size_t j = 0; j < k_; ++j)
      for (std::size_t i = j; i < p_; ++i) t(i, j) = coords[n++];
    return t;
  }
  DenseMatrix g(p_, p_, 0.0);
  for (std::size_t j = 0; j < k_; ++j)
    for (std::size_t i = j; i < p_; ++i) {
      g(i, j) = coords[n++];
      g(j, i) = g(i, j);
    }
  if (kind_ == Kind::SymmetricHalfRank && k_ < p_) {
    const DenseMatrix g11 = g.block(0, 0, k_, k_);
    const DenseMatrix g21 = g.block(k_, 0, p_ - k_, k_);
    const DenseMatrix x = linalg::lu_solve(linalg::lu_decompose(g11), transpose(g21));
    g.set_block(k_, k_, g21 * x);
  }
  return g;
}

std::vector<double> CoordinateChart::extract(const DenseMatrix& m) const {
  const std::size_t cols = kind_ == Kind::Trapezoid ? k_ : p_;
  if (m.rows() != p_ || m.cols() < k_ || m.cols() != cols) {
    throw ShapeMismatch(name() + ": cannot extract from " + shape_string(m.rows(), m.cols()));
  }
  std::vector<double> out;
  out.reserve(dimension());
  for (std::size_t j = 0; j < k_; ++j)
    for (std::size_t i = j; i < p_; ++i) out.push_back(m(i, j));
  return out;
}

LogJacobian logjac_chol_square(const linalg::LowerTriangular<double>& lambda) {
  const std::size_t p = lambda.dim();
  require_positive_diagonal(lambda.matrix(), p, "logjac_chol_square");
  double s = 0.0;
  for (std::size_t i = 0; i < p; ++i)
    s += std::numbers::ln2 + static_cast<double>(p - i) * std::log(lambda(i, i));
  return {s};
}

LogJacobian logjac_chol_rect(const DenseMatrix& lambda) {
  const std::size_t p = lambda.rows();
  const std::size_t k = std::min(p, lambda.cols());
  require_positive_diagonal(lambda, k, "logjac_chol_rect");
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i)
    s += std::numbers::ln2 + static_cast<double>(p - i) * std::log(lambda(i, i));
  return {s};
}

LogJacobian logjac_left_lower(const linalg::LowerTriangular<double>& l, std::size_t nu) {
  require_positive_diagonal(l.matrix(), l.dim(), "logjac_left_lower");
  double s = 0.0;
  for (std::size_t i = 0; i < l.dim(); ++i)
    s += static_cast<double>(std::min(i + 1, nu)) * std::log(l(i, i));
  return {s};
}

LogJacobian logjac_right_lower(const linalg::LowerTriangular<double>& b, std::size_t p) {
  if (b.dim() > p) throw ShapeMismatch("logjac_right_lower: B larger than P");
  require_positive_diagonal(b.matrix(), b.dim(), "logjac_right_lower");
  double s = 0.0;
  for (std::size_t i = 0; i < b.dim(); ++i) s += static_cast<double>(p - i) * std::log(b(i, i));
  return {s};
}

LogJacobian logjac_congruence(const DenseMatrix& a, double c_lead_logdet, double d_lead_logdet,
                              std::size_t nu, std::size_t p) {
  if (a.rows() != p || a.cols() != p) throw ShapeMismatch("logjac_congruence: A must be P x P");
  const double nud = static_cast<double>(nu);
  return {nud * linalg::log_abs_det(a) +
          (nud - static_cast<double>(p) - 1.0) / 2.0 * (c_lead_logdet - d_lead_logdet)};
}

LogJacobian numeric_logjac(const MatrixMap& transform, const std::vector<double>& point,
                           const CoordinateChart& chart_in, const CoordinateChart& chart_out) {
  const std::size_t n = chart_in.dimension();
  if (chart_out.dimension() != n) {
    throw ShapeMismatch("numeric_logjac: " + chart_in.name() + " and " + chart_out.name() +
                        " differ in dimension");
  }
  DenseMatrix jac(n, n);
  std::vector<double> x = point;
  for (std::size_t k = 0; k < n; ++k) {
    const double h = 1e-5 * (1.0 + std::abs(point[k]));
    x[k] = point[k] + h;
    const auto up = chart_out.extract(transform(chart_in.embed(x)));
    x[k] = point[k] - h;
    const auto down = chart_out.extract(transform(chart_in.embed(x)));
    x[k] = point[k];
    for (std::size_t r = 0; r < n; ++r) jac(r, k) = (up[r] - down[r]) / (2.0 * h);
  }
  double logdet = 0.0;
  try {
    logdet = linalg::log_abs_det(jac);
  } catch (const Singular&) {
    throw SingularJacobian("numeric_logjac: finite-difference Jacobian is singular");
  }
  if (logdet < std::log(1e-250)) {
    throw SingularJacobian("numeric_logjac: |det| below 1e-250");
  }
  return {logdet};
}

ChainTerms chain_terms(const dist::BartlettFactor<double>& t,
                       const dist::ABGWParams<double>& params) {
  const std::size_t p = t.P();
  const std::size_t k = t.nu_tilde();
  ChainTerms c;
  c.log_p_t = dist::log_density_bartlett_factor(t, params.bartlett);
  c.right_lower = logjac_right_lower(params.B, p).value;
  const DenseMatrix tb = t.matrix() * params.B.matrix();
  c.chol_rect = logjac_chol_rect(tb).value;
  // C_lead and D_lead are Gram blocks of square factors; taking their
  // log-dets from the factors avoids squaring the condition number.
  const double c_lead = 2.0 * linalg::log_abs_det(tb.block(0, 0, k, k));
  const double d_lead = 2.0 * linalg::log_abs_det((params.A * tb).block(0, 0, k, k));
  c.congruence = logjac_congruence(params.A, c_lead, d_lead, params.nu, p).value;
  return c;
}

}  // namespace dwpkit::jac
