#pragma once

// Log-Jacobian determinants of the matrix maps used to derive the GW family
// densities, and a central-difference oracle over explicit coordinate charts.

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

#include "dwpkit/distributions.hpp"
#include "dwpkit/linalg.hpp"
#include "dwpkit/matrix.hpp"

namespace dwpkit::jac {

struct LogJacobian {
  double value = 0.0;
};

// Coordinates are stacked column by column.
//   trapezoid(P, nu):         T_ij, i >= j, j < min(nu, P)
//   symmetric-half(P):        G_ij, i >= j
//   symmetric-half-rank(P,k): G_ij, i >= j, j < k; the trailing block is
//                             implied by rank k: G22 = G21 G11^-1 G21^T
class CoordinateChart {
 public:
  enum class Kind { Trapezoid, SymmetricHalf, SymmetricHalfRank };

  static CoordinateChart trapezoid(std::size_t p, std::size_t nu);
  static CoordinateChart symmetric_half(std::size_t p);
  static CoordinateChart symmetric_half_rank(std::size_t p, std::size_t rank);

  Kind kind() const { return kind_; }
  std::string name() const;
  std::size_t P() const { return p_; }
  std::size_t columns() const { return k_; }
  std::size_t dimension() const { return k_ * p_ - k_ * (k_ - 1) / 2; }

  DenseMatrix embed(const std::vector<double>& coords) const;
  std::vector<double> extract(const DenseMatrix& m) const;

 private:
  CoordinateChart(Kind kind, std::size_t p, std::size_t k) : kind_(kind), p_(p), k_(k) {}
  Kind kind_;
  std::size_t p_;
  std::size_t k_;
};

using MatrixMap = std::function<DenseMatrix(const DenseMatrix&)>;

// Lambda -> Lambda Lambda^T, square.
LogJacobian logjac_chol_square(const linalg::LowerTriangular<double>& lambda);
// Lambda -> Lambda Lambda^T for a P x nu~ trapezoid, onto the rank-nu~ manifold.
LogJacobian logjac_chol_rect(const DenseMatrix& lambda);
// T -> L T on the trapezoid.
LogJacobian logjac_left_lower(const linalg::LowerTriangular<double>& l, std::size_t nu);
// T -> T B on the trapezoid; B is nu~ x nu~.
LogJacobian logjac_right_lower(const linalg::LowerTriangular<double>& b, std::size_t p);
// C -> A C A^T, given the log-dets of the leading nu~ blocks of C and D = A C A^T.
LogJacobian logjac_congruence(const DenseMatrix& a, double c_lead_logdet, double d_lead_logdet,
                              std::size_t nu, std::size_t p);

LogJacobian numeric_logjac(const MatrixMap& transform, const std::vector<double>& point,
                           const CoordinateChart& chart_in, const CoordinateChart& chart_out);

// Terms of the change of variables T -> G = (A T B)(A T B)^T.
struct ChainTerms {
  double log_p_t = 0.0;      // density of T itself
  double right_lower = 0.0;  // T -> T B
  double chol_rect = 0.0;    // T B -> C = (T B)(T B)^T
  double congruence = 0.0;   // C -> A C A^T
  double log_q_g() const { return log_p_t - right_lower - chol_rect - congruence; }
};

ChainTerms chain_terms(const dist::BartlettFactor<double>& t, const dist::ABGWParams<double>& params);

}  // namespace dwpkit::jac

