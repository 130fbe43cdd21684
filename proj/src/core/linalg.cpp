#include "bilevel/core/linalg.hpp"

#include <cmath>
#include <sstream>

#include "bilevel/core/error.hpp"

namespace bilevel {

double max_asymmetry(const Matrix& H) {
  double worst = 0.0;
  for (Index i = 0; i < H.rows(); ++i)
    for (Index j = i + 1; j < H.cols(); ++j)
      worst = std::max(worst, std::abs(H(i, j) - H(j, i)));
  return worst;
}

Vector spd_solve_oracle(const Matrix& H, const Vector& b) {
  if (H.rows() != H.cols() || H.rows() != b.size())
    throw NumericalError("spd_solve_oracle: dimension mismatch");
  const double scale = std::max(1.0, H.cwiseAbs().maxCoeff());
  const double asym = max_asymmetry(H);
  if (asym > 1e-12 * scale) {
    std::ostringstream msg;
    msg << "spd_solve_oracle: matrix not symmetric (asymmetry " << asym << ")";
    throw NumericalError(msg.str());
  }

  // Plain right-looking Cholesky so the failing pivot can be reported.
  const Index n = H.rows();
  Matrix L = Matrix::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    double pivot = H(j, j) - L.row(j).head(j).squaredNorm();
    if (!(pivot > 0.0)) {
      std::ostringstream msg;
      msg << "spd_solve_oracle: matrix not positive definite (pivot " << j
          << " = " << pivot << ")";
      throw NumericalError(msg.str());
    }
    L(j, j) = std::sqrt(pivot);
    for (Index i = j + 1; i < n; ++i)
      L(i, j) = (H(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / L(j, j);
  }
  Vector y = L.triangularView<Eigen::Lower>().solve(b);
  return L.transpose().triangularView<Eigen::Upper>().solve(y);
}

Matrix random_spd(Rng& rng, const Vector& eigenvalues) {
  const Index n = eigenvalues.size();
  const Matrix G = rng.normal_matrix(n, n);
  Eigen::HouseholderQR<Matrix> qr(G);
  Matrix Q = qr.householderQ() * Matrix::Identity(n, n);
  // Sign fix makes Q Haar-distributed.
  const Matrix R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j)
    if (R(j, j) < 0.0) Q.col(j) *= -1.0;
  Matrix H = Q * eigenvalues.asDiagonal() * Q.transpose();
  return 0.5 * (H + H.transpose());
}

}  // namespace bilevel
