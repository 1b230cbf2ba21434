#include <lodom/optimizer.hpp>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

namespace lodom {

double condition_number(const Mat6& H) {
  if (!H.allFinite()) {
    return std::numeric_limits<double>::infinity();
  }
  Eigen::SelfAdjointEigenSolver<Mat6> eig(H, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = eig.eigenvalues()(5);
  if (!(lo > 0.0)) {
    return std::numeric_limits<double>::infinity();
  }
  return hi / lo;
}

bool solve_damped(const Mat6& H, const Vec6& b, double lambda, Vec6& x) {
  Mat6 A = H;
  A.diagonal().array() += lambda;
  Eigen::LDLT<Mat6> ldlt(A);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive()) {
    return false;
  }
  x = ldlt.solve(-b);
  return ldlt.info() == Eigen::Success;
}

double make_positive_definite(Mat6& H) {
  Eigen::SelfAdjointEigenSolver<Mat6> eig(H, Eigen::EigenvaluesOnly);
  const double lo = eig.eigenvalues()(0);
  const double hi = std::max(eig.eigenvalues()(5), 1e-12);
  const double floor = 1e-6 * hi;
  if (lo >= floor) {
    return 0.0;
  }
  const double shift = floor - lo;
  H.diagonal().array() += shift;
  return shift;
}

}  // namespace lodom
