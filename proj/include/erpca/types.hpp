#ifndef ERPCA_TYPES_HPP
#define ERPCA_TYPES_HPP

#include <Eigen/Dense>

namespace erpca {

using Index = Eigen::Index;

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;

template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using MatrixXd = Matrix<double>;
using VectorXd = Vector<double>;

inline constexpr const char* kVersion = "0.1.0";

}  // namespace erpca

#endif  // ERPCA_TYPES_HPP
