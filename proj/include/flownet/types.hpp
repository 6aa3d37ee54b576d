#ifndef FLOWNET_TYPES_HPP
#define FLOWNET_TYPES_HPP

#include <Eigen/Dense>

#include <limits>
#include <stdexcept>
#include <string>

namespace flownet {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using IntMat = Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic>;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Invalid user-supplied configuration (bad scenario file, inconsistent
/// dimensions, bounds with lower > upper, ...). Maps to exit status 2
/// when raised during parsing and 1 otherwise.
class ConfigError : public std::runtime_error {
 public:
  explicit ConfigError(const std::string& msg) : std::runtime_error(msg) {}
};

/// A numerical routine could not produce a trustworthy result
/// (non-finite state, inconsistent KKT system, LP cycling guard).
/// Maps to exit status 3.
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
};

}  // namespace flownet

#endif
