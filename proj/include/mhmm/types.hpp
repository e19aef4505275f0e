#pragma once

#include <complex>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace mhmm {

using cplx = std::complex<double>;

using Vec3 = Eigen::Vector3d;
using CVec3 = Eigen::Vector3cd;
using Mat3 = Eigen::Matrix3d;
using CMat3 = Eigen::Matrix3cd;

/// Failure categories surfaced to callers and to the CLI error record.
enum class ErrorKind {
  invalid_argument,
  out_of_domain,
  degenerate_element,
  singular_matrix,
  resolution_guard,
  dimension_guard,
  non_nested,
  config,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::invalid_argument: return "invalid_argument";
    case ErrorKind::out_of_domain: return "out_of_domain";
    case ErrorKind::degenerate_element: return "degenerate_element";
    case ErrorKind::singular_matrix: return "singular_matrix";
    case ErrorKind::resolution_guard: return "resolution_guard";
    case ErrorKind::dimension_guard: return "dimension_guard";
    case ErrorKind::non_nested: return "non_nested";
    case ErrorKind::config: return "config";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Cross product of a complex and a real vector.
inline CVec3 cross(const CVec3& a, const Vec3& b) {
  return {a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]};
}

inline double norm2(const CVec3& v) { return v.squaredNorm(); }

}  // namespace mhmm
