#include "focalridge/focal.hpp"

#include "focalridge/errors.hpp"

namespace focalridge {

std::string to_string(FocalKind kind) {
  return kind == FocalKind::Max ? "max" : "sum";
}

FocalKind focal_kind_from_string(const std::string& text) {
  if (text == "max") {
    return FocalKind::Max;
  }
  if (text == "sum") {
    return FocalKind::Sum;
  }
  throw ValidationError("unknown focal kind '" + text + "' (expected 'max' or 'sum')");
}

Eigen::VectorXd apply_focal(const Eigen::MatrixXd& treatments, const FocalSpec& spec) {
  if (treatments.cols() == 0) {
    throw NoTreatmentsError("cannot aggregate a treatment matrix with zero columns");
  }
  if (spec.kind == FocalKind::Max) {
    return treatments.rowwise().maxCoeff();
  }
  return treatments.rowwise().sum();
}

}  // namespace focalridge
