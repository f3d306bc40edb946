#pragma once

#include <Eigen/Dense>
#include <string>

namespace focalridge {

// How the K sub-treatments aggregate into the single focal column D':
// Max means "any sub-treatment active", Sum means "number of active
// sub-treatments".
enum class FocalKind { Max, Sum };

struct FocalSpec {
  FocalKind kind = FocalKind::Max;
};

std::string to_string(FocalKind kind);
FocalKind focal_kind_from_string(const std::string& text);  // "max" | "sum"

// Row-wise aggregate of a validated binary treatment matrix.
Eigen::VectorXd apply_focal(const Eigen::MatrixXd& treatments, const FocalSpec& spec);

}  // namespace focalridge
