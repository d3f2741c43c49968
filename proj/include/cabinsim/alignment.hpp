#pragma once

#include <vector>

#include <Eigen/Core>

#include "cabinsim/error.hpp"

namespace cabinsim {

// Rigid registration of the cabin model frame onto the tracking frame.
namespace alignment {

using Point3 = Eigen::Vector3d;

struct PointCorrespondences {
  std::vector<Point3> model_points;    // m, cabin-model frame
  std::vector<Point3> tracked_points;  // m, tracking frame
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
};

struct AlignmentReport {
  double rms_residual = 0.0;  // m
  double max_residual = 0.0;  // m
  std::size_t n_points = 0;
};

struct AlignmentResult {
  RigidTransform transform;
  AlignmentReport report;
};

// Required registration precision, m.
inline constexpr double kPrecisionThreshold = 0.01;

// Model points are collinear when the second singular value of the centered
// point matrix is below this fraction of the first.
inline constexpr double kCollinearityRatio = 1e-6;

class AlignmentError : public Error {
 public:
  using Error::Error;
};

class CountMismatch : public AlignmentError {
 public:
  using AlignmentError::AlignmentError;
};

// Fewer than three points, or collinear model points (rotation about the
// line is unobservable).
class DegenerateConfiguration : public AlignmentError {
 public:
  using AlignmentError::AlignmentError;
};

// Least-squares rotation + translation (no scale) mapping model points onto
// tracked points. The rotation is always proper.
AlignmentResult estimate_rigid(const PointCorrespondences& corr);

Point3 apply(const RigidTransform& transform, const Point3& p);

// compose(a, b) maps p to a(b(p)).
RigidTransform compose(const RigidTransform& a, const RigidTransform& b);
RigidTransform invert(const RigidTransform& transform);

AlignmentReport residuals(const RigidTransform& transform, const PointCorrespondences& corr);

// Angle of the relative rotation between two rotation matrices, rad.
double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b);

}  // namespace alignment
}  // namespace cabinsim
