#include "cabinsim/alignment.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/LU>
#include <Eigen/SVD>

namespace cabinsim::alignment {

namespace {

Point3 centroid(const std::vector<Point3>& points) {
  Point3 sum = Point3::Zero();
  for (const auto& p : points) sum += p;
  return sum / static_cast<double>(points.size());
}

}  // namespace

AlignmentResult estimate_rigid(const PointCorrespondences& corr) {
  const std::size_t n = corr.model_points.size();
  if (n != corr.tracked_points.size()) {
    throw CountMismatch("model has " + std::to_string(n) + " points but tracked has " +
                        std::to_string(corr.tracked_points.size()));
  }
  if (n < 3) throw DegenerateConfiguration("at least 3 correspondences are required");

  const Point3 model_c = centroid(corr.model_points);
  const Point3 tracked_c = centroid(corr.tracked_points);

  Eigen::MatrixXd centered(n, 3);
  for (std::size_t i = 0; i < n; ++i) {
    centered.row(static_cast<Eigen::Index>(i)) = (corr.model_points[i] - model_c).transpose();
  }
  const Eigen::JacobiSVD<Eigen::MatrixXd> spread(centered);
  const auto& sv = spread.singularValues();
  if (!(sv(0) > 0.0) || sv(1) < kCollinearityRatio * sv(0)) {
    throw DegenerateConfiguration("model points are collinear");
  }

  Eigen::Matrix3d cross = Eigen::Matrix3d::Zero();
  for (std::size_t i = 0; i < n; ++i) {
    cross += (corr.model_points[i] - model_c) * (corr.tracked_points[i] - tracked_c).transpose();
  }
  const Eigen::JacobiSVD<Eigen::Matrix3d> svd(cross, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Matrix3d& u = svd.matrixU();
  const Eigen::Matrix3d& v = svd.matrixV();

  // Reflection guard: flip the weakest axis when V*U^T is improper.
  Eigen::Matrix3d d = Eigen::Matrix3d::Identity();
  d(2, 2) = (v * u.transpose()).determinant() < 0.0 ? -1.0 : 1.0;

  AlignmentResult result;
  result.transform.rotation = v * d * u.transpose();
  result.transform.translation = tracked_c - result.transform.rotation * model_c;
  result.report = residuals(result.transform, corr);
  return result;
}

AlignmentReport residuals(const RigidTransform& transform, const PointCorrespondences& corr) {
  AlignmentReport report;
  report.n_points = corr.model_points.size();
  if (report.n_points == 0) return report;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < report.n_points; ++i) {
    const double r = (apply(transform, corr.model_points[i]) - corr.tracked_points[i]).norm();
    sum_sq += r * r;
    report.max_residual = std::max(report.max_residual, r);
  }
  report.rms_residual = std::sqrt(sum_sq / static_cast<double>(report.n_points));
  report.rms_residual = std::min(report.rms_residual, report.max_residual);
  return report;
}

Point3 apply(const RigidTransform& transform, const Point3& p) {
  return transform.rotation * p + transform.translation;
}

RigidTransform compose(const RigidTransform& a, const RigidTransform& b) {
  return {a.rotation * b.rotation, a.rotation * b.translation + a.translation};
}

RigidTransform invert(const RigidTransform& transform) {
  const Eigen::Matrix3d rt = transform.rotation.transpose();
  return {rt, -(rt * transform.translation)};
}

double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const Eigen::Matrix3d rel = a * b.transpose();
  const double c = std::clamp((rel.trace() - 1.0) / 2.0, -1.0, 1.0);
  return std::acos(c);
}

}  // namespace cabinsim::alignment
