#include <doctest.h>

#include <numbers>
#include <random>

#include <Eigen/Geometry>

#include "cabinsim/alignment.hpp"

using namespace cabinsim::alignment;

namespace {

Eigen::Matrix3d random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::Quaterniond q(n(rng), n(rng), n(rng), n(rng));
  return q.normalized().toRotationMatrix();
}

RigidTransform random_transform(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-5.0, 5.0);
  return {random_rotation(rng), Eigen::Vector3d(u(rng), u(rng), u(rng))};
}

std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Point3> out;
  for (std::size_t i = 0; i < n; ++i) out.emplace_back(u(rng), u(rng), u(rng));
  return out;
}

PointCorrespondences mapped(const std::vector<Point3>& model, const RigidTransform& t) {
  PointCorrespondences c{model, {}};
  for (const auto& p : model) c.tracked_points.push_back(apply(t, p));
  return c;
}

void check_proper(const Eigen::Matrix3d& r) {
  const Eigen::Matrix3d e = r.transpose() * r - Eigen::Matrix3d::Identity();
  CHECK(e.cwiseAbs().maxCoeff() <= 1e-9);
  CHECK(std::abs(r.determinant() - 1.0) <= 1e-9);
}

}  // namespace

TEST_SUITE("alignment") {
  TEST_CASE("identity correspondences") {
    std::mt19937_64 rng(1);
    const auto pts = random_points(rng, 5);
    const auto r = estimate_rigid({pts, pts});
    CHECK((r.transform.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(r.transform.translation.norm() < 1e-12);
    CHECK(r.report.rms_residual < 1e-12);
    CHECK(r.report.n_points == 5);
  }

  TEST_CASE("90 degrees about z plus translation") {
    const std::vector<Point3> model{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}};
    RigidTransform truth;
    truth.rotation = Eigen::AngleAxisd(std::numbers::pi / 2, Eigen::Vector3d::UnitZ()).toRotationMatrix();
    truth.translation = {1, 2, 3};
    const auto r = estimate_rigid(mapped(model, truth));
    CHECK((r.transform.rotation - truth.rotation).cwiseAbs().maxCoeff() < 1e-12);
    CHECK((r.transform.translation - truth.translation).norm() < 1e-12);
    CHECK(r.report.rms_residual < 1e-12);
    CHECK(r.report.max_residual < 1e-12);
  }

  TEST_CASE("noiseless recovery for any size") {
    std::mt19937_64 rng(2);
    for (std::size_t n : {3u, 4u, 7u, 50u}) {
      for (int trial = 0; trial < 50; ++trial) {
        const auto pts = random_points(rng, n);
        const auto r = estimate_rigid(mapped(pts, random_transform(rng)));
        CHECK(r.report.rms_residual < 1e-10);
        check_proper(r.transform.rotation);
      }
    }
  }

  TEST_CASE("coplanar points are valid") {
    const std::vector<Point3> model{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {1, 1, 0}};
    std::mt19937_64 rng(3);
    const auto r = estimate_rigid(mapped(model, random_transform(rng)));
    CHECK(r.report.rms_residual < 1e-10);
  }

  TEST_CASE("errors") {
    CHECK_THROWS_AS(estimate_rigid({{{0, 0, 0}, {1, 0, 0}, {0, 1, 0}}, {{0, 0, 0}, {1, 0, 0}}}), CountMismatch);
    CHECK_THROWS_AS(estimate_rigid({{{0, 0, 0}, {1, 0, 0}}, {{0, 0, 0}, {1, 0, 0}}}), DegenerateConfiguration);
    const std::vector<Point3> line{{0, 0, 0}, {1, 1, 1}, {2, 2, 2}, {3, 3, 3}};
    CHECK_THROWS_AS(estimate_rigid({line, line}), DegenerateConfiguration);
  }

  TEST_CASE("reflected tracked points still give a proper rotation") {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 100; ++trial) {
      const auto pts = random_points(rng, 5);
      PointCorrespondences c{pts, {}};
      for (const auto& p : pts) c.tracked_points.emplace_back(-p.x(), p.y(), p.z());
      check_proper(estimate_rigid(c).transform.rotation);
    }
  }

  TEST_CASE("apply, compose and invert") {
    const Point3 p(0.3, -1.2, 2.0);
    CHECK(apply(RigidTransform::identity(), p) == p);
    RigidTransform up;
    up.translation = {0, 0, 1};
    CHECK(apply(up, Point3::Zero()) == Point3(0, 0, 1));

    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 1000; ++trial) {
      const auto a = random_transform(rng);
      const auto b = random_transform(rng);
      CHECK((apply(invert(a), apply(a, p)) - p).norm() < 1e-12);

      const auto ca = compose(a, RigidTransform::identity());
      CHECK((ca.rotation - a.rotation).cwiseAbs().maxCoeff() == 0.0);
      CHECK((ca.translation - a.translation).norm() == 0.0);

      const auto ii = invert(invert(a));
      CHECK((ii.rotation - a.rotation).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((ii.translation - a.translation).norm() < 1e-12);

      const auto id = compose(a, invert(a));
      CHECK((id.rotation - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff() < 1e-9);
      CHECK(id.translation.norm() < 1e-9);

      const auto ab = compose(a, b);
      check_proper(ab.rotation);
      CHECK((apply(ab, p) - apply(a, apply(b, p))).norm() < 1e-12);
    }
  }

  TEST_CASE("rms is invariant under a common rigid transform") {
    std::mt19937_64 rng(6);
    std::normal_distribution<double> noise(0.0, 0.01);
    for (int trial = 0; trial < 200; ++trial) {
      const auto pts = random_points(rng, 6);
      auto c = mapped(pts, random_transform(rng));
      for (auto& q : c.tracked_points) q += Point3(noise(rng), noise(rng), noise(rng));
      const double rms = estimate_rigid(c).report.rms_residual;

      const auto g = random_transform(rng);
      PointCorrespondences moved;
      for (const auto& p : c.model_points) moved.model_points.push_back(apply(g, p));
      for (const auto& q : c.tracked_points) moved.tracked_points.push_back(apply(g, q));
      CHECK(estimate_rigid(moved).report.rms_residual == doctest::Approx(rms).epsilon(1e-9));

      const auto report = estimate_rigid(c).report;
      CHECK(report.rms_residual >= 0.0);
      CHECK(report.rms_residual <= report.max_residual);
    }
  }

  TEST_CASE("duplicate correspondence never raises noiseless rms") {
    std::mt19937_64 rng(8);
    for (int trial = 0; trial < 200; ++trial) {
      auto c = mapped(random_points(rng, 4), random_transform(rng));
      const double before = estimate_rigid(c).report.rms_residual;
      c.model_points.push_back(c.model_points[1]);
      c.tracked_points.push_back(c.tracked_points[1]);
      CHECK(estimate_rigid(c).report.rms_residual <= std::max(before, 1e-12));
    }
  }

  TEST_CASE("rotation angle between") {
    const Eigen::Matrix3d r = Eigen::AngleAxisd(0.3, Eigen::Vector3d::UnitX()).toRotationMatrix();
    CHECK(rotation_angle_between(r, Eigen::Matrix3d::Identity()) == doctest::Approx(0.3).epsilon(1e-12));
    CHECK(rotation_angle_between(r, r) == doctest::Approx(0.0));
  }
}
