#include <doctest.h>

#include <random>
#include <set>

#include "ovo/geometry.hpp"
#include "ovo/io.hpp"
#include "oracles.hpp"

using namespace ovo;

namespace {

CameraModel identity_camera(double fx, double fy, double cx, double cy, int w, int h) {
  return CameraModel(fx, fy, cx, cy, Eigen::Matrix4d::Identity(), w, h);
}

}  // namespace

TEST_CASE("voxel_center basics") {
  VoxelGrid unit(Eigen::Vector3i(4, 4, 4), Eigen::Vector3d::Zero(), 1.0);
  CHECK(voxel_center({0, 0, 0}, unit) == Eigen::Vector3d(0.5, 0.5, 0.5));

  VoxelGrid half(Eigen::Vector3i(4, 4, 4), Eigen::Vector3d::Zero(), 0.5);
  CHECK(voxel_center({2, 0, 0}, half) == Eigen::Vector3d(1.25, 0.25, 0.25));

  VoxelGrid offset(Eigen::Vector3i(2, 2, 2), Eigen::Vector3d(-1, -1, -1), 2.0);
  CHECK(voxel_center({1, 1, 1}, offset) == Eigen::Vector3d(2, 2, 2));

  CHECK_THROWS_WITH_AS(voxel_center({4, 0, 0}, unit), "index outside grid",
                       std::invalid_argument);
}

TEST_CASE("voxel_center stays strictly inside its cell") {
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<int> dim(1, 9);
  std::uniform_real_distribution<double> off(-4.0, 4.0);
  std::uniform_real_distribution<double> size(0.05, 2.5);
  for (int trial = 0; trial < 50; ++trial) {
    VoxelGrid grid(Eigen::Vector3i(dim(rng), dim(rng), dim(rng)),
                   Eigen::Vector3d(off(rng), off(rng), off(rng)), size(rng));
    std::uniform_int_distribution<int> ix(0, grid.dims.x() - 1);
    std::uniform_int_distribution<int> iy(0, grid.dims.y() - 1);
    std::uniform_int_distribution<int> iz(0, grid.dims.z() - 1);
    const Eigen::Vector3i idx(ix(rng), iy(rng), iz(rng));
    const Eigen::Vector3d c = voxel_center(idx, grid);
    const Eigen::Vector3d lo = grid.origin + grid.voxel_size * idx.cast<double>();
    for (int k = 0; k < 3; ++k) {
      CHECK(c[k] > lo[k]);
      CHECK(c[k] < lo[k] + grid.voxel_size);
    }
  }
}

TEST_CASE("project pinhole arithmetic") {
  const CameraModel cam = identity_camera(100, 100, 50, 50, 100, 100);

  SUBCASE("optical axis hits the principal point") {
    const Projection p = project({0, 0, 2}, cam);
    CHECK(p.in_front);
    CHECK(p.u == doctest::Approx(50.0));
    CHECK(p.v == doctest::Approx(50.0));
    CHECK(p.depth == doctest::Approx(2.0));
  }
  SUBCASE("hand pinhole arithmetic") {
    const Projection p = project({0.5, -0.25, 2.0}, cam);
    CHECK(p.u == doctest::Approx(75.0));
    CHECK(p.v == doctest::Approx(37.5));
    CHECK(p.depth == doctest::Approx(2.0));
  }
  SUBCASE("behind-camera is an outcome, not an error") {
    const Projection p = project({0, 0, -1}, cam);
    CHECK_FALSE(p.in_front);
    CHECK(p.depth == doctest::Approx(-1.0));
  }
  SUBCASE("degenerate depth throws") {
    CHECK_THROWS_WITH_AS(project({0, 0, 1e-13}, cam), "degenerate depth",
                         std::invalid_argument);
  }
}

TEST_CASE("project is linear in fx exactly") {
  const CameraModel cam = identity_camera(120, 90, 32, 24, 64, 48);
  const Eigen::Vector3d point(0.7, -0.3, 3.1);
  const Projection base = project(point, cam);
  const double eps = 0.5;
  CameraModel bumped = cam;
  bumped.fx += eps;
  const Projection moved = project(point, bumped);
  // u = fx * x/z + cx, so du = eps * x/z up to the last ulp of the sum.
  CHECK(moved.u - base.u ==
        doctest::Approx(eps * point.x() / point.z()).epsilon(1e-12));
  CHECK(moved.v == base.v);
}

TEST_CASE("camera validation") {
  Eigen::Matrix4d bad = Eigen::Matrix4d::Identity();
  bad(0, 0) = 1.5;  // not orthonormal
  CHECK_THROWS_AS(CameraModel(100, 100, 50, 50, bad, 64, 64), std::invalid_argument);
  CHECK_THROWS_AS(identity_camera(-1, 100, 50, 50, 64, 64), std::invalid_argument);
  Eigen::Matrix4d last = Eigen::Matrix4d::Identity();
  last(3, 0) = 0.1;
  CHECK_THROWS_AS(CameraModel(100, 100, 50, 50, last, 64, 64), std::invalid_argument);
}

TEST_CASE("ray requires unit direction") {
  CHECK_THROWS_AS(Ray({0, 0, 0}, {0, 0, 2}), std::invalid_argument);
  CHECK_NOTHROW(Ray({0, 0, 0}, {0, 0, 1}));
}

TEST_CASE("traverse_ray axis-aligned walk") {
  VoxelGrid grid(Eigen::Vector3i(8, 8, 8), Eigen::Vector3d::Zero(), 1.0);
  const auto cells = traverse_ray({0.5, 0.5, 0.5}, {5.5, 0.5, 0.5}, grid);
  REQUIRE(cells.size() == 6);
  for (int i = 0; i < 6; ++i) {
    CHECK(cells[static_cast<std::size_t>(i)] == Eigen::Vector3i(i, 0, 0));
  }
}

TEST_CASE("traverse_ray single-voxel segment") {
  VoxelGrid grid(Eigen::Vector3i(4, 4, 4), Eigen::Vector3d::Zero(), 1.0);
  const auto cells = traverse_ray({1.2, 1.2, 1.2}, {1.8, 1.7, 1.3}, grid);
  REQUIRE(cells.size() == 1);
  CHECK(cells[0] == Eigen::Vector3i(1, 1, 1));
}

TEST_CASE("traverse_ray rejects zero-length segments") {
  VoxelGrid grid(Eigen::Vector3i(4, 4, 4), Eigen::Vector3d::Zero(), 1.0);
  CHECK_THROWS_WITH_AS(traverse_ray({1, 1, 1}, {1, 1, 1}, grid), "degenerate ray",
                       std::invalid_argument);
}

TEST_CASE("traverse_ray matches the fine-sampling oracle on random rays") {
  std::mt19937_64 rng(20240817);
  std::uniform_int_distribution<int> dim(2, 16);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (int trial = 0; trial < 200; ++trial) {
    VoxelGrid grid(Eigen::Vector3i(dim(rng), dim(rng), dim(rng)),
                   Eigen::Vector3d(unit(rng) - 0.5, unit(rng) - 0.5, unit(rng) - 0.5),
                   0.25 + unit(rng));
    const Eigen::Vector3d lo = grid.min_corner();
    const Eigen::Vector3d ext = grid.max_corner() - lo;
    // Endpoints anywhere in a box 1.5x the grid, so rays enter and leave.
    const auto sample_point = [&]() {
      return Eigen::Vector3d(lo.x() + ext.x() * (1.5 * unit(rng) - 0.25),
                             lo.y() + ext.y() * (1.5 * unit(rng) - 0.25),
                             lo.z() + ext.z() * (1.5 * unit(rng) - 0.25));
    };
    const Eigen::Vector3d a = sample_point();
    const Eigen::Vector3d b = sample_point();
    if ((b - a).norm() < 1e-9) {
      continue;
    }
    const auto walked = traverse_ray(a, b, grid);

    // Exact brute-force enumeration must match the walk cell for cell.
    const auto exact = oracles::crossing_ray_voxels(a, b, grid);
    REQUIRE(walked.size() == exact.size());
    for (std::size_t i = 0; i < walked.size(); ++i) {
      CHECK(walked[i] == exact[i]);
    }

    // 1000-point fine sampling sees an ordered subsequence of the walk: it
    // can skip a corner sliver but never visit a cell the walk missed.
    const auto sampled = oracles::sampled_ray_voxels(a, b, grid, 1000);
    std::size_t w = 0;
    for (const auto& cell : sampled) {
      while (w < walked.size() && walked[w] != cell) {
        ++w;
      }
      REQUIRE(w < walked.size());
      ++w;
    }
  }
}

TEST_CASE("traversal output is duplicate-free with unit steps") {
  std::mt19937_64 rng(99);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  VoxelGrid grid(Eigen::Vector3i(12, 9, 7), Eigen::Vector3d::Zero(), 0.5);
  for (int trial = 0; trial < 100; ++trial) {
    const Eigen::Vector3d a(6.0 * unit(rng) - 1.0, 4.5 * unit(rng) - 1.0,
                            3.5 * unit(rng) - 1.0);
    const Eigen::Vector3d b(6.0 * unit(rng) - 1.0, 4.5 * unit(rng) - 1.0,
                            3.5 * unit(rng) - 1.0);
    if ((b - a).norm() < 1e-9) {
      continue;
    }
    const auto cells = traverse_ray(a, b, grid);
    std::set<std::int64_t> seen;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      CHECK(seen.insert(grid.linear_index(cells[i])).second);
      if (i > 0) {
        CHECK((cells[i] - cells[i - 1]).cwiseAbs().sum() == 1);
      }
    }
  }
}

TEST_CASE("camera and grid JSON round-trips are exact") {
  VoxelGrid grid(Eigen::Vector3i(24, 16, 24), Eigen::Vector3d(0.125, -3.5, 2.0), 0.2);
  const VoxelGrid grid2 = grid_from_json(grid_to_json(grid));
  CHECK(grid2.dims == grid.dims);
  CHECK(grid2.origin == grid.origin);
  CHECK(grid2.voxel_size == grid.voxel_size);

  Eigen::Matrix4d ext = Eigen::Matrix4d::Identity();
  ext.topLeftCorner<3, 3>() =
      Eigen::AngleAxisd(0.3, Eigen::Vector3d(1, 2, 3).normalized()).toRotationMatrix();
  ext.topRightCorner<3, 1>() = Eigen::Vector3d(0.1, 0.2, -0.3);
  const CameraModel cam(123.25, 119.5, 31.75, 23.5, ext, 64, 48);
  const CameraModel cam2 = camera_from_json(camera_to_json(cam));
  CHECK(cam2.extrinsics == cam.extrinsics);
  CHECK(cam2.fx == cam.fx);
  CHECK(cam2.image_height == cam.image_height);
}
