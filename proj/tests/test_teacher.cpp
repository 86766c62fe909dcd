#include <doctest.h>

#include "nelf/dataset.hpp"
#include "nelf/teacher.hpp"
#include "test_util.hpp"

using namespace nelf;

namespace {

SceneParams micro_scene() {
  SceneParams s;
  s.d_e = 4;
  return s;
}

}  // namespace

TEST_SUITE("teacher") {

TEST_CASE("surface radius stays within [0.2, 0.9] for bounded codes") {
  SceneParams scene = micro_scene();
  Rng rng(3);
  for (int i = 0; i < 500; ++i) {
    Vector e(4);
    for (int k = 0; k < 4; ++k) e(k) = rng.uniform(-1, 1);
    const double theta = rng.uniform(0, M_PI);
    const double phi = rng.uniform(-M_PI, M_PI);
    const double r = surface_radius(scene, e, theta, phi);
    CHECK(r >= 0.2);
    CHECK(r <= 0.9);
  }
}

TEST_CASE("ray pointing away from the scene renders black") {
  SceneParams scene = micro_scene();
  Vector e = Vector::Zero(4);
  Ray ray;
  ray.origin = Vec3(0, 0, 2.5);
  ray.direction = Vec3(0, 0, 1);  // away from the origin
  CHECK(!intersect_scene(scene, e, ray, std::nullopt).has_value());

  CameraPose cam = make_orbit_camera(2.5, 0.0, 0.0, 8, 8);
  cam.origin = Vec3(0, 0, 10.0);  // scene entirely behind the far plane
  Image img = teacher_render(scene, e, cam, std::nullopt);
  for (float v : img.data) CHECK(v == 0.0f);
}

TEST_CASE("center-ray hit depth matches the closed-form sphere intersection") {
  SceneParams scene = micro_scene();
  Vector e = Vector::Zero(4);  // base sphere of radius 0.5
  for (double d : {1.8, 2.5, 3.2}) {
    Ray ray;
    ray.origin = Vec3(0, 0, d);
    ray.direction = Vec3(0, 0, -1);
    auto t = intersect_scene(scene, e, ray, std::nullopt);
    REQUIRE(t.has_value());
    CHECK(std::abs(*t - (d - 0.5)) < 1e-9);
  }
}

TEST_CASE("teacher render is a pure function") {
  SceneParams scene = micro_scene();
  Vector e(4);
  e << 0.3, -0.6, 0.2, 0.8;
  CameraPose cam = make_orbit_camera(2.5, 0.4, 0.1, 8, 8);
  Image a = teacher_render(scene, e, cam, std::nullopt);
  Image b = teacher_render(scene, e, cam, std::nullopt);
  CHECK(a.data == b.data);
}

TEST_CASE("mirror-symmetric code renders the mirrored image of the mirrored camera") {
  SceneParams scene = micro_scene();
  // Only phi-even basis components active (even indices).
  Vector e(4);
  e << 0.7, 0.0, -0.5, 0.0;

  const int n = 16;
  CameraPose cam = make_orbit_camera(2.4, 0.5, 0.2, n, n);
  Image img = teacher_render(scene, e, cam, std::nullopt);

  // Mirror the world about the y=0 plane: M = diag(1,-1,1). The mirrored
  // camera is R' = M R diag(-1,1,1), o' = M o, and its image must equal the
  // horizontal flip of the original.
  Mat3 m = Mat3::Identity();
  m(1, 1) = -1.0;
  Mat3 flip_x = Mat3::Identity();
  flip_x(0, 0) = -1.0;
  CameraPose mirrored = cam;
  mirrored.origin = m * cam.origin;
  mirrored.rotation = m * cam.rotation * flip_x;
  Image img_m = teacher_render(scene, e, mirrored, std::nullopt);

  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x)
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(img_m.at(y, x, c) - img.at(y, n - 1 - x, c)) < 1e-6);
}

TEST_CASE("expression code deforms the surface") {
  SceneParams scene = micro_scene();
  Vector e0 = Vector::Zero(4);
  Vector e1(4);
  e1 << 0.9, -0.9, 0.5, 0.3;
  CameraPose cam = make_orbit_camera(2.5, 0.0, 0.0, 16, 16);
  Image a = teacher_render(scene, e0, cam, std::nullopt);
  Image b = teacher_render(scene, e1, cam, std::nullopt);
  double diff = 0;
  for (size_t i = 0; i < a.data.size(); ++i)
    diff = std::max(diff, std::abs(static_cast<double>(a.data[i]) - b.data[i]));
  CHECK(diff > 0.05);
}

TEST_CASE("shoulder part appears below the head and follows its rotation") {
  SceneParams scene = micro_scene();
  scene.shoulder = true;
  Vector e = Vector::Zero(4);
  CameraPose cam = make_orbit_camera(2.5, 0.0, 0.0, 24, 24);
  Image base = teacher_render(scene, e, cam, Mat3(Mat3::Identity()));

  // Lower half of the image contains shoulder pixels.
  double lower = 0;
  for (int y = 16; y < 24; ++y)
    for (int x = 0; x < 24; ++x) lower += base.at(y, x, 0);
  CHECK(lower > 0.0);

  Mat3 turned = rodrigues(Vec3(0, 12.0 * M_PI / 180.0, 0));
  Image rot = teacher_render(scene, e, cam, turned);
  double diff = 0;
  for (size_t i = 0; i < base.data.size(); ++i)
    diff += std::abs(static_cast<double>(base.data[i]) - rot.data[i]);
  CHECK(diff > 0.1);

  // Head pixels (upper half) are unaffected by the shoulder rotation.
  double head_diff = 0;
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 24; ++x)
      for (int c = 0; c < 3; ++c)
        head_diff = std::max(head_diff, std::abs(static_cast<double>(base.at(y, x, c)) -
                                                 rot.at(y, x, c)));
  CHECK(head_diff < 1e-6);
}

}  // TEST_SUITE
