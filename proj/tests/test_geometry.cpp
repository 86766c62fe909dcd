#include <doctest.h>

#include "nelf/geometry.hpp"
#include "nelf/rng.hpp"
#include "test_util.hpp"

using namespace nelf;

namespace {

CameraPose random_camera(Rng& rng, int w, int h) {
  CameraPose cam;
  cam.origin = Vec3(rng.uniform(-2, 2), rng.uniform(-2, 2), rng.uniform(1, 3));
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const double angle = rng.uniform(0, 3.0);
  // Rodrigues by hand, independent of the library helper.
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  cam.rotation = Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;
  cam.focal = rng.uniform(20, 80);
  cam.cx = w / 2.0 + rng.uniform(-1, 1);
  cam.cy = h / 2.0 + rng.uniform(-1, 1);
  cam.width = w;
  cam.height = h;
  return cam;
}

}  // namespace

TEST_SUITE("geometry") {

TEST_CASE("center ray of an identity pose points down -z") {
  CameraPose cam;
  cam.focal = 10;
  cam.cx = 1.5;
  cam.cy = 1.5;
  cam.width = 3;
  cam.height = 3;
  auto rays = generate_rays(cam);
  const Ray& center = rays[1 * 3 + 1];  // pixel (1,1) center = principal point
  CHECK(center.direction.x() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(center.direction.y() == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(center.direction.z() == doctest::Approx(-1.0).epsilon(1e-12));
}

TEST_CASE("2x2 rays are mirror symmetric about a centered principal point") {
  CameraPose cam;
  cam.focal = 5;
  cam.cx = 1.0;
  cam.cy = 1.0;
  cam.width = 2;
  cam.height = 2;
  auto rays = generate_rays(cam);
  CHECK(rays[0].direction.x() == doctest::Approx(-rays[1].direction.x()));
  CHECK(rays[0].direction.y() == doctest::Approx(rays[1].direction.y()));
  CHECK(rays[0].direction.y() == doctest::Approx(-rays[2].direction.y()));
  CHECK(rays[0].direction.z() == doctest::Approx(rays[3].direction.z()));
}

TEST_CASE("generated rays match a per-pixel scalar loop oracle") {
  Rng rng(7);
  for (int trial = 0; trial < 5; ++trial) {
    CameraPose cam = random_camera(rng, 5, 4);
    auto rays = generate_rays(cam);
    REQUIRE(rays.size() == 20);
    for (int v = 0; v < cam.height; ++v) {
      for (int u = 0; u < cam.width; ++u) {
        const double dx = (u + 0.5 - cam.cx) / cam.focal;
        const double dy = (cam.cy - (v + 0.5)) / cam.focal;
        Vec3 d_cam(dx, dy, -1.0);
        d_cam.normalize();
        const Vec3 expect = cam.rotation * d_cam;
        const Ray& r = rays[v * cam.width + u];
        CHECK((r.direction - expect).norm() < 1e-12);
        CHECK((r.origin - cam.origin).norm() == 0.0);
        CHECK(std::abs(r.direction.norm() - 1.0) < 1e-9);
      }
    }
  }
}

TEST_CASE("non-orthonormal rotation is rejected") {
  CameraPose cam;
  cam.rotation(0, 0) = 2.0;
  CHECK_THROWS_AS(generate_rays(cam), ValidationError);
  // Relaxed tolerance admits it.
  CHECK_NOTHROW(generate_rays(cam, 10.0));
}

TEST_CASE("point_concat samples endpoints inclusively") {
  Ray ray;
  ray.origin = Vec3(0, 0, 0);
  ray.direction = Vec3(0, 0, 1);
  RayRepConfig cfg;
  cfg.k_samples = 3;
  cfg.near = 2;
  cfg.far = 6;
  auto v = point_concat(ray, cfg);
  const std::vector<double> expect = {0, 0, 2, 0, 0, 4, 0, 0, 6};
  REQUIRE(v.size() == expect.size());
  for (size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(expect[i]));
}

TEST_CASE("point_concat K=2 yields exactly the near and far points") {
  Rng rng(3);
  Ray ray;
  ray.origin = Vec3(rng.normal(), rng.normal(), rng.normal());
  ray.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  RayRepConfig cfg;
  cfg.k_samples = 2;
  cfg.near = 0.5;
  cfg.far = 2.5;
  auto v = point_concat(ray, cfg);
  const Vec3 p0 = ray.origin + cfg.near * ray.direction;
  const Vec3 p1 = ray.origin + cfg.far * ray.direction;
  CHECK(Vec3(v[0], v[1], v[2]).isApprox(p0, 1e-15));
  CHECK(Vec3(v[3], v[4], v[5]).isApprox(p1, 1e-15));
}

TEST_CASE("point_concat matches an independent loop oracle at K=16") {
  Rng rng(11);
  Ray ray;
  ray.origin = Vec3(rng.normal(), rng.normal(), rng.normal());
  ray.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  RayRepConfig cfg;
  cfg.k_samples = 16;
  cfg.near = 0.7;
  cfg.far = 3.9;
  auto v = point_concat(ray, cfg);
  for (int i = 0; i < 16; ++i) {
    const double t = cfg.near + (cfg.far - cfg.near) * i / 15.0;
    const Vec3 p = ray.origin + t * ray.direction;
    for (int c = 0; c < 3; ++c) CHECK(std::abs(v[3 * i + c] - p(c)) < 1e-12);
  }
}

TEST_CASE("point_concat validates its config") {
  Ray ray;
  RayRepConfig cfg;
  cfg.k_samples = 1;
  CHECK_THROWS_AS(point_concat(ray, cfg), ValidationError);
  cfg.k_samples = 4;
  cfg.near = 2.0;
  cfg.far = 1.0;
  CHECK_THROWS_AS(point_concat(ray, cfg), ValidationError);
}

TEST_CASE("consecutive sample spacing is uniform") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    Ray ray;
    ray.origin = Vec3(rng.normal(), rng.normal(), rng.normal());
    ray.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
    RayRepConfig cfg;
    cfg.k_samples = 2 + static_cast<int>(rng.uniform_index(12));
    cfg.near = rng.uniform(0.2, 1.0);
    cfg.far = cfg.near + rng.uniform(0.5, 3.0);
    auto v = point_concat(ray, cfg);
    const double expect = (cfg.far - cfg.near) / (cfg.k_samples - 1);
    for (int i = 0; i + 1 < cfg.k_samples; ++i) {
      const Vec3 a(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
      const Vec3 b(v[3 * i + 3], v[3 * i + 4], v[3 * i + 5]);
      CHECK(std::abs((b - a).norm() - expect) < 1e-9);
    }
  }
}

TEST_CASE("positional encoding of zero") {
  auto v = positional_encode({0.0}, 2, true);
  const std::vector<double> expect = {0, 0, 1, 0, 1};
  REQUIRE(v.size() == expect.size());
  for (size_t i = 0; i < v.size(); ++i) CHECK(v[i] == doctest::Approx(expect[i]));
}

TEST_CASE("positional encoding of pi/2") {
  auto v = positional_encode({M_PI / 2}, 1, true);
  REQUIRE(v.size() == 3);
  CHECK(std::abs(v[0] - M_PI / 2) < 1e-12);
  CHECK(std::abs(v[1] - 1.0) < 1e-12);
  CHECK(std::abs(v[2]) < 1e-12);
}

TEST_CASE("positional encoding matches the scalar oracle and stays bounded") {
  Rng rng(13);
  std::vector<double> in(6);
  for (auto& x : in) x = rng.uniform(-4, 4);
  for (bool include : {true, false}) {
    auto got = positional_encode(in, 4, include);
    auto expect = testutil::pe_oracle(in, 4, include);
    REQUIRE(got.size() == expect.size());
    REQUIRE(got.size() == in.size() * (2 * 4 + (include ? 1 : 0)));
    for (size_t i = 0; i < got.size(); ++i) {
      CHECK(std::abs(got[i] - expect[i]) < 1e-12);
    }
    // every sin/cos entry within [-1, 1]
    const int per = 2 * 4 + (include ? 1 : 0);
    for (size_t i = 0; i < got.size(); ++i)
      if (!include || static_cast<int>(i % per) != 0) {
        CHECK(got[i] >= -1.0);
        CHECK(got[i] <= 1.0);
      }
  }
}

TEST_CASE("positional encoding backward matches finite differences") {
  Rng rng(17);
  std::vector<double> in(4);
  for (auto& x : in) x = rng.uniform(-2, 2);
  const int freqs = 3;
  const int out_dim = 4 * (2 * freqs + 1);
  std::vector<double> d_enc(out_dim);
  for (auto& g : d_enc) g = rng.normal();

  std::vector<double> d_in(4);
  positional_encode_backward(in.data(), 4, freqs, true, d_enc.data(), d_in.data());

  const double h = 1e-6;
  for (int i = 0; i < 4; ++i) {
    auto lo = in, hi = in;
    hi[i] += h;
    lo[i] -= h;
    auto e_hi = positional_encode(hi, freqs, true);
    auto e_lo = positional_encode(lo, freqs, true);
    double fd = 0.0;
    for (int j = 0; j < out_dim; ++j) fd += d_enc[j] * (e_hi[j] - e_lo[j]) / (2 * h);
    CHECK(std::abs(fd - d_in[i]) < 1e-7);
  }
}

TEST_CASE("shoulder rep with identity rotation duplicates the base rep") {
  Rng rng(19);
  Ray ray;
  ray.origin = Vec3(0.1, -0.2, 1.0);
  ray.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  RayRepConfig cfg;
  cfg.k_samples = 4;
  auto base = point_concat(ray, cfg);
  auto ext = shoulder_ray_rep(ray, Mat3::Identity(), cfg);
  REQUIRE(ext.size() == 2 * base.size());
  for (size_t i = 0; i < base.size(); ++i) {
    CHECK(ext[i] == base[i]);
    CHECK(ext[base.size() + i] == base[i]);
  }
}

TEST_CASE("90 degree z rotation maps (1,0,0) to (0,-1,0) in the shoulder frame") {
  // Ray whose near point is exactly (1,0,0).
  Ray ray;
  ray.origin = Vec3(0, 0, 0);
  ray.direction = Vec3(1, 0, 0);
  RayRepConfig cfg;
  cfg.k_samples = 2;
  cfg.near = 1.0;
  cfg.far = 2.0;
  Mat3 rz;
  rz << 0, -1, 0, 1, 0, 0, 0, 0, 1;  // Rz(90deg)
  auto ext = shoulder_ray_rep(ray, rz, cfg);
  // shoulder-frame entry for the first point: Rz(90)^-1 * (1,0,0) = (0,-1,0)
  CHECK(ext[6] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(ext[7] == doctest::Approx(-1.0).epsilon(1e-12));
  CHECK(ext[8] == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("shoulder rep matches a per-point matrix oracle") {
  Rng rng(23);
  Vec3 axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const double angle = rng.uniform(0.1, 2.8);
  Mat3 k;
  k << 0, -axis.z(), axis.y(), axis.z(), 0, -axis.x(), -axis.y(), axis.x(), 0;
  Mat3 rot = Mat3::Identity() + std::sin(angle) * k + (1 - std::cos(angle)) * k * k;

  Ray ray;
  ray.origin = Vec3(rng.normal(), rng.normal(), rng.normal());
  ray.direction = Vec3(rng.normal(), rng.normal(), rng.normal()).normalized();
  RayRepConfig cfg;
  cfg.k_samples = 5;
  auto base = point_concat(ray, cfg);
  auto ext = shoulder_ray_rep(ray, rot, cfg);
  const Mat3 inv = rot.transpose();  // orthonormal
  for (int i = 0; i < cfg.k_samples; ++i) {
    const Vec3 p(base[3 * i], base[3 * i + 1], base[3 * i + 2]);
    const Vec3 q = inv * p;
    for (int c = 0; c < 3; ++c)
      CHECK(std::abs(ext[base.size() + 3 * i + c] - q(c)) < 1e-12);
  }
}

TEST_CASE("shoulder rep validates the rotation") {
  Ray ray;
  RayRepConfig cfg;
  Mat3 bad = Mat3::Identity() * 1.5;
  CHECK_THROWS_AS(shoulder_ray_rep(ray, bad, cfg), ValidationError);
}

TEST_CASE("rays through point_concat stay finite for random valid cameras") {
  Rng rng(29);
  for (int trial = 0; trial < 3; ++trial) {
    CameraPose cam = random_camera(rng, 4, 4);
    RayRepConfig cfg;
    for (const Ray& r : generate_rays(cam)) {
      for (double x : positional_encode(point_concat(r, cfg), 4, true))
        CHECK(std::isfinite(x));
    }
  }
}

}  // TEST_SUITE
