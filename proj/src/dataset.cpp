#include "nelf/dataset.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <Eigen/SVD>

#include "nelf/serialize.hpp"
#include "nelf/warp.hpp"

namespace nelf {

namespace {

constexpr char kMagic[7] = {'L', 'A', 'V', 'D', 'S', '1', '\0'};
constexpr uint16_t kVersion = 1;
constexpr double kFocalFactor = 0.85;  // focal = 0.85 * width

}  // namespace

Mat3 nearest_rotation(const Mat3& m) {
  Eigen::JacobiSVD<Mat3> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Mat3 r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Mat3 flip = Mat3::Identity();
    flip(2, 2) = -1.0;
    r = svd.matrixU() * flip * svd.matrixV().transpose();
  }
  return r;
}

InterpolatedParams interpolate_frames(const ExpressionFrame& f1,
                                      const ExpressionFrame& f2, double alpha,
                                      bool reorthonormalize) {
  check(alpha >= 0.0 && alpha < 1.0, "interpolate_frames: alpha must be in [0, 1)");
  check(f1.e.size() == f2.e.size(), "interpolate_frames: code dimension mismatch");
  InterpolatedParams out;
  out.e = alpha * f1.e + (1.0 - alpha) * f2.e;
  out.camera = f2.camera;
  out.camera.origin = alpha * f1.camera.origin + (1.0 - alpha) * f2.camera.origin;
  out.camera.rotation = alpha * f1.camera.rotation + (1.0 - alpha) * f2.camera.rotation;
  if (reorthonormalize) out.camera.rotation = nearest_rotation(out.camera.rotation);
  if (f1.shoulder_rotation && f2.shoulder_rotation) {
    Mat3 s = alpha * (*f1.shoulder_rotation) + (1.0 - alpha) * (*f2.shoulder_rotation);
    out.shoulder_rotation = reorthonormalize ? nearest_rotation(s) : s;
  } else if (f2.shoulder_rotation) {
    out.shoulder_rotation = f2.shoulder_rotation;
  }
  return out;
}

std::vector<ExpressionFrame> synthesize_pseudo_set(
    const SceneParams& scene, const std::vector<ExpressionFrame>& real_frames,
    int count, uint64_t seed, bool reorthonormalize) {
  check(real_frames.size() >= 2, "synthesize_pseudo_set: need at least 2 real frames");
  check(count >= 1, "synthesize_pseudo_set: count must be >= 1");
  Rng master(seed);
  std::vector<ExpressionFrame> out(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    Rng rng = master.child(static_cast<uint64_t>(i));
    const auto a = rng.uniform_index(real_frames.size());
    const auto b = rng.uniform_index(real_frames.size());
    const double alpha = rng.uniform();
    InterpolatedParams p =
        interpolate_frames(real_frames[a], real_frames[b], alpha, reorthonormalize);
    ExpressionFrame f;
    f.e = p.e;
    f.camera = p.camera;
    f.shoulder_rotation = p.shoulder_rotation;
    f.kind = FrameKind::Pseudo;
    f.image = teacher_render(scene, p.e, p.camera, p.shoulder_rotation);
    out[static_cast<size_t>(i)] = std::move(f);
  }
  return out;
}

CameraPose make_orbit_camera(double radius, double azimuth, double elevation, int width,
                             int height) {
  CameraPose cam;
  cam.origin = radius * Vec3(std::cos(elevation) * std::sin(azimuth),
                             std::sin(elevation), std::cos(elevation) * std::cos(azimuth));
  const Vec3 back = cam.origin.normalized();  // camera -z points at the origin
  Vec3 up(0, 1, 0);
  Vec3 right = up.cross(back).normalized();
  up = back.cross(right);
  cam.rotation.col(0) = right;
  cam.rotation.col(1) = up;
  cam.rotation.col(2) = back;
  cam.focal = kFocalFactor * width;
  cam.cx = width / 2.0;
  cam.cy = height / 2.0;
  cam.width = width;
  cam.height = height;
  return cam;
}

SimulatedRealSet simulate_real_set(const SceneParams& scene, int count,
                                   const NoiseParams& noise, uint64_t seed, int width,
                                   int height) {
  check(count >= 1, "simulate_real_set: count must be >= 1");
  check(noise.sigma_e >= 0.0 && noise.sigma_rot_deg >= 0.0 && noise.sigma_trans >= 0.0,
        "simulate_real_set: noise sigmas must be >= 0");
  SimulatedRealSet out;
  out.frames.resize(static_cast<size_t>(count));
  out.true_codes.resize(static_cast<size_t>(count));
  out.true_cameras.resize(static_cast<size_t>(count));

  Rng master(seed);
  // Trajectory shape constants drawn once from the master stream.
  std::vector<double> freq(static_cast<size_t>(scene.d_e));
  std::vector<double> phase(static_cast<size_t>(scene.d_e));
  for (int k = 0; k < scene.d_e; ++k) {
    freq[k] = master.uniform(0.7, 2.3);
    phase[k] = master.uniform(0.0, 2.0 * M_PI);
  }
  const double shoulder_phase = master.uniform(0.0, 2.0 * M_PI);

  for (int i = 0; i < count; ++i) {
    Rng rng = master.child(static_cast<uint64_t>(i));
    const double s = count > 1 ? static_cast<double>(i) / (count - 1) : 0.5;

    Vector e_true(scene.d_e);
    for (int k = 0; k < scene.d_e; ++k)
      e_true(k) = 0.85 * std::sin(2.0 * M_PI * freq[k] * s + phase[k]);

    const double azimuth = (-40.0 + 80.0 * s) * M_PI / 180.0;
    const double elevation = (10.0 * std::sin(2.0 * M_PI * 1.7 * s)) * M_PI / 180.0;
    const double radius = 2.5 + 0.1 * std::sin(2.0 * M_PI * 0.8 * s);
    CameraPose cam_true = make_orbit_camera(radius, azimuth, elevation, width, height);

    std::optional<Mat3> shoulder;
    if (scene.shoulder) {
      const double beta =
          (14.0 * M_PI / 180.0) * std::sin(2.0 * M_PI * 0.9 * s + shoulder_phase);
      const double gamma = (6.0 * M_PI / 180.0) * std::sin(2.0 * M_PI * 1.3 * s);
      shoulder = rodrigues(Vec3(0, beta, 0)) * rodrigues(Vec3(0, 0, gamma));
    }

    ExpressionFrame f;
    f.kind = FrameKind::Real;
    f.frame_index = i;
    f.shoulder_rotation = shoulder;
    f.image = teacher_render(scene, e_true, cam_true, shoulder);

    // Perturbed metadata emulating fitting error.
    f.e = e_true;
    for (int k = 0; k < scene.d_e; ++k) f.e(k) += rng.normal(0.0, noise.sigma_e);
    f.camera = cam_true;
    for (int k = 0; k < 3; ++k)
      f.camera.origin(k) += rng.normal(0.0, noise.sigma_trans);
    Vec3 axis(rng.normal(), rng.normal(), rng.normal());
    if (axis.norm() < 1e-9) axis = Vec3(0, 0, 1);
    axis.normalize();
    const double angle = rng.normal(0.0, noise.sigma_rot_deg * M_PI / 180.0);
    f.camera.rotation = rodrigues(axis * angle) * cam_true.rotation;

    out.true_codes[static_cast<size_t>(i)] = e_true;
    out.true_cameras[static_cast<size_t>(i)] = cam_true;
    out.frames[static_cast<size_t>(i)] = std::move(f);
  }
  return out;
}

std::vector<DatasetRecord> frame_to_records(const ExpressionFrame& frame, int lr_scale) {
  check(frame.camera.width % lr_scale == 0 && frame.camera.height % lr_scale == 0,
        "frame_to_records: resolution not divisible by LR scale");
  const CameraPose lr_cam = frame.camera.scaled(lr_scale);
  std::vector<DatasetRecord> records;
  records.reserve(static_cast<size_t>(lr_cam.width) * lr_cam.height);
  for (int v = 0; v < lr_cam.height; ++v) {
    for (int u = 0; u < lr_cam.width; ++u) {
      DatasetRecord rec;
      const Ray ray = pixel_ray(lr_cam, u + 0.5, v + 0.5);
      rec.r_o = ray.origin;
      rec.r_d = ray.direction;
      rec.e = frame.e;
      double acc[3] = {0, 0, 0};
      for (int dy = 0; dy < lr_scale; ++dy)
        for (int dx = 0; dx < lr_scale; ++dx)
          for (int c = 0; c < 3; ++c)
            acc[c] += frame.image.at(v * lr_scale + dy, u * lr_scale + dx, c);
      const double inv = 1.0 / (lr_scale * lr_scale);
      rec.c = Vec3(acc[0] * inv, acc[1] * inv, acc[2] * inv);
      rec.kind = frame.kind;
      rec.frame_index = frame.frame_index;
      records.push_back(std::move(rec));
    }
  }
  return records;
}

namespace {

void write_mat3_f32(std::ostream& os, const Mat3& m) {
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) write_le<float>(os, static_cast<float>(m(r, c)));
}

Mat3 read_mat3_f32(std::istream& is, const char* what) {
  Mat3 m;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) m(r, c) = read_le<float>(is, what);
  return m;
}

}  // namespace

void write_dataset(const std::vector<ExpressionFrame>& frames, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("write_dataset: cannot open " + path);
  write_bytes(os, kMagic, sizeof(kMagic));
  write_le<uint16_t>(os, kVersion);
  write_le<uint32_t>(os, static_cast<uint32_t>(frames.size()));
  for (const auto& f : frames) {
    write_le<uint8_t>(os, static_cast<uint8_t>(f.kind));
    write_le<int32_t>(os, f.frame_index);
    write_le<uint16_t>(os, static_cast<uint16_t>(f.e.size()));
    for (int k = 0; k < f.e.size(); ++k)
      write_le<float>(os, static_cast<float>(f.e(k)));
    for (int k = 0; k < 3; ++k)
      write_le<float>(os, static_cast<float>(f.camera.origin(k)));
    write_mat3_f32(os, f.camera.rotation);
    write_le<float>(os, static_cast<float>(f.camera.focal));
    write_le<float>(os, static_cast<float>(f.camera.cx));
    write_le<float>(os, static_cast<float>(f.camera.cy));
    write_le<uint32_t>(os, static_cast<uint32_t>(f.camera.width));
    write_le<uint32_t>(os, static_cast<uint32_t>(f.camera.height));
    write_le<uint8_t>(os, f.shoulder_rotation ? 1 : 0);
    write_mat3_f32(os, f.shoulder_rotation ? *f.shoulder_rotation : Mat3::Zero());
    write_le<uint32_t>(os, static_cast<uint32_t>(f.image.height));
    write_le<uint32_t>(os, static_cast<uint32_t>(f.image.width));
    write_le<uint32_t>(os, static_cast<uint32_t>(f.image.channels));
    write_bytes(os, f.image.data.data(), f.image.data.size() * sizeof(float));
  }
  if (!os) throw IoError("write_dataset: write failed for " + path);
}

std::vector<ExpressionFrame> read_dataset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("read_dataset: cannot open " + path);
  char magic[sizeof(kMagic)];
  read_bytes(is, magic, sizeof(kMagic), "dataset magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw IoError("read_dataset: bad magic in " + path);
  const auto version = read_le<uint16_t>(is, "dataset version");
  if (version != kVersion)
    throw IoError("read_dataset: unsupported version " + std::to_string(version));
  const auto count = read_le<uint32_t>(is, "dataset frame count");
  std::vector<ExpressionFrame> frames(count);
  for (auto& f : frames) {
    f.kind = static_cast<FrameKind>(read_le<uint8_t>(is, "frame kind"));
    f.frame_index = read_le<int32_t>(is, "frame index");
    const auto d_e = read_le<uint16_t>(is, "frame d_e");
    f.e.resize(d_e);
    for (int k = 0; k < d_e; ++k) f.e(k) = read_le<float>(is, "frame code");
    for (int k = 0; k < 3; ++k) f.camera.origin(k) = read_le<float>(is, "camera origin");
    f.camera.rotation = read_mat3_f32(is, "camera rotation");
    f.camera.focal = read_le<float>(is, "camera focal");
    f.camera.cx = read_le<float>(is, "camera cx");
    f.camera.cy = read_le<float>(is, "camera cy");
    f.camera.width = static_cast<int>(read_le<uint32_t>(is, "camera width"));
    f.camera.height = static_cast<int>(read_le<uint32_t>(is, "camera height"));
    const auto has_shoulder = read_le<uint8_t>(is, "shoulder flag");
    const Mat3 s = read_mat3_f32(is, "shoulder rotation");
    if (has_shoulder) f.shoulder_rotation = s;
    const auto ih = read_le<uint32_t>(is, "image height");
    const auto iw = read_le<uint32_t>(is, "image width");
    const auto ic = read_le<uint32_t>(is, "image channels");
    f.image = Image(static_cast<int>(ih), static_cast<int>(iw), static_cast<int>(ic));
    read_bytes(is, f.image.data.data(), f.image.data.size() * sizeof(float),
               "image pixels");
  }
  return frames;
}

size_t dataset_file_size(const std::vector<ExpressionFrame>& frames) {
  size_t n = sizeof(kMagic) + 2 + 4;
  for (const auto& f : frames) {
    n += 1 + 4 + 2 + 4 * static_cast<size_t>(f.e.size());
    n += 12 + 36 + 4 + 8 + 8;  // origin, R, focal, pp, dims
    n += 1 + 36;               // shoulder flag + matrix
    n += 12 + 4 * f.image.data.size();
  }
  return n;
}

}  // namespace nelf
