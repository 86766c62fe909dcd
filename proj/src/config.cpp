#include "nelf/config.hpp"

#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace nelf {

namespace {

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Field table driving parse/serialize/hash uniformly.
struct FieldDef {
  std::string key;
  std::function<std::string(const RunConfig&)> get;
  std::function<void(RunConfig&, const std::string&)> set;
  bool arch = false;  // participates in the architecture hash
};

int to_int(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    int r = std::stoi(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError("config: bad integer for " + key + ": '" + v + "'");
  }
}

uint64_t to_u64(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    uint64_t r = std::stoull(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError("config: bad integer for " + key + ": '" + v + "'");
  }
}

double to_double(const std::string& v, const std::string& key) {
  try {
    size_t pos = 0;
    double r = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return r;
  } catch (const std::exception&) {
    throw ValidationError("config: bad number for " + key + ": '" + v + "'");
  }
}

bool to_bool(const std::string& v, const std::string& key) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ValidationError("config: bad boolean for " + key + ": '" + v + "'");
}

#define F_INT(name, is_arch)                                                  \
  {#name, [](const RunConfig& c) { return std::to_string(c.name); },          \
   [](RunConfig& c, const std::string& v) { c.name = to_int(v, #name); },     \
   is_arch}
#define F_U64(name, is_arch)                                                  \
  {#name, [](const RunConfig& c) { return std::to_string(c.name); },          \
   [](RunConfig& c, const std::string& v) { c.name = to_u64(v, #name); },     \
   is_arch}
#define F_DBL(name, is_arch)                                                  \
  {#name, [](const RunConfig& c) { return fmt_double(c.name); },              \
   [](RunConfig& c, const std::string& v) { c.name = to_double(v, #name); },  \
   is_arch}
#define F_BOOL(name, is_arch)                                                 \
  {#name, [](const RunConfig& c) { return c.name ? "true" : "false"; },       \
   [](RunConfig& c, const std::string& v) { c.name = to_bool(v, #name); },    \
   is_arch}
#define F_STR(name, is_arch)                                                  \
  {#name, [](const RunConfig& c) { return c.name; },                          \
   [](RunConfig& c, const std::string& v) { c.name = v; }, is_arch}

const std::vector<FieldDef>& fields() {
  static const std::vector<FieldDef> defs = {
      F_U64(seed, false),
      F_INT(d_e, true),
      F_INT(k_samples, true),
      F_DBL(near, true),
      F_DBL(far, true),
      F_INT(pe_ray, true),
      F_BOOL(pe_include_input, true),
      F_BOOL(shoulder, true),
      F_STR(expression_mode, true),
      F_INT(pe_raw_code, true),
      F_INT(n_lf, true),
      F_INT(d_lf, true),
      F_INT(enc_width, true),
      F_INT(enc_blocks, true),
      F_INT(nelf_width, true),
      F_INT(nelf_blocks, true),
      F_INT(sr_width, true),
      F_INT(sr_blocks, true),
      F_INT(warp_width, true),
      F_INT(warp_blocks, true),
      F_INT(warp_pe, true),
      F_INT(latent_dim, true),
      F_DBL(scene_radius, false),
      F_INT(image_size, true),
      F_INT(pseudo_count, false),
      F_INT(real_count, true),
      F_INT(holdout_count, false),
      F_DBL(noise_sigma_e, false),
      F_DBL(noise_sigma_rot_deg, false),
      F_DBL(noise_sigma_trans, false),
      F_DBL(lambda_perc, false),
      F_U64(perc_seed, false),
      F_DBL(lr_stage1, false),
      F_DBL(lr_stage2, false),
      F_DBL(lr_finetune, false),
      F_DBL(lr_decay_factor, false),
      F_U64(lr_decay_every, false),
      F_DBL(adam_beta1, false),
      F_DBL(adam_beta2, false),
      F_DBL(adam_eps, false),
      F_U64(stage1_iters, false),
      F_U64(stage2_iters, false),
      F_U64(finetune_iters, false),
      F_INT(batch_rays, false),
      F_INT(stage1_frames_per_batch, false),
      F_INT(batch_images, false),
      F_DBL(finetune_real_frac, false),
      F_BOOL(finetune_warp, false),
      F_U64(log_every, false),
  };
  return defs;
}

#undef F_INT
#undef F_U64
#undef F_DBL
#undef F_BOOL
#undef F_STR

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

void RunConfig::validate() const {
  check(expression_mode == "bank" || expression_mode == "raw",
        "config: expression_mode must be 'bank' or 'raw'");
  check(image_size >= 4 && image_size % 4 == 0,
        "config: image_size must be a positive multiple of 4");
  check(pseudo_count >= 1, "config: pseudo_count must be >= 1");
  check(real_count >= 2, "config: real_count must be >= 2");
  check(holdout_count >= 1, "config: holdout_count must be >= 1");
  check(lr_stage1 > 0 && lr_stage2 > 0 && lr_finetune > 0,
        "config: learning rates must be positive");
  check(lr_stage1 >= lr_stage2 && lr_stage2 >= lr_finetune,
        "config: stage learning rates must be non-increasing");
  check(lr_decay_factor > 0.0 && lr_decay_factor <= 1.0,
        "config: lr_decay_factor must be in (0, 1]");
  check(lr_decay_every >= 1, "config: lr_decay_every must be >= 1");
  check(batch_rays >= 1 && batch_images >= 1 && stage1_frames_per_batch >= 1,
        "config: batch sizes must be >= 1");
  check(batch_rays % stage1_frames_per_batch == 0,
        "config: batch_rays must be divisible by stage1_frames_per_batch");
  check(finetune_real_frac >= 0.0 && finetune_real_frac <= 1.0,
        "config: finetune_real_frac must be in [0, 1]");
  check(lambda_perc >= 0.0, "config: lambda_perc must be >= 0");
  model().validate();
}

ModelConfig RunConfig::model() const {
  ModelConfig m;
  m.d_e = d_e;
  m.ray.k_samples = k_samples;
  m.ray.near = near;
  m.ray.far = far;
  m.ray.pe_freqs = pe_ray;
  m.ray.include_input = pe_include_input;
  m.shoulder = shoulder;
  m.expression_mode =
      expression_mode == "raw" ? ExpressionMode::Raw : ExpressionMode::Bank;
  m.pe_raw_code = pe_raw_code;
  m.n_lf = n_lf;
  m.d_lf = d_lf;
  m.enc_width = enc_width;
  m.enc_blocks = enc_blocks;
  m.nelf_width = nelf_width;
  m.nelf_blocks = nelf_blocks;
  m.sr_width = sr_width;
  m.sr_blocks = sr_blocks;
  m.warp_width = warp_width;
  m.warp_blocks = warp_blocks;
  m.warp_pe = warp_pe;
  m.latent_dim = latent_dim;
  m.n_latents = real_count;
  return m;
}

SceneParams RunConfig::scene() const {
  SceneParams s;
  s.d_e = d_e;
  s.base_radius = scene_radius;
  s.shoulder = shoulder;
  s.near = near;
  s.far = far;
  return s;
}

NoiseParams RunConfig::noise() const {
  return NoiseParams{noise_sigma_e, noise_sigma_rot_deg, noise_sigma_trans};
}

std::string RunConfig::serialize() const {
  std::ostringstream os;
  for (const auto& f : fields()) os << f.key << "=" << f.get(*this) << "\n";
  return os.str();
}

uint64_t RunConfig::arch_hash() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const std::string& s) {
    for (unsigned char c : s) {
      h ^= c;
      h *= 0x100000001b3ull;
    }
  };
  for (const auto& f : fields()) {
    if (!f.arch) continue;
    mix(f.key);
    mix("=");
    mix(f.get(*this));
    mix("\n");
  }
  return h;
}

void RunConfig::apply_override(const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(*this, value);
      return;
    }
  }
  throw ValidationError("config: unknown key '" + key + "'");
}

RunConfig RunConfig::parse(const std::string& text) {
  RunConfig cfg;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: line " + std::to_string(lineno) +
                            " is not key=value");
    cfg.apply_override(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return cfg;
}

RunConfig RunConfig::load(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw IoError("config: cannot open " + path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return parse(ss.str());
}

void RunConfig::save(const std::string& path) const {
  std::ofstream os(path);
  if (!os) throw IoError("config: cannot write " + path);
  os << serialize();
  if (!os) throw IoError("config: write failed for " + path);
}

}  // namespace nelf
