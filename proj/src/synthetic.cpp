#include "flowfusion/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "flowfusion/dataset_io.hpp"
#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

constexpr double kMinDepth = 0.3;
constexpr double kMaxDepth = 8.0;

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint64_t seed) {
  std::uint64_t h = splitmix64(seed);
  h = splitmix64(h ^ static_cast<std::uint64_t>(ix));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iy));
  h = splitmix64(h ^ static_cast<std::uint64_t>(iz));
  return static_cast<double>(h >> 11) * (1.0 / 9007199254740992.0);
}

double fade(double t) { return t * t * t * (t * (t * 6.0 - 15.0) + 10.0); }

double value_noise(const Vec3& p, std::uint64_t seed) {
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = fade(p.x() - fx), ty = fade(p.y() - fy), tz = fade(p.z() - fz);
  double c[2][2][2];
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) c[dz][dy][dx] = lattice_value(ix + dx, iy + dy, iz + dz, seed);
  auto lerp = [](double a, double b, double t) { return a + t * (b - a); };
  const double x00 = lerp(c[0][0][0], c[0][0][1], tx);
  const double x10 = lerp(c[0][1][0], c[0][1][1], tx);
  const double x01 = lerp(c[1][0][0], c[1][0][1], tx);
  const double x11 = lerp(c[1][1][0], c[1][1][1], tx);
  return lerp(lerp(x00, x10, ty), lerp(x01, x11, ty), tz);
}

enum class Body { none, background, box };

struct Hit {
  Body body = Body::none;
  double depth = 0.0;
  Vec3 point = Vec3::Zero();  // world
};

struct FrameState {
  RigidTransform world_to_camera;
  RigidTransform object_to_world;
};

struct RayCaster {
  const SyntheticSceneSpec& spec;

  Hit cast(const FrameState& st, int x, int y) const {
    const auto& K = spec.intrinsics;
    const Vec3 dir_cam((x - K.cx) / K.fx, (y - K.cy) / K.fy, 1.0);
    const RigidTransform cam_to_world = st.world_to_camera.inverse();
    const Vec3 origin = cam_to_world.t;
    const Vec3 dir = cam_to_world.R * dir_cam;

    Hit best;
    double best_s = std::numeric_limits<double>::infinity();
    for (const auto& pl : spec.planes) {
      const double denom = pl.normal.dot(dir);
      if (std::abs(denom) < 1e-12) continue;
      const double s = (pl.offset - pl.normal.dot(origin)) / denom;
      if (s > 0.0 && s < best_s) {
        best_s = s;
        best.body = Body::background;
      }
    }
    if (spec.object) {
      const RigidTransform world_to_obj = st.object_to_world.inverse();
      const Vec3 o = world_to_obj * origin;
      const Vec3 d = world_to_obj.R * dir;
      const Vec3 half = 0.5 * spec.object->size;
      double t_near = -std::numeric_limits<double>::infinity();
      double t_far = std::numeric_limits<double>::infinity();
      bool miss = false;
      for (int a = 0; a < 3 && !miss; ++a) {
        if (std::abs(d[a]) < 1e-15) {
          if (o[a] < -half[a] || o[a] > half[a]) miss = true;
          continue;
        }
        double t0 = (-half[a] - o[a]) / d[a];
        double t1 = (half[a] - o[a]) / d[a];
        if (t0 > t1) std::swap(t0, t1);
        t_near = std::max(t_near, t0);
        t_far = std::min(t_far, t1);
        if (t_near > t_far) miss = true;
      }
      if (!miss && t_near > 0.0 && t_near < best_s) {
        best_s = t_near;
        best.body = Body::box;
      }
    }
    if (best.body != Body::none) {
      best.point = origin + best_s * dir;
      // dir_cam has unit z, so the ray parameter is the camera-frame depth
      best.depth = best_s;
    }
    return best;
  }

  double shade(const FrameState& st, const Hit& h) const {
    if (h.body == Body::background) return procedural_texture(h.point, spec.texture_cell, spec.texture_seed);
    const Vec3 local = st.object_to_world.inverse() * h.point;
    return procedural_texture(local, spec.texture_cell, spec.texture_seed ^ 0x5bd1e995ULL);
  }
};

struct RenderedFrame {
  ImageD intensity;
  ImageD depth;
  Mask dynamic;
  std::vector<Hit> hits;
};

RenderedFrame render(const RayCaster& rc, const FrameState& st, Execution exec) {
  const int w = rc.spec.intrinsics.width;
  const int h = rc.spec.intrinsics.height;
  RenderedFrame out{ImageD(w, h), ImageD(w, h), Mask(w, h, 0), std::vector<Hit>(static_cast<std::size_t>(w) * h)};
  auto row = [&](int y) {
    for (int x = 0; x < w; ++x) {
      const Hit hit = rc.cast(st, x, y);
      out.hits[static_cast<std::size_t>(y) * w + x] = hit;
      if (hit.body == Body::none) continue;
      out.depth(x, y) = hit.depth;
      out.intensity(x, y) = rc.shade(st, hit);
      out.dynamic(x, y) = hit.body == Body::box ? 1 : 0;
    }
  };
  if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
    for (int y = 0; y < h; ++y) row(y);
  } else {
    for (int y = 0; y < h; ++y) row(y);
  }
  return out;
}

std::string twist_to_string(const Twist& t) {
  std::ostringstream os;
  os << std::setprecision(17) << t.v.x() << ' ' << t.v.y() << ' ' << t.v.z() << ' ' << t.w.x() << ' ' << t.w.y()
     << ' ' << t.w.z();
  return os.str();
}

Twist twist_from(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get_doubles(key, 6);
  return {Vec3(v[0], v[1], v[2]), Vec3(v[3], v[4], v[5])};
}

Vec3 vec3_from(const KeyValueConfig& cfg, const std::string& key) {
  const auto v = cfg.get_doubles(key, 3);
  return {v[0], v[1], v[2]};
}

}  // namespace

double procedural_texture(const Vec3& p, double cell, std::uint64_t seed) {
  double sum = 0.0;
  double amp = 1.0;
  double norm = 0.0;
  double scale = 1.0 / cell;
  for (int octave = 0; octave < 3; ++octave) {
    sum += amp * value_noise(p * scale, seed + 0x9e37ULL * static_cast<std::uint64_t>(octave + 1));
    norm += amp;
    amp *= 0.5;
    scale *= 2.0;
  }
  const double n = sum / norm;
  const double stretched = std::clamp(0.5 + 2.0 * (n - 0.5), 0.0, 1.0);
  return std::round(stretched * 255.0) / 255.0;
}

void SyntheticSceneSpec::validate() const {
  try {
    intrinsics.validate();
  } catch (const ParameterError& e) {
    throw GenerationError(std::string("camera: ") + e.what());
  }
  if (frame_count < 1) throw GenerationError("sequence.frames must be >= 1");
  if (!(frame_interval > 0.0)) throw GenerationError("sequence.interval must be > 0");
  if (!(texture_cell > 0.0)) throw GenerationError("texture.cell must be > 0");
  if (!camera_motion.is_finite()) throw GenerationError("camera.twist must be finite");
  for (std::size_t i = 0; i < planes.size(); ++i) {
    if (!(planes[i].normal.norm() > 0.0) || !planes[i].normal.allFinite() || !std::isfinite(planes[i].offset)) {
      throw GenerationError("plane." + std::to_string(i) + " has a degenerate normal");
    }
  }
  if (planes.empty() && !object) throw GenerationError("plane.*: scene has no geometry");
  if (object) {
    if (!(object->size.minCoeff() > 0.0)) throw GenerationError("object.size must be positive");
    if (!object->center.allFinite()) throw GenerationError("object.center must be finite");
    if (!object->motion.is_finite()) throw GenerationError("object.twist must be finite");
  }
  if (!initial_camera.is_valid()) throw GenerationError("camera.pose is not a rigid transform");
}

Twist GroundTruth::relative_twist(std::size_t a, std::size_t b) const {
  return se3_log(world_to_camera.at(b) * world_to_camera.at(a).inverse());
}

Trajectory GroundTruth::trajectory(const std::vector<double>& timestamps) const {
  Trajectory t;
  for (std::size_t k = 0; k < world_to_camera.size() && k < timestamps.size(); ++k) {
    t.push_back({timestamps[k], world_to_camera[k].inverse()});
  }
  return t;
}

SyntheticSequence generate_synthetic_sequence(const SyntheticSceneSpec& spec, Execution exec) {
  spec.validate();
  const RayCaster rc{spec};
  const RigidTransform cam_step = se3_exp(spec.camera_motion);
  const Mat3 obj_rot_step = spec.object ? so3_exp(spec.object->motion.w) : Mat3::Identity();

  std::vector<FrameState> states;
  FrameState st;
  st.world_to_camera = spec.initial_camera;
  if (spec.object) st.object_to_world = {Mat3::Identity(), spec.object->center};
  for (int k = 0; k < spec.frame_count; ++k) {
    states.push_back(st);
    st.world_to_camera = cam_step * st.world_to_camera;
    if (spec.object) {
      st.object_to_world.R = obj_rot_step * st.object_to_world.R;
      st.object_to_world.t = st.object_to_world.t + spec.object->motion.v;
    }
  }

  SyntheticSequence seq;
  std::vector<RenderedFrame> rendered;
  for (int k = 0; k < spec.frame_count; ++k) {
    const FrameState& s = states[k];
    if (spec.object) {
      const Vec3 cam_center = s.world_to_camera.inverse().t;
      const Vec3 local = s.object_to_world.inverse() * cam_center;
      if ((local.cwiseAbs() - 0.5 * spec.object->size).maxCoeff() <= 0.0) {
        throw GenerationError("object.center: camera is inside the object at frame " + std::to_string(k));
      }
    }
    RenderedFrame r = render(rc, s, exec);
    for (const auto& hit : r.hits) {
      if (hit.body != Body::none && !(hit.depth > kMinDepth && hit.depth < kMaxDepth)) {
        std::ostringstream os;
        os << (hit.body == Body::box ? "object" : "plane.*") << ": depth " << hit.depth << " m outside (0.3, 8) at frame "
           << k;
        throw GenerationError(os.str());
      }
    }
    if (k == 0 && spec.object &&
        std::none_of(r.dynamic.begin(), r.dynamic.end(), [](unsigned char m) { return m != 0; })) {
      throw GenerationError("object.center: object not visible in frame 0");
    }
    RgbdFrame f;
    f.timestamp = k * spec.frame_interval;
    f.index = static_cast<std::size_t>(k);
    f.intensity = r.intensity;
    f.depth = r.depth;
    f.intrinsics = spec.intrinsics;
    seq.frames.push_back(std::move(f));
    seq.truth.world_to_camera.push_back(s.world_to_camera);
    seq.truth.dynamic_mask.push_back(r.dynamic);
    rendered.push_back(std::move(r));
  }

  const auto& K = spec.intrinsics;
  for (int k = 0; k + 1 < spec.frame_count; ++k) {
    const FrameState& next = states[k + 1];
    const RigidTransform obj_motion = next.object_to_world * states[k].object_to_world.inverse();
    FlowField flow(K.width, K.height);
    const auto& hits = rendered[k].hits;
    auto row = [&](int y) {
      for (int x = 0; x < K.width; ++x) {
        const Hit& h = hits[static_cast<std::size_t>(y) * K.width + x];
        if (h.body == Body::none) continue;
        const Vec3 moved = h.body == Body::box ? obj_motion * h.point : h.point;
        const Vec3 pc = next.world_to_camera * moved;
        if (!(pc.z() > 0.0)) continue;
        const Pixel p = project(pc, K);
        flow.set(x, y, p.u - x, p.v - y);
      }
    };
    if (exec == Execution::parallel) {
#pragma omp parallel for schedule(static)
      for (int y = 0; y < K.height; ++y) row(y);
    } else {
      for (int y = 0; y < K.height; ++y) row(y);
    }
    seq.truth.flow.push_back(std::move(flow));
  }
  return seq;
}

SyntheticSceneSpec parse_scene_spec(const KeyValueConfig& cfg) {
  SyntheticSceneSpec spec;
  auto& K = spec.intrinsics;
  K.width = cfg.get_int("camera.width", K.width);
  K.height = cfg.get_int("camera.height", K.height);
  K.fx = cfg.get_double("camera.fx", K.fx);
  K.fy = cfg.get_double("camera.fy", K.fy);
  K.cx = cfg.get_double("camera.cx", K.cx);
  K.cy = cfg.get_double("camera.cy", K.cy);
  if (cfg.has("camera.twist")) spec.camera_motion = twist_from(cfg, "camera.twist");
  if (cfg.has("camera.pose")) spec.initial_camera = se3_exp(twist_from(cfg, "camera.pose"));
  spec.frame_count = cfg.get_int("sequence.frames", spec.frame_count);
  spec.frame_interval = cfg.get_double("sequence.interval", spec.frame_interval);
  spec.texture_seed = static_cast<std::uint64_t>(cfg.get_int("texture.seed", static_cast<int>(spec.texture_seed)));
  spec.texture_cell = cfg.get_double("texture.cell", spec.texture_cell);
  for (int i = 0;; ++i) {
    const std::string key = "plane." + std::to_string(i);
    if (!cfg.has(key)) break;
    const auto v = cfg.get_doubles(key, 4);
    spec.planes.push_back({Vec3(v[0], v[1], v[2]), v[3]});
  }
  if (cfg.get_bool("object.enabled", cfg.has("object.center"))) {
    BoxObject box;
    if (cfg.has("object.center")) box.center = vec3_from(cfg, "object.center");
    if (cfg.has("object.size")) box.size = vec3_from(cfg, "object.size");
    if (cfg.has("object.twist")) box.motion = twist_from(cfg, "object.twist");
    spec.object = box;
  }
  const auto unused = cfg.unused_keys();
  if (!unused.empty()) throw ConfigError("unknown scene key '" + unused.front() + "'", cfg.line_of(unused.front()));
  return spec;
}

SyntheticSceneSpec load_scene_spec(const std::filesystem::path& path) {
  return parse_scene_spec(KeyValueConfig::load(path));
}

std::string serialize_scene_spec(const SyntheticSceneSpec& spec) {
  std::ostringstream os;
  os << std::setprecision(17);
  const auto& K = spec.intrinsics;
  os << "camera.width=" << K.width << "\ncamera.height=" << K.height << "\ncamera.fx=" << K.fx
     << "\ncamera.fy=" << K.fy << "\ncamera.cx=" << K.cx << "\ncamera.cy=" << K.cy << '\n';
  os << "camera.twist=" << twist_to_string(spec.camera_motion) << '\n';
  if (!spec.initial_camera.is_identity()) os << "camera.pose=" << twist_to_string(se3_log(spec.initial_camera)) << '\n';
  os << "sequence.frames=" << spec.frame_count << "\nsequence.interval=" << spec.frame_interval << '\n';
  os << "texture.seed=" << spec.texture_seed << "\ntexture.cell=" << spec.texture_cell << '\n';
  for (std::size_t i = 0; i < spec.planes.size(); ++i) {
    const auto& p = spec.planes[i];
    os << "plane." << i << '=' << p.normal.x() << ' ' << p.normal.y() << ' ' << p.normal.z() << ' ' << p.offset
       << '\n';
  }
  if (spec.object) {
    const auto& b = *spec.object;
    os << "object.enabled=1\nobject.center=" << b.center.x() << ' ' << b.center.y() << ' ' << b.center.z()
       << "\nobject.size=" << b.size.x() << ' ' << b.size.y() << ' ' << b.size.z()
       << "\nobject.twist=" << twist_to_string(b.motion) << '\n';
  }
  return os.str();
}

void write_synthetic_dataset(const SyntheticSequence& seq, const SyntheticSceneSpec& spec,
                             const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  for (const char* sub : {"rgb", "depth", "gt_flow", "gt_masks"}) fs::create_directories(dir / sub);
  std::ofstream rgb(dir / "rgb.txt"), depth(dir / "depth.txt");
  if (!rgb || !depth) throw IoError("cannot write index files in " + dir.string());
  rgb << "# timestamp filename\n";
  depth << "# timestamp filename\n";
  std::vector<double> stamps;
  for (const auto& f : seq.frames) {
    char stamp[32];
    std::snprintf(stamp, sizeof stamp, "%.6f", f.timestamp);
    const std::string name = std::string(stamp) + ".png";
    write_intensity_png(f.intensity, dir / "rgb" / name);
    write_depth_png(f.depth, dir / "depth" / name);
    rgb << stamp << " rgb/" << name << '\n';
    depth << stamp << " depth/" << name << '\n';
    stamps.push_back(f.timestamp);
  }
  write_trajectory(seq.truth.trajectory(stamps), dir / "groundtruth.txt");
  {
    std::ofstream cal(dir / "calibration.txt");
    cal << std::setprecision(17) << spec.intrinsics.fx << ' ' << spec.intrinsics.fy << ' ' << spec.intrinsics.cx
        << ' ' << spec.intrinsics.cy << '\n';
  }
  for (std::size_t k = 0; k < seq.truth.flow.size(); ++k) {
    write_flow_file(seq.truth.flow[k],
                    dir / "gt_flow" / ("flow_" + std::to_string(k) + "_" + std::to_string(k + 1) + ".flo"));
  }
  for (std::size_t k = 0; k < seq.truth.dynamic_mask.size(); ++k) {
    write_mask_png(seq.truth.dynamic_mask[k], dir / "gt_masks" / (std::to_string(k) + ".png"));
  }
  std::ofstream(dir / "scene.cfg") << serialize_scene_spec(spec);
}

}  // namespace flowfusion
