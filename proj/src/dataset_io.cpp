#include "flowfusion/dataset_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <tuple>

#include <opencv2/core.hpp>
#include <opencv2/imgcodecs.hpp>

#include "flowfusion/error.hpp"

namespace flowfusion {

namespace {

std::string trim_comment(const std::string& line) {
  const auto first = line.find_first_not_of(" \t\r");
  if (first == std::string::npos || line[first] == '#') return {};
  return line.substr(first);
}

cv::Mat imread_checked(const fs::path& path) {
  cv::Mat m = cv::imread(path.string(), cv::IMREAD_UNCHANGED);
  if (m.empty()) throw IoError("cannot read image " + path.string());
  return m;
}

void imwrite_checked(const fs::path& path, const cv::Mat& m) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  bool ok = false;
  try {
    ok = cv::imwrite(path.string(), m);
  } catch (const cv::Exception& e) {
    throw IoError("cannot write image " + path.string() + ": " + e.what());
  }
  if (!ok) throw IoError("cannot write image " + path.string());
}

template <typename T>
void put_le(std::ostream& os, T value) {
  static_assert(sizeof(T) == 4);
  std::uint32_t bits;
  std::memcpy(&bits, &value, 4);
  unsigned char bytes[4] = {static_cast<unsigned char>(bits & 0xff),
                            static_cast<unsigned char>((bits >> 8) & 0xff),
                            static_cast<unsigned char>((bits >> 16) & 0xff),
                            static_cast<unsigned char>((bits >> 24) & 0xff)};
  os.write(reinterpret_cast<const char*>(bytes), 4);
}

template <typename T>
T get_le(const unsigned char* p) {
  static_assert(sizeof(T) == 4);
  const std::uint32_t bits = static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
                             (static_cast<std::uint32_t>(p[2]) << 16) |
                             (static_cast<std::uint32_t>(p[3]) << 24);
  T value;
  std::memcpy(&value, &bits, 4);
  return value;
}

}  // namespace

std::vector<TimestampedFile> read_tum_index(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open index file " + path.string());
  std::vector<TimestampedFile> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim_comment(line);
    if (body.empty()) continue;
    std::istringstream is(body);
    TimestampedFile e;
    if (!(is >> e.timestamp >> e.filename)) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": expected 'timestamp filename'");
    }
    out.push_back(std::move(e));
  }
  return out;
}

std::vector<std::pair<std::size_t, std::size_t>> associate_timestamps(const std::vector<double>& a,
                                                                      const std::vector<double>& b,
                                                                      double max_dt) {
  struct Candidate {
    double diff;
    double key;  // symmetric tie-breaker
    std::size_t i, j;
  };
  std::vector<std::size_t> order_b(b.size());
  for (std::size_t j = 0; j < b.size(); ++j) order_b[j] = j;
  std::sort(order_b.begin(), order_b.end(), [&](std::size_t x, std::size_t y) { return b[x] < b[y]; });

  std::vector<Candidate> cands;
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto lo = std::lower_bound(order_b.begin(), order_b.end(), a[i] - max_dt,
                               [&](std::size_t j, double t) { return b[j] < t; });
    for (auto it = lo; it != order_b.end() && b[*it] <= a[i] + max_dt; ++it) {
      const double d = std::abs(a[i] - b[*it]);
      if (d <= max_dt) cands.push_back({d, a[i] + b[*it], i, *it});
    }
  }
  std::sort(cands.begin(), cands.end(), [](const Candidate& x, const Candidate& y) {
    return std::tie(x.diff, x.key, x.i, x.j) < std::tie(y.diff, y.key, y.i, y.j);
  });
  std::vector<char> used_a(a.size(), 0), used_b(b.size(), 0);
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (const auto& c : cands) {
    if (used_a[c.i] || used_b[c.j]) continue;
    used_a[c.i] = used_b[c.j] = 1;
    out.emplace_back(c.i, c.j);
  }
  std::sort(out.begin(), out.end());
  return out;
}

PinholeIntrinsics default_tum_intrinsics(int width, int height) {
  PinholeIntrinsics K;
  K.fx = 525.0;
  K.fy = 525.0;
  K.cx = 319.5 * width / 640.0;
  K.cy = 239.5 * height / 480.0;
  K.width = width;
  K.height = height;
  return K;
}

ImageD read_intensity_png(const fs::path& path) {
  const cv::Mat m = imread_checked(path);
  ImageD out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      double value = 0.0;
      switch (m.type()) {
        case CV_8UC1:
          value = m.at<std::uint8_t>(y, x) / 255.0;
          break;
        case CV_16UC1:
          value = m.at<std::uint16_t>(y, x) / 65535.0;
          break;
        case CV_8UC3: {
          const auto& p = m.at<cv::Vec3b>(y, x);  // OpenCV order is BGR
          value = (0.299 * p[2] + 0.587 * p[1] + 0.114 * p[0]) / 255.0;
          break;
        }
        case CV_8UC4: {
          const auto& p = m.at<cv::Vec4b>(y, x);
          value = (0.299 * p[2] + 0.587 * p[1] + 0.114 * p[0]) / 255.0;
          break;
        }
        default:
          throw FormatError("unsupported intensity image type in " + path.string());
      }
      out(x, y) = std::clamp(value, 0.0, 1.0);
    }
  }
  return out;
}

ImageD read_depth_png(const fs::path& path) {
  const cv::Mat m = imread_checked(path);
  if (m.type() != CV_16UC1) throw FormatError("depth image is not 16-bit single channel: " + path.string());
  ImageD out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) out(x, y) = m.at<std::uint16_t>(y, x) / kTumDepthScale;
  }
  return out;
}

void write_intensity_png(const ImageD& intensity, const fs::path& path) {
  cv::Mat m(intensity.height(), intensity.width(), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      m.at<std::uint8_t>(y, x) =
          static_cast<std::uint8_t>(std::lround(std::clamp(intensity(x, y), 0.0, 1.0) * 255.0));
    }
  }
  imwrite_checked(path, m);
}

void write_depth_png(const ImageD& depth, const fs::path& path) {
  cv::Mat m(depth.height(), depth.width(), CV_16UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const double raw = std::round(std::max(depth(x, y), 0.0) * kTumDepthScale);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(std::min(raw, 65535.0));
    }
  }
  imwrite_checked(path, m);
}

void write_mask_png(const Mask& mask, const fs::path& path) {
  cv::Mat m(mask.height(), mask.width(), CV_8UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) m.at<std::uint8_t>(y, x) = mask(x, y) ? 255 : 0;
  }
  imwrite_checked(path, m);
}

Mask read_mask_png(const fs::path& path) {
  const cv::Mat m = imread_checked(path);
  if (m.type() != CV_8UC1) throw FormatError("mask is not 8-bit single channel: " + path.string());
  Mask out(m.cols, m.rows);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) out(x, y) = m.at<std::uint8_t>(y, x) ? 1 : 0;
  }
  return out;
}

void write_label_png(const Image<int>& labels, const fs::path& path) {
  cv::Mat m(labels.height(), labels.width(), CV_16UC1);
  for (int y = 0; y < m.rows; ++y) {
    for (int x = 0; x < m.cols; ++x) {
      const int l = labels(x, y);
      m.at<std::uint16_t>(y, x) = static_cast<std::uint16_t>(l < 0 ? 0 : std::min(l + 1, 65535));
    }
  }
  imwrite_checked(path, m);
}

TumSequence load_tum_sequence(const fs::path& directory, double max_time_diff,
                              std::optional<PinholeIntrinsics> intrinsics) {
  const fs::path rgb_index = directory / "rgb.txt";
  const fs::path depth_index = directory / "depth.txt";
  if (!fs::exists(rgb_index)) throw IoError("missing index file " + rgb_index.string());
  if (!fs::exists(depth_index)) throw IoError("missing index file " + depth_index.string());
  const auto rgb = read_tum_index(rgb_index);
  const auto depth = read_tum_index(depth_index);

  if (!intrinsics) {
    const fs::path calib = directory / "calibration.txt";
    if (fs::exists(calib)) {
      std::ifstream in(calib);
      std::string line;
      while (std::getline(in, line)) {
        const std::string body = trim_comment(line);
        if (body.empty()) continue;
        std::istringstream is(body);
        PinholeIntrinsics K;
        if (!(is >> K.fx >> K.fy >> K.cx >> K.cy)) throw FormatError("malformed calibration.txt");
        intrinsics = K;  // width/height filled from the first image
        break;
      }
    }
  }

  std::vector<double> ta, tb;
  for (const auto& e : rgb) ta.push_back(e.timestamp);
  for (const auto& e : depth) tb.push_back(e.timestamp);
  const auto pairs = associate_timestamps(ta, tb, max_time_diff);

  std::vector<TimedPose> gt;
  const fs::path gt_path = directory / "groundtruth.txt";
  if (fs::exists(gt_path)) gt = read_trajectory(gt_path).poses();

  TumSequence seq;
  for (const auto& [i, j] : pairs) {
    RgbdFrame f;
    f.timestamp = rgb[i].timestamp;
    try {
      f.intensity = read_intensity_png(directory / rgb[i].filename);
      f.depth = read_depth_png(directory / depth[j].filename);
    } catch (const IoError&) {
      ++seq.skipped;
      continue;
    }
    if (!f.intensity.same_shape(f.depth)) {
      ++seq.skipped;
      continue;
    }
    if (intrinsics && intrinsics->width > 0) {
      f.intrinsics = *intrinsics;
    } else if (intrinsics) {
      f.intrinsics = *intrinsics;
      f.intrinsics.width = f.width();
      f.intrinsics.height = f.height();
    } else {
      f.intrinsics = default_tum_intrinsics(f.width(), f.height());
    }
    seq.frames.push_back(std::move(f));
  }
  std::stable_sort(seq.frames.begin(), seq.frames.end(),
                   [](const RgbdFrame& x, const RgbdFrame& y) { return x.timestamp < y.timestamp; });
  for (std::size_t k = 0; k < seq.frames.size(); ++k) {
    seq.frames[k].index = k;
    std::optional<RigidTransform> pose;
    if (!gt.empty()) {
      const double t = seq.frames[k].timestamp;
      auto it = std::lower_bound(gt.begin(), gt.end(), t,
                                 [](const TimedPose& p, double v) { return p.timestamp < v; });
      double best = max_time_diff;
      for (auto c : {it, it == gt.begin() ? it : std::prev(it)}) {
        if (c == gt.end()) continue;
        const double d = std::abs(c->timestamp - t);
        if (d <= best) {
          best = d;
          pose = c->pose;
        }
      }
    }
    seq.ground_truth.push_back(pose);
  }
  return seq;
}

void write_flow_file(const FlowField& field, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write flow file " + path.string());
  put_le(out, kFloMagic);
  put_le(out, static_cast<std::int32_t>(field.width()));
  put_le(out, static_cast<std::int32_t>(field.height()));
  for (int y = 0; y < field.height(); ++y) {
    for (int x = 0; x < field.width(); ++x) {
      const bool ok = field.is_valid(x, y);
      put_le(out, ok ? static_cast<float>(field.u(x, y)) : 0.0f);
      put_le(out, ok ? static_cast<float>(field.v(x, y)) : 0.0f);
    }
  }
  if (!out) throw IoError("short write to " + path.string());
}

FlowField read_flow_file(const fs::path& path, std::optional<std::pair<int, int>> expected_size) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open flow file " + path.string());
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (bytes.size() < 12) throw FormatError("flow file too short: " + path.string());
  const float magic = get_le<float>(bytes.data());
  if (magic != kFloMagic) throw FormatError("bad .flo magic in " + path.string());
  const auto w = get_le<std::int32_t>(bytes.data() + 4);
  const auto h = get_le<std::int32_t>(bytes.data() + 8);
  if (w < 0 || h < 0) throw FormatError("negative size in " + path.string());
  if (expected_size && (expected_size->first != w || expected_size->second != h)) {
    throw DimensionError("flow file " + path.string() + " is " + std::to_string(w) + "x" + std::to_string(h) +
                         ", expected " + std::to_string(expected_size->first) + "x" +
                         std::to_string(expected_size->second));
  }
  const std::size_t need = 12 + static_cast<std::size_t>(w) * h * 8;
  if (bytes.size() != need) throw FormatError("flow file payload size mismatch: " + path.string());
  FlowField f(w, h);
  const unsigned char* p = bytes.data() + 12;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x, p += 8) {
      f.set(x, y, get_le<float>(p), get_le<float>(p + 4));
    }
  }
  return f;
}

Trajectory read_trajectory(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open trajectory " + path.string());
  Trajectory traj;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string body = trim_comment(line);
    if (body.empty()) continue;
    std::istringstream is(body);
    double t, tx, ty, tz, qx, qy, qz, qw;
    std::string extra;
    if (!(is >> t >> tx >> ty >> tz >> qx >> qy >> qz >> qw) || (is >> extra)) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) +
                        ": expected 'timestamp tx ty tz qx qy qz qw'");
    }
    const Eigen::Quaterniond q(qw, qx, qy, qz);
    if (!(q.norm() > 0.0) || !std::isfinite(q.norm())) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": degenerate quaternion");
    }
    try {
      traj.push_back({t, RigidTransform::from_quaternion({tx, ty, tz}, q)});
    } catch (const ParameterError&) {
      throw FormatError(path.string() + ": line " + std::to_string(line_no) + ": timestamp not increasing");
    }
  }
  return traj;
}

void write_trajectory(const Trajectory& trajectory, const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write trajectory " + path.string());
  out << std::fixed;
  for (const auto& p : trajectory) {
    const auto q = p.pose.quaternion();
    out << std::setprecision(6) << p.timestamp << std::setprecision(9) << ' ' << p.pose.t.x() << ' '
        << p.pose.t.y() << ' ' << p.pose.t.z() << ' ' << q.x() << ' ' << q.y() << ' ' << q.z() << ' ' << q.w()
        << '\n';
  }
}

}  // namespace flowfusion
