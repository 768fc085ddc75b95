#include "gmu/lidar.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <numbers>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"

namespace gmu {
namespace {

std::vector<std::uint8_t> slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t u32_le(const std::uint8_t* p) {
  return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
         (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

float f32_le(const std::uint8_t* p) { return std::bit_cast<float>(u32_le(p)); }

}  // namespace

PointCloud read_kitti_scan(const std::string& path) {
  const auto bytes = slurp(path);
  if (bytes.size() % 16 != 0) {
    throw Error(ErrorCode::MalformedScan, path + " is " + std::to_string(bytes.size()) +
                                              " bytes, not a multiple of 16");
  }
  PointCloud cloud;
  cloud.raw_count = bytes.size() / 16;
  cloud.points.reserve(cloud.raw_count);
  for (std::size_t i = 0; i < cloud.raw_count; ++i) {
    const std::uint8_t* p = bytes.data() + 16 * i;
    LidarPoint pt{f32_le(p), f32_le(p + 4), f32_le(p + 8), f32_le(p + 12), i};
    if (!std::isfinite(pt.x) || !std::isfinite(pt.y) || !std::isfinite(pt.z) ||
        !std::isfinite(pt.intensity)) {
      ++cloud.dropped_nonfinite;
      continue;
    }
    cloud.points.push_back(pt);
  }
  return cloud;
}

std::vector<std::uint16_t> read_kitti_labels(const std::string& path, std::size_t n_expected) {
  const auto bytes = slurp(path);
  if (bytes.size() != 4 * n_expected) {
    throw Error(ErrorCode::LengthMismatch, path + " holds " + std::to_string(bytes.size() / 4) +
                                               " labels, scan has " +
                                               std::to_string(n_expected) + " points");
  }
  std::vector<std::uint16_t> out(n_expected);
  for (std::size_t i = 0; i < n_expected; ++i) {
    out[i] = static_cast<std::uint16_t>(u32_le(bytes.data() + 4 * i) & 0xFFFFu);
  }
  return out;
}

std::int32_t LabelMap::lookup(std::uint16_t raw) const {
  auto it = train_id.find(raw);
  if (it == train_id.end()) return kIgnoreLabel;
  return it->second < 0 ? kOodLabel : it->second;
}

LabelMap read_label_map(const std::string& path) {
  const CsvTable table = read_csv_file(path);
  const std::size_t raw_col = table.column("raw_id");
  const std::size_t train_col = table.column("train_id");
  const std::size_t name_col = table.column("name");
  LabelMap map;
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    try {
      const long raw = std::stol(row[raw_col]);
      const long train = std::stol(row[train_col]);
      if (raw < 0 || raw > 0xFFFF) throw std::out_of_range("raw id");
      map.train_id[static_cast<std::uint16_t>(raw)] = static_cast<std::int32_t>(train);
      if (train >= 0) map.names.emplace(static_cast<std::int32_t>(train), row[name_col]);
    } catch (const std::logic_error&) {
      throw Error(ErrorCode::CorruptPayload,
                  path + ": bad label map row " + std::to_string(r + 2));
    }
  }
  return map;
}

std::vector<std::int32_t> remap_labels(const std::vector<std::uint16_t>& raw, const LabelMap& map) {
  std::vector<std::int32_t> out(raw.size());
  std::transform(raw.begin(), raw.end(), out.begin(), [&](auto r) { return map.lookup(r); });
  return out;
}

void attach_labels(PointCloud& cloud, std::vector<std::int32_t> labels) {
  if (labels.size() != cloud.raw_count) {
    throw Error(ErrorCode::LengthMismatch, std::to_string(labels.size()) + " labels for " +
                                               std::to_string(cloud.raw_count) + " points");
  }
  cloud.labels = std::move(labels);
}

std::optional<Pixel> project_point(double x, double y, double z, const ProjectionGeometry& g) {
  const double r = std::sqrt(x * x + y * y + z * z);
  if (!(r > 0.0)) return std::nullopt;
  const double deg = std::numbers::pi / 180.0;
  const double fov_up = g.fov_up_deg * deg;
  const double fov_down = g.fov_down_deg * deg;
  const double yaw = std::atan2(y, x);
  const double pitch = std::asin(std::clamp(z / r, -1.0, 1.0));
  const double u = std::floor(0.5 * (1.0 - yaw / std::numbers::pi) * static_cast<double>(g.width));
  const double v = std::floor((1.0 - (pitch - fov_down) / (fov_up - fov_down)) *
                              static_cast<double>(g.height));
  const double max_col = static_cast<double>(g.width - 1);
  const double max_row = static_cast<double>(g.height - 1);
  return Pixel{static_cast<std::size_t>(std::clamp(v, 0.0, max_row)),
               static_cast<std::size_t>(std::clamp(u, 0.0, max_col))};
}

RangeImage spherical_project(const PointCloud& cloud, const ProjectionGeometry& g) {
  if (g.height == 0 || g.width == 0) throw Error(ErrorCode::InvalidArgument, "empty geometry");
  if (!(g.fov_up_deg > g.fov_down_deg)) {
    throw Error(ErrorCode::InvalidArgument, "fov_up must exceed fov_down");
  }
  const std::size_t pixels = g.height * g.width;
  RangeImage img;
  img.geometry = g;
  for (auto* ch : {&img.x, &img.y, &img.z, &img.intensity, &img.range})
    ch->assign(pixels, kInvalidPixel);
  img.mask.assign(pixels, 0);
  img.empty_cloud = cloud.points.empty();

  // Winning point per pixel, resolved in point order.
  constexpr std::size_t kNone = static_cast<std::size_t>(-1);
  std::vector<std::size_t> owner(pixels, kNone);
  std::vector<double> best_range(pixels, 0.0);
  std::size_t placed = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const LidarPoint& p = cloud.points[i];
    const auto px = project_point(p.x, p.y, p.z, g);
    if (!px) {
      ++img.dropped;
      continue;
    }
    const double r = std::sqrt(static_cast<double>(p.x) * p.x + static_cast<double>(p.y) * p.y +
                               static_cast<double>(p.z) * p.z);
    const std::size_t idx = img.index(px->row, px->col);
    if (owner[idx] == kNone) {
      ++placed;
    } else if (!(r < best_range[idx])) {
      continue;
    }
    owner[idx] = i;
    best_range[idx] = r;
  }
  img.dropped += (cloud.points.size() - img.dropped) - placed;

  if (cloud.labels) img.labels.emplace(pixels, kIgnoreLabel);
  for (std::size_t idx = 0; idx < pixels; ++idx) {
    if (owner[idx] == kNone) continue;
    const LidarPoint& p = cloud.points[owner[idx]];
    img.x[idx] = p.x;
    img.y[idx] = p.y;
    img.z[idx] = p.z;
    img.intensity[idx] = p.intensity;
    img.range[idx] = static_cast<float>(best_range[idx]);
    img.mask[idx] = 1;
    if (img.labels) (*img.labels)[idx] = (*cloud.labels)[p.source_index];
  }
  return img;
}

void write_range_pgm(const std::string& path, const RangeImage& image, double max_range) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot write " + path);
  out << "P5\n" << image.geometry.width << ' ' << image.geometry.height << "\n255\n";
  std::vector<char> row(image.geometry.width);
  for (std::size_t r = 0; r < image.geometry.height; ++r) {
    for (std::size_t c = 0; c < image.geometry.width; ++c) {
      const std::size_t idx = image.index(r, c);
      double v = 0.0;
      if (image.mask[idx]) v = std::clamp(image.range[idx] / max_range, 0.0, 1.0) * 255.0;
      row[c] = static_cast<char>(static_cast<unsigned char>(std::lround(v)));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path);
}

}  // namespace gmu
