#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace gmu {

struct LidarPoint {
  float x = 0, y = 0, z = 0, intensity = 0;
  std::size_t source_index = 0;  // position in the scan file
};

struct PointCloud {
  std::vector<LidarPoint> points;
  std::size_t raw_count = 0;          // points in the file, including dropped ones
  std::size_t dropped_nonfinite = 0;
  /// Train ids indexed by source_index, when labels were attached.
  std::optional<std::vector<std::int32_t>> labels;
};

/// Packed little-endian float32 quadruples (x, y, z, intensity). Points with
/// a non-finite coordinate are dropped and counted.
PointCloud read_kitti_scan(const std::string& path);

/// Low 16 bits of each little-endian u32 record (the semantic class).
std::vector<std::uint16_t> read_kitti_labels(const std::string& path, std::size_t n_expected);

/// Raw ids absent from the label map.
inline constexpr std::int32_t kIgnoreLabel = -1;
/// Raw ids the label map sends to a negative train id: held out of training
/// and treated as out-of-distribution ground truth.
inline constexpr std::int32_t kOodLabel = -2;

struct LabelMap {
  std::map<std::uint16_t, std::int32_t> train_id;
  std::map<std::int32_t, std::string> names;

  std::int32_t lookup(std::uint16_t raw) const;
};

/// CSV with header raw_id,train_id,name.
LabelMap read_label_map(const std::string& path);

std::vector<std::int32_t> remap_labels(const std::vector<std::uint16_t>& raw, const LabelMap& map);

/// Attaches remapped labels; `labels` is indexed by source point.
void attach_labels(PointCloud& cloud, std::vector<std::int32_t> labels);

struct ProjectionGeometry {
  std::size_t height = 64;
  std::size_t width = 2048;
  double fov_up_deg = 3.0;
  double fov_down_deg = -25.0;
};

struct Pixel {
  std::size_t row = 0;
  std::size_t col = 0;
};

/// Spherical pixel of a point, or nothing for a point at the origin.
std::optional<Pixel> project_point(double x, double y, double z, const ProjectionGeometry& g);

inline constexpr float kInvalidPixel = -1.0f;

/// Five-channel range view. Invalid pixels hold -1 in every channel.
struct RangeImage {
  ProjectionGeometry geometry;
  std::vector<float> x, y, z, intensity, range;
  std::vector<std::uint8_t> mask;
  std::optional<std::vector<std::int32_t>> labels;  // kIgnoreLabel where invalid
  std::size_t dropped = 0;       // collisions lost plus points at the origin
  bool empty_cloud = false;

  std::size_t index(std::size_t row, std::size_t col) const {
    return row * geometry.width + col;
  }
};

/// Nearest point wins a shared pixel; equal ranges go to the lower point index.
RangeImage spherical_project(const PointCloud& cloud, const ProjectionGeometry& g = {});

/// 8-bit binary PGM of the range channel, linear in [0, max_range] metres;
/// invalid pixels are black.
void write_range_pgm(const std::string& path, const RangeImage& image, double max_range = 80.0);

}  // namespace gmu
