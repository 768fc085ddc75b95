#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

#include "gmu/csv.hpp"
#include "gmu/error.hpp"
#include "gmu/lidar.hpp"
#include "gmu/ood.hpp"
#include "gmu/persist.hpp"
#include "gmu/report.hpp"
#include "gmu/synth.hpp"
#include "gmu/tensor.hpp"
#include "support.hpp"

using namespace gmu;
namespace fs = std::filesystem;

namespace {

ErrorCode code_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected gmu::Error");
  return ErrorCode::IoError;
}

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("gmu_dataio_" + std::to_string(std::random_device{}()) + "_" +
            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

void write_bytes(const std::string& path, const std::string& bytes) {
  std::ofstream out(path, std::ios::binary);
  out << bytes;
}

std::string scan_bytes(const std::vector<std::array<float, 4>>& points) {
  std::string bytes(points.size() * 16, '\0');
  for (std::size_t i = 0; i < points.size(); ++i)
    std::memcpy(bytes.data() + 16 * i, points[i].data(), 16);
  return bytes;
}

std::string label_bytes(const std::vector<std::uint32_t>& labels) {
  std::string bytes(labels.size() * 4, '\0');
  std::memcpy(bytes.data(), labels.data(), bytes.size());
  return bytes;
}

std::string tensor_bytes(const Tensor& t) {
  std::stringstream ss;
  write_tensor(ss, t);
  return ss.str();
}

bool same_scores(const std::vector<SampleReport>& a, const std::vector<SampleReport>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const auto& x = a[i];
    const auto& y = b[i];
    if (x.predicted_class != y.predicted_class || x.epistemic != y.epistemic ||
        x.aleatoric != y.aleatoric || x.min_mahalanobis_sq != y.min_mahalanobis_sq ||
        x.is_ood != y.is_ood || x.ddu_score != y.ddu_score || x.confidence != y.confidence ||
        x.responsibility_class != y.responsibility_class)
      return false;
  }
  return true;
}

}  // namespace

TEST_CASE("tensor header layout is little-endian and fixed") {
  const std::vector<std::uint32_t> v = {1, 2};
  const std::string b = tensor_bytes(Tensor::from_u32({2}, v));
  REQUIRE(b.size() == 8 + 2 + 1 + 1 + 8 + 8);
  CHECK(std::memcmp(b.data(), "GMUTNSR\0", 8) == 0);
  CHECK(b[8] == 1);
  CHECK(b[9] == 0);
  CHECK(b[10] == 2);
  CHECK(b[11] == 1);
  CHECK(b[12] == 2);
  CHECK(b[20] == 1);
  CHECK(b[24] == 2);
}

TEST_CASE("property: tensor round trip is bitwise for every dtype") {
  gen::Rng rng(61);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t rank = rng() % 4;
    std::vector<std::uint64_t> shape;
    std::size_t n = 1;
    for (std::size_t r = 0; r < rank; ++r) {
      shape.push_back(rng() % 5);
      n *= shape.back();
    }
    std::vector<Tensor> tensors;
    std::vector<double> f64(n);
    std::vector<float> f32(n);
    std::vector<std::uint32_t> u32(n);
    std::vector<std::uint8_t> u8(n);
    for (std::size_t i = 0; i < n; ++i) {
      const std::uint64_t bits = rng();
      std::memcpy(&f64[i], &bits, 8);  // includes NaN payloads and subnormals
      std::memcpy(&f32[i], &bits, 4);
      u32[i] = static_cast<std::uint32_t>(bits);
      u8[i] = static_cast<std::uint8_t>(bits);
    }
    tensors.push_back(Tensor::from_f64(shape, f64));
    tensors.push_back(Tensor::from_f32(shape, f32));
    tensors.push_back(Tensor::from_u32(shape, u32));
    tensors.push_back(Tensor::from_u8(shape, u8));
    for (const Tensor& t : tensors) {
      std::stringstream ss(tensor_bytes(t));
      const Tensor back = read_tensor(ss);
      CHECK(back == t);
      CHECK(back.bytes() == t.bytes());
    }
  }
}

TEST_CASE("tensor decoding errors") {
  const std::vector<double> v = {1.5, 2.5, 3.5};
  const std::string good = tensor_bytes(Tensor::from_f64({3}, v));
  auto decode = [](std::string bytes) {
    std::stringstream ss(bytes);
    read_tensor(ss);
  };
  std::string bad = good;
  bad[0] = 'X';
  CHECK(code_of([&] { decode(bad); }) == ErrorCode::BadMagic);
  bad = good;
  bad[8] = 2;
  CHECK(code_of([&] { decode(bad); }) == ErrorCode::UnsupportedVersion);
  bad = good;
  bad[10] = 9;
  CHECK(code_of([&] { decode(bad); }) == ErrorCode::CorruptPayload);
  CHECK(code_of([&] { decode(good.substr(0, good.size() - 1)); }) == ErrorCode::TruncatedPayload);
  CHECK(code_of([&] { decode(good.substr(0, 5)); }) != ErrorCode::IoError);
  CHECK(code_of([] { read_tensor(std::string("/nonexistent/x.tensor")); }) == ErrorCode::IoError);
}

TEST_CASE("matrix and label conversions") {
  const Matrix m(2, 3, {1, 2, 3, 4, 5, 6});
  CHECK(tensor_to_matrix(matrix_to_tensor(m)) == m);
  const std::vector<float> f = {1.5f, -2.0f};
  CHECK(tensor_to_matrix(Tensor::from_f32({1, 2}, f)) == Matrix(1, 2, {1.5, -2.0}));
  const std::vector<std::int32_t> labels = {0, 3, 1};
  CHECK(tensor_to_labels(labels_to_tensor(labels)) == labels);
  const std::vector<std::uint8_t> small = {2, 0};
  CHECK(tensor_to_labels(Tensor::from_u8({2}, small)) == std::vector<std::int32_t>{2, 0});
  CHECK(code_of([&] { tensor_to_matrix(labels_to_tensor(labels)); }) != ErrorCode::IoError);
  CHECK(code_of([&] { tensor_to_labels(matrix_to_tensor(m)); }) == ErrorCode::DimensionMismatch);
}

TEST_CASE("csv quoting and parsing") {
  std::stringstream ss;
  CsvWriter w(ss);
  w.row({"a", "b,c", "say \"hi\"", "line\nbreak"});
  w.row({"1", "", "x", "y"});
  CHECK(ss.str() == "a,\"b,c\",\"say \"\"hi\"\"\",\"line\nbreak\"\r\n1,,x,y\r\n");
  const CsvTable t = read_csv(ss);
  CHECK(t.header == std::vector<std::string>{"a", "b,c", "say \"hi\"", "line\nbreak"});
  REQUIRE(t.rows.size() == 1);
  CHECK(t.rows[0][1].empty());
  CHECK(t.column("say \"hi\"") == 2);
  CHECK(code_of([&] { t.column("missing"); }) == ErrorCode::InvalidArgument);
  std::stringstream bad("a,b\r\n\"open,1\r\n");
  CHECK(code_of([&] { read_csv(bad); }) == ErrorCode::CorruptPayload);
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(2.0) == "2");
}

TEST_CASE("kitti scan parsing") {
  TempDir dir;
  write_bytes(dir.file("one.bin"), scan_bytes({{1.0f, 2.0f, 3.0f, 0.5f}}));
  const PointCloud one = read_kitti_scan(dir.file("one.bin"));
  REQUIRE(one.points.size() == 1);
  CHECK(one.points[0].x == 1.0f);
  CHECK(one.points[0].y == 2.0f);
  CHECK(one.points[0].z == 3.0f);
  CHECK(one.points[0].intensity == 0.5f);

  write_bytes(dir.file("nan.bin"),
              scan_bytes({{1, 1, 1, 0}, {NAN, 0, 0, 0}, {2, 2, INFINITY, 0}, {3, 3, 3, 1}}));
  const PointCloud nan = read_kitti_scan(dir.file("nan.bin"));
  CHECK(nan.raw_count == 4);
  CHECK(nan.dropped_nonfinite == 2);
  REQUIRE(nan.points.size() == 2);
  CHECK(nan.points[1].source_index == 3);

  write_bytes(dir.file("bad.bin"), std::string(17, '\0'));
  CHECK(code_of([&] { read_kitti_scan(dir.file("bad.bin")); }) == ErrorCode::MalformedScan);
  write_bytes(dir.file("empty.bin"), "");
  CHECK(read_kitti_scan(dir.file("empty.bin")).points.empty());
}

TEST_CASE("kitti labels and remapping") {
  TempDir dir;
  write_bytes(dir.file("s.label"), label_bytes({0x00050028u, 40u, 99u, 1u}));
  const auto raw = read_kitti_labels(dir.file("s.label"), 4);
  CHECK(raw == std::vector<std::uint16_t>{40, 40, 99, 1});
  CHECK(code_of([&] { read_kitti_labels(dir.file("s.label"), 5); }) == ErrorCode::LengthMismatch);

  write_bytes(dir.file("map.csv"), "raw_id,train_id,name\n40,0,road\n1,-1,outlier\n");
  const LabelMap map = read_label_map(dir.file("map.csv"));
  CHECK(remap_labels(raw, map) == std::vector<std::int32_t>{0, 0, kIgnoreLabel, kOodLabel});
  CHECK(map.names.at(0) == "road");
  write_bytes(dir.file("badmap.csv"), "raw_id,train_id,name\nforty,0,road\n");
  CHECK(code_of([&] { read_label_map(dir.file("badmap.csv")); }) == ErrorCode::CorruptPayload);
}

TEST_CASE("projection of hand-placed points") {
  const ProjectionGeometry g;  // 64 x 2048, +3 / -25 degrees
  const double tan10 = std::tan(10.0 * std::numbers::pi / 180.0);
  // u = floor(0.5 (1 - yaw/pi) W); v = floor((1 - (pitch + 25deg) / 28deg) H)
  const auto p1 = project_point(10, 0, 0, g);  // yaw 0, pitch 0: v = floor(64 * 3/28) = 6
  const auto p2 = project_point(0, 10, 0, g);  // yaw pi/2
  const auto p3 = project_point(0, -10, -10 * tan10, g);  // yaw -pi/2, pitch -10: floor(64*13/28)
  REQUIRE(p1);
  REQUIRE(p2);
  REQUIRE(p3);
  CHECK(p1->col == 1024);
  CHECK(p1->row == 6);
  CHECK(p2->col == 512);
  CHECK(p2->row == 6);
  CHECK(p3->col == 1536);
  CHECK(p3->row == 29);
  CHECK_FALSE(project_point(0, 0, 0, g));
  // Out-of-view pitch clamps to the border rows.
  CHECK(project_point(1, 0, 10, g)->row == 0);
  CHECK(project_point(1, 0, -10, g)->row == 63);
  CHECK(project_point(-1, 0, 0, g)->col == 0);
}

TEST_CASE("range image channels and collisions") {
  PointCloud cloud;
  cloud.points = {{10, 0, 0, 0.25f, 0}, {0, 10, 0, 0.5f, 1}, {5, 0, 0, 0.75f, 2},
                  {5, 0, 0, 0.9f, 3},   {0, 0, 0, 1.0f, 4}};
  cloud.raw_count = 5;
  const RangeImage img = spherical_project(cloud);
  CHECK(img.x.size() == 64u * 2048u);
  CHECK(img.mask.size() == 64u * 2048u);
  const std::size_t i = img.index(6, 1024);
  CHECK(img.mask[i] == 1);
  CHECK(img.range[i] == 5.0f);
  CHECK(img.intensity[i] == 0.75f);  // nearer point wins, tie to the lower index
  CHECK(img.dropped == 3);           // far duplicate, tie loser, origin point
  CHECK(img.range[img.index(6, 512)] == 10.0f);
  CHECK(img.range[img.index(0, 0)] == kInvalidPixel);
  CHECK(img.x[img.index(0, 0)] == kInvalidPixel);
  CHECK(std::count(img.mask.begin(), img.mask.end(), std::uint8_t{1}) == 2);

  const RangeImage empty = spherical_project(PointCloud{});
  CHECK(empty.empty_cloud);
}

TEST_CASE("property: projection round trip and idempotence") {
  gen::Rng rng(62);
  PointCloud cloud;
  for (std::size_t i = 0; i < 5000; ++i) {
    const float x = static_cast<float>(gen::uniform(rng, -60, 60));
    const float y = static_cast<float>(gen::uniform(rng, -60, 60));
    const float z = static_cast<float>(gen::uniform(rng, -5, 3));
    cloud.points.push_back({x, y, z, 0.0f, i});
  }
  cloud.raw_count = cloud.points.size();
  for (const ProjectionGeometry g : {ProjectionGeometry{}, ProjectionGeometry{16, 256, 10, -30}}) {
    const RangeImage img = spherical_project(cloud, g);
    for (std::size_t r = 0; r < g.height; ++r)
      for (std::size_t c = 0; c < g.width; ++c) {
        const std::size_t k = img.index(r, c);
        if (!img.mask[k]) continue;
        const double x = img.x[k], y = img.y[k], z = img.z[k];
        const double range = std::sqrt(x * x + y * y + z * z);
        CHECK(std::fabs(img.range[k] - range) <= 1e-5 * range);
        const auto px = project_point(x, y, z, g);
        REQUIRE(px);
        CHECK(px->row == r);
        CHECK(px->col == c);
      }
  }
}

TEST_CASE("labels follow the winning point") {
  PointCloud cloud;
  cloud.points = {{10, 0, 0, 0, 0}, {5, 0, 0, 0, 1}, {0, 10, 0, 0, 2}};
  cloud.raw_count = 3;
  attach_labels(cloud, {1, kOodLabel, 2});
  const RangeImage img = spherical_project(cloud);
  REQUIRE(img.labels);
  CHECK((*img.labels)[img.index(6, 1024)] == kOodLabel);
  CHECK((*img.labels)[img.index(6, 512)] == 2);
  CHECK((*img.labels)[img.index(0, 0)] == kIgnoreLabel);
  CHECK(code_of([&] { attach_labels(cloud, {1}); }) == ErrorCode::LengthMismatch);
}

TEST_CASE("range pgm export") {
  TempDir dir;
  PointCloud cloud;
  cloud.points = {{40, 0, 0, 0, 0}};
  cloud.raw_count = 1;
  const RangeImage img = spherical_project(cloud, {4, 8, 3, -25});
  write_range_pgm(dir.file("r.pgm"), img);
  std::ifstream in(dir.file("r.pgm"), std::ios::binary);
  std::string magic;
  std::size_t w = 0, h = 0, maxval = 0;
  in >> magic >> w >> h >> maxval;
  in.get();
  CHECK(magic == "P5");
  CHECK(w == 8);
  CHECK(h == 4);
  CHECK(maxval == 255);
  std::string pixels((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  REQUIRE(pixels.size() == 32);
  const auto px = project_point(40, 0, 0, img.geometry);
  CHECK(static_cast<unsigned char>(pixels[px->row * 8 + px->col]) > 0);
  CHECK(static_cast<unsigned char>(pixels[0]) == 0);
}

TEST_CASE("synth spec parsing") {
  const SynthSpec spec = parse_synth_spec(default_synth_spec_text());
  CHECK(spec.dim == 4);
  REQUIRE(spec.classes.size() == 3);
  CHECK(spec.classes[1].name == "vegetation");
  CHECK(spec.classes[1].cov(0, 1) == 0.5);
  CHECK(spec.classes[2].cov(1, 1) == 2.0);
  CHECK(spec.classes[0].train == 2000);
  CHECK_FALSE(spec.seed);

  const SynthSpec minimal = parse_synth_spec("dim = 1\nseed = 5\n[class]\nmean = 2\ntrain = 10\n");
  CHECK(*minimal.seed == 5);
  CHECK(minimal.classes[0].cov == Matrix::identity(1));

  CHECK(code_of([] { parse_synth_spec("dim = 2\n[class]\nmean = 1\ntrain = 10\n"); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { parse_synth_spec("dim = 1\nbogus = 1\n"); }) == ErrorCode::InvalidSpec);
  CHECK(code_of([] { parse_synth_spec("dim = 1\n[class]\nmean = 0\ncov = -1\ntrain = 5\n"); }) ==
        ErrorCode::InvalidSpec);
  CHECK(code_of([] { parse_synth_spec("dim = 1\n"); }) == ErrorCode::InvalidSpec);
}

TEST_CASE("synth generation is deterministic per seed") {
  const SynthSpec spec = parse_synth_spec(default_synth_spec_text());
  const SynthData a = synth_generate(spec, 3);
  const SynthData b = synth_generate(spec, 3);
  const SynthData c = synth_generate(spec, 4);
  CHECK(a.train.features == b.train.features);
  CHECK(a.ood.features == b.ood.features);
  CHECK(a.test.labels == b.test.labels);
  CHECK_FALSE(a.train.features == c.train.features);
  CHECK(a.train.size() == 5000);
  CHECK(a.test.size() == 1250);
  CHECK(a.ood.size() == 250);
}

TEST_CASE("synth data supports fitting and OOD calibration") {
  const SynthSpec spec = parse_synth_spec(
      "dim = 2\n[class]\nmean = 3, 0\ntrain = 1000\n[class]\nmean = -3, 0\ntrain = 1000\n");
  const SynthData data = synth_generate(spec, 9);
  const GmmModel m = fit_gmm(data.train, 2);
  for (std::size_t c = 0; c < 2; ++c)
    for (std::size_t k = 0; k < 2; ++k)
      CHECK(std::fabs(m.components[c].mu[k] - spec.classes[c].mean[k]) < 0.1);
  CHECK(std::exp(m.components[0].log_pi) == doctest::Approx(0.5));

  std::string far = "dim = 8\ndisplacement = 10\n[class]\nmean = 0,0,0,0,0,0,0,0\ntrain = 2000\nood = 5000\n";
  const SynthData d10 = synth_generate(parse_synth_spec(far), 1);
  const GmmModel m10 = fit_gmm(d10.train, 1);
  std::size_t flagged = 0;
  for (std::size_t i = 0; i < d10.ood.size(); ++i) flagged += is_ood(m10, d10.ood.row(i), make_policy(8)).flag;
  CHECK(static_cast<double>(flagged) / d10.ood.size() >= 0.99);

  std::string null = "dim = 8\ndisplacement = 0\n[class]\nmean = 0,0,0,0,0,0,0,0\ntrain = 20000\nood = 40000\n";
  const SynthData d0 = synth_generate(parse_synth_spec(null), 1);
  const GmmModel m0 = fit_gmm(d0.train, 1);
  flagged = 0;
  for (std::size_t i = 0; i < d0.ood.size(); ++i) flagged += is_ood(m0, d0.ood.row(i), make_policy(8)).flag;
  CHECK(std::fabs(static_cast<double>(flagged) / d0.ood.size() - 0.025) < 0.005);
}

TEST_CASE("largest eigenvalue") {
  CHECK(largest_eigenvalue(Matrix(2, 2, {2, 0, 0, 5})) == doctest::Approx(5.0).epsilon(1e-9));
  CHECK(largest_eigenvalue(Matrix(2, 2, {2, 1, 1, 2})) == doctest::Approx(3.0).epsilon(1e-9));
}

TEST_CASE("model and ensemble persistence is bitwise") {
  const SynthData data = synth_generate(parse_synth_spec(default_synth_spec_text()), 2);
  GmmModel m = fit_gmm(data.train, 3);
  m.class_names = {"road", "vegetation", "car"};
  const GmmEnsemble e = sample_ensemble(build_posterior(m), 12, 77);

  std::stringstream ms, es;
  save_model(ms, m);
  save_ensemble(es, e);
  const GmmModel m2 = load_model(ms);
  const GmmEnsemble e2 = load_ensemble(es);
  CHECK(m2.class_names == m.class_names);
  CHECK(e2.seed == 77);
  CHECK(e2.size() == 12);
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(m2.components[c].mu == m.components[c].mu);
    CHECK(m2.components[c].sigma == m.components[c].sigma);
    CHECK(m2.components[c].factor.lower() == m.components[c].factor.lower());
    CHECK(m2.components[c].log_pi == m.components[c].log_pi);
  }
  const OodPolicy p = make_policy(4);
  CHECK(same_scores(score_batch(m, e, p, data.test.features),
                    score_batch(m2, e2, p, data.test.features)));
  std::size_t agree = 0;
  for (std::size_t i = 0; i < data.test.size(); ++i)
    for (std::size_t k = 0; k < e.size(); ++k)
      agree += classify(e.models[k], data.test.row(i)) == classify(e2.models[k], data.test.row(i));
  CHECK(agree == data.test.size() * e.size());
}

TEST_CASE("persistence error handling") {
  GmmModel m;
  m.d = 1;
  m.num_classes = 1;
  m.components.push_back(make_component(0, {0}, Matrix(1, 1, {1.0}), 0.0, 10));
  std::stringstream ss;
  save_model(ss, m);
  const std::string good = ss.str();

  auto load = [](const std::string& bytes) {
    std::stringstream in(bytes);
    load_model(in);
  };
  CHECK(code_of([&] { load("NOTAMODEL\n"); }) == ErrorCode::BadMagic);
  std::string v2 = good;
  v2.replace(v2.find("version=1"), 9, "version=2");
  CHECK(code_of([&] { load(v2); }) == ErrorCode::VersionMismatch);
  CHECK(code_of([&] { load(good.substr(0, good.size() - 3)); }) == ErrorCode::CorruptPayload);
  std::stringstream ens_bytes(good);
  CHECK(code_of([&] { load_ensemble(ens_bytes); }) == ErrorCode::BadMagic);
}

TEST_CASE("report csv round trip") {
  std::vector<SampleReport> reports(3);
  reports[0] = {2, 0.1, 0.2, 3.5, false, true, 4.25, 0.75, 2};
  reports[1] = {0, 0.0, 1e-300, 1e10, true, false, -1.0 / 3.0, 1.0, 0};
  reports[2] = {1, std::log(2.0), std::log(3.0), 0.0, false, true, 0.0, 0.5, 1};
  std::stringstream ss;
  write_report_csv(ss, reports);
  const auto back = read_report_csv(ss);
  REQUIRE(back.size() == 3);
  CHECK(same_scores(reports, back));
  CHECK(back[1].aleatoric_valid == false);
  std::stringstream bad("index,predicted_class\n0,1\n");
  CHECK(code_of([&] { read_report_csv(bad); }) == ErrorCode::InvalidArgument);
}
