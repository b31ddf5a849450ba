#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gazekit/dataset.hpp"
#include "gazekit/synth.hpp"

using namespace gazekit;
namespace fs = std::filesystem;

namespace {
constexpr double kDeg = M_PI / 180.0;

EyeAppearance plain_appearance() {
  EyeAppearance app;
  app.noise_sigma = 0.0;
  app.illum_strength = 0.0;
  app.eyelid_aperture_px = 16.0;
  app.iris_radius_px = 7.0;
  return app;
}

// Darkness-weighted centroid of the iris blob: thresholding halfway between
// iris and sclera levels excludes skin and sclera from the weights.
Vec2 iris_centroid(const GrayImage& img, const EyeAppearance& app) {
  const double threshold = 0.5 * (app.sclera_level + app.iris_level);
  double sw = 0.0, sx = 0.0, sy = 0.0;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      const double w = std::max(0.0, threshold - img.at(x, y));
      sw += w;
      sx += w * x;
      sy += w * y;
    }
  }
  REQUIRE(sw > 0.0);
  return {sx / sw, sy / sw};
}

std::string read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  REQUIRE(f.good());
  return std::string(std::istreambuf_iterator<char>(f), {});
}

std::string tmp_dir(const char* name) {
  const fs::path dir = fs::temp_directory_path() / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir.string();
}
}  // namespace

TEST_CASE("zero-gaze render centers the iris") {
  const EyeAppearance app = plain_appearance();
  const GrayImage img = render_eye({0, 0}, {0, 0}, app);
  const Vec2 centroid = iris_centroid(img, app);
  CHECK(std::abs(centroid.x() - 29.5) < 0.5);
  CHECK(std::abs(centroid.y() - 17.5) < 0.5);
}

TEST_CASE("mirrored gaze renders the horizontally mirrored patch bit for bit") {
  const EyeAppearance app = plain_appearance();
  for (const double yaw : {5.0, 12.0, -17.0}) {
    for (const double pitch : {0.0, 8.0, -4.0}) {
      const GrayImage a = render_eye({yaw * kDeg, pitch * kDeg}, {3 * kDeg, -2 * kDeg}, app);
      const GrayImage b = render_eye({-yaw * kDeg, pitch * kDeg}, {-3 * kDeg, -2 * kDeg}, app);
      CHECK(flip_horizontal(a).pixels == b.pixels);
    }
  }
}

TEST_CASE("iris displacement recovers the documented gain within 2 percent") {
  const EyeAppearance app = plain_appearance();
  double sum_xt = 0.0, sum_tt = 0.0;
  for (int i = -5; i <= 5; ++i) {
    const double yaw = 3.0 * i * kDeg;
    const GrayImage img = render_eye({yaw, 0}, {0, 0}, app);
    const double dx = iris_centroid(img, app).x() - 29.5;
    sum_xt += dx * std::tan(yaw);
    sum_tt += std::tan(yaw) * std::tan(yaw);
  }
  const double gain = sum_xt / sum_tt;
  CHECK(std::abs(gain - kIrisShiftPerTan) / kIrisShiftPerTan < 0.02);

  // Monotone displacement along each axis.
  double prev = -1e9;
  for (int i = -5; i <= 5; ++i) {
    const GrayImage img = render_eye({3.0 * i * kDeg, 0}, {0, 0}, app);
    const double x = iris_centroid(img, app).x();
    CHECK(x > prev);
    prev = x;
  }
}

TEST_CASE("renderer rejects out-of-range gaze and is seed deterministic") {
  EyeAppearance app = plain_appearance();
  CHECK_THROWS_AS(render_eye({35.0 * kDeg, 0}, {0, 0}, app), Error);
  app.noise_sigma = 4.0;
  app.person_seed = 77;
  const GrayImage a = render_eye({0.1, 0.05}, {0, 0}, app);
  const GrayImage b = render_eye({0.1, 0.05}, {0, 0}, app);
  CHECK(a.pixels == b.pixels);
  app.person_seed = 78;
  const GrayImage c = render_eye({0.1, 0.05}, {0, 0}, app);
  CHECK(a.pixels != c.pixels);
}

TEST_CASE("generated datasets use the documented default ranges") {
  const SynthConfig config;
  CHECK(config.gaze_range.yaw_lo_deg == -18.0);
  CHECK(config.gaze_range.yaw_hi_deg == 18.0);
  CHECK(config.gaze_range.pitch_lo_deg == -1.5);
  CHECK(config.gaze_range.pitch_hi_deg == 20.0);
}

TEST_CASE("regenerating with the same seed produces identical files") {
  SynthConfig config;
  config.persons = 2;
  config.samples_per_person = 6;
  config.seed = 12345;
  const std::string dir_a = tmp_dir("gazekit_synth_a");
  const std::string dir_b = tmp_dir("gazekit_synth_b");
  generate_persons(config, dir_a);
  generate_persons(config, dir_b);

  CHECK(read_file(dir_a + "/annotations.txt") == read_file(dir_b + "/annotations.txt"));
  CHECK(read_file(dir_a + "/calibration.txt") == read_file(dir_b + "/calibration.txt"));
  const std::vector<AnnotationRecord> recs = parse_annotations(dir_a + "/annotations.txt");
  for (const AnnotationRecord& r : recs)
    CHECK(read_file(dir_a + "/" + r.image) == read_file(dir_b + "/" + r.image));
  fs::remove_all(dir_a);
  fs::remove_all(dir_b);
}

TEST_CASE("pipeline recovers the generating labels from synthetic records") {
  SynthConfig config;
  config.persons = 2;
  config.samples_per_person = 15;
  config.seed = 5;
  const std::string dir = tmp_dir("gazekit_synth_consistency");
  const SynthDataset ds = generate_persons(config, dir);

  const std::vector<AnnotationRecord> records = parse_annotations(ds.annotations_path);
  const CalibrationFile calib = parse_calibration(ds.calibration_path);
  REQUIRE(records.size() == ds.truth.size());

  BuildOptions options;
  const BuildOutput built = build_normalized_dataset(records, calib, options, dir);
  REQUIRE(built.stats.failed_records == 0);
  REQUIRE(built.samples.size() == records.size() * 2);

  std::vector<double> gaze_err, head_err;
  for (std::size_t i = 0; i < records.size(); ++i) {
    const NormalizedSample& left = built.samples[2 * i];
    const NormalizedSample& right = built.samples[2 * i + 1];
    REQUIRE(left.eye == 'L');
    REQUIRE(right.eye == 'R');
    gaze_err.push_back(angular_error_deg(left.gaze, ds.truth[i].gaze_left));
    gaze_err.push_back(angular_error_deg(right.gaze, ds.truth[i].gaze_right));
    head_err.push_back(angular_error_deg(GazeAngles{left.head.yaw, left.head.pitch},
                                         GazeAngles{ds.truth[i].head_left.yaw,
                                                    ds.truth[i].head_left.pitch}));
  }
  std::sort(gaze_err.begin(), gaze_err.end());
  std::sort(head_err.begin(), head_err.end());
  CHECK(gaze_err[gaze_err.size() / 2] < 0.5);
  CHECK(head_err[head_err.size() / 2] < 0.5);
  fs::remove_all(dir);
}

TEST_CASE("generated records annotate pupils consistently with the warp") {
  SynthConfig config;
  config.persons = 1;
  config.samples_per_person = 8;
  config.seed = 9;
  const std::string dir = tmp_dir("gazekit_synth_pupil");
  const SynthDataset ds = generate_persons(config, dir);
  const std::vector<AnnotationRecord> records = parse_annotations(ds.annotations_path);
  const CalibrationFile calib = parse_calibration(ds.calibration_path);
  const BuildOutput built = build_normalized_dataset(records, calib, BuildOptions{}, dir);

  for (const NormalizedSample& s : built.samples) {
    REQUIRE(s.pupil.has_value());
    // The annotated pupil is the true iris centre; after normalization it has
    // to land within a pixel of where the renderer put it.
    const Vec2 expected = rendered_iris_center(s.gaze, s.head, s.patch.width, s.patch.height);
    CHECK((*s.pupil - expected).norm() < 1.0);
  }
  fs::remove_all(dir);
}
