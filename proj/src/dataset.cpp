#include "gazekit/dataset.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include "gazekit/parallel.hpp"
#include "gazekit/text_io.hpp"

namespace fs = std::filesystem;

namespace gazekit {


CalibrationFile parse_calibration(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path);
  CalibrationFile calib;
  std::map<std::string, std::vector<double>> values;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    const std::string where = path + ":" + std::to_string(line_no);
    if (eq == std::string::npos) fail(ErrorKind::ParseError, where + ": expected key=value");
    const std::string key = line.substr(0, eq);
    std::vector<double> nums;
    for (const std::string& tok : split_whitespace(line.substr(eq + 1)))
      nums.push_back(parse_double(tok, where));
    if (nums.empty()) fail(ErrorKind::ParseError, where + ": missing value for " + key);
    values[key] = std::move(nums);
  }

  const auto scalar = [&](const std::string& key) {
    const auto it = values.find(key);
    if (it == values.end()) fail(ErrorKind::ParseError, path + ": missing key " + key);
    return it->second[0];
  };
  calib.camera.fx = scalar("fx");
  calib.camera.fy = scalar("fy");
  calib.camera.cx = scalar("cx");
  calib.camera.cy = scalar("cy");
  if (calib.camera.fx <= 0.0 || calib.camera.fy <= 0.0)
    fail(ErrorKind::ValidationError, path + ": focal lengths must be positive");

  const bool has_r = values.count("screen_r"), has_t = values.count("screen_t");
  if (has_r != has_t)
    fail(ErrorKind::ParseError, path + ": screen_r and screen_t must appear together");
  if (has_r) {
    const auto& r = values["screen_r"];
    const auto& t = values["screen_t"];
    if (r.size() != 9 || t.size() != 3)
      fail(ErrorKind::ParseError, path + ": screen_r needs 9 values and screen_t needs 3");
    ScreenPose screen;
    for (int i = 0; i < 9; ++i) screen.rotation(i / 3, i % 3) = r[i];
    screen.translation = Vec3(t[0], t[1], t[2]);
    calib.screen = screen;
  }
  return calib;
}

void write_calibration(const std::string& path, const CalibrationFile& calib) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "fx=" << format_double(calib.camera.fx) << "\n";
  f << "fy=" << format_double(calib.camera.fy) << "\n";
  f << "cx=" << format_double(calib.camera.cx) << "\n";
  f << "cy=" << format_double(calib.camera.cy) << "\n";
  if (calib.screen) {
    f << "screen_r=";
    for (int i = 0; i < 9; ++i)
      f << (i ? " " : "") << format_double(calib.screen->rotation(i / 3, i % 3));
    f << "\nscreen_t=";
    for (int i = 0; i < 3; ++i) f << (i ? " " : "") << format_double(calib.screen->translation[i]);
    f << "\n";
  }
}

std::vector<AnnotationRecord> parse_annotations(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path);
  std::vector<AnnotationRecord> records;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const std::string where = path + ":" + std::to_string(line_no);
    const std::vector<std::string> tok = split_whitespace(line);
    // person image 12 landmark reals, 3 target reals, optional 4 pupil reals, timestamp
    if (tok.size() != 18 && tok.size() != 22)
      fail(ErrorKind::ParseError,
           where + ": expected 18 or 22 fields, got " + std::to_string(tok.size()));
    AnnotationRecord rec;
    rec.person = tok[0];
    rec.image = tok[1];
    if (rec.person.empty()) fail(ErrorKind::ParseError, where + ": empty person id");
    std::size_t at = 2;
    for (int i = 0; i < 6; ++i) {
      const double x = parse_double(tok[at++], where);
      const double y = parse_double(tok[at++], where);
      if (!std::isfinite(x) || !std::isfinite(y))
        fail(ErrorKind::ValidationError, where + ": non-finite landmark");
      rec.landmarks[i] = Vec2(x, y);
    }
    for (int i = 0; i < 3; ++i) rec.target[i] = parse_double(tok[at++], where);
    if (tok.size() == 22) {
      std::array<double, 4> pupils{};
      for (double& p : pupils) p = parse_double(tok[at++], where);
      rec.pupils = pupils;
    }
    rec.timestamp = tok[at];
    records.push_back(std::move(rec));
  }
  return records;
}

void write_annotations(const std::string& path, const std::vector<AnnotationRecord>& records) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  for (const AnnotationRecord& rec : records) {
    f << rec.person << " " << rec.image;
    for (const Vec2& l : rec.landmarks)
      f << " " << format_double(l.x()) << " " << format_double(l.y());
    for (int i = 0; i < 3; ++i) f << " " << format_double(rec.target[i]);
    if (rec.pupils)
      for (double p : *rec.pupils) f << " " << format_double(p);
    f << " " << rec.timestamp << "\n";
  }
}

NormalizedSample flip_sample(const NormalizedSample& sample) {
  NormalizedSample out = sample;
  out.id = sample.id + "f";
  out.eye = sample.eye == 'L' ? 'R' : 'L';
  out.patch = flip_horizontal(sample.patch);
  out.head = mirror(sample.head);
  out.gaze = mirror(sample.gaze);
  if (sample.pupil)
    out.pupil = Vec2(static_cast<double>(sample.patch.width - 1) - sample.pupil->x(),
                     sample.pupil->y());
  return out;
}

BuildOutput build_normalized_dataset(const std::vector<AnnotationRecord>& records,
                                     const CalibrationFile& calib, const BuildOptions& options,
                                     const std::string& base_dir) {
  if (records.empty()) fail(ErrorKind::EmptyInput, "no annotation records");

  struct RecordOutput {
    std::vector<NormalizedSample> samples;
    std::string failure;  // empty when the record succeeded
    int failed_eyes = 0;
  };
  std::vector<RecordOutput> per_record(records.size());
  const int n = static_cast<int>(records.size());

  parallel_for(n, [&](std::ptrdiff_t i) {
    const AnnotationRecord& rec = records[i];
    RecordOutput& out = per_record[i];
    try {
      const fs::path img_path = fs::path(base_dir) / rec.image;
      const GrayImage frame = read_pgm(img_path.string());
      for (const Vec2& l : rec.landmarks) {
        if (l.x() < 0.0 || l.x() > frame.width - 1 || l.y() < 0.0 || l.y() > frame.height - 1)
          fail(ErrorKind::ValidationError, "landmark outside the image");
      }
      const HeadPose pose =
          estimate_head_pose(options.face, rec.landmarks, calib.camera, options.pnp);

      for (const EyeSide side : {EyeSide::Left, EyeSide::Right}) {
        const Vec3 eye_center = eye_center_camera(pose, options.face, side);
        const NormalizationTransform xform =
            compute_normalization(eye_center, pose.rotation, options.norm, calib.camera);
        WarpResult warped = perspective_warp(frame, xform.image_warp, options.norm.out_width,
                                             options.norm.out_height);
        if (warped.coverage < options.min_coverage) {
          ++out.failed_eyes;
          continue;
        }
        NormalizedSample sample;
        sample.person = rec.person;
        sample.eye = eye_side_char(side);
        sample.patch = equalize_histogram(warped.image);
        sample.gaze =
            normalize_gaze(gaze_target_to_vector(rec.target, eye_center), xform);
        sample.head = normalize_head(pose.rotation, xform);
        if (rec.pupils) {
          const int base = side == EyeSide::Right ? 0 : 2;
          const Vec3 p =
              xform.image_warp * Vec3((*rec.pupils)[base], (*rec.pupils)[base + 1], 1.0);
          sample.pupil = Vec2(p.x() / p.z(), p.y() / p.z());
        }
        char id[32];
        std::snprintf(id, sizeof(id), "%06d%c", static_cast<int>(i), sample.eye);
        sample.id = id;
        out.samples.push_back(std::move(sample));
      }
    } catch (const Error& e) {
      out.failure = e.what();
      out.samples.clear();
    }
  });

  BuildOutput result;
  result.stats.records = n;
  for (int i = 0; i < n; ++i) {
    RecordOutput& out = per_record[i];
    if (!out.failure.empty()) {
      ++result.stats.failed_records;
      result.stats.failures.push_back("record " + std::to_string(i) + ": " + out.failure);
      continue;
    }
    result.stats.failed_eyes += out.failed_eyes;
    for (NormalizedSample& s : out.samples) result.samples.push_back(std::move(s));
  }
  if (options.flip_augment) {
    const std::size_t originals = result.samples.size();
    result.samples.reserve(originals * 2);
    for (std::size_t i = 0; i < originals; ++i)
      result.samples.push_back(flip_sample(result.samples[i]));
  }
  result.stats.emitted = static_cast<int>(result.samples.size());
  if (result.samples.empty())
    fail(ErrorKind::EmptyOutput, "all " + std::to_string(n) + " records failed normalization");
  return result;
}

void write_archive(const std::string& dir, const std::vector<NormalizedSample>& samples) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "nothing to archive");
  fs::create_directories(fs::path(dir) / "patches");
  std::ofstream manifest(fs::path(dir) / "manifest.tsv");
  if (!manifest) fail(ErrorKind::IoError, "cannot write manifest in " + dir);
  manifest << "id\tperson\teye\th_yaw\th_pitch\tg_yaw\tg_pitch\tpupil_u\tpupil_v\tpatch\n";
  for (const NormalizedSample& s : samples) {
    const std::string patch_rel = "patches/" + s.id + ".pgm";
    write_pgm((fs::path(dir) / patch_rel).string(), s.patch);
    manifest << s.id << "\t" << s.person << "\t" << s.eye << "\t" << format_double(s.head.yaw)
             << "\t" << format_double(s.head.pitch) << "\t" << format_double(s.gaze.yaw) << "\t"
             << format_double(s.gaze.pitch) << "\t"
             << (s.pupil ? format_double(s.pupil->x()) : std::string("-")) << "\t"
             << (s.pupil ? format_double(s.pupil->y()) : std::string("-")) << "\t" << patch_rel
             << "\n";
  }
}

std::vector<NormalizedSample> load_archive(const std::string& dir) {
  const fs::path manifest_path = fs::path(dir) / "manifest.tsv";
  std::ifstream manifest(manifest_path);
  if (!manifest) fail(ErrorKind::EmptyArchive, "missing manifest: " + manifest_path.string());
  std::vector<NormalizedSample> samples;
  std::string line;
  int line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;  // header
    const std::string where = manifest_path.string() + ":" + std::to_string(line_no);
    std::vector<std::string> tok;
    std::size_t start = 0;
    while (true) {
      const std::size_t tab = line.find('\t', start);
      tok.push_back(line.substr(start, tab == std::string::npos ? tab : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (tok.size() != 10) fail(ErrorKind::ParseError, where + ": expected 10 columns");
    NormalizedSample s;
    s.id = tok[0];
    s.person = tok[1];
    if (tok[2].size() != 1 || (tok[2][0] != 'L' && tok[2][0] != 'R'))
      fail(ErrorKind::ParseError, where + ": eye must be L or R");
    s.eye = tok[2][0];
    s.head.yaw = parse_double(tok[3], where);
    s.head.pitch = parse_double(tok[4], where);
    s.gaze.yaw = parse_double(tok[5], where);
    s.gaze.pitch = parse_double(tok[6], where);
    if (tok[7] != "-" && tok[8] != "-")
      s.pupil = Vec2(parse_double(tok[7], where), parse_double(tok[8], where));
    s.patch = read_pgm((fs::path(dir) / tok[9]).string());
    samples.push_back(std::move(s));
  }
  if (samples.empty()) fail(ErrorKind::EmptyArchive, "archive has no samples: " + dir);
  return samples;
}

DatasetStatistics dataset_statistics(const std::vector<NormalizedSample>& samples) {
  if (samples.empty()) fail(ErrorKind::EmptyInput, "no samples");
  DatasetStatistics stats;
  stats.total = static_cast<int>(samples.size());
  stats.mean_intensity = Histogram{0.0, 256.0, std::vector<long>(32, 0)};
  stats.left_right_diff = Histogram{-128.0, 128.0, std::vector<long>(32, 0)};
  stats.gaze = Histogram2D{-30.0, 30.0, -30.0, 30.0, 20, 20, std::vector<long>(400, 0)};
  stats.head = Histogram2D{-30.0, 30.0, -30.0, 30.0, 20, 20, std::vector<long>(400, 0)};

  const auto bump = [](Histogram& h, double v) {
    const int bins = static_cast<int>(h.counts.size());
    int b = static_cast<int>(std::floor((v - h.lo) / (h.hi - h.lo) * bins));
    b = std::clamp(b, 0, bins - 1);
    ++h.counts[b];
  };
  const auto bump2 = [](Histogram2D& h, double x, double y) {
    int bx = static_cast<int>(std::floor((x - h.x_lo) / (h.x_hi - h.x_lo) * h.x_bins));
    int by = static_cast<int>(std::floor((y - h.y_lo) / (h.y_hi - h.y_lo) * h.y_bins));
    bx = std::clamp(bx, 0, h.x_bins - 1);
    by = std::clamp(by, 0, h.y_bins - 1);
    ++h.counts[static_cast<std::size_t>(by) * h.x_bins + bx];
  };

  std::map<std::string, int> persons;
  const double deg = 180.0 / M_PI;
  for (const NormalizedSample& s : samples) {
    bump(stats.mean_intensity, mean_intensity(s.patch));
    bump(stats.left_right_diff, left_right_intensity_diff(s.patch));
    bump2(stats.gaze, s.gaze.yaw * deg, s.gaze.pitch * deg);
    bump2(stats.head, s.head.yaw * deg, s.head.pitch * deg);
    ++persons[s.person];
  }
  stats.per_person.assign(persons.begin(), persons.end());
  return stats;
}

void write_statistics_csv(const std::string& path, const DatasetStatistics& stats) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "section,key,value\n";
  f << "summary,total," << stats.total << "\n";
  for (const auto& [person, count] : stats.per_person)
    f << "person," << person << "," << count << "\n";
  const auto dump_hist = [&f](const char* name, const Histogram& h) {
    const int bins = static_cast<int>(h.counts.size());
    for (int b = 0; b < bins; ++b) {
      const double center = h.lo + (b + 0.5) * (h.hi - h.lo) / bins;
      f << name << "," << format_double(center) << "," << h.counts[b] << "\n";
    }
  };
  dump_hist("mean_intensity", stats.mean_intensity);
  dump_hist("left_right_diff", stats.left_right_diff);
  const auto dump_hist2 = [&f](const char* name, const Histogram2D& h) {
    for (int by = 0; by < h.y_bins; ++by)
      for (int bx = 0; bx < h.x_bins; ++bx) {
        const double cx = h.x_lo + (bx + 0.5) * (h.x_hi - h.x_lo) / h.x_bins;
        const double cy = h.y_lo + (by + 0.5) * (h.y_hi - h.y_lo) / h.y_bins;
        f << name << "," << format_double(cx) << ";" << format_double(cy) << ","
          << h.counts[static_cast<std::size_t>(by) * h.x_bins + bx] << "\n";
      }
  };
  dump_hist2("gaze_hist", stats.gaze);
  dump_hist2("head_hist", stats.head);
}

}  // namespace gazekit
