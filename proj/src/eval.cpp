#include "gazekit/eval.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "gazekit/rng.hpp"
#include "gazekit/text_io.hpp"

namespace gazekit {

namespace {
constexpr double kDeg = 180.0 / M_PI;
}

std::vector<SampleResult> evaluate(const EstimatorModel& model,
                                   const std::vector<NormalizedSample>& samples) {
  const std::vector<GazeAngles> predictions = predict_all(model, samples);
  std::vector<SampleResult> results(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    SampleResult& r = results[i];
    r.person = samples[i].person;
    r.eye = samples[i].eye;
    r.truth = samples[i].gaze;
    r.prediction = predictions[i];
    r.error_deg = angular_error_deg(r.truth, r.prediction);
    r.yaw_deg = samples[i].gaze.yaw * kDeg;
    r.intensity_diff = left_right_intensity_diff(samples[i].patch);
  }
  return results;
}

BinnedErrors error_by_bin(const std::vector<SampleResult>& results, BinAxis axis, int n_bins) {
  if (n_bins < 1) fail(ErrorKind::InvalidArgument, "need at least one bin");
  if (results.empty()) fail(ErrorKind::EmptyInput, "no results to bin");
  const auto value = [axis](const SampleResult& r) {
    return axis == BinAxis::GazeYaw ? r.yaw_deg : r.intensity_diff;
  };
  double lo = value(results[0]), hi = lo;
  for (const SampleResult& r : results) {
    lo = std::min(lo, value(r));
    hi = std::max(hi, value(r));
  }
  if (hi - lo < 1e-12) {
    lo -= 0.5;
    hi += 0.5;
  }

  std::vector<double> sums(n_bins, 0.0);
  std::vector<int> counts(n_bins, 0);
  for (const SampleResult& r : results) {
    int b = static_cast<int>(std::floor((value(r) - lo) / (hi - lo) * n_bins));
    b = std::clamp(b, 0, n_bins - 1);
    sums[b] += r.error_deg;
    ++counts[b];
  }

  BinnedErrors out;
  for (int b = 0; b < n_bins; ++b) {
    if (counts[b] == 0) continue;
    BinStat stat;
    stat.center = lo + (b + 0.5) * (hi - lo) / n_bins;
    stat.count = counts[b];
    stat.mean_deg = sums[b] / counts[b];
    out.bins.push_back(stat);
  }
  if (out.bins.size() < 3)
    fail(ErrorKind::InsufficientBins, "quadratic fit needs at least 3 non-empty bins");

  // Normal equations for the degree-2 least-squares fit.
  Eigen::Matrix3d ata = Eigen::Matrix3d::Zero();
  Eigen::Vector3d atb = Eigen::Vector3d::Zero();
  for (const BinStat& b : out.bins) {
    const Eigen::Vector3d row(1.0, b.center, b.center * b.center);
    ata += row * row.transpose();
    atb += row * b.mean_deg;
  }
  const Eigen::Vector3d coef = ata.ldlt().solve(atb);
  out.fit = QuadraticFit{coef[0], coef[1], coef[2]};
  return out;
}

EvalReport make_report(const std::vector<SampleResult>& results, const std::string& protocol,
                       const std::string& config_echo, int n_bins) {
  if (results.empty()) fail(ErrorKind::EmptyInput, "no evaluation results");
  EvalReport report;
  report.protocol = protocol;
  report.config_echo = config_echo;
  report.total = static_cast<int>(results.size());

  std::map<std::string, std::vector<double>> by_person;
  for (const SampleResult& r : results) by_person[r.person].push_back(r.error_deg);
  double weighted = 0.0;
  for (const auto& [person, errors] : by_person) {
    PersonStat stat;
    stat.person = person;
    stat.count = static_cast<int>(errors.size());
    double sum = 0.0;
    for (double e : errors) sum += e;
    stat.mean_deg = sum / stat.count;
    double var = 0.0;
    for (double e : errors) var += (e - stat.mean_deg) * (e - stat.mean_deg);
    stat.stddev_deg = errors.size() > 1 ? std::sqrt(var / (errors.size() - 1)) : 0.0;
    weighted += stat.mean_deg * stat.count;
    report.per_person.push_back(stat);
  }
  report.overall_mean_deg = weighted / report.total;
  report.by_yaw = error_by_bin(results, BinAxis::GazeYaw, n_bins);
  report.by_intensity = error_by_bin(results, BinAxis::IntensityDiff, n_bins);
  return report;
}

EvalReport leave_one_person_out(const std::vector<NormalizedSample>& samples,
                                const EstimatorConfig& config, int n_bins) {
  if (samples.empty()) fail(ErrorKind::EmptyArchive, "no samples");
  std::set<std::string> persons;
  for (const NormalizedSample& s : samples) persons.insert(s.person);
  if (persons.size() < 2)
    fail(ErrorKind::TooFewPersons, "leave-one-person-out needs at least 2 persons, got " +
                                       std::to_string(persons.size()));

  std::vector<SampleResult> all_results;
  int fold = 0;
  for (const std::string& held_out : persons) {
    std::vector<NormalizedSample> train, test;
    for (const NormalizedSample& s : samples)
      (s.person == held_out ? test : train).push_back(s);
    EstimatorConfig fold_config = config;
    fold_config.train.seed = derive_seed(config.train.seed, 0xF01D + fold);
    const EstimatorModel model = train_estimator(train, fold_config);
    const std::vector<SampleResult> results = evaluate(model, test);
    all_results.insert(all_results.end(), results.begin(), results.end());
    ++fold;
  }
  return make_report(all_results, "lopo", config.describe(), n_bins);
}

EvalReport cross_dataset_eval(const std::vector<NormalizedSample>& train,
                              const std::vector<NormalizedSample>& test,
                              const EstimatorConfig& config, int n_bins) {
  if (train.empty()) fail(ErrorKind::EmptyArchive, "empty training archive");
  if (test.empty()) fail(ErrorKind::EmptyArchive, "empty test archive");

  const EstimatorModel model = train_estimator(train, config);
  EvalReport report = make_report(evaluate(model, test), "cross", config.describe(), n_bins);

  EstimatorConfig mean_config = config;
  mean_config.kind = EstimatorKind::Mean;
  const EstimatorModel naive = train_estimator(train, mean_config);
  const std::vector<SampleResult> naive_results = evaluate(naive, test);
  double sum = 0.0;
  for (const SampleResult& r : naive_results) sum += r.error_deg;
  report.mean_predictor_deg = sum / naive_results.size();
  return report;
}

NormalizedSample resize_sample(const NormalizedSample& sample, int width, int height) {
  NormalizedSample out = sample;
  if (sample.patch.width == width && sample.patch.height == height) return out;
  out.patch = resize(sample.patch, width, height, Interpolation::Bicubic);
  if (sample.pupil) {
    out.pupil = Vec2(sample.pupil->x() * (width - 1) / (sample.patch.width - 1),
                     sample.pupil->y() * (height - 1) / (sample.patch.height - 1));
  }
  return out;
}

ResolutionGrid resolution_study(const std::vector<NormalizedSample>& train,
                                const std::vector<NormalizedSample>& test,
                                const std::vector<Resolution>& resolutions,
                                const EstimatorConfig& config) {
  if (resolutions.empty()) fail(ErrorKind::InvalidArgument, "no resolutions given");
  if (train.empty() || test.empty()) fail(ErrorKind::EmptyArchive, "empty archive");

  ResolutionGrid grid;
  grid.resolutions = resolutions;
  const int n = static_cast<int>(resolutions.size());
  grid.mean_deg.assign(static_cast<std::size_t>(n) * n, 0.0);

  for (int i = 0; i < n; ++i) {
    const Resolution train_res = resolutions[i];
    std::vector<NormalizedSample> train_scaled;
    train_scaled.reserve(train.size());
    for (const NormalizedSample& s : train)
      train_scaled.push_back(resize_sample(s, train_res.width, train_res.height));
    const EstimatorModel model = train_estimator(train_scaled, config);

    for (int j = 0; j < n; ++j) {
      const Resolution test_res = resolutions[j];
      std::vector<NormalizedSample> test_scaled;
      test_scaled.reserve(test.size());
      for (const NormalizedSample& s : test) {
        // Simulate capture at the test resolution, then rescale to what the
        // trained model expects.
        const NormalizedSample captured = resize_sample(s, test_res.width, test_res.height);
        test_scaled.push_back(resize_sample(captured, train_res.width, train_res.height));
      }
      const std::vector<SampleResult> results = evaluate(model, test_scaled);
      double sum = 0.0;
      for (const SampleResult& r : results) sum += r.error_deg;
      grid.mean_deg[static_cast<std::size_t>(i) * n + j] = sum / results.size();
    }
  }
  return grid;
}

FusionReport fuse_faces(const std::vector<FusionFace>& faces) {
  if (faces.empty()) fail(ErrorKind::NoPairedSamples, "no paired-eye faces");
  FusionReport report;
  report.faces = static_cast<int>(faces.size());
  double per_eye = 0.0, oracle = 0.0, fused = 0.0;
  for (const FusionFace& f : faces) {
    const double err_left =
        angular_error_deg(f.pred_left, gaze_target_to_vector(f.target, f.eye_left));
    const double err_right =
        angular_error_deg(f.pred_right, gaze_target_to_vector(f.target, f.eye_right));
    per_eye += 0.5 * (err_left + err_right);
    oracle += std::min(err_left, err_right);
    const GazeRay ray = fuse_both_eyes(f.pred_left, f.pred_right, f.eye_left, f.eye_right);
    fused += angular_error_deg(ray.direction, gaze_target_to_vector(f.target, ray.origin));
  }
  report.per_eye_mean_deg = per_eye / report.faces;
  report.oracle_best_deg = oracle / report.faces;
  report.fused_deg = fused / report.faces;
  return report;
}

FusionReport fusion_eval(const std::vector<AnnotationRecord>& records,
                         const CalibrationFile& calib, const BuildOptions& options,
                         const std::string& base_dir, const EstimatorModel& model) {
  std::vector<FusionFace> faces;
  for (std::size_t i = 0; i < records.size(); ++i) {
    std::vector<AnnotationRecord> one{records[i]};
    BuildOutput built;
    try {
      BuildOptions opts = options;
      opts.flip_augment = false;
      built = build_normalized_dataset(one, calib, opts, base_dir);
    } catch (const Error&) {
      continue;
    }
    if (built.samples.size() != 2) continue;

    const HeadPose pose =
        estimate_head_pose(options.face, records[i].landmarks, calib.camera, options.pnp);
    FusionFace face;
    face.target = records[i].target;
    bool have_left = false, have_right = false;
    for (const NormalizedSample& s : built.samples) {
      const EyeSide side = s.eye == 'L' ? EyeSide::Left : EyeSide::Right;
      const Vec3 eye = eye_center_camera(pose, options.face, side);
      const NormalizationTransform xform =
          compute_normalization(eye, pose.rotation, options.norm, calib.camera);
      const GazeAngles pred = predict(model, s);
      const Vec3 dir_cam = xform.rotation.transpose() * angles_to_vector(pred);
      if (side == EyeSide::Left) {
        face.eye_left = eye;
        face.pred_left = dir_cam;
        have_left = true;
      } else {
        face.eye_right = eye;
        face.pred_right = dir_cam;
        have_right = true;
      }
    }
    if (have_left && have_right) faces.push_back(face);
  }
  return fuse_faces(faces);
}

void write_report_csv(const std::string& path, const EvalReport& report) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "section,key,count,value,extra\n";
  f << "protocol," << report.protocol << ",,,\n";
  for (const PersonStat& p : report.per_person)
    f << "person," << p.person << "," << p.count << "," << format_double(p.mean_deg) << ","
      << format_double(p.stddev_deg) << "\n";
  f << "overall,," << report.total << "," << format_double(report.overall_mean_deg) << ",\n";
  if (report.mean_predictor_deg >= 0.0)
    f << "mean_predictor,,," << format_double(report.mean_predictor_deg) << ",\n";
  const auto dump_bins = [&f](const char* name, const BinnedErrors& binned) {
    for (const BinStat& b : binned.bins)
      f << "bin_" << name << "," << format_double(b.center) << "," << b.count << ","
        << format_double(b.mean_deg) << ",\n";
    f << "fit_" << name << ",intercept,," << format_double(binned.fit.intercept) << ",\n";
    f << "fit_" << name << ",slope,," << format_double(binned.fit.slope) << ",\n";
    f << "fit_" << name << ",curvature,," << format_double(binned.fit.curvature) << ",\n";
  };
  dump_bins("yaw", report.by_yaw);
  dump_bins("intensity", report.by_intensity);
}

EvalReport read_report_csv(const std::string& path) {
  std::ifstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path);
  EvalReport report;
  std::string line;
  int line_no = 0;
  while (std::getline(f, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const std::string where = path + ":" + std::to_string(line_no);
    std::vector<std::string> cols;
    std::size_t start = 0;
    while (true) {
      const std::size_t comma = line.find(',', start);
      cols.push_back(line.substr(start, comma == std::string::npos ? comma : comma - start));
      if (comma == std::string::npos) break;
      start = comma + 1;
    }
    if (cols.size() != 5) fail(ErrorKind::ParseError, where + ": expected 5 columns");
    if (cols[0] == "protocol") {
      report.protocol = cols[1];
    } else if (cols[0] == "person") {
      PersonStat p;
      p.person = cols[1];
      p.count = static_cast<int>(parse_double(cols[2], where));
      p.mean_deg = parse_double(cols[3], where);
      p.stddev_deg = parse_double(cols[4], where);
      report.per_person.push_back(p);
    } else if (cols[0] == "overall") {
      report.total = static_cast<int>(parse_double(cols[2], where));
      report.overall_mean_deg = parse_double(cols[3], where);
    } else if (cols[0] == "mean_predictor") {
      report.mean_predictor_deg = parse_double(cols[3], where);
    } else if (cols[0].rfind("bin_", 0) == 0) {
      BinStat b;
      b.center = parse_double(cols[1], where);
      b.count = static_cast<int>(parse_double(cols[2], where));
      b.mean_deg = parse_double(cols[3], where);
      (cols[0] == "bin_yaw" ? report.by_yaw : report.by_intensity).bins.push_back(b);
    } else if (cols[0].rfind("fit_", 0) == 0) {
      QuadraticFit& fit = cols[0] == "fit_yaw" ? report.by_yaw.fit : report.by_intensity.fit;
      const double v = parse_double(cols[3], where);
      if (cols[1] == "intercept") fit.intercept = v;
      else if (cols[1] == "slope") fit.slope = v;
      else if (cols[1] == "curvature") fit.curvature = v;
      else fail(ErrorKind::ParseError, where + ": unknown fit row " + cols[1]);
    } else {
      fail(ErrorKind::ParseError, where + ": unknown section " + cols[0]);
    }
  }
  return report;
}

void write_grid_csv(const std::string& path, const ResolutionGrid& grid) {
  std::ofstream f(path);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "train_res\\test_res";
  for (const Resolution& r : grid.resolutions) f << "," << r.width << "x" << r.height;
  f << "\n";
  const int n = static_cast<int>(grid.resolutions.size());
  for (int i = 0; i < n; ++i) {
    f << grid.resolutions[i].width << "x" << grid.resolutions[i].height;
    for (int j = 0; j < n; ++j) f << "," << format_double(grid.cell(i, j));
    f << "\n";
  }
}

}  // namespace gazekit
