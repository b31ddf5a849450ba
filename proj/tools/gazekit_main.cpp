#include <CLI11.hpp>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "gazekit/dataset.hpp"
#include "gazekit/estimator.hpp"
#include "gazekit/eval.hpp"
#include "gazekit/parallel.hpp"
#include "gazekit/svg.hpp"
#include "gazekit/synth.hpp"
#include "gazekit/text_io.hpp"

namespace fs = std::filesystem;
using namespace gazekit;

namespace {

struct EstimatorFlags {
  std::string estimator = "cnn";
  std::uint64_t seed = 1;
  int iterations = 3000;
  int batch = 32;
  double lr = 1e-3;
  int decay_every = 5000;
  int k = 5;
  int clusters = 8;
  double lambda = 1e-3;
  bool use_pupil = false;
  bool no_head_pose = false;
};

void add_estimator_flags(CLI::App* cmd, EstimatorFlags& flags) {
  cmd->add_option("--estimator", flags.estimator, "cnn, knn, linear or mean")
      ->check(CLI::IsMember({"cnn", "knn", "linear", "mean"}));
  cmd->add_option("--seed", flags.seed, "seed for every random choice");
  cmd->add_option("--iterations", flags.iterations, "cnn training iterations");
  cmd->add_option("--batch", flags.batch, "cnn batch size");
  cmd->add_option("--lr", flags.lr, "cnn initial learning rate");
  cmd->add_option("--decay-every", flags.decay_every, "cnn lr decay interval (iterations)");
  cmd->add_option("--k", flags.k, "knn neighbour count");
  cmd->add_option("--clusters", flags.clusters, "knn head-angle clusters (0 = exhaustive)");
  cmd->add_option("--lambda", flags.lambda, "ridge strength for the linear baseline");
  cmd->add_flag("--use-pupil", flags.use_pupil, "append the pupil centre to the feature vector");
  cmd->add_flag("--no-head-pose", flags.no_head_pose, "drop head angles from the feature vector");
}

EstimatorConfig to_config(const EstimatorFlags& flags) {
  EstimatorConfig config;
  config.kind = estimator_kind_from_name(flags.estimator);
  config.train.seed = flags.seed;
  config.train.iterations = flags.iterations;
  config.train.batch_size = flags.batch;
  config.train.learning_rate = flags.lr;
  config.train.decay_every = flags.decay_every;
  config.knn_k = flags.k;
  config.knn_clusters = flags.clusters;
  config.ridge_lambda = flags.lambda;
  config.use_pupil = flags.use_pupil;
  config.use_head_pose = !flags.no_head_pose;
  return config;
}

void write_run_config(const std::string& out_dir, const std::string& command,
                      const EstimatorConfig& config, const std::string& extra) {
  std::ofstream f(fs::path(out_dir) / "run-config.txt");
  f << "command=" << command << "\n" << config.describe() << "\n";
  if (!extra.empty()) f << extra << "\n";
}

std::vector<Resolution> parse_resolutions(const std::string& text) {
  std::vector<Resolution> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t comma = text.find(',', start);
    const std::string item = text.substr(start, comma == std::string::npos ? comma : comma - start);
    const std::size_t x = item.find('x');
    if (x == std::string::npos)
      fail(ErrorKind::InvalidArgument, "resolution '" + item + "' is not WxH");
    Resolution r;
    try {
      r.width = std::stoi(item.substr(0, x));
      r.height = std::stoi(item.substr(x + 1));
    } catch (const std::exception&) {
      fail(ErrorKind::InvalidArgument, "resolution '" + item + "' is not WxH");
    }
    if (r.width < 5 || r.height < 5)
      fail(ErrorKind::InvalidArgument, "resolutions below 5x5 are not supported");
    out.push_back(r);
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return out;
}

int run(int argc, char** argv) {
  CLI::App app{"appearance-based gaze estimation pipeline"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "worker threads (0 = library default)");

  // ---- synth ----
  auto* synth_cmd = app.add_subcommand("synth", "generate a synthetic annotated dataset");
  std::string synth_out;
  SynthConfig synth_config;
  std::vector<double> gaze_range{-18.0, 18.0, -1.5, 20.0};
  std::vector<double> head_range{-18.0, 18.0, -1.5, 20.0};
  synth_cmd->add_option("--out-dir", synth_out)->required();
  synth_cmd->add_option("--persons", synth_config.persons);
  synth_cmd->add_option("--samples", synth_config.samples_per_person, "samples per person");
  synth_cmd->add_option("--seed", synth_config.seed);
  synth_cmd->add_option("--noise", synth_config.noise_sigma, "patch noise sigma");
  synth_cmd->add_option("--gaze-range", gaze_range, "yaw_lo yaw_hi pitch_lo pitch_hi, degrees")
      ->expected(4);
  synth_cmd->add_option("--head-range", head_range, "yaw_lo yaw_hi pitch_lo pitch_hi, degrees")
      ->expected(4);

  // ---- normalize ----
  auto* norm_cmd = app.add_subcommand("normalize", "build a normalized eye-patch archive");
  std::string norm_annotations, norm_calibration, norm_out;
  bool flip_augment = false;
  double min_coverage = 0.9, max_rms = 20.0;
  norm_cmd->add_option("--annotations", norm_annotations)->required();
  norm_cmd->add_option("--calibration", norm_calibration)->required();
  norm_cmd->add_option("--out-dir", norm_out)->required();
  norm_cmd->add_flag("--flip-augment", flip_augment, "append mirrored copies of every sample");
  norm_cmd->add_option("--min-coverage", min_coverage, "reject eyes with lower warp coverage");
  norm_cmd->add_option("--max-rms", max_rms, "pose reprojection rms threshold, px");

  // ---- train ----
  auto* train_cmd = app.add_subcommand("train", "fit an estimator on an archive");
  std::string train_archive, train_out;
  EstimatorFlags train_flags;
  train_cmd->add_option("--train", train_archive)->required();
  train_cmd->add_option("--out", train_out, "model checkpoint path")->required();
  add_estimator_flags(train_cmd, train_flags);

  // ---- eval ----
  auto* eval_cmd = app.add_subcommand("eval", "run an evaluation protocol");
  std::string eval_protocol = "lopo";
  std::string eval_train, eval_test, eval_out, eval_resolutions;
  std::string fuse_annotations, fuse_calibration;
  bool fuse_eyes = false;
  int eval_bins = 9;
  EstimatorFlags eval_flags;
  eval_cmd->add_option("--protocol", eval_protocol)->check(CLI::IsMember({"lopo", "cross"}));
  eval_cmd->add_option("--train", eval_train, "training archive")->required();
  eval_cmd->add_option("--test", eval_test, "test archive (cross protocol)");
  eval_cmd->add_option("--out-dir", eval_out)->required();
  eval_cmd->add_option("--bins", eval_bins, "bins for the error curves");
  eval_cmd->add_option("--resolutions", eval_resolutions,
                       "comma-separated WxH list; runs the resolution grid");
  eval_cmd->add_flag("--fuse-eyes", fuse_eyes, "evaluate both-eye fusion");
  eval_cmd->add_option("--annotations", fuse_annotations, "records for --fuse-eyes");
  eval_cmd->add_option("--calibration", fuse_calibration, "calibration for --fuse-eyes");
  add_estimator_flags(eval_cmd, eval_flags);

  // ---- report ----
  auto* report_cmd = app.add_subcommand("report", "render statistics and plots");
  std::string report_archive, report_csv, report_out;
  report_cmd->add_option("--archive", report_archive, "archive to summarize");
  report_cmd->add_option("--report", report_csv, "existing report.csv to plot");
  report_cmd->add_option("--out-dir", report_out)->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    app.exit(e);
    return 1;
  }
  if (threads > 0) set_threads(threads);

  if (synth_cmd->parsed()) {
    synth_config.gaze_range = {gaze_range[0], gaze_range[1], gaze_range[2], gaze_range[3]};
    synth_config.head_range = {head_range[0], head_range[1], head_range[2], head_range[3]};
    const SynthDataset ds = generate_persons(synth_config, synth_out);
    std::cout << "wrote " << ds.annotations_path << " (" << synth_config.persons << " persons x "
              << synth_config.samples_per_person << " samples)\n";
    return 0;
  }

  if (norm_cmd->parsed()) {
    const std::vector<AnnotationRecord> records = parse_annotations(norm_annotations);
    const CalibrationFile calib = parse_calibration(norm_calibration);
    BuildOptions options;
    options.flip_augment = flip_augment;
    options.min_coverage = min_coverage;
    options.pnp.max_rms_px = max_rms;
    const std::string base_dir = fs::path(norm_annotations).parent_path().string();
    const BuildOutput built = build_normalized_dataset(records, calib, options, base_dir);
    write_archive(norm_out, built.samples);
    std::cout << "archived " << built.stats.emitted << " samples from " << built.stats.records
              << " records (" << built.stats.failed_records << " records, "
              << built.stats.failed_eyes << " eyes rejected)\n";
    return 0;
  }

  if (train_cmd->parsed()) {
    const EstimatorConfig config = to_config(train_flags);
    const std::vector<NormalizedSample> samples = load_archive(train_archive);
    const EstimatorModel model = train_estimator(samples, config);
    save_model(train_out, model);
    std::cout << "saved " << train_out << " (" << config.describe() << ")\n";
    return 0;
  }

  if (eval_cmd->parsed()) {
    const EstimatorConfig config = to_config(eval_flags);
    fs::create_directories(eval_out);
    const std::vector<NormalizedSample> train_samples = load_archive(eval_train);

    if (!eval_resolutions.empty()) {
      if (eval_test.empty())
        fail(ErrorKind::InvalidArgument, "--resolutions needs a --test archive");
      const std::vector<NormalizedSample> test_samples = load_archive(eval_test);
      const ResolutionGrid grid = resolution_study(train_samples, test_samples,
                                                   parse_resolutions(eval_resolutions), config);
      write_grid_csv((fs::path(eval_out) / "grid.csv").string(), grid);
      write_run_config(eval_out, "eval", config, "protocol=resolutions " + eval_resolutions);
      std::cout << "wrote " << (fs::path(eval_out) / "grid.csv").string() << "\n";
      return 0;
    }

    if (fuse_eyes) {
      if (fuse_annotations.empty() || fuse_calibration.empty())
        fail(ErrorKind::InvalidArgument, "--fuse-eyes needs --annotations and --calibration");
      const EstimatorModel model = train_estimator(train_samples, config);
      const std::vector<AnnotationRecord> records = parse_annotations(fuse_annotations);
      const CalibrationFile calib = parse_calibration(fuse_calibration);
      const std::string base_dir = fs::path(fuse_annotations).parent_path().string();
      const FusionReport fused = fusion_eval(records, calib, BuildOptions{}, base_dir, model);
      std::ofstream f(fs::path(eval_out) / "fusion.csv");
      f << "metric,value\nfaces," << fused.faces << "\nper_eye_mean_deg,"
        << format_double(fused.per_eye_mean_deg) << "\noracle_best_deg,"
        << format_double(fused.oracle_best_deg) << "\nfused_deg,"
        << format_double(fused.fused_deg) << "\n";
      write_run_config(eval_out, "eval", config, "protocol=fusion");
      std::cout << "per-eye " << fused.per_eye_mean_deg << " deg, oracle "
                << fused.oracle_best_deg << " deg, fused " << fused.fused_deg << " deg\n";
      return 0;
    }

    EvalReport report;
    if (eval_protocol == "lopo") {
      report = leave_one_person_out(train_samples, config, eval_bins);
    } else {
      if (eval_test.empty()) fail(ErrorKind::InvalidArgument, "cross protocol needs --test");
      const std::vector<NormalizedSample> test_samples = load_archive(eval_test);
      report = cross_dataset_eval(train_samples, test_samples, config, eval_bins);
    }
    write_report_csv((fs::path(eval_out) / "report.csv").string(), report);
    write_report_plots((fs::path(eval_out) / "plots").string(), report);
    write_run_config(eval_out, "eval", config, "protocol=" + eval_protocol);
    std::cout << "overall mean error " << report.overall_mean_deg << " deg over " << report.total
              << " samples";
    if (report.mean_predictor_deg >= 0.0)
      std::cout << " (mean predictor " << report.mean_predictor_deg << " deg)";
    std::cout << "\n";
    return 0;
  }

  if (report_cmd->parsed()) {
    if (report_archive.empty() && report_csv.empty())
      fail(ErrorKind::InvalidArgument, "report needs --archive or --report");
    fs::create_directories(report_out);
    if (!report_archive.empty()) {
      const std::vector<NormalizedSample> samples = load_archive(report_archive);
      const DatasetStatistics stats = dataset_statistics(samples);
      write_statistics_csv((fs::path(report_out) / "stats.csv").string(), stats);
      write_statistics_plots((fs::path(report_out) / "plots").string(), stats);
      std::cout << "wrote statistics for " << stats.total << " samples\n";
    }
    if (!report_csv.empty()) {
      const EvalReport report = read_report_csv(report_csv);
      write_report_plots((fs::path(report_out) / "plots").string(), report);
      std::cout << "rendered plots for " << report_csv << "\n";
    }
    return 0;
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return is_validation_error(e.kind()) ? 1 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
