#include "gazekit/estimator.hpp"

#include <cstring>
#include <fstream>
#include <sstream>

#include "gazekit/text_io.hpp"

namespace gazekit {

namespace {

void write_block(std::ofstream& f, const std::vector<double>& block) {
  f << "params " << block.size() << "\n";
  f.write(reinterpret_cast<const char*>(block.data()),
          static_cast<std::streamsize>(block.size() * sizeof(double)));
}

template <typename T>
void append(std::vector<double>& block, const std::vector<T>& v) {
  for (const T& x : v) block.push_back(static_cast<double>(x));
}

}  // namespace

const char* estimator_kind_name(EstimatorKind kind) {
  switch (kind) {
    case EstimatorKind::Cnn: return "cnn";
    case EstimatorKind::Knn: return "knn";
    case EstimatorKind::Linear: return "linear";
    case EstimatorKind::Mean: return "mean";
  }
  return "?";
}

EstimatorKind estimator_kind_from_name(const std::string& name) {
  if (name == "cnn") return EstimatorKind::Cnn;
  if (name == "knn") return EstimatorKind::Knn;
  if (name == "linear") return EstimatorKind::Linear;
  if (name == "mean") return EstimatorKind::Mean;
  fail(ErrorKind::InvalidArgument, "unknown estimator '" + name + "'");
}

std::string EstimatorConfig::describe() const {
  std::ostringstream s;
  s << "estimator=" << estimator_kind_name(kind) << " use_head_pose=" << use_head_pose
    << " use_pupil=" << use_pupil << " seed=" << train.seed;
  switch (kind) {
    case EstimatorKind::Cnn:
      s << " lr=" << train.learning_rate << " batch=" << train.batch_size
        << " iterations=" << train.iterations;
      break;
    case EstimatorKind::Knn:
      s << " k=" << knn_k << " clusters=" << knn_clusters;
      break;
    case EstimatorKind::Linear:
      s << " lambda=" << ridge_lambda;
      break;
    case EstimatorKind::Mean:
      break;
  }
  return s.str();
}

std::vector<double> sample_features(const NormalizedSample& sample,
                                    const EstimatorConfig& config) {
  std::vector<double> feat;
  feat.reserve(config.feature_dim());
  if (config.use_head_pose) {
    feat.push_back(sample.head.yaw);
    feat.push_back(sample.head.pitch);
  }
  if (config.use_pupil) {
    if (!sample.pupil)
      fail(ErrorKind::ValidationError, "pupil feature requested but sample " + sample.id +
                                           " has no pupil annotation");
    feat.push_back(2.0 * sample.pupil->x() / (sample.patch.width - 1) - 1.0);
    feat.push_back(2.0 * sample.pupil->y() / (sample.patch.height - 1) - 1.0);
  }
  return feat;
}

TrainSample to_train_sample(const NormalizedSample& sample, const EstimatorConfig& config) {
  TrainSample out;
  out.patch = sample.patch;
  out.features = sample_features(sample, config);
  out.target = sample.gaze;
  return out;
}

std::vector<TrainSample> to_train_samples(const std::vector<NormalizedSample>& samples,
                                          const EstimatorConfig& config) {
  std::vector<TrainSample> out;
  out.reserve(samples.size());
  for (const NormalizedSample& s : samples) out.push_back(to_train_sample(s, config));
  return out;
}

EstimatorModel train_estimator(const std::vector<NormalizedSample>& samples,
                               const EstimatorConfig& config) {
  if (samples.empty()) fail(ErrorKind::EmptyTrainingSet, "no training samples");
  const std::vector<TrainSample> train = to_train_samples(samples, config);

  EstimatorModel model;
  model.config = config;
  switch (config.kind) {
    case EstimatorKind::Cnn: {
      const CnnArch arch = CnnArch::for_input(samples[0].patch.width, samples[0].patch.height,
                                              config.feature_dim());
      model.value = train_cnn<float>(train, arch, config.train).model;
      break;
    }
    case EstimatorKind::Knn:
      model.value = knn_fit(train, config.knn_k, config.knn_clusters, config.train.seed);
      break;
    case EstimatorKind::Linear:
      model.value = linear_fit(train, config.ridge_lambda);
      break;
    case EstimatorKind::Mean:
      model.value = mean_predictor(train);
      break;
  }
  return model;
}

GazeAngles predict(const EstimatorModel& model, const NormalizedSample& sample) {
  const std::vector<double> feat = sample_features(sample, model.config);
  if (const auto* cnn = std::get_if<CnnModel<float>>(&model.value))
    return cnn_forward(*cnn, sample.patch, feat);
  if (const auto* knn = std::get_if<KnnModel>(&model.value))
    return knn_predict(*knn, sample.patch, feat);
  if (const auto* lin = std::get_if<LinearModel>(&model.value))
    return linear_predict(*lin, sample.patch, feat);
  return mean_predict(std::get<MeanModel>(model.value));
}

std::vector<GazeAngles> predict_all(const EstimatorModel& model,
                                    const std::vector<NormalizedSample>& samples) {
  if (const auto* cnn = std::get_if<CnnModel<float>>(&model.value)) {
    const std::vector<TrainSample> batch = to_train_samples(samples, model.config);
    return cnn_predict_batch(*cnn, batch);
  }
  std::vector<GazeAngles> out;
  out.reserve(samples.size());
  for (const NormalizedSample& s : samples) out.push_back(predict(model, s));
  return out;
}

void save_model(const std::string& path, const EstimatorModel& model) {
  std::ofstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path + " for writing");
  f << "gazekit-model v1\n";
  f << "kind " << estimator_kind_name(model.config.kind) << "\n";
  f << "features " << model.config.use_head_pose << " " << model.config.use_pupil << "\n";
  f << "seed " << model.config.train.seed << "\n";

  std::vector<double> block;
  if (const auto* cnn = std::get_if<CnnModel<float>>(&model.value)) {
    const CnnArch& a = cnn->arch;
    f << "arch " << a.in_width << " " << a.in_height << " " << a.feature_dim << " "
      << a.conv1_maps << " " << a.conv2_maps << " " << a.kernel << " " << a.pool1_stride << " "
      << a.pool2_stride << " " << a.fc1_units << "\n";
    f << "train " << format_double(model.config.train.learning_rate) << " "
      << format_double(model.config.train.beta1) << " " << format_double(model.config.train.beta2)
      << " " << format_double(model.config.train.epsilon) << " " << model.config.train.batch_size
      << " " << model.config.train.iterations << " " << model.config.train.decay_every << " "
      << format_double(model.config.train.decay_factor) << "\n";
    cnn->params.for_each([&block](const auto& v) { append(block, v); });
  } else if (const auto* knn = std::get_if<KnnModel>(&model.value)) {
    f << "knn " << knn->k << " " << knn->clusters() << " " << knn->patch_width << " "
      << knn->patch_height << " " << knn->feature_dim << " " << knn->size() << "\n";
    append(block, knn->centroids);
    append(block, knn->assignments);
    append(block, knn->features);
    append(block, knn->targets);
    append(block, knn->patches);
  } else if (const auto* lin = std::get_if<LinearModel>(&model.value)) {
    f << "linear " << lin->patch_width << " " << lin->patch_height << " " << lin->feature_dim
      << "\n";
    append(block, lin->coef_yaw);
    append(block, lin->coef_pitch);
  } else {
    const MeanModel& mean = std::get<MeanModel>(model.value);
    block.push_back(mean.mean.yaw);
    block.push_back(mean.mean.pitch);
  }
  write_block(f, block);
  if (!f) fail(ErrorKind::IoError, "short write to " + path);
}

EstimatorModel load_model(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) fail(ErrorKind::IoError, "cannot open " + path);
  std::string line;
  if (!std::getline(f, line) || line != "gazekit-model v1")
    fail(ErrorKind::ParseError, path + ": not a gazekit model file");

  EstimatorModel model;
  CnnArch arch;
  KnnModel knn;
  LinearModel lin;
  bool have_kind = false;
  std::size_t expected = 0;

  while (std::getline(f, line)) {
    std::istringstream ss(line);
    std::string key;
    ss >> key;
    if (key == "kind") {
      std::string name;
      ss >> name;
      model.config.kind = estimator_kind_from_name(name);
      have_kind = true;
    } else if (key == "features") {
      ss >> model.config.use_head_pose >> model.config.use_pupil;
    } else if (key == "seed") {
      ss >> model.config.train.seed;
    } else if (key == "arch") {
      ss >> arch.in_width >> arch.in_height >> arch.feature_dim >> arch.conv1_maps >>
          arch.conv2_maps >> arch.kernel >> arch.pool1_stride >> arch.pool2_stride >>
          arch.fc1_units;
    } else if (key == "train") {
      ss >> model.config.train.learning_rate >> model.config.train.beta1 >>
          model.config.train.beta2 >> model.config.train.epsilon >>
          model.config.train.batch_size >> model.config.train.iterations >>
          model.config.train.decay_every >> model.config.train.decay_factor;
    } else if (key == "knn") {
      int clusters = 0, n = 0;
      ss >> knn.k >> clusters >> knn.patch_width >> knn.patch_height >> knn.feature_dim >> n;
      knn.centroids.resize(static_cast<std::size_t>(clusters) * 2);
      knn.assignments.resize(n);
      knn.features.resize(static_cast<std::size_t>(knn.feature_dim) * n);
      knn.targets.resize(static_cast<std::size_t>(n) * 2);
      knn.patches.resize(static_cast<std::size_t>(knn.patch_width) * knn.patch_height * n);
      model.config.knn_k = knn.k;
      model.config.knn_clusters = clusters;
    } else if (key == "linear") {
      ss >> lin.patch_width >> lin.patch_height >> lin.feature_dim;
    } else if (key == "params") {
      ss >> expected;
      break;
    } else {
      fail(ErrorKind::ParseError, path + ": unknown header field '" + key + "'");
    }
    if (ss.fail()) fail(ErrorKind::ParseError, path + ": malformed header line '" + line + "'");
  }
  if (!have_kind || !f) fail(ErrorKind::ParseError, path + ": incomplete header");

  std::vector<double> block(expected);
  f.read(reinterpret_cast<char*>(block.data()),
         static_cast<std::streamsize>(expected * sizeof(double)));
  if (f.gcount() != static_cast<std::streamsize>(expected * sizeof(double)))
    fail(ErrorKind::ParseError, path + ": truncated parameter block");

  std::size_t at = 0;
  const auto take = [&](std::size_t n) {
    if (at + n > block.size()) fail(ErrorKind::ParseError, path + ": parameter block too small");
    const double* p = block.data() + at;
    at += n;
    return p;
  };

  switch (model.config.kind) {
    case EstimatorKind::Cnn: {
      CnnModel<float> cnn;
      cnn.arch = arch;
      cnn.params.resize(arch);
      cnn.params.for_each([&](auto& v) {
        const double* p = take(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
          v[i] = static_cast<typename std::decay_t<decltype(v)>::value_type>(p[i]);
      });
      model.value = std::move(cnn);
      break;
    }
    case EstimatorKind::Knn: {
      const auto copy_into = [&](auto& v) {
        const double* p = take(v.size());
        for (std::size_t i = 0; i < v.size(); ++i)
          v[i] = static_cast<typename std::decay_t<decltype(v)>::value_type>(p[i]);
      };
      copy_into(knn.centroids);
      copy_into(knn.assignments);
      copy_into(knn.features);
      copy_into(knn.targets);
      copy_into(knn.patches);
      model.value = std::move(knn);
      break;
    }
    case EstimatorKind::Linear: {
      const int d = lin.patch_width * lin.patch_height + lin.feature_dim + 1;
      const double* py = take(d);
      lin.coef_yaw.assign(py, py + d);
      const double* pp = take(d);
      lin.coef_pitch.assign(pp, pp + d);
      model.value = std::move(lin);
      break;
    }
    case EstimatorKind::Mean: {
      const double* p = take(2);
      model.value = MeanModel{GazeAngles{p[0], p[1]}};
      break;
    }
  }
  if (at != block.size())
    fail(ErrorKind::ParseError, path + ": parameter block has trailing values");
  return model;
}

}  // namespace gazekit
