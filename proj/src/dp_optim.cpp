// Copyright 2026 The dp-tails Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
#include "dptails/dp_optim.hpp"

#include <cmath>

#include "dptails/error.hpp"

namespace dptails {

std::string PrivacyLevelName(PrivacyLevel level) {
  switch (level) {
    case PrivacyLevel::kNone: return "none";
    case PrivacyLevel::kLow: return "low";
    case PrivacyLevel::kHigh: return "high";
    case PrivacyLevel::kCustom: return "custom";
  }
  return "custom";
}

PrivacyLevel ParsePrivacyLevel(const std::string& name) {
  if (name == "none") return PrivacyLevel::kNone;
  if (name == "low") return PrivacyLevel::kLow;
  if (name == "high") return PrivacyLevel::kHigh;
  if (name == "custom") return PrivacyLevel::kCustom;
  Fail(ErrorCode::kConfig, "privacy_level_name: unknown level '" + name + "'");
}

std::string OptimizerName(OptimizerKind kind) {
  return kind == OptimizerKind::kSgd ? "sgd" : "adam";
}

OptimizerKind ParseOptimizer(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adam") return OptimizerKind::kAdam;
  Fail(ErrorCode::kConfig, "optimizer: unknown optimizer '" + name + "'");
}

void DPTrainingConfig::Validate() const {
  Require(batch_size >= 1, ErrorCode::kConfig, "batch_size: must be >= 1");
  Require(microbatch_count >= 1 && batch_size % microbatch_count == 0, ErrorCode::kConfig,
          "microbatch_count: must divide batch_size");
  Require(learning_rate > 0.0 && std::isfinite(learning_rate), ErrorCode::kConfig,
          "learning_rate: must be positive");
  Require(epochs >= 0, ErrorCode::kConfig, "epochs: must be >= 0");
  Require(noise_multiplier >= 0.0 && std::isfinite(noise_multiplier), ErrorCode::kConfig,
          "noise_multiplier: must be >= 0");
  Require(!clip_norm || (*clip_norm > 0.0 && std::isfinite(*clip_norm)), ErrorCode::kConfig,
          "clip_norm: must be positive when present");
  Require(clip_norm || noise_multiplier == 0.0, ErrorCode::kConfig,
          "noise_multiplier: requires clip_norm");
  Require(delta > 0.0 && delta < 1.0, ErrorCode::kConfig, "delta: must lie in (0, 1)");
}

DPTrainingConfig DPTrainingConfig::ForLevel(PrivacyLevel level, const DPTrainingConfig& base) {
  DPTrainingConfig c = base;
  c.level = level;
  switch (level) {
    case PrivacyLevel::kNone:
      c.clip_norm.reset();
      c.noise_multiplier = 0.0;
      break;
    case PrivacyLevel::kLow:
      c.clip_norm = 5.0;
      c.noise_multiplier = 0.1;
      break;
    case PrivacyLevel::kHigh:
      c.clip_norm = 1.0;
      c.noise_multiplier = 1.0;
      break;
    case PrivacyLevel::kCustom:
      break;
  }
  return c;
}

DPTrainingConfig DPTrainingConfig::ForLevel(PrivacyLevel level) {
  return ForLevel(level, DPTrainingConfig{});
}

Eigen::MatrixXd PrepareFeatures(const TrainedModel& model, const Eigen::MatrixXd& features) {
  if (!model.record_norm_bound) return features;
  Eigen::MatrixXd out = features;
  const double bound = *model.record_norm_bound;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    const double norm = out.row(i).norm();
    if (norm > bound) out.row(i) *= bound / norm;
  }
  return out;
}

Eigen::VectorXd ModelScores(const TrainedModel& model, const Eigen::MatrixXd& features) {
  return PositiveScores(model.params, PrepareFeatures(model, features));
}

Eigen::VectorXd ClipGradient(const Eigen::VectorXd& gradient, double clip_norm) {
  Require(clip_norm > 0.0, ErrorCode::kDomain, "clip norm must be positive");
  Require(gradient.allFinite(), ErrorCode::kNumeric, "cannot clip a non-finite gradient");
  const double norm = gradient.norm();
  if (norm <= clip_norm) return gradient;
  return gradient / (norm / clip_norm);
}

Eigen::VectorXd ClippedMicrobatchSum(const PerExampleGradients& per_example, int microbatch_count,
                                     std::optional<double> clip_norm) {
  const Eigen::Index rows = per_example.rows();
  Require(microbatch_count >= 1 && rows % microbatch_count == 0, ErrorCode::kConfig,
          "microbatch_count: must divide the batch size");
  const Eigen::Index per_micro = rows / microbatch_count;
  Eigen::VectorXd total = Eigen::VectorXd::Zero(per_example.cols());
  for (int j = 0; j < microbatch_count; ++j) {
    const Eigen::VectorXd mean =
        per_example.middleRows(j * per_micro, per_micro).colwise().sum().transpose() /
        static_cast<double>(per_micro);
    total += clip_norm ? ClipGradient(mean, *clip_norm) : mean;
  }
  return total;
}

Eigen::VectorXd PrivatizedGradient(const ModelParams& params, const Eigen::MatrixXd& features,
                                   std::span<const int> labels, const DPTrainingConfig& config,
                                   Rng& noise_rng) {
  const LossAndGradients lg = LossAndPerExampleGrads(params, features, labels);
  const int m = config.microbatch_count;
  Require(features.rows() % m == 0, ErrorCode::kConfig,
          "microbatch_count: " + std::to_string(m) + " does not divide batch of " +
              std::to_string(features.rows()));
  Eigen::VectorXd total = ClippedMicrobatchSum(lg.per_example, m, config.clip_norm);
  if (config.clip_norm && config.noise_multiplier > 0.0) {
    const double scale = config.noise_multiplier * *config.clip_norm;
    for (Eigen::Index i = 0; i < total.size(); ++i) total[i] += scale * noise_rng.Normal();
  }
  return total / static_cast<double>(m);
}

Optimizer::Optimizer(OptimizerKind kind, double learning_rate, Eigen::Index size)
    : kind_(kind), lr_(learning_rate) {
  if (kind_ == OptimizerKind::kAdam) {
    m_ = Eigen::VectorXd::Zero(size);
    v_ = Eigen::VectorXd::Zero(size);
  }
}

void Optimizer::Step(Eigen::VectorXd& theta, const Eigen::VectorXd& gradient) {
  if (kind_ == OptimizerKind::kSgd) {
    theta -= lr_ * gradient;
    return;
  }
  constexpr double kBeta1 = 0.9;
  constexpr double kBeta2 = 0.999;
  constexpr double kEps = 1e-8;
  ++t_;
  m_ = kBeta1 * m_ + (1.0 - kBeta1) * gradient;
  v_ = kBeta2 * v_ + (1.0 - kBeta2) * gradient.cwiseProduct(gradient);
  const double c1 = 1.0 - std::pow(kBeta1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(kBeta2, static_cast<double>(t_));
  theta.array() -= lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + kEps);
}

ModelParams DpSgdStep(const ModelParams& params, const Eigen::MatrixXd& features,
                      std::span<const int> labels, const DPTrainingConfig& config, Rng& noise_rng) {
  config.Validate();
  ModelParams out = params;
  out.theta -= config.learning_rate * PrivatizedGradient(params, features, labels, config, noise_rng);
  return out;
}

ModelParams InitialParams(const FamilySpec& spec, int input_dim, int num_classes,
                          std::uint64_t seed) {
  ModelParams p = ModelParams::Zeros(spec.family, input_dim, num_classes, spec.hidden,
                                     spec.l2_lambda);
  if (spec.family != ModelFamily::kMlp) return p;
  Rng rng(DeriveSeed(seed, {"init"}));
  const Eigen::Index d = input_dim;
  const Eigen::Index h = spec.hidden;
  const Eigen::Index k = p.num_classes;
  const double s1 = 1.0 / std::sqrt(static_cast<double>(d));
  const double s2 = 1.0 / std::sqrt(static_cast<double>(h));
  for (Eigen::Index i = 0; i < h * d; ++i) p.theta[i] = s1 * (2.0 * rng.Uniform() - 1.0);
  const Eigen::Index w2 = h * d + h;
  for (Eigen::Index i = 0; i < k * h; ++i) p.theta[w2 + i] = s2 * (2.0 * rng.Uniform() - 1.0);
  return p;
}

TrainedModel Train(const FamilySpec& spec, const Cohort& train, const DPTrainingConfig& config) {
  config.Validate();
  Require(!train.empty(), ErrorCode::kDomain, "training cohort is empty");
  train.Validate();
  const auto n = static_cast<std::int64_t>(train.size());
  const int num_classes = spec.family == ModelFamily::kLogisticBinary ? 2 : train.num_classes;
  if (spec.family == ModelFamily::kLogisticBinary) {
    for (int y : train.labels) {
      Require(y == 0 || y == 1, ErrorCode::kDomain, "lr-binary needs labels in {0, 1}");
    }
  }

  TrainedModel out;
  out.params = InitialParams(spec, static_cast<int>(train.dim()), num_classes, config.seed);
  const std::int64_t steps_per_epoch = n / config.batch_size;
  Require(config.epochs == 0 || steps_per_epoch > 0, ErrorCode::kConfig,
          "batch_size: larger than the training cohort");

  Rng shuffle_rng(DeriveSeed(config.seed, {"dp-sgd-shuffle"}));
  Rng noise_rng(DeriveSeed(config.seed, {"dp-sgd-noise"}));
  Optimizer optimizer(config.optimizer, config.learning_rate, out.params.size());
  const auto batch = static_cast<std::size_t>(config.batch_size);
  Eigen::MatrixXd xb(config.batch_size, train.dim());
  std::vector<int> yb(batch);

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const std::vector<std::size_t> perm = shuffle_rng.Permutation(train.size());
    for (std::int64_t s = 0; s < steps_per_epoch; ++s) {
      for (std::size_t r = 0; r < batch; ++r) {
        const std::size_t i = perm[static_cast<std::size_t>(s) * batch + r];
        xb.row(static_cast<Eigen::Index>(r)) = train.features.row(static_cast<Eigen::Index>(i));
        yb[r] = train.labels[i];
      }
      const Eigen::VectorXd g = PrivatizedGradient(out.params, xb, yb, config, noise_rng);
      optimizer.Step(out.params.theta, g);
      ++out.steps_taken;
    }
    const double loss = MeanLoss(out.params, train.features, train.labels);
    if (!std::isfinite(loss) || !out.params.theta.allFinite()) {
      Fail(ErrorCode::kTraining, "divergence (non-finite loss) at epoch " + std::to_string(epoch));
    }
    out.training_trace.push_back(loss);
  }

  const double q = static_cast<double>(config.batch_size) / static_cast<double>(n);
  if (out.steps_taken == 0) {
    out.spend = {0.0, 0.0, std::nullopt};
  } else if (!config.is_private() || config.noise_multiplier == 0.0) {
    out.spend = PrivacySpend::NonPrivate();
  } else {
    out.accounting = AccountingRecord{q, config.noise_multiplier, out.steps_taken, config.delta};
    out.spend = ComputeDpSgdSpend(q, config.noise_multiplier, out.steps_taken, config.delta);
    out.notes = AccountingCaveats();
  }
  return out;
}

TrainedModel Train(const FamilySpec& spec, const CohortSplit& split, const DPTrainingConfig& config) {
  return Train(spec, split.train, config);
}

}  // namespace dptails
