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
#include "dptails/models.hpp"

#include <cmath>

#include <Eigen/Cholesky>

#include "dptails/error.hpp"

namespace dptails {

namespace {

constexpr double kProbFloor = 1e-12;

double Sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

// Log-probability of the true class, clamped into [log 1e-12, log(1 - 1e-12)].
double ClampedNll(double log_p) {
  static const double lo = std::log(kProbFloor);
  static const double hi = std::log1p(-kProbFloor);
  return -std::min(std::max(log_p, lo), hi);
}

// Softmax in place; returns log-sum-exp of the input logits.
double SoftmaxInPlace(Eigen::Ref<Eigen::VectorXd> logits) {
  const double shift = logits.maxCoeff();
  logits.array() = (logits.array() - shift).exp();
  const double total = logits.sum();
  logits /= total;
  return shift + std::log(total);
}

void CheckInputs(const ModelParams& params, const Eigen::MatrixXd& features) {
  params.Validate();
  Require(features.cols() == params.input_dim, ErrorCode::kShape,
          "feature width " + std::to_string(features.cols()) + " does not match model input " +
              std::to_string(params.input_dim));
}

void CheckLabels(const ModelParams& params, const Eigen::MatrixXd& features,
                 std::span<const int> labels) {
  CheckInputs(params, features);
  Require(static_cast<Eigen::Index>(labels.size()) == features.rows(), ErrorCode::kShape,
          "label count does not match feature rows");
  for (int y : labels) {
    Require(y >= 0 && y < params.num_classes, ErrorCode::kDomain,
            "label " + std::to_string(y) + " invalid for a " +
                std::to_string(params.num_classes) + "-class model");
  }
}

// Per-record loss and gradient of the unregularized cross-entropy.
struct RecordEval {
  double loss;
  Eigen::VectorXd grad;
};

class Evaluator {
 public:
  explicit Evaluator(const ModelParams& p) : p_(p) {}

  // Probabilities for a single record (length K).
  Eigen::VectorXd Probabilities(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    Eigen::VectorXd probs(p_.num_classes);
    switch (p_.family) {
      case ModelFamily::kLogisticBinary: {
        const double s = Sigmoid(p_.theta.head(p_.input_dim).dot(x) + p_.theta[p_.input_dim]);
        probs << 1.0 - s, s;
        return probs;
      }
      case ModelFamily::kLogisticMultinomial: {
        Eigen::VectorXd logits = LinearLogits(x);
        SoftmaxInPlace(logits);
        return logits;
      }
      case ModelFamily::kMlp: {
        Eigen::VectorXd hidden;
        Eigen::VectorXd logits = MlpLogits(x, hidden);
        SoftmaxInPlace(logits);
        return logits;
      }
    }
    return probs;
  }

  RecordEval Eval(const Eigen::Ref<const Eigen::VectorXd>& x, int y) const {
    RecordEval out{0.0, Eigen::VectorXd::Zero(p_.size())};
    const Eigen::Index d = p_.input_dim;
    const Eigen::Index k = p_.num_classes;
    switch (p_.family) {
      case ModelFamily::kLogisticBinary: {
        const double t = p_.theta.head(d).dot(x) + p_.theta[d];
        // log sigma(t) = -softplus(-t); log(1 - sigma(t)) = -softplus(t)
        auto softplus = [](double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); };
        out.loss = ClampedNll(y == 1 ? -softplus(-t) : -softplus(t));
        const double r = Sigmoid(t) - static_cast<double>(y);
        out.grad.head(d) = r * x;
        out.grad[d] = r;
        return out;
      }
      case ModelFamily::kLogisticMultinomial: {
        Eigen::VectorXd logits = LinearLogits(x);
        const double y_logit = logits[y];
        const double lse = SoftmaxInPlace(logits);
        out.loss = ClampedNll(y_logit - lse);
        logits[y] -= 1.0;
        for (Eigen::Index c = 0; c < k; ++c) out.grad.segment(c * d, d) = logits[c] * x;
        out.grad.tail(k) = logits;
        return out;
      }
      case ModelFamily::kMlp: {
        const Eigen::Index h = p_.hidden;
        Eigen::VectorXd hidden;
        Eigen::VectorXd logits = MlpLogits(x, hidden);
        const double y_logit = logits[y];
        const double lse = SoftmaxInPlace(logits);
        out.loss = ClampedNll(y_logit - lse);
        logits[y] -= 1.0;  // dL/dlogits
        const Eigen::Index w2_off = h * d + h;
        Eigen::VectorXd back = Eigen::VectorXd::Zero(h);
        for (Eigen::Index c = 0; c < k; ++c) {
          out.grad.segment(w2_off + c * h, h) = logits[c] * hidden;
          back += logits[c] * p_.theta.segment(w2_off + c * h, h);
        }
        out.grad.segment(w2_off + k * h, k) = logits;
        const Eigen::VectorXd delta =
            back.array() * hidden.array() * (1.0 - hidden.array());
        for (Eigen::Index j = 0; j < h; ++j) out.grad.segment(j * d, d) = delta[j] * x;
        out.grad.segment(h * d, h) = delta;
        return out;
      }
    }
    return out;
  }

 private:
  Eigen::VectorXd LinearLogits(const Eigen::Ref<const Eigen::VectorXd>& x) const {
    const Eigen::Index d = p_.input_dim;
    const Eigen::Index k = p_.num_classes;
    Eigen::VectorXd logits(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      logits[c] = p_.theta.segment(c * d, d).dot(x) + p_.theta[k * d + c];
    }
    return logits;
  }

  Eigen::VectorXd MlpLogits(const Eigen::Ref<const Eigen::VectorXd>& x,
                            Eigen::VectorXd& hidden) const {
    const Eigen::Index d = p_.input_dim;
    const Eigen::Index k = p_.num_classes;
    const Eigen::Index h = p_.hidden;
    hidden.resize(h);
    for (Eigen::Index j = 0; j < h; ++j) {
      hidden[j] = Sigmoid(p_.theta.segment(j * d, d).dot(x) + p_.theta[h * d + j]);
    }
    const Eigen::Index w2_off = h * d + h;
    Eigen::VectorXd logits(k);
    for (Eigen::Index c = 0; c < k; ++c) {
      logits[c] = p_.theta.segment(w2_off + c * h, h).dot(hidden) + p_.theta[w2_off + k * h + c];
    }
    return logits;
  }

  const ModelParams& p_;
};

double RidgePenalty(const ModelParams& params) {
  if (params.l2_lambda == 0.0) return 0.0;
  return 0.5 * params.l2_lambda * params.WeightMask().cwiseProduct(params.theta).squaredNorm();
}

}  // namespace

std::string ModelFamilyName(ModelFamily family) {
  switch (family) {
    case ModelFamily::kLogisticBinary: return "lr-binary";
    case ModelFamily::kLogisticMultinomial: return "lr-multinomial";
    case ModelFamily::kMlp: return "mlp-1";
  }
  return "unknown";
}

ModelFamily ParseModelFamily(const std::string& name) {
  if (name == "lr-binary") return ModelFamily::kLogisticBinary;
  if (name == "lr-multinomial") return ModelFamily::kLogisticMultinomial;
  if (name == "mlp-1") return ModelFamily::kMlp;
  Fail(ErrorCode::kConfig, "family: unknown model family '" + name + "'");
}

Eigen::Index ModelParams::ParamCount(ModelFamily family, int input_dim, int num_classes,
                                     int hidden) {
  const Eigen::Index d = input_dim;
  const Eigen::Index k = num_classes;
  const Eigen::Index h = hidden;
  switch (family) {
    case ModelFamily::kLogisticBinary: return d + 1;
    case ModelFamily::kLogisticMultinomial: return k * d + k;
    case ModelFamily::kMlp: return h * d + h + k * h + k;
  }
  return 0;
}

ModelParams ModelParams::Zeros(ModelFamily family, int input_dim, int num_classes, int hidden,
                               double l2_lambda) {
  ModelParams p;
  p.family = family;
  p.input_dim = input_dim;
  p.num_classes = family == ModelFamily::kLogisticBinary ? 2 : num_classes;
  p.hidden = family == ModelFamily::kMlp ? hidden : 0;
  p.l2_lambda = l2_lambda;
  p.theta = Eigen::VectorXd::Zero(ParamCount(family, input_dim, p.num_classes, p.hidden));
  p.Validate();
  return p;
}

Eigen::VectorXd ModelParams::WeightMask() const {
  Eigen::VectorXd mask = Eigen::VectorXd::Ones(theta.size());
  const Eigen::Index d = input_dim;
  const Eigen::Index k = num_classes;
  const Eigen::Index h = hidden;
  switch (family) {
    case ModelFamily::kLogisticBinary:
      mask[d] = 0.0;
      break;
    case ModelFamily::kLogisticMultinomial:
      mask.tail(k).setZero();
      break;
    case ModelFamily::kMlp:
      mask.segment(h * d, h).setZero();
      mask.tail(k).setZero();
      break;
  }
  return mask;
}

void ModelParams::Validate() const {
  Require(input_dim >= 1, ErrorCode::kShape, "model input dimension must be >= 1");
  Require(num_classes >= 2, ErrorCode::kShape, "model needs at least two classes");
  Require(family != ModelFamily::kLogisticBinary || num_classes == 2, ErrorCode::kShape,
          "lr-binary models have exactly two classes");
  Require(family != ModelFamily::kMlp || hidden >= 1, ErrorCode::kShape,
          "mlp-1 needs a hidden width >= 1");
  Require(l2_lambda >= 0.0, ErrorCode::kDomain, "l2_lambda must be >= 0");
  Require(theta.size() == ParamCount(family, input_dim, num_classes, hidden), ErrorCode::kShape,
          "theta length " + std::to_string(theta.size()) + " does not match " +
              ModelFamilyName(family) + " dimensions");
}

Eigen::MatrixXd Predict(const ModelParams& params, const Eigen::MatrixXd& features) {
  CheckInputs(params, features);
  const Evaluator eval(params);
  Eigen::MatrixXd out(features.rows(), params.num_classes);
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    out.row(i) = eval.Probabilities(features.row(i).transpose()).transpose();
  }
  return out;
}

Eigen::VectorXd PositiveScores(const ModelParams& params, const Eigen::MatrixXd& features) {
  Require(params.num_classes == 2, ErrorCode::kUnsupportedFamily,
          "positive scores need a two-class model");
  return Predict(params, features).col(1);
}

std::vector<int> PredictLabels(const ModelParams& params, const Eigen::MatrixXd& features,
                               double threshold) {
  const Eigen::MatrixXd probs = Predict(params, features);
  std::vector<int> out(static_cast<std::size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    if (params.num_classes == 2) {
      out[static_cast<std::size_t>(i)] = probs(i, 1) >= threshold ? 1 : 0;
    } else {
      Eigen::Index best = 0;
      probs.row(i).maxCoeff(&best);
      out[static_cast<std::size_t>(i)] = static_cast<int>(best);
    }
  }
  return out;
}

LossAndGradients LossAndPerExampleGrads(const ModelParams& params, const Eigen::MatrixXd& features,
                                        std::span<const int> labels) {
  CheckLabels(params, features, labels);
  Require(features.rows() > 0, ErrorCode::kDomain, "loss over an empty subset");
  const Evaluator eval(params);
  const Eigen::VectorXd ridge_grad =
      params.l2_lambda * params.WeightMask().cwiseProduct(params.theta);
  LossAndGradients out;
  out.per_example.resize(features.rows(), params.size());
  double total = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    RecordEval r = eval.Eval(features.row(i).transpose(), labels[static_cast<std::size_t>(i)]);
    total += r.loss;
    out.per_example.row(i) = (r.grad + ridge_grad).transpose();
  }
  out.mean_loss = total / static_cast<double>(features.rows()) + RidgePenalty(params);
  return out;
}

double MeanLoss(const ModelParams& params, const Eigen::MatrixXd& features,
                std::span<const int> labels) {
  CheckLabels(params, features, labels);
  Require(features.rows() > 0, ErrorCode::kDomain, "loss over an empty subset");
  const Evaluator eval(params);
  double total = 0.0;
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    total += eval.Eval(features.row(i).transpose(), labels[static_cast<std::size_t>(i)]).loss;
  }
  return total / static_cast<double>(features.rows()) + RidgePenalty(params);
}

Eigen::VectorXd MeanGradient(const ModelParams& params, const Eigen::MatrixXd& features,
                             std::span<const int> labels) {
  CheckLabels(params, features, labels);
  Require(features.rows() > 0, ErrorCode::kDomain, "gradient over an empty subset");
  const Evaluator eval(params);
  Eigen::VectorXd total = Eigen::VectorXd::Zero(params.size());
  for (Eigen::Index i = 0; i < features.rows(); ++i) {
    total += eval.Eval(features.row(i).transpose(), labels[static_cast<std::size_t>(i)]).grad;
  }
  return total / static_cast<double>(features.rows()) +
         params.l2_lambda * params.WeightMask().cwiseProduct(params.theta);
}

double RecordLoss(const ModelParams& params, const Eigen::VectorXd& x, int label) {
  params.Validate();
  Require(x.size() == params.input_dim, ErrorCode::kShape, "record width mismatch");
  Require(label >= 0 && label < params.num_classes, ErrorCode::kDomain, "invalid label");
  return Evaluator(params).Eval(x, label).loss;
}

Eigen::VectorXd RecordLossGradient(const ModelParams& params, const Eigen::VectorXd& x,
                                   int label) {
  params.Validate();
  Require(x.size() == params.input_dim, ErrorCode::kShape, "record width mismatch");
  Require(label >= 0 && label < params.num_classes, ErrorCode::kDomain, "invalid label");
  return Evaluator(params).Eval(x, label).grad;
}

Eigen::MatrixXd LrHessian(const ModelParams& params, const Eigen::MatrixXd& features,
                          double damping) {
  Require(params.family == ModelFamily::kLogisticBinary, ErrorCode::kUnsupportedFamily,
          "Hessians are only provided for lr-binary models");
  CheckInputs(params, features);
  Require(damping >= 0.0, ErrorCode::kDomain, "damping must be >= 0");
  Require(features.rows() > 0, ErrorCode::kDomain, "Hessian over an empty cohort");
  const Eigen::Index d = params.input_dim;
  const Eigen::Index n = features.rows();
  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = features;
  z.col(d).setOnes();
  const Eigen::VectorXd logits = z * params.theta;
  Eigen::VectorXd curvature(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const double s = Sigmoid(logits[i]);
    curvature[i] = s * (1.0 - s);
  }
  Eigen::MatrixXd h = z.transpose() * curvature.asDiagonal() * z / static_cast<double>(n);
  h.diagonal() += params.l2_lambda * params.WeightMask();
  h.diagonal().array() += damping;
  // Symmetrize away rounding in the product.
  return 0.5 * (h + h.transpose());
}

NewtonResult FitLogisticNewton(const Eigen::MatrixXd& features, std::span<const int> labels,
                               const Eigen::VectorXd& ridge, const Eigen::VectorXd& linear,
                               const NewtonOptions& options,
                               const std::optional<Eigen::VectorXd>& weights,
                               const std::optional<Eigen::VectorXd>& init) {
  const Eigen::Index n = features.rows();
  const Eigen::Index d = features.cols();
  Require(n > 0, ErrorCode::kDomain, "cannot fit on an empty cohort");
  Require(static_cast<Eigen::Index>(labels.size()) == n, ErrorCode::kShape,
          "label count does not match feature rows");
  Require(ridge.size() == d + 1 && linear.size() == d + 1, ErrorCode::kShape,
          "ridge and linear terms must have length d + 1");
  for (int y : labels) {
    Require(y == 0 || y == 1, ErrorCode::kUnsupportedFamily, "logistic fit needs binary labels");
  }
  Eigen::MatrixXd z(n, d + 1);
  z.leftCols(d) = features;
  z.col(d).setOnes();
  Eigen::VectorXd y(n);
  for (Eigen::Index i = 0; i < n; ++i) y[i] = labels[static_cast<std::size_t>(i)];
  const Eigen::VectorXd w = weights.value_or(Eigen::VectorXd::Ones(n));
  Require(w.size() == n, ErrorCode::kShape, "sample weights must match rows");
  const double inv_n = 1.0 / static_cast<double>(n);

  auto objective = [&](const Eigen::VectorXd& theta) {
    const Eigen::VectorXd t = z * theta;
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      // log(1 + e^t) - y t, stable
      const double sp = t[i] > 0 ? t[i] + std::log1p(std::exp(-t[i])) : std::log1p(std::exp(t[i]));
      total += w[i] * (sp - y[i] * t[i]);
    }
    return total * inv_n + 0.5 * theta.dot(ridge.cwiseProduct(theta)) + linear.dot(theta);
  };

  Eigen::VectorXd theta = init.value_or(Eigen::VectorXd::Zero(d + 1));
  NewtonResult result;
  for (int iter = 0; iter <= options.max_iterations; ++iter) {
    const Eigen::VectorXd t = z * theta;
    Eigen::VectorXd resid(n), curv(n);
    for (Eigen::Index i = 0; i < n; ++i) {
      const double s = Sigmoid(t[i]);
      resid[i] = w[i] * (s - y[i]);
      curv[i] = w[i] * s * (1.0 - s);
    }
    const Eigen::VectorXd grad =
        z.transpose() * resid * inv_n + ridge.cwiseProduct(theta) + linear;
    result.gradient_norm = grad.norm();
    result.iterations = iter;
    if (!std::isfinite(result.gradient_norm)) break;
    if (result.gradient_norm <= options.gradient_tolerance) {
      result.theta = theta;
      return result;
    }
    if (iter == options.max_iterations) break;
    Eigen::MatrixXd hess = z.transpose() * curv.asDiagonal() * z * inv_n;
    hess.diagonal() += ridge;
    // Levenberg-style damping until the factorization succeeds.
    Eigen::VectorXd step;
    double mu = 0.0;
    for (int attempt = 0; attempt < 30; ++attempt) {
      Eigen::MatrixXd damped = hess;
      damped.diagonal().array() += mu;
      Eigen::LLT<Eigen::MatrixXd> llt(damped);
      if (llt.info() == Eigen::Success) {
        step = -llt.solve(grad);
        if (step.allFinite()) break;
      }
      mu = mu == 0.0 ? 1e-10 : mu * 10.0;
      step.resize(0);
    }
    if (step.size() == 0) break;
    const double f0 = objective(theta);
    const double slope = grad.dot(step);
    double alpha = 1.0;
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      const Eigen::VectorXd candidate = theta + alpha * step;
      const double f = objective(candidate);
      if (std::isfinite(f) && f <= f0 + 1e-4 * alpha * slope) {
        theta = candidate;
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      // Rounding floor: accept the full Newton step when it cannot be
      // distinguished from the current objective.
      theta += step;
    }
  }
  Fail(ErrorCode::kOptimization, "Newton solver stopped at gradient norm " +
                                     std::to_string(result.gradient_norm) + " after " +
                                     std::to_string(result.iterations) + " iterations");
}

ModelParams FitRidgeLogistic(const Eigen::MatrixXd& features, std::span<const int> labels,
                             double l2_lambda, const NewtonOptions& options) {
  ModelParams params = ModelParams::Zeros(ModelFamily::kLogisticBinary,
                                          static_cast<int>(features.cols()), 2, 0, l2_lambda);
  const Eigen::VectorXd ridge = l2_lambda * params.WeightMask();
  params.theta = FitLogisticNewton(features, labels, ridge, Eigen::VectorXd::Zero(params.size()),
                                   options)
                     .theta;
  return params;
}

}  // namespace dptails
