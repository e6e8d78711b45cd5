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
#include "dptails/harness.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <numeric>
#include <sstream>
#include <thread>

#include "dptails/accountant.hpp"
#include "dptails/error.hpp"
#include "dptails/metrics.hpp"
#include "dptails/random.hpp"

namespace dptails {

std::string MechanismName(Mechanism mechanism) {
  return mechanism == Mechanism::kDpSgd ? "dp-sgd" : "objective-perturbation";
}

Mechanism ParseMechanism(const std::string& name) {
  if (name == "dp-sgd") return Mechanism::kDpSgd;
  if (name == "objective-perturbation") return Mechanism::kObjectivePerturbation;
  Fail(ErrorCode::kConfig, "mechanisms: unknown mechanism '" + name + "'");
}

std::string AuditName(Audit audit) {
  switch (audit) {
    case Audit::kUtility: return "utility";
    case Audit::kRobustness: return "robustness";
    case Audit::kFairness: return "fairness";
    case Audit::kInfluence: return "influence";
  }
  return "utility";
}

Audit ParseAudit(const std::string& name) {
  if (name == "utility") return Audit::kUtility;
  if (name == "robustness") return Audit::kRobustness;
  if (name == "fairness") return Audit::kFairness;
  if (name == "influence") return Audit::kInfluence;
  Fail(ErrorCode::kConfig, "audits: unknown audit '" + name + "'");
}

void ExperimentConfig::Validate() const {
  Require(!tasks.empty(), ErrorCode::kConfig, "tasks: must not be empty");
  Require(!levels.empty(), ErrorCode::kConfig, "privacy_levels: must not be empty");
  Require(!mechanisms.empty(), ErrorCode::kConfig, "mechanisms: must not be empty");
  Require(!seeds.empty(), ErrorCode::kConfig, "seeds: must not be empty");
  Require(workers >= 1, ErrorCode::kConfig, "workers: must be >= 1");
  Require(influence.panel >= 1 && influence.train_rows >= 1 && influence.test_rows >= 1,
          ErrorCode::kConfig, "influence: row counts must be >= 1");
  Require(fairness.threshold >= 0.0 && fairness.threshold <= 1.0, ErrorCode::kConfig,
          "fairness.threshold: must lie in [0, 1]");
  std::set<std::string> names;
  for (const TaskSpec& t : tasks) {
    Require(names.insert(t.name).second, ErrorCode::kConfig,
            "tasks: duplicate task name '" + t.name + "'");
  }
  names.clear();
  for (const LevelSpec& l : levels) {
    Require(names.insert(l.name).second, ErrorCode::kConfig,
            "privacy_levels: duplicate level name '" + l.name + "'");
    l.training.Validate();
  }
  cohort.Validate();
  training.Validate();
}

LevelSpec NamedLevel(PrivacyLevel level, const DPTrainingConfig& base,
                     const ObjPertSettings& obj_pert) {
  Require(level != PrivacyLevel::kCustom, ErrorCode::kConfig,
          "privacy_levels: custom levels need explicit settings");
  LevelSpec spec;
  spec.name = PrivacyLevelName(level);
  spec.training = DPTrainingConfig::ForLevel(level, base);
  if (level == PrivacyLevel::kLow) spec.obj_pert_eps = obj_pert.eps_low;
  if (level == PrivacyLevel::kHigh) spec.obj_pert_eps = obj_pert.eps_high;
  return spec;
}

namespace {

Json LevelToJson(const LevelSpec& l) {
  Json j;
  j["name"] = l.name;
  j["level"] = PrivacyLevelName(l.training.level);
  j["clip_norm"] = l.training.clip_norm ? Json(*l.training.clip_norm) : Json(nullptr);
  j["noise_multiplier"] = l.training.noise_multiplier;
  j["eps_p"] = l.obj_pert_eps ? Json(*l.obj_pert_eps) : Json(nullptr);
  return j;
}

LevelSpec LevelFromJson(const Json& json, const DPTrainingConfig& base,
                        const ObjPertSettings& obj_pert, const std::string& path) {
  if (json.is_string()) return NamedLevel(ParsePrivacyLevel(json.get<std::string>()), base, obj_pert);
  JsonReader r(json, path);
  const PrivacyLevel level = ParsePrivacyLevel(r.String("level", "custom"));
  LevelSpec spec;
  if (level == PrivacyLevel::kCustom) {
    spec.training = base;
    spec.training.level = PrivacyLevel::kCustom;
    spec.training.clip_norm = r.OptionalNumber("clip_norm");
    spec.training.noise_multiplier = r.Number("noise_multiplier", 0.0);
    spec.obj_pert_eps = r.OptionalNumber("eps_p");
    spec.name = r.String("name");
  } else {
    spec = NamedLevel(level, base, obj_pert);
    spec.name = r.String("name", spec.name);
    const std::string fixed = ": fixed by level '" + PrivacyLevelName(level) + "'";
    Require(!r.Has("clip_norm") || r.OptionalNumber("clip_norm") == spec.training.clip_norm,
            ErrorCode::kConfig, r.Path("clip_norm") + fixed);
    r.OptionalNumber("clip_norm");
    const auto noise = r.OptionalNumber("noise_multiplier");
    Require(!noise || *noise == spec.training.noise_multiplier, ErrorCode::kConfig,
            r.Path("noise_multiplier") + fixed);
    const auto eps = r.OptionalNumber("eps_p");
    Require(!r.Has("eps_p") || eps == spec.obj_pert_eps, ErrorCode::kConfig,
            r.Path("eps_p") + fixed);
  }
  r.Finish();
  return spec;
}

Json TaskToJson(const TaskSpec& t) {
  Json j;
  j["name"] = t.name;
  j["family"] = ModelFamilyName(t.family.family);
  j["hidden"] = t.family.hidden;
  j["l2_lambda"] = t.family.l2_lambda;
  j["positive_prevalence"] = t.positive_prevalence ? Json(*t.positive_prevalence) : Json(nullptr);
  j["num_classes"] = t.num_classes ? Json(*t.num_classes) : Json(nullptr);
  return j;
}

TaskSpec TaskFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  TaskSpec t;
  t.name = r.String("name", t.name);
  t.family.family = ParseModelFamily(r.String("family", "lr-binary"));
  t.family.hidden = static_cast<int>(r.Integer("hidden", t.family.hidden));
  t.family.l2_lambda = r.Number("l2_lambda", t.family.l2_lambda);
  if (r.Has("positive_prevalence")) {
    t.positive_prevalence = r.Numbers("positive_prevalence", {});
  } else {
    r.OptionalNumber("positive_prevalence");
  }
  if (const auto k = r.OptionalInteger("num_classes")) t.num_classes = static_cast<int>(*k);
  r.Finish();
  Require(t.family.hidden >= 1, ErrorCode::kConfig, r.Path("hidden") + ": must be >= 1");
  Require(t.family.l2_lambda >= 0.0, ErrorCode::kConfig, r.Path("l2_lambda") + ": must be >= 0");
  return t;
}

std::string DomainModelName(DomainModelKind kind) {
  return kind == DomainModelKind::kRidgeLogistic ? "ridge-logistic" : "constant";
}

DomainModelKind ParseDomainModel(const std::string& name) {
  if (name == "ridge-logistic") return DomainModelKind::kRidgeLogistic;
  if (name == "constant") return DomainModelKind::kConstant;
  Fail(ErrorCode::kConfig, "shift.domain_model: unknown model '" + name + "'");
}

std::vector<std::string> StringList(const Json& json, const std::string& path) {
  Require(json.is_array(), ErrorCode::kConfig, path + ": expected an array");
  std::vector<std::string> out;
  for (const Json& e : json) {
    Require(e.is_string(), ErrorCode::kConfig, path + ": expected strings");
    out.push_back(e.get<std::string>());
  }
  return out;
}

}  // namespace

Json ToJson(const ExperimentConfig& c) {
  Json j;
  j["name"] = c.name;
  j["cohort"] = ToJson(c.cohort);
  j["tasks"] = Json::array();
  for (const TaskSpec& t : c.tasks) j["tasks"].push_back(TaskToJson(t));
  Json training = ToJson(c.training);
  for (const char* key : {"level", "clip_norm", "noise_multiplier", "seed"}) training.erase(key);
  j["training"] = training;
  j["privacy_levels"] = Json::array();
  for (const LevelSpec& l : c.levels) j["privacy_levels"].push_back(LevelToJson(l));
  j["mechanisms"] = Json::array();
  for (Mechanism m : c.mechanisms) j["mechanisms"].push_back(MechanismName(m));
  j["seeds"] = c.seeds;
  j["audits"] = Json::array();
  for (Audit a : c.audits) j["audits"].push_back(AuditName(a));
  j["protocol"] = SplitProtocolName(c.protocol);
  j["objective_perturbation"] = {{"lambda", c.obj_pert.lambda},
                                 {"record_norm_bound", c.obj_pert.record_norm_bound},
                                 {"smoothness", c.obj_pert.smoothness},
                                 {"eps_low", c.obj_pert.eps_low},
                                 {"eps_high", c.obj_pert.eps_high}};
  j["fairness"] = {{"group_1", c.fairness.group_1},
                   {"group_2", c.fairness.group_2},
                   {"threshold", c.fairness.threshold}};
  j["influence"] = {{"train_rows", c.influence.train_rows},
                    {"test_rows", c.influence.test_rows},
                    {"panel", c.influence.panel},
                    {"damping", c.influence.damping ? Json(*c.influence.damping) : Json(nullptr)}};
  j["shift"] = {{"domain_model", DomainModelName(c.shift.kind)},
                {"l2_lambda", c.shift.l2_lambda},
                {"fit_fraction", c.shift.fit_fraction}};
  j["output_dir"] = c.output_dir;
  j["workers"] = c.workers;
  return j;
}

ExperimentConfig ExperimentConfigFromJson(const Json& json) {
  JsonReader r(json, "config");
  ExperimentConfig c;
  c.name = r.String("name", c.name);
  if (r.Has("cohort")) c.cohort = CohortConfigFromJson(r.Raw("cohort"), "cohort");
  if (r.Has("tasks")) {
    const Json& tasks = r.Raw("tasks");
    Require(tasks.is_array(), ErrorCode::kConfig, "tasks: expected an array");
    c.tasks.clear();
    for (std::size_t i = 0; i < tasks.size(); ++i) {
      c.tasks.push_back(TaskFromJson(tasks[i], "tasks[" + std::to_string(i) + "]"));
    }
  }
  if (r.Has("training")) {
    Require(!r.Raw("training").contains("level"), ErrorCode::kConfig,
            "training.level: privacy levels belong in privacy_levels");
    c.training = DPTrainingConfigFromJson(r.Raw("training"), "training");
  }
  if (r.Has("objective_perturbation")) {
    JsonReader o(r.Raw("objective_perturbation"), "objective_perturbation");
    c.obj_pert.lambda = o.Number("lambda", c.obj_pert.lambda);
    c.obj_pert.record_norm_bound = o.Number("record_norm_bound", c.obj_pert.record_norm_bound);
    c.obj_pert.smoothness = o.Number("smoothness", c.obj_pert.smoothness);
    c.obj_pert.eps_low = o.Number("eps_low", c.obj_pert.eps_low);
    c.obj_pert.eps_high = o.Number("eps_high", c.obj_pert.eps_high);
    o.Finish();
    ObjPertConfig check;
    check.lambda = c.obj_pert.lambda;
    check.record_norm_bound = c.obj_pert.record_norm_bound;
    check.smoothness = c.obj_pert.smoothness;
    check.eps_p = std::min(c.obj_pert.eps_low, c.obj_pert.eps_high);
    check.Validate();
  }
  if (r.Has("privacy_levels")) {
    const Json& levels = r.Raw("privacy_levels");
    Require(levels.is_array(), ErrorCode::kConfig, "privacy_levels: expected an array");
    for (std::size_t i = 0; i < levels.size(); ++i) {
      c.levels.push_back(LevelFromJson(levels[i], c.training, c.obj_pert,
                                       "privacy_levels[" + std::to_string(i) + "]"));
    }
  } else {
    for (PrivacyLevel l : {PrivacyLevel::kNone, PrivacyLevel::kLow, PrivacyLevel::kHigh}) {
      c.levels.push_back(NamedLevel(l, c.training, c.obj_pert));
    }
  }
  if (r.Has("mechanisms")) {
    c.mechanisms.clear();
    for (const std::string& m : StringList(r.Raw("mechanisms"), "mechanisms")) {
      c.mechanisms.push_back(ParseMechanism(m));
    }
  }
  if (r.Has("seeds")) {
    const Json& seeds = r.Raw("seeds");
    Require(seeds.is_array(), ErrorCode::kConfig, "seeds: expected an array");
    c.seeds.clear();
    for (const Json& s : seeds) {
      Require(s.is_number_unsigned() || (s.is_number_integer() && s.get<std::int64_t>() >= 0),
              ErrorCode::kConfig, "seeds: expected non-negative integers");
      c.seeds.push_back(s.get<std::uint64_t>());
    }
  }
  if (r.Has("audits")) {
    c.audits.clear();
    for (const std::string& a : StringList(r.Raw("audits"), "audits")) c.audits.insert(ParseAudit(a));
  }
  c.protocol = ParseSplitProtocol(r.String("protocol", SplitProtocolName(c.protocol)));
  if (r.Has("fairness")) {
    JsonReader f(r.Raw("fairness"), "fairness");
    c.fairness.group_1 = static_cast<int>(f.Integer("group_1", c.fairness.group_1));
    c.fairness.group_2 = static_cast<int>(f.Integer("group_2", c.fairness.group_2));
    c.fairness.threshold = f.Number("threshold", c.fairness.threshold);
    f.Finish();
  }
  if (r.Has("influence")) {
    JsonReader f(r.Raw("influence"), "influence");
    auto count = [&](const char* key, std::size_t fallback) {
      const std::int64_t v = f.Integer(key, static_cast<std::int64_t>(fallback));
      Require(v >= 1, ErrorCode::kConfig, f.Path(key) + ": must be >= 1");
      return static_cast<std::size_t>(v);
    };
    c.influence.train_rows = count("train_rows", c.influence.train_rows);
    c.influence.test_rows = count("test_rows", c.influence.test_rows);
    c.influence.panel = count("panel", c.influence.panel);
    c.influence.damping = f.OptionalNumber("damping");
    Require(!c.influence.damping || *c.influence.damping >= 0.0, ErrorCode::kConfig,
            "influence.damping: must be >= 0");
    f.Finish();
  }
  if (r.Has("shift")) {
    JsonReader s(r.Raw("shift"), "shift");
    c.shift.kind = ParseDomainModel(s.String("domain_model", DomainModelName(c.shift.kind)));
    c.shift.l2_lambda = s.Number("l2_lambda", c.shift.l2_lambda);
    c.shift.fit_fraction = s.Number("fit_fraction", c.shift.fit_fraction);
    s.Finish();
    Require(c.shift.fit_fraction > 0.0 && c.shift.fit_fraction < 1.0, ErrorCode::kConfig,
            "shift.fit_fraction: must lie in (0, 1)");
  }
  c.output_dir = r.String("output_dir", "");
  c.workers = static_cast<int>(r.Integer("workers", c.workers));
  r.Finish();
  c.Validate();
  return c;
}

ExperimentConfig LoadExperimentConfig(const std::string& path) {
  return ExperimentConfigFromJson(LoadJsonFile(path));
}

Cohort TaskCohort(const ExperimentConfig& config, const TaskSpec& task, std::uint64_t seed) {
  CohortConfig c = config.cohort;
  if (task.positive_prevalence) c.positive_prevalence = *task.positive_prevalence;
  if (task.num_classes) c.num_classes = *task.num_classes;
  // Tasks of one seed share the geometry and differ only in their overrides.
  c.seed = DeriveSeed(config.cohort.seed, {"cohort", seed});
  return GenerateCohort(c);
}

TrainedModel TrainMechanism(const Cohort& train, const TaskSpec& task, const LevelSpec& level,
                            Mechanism mechanism, const ObjPertSettings& obj_pert,
                            std::uint64_t seed, int year) {
  const std::uint64_t sub = DeriveSeed(seed, {task.name, level.name, year});
  if (mechanism == Mechanism::kDpSgd) {
    DPTrainingConfig cfg = level.training;
    cfg.seed = sub;
    return Train(task.family, train, cfg);
  }
  Require(task.family.family == ModelFamily::kLogisticBinary, ErrorCode::kUnsupportedFamily,
          "objective perturbation supports lr-binary tasks only");
  if (!level.obj_pert_eps) {
    // Same objective, no noise.
    const Eigen::MatrixXd projected = ProjectRecords(train.features, obj_pert.record_norm_bound);
    TrainedModel m;
    m.params = SolvePerturbedObjective(projected, train.labels, obj_pert.lambda, 0.0,
                                       Eigen::VectorXd::Zero(train.dim() + 1));
    m.spend = PrivacySpend::NonPrivate();
    m.mechanism = "objective-perturbation";
    m.record_norm_bound = obj_pert.record_norm_bound;
    m.notes.push_back("non-private: perturbation noise omitted");
    return m;
  }
  ObjPertConfig cfg;
  cfg.eps_p = *level.obj_pert_eps;
  cfg.lambda = obj_pert.lambda;
  cfg.record_norm_bound = obj_pert.record_norm_bound;
  cfg.smoothness = obj_pert.smoothness;
  cfg.seed = sub;
  return TrainObjectivePerturbation(train, cfg).model;
}

namespace {

bool IsBinary(const TrainedModel& model) { return model.params.num_classes == 2; }

struct Utility {
  std::optional<double> auroc, auprc;
  std::vector<double> scores;  // binary models only
};

Utility Evaluate(const TrainedModel& model, const Cohort& data, std::vector<std::string>& notes,
                 const std::string& what) {
  Utility u;
  try {
    if (IsBinary(model)) {
      const Eigen::VectorXd s = ModelScores(model, data.features);
      u.scores.assign(s.data(), s.data() + s.size());
      u.auroc = Auroc(u.scores, data.labels);
      u.auprc = Auprc(u.scores, data.labels);
    } else {
      const Eigen::MatrixXd probs = Predict(model.params, PrepareFeatures(model, data.features));
      u.auroc = AurocMicro(probs, data.labels);
      u.auprc = AuprcMicro(probs, data.labels);
    }
  } catch (const Error& e) {
    if (e.code() != ErrorCode::kUndefinedMetric) throw;
    notes.push_back(what + ": " + e.what());
  }
  return u;
}

std::vector<std::size_t> FirstRows(std::size_t available, std::size_t wanted) {
  std::vector<std::size_t> rows(std::min(available, wanted));
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

InfluenceSummary RunInfluence(const TrainedModel& model, const CohortSplit& split,
                              const InfluenceSettings& settings) {
  Cohort train = split.train;
  train.features = PrepareFeatures(model, train.features);
  Cohort test = split.test;
  test.features = PrepareFeatures(model, test.features);
  const InfluenceEngine engine(model.params, train.features, settings.damping);
  const Cohort train_rows = train.Subset(FirstRows(train.size(), settings.train_rows));
  const Cohort candidates = test.Subset(FirstRows(test.size(), settings.test_rows));
  const InfluenceMatrix full = ComputeInfluenceMatrix(engine, train_rows, candidates);
  InfluenceSummary s;
  s.year = split.pivot_year;
  s.train_rows = train_rows.size();
  s.panel = full.SelectTestColumns(TopVarianceTestPoints(full, settings.panel));
  s.max_abs = MaxAbsInfluence(s.panel);
  s.mean_variance = MeanColumnVariance(s.panel);
  s.by_label = GroupInfluence(s.panel, AssignByLabel(s.panel));
  s.by_group = GroupInfluence(s.panel, AssignByGroup(s.panel));
  s.helpful = InfluencerFrequency(s.panel, InfluenceDirection::kHelpful);
  s.harmful = InfluencerFrequency(s.panel, InfluenceDirection::kHarmful);
  return s;
}

}  // namespace

CellResult YearlyProtocol(const Cohort& cohort, const TaskSpec& task, const LevelSpec& level,
                          Mechanism mechanism, std::uint64_t seed, const ExperimentConfig& config) {
  CellResult cell;
  cell.task = task.name;
  cell.level = level.name;
  cell.mechanism = MechanismName(mechanism);
  cell.seed = seed;
  const std::vector<int> years = cohort.DistinctYears();
  std::vector<int> pivots = years;
  if (config.protocol == SplitProtocol::kCumulative) {
    Require(years.size() >= 2, ErrorCode::kSplit,
            "cumulative protocol needs at least two years, cohort has " +
                std::to_string(years.size()));
    pivots.erase(pivots.begin());
  }
  const bool robustness = config.audits.count(Audit::kRobustness) > 0;
  const bool fairness = config.audits.count(Audit::kFairness) > 0;
  const bool influence = config.audits.count(Audit::kInfluence) > 0;

  std::vector<double> aurocs, auprcs, gaps, malignancies;
  std::vector<FairnessReport> fairness_reports;
  cell.spend = {0.0, 0.0, std::nullopt};
  for (int pivot : pivots) {
    const CohortSplit split = SplitYearly(cohort, pivot, config.protocol);
    const TrainedModel model =
        TrainMechanism(split.train, task, level, mechanism, config.obj_pert, seed, pivot);
    YearResult yr;
    yr.year = pivot;
    yr.n_train = static_cast<std::int64_t>(split.train.size());
    yr.n_test = static_cast<std::int64_t>(split.test.size());
    yr.spend = model.spend;
    yr.accounting = model.accounting;
    const Utility test = Evaluate(model, split.test, yr.notes, "test metrics");
    yr.auroc = test.auroc;
    yr.auprc = test.auprc;
    if (yr.auroc) aurocs.push_back(*yr.auroc);
    if (yr.auprc) auprcs.push_back(*yr.auprc);
    if (model.spend.epsilon > cell.spend.epsilon ||
        (model.spend.epsilon == cell.spend.epsilon && model.spend.delta > cell.spend.delta)) {
      cell.spend = model.spend;
    }

    if (robustness) {
      yr.train_auroc = Evaluate(model, split.train, yr.notes, "train metrics").auroc;
      if (yr.train_auroc && yr.auroc) yr.generalization_gap = *yr.train_auroc - *yr.auroc;
      try {
        DomainAudit audit = DomainClassifierSignificance(
            split.train, split.test, config.shift, DeriveSeed(seed, {task.name, level.name, pivot, "shift"}),
            pivot);
        if (audit.report.significant) {
          ShiftMalignancy(audit.report, split.test, audit.domain_model, model);
          if (yr.generalization_gap) {
            gaps.push_back(*yr.generalization_gap);
            malignancies.push_back(*audit.report.malignancy_accuracy);
          }
        }
        yr.shift = audit.report;
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kInsufficientData) throw;
        yr.notes.push_back(std::string("shift audit skipped: ") + e.what());
      }
    }
    if (fairness) {
      if (!IsBinary(model)) {
        yr.notes.push_back("fairness audit skipped: needs a two-class task");
      } else {
        try {
          yr.fairness = FairnessGaps(test.scores, split.test.labels, split.test.groups,
                                     config.fairness.group_1, config.fairness.group_2,
                                     config.fairness.threshold);
          fairness_reports.push_back(*yr.fairness);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::kDomain) throw;
          yr.notes.push_back(std::string("fairness audit skipped: ") + e.what());
        }
      }
    }
    if (influence && pivot == pivots.back()) {
      if (model.params.family != ModelFamily::kLogisticBinary) {
        yr.notes.push_back("influence audit skipped: only valid for lr-binary");
      } else {
        cell.influence = RunInfluence(model, split, config.influence);
      }
    }
    cell.years.push_back(std::move(yr));
    cell.last_model = model;
  }
  cell.auroc = ComputeMeanStd(aurocs);
  cell.auprc = ComputeMeanStd(auprcs);
  if (robustness) {
    if (gaps.size() >= 3) {
      try {
        cell.robustness = CorrelateRobustness(gaps, malignancies);
      } catch (const Error& e) {
        cell.robustness_note = e.what();
      }
    } else {
      cell.robustness_note = "fewer than 3 significant shifts; correlation not computed";
    }
  }
  if (fairness) cell.fairness_summary = SummarizeGaps(fairness_reports);
  return cell;
}

std::string FormatNumber(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, res.ptr);
}

std::string FormatSummaryCell(const MeanStd& metric, const PrivacySpend& spend) {
  char buf[128];
  std::string eps = "∞";
  if (spend.is_private()) {
    std::snprintf(buf, sizeof(buf), "%.2f", spend.epsilon);
    eps = buf;
  }
  std::string delta = "0";
  if (spend.delta != 0.0) {
    std::snprintf(buf, sizeof(buf), "%g", spend.delta);
    delta = buf;
  }
  std::snprintf(buf, sizeof(buf), "%.2f ± %.2f (%s, %s)", metric.mean, metric.std, eps.c_str(),
                delta.c_str());
  return buf;
}

namespace {

struct CellKey {
  const TaskSpec* task;
  Mechanism mechanism;
  const LevelSpec* level;
  std::uint64_t seed;
};

CellResult RunCell(const ExperimentConfig& config, const CellKey& key) {
  try {
    const Cohort cohort = TaskCohort(config, *key.task, key.seed);
    return YearlyProtocol(cohort, *key.task, *key.level, key.mechanism, key.seed, config);
  } catch (const std::exception& e) {
    CellResult cell;
    cell.task = key.task->name;
    cell.level = key.level->name;
    cell.mechanism = MechanismName(key.mechanism);
    cell.seed = key.seed;
    cell.ok = false;
    cell.error = e.what();
    return cell;
  }
}

}  // namespace

RunReport RunGrid(const ExperimentConfig& config) {
  config.Validate();
  std::vector<CellKey> keys;
  for (const TaskSpec& task : config.tasks) {
    for (Mechanism mechanism : config.mechanisms) {
      for (const LevelSpec& level : config.levels) {
        for (std::uint64_t seed : config.seeds) keys.push_back({&task, mechanism, &level, seed});
      }
    }
  }
  RunReport report;
  report.cells.resize(keys.size());
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < keys.size(); i = next++) {
      report.cells[i] = RunCell(config, keys[i]);
    }
  };
  const int n_threads = std::min<int>(config.workers, static_cast<int>(keys.size()));
  if (n_threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_threads; ++t) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Blocks in grid order; cells of one block are contiguous.
  const std::size_t per_block = config.seeds.size();
  for (std::size_t start = 0; start < report.cells.size(); start += per_block) {
    SummaryBlock block;
    block.task = report.cells[start].task;
    block.mechanism = report.cells[start].mechanism;
    block.level = report.cells[start].level;
    block.spend = {0.0, 0.0, std::nullopt};
    std::vector<double> aurocs, auprcs;
    for (std::size_t i = start; i < start + per_block; ++i) {
      const CellResult& cell = report.cells[i];
      if (!cell.ok) {
        ++block.failures;
        continue;
      }
      if (cell.auroc.count > 0) aurocs.push_back(cell.auroc.mean);
      if (cell.auprc.count > 0) auprcs.push_back(cell.auprc.mean);
      if (cell.spend.epsilon > block.spend.epsilon ||
          (cell.spend.epsilon == block.spend.epsilon && cell.spend.delta > block.spend.delta)) {
        block.spend = cell.spend;
      }
    }
    block.auroc = ComputeMeanStd(aurocs);
    block.auprc = ComputeMeanStd(auprcs);
    block.cell = block.auroc.count > 0 ? FormatSummaryCell(block.auroc, block.spend) : "failed";
    report.failures += block.failures;
    report.summary.push_back(block);
  }
  return report;
}

namespace {

Json OptionalNumber(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

Json ToJson(const GroupInfluenceSummary& g) {
  Json j;
  j["groups"] = g.groups;
  j["per_group"] = Json::array();
  for (std::size_t i = 0; i < g.groups.size(); ++i) {
    Json e = ToJson(g.per_group[i]);
    e["group"] = g.groups[i];
    j["per_group"].push_back(e);
  }
  j["most_helpful_group"] = g.most_helpful_group;
  j["most_harmful_group"] = g.most_harmful_group;
  return j;
}

Json ToJson(const InfluencerFrequencyTable& t) {
  Json j;
  j["direction"] = t.direction == InfluenceDirection::kHelpful ? "helpful" : "harmful";
  j["test_points"] = t.test_points;
  j["concentration"] = t.concentration;
  j["counts"] = Json::array();
  for (const auto& [id, count] : t.counts) j["counts"].push_back({{"train_id", id}, {"count", count}});
  return j;
}

std::string CellFileStem(const CellResult& c) {
  return c.task + "_" + c.mechanism + "_" + c.level + "_seed" + std::to_string(c.seed);
}

Json ToJson(const YearResult& y) {
  Json j;
  j["year"] = y.year;
  j["n_train"] = y.n_train;
  j["n_test"] = y.n_test;
  j["auroc"] = OptionalNumber(y.auroc);
  j["auprc"] = OptionalNumber(y.auprc);
  j["train_auroc"] = OptionalNumber(y.train_auroc);
  j["spend"] = ToJson(y.spend);
  j["accounting"] = y.accounting ? ToJson(*y.accounting) : Json(nullptr);
  j["shift"] = y.shift ? ToJson(*y.shift) : Json(nullptr);
  j["generalization_gap"] = OptionalNumber(y.generalization_gap);
  j["fairness"] = y.fairness ? ToJson(*y.fairness) : Json(nullptr);
  j["notes"] = y.notes;
  return j;
}

Json ToJson(const CellResult& c) {
  Json j;
  j["task"] = c.task;
  j["mechanism"] = c.mechanism;
  j["level"] = c.level;
  j["seed"] = c.seed;
  j["status"] = c.ok ? "ok" : "failed";
  if (!c.ok) {
    j["error"] = c.error;
    return j;
  }
  j["auroc"] = ToJson(c.auroc);
  j["auprc"] = ToJson(c.auprc);
  j["spend"] = ToJson(c.spend);
  j["years"] = Json::array();
  for (const YearResult& y : c.years) j["years"].push_back(ToJson(y));
  if (c.robustness) {
    j["robustness"] = {{"r", c.robustness->test.statistic},
                       {"p_value", c.robustness->test.p_value},
                       {"interpretation", c.robustness->interpretation}};
  } else if (!c.robustness_note.empty()) {
    j["robustness"] = {{"note", c.robustness_note}};
  }
  if (!c.fairness_summary.empty()) {
    j["fairness_summary"] = Json::array();
    for (const GapSummary& g : c.fairness_summary) j["fairness_summary"].push_back(ToJson(g));
  }
  if (c.influence) {
    const InfluenceSummary& s = *c.influence;
    j["influence"] = {{"year", s.year},
                      {"train_rows", s.train_rows},
                      {"panel_size", s.panel.test_ids.size()},
                      {"damping", s.panel.damping},
                      {"model_fingerprint", s.panel.model_fingerprint},
                      {"max_abs", s.max_abs},
                      {"mean_variance", s.mean_variance},
                      {"by_label", ToJson(s.by_label)},
                      {"by_group", ToJson(s.by_group)},
                      {"helpful", ToJson(s.helpful)},
                      {"harmful", ToJson(s.harmful)},
                      {"panel_csv", "influence/" + CellFileStem(c) + ".csv"}};
  }
  return j;
}

std::string Opt(const std::optional<double>& v) { return v ? FormatNumber(*v) : ""; }

std::string GapCell(const std::optional<FairnessReport>& f, const char* name) {
  if (!f) return "";
  const Gap& g = GapByName(*f, name);
  return g.defined() ? FormatNumber(*g.value) : "";
}

}  // namespace

Json ToJson(const RunReport& report, const ExperimentConfig& config) {
  Json j;
  j["schema_version"] = kReportSchemaVersion;
  j["influence_sign_convention"] =
      "I = -grad L(test)^T H^-1 grad L(train); negative = helpful (removing the record raises "
      "the test loss), positive = harmful";
  j["caveats"] = AccountingCaveats();
  j["caveats"].push_back(
      "influence is evaluated at the trained parameters; for noisy (non-optimal) models the "
      "convexity assumptions behind it hold only approximately");
  j["config"] = ToJson(config);
  j["failures"] = report.failures;
  j["summary"] = Json::array();
  for (const SummaryBlock& b : report.summary) {
    j["summary"].push_back({{"task", b.task},
                           {"mechanism", b.mechanism},
                           {"level", b.level},
                           {"auroc", ToJson(b.auroc)},
                           {"auprc", ToJson(b.auprc)},
                           {"spend", ToJson(b.spend)},
                           {"failures", b.failures},
                           {"cell", b.cell}});
  }
  j["cells"] = Json::array();
  for (const CellResult& c : report.cells) j["cells"].push_back(ToJson(c));
  return j;
}

void WriteRunReport(const RunReport& report, const ExperimentConfig& config,
                    const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(fs::path(directory) / "influence", ec);
  Require(!ec, ErrorCode::kIo, "cannot create '" + directory + "': " + ec.message());
  const fs::path dir(directory);

  WriteTextFile((dir / "report.json").string(), DumpJson(ToJson(report, config)));

  std::ostringstream t2;
  t2 << "task,mechanism,level,auroc_mean,auroc_std,auprc_mean,auprc_std,epsilon,delta,seeds,"
        "failures,cell\n";
  for (const SummaryBlock& b : report.summary) {
    t2 << b.task << ',' << b.mechanism << ',' << b.level << ',' << FormatNumber(b.auroc.mean)
       << ',' << FormatNumber(b.auroc.std) << ',' << FormatNumber(b.auprc.mean) << ','
       << FormatNumber(b.auprc.std) << ',' << FormatNumber(b.spend.epsilon) << ','
       << FormatNumber(b.spend.delta) << ',' << b.auroc.count << ',' << b.failures << ",\""
       << b.cell << "\"\n";
  }
  WriteTextFile((dir / "summary.csv").string(), t2.str());

  std::ostringstream util, fair, mal, inf;
  util << "task,mechanism,level,seed,year,n_train,n_test,auroc,auprc,epsilon,delta,sampling_rate,"
          "noise_multiplier,steps\n";
  fair << "task,mechanism,level,seed,year,auroc_gap,parity_gap,recall_gap,specificity_gap\n";
  mal << "task,mechanism,level,seed,year,malignancy,p_value,domain_accuracy,n_eval,significant,"
         "generalization_gap\n";
  inf << "task,mechanism,level,seed,year,train_rows,panel_size,max_abs,mean_variance,"
         "most_helpful_label,most_harmful_label,most_helpful_group,most_harmful_group,"
         "helpful_concentration,harmful_concentration\n";
  for (const CellResult& c : report.cells) {
    if (!c.ok) continue;
    const std::string prefix =
        c.task + ',' + c.mechanism + ',' + c.level + ',' + std::to_string(c.seed) + ',';
    for (const YearResult& y : c.years) {
      util << prefix << y.year << ',' << y.n_train << ',' << y.n_test << ',' << Opt(y.auroc) << ','
           << Opt(y.auprc) << ',' << FormatNumber(y.spend.epsilon) << ','
           << FormatNumber(y.spend.delta) << ',';
      if (y.accounting) {
        util << FormatNumber(y.accounting->sampling_rate) << ','
             << FormatNumber(y.accounting->noise_multiplier) << ',' << y.accounting->steps;
      } else {
        util << ",,";
      }
      util << '\n';
      if (y.fairness) {
        fair << prefix << y.year;
        for (const char* name : kGapNames) fair << ',' << GapCell(y.fairness, name);
        fair << '\n';
      }
      if (y.shift) {
        mal << prefix << y.year << ',' << Opt(y.shift->malignancy_accuracy) << ','
            << FormatNumber(y.shift->p_value) << ',' << FormatNumber(y.shift->domain_accuracy)
            << ',' << y.shift->n_eval << ',' << (y.shift->significant ? "true" : "false") << ','
            << Opt(y.generalization_gap) << '\n';
      }
    }
    if (c.influence) {
      const InfluenceSummary& s = *c.influence;
      inf << prefix << s.year << ',' << s.train_rows << ',' << s.panel.test_ids.size() << ','
          << FormatNumber(s.max_abs) << ',' << FormatNumber(s.mean_variance) << ','
          << s.by_label.most_helpful_group << ',' << s.by_label.most_harmful_group << ','
          << s.by_group.most_helpful_group << ',' << s.by_group.most_harmful_group << ','
          << FormatNumber(s.helpful.concentration) << ',' << FormatNumber(s.harmful.concentration)
          << '\n';
      WriteTextFile((dir / "influence" / (CellFileStem(c) + ".csv")).string(),
                    InfluenceMatrixToCsv(s.panel));
    }
  }
  WriteTextFile((dir / "utility_by_year.csv").string(), util.str());
  WriteTextFile((dir / "fairness_by_year.csv").string(), fair.str());
  WriteTextFile((dir / "malignancy.csv").string(), mal.str());
  WriteTextFile((dir / "influence_summary.csv").string(), inf.str());
}

RunReport RunExperiment(const ExperimentConfig& config) {
  RunReport report = RunGrid(config);
  if (!config.output_dir.empty()) WriteRunReport(report, config, config.output_dir);
  return report;
}

}  // namespace dptails
