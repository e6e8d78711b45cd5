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

// dp-tails command line: data generation, training, accounting, audits and
// experiment grids. Exit status: 0 ok, 1 runtime error, 2 configuration
// error, 3 partial grid failure.
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "dptails/accountant.hpp"
#include "dptails/cohort.hpp"
#include "dptails/dp_optim.hpp"
#include "dptails/error.hpp"
#include "dptails/fairness_audit.hpp"
#include "dptails/harness.hpp"
#include "dptails/influence.hpp"
#include "dptails/objective_perturbation.hpp"
#include "dptails/serialization.hpp"
#include "dptails/shift_audit.hpp"

namespace dptails {
namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;
constexpr int kExitPartial = 3;

struct Common {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out;
};

void AddCommon(CLI::App* cmd, Common& common, bool config_required) {
  auto* opt = cmd->add_option("--config", common.config, "JSON configuration file");
  if (config_required) opt->required();
  cmd->add_option("--seed", common.seed, "Override the configured seed");
  cmd->add_option("--out", common.out, "Output path (stdout when absent)");
}

// Writes to --out or prints.
void Emit(const Common& common, const std::string& text) {
  if (common.out.empty()) {
    std::cout << text;
  } else {
    WriteTextFile(common.out, text);
  }
}

Json ConfigOrEmpty(const Common& common) {
  return common.config.empty() ? Json::object() : LoadJsonFile(common.config);
}

int GenerateData(const Common& common) {
  CohortConfig config = CohortConfigFromJson(ConfigOrEmpty(common), "cohort");
  if (common.seed) config.seed = *common.seed;
  Emit(common, CohortToCsv(GenerateCohort(config)));
  return kExitOk;
}

// {"data": csv | "cohort": {...}, "task": {...}, "mechanism": "...",
//  "training": {...}, "objective_perturbation": {...}}
int TrainCommand(const Common& common) {
  const Json json = LoadJsonFile(common.config);
  JsonReader r(json, "train");
  Require(r.Has("data") != r.Has("cohort"), ErrorCode::kConfig,
          "train: give exactly one of \"data\" and \"cohort\"");
  const Cohort data = r.Has("data")
                          ? ReadCohortCsv(r.String("data"))
                          : GenerateCohort(CohortConfigFromJson(r.Raw("cohort"), "train.cohort"));
  const FamilySpec family =
      r.Has("task") ? FamilySpecFromJson(r.Raw("task"), "train.task") : FamilySpec{};
  const Mechanism mechanism = ParseMechanism(r.String("mechanism", "dp-sgd"));
  TrainedModel model;
  if (mechanism == Mechanism::kDpSgd) {
    DPTrainingConfig cfg = r.Has("training")
                               ? DPTrainingConfigFromJson(r.Raw("training"), "train.training")
                               : DPTrainingConfig{};
    Require(!r.Has("objective_perturbation"), ErrorCode::kConfig,
            "train.objective_perturbation: only used with mechanism objective-perturbation");
    if (common.seed) cfg.seed = *common.seed;
    model = Train(family, data, cfg);
  } else {
    Require(family.family == ModelFamily::kLogisticBinary, ErrorCode::kConfig,
            "train.task.family: objective perturbation needs lr-binary");
    ObjPertConfig cfg = r.Has("objective_perturbation")
                            ? ObjPertConfigFromJson(r.Raw("objective_perturbation"),
                                                    "train.objective_perturbation")
                            : ObjPertConfig{};
    Require(!r.Has("training"), ErrorCode::kConfig,
            "train.training: only used with mechanism dp-sgd");
    if (common.seed) cfg.seed = *common.seed;
    model = TrainObjectivePerturbation(data, cfg).model;
  }
  r.Finish();
  Emit(common, DumpJson(ToJson(model)));
  return kExitOk;
}

struct AccountArgs {
  std::optional<double> q, sigma, delta;
  std::optional<std::int64_t> steps;
};

int AccountCommand(const Common& common, const AccountArgs& args) {
  const Json json = ConfigOrEmpty(common);
  JsonReader r(json, "account");
  double q = r.Number("sampling_rate", 0.0);
  double sigma = r.Number("noise_multiplier", 1.0);
  std::int64_t steps = r.Integer("steps", 0);
  double delta = r.Number("delta", kDefaultDelta);
  r.Finish();
  if (args.q) q = *args.q;
  if (args.sigma) sigma = *args.sigma;
  if (args.steps) steps = *args.steps;
  if (args.delta) delta = *args.delta;
  const PrivacySpend spend = ComputeDpSgdSpend(q, sigma, steps, delta);
  Json out;
  out["accounting"] = ToJson(AccountingRecord{q, sigma, steps, delta});
  out["spend"] = ToJson(spend);
  out["caveats"] = AccountingCaveats();
  Emit(common, DumpJson(out));
  return kExitOk;
}

struct AuditArgs {
  std::string train, test, data, model;
  int group_1 = 0, group_2 = 1, year = 0;
  double threshold = 0.5;
  std::size_t panel = 100, train_rows = 500;
  std::optional<double> damping;
};

TrainedModel LoadModel(const std::string& path) {
  return TrainedModelFromJson(LoadJsonFile(path), path);
}

int AuditShift(const Common& common, const AuditArgs& args) {
  const Json json = ConfigOrEmpty(common);
  JsonReader r(json, "shift");
  DomainModelSpec spec;
  const std::string kind = r.String("domain_model", "ridge-logistic");
  Require(kind == "ridge-logistic" || kind == "constant", ErrorCode::kConfig,
          "shift.domain_model: unknown model '" + kind + "'");
  spec.kind = kind == "constant" ? DomainModelKind::kConstant : DomainModelKind::kRidgeLogistic;
  spec.l2_lambda = r.Number("l2_lambda", spec.l2_lambda);
  spec.fit_fraction = r.Number("fit_fraction", spec.fit_fraction);
  r.Finish();
  const Cohort train = ReadCohortCsv(args.train);
  const Cohort test = ReadCohortCsv(args.test);
  DomainAudit audit = DomainClassifierSignificance(train, test, spec, common.seed.value_or(0), args.year);
  if (!args.model.empty() && audit.report.significant) {
    ShiftMalignancy(audit.report, test, audit.domain_model, LoadModel(args.model));
  } else if (!args.model.empty()) {
    audit.report.notes.push_back("shift not significant; malignancy not computed");
  }
  Json out = ToJson(audit.report);
  out["domain_model"] = ToJson(audit.domain_model);
  Emit(common, DumpJson(out));
  return kExitOk;
}

int AuditFairness(const Common& common, const AuditArgs& args) {
  const Cohort data = ReadCohortCsv(args.data);
  const TrainedModel model = LoadModel(args.model);
  const Eigen::VectorXd s = ModelScores(model, data.features);
  const std::vector<double> scores(s.data(), s.data() + s.size());
  const FairnessReport report =
      FairnessGaps(scores, data.labels, data.groups, args.group_1, args.group_2, args.threshold);
  Emit(common, DumpJson(ToJson(report)));
  return kExitOk;
}

int AuditInfluence(const Common& common, const AuditArgs& args) {
  const TrainedModel model = LoadModel(args.model);
  Cohort train = ReadCohortCsv(args.train);
  Cohort test = ReadCohortCsv(args.test);
  train.features = PrepareFeatures(model, train.features);
  test.features = PrepareFeatures(model, test.features);
  const InfluenceEngine engine(model.params, train.features, args.damping);
  std::vector<std::size_t> rows(std::min(train.size(), args.train_rows));
  for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
  const InfluenceMatrix full = ComputeInfluenceMatrix(engine, train.Subset(rows), test);
  const InfluenceMatrix panel = full.SelectTestColumns(TopVarianceTestPoints(full, args.panel));
  Json out;
  out["sign_convention"] = "negative = helpful, positive = harmful";
  out["damping"] = panel.damping;
  out["model_fingerprint"] = panel.model_fingerprint;
  out["max_abs"] = MaxAbsInfluence(panel);
  out["mean_variance"] = MeanColumnVariance(panel);
  const GroupInfluenceSummary by_label = GroupInfluence(panel, AssignByLabel(panel));
  const GroupInfluenceSummary by_group = GroupInfluence(panel, AssignByGroup(panel));
  out["most_helpful_label"] = by_label.most_helpful_group;
  out["most_harmful_label"] = by_label.most_harmful_group;
  out["most_helpful_group"] = by_group.most_helpful_group;
  out["most_harmful_group"] = by_group.most_harmful_group;
  out["helpful_concentration"] = InfluencerFrequency(panel, InfluenceDirection::kHelpful).concentration;
  out["harmful_concentration"] = InfluencerFrequency(panel, InfluenceDirection::kHarmful).concentration;
  if (common.out.empty()) {
    std::cout << DumpJson(out);
  } else {
    std::filesystem::create_directories(common.out);
    WriteTextFile(common.out + "/influence_summary.json", DumpJson(out));
    WriteTextFile(common.out + "/influence_panel.csv", InfluenceMatrixToCsv(panel));
  }
  return kExitOk;
}

int RunCommand(const Common& common) {
  ExperimentConfig config = LoadExperimentConfig(common.config);
  if (common.seed) config.seeds = {*common.seed};
  if (!common.out.empty()) config.output_dir = common.out;
  Require(!config.output_dir.empty(), ErrorCode::kConfig, "output_dir: set it or pass --out");
  const RunReport report = RunExperiment(config);
  for (const SummaryBlock& b : report.summary) {
    std::cout << b.task << "  " << b.mechanism << "  " << b.level << "  " << b.cell << "\n";
  }
  if (report.failures > 0) {
    std::cerr << report.failures << " grid cell(s) failed; see report.json\n";
    return kExitPartial;
  }
  return kExitOk;
}

int Main(int argc, char** argv) {
  CLI::App app{"dp-tails: differentially private learning and auditing on imbalanced cohorts"};
  app.require_subcommand(1);
  Common common;
  AccountArgs account;
  AuditArgs audit;

  auto* gen = app.add_subcommand("generate-data", "Write a synthetic cohort CSV");
  AddCommon(gen, common, false);
  auto* train = app.add_subcommand("train", "Train a model; writes model JSON");
  AddCommon(train, common, true);
  auto* acc = app.add_subcommand("account", "RDP accounting for DP-SGD");
  AddCommon(acc, common, false);
  acc->add_option("--sampling-rate", account.q, "q = batch size / n");
  acc->add_option("--noise-multiplier", account.sigma, "sigma");
  acc->add_option("--steps", account.steps, "T");
  acc->add_option("--delta", account.delta, "delta");
  auto* shift = app.add_subcommand("audit-shift", "Domain-classifier shift test");
  AddCommon(shift, common, false);
  shift->add_option("--train", audit.train, "Training cohort CSV")->required();
  shift->add_option("--test", audit.test, "Test cohort CSV")->required();
  shift->add_option("--model", audit.model, "Task model JSON for malignancy");
  shift->add_option("--year", audit.year, "Year recorded in the report");
  auto* fair = app.add_subcommand("audit-fairness", "Group fairness gaps");
  AddCommon(fair, common, false);
  fair->add_option("--data", audit.data, "Cohort CSV")->required();
  fair->add_option("--model", audit.model, "Model JSON")->required();
  fair->add_option("--group-1", audit.group_1, "First group");
  fair->add_option("--group-2", audit.group_2, "Second group");
  fair->add_option("--threshold", audit.threshold, "Decision threshold");
  auto* inf = app.add_subcommand("audit-influence", "Influence panel for an lr-binary model");
  AddCommon(inf, common, false);
  inf->add_option("--train", audit.train, "Training cohort CSV")->required();
  inf->add_option("--test", audit.test, "Test cohort CSV")->required();
  inf->add_option("--model", audit.model, "Model JSON")->required();
  inf->add_option("--panel", audit.panel, "Top-variance test points kept");
  inf->add_option("--train-rows", audit.train_rows, "Training rows scored");
  inf->add_option("--damping", audit.damping, "Hessian damping");
  auto* run = app.add_subcommand("run", "Run an experiment grid");
  AddCommon(run, common, true);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (gen->parsed()) return GenerateData(common);
    if (train->parsed()) return TrainCommand(common);
    if (acc->parsed()) return AccountCommand(common, account);
    if (shift->parsed()) return AuditShift(common, audit);
    if (fair->parsed()) return AuditFairness(common, audit);
    if (inf->parsed()) return AuditInfluence(common, audit);
    if (run->parsed()) return RunCommand(common);
  } catch (const Error& e) {
    std::cerr << "dp-tails: " << e.what() << "\n";
    const bool config = e.code() == ErrorCode::kConfig || e.code() == ErrorCode::kParse;
    return config ? kExitConfig : kExitRuntime;
  } catch (const std::exception& e) {
    std::cerr << "dp-tails: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}

}  // namespace
}  // namespace dptails

int main(int argc, char** argv) { return dptails::Main(argc, argv); }
