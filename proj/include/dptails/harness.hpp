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
#ifndef DPTAILS_HARNESS_HPP_
#define DPTAILS_HARNESS_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "dptails/cohort.hpp"
#include "dptails/dp_optim.hpp"
#include "dptails/fairness_audit.hpp"
#include "dptails/influence.hpp"
#include "dptails/objective_perturbation.hpp"
#include "dptails/serialization.hpp"
#include "dptails/shift_audit.hpp"

namespace dptails {

enum class Mechanism { kDpSgd, kObjectivePerturbation };
std::string MechanismName(Mechanism mechanism);
Mechanism ParseMechanism(const std::string& name);

enum class Audit { kUtility, kRobustness, kFairness, kInfluence };
std::string AuditName(Audit audit);
Audit ParseAudit(const std::string& name);

// One prediction task over the experiment cohort. The overrides let tasks
// differ in how rare their positive class is.
struct TaskSpec {
  std::string name = "task";
  FamilySpec family;
  std::optional<std::vector<double>> positive_prevalence;
  std::optional<int> num_classes;
};

struct LevelSpec {
  std::string name = "none";
  // Training settings with clip_norm / noise bound for this level.
  DPTrainingConfig training;
  // Objective-perturbation budget; nullopt trains the same objective
  // without noise.
  std::optional<double> obj_pert_eps;
};

struct ObjPertSettings {
  double lambda = 1e-3;
  double record_norm_bound = 1.0;
  double smoothness = 0.25;
  double eps_low = 3.5e5;
  double eps_high = 3.54;
};

struct FairnessSettings {
  int group_1 = 0;
  int group_2 = 1;
  double threshold = 0.5;
};

struct InfluenceSettings {
  std::size_t train_rows = 500;  // first rows of the training split
  std::size_t test_rows = 300;   // candidate test columns
  std::size_t panel = 100;       // top-variance columns kept
  std::optional<double> damping;
};

struct ExperimentConfig {
  std::string name = "experiment";
  CohortConfig cohort;
  std::vector<TaskSpec> tasks = {TaskSpec{}};
  // Base training settings; each level binds its own privacy knobs.
  DPTrainingConfig training;
  std::vector<LevelSpec> levels;
  std::vector<Mechanism> mechanisms = {Mechanism::kDpSgd};
  std::vector<std::uint64_t> seeds = {0, 1, 2, 3, 4};
  std::set<Audit> audits = {Audit::kUtility};
  SplitProtocol protocol = SplitProtocol::kCumulative;
  ObjPertSettings obj_pert;
  FairnessSettings fairness;
  InfluenceSettings influence;
  DomainModelSpec shift;
  std::string output_dir;
  int workers = 1;

  // Throws kConfig naming the field.
  void Validate() const;
};

// Named levels ("none", "low", "high") computed from a base config.
LevelSpec NamedLevel(PrivacyLevel level, const DPTrainingConfig& base,
                     const ObjPertSettings& obj_pert);

Json ToJson(const ExperimentConfig& config);
ExperimentConfig ExperimentConfigFromJson(const Json& json);
ExperimentConfig LoadExperimentConfig(const std::string& path);

// Cohort for one task and seed: the task's overrides on top of
// config.cohort with a seed derived from (seed, task).
Cohort TaskCohort(const ExperimentConfig& config, const TaskSpec& task, std::uint64_t seed);

// Trains one model with the given mechanism. Sub-seeds derive from
// (seed, task, level, year).
TrainedModel TrainMechanism(const Cohort& train, const TaskSpec& task, const LevelSpec& level,
                            Mechanism mechanism, const ObjPertSettings& obj_pert,
                            std::uint64_t seed, int year);

struct YearResult {
  int year = 0;
  std::int64_t n_train = 0;
  std::int64_t n_test = 0;
  std::optional<double> auroc;
  std::optional<double> auprc;
  std::optional<double> train_auroc;
  PrivacySpend spend;
  std::optional<AccountingRecord> accounting;
  std::optional<ShiftReport> shift;
  // train_auroc - auroc.
  std::optional<double> generalization_gap;
  std::optional<FairnessReport> fairness;
  std::vector<std::string> notes;
};

struct InfluenceSummary {
  int year = 0;
  std::size_t train_rows = 0;
  InfluenceMatrix panel;
  double max_abs = 0.0;
  double mean_variance = 0.0;
  GroupInfluenceSummary by_label;
  GroupInfluenceSummary by_group;
  InfluencerFrequencyTable helpful;
  InfluencerFrequencyTable harmful;
};

struct CellResult {
  std::string task;
  std::string level;
  std::string mechanism;
  std::uint64_t seed = 0;
  bool ok = true;
  std::string error;
  std::vector<YearResult> years;
  MeanStd auroc;  // over years
  MeanStd auprc;
  // Largest epsilon over the per-year models.
  PrivacySpend spend;
  std::optional<RobustnessCorrelation> robustness;
  std::string robustness_note;
  std::vector<GapSummary> fairness_summary;
  std::optional<InfluenceSummary> influence;
  // The last trained model, kept for inspection.
  std::optional<TrainedModel> last_model;
};

// For each pivot year: cumulative trains on earlier years and tests on the
// pivot year (needs at least two years); single-year alternates the pivot
// year's records. Audits listed in the config run per pivot.
CellResult YearlyProtocol(const Cohort& cohort, const TaskSpec& task, const LevelSpec& level,
                          Mechanism mechanism, std::uint64_t seed, const ExperimentConfig& config);

struct SummaryBlock {
  std::string task;
  std::string mechanism;
  std::string level;
  MeanStd auroc;  // over seeds of per-cell year means
  MeanStd auprc;
  PrivacySpend spend;
  std::size_t failures = 0;
  std::string cell;  // "m ± s (eps, delta)"
};

struct RunReport {
  std::vector<CellResult> cells;
  std::vector<SummaryBlock> summary;
  std::size_t failures = 0;
};

// "0.82 ± 0.03 (∞, 0)"; epsilon with two decimals.
std::string FormatSummaryCell(const MeanStd& metric, const PrivacySpend& spend);

// Runs tasks x levels x mechanisms x seeds. A failed cell keeps its error
// and the grid continues. Nothing is written.
RunReport RunGrid(const ExperimentConfig& config);

// report.json plus summary.csv, utility_by_year.csv, fairness_by_year.csv,
// malignancy.csv, influence_summary.csv and influence/<cell>.csv panels.
void WriteRunReport(const RunReport& report, const ExperimentConfig& config,
                    const std::string& directory);

// RunGrid, then WriteRunReport into config.output_dir when it is set.
RunReport RunExperiment(const ExperimentConfig& config);

Json ToJson(const RunReport& report, const ExperimentConfig& config);

// Shortest round-trip text for a double; "inf" for infinity.
std::string FormatNumber(double value);

}  // namespace dptails

#endif  // DPTAILS_HARNESS_HPP_
