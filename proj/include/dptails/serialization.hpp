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
#ifndef DPTAILS_SERIALIZATION_HPP_
#define DPTAILS_SERIALIZATION_HPP_

#include <optional>
#include <string>
#include <vector>

#include "dptails/accountant.hpp"
#include "dptails/cohort.hpp"
#include "dptails/dp_optim.hpp"
#include "dptails/fairness_audit.hpp"
#include "dptails/models.hpp"
#include "dptails/objective_perturbation.hpp"
#include "dptails/shift_audit.hpp"
#include "json.hpp"

namespace dptails {

// Key order is preserved, so dumps are byte-stable.
using Json = nlohmann::ordered_json;

// Bumped whenever a report layout changes.
inline constexpr int kReportSchemaVersion = 1;

// Reads fields of a JSON object, naming the full path in kConfig errors and
// rejecting keys that were never read.
class JsonReader {
 public:
  JsonReader(const Json& object, std::string path);

  bool Has(const std::string& key) const;
  const Json& Raw(const std::string& key);
  double Number(const std::string& key, double fallback);
  double Number(const std::string& key);
  std::int64_t Integer(const std::string& key, std::int64_t fallback);
  std::int64_t Integer(const std::string& key);
  bool Bool(const std::string& key, bool fallback);
  std::string String(const std::string& key, const std::string& fallback);
  std::string String(const std::string& key);
  std::vector<double> Numbers(const std::string& key, const std::vector<double>& fallback);
  // Absent or null reads as nullopt.
  std::optional<double> OptionalNumber(const std::string& key);
  std::optional<std::int64_t> OptionalInteger(const std::string& key);
  std::string Path(const std::string& key) const { return path_ + "." + key; }
  // Throws kConfig listing keys nobody asked for.
  void Finish() const;

 private:
  const Json& Get(const std::string& key);
  const Json& object_;
  std::string path_;
  std::vector<std::string> seen_;
};

// Doubles that may be infinite are written as the string "inf".
Json NumberOrInf(double value);
double NumberOrInfFromJson(const Json& value, const std::string& path);

Json ToJson(const CohortConfig& config);
// positive_prevalence may be a number or an array.
CohortConfig CohortConfigFromJson(const Json& json, const std::string& path = "cohort");

// Levels are written by name; named levels fix clip_norm and noise.
Json ToJson(const DPTrainingConfig& config);
DPTrainingConfig DPTrainingConfigFromJson(const Json& json, const std::string& path = "training");

Json ToJson(const ObjPertConfig& config);
ObjPertConfig ObjPertConfigFromJson(const Json& json, const std::string& path);

Json ToJson(const FamilySpec& spec);
FamilySpec FamilySpecFromJson(const Json& json, const std::string& path);

Json ToJson(const ModelParams& params);
ModelParams ModelParamsFromJson(const Json& json, const std::string& path = "params");

Json ToJson(const PrivacySpend& spend);
Json ToJson(const AccountingRecord& record);
Json ToJson(const TrainedModel& model);
TrainedModel TrainedModelFromJson(const Json& json, const std::string& path = "model");

Json ToJson(const ShiftReport& report);
Json ToJson(const Gap& gap);
Json ToJson(const FairnessReport& report);
Json ToJson(const GapSummary& summary);
Json ToJson(const MeanStd& stats);

// kIo on failure; kParse on malformed JSON.
Json LoadJsonFile(const std::string& path);
std::string ReadTextFile(const std::string& path);
void WriteTextFile(const std::string& path, const std::string& content);
// Two-space indent plus a trailing newline.
std::string DumpJson(const Json& json);

}  // namespace dptails

#endif  // DPTAILS_SERIALIZATION_HPP_
