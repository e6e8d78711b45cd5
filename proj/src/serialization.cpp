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
#include "dptails/serialization.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dptails/error.hpp"

namespace dptails {

JsonReader::JsonReader(const Json& object, std::string path)
    : object_(object), path_(std::move(path)) {
  Require(object_.is_object(), ErrorCode::kConfig, path_ + ": expected an object");
}

bool JsonReader::Has(const std::string& key) const {
  return object_.contains(key) && !object_.at(key).is_null();
}

const Json& JsonReader::Get(const std::string& key) {
  seen_.push_back(key);
  return object_.at(key);
}

const Json& JsonReader::Raw(const std::string& key) {
  Require(object_.contains(key), ErrorCode::kConfig, Path(key) + ": missing");
  return Get(key);
}

double JsonReader::Number(const std::string& key, double fallback) {
  if (!Has(key)) {
    seen_.push_back(key);
    return fallback;
  }
  return Number(key);
}

double JsonReader::Number(const std::string& key) {
  const Json& v = Raw(key);
  Require(v.is_number(), ErrorCode::kConfig, Path(key) + ": expected a number");
  return v.get<double>();
}

std::int64_t JsonReader::Integer(const std::string& key, std::int64_t fallback) {
  if (!Has(key)) {
    seen_.push_back(key);
    return fallback;
  }
  return Integer(key);
}

std::int64_t JsonReader::Integer(const std::string& key) {
  const Json& v = Raw(key);
  Require(v.is_number_integer(), ErrorCode::kConfig, Path(key) + ": expected an integer");
  return v.get<std::int64_t>();
}

bool JsonReader::Bool(const std::string& key, bool fallback) {
  if (!Has(key)) {
    seen_.push_back(key);
    return fallback;
  }
  const Json& v = Get(key);
  Require(v.is_boolean(), ErrorCode::kConfig, Path(key) + ": expected true or false");
  return v.get<bool>();
}

std::string JsonReader::String(const std::string& key, const std::string& fallback) {
  if (!Has(key)) {
    seen_.push_back(key);
    return fallback;
  }
  return String(key);
}

std::string JsonReader::String(const std::string& key) {
  const Json& v = Raw(key);
  Require(v.is_string(), ErrorCode::kConfig, Path(key) + ": expected a string");
  return v.get<std::string>();
}

std::vector<double> JsonReader::Numbers(const std::string& key,
                                        const std::vector<double>& fallback) {
  if (!Has(key)) {
    seen_.push_back(key);
    return fallback;
  }
  const Json& v = Get(key);
  if (v.is_number()) return {v.get<double>()};
  Require(v.is_array(), ErrorCode::kConfig, Path(key) + ": expected a number or array");
  std::vector<double> out;
  for (const Json& e : v) {
    Require(e.is_number(), ErrorCode::kConfig, Path(key) + ": array entries must be numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::optional<double> JsonReader::OptionalNumber(const std::string& key) {
  if (!Has(key)) {
    seen_.push_back(key);
    return std::nullopt;
  }
  return Number(key);
}

std::optional<std::int64_t> JsonReader::OptionalInteger(const std::string& key) {
  if (!Has(key)) {
    seen_.push_back(key);
    return std::nullopt;
  }
  return Integer(key);
}

void JsonReader::Finish() const {
  for (const auto& [key, value] : object_.items()) {
    Require(std::find(seen_.begin(), seen_.end(), key) != seen_.end(), ErrorCode::kConfig,
            Path(key) + ": unknown key");
  }
}

Json NumberOrInf(double value) {
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  return value;
}

double NumberOrInfFromJson(const Json& value, const std::string& path) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string() && value.get<std::string>() == "inf") return kInfinity;
  if (value.is_string() && value.get<std::string>() == "-inf") return -kInfinity;
  Fail(ErrorCode::kConfig, path + ": expected a number or \"inf\"");
}

Json ToJson(const CohortConfig& c) {
  Json j;
  j["n"] = c.n;
  j["d"] = c.d;
  j["num_classes"] = c.num_classes;
  j["positive_prevalence"] = c.positive_prevalence;
  j["class_separation"] = c.class_separation;
  j["group_prevalences"] = c.group_prevalences;
  j["group_label_association"] = c.group_label_association;
  j["first_year"] = c.first_year;
  j["last_year"] = c.last_year;
  j["yearly_drift"] = c.yearly_drift;
  j["transition_year"] = c.transition_year ? Json(*c.transition_year) : Json(nullptr);
  j["transition_shift"] = c.transition_shift;
  j["seed"] = c.seed;
  return j;
}

CohortConfig CohortConfigFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  CohortConfig c;
  c.n = r.Integer("n", c.n);
  c.d = static_cast<int>(r.Integer("d", c.d));
  c.num_classes = static_cast<int>(r.Integer("num_classes", c.num_classes));
  c.positive_prevalence = r.Numbers("positive_prevalence", c.positive_prevalence);
  c.class_separation = r.Number("class_separation", c.class_separation);
  c.group_prevalences = r.Numbers("group_prevalences", c.group_prevalences);
  c.group_label_association = r.Number("group_label_association", c.group_label_association);
  c.first_year = static_cast<int>(r.Integer("first_year", c.first_year));
  c.last_year = static_cast<int>(r.Integer("last_year", c.first_year));
  c.yearly_drift = r.Number("yearly_drift", c.yearly_drift);
  if (const auto year = r.OptionalInteger("transition_year")) {
    c.transition_year = static_cast<int>(*year);
  }
  c.transition_shift = r.Number("transition_shift", c.transition_shift);
  c.seed = static_cast<std::uint64_t>(r.Integer("seed", 0));
  r.Finish();
  c.Validate();
  return c;
}

Json ToJson(const DPTrainingConfig& c) {
  Json j;
  j["level"] = PrivacyLevelName(c.level);
  j["clip_norm"] = c.clip_norm ? Json(*c.clip_norm) : Json(nullptr);
  j["noise_multiplier"] = c.noise_multiplier;
  j["batch_size"] = c.batch_size;
  j["microbatch_count"] = c.microbatch_count;
  j["learning_rate"] = c.learning_rate;
  j["epochs"] = c.epochs;
  j["optimizer"] = OptimizerName(c.optimizer);
  j["seed"] = c.seed;
  j["delta"] = c.delta;
  return j;
}

DPTrainingConfig DPTrainingConfigFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  DPTrainingConfig c;
  c.level = ParsePrivacyLevel(r.String("level", "none"));
  c.batch_size = static_cast<int>(r.Integer("batch_size", c.batch_size));
  c.microbatch_count = static_cast<int>(r.Integer("microbatch_count", c.microbatch_count));
  c.learning_rate = r.Number("learning_rate", c.learning_rate);
  c.epochs = static_cast<int>(r.Integer("epochs", c.epochs));
  c.optimizer = ParseOptimizer(r.String("optimizer", "sgd"));
  c.seed = static_cast<std::uint64_t>(r.Integer("seed", 0));
  c.delta = r.Number("delta", c.delta);
  if (c.level == PrivacyLevel::kCustom) {
    Require(r.Has("clip_norm"), ErrorCode::kConfig, r.Path("clip_norm") + ": required for custom");
    c.clip_norm = r.Number("clip_norm");
    c.noise_multiplier = r.Number("noise_multiplier", 0.0);
  } else {
    // Echoed configs carry the bound values; accept them only if they agree.
    const DPTrainingConfig bound = DPTrainingConfig::ForLevel(c.level, c);
    const std::string fixed = ": fixed by level '" + PrivacyLevelName(c.level) +
                              "'; use level \"custom\"";
    const auto clip = r.OptionalNumber("clip_norm");
    Require(!clip || clip == bound.clip_norm, ErrorCode::kConfig, r.Path("clip_norm") + fixed);
    const auto noise = r.OptionalNumber("noise_multiplier");
    Require(!noise || *noise == bound.noise_multiplier, ErrorCode::kConfig,
            r.Path("noise_multiplier") + fixed);
    c = bound;
  }
  r.Finish();
  c.Validate();
  return c;
}

Json ToJson(const ObjPertConfig& c) {
  Json j;
  j["eps_p"] = c.eps_p;
  j["lambda"] = c.lambda;
  j["record_norm_bound"] = c.record_norm_bound;
  j["smoothness"] = c.smoothness;
  j["seed"] = c.seed;
  return j;
}

ObjPertConfig ObjPertConfigFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  ObjPertConfig c;
  c.eps_p = r.Number("eps_p", c.eps_p);
  c.lambda = r.Number("lambda", c.lambda);
  c.record_norm_bound = r.Number("record_norm_bound", c.record_norm_bound);
  c.smoothness = r.Number("smoothness", c.smoothness);
  c.seed = static_cast<std::uint64_t>(r.Integer("seed", 0));
  r.Finish();
  c.Validate();
  return c;
}

Json ToJson(const FamilySpec& spec) {
  Json j;
  j["family"] = ModelFamilyName(spec.family);
  j["hidden"] = spec.hidden;
  j["l2_lambda"] = spec.l2_lambda;
  return j;
}

FamilySpec FamilySpecFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  FamilySpec spec;
  spec.family = ParseModelFamily(r.String("family", "lr-binary"));
  spec.hidden = static_cast<int>(r.Integer("hidden", spec.hidden));
  spec.l2_lambda = r.Number("l2_lambda", spec.l2_lambda);
  r.Finish();
  Require(spec.hidden >= 1, ErrorCode::kConfig, r.Path("hidden") + ": must be >= 1");
  Require(spec.l2_lambda >= 0.0, ErrorCode::kConfig, r.Path("l2_lambda") + ": must be >= 0");
  return spec;
}

Json ToJson(const ModelParams& p) {
  Json j;
  j["family"] = ModelFamilyName(p.family);
  j["input_dim"] = p.input_dim;
  j["num_classes"] = p.num_classes;
  j["hidden"] = p.hidden;
  j["l2_lambda"] = p.l2_lambda;
  j["theta"] = std::vector<double>(p.theta.data(), p.theta.data() + p.theta.size());
  return j;
}

ModelParams ModelParamsFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  ModelParams p;
  p.family = ParseModelFamily(r.String("family"));
  p.input_dim = static_cast<int>(r.Integer("input_dim"));
  p.num_classes = static_cast<int>(r.Integer("num_classes", 2));
  p.hidden = static_cast<int>(r.Integer("hidden", 0));
  p.l2_lambda = r.Number("l2_lambda", 0.0);
  const std::vector<double> theta = r.Numbers("theta", {});
  p.theta = Eigen::Map<const Eigen::VectorXd>(theta.data(), static_cast<Eigen::Index>(theta.size()));
  r.Finish();
  p.Validate();
  return p;
}

Json ToJson(const PrivacySpend& spend) {
  Json j;
  j["epsilon"] = NumberOrInf(spend.epsilon);
  j["delta"] = spend.delta;
  j["argmin_order"] = spend.argmin_order ? Json(*spend.argmin_order) : Json(nullptr);
  return j;
}

Json ToJson(const AccountingRecord& a) {
  Json j;
  j["sampling_rate"] = a.sampling_rate;
  j["noise_multiplier"] = a.noise_multiplier;
  j["steps"] = a.steps;
  j["delta"] = a.delta;
  return j;
}

Json ToJson(const TrainedModel& m) {
  Json j;
  j["mechanism"] = m.mechanism;
  j["params"] = ToJson(m.params);
  j["spend"] = ToJson(m.spend);
  j["accounting"] = m.accounting ? ToJson(*m.accounting) : Json(nullptr);
  j["record_norm_bound"] = m.record_norm_bound ? Json(*m.record_norm_bound) : Json(nullptr);
  j["steps_taken"] = m.steps_taken;
  j["training_trace"] = m.training_trace;
  j["notes"] = m.notes;
  return j;
}

TrainedModel TrainedModelFromJson(const Json& json, const std::string& path) {
  JsonReader r(json, path);
  TrainedModel m;
  m.mechanism = r.String("mechanism", "dp-sgd");
  m.params = ModelParamsFromJson(r.Raw("params"), r.Path("params"));
  {
    JsonReader s(r.Raw("spend"), r.Path("spend"));
    m.spend.epsilon = NumberOrInfFromJson(s.Raw("epsilon"), s.Path("epsilon"));
    m.spend.delta = s.Number("delta", 0.0);
    m.spend.argmin_order = s.OptionalNumber("argmin_order");
    s.Finish();
  }
  if (r.Has("accounting")) {
    JsonReader a(r.Raw("accounting"), r.Path("accounting"));
    AccountingRecord rec;
    rec.sampling_rate = a.Number("sampling_rate");
    rec.noise_multiplier = a.Number("noise_multiplier");
    rec.steps = a.Integer("steps");
    rec.delta = a.Number("delta");
    a.Finish();
    m.accounting = rec;
  } else {
    r.OptionalNumber("accounting");
  }
  m.record_norm_bound = r.OptionalNumber("record_norm_bound");
  m.steps_taken = r.Integer("steps_taken", 0);
  m.training_trace = r.Numbers("training_trace", {});
  if (r.Has("notes")) {
    for (const Json& note : r.Raw("notes")) {
      Require(note.is_string(), ErrorCode::kConfig, r.Path("notes") + ": expected strings");
      m.notes.push_back(note.get<std::string>());
    }
  }
  r.Finish();
  return m;
}

Json ToJson(const ShiftReport& s) {
  Json j;
  j["year"] = s.year;
  j["domain_accuracy"] = s.domain_accuracy;
  j["n_eval"] = s.n_eval;
  j["p_value"] = s.p_value;
  j["significant"] = s.significant;
  j["malignancy_accuracy"] = s.malignancy_accuracy ? Json(*s.malignancy_accuracy) : Json(nullptr);
  j["notes"] = s.notes;
  return j;
}

Json ToJson(const Gap& gap) {
  if (gap.defined()) return *gap.value;
  Json j;
  j["undefined"] = gap.undefined_reason;
  return j;
}

namespace {

Json ToJson(const ConfusionMatrix& c) {
  Json j;
  j["tp"] = c.tp;
  j["fp"] = c.fp;
  j["tn"] = c.tn;
  j["fn"] = c.fn;
  return j;
}

}  // namespace

Json ToJson(const FairnessReport& f) {
  Json j;
  j["group_1"] = f.group_1;
  j["group_2"] = f.group_2;
  j["threshold"] = f.threshold;
  for (const char* name : kGapNames) j[name] = ToJson(GapByName(f, name));
  j["confusion_1"] = ToJson(f.confusion_1);
  j["confusion_2"] = ToJson(f.confusion_2);
  j["auroc_1"] = f.auroc_1 ? Json(*f.auroc_1) : Json(nullptr);
  j["auroc_2"] = f.auroc_2 ? Json(*f.auroc_2) : Json(nullptr);
  return j;
}

Json ToJson(const MeanStd& stats) {
  Json j;
  j["mean"] = stats.mean;
  j["std"] = stats.std;
  j["count"] = stats.count;
  return j;
}

Json ToJson(const GapSummary& summary) {
  Json j;
  j["name"] = summary.name;
  j["stats"] = ToJson(summary.stats);
  j["skipped"] = summary.skipped;
  return j;
}

std::string ReadTextFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  Require(static_cast<bool>(in), ErrorCode::kIo, "cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Json LoadJsonFile(const std::string& path) {
  const std::string text = ReadTextFile(path);
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    Fail(ErrorCode::kParse, path + ": " + e.what());
  }
}

void WriteTextFile(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  Require(static_cast<bool>(out), ErrorCode::kIo, "cannot write '" + path + "'");
  out << content;
  Require(static_cast<bool>(out), ErrorCode::kIo, "write failed for '" + path + "'");
}

std::string DumpJson(const Json& json) { return json.dump(2) + "\n"; }

}  // namespace dptails
