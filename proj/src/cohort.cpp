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
#include "dptails/cohort.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "dptails/error.hpp"
#include "dptails/random.hpp"

namespace dptails {

Cohort Cohort::Subset(std::span<const std::size_t> rows) const {
  Cohort out;
  out.num_classes = num_classes;
  out.num_groups = num_groups;
  out.features.resize(static_cast<Eigen::Index>(rows.size()), features.cols());
  out.labels.reserve(rows.size());
  out.groups.reserve(rows.size());
  out.years.reserve(rows.size());
  out.ids.reserve(rows.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const std::size_t i = rows[r];
    Require(i < size(), ErrorCode::kShape, "subset row out of range");
    out.features.row(static_cast<Eigen::Index>(r)) = features.row(static_cast<Eigen::Index>(i));
    out.labels.push_back(labels[i]);
    out.groups.push_back(groups[i]);
    out.years.push_back(years[i]);
    out.ids.push_back(ids[i]);
  }
  return out;
}

Cohort Cohort::YearRange(int lo, int hi) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < size(); ++i) {
    if (years[i] >= lo && years[i] <= hi) rows.push_back(i);
  }
  return Subset(rows);
}

std::vector<int> Cohort::DistinctYears() const {
  std::set<int> distinct(years.begin(), years.end());
  return {distinct.begin(), distinct.end()};
}

void Cohort::Validate() const {
  const std::size_t n = size();
  Require(groups.size() == n && years.size() == n && ids.size() == n &&
              static_cast<std::size_t>(features.rows()) == n,
          ErrorCode::kShape, "cohort columns have different lengths");
  Require(num_classes >= 2 && num_groups >= 1, ErrorCode::kShape,
          "cohort needs at least two classes and one group");
  for (std::size_t i = 0; i < n; ++i) {
    Require(labels[i] >= 0 && labels[i] < num_classes, ErrorCode::kShape,
            "label out of range at record " + std::to_string(i));
    Require(groups[i] >= 0 && groups[i] < num_groups, ErrorCode::kShape,
            "group out of range at record " + std::to_string(i));
  }
  Require(features.allFinite(), ErrorCode::kShape, "cohort features must be finite");
}

bool Cohort::operator==(const Cohort& other) const {
  return num_classes == other.num_classes && num_groups == other.num_groups &&
         labels == other.labels && groups == other.groups && years == other.years &&
         ids == other.ids && features.rows() == other.features.rows() &&
         features.cols() == other.features.cols() && features == other.features;
}

Cohort Concatenate(const Cohort& a, const Cohort& b) {
  if (a.empty()) return b;
  if (b.empty()) return a;
  Require(a.dim() == b.dim(), ErrorCode::kShape, "cannot concatenate cohorts of different width");
  Cohort out;
  out.num_classes = std::max(a.num_classes, b.num_classes);
  out.num_groups = std::max(a.num_groups, b.num_groups);
  out.features.resize(a.features.rows() + b.features.rows(), a.dim());
  out.features << a.features, b.features;
  auto append = [](auto& dst, const auto& x, const auto& y) {
    dst = x;
    dst.insert(dst.end(), y.begin(), y.end());
  };
  append(out.labels, a.labels, b.labels);
  append(out.groups, a.groups, b.groups);
  append(out.years, a.years, b.years);
  append(out.ids, a.ids, b.ids);
  return out;
}

std::vector<double> CohortConfig::ClassPrevalences() const {
  std::vector<double> out(static_cast<std::size_t>(num_classes), 0.0);
  double rest = 1.0;
  for (int k = 1; k < num_classes; ++k) {
    const double p = positive_prevalence.size() == 1
                         ? positive_prevalence[0]
                         : positive_prevalence[static_cast<std::size_t>(k - 1)];
    out[static_cast<std::size_t>(k)] = p;
    rest -= p;
  }
  out[0] = rest;
  return out;
}

void CohortConfig::Validate() const {
  auto check = [](bool ok, const std::string& field, const std::string& why) {
    Require(ok, ErrorCode::kConfig, field + ": " + why);
  };
  check(d >= 1, "d", "must be at least 1");
  check(num_classes >= 2, "num_classes", "must be at least 2");
  check(n >= 10LL * num_classes, "n", "must be at least 10 * num_classes");
  check(positive_prevalence.size() == 1 ||
            positive_prevalence.size() == static_cast<std::size_t>(num_classes - 1),
        "positive_prevalence", "needs one entry or num_classes - 1 entries");
  for (double p : positive_prevalence) {
    check(p > 0.0 && p < 1.0, "positive_prevalence", "entries must lie in (0, 1)");
  }
  const std::vector<double> classes = ClassPrevalences();
  check(classes[0] > 0.0, "positive_prevalence", "non-zero classes must sum to less than 1");
  check(class_separation >= 0.0 && std::isfinite(class_separation), "class_separation",
        "must be finite and >= 0");
  check(!group_prevalences.empty(), "group_prevalences", "must be non-empty");
  double group_total = 0.0;
  for (double p : group_prevalences) {
    check(p > 0.0 && p <= 1.0, "group_prevalences", "entries must lie in (0, 1]");
    group_total += p;
  }
  check(std::abs(group_total - 1.0) <= 1e-9, "group_prevalences", "must sum to 1");
  check(group_label_association >= 0.0 && group_label_association <= 1.0,
        "group_label_association", "must lie in [0, 1]");
  check(first_year <= last_year, "years", "empty year range");
  check(yearly_drift >= 0.0 && std::isfinite(yearly_drift), "yearly_drift",
        "must be finite and >= 0");
  check(transition_shift >= 0.0 && std::isfinite(transition_shift), "transition_shift",
        "must be finite and >= 0");
}

namespace {

// Gram-Schmidt against `basis`; falls back to the raw draw when the space is
// exhausted.
Eigen::VectorXd OrthogonalUnit(Rng& rng, Eigen::Index d, const std::vector<Eigen::VectorXd>& basis) {
  Eigen::VectorXd v = rng.UnitVector(d);
  if (static_cast<Eigen::Index>(basis.size()) >= d) return v;
  Eigen::VectorXd w = v;
  for (const Eigen::VectorXd& b : basis) w -= b.dot(w) * b;
  const double norm = w.norm();
  return norm > 1e-8 ? Eigen::VectorXd(w / norm) : v;
}

}  // namespace

CohortModel::CohortModel(const CohortConfig& config) : config_(config) {
  config.Validate();
  Rng rng(DeriveSeed(config.seed, {"cohort-geometry"}));
  const Eigen::Index d = config.d;
  const int k_classes = config.num_classes;

  std::vector<Eigen::VectorXd> basis;
  for (int k = 0; k < k_classes; ++k) basis.push_back(OrthogonalUnit(rng, d, basis));
  // Pairwise distance between sep/sqrt(2) * e_k is exactly sep for
  // orthonormal e_k.
  const double radius = config.class_separation / std::sqrt(2.0);
  Eigen::VectorXd centroid = Eigen::VectorXd::Zero(d);
  for (int k = 0; k < k_classes; ++k) {
    base_means_.push_back(radius * basis[static_cast<std::size_t>(k)]);
    centroid += base_means_.back();
  }
  centroid /= k_classes;
  for (auto& m : base_means_) m -= centroid;

  // Each class drifts along its own fixed direction: half toward the
  // centroid (eroding the old boundary), half into a fresh axis.
  std::vector<Eigen::VectorXd> used = basis;
  for (int k = 0; k < k_classes; ++k) {
    Eigen::VectorXd fresh = OrthogonalUnit(rng, d, used);
    used.push_back(fresh);
    const Eigen::VectorXd& m = base_means_[static_cast<std::size_t>(k)];
    Eigen::VectorXd dir = fresh;
    if (m.norm() > 0.0) dir = (fresh - m / m.norm()) / std::sqrt(2.0);
    const double norm = dir.norm();
    drift_dirs_.push_back(norm > 0.0 ? Eigen::VectorXd(dir / norm) : fresh);
  }
}

double CohortModel::YearOffset(int year) const {
  double offset = static_cast<double>(year - config_.first_year) * config_.yearly_drift;
  if (config_.transition_year && year >= *config_.transition_year) {
    offset += config_.transition_shift;
  }
  return offset;
}

Eigen::VectorXd CohortModel::ClassMean(int label, int year) const {
  const auto k = static_cast<std::size_t>(label);
  return base_means_[k] + YearOffset(year) * drift_dirs_[k];
}

Cohort GenerateCohort(const CohortConfig& config) {
  const CohortModel model(config);
  Rng rng(DeriveSeed(config.seed, {"cohort-records"}));
  const std::vector<double> class_p = config.ClassPrevalences();
  const int num_years = config.last_year - config.first_year + 1;
  const int num_groups = static_cast<int>(config.group_prevalences.size());
  const auto n = static_cast<std::size_t>(config.n);

  // Minority-label records are tied to the last groups; label 0 to group 0.
  auto tied_group = [&](int label) {
    if (num_groups == 1 || label == 0) return 0;
    return 1 + (label - 1) % (num_groups - 1);
  };

  Cohort c;
  c.num_classes = config.num_classes;
  c.num_groups = num_groups;
  c.features.resize(static_cast<Eigen::Index>(n), config.d);
  c.labels.resize(n);
  c.groups.resize(n);
  c.years.resize(n);
  c.ids.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const int year = config.first_year + static_cast<int>(rng.UniformInt(
                                             static_cast<std::uint64_t>(num_years)));
    const int label = rng.Categorical(class_p);
    const bool tied = rng.Uniform() < config.group_label_association;
    const int group = tied ? tied_group(label) : rng.Categorical(config.group_prevalences);
    const Eigen::VectorXd mean = model.ClassMean(label, year);
    for (Eigen::Index j = 0; j < config.d; ++j) {
      c.features(static_cast<Eigen::Index>(i), j) = mean[j] + rng.Normal();
    }
    c.labels[i] = label;
    c.groups[i] = group;
    c.years[i] = year;
    c.ids[i] = static_cast<std::int64_t>(i);
  }

  // Global standardization (population moments).
  for (Eigen::Index j = 0; j < c.features.cols(); ++j) {
    auto col = c.features.col(j);
    const double mean = col.mean();
    col.array() -= mean;
    const double sd = std::sqrt(col.squaredNorm() / static_cast<double>(n));
    if (sd > 0.0) col /= sd;
  }
  return c;
}

CohortSplit SplitYearly(const Cohort& cohort, int pivot_year, SplitProtocol protocol) {
  const std::vector<int> years = cohort.DistinctYears();
  Require(std::binary_search(years.begin(), years.end(), pivot_year), ErrorCode::kSplit,
          "pivot year " + std::to_string(pivot_year) + " is absent from the cohort");
  CohortSplit split;
  split.protocol = protocol;
  split.pivot_year = pivot_year;
  std::vector<std::size_t> train_rows, test_rows;
  if (protocol == SplitProtocol::kCumulative) {
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (cohort.years[i] < pivot_year) train_rows.push_back(i);
      if (cohort.years[i] == pivot_year) test_rows.push_back(i);
    }
    Require(!train_rows.empty(), ErrorCode::kSplit,
            "no records before pivot year " + std::to_string(pivot_year));
  } else {
    bool to_train = true;
    for (std::size_t i = 0; i < cohort.size(); ++i) {
      if (cohort.years[i] != pivot_year) continue;
      (to_train ? train_rows : test_rows).push_back(i);
      to_train = !to_train;
    }
    Require(!test_rows.empty(), ErrorCode::kSplit,
            "pivot year " + std::to_string(pivot_year) + " has fewer than two records");
  }
  split.train = cohort.Subset(train_rows);
  split.test = cohort.Subset(test_rows);
  return split;
}

std::string SplitProtocolName(SplitProtocol protocol) {
  return protocol == SplitProtocol::kCumulative ? "cumulative" : "single-year";
}

SplitProtocol ParseSplitProtocol(const std::string& name) {
  if (name == "cumulative") return SplitProtocol::kCumulative;
  if (name == "single-year") return SplitProtocol::kSingleYear;
  Fail(ErrorCode::kConfig, "protocol: unknown split protocol '" + name + "'");
}

std::string CohortToCsv(const Cohort& cohort) {
  std::ostringstream out;
  out << "id,year,group,label";
  for (Eigen::Index j = 0; j < cohort.dim(); ++j) out << ",f" << j;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < cohort.size(); ++i) {
    out << cohort.ids[i] << ',' << cohort.years[i] << ',' << cohort.groups[i] << ','
        << cohort.labels[i];
    for (Eigen::Index j = 0; j < cohort.dim(); ++j) {
      auto [end, ec] = std::to_chars(buf, buf + sizeof(buf),
                                     cohort.features(static_cast<Eigen::Index>(i), j),
                                     std::chars_format::general, 17);
      out << ',' << std::string_view(buf, static_cast<std::size_t>(end - buf));
    }
    out << '\n';
  }
  return out.str();
}

void WriteCohortCsv(const Cohort& cohort, const std::string& path) {
  std::ofstream file(path, std::ios::binary);
  Require(file.good(), ErrorCode::kIo, "cannot open " + path + " for writing");
  file << CohortToCsv(cohort);
  Require(file.good(), ErrorCode::kIo, "failed writing " + path);
}

namespace {

std::vector<std::string_view> SplitCells(std::string_view line) {
  std::vector<std::string_view> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      cells.push_back(line.substr(start));
      return cells;
    }
    cells.push_back(line.substr(start, comma - start));
    start = comma + 1;
  }
}

[[noreturn]] void ParseFail(std::size_t row, std::size_t col, const std::string& what) {
  Fail(ErrorCode::kParse, "row " + std::to_string(row) + ", column " + std::to_string(col) +
                              ": " + what);
}

template <typename T>
T ParseNumber(std::string_view cell, std::size_t row, std::size_t col) {
  T value{};
  const char* first = cell.data();
  const char* last = cell.data() + cell.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || cell.empty()) {
    ParseFail(row, col, "non-numeric cell '" + std::string(cell) + "'");
  }
  return value;
}

}  // namespace

Cohort ParseCohortCsv(const std::string& text, std::optional<int> num_classes,
                      std::optional<int> num_groups) {
  std::vector<std::string_view> lines;
  {
    std::string_view rest(text);
    while (!rest.empty()) {
      const std::size_t nl = rest.find('\n');
      std::string_view line = rest.substr(0, nl);
      if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
      lines.push_back(line);
      if (nl == std::string_view::npos) break;
      rest.remove_prefix(nl + 1);
    }
  }
  Require(!lines.empty(), ErrorCode::kParse, "row 1: missing header");
  const std::vector<std::string_view> header = SplitCells(lines[0]);
  static constexpr std::string_view kFixed[] = {"id", "year", "group", "label"};
  for (std::size_t c = 0; c < 4; ++c) {
    if (c >= header.size() || header[c] != kFixed[c]) {
      ParseFail(1, c + 1, "expected column '" + std::string(kFixed[c]) + "'");
    }
  }
  const std::size_t d = header.size() - 4;
  for (std::size_t j = 0; j < d; ++j) {
    if (header[4 + j] != "f" + std::to_string(j)) {
      ParseFail(1, 5 + j, "expected column 'f" + std::to_string(j) + "'");
    }
  }

  std::vector<std::vector<std::string_view>> rows;
  std::vector<std::size_t> row_numbers;
  for (std::size_t r = 1; r < lines.size(); ++r) {
    if (lines[r].empty()) continue;
    rows.push_back(SplitCells(lines[r]));
    row_numbers.push_back(r + 1);
  }

  Cohort c;
  c.features.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(d));
  int max_label = -1;
  int max_group = -1;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const auto& cells = rows[i];
    const std::size_t row = row_numbers[i];
    if (cells.size() != header.size()) {
      ParseFail(row, std::min(cells.size(), header.size()) + 1,
                "expected " + std::to_string(header.size()) + " cells, found " +
                    std::to_string(cells.size()));
    }
    c.ids.push_back(ParseNumber<std::int64_t>(cells[0], row, 1));
    c.years.push_back(ParseNumber<int>(cells[1], row, 2));
    const int group = ParseNumber<int>(cells[2], row, 3);
    const int label = ParseNumber<int>(cells[3], row, 4);
    if (group < 0 || (num_groups && group >= *num_groups)) {
      ParseFail(row, 3, "group " + std::to_string(group) + " out of range");
    }
    if (label < 0 || (num_classes && label >= *num_classes)) {
      ParseFail(row, 4, "label " + std::to_string(label) + " out of range");
    }
    c.groups.push_back(group);
    c.labels.push_back(label);
    max_group = std::max(max_group, group);
    max_label = std::max(max_label, label);
    for (std::size_t j = 0; j < d; ++j) {
      const double v = ParseNumber<double>(cells[4 + j], row, 5 + j);
      if (!std::isfinite(v)) ParseFail(row, 5 + j, "non-finite feature");
      c.features(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = v;
    }
  }
  c.num_classes = num_classes.value_or(std::max(2, max_label + 1));
  c.num_groups = num_groups.value_or(std::max(1, max_group + 1));
  std::set<std::int64_t> unique_ids(c.ids.begin(), c.ids.end());
  Require(unique_ids.size() == c.ids.size(), ErrorCode::kParse, "duplicate record id");
  return c;
}

Cohort ReadCohortCsv(const std::string& path, std::optional<int> num_classes,
                     std::optional<int> num_groups) {
  std::ifstream file(path, std::ios::binary);
  Require(file.good(), ErrorCode::kIo, "cannot open " + path);
  std::stringstream buffer;
  buffer << file.rdbuf();
  return ParseCohortCsv(buffer.str(), num_classes, num_groups);
}

}  // namespace dptails
