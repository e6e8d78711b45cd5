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
#include "dptails/error.hpp"

namespace dptails {

std::string_view ErrorCodeName(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig: return "configuration error";
    case ErrorCode::kParse: return "parse error";
    case ErrorCode::kIo: return "io error";
    case ErrorCode::kShape: return "shape error";
    case ErrorCode::kDomain: return "domain error";
    case ErrorCode::kNumeric: return "numeric error";
    case ErrorCode::kSplit: return "split error";
    case ErrorCode::kUnsupportedFamily: return "unsupported family";
    case ErrorCode::kTraining: return "training error";
    case ErrorCode::kOptimization: return "optimization error";
    case ErrorCode::kInfinitePrivacyLoss: return "infinite privacy loss";
    case ErrorCode::kUndefinedMetric: return "undefined metric";
    case ErrorCode::kInsufficientData: return "insufficient data";
    case ErrorCode::kProcedureOrder: return "procedure order error";
    case ErrorCode::kConditioning: return "conditioning error";
    case ErrorCode::kAssignment: return "assignment error";
  }
  return "error";
}

}  // namespace dptails
