// Copyright 2026 The DECOR Simulator Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace decor {

// Every failure surfaced by the library carries one of these codes. The CLI
// prints the kebab-case name as its machine-readable "error" field.
enum class ErrorCode {
  kInvalidSize,
  kInvalidGrid,
  kInvalidTopology,
  kTooManySubsets,
  kInvalidCollusionLevel,
  kUndefinedHeterogeneity,
  kInvalidMixingMatrix,
  kSingularCovariance,
  kInvalidDelta,
  kInvalidTarget,
  kOutOfRegime,
  kGraphNotSufficientlyConnected,
  kUnreachableTarget,
  kEdgeMismatch,
  kMissingSeed,
  kInvalidConstants,
  kDiverged,
  kInvalidRegularizer,
  kParseError,
  kTooFewRows,
  kInvalidConfig,
  kIoError,
  kInvalidArguments,
};

constexpr std::string_view error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidSize: return "invalid-size";
    case ErrorCode::kInvalidGrid: return "invalid-grid";
    case ErrorCode::kInvalidTopology: return "invalid-topology";
    case ErrorCode::kTooManySubsets: return "too-many-subsets";
    case ErrorCode::kInvalidCollusionLevel: return "invalid-collusion-level";
    case ErrorCode::kUndefinedHeterogeneity: return "undefined-heterogeneity";
    case ErrorCode::kInvalidMixingMatrix: return "invalid-mixing-matrix";
    case ErrorCode::kSingularCovariance: return "singular-covariance";
    case ErrorCode::kInvalidDelta: return "invalid-delta";
    case ErrorCode::kInvalidTarget: return "invalid-target";
    case ErrorCode::kOutOfRegime: return "out-of-regime";
    case ErrorCode::kGraphNotSufficientlyConnected:
      return "graph-not-sufficiently-connected";
    case ErrorCode::kUnreachableTarget: return "unreachable-target";
    case ErrorCode::kEdgeMismatch: return "edge-mismatch";
    case ErrorCode::kMissingSeed: return "missing-seed";
    case ErrorCode::kInvalidConstants: return "invalid-constants";
    case ErrorCode::kDiverged: return "diverged";
    case ErrorCode::kInvalidRegularizer: return "invalid-regularizer";
    case ErrorCode::kParseError: return "parse-error";
    case ErrorCode::kTooFewRows: return "too-few-rows";
    case ErrorCode::kInvalidConfig: return "invalid-config";
    case ErrorCode::kIoError: return "io-error";
    case ErrorCode::kInvalidArguments: return "invalid-arguments";
  }
  return "unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(std::string(error_code_name(code)) + ": " + message),
        code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

}  // namespace decor
