// Copyright 2026 The Cropline Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
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

namespace cropline {

// Classifies failures so callers (and the CLI exit-code mapping) can tell
// bad input apart from internal faults.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kParse,
  kValidation,
  kDuplicate,
  kUnknownSeason,
  kNoMatch,
  kNotTracked,
  kMalformedLabels,
  kEmptyDoc,
  kNoVotes,
  kNoTrustedRecord,
  kNoScorableReplies,
  kNoEvidence,
  kDegenerate,
  kInternal,
};

inline std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kIo: return "Io";
    case ErrorKind::kParse: return "Parse";
    case ErrorKind::kValidation: return "Validation";
    case ErrorKind::kDuplicate: return "Duplicate";
    case ErrorKind::kUnknownSeason: return "UnknownSeason";
    case ErrorKind::kNoMatch: return "NoMatch";
    case ErrorKind::kNotTracked: return "NotTracked";
    case ErrorKind::kMalformedLabels: return "MalformedLabels";
    case ErrorKind::kEmptyDoc: return "EmptyDoc";
    case ErrorKind::kNoVotes: return "NoVotes";
    case ErrorKind::kNoTrustedRecord: return "NoTrustedRecord";
    case ErrorKind::kNoScorableReplies: return "NoScorableReplies";
    case ErrorKind::kNoEvidence: return "NoEvidence";
    case ErrorKind::kDegenerate: return "Degenerate";
    case ErrorKind::kInternal: return "Internal";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& message)
      : std::runtime_error(std::string(to_string(kind)) + ": " + message),
        kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

  // Internal faults map to exit code 1, everything else is a caller error.
  bool is_user_error() const noexcept { return kind_ != ErrorKind::kInternal; }

 private:
  ErrorKind kind_;
};

}  // namespace cropline
