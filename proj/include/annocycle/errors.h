// Copyright 2026 The Annocycle Authors.
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

#ifndef ANNOCYCLE_ERRORS_H_
#define ANNOCYCLE_ERRORS_H_

#include <cstddef>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace annocycle {

// Base of every error raised by the library. The kind() string is stable and
// used in machine-readable diagnostics (CLI stderr, HTTP error bodies).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual const char *kind() const noexcept { return "error"; }
};

// Malformed input file; record_index is the offending document record, or
// -1 when the problem is not tied to a record.
class ParseError : public Error {
 public:
  ParseError(std::string message, long record_index = -1)
      : Error(std::move(message)), record_index_(record_index) {}
  const char *kind() const noexcept override { return "parse_error"; }
  long record_index() const { return record_index_; }

 private:
  long record_index_;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "alignment_error"; }
};

class DomainError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "domain_error"; }
};

class InputError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "input_error"; }
};

class ConflictError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "conflict"; }
};

class NotFoundError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "not_found"; }
};

class EmptyCorpusError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "empty_corpus"; }
};

class IncompleteIterationError : public Error {
 public:
  IncompleteIterationError(std::string message,
                           std::vector<std::string> missing,
                           std::vector<std::string> unexpected)
      : Error(std::move(message)),
        missing_(std::move(missing)),
        unexpected_(std::move(unexpected)) {}
  const char *kind() const noexcept override { return "incomplete_iteration"; }
  const std::vector<std::string> &missing() const { return missing_; }
  const std::vector<std::string> &unexpected() const { return unexpected_; }

 private:
  std::vector<std::string> missing_;
  std::vector<std::string> unexpected_;
};

class PredictionError : public Error {
 public:
  PredictionError(std::string document_id, const std::string &message)
      : Error("prediction failed for document '" + document_id +
              "': " + message),
        document_id_(std::move(document_id)) {}
  const char *kind() const noexcept override { return "prediction_error"; }
  const std::string &document_id() const { return document_id_; }

 private:
  std::string document_id_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "insufficient_data"; }
};

class DegenerateSampleError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "degenerate_sample"; }
};

class StorageError : public Error {
 public:
  using Error::Error;
  const char *kind() const noexcept override { return "storage_error"; }
};

class CorruptSnapshotError : public StorageError {
 public:
  CorruptSnapshotError(std::string file, std::size_t offset,
                       const std::string &detail)
      : StorageError("corrupt file " + file + " at byte offset " +
                     std::to_string(offset) + ": " + detail),
        file_(std::move(file)),
        offset_(offset) {}
  const char *kind() const noexcept override { return "corrupt_snapshot"; }
  const std::string &file() const { return file_; }
  std::size_t offset() const { return offset_; }

 private:
  std::string file_;
  std::size_t offset_;
};

class MigrationError : public StorageError {
 public:
  using StorageError::StorageError;
  const char *kind() const noexcept override { return "migration_error"; }
};

}  // namespace annocycle

#endif  // ANNOCYCLE_ERRORS_H_
