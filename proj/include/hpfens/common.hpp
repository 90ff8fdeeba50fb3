/*
 * Copyright 2026 The hpfens Authors.
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef HPFENS_COMMON_HPP_
#define HPFENS_COMMON_HPP_

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace hpfens {

// Every failure the library reports carries one of these codes. The C API
// maps them one-to-one onto hpfens_status values.
enum class ErrorCode : int {
  kMissingClassDir = 1,
  kEmptyClass,
  kDecodeError,
  kChannelError,
  kTooFewSamples,
  kFoldError,
  kBackboneLoadError,
  kNumericError,
  kCacheMiss,
  kStaleCache,
  kDegenerateLabels,
  kShapeError,
  kIncompleteGrid,
  kSelectionError,
  kEnsembleError,
  kWeightError,
  kLabelError,
  kEmptyInput,
  kBundleError,
  kIOError,
  kConfigError,
  kInternal,
};

const char* error_code_name(ErrorCode code);

// Process exit code for a failure: 2 config, 3 data, 4 model, 5 internal.
int exit_code_for(ErrorCode code);

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& message)
      : std::runtime_error(message), code_(code) {}

  ErrorCode code() const { return code_; }

 private:
  ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

// Dense row-major matrix. Rows are exposed as spans.
template <typename T>
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, T fill = T{})
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}
  Matrix(std::size_t rows, std::size_t cols, std::vector<T> data)
      : rows_(rows), cols_(cols), data_(std::move(data)) {
    if (data_.size() != rows_ * cols_) {
      fail(ErrorCode::kShapeError, "matrix data size does not match shape");
    }
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  bool empty() const { return rows_ == 0; }

  T& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  const T& operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }

  std::span<T> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const T> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  // Copies the listed rows, in the listed order.
  Matrix select_rows(std::span<const std::size_t> indices) const {
    Matrix out(indices.size(), cols_);
    for (std::size_t i = 0; i < indices.size(); ++i) {
      auto src = row(indices[i]);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<T> data_;
};

using MatrixF = Matrix<float>;
using MatrixD = Matrix<double>;

using Labels = std::vector<int>;

// Lowercase hex SHA-256 of the bytes.
std::string sha256_hex(std::string_view bytes);
std::string sha256_file_hex(const std::filesystem::path& path);

// Portable deterministic generator. Bounded draws and shuffles are defined
// here rather than through <random> distributions so sequences are identical
// across standard library implementations.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64();
  // Uniform in [0, bound). bound must be > 0.
  std::uint64_t below(std::uint64_t bound);
  // Uniform in [0, 1).
  double uniform();
  double normal();

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Derives an independent sub-seed for a named stage.
std::uint64_t derive_seed(std::uint64_t master, std::string_view stage);

// Writes bytes to a temporary sibling and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

// Shortest round-trip decimal rendering, used for all authoritative numeric
// output so that identical values always print identically.
std::string format_real(double value);

// Warnings go to stderr unless silenced (tests silence them).
void log_warning(std::string_view message);
void set_warnings_enabled(bool enabled);

}  // namespace hpfens

#endif  // HPFENS_COMMON_HPP_
