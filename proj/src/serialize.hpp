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

#ifndef HPFENS_SRC_SERIALIZE_HPP_
#define HPFENS_SRC_SERIALIZE_HPP_

#include <cstdint>
#include <cstring>
#include <string>
#include <type_traits>
#include <vector>

#include "hpfens/common.hpp"

namespace hpfens::internal {

// Native-endian POD stream for fitted-state blobs. Blobs are checked by hash
// on load; they are not meant to move between architectures.
class BinaryWriter {
 public:
  template <typename T>
    requires std::is_trivially_copyable_v<T>
  void put(const T& v) {
    const auto* p = reinterpret_cast<const char*>(&v);
    buf_.append(p, sizeof(T));
  }

  template <typename T>
  void put_vector(const std::vector<T>& v) {
    put<std::uint64_t>(v.size());
    if (!v.empty()) {
      buf_.append(reinterpret_cast<const char*>(v.data()), v.size() * sizeof(T));
    }
  }

  template <typename T>
  void put_matrix(const Matrix<T>& m) {
    put<std::uint64_t>(m.rows());
    put<std::uint64_t>(m.cols());
    put_vector(m.data());
  }

  const std::string& bytes() const { return buf_; }

 private:
  std::string buf_;
};

class BinaryReader {
 public:
  explicit BinaryReader(const std::string& bytes) : bytes_(bytes) {}

  template <typename T>
    requires std::is_trivially_copyable_v<T>
  T get() {
    need(sizeof(T));
    T v;
    std::memcpy(&v, bytes_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  template <typename T>
  std::vector<T> get_vector() {
    const auto n = get<std::uint64_t>();
    if (n > (bytes_.size() - pos_) / std::max<std::size_t>(1, sizeof(T))) {
      fail(ErrorCode::kBundleError, "truncated model state");
    }
    std::vector<T> v(n);
    if (n) {
      std::memcpy(v.data(), bytes_.data() + pos_, n * sizeof(T));
      pos_ += n * sizeof(T);
    }
    return v;
  }

  template <typename T>
  Matrix<T> get_matrix() {
    const auto r = get<std::uint64_t>();
    const auto c = get<std::uint64_t>();
    auto data = get_vector<T>();
    if (data.size() != r * c) fail(ErrorCode::kBundleError, "corrupt matrix in model state");
    return Matrix<T>(r, c, std::move(data));
  }

  bool done() const { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCode::kBundleError, "truncated model state");
  }

  const std::string& bytes_;
  std::size_t pos_ = 0;
};

}  // namespace hpfens::internal

#endif  // HPFENS_SRC_SERIALIZE_HPP_
