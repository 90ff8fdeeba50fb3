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

#include "hpfens/common.hpp"

#include <openssl/evp.h>

#include <atomic>
#include <charconv>
#include <iostream>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unistd.h>

namespace hpfens {

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kMissingClassDir: return "MissingClassDir";
    case ErrorCode::kEmptyClass: return "EmptyClass";
    case ErrorCode::kDecodeError: return "DecodeError";
    case ErrorCode::kChannelError: return "ChannelError";
    case ErrorCode::kTooFewSamples: return "TooFewSamples";
    case ErrorCode::kFoldError: return "FoldError";
    case ErrorCode::kBackboneLoadError: return "BackboneLoadError";
    case ErrorCode::kNumericError: return "NumericError";
    case ErrorCode::kCacheMiss: return "CacheMiss";
    case ErrorCode::kStaleCache: return "StaleCache";
    case ErrorCode::kDegenerateLabels: return "DegenerateLabels";
    case ErrorCode::kShapeError: return "ShapeError";
    case ErrorCode::kIncompleteGrid: return "IncompleteGrid";
    case ErrorCode::kSelectionError: return "SelectionError";
    case ErrorCode::kEnsembleError: return "EnsembleError";
    case ErrorCode::kWeightError: return "WeightError";
    case ErrorCode::kLabelError: return "LabelError";
    case ErrorCode::kEmptyInput: return "EmptyInput";
    case ErrorCode::kBundleError: return "BundleError";
    case ErrorCode::kIOError: return "IOError";
    case ErrorCode::kConfigError: return "ConfigError";
    case ErrorCode::kInternal: return "Internal";
  }
  return "Unknown";
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfigError:
      return 2;
    case ErrorCode::kMissingClassDir:
    case ErrorCode::kEmptyClass:
    case ErrorCode::kDecodeError:
    case ErrorCode::kChannelError:
    case ErrorCode::kTooFewSamples:
    case ErrorCode::kFoldError:
    case ErrorCode::kCacheMiss:
    case ErrorCode::kStaleCache:
    case ErrorCode::kLabelError:
    case ErrorCode::kEmptyInput:
    case ErrorCode::kIOError:
      return 3;
    case ErrorCode::kBackboneLoadError:
    case ErrorCode::kNumericError:
    case ErrorCode::kDegenerateLabels:
    case ErrorCode::kShapeError:
    case ErrorCode::kIncompleteGrid:
    case ErrorCode::kSelectionError:
    case ErrorCode::kEnsembleError:
    case ErrorCode::kWeightError:
    case ErrorCode::kBundleError:
      return 4;
    case ErrorCode::kInternal:
      return 5;
  }
  return 5;
}

void fail(ErrorCode code, const std::string& message) {
  throw Error(code, message);
}

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &len, EVP_sha256(),
                 nullptr) != 1) {
    fail(ErrorCode::kInternal, "SHA-256 digest failed");
  }
  static constexpr char kHex[] = "0123456789abcdef";
  std::string out;
  out.reserve(len * 2);
  for (unsigned int i = 0; i < len; ++i) {
    out.push_back(kHex[digest[i] >> 4]);
    out.push_back(kHex[digest[i] & 0xF]);
  }
  return out;
}

std::string sha256_file_hex(const std::filesystem::path& path) {
  return sha256_hex(read_file(path));
}

// splitmix64
std::uint64_t Rng::next_u64() {
  std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

std::uint64_t Rng::below(std::uint64_t bound) {
  // Rejection sampling removes modulo bias.
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % bound);
  std::uint64_t x;
  do {
    x = next_u64();
  } while (x >= limit);
  return x % bound;
}

double Rng::uniform() {
  return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
}

double Rng::normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u, v, s;
  do {
    u = 2.0 * uniform() - 1.0;
    v = 2.0 * uniform() - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  const double f = std::sqrt(-2.0 * std::log(s) / s);
  spare_ = v * f;
  has_spare_ = true;
  return u * f;
}

std::uint64_t derive_seed(std::uint64_t master, std::string_view stage) {
  // FNV-1a over the stage name, mixed with the master seed.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : stage) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  Rng mix(master ^ h);
  return mix.next_u64();
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view bytes) {
  namespace fs = std::filesystem;
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  fs::path tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) fail(ErrorCode::kIOError, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) fail(ErrorCode::kIOError, "short write to " + tmp.string());
  }
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    fail(ErrorCode::kIOError, "cannot rename into " + path.string());
  }
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kIOError, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string format_real(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) fail(ErrorCode::kInternal, "to_chars failed");
  return std::string(buf, ptr);
}

namespace {
std::atomic<bool> g_warnings_enabled{true};
}  // namespace

void log_warning(std::string_view message) {
  if (g_warnings_enabled.load()) std::clog << "warning: " << message << '\n';
}

void set_warnings_enabled(bool enabled) { g_warnings_enabled.store(enabled); }

}  // namespace hpfens
