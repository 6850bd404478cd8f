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

#include <algorithm>
#include <array>
#include <bit>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cropline/error.hpp"
#include "cropline/image.hpp"
#include "cropline/strings.hpp"

namespace cropline {

struct PerceptualHash {
  std::uint64_t bits = 0;

  friend bool operator==(PerceptualHash, PerceptualHash) = default;
};

inline constexpr int kHashColumns = 9;
inline constexpr int kHashRows = 8;
inline constexpr int kDefaultMatchThreshold = 10;

namespace detail {

struct AxisOverlap {
  int cell;
  std::int64_t length;
};

// Pixel p spans [cells*p, cells*(p+1)) and cell c spans [size*c, size*(c+1))
// on a common integer axis of length cells*size. Returns, per pixel, the
// cells it touches and the integer overlap lengths.
inline std::vector<std::vector<AxisOverlap>> axis_overlaps(int size, int cells) {
  std::vector<std::vector<AxisOverlap>> out(static_cast<std::size_t>(size));
  for (int p = 0; p < size; ++p) {
    const std::int64_t lo = static_cast<std::int64_t>(cells) * p;
    const std::int64_t hi = lo + cells;
    for (int c = static_cast<int>(lo / size);
         c < cells && static_cast<std::int64_t>(size) * c < hi; ++c) {
      const std::int64_t clo = static_cast<std::int64_t>(size) * c;
      const std::int64_t len = std::min(hi, clo + size) - std::max(lo, clo);
      if (len > 0) out[static_cast<std::size_t>(p)].push_back({c, len});
    }
  }
  return out;
}

}  // namespace detail

// Difference hash. Luma 0.299R + 0.587G + 0.114B (held as integer
// thousandths), exact area-average downsample to 9x8, then bit
// (row * 8 + col) is set when cell (row, col) is darker than (row, col + 1).
// All arithmetic is integer, so a uniform brightness shift leaves the hash
// unchanged exactly.
inline PerceptualHash phash(const Image& image) {
  if (image.width < kHashColumns || image.height < kHashRows) {
    throw Error(ErrorKind::kValidation,
                "image too small for hashing: " + std::to_string(image.width) +
                    "x" + std::to_string(image.height));
  }
  if (image.rgb.size() != static_cast<std::size_t>(image.width) * image.height * 3) {
    throw Error(ErrorKind::kValidation, "image buffer size mismatch");
  }
  const auto xs = detail::axis_overlaps(image.width, kHashColumns);
  const auto ys = detail::axis_overlaps(image.height, kHashRows);
  std::array<std::int64_t, kHashColumns * kHashRows> cells{};
  for (int y = 0; y < image.height; ++y) {
    for (int x = 0; x < image.width; ++x) {
      const auto* p = image.pixel(x, y);
      const std::int64_t luma = 299 * p[0] + 587 * p[1] + 114 * p[2];
      for (const auto& oy : ys[static_cast<std::size_t>(y)]) {
        for (const auto& ox : xs[static_cast<std::size_t>(x)]) {
          cells[static_cast<std::size_t>(oy.cell * kHashColumns + ox.cell)] +=
              luma * oy.length * ox.length;
        }
      }
    }
  }
  PerceptualHash h;
  for (int r = 0; r < kHashRows; ++r) {
    for (int c = 0; c + 1 < kHashColumns; ++c) {
      const auto left = cells[static_cast<std::size_t>(r * kHashColumns + c)];
      const auto right = cells[static_cast<std::size_t>(r * kHashColumns + c + 1)];
      if (left < right) h.bits |= std::uint64_t{1} << (r * 8 + c);
    }
  }
  return h;
}

inline PerceptualHash phash(const std::filesystem::path& path) {
  try {
    return phash(decode_image(path));
  } catch (const Error& e) {
    if (std::string(e.what()).find(path.string()) != std::string::npos) throw;
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

inline int hamming(PerceptualHash a, PerceptualHash b) {
  return std::popcount(a.bits ^ b.bits);
}

struct MatchResult {
  bool matched = false;
  int best_distance = 64;
};

// Matched iff the nearest reference hash is within `threshold` bits.
inline MatchResult verify_match(const std::filesystem::path& user_image,
                                std::span<const std::filesystem::path> references,
                                int threshold = kDefaultMatchThreshold) {
  if (references.empty()) {
    throw Error(ErrorKind::kInvalidArgument, "no reference images");
  }
  if (threshold < 0 || threshold > 64) {
    throw Error(ErrorKind::kInvalidArgument, "threshold outside [0,64]");
  }
  const PerceptualHash user = phash(user_image);
  MatchResult out;
  for (const auto& ref : references) {
    out.best_distance = std::min(out.best_distance, hamming(user, phash(ref)));
  }
  out.matched = out.best_distance <= threshold;
  return out;
}

// Reference images for a disease live in <root>/<disease name with spaces
// replaced by '_'>/. Sorted for determinism; empty when the folder is absent.
inline std::vector<std::filesystem::path> reference_images(
    const std::filesystem::path& root, std::string_view disease_name) {
  std::string slug = normalize_name(disease_name);
  std::replace(slug.begin(), slug.end(), ' ', '_');
  std::vector<std::filesystem::path> out;
  const auto dir = root / slug;
  std::error_code ec;
  if (!std::filesystem::is_directory(dir, ec)) return out;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    const auto ext = to_lower(entry.path().extension().string());
    if (ext == ".png" || ext == ".jpg" || ext == ".jpeg") out.push_back(entry.path());
  }
  std::sort(out.begin(), out.end());
  return out;
}

struct DiseaseVerdict {
  std::string label;
  double confidence = 0.0;
};

// Stand-in for an image classifier. Implementations must be safe to call
// concurrently or document otherwise.
class ClassifierProvider {
 public:
  virtual ~ClassifierProvider() = default;
  virtual DiseaseVerdict classify(const std::filesystem::path& image) const = 0;
};

// Reads `<image>.label` holding a single "label,confidence" line.
class SidecarClassifier final : public ClassifierProvider {
 public:
  DiseaseVerdict classify(const std::filesystem::path& image) const override {
    std::filesystem::path sidecar = image;
    sidecar += ".label";
    std::ifstream in(sidecar);
    if (!in) throw Error(ErrorKind::kIo, "missing classifier sidecar " + sidecar.string());
    std::string line;
    std::getline(in, line);
    const auto comma = line.rfind(',');
    if (comma == std::string::npos) {
      throw Error(ErrorKind::kParse, sidecar.string() + ": expected 'label,confidence'");
    }
    DiseaseVerdict v;
    v.label = normalize_name(line.substr(0, comma));
    if (v.label.empty()) throw Error(ErrorKind::kParse, sidecar.string() + ": empty label");
    v.confidence = parse_double(line.substr(comma + 1), "confidence");
    if (!(v.confidence >= 0.0 && v.confidence <= 1.0)) {
      throw Error(ErrorKind::kValidation,
                  sidecar.string() + ": confidence outside [0,1]");
    }
    return v;
  }
};

inline DiseaseVerdict classify(const std::filesystem::path& image,
                               const ClassifierProvider& provider) {
  DiseaseVerdict v = provider.classify(image);
  if (!(v.confidence >= 0.0 && v.confidence <= 1.0)) {
    throw Error(ErrorKind::kValidation, "classifier confidence outside [0,1]");
  }
  return v;
}

}  // namespace cropline
