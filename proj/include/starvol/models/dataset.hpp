// Copyright 2026 The starvol Authors.
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

#ifndef STARVOL_MODELS_DATASET_HPP
#define STARVOL_MODELS_DATASET_HPP

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <starvol/error.hpp>
#include <starvol/models/mlp.hpp>
#include <starvol/types.hpp>

namespace starvol::models {

/// Inputs (one row per example) with optional integer labels.
struct Dataset {
  RowMatrix inputs;
  std::optional<std::vector<int>> labels;
  std::string name;

  [[nodiscard]] Eigen::Index size() const { return inputs.rows(); }
  [[nodiscard]] Eigen::Index width() const { return inputs.cols(); }
  [[nodiscard]] bool has_labels() const { return labels.has_value(); }

  void validate(int num_classes) const {
    if (!labels) {
      return;
    }
    if (static_cast<Eigen::Index>(labels->size()) != inputs.rows()) {
      throw Error("dataset '" + name + "' has " + std::to_string(labels->size()) + " labels for " +
                  std::to_string(inputs.rows()) + " rows");
    }
    for (int y : *labels) {
      if (y < 0 || y >= num_classes) {
        throw Error("dataset '" + name + "' has label " + std::to_string(y) + " outside [0, " +
                    std::to_string(num_classes) + ")");
      }
    }
  }

  /// Rows [begin, begin + count) as a new dataset.
  [[nodiscard]] Dataset slice(Eigen::Index begin, Eigen::Index count, std::string new_name) const {
    Dataset out;
    out.inputs = inputs.middleRows(begin, count);
    if (labels) {
      out.labels = std::vector<int>(labels->begin() + begin, labels->begin() + begin + count);
    }
    out.name = std::move(new_name);
    return out;
  }

  /// Rows in the given order.
  [[nodiscard]] Dataset gather(const std::vector<Eigen::Index>& rows, std::string new_name) const {
    Dataset out;
    out.inputs.resize(static_cast<Eigen::Index>(rows.size()), inputs.cols());
    if (labels) {
      out.labels.emplace();
      out.labels->reserve(rows.size());
    }
    for (std::size_t i = 0; i < rows.size(); ++i) {
      out.inputs.row(static_cast<Eigen::Index>(i)) = inputs.row(rows[i]);
      if (labels) {
        out.labels->push_back((*labels)[static_cast<std::size_t>(rows[i])]);
      }
    }
    out.name = std::move(new_name);
    return out;
  }

  /// Same inputs, labels dropped (the KL cost only sees inputs).
  [[nodiscard]] Dataset inputs_only() const { return Dataset{inputs, std::nullopt, name}; }
};

struct BlobConfig {
  Eigen::Index dim = 64;
  int classes = 10;
  Eigen::Index size = 1024;
  /// Standard deviation of the class means around the origin.
  double separation = 1.0;
  /// Within-class noise standard deviation.
  double noise = 1.0;
};

/// Gaussian blobs: class means drawn from `centre_seed`, points from `point_seed`.
///
/// Splitting the generators lets train, held-out and poison sets share class means while
/// drawing disjoint points.
inline Dataset gaussian_blobs(const BlobConfig& cfg, std::uint64_t centre_seed, std::uint64_t point_seed,
                              std::string name) {
  Rng centres_rng{splitmix64(centre_seed)};
  RowMatrix means(cfg.classes, cfg.dim);
  for (int c = 0; c < cfg.classes; ++c) {
    means.row(c) = cfg.separation * standard_normal(cfg.dim, centres_rng).transpose();
  }
  Rng rng{splitmix64(point_seed ^ 0xd1b54a32d192ed03ULL)};
  std::uniform_int_distribution<int> pick(0, cfg.classes - 1);
  Dataset out;
  out.inputs.resize(cfg.size, cfg.dim);
  out.labels.emplace();
  out.labels->reserve(static_cast<std::size_t>(cfg.size));
  for (Eigen::Index i = 0; i < cfg.size; ++i) {
    const int y = pick(rng);
    out.inputs.row(i) = means.row(y) + cfg.noise * standard_normal(cfg.dim, rng).transpose();
    out.labels->push_back(y);
  }
  out.name = std::move(name);
  return out;
}

/// Reads a headerless CSV of numeric features with an integer label in the last column
/// (the UCI optical digits layout). With `labelled == false` every column is a feature.
inline Dataset read_csv(const std::filesystem::path& path, bool labelled = true) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot read dataset " + path.string());
  }
  std::vector<std::vector<double>> rows;
  std::vector<int> labels;
  std::string line;
  std::size_t width = 0;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') {
      continue;
    }
    std::vector<double> values;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      double v = 0.0;
      const char* first = cell.data();
      while (first != cell.data() + cell.size() && *first == ' ') {
        ++first;
      }
      const auto [ptr, ec] = std::from_chars(first, cell.data() + cell.size(), v);
      if (ec != std::errc()) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
      values.push_back(v);
    }
    if (width == 0) {
      width = values.size();
    } else if (values.size() != width) {
      throw Error(path.string() + ":" + std::to_string(line_no) + ": ragged row");
    }
    if (labelled) {
      if (values.size() < 2) {
        throw Error(path.string() + ": labelled rows need at least one feature");
      }
      const double y = values.back();
      if (y != std::floor(y)) {
        throw Error(path.string() + ":" + std::to_string(line_no) + ": label is not an integer");
      }
      labels.push_back(static_cast<int>(y));
      values.pop_back();
    }
    rows.push_back(std::move(values));
  }
  if (rows.empty()) {
    throw Error("dataset " + path.string() + " is empty");
  }
  Dataset out;
  out.inputs.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.front().size()));
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < rows[r].size(); ++c) {
      out.inputs(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
    }
  }
  if (labelled) {
    out.labels = std::move(labels);
  }
  out.name = path.stem().string();
  return out;
}

inline void write_csv(const Dataset& data, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write dataset " + path.string());
  }
  out << std::setprecision(17);
  for (Eigen::Index r = 0; r < data.size(); ++r) {
    for (Eigen::Index c = 0; c < data.width(); ++c) {
      if (c > 0) {
        out << ',';
      }
      out << data.inputs(r, c);
    }
    if (data.labels) {
      out << ',' << (*data.labels)[static_cast<std::size_t>(r)];
    }
    out << '\n';
  }
}

/// Divides every feature by the same constant so the largest magnitude is one.
inline void rescale_max_abs(Dataset& data) {
  const double m = data.inputs.cwiseAbs().maxCoeff();
  if (m > 0.0) {
    data.inputs /= m;
  }
}

/// Deterministic shuffle of row indices.
inline std::vector<Eigen::Index> shuffled_rows(Eigen::Index n, Rng& rng) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), Eigen::Index{0});
  // Fisher-Yates on raw generator output.
  for (std::size_t i = idx.size(); i > 1; --i) {
    const auto j = static_cast<std::size_t>(rng() % i);
    std::swap(idx[i - 1], idx[j]);
  }
  return idx;
}

}  // namespace starvol::models

#endif  // STARVOL_MODELS_DATASET_HPP
