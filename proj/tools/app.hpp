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

// Subcommand implementations behind the `starvol` tool. Kept in a header so the test
// suites can drive them without spawning processes.

#ifndef STARVOL_TOOLS_APP_HPP
#define STARVOL_TOOLS_APP_HPP

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include <starvol/starvol.hpp>

namespace starvol::app {

namespace fs = std::filesystem;
using json = nlohmann::json;
using models::BehaviorCost;
using models::Checkpoint;
using models::CostKind;
using models::Dataset;

#ifdef STARVOL_BUILD_ID
inline constexpr const char* kBuildId = STARVOL_BUILD_ID;
#else
inline constexpr const char* kBuildId = "unknown";
#endif

/// Shortest round-trip decimal form, used for every number written to CSV.
inline std::string fmt(double v) {
  if (std::isnan(v)) {
    return "nan";
  }
  if (std::isinf(v)) {
    return v > 0 ? "inf" : "-inf";
  }
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

// ---------------------------------------------------------------------------
// Data

struct DataSettings {
  /// Labelled CSV files. When `train_csv` is empty, Gaussian blobs are generated.
  std::string train_csv;
  std::string heldout_csv;
  std::string poison_csv;
  bool rescale = false;
  Eigen::Index dim = 64;
  int classes = 10;
  double separation = 0.6;
  double noise = 1.0;
  /// Synthetic feature j is scaled by 10^(-feature_decades * j / (dim - 1)).
  double feature_decades = 2.0;
  Eigen::Index train_size = 256;
  Eigen::Index heldout_size = 512;
  Eigen::Index poison_size = 256;
  std::uint64_t data_seed = 1;
};

inline json to_json(const DataSettings& s) {
  return {{"train_csv", s.train_csv},       {"heldout_csv", s.heldout_csv},   {"poison_csv", s.poison_csv},
          {"rescale", s.rescale},           {"dim", s.dim},                   {"classes", s.classes},
          {"separation", s.separation},     {"noise", s.noise},               {"feature_decades", s.feature_decades},               {"train_size", s.train_size},
          {"heldout_size", s.heldout_size}, {"poison_size", s.poison_size},   {"data_seed", s.data_seed}};
}

struct DataBundle {
  Dataset train;
  Dataset heldout;
  std::optional<Dataset> poison;
  int classes = 0;
};

inline DataBundle load_data(const DataSettings& s, bool with_poison) {
  DataBundle out;
  if (s.train_csv.empty()) {
    models::BlobConfig cfg;
    cfg.dim = s.dim;
    cfg.classes = s.classes;
    cfg.separation = s.separation;
    cfg.noise = s.noise;
    const std::uint64_t base = splitmix64(s.data_seed);
    cfg.size = s.train_size;
    out.train = models::gaussian_blobs(cfg, s.data_seed, base + 1, "train");
    cfg.size = s.heldout_size;
    out.heldout = models::gaussian_blobs(cfg, s.data_seed, base + 2, "heldout");
    if (with_poison) {
      cfg.size = s.poison_size;
      out.poison = models::gaussian_blobs(cfg, s.data_seed, base + 3, "poison");
    }
    out.classes = s.classes;
    if (s.feature_decades != 0.0 && s.dim > 1) {
      Vector scale(s.dim);
      for (Eigen::Index j = 0; j < s.dim; ++j) {
        scale[j] = std::pow(10.0, -s.feature_decades * static_cast<double>(j) / static_cast<double>(s.dim - 1));
      }
      for (Dataset* d : {&out.train, &out.heldout}) {
        d->inputs = d->inputs * scale.asDiagonal();
      }
      if (out.poison) {
        out.poison->inputs = out.poison->inputs * scale.asDiagonal();
      }
    }
  } else {
    if (s.heldout_csv.empty()) {
      throw Error("heldout_csv is required when train_csv is given");
    }
    out.train = models::read_csv(s.train_csv);
    out.heldout = models::read_csv(s.heldout_csv);
    if (with_poison) {
      if (s.poison_csv.empty()) {
        throw Error("poison_csv is required for poisoned training on CSV data");
      }
      out.poison = models::read_csv(s.poison_csv);
    }
    int top = 0;
    for (const Dataset* d : {&out.train, &out.heldout}) {
      top = std::max(top, *std::max_element(d->labels->begin(), d->labels->end()));
    }
    out.classes = std::max(s.classes, top + 1);
    if (s.rescale) {
      const double m = std::max(out.train.inputs.cwiseAbs().maxCoeff(), 1e-300);
      out.train.inputs /= m;
      out.heldout.inputs /= m;
      if (out.poison) {
        out.poison->inputs /= m;
      }
    }
  }
  if (out.heldout.width() != out.train.width() || (out.poison && out.poison->width() != out.train.width())) {
    throw Error("datasets have different feature counts");
  }
  return out;
}

// ---------------------------------------------------------------------------
// Training

struct TrainSettings {
  std::vector<Eigen::Index> hidden{64};
  int epochs = 40;
  Eigen::Index batch = 32;
  double lr = 1e-2;
  long checkpoint_every = 60;
  bool poison = false;
  double alpha = 1.0;
  std::uint64_t seed = 0;
};

inline json to_json(const TrainSettings& s) {
  return {{"hidden", s.hidden}, {"epochs", s.epochs}, {"batch", s.batch},   {"lr", s.lr},
          {"checkpoint_every", s.checkpoint_every}, {"poison", s.poison}, {"alpha", s.alpha}, {"seed", s.seed}};
}

struct TrainRun {
  std::vector<Checkpoint> checkpoints;
  std::vector<models::TrainMetrics> metrics;
  bool poisoned = false;
};

inline TrainRun train_model(const DataBundle& data, const TrainSettings& s) {
  const auto shape = models::MlpShape::make(data.train.width(), s.hidden, data.classes);
  Rng init_rng{splitmix64(s.seed)};
  auto [init, measure] = models::init_params(shape, init_rng);
  models::TrainConfig cfg;
  cfg.epochs = s.epochs;
  cfg.batch = s.batch;
  cfg.seed = s.seed;
  cfg.adam.lr = s.lr;
  cfg.checkpoint_every = s.checkpoint_every;
  cfg.validation = data.heldout;
  if (s.poison) {
    if (!data.poison) {
      throw Error("poisoned training needs a poison set");
    }
    cfg.poison = models::PoisonConfig{*data.poison, s.alpha};
  }
  auto result = models::adam_train(init, data.train, cfg);
  TrainRun run;
  run.poisoned = s.poison;
  run.metrics = std::move(result.metrics);
  for (std::size_t i = 0; i < result.checkpoints.size(); ++i) {
    Checkpoint ck;
    ck.params = std::move(result.checkpoints[i]);
    ck.init_sigma = measure.sigma;
    ck.adam = std::move(result.adam_states[i]);
    ck.step = run.metrics[i].step;
    ck.meta["seed"] = std::to_string(s.seed);
    ck.meta["poisoned"] = s.poison ? "true" : "false";
    run.checkpoints.push_back(std::move(ck));
  }
  return run;
}

inline void write_metrics_csv(const std::vector<models::TrainMetrics>& metrics, bool poisoned, const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "step,train_loss,val_loss" << (poisoned ? ",poison_loss" : "") << '\n';
  for (const auto& m : metrics) {
    out << m.step << ',' << fmt(m.train_loss) << ',' << fmt(m.val_loss);
    if (poisoned) {
      out << ',' << fmt(m.poison_loss);
    }
    out << '\n';
  }
}

inline std::string checkpoint_name(long step) {
  std::ostringstream os;
  os << "checkpoint_" << std::setw(7) << std::setfill('0') << step << ".json";
  return os.str();
}

/// Writes checkpoints, metrics.csv and the datasets they refer to. Returns checkpoint paths.
inline std::vector<fs::path> write_train_run(TrainRun& run, const DataBundle& data, const fs::path& dir) {
  fs::create_directories(dir);
  models::write_csv(data.train, dir / "train.csv");
  models::write_csv(data.heldout, dir / "heldout.csv");
  if (data.poison) {
    models::write_csv(*data.poison, dir / "poison.csv");
  }
  write_metrics_csv(run.metrics, run.poisoned, dir / "metrics.csv");
  std::vector<fs::path> paths;
  for (auto& ck : run.checkpoints) {
    ck.meta["train_data"] = "train.csv";
    ck.meta["heldout_data"] = "heldout.csv";
    if (data.poison) {
      ck.meta["poison_data"] = "poison.csv";
    }
    paths.push_back(dir / checkpoint_name(ck.step));
    models::save_checkpoint(ck, paths.back());
  }
  return paths;
}

/// Checkpoint paths in a training output directory, in step order.
inline std::vector<fs::path> list_checkpoints(const fs::path& dir) {
  std::vector<fs::path> out;
  if (!fs::is_directory(dir)) {
    throw Error("not a directory: " + dir.string());
  }
  for (const auto& entry : fs::directory_iterator(dir)) {
    const auto name = entry.path().filename().string();
    if (name.starts_with("checkpoint_") && entry.path().extension() == ".json") {
      out.push_back(entry.path());
    }
  }
  std::sort(out.begin(), out.end());
  if (out.empty()) {
    throw Error("no checkpoints in " + dir.string());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Preconditioners

enum class PrecondChoice { none, hessian, diag, adam_nu, adam_mu };

inline std::string to_string(PrecondChoice c) {
  switch (c) {
    case PrecondChoice::none:
      return "none";
    case PrecondChoice::hessian:
      return "hessian";
    case PrecondChoice::diag:
      return "diag";
    case PrecondChoice::adam_nu:
      return "adam-nu";
    case PrecondChoice::adam_mu:
      return "adam-mu";
  }
  return "none";
}

inline PrecondChoice precond_from_string(const std::string& s) {
  for (auto c : {PrecondChoice::none, PrecondChoice::hessian, PrecondChoice::diag, PrecondChoice::adam_nu,
                 PrecondChoice::adam_mu}) {
    if (to_string(c) == s) {
      return c;
    }
  }
  throw Error("unknown preconditioner: " + s);
}

/// Default eps per preconditioner family.
inline double default_eps(PrecondChoice c) {
  switch (c) {
    case PrecondChoice::hessian:
      return 0.1;
    case PrecondChoice::diag:
      return 1e-2;
    case PrecondChoice::adam_nu:
    case PrecondChoice::adam_mu:
      return 1e-3;
    case PrecondChoice::none:
      break;
  }
  return 0.0;
}

/// Builds preconditioners for one cost and anchor, caching the finite-difference Hessian
/// and its diagonal so eps sweeps pay for them once.
class PreconditionerBuilder {
 public:
  PreconditionerBuilder(const BehaviorCost& cost, const Checkpoint& ck) : cost_(cost), ck_(ck) {}

  Preconditioner build(PrecondChoice choice, double eps, double exponent) {
    const Vector& x = ck_.params.flat;
    switch (choice) {
      case PrecondChoice::none:
        return Preconditioner::identity(x.size()).set_label("none");
      case PrecondChoice::hessian:
        if (!hessian_) {
          hessian_ = models::hessian_full([&](const Vector& p) { return cost_.gradient(p); }, x);
        }
        return from_hessian(*hessian_, eps).set_label("hessian");
      case PrecondChoice::diag:
        if (!diag_) {
          diag_ = models::hessian_diag([&](const Vector& p) { return cost_.value(p); }, x);
        }
        return from_diagonal(*diag_, eps, exponent).set_label("diag");
      case PrecondChoice::adam_nu:
        return from_diagonal(adam(choice).nu, eps, exponent).set_label("adam-nu");
      case PrecondChoice::adam_mu:
        return from_diagonal(adam(choice).mu.cwiseAbs(), eps, exponent).set_label("adam-mu");
    }
    throw Error("unknown preconditioner");
  }

 private:
  const models::AdamState& adam(PrecondChoice choice) const {
    if (!ck_.adam) {
      throw Error("preconditioner " + to_string(choice) + " needs the Adam state, which this checkpoint lacks");
    }
    return *ck_.adam;
  }

  const BehaviorCost& cost_;
  const Checkpoint& ck_;
  std::optional<Vector> diag_;
  std::optional<Matrix> hessian_;
};

inline Preconditioner build_preconditioner(PrecondChoice choice, const BehaviorCost& cost, const Checkpoint& ck,
                                           double eps, double exponent) {
  return PreconditionerBuilder(cost, ck).build(choice, eps, exponent);
}

// ---------------------------------------------------------------------------
// Estimation

struct EstimateSettings {
  CostKind cost = CostKind::kl;
  double cutoff = 1e-2;
  int k = 100;
  PrecondChoice preconditioner = PrecondChoice::none;
  std::optional<double> eps;
  double exponent = 0.5;
  MeasureSpec::Kind measure = MeasureSpec::Kind::gaussian;
  int threads = 1;
  std::uint64_t seed = 0;
  RadialIntegral integral = RadialIntegral::corrected;
  double rel_tol = 1e-4;
  std::optional<double> r_max;
  /// Dataset for the cost; empty means the held-out (KL) or train (loss) set of the checkpoint.
  std::string data;
  /// Precomputed preconditioner sidecar to use instead of building one.
  std::string load_preconditioner;

  [[nodiscard]] double resolved_eps() const { return eps.value_or(default_eps(preconditioner)); }
};

inline json to_json(const EstimateSettings& s) {
  json j = {{"cost", models::to_string(s.cost)},
            {"cutoff", s.cutoff},
            {"k", s.k},
            {"preconditioner", to_string(s.preconditioner)},
            {"eps", s.resolved_eps()},
            {"exponent", s.exponent},
            {"measure", s.measure == MeasureSpec::Kind::gaussian ? "gaussian" : "lebesgue"},
            {"threads", s.threads},
            {"seed", s.seed},
            {"integral", s.integral == RadialIntegral::corrected ? "corrected" : "second-order"},
            {"rel_tol", s.rel_tol},
            {"data", s.data},
            {"load_preconditioner", s.load_preconditioner}};
  j["r_max"] = s.r_max ? json(*s.r_max) : json(nullptr);
  return j;
}

inline MeasureSpec::Kind measure_from_string(const std::string& s) {
  if (s == "gaussian") {
    return MeasureSpec::Kind::gaussian;
  }
  if (s == "lebesgue") {
    return MeasureSpec::Kind::lebesgue;
  }
  throw Error("unknown measure: " + s);
}

inline RadialIntegral integral_from_string(const std::string& s) {
  if (s == "corrected") {
    return RadialIntegral::corrected;
  }
  if (s == "second-order") {
    return RadialIntegral::second_order;
  }
  throw Error("unknown radial integral: " + s);
}

/// A checkpoint plus the directory its relative dataset paths resolve against.
struct LoadedCheckpoint {
  Checkpoint checkpoint;
  fs::path path;

  static LoadedCheckpoint load(const fs::path& p) { return {models::load_checkpoint(p), p}; }

  [[nodiscard]] fs::path resolve(const std::string& key) const {
    const auto it = checkpoint.meta.find(key);
    if (it == checkpoint.meta.end()) {
      throw Error("checkpoint " + path.string() + " does not record " + key + "; pass --data");
    }
    const fs::path p(it->second);
    return p.is_absolute() ? p : path.parent_path() / p;
  }
};

inline Dataset cost_dataset(const LoadedCheckpoint& ck, CostKind cost, const std::string& override_path) {
  if (!override_path.empty()) {
    return models::read_csv(override_path);
  }
  return models::read_csv(ck.resolve(cost == CostKind::kl ? "heldout_data" : "train_data"));
}

inline BehaviorCost make_cost(const Checkpoint& ck, const Dataset& data, CostKind kind) {
  if (kind == CostKind::kl) {
    return BehaviorCost::kl(ck.params, data.inputs);
  }
  return BehaviorCost::loss(ck.params.shape, data);
}

inline EstimateOptions estimate_options(const EstimateSettings& s) {
  EstimateOptions opts;
  opts.seed = s.seed;
  opts.threads = s.threads;
  opts.integral = s.integral;
  opts.radius.rel_tol = s.rel_tol;
  opts.r_max = s.r_max;
  return opts;
}

inline NeighborhoodSpec model_neighborhood(const Checkpoint& ck, const BehaviorCost& cost, const EstimateSettings& s) {
  NeighborhoodSpec spec;
  spec.anchor = ck.params.flat;
  spec.cost = cost.as_cost_fn();
  spec.cutoff = s.cutoff;
  spec.measure = s.measure == MeasureSpec::Kind::gaussian ? MeasureSpec::gaussian(ck.init_sigma)
                                                          : MeasureSpec::lebesgue();
  return spec;
}

inline VolumeEstimate estimate_checkpoint(const Checkpoint& ck, const BehaviorCost& cost, const EstimateSettings& s,
                                          const Preconditioner& precond) {
  return estimate_local_volume(model_neighborhood(ck, cost, s), precond, s.k, estimate_options(s));
}

/// Pure quadratic cost (1/2) x^T diag(R^-2) x around the origin, radii log-spaced over [lo, hi].
struct QuadraticModel {
  Eigen::Index dim = 100;
  double lo = 1.0;
  double hi = 1.0;
};

inline json to_json(const QuadraticModel& q) { return {{"dim", q.dim}, {"lo", q.lo}, {"hi", q.hi}}; }

inline NeighborhoodSpec quadratic_neighborhood(const QuadraticModel& q, const EstimateSettings& s) {
  NeighborhoodSpec spec = ellipsoid_neighborhood(Ellipsoid::log_spaced(q.dim, q.lo, q.hi));
  spec.cutoff = s.cutoff;
  spec.measure = s.measure == MeasureSpec::Kind::gaussian ? MeasureSpec::gaussian(Vector::Ones(q.dim))
                                                          : MeasureSpec::lebesgue();
  return spec;
}

// ---------------------------------------------------------------------------
// Records

inline std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  std::ostringstream os;
  os << std::put_time(&tm, "%Y-%m-%dT%H:%M:%SZ");
  return os.str();
}

inline json number_or_null(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

/// One JSON Lines run record. Non-finite log terms are written as null.
inline json run_record(const std::string& subcommand, std::uint64_t seed, const json& config,
                       const VolumeEstimate& est, double wall_seconds) {
  json terms = json::array();
  for (const auto& s : est.samples) {
    terms.push_back(number_or_null(s.log_term));
  }
  return {{"timestamp", utc_timestamp()},
          {"build_id", kBuildId},
          {"seed", seed},
          {"subcommand", subcommand},
          {"config", config},
          {"n", est.n},
          {"k", est.k},
          {"measure", est.measure.name()},
          {"cutoff", est.cutoff},
          {"preconditioner", est.preconditioner_id},
          {"log_volume", number_or_null(est.log_volume)},
          {"log10_volume", number_or_null(est.log10_volume())},
          {"max_term", number_or_null(est.max_term())},
          {"failed", est.failed_count()},
          {"truncated", est.truncated_count()},
          {"lower_bound_only", est.lower_bound_only()},
          {"log_terms", terms},
          {"wall_time_s", wall_seconds}};
}

inline void append_jsonl(const fs::path& path, const json& record) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path, std::ios::app);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << record.dump() << '\n';
}

inline std::vector<json> read_jsonl(const fs::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw Error("cannot read " + path.string());
  }
  std::vector<json> out;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty()) {
      out.push_back(json::parse(line));
    }
  }
  return out;
}

/// "runs.jsonl" -> "runs.samples.csv".
inline fs::path samples_path_for(const fs::path& record_path) {
  fs::path p = record_path;
  p.replace_extension(".samples.csv");
  return p;
}

inline void write_samples_csv(const VolumeEstimate& est, const fs::path& path) {
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "index,log_term,log10_term,radius,log_importance_norm,truncated,failed,boundary_cost\n";
  for (std::size_t i = 0; i < est.samples.size(); ++i) {
    const auto& s = est.samples[i];
    out << i << ',' << fmt(s.log_term) << ',' << fmt(s.log_term / std::numbers::ln10) << ',' << fmt(s.radius) << ','
        << fmt(s.log_importance_norm) << ',' << (s.truncated ? 1 : 0) << ',' << (s.failed ? 1 : 0) << ','
        << fmt(s.boundary_cost) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepKind { cutoff, checkpoint, preconditioner, eps };

inline SweepKind sweep_kind_from_string(const std::string& s) {
  if (s == "cutoff") {
    return SweepKind::cutoff;
  }
  if (s == "checkpoint") {
    return SweepKind::checkpoint;
  }
  if (s == "preconditioner") {
    return SweepKind::preconditioner;
  }
  if (s == "eps") {
    return SweepKind::eps;
  }
  throw Error("unknown sweep kind: " + s);
}

/// "a,b,c" or "lo:hi:count" (log-spaced, inclusive).
inline std::vector<double> parse_range(const std::string& text) {
  std::vector<double> out;
  if (text.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) {
      parts.push_back(part);
    }
    if (parts.size() != 3) {
      throw Error("range must look like lo:hi:count");
    }
    const double lo = std::stod(parts[0]);
    const double hi = std::stod(parts[1]);
    const int count = std::stoi(parts[2]);
    if (!(lo > 0.0) || !(hi > lo) || count < 2) {
      throw Error("log-spaced range needs 0 < lo < hi and count >= 2");
    }
    for (int i = 0; i < count; ++i) {
      out.push_back(std::exp(std::log(lo) + (std::log(hi) - std::log(lo)) * i / (count - 1)));
    }
    return out;
  }
  std::stringstream ss(text);
  std::string cell;
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty()) {
      out.push_back(std::stod(cell));
    }
  }
  if (out.empty()) {
    throw Error("empty sweep range");
  }
  return out;
}

struct SweepRow {
  std::string label;
  double value = std::nan("");
  double log_volume = std::nan("");
  int k = 0;
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
};

/// Least-squares slope of y against x.
inline double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw Error("slope fit needs at least two points");
  }
  const double n = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i] / n;
    my += y[i] / n;
  }
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
  }
  if (!(sxx > 0.0)) {
    throw Error("slope fit needs distinct x values");
  }
  return sxy / sxx;
}

/// Slope of log volume against log cutoff over the successful rows.
inline double cutoff_slope(const std::vector<SweepRow>& rows) {
  std::vector<double> x;
  std::vector<double> y;
  for (const auto& r : rows) {
    if (r.ok && std::isfinite(r.log_volume)) {
      x.push_back(std::log(r.value));
      y.push_back(r.log_volume);
    }
  }
  return fit_slope(x, y);
}

/// Number of adjacent increases in log volume across the successful rows.
inline int count_inversions(const std::vector<SweepRow>& rows) {
  int inversions = 0;
  std::optional<double> prev;
  for (const auto& r : rows) {
    if (!r.ok) {
      continue;
    }
    if (prev && r.log_volume > *prev) {
      ++inversions;
    }
    prev = r.log_volume;
  }
  return inversions;
}

inline void write_sweep_csv(const std::vector<SweepRow>& rows, const std::string& kind, const fs::path& path) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  std::ofstream out(path);
  if (!out) {
    throw Error("cannot write " + path.string());
  }
  out << "kind,label,value,log_volume,log10_volume,k,seed,status\n";
  for (const auto& r : rows) {
    out << kind << ',' << r.label << ',' << fmt(r.value) << ',' << fmt(r.log_volume) << ','
        << fmt(r.log_volume / std::numbers::ln10) << ',' << r.k << ',' << r.seed << ','
        << (r.ok ? std::string("ok") : "failed: " + r.error) << '\n';
  }
}

/// Runs `body` for one sweep point, turning errors into a flagged row.
template <class F>
SweepRow sweep_point(std::string label, double value, const EstimateSettings& s, F&& body) {
  SweepRow row;
  row.label = std::move(label);
  row.value = value;
  row.k = s.k;
  row.seed = s.seed;
  try {
    row.log_volume = body().log_volume;
    row.ok = true;
  } catch (const std::exception& e) {
    row.error = e.what();
    std::replace(row.error.begin(), row.error.end(), ',', ';');
  }
  return row;
}

// ---------------------------------------------------------------------------
// Validation suites

struct Check {
  std::string suite;
  std::string name;
  double predicted = 0.0;
  double empirical = 0.0;
  std::string tolerance;
  bool pass = false;
};

namespace detail {

inline bool bracket_holds(const VolumeEstimate& est) {
  const double top = est.max_term();
  return est.log_volume <= top + 1e-12 && est.log_volume >= top - std::log(static_cast<double>(est.k)) - 1e-12;
}

inline Check relative_check(std::string suite, std::string name, double predicted, double empirical, double tol) {
  const bool pass = std::abs(empirical - predicted) <= tol * std::abs(predicted);
  std::ostringstream t;
  t << "rel " << tol;
  return {std::move(suite), std::move(name), predicted, empirical, t.str(), pass};
}

inline Check absolute_check(std::string suite, std::string name, double predicted, double empirical, double tol) {
  const bool pass = std::abs(empirical - predicted) <= tol;
  std::ostringstream t;
  t << "abs " << tol;
  return {std::move(suite), std::move(name), predicted, empirical, t.str(), pass};
}

inline std::vector<Check> ellipsoid_suite(std::uint64_t seed) {
  std::vector<Check> out;
  {
    const auto e = Ellipsoid::log_spaced(50, 1e-2, 1e2);
    EstimateOptions opts;
    opts.seed = seed;
    opts.radius.rel_tol = 1e-12;
    const auto est = estimate_local_volume(ellipsoid_neighborhood(e), ellipsoid_preconditioner(e), 10, opts);
    const double exact = ellipsoid_log_volume_exact(e);
    double worst = 0.0;
    for (double t : est.log_terms()) {
      worst = std::max(worst, std::abs(t - exact));
    }
    out.push_back(absolute_check("ellipsoid", "exact preconditioner, n=50, worst term", exact, exact + worst, 1e-6));
    out.push_back({"ellipsoid", "smooth-max bracket", 1, bracket_holds(est) ? 1.0 : 0.0, "exact", bracket_holds(est)});
  }
  {
    Rng rng{splitmix64(seed + 11)};
    auto e = Ellipsoid::log_spaced(20, 0.1, 10.0);
    e.rotation = random_rotation(20, rng);
    EstimateOptions opts;
    opts.seed = seed;
    opts.radius.rel_tol = 1e-12;
    const auto est = estimate_local_volume(ellipsoid_neighborhood(e), ellipsoid_preconditioner(e), 10, opts);
    const auto terms = est.log_terms();
    const auto [lo, hi] = std::minmax_element(terms.begin(), terms.end());
    out.push_back(absolute_check("ellipsoid", "rotated n=20, spread of terms", 0.0, *hi - *lo, 1e-6));
    out.push_back(
        absolute_check("ellipsoid", "rotated n=20, log volume", ellipsoid_log_volume_exact(e), est.log_volume, 1e-6));
  }
  {
    // Naive estimator, n=2, 10^4 runs of k=1: exp-space mean within 3 standard errors.
    const auto e = Ellipsoid::from_eigenvalues((Vector(2) << 1.0, 16.0).finished());
    const auto spec = ellipsoid_neighborhood(e);
    const auto id = Preconditioner::identity(2);
    constexpr int kRuns = 10000;
    double sum = 0.0;
    double sum_sq = 0.0;
    for (int r = 0; r < kRuns; ++r) {
      EstimateOptions opts;
      opts.seed = seed * 1000003 + static_cast<std::uint64_t>(r);
      opts.radius.rel_tol = 1e-10;
      const double v = std::exp(estimate_local_volume(spec, id, 1, opts).log_volume);
      sum += v;
      sum_sq += v * v;
    }
    const double mean = sum / kRuns;
    const double se = std::sqrt((sum_sq / kRuns - mean * mean) / (kRuns - 1));
    const double exact = std::exp(ellipsoid_log_volume_exact(e));
    Check c{"ellipsoid", "naive n=2 unbiased (3 SE)", exact, mean, "3 SE", std::abs(mean - exact) <= 3.0 * se};
    out.push_back(c);
  }
  for (long n : {2L, 100L, 4810L}) {
    NeighborhoodSpec spec;
    spec.anchor = Vector::Zero(n);
    spec.cost = [](const Vector&) { return 0.0; };
    spec.cutoff = 1.0;
    spec.measure = MeasureSpec::gaussian(Vector::Ones(n));
    EstimateOptions opts;
    opts.seed = seed;
    opts.r_max = 1e3 * std::sqrt(static_cast<double>(n));
    const auto est = estimate_local_volume(spec, Preconditioner::identity(n), 8, opts);
    out.push_back(absolute_check("ellipsoid", "gaussian normalization n=" + std::to_string(n), 0.0, est.log_volume,
                                 1e-9));
  }
  return out;
}

inline std::vector<Check> appendix_a_suite(std::uint64_t seed) {
  std::vector<Check> out;
  {
    Vector spread(128);
    for (Eigen::Index i = 0; i < 128; ++i) {
      spread[i] = 0.5 + 1.5 * static_cast<double>(i) / 127.0;
    }
    Vector outlier = Vector::Ones(128);
    outlier[0] = 50.0;
    for (const auto& [name, eig] : {std::pair{"uniform spread", spread}, std::pair{"one outlier", outlier}}) {
      const auto r = quadratic_form_variance_check(Ellipsoid::from_eigenvalues(eig), 200000, seed);
      out.push_back(relative_check("appendixA", std::string("Var(u^T A u), n=128, ") + name, r.predicted,
                                   r.empirical, 0.10));
    }
  }
  {
    Vector eig(256);
    for (Eigen::Index i = 0; i < 256; ++i) {
      eig[i] = i % 2 == 0 ? 0.95 : 1.05;
    }
    const auto e = Ellipsoid::from_eigenvalues(eig);
    auto logs = sampled_log_radii(e, 20000, seed + 1);
    for (double& x : logs) {
      x *= 256.0;
    }
    out.push_back(relative_check("appendixA", "Var(n log r), n=256", log_estimator_variance_prediction(e),
                                 sample_variance(logs), 0.15));
  }
  {
    const auto e = Ellipsoid::log_spaced(2000, 1e-2, 1e2);
    const double predicted = harmonic_mean_prediction(e);
    const double med = median(sampled_log_radii(e, 2000, seed + 2));
    out.push_back(relative_check("appendixA", "median log r, n=2000, 4 decades", predicted, med, 0.02));
    EstimateOptions opts;
    opts.seed = seed + 3;
    const auto est =
        estimate_local_volume(ellipsoid_neighborhood(e), Preconditioner::identity(2000), 2000, opts);
    const double exact = ellipsoid_log_volume_exact(e);
    out.push_back({"appendixA", "naive estimate below exact volume", exact, est.log_volume, "strict <",
                   est.log_volume < exact});
  }
  return out;
}

inline std::vector<Check> appendix_c_suite(std::uint64_t seed) {
  std::vector<Check> out;
  const auto e = Ellipsoid::log_spaced(10, 0.3, 3.0);
  const auto spec = ellipsoid_neighborhood(e);
  const double exact = ellipsoid_log_volume_exact(e);
  constexpr int kRuns = 1000;
  int exceed = 0;
  int bracket_failures = 0;
  std::vector<double> estimates;
  for (int r = 0; r < kRuns; ++r) {
    EstimateOptions opts;
    opts.seed = seed * 7919 + static_cast<std::uint64_t>(r);
    const auto est = estimate_local_volume(spec, Preconditioner::identity(10), 10, opts);
    if (est.log_volume > exact + std::log(10.0)) {
      ++exceed;
    }
    if (!bracket_holds(est)) {
      ++bracket_failures;
    }
    estimates.push_back(est.log_volume);
  }
  // 99% one-sided binomial upper bound for N = 1000, p = 0.01.
  const int allowed = static_cast<int>(std::ceil(kRuns * 0.01 + 2.326 * std::sqrt(kRuns * 0.01 * 0.99)));
  out.push_back({"appendixC", "runs above truth + log 10 (of 1000)", static_cast<double>(allowed),
                 static_cast<double>(exceed), "<= predicted", exceed <= allowed});
  out.push_back({"appendixC", "smooth-max bracket violations", 0.0, static_cast<double>(bracket_failures), "exact",
                 bracket_failures == 0});
  const auto gap = jensen_gap_report(estimates, exact);
  out.push_back({"appendixC", "Jensen gap: mean log estimate vs truth", exact, exact - gap.mean_log_gap,
                 "<= pred + 3 SE", gap.mean_log_gap >= -3.0 * gap.stderr_of_mean});
  return out;
}

inline std::vector<Check> gdflow_suite(std::uint64_t seed) {
  std::vector<Check> out;
  const Vector h = (Vector(4) << 2.0, 1.0, 0.5, 0.1).finished();
  const double t = 0.5;
  const Vector predicted = gd_flow_covariance(h, t);
  const Vector empirical = gd_flow_ensemble_variance(h, t, 100000, seed);
  for (Eigen::Index i = 0; i < h.size(); ++i) {
    std::ostringstream name;
    name << "variance exp(-2 h t), h=" << h[i];
    out.push_back(relative_check("gdflow", name.str(), predicted[i], empirical[i], 0.02));
  }
  const double np = gd_flow_nonproportionality((Vector(2) << 2.0, 1.0).finished(), 0.5);
  out.push_back({"gdflow", "density not proportional to loss, h=(2,1)", 0.0, np, "> 1e-3", np > 1e-3});
  const double iso = gd_flow_nonproportionality(Vector::Constant(3, 1.5), 0.5);
  out.push_back(absolute_check("gdflow", "isotropic H stays proportional", 0.0, iso, 1e-12));
  return out;
}

}  // namespace detail

inline std::vector<Check> run_validation(const std::string& suite, std::uint64_t seed) {
  std::vector<Check> out;
  const bool all = suite == "all";
  if (!all && suite != "ellipsoid" && suite != "appendixA" && suite != "appendixC" && suite != "gdflow") {
    throw Error("unknown validation suite: " + suite);
  }
  const auto take = [&](std::vector<Check> part) { out.insert(out.end(), part.begin(), part.end()); };
  if (all || suite == "ellipsoid") {
    take(detail::ellipsoid_suite(seed));
  }
  if (all || suite == "appendixA") {
    take(detail::appendix_a_suite(seed));
  }
  if (all || suite == "appendixC") {
    take(detail::appendix_c_suite(seed));
  }
  if (all || suite == "gdflow") {
    take(detail::gdflow_suite(seed));
  }
  return out;
}

inline void print_checks(std::ostream& os, const std::vector<Check>& checks) {
  os << std::left << std::setw(10) << "suite" << std::setw(44) << "check" << std::right << std::setw(16)
     << "predicted" << std::setw(16) << "empirical" << "  " << std::left << std::setw(14) << "tolerance"
     << "result\n";
  for (const auto& c : checks) {
    os << std::left << std::setw(10) << c.suite << std::setw(44) << c.name << std::right << std::setw(16)
       << std::setprecision(8) << c.predicted << std::setw(16) << c.empirical << "  " << std::left << std::setw(14)
       << c.tolerance << (c.pass ? "PASS" : "FAIL") << '\n';
  }
}

// ---------------------------------------------------------------------------
// Description length

/// Builds the description-length report from a volume record. The record must be Lebesgue.
inline models::DescriptionLength mdl_from_record(const json& record, const Checkpoint& ck, const Dataset& data) {
  if (!record.contains("log_volume") || record["log_volume"].is_null()) {
    throw Error("volume record has no finite log_volume");
  }
  VolumeEstimate est;
  est.log_volume = record["log_volume"].get<double>();
  est.n = record.value("n", Eigen::Index{0});
  est.k = record.value("k", 0);
  const std::string measure = record.value("measure", "");
  if (measure == "gaussian") {
    est.measure = MeasureSpec::gaussian(ck.init_sigma);
  } else if (measure == "lebesgue") {
    est.measure = MeasureSpec::lebesgue();
  } else {
    throw Error("volume record has no measure");
  }
  return models::description_length(est, ck.params, MeasureSpec::gaussian(ck.init_sigma), data);
}

// ---------------------------------------------------------------------------
// Commands

/// Either a trained checkpoint or the built-in quadratic toy cost.
struct ModelSelection {
  std::string checkpoint;
  /// Nonzero selects the quadratic model of this dimension instead of a checkpoint.
  Eigen::Index quadratic_dim = 0;
  double quadratic_lo = 1.0;
  double quadratic_hi = 1.0;

  [[nodiscard]] bool is_quadratic() const { return quadratic_dim > 0; }
  [[nodiscard]] QuadraticModel quadratic() const { return {quadratic_dim, quadratic_lo, quadratic_hi}; }
};

inline json to_json(const ModelSelection& m) {
  if (m.is_quadratic()) {
    return {{"quadratic", to_json(m.quadratic())}};
  }
  return {{"checkpoint", m.checkpoint}};
}

/// Estimates against a checkpoint or the quadratic model, building preconditioners on demand.
class ModelEstimator {
 public:
  explicit ModelEstimator(const ModelSelection& model, const EstimateSettings& base) : model_(model) {
    if (model.is_quadratic()) {
      return;
    }
    if (model.checkpoint.empty()) {
      throw Error("no checkpoint given (use --checkpoint or --quadratic-dim)");
    }
    ck_ = LoadedCheckpoint::load(model.checkpoint);
    data_ = cost_dataset(*ck_, base.cost, base.data);
    cost_.emplace(make_cost(ck_->checkpoint, *data_, base.cost));
    builder_.emplace(*cost_, ck_->checkpoint);
  }

  ModelEstimator(const ModelEstimator&) = delete;
  ModelEstimator& operator=(const ModelEstimator&) = delete;

  Preconditioner preconditioner(const EstimateSettings& s) {
    if (!s.load_preconditioner.empty()) {
      return load_preconditioner(s.load_preconditioner);
    }
    if (model_.is_quadratic()) {
      if (s.preconditioner != PrecondChoice::none) {
        throw Error("the quadratic model only supports --preconditioner none or a loaded sidecar");
      }
      return Preconditioner::identity(model_.quadratic_dim).set_label("none");
    }
    return builder_->build(s.preconditioner, s.resolved_eps(), s.exponent);
  }

  VolumeEstimate run(const EstimateSettings& s, const Preconditioner& precond) const {
    if (model_.is_quadratic()) {
      return estimate_local_volume(quadratic_neighborhood(model_.quadratic(), s), precond, s.k, estimate_options(s));
    }
    return estimate_checkpoint(ck_->checkpoint, *cost_, s, precond);
  }

 private:
  ModelSelection model_;
  std::optional<LoadedCheckpoint> ck_;
  std::optional<Dataset> data_;
  std::optional<BehaviorCost> cost_;
  std::optional<PreconditionerBuilder> builder_;
};

struct TrainCommand {
  DataSettings data;
  TrainSettings train;
  std::string out;
};

inline json to_json(const TrainCommand& c) {
  return {{"data", to_json(c.data)}, {"train", to_json(c.train)}, {"out", c.out}};
}

/// Trains, writes checkpoints, metrics.csv, datasets and config.json into `out`.
inline std::vector<fs::path> cmd_train(const TrainCommand& c, std::ostream& log) {
  if (c.out.empty()) {
    throw Error("train needs an output directory (--out)");
  }
  const auto data = load_data(c.data, c.train.poison);
  auto run = train_model(data, c.train);
  const auto paths = write_train_run(run, data, c.out);
  std::ofstream(fs::path(c.out) / "config.json") << to_json(c).dump(2) << '\n';
  const auto& last = run.metrics.back();
  log << "wrote " << paths.size() << " checkpoints to " << c.out << " (final step " << last.step
      << ", train loss " << last.train_loss << ", val loss " << last.val_loss;
  if (run.poisoned) {
    log << ", poison loss " << last.poison_loss;
  }
  log << ")\n";
  return paths;
}

struct EstimateCommand {
  ModelSelection model;
  EstimateSettings settings;
  std::string out = "runs.jsonl";
  /// Per-sample CSV; empty means next to `out`.
  std::string samples;
  std::string save_preconditioner;
};

inline json estimate_config(const ModelSelection& model, const EstimateSettings& s) {
  return {{"model", to_json(model)}, {"estimate", to_json(s)}};
}

/// Appends one run record to `out` and writes the per-sample CSV. Returns the record.
inline json cmd_estimate(const EstimateCommand& c, std::ostream& log) {
  const auto start = std::chrono::steady_clock::now();
  ModelEstimator estimator(c.model, c.settings);
  const Preconditioner precond = estimator.preconditioner(c.settings);
  if (!c.save_preconditioner.empty()) {
    save_preconditioner(precond, c.save_preconditioner);
  }
  const auto est = estimator.run(c.settings, precond);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  json record = run_record("estimate", c.settings.seed, estimate_config(c.model, c.settings), est, wall);
  append_jsonl(c.out, record);
  write_samples_csv(est, c.samples.empty() ? samples_path_for(c.out) : fs::path(c.samples));
  log << "log_volume " << std::setprecision(10) << est.log_volume << " (log10 " << est.log10_volume() << "), k "
      << est.k << ", n " << est.n << ", preconditioner " << est.preconditioner_id << ", failed "
      << est.failed_count() << ", truncated " << est.truncated_count()
      << (est.lower_bound_only() ? " (lower bound only)" : "") << '\n';
  return record;
}

struct SweepCommand {
  ModelSelection model;
  EstimateSettings settings;
  std::string kind = "cutoff";
  /// Values: "a,b,c" or "lo:hi:count"; preconditioner names; or checkpoint paths.
  std::string range;
  std::string checkpoint_dir;
  std::string out = "sweep.csv";
  /// Optional JSON Lines file receiving one run record per successful point.
  std::string records;
};

struct SweepResult {
  std::vector<SweepRow> rows;
  std::optional<double> slope;
  std::optional<double> best_value;
  std::optional<int> inversions;
};

inline SweepResult cmd_sweep(const SweepCommand& c, std::ostream& log) {
  const SweepKind kind = sweep_kind_from_string(c.kind);
  SweepResult result;
  const auto point = [&](std::string label, double value, const ModelSelection& model, const EstimateSettings& s,
                         auto&& body) {
    const auto start = std::chrono::steady_clock::now();
    std::optional<VolumeEstimate> kept;
    auto row = sweep_point(std::move(label), value, s, [&] {
      kept = body();
      return *kept;
    });
    if (kept && !c.records.empty()) {
      const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
      append_jsonl(c.records, run_record("sweep", s.seed, estimate_config(model, s), *kept, wall));
    }
    log << c.kind << ' ' << row.label << ' ' << fmt(row.value) << ": "
        << (row.ok ? "log_volume " + fmt(row.log_volume) : "failed: " + row.error) << '\n';
    result.rows.push_back(std::move(row));
  };

  if (kind == SweepKind::checkpoint) {
    std::vector<fs::path> paths;
    if (!c.checkpoint_dir.empty()) {
      paths = list_checkpoints(c.checkpoint_dir);
    } else {
      std::stringstream ss(c.range);
      std::string item;
      while (std::getline(ss, item, ',')) {
        if (!item.empty()) {
          paths.emplace_back(item);
        }
      }
    }
    if (paths.empty()) {
      throw Error("checkpoint sweep needs --checkpoint-dir or a comma-separated --range of checkpoints");
    }
    for (const auto& p : paths) {
      ModelSelection model = c.model;
      model.checkpoint = p.string();
      double step = std::nan("");
      try {
        step = static_cast<double>(models::load_checkpoint(p).step);
      } catch (const std::exception&) {
      }
      point(p.filename().string(), step, model, c.settings, [&] {
        ModelEstimator estimator(model, c.settings);
        return estimator.run(c.settings, estimator.preconditioner(c.settings));
      });
    }
    result.inversions = count_inversions(result.rows);
    log << "inversions: " << *result.inversions << " over " << result.rows.size() << " checkpoints\n";
  } else if (kind == SweepKind::preconditioner) {
    ModelEstimator estimator(c.model, c.settings);
    std::stringstream ss(c.range.empty() ? std::string("none,diag,adam-nu,adam-mu") : c.range);
    std::string name;
    while (std::getline(ss, name, ',')) {
      EstimateSettings s = c.settings;
      s.load_preconditioner.clear();
      std::optional<PrecondChoice> choice;
      try {
        choice = precond_from_string(name);
      } catch (const std::exception&) {
      }
      if (choice) {
        s.preconditioner = *choice;
        if (!c.settings.eps) {
          s.eps.reset();
        }
      }
      point(name, choice ? s.resolved_eps() : std::nan(""), c.model, s, [&] {
        if (!choice) {
          throw Error("unknown preconditioner: " + name);
        }
        return estimator.run(s, estimator.preconditioner(s));
      });
    }
  } else {
    const auto values = parse_range(c.range);
    ModelEstimator estimator(c.model, c.settings);
    std::optional<Preconditioner> fixed;
    for (double v : values) {
      EstimateSettings s = c.settings;
      std::string label;
      if (kind == SweepKind::cutoff) {
        s.cutoff = v;
        label = "cutoff";
      } else {
        if (s.preconditioner == PrecondChoice::none) {
          s.preconditioner = PrecondChoice::diag;
        }
        s.eps = v;
        label = "eps-" + to_string(s.preconditioner);
      }
      point(label, v, c.model, s, [&] {
        if (kind == SweepKind::cutoff) {
          if (!fixed) {
            fixed = estimator.preconditioner(s);
          }
          return estimator.run(s, *fixed);
        }
        return estimator.run(s, estimator.preconditioner(s));
      });
    }
    if (kind == SweepKind::cutoff) {
      try {
        result.slope = cutoff_slope(result.rows);
        log << "fitted log-log slope " << fmt(*result.slope) << '\n';
      } catch (const std::exception& e) {
        log << "no slope: " << e.what() << '\n';
      }
    } else {
      const SweepRow* best = nullptr;
      for (const auto& r : result.rows) {
        if (r.ok && (best == nullptr || r.log_volume > best->log_volume)) {
          best = &r;
        }
      }
      if (best != nullptr) {
        result.best_value = best->value;
        log << "best eps " << fmt(best->value) << " (log_volume " << fmt(best->log_volume) << ")\n";
      }
    }
  }

  write_sweep_csv(result.rows, c.kind, c.out);
  json summary = {{"kind", c.kind}, {"points", result.rows.size()},
                  {"config", estimate_config(c.model, c.settings)}};
  summary["slope"] = result.slope ? json(*result.slope) : json(nullptr);
  summary["best_value"] = result.best_value ? json(*result.best_value) : json(nullptr);
  summary["inversions"] = result.inversions ? json(*result.inversions) : json(nullptr);
  fs::path summary_path = c.out;
  summary_path.replace_extension(".summary.json");
  std::ofstream(summary_path) << summary.dump(2) << '\n';
  return result;
}

/// Prints the check table; returns true when every check passed.
inline bool cmd_validate(const std::string& suite, std::uint64_t seed, std::ostream& log) {
  const auto checks = run_validation(suite, seed);
  print_checks(log, checks);
  int failed = 0;
  for (const auto& c : checks) {
    if (!c.pass) {
      ++failed;
      log << "FAILED: " << c.suite << ": " << c.name << '\n';
    }
  }
  log << checks.size() - static_cast<std::size_t>(failed) << "/" << checks.size() << " checks passed\n";
  return failed == 0;
}

struct MdlCommand {
  std::string checkpoint;
  std::string record;
  /// Zero-based line in the record file; negative counts from the end.
  int line = -1;
  std::string data;
  std::string out;
};

inline json cmd_mdl(const MdlCommand& c, std::ostream& log) {
  const auto ck = LoadedCheckpoint::load(c.checkpoint);
  const auto records = read_jsonl(c.record);
  if (records.empty()) {
    throw Error("record file " + c.record + " is empty");
  }
  const long count = static_cast<long>(records.size());
  const long idx = c.line < 0 ? count + c.line : c.line;
  if (idx < 0 || idx >= count) {
    throw Error("record line out of range");
  }
  const Dataset data =
      c.data.empty() ? models::read_csv(ck.resolve("train_data")) : models::read_csv(c.data);
  const auto dl = mdl_from_record(records[static_cast<std::size_t>(idx)], ck.checkpoint, data);
  json report = {{"checkpoint", c.checkpoint},
                 {"record", c.record},
                 {"log_volume", records[static_cast<std::size_t>(idx)]["log_volume"]},
                 {"kl_term", dl.kl_term},
                 {"data_term", dl.data_term},
                 {"total", dl.total()},
                 {"units", "nats"}};
  if (!c.out.empty()) {
    std::ofstream(c.out) << report.dump(2) << '\n';
  }
  log << report.dump(2) << '\n';
  return report;
}

}  // namespace starvol::app

#endif  // STARVOL_TOOLS_APP_HPP
