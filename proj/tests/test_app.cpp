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

#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numbers>
#include <sstream>
#include <string>
#include <vector>

#include "app.hpp"

using Catch::Matchers::ContainsSubstring;
using Catch::Matchers::WithinAbs;
using Catch::Matchers::WithinRel;
using namespace starvol;
using namespace starvol::app;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const char* env = std::getenv("STARVOL_TEST_TMP");
  const fs::path root = env != nullptr ? fs::path(env) : fs::temp_directory_path() / "starvol_test_app";
  const fs::path dir = root / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::vector<std::string> lines_of(const fs::path& p) {
  std::ifstream in(p);
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    out.push_back(line);
  }
  return out;
}

// Small network so estimates and Hessians stay cheap.
TrainCommand small_train(const fs::path& out, bool poison = false) {
  TrainCommand c;
  c.data.dim = 6;
  c.data.classes = 3;
  c.data.separation = 1.5;
  c.data.feature_decades = 1.0;
  c.data.train_size = 48;
  c.data.heldout_size = 32;
  c.data.poison_size = 24;
  c.train.hidden = {5};
  c.train.epochs = 30;
  c.train.batch = 16;
  c.train.checkpoint_every = 30;
  c.train.poison = poison;
  c.train.seed = 3;
  c.out = out.string();
  return c;
}

json without_volatile(json record) {
  record.erase("timestamp");
  record.erase("wall_time_s");
  return record;
}

}  // namespace

TEST_CASE("train writes checkpoints at the configured cadence", "[app][train]") {
  const auto dir = scratch("cadence");
  TrainCommand c;
  c.train.epochs = 25;  // 256 points / batch 32 = 8 steps per epoch: 200 steps
  c.train.checkpoint_every = 40;
  c.out = (dir / "run").string();
  std::ostringstream log;
  const auto paths = cmd_train(c, log);
  REQUIRE(paths.size() >= 5);
  CHECK(paths.size() == 6);
  CHECK(list_checkpoints(dir / "run").size() == paths.size());
  const auto ck = models::load_checkpoint(paths.back());
  CHECK(ck.step == 200);
  CHECK(ck.params.flat.size() == 4810);
  CHECK(ck.adam.has_value());
  CHECK(fs::exists(dir / "run" / "config.json"));
  const auto metrics = lines_of(dir / "run" / "metrics.csv");
  CHECK(metrics.front() == "step,train_loss,val_loss");
  CHECK(metrics.size() == paths.size() + 1);
}

TEST_CASE("train reruns are byte-identical", "[app][train]") {
  const auto dir = scratch("rerun");
  std::ostringstream log;
  const auto a = cmd_train(small_train(dir / "a"), log);
  const auto b = cmd_train(small_train(dir / "b"), log);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(slurp(a[i]) == slurp(b[i]));
  }
  CHECK(slurp(dir / "a" / "metrics.csv") == slurp(dir / "b" / "metrics.csv"));
  CHECK(slurp(dir / "a" / "train.csv") == slurp(dir / "b" / "train.csv"));
}

TEST_CASE("poisoned training logs a poison-loss column", "[app][train]") {
  const auto dir = scratch("poison");
  std::ostringstream log;
  cmd_train(small_train(dir / "p", true), log);
  const auto metrics = lines_of(dir / "p" / "metrics.csv");
  CHECK(metrics.front() == "step,train_loss,val_loss,poison_loss");
  CHECK(fs::exists(dir / "p" / "poison.csv"));
  CHECK_THAT(log.str(), ContainsSubstring("poison loss"));
}

TEST_CASE("train errors", "[app][train]") {
  const auto dir = scratch("train_errors");
  std::ostringstream log;
  TrainCommand missing = small_train(dir / "x");
  missing.data.train_csv = (dir / "nope.csv").string();
  missing.data.heldout_csv = (dir / "nope.csv").string();
  CHECK_THROWS_WITH(cmd_train(missing, log), ContainsSubstring("cannot read dataset"));

  TrainCommand bad = small_train(dir / "y");
  bad.train.epochs = -1;
  CHECK_THROWS_WITH(cmd_train(bad, log), ContainsSubstring("invalid training configuration"));

  TrainCommand no_out = small_train(dir / "z");
  no_out.out.clear();
  CHECK_THROWS_AS(cmd_train(no_out, log), Error);
}

TEST_CASE("training from CSV files", "[app][train]") {
  const auto dir = scratch("csv");
  std::ostringstream log;
  cmd_train(small_train(dir / "synthetic"), log);
  TrainCommand c = small_train(dir / "from_csv");
  c.data.train_csv = (dir / "synthetic" / "train.csv").string();
  c.data.heldout_csv = (dir / "synthetic" / "heldout.csv").string();
  const auto paths = cmd_train(c, log);
  const auto reference = list_checkpoints(dir / "synthetic");
  REQUIRE(paths.size() == reference.size());
  CHECK(models::load_checkpoint(paths.back()).params.flat ==
        models::load_checkpoint(reference.back()).params.flat);
}

TEST_CASE("estimate defaults", "[app][estimate]") {
  const EstimateSettings s;
  CHECK(s.k == 100);
  CHECK(s.cutoff == 1e-2);
  CHECK(s.cost == CostKind::kl);
  CHECK(s.preconditioner == PrecondChoice::none);
  CHECK(default_eps(PrecondChoice::hessian) == 0.1);
  CHECK(default_eps(PrecondChoice::diag) == 0.01);
  CHECK(default_eps(PrecondChoice::adam_nu) == 0.001);
  CHECK(default_eps(PrecondChoice::adam_mu) == 0.001);
}

TEST_CASE("estimate records, replay and log10", "[app][estimate]") {
  const auto dir = scratch("estimate");
  std::ostringstream log;
  const auto paths = cmd_train(small_train(dir / "run"), log);

  EstimateCommand c;
  c.model.checkpoint = paths.back().string();
  c.settings.k = 40;
  c.settings.seed = 9;
  c.out = (dir / "a.jsonl").string();
  const json first = cmd_estimate(c, log);
  c.out = (dir / "b.jsonl").string();
  const json second = cmd_estimate(c, log);

  SECTION("single-threaded replay is identical apart from timestamp and wall time") {
    CHECK(without_volatile(first) == without_volatile(second));
    const auto a = read_jsonl(dir / "a.jsonl");
    const auto b = read_jsonl(dir / "b.jsonl");
    REQUIRE(a.size() == 1);
    CHECK(without_volatile(a[0]).dump() == without_volatile(b[0]).dump());
    CHECK(slurp(dir / "a.samples.csv") == slurp(dir / "b.samples.csv"));
  }

  SECTION("record fields") {
    for (const char* key : {"timestamp", "build_id", "seed", "subcommand", "config", "log_terms", "log_volume",
                            "log10_volume", "wall_time_s"}) {
      CHECK(first.contains(key));
    }
    CHECK(first["subcommand"] == "estimate");
    CHECK(first["seed"] == 9);
    CHECK(first["log_terms"].size() == 40);
    CHECK(first["config"]["estimate"]["k"] == 40);
    CHECK(first["config"]["model"]["checkpoint"] == c.model.checkpoint);
    CHECK(lines_of(dir / "a.samples.csv").size() == 41);
  }

  SECTION("log10 values are the natural log over ln 10") {
    const double ln = first["log_volume"].get<double>();
    CHECK(first["log10_volume"].get<double>() == ln / std::numbers::ln10);
    const auto rows = lines_of(dir / "a.samples.csv");
    for (std::size_t i = 1; i < rows.size(); ++i) {
      std::stringstream ss(rows[i]);
      std::string idx;
      std::string term;
      std::string term10;
      std::getline(ss, idx, ',');
      std::getline(ss, term, ',');
      std::getline(ss, term10, ',');
      CHECK(std::stod(term10) == std::stod(term) / std::numbers::ln10);
    }
  }

  SECTION("threads agree with the serial result") {
    EstimateCommand t = c;
    t.settings.threads = 3;
    t.out = (dir / "t.jsonl").string();
    const json threaded = cmd_estimate(t, log);
    CHECK_THAT(threaded["log_volume"].get<double>(), WithinAbs(first["log_volume"].get<double>(), 1e-9));
  }

  SECTION("smooth-max bracket") {
    const double v = first["log_volume"].get<double>();
    const double top = first["max_term"].get<double>();
    CHECK(v <= top);
    CHECK(v >= top - std::log(40.0));
  }
}

TEST_CASE("the anchor is always inside its KL neighborhood", "[app][estimate]") {
  const auto dir = scratch("anchor");
  std::ostringstream log;
  const auto paths = cmd_train(small_train(dir / "run"), log);
  EstimateCommand c;
  c.model.checkpoint = paths.back().string();
  c.settings.k = 10;
  c.settings.cutoff = 1e-6;
  c.out = (dir / "r.jsonl").string();
  const json r = cmd_estimate(c, log);
  REQUIRE(r["log_volume"].is_number());
  CHECK(std::isfinite(r["log_volume"].get<double>()));
  CHECK(r["log_volume"].get<double>() < 0.0);
  CHECK(r["failed"] == 0);
}

TEST_CASE("estimate with preconditioners and sidecars", "[app][estimate]") {
  const auto dir = scratch("precond");
  std::ostringstream log;
  const auto paths = cmd_train(small_train(dir / "run"), log);

  EstimateCommand c;
  c.model.checkpoint = paths.back().string();
  c.settings.k = 20;
  c.out = (dir / "r.jsonl").string();
  for (auto p : {PrecondChoice::none, PrecondChoice::hessian, PrecondChoice::diag, PrecondChoice::adam_nu,
                 PrecondChoice::adam_mu}) {
    c.settings.preconditioner = p;
    const json r = cmd_estimate(c, log);
    CHECK(r["preconditioner"] == to_string(p));
    CHECK(r["config"]["estimate"]["eps"] == default_eps(p));
  }

  c.settings.preconditioner = PrecondChoice::diag;
  c.save_preconditioner = (dir / "diag.json").string();
  const json saved = cmd_estimate(c, log);
  EstimateCommand reload = c;
  reload.save_preconditioner.clear();
  reload.settings.preconditioner = PrecondChoice::none;
  reload.settings.load_preconditioner = (dir / "diag.json").string();
  const json loaded = cmd_estimate(reload, log);
  CHECK(loaded["log_volume"].get<double>() == saved["log_volume"].get<double>());

  SECTION("adam preconditioners need stored Adam state") {
    auto ck = models::load_checkpoint(paths.back());
    ck.adam.reset();
    models::save_checkpoint(ck, dir / "run" / "no_adam.json");
    EstimateCommand a = c;
    a.save_preconditioner.clear();
    a.model.checkpoint = (dir / "run" / "no_adam.json").string();
    a.settings.preconditioner = PrecondChoice::adam_nu;
    CHECK_THROWS_WITH(cmd_estimate(a, log), ContainsSubstring("Adam state"));
    a.settings.preconditioner = PrecondChoice::adam_mu;
    CHECK_THROWS_WITH(cmd_estimate(a, log), ContainsSubstring("Adam state"));
  }
}

TEST_CASE("estimate with the loss cost", "[app][estimate]") {
  const auto dir = scratch("loss");
  std::ostringstream log;
  const auto paths = cmd_train(small_train(dir / "run"), log);
  const auto ck = models::load_checkpoint(paths.back());
  const auto train = models::read_csv(dir / "run" / "train.csv");
  const double anchor_loss = models::loss_cost(ck.params, train);

  EstimateCommand c;
  c.model.checkpoint = paths.back().string();
  c.settings.cost = CostKind::loss;
  c.settings.k = 10;
  c.settings.cutoff = anchor_loss + 0.05;
  c.out = (dir / "r.jsonl").string();
  const json r = cmd_estimate(c, log);
  CHECK(std::isfinite(r["log_volume"].get<double>()));

  c.settings.cutoff = 0.5 * anchor_loss;
  CHECK_THROWS_WITH(cmd_estimate(c, log), ContainsSubstring("not inside"));
}

TEST_CASE("estimate errors", "[app][estimate]") {
  const auto dir = scratch("estimate_errors");
  std::ostringstream log;
  EstimateCommand c;
  c.out = (dir / "r.jsonl").string();
  CHECK_THROWS_WITH(cmd_estimate(c, log), ContainsSubstring("no checkpoint"));
  c.model.checkpoint = (dir / "missing.json").string();
  CHECK_THROWS_AS(cmd_estimate(c, log), Error);
  c.model = {};
  c.model.quadratic_dim = 4;
  c.settings.preconditioner = PrecondChoice::diag;
  CHECK_THROWS_WITH(cmd_estimate(c, log), ContainsSubstring("quadratic model"));
}

TEST_CASE("cutoff sweep on a quadratic cost has slope n/2", "[app][sweep]") {
  const auto dir = scratch("cutoff");
  std::ostringstream log;
  SweepCommand c;
  c.kind = "cutoff";
  c.model.quadratic_dim = 100;
  c.model.quadratic_lo = 0.1;
  c.model.quadratic_hi = 10.0;
  c.settings.measure = MeasureSpec::Kind::lebesgue;
  c.settings.k = 50;
  c.range = "1e-4:1e-1:7";
  c.out = (dir / "sweep.csv").string();
  const auto result = cmd_sweep(c, log);
  REQUIRE(result.slope.has_value());
  CHECK_THAT(*result.slope, WithinRel(50.0, 0.05));
  const auto rows = lines_of(dir / "sweep.csv");
  CHECK(rows.size() == 8);
  CHECK(rows.front() == "kind,label,value,log_volume,log10_volume,k,seed,status");
  const auto summary = json::parse(slurp(dir / "sweep.summary.json"));
  CHECK(summary["slope"].get<double>() == *result.slope);
}

TEST_CASE("sweep flags failing points and continues", "[app][sweep]") {
  const auto dir = scratch("sweep_fail");
  std::ostringstream log;
  SweepCommand c;
  c.kind = "cutoff";
  c.model.quadratic_dim = 5;
  c.settings.k = 5;
  c.range = "-1,0.01,0.1";
  c.out = (dir / "sweep.csv").string();
  c.records = (dir / "points.jsonl").string();
  const auto result = cmd_sweep(c, log);
  REQUIRE(result.rows.size() == 3);
  CHECK_FALSE(result.rows[0].ok);
  CHECK(result.rows[1].ok);
  CHECK(result.rows[2].ok);
  CHECK_THAT(lines_of(dir / "sweep.csv")[1], ContainsSubstring("failed: cutoff must be positive"));
  CHECK(read_jsonl(dir / "points.jsonl").size() == 2);
}

TEST_CASE("checkpoint, preconditioner and eps sweeps", "[app][sweep]") {
  const auto dir = scratch("sweeps");
  std::ostringstream log;
  const auto paths = cmd_train(small_train(dir / "run"), log);

  SweepCommand c;
  c.settings.k = 10;

  SECTION("checkpoint") {
    c.kind = "checkpoint";
    c.checkpoint_dir = (dir / "run").string();
    c.out = (dir / "ck.csv").string();
    const auto result = cmd_sweep(c, log);
    REQUIRE(result.rows.size() == paths.size());
    REQUIRE(result.inversions.has_value());
    CHECK(result.rows.back().value == static_cast<double>(models::load_checkpoint(paths.back()).step));
  }

  SECTION("preconditioner") {
    c.kind = "preconditioner";
    c.model.checkpoint = paths.back().string();
    c.range = "none,diag,adam-nu,bogus";
    c.out = (dir / "pc.csv").string();
    const auto result = cmd_sweep(c, log);
    REQUIRE(result.rows.size() == 4);
    CHECK(result.rows[0].ok);
    CHECK(result.rows[1].ok);
    CHECK(result.rows[2].ok);
    CHECK_FALSE(result.rows[3].ok);
    CHECK(result.rows[1].value == 0.01);
  }

  SECTION("eps reports the best value") {
    c.kind = "eps";
    c.model.checkpoint = paths.back().string();
    c.settings.preconditioner = PrecondChoice::diag;
    c.range = "1e-3,1e-2,1e-1";
    c.out = (dir / "eps.csv").string();
    const auto result = cmd_sweep(c, log);
    REQUIRE(result.best_value.has_value());
    double best = -INFINITY;
    for (const auto& r : result.rows) {
      best = std::max(best, r.log_volume);
    }
    for (const auto& r : result.rows) {
      if (r.log_volume == best) {
        CHECK(r.value == *result.best_value);
      }
    }
  }
}

TEST_CASE("range parsing and fits", "[app][sweep]") {
  const auto v = parse_range("1e-4:1e-1:4");
  REQUIRE(v.size() == 4);
  CHECK_THAT(v[0], WithinRel(1e-4, 1e-12));
  CHECK_THAT(v[1], WithinRel(1e-3, 1e-12));
  CHECK_THAT(v[3], WithinRel(1e-1, 1e-12));
  CHECK(parse_range("0.5,2") == std::vector<double>{0.5, 2.0});
  CHECK_THROWS_AS(parse_range("1:0.1:3"), Error);
  CHECK_THROWS_AS(parse_range(""), Error);
  CHECK_THAT(fit_slope({1, 2, 3}, {5, 8, 11}), WithinAbs(3.0, 1e-12));
  std::vector<SweepRow> rows(4);
  const double vols[] = {-1.0, -2.0, -1.5, -3.0};
  for (int i = 0; i < 4; ++i) {
    rows[static_cast<std::size_t>(i)].ok = true;
    rows[static_cast<std::size_t>(i)].log_volume = vols[i];
  }
  CHECK(count_inversions(rows) == 1);
}

TEST_CASE("mdl from volume records", "[app][mdl]") {
  const auto dir = scratch("mdl");
  const long n = 6;
  models::Checkpoint ck;
  ck.params = models::MlpParams(models::MlpShape::make(1, {}, n / 2), Vector::Zero(n));
  ck.init_sigma = Vector::Ones(n);
  models::Dataset data;
  data.inputs = models::RowMatrix::Zero(2, 1);
  data.labels = std::vector<int>{0, 1};

  const double half_n_log_2pi = 0.5 * static_cast<double>(n) * std::log(2.0 * std::numbers::pi);
  json record = {{"log_volume", half_n_log_2pi}, {"measure", "lebesgue"}, {"n", n}, {"k", 1}};
  const auto zero = mdl_from_record(record, ck, data);
  CHECK_THAT(zero.kl_term, WithinAbs(0.0, 1e-12));
  CHECK_THAT(zero.data_term, WithinRel(2.0 * std::log(3.0), 1e-12));

  record["log_volume"] = half_n_log_2pi + std::log(2.0);
  CHECK_THAT(mdl_from_record(record, ck, data).kl_term, WithinAbs(-std::log(2.0), 1e-12));

  record["measure"] = "gaussian";
  CHECK_THROWS_WITH(mdl_from_record(record, ck, data), ContainsSubstring("Lebesgue"));
  record["measure"] = "lebesgue";
  record["log_volume"] = nullptr;
  CHECK_THROWS_AS(mdl_from_record(record, ck, data), Error);

  SECTION("command over a written record") {
    std::ostringstream log;
    const auto paths = cmd_train(small_train(dir / "run"), log);
    EstimateCommand e;
    e.model.checkpoint = paths.back().string();
    e.settings.measure = MeasureSpec::Kind::lebesgue;
    e.settings.k = 10;
    e.out = (dir / "leb.jsonl").string();
    const json r = cmd_estimate(e, log);
    MdlCommand m;
    m.checkpoint = e.model.checkpoint;
    m.record = e.out;
    m.out = (dir / "mdl.json").string();
    const json report = cmd_mdl(m, log);
    const auto loaded = models::load_checkpoint(paths.back());
    CHECK_THAT(report["kl_term"].get<double>(),
               WithinRel(models::mdl_kl_term(r["log_volume"].get<double>(), loaded.params.flat, loaded.init_sigma),
                         1e-12));
    CHECK(json::parse(slurp(dir / "mdl.json")) == report);

    e.settings.measure = MeasureSpec::Kind::gaussian;
    cmd_estimate(e, log);
    CHECK_THROWS_WITH(cmd_mdl(m, log), ContainsSubstring("Lebesgue"));
    m.line = 0;
    CHECK_NOTHROW(cmd_mdl(m, log));
    m.line = 5;
    CHECK_THROWS_WITH(cmd_mdl(m, log), ContainsSubstring("out of range"));
  }
}

TEST_CASE("validation suites pass", "[app][validate]") {
  for (const char* suite : {"ellipsoid", "appendixA", "appendixC", "gdflow"}) {
    INFO(suite);
    std::ostringstream log;
    CHECK(cmd_validate(suite, 0, log));
    CHECK_THAT(log.str(), ContainsSubstring("checks passed"));
  }
  std::ostringstream log;
  CHECK_THROWS_WITH(cmd_validate("bogus", 0, log), ContainsSubstring("unknown validation suite"));
}
