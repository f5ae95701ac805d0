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

// starvol: train toy networks, estimate local volumes, run sweeps and validation suites.

#include <cstdlib>
#include <iostream>
#include <map>
#include <string>

#include <CLI11.hpp>

#include "app.hpp"

namespace {

using namespace starvol;
using namespace starvol::app;

const std::map<std::string, PrecondChoice> kPreconditioners = {{"none", PrecondChoice::none},
                                                               {"hessian", PrecondChoice::hessian},
                                                               {"diag", PrecondChoice::diag},
                                                               {"adam-nu", PrecondChoice::adam_nu},
                                                               {"adam-mu", PrecondChoice::adam_mu}};

const std::map<std::string, CostKind> kCosts = {{"kl", CostKind::kl}, {"loss", CostKind::loss}};

const std::map<std::string, MeasureSpec::Kind> kMeasures = {{"gaussian", MeasureSpec::Kind::gaussian},
                                                            {"lebesgue", MeasureSpec::Kind::lebesgue}};

const std::map<std::string, RadialIntegral> kIntegrals = {{"corrected", RadialIntegral::corrected},
                                                          {"second-order", RadialIntegral::second_order}};

template <class T>
CLI::CheckedTransformer choice(const std::map<std::string, T>& names) {
  CLI::CheckedTransformer t(names, CLI::ignore_case);
  t.description("");
  return t;
}

void add_seed(CLI::App* cmd, std::uint64_t& seed) {
  cmd->add_option("--seed", seed, "Random seed (default from STARVOL_SEED, else 0)")
      ->envname("STARVOL_SEED")
      ->capture_default_str();
}

void add_model_options(CLI::App* cmd, ModelSelection& m) {
  cmd->add_option("--checkpoint", m.checkpoint, "Checkpoint JSON to anchor at");
  cmd->add_option("--quadratic-dim", m.quadratic_dim,
                  "Use the quadratic toy cost in this dimension instead of a checkpoint");
  cmd->add_option("--quadratic-lo", m.quadratic_lo, "Smallest ellipsoid radius of the quadratic cost")
      ->capture_default_str();
  cmd->add_option("--quadratic-hi", m.quadratic_hi, "Largest ellipsoid radius of the quadratic cost")
      ->capture_default_str();
}

struct EstimateFlags {
  std::optional<double> eps;
  std::optional<double> r_max;
};

void add_estimate_options(CLI::App* cmd, EstimateSettings& s, EstimateFlags& f) {
  cmd->add_option("--cost", s.cost, "Behavioral cost: kl|loss")
      ->transform(choice(kCosts))
      ->default_str("kl");
  cmd->add_option("--cutoff", s.cutoff, "Cost cutoff in nats")->capture_default_str();
  cmd->add_option("--k", s.k, "Number of radial samples")->capture_default_str();
  cmd->add_option("--preconditioner", s.preconditioner, "none|hessian|diag|adam-nu|adam-mu")
      ->transform(choice(kPreconditioners))
      ->default_str("none");
  cmd->add_option("--eps", f.eps, "Preconditioner eps (default 0.1 hessian, 0.01 diag, 0.001 adam)");
  cmd->add_option("--exponent", s.exponent, "Exponent applied to diagonal preconditioner sources")
      ->capture_default_str();
  cmd->add_option("--measure", s.measure, "gaussian|lebesgue")
      ->transform(choice(kMeasures))
      ->default_str("gaussian");
  cmd->add_option("--integral", s.integral, "Gaussian radial integral: corrected|second-order")
      ->transform(choice(kIntegrals))
      ->default_str("corrected");
  cmd->add_option("--threads", s.threads, "Worker threads")->capture_default_str()->check(CLI::PositiveNumber);
  cmd->add_option("--rel-tol", s.rel_tol, "Relative tolerance of the radius bisection")->capture_default_str();
  cmd->add_option("--r-max", f.r_max, "Radius cap (default 1e6 Lebesgue, 20 sqrt(n) max sigma Gaussian)");
  cmd->add_option("--data", s.data, "Dataset CSV for the cost (default: the checkpoint's held-out or train set)");
  cmd->add_option("--load-preconditioner", s.load_preconditioner, "Use a saved preconditioner sidecar");
  add_seed(cmd, s.seed);
}

void apply(EstimateSettings& s, const EstimateFlags& f) {
  s.eps = f.eps;
  s.r_max = f.r_max;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"starvol: local volume estimation for neural network parameter space"};
  app.set_config("--config", "", "INI config file; sections [train], [estimate], [sweep], [validate], [mdl]");
  app.set_version_flag("--version", std::string("starvol ") + kBuildId);
  app.require_subcommand(1);

  TrainCommand train;
  auto* train_cmd = app.add_subcommand("train", "Train the toy MLP and write checkpoints");
  {
    auto& d = train.data;
    auto& t = train.train;
    train_cmd->add_option("--out", train.out, "Output directory")->required();
    train_cmd->add_option("--train-csv", d.train_csv, "Labelled training CSV (default: synthetic blobs)");
    train_cmd->add_option("--heldout-csv", d.heldout_csv, "Labelled held-out CSV");
    train_cmd->add_option("--poison-csv", d.poison_csv, "Labelled poison CSV");
    train_cmd->add_flag("--rescale", d.rescale, "Divide CSV features by their largest magnitude");
    train_cmd->add_option("--dim", d.dim, "Synthetic input dimension")->capture_default_str();
    train_cmd->add_option("--classes", d.classes, "Number of classes")->capture_default_str();
    train_cmd->add_option("--separation", d.separation, "Synthetic class-mean scale")->capture_default_str();
    train_cmd->add_option("--noise", d.noise, "Synthetic within-class noise")->capture_default_str();
    train_cmd->add_option("--feature-decades", d.feature_decades, "Spread of synthetic feature scales in decades")
        ->capture_default_str();
    train_cmd->add_option("--train-size", d.train_size, "Synthetic training points")->capture_default_str();
    train_cmd->add_option("--heldout-size", d.heldout_size, "Synthetic held-out points")->capture_default_str();
    train_cmd->add_option("--poison-size", d.poison_size, "Synthetic poison points")->capture_default_str();
    train_cmd->add_option("--data-seed", d.data_seed, "Seed of the synthetic data")->capture_default_str();
    train_cmd->add_option("--hidden", t.hidden, "Hidden layer widths")->capture_default_str();
    train_cmd->add_option("--epochs", t.epochs, "Training epochs")->capture_default_str();
    train_cmd->add_option("--batch", t.batch, "Mini-batch size")->capture_default_str();
    train_cmd->add_option("--lr", t.lr, "Adam learning rate")->capture_default_str();
    train_cmd->add_option("--checkpoint-every", t.checkpoint_every, "Checkpoint cadence in steps")
        ->capture_default_str();
    train_cmd->add_flag("--poison", t.poison, "Add the poison term to the objective");
    train_cmd->add_option("--alpha", t.alpha, "Weight of the poison term")->capture_default_str();
    add_seed(train_cmd, t.seed);
  }

  EstimateCommand estimate;
  EstimateFlags estimate_flags;
  auto* estimate_cmd = app.add_subcommand("estimate", "Estimate the local volume around a checkpoint");
  add_model_options(estimate_cmd, estimate.model);
  add_estimate_options(estimate_cmd, estimate.settings, estimate_flags);
  estimate_cmd->add_option("--out", estimate.out, "JSON Lines file the run record is appended to")
      ->capture_default_str();
  estimate_cmd->add_option("--samples", estimate.samples, "Per-sample CSV (default: <out>.samples.csv)");
  estimate_cmd->add_option("--save-preconditioner", estimate.save_preconditioner,
                           "Write the preconditioner used to this sidecar file");

  SweepCommand sweep;
  EstimateFlags sweep_flags;
  auto* sweep_cmd = app.add_subcommand("sweep", "Estimate over a range of cutoffs, checkpoints, preconditioners or eps");
  add_model_options(sweep_cmd, sweep.model);
  add_estimate_options(sweep_cmd, sweep.settings, sweep_flags);
  sweep_cmd->add_option("--kind", sweep.kind, "cutoff|checkpoint|preconditioner|eps")
      ->check(CLI::IsMember({"cutoff", "checkpoint", "preconditioner", "eps"}))
      ->capture_default_str();
  sweep_cmd->add_option("--range", sweep.range,
                        "Values a,b,c or lo:hi:count (log-spaced); preconditioner names; checkpoint paths");
  sweep_cmd->add_option("--checkpoint-dir", sweep.checkpoint_dir, "Training output directory for checkpoint sweeps");
  sweep_cmd->add_option("--out", sweep.out, "Sweep CSV")->capture_default_str();
  sweep_cmd->add_option("--records", sweep.records, "Also append one run record per point to this JSON Lines file");

  std::string suite = "all";
  std::uint64_t validate_seed = 0;
  auto* validate_cmd = app.add_subcommand("validate", "Run the closed-form oracle suites");
  validate_cmd->add_option("--suite", suite, "ellipsoid|appendixA|appendixC|gdflow|all")
      ->check(CLI::IsMember({"ellipsoid", "appendixA", "appendixC", "gdflow", "all"}))
      ->capture_default_str();
  add_seed(validate_cmd, validate_seed);

  MdlCommand mdl;
  auto* mdl_cmd = app.add_subcommand("mdl", "Description length from a Lebesgue volume record");
  mdl_cmd->add_option("--checkpoint", mdl.checkpoint, "Checkpoint JSON")->required();
  mdl_cmd->add_option("--record", mdl.record, "JSON Lines file holding the volume record")->required();
  mdl_cmd->add_option("--line", mdl.line, "Record index; negative counts from the end")->capture_default_str();
  mdl_cmd->add_option("--data", mdl.data, "Labelled dataset for the data term (default: the checkpoint's train set)");
  mdl_cmd->add_option("--out", mdl.out, "Write the report JSON here as well");

  CLI11_PARSE(app, argc, argv);

  try {
    if (train_cmd->parsed()) {
      cmd_train(train, std::cout);
    } else if (estimate_cmd->parsed()) {
      apply(estimate.settings, estimate_flags);
      cmd_estimate(estimate, std::cout);
    } else if (sweep_cmd->parsed()) {
      apply(sweep.settings, sweep_flags);
      cmd_sweep(sweep, std::cout);
    } else if (validate_cmd->parsed()) {
      return cmd_validate(suite, validate_seed, std::cout) ? EXIT_SUCCESS : EXIT_FAILURE;
    } else if (mdl_cmd->parsed()) {
      cmd_mdl(mdl, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return EXIT_FAILURE;
  }
  return EXIT_SUCCESS;
}
