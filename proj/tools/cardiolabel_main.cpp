#include <CLI11.hpp>

#include <cstdint>
#include <iostream>
#include <string>

#include "cardiolabel/commands.hpp"
#include "cardiolabel/config.hpp"

namespace {

// Shared --config loader with the common override flags.
struct ConfigArgs {
  std::string config_path;
  std::string out_dir;
  std::string manifest;
  std::string regime;
  std::uint64_t seed = 0;
  bool seed_set = false;

  void attach(CLI::App* app) {
    app->add_option("--config", config_path, "run config file")->required();
    app->add_option("--out", out_dir, "override out_dir");
    app->add_option("--manifest", manifest, "override manifest path");
    app->add_option("--regime", regime, "override regime (position_dependent | position_independent)");
    app->add_option("--seed", seed, "override the root seed")->each([this](const std::string&) { seed_set = true; });
  }

  cardiolabel::RunConfig load() const {
    auto cfg = cardiolabel::load_run_config(config_path);
    if (!out_dir.empty()) cfg.out_dir = out_dir;
    if (!manifest.empty()) cfg.manifest = manifest;
    if (!regime.empty()) cfg.regime = cardiolabel::regime_from_name(regime);
    if (seed_set) cfg.seed = seed;
    return cfg;
  }
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cardiolabel: heart-sound multilabel pipeline"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_spec_path, synth_out;
  std::uint64_t synth_seed = 0;
  synth->add_option("--spec", synth_spec_path, "synth spec file")->required();
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");

  ConfigArgs prepare_args, train_args, eval_args, predict_args, saliency_args;
  auto* prepare = app.add_subcommand("prepare", "extract, window, and split the dataset");
  prepare_args.attach(prepare);
  auto* train = app.add_subcommand("train", "train the deployment model(s)");
  train_args.attach(train);
  auto* eval = app.add_subcommand("eval", "k-fold cross-validation plus the holdout row");
  eval_args.attach(eval);

  auto* predict = app.add_subcommand("predict", "patient-level mode-vote prediction");
  std::string predict_patient;
  predict_args.attach(predict);
  predict->add_option("patient_id", predict_patient, "patient to predict")->required();

  auto* saliency = app.add_subcommand("saliency", "input-gradient saliency maps for one patient");
  std::string saliency_patient, saliency_group = "timing";
  saliency_args.attach(saliency);
  saliency->add_option("patient_id", saliency_patient, "patient to explain")->required();
  saliency->add_option("--group", saliency_group, "label group to explain (default timing)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (synth->parsed()) {
      cardiolabel::cmd_synth(cardiolabel::load_synth_spec(synth_spec_path), synth_seed, synth_out, std::cout);
    } else if (prepare->parsed()) {
      cardiolabel::cmd_prepare(prepare_args.load(), std::cout);
    } else if (train->parsed()) {
      cardiolabel::cmd_train(train_args.load(), std::cout);
    } else if (eval->parsed()) {
      cardiolabel::cmd_eval(eval_args.load(), std::cout);
    } else if (predict->parsed()) {
      cardiolabel::cmd_predict(predict_args.load(), predict_patient, std::cout);
    } else if (saliency->parsed()) {
      cardiolabel::cmd_saliency(saliency_args.load(), saliency_patient, saliency_group, std::cout);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
