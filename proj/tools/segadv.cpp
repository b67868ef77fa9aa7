// Command-line front end: data generation, training, attacks, defenses and
// benchmark evaluation.

#include <CLI11.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "segadv/attacks/classifier.hpp"
#include "segadv/attacks/gradient_attacks.hpp"
#include "segadv/attacks/minimal_attacks.hpp"
#include "segadv/attacks/perturbation_io.hpp"
#include "segadv/attacks/universal.hpp"
#include "segadv/defenses/pipeline.hpp"
#include "segadv/error.hpp"
#include "segadv/harness/config.hpp"
#include "segadv/harness/dataset.hpp"
#include "segadv/harness/experiment.hpp"
#include "segadv/harness/png_io.hpp"
#include "segadv/harness/reference.hpp"
#include "segadv/metrics/metrics.hpp"
#include "segadv/segnet/checkpoint.hpp"
#include "segadv/segnet/train.hpp"

namespace {

using namespace segadv;
namespace fs = std::filesystem;

struct Globals {
  std::uint64_t seed = 0;
  std::string config;
  std::string out;
};

std::string require_out(const Globals& g, const char* what) {
  if (g.out.empty()) throw UsageError(std::string("--out is required: ") + what);
  return g.out;
}

// Keys from --config become "--key=value" arguments unless the command line
// already sets them. Underscores in keys map to dashes.
std::vector<std::string> inject_config(std::vector<std::string> args) {
  std::string path;
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) path = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) path = args[i].substr(9);
  }
  if (path.empty()) return args;
  for (const auto& entry : harness::load_config(path)) {
    std::string key = entry.key;
    std::replace(key.begin(), key.end(), '_', '-');
    const std::string flag = "--" + key;
    const bool given = std::any_of(args.begin(), args.end(), [&](const std::string& a) {
      return a == flag || a.rfind(flag + "=", 0) == 0;
    });
    if (!given) args.push_back(flag + "=" + entry.value);
  }
  return args;
}

void print_kv(const std::string& key, double value) { std::printf("%s=%.10g\n", key.c_str(), value); }

attacks::Direction direction_for(const std::string& method) {
  return (method == "llcm" || method == "illcm" || method == "ssmm" || method == "dnnm") ? attacks::Direction::kDescend
                                                                                        : attacks::Direction::kAscend;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adversarial attacks and input defenses for a toy semantic segmentation model"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Seed for every randomised step");
  app.add_option("--config", g.config, "key=value file; keys become long options");
  app.add_option("--out", g.out, "Output file or directory");

  // gen-data
  harness::ToyDatasetSpec spec = harness::reference_dataset_spec();
  bool seed_given_data = false;
  auto* gen = app.add_subcommand("gen-data", "Render the procedural toy dataset to --out");
  gen->add_option("--train-count", spec.train_count, "Training images");
  gen->add_option("--val-count", spec.val_count, "Validation images");
  gen->add_option("--height", spec.height);
  gen->add_option("--width", spec.width);
  gen->add_option("--pixel-noise", spec.scene.pixel_noise);
  gen->add_option("--color-jitter", spec.scene.color_jitter);
  gen->add_option("--global-jitter", spec.scene.global_jitter);
  gen->add_flag("--use-seed", seed_given_data, "Use --seed instead of the reference dataset seed");

  // train
  std::string data_dir, model_path;
  segnet::TrainConfig tc = harness::reference_train_config();
  bool uniform_weights = false;
  double adv_mix = 0.0, adv_eps = 4.0;
  auto* train = app.add_subcommand("train", "Train a model on a dataset and write the checkpoint to --out");
  train->add_option("--data", data_dir, "Dataset directory")->required();
  train->add_option("--epochs", tc.epochs);
  train->add_option("--batch-size", tc.batch_size);
  train->add_option("--lr", tc.learning_rate);
  train->add_flag("--uniform-weights", uniform_weights, "Disable class-balanced loss weights");
  train->add_option("--adv-mix", adv_mix, "Fraction of each batch replaced by FGSM examples");
  train->add_option("--adv-eps", adv_eps, "FGSM budget for adversarial training");

  // attack
  std::string image_path, method = "fgsm", fake_mask_path, objective = "car", mask_out;
  double eps = 8.0, cw_c = 1.0, cw_step = 0.1;
  std::optional<double> lambda;
  std::optional<std::size_t> iterations;
  std::size_t max_iters = 50, cw_steps = 200;
  auto* attack = app.add_subcommand("attack", "Attack one image and write the adversarial PNG to --out");
  attack->add_option("--model", model_path, "Checkpoint")->required();
  attack->add_option("--image", image_path, "RGB PNG")->required();
  attack->add_option("--method", method, "fgsm, ifgsm, llcm, illcm, ssmm, dnnm, deepfool or cw");
  attack->add_option("--eps", eps, "l_inf budget in gray levels");
  attack->add_option("--lambda", lambda, "Step size (default 1 for iterative, eps otherwise)");
  attack->add_option("--iterations", iterations);
  attack->add_option("--fake-mask", fake_mask_path, "Class-index PNG, target for ssmm");
  attack->add_option("--objective", objective, "Class removed by dnnm (name or id)");
  attack->add_option("--max-iters", max_iters, "deepfool iteration cap");
  attack->add_option("--cw-c", cw_c);
  attack->add_option("--cw-steps", cw_steps);
  attack->add_option("--cw-step-size", cw_step);
  attack->add_option("--mask-out", mask_out, "Also write the predicted adversarial mask (palette PNG)");

  // craft-uap
  std::size_t uap_train = 32, uap_holdout = 32, passes = 5;
  std::string norm = "inf";
  auto* uap = app.add_subcommand("craft-uap", "Craft a universal perturbation from the train split");
  uap->add_option("--model", model_path)->required();
  uap->add_option("--data", data_dir)->required();
  uap->add_option("--eps", eps)->default_val(10.0);
  uap->add_option("--norm", norm, "inf or 2");
  uap->add_option("--passes", passes);
  uap->add_option("--train-images", uap_train);
  uap->add_option("--holdout-images", uap_holdout);

  // fff
  std::size_t fff_steps = 100;
  double fff_step = 2e5;
  auto* fff = app.add_subcommand("fff", "Craft a data-free universal perturbation");
  fff->add_option("--model", model_path)->required();
  fff->add_option("--eps", eps)->default_val(10.0);
  fff->add_option("--steps", fff_steps);
  fff->add_option("--step-size", fff_step);

  // build-quilt-db
  std::size_t db_count = defenses::kDefaultPatchCount, patch_size = defenses::kDefaultPatchSize;
  auto* qdb = app.add_subcommand("build-quilt-db", "Sample clean training patches for quilting");
  qdb->add_option("--data", data_dir)->required();
  qdb->add_option("--count", db_count);
  qdb->add_option("--patch-size", patch_size);

  // defend
  std::string pipeline_text = "nlm,quilt", quilt_db_path, nlm_h = "auto";
  std::size_t nlm_window = 9, nlm_patch = 7;
  double nlm_a = 1.0;
  std::string perturbation_path;
  auto* defend = app.add_subcommand("defend", "Apply a defense pipeline to one image");
  defend->add_option("--image", image_path)->required();
  defend->add_option("--pipeline", pipeline_text, "Stages from {nlm, quilt}, comma separated");
  defend->add_option("--nlm-h", nlm_h, "Filtering strength or 'auto' (2.15 * sigma estimate)");
  defend->add_option("--nlm-window", nlm_window);
  defend->add_option("--nlm-patch", nlm_patch);
  defend->add_option("--nlm-a", nlm_a);
  defend->add_option("--quilt-db", quilt_db_path, "Patch database file");

  // eval
  harness::ExperimentConfig ec;
  std::string attack_name = "llcm", epsilons = "2,4,8,16", variants, split = "val", ignore;
  std::optional<double> eval_lambda;
  std::size_t workers = 1, max_images = 0, panels = 3;
  bool no_wallclock = false;
  auto* eval = app.add_subcommand("eval", "Run an attack/defense benchmark and write results.csv to --out");
  eval->add_option("--model", model_path)->required();
  eval->add_option("--data", data_dir)->required();
  eval->add_option("--attack", attack_name, "none, fgsm, ifgsm, llcm, illcm, ssmm, dnnm, uap, fff or noise");
  eval->add_option("--epsilons", epsilons, "Strictly increasing comma list");
  eval->add_option("--lambda", eval_lambda);
  eval->add_option("--iterations", iterations);
  eval->add_option("--objective", objective);
  eval->add_option("--pipeline", variants, "Defense variants separated by ';', e.g. 'nlm;quilt;nlm,quilt'");
  eval->add_option("--nlm-h", nlm_h);
  eval->add_option("--nlm-window", nlm_window);
  eval->add_option("--quilt-db", quilt_db_path);
  eval->add_option("--quilt-db-count", db_count);
  eval->add_option("--split", split, "train or val");
  eval->add_option("--max-images", max_images);
  eval->add_option("--workers", workers);
  eval->add_option("--panels", panels);
  eval->add_option("--fff-steps", fff_steps);
  eval->add_option("--fff-step-size", fff_step);
  eval->add_option("--uap-passes", passes);
  eval->add_option("--uap-train-images", uap_train);
  eval->add_option("--ignore-class", ignore);
  eval->add_flag("--no-wallclock", no_wallclock, "Write 0 in wallclock_ms for byte-stable CSVs");

  // report
  std::string results_dir;
  auto* report = app.add_subcommand("report", "Print the aggregate rows of an eval output directory");
  report->add_option("--results", results_dir, "Directory holding results.csv")->required();

  std::vector<std::string> args;
  for (int i = argc - 1; i >= 1; --i) args.emplace_back(argv[i]);
  try {
    std::vector<std::string> forward(args.rbegin(), args.rend());
    forward = inject_config(forward);
    std::vector<std::string> reversed(forward.rbegin(), forward.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  } catch (const segadv::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const segadv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  }

  auto nlm_config = [&] {
    defenses::NlmConfig nc;
    nc.window_size = nlm_window;
    nc.patch_size = nlm_patch;
    nc.gaussian_a = nlm_a;
    if (nlm_h != "auto") {
      try {
        nc.filtering_h = std::stod(nlm_h);
      } catch (const std::exception&) {
        throw UsageError("--nlm-h expects a number or 'auto'");
      }
    }
    nc.validate();
    return nc;
  };

  try {
    if (gen->parsed()) {
      if (seed_given_data) spec.seed = g.seed;
      harness::generate_toy_dataset(spec, require_out(g, "dataset directory"));
      std::printf("wrote %zu train and %zu val scenes to %s\n", spec.train_count, spec.val_count, g.out.c_str());
    } else if (train->parsed()) {
      const harness::Dataset data = harness::load_dataset(data_dir);
      if (!uniform_weights) tc.class_weights = segnet::balanced_class_weights(data.train, harness::kNumToyClasses);
      if (g.seed != 0) tc.seed = g.seed;
      const auto init = segnet::SegModel::he_initialized(segnet::Architecture{}, harness::kReferenceInitSeed + g.seed);
      const segnet::TrainResult result =
          adv_mix > 0.0 ? segnet::adversarial_train(init, data.train, tc, attacks::fgsm_adversary(adv_eps), adv_mix)
                        : segnet::train(init, data.train, tc);
      segnet::save_checkpoint(require_out(g, "checkpoint path"), result.model);
      for (std::size_t e = 0; e < result.epoch_losses.size(); ++e) {
        std::printf("epoch %zu loss %.6f\n", e + 1, result.epoch_losses[e]);
      }
      const auto clean = harness::evaluate_clean(result.model, data.val, std::nullopt);
      print_kv("val_miou", clean.miou);
    } else if (attack->parsed()) {
      const segnet::SegModel model = segnet::load_checkpoint(model_path);
      const Image image = harness::read_png_rgb(image_path);
      Image adversarial = image;
      if (method == "deepfool" || method == "cw") {
        attacks::SegModelClassifier classifier(model);
        const tensor::Tensor x = to_tensor(image);
        tensor::Tensor r;
        bool success = false;
        int from = 0, to = 0;
        if (method == "deepfool") {
          const auto res = attacks::minimal_perturbation(classifier, x, max_iters, attacks::kDefaultOvershoot);
          r = res.perturbation.values;
          success = res.success;
          from = res.original_label;
          to = res.final_label;
        } else {
          attacks::CwOptions opt;
          opt.c = cw_c;
          opt.steps = cw_steps;
          opt.step_size = cw_step;
          const auto res = attacks::cw_attack(classifier, x, opt);
          r = res.perturbation.values;
          success = res.success;
          from = res.original_label;
          to = res.final_label;
        }
        adversarial = attacks::apply_perturbation(image, r);
        print_kv("l2_norm", attacks::norm_of(r, attacks::Norm::kL2));
        std::printf("success=%d\noriginal_label=%d\nfinal_label=%d\n", success ? 1 : 0, from, to);
      } else {
        attacks::AttackConfig ac;
        ac.epsilon = eps;
        ac.lambda = lambda ? *lambda
                           : std::min(eps, (method == "fgsm" || method == "llcm") ? eps : 1.0);
        ac.iterations = iterations;
        ac.seed = g.seed;
        ac.direction = direction_for(method);
        if (method == "fgsm") {
          adversarial = attacks::fgsm(model, image, ac).adversarial;
        } else if (method == "llcm") {
          adversarial = attacks::llcm(model, image, ac).adversarial;
        } else if (method == "ifgsm") {
          adversarial = attacks::iterative_attack(model, image, ac, attacks::AttackTarget::own_prediction()).adversarial;
        } else if (method == "illcm") {
          adversarial = attacks::iterative_attack(model, image, ac, attacks::AttackTarget::least_likely()).adversarial;
        } else if (method == "ssmm") {
          if (fake_mask_path.empty()) throw UsageError("ssmm needs --fake-mask");
          adversarial = attacks::ssmm_attack(model, image, harness::read_mask_png(fake_mask_path), ac).adversarial;
        } else if (method == "dnnm") {
          adversarial = attacks::dnnm_attack(model, image, harness::parse_class(objective), ac).attack.adversarial;
        } else {
          throw UsageError("unknown attack method '" + method + "'");
        }
      }
      harness::write_png(require_out(g, "adversarial PNG path"), adversarial);
      const tensor::Tensor diff = difference(adversarial, image);
      print_kv("linf", attacks::norm_of(diff, attacks::Norm::kInf));
      print_kv("l2", attacks::norm_of(diff, attacks::Norm::kL2));
      if (!mask_out.empty()) {
        harness::write_png(mask_out, harness::render_mask(segnet::predict_mask(model, to_tensor(adversarial))));
      }
    } else if (uap->parsed()) {
      const segnet::SegModel model = segnet::load_checkpoint(model_path);
      const harness::Dataset data = harness::load_dataset(data_dir);
      std::vector<Image> t, v;
      for (std::size_t i = 0; i < std::min(uap_train, data.train.size()); ++i) t.push_back(data.train[i].image);
      for (std::size_t i = 0; i < std::min(uap_holdout, data.val.size()); ++i) v.push_back(data.val[i].image);
      attacks::UapConfig uc;
      uc.epsilon = eps;
      uc.norm = attacks::parse_norm(norm);
      uc.passes = passes;
      const auto res = attacks::craft_uap(model, t, v, uc);
      attacks::save_perturbation(require_out(g, "perturbation path"), res.perturbation);
      print_kv("fooled_train", res.fooled_fraction_train);
      print_kv("fooled_holdout", res.fooled_fraction_holdout);
    } else if (fff->parsed()) {
      const segnet::SegModel model = segnet::load_checkpoint(model_path);
      attacks::FffConfig fc;
      fc.epsilon = eps;
      fc.steps = fff_steps;
      fc.step_size = fff_step;
      fc.seed = g.seed;
      const auto res = attacks::fff_uap(model, fc);
      attacks::save_perturbation(require_out(g, "perturbation path"), res.perturbation);
      print_kv("objective_start", res.loss_trace.front());
      print_kv("objective_end", res.loss_trace.back());
    } else if (qdb->parsed()) {
      const harness::Dataset data = harness::load_dataset(data_dir);
      const auto db = defenses::build_patch_db(harness::images_of(data.train), patch_size, db_count, g.seed);
      defenses::save_patch_db(require_out(g, "patch database path"), db);
      std::printf("wrote %zu patches of %zux%zu\n", db.count(), db.patch_h, db.patch_w);
    } else if (defend->parsed()) {
      const Image image = harness::read_png_rgb(image_path);
      const defenses::Pipeline pipeline = defenses::parse_pipeline(pipeline_text);
      defenses::PatchDatabase db;
      std::optional<defenses::PatchIndex> index;
      if (std::find(pipeline.begin(), pipeline.end(), defenses::DefenseStage::kQuilt) != pipeline.end()) {
        if (quilt_db_path.empty()) throw UsageError("the quilt stage needs --quilt-db");
        db = defenses::load_patch_db(quilt_db_path);
        index.emplace(db);
      }
      const defenses::DefenseContext ctx{nlm_config(), index ? &*index : nullptr};
      harness::write_png(require_out(g, "defended PNG path"), defenses::defend(image, pipeline, ctx));
    } else if (eval->parsed()) {
      ec.checkpoint = model_path;
      ec.dataset = data_dir;
      ec.output_dir = require_out(g, "report directory");
      ec.seed = g.seed;
      harness::apply_setting(ec, "attack", attack_name);
      harness::apply_setting(ec, "epsilons", epsilons);
      harness::apply_setting(ec, "split", split);
      harness::apply_setting(ec, "objective", objective);
      if (!variants.empty()) harness::apply_setting(ec, "defenses", variants);
      if (!ignore.empty()) harness::apply_setting(ec, "ignore_class", ignore);
      ec.lambda = eval_lambda;
      ec.iterations = iterations;
      ec.nlm = nlm_config();
      ec.quilt_db = quilt_db_path;
      ec.quilt_db_count = db_count;
      ec.max_images = max_images;
      ec.workers = workers;
      ec.panels = panels;
      ec.fff_steps = fff_steps;
      ec.fff_step_size = fff_step;
      ec.uap_passes = passes;
      ec.uap_train_images = uap_train;
      ec.record_wallclock = !no_wallclock;
      const harness::ResultTable table = harness::run_experiment(ec);
      harness::emit_report(table, ec.output_dir);
      for (const auto& row : table.rows) {
        if (row.image_id != "ALL") continue;
        std::printf("%s eps=%g defense=%s miou_clean=%.4f miou_adv=%.4f miou_def=%.4f Q=%.4f\n", row.attack.c_str(),
                    row.epsilon, row.defense.c_str(), row.miou_clean, row.miou_adv, row.miou_def, row.q);
      }
    } else if (report->parsed()) {
      std::ifstream in(fs::path(results_dir) / "results.csv");
      if (!in) throw DataError("cannot read " + (fs::path(results_dir) / "results.csv").string());
      std::string line;
      std::getline(in, line);
      if (line != harness::kResultsHeader) throw DataError("results.csv has an unexpected header");
      std::printf("%-8s %-8s %-12s %10s %10s %10s %8s\n", "attack", "epsilon", "defense", "miou_clean", "miou_adv",
                  "miou_def", "Q");
      while (std::getline(in, line)) {
        std::vector<std::string> f;
        std::stringstream ss(line);
        for (std::string cell; std::getline(ss, cell, ',');) f.push_back(cell);
        if (f.size() != 11) throw DataError("malformed results.csv row: " + line);
        if (f[1] != "ALL") continue;
        std::printf("%-8s %-8s %-12s %10s %10s %10s %8s\n", f[2].c_str(), f[3].c_str(), f[5].c_str(), f[6].c_str(),
                    f[7].c_str(), f[8].c_str(), f[9].c_str());
      }
    }
  } catch (const segadv::UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const segadv::DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const segadv::NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
