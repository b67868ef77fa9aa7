#include "segadv/harness/experiment.hpp"

#include <algorithm>
#include <chrono>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>

#include "segadv/attacks/gradient_attacks.hpp"
#include "segadv/error.hpp"
#include "segadv/harness/parallel.hpp"
#include "segadv/harness/png_io.hpp"
#include "segadv/segnet/checkpoint.hpp"

namespace segadv::harness {

namespace fs = std::filesystem;

namespace {

struct AttackName {
  AttackKind kind;
  std::string_view name;
};
constexpr AttackName kAttackNames[] = {
    {AttackKind::kNone, "none"},          {AttackKind::kFgsm, "fgsm"},
    {AttackKind::kIterativeFgsm, "ifgsm"}, {AttackKind::kLlcm, "llcm"},
    {AttackKind::kIterativeLlcm, "illcm"}, {AttackKind::kSsmm, "ssmm"},
    {AttackKind::kDnnm, "dnnm"},          {AttackKind::kUap, "uap"},
    {AttackKind::kFff, "fff"},            {AttackKind::kNoise, "noise"},
};

double parse_real(std::string_view key, std::string_view text) {
  double v = 0.0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size() || !std::isfinite(v)) {
    throw UsageError("setting '" + std::string(key) + "': '" + std::string(text) + "' is not a number");
  }
  return v;
}

std::size_t parse_count(std::string_view key, std::string_view text) {
  std::size_t v = 0;
  const auto [end, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || end != text.data() + text.size()) {
    throw UsageError("setting '" + std::string(key) + "': '" + std::string(text) + "' is not a count");
  }
  return v;
}

bool parse_bool(std::string_view key, std::string_view text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") return true;
  if (text == "false" || text == "0" || text == "no" || text == "off") return false;
  throw UsageError("setting '" + std::string(key) + "': expected true or false");
}

std::vector<std::string_view> split_list(std::string_view text, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t at = text.find(sep, start);
    std::string_view item = text.substr(start, at == std::string_view::npos ? std::string_view::npos : at - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (!item.empty()) out.push_back(item);
    if (at == std::string_view::npos) break;
    start = at + 1;
  }
  return out;
}

// Re-raises the in-flight exception with its type kept and a location prefix.
[[noreturn]] void rethrow_with_context(const std::string& where) {
  try {
    throw;
  } catch (const ShapeError& e) {
    throw ShapeError(where + ": " + e.what());
  } catch (const UsageError& e) {
    throw UsageError(where + ": " + e.what());
  } catch (const DataError& e) {
    throw DataError(where + ": " + e.what());
  } catch (const NumericalError& e) {
    throw NumericalError(where + ": " + e.what());
  } catch (const std::exception& e) {
    throw Error(where + ": " + e.what());
  }
}

double elapsed_ms(std::chrono::steady_clock::time_point since) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - since).count();
}

std::string format_real(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.10g", v);
  return buf;
}

double safe_ratio(double adv, double clean) { return clean > 0.0 ? metrics::miou_ratio(adv, clean) : std::nan(""); }

Image mask_panel(const LabelMask& a, const LabelMask& b, const LabelMask& c) {
  constexpr std::size_t kGap = 2;
  const std::size_t h = a.height, w = a.width;
  Image out(h, 3 * w + 2 * kGap, 3, 255);
  const LabelMask* masks[3] = {&a, &b, &c};
  for (std::size_t k = 0; k < 3; ++k) {
    const Image rgb = render_mask(*masks[k]);
    for (std::size_t y = 0; y < h; ++y) {
      std::copy_n(rgb.data.begin() + static_cast<std::ptrdiff_t>(rgb.index(y, 0, 0)), w * 3,
                  out.data.begin() + static_cast<std::ptrdiff_t>(out.index(y, k * (w + kGap), 0)));
    }
  }
  return out;
}

std::string epsilon_tag(double eps) {
  std::string s = format_real(eps);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

}  // namespace

AttackKind parse_attack(std::string_view name) {
  for (const auto& a : kAttackNames) {
    if (a.name == name) return a.kind;
  }
  throw UsageError("unknown attack '" + std::string(name) +
                   "' (none, fgsm, ifgsm, llcm, illcm, ssmm, dnnm, uap, fff, noise)");
}

std::string_view to_string(AttackKind kind) {
  for (const auto& a : kAttackNames) {
    if (a.kind == kind) return a.name;
  }
  return "unknown";
}

bool is_iterative(AttackKind kind) {
  return kind == AttackKind::kIterativeFgsm || kind == AttackKind::kIterativeLlcm || kind == AttackKind::kSsmm ||
         kind == AttackKind::kDnnm;
}

bool is_universal(AttackKind kind) {
  return kind == AttackKind::kUap || kind == AttackKind::kFff || kind == AttackKind::kNoise;
}

double resolve_lambda(AttackKind kind, double epsilon, std::optional<double> configured) {
  if (kind == AttackKind::kNone || is_universal(kind)) return 0.0;
  const double policy = configured ? *configured : (is_iterative(kind) ? 1.0 : epsilon);
  return std::min(policy, epsilon);
}

void ExperimentConfig::validate() const {
  if (epsilons.empty()) throw UsageError("epsilon sweep is empty");
  for (std::size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] >= 0.0)) throw UsageError("epsilon values must be >= 0");
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) throw UsageError("epsilon sweep must be strictly increasing");
  }
  if (lambda && !(*lambda > 0.0)) throw UsageError("lambda must be positive");
  if (iterations && *iterations == 0) throw UsageError("iterations must be >= 1");
  if (workers == 0) throw UsageError("workers must be >= 1");
  if (objective_class < 0) throw UsageError("objective class must be a class id");
  if (quilt_db_count == 0) throw UsageError("quilt_db_count must be >= 1");
  if (uap_train_images == 0) throw UsageError("uap_train_images must be >= 1");
  for (const auto& p : defenses) {
    if (p.empty()) throw UsageError("empty defense pipeline in the variant list");
  }
  nlm.validate();
}

void apply_setting(ExperimentConfig& c, std::string_view key, std::string_view value) {
  if (key == "checkpoint" || key == "model") {
    c.checkpoint = std::string(value);
  } else if (key == "dataset" || key == "data") {
    c.dataset = std::string(value);
  } else if (key == "out" || key == "output_dir") {
    c.output_dir = std::string(value);
  } else if (key == "split") {
    if (value == "train") {
      c.split = Split::kTrain;
    } else if (value == "val") {
      c.split = Split::kVal;
    } else {
      throw UsageError("split must be train or val");
    }
  } else if (key == "attack") {
    c.attack = parse_attack(value);
  } else if (key == "epsilons" || key == "epsilon") {
    c.epsilons.clear();
    for (auto item : split_list(value, ',')) c.epsilons.push_back(parse_real(key, item));
  } else if (key == "lambda") {
    c.lambda = parse_real(key, value);
  } else if (key == "iterations") {
    c.iterations = parse_count(key, value);
  } else if (key == "objective_class" || key == "objective") {
    c.objective_class = parse_class(value);
  } else if (key == "defenses" || key == "pipeline") {
    // Variants separated by ';', stages inside a variant by ','.
    c.defenses.clear();
    for (auto item : split_list(value, ';')) {
      if (item != "none") c.defenses.push_back(defenses::parse_pipeline(item));
    }
  } else if (key == "nlm_h") {
    if (value == "auto") {
      c.nlm.filtering_h.reset();
    } else {
      c.nlm.filtering_h = parse_real(key, value);
    }
  } else if (key == "nlm_window") {
    c.nlm.window_size = parse_count(key, value);
  } else if (key == "nlm_patch") {
    c.nlm.patch_size = parse_count(key, value);
  } else if (key == "nlm_a") {
    c.nlm.gaussian_a = parse_real(key, value);
  } else if (key == "quilt_db") {
    c.quilt_db = std::string(value);
  } else if (key == "quilt_db_count") {
    c.quilt_db_count = parse_count(key, value);
  } else if (key == "uap_train_images") {
    c.uap_train_images = parse_count(key, value);
  } else if (key == "uap_passes") {
    c.uap_passes = parse_count(key, value);
  } else if (key == "fff_steps") {
    c.fff_steps = parse_count(key, value);
  } else if (key == "fff_step_size") {
    c.fff_step_size = parse_real(key, value);
  } else if (key == "max_images") {
    c.max_images = parse_count(key, value);
  } else if (key == "workers") {
    c.workers = parse_count(key, value);
  } else if (key == "seed") {
    c.seed = parse_count(key, value);
  } else if (key == "ignore_class") {
    if (value == "none") {
      c.ignore_class.reset();
    } else {
      c.ignore_class = parse_class(value);
    }
  } else if (key == "record_wallclock") {
    c.record_wallclock = parse_bool(key, value);
  } else if (key == "panels") {
    c.panels = parse_count(key, value);
  } else {
    throw UsageError("unknown experiment setting '" + std::string(key) + "'");
  }
}

ExperimentConfig experiment_from_config(const std::vector<ConfigEntry>& entries) {
  ExperimentConfig c;
  for (const auto& e : entries) {
    try {
      apply_setting(c, e.key, e.value);
    } catch (...) {
      rethrow_with_context("config line " + std::to_string(e.line));
    }
  }
  return c;
}

CleanEvaluation evaluate_clean(const segnet::SegModel& model, const std::vector<segnet::Sample>& samples,
                               std::optional<int> ignore_class, std::size_t workers) {
  const std::size_t n_classes = model.architecture().num_classes;
  CleanEvaluation out;
  out.predictions.resize(samples.size());
  out.per_image.assign(samples.size(), metrics::ConfusionMatrix(n_classes));
  parallel_for(samples.size(), workers, [&](std::size_t i) {
    out.predictions[i] = segnet::predict_mask(model, to_tensor(samples[i].image));
    metrics::accumulate(out.per_image[i], out.predictions[i], samples[i].mask, ignore_class);
  });
  out.total = metrics::ConfusionMatrix(n_classes);
  for (const auto& cm : out.per_image) out.total += cm;
  out.miou = metrics::miou(out.total);
  return out;
}

std::shared_ptr<const CleanEvaluation> CleanEvalCache::get(const std::string& key, const segnet::SegModel& model,
                                                           const std::vector<segnet::Sample>& samples,
                                                           std::optional<int> ignore_class, std::size_t workers) {
  std::lock_guard lock(mutex_);
  if (auto it = entries_.find(key); it != entries_.end()) return it->second;
  auto eval = std::make_shared<const CleanEvaluation>(evaluate_clean(model, samples, ignore_class, workers));
  ++evaluations_;
  entries_.emplace(key, eval);
  return eval;
}

ResultTable run_experiment(const ExperimentConfig& config, const ExperimentInputs& inputs, CleanEvalCache* cache) {
  config.validate();
  const segnet::SegModel& model = inputs.model;
  const std::size_t n_classes = model.architecture().num_classes;
  if (config.objective_class >= static_cast<int>(n_classes)) throw UsageError("objective class out of range");

  std::vector<segnet::Sample> samples = inputs.data.split(config.split);
  std::vector<std::string> ids = inputs.data.ids(config.split);
  if (config.max_images > 0 && samples.size() > config.max_images) {
    samples.resize(config.max_images);
    ids.resize(config.max_images);
  }
  const std::size_t n = samples.size();
  if (n == 0) throw UsageError("no images in the " + std::string(to_string(config.split)) + " split");
  const std::string split_name(to_string(config.split));

  CleanEvalCache local_cache;
  CleanEvalCache& clean_cache = cache ? *cache : local_cache;
  std::string clean_key = inputs.model_key + "|" + split_name + "|" + std::to_string(n);
  if (config.ignore_class) clean_key += "|ignore" + std::to_string(*config.ignore_class);
  const auto clean = clean_cache.get(clean_key, model, samples, config.ignore_class, config.workers);

  // Defense variants; the undefended result is always reported.
  std::vector<defenses::Pipeline> variants{defenses::Pipeline{}};
  variants.insert(variants.end(), config.defenses.begin(), config.defenses.end());
  const bool needs_quilt = std::any_of(config.defenses.begin(), config.defenses.end(), [](const auto& p) {
    return std::find(p.begin(), p.end(), defenses::DefenseStage::kQuilt) != p.end();
  });
  defenses::PatchDatabase owned_db;
  std::unique_ptr<defenses::PatchIndex> quilt_index;
  if (needs_quilt) {
    const defenses::PatchDatabase* db = inputs.quilt_db;
    if (!db) {
      if (!config.quilt_db.empty()) {
        owned_db = defenses::load_patch_db(config.quilt_db);
      } else {
        if (inputs.data.train.empty()) throw UsageError("quilting needs a patch database or a train split");
        owned_db = defenses::build_patch_db(images_of(inputs.data.train), defenses::kDefaultPatchSize,
                                            config.quilt_db_count, config.seed);
      }
      db = &owned_db;
    }
    quilt_index = std::make_unique<defenses::PatchIndex>(*db);
  }
  defenses::DefenseContext def_ctx{config.nlm, quilt_index.get()};

  const std::vector<Image> images = [&] {
    std::vector<Image> v;
    for (const auto& s : samples) v.push_back(s.image);
    return v;
  }();

  ResultTable table;
  for (const double eps : config.epsilons) {
    const double lambda = resolve_lambda(config.attack, eps, config.lambda);
    const std::string attack_name(to_string(config.attack));
    const bool attacked = config.attack != AttackKind::kNone && eps > 0.0;

    // Universal perturbations are crafted once per budget.
    std::optional<attacks::Perturbation> universal;
    double craft_ms = 0.0;
    if (attacked && is_universal(config.attack)) {
      const auto t0 = std::chrono::steady_clock::now();
      const std::string where = "stage craft-" + attack_name + ", epsilon " + format_real(eps);
      try {
        if (config.attack == AttackKind::kUap) {
          std::vector<Image> train_images;
          for (std::size_t i = 0; i < std::min(config.uap_train_images, inputs.data.train.size()); ++i) {
            train_images.push_back(inputs.data.train[i].image);
          }
          attacks::UapConfig uc;
          uc.epsilon = eps;
          uc.passes = config.uap_passes;
          universal = attacks::craft_uap(model, train_images, images, uc).perturbation;
        } else if (config.attack == AttackKind::kFff) {
          attacks::FffConfig fc;
          fc.epsilon = eps;
          fc.steps = config.fff_steps;
          fc.step_size = config.fff_step_size;
          fc.seed = config.seed;
          universal = attacks::fff_uap(model, fc).perturbation;
        } else {
          universal = attacks::random_uniform_perturbation(images.front().data.empty()
                                                               ? tensor::Shape{}
                                                               : tensor::Shape{images.front().height,
                                                                               images.front().width,
                                                                               images.front().channels},
                                                           eps, config.seed);
        }
      } catch (...) {
        rethrow_with_context(where);
      }
      craft_ms = elapsed_ms(t0);
    }

    struct ImageResult {
      LabelMask adv_pred;
      metrics::ConfusionMatrix adv_cm{1};
      std::vector<LabelMask> def_pred;
      std::vector<metrics::ConfusionMatrix> def_cm;
      double attack_ms = 0.0;
      std::vector<double> defense_ms;
    };
    std::vector<ImageResult> results(n);

    parallel_for(n, config.workers, [&](std::size_t i) {
      std::string stage = attack_name;
      try {
        ImageResult& r = results[i];
        const auto t0 = std::chrono::steady_clock::now();
        Image adversarial = images[i];
        if (attacked) {
          attacks::AttackConfig ac;
          ac.lambda = lambda;
          ac.epsilon = eps;
          ac.iterations = config.iterations;
          ac.seed = config.seed;
          switch (config.attack) {
            case AttackKind::kFgsm:
              adversarial = attacks::fgsm(model, images[i], ac).adversarial;
              break;
            case AttackKind::kIterativeFgsm:
              adversarial =
                  attacks::iterative_attack(model, images[i], ac, attacks::AttackTarget::own_prediction()).adversarial;
              break;
            case AttackKind::kLlcm:
              ac.direction = attacks::Direction::kDescend;
              adversarial = attacks::llcm(model, images[i], ac).adversarial;
              break;
            case AttackKind::kIterativeLlcm:
              ac.direction = attacks::Direction::kDescend;
              adversarial =
                  attacks::iterative_attack(model, images[i], ac, attacks::AttackTarget::least_likely()).adversarial;
              break;
            case AttackKind::kSsmm:
              ac.direction = attacks::Direction::kDescend;
              adversarial = attacks::ssmm_attack(model, images[i], samples[(i + 1) % n].mask, ac).adversarial;
              break;
            case AttackKind::kDnnm:
              ac.direction = attacks::Direction::kDescend;
              adversarial = attacks::dnnm_attack(model, images[i], config.objective_class, ac).attack.adversarial;
              break;
            case AttackKind::kUap:
            case AttackKind::kFff:
            case AttackKind::kNoise:
              adversarial = attacks::apply_perturbation(images[i], *universal);
              break;
            case AttackKind::kNone:
              break;
          }
          if (linf_distance(adversarial, images[i]) > static_cast<int>(std::floor(eps))) {
            throw NumericalError("adversarial image exceeds the l_inf budget");
          }
        }
        stage = "evaluate";
        r.adv_pred = segnet::predict_mask(model, to_tensor(adversarial));
        r.adv_cm = metrics::ConfusionMatrix(n_classes);
        metrics::accumulate(r.adv_cm, r.adv_pred, samples[i].mask, config.ignore_class);
        r.attack_ms = elapsed_ms(t0);
        for (const auto& pipeline : variants) {
          const auto td = std::chrono::steady_clock::now();
          if (pipeline.empty()) {
            r.def_pred.push_back(r.adv_pred);
            r.def_cm.push_back(r.adv_cm);
          } else {
            stage = "defend-" + defenses::to_string(pipeline);
            const Image defended = defenses::defend(adversarial, pipeline, def_ctx);
            stage = "evaluate-" + defenses::to_string(pipeline);
            r.def_pred.push_back(segnet::predict_mask(model, to_tensor(defended)));
            r.def_cm.emplace_back(n_classes);
            metrics::accumulate(r.def_cm.back(), r.def_pred.back(), samples[i].mask, config.ignore_class);
          }
          r.defense_ms.push_back(elapsed_ms(td));
        }
      } catch (...) {
        rethrow_with_context("image " + ids[i] + ", stage " + stage);
      }
    });

    for (std::size_t v = 0; v < variants.size(); ++v) {
      const std::string defense_name = defenses::to_string(variants[v]);
      metrics::ConfusionMatrix adv_total(n_classes), def_total(n_classes);
      double total_ms = craft_ms;
      for (std::size_t i = 0; i < n; ++i) {
        const ImageResult& r = results[i];
        ResultRow row;
        row.split = split_name;
        row.image_id = ids[i];
        row.attack = attack_name;
        row.epsilon = eps;
        row.lambda = lambda;
        row.defense = defense_name;
        row.miou_clean = metrics::miou(clean->per_image[i]);
        row.miou_adv = metrics::miou(r.adv_cm);
        row.miou_def = metrics::miou(r.def_cm[v]);
        row.q = safe_ratio(row.miou_adv, row.miou_clean);
        const double ms = r.attack_ms + (v == 0 ? 0.0 : r.defense_ms[v]);
        row.wallclock_ms = config.record_wallclock ? ms : 0.0;
        total_ms += ms;
        adv_total += r.adv_cm;
        def_total += r.def_cm[v];
        table.rows.push_back(std::move(row));
      }
      ResultRow all;
      all.split = split_name;
      all.image_id = "ALL";
      all.attack = attack_name;
      all.epsilon = eps;
      all.lambda = lambda;
      all.defense = defense_name;
      all.miou_clean = clean->miou;
      all.miou_adv = metrics::miou(adv_total);
      all.miou_def = metrics::miou(def_total);
      all.q = safe_ratio(all.miou_adv, all.miou_clean);
      all.wallclock_ms = config.record_wallclock ? total_ms : 0.0;
      table.rows.push_back(std::move(all));

      for (std::size_t i = 0; i < std::min(config.panels, n); ++i) {
        table.panels.push_back({attack_name + "_eps" + epsilon_tag(eps) + "_" + defense_name + "_" + ids[i],
                                mask_panel(clean->predictions[i], results[i].adv_pred, results[i].def_pred[v])});
      }
    }
  }
  return table;
}

ResultTable run_experiment(const ExperimentConfig& config) {
  if (config.checkpoint.empty()) throw UsageError("experiment needs a model checkpoint");
  if (config.dataset.empty()) throw UsageError("experiment needs a dataset directory");
  if (!fs::exists(config.checkpoint)) throw DataError("checkpoint not found: " + config.checkpoint.string());
  if (!fs::exists(config.dataset)) throw DataError("dataset not found: " + config.dataset.string());
  const segnet::SegModel model = segnet::load_checkpoint(config.checkpoint);
  const Dataset data = load_dataset(config.dataset, model.architecture().num_classes);
  return run_experiment(config, ExperimentInputs{model, data, fs::absolute(config.checkpoint).string()});
}

std::string format_results_csv(const ResultTable& table) {
  std::string out(kResultsHeader);
  out += '\n';
  for (const auto& r : table.rows) {
    out += r.split + ',' + r.image_id + ',' + r.attack + ',' + format_real(r.epsilon) + ',' + format_real(r.lambda) +
           ',' + r.defense + ',' + format_real(r.miou_clean) + ',' + format_real(r.miou_adv) + ',' +
           format_real(r.miou_def) + ',' + format_real(r.q) + ',' + format_real(r.wallclock_ms) + '\n';
  }
  return out;
}

std::string format_summary_csv(const ResultTable& table) {
  struct Block {
    std::string attack, defense;
    double epsilon = 0, lambda = 0;
    std::size_t images = 0;
    double clean = 0, adv = 0, def = 0, q = 0, ms = 0;
  };
  std::vector<Block> blocks;
  for (const auto& r : table.rows) {
    if (r.image_id == "ALL") continue;
    auto it = std::find_if(blocks.begin(), blocks.end(), [&](const Block& b) {
      return b.attack == r.attack && b.epsilon == r.epsilon && b.defense == r.defense;
    });
    if (it == blocks.end()) {
      blocks.push_back({r.attack, r.defense, r.epsilon, r.lambda});
      it = blocks.end() - 1;
    }
    ++it->images;
    it->clean += r.miou_clean;
    it->adv += r.miou_adv;
    it->def += r.miou_def;
    it->q += r.q;
    it->ms += r.wallclock_ms;
  }
  std::string out(kSummaryHeader);
  out += '\n';
  for (const auto& b : blocks) {
    const double k = static_cast<double>(b.images);
    out += b.attack + ',' + format_real(b.epsilon) + ',' + format_real(b.lambda) + ',' + b.defense + ',' +
           std::to_string(b.images) + ',' + format_real(b.clean / k) + ',' + format_real(b.adv / k) + ',' +
           format_real(b.def / k) + ',' + format_real(b.q / k) + ',' + format_real(b.ms / k) + '\n';
  }
  return out;
}

namespace {

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  out.flush();
  if (!out) throw DataError("failed writing " + path.string());
}

}  // namespace

void emit_report(const ResultTable& table, const fs::path& dir) {
  if (table.rows.empty()) throw UsageError("result table is empty");
  std::error_code ec;
  fs::create_directories(dir / "panels", ec);
  if (ec) throw DataError("cannot create " + (dir / "panels").string() + ": " + ec.message());
  write_text(dir / "results.csv", format_results_csv(table));
  write_text(dir / "summary.csv", format_summary_csv(table));
  for (const auto& p : table.panels) write_png(dir / "panels" / (p.name + ".png"), p.image);
}

}  // namespace segadv::harness
