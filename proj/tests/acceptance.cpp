// Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any
// criterion fails.

#include <algorithm>
#include <cstdarg>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <unistd.h>

#include "segadv/attacks/attack_config.hpp"
#include "segadv/attacks/budget_audit.hpp"
#include "segadv/attacks/classifier.hpp"
#include "segadv/attacks/gradient_attacks.hpp"
#include "segadv/attacks/minimal_attacks.hpp"
#include "segadv/attacks/targets.hpp"
#include "segadv/attacks/universal.hpp"
#include "segadv/defenses/nlm.hpp"
#include "segadv/defenses/pipeline.hpp"
#include "segadv/defenses/quilting.hpp"
#include "segadv/harness/dataset.hpp"
#include "segadv/harness/experiment.hpp"
#include "segadv/harness/reference.hpp"
#include "segadv/metrics/metrics.hpp"
#include "segadv/segnet/checkpoint.hpp"
#include "segadv/segnet/model.hpp"
#include "segadv/segnet/train.hpp"
#include "test_support.hpp"

namespace {

using namespace segadv;
namespace fs = std::filesystem;
using tensor::Tensor;

struct Outcome {
  bool pass = true;
  std::string detail;
};

// Appends a formatted fragment to the detail text and folds `ok` into pass.
class Check {
 public:
  void expect(bool ok, const char* fmt, ...) __attribute__((format(printf, 3, 4))) {
    char buf[512];
    va_list args;
    va_start(args, fmt);
    std::vsnprintf(buf, sizeof buf, fmt, args);
    va_end(args);
    if (!out_.detail.empty()) out_.detail += "; ";
    out_.detail += buf;
    if (!ok) out_.detail += " [failed]";
    out_.pass = out_.pass && ok;
  }
  Outcome result() const { return out_; }

 private:
  Outcome out_;
};

const harness::Dataset& data() { return testing::reference_data(); }
const segnet::SegModel& model() { return testing::reference_model(); }

LabelMask predict(const Image& img) { return segnet::predict_mask(model(), to_tensor(img)); }

double dataset_miou(const std::vector<Image>& images) {
  metrics::ConfusionMatrix cm(model().num_classes());
  for (std::size_t i = 0; i < images.size(); ++i) metrics::accumulate(cm, predict(images[i]), data().val[i].mask);
  return metrics::miou(cm);
}

double clean_miou() {
  static const double m = dataset_miou(harness::images_of(data().val));
  return m;
}

// Every adversarial image built here passes through this check too, on top
// of the process-wide audit the attacks record themselves.
std::uint64_t g_explicit_checks = 0, g_explicit_violations = 0;
const Image& audited(const Image& adv, const Image& clean, double eps) {
  ++g_explicit_checks;
  if (linf_distance(adv, clean) > static_cast<int>(std::floor(eps))) ++g_explicit_violations;
  return adv;
}

Outcome gradient_correctness() {
  Check c;
  double worst = 0.0;
  std::size_t bad = 0;
  for (std::uint64_t pair = 0; pair < 5; ++pair) {
    std::mt19937_64 rng(1000 + pair);
    const auto m = segnet::SegModel::he_initialized(segnet::Architecture{}, 50 + pair);
    const auto x = testing::random_tensor({64, 128, 3}, rng, 0.0, 255.0);
    const auto spec = segnet::LossSpec::segmentation(testing::random_mask(64, 128, 8, rng));
    const auto g = segnet::input_gradient(m, x, spec);
    std::uniform_int_distribution<std::size_t> pick(0, x.size() - 1);
    for (int k = 0; k < 20; ++k) {
      const std::size_t i = pick(rng);
      const double fd = testing::central_difference(
          [&](const Tensor& xi) { return segnet::loss_value(m, xi, spec); }, x, i, 1e-5);
      const double err = testing::relative_error(g[i], fd, 1e-8);
      worst = std::max(worst, err);
      bad += err > 1e-3;
    }
  }
  c.expect(bad == 0, "100 sampled pixels, max relative error %.2e, %zu above 1e-3", worst, bad);
  return c.result();
}

Outcome metric_oracle() {
  Check c;
  LabelMask truth(1, 4), pred(1, 4);
  truth.classes = {0, 0, 1, 1};
  pred.classes = {0, 1, 1, 1};
  const double m = metrics::miou(metrics::confusion(pred, truth, 2));
  c.expect(m == 7.0 / 12.0, "hand example %.15f", m);
  std::mt19937_64 rng(7);
  const auto any = testing::random_mask(9, 11, 8, rng);
  c.expect(metrics::miou(metrics::confusion(any, any, 8)) == 1.0, "perfect prediction 1.0");
  std::size_t mismatches = 0;
  for (int t = 0; t < 100; ++t) {
    const int n = 2 + t % 7;
    const auto a = testing::random_mask(6, 7, n, rng), b = testing::random_mask(6, 7, n, rng);
    const auto cm = metrics::confusion(b, a, n);
    std::vector<std::uint64_t> tally(n * n, 0);
    for (std::size_t i = 0; i < a.size(); ++i) ++tally[a.classes[i] * n + b.classes[i]];
    for (int r = 0; r < n; ++r)
      for (int s = 0; s < n; ++s) mismatches += cm.count(r, s) != tally[r * n + s];
  }
  c.expect(mismatches == 0, "100 random tallies, %zu mismatched cells", mismatches);
  return c.result();
}

Outcome iteration_budget() {
  Check c;
  const auto b4 = attacks::iteration_budget(4), b8 = attacks::iteration_budget(8), b16 = attacks::iteration_budget(16);
  c.expect(b4 == 5 && b8 == 10 && b16 == 20, "eps 4/8/16 -> %zu/%zu/%zu", b4, b8, b16);
  return c.result();
}

Outcome budget_enforcement() {
  Check c;
  const auto audit = attacks::budget_audit();
  c.expect(audit.violations == 0, "%llu attack outputs audited, %llu violations",
           static_cast<unsigned long long>(audit.checks), static_cast<unsigned long long>(audit.violations));
  c.expect(g_explicit_violations == 0, "%llu explicit re-checks, %llu violations",
           static_cast<unsigned long long>(g_explicit_checks), static_cast<unsigned long long>(g_explicit_violations));
  return c.result();
}

Outcome llcm_sweep() {
  Check c;
  harness::ExperimentConfig cfg;
  cfg.attack = harness::AttackKind::kLlcm;
  cfg.epsilons = {2, 4, 8, 16};
  cfg.record_wallclock = false;
  cfg.panels = 0;
  const auto table = harness::run_experiment(cfg, harness::ExperimentInputs{model(), data(), "reference"});
  std::vector<double> q;
  std::size_t images = 0;
  for (const auto& r : table.rows) {
    if (r.image_id == "ALL") {
      q.push_back(r.q);
    } else if (r.epsilon == 2) {
      ++images;
    }
  }
  bool monotone = q.size() == 4;
  for (std::size_t i = 1; i < q.size(); ++i) monotone = monotone && q[i] <= q[i - 1] + 0.01;
  c.expect(images >= 64, "%zu val images", images);
  c.expect(monotone, "Q = %.4f, %.4f, %.4f, %.4f", q[0], q[1], q[2], q[3]);
  c.expect(q[3] <= 0.6, "Q(16) = %.4f <= 0.6", q[3]);
  return c.result();
}

// Shared adversarial sets: DNNM removing cars and the FFF perturbation.
struct AttackedSets {
  std::vector<Image> dnnm;
  std::vector<LabelMask> dnnm_targets;
  attacks::FffResult fff;
  std::vector<Image> fff_images;
};

const AttackedSets& attacked_sets() {
  static const AttackedSets sets = [] {
    AttackedSets s;
    attacks::AttackConfig ac;
    ac.lambda = 1.0;
    ac.epsilon = 10.0;
    ac.direction = attacks::Direction::kDescend;
    for (const auto& smp : data().val) {
      auto r = attacks::dnnm_attack(model(), smp.image, harness::kCar, ac);
      s.dnnm.push_back(audited(r.attack.adversarial, smp.image, 10.0));
      s.dnnm_targets.push_back(std::move(r.target));
    }
    attacks::FffConfig fc;
    fc.epsilon = 10.0;
    fc.steps = harness::ExperimentConfig{}.fff_steps;
    fc.step_size = harness::ExperimentConfig{}.fff_step_size;
    s.fff = attacks::fff_uap(model(), fc);
    for (const auto& smp : data().val) {
      s.fff_images.push_back(audited(attacks::apply_perturbation(smp.image, s.fff.perturbation), smp.image, 10.0));
    }
    return s;
  }();
  return sets;
}

LabelMask dnnm_oracle(const LabelMask& m, int o) {
  LabelMask out = m;
  for (std::size_t i = 0; i < m.size(); ++i) {
    if (m.classes[i] != o) continue;
    const long yi = long(i / m.width), xi = long(i % m.width);
    long best = std::numeric_limits<long>::max();
    for (std::size_t j = 0; j < m.size(); ++j) {
      if (m.classes[j] == o) continue;
      const long dy = long(j / m.width) - yi, dx = long(j % m.width) - xi;
      if (dy * dy + dx * dx < best) {
        best = dy * dy + dx * dx;
        out.classes[i] = m.classes[j];
      }
    }
  }
  return out;
}

Outcome dnnm_semantics() {
  Check c;
  std::mt19937_64 rng(66);
  std::uniform_int_distribution<std::size_t> dim(1, 16);
  std::uniform_real_distribution<double> u(0, 1);
  std::size_t agree = 0, total = 0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t h = dim(rng), w = dim(rng);
    const int n = 2 + t % 6, o = t % n;
    const double p_obj = u(rng);
    LabelMask m = testing::random_mask(h, w, n, rng);
    for (int& v : m.classes)
      if (u(rng) < p_obj) v = o;
    // Ensure a donor exists.
    if (std::all_of(m.classes.begin(), m.classes.end(), [&](int v) { return v == o; })) m.classes[0] = (o + 1) % n;
    ++total;
    agree += attacks::build_dnnm_target(m, o) == dnnm_oracle(m, o);
  }
  c.expect(agree == total, "oracle agreement %zu/%zu", agree, total);

  const auto& sets = attacked_sets();
  const int car = harness::kCar;
  double ratio_sum = 0.0, clean_pooled = 0.0, adv_pooled = 0.0;
  std::size_t scenes = 0, kept_mismatch = 0;
  for (std::size_t i = 0; i < data().val.size(); ++i) {
    const auto clean = predict(data().val[i].image);
    for (std::size_t p = 0; p < clean.size(); ++p) {
      if (clean.classes[p] != car) kept_mismatch += sets.dnnm_targets[i].classes[p] != clean.classes[p];
    }
    const auto clean_cars = std::count(clean.classes.begin(), clean.classes.end(), car);
    if (clean_cars == 0 || scenes == 16) continue;
    const auto adv = predict(sets.dnnm[i]);
    const auto adv_cars = std::count(adv.classes.begin(), adv.classes.end(), car);
    ratio_sum += double(adv_cars) / double(clean_cars);
    clean_pooled += double(clean_cars);
    adv_pooled += double(adv_cars);
    ++scenes;
  }
  const double mean_ratio = scenes ? ratio_sum / double(scenes) : 1.0;
  c.expect(scenes == 16, "%zu scenes with cars", scenes);
  c.expect(mean_ratio <= 0.10, "remaining car pixels %.4f of clean (pooled %.4f) <= 0.10", mean_ratio,
           adv_pooled / std::max(clean_pooled, 1.0));
  c.expect(kept_mismatch == 0, "%zu non-objective target pixels differ from the clean prediction", kept_mismatch);
  return c.result();
}

Outcome deepfool_linear() {
  Check c;
  const attacks::LinearClassifier head({Tensor({2}, std::vector<double>{3, 4}), Tensor({2}, 0.0)}, {0.0, 0.0});
  const auto res = attacks::minimal_perturbation(head, Tensor({2}, std::vector<double>{1, 1}), 50);
  const double norm = std::hypot(res.raw[0], res.raw[1]);
  c.expect(res.success, "label flipped");
  c.expect(std::abs(norm - 1.4) <= 1e-6, "magnitude %.9f", norm);
  c.expect(std::abs(res.raw[0] / norm + 0.6) <= 1e-6 && std::abs(res.raw[1] / norm + 0.8) <= 1e-6,
           "direction (%.9f, %.9f)", res.raw[0] / norm, res.raw[1] / norm);
  return c.result();
}

std::vector<Image> first_images(const std::vector<segnet::Sample>& s, std::size_t n) {
  std::vector<Image> out;
  for (std::size_t i = 0; i < std::min(n, s.size()); ++i) out.push_back(s[i].image);
  return out;
}

// Mean over 5 seeds of (holdout fooling rate, val mIoU) under uniform noise.
std::pair<double, double> noise_baseline() {
  static const auto result = [] {
    const auto holdout = first_images(data().val, 32);
    double fooling = 0.0, miou = 0.0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      const auto noise = attacks::random_uniform_perturbation({64, 128, 3}, 10.0, 500 + seed);
      fooling += metrics::fooling_rate(model(), holdout, noise.values);
      std::vector<Image> noisy;
      for (const auto& s : data().val) noisy.push_back(audited(attacks::apply_perturbation(s.image, noise), s.image, 10));
      miou += dataset_miou(noisy);
    }
    return std::make_pair(fooling / 5.0, miou / 5.0);
  }();
  return result;
}

Outcome uap_generalisation() {
  Check c;
  const auto train = first_images(data().train, 32), holdout = first_images(data().val, 32);
  attacks::UapConfig uc;
  uc.epsilon = 10.0;
  uc.norm = attacks::Norm::kInf;
  const auto res = attacks::craft_uap(model(), train, holdout, uc);
  const double baseline = noise_baseline().first;
  c.expect(train.size() == 32 && holdout.size() == 32, "32 train / 32 holdout");
  c.expect(res.perturbation.magnitude() <= 10.0 + 1e-9, "||r||_inf = %.4f", res.perturbation.magnitude());
  c.expect(res.fooled_fraction_holdout > baseline, "holdout fooling %.4f (train %.4f) vs noise %.4f",
           res.fooled_fraction_holdout, res.fooled_fraction_train, baseline);
  return c.result();
}

Outcome fff_efficacy() {
  Check c;
  const auto& sets = attacked_sets();
  const auto& trace = sets.fff.loss_trace;
  bool decreasing = trace.size() >= 11;
  for (std::size_t t = 1; t <= 10 && t < trace.size(); ++t) decreasing = decreasing && trace[t] < trace[t - 1];
  c.expect(decreasing, "objective %.4f -> %.4f over 10 steps", trace[0], trace[std::min<std::size_t>(10, trace.size() - 1)]);
  const double adv = dataset_miou(sets.fff_images);
  const double q = adv / clean_miou();
  c.expect(q <= 0.7, "Q = %.4f <= 0.7", q);
  const double noise = noise_baseline().second;
  c.expect(adv < noise, "mIoU %.4f vs noise baseline %.4f", adv, noise);
  return c.result();
}

const defenses::PatchIndex& quilt_index() {
  static const defenses::PatchDatabase db =
      defenses::build_patch_db(harness::images_of(data().train), defenses::kDefaultPatchSize,
                               defenses::kDefaultPatchCount, harness::ExperimentConfig{}.seed);
  static const defenses::PatchIndex index(db);
  return index;
}

Outcome defense_ordering() {
  Check c;
  defenses::DefenseContext ctx;
  ctx.quilt_index = &quilt_index();
  const auto& sets = attacked_sets();
  for (const auto& [name, images] :
       std::vector<std::pair<std::string, const std::vector<Image>*>>{{"dnnm", &sets.dnnm}, {"fff", &sets.fff_images}}) {
    const double att = dataset_miou(*images);
    double best_single = -1.0, both = 0.0;
    for (const char* p : {"nlm", "quilt", "nlm,quilt"}) {
      const auto pipeline = defenses::parse_pipeline(p);
      std::vector<Image> defended;
      for (const auto& im : *images) defended.push_back(defenses::defend(im, pipeline, ctx));
      const double d = dataset_miou(defended);
      c.expect(d > att, "%s %s %.4f vs attacked %.4f", name.c_str(), p, d, att);
      if (pipeline.size() == 1) {
        best_single = std::max(best_single, d);
      } else {
        both = d;
      }
    }
    c.expect(both - att >= best_single - att - 0.02, "%s combined recovery %.4f vs best single %.4f", name.c_str(),
             both - att, best_single - att);
  }
  return c.result();
}

double psnr(const Image& a, const Image& b) {
  double se = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    const double d = double(a.data[i]) - double(b.data[i]);
    se += d * d;
  }
  return 10.0 * std::log10(255.0 * 255.0 / (se / double(a.data.size())));
}

Outcome nlm_properties() {
  Check c;
  const Image flat(64, 128, 3, 111);
  defenses::NlmConfig explicit_h;
  explicit_h.filtering_h = 20.0;
  c.expect(defenses::nlm_denoise(flat, defenses::NlmConfig{}) == flat &&
               defenses::nlm_denoise(flat, explicit_h) == flat,
           "constant image fixed point");
  double worst = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    defenses::NlmDiagnostics diag;
    defenses::nlm_denoise(data().val[i].image, defenses::NlmConfig{}, &diag);
    for (double s : diag.weight_sums) worst = std::max(worst, std::abs(s - 1.0));
  }
  c.expect(worst <= 1e-9, "max |sum w - 1| = %.2e", worst);
  double gain = 0.0;
  for (std::size_t i = 0; i < 10; ++i) {
    const auto& clean = data().val[i].image;
    std::mt19937_64 rng(900 + i);
    std::normal_distribution<double> noise(0.0, 10.0);
    auto t = to_tensor(clean);
    for (double& v : t.values()) v += noise(rng);
    const auto noisy = clip_quantize(t);
    gain += psnr(defenses::nlm_denoise(noisy, defenses::NlmConfig{}), clean) - psnr(noisy, clean);
  }
  c.expect(gain / 10.0 >= 2.0, "mean PSNR gain %.3f dB", gain / 10.0);
  return c.result();
}

Image quilt_oracle(const Image& img, const defenses::PatchDatabase& db) {
  Image out = img;
  const std::size_t p = db.patch_h, ch = img.channels;
  for (std::size_t ty = 0; ty < img.height; ty += p)
    for (std::size_t tx = 0; tx < img.width; tx += p) {
      const std::size_t vh = std::min(p, img.height - ty), vw = std::min(p, img.width - tx);
      std::uint64_t best = std::numeric_limits<std::uint64_t>::max();
      std::size_t arg = 0;
      for (std::size_t k = 0; k < db.count(); ++k) {
        const auto patch = db.patch(k);
        std::uint64_t d = 0;
        for (std::size_t y = 0; y < vh; ++y)
          for (std::size_t x = 0; x < vw; ++x)
            for (std::size_t cc = 0; cc < ch; ++cc) {
              const long diff = long(img.at(ty + y, tx + x, cc)) - long(patch[(y * p + x) * ch + cc]);
              d += std::uint64_t(diff * diff);
            }
        if (d < best) {
          best = d;
          arg = k;
        }
      }
      const auto patch = db.patch(arg);
      for (std::size_t y = 0; y < vh; ++y)
        for (std::size_t x = 0; x < vw; ++x)
          for (std::size_t cc = 0; cc < ch; ++cc) out.at(ty + y, tx + x, cc) = patch[(y * p + x) * ch + cc];
    }
  return out;
}

Outcome quilting_oracle() {
  Check c;
  std::mt19937_64 rng(12);
  std::size_t self_ok = 0, oracle_ok = 0;
  for (int t = 0; t < 10; ++t) {
    const auto img = testing::random_image(16, 16, 3, rng);
    defenses::PatchDatabase self;
    for (std::size_t ty = 0; ty + 5 <= 16; ty += 5)
      for (std::size_t tx = 0; tx + 5 <= 16; tx += 5)
        for (std::size_t y = 0; y < 5; ++y)
          for (std::size_t x = 0; x < 5; ++x)
            for (std::size_t cc = 0; cc < 3; ++cc) self.data.push_back(img.at(ty + y, tx + x, cc));
    // 16 is not a multiple of 5: the self-db also needs the ragged edge tiles.
    for (std::size_t ty = 0; ty < 16; ty += 5)
      for (std::size_t tx = 0; tx < 16; tx += 5) {
        if (ty + 5 <= 16 && tx + 5 <= 16) continue;
        for (std::size_t y = 0; y < 5; ++y)
          for (std::size_t x = 0; x < 5; ++x)
            for (std::size_t cc = 0; cc < 3; ++cc)
              self.data.push_back(ty + y < 16 && tx + x < 16 ? img.at(ty + y, tx + x, cc) : 0);
      }
    self_ok += defenses::quilt(img, self) == img;

    const auto db = defenses::build_patch_db(harness::images_of(data().train), 5, 100, 40 + t);
    Image crop(16, 16, 3);
    const auto& src = data().val[t].image;
    for (std::size_t y = 0; y < 16; ++y)
      for (std::size_t x = 0; x < 16; ++x)
        for (std::size_t cc = 0; cc < 3; ++cc) crop.at(y, x, cc) = src.at(24 + y, 8 * t + x, cc);
    const auto probe = t % 2 ? testing::random_image(16, 16, 3, rng) : crop;
    oracle_ok += defenses::quilt(probe, db) == quilt_oracle(probe, db);
  }
  c.expect(self_ok == 10, "self-db identity %zu/10", self_ok);
  c.expect(oracle_ok == 10, "brute-force agreement %zu/10 (100-patch db, 16x16)", oracle_ok);
  return c.result();
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

// Dataset rendering, training, checkpointing, loading, attacking, defending
// and reporting, all from disk, twice.
Outcome reproducibility() {
  Check c;
  const fs::path root = fs::temp_directory_path() / ("segadv_acceptance_" + std::to_string(::getpid()));
  std::vector<std::string> csv;
  for (int run = 0; run < 2; ++run) {
    const fs::path dir = root / std::to_string(run);
    fs::remove_all(dir);
    harness::ToyDatasetSpec spec = harness::reference_dataset_spec();
    spec.train_count = 16;
    spec.val_count = 8;
    harness::generate_toy_dataset(spec, dir / "data");
    const auto loaded = harness::load_dataset(dir / "data");
    auto tc = harness::reference_train_config();
    tc.epochs = 2;
    segnet::save_checkpoint(dir / "model.ckpt", harness::train_reference_model(loaded, tc).model);
    harness::ExperimentConfig cfg;
    cfg.checkpoint = dir / "model.ckpt";
    cfg.dataset = dir / "data";
    cfg.attack = harness::AttackKind::kIterativeLlcm;
    cfg.epsilons = {2, 4};
    cfg.defenses = {defenses::parse_pipeline("nlm"), defenses::parse_pipeline("quilt"),
                    defenses::parse_pipeline("nlm,quilt")};
    cfg.quilt_db_count = 2000;
    cfg.workers = 2;
    cfg.record_wallclock = false;
    harness::emit_report(harness::run_experiment(cfg), dir / "report");
    csv.push_back(read_file(dir / "report" / "results.csv"));
  }
  fs::remove_all(root);
  c.expect(!csv[0].empty() && csv[0] == csv[1], "results.csv %zu bytes, runs %s", csv[0].size(),
           csv[0] == csv[1] ? "identical" : "differ");
  return c.result();
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"gradient correctness", gradient_correctness},
      {"metric oracle", metric_oracle},
      {"iteration budget", iteration_budget},
      {"budget enforcement", nullptr},
      {"single-step LLCM sweep", llcm_sweep},
      {"DNNM semantics", dnnm_semantics},
      {"DeepFool linear oracle", deepfool_linear},
      {"UAP generalisation", uap_generalisation},
      {"FFF efficacy", fff_efficacy},
      {"defense recovery ordering", defense_ordering},
      {"NLM properties", nlm_properties},
      {"quilting oracle", quilting_oracle},
      {"reproducibility", reproducibility},
  };
  std::vector<Outcome> outcomes(criteria.size());
  // The budget audit is read last so it covers every other criterion's attacks.
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!criteria[i].second) continue;
    try {
      outcomes[i] = criteria[i].second();
    } catch (const std::exception& e) {
      outcomes[i] = {false, std::string("threw: ") + e.what()};
    }
  }
  outcomes[3] = budget_enforcement();
  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    std::printf("criterion %2zu %s: %s (%s)\n", i + 1, outcomes[i].pass ? "PASS" : "FAIL", criteria[i].first,
                outcomes[i].detail.c_str());
    all = all && outcomes[i].pass;
  }
  return all ? 0 : 1;
}
