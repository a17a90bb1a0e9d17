#include "bda/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "bda/augment.hpp"
#include "bda/config.hpp"
#include "bda/errors.hpp"
#include "bda/log.hpp"
#include "bda/ops.hpp"
#include "bda/synthetic.hpp"
#include "json.hpp"

namespace bda {

namespace {

constexpr std::uint64_t kDataSalt = 0xda7a;

std::string join_ids(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) {
    if (!out.empty()) out += ", ";
    out += id;
  }
  return out;
}

std::size_t reflect_index(long i, std::size_t n) {
  if (n == 1) return 0;
  const long period = 2 * static_cast<long>(n - 1);
  i %= period;
  if (i < 0) i += period;
  if (i >= static_cast<long>(n)) i = period - i;
  return static_cast<std::size_t>(i);
}

Tensor reflect_pad(const Tensor& img, std::size_t h, std::size_t w) {
  const std::size_t c = img.dim(0), ih = img.dim(1), iw = img.dim(2);
  Tensor out({1, c, h, w});
  for (std::size_t k = 0; k < c; ++k) {
    for (std::size_t y = 0; y < h; ++y) {
      const std::size_t sy = reflect_index(static_cast<long>(y), ih);
      for (std::size_t x = 0; x < w; ++x) {
        out.at(0, k, y, x) = img[(k * ih + sy) * iw + reflect_index(static_cast<long>(x), iw)];
      }
    }
  }
  return out;
}

Mask crop_argmax(const Tensor& logits, std::size_t h, std::size_t w) {
  const auto labels = ops::argmax_channels(logits);
  const std::size_t pw = logits.dim(3);
  Mask m(h, w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) m.at(y, x) = labels[y * pw + x];
  }
  return m;
}

// Largest multiple of 16 not above min(crop, smallest side in the set).
std::size_t effective_crop(const TrainConfig& cfg, std::span<const Sample> set) {
  std::size_t side = cfg.crop;
  for (const auto& s : set) side = std::min({side, s.pre.dim(1), s.pre.dim(2)});
  side -= side % kSpatialDivisor;
  if (side == 0) {
    throw ConfigError("training samples are smaller than " + std::to_string(kSpatialDivisor) +
                      " pixels");
  }
  return side;
}

nlohmann::ordered_json losses_json(const StepLosses& l) {
  nlohmann::ordered_json j;
  j["total"] = l.total;
  j["loc_ce"] = l.loc_ce;
  j["loc_lovasz"] = l.loc_lovasz;
  j["dmg_ce"] = l.dmg_ce;
  j["dmg_focal"] = l.dmg_focal;
  j["dmg_lovasz"] = l.dmg_lovasz;
  return j;
}

}  // namespace

TrainConfig TrainConfig::full_preset() {
  TrainConfig c;
  c.iterations = 50000;
  c.batch_size = 8;
  c.lr = 1e-4;
  c.weight_decay = 5e-3;
  c.crop = 256;
  c.eval_every = 1000;
  c.log_every = 100;
  return c;
}

TrainConfig TrainConfig::toy_preset() {
  TrainConfig c;
  c.iterations = 500;
  c.batch_size = 4;
  c.lr = 3e-3;
  c.weight_decay = 5e-3;
  c.crop = 32;
  c.eval_every = 0;
  c.log_every = 10;
  return c;
}

void TrainConfig::validate() const {
  if (iterations == 0) throw ConfigError("train.iterations must be positive");
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("train.lr must be positive");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("train.weight_decay must be non-negative");
  }
  if (crop < kSpatialDivisor) {
    throw ConfigError("train.crop must be at least " + std::to_string(kSpatialDivisor));
  }
}

std::string TrainLog::to_jsonl() const {
  std::string out;
  for (const auto& r : records) {
    nlohmann::ordered_json j;
    j["iteration"] = r.iteration;
    j["losses"] = losses_json(r.losses);
    if (r.validation) j["validation"] = nlohmann::ordered_json::parse(serialize_report(*r.validation));
    out += j.dump() + "\n";
  }
  return out;
}

Batch make_batch(std::span<const Sample> samples) {
  if (samples.empty()) throw ContractError("make_batch: empty batch");
  const std::size_t c = samples[0].pre.dim(0), h = samples[0].pre.dim(1), w = samples[0].pre.dim(2);
  const std::size_t n = samples.size();
  Batch b;
  b.pre = Tensor({n, c, h, w});
  b.post = Tensor({n, c, h, w});
  const std::size_t per = c * h * w;
  for (std::size_t i = 0; i < n; ++i) {
    const auto& s = samples[i];
    if (s.pre.shape() != Shape{c, h, w} || s.post.shape() != Shape{c, h, w}) {
      throw ContractError("make_batch: sample '" + s.id + "' has shape " +
                          shape_str(s.pre.shape()) + ", expected " + shape_str({c, h, w}));
    }
    std::copy(s.pre.vec().begin(), s.pre.vec().end(), b.pre.data().begin() + i * per);
    std::copy(s.post.vec().begin(), s.post.vec().end(), b.post.data().begin() + i * per);
    b.loc.push_back(s.masks.loc);
    b.dmg.push_back(s.masks.dmg);
    b.ids.push_back(s.id);
  }
  return b;
}

LossOutput training_loss(const Model& model, const Batch& batch, const DamageLossFn& damage_loss) {
  const ModelConfig& mc = model.config();
  const ForwardResult fr = model.forward(Var::constant(batch.pre), Var::constant(batch.post));
  const losses::HeadLoss loc = losses::building_head_loss(fr.loc_logits, batch.loc, mc.loss_weights);
  const losses::HeadLoss dmg =
      damage_loss ? damage_loss(fr.dmg_logits, batch.dmg, mc)
                  : losses::damage_head_loss(fr.dmg_logits, batch.dmg, mc.focal, mc.damage_weights());
  LossOutput out;
  out.total = ops::add(loc.total, dmg.total);
  out.terms.total = out.total.value().item();
  out.terms.loc_ce = loc.ce;
  out.terms.loc_lovasz = loc.lovasz;
  out.terms.dmg_ce = dmg.ce;
  out.terms.dmg_focal = dmg.focal;
  out.terms.dmg_lovasz = dmg.lovasz;
  return out;
}

TrainResult train(const ModelConfig& model_cfg, const TrainConfig& cfg,
                  std::span<const Sample> train_set, std::span<const Sample> valid_set,
                  const TrainOptions& opts) {
  model_cfg.validate();
  cfg.validate();
  if (train_set.empty()) throw ConfigError("training set is empty");

  const std::string config_text =
      opts.config_text.empty() ? format_config(RunConfig{model_cfg, cfg, {}}) : opts.config_text;
  const std::size_t crop = effective_crop(cfg, train_set);

  Rng model_rng(cfg.seed);
  Model model(model_cfg, model_rng);
  Rng data_rng = Rng(cfg.seed).fork(kDataSalt);
  const auto params = model.parameters();
  AdamWConfig adam;
  adam.lr = cfg.lr;
  adam.weight_decay = cfg.weight_decay;

  std::vector<std::size_t> order(train_set.size());
  std::iota(order.begin(), order.end(), 0);
  std::size_t cursor = order.size();

  const bool validating = cfg.eval_every > 0 && !valid_set.empty();
  TrainResult result;
  double best_oa = -1.0;

  for (std::size_t it = 1; it <= cfg.iterations; ++it) {
    std::vector<Sample> picked;
    picked.reserve(cfg.batch_size);
    for (std::size_t b = 0; b < cfg.batch_size; ++b) {
      if (cursor == order.size()) {
        bda::shuffle(order.begin(), order.end(), data_rng);
        cursor = 0;
      }
      const Sample& s = train_set[order[cursor++]];
      const std::size_t h = s.pre.dim(1), w = s.pre.dim(2);
      AugmentParams p;
      if (cfg.augment) {
        p = draw_augment(data_rng, h, w, crop);
      } else {
        p = AugmentParams::identity();
        p.crop = crop;
        p.crop_y = (h - crop) / 2;
        p.crop_x = (w - crop) / 2;
      }
      picked.push_back(apply_augment(s, p));
    }
    const Batch batch = make_batch(picked);

    StepLosses terms;
    try {
      LossOutput loss = training_loss(model, batch, opts.damage_loss);
      terms = loss.terms;
      if (!std::isfinite(terms.total)) throw NumericError("loss is " + std::to_string(terms.total));
      loss.total.backward();
    } catch (const NumericError& e) {
      throw NumericError("iteration " + std::to_string(it) + ": " + e.what() +
                         " (batch: " + join_ids(batch.ids) + ")");
    }
    adamw_step(params, adam);
    zero_grad(params);
    if (opts.on_step) opts.on_step(it, terms);

    const bool last = it == cfg.iterations;
    const bool eval_now = validating && (it % cfg.eval_every == 0 || last);
    const bool log_now = eval_now || (cfg.log_every > 0 && (it % cfg.log_every == 0 || last));
    LogRecord rec{it, terms, std::nullopt};
    if (eval_now) {
      ScoreReport rep = evaluate(model, valid_set, opts.dataset_name);
      log_info("iteration " + std::to_string(it) + ": loss " + std::to_string(terms.total) +
               ", valid f1_oa " + percent4(rep.f1_oa));
      if (rep.f1_oa > best_oa) {
        best_oa = rep.f1_oa;
        result.best = snapshot(model, config_text);
        result.best_iteration = it;
        result.best_report = rep;
      }
      rec.validation = std::move(rep);
    } else if (log_now) {
      log_info("iteration " + std::to_string(it) + ": loss " + std::to_string(terms.total));
    }
    if (log_now) result.log.records.push_back(std::move(rec));
  }

  if (!validating) {
    result.best = snapshot(model, config_text);
    result.best_iteration = cfg.iterations;
  }
  return result;
}

Prediction predict(const Model& model, const Sample& s) {
  const std::size_t h = s.pre.dim(1), w = s.pre.dim(2);
  const auto round_up = [](std::size_t v) {
    return (v + kSpatialDivisor - 1) / kSpatialDivisor * kSpatialDivisor;
  };
  const std::size_t ph = round_up(h), pw = round_up(w);
  Prediction out;
  out.forward = model.forward(Var::constant(reflect_pad(s.pre, ph, pw)),
                              Var::constant(reflect_pad(s.post, ph, pw)));
  out.loc = crop_argmax(out.forward.loc_logits.value(), h, w);
  out.dmg = crop_argmax(out.forward.dmg_logits.value(), h, w);
  return out;
}

ConfusionMatrix evaluate_confusion(const Model& model, std::span<const Sample> samples) {
  ConfusionMatrix cm;
  for (const auto& s : samples) {
    const Prediction p = predict(model, s);
    cm.accumulate(p.loc, p.dmg, s.masks);
  }
  return cm;
}

ScoreReport evaluate(const Model& model, std::span<const Sample> samples,
                     const std::string& dataset_name) {
  ScoreReport r = compute_scores(evaluate_confusion(model, samples), samples.size());
  r.variant = variant_name(model.config());
  r.dataset = dataset_name;
  return r;
}

Model model_from_checkpoint(const CheckpointData& ck) {
  const RunConfig rc = parse_config_text(ck.config_text);
  Rng rng(rc.train.seed);
  Model model(rc.model, rng);
  restore(model, ck);
  return model;
}

TrainConfig ImbalanceSettings::imbalance_train_config() {
  TrainConfig t = TrainConfig::toy_preset();
  t.iterations = 100;
  t.lr = 3e-3;
  t.batch_size = 4;
  t.crop = 32;
  t.log_every = 0;
  return t;
}

ModelConfig ImbalanceSettings::imbalance_model_config() {
  ModelConfig m;
  m.stage_channels = {8, 16, 32, 64};
  return m;
}

ImbalanceSummary imbalance_experiment(std::span<const std::uint64_t> seeds,
                                      const ImbalanceSettings& settings) {
  ImbalanceSummary summary;
  for (const std::uint64_t seed : seeds) {
    const Rng base(seed);
    const auto train_set =
        synthetic::imbalanced_fixture(settings.train_images, settings.size, base.fork(1).next_u64());
    const auto test_set =
        synthetic::imbalanced_fixture(settings.test_images, settings.size, base.fork(2).next_u64());
    TrainConfig tc = settings.train;
    tc.seed = seed;
    tc.eval_every = 0;

    ImbalanceRow row;
    row.seed = seed;
    for (const bool focal : {false, true}) {
      ModelConfig mc = settings.model;
      mc.enable_focal = focal;
      const TrainResult tr = train(mc, tc, train_set, {});
      Model m = model_from_checkpoint(tr.best);
      const ScoreReport rep = evaluate(m, test_set);
      (focal ? row.focal_minority_f1 : row.baseline_minority_f1) = rep.f1_levels[2];
    }
    if (row.focal_minority_f1 >= row.baseline_minority_f1) ++summary.focal_at_least_baseline;
    summary.rows.push_back(row);
  }
  return summary;
}

std::string SweepResult::to_csv() const {
  std::string out = report_csv_header() + "\n";
  for (const ScoreReport& r : reports) out += report_csv_row(r) + "\n";
  return out;
}

SweepResult run_sweep(std::span<const Sample> train_set, std::span<const Sample> valid_set,
                      std::span<const EvalSet> eval_sets, const SweepSettings& settings,
                      const std::function<void(const ScoreReport&)>& on_report) {
  SweepResult out;
  for (const std::string& variant : settings.variants) {
    const ModelConfig cfg = with_variant(settings.base, variant);
    TrainOptions opts;
    opts.dataset_name = settings.train_name;
    TrainResult tr = train(cfg, settings.train, train_set, valid_set, opts);
    const Model model = model_from_checkpoint(tr.best);
    for (const EvalSet& es : eval_sets) {
      out.reports.push_back(evaluate(model, es.samples, es.name));
      if (on_report) on_report(out.reports.back());
    }
    out.checkpoints.push_back(std::move(tr.best));
  }
  return out;
}

}  // namespace bda
