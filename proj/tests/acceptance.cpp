// Acceptance checks, one PASS/FAIL line per criterion. Run all of them, or a
// single one with --criterion N (ctest registers each separately).

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "bda/blocks.hpp"
#include "bda/gradsuite.hpp"
#include "bda/log.hpp"
#include "bda/losses.hpp"
#include "bda/metrics.hpp"
#include "bda/model.hpp"
#include "bda/ops.hpp"
#include "bda/rasterize.hpp"
#include "bda/synthetic.hpp"
#include "bda/trainer.hpp"
#include "oracles.hpp"

using namespace bda;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

// 1. focal(gamma=0, alpha=1) equals cross-entropy over the same pixels.
Outcome focal_ce_identity() {
  const auto t0 = Clock::now();
  Rng rng(101);
  losses::FocalConfig plain;
  plain.alpha = {1.0, 1.0, 1.0, 1.0};
  plain.gamma = 0.0;
  double worst = 0.0;
  for (int c = 0; c < 1000; ++c) {
    const std::size_t b = 1 + rng.below(2), h = 1 + rng.below(4), w = 1 + rng.below(4);
    const Var logits = Var::constant(oracle::random_tensor({b, 4, h, w}, rng, -4.0, 4.0));
    std::vector<Mask> dmg, shifted;
    for (std::size_t s = 0; s < b; ++s) {
      Mask m = oracle::random_mask(h, w, 4, rng);
      m.values[rng.below(m.size())] = static_cast<std::uint8_t>(1 + rng.below(4));
      Mask t = m;
      for (auto& v : t.values) v = v == 0 ? 255 : static_cast<std::uint8_t>(v - 1);
      dmg.push_back(m);
      shifted.push_back(t);
    }
    const double fl = losses::focal_loss(ops::softmax_channels(logits), dmg, plain).value().item();
    const double ce = losses::cross_entropy(logits, shifted, 255).value().item();
    worst = std::max(worst, std::abs(fl - ce));
  }
  const double t = seconds_since(t0);
  return {worst < 1e-9 && t < 5.0, fmt("max |focal - CE| = %.3e over 1000 cases (< 1e-9), %.2f s (< 5 s)", worst, t)};
}

// 2. Single-pixel hand value.
Outcome focal_hand_value() {
  Tensor probs({1, 4, 1, 1}, std::vector<double>{0.5 / 3, 0.5, 0.5 / 3, 0.5 / 3});
  Mask m(1, 1, 2);
  const std::vector<Mask> dmg{m};
  losses::FocalConfig cfg;  // alpha_L2 = 1.6, gamma = 1.5
  const double v = losses::focal_loss(Var::constant(probs), dmg, cfg).value().item();
  const double exact = 1.6 * std::pow(0.5, 1.5) * std::numbers::ln2;
  const double target = 0.392095;
  return {std::abs(v - target) < 1e-6,
          fmt("loss = %.10f, target 0.392095 +- 1e-6 (|diff| = %.3e); closed form 1.6*0.5^1.5*ln2 = %.10f",
              v, std::abs(v - target), exact)};
}

// 3. Finite-difference gradient suite.
Outcome gradient_suite() {
  const auto t0 = Clock::now();
  bool ok = true;
  std::string worst_name;
  double worst = 0.0;
  std::size_t n = 0;
  for (const GradSuiteEntry& e : run_gradient_suite(1)) {
    ok = ok && e.passed();
    if (!e.passed()) worst_name += " " + e.component;
    worst = std::max(worst, e.max_relative_error);
    ++n;
  }
  const double t = seconds_since(t0);
  return {ok && t < 120.0,
          fmt("%zu components, max relative error %.3e (< 1e-4; < 1e-6 for linear ops)%s, %.2f s (< 120 s)", n,
              worst, ok ? "" : (" failing:" + worst_name).c_str(), t)};
}

// 4. Attention-gate retention floor.
Outcome gate_floor() {
  Rng rng(404);
  std::size_t evaluations = 0, violations = 0;
  double lo = 1.0, hi = 0.0;
  while (evaluations < 100000) {
    AttentionGateParams p = make_attention_gate("ag", 4, 8, rng);
    for (Parameter* q : p.parameters())
      for (auto& v : q->mutable_value().data()) v += rng.uniform(-3.0, 3.0);
    const Var x = Var::constant(oracle::random_tensor({2, 4, 16, 16}, rng, -5.0, 5.0));
    const Var g = Var::constant(oracle::random_tensor({2, 8, 8, 8}, rng, -5.0, 5.0));
    const GateOutput o = attention_gate(x, g, p);
    const Tensor& a = o.alpha.value();
    for (std::size_t i = 0; i < a.numel(); ++i) {
      const double mult = 0.5 + 0.5 * a[i];
      lo = std::min(lo, mult);
      hi = std::max(hi, mult);
      violations += !(mult >= 0.5 && mult <= 1.0);
    }
    // The gated output must equal the multiplier times x at every element.
    const std::size_t hw = 16 * 16;
    for (std::size_t n = 0; n < 2; ++n)
      for (std::size_t c = 0; c < 4; ++c)
        for (std::size_t i = 0; i < hw; ++i) {
          const double mult = 0.5 + 0.5 * a[n * hw + i];
          const double xv = x.value()[(n * 4 + c) * hw + i];
          violations += std::abs(o.gated.value()[(n * 4 + c) * hw + i] - mult * xv) > 1e-12;
        }
    evaluations += a.numel();
  }

  AttentionGateParams p = make_attention_gate("ag", 4, 8, rng);
  const Var x = Var::constant(oracle::random_tensor({2, 4, 16, 16}, rng, -5.0, 5.0));
  const Var g = Var::constant(oracle::random_tensor({2, 8, 8, 8}, rng, -5.0, 5.0));
  auto forced = [&](double bias) {
    for (auto& v : p.psi.mutable_value().data()) v = 0.0;
    p.b_psi.mutable_value()[0] = bias;
    return attention_gate(x, g, p).gated.value();
  };
  const Tensor off = forced(-50.0), on = forced(50.0);
  bool half_exact = true, identity_exact = true;
  for (std::size_t i = 0; i < x.value().numel(); ++i) {
    half_exact = half_exact && off[i] == 0.5 * x.value()[i];
    identity_exact = identity_exact && on[i] == x.value()[i];
  }
  return {violations == 0 && half_exact && identity_exact,
          fmt("%zu gate evaluations, multiplier range [%.6f, %.6f], %zu violations; alpha=0 gives 0.5x exactly: %s; "
              "alpha=1 gives x exactly: %s",
              evaluations, lo, hi, violations, half_exact ? "yes" : "no", identity_exact ? "yes" : "no")};
}

// 5. Zero-initialized alignment is an identity.
Outcome alignment_identity() {
  Rng rng(505);
  bool flow_zero = true, bit_equal = true;
  for (std::size_t c : {4u, 8u, 16u}) {
    const AlignmentModuleParams p = make_alignment_module("al", c, rng);
    const Var pre = Var::constant(oracle::random_tensor({2, c, 8, 8}, rng));
    const Var post = Var::constant(oracle::random_tensor({2, c, 8, 8}, rng));
    const AlignmentOutput o = alignment_forward(pre, post, p);
    for (double v : o.flow.value().data()) flow_zero = flow_zero && v == 0.0;
    bit_equal = bit_equal && o.warped_pre.value() == pre.value();
  }

  const auto samples = synthetic::overfit_fixture(4, 32, 55);
  TrainConfig tc = TrainConfig::toy_preset();
  tc.iterations = 1;
  tc.log_every = 1;
  tc.seed = 9;
  double worst = 0.0, example = 0.0;
  std::size_t pairs = 0;
  for (const std::string& v : standard_variants()) {
    ModelConfig plain = with_variant(ModelConfig{}, v);
    if (plain.enable_align) continue;
    ModelConfig aligned = plain;
    aligned.enable_align = true;
    auto first_loss = [&](const ModelConfig& m) {
      std::vector<double> losses;
      TrainOptions opts;
      opts.on_step = [&](std::size_t, const StepLosses& l) { losses.push_back(l.total); };
      train(m, tc, samples, {}, opts);
      return losses.at(0);
    };
    const double a = first_loss(plain), b = first_loss(aligned);
    if (pairs == 0) example = a;
    worst = std::max(worst, std::abs(a - b));
    ++pairs;
  }
  return {flow_zero && bit_equal && worst < 1e-12,
          fmt("flow identically zero: %s; warped features bit-equal: %s; step-0 loss |ALIGN - plain| max %.3e over %zu "
              "variant pairs (< 1e-12; Baseline step-0 loss %.6f)",
              flow_zero ? "yes" : "no", bit_equal ? "yes" : "no", worst, pairs, example)};
}

// 6. Two rasterizers agree on random polygons.
Outcome rasterizer_agreement() {
  const auto t0 = Clock::now();
  Rng rng(606);
  double worst = 1.0;
  for (int t = 0; t < 100; ++t) {
    BuildingPolygon poly;
    const double cx = rng.uniform(20.0, 236.0), cy = rng.uniform(20.0, 236.0);
    const std::size_t n = 3 + rng.below(14);
    std::vector<double> angles(n);
    for (auto& a : angles) a = rng.uniform(0.0, 2.0 * std::numbers::pi);
    // Every fourth polygon keeps its random vertex order (self-intersecting).
    if (t % 4) std::sort(angles.begin(), angles.end());
    for (double a : angles) {
      const double r = rng.uniform(5.0, 120.0);
      poly.ring.push_back({cx + r * std::cos(a), cy + r * std::sin(a)});
    }
    poly.subtype = static_cast<DamageSubtype>(rng.below(4));
    const std::vector<BuildingPolygon> polys{poly};
    const Mask a = rasterize_mask(polys, 256, 256, MaskMode::kDmg, RasterAlgorithm::kScanline);
    const Mask b = rasterize_mask(polys, 256, 256, MaskMode::kDmg, RasterAlgorithm::kPointInPolygon);
    worst = std::min(worst, pixel_agreement(a, b));
  }
  const double t = seconds_since(t0);
  return {worst >= 0.998 && t < 30.0,
          fmt("minimum agreement %.6f over 100 polygons at 256x256 (>= 0.998), %.2f s (< 30 s)", worst, t)};
}

// 7. Streaming metrics equal a brute-force recount.
Outcome metric_oracle() {
  Rng rng(707);
  std::size_t mismatches = 0;
  double worst_identity = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const std::size_t samples = 1 + rng.below(4);
    std::vector<Mask> pl, pd, tl, td;
    ConfusionMatrix cm;
    for (std::size_t s = 0; s < samples; ++s) {
      td.push_back(oracle::random_mask(8, 8, 4, rng));
      tl.push_back(loc_from_dmg(td.back()));
      pd.push_back(oracle::random_mask(8, 8, 4, rng));
      pl.push_back(oracle::random_mask(8, 8, 1, rng));
      cm.accumulate(pl.back(), pd.back(), {tl.back(), td.back()});
    }
    const ScoreReport r = compute_scores(cm, samples);
    const oracle::Scores o = oracle::recount(pl, pd, tl, td);
    mismatches += !(r.f1_loc == o.loc && r.f1_clf == o.clf && r.f1_oa == o.oa && r.f1_levels == o.level);
    worst_identity = std::max(worst_identity, std::abs(r.f1_oa - (0.3 * r.f1_loc + 0.7 * r.f1_clf)));
  }
  return {mismatches == 0 && worst_identity < 1e-12,
          fmt("%zu of 1000 mask sets differ from the recount (exact); max |oa - (0.3 loc + 0.7 clf)| = %.3e (< 1e-12)",
              mismatches, worst_identity)};
}

// 8. Parameter-count structure of the enhancements.
Outcome parameter_deltas() {
  auto count = [](const std::string& v) {
    Rng rng(8);
    return Model(with_variant(ModelConfig{}, v), rng).count_params().total();
  };
  const long base = static_cast<long>(count("Baseline"));
  auto delta = [&](const std::string& v) { return static_cast<long>(count(v)) - base; };
  const long focal = delta("FOCAL"), agb = delta("AGB"), agbd = delta("AGBD"), align = delta("ALIGN");
  const long align_agb = delta("ALIGN + AGB") - agb, align_agbd = delta("ALIGN + AGBD") - agbd;
  const long f_align_agb = delta("FOCAL + ALIGN + AGB") - delta("FOCAL + AGB");
  const bool ok = focal == 0 && agb > 0 && agbd == 2 * agb && align > 0 && align_agb == align &&
                  align_agbd == align && f_align_agb == align;
  return {ok, fmt("baseline %ld params; FOCAL +%ld (= 0); AGB +%ld; AGBD +%ld (= 2 x AGB); ALIGN +%ld, with AGB +%ld, "
                  "with AGBD +%ld, with FOCAL+AGB +%ld (invariant)",
                  base, focal, agb, agbd, align, align_agb, align_agbd, f_align_agb)};
}

// 9. Overfit smoke run.
Outcome overfit_smoke() {
  const auto samples = synthetic::overfit_fixture(4, 32, 7);
  const ModelConfig m = with_variant(ModelConfig{}, "FOCAL + ALIGN + AGB");
  TrainConfig tc = TrainConfig::toy_preset();
  tc.iterations = 300;
  tc.eval_every = 50;
  tc.log_every = 50;
  tc.seed = 2024;
  const auto t0 = Clock::now();
  const TrainResult a = train(m, tc, samples, samples);
  const double t = seconds_since(t0);
  const TrainResult b = train(m, tc, samples, samples);
  const bool same = encode_checkpoint(a.best) == encode_checkpoint(b.best) && a.log.to_jsonl() == b.log.to_jsonl();
  const double oa = evaluate(model_from_checkpoint(a.best), samples).f1_oa;
  return {oa >= 0.90 && t < 300.0 && same,
          fmt("f1_oa %.4f on the 4-pair fixture (>= 0.90) at iteration %zu of %zu, %.1f s per run (< 300 s), "
              "repeat run byte-identical: %s",
              oa, a.best_iteration, tc.iterations, t, same ? "yes" : "no")};
}

// 10. Focal loss helps the minority class.
Outcome imbalance_property() {
  const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5, 6, 7, 8, 9, 10};
  const ImbalanceSummary s = imbalance_experiment(seeds);
  std::ostringstream rows;
  for (const auto& r : s.rows)
    rows << fmt(" %llu:%.3f/%.3f", static_cast<unsigned long long>(r.seed), r.baseline_minority_f1,
                r.focal_minority_f1);
  return {s.focal_at_least_baseline >= 7,
          fmt("FOCAL minority F1 >= Baseline in %zu of 10 seeds (>= 7); seed:baseline/focal", s.focal_at_least_baseline) +
              rows.str()};
}

// 11. Full variant sweep across two synthetic domains.
Outcome protocol_sweep() {
  const auto t0 = Clock::now();
  const auto d0 = synthetic::domain_fixture(0, 14, 32, 1100);
  const auto d1 = synthetic::domain_fixture(1, 4, 32, 1101);
  const std::span<const Sample> all0(d0);
  const auto train_set = all0.first(8), valid_set = all0.subspan(8, 2), test0 = all0.subspan(10, 4);
  const std::vector<EvalSet> sets{{"domain0", test0}, {"domain1", d1}};
  SweepSettings ss;
  ss.train = TrainConfig::toy_preset();
  ss.train.iterations = 60;
  ss.train.eval_every = 20;
  ss.train.log_every = 0;
  ss.train.seed = 11;
  ss.train_name = "domain0";
  const SweepResult r = run_sweep(train_set, valid_set, sets, ss);
  const std::string csv = r.to_csv();
  const double t = seconds_since(t0);

  bool ok = r.reports.size() == 20;
  double worst = 0.0, worst_csv = 0.0;
  for (std::size_t i = 0; i < r.reports.size(); ++i) {
    const ScoreReport& rep = r.reports[i];
    ok = ok && rep.variant == standard_variants()[i / 2] && rep.dataset == sets[i % 2].name;
    worst = std::max(worst, std::abs(rep.f1_oa - (0.3 * rep.f1_loc + 0.7 * rep.f1_clf)));
  }
  std::istringstream in(csv);
  std::string line;
  std::getline(in, line);
  ok = ok && line == "variant,dataset,samples,f1_loc,f1_clf,f1_oa,f1_l1,f1_l2,f1_l3,f1_l4";
  std::size_t rows = 0;
  while (std::getline(in, line)) {
    std::vector<std::string> cols;
    std::stringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cols.push_back(c);
    if (cols.size() != 10) {
      ok = false;
      continue;
    }
    // Printed values are rounded to 4 decimals, so the identity holds to 1e-4.
    worst_csv = std::max(worst_csv, std::abs(std::stod(cols[5]) - (0.3 * std::stod(cols[3]) + 0.7 * std::stod(cols[4]))));
    ++rows;
  }
  ok = ok && rows == 20 && worst < 1e-12 && worst_csv <= 1e-4 + 1e-9 && t < 1800.0;
  return {ok, fmt("%zu CSV rows (10 variants x 2 domains), columns f1_loc,f1_clf,f1_oa,f1_l1..f1_l4; max identity "
                  "error %.3e in reports (< 1e-12), %.1e in printed CSV (rounding); %.1f s (< 1800 s)",
                  rows, worst, worst_csv, t) + "\n" + csv};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"acceptance checks"};
  int only = 0;
  app.add_option("--criterion", only, "run a single criterion (1-11)")->check(CLI::Range(1, 11));
  CLI11_PARSE(app, argc, argv);
  set_log_level(LogLevel::kQuiet);

  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"focal-CE identity", focal_ce_identity},
      {"focal hand value", focal_hand_value},
      {"gradient suite", gradient_suite},
      {"gate floor", gate_floor},
      {"alignment identity", alignment_identity},
      {"rasterizer agreement", rasterizer_agreement},
      {"metric oracle", metric_oracle},
      {"parameter deltas", parameter_deltas},
      {"overfit smoke", overfit_smoke},
      {"imbalance property", imbalance_property},
      {"protocol sweep", protocol_sweep},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (only && static_cast<std::size_t>(only) != i + 1) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    std::printf("criterion %2zu %-22s %s  %s\n", i + 1, criteria[i].first, o.pass ? "PASS" : "FAIL", o.detail.c_str());
    std::fflush(stdout);
    failed += !o.pass;
  }
  return failed ? 1 : 0;
}
