#include "bda/gradsuite.hpp"

#include <chrono>
#include <functional>

#include "bda/blocks.hpp"
#include "bda/gradcheck.hpp"
#include "bda/losses.hpp"
#include "bda/model.hpp"
#include "bda/ops.hpp"
#include "bda/trainer.hpp"

namespace bda {

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.data()) v = rng.uniform(lo, hi);
  return t;
}

Var leaf(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  return Var::leaf(random_tensor(shape, rng, lo, hi));
}

Mask random_mask(std::size_t h, std::size_t w, std::uint8_t max_value, Rng& rng) {
  Mask m(h, w);
  for (auto& v : m.values) v = static_cast<std::uint8_t>(rng.below(max_value + 1u));
  return m;
}

// Parameters are moved off their initialization (zero flow heads, zero
// biases) so the check does not sit on a kink of relu / bilinear sampling.
void jitter(const std::vector<Parameter*>& params, Rng& rng, double amount) {
  for (Parameter* p : params)
    for (auto& v : p->mutable_value().data()) v += rng.uniform(-amount, amount);
}

std::vector<Var> vars(const std::vector<Parameter*>& params) {
  std::vector<Var> out;
  for (Parameter* p : params) out.push_back(p->var());
  return out;
}

}  // namespace

std::vector<GradSuiteEntry> run_gradient_suite(std::uint64_t seed) {
  using namespace ops;
  Rng rng(seed);
  std::vector<GradSuiteEntry> out;
  auto run = [&](std::string name, double tol, const std::function<Var()>& fn,
                 std::vector<Var> leaves, GradCheckOptions opt = {}) {
    const auto t0 = std::chrono::steady_clock::now();
    const GradCheckResult r = grad_check(fn, std::move(leaves), opt);
    GradSuiteEntry e;
    e.component = std::move(name);
    e.max_relative_error = r.max_relative_error;
    e.entries_checked = r.entries_checked;
    e.tolerance = tol;
    e.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(e);
  };

  {
    const Var x = leaf({2, 3, 5, 6}, rng), w = leaf({4, 3, 3, 3}, rng), b = leaf({4}, rng);
    const Var t = Var::constant(random_tensor({2, 4, 3, 3}, rng));
    run("conv2d", 1e-6, [&] { return sum(mul(conv2d(x, w, b, 2), t)); }, {x, w, b});
  }
  {
    const Var x = leaf({2, 4, 3, 3}, rng), g = leaf({4}, rng), b = leaf({4}, rng);
    const Var t = Var::constant(random_tensor({2, 4, 3, 3}, rng));
    run("group_norm", 1e-4, [&] { return sum(mul(group_norm(x, 2, g, b), t)); }, {x, g, b});
  }
  {
    const Var x = leaf({1, 2, 3, 4}, rng);
    const Var t = Var::constant(random_tensor({1, 2, 7, 5}, rng));
    run("upsample_bilinear", 1e-6, [&] { return sum(mul(upsample_bilinear(x, 7, 5), t)); }, {x});
  }
  {
    const Var f = leaf({1, 2, 4, 5}, rng);
    const Tensor xs = random_tensor({1, 1, 3, 3}, rng, 0.2, 3.8);
    const Tensor ys = random_tensor({1, 1, 3, 3}, rng, 0.2, 2.8);
    const Var t = Var::constant(random_tensor({1, 2, 3, 3}, rng));
    // Linear in the features; the coordinate gradient is checked separately.
    run("bilinear_sample (features)", 1e-6,
        [&] { return sum(mul(bilinear_sample(f, Var::constant(xs), Var::constant(ys)), t)); }, {f});
    const Var xl = Var::leaf(xs), yl = Var::leaf(ys);
    run("bilinear_sample (coordinates)", 1e-4,
        [&] { return sum(mul(bilinear_sample(Var::constant(f.value()), xl, yl), t)); }, {xl, yl});
  }
  {
    AttentionGateParams p = make_attention_gate("ag", 8, 16, rng);
    jitter(p.parameters(), rng, 0.3);
    const Var x = leaf({1, 8, 4, 4}, rng), g = leaf({1, 16, 2, 2}, rng);
    const Var t = Var::constant(random_tensor({1, 8, 4, 4}, rng));
    std::vector<Var> leaves = vars(p.parameters());
    leaves.push_back(x);
    leaves.push_back(g);
    run("attention_gate", 1e-4, [&] { return sum(mul(attention_gate(x, g, p).gated, t)); }, leaves);
  }
  {
    AlignmentModuleParams p = make_alignment_module("al", 4, rng);
    jitter(p.parameters(), rng, 0.3);
    const Var pre = leaf({1, 4, 4, 4}, rng), post = leaf({1, 4, 4, 4}, rng);
    std::vector<Var> leaves = vars(p.parameters());
    leaves.push_back(pre);
    leaves.push_back(post);
    run("alignment_forward", 1e-4,
        [&] {
          const Var d = sub(alignment_forward(pre, post, p).warped_pre, post);
          return sum(mul(d, d));
        },
        leaves);
  }
  {
    const Var logits = leaf({2, 5, 3, 3}, rng, -2.0, 2.0);
    const std::vector<Mask> dmg{random_mask(3, 3, 4, rng), random_mask(3, 3, 4, rng)};
    run("cross_entropy", 1e-4, [&] { return losses::cross_entropy(logits, dmg); }, {logits});
    const Var l4 = leaf({2, 4, 3, 3}, rng, -2.0, 2.0);
    run("focal_loss", 1e-4,
        [&] { return losses::focal_loss(softmax_channels(l4), dmg); }, {l4});
    run("lovasz_softmax", 1e-4,
        [&] { return losses::lovasz_softmax(softmax_channels(logits), dmg); }, {logits});
  }
  {
    ModelConfig cfg = with_variant(ModelConfig{}, "FOCAL + ALIGN + AGBD");
    cfg.stage_channels = {2, 4, 6, 8};
    Rng model_rng = rng.fork(7);
    Model m(cfg, model_rng);
    jitter(m.parameters(), rng, 0.1);
    Batch batch;
    batch.pre = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    batch.post = random_tensor({1, 3, 16, 16}, rng, 0.0, 1.0);
    batch.dmg = {random_mask(16, 16, 4, rng)};
    batch.loc = {loc_from_dmg(batch.dmg[0])};
    batch.ids = {"gradcheck"};
    run("full model forward + loss (FOCAL + ALIGN + AGBD, 16x16)", 1e-4,
        [&] { return training_loss(m, batch).total; }, vars(m.parameters()),
        {.eps = 1e-6, .max_entries_per_tensor = 4, .seed = seed});
  }
  return out;
}

}  // namespace bda
