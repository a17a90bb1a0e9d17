#include "bda/model.hpp"

#include <algorithm>
#include <sstream>

#include "bda/errors.hpp"
#include "bda/ops.hpp"

namespace bda {

namespace {

constexpr std::uint64_t kSaltAgBuilding = 0xa6b1;
constexpr std::uint64_t kSaltAgDamage = 0xa6d1;
constexpr std::uint64_t kSaltAlign = 0xa119;

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t");
  return std::string(s.substr(b, e - b + 1));
}

}  // namespace

void ModelConfig::validate() const {
  for (std::size_t s = 0; s < kStages; ++s) {
    if (stage_channels[s] == 0) throw ConfigError("stage widths must be positive");
    if (s > 0 && stage_channels[s] <= stage_channels[s - 1]) {
      throw ConfigError("stage widths must be strictly increasing");
    }
  }
  if (input_channels == 0) throw ConfigError("input_channels must be positive");
  if (loc_classes != 2) throw ConfigError("the building head has exactly 2 classes");
  if (dmg_classes != kDamageClasses + 1) {
    throw ConfigError("the damage head has exactly 5 classes");
  }
  focal.validate();
  loss_weights.validate();
}

losses::LossWeights ModelConfig::damage_weights() const {
  losses::LossWeights w = loss_weights;
  if (!enable_focal) w.w_focal = 0.0;
  return w;
}

std::string variant_name(const ModelConfig& cfg) {
  std::vector<std::string> tokens;
  if (cfg.enable_focal) tokens.emplace_back("FOCAL");
  if (cfg.enable_align) tokens.emplace_back("ALIGN");
  if (cfg.enable_ag_building && cfg.enable_ag_damage) {
    tokens.emplace_back("AGBD");
  } else if (cfg.enable_ag_building) {
    tokens.emplace_back("AGB");
  } else if (cfg.enable_ag_damage) {
    tokens.emplace_back("AGD");
  }
  if (tokens.empty()) return "Baseline";
  std::string out = tokens[0];
  for (std::size_t i = 1; i < tokens.size(); ++i) out += " + " + tokens[i];
  return out;
}

ModelConfig with_variant(ModelConfig cfg, std::string_view name) {
  cfg.enable_focal = cfg.enable_align = false;
  cfg.enable_ag_building = cfg.enable_ag_damage = false;
  const std::string whole = trim(name);
  if (whole == "Baseline" || whole.empty()) return cfg;
  std::stringstream ss(whole);
  std::string tok;
  while (std::getline(ss, tok, '+')) {
    tok = trim(tok);
    if (tok == "FOCAL") {
      cfg.enable_focal = true;
    } else if (tok == "ALIGN") {
      cfg.enable_align = true;
    } else if (tok == "AGB") {
      cfg.enable_ag_building = true;
    } else if (tok == "AGBD") {
      cfg.enable_ag_building = cfg.enable_ag_damage = true;
    } else if (tok == "AGD") {
      cfg.enable_ag_damage = true;
    } else {
      throw ConfigError("unknown variant token '" + tok + "' in '" + whole + "'");
    }
  }
  return cfg;
}

const std::vector<std::string>& standard_variants() {
  static const std::vector<std::string> kNames = {
      "Baseline",
      "AGBD",
      "AGB",
      "ALIGN",
      "FOCAL",
      "FOCAL + ALIGN",
      "FOCAL + AGB",
      "ALIGN + AGB",
      "FOCAL + ALIGN + AGBD",
      "FOCAL + ALIGN + AGB",
  };
  return kNames;
}

Var Model::ConvGn::operator()(const Var& x, int stride) const {
  return ops::relu(gn(ops::conv2d(x, w.var(), b.var(), stride)));
}

Var Model::Conv::operator()(const Var& x, int stride) const {
  return ops::conv2d(x, w.var(), b.var(), stride);
}

Model::Model(const ModelConfig& cfg, Rng& rng, BuildOptions opts) : cfg_(cfg) {
  cfg_.validate();
  const auto& c = cfg_.stage_channels;
  auto conv = [&](const std::string& name, std::size_t cout, std::size_t cin,
                  std::size_t k) {
    return Conv{Parameter(name + ".w", he_uniform(rng, cout, cin, k)),
                Parameter(name + ".b", Tensor({cout}, 0.0))};
  };
  auto conv_gn = [&](const std::string& name, std::size_t cout, std::size_t cin) {
    Conv cv = conv(name, cout, cin, 3);
    return ConvGn{std::move(cv.w), std::move(cv.b), GroupNormParams(name + ".gn", cout)};
  };

  // Base network parameters are always drawn from the main stream in the
  // same order, independent of the enhancement flags.
  std::size_t prev = cfg_.input_channels;
  for (std::size_t s = 0; s < kStages; ++s) {
    const std::string p = "encoder." + std::to_string(s);
    EncoderStage st{conv(p + ".down", c[s], prev, 3), conv_gn(p + ".conv", c[s], c[s])};
    encoder_.push_back(std::move(st));
    prev = c[s];
  }
  for (std::size_t s = 0; s + 1 < kStages; ++s) {
    building_fuse_.push_back(
        conv_gn("building.fuse." + std::to_string(s), c[s], c[s + 1] + c[s]));
  }
  building_head_ = conv("building.head", cfg_.loc_classes, c[0], 1);
  for (std::size_t s = 0; s < kStages; ++s) {
    change_temporal_.push_back(
        conv_gn("change.temporal." + std::to_string(s), c[s], 2 * c[s]));
  }
  for (std::size_t s = 0; s + 1 < kStages; ++s) {
    change_fuse_.push_back(
        conv_gn("change.fuse." + std::to_string(s), c[s], c[s + 1] + c[s]));
  }
  damage_head_ = conv("damage.head", cfg_.dmg_classes, c[0], 1);

  if (cfg_.enable_ag_building || opts.construct_disabled) {
    Rng r = rng.fork(kSaltAgBuilding);
    for (std::size_t s = 0; s + 1 < kStages; ++s) {
      ag_building_.push_back(
          make_attention_gate("building.ag." + std::to_string(s), c[s], c[s + 1], r));
    }
  }
  if (cfg_.enable_ag_damage || opts.construct_disabled) {
    Rng r = rng.fork(kSaltAgDamage);
    for (std::size_t s = 0; s + 1 < kStages; ++s) {
      ag_damage_.push_back(
          make_attention_gate("change.ag." + std::to_string(s), c[s], c[s + 1], r));
    }
  }
  if (cfg_.enable_align || opts.construct_disabled) {
    Rng r = rng.fork(kSaltAlign);
    for (std::size_t s = 0; s < kStages; ++s) {
      align_.push_back(make_alignment_module("align." + std::to_string(s), c[s], r));
    }
  }
}

void Model::set_enhancements(bool ag_building, bool ag_damage, bool align) {
  if ((ag_building && ag_building_.empty()) || (ag_damage && ag_damage_.empty()) ||
      (align && align_.empty())) {
    throw ContractError("set_enhancements: module was not constructed");
  }
  cfg_.enable_ag_building = ag_building;
  cfg_.enable_ag_damage = ag_damage;
  cfg_.enable_align = align;
}

std::vector<Var> Model::encode(const Var& image) const {
  std::vector<Var> feats;
  Var h = image;
  for (const auto& st : encoder_) {
    h = st.conv(st.down(h, 2));
    feats.push_back(h);
  }
  return feats;
}

ForwardResult Model::forward(const Var& pre, const Var& post) const {
  pre.value().require_rank4("forward pre");
  if (pre.shape() != post.shape()) {
    throw ContractError("forward: pre and post shapes differ: " + shape_str(pre.shape()) +
                        " vs " + shape_str(post.shape()));
  }
  const std::size_t h = pre.shape()[2], w = pre.shape()[3];
  if (h % kSpatialDivisor != 0 || w % kSpatialDivisor != 0 || h == 0 || w == 0) {
    throw ContractError("forward: spatial size " + std::to_string(h) + "x" +
                        std::to_string(w) + " must be divisible by " +
                        std::to_string(kSpatialDivisor));
  }
  if (pre.shape()[1] != cfg_.input_channels) {
    throw ContractError("forward: expected " + std::to_string(cfg_.input_channels) +
                        " input channels, got " + shape_str(pre.shape()));
  }

  ForwardResult r;
  r.pre_features = encode(pre);
  r.post_features = encode(post);

  std::vector<Var> pre_used = r.pre_features;
  if (cfg_.enable_align) {
    for (std::size_t s = 0; s < kStages; ++s) {
      auto a = alignment_forward(r.pre_features[s], r.post_features[s], align_[s]);
      r.flows.push_back(a.flow);
      pre_used[s] = a.warped_pre;
    }
  }

  // Semantic decoder: pre-event features only.
  Var state = pre_used[kStages - 1];
  for (std::size_t s = kStages - 1; s-- > 0;) {
    Var skip = pre_used[s];
    if (cfg_.enable_ag_building) {
      auto g = attention_gate(skip, state, ag_building_[s]);
      skip = g.gated;
      r.attention_building.push_back(g.alpha);
    }
    const Var up = ops::upsample_bilinear(state, skip.shape()[2], skip.shape()[3]);
    state = building_fuse_[s](ops::concat_channels({up, skip}));
  }
  r.loc_logits = ops::upsample_bilinear(building_head_(state), h, w);

  // Change decoder: per-stage temporal fusion, then coarse-to-fine merging.
  std::vector<Var> fused;
  for (std::size_t s = 0; s < kStages; ++s) {
    fused.push_back(change_temporal_[s](ops::concat_channels({pre_used[s], r.post_features[s]})));
  }
  state = fused[kStages - 1];
  for (std::size_t s = kStages - 1; s-- > 0;) {
    Var skip = fused[s];
    if (cfg_.enable_ag_damage) {
      auto g = attention_gate(skip, state, ag_damage_[s]);
      skip = g.gated;
      r.attention_damage.push_back(g.alpha);
    }
    const Var up = ops::upsample_bilinear(state, skip.shape()[2], skip.shape()[3]);
    state = change_fuse_[s](ops::concat_channels({up, skip}));
  }
  r.dmg_logits = ops::upsample_bilinear(damage_head_(state), h, w);
  return r;
}

std::vector<Parameter*> Model::base_parameters() {
  std::vector<Parameter*> out;
  auto add_conv = [&](Conv& c) {
    out.push_back(&c.w);
    out.push_back(&c.b);
  };
  auto add_conv_gn = [&](ConvGn& c) {
    out.push_back(&c.w);
    out.push_back(&c.b);
    out.push_back(&c.gn.gamma);
    out.push_back(&c.gn.beta);
  };
  for (auto& st : encoder_) {
    add_conv(st.down);
    add_conv_gn(st.conv);
  }
  for (auto& f : building_fuse_) add_conv_gn(f);
  add_conv(building_head_);
  for (auto& f : change_temporal_) add_conv_gn(f);
  for (auto& f : change_fuse_) add_conv_gn(f);
  add_conv(damage_head_);
  return out;
}

std::vector<Parameter*> Model::parameters() {
  std::vector<Parameter*> out = base_parameters();
  auto append = [&](auto& mods) {
    for (auto& m : mods) {
      for (Parameter* p : m.parameters()) out.push_back(p);
    }
  };
  if (cfg_.enable_ag_building) append(ag_building_);
  if (cfg_.enable_ag_damage) append(ag_damage_);
  if (cfg_.enable_align) append(align_);
  return out;
}

std::vector<const Parameter*> Model::parameters() const {
  auto ps = const_cast<Model*>(this)->parameters();
  return {ps.begin(), ps.end()};
}

std::size_t count_elements(const std::vector<Parameter*>& params) {
  std::size_t n = 0;
  for (const Parameter* p : params) n += p->numel();
  return n;
}

ParamCounts Model::count_params() const {
  auto* self = const_cast<Model*>(this);
  ParamCounts c;
  c.base = count_elements(self->base_parameters());
  auto group = [](auto& mods) {
    std::size_t n = 0;
    for (auto& m : mods) n += count_elements(m.parameters());
    return n;
  };
  if (cfg_.enable_ag_building) c.ag_building = group(self->ag_building_);
  if (cfg_.enable_ag_damage) c.ag_damage = group(self->ag_damage_);
  if (cfg_.enable_align) c.align = group(self->align_);
  return c;
}

}  // namespace bda
