#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "bda/autograd.hpp"
#include "bda/blocks.hpp"
#include "bda/losses.hpp"
#include "bda/rng.hpp"

namespace bda {

inline constexpr std::size_t kStages = 4;
inline constexpr std::size_t kSpatialDivisor = 16;

struct ModelConfig {
  std::array<std::size_t, kStages> stage_channels{16, 32, 64, 128};
  bool enable_focal = false;
  bool enable_ag_building = false;
  bool enable_ag_damage = false;
  bool enable_align = false;
  std::size_t input_channels = 3;
  std::size_t loc_classes = 2;
  std::size_t dmg_classes = 5;
  losses::FocalConfig focal;
  losses::LossWeights loss_weights;

  // Widths must be positive and strictly increasing; head sizes are fixed.
  void validate() const;
  // Loss weights actually used for the damage head: w_focal is zeroed when
  // the FOCAL enhancement is off.
  losses::LossWeights damage_weights() const;
};

// "Baseline" or "+"-joined tokens in the order FOCAL, ALIGN, AGB|AGBD|AGD.
std::string variant_name(const ModelConfig& cfg);
// Inverse of variant_name: sets the four enhancement flags from a name such
// as "FOCAL + ALIGN + AGB". Throws ConfigError on unknown tokens.
ModelConfig with_variant(ModelConfig cfg, std::string_view name);
// The ten evaluated variants in table order.
const std::vector<std::string>& standard_variants();

struct ParamCounts {
  std::size_t base = 0;
  std::size_t ag_building = 0;
  std::size_t ag_damage = 0;
  std::size_t align = 0;
  std::size_t total() const { return base + ag_building + ag_damage + align; }
};

struct ForwardResult {
  Var loc_logits;  // N x 2 x H x W
  Var dmg_logits;  // N x 5 x H x W
  std::vector<Var> pre_features;   // per stage, as encoded (before warping)
  std::vector<Var> post_features;
  std::vector<Var> flows;               // per stage when ALIGN is on
  std::vector<Var> attention_building;  // alpha maps, deepest skip first
  std::vector<Var> attention_damage;
};

struct BuildOptions {
  // Also create parameters for disabled enhancements (they stay unused).
  bool construct_disabled = false;
};

// Siamese encoder (one parameter set for both dates) with a semantic
// (building) decoder over pre-event features and a change (damage) decoder
// over pre+post features. Each encoder stage is a stride-2 3x3 convolution
// followed by 3x3 conv + GN + ReLU. Decoder stages upsample the coarser
// state, concatenate the (optionally gated) skip and fuse with 3x3 conv +
// GN + ReLU; heads are 1x1 convolutions upsampled to input resolution.
class Model {
 public:
  Model(const ModelConfig& cfg, Rng& rng, BuildOptions opts = {});

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  const ModelConfig& config() const { return cfg_; }
  // Flags may be toggled after construction only for modules that exist.
  void set_enhancements(bool ag_building, bool ag_damage, bool align);

  // Spatial size must be divisible by 16. Throws ContractError otherwise.
  ForwardResult forward(const Var& pre, const Var& post) const;

  // Per-stage encoder features of one image.
  std::vector<Var> encode(const Var& image) const;

  // Parameters of the base network plus enabled enhancements, in a fixed order.
  std::vector<Parameter*> parameters();
  std::vector<const Parameter*> parameters() const;
  ParamCounts count_params() const;

 private:
  struct ConvGn {
    Parameter w, b;
    GroupNormParams gn;
    Var operator()(const Var& x, int stride = 1) const;
  };
  struct Conv {
    Parameter w, b;
    Var operator()(const Var& x, int stride = 1) const;
  };
  struct EncoderStage {
    Conv down;
    ConvGn conv;
  };

  std::vector<Parameter*> base_parameters();

  ModelConfig cfg_;
  std::vector<EncoderStage> encoder_;
  std::vector<ConvGn> building_fuse_;  // index s for s = 0..2
  Conv building_head_;
  std::vector<ConvGn> change_temporal_;  // per stage 0..3
  std::vector<ConvGn> change_fuse_;      // index s for s = 0..2
  Conv damage_head_;
  std::vector<AttentionGateParams> ag_building_;  // index s for s = 0..2
  std::vector<AttentionGateParams> ag_damage_;
  std::vector<AlignmentModuleParams> align_;  // per stage 0..3
};

// Element count of a parameter group.
std::size_t count_elements(const std::vector<Parameter*>& params);

}  // namespace bda
