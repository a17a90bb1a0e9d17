#include "bda/config.hpp"

#include <charconv>
#include <functional>
#include <sstream>

#include "bda/errors.hpp"

namespace bda {

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value, const char* want) {
  throw ConfigError("config key '" + std::string(key) + "': cannot parse '" +
                    std::string(value) + "' as " + want);
}

double to_double(std::string_view key, std::string_view v) {
  double out = 0.0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "a number");
  return out;
}

std::uint64_t to_u64(std::string_view key, std::string_view v) {
  std::uint64_t out = 0;
  auto [p, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || p != v.data() + v.size()) bad_value(key, v, "an unsigned integer");
  return out;
}

bool to_bool(std::string_view key, std::string_view v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  bad_value(key, v, "a boolean");
}

std::vector<std::string> split_list(std::string_view v) {
  std::vector<std::string> out;
  std::stringstream ss{std::string(v)};
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(trim(item));
  return out;
}

std::string fmt_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, p);
}

std::string fmt_bool(bool b) { return b ? "true" : "false"; }

template <typename Arr, typename F>
std::string fmt_list(const Arr& a, F f) {
  std::string out;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (i) out += ',';
    out += f(a[i]);
  }
  return out;
}

struct Binding {
  std::string key;
  std::string help;
  std::function<void(RunConfig&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

const std::vector<Binding>& bindings() {
  static const std::vector<Binding> kBindings = [] {
    std::vector<Binding> b;
    auto add = [&](std::string key, std::string help,
                   std::function<void(RunConfig&, std::string_view)> set,
                   std::function<std::string(const RunConfig&)> get) {
      b.push_back({std::move(key), std::move(help), std::move(set), std::move(get)});
    };
    add("model.stage_channels", "four strictly increasing encoder widths",
        [](RunConfig& c, std::string_view v) {
          const auto items = split_list(v);
          if (items.size() != kStages) bad_value("model.stage_channels", v, "4 widths");
          for (std::size_t i = 0; i < kStages; ++i) {
            c.model.stage_channels[i] = to_u64("model.stage_channels", items[i]);
          }
        },
        [](const RunConfig& c) {
          return fmt_list(c.model.stage_channels, [](std::size_t x) { return std::to_string(x); });
        });
    add("model.focal", "FOCAL: add the focal term to the damage head loss",
        [](RunConfig& c, std::string_view v) { c.model.enable_focal = to_bool("model.focal", v); },
        [](const RunConfig& c) { return fmt_bool(c.model.enable_focal); });
    add("model.ag_building", "AGB: attention gates in the building decoder",
        [](RunConfig& c, std::string_view v) {
          c.model.enable_ag_building = to_bool("model.ag_building", v);
        },
        [](const RunConfig& c) { return fmt_bool(c.model.enable_ag_building); });
    add("model.ag_damage", "attention gates in the damage decoder (AGBD with ag_building)",
        [](RunConfig& c, std::string_view v) {
          c.model.enable_ag_damage = to_bool("model.ag_damage", v);
        },
        [](const RunConfig& c) { return fmt_bool(c.model.enable_ag_damage); });
    add("model.align", "ALIGN: per-stage flow alignment of pre-event features",
        [](RunConfig& c, std::string_view v) { c.model.enable_align = to_bool("model.align", v); },
        [](const RunConfig& c) { return fmt_bool(c.model.enable_align); });
    add("losses.alpha", "focal class weights for L1..L4",
        [](RunConfig& c, std::string_view v) {
          const auto items = split_list(v);
          if (items.size() != kDamageClasses) bad_value("losses.alpha", v, "4 weights");
          for (std::size_t i = 0; i < kDamageClasses; ++i) {
            c.model.focal.alpha[i] = to_double("losses.alpha", items[i]);
          }
        },
        [](const RunConfig& c) { return fmt_list(c.model.focal.alpha, fmt_double); });
    add("losses.gamma", "focal focusing exponent",
        [](RunConfig& c, std::string_view v) { c.model.focal.gamma = to_double("losses.gamma", v); },
        [](const RunConfig& c) { return fmt_double(c.model.focal.gamma); });
    add("losses.w_ce", "cross-entropy weight (both heads)",
        [](RunConfig& c, std::string_view v) { c.model.loss_weights.w_ce = to_double("losses.w_ce", v); },
        [](const RunConfig& c) { return fmt_double(c.model.loss_weights.w_ce); });
    add("losses.w_focal", "focal weight (damage head, FOCAL only)",
        [](RunConfig& c, std::string_view v) {
          c.model.loss_weights.w_focal = to_double("losses.w_focal", v);
        },
        [](const RunConfig& c) { return fmt_double(c.model.loss_weights.w_focal); });
    add("losses.w_lovasz", "Lovasz-Softmax weight (both heads)",
        [](RunConfig& c, std::string_view v) {
          c.model.loss_weights.w_lovasz = to_double("losses.w_lovasz", v);
        },
        [](const RunConfig& c) { return fmt_double(c.model.loss_weights.w_lovasz); });
    add("train.iterations", "optimizer steps",
        [](RunConfig& c, std::string_view v) { c.train.iterations = to_u64("train.iterations", v); },
        [](const RunConfig& c) { return std::to_string(c.train.iterations); });
    add("train.batch_size", "samples per step",
        [](RunConfig& c, std::string_view v) { c.train.batch_size = to_u64("train.batch_size", v); },
        [](const RunConfig& c) { return std::to_string(c.train.batch_size); });
    add("train.lr", "AdamW learning rate",
        [](RunConfig& c, std::string_view v) { c.train.lr = to_double("train.lr", v); },
        [](const RunConfig& c) { return fmt_double(c.train.lr); });
    add("train.weight_decay", "AdamW decoupled weight decay",
        [](RunConfig& c, std::string_view v) {
          c.train.weight_decay = to_double("train.weight_decay", v);
        },
        [](const RunConfig& c) { return fmt_double(c.train.weight_decay); });
    add("train.crop", "square training crop (clipped to the sample size, multiple of 16)",
        [](RunConfig& c, std::string_view v) { c.train.crop = to_u64("train.crop", v); },
        [](const RunConfig& c) { return std::to_string(c.train.crop); });
    add("train.eval_every", "validation cadence in steps, 0 = never",
        [](RunConfig& c, std::string_view v) { c.train.eval_every = to_u64("train.eval_every", v); },
        [](const RunConfig& c) { return std::to_string(c.train.eval_every); });
    add("train.log_every", "loss log cadence in steps, 0 = validation steps only",
        [](RunConfig& c, std::string_view v) { c.train.log_every = to_u64("train.log_every", v); },
        [](const RunConfig& c) { return std::to_string(c.train.log_every); });
    add("train.seed", "seed for initialization, sampling and augmentation",
        [](RunConfig& c, std::string_view v) { c.train.seed = to_u64("train.seed", v); },
        [](const RunConfig& c) { return std::to_string(c.train.seed); });
    add("train.augment", "random flips, right-angle rotations and crops",
        [](RunConfig& c, std::string_view v) { c.train.augment = to_bool("train.augment", v); },
        [](const RunConfig& c) { return fmt_bool(c.train.augment); });
    add("data.manifest", "dataset manifest JSON",
        [](RunConfig& c, std::string_view v) { c.data.manifest = std::string(v); },
        [](const RunConfig& c) { return c.data.manifest; });
    add("data.valid_split", "manifest split used for checkpoint selection",
        [](RunConfig& c, std::string_view v) { c.data.valid_split = std::string(v); },
        [](const RunConfig& c) { return c.data.valid_split; });
    add("data.eval_split", "manifest split scored by eval",
        [](RunConfig& c, std::string_view v) { c.data.eval_split = std::string(v); },
        [](const RunConfig& c) { return c.data.eval_split; });
    add("data.name", "dataset label written into reports (default: manifest name)",
        [](RunConfig& c, std::string_view v) { c.data.name = std::string(v); },
        [](const RunConfig& c) { return c.data.name; });
    return b;
  }();
  return kBindings;
}

const Binding& find_binding(std::string_view key) {
  for (const auto& b : bindings()) {
    if (b.key == key) return b;
  }
  throw ConfigError("unknown config key '" + std::string(key) + "'");
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> kKeys = [] {
    std::vector<ConfigKey> out;
    const RunConfig defaults;
    for (const auto& b : bindings()) out.push_back({b.key, b.get(defaults), b.help});
    return out;
  }();
  return kKeys;
}

void set_config_value(RunConfig& cfg, std::string_view key, std::string_view value) {
  find_binding(trim(key)).set(cfg, trim(value));
}

std::string get_config_value(const RunConfig& cfg, std::string_view key) {
  return find_binding(key).get(cfg);
}

void apply_config_text(RunConfig& cfg, std::string_view text) {
  std::stringstream ss{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(ss, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key=value");
    }
    set_config_value(cfg, t.substr(0, eq), t.substr(eq + 1));
  }
}

RunConfig parse_config_text(std::string_view text) {
  RunConfig cfg;
  apply_config_text(cfg, text);
  return cfg;
}

std::string format_config(const RunConfig& cfg) {
  std::string out;
  for (const auto& b : bindings()) out += b.key + "=" + b.get(cfg) + "\n";
  return out;
}

}  // namespace bda
