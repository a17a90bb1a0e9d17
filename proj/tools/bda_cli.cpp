// bda: command-line driver for preprocessing, training, evaluation and
// diagnostics. Exit codes: 0 success, 1 data error / failed check, 2 usage
// error (bad flags or config, missing checkpoint or manifest).

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "bda/checkpoint.hpp"
#include "bda/config.hpp"
#include "bda/dataset.hpp"
#include "bda/errors.hpp"
#include "bda/gradsuite.hpp"
#include "bda/image_io.hpp"
#include "bda/labels.hpp"
#include "bda/log.hpp"
#include "bda/rasterize.hpp"
#include "bda/synthetic.hpp"
#include "bda/trainer.hpp"
#include "json.hpp"

namespace fs = std::filesystem;
using namespace bda;

namespace {

constexpr int kExitData = 1;
constexpr int kExitUsage = 2;

// Missing inputs named on the command line are usage errors, not data errors.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string read_text(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw DataError("cannot read " + p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text(const fs::path& p, const std::string& text) {
  if (p.has_parent_path()) fs::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot write " + p.string());
  out << text;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty() || !fs::is_regular_file(p)) throw UsageError(what + " not found: " + p.string());
}

// ---- configuration ----------------------------------------------------------

struct ConfigFlags {
  std::string preset = "toy";
  std::string file;
  std::vector<std::string> sets;
  std::string variant;
  std::string manifest;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> iterations;

  void add_to(CLI::App* app) {
    app->add_option("--preset", preset, "training defaults: toy (32 px fixtures) or full (full scale)")
        ->check(CLI::IsMember({"toy", "full"}));
    app->add_option("--config", file, "key=value config file");
    app->add_option("--set", sets, "override one key (key=value), repeatable");
    app->add_option("--variant", variant, "variant name, e.g. \"FOCAL + ALIGN + AGB\"");
    app->add_option("--manifest", manifest, "dataset manifest (data.manifest)");
    app->add_option("--seed", seed, "train.seed");
    app->add_option("--iterations", iterations, "train.iterations");
  }

  // Preset, then the config file, then flags.
  RunConfig resolve() const {
    RunConfig cfg;
    cfg.train = preset == "full" ? TrainConfig::full_preset() : TrainConfig::toy_preset();
    if (!file.empty()) {
      require_file(file, "config file");
      apply_config_text(cfg, read_text(file));
    }
    for (const std::string& kv : sets) {
      const auto eq = kv.find('=');
      if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + kv + "'");
      set_config_value(cfg, kv.substr(0, eq), kv.substr(eq + 1));
    }
    if (!variant.empty()) cfg.model = with_variant(cfg.model, variant);
    if (!manifest.empty()) cfg.data.manifest = manifest;
    if (seed) cfg.train.seed = *seed;
    if (iterations) cfg.train.iterations = *iterations;
    cfg.model.validate();
    cfg.train.validate();
    return cfg;
  }
};

struct LoadedManifest {
  SplitManifest manifest;
  fs::path root;

  std::vector<Sample> load(const std::string& split) const {
    std::vector<Sample> out;
    for (const std::string& id : manifest.split(split)) out.push_back(load_sample(root, id));
    return out;
  }
};

LoadedManifest open_manifest(const std::string& path) {
  require_file(path, "manifest");
  // read_manifest resolves the root against the manifest's directory.
  LoadedManifest lm{read_manifest(path), {}};
  lm.root = lm.manifest.root.empty() ? fs::path(".") : fs::path(lm.manifest.root);
  return lm;
}

std::string dataset_label(const RunConfig& cfg, const LoadedManifest& lm) {
  if (!cfg.data.name.empty()) return cfg.data.name;
  if (!lm.manifest.name.empty()) return lm.manifest.name;
  return fs::path(cfg.data.manifest).stem().string();
}

// ---- preprocess -------------------------------------------------------------

struct PreprocessArgs {
  std::string labels, out, mode = "both", check, algorithm = "scanline";
  std::size_t width = 1024, height = 1024;
};

// "<id>_post_disaster.json" -> "<id>"
std::string label_sample(const fs::path& p) {
  const std::string stem = p.stem().string();
  for (const std::string s : {"_post_disaster", "_pre_disaster"}) {
    if (stem.size() > s.size() && stem.ends_with(s)) return stem.substr(0, stem.size() - s.size());
  }
  return stem;
}

int cmd_preprocess(const PreprocessArgs& a) {
  if (!fs::is_directory(a.labels)) throw UsageError("label directory not found: " + a.labels);
  if (a.mode != "loc" && a.mode != "dmg" && a.mode != "both")
    throw ConfigError("--mode must be loc, dmg or both");
  const RasterAlgorithm algo = a.algorithm == "pip" ? RasterAlgorithm::kPointInPolygon
                                                    : RasterAlgorithm::kScanline;
  if (a.algorithm != "pip" && a.algorithm != "scanline")
    throw ConfigError("--algorithm must be scanline or pip");

  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(a.labels))
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  std::sort(files.begin(), files.end());
  fs::create_directories(a.out);

  std::size_t written = 0, failed = 0;
  std::uint64_t agree = 0, compared = 0;
  std::size_t missing_refs = 0;
  for (const fs::path& f : files) {
    try {
      const std::string text = read_text(f);
      std::size_t w = a.width, h = a.height;
      // xBD label files carry the image size in their metadata.
      const auto j = nlohmann::json::parse(text, nullptr, false);
      if (!j.is_discarded() && j.contains("metadata")) {
        w = j["metadata"].value("width", w);
        h = j["metadata"].value("height", h);
      }
      const auto polys = parse_labels(text);
      const std::string id = label_sample(f);
      std::vector<std::pair<MaskMode, std::string>> jobs;
      if (a.mode != "dmg") jobs.push_back({MaskMode::kLoc, id + "_pre_mask.png"});
      if (a.mode != "loc") jobs.push_back({MaskMode::kDmg, id + "_post_mask.png"});
      for (const auto& [mode, name] : jobs) {
        const Mask m = rasterize_mask(polys, h, w, mode, algo);
        save_mask(fs::path(a.out) / name, m);
        ++written;
        if (!a.check.empty()) {
          const fs::path ref = fs::path(a.check) / name;
          if (!fs::exists(ref)) {
            ++missing_refs;
            continue;
          }
          const Mask r = load_mask(ref);
          if (r.height != m.height || r.width != m.width) throw DataError(ref.string() + ": size differs");
          for (std::size_t i = 0; i < m.size(); ++i) agree += m.values[i] == r.values[i];
          compared += m.size();
        }
      }
    } catch (const std::exception& e) {
      std::cerr << "error: " << f.string() << ": " << e.what() << "\n";
      ++failed;
    }
  }
  std::cout << "label files: " << files.size() << ", masks written: " << written
            << ", failed: " << failed << "\n";
  if (!a.check.empty()) {
    if (missing_refs) std::cerr << "warning: " << missing_refs << " reference masks missing\n";
    const double frac = compared ? static_cast<double>(agree) / static_cast<double>(compared) : 0.0;
    std::printf("pixel agreement: %.6f (%llu / %llu)\n", frac,
                static_cast<unsigned long long>(agree), static_cast<unsigned long long>(compared));
  }
  return failed ? kExitData : 0;
}

// ---- stats ------------------------------------------------------------------

int cmd_stats(const std::string& dir, const std::string& json_out) {
  if (!fs::is_directory(dir)) throw UsageError("mask directory not found: " + dir);
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    const std::string name = e.path().filename().string();
    if (name.size() > 14 && name.ends_with("_post_mask.png")) files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  if (files.empty()) std::cerr << "warning: no *_post_mask.png files in " << dir << "\n";
  std::vector<Mask> masks;
  for (const auto& f : files) masks.push_back(load_mask(f));
  const DatasetStats st = dataset_stats(masks);

  std::printf("%-18s %10s %10s %10s %10s %10s\n", "", "L1", "L2", "L3", "L4", "Total");
  std::printf("%-18s", "Number of Images");
  for (auto c : st.image_counts) std::printf(" %10zu", c);
  std::printf(" %10zu\n", st.total_images);
  std::printf("%-18s", "Pixel Ratio (%)");
  for (auto r : st.pixel_ratios) std::printf(" %10.2f", 100.0 * r);
  std::printf(" %10s\n", "");

  nlohmann::ordered_json j;
  j["total_images"] = st.total_images;
  j["image_counts"] = st.image_counts;
  j["pixel_counts"] = st.pixel_counts;
  j["pixel_ratios"] = st.pixel_ratios;
  const std::string text = j.dump();
  std::cout << text << "\n";
  if (!json_out.empty()) write_text(json_out, text + "\n");
  return 0;
}

// ---- split / synth ----------------------------------------------------------

int cmd_split(const std::string& root, const std::string& out, const SplitRatios& ratios,
              std::uint64_t seed, const std::string& name) {
  if (!fs::is_directory(root)) throw UsageError("dataset directory not found: " + root);
  SplitManifest m = split_dataset(list_sample_ids(root), ratios, seed);
  m.name = name;
  m.root = fs::relative(fs::absolute(root), fs::absolute(fs::path(out)).parent_path()).string();
  write_manifest(out, m);
  std::cout << "train " << m.train.size() << ", valid " << m.valid.size() << ", test "
            << m.test.size() << "\n";
  return 0;
}

int cmd_synth(const std::string& kind, const std::string& out, std::size_t count, std::size_t size,
              std::uint64_t seed, const SplitRatios& ratios) {
  std::vector<Sample> samples;
  if (kind == "overfit") samples = synthetic::overfit_fixture(count, size, seed);
  else if (kind == "imbalanced") samples = synthetic::imbalanced_fixture(count, size, seed);
  else if (kind == "domain0") samples = synthetic::domain_fixture(0, count, size, seed);
  else if (kind == "domain1") samples = synthetic::domain_fixture(1, count, size, seed);
  else throw ConfigError("--kind must be overfit, imbalanced, domain0 or domain1");
  std::vector<std::string> ids;
  for (const Sample& s : samples) {
    save_sample(out, s);
    ids.push_back(s.id);
  }
  SplitManifest m = split_dataset(ids, ratios, seed);
  m.root = ".";
  m.name = kind;
  write_manifest(fs::path(out) / "manifest.json", m);
  std::cout << "wrote " << samples.size() << " samples and manifest.json to " << out << "\n";
  return 0;
}

// ---- train / eval / sweep ---------------------------------------------------

int cmd_train(const ConfigFlags& flags, const std::string& out) {
  const RunConfig cfg = flags.resolve();
  if (cfg.data.manifest.empty()) throw UsageError("no manifest: pass --manifest or set data.manifest");
  const LoadedManifest lm = open_manifest(cfg.data.manifest);
  const std::vector<Sample> train_set = lm.load("train");
  const std::vector<Sample> valid_set = lm.load(cfg.data.valid_split);
  if (train_set.empty()) throw DataError("manifest has no training samples");

  TrainOptions opts;
  opts.config_text = format_config(cfg);
  opts.dataset_name = dataset_label(cfg, lm);
  opts.on_step = [&](std::size_t it, const StepLosses& l) {
    if (cfg.train.log_every && it % cfg.train.log_every == 0)
      std::fprintf(stderr, "iteration %zu loss %.6f\n", it, l.total);
  };
  const TrainResult r = train(cfg.model, cfg.train, train_set, valid_set, opts);

  fs::create_directories(out);
  write_file_bytes(fs::path(out) / "checkpoint.bin", encode_checkpoint(r.best));
  write_text(fs::path(out) / "train_log.jsonl", r.log.to_jsonl());
  write_text(fs::path(out) / "config.txt", opts.config_text);
  std::cout << "variant " << variant_name(cfg.model) << ", kept iteration " << r.best_iteration;
  if (r.best_report) std::cout << ", valid f1_oa " << percent4(r.best_report->f1_oa);
  std::cout << "\n";
  return 0;
}

int cmd_eval(const std::string& checkpoint, const std::string& manifest, const std::string& split,
             const std::string& name, const std::string& out) {
  require_file(checkpoint, "checkpoint");
  const CheckpointData ck = decode_checkpoint(read_file_bytes(checkpoint));
  const LoadedManifest lm = open_manifest(manifest);
  const std::vector<Sample> samples = lm.load(split);
  RunConfig cfg = parse_config_text(ck.config_text);
  cfg.data.manifest = manifest;
  cfg.data.eval_split = split;
  if (!name.empty()) cfg.data.name = name;
  const Model model = model_from_checkpoint(ck);
  const ScoreReport rep = evaluate(model, samples, dataset_label(cfg, lm));
  const std::string text = serialize_report(rep);
  std::cout << text << "\n";
  if (!out.empty()) {
    write_text(out, text + "\n");
    write_text(out + ".config.txt", format_config(cfg));
  }
  return 0;
}

int cmd_sweep(const ConfigFlags& flags, const std::vector<std::string>& eval_manifests,
              const std::string& out) {
  const RunConfig cfg = flags.resolve();
  if (cfg.data.manifest.empty()) throw UsageError("no manifest: pass --manifest or set data.manifest");
  const LoadedManifest lm = open_manifest(cfg.data.manifest);
  const std::vector<Sample> train_set = lm.load("train");
  const std::vector<Sample> valid_set = lm.load(cfg.data.valid_split);

  // The training manifest's test split is always the in-domain cell.
  std::vector<std::pair<std::string, std::vector<Sample>>> sets;
  sets.emplace_back(dataset_label(cfg, lm), lm.load(cfg.data.eval_split));
  for (const std::string& path : eval_manifests) {
    const LoadedManifest other = open_manifest(path);
    const std::string label = other.manifest.name.empty() ? fs::path(path).stem().string()
                                                          : other.manifest.name;
    sets.emplace_back(label, other.load(cfg.data.eval_split));
  }
  std::vector<EvalSet> eval_sets;
  for (const auto& [label, samples] : sets) eval_sets.push_back({label, samples});

  SweepSettings ss;
  ss.base = cfg.model;
  ss.train = cfg.train;
  ss.train_name = dataset_label(cfg, lm);
  const SweepResult r = run_sweep(train_set, valid_set, eval_sets, ss, [](const ScoreReport& rep) {
    std::cerr << rep.variant << " on " << rep.dataset << ": f1_oa " << percent4(rep.f1_oa) << "\n";
  });
  fs::create_directories(out);
  write_text(fs::path(out) / "sweep.csv", r.to_csv());
  write_text(fs::path(out) / "config.txt", format_config(cfg));
  std::cout << r.to_csv();
  return 0;
}

int cmd_config(const ConfigFlags& flags) {
  const RunConfig cfg = flags.resolve();
  for (const ConfigKey& k : config_keys()) {
    std::cout << "# " << k.help << "\n" << k.key << "=" << get_config_value(cfg, k.key) << "\n";
  }
  return 0;
}

// ---- gradcheck / dump_attention ----------------------------------------------

int cmd_gradcheck(std::uint64_t seed) {
  bool ok = true;
  for (const GradSuiteEntry& e : run_gradient_suite(seed)) {
    std::printf("%-58s max_rel_err %.3e  tol %.0e  entries %5zu  %s\n", e.component.c_str(),
                e.max_relative_error, e.tolerance, e.entries_checked, e.passed() ? "ok" : "FAIL");
    ok = ok && e.passed();
  }
  return ok ? 0 : kExitData;
}

PngImage gray_png(const Tensor& map, std::size_t n, const std::function<double(double)>& to_byte,
                  std::size_t channel = 0) {
  const std::size_t c = map.dim(1), h = map.dim(2), w = map.dim(3);
  PngImage img{w, h, 1, std::vector<std::uint8_t>(h * w)};
  for (std::size_t i = 0; i < h * w; ++i) {
    const double v = to_byte(map[(n * c + channel) * h * w + i]);
    img.pixels[i] = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  }
  return img;
}

int cmd_dump_attention(const std::string& checkpoint, const std::string& manifest,
                       const std::string& split, std::string id, const std::string& out,
                       double flow_scale) {
  require_file(checkpoint, "checkpoint");
  const CheckpointData ck = decode_checkpoint(read_file_bytes(checkpoint));
  const LoadedManifest lm = open_manifest(manifest);
  if (id.empty()) {
    const auto& ids = lm.manifest.split(split);
    if (ids.empty()) throw DataError("split '" + split + "' is empty");
    id = ids.front();
  }
  const Sample s = load_sample(lm.root, id);
  const Model model = model_from_checkpoint(ck);
  const Prediction p = predict(model, s);
  fs::create_directories(out);

  nlohmann::ordered_json summary;
  summary["sample"] = id;
  summary["variant"] = variant_name(model.config());
  summary["flow_scale"] = flow_scale;
  auto range = [](const Tensor& t) {
    const auto [lo, hi] = std::minmax_element(t.data().begin(), t.data().end());
    return nlohmann::json::array({*lo, *hi});
  };
  std::size_t files = 0;
  auto dump_gates = [&](const std::vector<Var>& maps, const char* prefix) {
    // Deepest skip first; file names use the decoder stage index.
    for (std::size_t k = 0; k < maps.size(); ++k) {
      const std::string name = std::string(prefix) + "_s" + std::to_string(maps.size() - 1 - k) + ".png";
      write_png(fs::path(out) / name, gray_png(maps[k].value(), 0, [](double a) { return 255.0 * a; }));
      summary["files"][name] = range(maps[k].value());
      ++files;
    }
  };
  dump_gates(p.forward.attention_building, "alpha_building");
  dump_gates(p.forward.attention_damage, "alpha_damage");
  for (std::size_t k = 0; k < p.forward.flows.size(); ++k) {
    const Tensor& f = p.forward.flows[k].value();
    for (std::size_t ch = 0; ch < 2; ++ch) {
      const std::string name = "flow_s" + std::to_string(k) + (ch == 0 ? "_dx.png" : "_dy.png");
      write_png(fs::path(out) / name,
                gray_png(f, 0, [&](double v) { return 128.0 + flow_scale * v; }, ch));
      const std::size_t plane = f.dim(2) * f.dim(3);
      const auto first = f.data().begin() + static_cast<std::ptrdiff_t>(ch * plane);
      const auto [lo, hi] = std::minmax_element(first, first + static_cast<std::ptrdiff_t>(plane));
      summary["files"][name] = nlohmann::json::array({*lo, *hi});
      ++files;
    }
  }
  if (files == 0) log_warning("variant has no attention gates or alignment modules; nothing to dump");
  save_mask(fs::path(out) / "pred_dmg.png", p.dmg);
  write_text(fs::path(out) / "summary.json", summary.dump(2) + "\n");
  write_text(fs::path(out) / "config.txt", ck.config_text);
  std::cout << "wrote " << files << " maps to " << out << "\n";
  return 0;
}

SplitRatios parse_ratios(const std::string& s) {
  SplitRatios r;
  if (std::sscanf(s.c_str(), "%lf,%lf,%lf", &r.train, &r.valid, &r.test) != 3)
    throw ConfigError("--ratios expects train,valid,test, got '" + s + "'");
  return r;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Building damage assessment toolkit"};
  app.require_subcommand(1);
  bool verbose = false, quiet = false;
  app.add_flag("-v,--verbose", verbose, "info logging");
  app.add_flag("-q,--quiet", quiet, "errors only");

  PreprocessArgs pre;
  auto* c_pre = app.add_subcommand("preprocess", "rasterize label JSON files into masks");
  c_pre->add_option("--labels", pre.labels, "directory of label files")->required();
  c_pre->add_option("--out", pre.out, "output mask directory")->required();
  c_pre->add_option("--mode", pre.mode, "loc, dmg or both");
  c_pre->add_option("--check", pre.check, "reference mask directory to compare against");
  c_pre->add_option("--algorithm", pre.algorithm, "scanline or pip");
  c_pre->add_option("--width", pre.width, "image width when the label has no metadata");
  c_pre->add_option("--height", pre.height, "image height when the label has no metadata");

  std::string stats_dir, stats_json;
  auto* c_stats = app.add_subcommand("stats", "per-level image counts and pixel ratios");
  c_stats->add_option("--masks", stats_dir, "directory of *_post_mask.png files")->required();
  c_stats->add_option("--json", stats_json, "also write the JSON to this file");

  std::string split_root, split_out, split_ratios = "0.8,0.1,0.1", split_name;
  std::uint64_t split_seed = 0;
  auto* c_split = app.add_subcommand("split", "write a seeded train/valid/test manifest");
  c_split->add_option("--root", split_root, "dataset directory")->required();
  c_split->add_option("--out", split_out, "manifest path")->required();
  c_split->add_option("--ratios", split_ratios, "train,valid,test");
  c_split->add_option("--seed", split_seed, "shuffle seed");
  c_split->add_option("--name", split_name, "dataset name for reports");

  std::string synth_kind = "overfit", synth_out, synth_ratios = "0.8,0.1,0.1";
  std::size_t synth_count = 4, synth_size = 32;
  std::uint64_t synth_seed = 0;
  auto* c_synth = app.add_subcommand("synth", "write a synthetic dataset with a manifest");
  c_synth->add_option("--kind", synth_kind, "overfit, imbalanced, domain0 or domain1");
  c_synth->add_option("--out", synth_out, "output directory")->required();
  c_synth->add_option("--count", synth_count, "number of pairs");
  c_synth->add_option("--size", synth_size, "image side in pixels");
  c_synth->add_option("--seed", synth_seed, "generator seed");
  c_synth->add_option("--ratios", synth_ratios, "train,valid,test");

  ConfigFlags train_flags;
  std::string train_out;
  auto* c_train = app.add_subcommand("train", "train one variant");
  train_flags.add_to(c_train);
  c_train->add_option("--out", train_out, "run directory")->required();

  std::string ev_ck, ev_manifest, ev_split = "test", ev_name, ev_out;
  auto* c_eval = app.add_subcommand("eval", "score a checkpoint on a manifest split");
  c_eval->add_option("--checkpoint", ev_ck, "checkpoint.bin")->required();
  c_eval->add_option("--manifest", ev_manifest, "dataset manifest")->required();
  c_eval->add_option("--split", ev_split, "split to score");
  c_eval->add_option("--name", ev_name, "dataset label in the report");
  c_eval->add_option("--out", ev_out, "report JSON path");

  ConfigFlags sweep_flags;
  std::vector<std::string> sweep_eval;
  std::string sweep_out;
  auto* c_sweep = app.add_subcommand("sweep", "train all ten variants and score each on every dataset");
  sweep_flags.add_to(c_sweep);
  c_sweep->add_option("--eval-manifest", sweep_eval, "extra (cross-dataset) manifests, repeatable");
  c_sweep->add_option("--out", sweep_out, "output directory")->required();

  ConfigFlags cfg_flags;
  auto* c_cfg = app.add_subcommand("config", "print the effective config (defaults + file + flags)");
  cfg_flags.add_to(c_cfg);

  std::uint64_t gc_seed = 1;
  auto* c_gc = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  c_gc->add_option("--seed", gc_seed, "seed for the random inputs");

  std::string da_ck, da_manifest, da_split = "test", da_id, da_out;
  double da_scale = 64.0;
  auto* c_da = app.add_subcommand("dump_attention", "write attention and flow maps for one sample");
  c_da->add_option("--checkpoint", da_ck, "checkpoint.bin")->required();
  c_da->add_option("--manifest", da_manifest, "dataset manifest")->required();
  c_da->add_option("--split", da_split, "split to pick the sample from");
  c_da->add_option("--id", da_id, "sample id (default: first of the split)");
  c_da->add_option("--out", da_out, "output directory")->required();
  c_da->add_option("--flow-scale", da_scale, "gray levels per pixel of flow (128 = zero)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  set_log_level(quiet ? LogLevel::kQuiet : verbose ? LogLevel::kInfo : LogLevel::kWarning);

  try {
    if (*c_pre) return cmd_preprocess(pre);
    if (*c_stats) return cmd_stats(stats_dir, stats_json);
    if (*c_split) return cmd_split(split_root, split_out, parse_ratios(split_ratios), split_seed, split_name);
    if (*c_synth)
      return cmd_synth(synth_kind, synth_out, synth_count, synth_size, synth_seed, parse_ratios(synth_ratios));
    if (*c_train) return cmd_train(train_flags, train_out);
    if (*c_eval) return cmd_eval(ev_ck, ev_manifest, ev_split, ev_name, ev_out);
    if (*c_sweep) return cmd_sweep(sweep_flags, sweep_eval, sweep_out);
    if (*c_cfg) return cmd_config(cfg_flags);
    if (*c_gc) return cmd_gradcheck(gc_seed);
    if (*c_da) return cmd_dump_attention(da_ck, da_manifest, da_split, da_id, da_out, da_scale);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitData;
  }
  return kExitUsage;
}
