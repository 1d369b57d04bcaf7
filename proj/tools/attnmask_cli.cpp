// Command-line front end. Exit codes: 0 ok, 2 validation failure, 1 runtime error.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "attnmask/affinity.hpp"
#include "attnmask/attncore.hpp"
#include "attnmask/attnio.hpp"
#include "attnmask/augment.hpp"
#include "attnmask/binarize.hpp"
#include "attnmask/config.hpp"
#include "attnmask/dataset.hpp"
#include "attnmask/densecrf.hpp"
#include "attnmask/fixture.hpp"
#include "attnmask/image_io.hpp"
#include "attnmask/noiselearn.hpp"
#include "attnmask/parallel.hpp"
#include "attnmask/pipeline.hpp"
#include "attnmask/rng.hpp"

namespace fs = std::filesystem;
using namespace attnmask;

namespace {

struct Globals {
  std::string config;
  std::optional<std::uint64_t> seed;
  int jobs = 0;
};

Config load_config(const Globals& g) { return g.config.empty() ? Config{} : Config::load(g.config); }

// Stage parameters from the [crf], [affinity], ... sections of --config.
PipelineConfig stage_params(const Globals& g) {
  PipelineConfig p = pipeline_config_from(load_config(g), false);
  if (g.seed) p.seed = *g.seed;
  return p;
}

ProbabilityMap read_map(const fs::path& path) {
  const Grid<float> raw = read_tensor(path);
  Grid<double> v(raw.dims());
  for (std::size_t i = 0; i < raw.size(); ++i) v[i] = raw[i];
  return ProbabilityMap(std::move(v));
}

void write_map(const fs::path& path, const ProbabilityMap& map) {
  Grid<float> out(map.dims());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = static_cast<float>(map[i]);
  write_tensor(path, out);
}

Grid<std::uint8_t> preview(const ProbabilityMap& map) {
  Grid<std::uint8_t> out(map.dims());
  for (std::size_t i = 0; i < map.size(); ++i) out[i] = static_cast<std::uint8_t>(std::lround(255.0 * map[i]));
  return out;
}

std::string config_string(const std::string& s) {
  std::string q = "\"";
  for (char c : s) {
    if (c == '"' || c == '\\') q += '\\';
    q += c;
  }
  return q + "\"";
}

BinaryMask read_binary(const fs::path& path) {
  BinaryMask m = read_png_gray(path);
  require_binary(m, path.string());
  return m;
}

// Mask PNGs from other tools may use 255 for foreground; class-id masks map non-zero to 1.
BinaryMask read_foreground(const fs::path& path) {
  const auto raw = read_png_gray(path);
  BinaryMask m(raw.dims());
  for (std::size_t i = 0; i < raw.size(); ++i) m[i] = raw[i] != 0 && raw[i] != kIgnoreLabel ? kForeground : kBackground;
  return m;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw ValidationError("expected a comma-separated integer list, got '" + s + "'");
    }
  }
  return out;
}

std::map<std::string, fs::path> png_files(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw RuntimeError("not a directory: " + dir.string());
  std::map<std::string, fs::path> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.is_regular_file() && e.path().extension() == ".png") out[e.path().stem().string()] = e.path();
  }
  return out;
}

// sample_id,class_id rows with a header line.
std::vector<std::pair<std::string, int>> read_records_csv(const fs::path& path) {
  const auto bytes = read_file_bytes(path);
  std::stringstream in(std::string(bytes.begin(), bytes.end()));
  std::string line;
  std::getline(in, line);
  if (line.rfind("sample_id,class_id", 0) != 0) throw ValidationError(path.string() + ": header must start with sample_id,class_id");
  std::vector<std::pair<std::string, int>> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw ValidationError(path.string() + ": malformed row '" + line + "'");
    try {
      const auto end = line.find(',', comma + 1);
      rows.emplace_back(line.substr(0, comma), std::stoi(line.substr(comma + 1, end - comma - 1)));
    } catch (const std::exception&) {
      throw ValidationError(path.string() + ": bad class id in '" + line + "'");
    }
  }
  return rows;
}

// Flags override the [crf] section of --config when given.
struct CrfOverrides {
  std::optional<double> w_app, theta_alpha, theta_beta, w_smooth, theta_gamma, epsilon;
  std::optional<int> iterations;

  void apply(CrfParams& p) const {
    if (w_app) p.w_app = *w_app;
    if (theta_alpha) p.theta_alpha = *theta_alpha;
    if (theta_beta) p.theta_beta = *theta_beta;
    if (w_smooth) p.w_smooth = *w_smooth;
    if (theta_gamma) p.theta_gamma = *theta_gamma;
    if (iterations) p.iterations = *iterations;
    if (epsilon) p.epsilon = *epsilon;
    p.validate();
  }
};

void add_crf_flags(CLI::App* cmd, CrfOverrides& o) {
  cmd->add_option("--w-app", o.w_app, "appearance kernel weight");
  cmd->add_option("--theta-alpha", o.theta_alpha, "appearance spatial bandwidth");
  cmd->add_option("--theta-beta", o.theta_beta, "appearance colour bandwidth");
  cmd->add_option("--w-smooth", o.w_smooth, "smoothness kernel weight");
  cmd->add_option("--theta-gamma", o.theta_gamma, "smoothness bandwidth");
  cmd->add_option("--iterations", o.iterations, "mean-field iterations");
  cmd->add_option("--epsilon", o.epsilon, "unary probability clamp");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"attnmask: attention maps to segmentation masks"};
  app.require_subcommand(1);
  Globals g;
  app.add_option("--config", g.config, "TOML-style parameter file");
  app.add_option("--seed", g.seed, "master seed");
  app.add_option("--jobs", g.jobs, "worker threads (0 = runtime default)");

  // Every subcommand is registered with its flags; the action runs after parsing
  // so --config and --seed are known.
  std::function<void()> action;

  {
    auto* cmd = app.add_subcommand("fixture", "write procedural attention bundles and ground truth");
    auto out = std::make_shared<std::string>();
    auto count = std::make_shared<int>(1);
    auto spec = std::make_shared<FixtureSpec>();
    cmd->add_option("--out", *out, "output directory")->required();
    cmd->add_option("--count", *count, "number of fixtures")->check(CLI::PositiveNumber);
    cmd->add_option("--height", spec->height);
    cmd->add_option("--width", spec->width);
    cmd->add_option("--noise", spec->noise, "map noise, relative to the map peak");
    cmd->add_option("--image-noise", spec->image_noise);
    cmd->add_option("--planted-gamma", spec->planted_gamma);
    cmd->add_flag("--complete-tokens", spec->complete_tokens, "emit softmax-consistent maps for every token");
    cmd->add_option("--class-name", spec->class_name);
    cmd->add_option("--class-id", spec->class_id);
    cmd->callback([&, out, count, spec] {
      action = [&, out, count, spec] {
        const std::uint64_t seed = g.seed.value_or(0);
        fs::create_directories(fs::path(*out) / "gt");
        for (int i = 0; i < *count; ++i) {
          char id[32];
          std::snprintf(id, sizeof id, "fx%04d", i);
          const Fixture fx = gen_fixture(*spec, derive_seed(seed, id));
          write_bundle(fx.bundle, fs::path(*out) / id);
          write_png_gray(fs::path(*out) / "gt" / (std::string(id) + ".png"), fx.gt.mask);
          write_png_rgb(fs::path(*out) / "gt" / (std::string(id) + "_image.png"), fx.gt.image);
          std::cout << id << "\n";
        }
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("aggregate", "aggregate a bundle's class-token maps into one probability map");
    auto bundle = std::make_shared<std::string>();
    auto cls = std::make_shared<std::string>();
    auto tokens = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto png = std::make_shared<std::string>();
    cmd->add_option("--bundle", *bundle, "bundle directory")->required();
    auto* c = cmd->add_option("--class", *cls, "class name looked up in the prompt tokens");
    auto* t = cmd->add_option("--tokens", *tokens, "explicit token indices, comma-separated");
    c->excludes(t);
    cmd->add_option("--out", *out, "output probability map (.attn)")->required();
    cmd->add_option("--png", *png, "optional 8-bit preview");
    cmd->callback([&, bundle, cls, tokens, out, png] {
      action = [&, bundle, cls, tokens, out, png] {
        const PipelineConfig p = stage_params(g);
        const AttentionBundle b = read_bundle(*bundle);
        std::vector<int> group;
        if (!tokens->empty()) {
          group = parse_int_list(*tokens);
        } else if (!cls->empty()) {
          group = find_class_tokens(b.tokens, *cls);
          if (group.empty()) throw ValidationError("class '" + *cls + "' does not occur in the prompt");
        } else {
          throw ValidationError("aggregate needs --class or --tokens");
        }
        const ProbabilityMap map = aggregate(b, group, b.image.dims(), p.aggregate);
        write_map(*out, map);
        if (!png->empty()) write_png_gray(*png, preview(map));
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("affinity", "seeded random-walk affinity map");
    auto map = std::make_shared<std::string>();
    auto image = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    cmd->add_option("--map", *map, "aggregated map (.attn)")->required();
    cmd->add_option("--image", *image, "RGB image")->required();
    cmd->add_option("--out", *out, "output {0,1} PNG")->required();
    cmd->callback([&, map, image, out] {
      action = [&, map, image, out] {
        const PipelineConfig p = stage_params(g);
        const ProbabilityMap m = read_map(*map);
        const RgbImage img = read_png_rgb(*image);
        const PropagateResult r = propagate(img, extract_seeds(m, p.seed_hi, p.seed_lo), p.propagate);
        write_png_gray(*out, r.mask);
        std::printf("iterations=%d residual=%.3g converged=%s\n", r.iterations, r.residual, r.converged ? "true" : "false");
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("binarize", "fixed or affinity-matched threshold");
    auto map = std::make_shared<std::string>();
    auto affinity = std::make_shared<std::string>();
    auto gamma = std::make_shared<double>(0.0);
    auto out = std::make_shared<std::string>();
    cmd->add_option("--map", *map, "probability map (.attn)")->required();
    auto* gm = cmd->add_option("--gamma", *gamma, "fixed threshold");
    auto* af = cmd->add_option("--affinity", *affinity, "affinity PNG; picks the best threshold");
    gm->excludes(af);
    cmd->add_option("--out", *out, "output {0,1} PNG")->required();
    cmd->callback([&, map, affinity, gamma, out, gm] {
      action = [&, map, affinity, gamma, out, gm] {
        const PipelineConfig p = stage_params(g);
        const ProbabilityMap m = read_map(*map);
        if (gm->count() > 0) {
          write_png_gray(*out, threshold(m, *gamma));
          return;
        }
        if (affinity->empty()) throw ValidationError("binarize needs --gamma or --affinity");
        const AdaptiveThreshold at =
            adaptive_threshold(m, load_affinity(*affinity), ThresholdSearchSpace::grid(p.gamma_lo, p.gamma_hi, p.gamma_step));
        write_png_gray(*out, at.mask);
        std::printf("gamma=%.2f iou=%.6f\n", at.gamma, at.score);
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("refine", "dense CRF refinement");
    auto image = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto map = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto posterior = std::make_shared<std::string>();
    cmd->add_option("--image", *image, "RGB image")->required();
    auto* mk = cmd->add_option("--mask", *mask, "binary mask PNG");
    auto* mp = cmd->add_option("--map", *map, "probability map (.attn)");
    mk->excludes(mp);
    cmd->add_option("--out", *out, "refined {0,1} PNG")->required();
    cmd->add_option("--posterior", *posterior, "optional foreground posterior (.attn)");
    auto crf = std::make_shared<CrfOverrides>();
    add_crf_flags(cmd, *crf);
    cmd->callback([&, image, mask, map, out, posterior, crf] {
      action = [&, image, mask, map, out, posterior, crf] {
        PipelineConfig p = stage_params(g);
        crf->apply(p.crf);
        const RgbImage img = read_png_rgb(*image);
        ProbabilityMap prob;
        if (!mask->empty()) {
          prob = to_probability(read_binary(*mask));
        } else if (!map->empty()) {
          prob = read_map(*map);
        } else {
          throw ValidationError("refine needs --mask or --map");
        }
        const CrfResult r = meanfield_refine(img, unary_from_prob(prob, p.crf.epsilon), p.crf);
        write_png_gray(*out, r.mask);
        if (!posterior->empty()) write_map(*posterior, r.posterior);
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("score", "out-of-fold self-confidence from stored predictions");
    auto records = std::make_shared<std::string>();
    auto candidates = std::make_shared<std::string>();
    auto predictions = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto k = std::make_shared<int>(3);
    cmd->add_option("--records", *records, "CSV sample_id,class_id")->required();
    cmd->add_option("--candidates", *candidates, "directory of <id>.png candidate masks")->required();
    cmd->add_option("--predictions", *predictions, "directory of <id>.png predicted masks")->required();
    cmd->add_option("-k,--folds", *k, "number of folds");
    cmd->add_option("--out", *out, "scores CSV")->required();
    cmd->callback([&, records, candidates, predictions, out, k] {
      action = [&, records, candidates, predictions, out, k] {
        std::vector<SampleRecord> recs;
        for (const auto& [id, cls] : read_records_csv(*records)) {
          recs.push_back({id, cls, read_foreground(fs::path(*candidates) / (id + ".png")), id, std::nullopt});
        }
        const FoldAssignment folds = kfold_split(recs, *k, g.seed.value_or(0));
        FilePredictionProvider provider(*predictions);
        const auto scored = score_out_of_sample(recs, folds, provider);
        std::vector<ScoreRow> rows;
        for (const auto& r : scored) rows.push_back({r.sample_id, r.class_id, *r.q, false});
        write_scores_csv(*out, rows);
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("prune", "drop the lowest-confidence fraction per class");
    auto scores = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto alpha = std::make_shared<double>(0.7);
    cmd->add_option("--scores", *scores, "scores CSV")->required();
    cmd->add_option("--alpha", *alpha, "fraction pruned per class");
    cmd->add_option("--out", *out, "scores CSV with the pruned column filled")->required();
    cmd->callback([&, scores, out, alpha] {
      action = [&, scores, out, alpha] {
        const auto rows = read_scores_csv(*scores);
        std::vector<SampleRecord> recs;
        for (const auto& r : rows) recs.push_back({r.sample_id, r.class_id, {}, r.sample_id, r.q});
        const PruneResult pr = prune_by_class(recs, *alpha);
        std::set<std::string> pruned;
        for (const auto& r : pr.pruned) pruned.insert(r.sample_id);
        std::vector<ScoreRow> outrows = rows;
        for (auto& r : outrows) r.pruned = pruned.count(r.sample_id) != 0;
        write_scores_csv(*out, outrows);
        std::printf("kept=%zu pruned=%zu\n", pr.kept.size(), pr.pruned.size());
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("augment", "apply one augmentation to an image/mask pair");
    auto op = std::make_shared<std::string>("random");
    auto image = std::make_shared<std::string>();
    auto mask = std::make_shared<std::string>();
    auto src_image = std::make_shared<std::vector<std::string>>();
    auto src_mask = std::make_shared<std::vector<std::string>>();
    auto out_image = std::make_shared<std::string>();
    auto out_mask = std::make_shared<std::string>();
    auto grid = std::make_shared<std::string>("2x2");
    auto kernel = std::make_shared<int>(11);
    auto jitter = std::make_shared<double>(0.15);
    cmd->add_option("--op", *op, "splice | blur | occlude | perspective | random")
        ->check(CLI::IsMember({"splice", "blur", "occlude", "perspective", "random"}));
    cmd->add_option("--image", *image)->required();
    cmd->add_option("--mask", *mask)->required();
    cmd->add_option("--source-image", *src_image, "extra samples for splice/occlude (repeatable)");
    cmd->add_option("--source-mask", *src_mask, "masks matching --source-image");
    cmd->add_option("--grid", *grid, "splice grid, e.g. 2x2");
    cmd->add_option("--kernel", *kernel, "blur kernel length in [6, 22]");
    cmd->add_option("--jitter", *jitter, "perspective corner jitter fraction");
    cmd->add_option("--out-image", *out_image)->required();
    cmd->add_option("--out-mask", *out_mask)->required();
    cmd->callback([&, op, image, mask, src_image, src_mask, out_image, out_mask, grid, kernel, jitter] {
      action = [&, op, image, mask, src_image, src_mask, out_image, out_mask, grid, kernel, jitter] {
        const PipelineConfig p = stage_params(g);
        const std::uint64_t seed = g.seed.value_or(0);
        const Sample in{read_png_rgb(*image), read_png_gray(*mask)};
        validate_sample(in);
        if (src_image->size() != src_mask->size()) throw ValidationError("--source-image and --source-mask counts differ");
        std::vector<Sample> pool;
        for (std::size_t i = 0; i < src_image->size(); ++i) pool.push_back({read_png_rgb((*src_image)[i]), read_png_gray((*src_mask)[i])});
        Sample out;
        if (*op == "splice") {
          const auto x = grid->find('x');
          if (x == std::string::npos) throw ValidationError("--grid must look like 2x2");
          std::vector<Sample> tiles{in};
          tiles.insert(tiles.end(), pool.begin(), pool.end());
          out = splice(tiles, SpliceGrid{std::stoi(grid->substr(0, x)), std::stoi(grid->substr(x + 1))}, in.image.dims(), seed);
        } else if (*op == "blur") {
          out = Sample{gaussian_blur(in.image, *kernel), in.mask};
        } else if (*op == "occlude") {
          if (pool.empty()) throw ValidationError("occlude needs --source-image/--source-mask");
          out = occlude(in, pool.front(), p.augment_config.occlusion_area, seed);
        } else if (*op == "perspective") {
          out = perspective(in, *jitter, seed);
        } else {
          AugmentOutcome a = augment_sample(in, pool, p.augment_config, seed);
          for (const auto& t : a.trace) std::cout << t << "\n";
          out = std::move(a.sample);
        }
        write_png_rgb(*out_image, out.image);
        write_png_gray(*out_mask, out.mask);
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("emit", "write a VOC-style dataset from image and mask directories");
    auto images = std::make_shared<std::string>();
    auto masks = std::make_shared<std::string>();
    auto scores = std::make_shared<std::string>();
    auto out = std::make_shared<std::string>();
    auto voc = std::make_shared<bool>(false);
    cmd->add_option("--images", *images, "directory of <id>.png RGB images")->required();
    cmd->add_option("--masks", *masks, "directory of <id>.png class-id masks")->required();
    cmd->add_option("--scores", *scores, "optional scores CSV supplying class, q and pruned");
    cmd->add_option("--out", *out, "dataset root")->required();
    cmd->add_flag("--voc-palette", *voc, "also write palette masks");
    cmd->callback([&, images, masks, scores, out, voc] {
      action = [&, images, masks, scores, out, voc] {
        std::map<std::string, ScoreRow> by_id;
        if (!scores->empty()) {
          for (const auto& r : read_scores_csv(*scores)) by_id[r.sample_id] = r;
        }
        const auto mask_files = png_files(*masks);
        std::vector<EmitItem> items;
        for (const auto& [id, path] : png_files(*images)) {
          const auto m = mask_files.find(id);
          if (m == mask_files.end()) throw ValidationError("no mask for image '" + id + "'");
          EmitItem item;
          item.entry.sample_id = id;
          item.sample = Sample{read_png_rgb(path), read_png_gray(m->second)};
          if (const auto s = by_id.find(id); s != by_id.end()) {
            item.entry.class_id = s->second.class_id;
            item.entry.q = s->second.q;
            item.entry.pruned = s->second.pruned;
          }
          item.entry.seed = g.seed.value_or(0);
          items.push_back(std::move(item));
        }
        EmitOptions opts;
        opts.voc_palette = *voc;
        const DatasetManifest m = emit(items, opts, *out);
        std::printf("samples=%zu manifest=%s\n", m.samples.size(), hex64(manifest_hash(m)).c_str());
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("eval", "mean IoU of predicted masks against ground truth");
    auto pred = std::make_shared<std::string>();
    auto gt = std::make_shared<std::string>();
    auto classes = std::make_shared<std::string>();
    cmd->add_option("--pred", *pred, "directory of <id>.png class-id masks")->required();
    cmd->add_option("--gt", *gt, "directory of <id>.png class-id masks (255 = ignore)")->required();
    cmd->add_option("--classes", *classes, "comma-separated class ids")->required();
    cmd->callback([&, pred, gt, classes] {
      action = [&, pred, gt, classes] {
        std::map<std::string, SegMask> p, t;
        for (const auto& [id, path] : png_files(*gt)) t[id] = read_png_gray(path);
        const auto pred_files = png_files(*pred);
        for (const auto& [id, mask] : t) {
          if (const auto it = pred_files.find(id); it != pred_files.end()) p[id] = read_png_gray(it->second);
        }
        const std::vector<int> ids = parse_int_list(*classes);
        const EvalReport r = evaluate_miou(p, t, ids);
        for (const auto& [c, n] : r.counts) {
          const auto it = r.per_class_iou.find(c);
          std::printf("class %d tp=%llu fp=%llu fn=%llu iou=%s\n", c, static_cast<unsigned long long>(n.tp),
                      static_cast<unsigned long long>(n.fp), static_cast<unsigned long long>(n.fn),
                      it == r.per_class_iou.end() ? "excluded" : std::to_string(it->second).c_str());
        }
        std::printf("miou=%.6f\n", r.miou);
      };
    });
  }

  {
    auto* cmd = app.add_subcommand("pipeline", "run every stage and emit a dataset");
    auto out = std::make_shared<std::string>();
    auto no_retrieval = std::make_shared<bool>(false);
    cmd->add_option("--out", *out, "dataset root (overrides output.dir)");
    cmd->add_flag("--no-retrieval", *no_retrieval, "keep template prompts even when a caption bank is configured");
    cmd->callback([&, out, no_retrieval] {
      action = [&, out, no_retrieval] {
        if (g.config.empty()) throw ValidationError("pipeline needs --config");
        Config cfg = load_config(g);
        if (g.seed) cfg.set("seed", std::to_string(*g.seed));
        if (!out->empty()) cfg.set("output.dir", config_string(*out));
        if (*no_retrieval) cfg.set("prompts.retrieval", "false");
        const PipelineConfig p = pipeline_config_from(cfg);
        const PipelineResult r = run_pipeline(p);
        std::size_t pruned = 0;
        for (const auto& s : r.manifest.samples) pruned += s.pruned;
        std::printf("samples=%zu pruned=%zu manifest=%s\n", r.manifest.samples.size(), pruned, hex64(r.hash).c_str());
        if (!r.ground_truth.empty()) {
          double sum = 0.0;
          for (const auto& s : r.samples) sum += iou(s.mask, r.ground_truth.at(s.sample_id));
          std::printf("fixture_mean_iou=%.6f\n", sum / static_cast<double>(r.samples.size()));
        }
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    set_jobs(g.jobs);
    action();
    return 0;
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const CLI::ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}
