#include "attnmask/pipeline.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <fstream>
#include <memory>
#include <set>

#include "json.hpp"

#include "attnmask/rng.hpp"

namespace attnmask {
namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!cur.empty()) out.push_back(lower(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  if (!cur.empty()) out.push_back(lower(cur));
  return out;
}

SweepOrder parse_sweep(const std::string& s) {
  if (s == "row-major") return SweepOrder::kRowMajor;
  if (s == "four-color") return SweepOrder::kFourColor;
  throw ValidationError("affinity.order must be row-major or four-color");
}

SpliceGrid parse_grid(const std::string& s) {
  const auto x = s.find('x');
  if (x == std::string::npos) throw ValidationError("splice grid '" + s + "' must look like 2x2");
  try {
    return SpliceGrid{std::stoi(s.substr(0, x)), std::stoi(s.substr(x + 1))};
  } catch (const std::exception&) {
    throw ValidationError("splice grid '" + s + "' must look like 2x2");
  }
}

ClassSpec parse_class(const std::string& s) {
  const auto colon = s.rfind(':');
  if (colon == std::string::npos || colon == 0) throw ValidationError("class '" + s + "' must look like name:id");
  try {
    return ClassSpec{s.substr(0, colon), std::stoi(s.substr(colon + 1))};
  } catch (const std::exception&) {
    throw ValidationError("class '" + s + "' must look like name:id");
  }
}

template <typename F>
auto stage(const std::string& id, const char* name, F&& f) -> decltype(f()) {
  try {
    return f();
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(id, name, e.what());
  }
}

SegMask to_seg(const BinaryMask& mask, int class_id) {
  SegMask out(mask.dims());
  for (std::size_t i = 0; i < mask.size(); ++i) out[i] = mask[i] ? static_cast<std::uint8_t>(class_id) : 0;
  return out;
}

// Runs f(i) for every index in parallel; the failure of the lowest index wins so
// error reports do not depend on scheduling.
template <typename F>
void parallel_for_each(std::size_t n, F&& f) {
  std::vector<std::exception_ptr> errors(n);
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < n; ++i) {
    try {
      f(i);
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

std::string fmt_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::vector<SampleInput> collect_inputs(const PipelineConfig& config, std::map<std::string, BinaryMask>& gt) {
  std::vector<SampleInput> inputs;
  if (config.fixtures > 0) {
    const ClassSpec cls{config.fixture.class_name, config.fixture.class_id};
    inputs.resize(config.fixtures);
    std::vector<BinaryMask> masks(config.fixtures);
    parallel_for_each(inputs.size(), [&](std::size_t i) {
      char id[32];
      std::snprintf(id, sizeof id, "fx%04zu", i);
      const std::uint64_t seed = derive_seed(config.seed, id);
      Fixture fx = stage(id, "fixture", [&] { return gen_fixture(config.fixture, seed); });
      BinaryMask m(fx.gt.mask.dims());
      for (std::size_t p = 0; p < m.size(); ++p) m[p] = fx.gt.mask[p] != 0 ? kForeground : kBackground;
      masks[i] = std::move(m);
      inputs[i] = SampleInput{id, std::move(fx.bundle), fx.class_tokens, cls, seed};
    });
    for (std::size_t i = 0; i < inputs.size(); ++i) gt.emplace(inputs[i].sample_id, std::move(masks[i]));
    return inputs;
  }
  inputs.resize(config.bundles.size());
  parallel_for_each(inputs.size(), [&](std::size_t i) {
    const auto& dir = config.bundles[i];
    const std::string id = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
    AttentionBundle bundle = stage(id, "read_bundle", [&] { return read_bundle(dir); });
    const ClassSpec* match = nullptr;
    std::vector<int> tokens;
    for (const auto& cls : config.classes) {
      auto found = find_class_tokens(bundle.tokens, cls.name);
      if (found.empty()) continue;
      if (match) throw StageError(id, "token_lookup", "prompt matches both '" + match->name + "' and '" + cls.name + "'");
      match = &cls;
      tokens = std::move(found);
    }
    if (!match) throw StageError(id, "token_lookup", "no configured class occurs in the prompt");
    const std::uint64_t seed = bundle.seed;
    inputs[i] = SampleInput{id, std::move(bundle), std::move(tokens), *match, seed};
  });
  return inputs;
}

PromptPool build_prompt_pool(const PipelineConfig& config) {
  PromptPool pool;
  if (config.templates.empty()) return pool;
  std::vector<PromptTemplate> templates;
  for (const auto& t : config.templates) templates.push_back({t, std::nullopt});
  std::vector<ClassSpec> classes = config.classes;
  if (config.fixtures > 0) classes = {{config.fixture.class_name, config.fixture.class_id}};
  const std::vector<std::string> subs =
      config.subclasses.empty() ? std::vector<std::string>{} : load_subclasses(config.subclasses);
  for (const auto& cls : classes) {
    const std::vector<std::string> names = subs.empty() ? std::vector<std::string>{cls.name} : subs;
    auto part = expand_templates(cls.name, cls.id, names, templates);
    pool.prompts.insert(pool.prompts.end(), part.prompts.begin(), part.prompts.end());
  }
  if (config.retrieval && !config.captions.empty()) {
    const CaptionBank bank = CaptionBank::load(config.captions);
    pool = retrieval_pool(pool, BankRetrieval(bank), static_cast<std::size_t>(config.retrieve_n));
  }
  return pool;
}

void write_prompt_pool(const std::filesystem::path& path, const PromptPool& pool) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw RuntimeError("cannot write " + path.string());
  for (const auto& p : pool.prompts) {
    nlohmann::json j;
    j["class_id"] = p.class_id;
    j["class_name"] = p.class_name;
    j["provenance"] = p.provenance == Provenance::kTemplate ? "template" : "retrieved";
    j["text"] = p.text;
    out << j.dump() << "\n";
  }
  if (!out) throw RuntimeError("write failed: " + path.string());
}

}  // namespace

void PipelineConfig::validate(bool check_inputs) const {
  if (fixtures < 0) throw ValidationError("input.fixtures must be >= 0");
  if (fixtures > 0) {
    fixture.validate();
  } else if (check_inputs) {
    if (bundles.empty()) throw ValidationError("no inputs: set input.fixtures or input.bundles");
    if (classes.empty()) throw ValidationError("input.classes is required with input.bundles");
  }
  for (const auto& c : classes) {
    if (c.name.empty() || c.id <= 0 || c.id >= kIgnoreLabel) throw ValidationError("class ids must lie in [1, 254]");
  }
  if (!(seed_lo >= 0.0 && seed_lo < seed_hi && seed_hi <= 1.0)) throw ValidationError("affinity: need 0 <= lo < hi <= 1");
  if (!(propagate.sigma_color > 0.0 && propagate.tol > 0.0 && propagate.max_iter >= 1)) {
    throw ValidationError("affinity: sigma_color and tol must be > 0, max_iter >= 1");
  }
  ThresholdSearchSpace::grid(gamma_lo, gamma_hi, gamma_step);
  crf.validate();
  if (min_area < 0) throw ValidationError("clean.min_area must be >= 0");
  if (noise_learning) {
    if (folds < 2) throw ValidationError("noise.k must be >= 2");
    if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("noise.alpha must lie in [0,1]");
  }
  if (augment) {
    if (augment_copies < 0) throw ValidationError("augment.copies must be >= 0");
    augment_config.validate();
  }
  if (retrieve_n < 1) throw ValidationError("prompts.retrieve_n must be >= 1");
}

PipelineConfig pipeline_config_from(const Config& c, bool check_inputs) {
  PipelineConfig p;
  p.seed = c.get_u64("seed", p.seed);

  p.fixtures = static_cast<int>(c.get_int("input.fixtures", p.fixtures));
  for (const auto& b : c.get_strings("input.bundles", {})) p.bundles.emplace_back(b);
  for (const auto& s : c.get_strings("input.classes", {})) p.classes.push_back(parse_class(s));

  FixtureSpec& f = p.fixture;
  f.height = static_cast<int>(c.get_int("fixture.height", f.height));
  f.width = static_cast<int>(c.get_int("fixture.width", f.width));
  f.area_fraction.first = c.get_double("fixture.area_min", f.area_fraction.first);
  f.area_fraction.second = c.get_double("fixture.area_max", f.area_fraction.second);
  f.resolutions = c.get_ints("fixture.resolutions", f.resolutions);
  f.timesteps = static_cast<int>(c.get_int("fixture.timesteps", f.timesteps));
  f.layers_per_resolution = static_cast<int>(c.get_int("fixture.layers", f.layers_per_resolution));
  f.smooth_sigma = c.get_double("fixture.smooth_sigma", f.smooth_sigma);
  f.noise = c.get_double("fixture.noise", f.noise);
  f.image_noise = c.get_double("fixture.image_noise", f.image_noise);
  f.planted_gamma = c.get_double("fixture.planted_gamma", f.planted_gamma);
  f.complete_tokens = c.get_bool("fixture.complete_tokens", f.complete_tokens);
  f.class_name = c.get_string("fixture.class_name", f.class_name);
  f.class_id = static_cast<int>(c.get_int("fixture.class_id", f.class_id));

  const std::string reducer = c.get_string("aggregate.reducer", "mean");
  if (reducer == "mean") {
    p.aggregate.reducer = TokenReducer::kMean;
  } else if (reducer == "max") {
    p.aggregate.reducer = TokenReducer::kMax;
  } else {
    throw ValidationError("aggregate.reducer must be mean or max");
  }
  const std::string order = c.get_string("aggregate.order", "upsample-then-mean");
  if (order == "upsample-then-mean") {
    p.aggregate.order = AggregateOrder::kUpsampleThenMean;
  } else if (order == "mean-then-upsample") {
    p.aggregate.order = AggregateOrder::kMeanThenUpsample;
  } else {
    throw ValidationError("aggregate.order must be upsample-then-mean or mean-then-upsample");
  }

  p.seed_hi = c.get_double("affinity.hi", p.seed_hi);
  p.seed_lo = c.get_double("affinity.lo", p.seed_lo);
  p.propagate.sigma_color = c.get_double("affinity.sigma_color", p.propagate.sigma_color);
  p.propagate.tol = c.get_double("affinity.tol", p.propagate.tol);
  p.propagate.max_iter = static_cast<int>(c.get_int("affinity.max_iter", p.propagate.max_iter));
  p.propagate.order = parse_sweep(c.get_string("affinity.order", "row-major"));

  p.gamma_lo = c.get_double("threshold.lo", p.gamma_lo);
  p.gamma_hi = c.get_double("threshold.hi", p.gamma_hi);
  p.gamma_step = c.get_double("threshold.step", p.gamma_step);

  p.crf.w_app = c.get_double("crf.w_app", p.crf.w_app);
  p.crf.theta_alpha = c.get_double("crf.theta_alpha", p.crf.theta_alpha);
  p.crf.theta_beta = c.get_double("crf.theta_beta", p.crf.theta_beta);
  p.crf.w_smooth = c.get_double("crf.w_smooth", p.crf.w_smooth);
  p.crf.theta_gamma = c.get_double("crf.theta_gamma", p.crf.theta_gamma);
  p.crf.iterations = static_cast<int>(c.get_int("crf.iterations", p.crf.iterations));
  p.crf.epsilon = c.get_double("crf.epsilon", p.crf.epsilon);
  p.crf.exact_max_side = static_cast<int>(c.get_int("crf.exact_max_side", p.crf.exact_max_side));
  p.crf_before_matching = c.get_bool("crf.before_matching", p.crf_before_matching);

  p.min_area = static_cast<int>(c.get_int("clean.min_area", p.min_area));

  p.noise_learning = c.get_bool("noise.enabled", p.noise_learning);
  p.folds = static_cast<int>(c.get_int("noise.k", p.folds));
  p.alpha = c.get_double("noise.alpha", p.alpha);
  p.predictions = c.get_string("noise.predictions", "");

  AugmentConfig& a = p.augment_config;
  p.augment = c.get_bool("augment.enabled", p.augment);
  p.augment_copies = static_cast<int>(c.get_int("augment.copies", p.augment_copies));
  a.p_splice = c.get_double("augment.p_splice", a.p_splice);
  a.p_blur = c.get_double("augment.p_blur", a.p_blur);
  a.p_occlude = c.get_double("augment.p_occlude", a.p_occlude);
  a.p_perspective = c.get_double("augment.p_perspective", a.p_perspective);
  if (c.has("augment.grids")) {
    a.grids.clear();
    for (const auto& g : c.get_strings("augment.grids", {})) a.grids.push_back(parse_grid(g));
  }
  a.blur_min = static_cast<int>(c.get_int("augment.blur_min", a.blur_min));
  a.blur_max = static_cast<int>(c.get_int("augment.blur_max", a.blur_max));
  a.occlusion_area.first = c.get_double("augment.occlusion_min", a.occlusion_area.first);
  a.occlusion_area.second = c.get_double("augment.occlusion_max", a.occlusion_area.second);
  a.max_jitter = c.get_double("augment.max_jitter", a.max_jitter);

  p.templates = c.get_strings("prompts.templates", {});
  p.subclasses = c.get_string("prompts.subclasses", "");
  p.captions = c.get_string("prompts.captions", "");
  p.retrieval = c.get_bool("prompts.retrieval", p.retrieval);
  p.retrieve_n = static_cast<int>(c.get_int("prompts.retrieve_n", p.retrieve_n));

  p.output = c.get_string("output.dir", "");
  p.voc_palette = c.get_bool("output.voc_palette", p.voc_palette);

  c.require_consumed();
  p.validate(check_inputs);
  return p;
}

std::vector<int> find_class_tokens(std::span<const Token> tokens, const std::string& class_name) {
  const std::vector<std::string> target = split_words(class_name);
  if (target.empty()) return {};
  // Group sub-word pieces into words; a CLIP piece ending in "</w>" closes a word.
  struct Word {
    std::string text;
    std::vector<int> indices;
  };
  std::vector<Word> words;
  Word cur;
  const bool bpe = std::any_of(tokens.begin(), tokens.end(), [](const Token& t) { return t.text.ends_with("</w>"); });
  for (const auto& t : tokens) {
    std::string piece = lower(t.text);
    const bool special = piece.starts_with("<|") && piece.ends_with("|>");
    bool closes = !bpe || special;
    if (piece.ends_with("</w>")) {
      piece.resize(piece.size() - 4);
      closes = true;
    }
    if (special && !cur.indices.empty()) {
      words.push_back(std::move(cur));
      cur = Word{};
    }
    cur.text += piece;
    cur.indices.push_back(t.index);
    if (closes) {
      words.push_back(std::move(cur));
      cur = Word{};
    }
  }
  if (!cur.indices.empty()) words.push_back(std::move(cur));

  for (std::size_t start = 0; start + target.size() <= words.size(); ++start) {
    bool ok = true;
    for (std::size_t k = 0; k < target.size() && ok; ++k) ok = words[start + k].text == target[k];
    if (!ok) continue;
    std::vector<int> out;
    for (std::size_t k = 0; k < target.size(); ++k) {
      out.insert(out.end(), words[start + k].indices.begin(), words[start + k].indices.end());
    }
    return out;
  }
  return {};
}

SampleResult process_sample(const SampleInput& in, const PipelineConfig& config) {
  const std::string& id = in.sample_id;
  SampleResult r;
  r.sample_id = id;
  r.cls = in.cls;
  r.prompt = in.bundle.prompt;
  r.seed = in.seed;
  r.image = in.bundle.image;
  const Dims dims = r.image.dims();

  r.attention = stage(id, "aggregate", [&] { return aggregate(in.bundle, in.token_group, dims, config.aggregate); });

  const PropagateResult prop = stage(id, "affinity", [&] {
    const SeedMap seeds = extract_seeds(r.attention, config.seed_hi, config.seed_lo);
    std::size_t fg = 0, bg = 0;
    for (Seed s : seeds.values()) {
      fg += s == Seed::kForeground;
      bg += s == Seed::kBackground;
    }
    r.stats["fg_seeds"] = static_cast<double>(fg);
    r.stats["bg_seeds"] = static_cast<double>(bg);
    return propagate(r.image, seeds, config.propagate);
  });
  r.affinity = prop.mask;
  r.stats["propagate_iterations"] = prop.iterations;
  r.stats["propagate_converged"] = prop.converged ? 1.0 : 0.0;

  const ThresholdSearchSpace space = ThresholdSearchSpace::grid(config.gamma_lo, config.gamma_hi, config.gamma_step);
  BinaryMask refined;
  if (!config.crf_before_matching) {
    const AdaptiveThreshold at = stage(id, "adaptive_threshold", [&] { return adaptive_threshold(r.attention, r.affinity, space); });
    r.gamma = at.gamma;
    r.match_iou = at.score;
    refined = stage(id, "meanfield_refine", [&] {
      return meanfield_refine(r.image, unary_from_prob(to_probability(at.mask), config.crf.epsilon), config.crf).mask;
    });
  } else {
    const CrfResult crf = stage(id, "meanfield_refine", [&] {
      return meanfield_refine(r.image, unary_from_prob(r.attention, config.crf.epsilon), config.crf);
    });
    const AdaptiveThreshold at = stage(id, "adaptive_threshold", [&] { return adaptive_threshold(crf.posterior, r.affinity, space); });
    r.gamma = at.gamma;
    r.match_iou = at.score;
    refined = at.mask;
  }
  r.mask = stage(id, "clean_mask", [&] { return clean_mask(refined, config.min_area); });
  return r;
}

CrfParams proxy_crf_params(const CrfParams& base) {
  CrfParams p = base;
  p.w_app *= 0.8;
  p.theta_beta *= 1.25;
  return p;
}

ClassicalProxyPredictor::ClassicalProxyPredictor(std::span<const SampleResult> samples, const PipelineConfig& config)
    : config_(config) {
  for (const auto& s : samples) by_id_[s.sample_id] = &s;
}

void ClassicalProxyPredictor::fit(std::span<const SampleRecord> training) {
  if (training.empty()) throw ValidationError("proxy predictor: empty training fold");
  double sum = 0.0;
  for (const auto& rec : training) {
    const auto it = by_id_.find(rec.sample_id);
    if (it == by_id_.end()) throw ValidationError("proxy predictor: unknown sample '" + rec.sample_id + "'");
    sum += it->second->gamma;
  }
  gamma_ = sum / static_cast<double>(training.size());
}

BinaryMask ClassicalProxyPredictor::predict(const SampleRecord& sample) const {
  const auto it = by_id_.find(sample.sample_id);
  if (it == by_id_.end()) throw ValidationError("proxy predictor: unknown sample '" + sample.sample_id + "'");
  const SampleResult& s = *it->second;
  const BinaryMask coarse = threshold(s.attention, gamma_);
  const CrfResult crf =
      meanfield_refine(s.image, unary_from_prob(to_probability(coarse), config_.crf.epsilon), proxy_crf_params(config_.crf));
  return clean_mask(crf.mask, config_.min_area);
}

PipelineResult run_pipeline(const PipelineConfig& config) {
  config.validate();
  PipelineResult out;
  const std::vector<SampleInput> inputs = collect_inputs(config, out.ground_truth);

  out.samples.resize(inputs.size());
  parallel_for_each(inputs.size(), [&](std::size_t i) { out.samples[i] = process_sample(inputs[i], config); });

  std::vector<SampleRecord> records;
  for (const auto& s : out.samples) records.push_back({s.sample_id, s.cls.id, s.mask, s.sample_id, std::nullopt});

  std::set<std::string> pruned_ids;
  if (config.noise_learning && !records.empty()) {
    const FoldAssignment folds = stage("*", "kfold_split", [&] { return kfold_split(records, config.folds, config.seed); });
    std::unique_ptr<PredictionProvider> predictor;
    if (config.predictions.empty()) {
      predictor = std::make_unique<ClassicalProxyPredictor>(out.samples, config);
    } else {
      predictor = std::make_unique<FilePredictionProvider>(config.predictions);
    }
    records = stage("*", "score_out_of_sample", [&] { return score_out_of_sample(records, folds, *predictor); });
    const PruneResult pr = prune_by_class(records, config.alpha);
    for (const auto& r : pr.pruned) pruned_ids.insert(r.sample_id);
  }

  std::vector<EmitItem> items;
  std::vector<Sample> kept_pool;
  std::vector<std::size_t> kept_index;
  for (std::size_t i = 0; i < out.samples.size(); ++i) {
    const SampleResult& s = out.samples[i];
    ManifestEntry e;
    e.sample_id = s.sample_id;
    e.class_id = s.cls.id;
    e.class_name = s.cls.name;
    e.prompt = s.prompt;
    e.seed = s.seed;
    e.gamma = s.gamma;
    e.q = records[i].q;
    e.pruned = pruned_ids.count(s.sample_id) != 0;
    e.stats = s.stats;
    e.stats["match_iou"] = s.match_iou;
    items.push_back({e, Sample{s.image, to_seg(s.mask, s.cls.id)}});
    if (!e.pruned) {
      kept_pool.push_back(items.back().sample);
      kept_index.push_back(i);
    }
  }

  if (config.augment && config.augment_copies > 0 && !kept_pool.empty()) {
    const std::size_t base = items.size();
    const std::size_t n = kept_index.size() * static_cast<std::size_t>(config.augment_copies);
    std::vector<EmitItem> extra(n);
    parallel_for_each(n, [&](std::size_t j) {
      const std::size_t k = j / config.augment_copies;
      const int copy = static_cast<int>(j % config.augment_copies);
      const EmitItem& src = items[kept_index[k]];
      ManifestEntry e = src.entry;
      e.source_id = e.sample_id;
      e.sample_id += "_aug" + std::to_string(copy);
      e.seed = derive_seed(config.seed, e.sample_id);
      AugmentOutcome a = stage(e.sample_id, "augment", [&] {
        return augment_sample(kept_pool[k], kept_pool, config.augment_config, e.seed);
      });
      e.augment_trace = std::move(a.trace);
      extra[j] = EmitItem{std::move(e), std::move(a.sample)};
    });
    items.reserve(base + n);
    for (auto& item : extra) items.push_back(std::move(item));
  }

  const PromptPool pool = build_prompt_pool(config);

  EmitOptions opts;
  opts.voc_palette = config.voc_palette;
  opts.meta["seed"] = std::to_string(config.seed);
  opts.meta["alpha"] = fmt_double(config.alpha);
  opts.meta["folds"] = std::to_string(config.folds);
  opts.meta["noise_learning"] = config.noise_learning ? "true" : "false";
  opts.meta["samples"] = std::to_string(out.samples.size());
  opts.meta["pruned"] = std::to_string(pruned_ids.size());
  opts.meta["prompt_pool_size"] = std::to_string(pool.prompts.size());
  opts.meta["crf_before_matching"] = config.crf_before_matching ? "true" : "false";

  if (config.output.empty()) {
    // Same manifest as emit would produce, without touching the filesystem.
    out.manifest.meta = opts.meta;
    for (const auto& item : items) {
      ManifestEntry e = item.entry;
      e.image_path = "images/" + e.sample_id + ".png";
      e.mask_path = "masks/" + e.sample_id + ".png";
      out.manifest.samples.push_back(std::move(e));
    }
  } else {
    out.manifest = stage("*", "emit", [&] { return emit(items, opts, config.output); });
    if (!pool.prompts.empty()) write_prompt_pool(config.output / "prompts.jsonl", pool);
  }
  out.hash = manifest_hash(out.manifest);
  return out;
}

}  // namespace attnmask
