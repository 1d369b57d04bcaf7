#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnmask/affinity.hpp"
#include "attnmask/attncore.hpp"
#include "attnmask/augment.hpp"
#include "attnmask/binarize.hpp"
#include "attnmask/config.hpp"
#include "attnmask/dataset.hpp"
#include "attnmask/densecrf.hpp"
#include "attnmask/fixture.hpp"
#include "attnmask/noiselearn.hpp"
#include "attnmask/prompts.hpp"

namespace attnmask {

struct ClassSpec {
  std::string name;
  int id = 0;
};

struct PipelineConfig {
  std::uint64_t seed = 0;

  // Inputs: `fixtures` procedural samples, or bundle directories whose class is
  // found by matching `classes` against the prompt tokens.
  int fixtures = 0;
  FixtureSpec fixture;
  std::vector<std::filesystem::path> bundles;
  std::vector<ClassSpec> classes;

  AggregateOptions aggregate;
  double seed_hi = 0.6;
  double seed_lo = 0.2;
  PropagateParams propagate;
  double gamma_lo = 0.05;
  double gamma_hi = 0.95;
  double gamma_step = 0.01;
  CrfParams crf;
  bool crf_before_matching = false;
  int min_area = 16;

  bool noise_learning = true;
  int folds = 3;
  double alpha = 0.7;
  std::filesystem::path predictions;  // use stored predictions instead of the proxy predictor

  bool augment = true;
  int augment_copies = 1;
  AugmentConfig augment_config;

  std::vector<std::string> templates;
  std::filesystem::path subclasses;
  std::filesystem::path captions;
  bool retrieval = true;  // replace template prompts by retrieved captions when a bank is given
  int retrieve_n = 5;

  std::filesystem::path output;  // empty: run without writing
  bool voc_palette = false;

  // With check_inputs false only the stage parameters are checked.
  void validate(bool check_inputs = true) const;
};

// Reads every section; unknown keys are a ValidationError.
PipelineConfig pipeline_config_from(const Config& config, bool check_inputs = true);

struct SampleInput {
  std::string sample_id;
  AttentionBundle bundle;
  std::vector<int> token_group;
  ClassSpec cls;
  std::uint64_t seed = 0;
};

struct SampleResult {
  std::string sample_id;
  ClassSpec cls;
  std::string prompt;
  std::uint64_t seed = 0;
  RgbImage image;
  ProbabilityMap attention;  // aggregated class-token map
  AffinityMap affinity;
  double gamma = 0.0;
  double match_iou = 0.0;
  BinaryMask mask;  // refined and cleaned candidate
  std::map<std::string, double> stats;
};

// Token indices spelling `class_name` (case-insensitive, "</w>" word ends
// respected). Empty when the words do not occur.
std::vector<int> find_class_tokens(std::span<const Token> tokens, const std::string& class_name);

// aggregate -> affinity -> adaptive threshold -> CRF -> clean for one sample.
SampleResult process_sample(const SampleInput& input, const PipelineConfig& config);

// Predicts a sample by thresholding its attention at the mean gamma of the
// training fold and refining with a perturbed CRF (see proxy_crf_params).
// Appearance weight x0.8, colour bandwidth x1.25.
CrfParams proxy_crf_params(const CrfParams& base);

class ClassicalProxyPredictor : public PredictionProvider {
 public:
  ClassicalProxyPredictor(std::span<const SampleResult> samples, const PipelineConfig& config);
  void fit(std::span<const SampleRecord> training) override;
  BinaryMask predict(const SampleRecord& sample) const override;
  double fitted_gamma() const noexcept { return gamma_; }

 private:
  std::map<std::string, const SampleResult*> by_id_;
  const PipelineConfig& config_;
  double gamma_ = 0.5;
};

struct PipelineResult {
  DatasetManifest manifest;
  std::vector<SampleResult> samples;
  std::map<std::string, BinaryMask> ground_truth;  // fixture mode only
  std::uint64_t hash = 0;
};

PipelineResult run_pipeline(const PipelineConfig& config);

}  // namespace attnmask
