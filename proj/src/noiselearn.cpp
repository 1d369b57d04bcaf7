#include "attnmask/noiselearn.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "attnmask/binarize.hpp"
#include "attnmask/image_io.hpp"
#include "attnmask/parallel.hpp"
#include "attnmask/rng.hpp"

namespace attnmask {

std::vector<std::size_t> FoldAssignment::members(std::span<const SampleRecord> records, int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < records.size(); ++i) {
    auto it = fold_of.find(records[i].sample_id);
    if (it == fold_of.end()) throw ValidationError("sample " + records[i].sample_id + " has no fold");
    if (it->second == fold) out.push_back(i);
  }
  return out;
}

double self_confidence(const BinaryMask& candidate, const BinaryMask& prediction) {
  return iou(candidate, prediction);
}

FoldAssignment kfold_split(const std::map<int, std::vector<std::string>>& ids_by_class, int k, std::uint64_t seed) {
  if (k < 2) throw ValidationError("kfold_split: k must be >= 2");
  FoldAssignment out;
  out.k = k;
  for (const auto& [class_id, ids] : ids_by_class) {
    if (ids.size() < static_cast<std::size_t>(k)) {
      throw ValidationError("kfold_split: class " + std::to_string(class_id) + " has " + std::to_string(ids.size()) +
                            " samples, fewer than k = " + std::to_string(k));
    }
    std::vector<std::string> order = ids;
    std::sort(order.begin(), order.end());
    if (std::adjacent_find(order.begin(), order.end()) != order.end()) {
      throw ValidationError("kfold_split: duplicate sample id in class " + std::to_string(class_id));
    }
    Rng rng(splitmix64(seed ^ static_cast<std::uint64_t>(class_id) * 0x9e3779b97f4a7c15ULL));
    for (std::size_t i = order.size(); i > 1; --i) std::swap(order[i - 1], order[rng.below(i)]);
    for (std::size_t i = 0; i < order.size(); ++i) {
      if (!out.fold_of.emplace(order[i], static_cast<int>(i % static_cast<std::size_t>(k))).second) {
        throw ValidationError("kfold_split: sample id " + order[i] + " appears in two classes");
      }
    }
  }
  return out;
}

FoldAssignment kfold_split(std::span<const SampleRecord> records, int k, std::uint64_t seed) {
  std::map<int, std::vector<std::string>> by_class;
  for (const auto& r : records) by_class[r.class_id].push_back(r.sample_id);
  return kfold_split(by_class, k, seed);
}

BinaryMask FilePredictionProvider::predict(const SampleRecord& sample) const {
  BinaryMask m = read_png_gray(dir_ / (sample.sample_id + ".png"));
  // Prediction masks may carry the class id instead of 1; anything non-zero is fg.
  for (auto& v : m) v = (v != 0 && v != kIgnoreLabel) ? kForeground : kBackground;
  return m;
}

std::vector<SampleRecord> score_out_of_sample(std::vector<SampleRecord> records, const FoldAssignment& folds,
                                              PredictionProvider& predictor) {
  std::vector<double> scores(records.size(), -1.0);
  for (int fold = 0; fold < folds.k; ++fold) {
    const auto held_out = folds.members(records, fold);
    if (held_out.empty()) continue;
    std::vector<SampleRecord> training;
    for (std::size_t i = 0; i < records.size(); ++i) {
      if (folds.fold_of.at(records[i].sample_id) != fold) training.push_back(records[i]);
    }
    try {
      predictor.fit(training);
    } catch (const std::exception& e) {
      throw RuntimeError("predictor fit failed on fold " + std::to_string(fold) + ": " + e.what());
    }
    ExceptionSlot slot;
    const auto n = static_cast<long>(held_out.size());
#pragma omp parallel for schedule(dynamic)
    for (long c = 0; c < n; ++c) {
      slot.run([&] {
        const auto& rec = records[held_out[c]];
        scores[held_out[c]] = self_confidence(rec.candidate_mask, predictor.predict(rec));
      });
    }
    try {
      slot.rethrow();
    } catch (const ValidationError&) {
      throw;
    } catch (const std::exception& e) {
      throw RuntimeError("predictor failed on fold " + std::to_string(fold) + ": " + e.what());
    }
  }
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (scores[i] < 0.0) throw RuntimeError("sample " + records[i].sample_id + " was never scored");
    records[i].q = scores[i];
  }
  return records;
}

std::size_t prune_count(double alpha, std::size_t n) {
  return static_cast<std::size_t>(std::floor(alpha * static_cast<double>(n) + 1e-9));
}

PruneResult prune_by_class(std::span<const SampleRecord> records, double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) throw ValidationError("prune_by_class: alpha must lie in [0,1]");
  std::map<int, std::vector<std::size_t>> by_class;
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (!records[i].q) throw ValidationError("prune_by_class: sample " + records[i].sample_id + " has no q");
    by_class[records[i].class_id].push_back(i);
  }
  std::vector<bool> pruned(records.size(), false);
  for (auto& [class_id, idx] : by_class) {
    std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
      if (*records[a].q != *records[b].q) return *records[a].q < *records[b].q;
      return records[a].sample_id < records[b].sample_id;
    });
    const std::size_t count = prune_count(alpha, idx.size());
    for (std::size_t i = 0; i < count; ++i) pruned[idx[i]] = true;
  }
  PruneResult out;
  for (std::size_t i = 0; i < records.size(); ++i) (pruned[i] ? out.pruned : out.kept).push_back(records[i]);
  return out;
}

void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRow> rows) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw RuntimeError("cannot write " + path.string());
  out << "sample_id,class_id,q,pruned\n";
  char buf[64];
  for (const auto& r : rows) {
    if (r.sample_id.find_first_of(",\"\n") != std::string::npos) {
      throw ValidationError("sample id not CSV-safe: " + r.sample_id);
    }
    std::snprintf(buf, sizeof buf, "%.9f", r.q);
    out << r.sample_id << ',' << r.class_id << ',' << buf << ',' << (r.pruned ? "true" : "false") << '\n';
  }
  if (!out) throw RuntimeError("short write to " + path.string());
}

std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "sample_id,class_id,q,pruned") {
    throw ValidationError(path.string() + ": expected header sample_id,class_id,q,pruned");
  }
  std::vector<ScoreRow> rows;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id, cls, q, pruned;
    if (!std::getline(ss, id, ',') || !std::getline(ss, cls, ',') || !std::getline(ss, q, ',') ||
        !std::getline(ss, pruned)) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": expected 4 fields");
    }
    try {
      ScoreRow r{id, std::stoi(cls), std::stod(q), pruned == "true" || pruned == "1"};
      if (!(r.q >= 0.0 && r.q <= 1.0)) throw ValidationError("q outside [0,1]");
      rows.push_back(std::move(r));
    } catch (const std::logic_error& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

}  // namespace attnmask
