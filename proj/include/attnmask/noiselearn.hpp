#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnmask/grid.hpp"

namespace attnmask {

struct SampleRecord {
  std::string sample_id;
  int class_id = 0;
  BinaryMask candidate_mask;
  std::string image_ref;
  std::optional<double> q;  // self-confidence in [0, 1]
};

struct FoldAssignment {
  int k = 0;
  std::map<std::string, int> fold_of;

  // Samples of `records` in fold f, in input order.
  std::vector<std::size_t> members(std::span<const SampleRecord> records, int fold) const;
};

// IoU of the candidate against an out-of-sample prediction.
double self_confidence(const BinaryMask& candidate, const BinaryMask& prediction);

// Per class: ids sorted, shuffled with a seeded stream, then dealt round-robin,
// so fold sizes within a class differ by at most one. Throws if a class has
// fewer than k samples.
FoldAssignment kfold_split(const std::map<int, std::vector<std::string>>& ids_by_class, int k, std::uint64_t seed);
FoldAssignment kfold_split(std::span<const SampleRecord> records, int k, std::uint64_t seed);

// Supplies the B* masks. fit() sees only training records; predict() must be
// safe to call concurrently after fit().
class PredictionProvider {
 public:
  virtual ~PredictionProvider() = default;
  virtual void fit(std::span<const SampleRecord> training) = 0;
  virtual BinaryMask predict(const SampleRecord& sample) const = 0;
};

// Reads <dir>/<sample_id>.png; fit() is a no-op.
class FilePredictionProvider : public PredictionProvider {
 public:
  explicit FilePredictionProvider(std::filesystem::path dir) : dir_(std::move(dir)) {}
  void fit(std::span<const SampleRecord>) override {}
  BinaryMask predict(const SampleRecord& sample) const override;

 private:
  std::filesystem::path dir_;
};

// For every fold, fits the predictor on the other k-1 folds and scores the
// held-out samples. Any failure aborts the whole call; no partial scores.
std::vector<SampleRecord> score_out_of_sample(std::vector<SampleRecord> records, const FoldAssignment& folds,
                                              PredictionProvider& predictor);

struct PruneResult {
  std::vector<SampleRecord> kept;
  std::vector<SampleRecord> pruned;
};

// Per class, prunes floor(alpha * n_c) records with the lowest q (ties: smaller
// sample_id is pruned first). Both outputs keep input order.
PruneResult prune_by_class(std::span<const SampleRecord> records, double alpha);

// floor(alpha * n) with a guard against 0.3 * 10 = 2.9999...
std::size_t prune_count(double alpha, std::size_t n);

struct ScoreRow {
  std::string sample_id;
  int class_id = 0;
  double q = 0.0;
  bool pruned = false;
};

// UTF-8 CSV with header "sample_id,class_id,q,pruned".
void write_scores_csv(const std::filesystem::path& path, std::span<const ScoreRow> rows);
std::vector<ScoreRow> read_scores_csv(const std::filesystem::path& path);

}  // namespace attnmask
