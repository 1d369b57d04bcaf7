#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace attnmask {

// Pattern with "[sub-class]" and/or "[class]" placeholders, plus an optional
// "[context]" slot filled from `context`.
struct PromptTemplate {
  std::string pattern;
  std::optional<std::string> context;
};

enum class Provenance { kTemplate, kRetrieved };

struct Prompt {
  std::string text;
  int class_id = 0;
  std::string class_name;
  Provenance provenance = Provenance::kTemplate;
  friend bool operator==(const Prompt&, const Prompt&) = default;
};

struct PromptPool {
  std::vector<Prompt> prompts;
};

// One prompt per (template, subclass) pair, template-major order.
PromptPool expand_templates(const std::string& class_name, int class_id, std::span<const std::string> subclasses,
                            std::span<const PromptTemplate> templates);

struct Caption {
  std::string class_name;
  std::string caption;
  double score = 0.0;
  std::optional<std::string> query;  // prompt the caption was retrieved for, if recorded
};

// Offline retrieval results: UTF-8 JSON lines {"class", "caption", "score"[, "query"]}.
class CaptionBank {
 public:
  CaptionBank() = default;
  explicit CaptionBank(std::vector<Caption> captions);
  static CaptionBank load(const std::filesystem::path& path);

  bool has_class(const std::string& class_name) const { return by_class_.contains(class_name); }
  const std::vector<Caption>& captions_for(const std::string& class_name) const;
  std::size_t size() const noexcept { return size_; }

 private:
  std::map<std::string, std::vector<Caption>> by_class_;
  std::size_t size_ = 0;
};

// Retrieval seam: a live vector-search client can stand in for the bank.
class RetrievalProvider {
 public:
  virtual ~RetrievalProvider() = default;
  virtual std::vector<std::string> retrieve(const Prompt& prompt, std::size_t n) const = 0;
};

// Top-n captions of the prompt's class by score (descending, ties by caption
// text). Captions recorded for a different query are skipped.
std::vector<std::string> retrieve_captions(const Prompt& prompt, const CaptionBank& bank, std::size_t n);

class BankRetrieval : public RetrievalProvider {
 public:
  explicit BankRetrieval(const CaptionBank& bank) : bank_(bank) {}
  std::vector<std::string> retrieve(const Prompt& prompt, std::size_t n) const override {
    return retrieve_captions(prompt, bank_, n);
  }

 private:
  const CaptionBank& bank_;
};

// Replaces every template prompt by its n retrieved captions (first occurrence
// wins on duplicates), giving at most K * n prompts.
PromptPool retrieval_pool(const PromptPool& templates, const RetrievalProvider& provider, std::size_t n);

// Uniform draw, deterministic in (pool order, seed).
const Prompt& sample_prompt(const PromptPool& pool, std::uint64_t seed);

// One name per line; blank lines and surrounding whitespace dropped.
std::vector<std::string> load_subclasses(const std::filesystem::path& path);

}  // namespace attnmask
