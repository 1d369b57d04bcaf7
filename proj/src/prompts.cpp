#include "attnmask/prompts.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include "attnmask/error.hpp"
#include "attnmask/rng.hpp"
#include "json.hpp"

namespace attnmask {
namespace {

constexpr std::string_view kSubclassSlot = "[sub-class]";
constexpr std::string_view kClassSlot = "[class]";
constexpr std::string_view kContextSlot = "[context]";

void replace_all(std::string& s, std::string_view from, std::string_view to) {
  for (std::size_t pos = s.find(from); pos != std::string::npos; pos = s.find(from, pos + to.size())) {
    s.replace(pos, from.size(), to);
  }
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

}  // namespace

PromptPool expand_templates(const std::string& class_name, int class_id, std::span<const std::string> subclasses,
                            std::span<const PromptTemplate> templates) {
  if (subclasses.empty()) throw ValidationError("expand_templates: no subclasses for class " + class_name);
  PromptPool pool;
  for (const auto& t : templates) {
    if (t.pattern.find(kSubclassSlot) == std::string::npos && t.pattern.find(kClassSlot) == std::string::npos) {
      throw ValidationError("template has no [class] or [sub-class] placeholder: \"" + t.pattern + "\"");
    }
    for (const auto& sub : subclasses) {
      std::string text = t.pattern;
      replace_all(text, kSubclassSlot, sub);
      replace_all(text, kClassSlot, class_name);
      const std::string context = t.context.value_or("");
      if (text.find(kContextSlot) != std::string::npos) {
        replace_all(text, kContextSlot, context);
        text = trim(text);
      } else if (!context.empty()) {
        text += " " + context;
      }
      pool.prompts.push_back(Prompt{std::move(text), class_id, class_name, Provenance::kTemplate});
    }
  }
  return pool;
}

CaptionBank::CaptionBank(std::vector<Caption> captions) : size_(captions.size()) {
  for (auto& c : captions) by_class_[c.class_name].push_back(std::move(c));
}

CaptionBank CaptionBank::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open caption bank " + path.string());
  std::vector<Caption> captions;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      Caption c{j.at("class").get<std::string>(), j.at("caption").get<std::string>(), j.at("score").get<double>(),
                std::nullopt};
      if (j.contains("query")) c.query = j.at("query").get<std::string>();
      captions.push_back(std::move(c));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return CaptionBank(std::move(captions));
}

const std::vector<Caption>& CaptionBank::captions_for(const std::string& class_name) const {
  auto it = by_class_.find(class_name);
  if (it == by_class_.end()) throw ValidationError("caption bank has no class \"" + class_name + "\"");
  return it->second;
}

std::vector<std::string> retrieve_captions(const Prompt& prompt, const CaptionBank& bank, std::size_t n) {
  const auto& all = bank.captions_for(prompt.class_name);
  if (n == 0) return {};
  std::vector<const Caption*> candidates;
  for (const auto& c : all) {
    if (!c.query || *c.query == prompt.text) candidates.push_back(&c);
  }
  std::sort(candidates.begin(), candidates.end(), [](const Caption* a, const Caption* b) {
    if (a->score != b->score) return a->score > b->score;
    return a->caption < b->caption;
  });
  std::vector<std::string> out;
  for (std::size_t i = 0; i < candidates.size() && i < n; ++i) out.push_back(candidates[i]->caption);
  return out;
}

PromptPool retrieval_pool(const PromptPool& templates, const RetrievalProvider& provider, std::size_t n) {
  PromptPool pool;
  std::set<std::pair<int, std::string>> seen;
  for (const auto& p : templates.prompts) {
    for (auto& caption : provider.retrieve(p, n)) {
      if (seen.insert({p.class_id, caption}).second) {
        pool.prompts.push_back(Prompt{std::move(caption), p.class_id, p.class_name, Provenance::kRetrieved});
      }
    }
  }
  return pool;
}

const Prompt& sample_prompt(const PromptPool& pool, std::uint64_t seed) {
  if (pool.prompts.empty()) throw ValidationError("sample_prompt: empty prompt pool");
  Rng rng(seed);
  return pool.prompts[rng.below(pool.prompts.size())];
}

std::vector<std::string> load_subclasses(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw RuntimeError("cannot open subclass list " + path.string());
  std::vector<std::string> out;
  std::string line;
  while (std::getline(in, line)) {
    auto name = trim(line);
    if (!name.empty()) out.push_back(std::move(name));
  }
  return out;
}

}  // namespace attnmask
