#include "doctest.h"

#include <cmath>
#include <set>

#include "attnmask/prompts.hpp"
#include "support.hpp"

using namespace attnmask;

TEST_CASE("sub-class template expansion") {
  const std::vector<std::string> subs{"Crane", "Golden Bullul"};
  const std::vector<PromptTemplate> tpl{{"Photo of a [sub-class] bird", std::nullopt}};
  const PromptPool pool = expand_templates("bird", 3, subs, tpl);
  REQUIRE(pool.prompts.size() == 2);
  CHECK(pool.prompts[0].text == "Photo of a Crane bird");
  CHECK(pool.prompts[1].text == "Photo of a Golden Bullul bird");
  CHECK(pool.prompts[0].class_id == 3);
  CHECK(pool.prompts[0].provenance == Provenance::kTemplate);
}

TEST_CASE("cartesian product, class slot and context") {
  const std::vector<std::string> subs{"a", "b", "c", "d"};
  const std::vector<PromptTemplate> tpl{{"[sub-class] [class]", std::nullopt},
                                        {"photo of [sub-class]", std::nullopt},
                                        {"[class] [sub-class] [context]", std::string("on grass")}};
  const PromptPool pool = expand_templates("dog", 1, subs, tpl);
  CHECK(pool.prompts.size() == 12);
  std::set<std::string> texts;
  for (const auto& p : pool.prompts) texts.insert(p.text);
  CHECK(texts.size() == 12);
  CHECK(pool.prompts[0].text == "a dog");
  CHECK(pool.prompts[11].text == "dog d on grass");
  const std::vector<PromptTemplate> ctx{{"[class] photo", std::string("at night")}};
  CHECK(expand_templates("cat", 1, subs, ctx).prompts[0].text == "cat photo at night");
}

TEST_CASE("template errors") {
  const std::vector<std::string> subs{"x"};
  const std::vector<PromptTemplate> none{{"a photo", std::nullopt}};
  CHECK_THROWS_AS(expand_templates("dog", 1, subs, none), ValidationError);
  const std::vector<PromptTemplate> ok{{"[class]", std::nullopt}};
  CHECK_THROWS_AS(expand_templates("dog", 1, std::vector<std::string>{}, ok), ValidationError);
  const PromptPool empty = expand_templates("dog", 1, subs, std::vector<PromptTemplate>{});
  CHECK(empty.prompts.empty());
  CHECK_THROWS_AS(sample_prompt(empty, 1), ValidationError);
}

TEST_CASE("caption retrieval") {
  const CaptionBank bank({{"dog", "a dog on a couch", 0.9, std::nullopt},
                          {"dog", "dog running", 0.7, std::nullopt},
                          {"dog", "b tie", 0.8, std::nullopt},
                          {"dog", "a tie", 0.8, std::nullopt},
                          {"cat", "cat", 0.99, std::nullopt}});
  const Prompt p{"a photo of a dog", 1, "dog", Provenance::kTemplate};
  CHECK(retrieve_captions(p, bank, 0).empty());
  CHECK(retrieve_captions(p, bank, 2) == std::vector<std::string>{"a dog on a couch", "a tie"});
  CHECK(retrieve_captions(p, bank, 99) == std::vector<std::string>{"a dog on a couch", "a tie", "b tie", "dog running"});
  const Prompt horse{"horse", 2, "horse", Provenance::kTemplate};
  CHECK_THROWS_AS(retrieve_captions(horse, bank, 2), ValidationError);

  const PromptPool tpl{{p, Prompt{"dog photo", 1, "dog", Provenance::kTemplate}}};
  const PromptPool pool = retrieval_pool(tpl, BankRetrieval(bank), 2);
  CHECK(pool.prompts.size() == 2);  // both templates retrieve the same captions
  for (const auto& q : pool.prompts) CHECK(q.provenance == Provenance::kRetrieved);
  CHECK(pool.prompts.size() <= tpl.prompts.size() * 2);
}

TEST_CASE("query-scoped captions and bank file") {
  testing::TempDir tmp("bank");
  testing::spit(tmp.path() / "bank.jsonl",
                "{\"class\": \"dog\", \"caption\": \"one\", \"score\": 0.5, \"query\": \"q1\"}\n"
                "\n"
                "{\"class\": \"dog\", \"caption\": \"two\", \"score\": 0.4}\n");
  const CaptionBank bank = CaptionBank::load(tmp.path() / "bank.jsonl");
  CHECK(bank.size() == 2);
  CHECK(retrieve_captions(Prompt{"q1", 1, "dog", Provenance::kTemplate}, bank, 5) == std::vector<std::string>{"one", "two"});
  CHECK(retrieve_captions(Prompt{"q2", 1, "dog", Provenance::kTemplate}, bank, 5) == std::vector<std::string>{"two"});
  testing::spit(tmp.path() / "bad.jsonl", "{\"class\": \"dog\"}\n");
  CHECK_THROWS_AS(CaptionBank::load(tmp.path() / "bad.jsonl"), ValidationError);
  CHECK_THROWS_AS(CaptionBank::load(tmp.path() / "none.jsonl"), RuntimeError);

  testing::spit(tmp.path() / "subs.txt", "  Crane \n\nGolden Bullul\n");
  CHECK(load_subclasses(tmp.path() / "subs.txt") == std::vector<std::string>{"Crane", "Golden Bullul"});
}

TEST_CASE("sampling is deterministic and uniform") {
  const PromptPool single{{Prompt{"only", 1, "x", Provenance::kTemplate}}};
  CHECK(sample_prompt(single, 77).text == "only");
  PromptPool four;
  for (int i = 0; i < 4; ++i) four.prompts.push_back(Prompt{"p" + std::to_string(i), 1, "x", Provenance::kTemplate});
  CHECK(sample_prompt(four, 5) == sample_prompt(four, 5));
  std::map<std::string, int> freq;
  const int n = 10000;
  for (int i = 0; i < n; ++i) ++freq[sample_prompt(four, derive_seed(11, std::to_string(i))).text];
  const double sd = std::sqrt(n * 0.25 * 0.75);
  for (const auto& [text, c] : freq) CHECK(std::abs(c - 2500.0) < 5.0 * sd);
  CHECK(freq.size() == 4);
}
