#include <gtest/gtest.h>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <random>
#include <set>

#include "trendscope/mock_llm.hpp"
#include "trendscope/prompts.hpp"
#include "trendscope/topic.hpp"

using namespace trendscope;

namespace {

PostEvent make_post(std::string caption, std::vector<std::string> hashtags = {}) {
  PostEvent e;
  e.post_id = "p";
  e.user_id = "u";
  e.ts = 100;
  e.caption = std::move(caption);
  e.hashtags = std::move(hashtags);
  return e;
}

void expect_topic_invariants(const TopicString& t) {
  const auto& s = t.str();
  ASSERT_FALSE(s.empty());
  EXPECT_NE(s.front(), ' ');
  EXPECT_NE(s.back(), ' ');
  EXPECT_NE(s.front(), '#');
  EXPECT_EQ(s.find("  "), std::string::npos);
  std::size_t cps = 0;
  for (unsigned char c : s) cps += (c & 0xC0) != 0x80;
  EXPECT_LE(cps, kMaxTopicChars);
}

class FakeClient : public llm::CompletionClient {
 public:
  explicit FakeClient(std::string reply) : reply_(std::move(reply)) {}
  llm::CompletionResponse complete(const llm::CompletionRequest& req) override {
    last_prompt = req.prompt;
    ++calls;
    return {reply_, 0};
  }
  std::string last_prompt;
  int calls = 0;

 private:
  std::string reply_;
};

}  // namespace

TEST(NormalizeTopic, Examples) {
  EXPECT_EQ(normalize_topic("#WorldCup  2026").str(), "worldcup 2026");
  EXPECT_EQ(normalize_topic("  FIFA ").str(), "fifa");
  EXPECT_THROW(normalize_topic("###"), ValidationError);
  EXPECT_THROW(normalize_topic("   "), ValidationError);
  EXPECT_THROW(normalize_topic(""), ValidationError);
}

TEST(NormalizeTopic, UnicodeCaseAndComposition) {
  EXPECT_EQ(normalize_topic("ÉTÉ").str(), "été");
  // "e" + combining acute composes to U+00E9
  EXPECT_EQ(normalize_topic("Cafe\xCC\x81").str(), "caf\xC3\xA9");
  // no-break space and ideographic space collapse like ASCII blanks
  EXPECT_EQ(normalize_topic("a\xC2\xA0\xE3\x80\x80 b").str(), "a b");
  EXPECT_EQ(normalize_topic("東京 Tower").str(), "東京 tower");
}

TEST(NormalizeTopic, TruncatesToEightyCodePoints) {
  std::string longer;
  for (int i = 0; i < 100; ++i) longer += "é";
  auto t = normalize_topic(longer);
  std::size_t cps = 0;
  for (unsigned char c : t.str()) cps += (c & 0xC0) != 0x80;
  EXPECT_EQ(cps, 80u);
  // a cut landing right after a space must not leave a trailing blank
  std::string spaced(79, 'a');
  spaced += " bcd";
  EXPECT_EQ(normalize_topic(spaced).str(), std::string(79, 'a'));
}

TEST(NormalizeTopic, PropertiesOnRandomInput) {
  std::mt19937_64 rng(5);
  const std::vector<std::string> pieces = {"#", " ", "\t", "A", "b", "Ü", "日本", "\xC2\xA0", "9", "-", "e\xCC\x81"};
  for (int i = 0; i < 2000; ++i) {
    std::string raw;
    for (int k = static_cast<int>(rng() % 40); k >= 0; --k) raw += pieces[rng() % pieces.size()];
    auto t = try_normalize_topic(raw);
    if (!t) continue;
    expect_topic_invariants(*t);
    EXPECT_EQ(normalize_topic(t->str()), *t) << "normalization must be idempotent";
  }
}

TEST(UnifySignals, SectionOrderAndHashtags) {
  auto e = make_post("goal!", {"WorldCup"});
  auto u = unify_signals(e);
  ASSERT_EQ(u.sections.size(), 2u);
  EXPECT_EQ(u.sections[0], std::make_pair(SignalLabel::caption, std::string("goal!")));
  EXPECT_EQ(u.sections[1], std::make_pair(SignalLabel::hashtags, std::string("WorldCup")));

  PostEvent v = make_post("");
  v.visual_tags = {"soccer", "stadium"};
  v.transcript = "what a match";
  u = unify_signals(v);
  ASSERT_EQ(u.sections.size(), 2u);
  EXPECT_EQ(u.sections[0].first, SignalLabel::visual_tags);
  EXPECT_EQ(u.sections[0].second, "soccer stadium");
  EXPECT_EQ(u.sections[1].first, SignalLabel::transcript);
  EXPECT_EQ(u.render(), "VISUAL_TAGS: soccer stadium\nTRANSCRIPT: what a match");

  PostEvent t = make_post("");
  t.topics = std::vector<std::string>{"x"};
  EXPECT_TRUE(unify_signals(t).empty());

  auto h = make_post("", {"#a", "b", "#"});
  EXPECT_EQ(unify_signals(h).sections.at(0).second, "a b");
}

TEST(Passthrough, NormalizesPreExtractedTopics) {
  PostEvent e = make_post("");
  e.topics = std::vector<std::string>{"World Cup 2026"};
  PassthroughExtractor ex;
  auto out = extract_topics(unify_signals(e), e, ex);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].str(), "world cup 2026");

  e.topics = std::vector<std::string>{"a", "A", "###", "b", "c", "d", "e", "f", "g"};
  out = ex.extract(unify_signals(e), e);
  EXPECT_EQ(out.size(), kDefaultTopicsPerPost);
  EXPECT_EQ(out[0].str(), "a");
  EXPECT_EQ(out[1].str(), "b");
}

TEST(MockExtractor, DedupesHashtags) {
  MockExtractor ex(std::make_shared<TopicDictionary>());
  auto e = make_post("", {"WorldCup", "worldcup"});
  auto out = ex.extract(unify_signals(e), e);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].str(), "worldcup");
}

TEST(MockExtractor, DictionaryPhrases) {
  auto dict = std::make_shared<TopicDictionary>(std::vector<std::string>{"world cup", "messi"});
  MockExtractor ex(dict);
  auto e = make_post("lionel messi scores in world cup final");
  auto out = ex.extract(unify_signals(e), e);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].str(), "world cup");
  EXPECT_EQ(out[1].str(), "messi");
  // whole words only
  auto partial = make_post("messiah of the world cupcake");
  EXPECT_TRUE(ex.extract(unify_signals(partial), partial).empty());
}

TEST(MockExtractor, RespectsCap) {
  auto dict = std::make_shared<TopicDictionary>(std::vector<std::string>{"a", "b", "c"});
  MockExtractor ex(dict, 2);
  auto e = make_post("a b c", {"x"});
  auto out = ex.extract(unify_signals(e), e);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].str(), "x");
  EXPECT_EQ(out[1].str(), "a");
}

// Oracle: scan the lowercased, punctuation-blanked text of every non-hashtag
// signal for " phrase " and keep dictionary order after the hashtags.
TEST(MockExtractor, MatchesSubstringOracleOnFixtureCorpus) {
  std::vector<std::string> phrases;
  {
    std::ifstream in(std::string(TRENDSCOPE_FIXTURES) + "/topic_dict.txt");
    std::string line;
    while (std::getline(in, line))
      if (!line.empty()) phrases.push_back(line);
  }
  ASSERT_FALSE(phrases.empty());
  auto dict = std::make_shared<TopicDictionary>(TopicDictionary::from_file(std::string(TRENDSCOPE_FIXTURES) + "/topic_dict.txt"));
  MockExtractor ex(dict);

  auto blank = [](std::string s) {
    for (auto& c : s) {
      c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      if (!std::isalnum(static_cast<unsigned char>(c))) c = ' ';
    }
    return " " + s + " ";
  };

  std::ifstream in(std::string(TRENDSCOPE_FIXTURES) + "/events.jsonl");
  std::string line;
  std::size_t checked = 0, with_phrases = 0;
  while (std::getline(in, line)) {
    auto e = parse_event(line);
    std::vector<std::string> expected;
    auto push = [&](const std::string& s) {
      if (expected.size() < kDefaultTopicsPerPost && std::find(expected.begin(), expected.end(), s) == expected.end())
        expected.push_back(s);
    };
    for (const auto& h : e.hashtags) {
      std::string l;
      for (char c : h) l += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
      push(l);
    }
    std::vector<std::string> texts = {e.caption, e.transcript, e.ocr_text};
    std::string visual;
    for (const auto& v : e.visual_tags) visual += v + " ";
    texts.push_back(visual);
    bool any = false;
    for (const auto& p : phrases) {
      bool hit = false;
      for (const auto& t : texts) hit = hit || blank(t).find(" " + p + " ") != std::string::npos;
      if (hit) {
        push(p);
        any = true;
      }
    }
    with_phrases += any;
    std::vector<std::string> got;
    for (const auto& t : ex.extract(unify_signals(e), e)) got.push_back(t.str());
    ASSERT_EQ(got, expected) << line;
    ++checked;
  }
  EXPECT_GT(checked, 1000u);
  EXPECT_GT(with_phrases, 100u);
}

TEST(ParseTopicLines, Formats) {
  auto out = parse_topic_lines("world cup 2026\n- Messi\n2. Copa America\n\n", 5);
  ASSERT_TRUE(out);
  ASSERT_EQ(out->size(), 3u);
  EXPECT_EQ((*out)[1].str(), "messi");
  EXPECT_EQ((*out)[2].str(), "copa america");
  auto none = parse_topic_lines("NONE", 5);
  ASSERT_TRUE(none);
  EXPECT_TRUE(none->empty());
  EXPECT_FALSE(parse_topic_lines("a, b, c", 5));
  EXPECT_FALSE(parse_topic_lines("", 5));
  EXPECT_FALSE(parse_topic_lines("###\n", 5));
}

TEST(LlmExtractor, ParsesReplyAndRendersPrompt) {
  auto client = std::make_shared<FakeClient>("World Cup 2026\nmessi\nmessi");
  LlmExtractor ex(client, std::string(prompts::kExtract));
  auto e = make_post("goal!", {"WorldCup"});
  auto out = ex.extract(unify_signals(e), e);
  ASSERT_EQ(out.size(), 2u);
  EXPECT_EQ(out[0].str(), "world cup 2026");
  EXPECT_NE(client->last_prompt.find("CAPTION: goal!\nHASHTAGS: WorldCup"), std::string::npos);
}

TEST(LlmExtractor, UnparseableReplyWarnsAndReturnsNothing) {
  auto client = std::make_shared<FakeClient>("a, b");
  std::vector<std::string> warnings;
  LlmExtractor ex(client, std::string(prompts::kExtract), 5, [&](std::string_view w) { warnings.emplace_back(w); });
  auto e = make_post("goal!");
  EXPECT_TRUE(ex.extract(unify_signals(e), e).empty());
  EXPECT_EQ(warnings.size(), 1u);
}

TEST(LlmExtractor, TopicOnlyPostSkipsTheClient) {
  auto client = std::make_shared<FakeClient>("x");
  LlmExtractor ex(client, std::string(prompts::kExtract));
  PostEvent e = make_post("");
  e.topics = std::vector<std::string>{"Pre Extracted"};
  auto out = ex.extract(unify_signals(e), e);
  ASSERT_EQ(out.size(), 1u);
  EXPECT_EQ(out[0].str(), "pre extracted");
  EXPECT_EQ(client->calls, 0);
}

TEST(LlmExtractor, ClientErrorsPropagate) {
  struct Failing : llm::CompletionClient {
    llm::CompletionResponse complete(const llm::CompletionRequest&) override { throw llm::TransportError("down"); }
  };
  LlmExtractor ex(std::make_shared<Failing>(), std::string(prompts::kExtract));
  auto e = make_post("goal!");
  EXPECT_THROW(ex.extract(unify_signals(e), e), llm::LlmError);
}

TEST(LlmExtractor, MockBackendIsDeterministic) {
  auto client = std::make_shared<llm::MockClient>();
  LlmExtractor ex(client, std::string(prompts::kExtract));
  auto e = make_post("Lionel Messi scores again", {"Messi", "Goal"});
  auto a = ex.extract(unify_signals(e), e);
  auto b = ex.extract(unify_signals(e), e);
  EXPECT_EQ(a, b);
  ASSERT_EQ(a.size(), 2u);
  EXPECT_EQ(a[0].str(), "messi");
  auto plain = make_post("Lionel Messi scores again");
  auto c = ex.extract(unify_signals(plain), plain);
  ASSERT_EQ(c.size(), 1u);
  EXPECT_EQ(c[0].str(), "lionel messi scores");
}

TEST(Prompts, RepositoryFilesMatchBuiltInTemplates) {
  const std::string dir = std::string(TRENDSCOPE_SOURCE_DIR) + "/prompts/";
  const std::vector<std::pair<std::string, std::string_view>> files = {
      {"extract.txt", prompts::kExtract},         {"sensitive.txt", prompts::kSensitive},
      {"generic.txt", prompts::kGeneric},         {"consolidate.txt", prompts::kConsolidate},
      {"describe.txt", prompts::kDescribe},       {"synthesize.txt", prompts::kSynthesize}};
  for (const auto& [name, builtin] : files) {
    EXPECT_EQ(prompts::load_template(dir + name, ""), builtin) << name;
    EXPECT_NE(builtin.find(prompts::kInputSlot), std::string_view::npos) << name;
  }
}
