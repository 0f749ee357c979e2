#include <gtest/gtest.h>

#include <intertext/text.hpp>

using intertext::tokenize;

TEST(Tokenize, LowercasesAndSplitsOnPunctuation) {
  EXPECT_EQ(tokenize("Arma virumque, cano!"), (std::vector<std::string>{"arma", "uirumque", "cano"}));
  EXPECT_EQ(tokenize("  ...  "), std::vector<std::string>{});
  EXPECT_EQ(tokenize(""), std::vector<std::string>{});
}

TEST(Tokenize, FoldsLatinOrthographicVariants) {
  EXPECT_EQ(tokenize("Iulius Julius VIVUS"), (std::vector<std::string>{"iulius", "iulius", "uiuus"}));
}

TEST(Tokenize, KeepsAccentedLettersAndLowercasesThem) {
  EXPECT_EQ(tokenize("ÆTAS Cœlum über"), (std::vector<std::string>{"ætas", "cœlum", "über"}));
}

TEST(Tokenize, SplitsOnUnicodePunctuation) {
  EXPECT_EQ(tokenize("deus\xE2\x80\x94homo \xC2\xAB" "fides\xC2\xBB"), (std::vector<std::string>{"deus", "homo", "fides"}));
}

TEST(Tokenize, IsIdempotentOnItsOwnOutput) {
  const auto first = tokenize("Haesit VOX, faucibus; Jam!");
  EXPECT_EQ(tokenize(intertext::join(first, " ")), first);
}

TEST(Tokenize, SurvivesInvalidUtf8) {
  const std::string bad = "abc\xFF\xFE" "def";
  EXPECT_EQ(tokenize(bad), (std::vector<std::string>{"abc", "def"}));
}

TEST(NormalizeToken, DropsPunctuationWithoutSplitting) {
  EXPECT_EQ(intertext::normalize_token("Vox-Dei"), "uoxdei");
  EXPECT_EQ(intertext::normalize_token("..."), "");
}

TEST(SplitSentences, BreaksOnTerminalsFollowedBySpace) {
  EXPECT_EQ(intertext::split_sentences("Primum est. Secundum? Tertium; 3.14 manet"),
            (std::vector<std::string>{"Primum est.", "Secundum?", "Tertium;", "3.14 manet"}));
}

TEST(Fnv1a, MatchesPublishedVectors) {
  EXPECT_EQ(intertext::fnv1a64(""), 0xcbf29ce484222325ULL);
  EXPECT_EQ(intertext::fnv1a64("a"), 0xaf63dc4c8601ec8cULL);
  EXPECT_EQ(intertext::hex64(0xaf63dc4c8601ec8cULL), "af63dc4c8601ec8c");
}
