#include <string>
#include <vector>

#include <doctest.h>

#include "mdlab/errors.hpp"
#include "mdlab/rng.hpp"
#include "mdlab/special_tokens.hpp"
#include "mdlab/tokenizer.hpp"
#include "util.hpp"

using namespace mdlab;

TEST_SUITE("tokenizer") {

TEST_CASE("dominant pair merges first") {
    Tokenizer tok = Tokenizer::train({"aa aa aa"}, 261);
    REQUIRE(tok.merges().size() >= 1);
    CHECK(tok.merges()[0].first == "a");
    CHECK(tok.merges()[0].second == "a");
    // alphabet is {boundary, a}: 2 symbols + 5 specials + 2 reachable merges
    CHECK(tok.vocab_size() == 9);
}

TEST_CASE("vocab budget of alphabet plus specials means zero merges") {
    Tokenizer tok = Tokenizer::train({"ab ba"}, 8);  // alphabet {boundary, a, b}
    CHECK(tok.merges().empty());
    CHECK(tok.vocab_size() == 8);
    // every word becomes boundary + characters
    CHECK(tok.encode("ab").size() == 3);
}

TEST_CASE("vocab budget below the alphabet is rejected") {
    CHECK_THROWS_AS(Tokenizer::train({"ab ba"}, 7), DataError);
    CHECK_THROWS_AS(Tokenizer::train({""}, 100), DataError);
    CHECK_THROWS_AS(Tokenizer::train({}, 100), DataError);
}

TEST_CASE("retraining reproduces the identical merge list") {
    std::vector<std::string> corpus = {"the cat sat on the mat", "the mat sat on the cat",
                                       "a cat and a mat"};
    Tokenizer a = Tokenizer::train(corpus, 64);
    Tokenizer b = Tokenizer::train(corpus, 64);
    REQUIRE(a.merges().size() == b.merges().size());
    for (size_t i = 0; i < a.merges().size(); ++i) {
        CHECK(a.merges()[i] == b.merges()[i]);
    }
    CHECK(a.to_text() == b.to_text());
}

TEST_CASE("special ids are pinned and never emitted for plain text") {
    Tokenizer tok = Tokenizer::train({"hello world hello"}, 48);
    CHECK(tok.id_for("<pad>") == kPadId);
    CHECK(tok.id_for("<unk>") == kUnkId);
    CHECK(tok.id_for("<cls>") == kClsId);
    CHECK(tok.id_for("<sep>") == kSepId);
    CHECK(tok.id_for("<mask>") == kMaskId);
    for (int id : tok.encode("hello world")) {
        CHECK(id >= kNumSpecialTokens);
    }
}

TEST_CASE("round trip on random corpus lines") {
    Rng rng(2024);
    const std::string alphabet = "abcdefgh";
    std::vector<std::string> corpus;
    for (int line = 0; line < 1000; ++line) {
        std::string s;
        int words = 1 + static_cast<int>(rng.uniform() * 6);
        for (int w = 0; w < words; ++w) {
            if (w) {
                s += ' ';
            }
            int len = 1 + static_cast<int>(rng.uniform() * 5);
            for (int i = 0; i < len; ++i) {
                s += alphabet[static_cast<size_t>(rng.uniform() * alphabet.size())];
            }
        }
        corpus.push_back(s);
    }
    Tokenizer tok = Tokenizer::train(corpus, 200);
    for (const std::string& line : corpus) {
        CHECK(tok.decode(tok.encode(line)) == line);
    }
}

TEST_CASE("encode is deterministic") {
    Tokenizer tok = Tokenizer::train({"abc abd abc"}, 32);
    CHECK(tok.encode("abc abd") == tok.encode("abc abd"));
}

TEST_CASE("empty text encodes to nothing and back") {
    Tokenizer tok = Tokenizer::train({"x y"}, 16);
    CHECK(tok.encode("").empty());
    CHECK(tok.decode({}) == "");
    CHECK(tok.encode("   ").empty());
}

TEST_CASE("unseen characters map to UNK") {
    Tokenizer tok = Tokenizer::train({"abc abc"}, 32);
    std::vector<int> ids = tok.encode("abz");
    bool has_unk = false;
    for (int id : ids) {
        has_unk = has_unk || id == kUnkId;
    }
    CHECK(has_unk);
}

TEST_CASE("multibyte characters survive the round trip") {
    Tokenizer tok = Tokenizer::train({"caf\xc3\xa9 caf\xc3\xa9 ol\xc3\xa9"}, 64);
    std::string text = "caf\xc3\xa9 ol\xc3\xa9";
    CHECK(tok.decode(tok.encode(text)) == text);
}

TEST_CASE("decode rejects out-of-range ids") {
    Tokenizer tok = Tokenizer::train({"a b"}, 16);
    CHECK_THROWS_AS(tok.decode({tok.vocab_size()}), DataError);
    CHECK_THROWS_AS(tok.decode({-1}), DataError);
}

TEST_CASE("save and load preserve the codec") {
    auto dir = testutil::temp_dir("tok");
    Tokenizer tok = Tokenizer::train({"the quick brown fox", "the slow brown dog"}, 80);
    tok.save((dir / "vocab.txt").string());
    Tokenizer loaded = Tokenizer::load((dir / "vocab.txt").string());
    CHECK(loaded.vocab_size() == tok.vocab_size());
    CHECK(loaded.to_text() == tok.to_text());
    std::string text = "the brown fox";
    CHECK(loaded.encode(text) == tok.encode(text));
    CHECK(loaded.decode(loaded.encode(text)) == text);
}

TEST_CASE("malformed vocab files name the offending line") {
    CHECK_THROWS_WITH_AS(Tokenizer::from_text("not a vocab file\n"), doctest::Contains(":1"),
                         DataError);
    Tokenizer tok = Tokenizer::train({"ab ab"}, 16);
    std::string good = tok.to_text();
    CHECK_THROWS_AS(Tokenizer::from_text(good + "trailing junk\n"), DataError);
}

}  // TEST_SUITE
