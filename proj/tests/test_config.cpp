#include <string>

#include <doctest.h>

#include "mdlab/config.hpp"
#include "mdlab/errors.hpp"
#include "util.hpp"

using namespace mdlab;

TEST_SUITE("config") {

TEST_CASE("help text documents every key with default and unit") {
    std::string help = config_help_text();
    for (const KeySpec& spec : config_keys()) {
        CAPTURE(spec.key);
        CHECK(help.find(spec.key) != std::string::npos);
        if (!spec.default_value.empty()) {
            CHECK(help.find(spec.default_value) != std::string::npos);
        }
        CHECK(help.find(spec.unit) != std::string::npos);
        CHECK_FALSE(spec.description.empty());
    }
}

TEST_CASE("registry has no duplicate keys") {
    const auto& keys = config_keys();
    for (size_t i = 0; i < keys.size(); ++i) {
        for (size_t j = i + 1; j < keys.size(); ++j) {
            CHECK(keys[i].key != keys[j].key);
        }
    }
}

TEST_CASE("defaults expose the documented values") {
    Config c = Config::defaults();
    CHECK(c.get_int("model.layers") == 4);
    CHECK(c.get_int("model.hidden_dim") == 256);
    CHECK(c.get_double("train.peak_lr") == 3e-4);
    CHECK(c.get_double("masking.p_max") == 0.02);
    CHECK(c.get_bool("model.time_conditioning"));
    CHECK(c.get_string("schedule.type") == "cosine");
    CHECK_FALSE(c.is_set("corpus_path"));
}

TEST_CASE("unknown keys are rejected everywhere") {
    Config c = Config::defaults();
    CHECK_THROWS_AS(c.set("nope", "1"), ConfigError);
    CHECK_THROWS_AS(c.apply_override("bogus.key=1"), ConfigError);
    auto dir = testutil::temp_dir("cfg");
    testutil::spit(dir / "bad.cfg", "train.epochs = 2\nmystery = 9\n");
    CHECK_THROWS_WITH_AS(Config::from_file((dir / "bad.cfg").string()), doctest::Contains(":2"),
                         ConfigError);
}

TEST_CASE("parse errors name the line") {
    auto dir = testutil::temp_dir("cfg2");
    testutil::spit(dir / "bad.cfg", "# fine\ntrain.epochs 2\n");
    CHECK_THROWS_WITH_AS(Config::from_file((dir / "bad.cfg").string()), doctest::Contains(":2"),
                         ConfigError);
    CHECK_THROWS_AS(Config::from_file("/nonexistent.cfg"), ConfigError);
}

TEST_CASE("file values and overrides land") {
    auto dir = testutil::temp_dir("cfg3");
    testutil::spit(dir / "run.cfg",
                   "# comment\n\ntrain.epochs = 3\nschedule.type = simple_gaussian\n"
                   "preview.text = hello = world\n");
    Config c = Config::from_file((dir / "run.cfg").string());
    CHECK(c.get_int("train.epochs") == 3);
    CHECK(c.get_string("schedule.type") == "simple_gaussian");
    // value keeps everything after the first '='
    CHECK(c.get_string("preview.text") == "hello = world");
    c.apply_override("train.epochs=7");
    CHECK(c.get_int("train.epochs") == 7);
    CHECK_THROWS_AS(c.apply_override("no-equals-sign"), ConfigError);
}

TEST_CASE("typed getters reject junk") {
    Config c = Config::defaults();
    c.set("corpus_path", "somewhere.txt");
    CHECK_THROWS_AS(c.get_int("corpus_path"), ConfigError);
    CHECK_THROWS_AS(c.get_double("corpus_path"), ConfigError);
    CHECK_THROWS_AS(c.get_bool("corpus_path"), ConfigError);
    c.set("train.epochs", "3junk");
    CHECK_THROWS_AS(c.get_int("train.epochs"), ConfigError);
    c.set("model.time_conditioning", "false");
    CHECK_FALSE(c.get_bool("model.time_conditioning"));
}

TEST_CASE("resolved text is reparseable and idempotent") {
    Config c = Config::defaults();
    c.set("train.epochs", "5");
    c.set("corpus_path", "data/x.txt");
    std::string once = c.render_resolved();
    Config back = Config::from_text(once, "resolved");
    CHECK(back.render_resolved() == once);
    CHECK(back.get_int("train.epochs") == 5);
    CHECK(back.get_string("corpus_path") == "data/x.txt");
}

TEST_CASE("schedule construction from config") {
    Config c = Config::defaults();
    CHECK(c.schedule().type == ScheduleType::Cosine);
    c.set("schedule.type", "bimodal_gaussian");
    ScheduleKind kind = c.schedule();
    CHECK(kind.type == ScheduleType::BimodalGaussian);
    CHECK(kind.mu2_lo == 0.4);
    c.set("schedule.type", "warp");
    CHECK_THROWS_AS(c.schedule(), ConfigError);
    c.set("schedule.type", "simple_gaussian");
    c.set("schedule.stddev", "-1");
    CHECK_THROWS_AS(c.schedule(), ConfigError);
}

TEST_CASE("model config from config") {
    Config c = Config::defaults();
    ModelConfig mc = c.model_config(321);
    CHECK(mc.vocab_size == 321);  // 0 in config defers to the vocab file
    c.set("model.vocab_size", "777");
    CHECK(c.model_config(321).vocab_size == 777);
    c.set("model.heads", "7");
    CHECK_THROWS_AS(c.model_config(321), ConfigError);  // 256 % 7 != 0
}

TEST_CASE("p zero mode switch") {
    Config c = Config::defaults();
    CHECK(c.p_zero_mode() == PZeroMode::KeepRateFactor);
    c.set("objective.p_zero_mode", "unweighted");
    CHECK(c.p_zero_mode() == PZeroMode::Unweighted);
    c.set("objective.p_zero_mode", "sometimes");
    CHECK_THROWS_AS(c.p_zero_mode(), ConfigError);
}

}  // TEST_SUITE
