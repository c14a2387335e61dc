#include <doctest.h>

#include <random>

#include "capforge/core/config.hpp"
#include "capforge/core/digest.hpp"
#include "capforge/core/rng.hpp"
#include "capforge/core/types.hpp"
#include "fixtures.hpp"

using namespace capforge;

TEST_SUITE("core") {
  TEST_CASE("score range is enforced at construction") {
    CHECK(Score(0).value() == 0);
    CHECK(Score(100).value() == 100);
    CHECK_THROWS_AS(Score(-1), InvariantError);
    CHECK_THROWS_AS(Score(101), InvariantError);
  }

  TEST_CASE("score JSON rejects fractions and out-of-range values") {
    CHECK(score_from_json(json(78)).value() == 78);
    CHECK_THROWS(score_from_json(json(78.5)));
    CHECK_THROWS(score_from_json(json(101)));
    CHECK_THROWS(score_from_json(json("78")));
  }

  TEST_CASE("dimension names are lowercase snake case and closed") {
    const char* names[] = {"camera", "short", "background", "main_object", "detailed"};
    REQUIRE(kAllDimensions.size() == 5);
    for (std::size_t i = 0; i < 5; ++i) {
      CHECK(to_string(kAllDimensions[i]) == names[i]);
      CHECK(parse_dimension(names[i]) == kAllDimensions[i]);
    }
    CHECK_FALSE(parse_dimension("Camera").has_value());
    CHECK_FALSE(parse_dimension("main-object").has_value());
  }

  TEST_CASE("video ref needs id and uri") {
    CHECK_NOTHROW(testing::video("a").validate());
    CHECK_THROWS_AS((VideoRef{"", "u", std::nullopt}.validate()), InvariantError);
    CHECK_THROWS_AS((VideoRef{"a", "", std::nullopt}.validate()), InvariantError);
  }

  TEST_CASE("validate_config fills defaults") {
    const auto a = validate_config(json{{"lambda", 90}, {"t_max", 4}});
    CHECK(a.lambda == Score(90));
    CHECK(a.t_max == 4);
    CHECK(a.dimensions.size() == 5);

    const auto b = validate_config(json::object());
    CHECK(b.lambda == Score(90));
    CHECK(b.t_max == 4);
    CHECK(b.parallelism == 1);
    CHECK(b.backend.kind == BackendKind::kScripted);
    CHECK(b.backend.temperature.scorer == 0.0);
  }

  TEST_CASE("validate_config rejects bad values") {
    CHECK_THROWS_AS(validate_config(json{{"lambda", 101}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"lambda", -1}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"lambda", 89.5}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"t_max", 0}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"dimensions", {"camera", "sound"}}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"dimensions", {"camera", "camera"}}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"parallelism", 0}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"lamda", 90}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"backend", {{"kind", "remote"}}}}), ConfigError);
    CHECK_THROWS_AS(validate_config(json{{"backend", {{"endpoint_url", "http://x"}}}}), ConfigError);
  }

  TEST_CASE("config round-trips through its canonical JSON") {
    const auto cfg = testing::example_config();
    const auto again = load_pipeline_config(to_json(cfg));
    CHECK(to_json(again).dump() == to_json(cfg).dump());
    CHECK(config_digest(again) == config_digest(cfg));
  }

  TEST_CASE("templates: placeholders are validated at load time") {
    auto doc = to_json(testing::example_config());
    SUBCASE("unknown placeholder") {
      doc["templates"]["refine"] = "Fix {caption} at {score} using {suggestion} and {weather}";
      CHECK_THROWS_AS(load_pipeline_config(doc), ConfigError);
    }
    SUBCASE("missing required placeholder") {
      doc["templates"]["reflect"] = "{prompt} {caption} {score} {prev_prompt}";
      CHECK_THROWS_AS(load_pipeline_config(doc), ConfigError);
    }
    SUBCASE("scorer without the caption") {
      doc["templates"]["scorer"] = "Judge by {principles}";
      CHECK_THROWS_AS(load_pipeline_config(doc), ConfigError);
    }
    SUBCASE("missing principle") {
      doc["principles"].erase("camera");
      CHECK_THROWS_AS(load_pipeline_config(doc), ConfigError);
    }
  }

  TEST_CASE("render_template substitutes once and leaves other braces alone") {
    const auto out = render_template("A {caption} {\"k\": 1} {score}", {{"caption", "{score}"}, {"score", "7"}});
    CHECK(out == "A {score} {\"k\": 1} 7");
  }

  TEST_CASE("train schedule invariants") {
    TrainSchedule s;
    CHECK_NOTHROW(s.validate());
    s.warmup_frac = 1.0;
    CHECK_THROWS(s.validate());
    s.warmup_frac = 0.1;
    s.beta = 0.0;
    CHECK_THROWS(s.validate());
  }

  TEST_CASE("sha256 matches the standard test vector") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
  }

  TEST_CASE("uniform_index stays in range and covers every value") {
    std::mt19937_64 rng(3);
    std::vector<int> seen(7, 0);
    for (int i = 0; i < 7000; ++i) {
      const auto v = uniform_index(rng, 7);
      REQUIRE(v < 7);
      ++seen[v];
    }
    for (int c : seen) CHECK(c > 800);
    CHECK(derive_seed(1, "a") == derive_seed(1, "a"));
    CHECK(derive_seed(1, "a") != derive_seed(1, "b"));
  }

  TEST_CASE("value types round-trip through JSON") {
    std::mt19937_64 rng(42);
    for (int iter = 0; iter < 200; ++iter) {
      Trajectory t;
      t.video = VideoRef{"v" + std::to_string(iter), "file:///x/" + std::to_string(iter) + ".mp4",
                         iter % 2 ? std::optional<double>(iter * 0.25) : std::nullopt};
      t.dimension = kAllDimensions[iter % 5];
      const int n = uniform_int(rng, 1, 5);
      for (int k = 0; k < n; ++k) {
        TrajectoryStep s;
        s.t = k;
        s.prompt = Prompt{"prompt \"" + std::to_string(k) + "\"\né", k ? PromptOrigin::kRefined : PromptOrigin::kInitial};
        s.caption = "caption " + std::to_string(uniform_int(rng, 0, 1000));
        s.score = Score(uniform_int(rng, 0, 100));
        s.suggestion = "s";
        if (k + 1 < n) {
          s.branch_taken = Branch::kRefine;
          s.cot = ChainOfThought{"why", CotSource::kRefiner};
        }
        t.steps.push_back(s);
      }
      const auto j = to_json(t);
      const auto back = trajectory_from_json(json::parse(j.dump()));
      CHECK(back == t);
      CHECK(to_json(back).dump() == j.dump());
    }

    PreferenceTuple p{testing::video("v"), TaskDimension::kCamera, {"good", Score(80), 2}, {"bad", Score(30), 0}, 50};
    CHECK(preference_from_json(json::parse(to_json(p).dump())) == p);
  }

  TEST_CASE("preference tuple delta must equal the score difference") {
    PreferenceTuple p{testing::video("v"), TaskDimension::kCamera, {"good", Score(80), 2}, {"bad", Score(30), 0}, 49};
    CHECK_THROWS_AS(p.validate(), InvariantError);
    auto j = to_json(PreferenceTuple{p.video, p.dimension, p.chosen, p.rejected, 50});
    j["delta"] = 51;
    CHECK_THROWS(preference_from_json(j));
  }

  TEST_CASE("validate_trajectory catches broken records") {
    Trajectory t;
    t.video = testing::video("v");
    t.dimension = TaskDimension::kShort;
    TrajectoryStep s0;
    s0.t = 0;
    s0.prompt = Prompt{"p0", PromptOrigin::kInitial};
    s0.caption = "c0";
    s0.score = Score(60);
    s0.suggestion = "more";
    s0.branch_taken = Branch::kRefine;
    s0.cot = ChainOfThought{"because", CotSource::kRefiner};
    TrajectoryStep s1 = s0;
    s1.t = 1;
    s1.prompt = Prompt{"p1", PromptOrigin::kRefined};
    s1.score = Score(95);
    s1.branch_taken = Branch::kStop;
    s1.cot.reset();
    t.steps = {s0, s1};
    t.terminal_reason = TerminalReason::kThreshold;
    CHECK_NOTHROW(validate_trajectory(t, Score(90), 4));

    SUBCASE("non-consecutive t") {
      t.steps[1].t = 2;
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 4), InvariantError);
    }
    SUBCASE("score above lambda before the end") {
      t.steps[0].score = Score(91);
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 4), InvariantError);
    }
    SUBCASE("wrong terminal reason") {
      t.terminal_reason = TerminalReason::kCap;
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 4), InvariantError);
    }
    SUBCASE("reflect without a score drop") {
      t.steps[0].branch_taken = Branch::kReflect;
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 4), InvariantError);
    }
    SUBCASE("too many steps") {
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 0), InvariantError);
    }
    SUBCASE("refine without a chain of thought") {
      t.steps[0].cot.reset();
      CHECK_THROWS_AS(validate_trajectory(t, Score(90), 4), InvariantError);
    }
  }
}
