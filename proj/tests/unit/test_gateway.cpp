#include <doctest.h>

#include <fstream>
#include <random>

#include "capforge/core/rng.hpp"
#include "capforge/gateway/gateway.hpp"
#include "capforge/gateway/remote_backend.hpp"
#include "capforge/gateway/scorer_parser.hpp"
#include "capforge/gateway/scripted_backend.hpp"
#include "fixtures.hpp"
#include "stub_server.hpp"

using namespace capforge;
using capforge::testing::StubServer;

namespace {

ScorerReply reply_of(const ScorerResult& r) {
  REQUIRE(std::holds_alternative<ScorerReply>(r));
  return std::get<ScorerReply>(r);
}

ParseFailureReason failure_of(const ScorerResult& r) {
  REQUIRE(std::holds_alternative<ParseFailure>(r));
  return std::get<ParseFailure>(r).reason;
}

// Independent extraction oracle: the first start position (then the shortest
// span) whose substring parses as a JSON object.
std::optional<json> brute_force_first_object(const std::string& text) {
  for (std::size_t i = 0; i < text.size(); ++i) {
    if (text[i] != '{') continue;
    for (std::size_t j = i + 1; j <= text.size(); ++j) {
      const auto j_obj = json::parse(text.substr(i, j - i), nullptr, false);
      if (!j_obj.is_discarded() && j_obj.is_object()) return j_obj;
    }
  }
  return std::nullopt;
}

GatewayOptions fast_options(int retries = 3) {
  GatewayOptions o;
  o.max_retries = retries;
  o.backoff_ms = 0;
  return o;
}

BackendDescriptor remote_desc(const std::string& url) {
  BackendDescriptor d;
  d.kind = BackendKind::kRemote;
  d.endpoint_url = url;
  d.timeout_s = 5;
  d.auth_env = "CAPFORGE_TEST_TOKEN";
  return d;
}

}  // namespace

TEST_SUITE("gateway") {
  TEST_CASE("scorer reply examples") {
    CHECK(reply_of(parse_scorer_reply(R"({"score": 78, "suggestions": "mention camera motion"})")) ==
          ScorerReply{Score(78), "mention camera motion"});
    CHECK(failure_of(parse_scorer_reply("score: high")) == ParseFailureReason::kNoObject);
    CHECK(reply_of(parse_scorer_reply("```json {\"score\":90,\"suggestions\":\"\"}```")) == ScorerReply{Score(90), ""});
    CHECK(reply_of(parse_scorer_reply(R"({"score": 0, "suggestions": "x"})")) == ScorerReply{Score(0), "x"});
    CHECK(failure_of(parse_scorer_reply(R"({"score": 100.5, "suggestions": "x"})")) ==
          ParseFailureReason::kNonInteger);
    CHECK(reply_of(parse_scorer_reply(R"(prose… {"score": 61, "suggestions": "add background"} trailing)")) ==
          ScorerReply{Score(61), "add background"});
  }

  TEST_CASE("lenient extraction agrees with a brute-force scan") {
    for (const std::string raw : {std::string(R"(prose… {"score": 61, "suggestions": "add background"} trailing)"),
                                  std::string("```json {\"score\":90,\"suggestions\":\"\"}```")}) {
      const auto oracle = brute_force_first_object(strip_code_fences(raw));
      REQUIRE(oracle.has_value());
      const auto got = reply_of(parse_scorer_reply(raw));
      CHECK(got.score.value() == (*oracle)["score"].get<int>());
      CHECK(got.suggestion == (*oracle)["suggestions"].get<std::string>());
    }
  }

  TEST_CASE("golden scorer corpus") {
    std::ifstream in(testing::source_path("tests/golden/scorer_corpus.json"));
    const auto corpus = json::parse(in);
    REQUIRE(corpus["cases"].size() >= 20);
    for (const auto& c : corpus["cases"]) {
      const auto raw = c["raw"].get<std::string>();
      CAPTURE(raw);
      const auto got = parse_scorer_reply(raw);
      const auto& expect = c["expect"];
      if (expect.contains("failure")) {
        REQUIRE(std::holds_alternative<ParseFailure>(got));
        CHECK(to_string(std::get<ParseFailure>(got).reason) == expect["failure"].get<std::string>());
        CHECK(std::get<ParseFailure>(got).raw == raw);
      } else {
        const auto r = reply_of(got);
        CHECK(r.score.value() == expect["score"].get<int>());
        CHECK(r.suggestion == expect["suggestion"].get<std::string>());
      }
    }
  }

  TEST_CASE("parser never throws on random bytes") {
    std::mt19937_64 rng(5);
    const std::string alphabet = "{}[]\":,0123456789.-e scoresuggestions`\\\n\x80\xff";
    for (int i = 0; i < 5000; ++i) {
      std::string s;
      const auto len = uniform_index(rng, 80);
      for (std::uint64_t k = 0; k < len; ++k) s += alphabet[uniform_index(rng, alphabet.size())];
      const auto r = parse_scorer_reply(s);
      if (const auto* ok = std::get_if<ScorerReply>(&r)) {
        CHECK(ok->score.value() >= 0);
        CHECK(ok->score.value() <= 100);
      }
    }
  }

  TEST_CASE("rewrite replies") {
    const auto r = parse_rewrite_reply(format_rewrite_reply({"Describe the video, covering camera motion", "score was low because"}));
    CHECK(r.prompt == "Describe the video, covering camera motion");
    CHECK(r.cot == "score was low because");
    CHECK_THROWS_AS(parse_rewrite_reply("<reasoning>only thoughts</reasoning>"), MalformedReply);
    CHECK_THROWS_AS(parse_rewrite_reply("<prompt>   </prompt>"), MalformedReply);
    const auto loose = parse_rewrite_reply("thinking out loud\n<prompt>New prompt</prompt>");
    CHECK(loose.prompt == "New prompt");
    CHECK(loose.cot == "thinking out loud");
  }

  TEST_CASE("wire format") {
    ChatRequest req{Role::kScorer, testing::video("v1"), TaskDimension::kCamera, "judge this", true, 0.2};
    const auto w = to_wire(req, "m");
    CHECK(w["model"] == "m");
    CHECK(w["temperature"] == 0.2);
    REQUIRE(w["messages"].size() == 1);
    const auto& content = w["messages"][0]["content"];
    REQUIRE(content.size() == 2);
    CHECK(content[0]["type"] == "video_url");
    CHECK(content[0]["video_url"]["url"] == "file:///videos/v1.mp4");
    CHECK(content[1]["type"] == "text");
    CHECK(content[1]["text"] == "judge this");
    req.attach_video = false;
    CHECK(to_wire(req, "m")["messages"][0]["content"].size() == 1);
    CHECK(request_digest(req, "m") != request_digest(req, "other"));
  }

  TEST_CASE("scripted backend echoes scripts and reports exhaustion") {
    ScriptedBehavior b;
    Script s = testing::scores_script({80});
    s.captions = std::vector<std::string>{"a greenhouse scene with rows of plants"};
    s.refinements = std::vector<Rewrite>{{"Describe the video, covering camera motion", "score was low because"}};
    b.scripts[{"v1", TaskDimension::kCamera}] = s;
    ScriptedBackend backend(b, true);
    ModelGateway gw(backend, fast_options());
    const auto v = testing::video("v1");
    CHECK(gw.generate_caption(v, TaskDimension::kCamera, Prompt{"any", PromptOrigin::kInitial}) ==
          "a greenhouse scene with rows of plants");
    CHECK_THROWS_AS(gw.generate_caption(v, TaskDimension::kCamera, Prompt{"any", PromptOrigin::kInitial}),
                    ScriptExhausted);
    const auto [p, cot] =
        gw.refine_prompt(v, TaskDimension::kCamera, {Prompt{"any", PromptOrigin::kInitial}, "c", Score(50), "g"},
                         "{caption} {score} {suggestion}");
    CHECK(p.text == "Describe the video, covering camera motion");
    CHECK(p.origin == PromptOrigin::kRefined);
    CHECK(cot.text == "score was low because");
    CHECK(cot.produced_by == CotSource::kRefiner);
    CHECK(backend.requests().size() == 3);
    CHECK(gw.attempts() == 3);  // a script error is not retried
  }

  TEST_CASE("reflect carries the previous chain-of-thought and needs one") {
    ScriptedBehavior b;
    b.scripts[{"v1", TaskDimension::kShort}] = Script{};
    ScriptedBackend backend(b, true);
    ModelGateway gw(backend, fast_options());
    const auto v = testing::video("v1");
    const RefineInput cur{Prompt{"p1", PromptOrigin::kRefined}, "caption now", Score(40), "g"};
    const std::string tmpl = "{prompt} {caption} {score} | {prev_prompt} | {prev_cot}";
    CHECK_THROWS_AS(
        gw.reflect_prompt(v, TaskDimension::kShort, cur, {Prompt{"p0", PromptOrigin::kInitial}, "old", std::nullopt}, tmpl),
        PreconditionError);
    const auto [p, cot] = gw.reflect_prompt(
        v, TaskDimension::kShort, cur,
        {Prompt{"p0", PromptOrigin::kInitial}, "old", ChainOfThought{"earlier reasoning", CotSource::kRefiner}}, tmpl);
    CHECK(p.origin == PromptOrigin::kReflected);
    CHECK(cot.produced_by == CotSource::kReflector);
    const auto reqs = backend.requests();
    REQUIRE(reqs.size() == 1);
    CHECK(reqs[0].role == Role::kReflector);
    CHECK(reqs[0].text.find("earlier reasoning") != std::string::npos);
    CHECK_FALSE(reqs[0].attach_video);
  }

  TEST_CASE("empty caption is a malformed reply") {
    ScriptedBehavior b;
    Script s;
    s.captions = std::vector<std::string>{"   "};
    b.scripts[{"v1", TaskDimension::kCamera}] = s;
    ScriptedBackend backend(b);
    ModelGateway gw(backend, fast_options());
    CHECK_THROWS_AS(gw.generate_caption(testing::video("v1"), TaskDimension::kCamera, Prompt{"p", PromptOrigin::kInitial}),
                    MalformedReply);
  }

  TEST_CASE("endpoint parsing") {
    CHECK(split_endpoint("http://localhost:8000").path == "/v1/chat/completions");
    CHECK(split_endpoint("https://api.example.com/v1/chat/completions").scheme_host_port == "https://api.example.com");
    CHECK_THROWS_AS(split_endpoint("localhost:8000"), ConfigError);
  }

  TEST_CASE("remote backend round trip with canned replies and auth") {
    setenv("CAPFORGE_TEST_TOKEN", "sekret", 1);
    StubServer stub([](const httplib::Request& req, httplib::Response& res) {
      const auto role = req.get_header_value(kRoleHeader);
      std::string text = "a caption";
      if (role == "scorer") text = R"({"score": 70, "suggestions": "mention lighting"})";
      if (role == "refiner") text = format_rewrite_reply({"canned refined prompt", "canned refine reasoning"});
      if (role == "reflector") text = format_rewrite_reply({"canned reflected prompt", "canned reflect reasoning"});
      res.set_content(StubServer::completion_body(text), "application/json");
    });
    RemoteBackend backend(remote_desc(stub.url()));
    ModelGateway gw(backend, fast_options());
    const auto v = testing::video("v9");
    const auto dim = TaskDimension::kBackground;
    CHECK(gw.generate_caption(v, dim, Prompt{"p", PromptOrigin::kInitial}) == "a caption");
    const auto cfg = testing::example_config();
    CHECK(reply_of(gw.score_caption(v, dim, "a caption", cfg.principles, cfg.templates.scorer_instruction)) ==
          ScorerReply{Score(70), "mention lighting"});
    const RefineInput cur{Prompt{"p", PromptOrigin::kInitial}, "a caption", Score(70), "mention lighting"};
    const auto refined = gw.refine_prompt(v, dim, cur, cfg.templates.refine_instruction);
    CHECK(refined.first.text == "canned refined prompt");
    CHECK(refined.second.text == "canned refine reasoning");
    const auto reflected = gw.reflect_prompt(
        v, dim, cur, {Prompt{"p0", PromptOrigin::kInitial}, "c0", refined.second}, cfg.templates.reflect_instruction);
    CHECK(reflected.first.text == "canned reflected prompt");
    CHECK(stub.hits() == 4);
    for (const auto& h : stub.auth_headers()) CHECK(h == "Bearer sekret");
    const auto first = json::parse(stub.bodies()[0]);
    CHECK(first["model"] == "captioner");
    unsetenv("CAPFORGE_TEST_TOKEN");
  }

  TEST_CASE("retriable statuses are retried up to max_retries") {
    std::atomic<int> calls{0};
    StubServer stub([&](const httplib::Request&, httplib::Response& res) {
      if (calls++ < 2) {
        res.status = 503;
        res.set_content("busy", "text/plain");
      } else {
        res.set_content(StubServer::completion_body("third time lucky"), "application/json");
      }
    });
    RemoteBackend backend(remote_desc(stub.url()));
    testing::TempDir dir("audit");
    AuditLog audit(dir / "audit.jsonl");
    ModelGateway gw(backend, fast_options(3), &audit);
    CHECK(gw.generate_caption(testing::video("v"), TaskDimension::kShort, Prompt{"p", PromptOrigin::kInitial}) ==
          "third time lucky");
    CHECK(stub.hits() == 3);
    const auto records = AuditLog::read(dir / "audit.jsonl");
    REQUIRE(records.size() == 3);
    for (std::size_t i = 0; i < records.size(); ++i) CHECK(records[i].seq == i);
    CHECK_FALSE(records[0].response_text.has_value());
    CHECK(records[2].response_text == std::optional<std::string>("third time lucky"));
  }

  TEST_CASE("failures exhaust retries or stop immediately") {
    SUBCASE("persistent 500") {
      StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 500; });
      RemoteBackend backend(remote_desc(stub.url()));
      ModelGateway gw(backend, fast_options(3));
      CHECK_THROWS_AS(gw.generate_caption(testing::video("v"), TaskDimension::kShort, Prompt{"p", PromptOrigin::kInitial}),
                      TransportError);
      CHECK(stub.hits() == 3);
    }
    SUBCASE("400 is not retried") {
      StubServer stub([](const httplib::Request&, httplib::Response& res) { res.status = 400; });
      RemoteBackend backend(remote_desc(stub.url()));
      ModelGateway gw(backend, fast_options(3));
      CHECK_THROWS_AS(gw.generate_caption(testing::video("v"), TaskDimension::kShort, Prompt{"p", PromptOrigin::kInitial}),
                      TransportError);
      CHECK(stub.hits() == 1);
    }
    SUBCASE("unreachable endpoint") {
      int port = 0;
      {
        httplib::Server probe;
        port = probe.bind_to_any_port("127.0.0.1");
      }
      auto desc = remote_desc("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
      desc.timeout_s = 1;
      RemoteBackend backend(desc);
      ModelGateway gw(backend, fast_options(2));
      CHECK_THROWS_AS(gw.generate_caption(testing::video("v"), TaskDimension::kShort, Prompt{"p", PromptOrigin::kInitial}),
                      TransportError);
      CHECK(gw.attempts() == 2);
    }
    SUBCASE("non-JSON body") {
      StubServer stub([](const httplib::Request&, httplib::Response& res) { res.set_content("<html>", "text/html"); });
      RemoteBackend backend(remote_desc(stub.url()));
      ModelGateway gw(backend, fast_options(3));
      CHECK_THROWS_AS(gw.generate_caption(testing::video("v"), TaskDimension::kShort, Prompt{"p", PromptOrigin::kInitial}),
                      TransportError);
      CHECK(stub.hits() == 1);
    }
  }

  TEST_CASE("audit log replay reproduces the scripted outcomes") {
    testing::TempDir dir("replay");
    const auto cfg = testing::example_config();
    ScriptedBehavior b;
    b.scripts[{"v1", TaskDimension::kCamera}] = testing::scores_script({60, 50, 70, 65, 72});
    std::vector<Trajectory> first;
    {
      ScriptedBackend backend(b);
      AuditLog audit(dir / "audit.jsonl");
      ModelGateway gw(backend, fast_options(), &audit);
      first.push_back(run_trajectory(testing::video("v1"), TaskDimension::kCamera, cfg.run, cfg.templates,
                                     cfg.principles, gw));
    }
    ReplayBackend replay(AuditLog::read(dir / "audit.jsonl"), cfg.run.backend.model_name);
    ModelGateway gw(replay, GatewayOptions::from(cfg.run));
    const auto again =
        run_trajectory(testing::video("v1"), TaskDimension::kCamera, cfg.run, cfg.templates, cfg.principles, gw);
    CHECK(again == first[0]);
  }

  TEST_CASE("audit log resumes its sequence and skips a torn tail") {
    testing::TempDir dir("auditseq");
    {
      AuditLog a(dir / "audit.jsonl");
      a.record(Role::kCaptioner, "d1", std::string("x"), std::nullopt, 1);
      a.record(Role::kScorer, "d2", std::string("y"), std::nullopt, 1);
    }
    {
      std::ofstream out(dir / "audit.jsonl", std::ios::app);
      out << "{\"seq\": 2, \"role\": \"capt";
    }
    {
      AuditLog a(dir / "audit.jsonl");
      a.record(Role::kRefiner, "d3", std::nullopt, std::string("boom"), 1);
    }
    const auto recs = AuditLog::read(dir / "audit.jsonl");
    REQUIRE(recs.size() == 3);
    CHECK(recs[2].seq == 2);
    CHECK(recs[2].error == std::optional<std::string>("boom"));
  }
}
