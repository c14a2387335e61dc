#include "capforge/gateway/scripted_backend.hpp"

#include <algorithm>
#include <fstream>

#include "capforge/core/config.hpp"
#include "capforge/core/rng.hpp"

namespace capforge {

std::string scorer_reply_text(int score, const std::string& suggestion) {
  return json{{"score", score}, {"suggestions", suggestion}}.dump();
}

Script ScoreWalk::script_for(const std::string& video_id, TaskDimension d) const {
  std::mt19937_64 rng(derive_seed(seed, video_id + "/" + std::string(to_string(d))));
  Script s;
  int score = uniform_int(rng, start_min, start_max);
  for (int i = 0; i < length; ++i) {
    if (i > 0) score = std::clamp(score + uniform_int(rng, step_min, step_max), 0, 100);
    if (parse_error_rate > 0.0 && uniform_unit(rng) < parse_error_rate) {
      s.scorer_replies.push_back("score: " + std::to_string(score) + " (looks fine)");
    } else {
      s.scorer_replies.push_back(scorer_reply_text(score, "add more detail (round " + std::to_string(i) + ")"));
    }
  }
  return s;
}

namespace {

std::vector<Rewrite> rewrites_from_json(const json& arr, const std::string& where) {
  if (!arr.is_array()) throw ConfigError(where + " must be an array");
  std::vector<Rewrite> out;
  for (const auto& e : arr) {
    if (!e.is_object() || !e.contains("prompt")) throw ConfigError(where + " entries need a 'prompt'");
    out.push_back({e.at("prompt").get<std::string>(), e.value("cot", std::string())});
  }
  return out;
}

}  // namespace

ScriptedBehavior ScriptedBehavior::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("script document must be an object");
  ScriptedBehavior b;
  if (j.contains("scripts")) {
    for (const auto& e : j.at("scripts")) {
      const auto video_id = e.at("video_id").get<std::string>();
      const auto dim_name = e.at("dimension").get<std::string>();
      const auto dim = parse_dimension(dim_name);
      if (!dim) throw ConfigError("script for '" + video_id + "' has unknown dimension '" + dim_name + "'");
      Script s;
      if (e.contains("captions")) s.captions = e.at("captions").get<std::vector<std::string>>();
      for (const auto& r : e.value("scores", json::array())) {
        if (r.is_number_integer()) {
          s.scorer_replies.push_back(scorer_reply_text(r.get<int>(), "improve coverage"));
        } else if (r.is_string()) {
          s.scorer_replies.push_back(r.get<std::string>());
        } else if (r.is_object()) {
          s.scorer_replies.push_back(r.dump());
        } else {
          throw ConfigError("script scores must be integers, raw strings or objects");
        }
      }
      if (e.contains("refinements")) s.refinements = rewrites_from_json(e.at("refinements"), "refinements");
      if (e.contains("reflections")) s.reflections = rewrites_from_json(e.at("reflections"), "reflections");
      const auto key = std::make_pair(video_id, *dim);
      if (b.scripts.count(key)) throw ConfigError("duplicate script for (" + video_id + ", " + dim_name + ")");
      b.scripts.emplace(key, std::move(s));
    }
  }
  if (j.contains("generator")) {
    const auto& g = j.at("generator");
    ScoreWalk w;
    w.seed = g.value("seed", w.seed);
    w.length = g.value("length", w.length);
    w.start_min = g.value("start_min", w.start_min);
    w.start_max = g.value("start_max", w.start_max);
    w.step_min = g.value("step_min", w.step_min);
    w.step_max = g.value("step_max", w.step_max);
    w.parse_error_rate = g.value("parse_error_rate", w.parse_error_rate);
    if (w.length < 1 || w.start_min > w.start_max || w.step_min > w.step_max || w.start_min < 0 ||
        w.start_max > 100 || w.parse_error_rate < 0.0 || w.parse_error_rate > 1.0) {
      throw ConfigError("invalid score generator parameters");
    }
    b.generator = w;
  }
  return b;
}

ScriptedBehavior ScriptedBehavior::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read script file " + path);
  try {
    return from_json(json::parse(in));
  } catch (const json::exception& e) {
    throw ConfigError("script file " + path + ": " + e.what());
  }
}

ScriptedBackend::ScriptedBackend(ScriptedBehavior behavior, bool record_requests)
    : behavior_(std::move(behavior)), record_requests_(record_requests) {}

ScriptedBackend::Cursor& ScriptedBackend::cursor_for(const ChatRequest& req) {
  const auto key = std::make_pair(req.video.id, req.dimension);
  auto it = cursors_.find(key);
  if (it != cursors_.end()) return it->second;
  Cursor c;
  if (const auto s = behavior_.scripts.find(key); s != behavior_.scripts.end()) {
    c.script = s->second;
  } else if (behavior_.generator) {
    c.script = behavior_.generator->script_for(req.video.id, req.dimension);
  }
  return cursors_.emplace(key, std::move(c)).first->second;
}

std::string ScriptedBackend::complete(const ChatRequest& req) {
  std::lock_guard lock(mu_);
  if (record_requests_) log_.push_back(req);
  auto& c = cursor_for(req);
  const auto where = "(" + req.video.id + ", " + std::string(to_string(req.dimension)) + ")";
  const auto exhausted = [&](const char* what) {
    return ScriptExhausted(std::string("script exhausted: no more ") + what + " for " + where);
  };

  switch (req.role) {
    case Role::kCaptioner: {
      const auto n = c.captions++;
      if (!c.script.captions) {
        return "Caption " + std::to_string(n) + " of " + req.video.id + " (" +
               std::string(to_string(req.dimension)) + ").";
      }
      if (n >= c.script.captions->size()) throw exhausted("captions");
      return (*c.script.captions)[n];
    }
    case Role::kScorer: {
      const auto n = c.scores++;
      if (n >= c.script.scorer_replies.size()) throw exhausted("scorer replies");
      return c.script.scorer_replies[n];
    }
    case Role::kRefiner: {
      const auto n = c.refinements++;
      if (!c.script.refinements) {
        return format_rewrite_reply({"Refined prompt " + std::to_string(n) + " for " + req.video.id,
                                     "Refinement reasoning " + std::to_string(n)});
      }
      if (n >= c.script.refinements->size()) throw exhausted("refinements");
      return format_rewrite_reply((*c.script.refinements)[n]);
    }
    case Role::kReflector: {
      const auto n = c.reflections++;
      if (!c.script.reflections) {
        return format_rewrite_reply({"Reflected prompt " + std::to_string(n) + " for " + req.video.id,
                                     "Reflection reasoning " + std::to_string(n)});
      }
      if (n >= c.script.reflections->size()) throw exhausted("reflections");
      return format_rewrite_reply((*c.script.reflections)[n]);
    }
  }
  throw GatewayError("unknown role");
}

std::vector<ChatRequest> ScriptedBackend::requests() const {
  std::lock_guard lock(mu_);
  return log_;
}

}  // namespace capforge
