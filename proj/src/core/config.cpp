#include "capforge/core/config.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <regex>

#include "capforge/core/digest.hpp"

namespace capforge {

namespace {

void reject_unknown_keys(const json& obj, const std::set<std::string>& known, const std::string& where) {
  for (const auto& [key, _] : obj.items()) {
    if (!known.count(key)) throw ConfigError("unknown field '" + key + "' in " + where);
  }
}

const json& require(const json& obj, const char* key, const std::string& where) {
  if (!obj.contains(key)) throw ConfigError("missing required field '" + std::string(key) + "' in " + where);
  return obj.at(key);
}

long long integer_field(const json& v, const std::string& name) {
  if (v.is_number_integer() || v.is_number_unsigned()) return v.get<long long>();
  throw ConfigError("field '" + name + "' must be an integer, got " + v.dump());
}

double number_field(const json& v, const std::string& name) {
  if (!v.is_number()) throw ConfigError("field '" + name + "' must be a number, got " + v.dump());
  const double d = v.get<double>();
  if (!std::isfinite(d)) throw ConfigError("field '" + name + "' must be finite");
  return d;
}

std::string string_field(const json& v, const std::string& name) {
  if (!v.is_string()) throw ConfigError("field '" + name + "' must be a string");
  return v.get<std::string>();
}

BackendDescriptor backend_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'backend' must be an object");
  reject_unknown_keys(j,
                      {"kind", "endpoint_url", "model_name", "timeout_s", "max_retries", "backoff_ms",
                       "auth_env", "script_path", "temperature"},
                      "backend");
  BackendDescriptor b;
  const auto kind = string_field(require(j, "kind", "backend"), "backend.kind");
  if (kind == "remote") {
    b.kind = BackendKind::kRemote;
    b.endpoint_url = string_field(require(j, "endpoint_url", "backend"), "backend.endpoint_url");
    if (b.endpoint_url.empty()) throw ConfigError("backend.endpoint_url must be non-empty for a remote backend");
  } else if (kind == "scripted") {
    b.kind = BackendKind::kScripted;
  } else {
    throw ConfigError("unknown backend kind '" + kind + "'");
  }
  if (j.contains("model_name")) b.model_name = string_field(j["model_name"], "backend.model_name");
  if (j.contains("timeout_s")) {
    b.timeout_s = number_field(j["timeout_s"], "backend.timeout_s");
    if (b.timeout_s <= 0) throw ConfigError("backend.timeout_s must be positive");
  }
  if (j.contains("max_retries")) {
    const auto r = integer_field(j["max_retries"], "backend.max_retries");
    if (r < 1 || r > 20) throw ConfigError("backend.max_retries must be in [1,20]");
    b.max_retries = static_cast<int>(r);
  }
  if (j.contains("backoff_ms")) {
    const auto r = integer_field(j["backoff_ms"], "backend.backoff_ms");
    if (r < 0) throw ConfigError("backend.backoff_ms must be >= 0");
    b.backoff_ms = static_cast<int>(r);
  }
  if (j.contains("auth_env")) b.auth_env = string_field(j["auth_env"], "backend.auth_env");
  if (j.contains("script_path")) b.script_path = string_field(j["script_path"], "backend.script_path");
  if (j.contains("temperature")) {
    const auto& t = j["temperature"];
    if (!t.is_object()) throw ConfigError("backend.temperature must be an object");
    reject_unknown_keys(t, {"captioner", "scorer", "refiner", "reflector"}, "backend.temperature");
    const auto read = [&](const char* k, double& dst) {
      if (t.contains(k)) {
        dst = number_field(t[k], std::string("backend.temperature.") + k);
        if (dst < 0) throw ConfigError("temperatures must be >= 0");
      }
    };
    read("captioner", b.temperature.captioner);
    read("scorer", b.temperature.scorer);
    read("refiner", b.temperature.refiner);
    read("reflector", b.temperature.reflector);
  }
  return b;
}

json backend_to_json(const BackendDescriptor& b) {
  json j{{"kind", b.kind == BackendKind::kRemote ? "remote" : "scripted"},
         {"model_name", b.model_name},
         {"timeout_s", b.timeout_s},
         {"max_retries", b.max_retries},
         {"backoff_ms", b.backoff_ms},
         {"auth_env", b.auth_env},
         {"temperature",
          {{"captioner", b.temperature.captioner},
           {"scorer", b.temperature.scorer},
           {"refiner", b.temperature.refiner},
           {"reflector", b.temperature.reflector}}}};
  if (b.kind == BackendKind::kRemote) j["endpoint_url"] = b.endpoint_url;
  if (!b.script_path.empty()) j["script_path"] = b.script_path;
  return j;
}

void check_template(std::string_view name, const std::string& text) {
  if (text.empty()) throw ConfigError("template '" + std::string(name) + "' must be non-empty");
  const auto& allowed = allowed_placeholders(name);
  std::set<std::string> seen;
  for (const auto& p : placeholders_in(text)) {
    if (!allowed.count(p)) {
      throw ConfigError("template '" + std::string(name) + "' uses unsupported placeholder {" + p + "}");
    }
    seen.insert(p);
  }
  for (const auto& r : required_placeholders(name)) {
    if (!seen.count(r)) {
      throw ConfigError("template '" + std::string(name) + "' must reference {" + r + "}");
    }
  }
}

}  // namespace

RunConfig validate_config(const json& raw) {
  if (!raw.is_object()) throw ConfigError("run configuration must be an object");
  reject_unknown_keys(raw,
                      {"lambda", "t_max", "dimensions", "backend", "parallelism", "seed",
                       "refiner_sees_principles"},
                      "run");
  RunConfig cfg;
  if (raw.contains("lambda")) {
    const auto l = integer_field(raw["lambda"], "lambda");
    if (l < 0 || l > 100) throw ConfigError("lambda " + std::to_string(l) + " outside [0,100]");
    cfg.lambda = Score(static_cast<int>(l));
  }
  if (raw.contains("t_max")) {
    const auto t = integer_field(raw["t_max"], "t_max");
    if (t < 1) throw ConfigError("t_max must be >= 1");
    if (t > 1000) throw ConfigError("t_max is unreasonably large");
    cfg.t_max = static_cast<int>(t);
  }
  if (raw.contains("dimensions")) {
    const auto& dims = raw["dimensions"];
    if (!dims.is_array() || dims.empty()) throw ConfigError("dimensions must be a non-empty array");
    cfg.dimensions.clear();
    for (const auto& d : dims) {
      const auto name = string_field(d, "dimensions[]");
      const auto parsed = parse_dimension(name);
      if (!parsed) throw ConfigError("unknown dimension '" + name + "'");
      if (std::find(cfg.dimensions.begin(), cfg.dimensions.end(), *parsed) != cfg.dimensions.end()) {
        throw ConfigError("duplicate dimension '" + name + "'");
      }
      cfg.dimensions.push_back(*parsed);
    }
  }
  if (raw.contains("backend")) cfg.backend = backend_from_json(raw["backend"]);
  if (raw.contains("parallelism")) {
    const auto p = integer_field(raw["parallelism"], "parallelism");
    if (p < 1 || p > 1024) throw ConfigError("parallelism must be in [1,1024]");
    cfg.parallelism = static_cast<int>(p);
  }
  if (raw.contains("seed")) {
    const auto& s = raw["seed"];
    if (!s.is_number_unsigned() && !(s.is_number_integer() && s.get<long long>() >= 0)) {
      throw ConfigError("seed must be a non-negative integer");
    }
    cfg.seed = s.get<std::uint64_t>();
  }
  if (raw.contains("refiner_sees_principles")) {
    if (!raw["refiner_sees_principles"].is_boolean()) {
      throw ConfigError("refiner_sees_principles must be a boolean");
    }
    cfg.refiner_sees_principles = raw["refiner_sees_principles"].get<bool>();
  }
  return cfg;
}

json to_json(const RunConfig& c) {
  json dims = json::array();
  for (auto d : c.dimensions) dims.push_back(to_string(d));
  return json{{"lambda", c.lambda.value()},
              {"t_max", c.t_max},
              {"dimensions", dims},
              {"backend", backend_to_json(c.backend)},
              {"parallelism", c.parallelism},
              {"seed", c.seed},
              {"refiner_sees_principles", c.refiner_sees_principles}};
}

// ---------------------------------------------------------------------------
// Templates
// ---------------------------------------------------------------------------

const std::set<std::string>& allowed_placeholders(std::string_view name) {
  static const std::set<std::string> kInitial{"dimension"};
  static const std::set<std::string> kScorer{"principles", "caption", "dimension"};
  static const std::set<std::string> kRefine{"caption", "score", "suggestion", "prompt", "dimension"};
  static const std::set<std::string> kReflect{"prompt",      "caption",  "score",     "suggestion",
                                              "prev_prompt", "prev_caption", "prev_cot", "dimension"};
  static const std::set<std::string> kNone;
  if (name == "initial") return kInitial;
  if (name == "scorer") return kScorer;
  if (name == "refine") return kRefine;
  if (name == "reflect") return kReflect;
  return kNone;
}

const std::set<std::string>& required_placeholders(std::string_view name) {
  static const std::set<std::string> kScorer{"principles", "caption"};
  static const std::set<std::string> kRefine{"caption", "score", "suggestion"};
  static const std::set<std::string> kReflect{"prompt", "caption", "score", "prev_prompt", "prev_cot"};
  static const std::set<std::string> kNone;
  if (name == "scorer") return kScorer;
  if (name == "refine") return kRefine;
  if (name == "reflect") return kReflect;
  return kNone;
}

std::vector<std::string> placeholders_in(std::string_view text) {
  static const std::regex kSlot(R"(\{([a-z_][a-z0-9_]*)\})");
  std::vector<std::string> out;
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kSlot); it != std::sregex_iterator(); ++it) {
    out.push_back((*it)[1].str());
  }
  return out;
}

std::string render_template(std::string_view text, const std::map<std::string, std::string>& values) {
  std::string out;
  out.reserve(text.size());
  std::size_t i = 0;
  while (i < text.size()) {
    if (text[i] == '{') {
      const auto close = text.find('}', i + 1);
      if (close != std::string_view::npos) {
        const auto name = std::string(text.substr(i + 1, close - i - 1));
        const auto it = values.find(name);
        if (it != values.end()) {
          out += it->second;
          i = close + 1;
          continue;
        }
      }
    }
    out.push_back(text[i]);
    ++i;
  }
  return out;
}

PromptTemplates templates_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'templates' must be an object");
  reject_unknown_keys(j, {"initial", "scorer", "refine", "reflect"}, "templates");
  PromptTemplates t;
  t.initial = string_field(require(j, "initial", "templates"), "templates.initial");
  t.scorer_instruction = string_field(require(j, "scorer", "templates"), "templates.scorer");
  t.refine_instruction = string_field(require(j, "refine", "templates"), "templates.refine");
  t.reflect_instruction = string_field(require(j, "reflect", "templates"), "templates.reflect");
  check_template("initial", t.initial);
  check_template("scorer", t.scorer_instruction);
  check_template("refine", t.refine_instruction);
  check_template("reflect", t.reflect_instruction);
  return t;
}

json to_json(const PromptTemplates& t) {
  return json{{"initial", t.initial},
              {"scorer", t.scorer_instruction},
              {"refine", t.refine_instruction},
              {"reflect", t.reflect_instruction}};
}

// ---------------------------------------------------------------------------
// Principles
// ---------------------------------------------------------------------------

PrincipleSet::PrincipleSet(std::map<TaskDimension, std::string> texts) : texts_(std::move(texts)) {
  for (auto d : kAllDimensions) {
    const auto it = texts_.find(d);
    if (it == texts_.end()) {
      throw ConfigError("principles missing dimension '" + std::string(to_string(d)) + "'");
    }
    if (it->second.empty()) {
      throw ConfigError("principle for '" + std::string(to_string(d)) + "' must be non-empty");
    }
  }
}

const std::string& PrincipleSet::for_dimension(TaskDimension d) const {
  const auto it = texts_.find(d);
  if (it == texts_.end()) throw ConfigError("no principle for '" + std::string(to_string(d)) + "'");
  return it->second;
}

PrincipleSet principles_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'principles' must be an object");
  std::map<TaskDimension, std::string> texts;
  for (const auto& [key, value] : j.items()) {
    const auto d = parse_dimension(key);
    if (!d) throw ConfigError("unknown dimension '" + key + "' in principles");
    texts[*d] = string_field(value, "principles." + key);
  }
  return PrincipleSet(std::move(texts));
}

json to_json(const PrincipleSet& p) {
  json j = json::object();
  for (const auto& [d, text] : p.texts()) j[std::string(to_string(d))] = text;
  return j;
}

// ---------------------------------------------------------------------------
// Train schedule
// ---------------------------------------------------------------------------

void TrainSchedule::validate() const {
  if (epochs < 1) throw ConfigError("epochs must be >= 1");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
  if (!(lr0 >= 0.0) || !std::isfinite(lr0)) throw ConfigError("lr0 must be a finite non-negative number");
  if (!(warmup_frac >= 0.0 && warmup_frac < 1.0)) throw ConfigError("warmup_frac must be in [0,1)");
  if (!(beta > 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be > 0");
}

TrainSchedule schedule_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("'train' must be an object");
  reject_unknown_keys(j, {"epochs", "batch_size", "lr0", "warmup_frac", "beta", "seed", "reapply_order_each_epoch"},
                      "train");
  TrainSchedule s;
  if (j.contains("epochs")) s.epochs = static_cast<int>(integer_field(j["epochs"], "train.epochs"));
  if (j.contains("batch_size")) s.batch_size = static_cast<int>(integer_field(j["batch_size"], "train.batch_size"));
  if (j.contains("lr0")) s.lr0 = number_field(j["lr0"], "train.lr0");
  if (j.contains("warmup_frac")) s.warmup_frac = number_field(j["warmup_frac"], "train.warmup_frac");
  if (j.contains("beta")) s.beta = number_field(j["beta"], "train.beta");
  if (j.contains("seed")) s.seed = static_cast<std::uint64_t>(integer_field(j["seed"], "train.seed"));
  if (j.contains("reapply_order_each_epoch")) {
    if (!j["reapply_order_each_epoch"].is_boolean()) throw ConfigError("train.reapply_order_each_epoch must be a boolean");
    s.reapply_order_each_epoch = j["reapply_order_each_epoch"].get<bool>();
  }
  s.validate();
  return s;
}

json to_json(const TrainSchedule& s) {
  return json{{"epochs", s.epochs},           {"batch_size", s.batch_size}, {"lr0", s.lr0},
              {"warmup_frac", s.warmup_frac}, {"beta", s.beta},             {"seed", s.seed},
              {"reapply_order_each_epoch", s.reapply_order_each_epoch}};
}

// ---------------------------------------------------------------------------
// Whole document
// ---------------------------------------------------------------------------

PipelineConfig load_pipeline_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config document must be an object");
  reject_unknown_keys(doc, {"run", "templates", "principles", "train"}, "config");
  PipelineConfig cfg;
  cfg.run = validate_config(doc.contains("run") ? doc["run"] : json::object());
  cfg.templates = templates_from_json(require(doc, "templates", "config"));
  cfg.principles = principles_from_json(require(doc, "principles", "config"));
  if (doc.contains("train")) cfg.train = schedule_from_json(doc["train"]);
  return cfg;
}

PipelineConfig load_pipeline_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
  }
  auto cfg = load_pipeline_config(doc);
  cfg.base_dir = std::filesystem::absolute(path).parent_path().string();
  return cfg;
}

json to_json(const PipelineConfig& cfg) {
  return json{{"run", to_json(cfg.run)},
              {"templates", to_json(cfg.templates)},
              {"principles", to_json(cfg.principles)},
              {"train", to_json(cfg.train)}};
}

std::string config_digest(const PipelineConfig& cfg) { return sha256_hex(to_json(cfg).dump()); }

}  // namespace capforge
