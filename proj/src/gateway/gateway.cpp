#include "capforge/gateway/gateway.hpp"

#include <chrono>
#include <iterator>
#include <thread>

namespace capforge {

// ---------------------------------------------------------------------------
// AuditLog
// ---------------------------------------------------------------------------

AuditLog::AuditLog(const std::filesystem::path& path) {
  if (std::filesystem::exists(path)) {
    // Cut a torn final line so the next record starts on its own line.
    std::string data;
    {
      std::ifstream in(path, std::ios::binary);
      data.assign(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
    }
    if (!data.empty() && data.back() != '\n') {
      const auto keep = data.rfind('\n');
      std::filesystem::resize_file(path, keep == std::string::npos ? 0 : keep + 1);
    }
    for (const auto& r : read(path)) next_seq_ = std::max(next_seq_, r.seq + 1);
  }
  out_.open(path, std::ios::app | std::ios::binary);
  if (!out_) throw std::runtime_error("cannot open audit log " + path.string());
}

void AuditLog::record(Role role, const std::string& digest, const std::optional<std::string>& response,
                      const std::optional<std::string>& error, std::int64_t latency_ms) {
  std::lock_guard lock(mu_);
  nlohmann::ordered_json j;
  j["seq"] = next_seq_++;
  j["role"] = to_string(role);
  j["request_digest"] = digest;
  j["response_text"] = response ? nlohmann::ordered_json(*response) : nlohmann::ordered_json(nullptr);
  if (error) j["error"] = *error;
  j["latency_ms"] = latency_ms;
  out_ << j.dump(-1, ' ', false, nlohmann::ordered_json::error_handler_t::replace) << '\n';
  out_.flush();
}

std::vector<AuditRecord> AuditLog::read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  std::vector<AuditRecord> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto j = json::parse(line, nullptr, false);
    if (j.is_discarded()) continue;  // torn final line after a crash
    AuditRecord r;
    r.seq = j.at("seq").get<std::uint64_t>();
    r.role = parse_role(j.at("role").get<std::string>()).value_or(Role::kCaptioner);
    r.request_digest = j.at("request_digest").get<std::string>();
    if (!j.at("response_text").is_null()) r.response_text = j.at("response_text").get<std::string>();
    if (j.contains("error")) r.error = j.at("error").get<std::string>();
    r.latency_ms = j.at("latency_ms").get<std::int64_t>();
    out.push_back(std::move(r));
  }
  return out;
}

// ---------------------------------------------------------------------------
// ReplayBackend
// ---------------------------------------------------------------------------

ReplayBackend::ReplayBackend(const std::vector<AuditRecord>& records, std::string model_name)
    : model_name_(std::move(model_name)) {
  for (const auto& r : records) {
    if (r.response_text) responses_[r.request_digest].push_back(*r.response_text);
  }
}

std::string ReplayBackend::complete(const ChatRequest& req) {
  const auto digest = request_digest(req, model_name_);
  std::lock_guard lock(mu_);
  auto it = responses_.find(digest);
  if (it == responses_.end() || it->second.empty()) {
    throw ScriptExhausted("no recorded response for " + std::string(to_string(req.role)) + " request " + digest);
  }
  auto text = std::move(it->second.front());
  it->second.pop_front();
  return text;
}

// ---------------------------------------------------------------------------
// ModelGateway
// ---------------------------------------------------------------------------

GatewayOptions GatewayOptions::from(const RunConfig& cfg) {
  GatewayOptions o;
  o.model_name = cfg.backend.model_name;
  o.max_retries = cfg.backend.max_retries;
  o.backoff_ms = cfg.backend.backoff_ms;
  o.temperature = cfg.backend.temperature;
  o.parallelism = cfg.parallelism;
  return o;
}

ModelGateway::ModelGateway(ModelBackend& backend, GatewayOptions opts, AuditLog* audit)
    : backend_(backend), opts_(std::move(opts)), audit_(audit), in_flight_(std::max(1, opts_.parallelism)) {
  if (opts_.max_retries < 1) throw ConfigError("max_retries must be >= 1");
}

std::string ModelGateway::call(ChatRequest req) {
  const auto digest = audit_ ? request_digest(req, opts_.model_name) : std::string();
  std::string last_error;
  for (int attempt = 0; attempt < opts_.max_retries; ++attempt) {
    if (attempt > 0 && opts_.backoff_ms > 0) {
      std::this_thread::sleep_for(std::chrono::milliseconds(static_cast<std::int64_t>(opts_.backoff_ms) << (attempt - 1)));
    }
    attempts_.fetch_add(1);
    const auto start = std::chrono::steady_clock::now();
    const auto elapsed = [&] {
      return std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start).count();
    };
    in_flight_.acquire();
    try {
      auto text = backend_.complete(req);
      in_flight_.release();
      if (audit_) audit_->record(req.role, digest, text, std::nullopt, elapsed());
      return text;
    } catch (const TransportError& e) {
      in_flight_.release();
      if (audit_) audit_->record(req.role, digest, std::nullopt, std::string(e.what()), elapsed());
      if (!e.retriable()) throw;
      last_error = e.what();
    } catch (const std::exception& e) {
      in_flight_.release();
      if (audit_) audit_->record(req.role, digest, std::nullopt, std::string(e.what()), elapsed());
      throw;
    }
  }
  throw TransportError(std::string(to_string(req.role)) + " call failed after " + std::to_string(opts_.max_retries) +
                           " attempts: " + last_error,
                       false);
}

namespace {

bool blank(const std::string& s) { return s.find_first_not_of(" \t\r\n") == std::string::npos; }

}  // namespace

std::string ModelGateway::generate_caption(const VideoRef& video, TaskDimension dim, const Prompt& prompt) {
  ChatRequest req{Role::kCaptioner, video, dim, prompt.text, true, opts_.temperature.captioner};
  auto text = call(std::move(req));
  if (blank(text)) throw MalformedReply("empty caption for " + video.id);
  return text;
}

ScorerResult ModelGateway::score_caption(const VideoRef& video, TaskDimension dim, const std::string& caption,
                                         const PrincipleSet& principles, const std::string& scorer_instruction) {
  if (caption.empty()) throw PreconditionError("score_caption requires a non-empty caption");
  const auto text = render_template(scorer_instruction, {{"principles", principles.for_dimension(dim)},
                                                         {"caption", caption},
                                                         {"dimension", std::string(to_string(dim))}});
  ChatRequest req{Role::kScorer, video, dim, text, true, opts_.temperature.scorer};
  return parse_scorer_reply(call(std::move(req)));
}

std::pair<Prompt, ChainOfThought> ModelGateway::refine_prompt(const VideoRef& video, TaskDimension dim,
                                                              const RefineInput& current,
                                                              const std::string& refine_instruction,
                                                              const std::string* principles) {
  auto text = render_template(refine_instruction, {{"caption", current.caption},
                                                   {"score", std::to_string(current.score.value())},
                                                   {"suggestion", current.suggestion},
                                                   {"prompt", current.prompt.text},
                                                   {"dimension", std::string(to_string(dim))}});
  if (principles) text += "\n\nPrinciples:\n" + *principles;
  ChatRequest req{Role::kRefiner, video, dim, std::move(text), false, opts_.temperature.refiner};
  const auto r = parse_rewrite_reply(call(std::move(req)));
  return {Prompt{r.prompt, PromptOrigin::kRefined}, ChainOfThought{r.cot, CotSource::kRefiner}};
}

std::pair<Prompt, ChainOfThought> ModelGateway::reflect_prompt(const VideoRef& video, TaskDimension dim,
                                                               const RefineInput& current,
                                                               const PreviousRound& previous,
                                                               const std::string& reflect_instruction) {
  if (!previous.cot) throw PreconditionError("reflect_prompt requires the previous round's chain-of-thought");
  auto text = render_template(reflect_instruction, {{"prompt", current.prompt.text},
                                                    {"caption", current.caption},
                                                    {"score", std::to_string(current.score.value())},
                                                    {"suggestion", current.suggestion},
                                                    {"prev_prompt", previous.prompt.text},
                                                    {"prev_caption", previous.caption},
                                                    {"prev_cot", previous.cot->text},
                                                    {"dimension", std::string(to_string(dim))}});
  ChatRequest req{Role::kReflector, video, dim, std::move(text), false, opts_.temperature.reflector};
  const auto r = parse_rewrite_reply(call(std::move(req)));
  return {Prompt{r.prompt, PromptOrigin::kReflected}, ChainOfThought{r.cot, CotSource::kReflector}};
}

}  // namespace capforge
