#include "capforge/cli/ledger.hpp"

#include <fstream>

#include "capforge/dataset/forge.hpp"

namespace capforge {

namespace {

std::optional<std::string> predecessor(const std::string& stage) {
  if (stage == "generate") return std::nullopt;
  if (stage == "build") return "generate";
  if (stage == "train" || stage == "export") return "build";
  throw LedgerError("unknown ledger stage '" + stage + "'");
}

}  // namespace

RunLedger::RunLedger(std::string run_id, std::string config_digest)
    : run_id_(std::move(run_id)), config_digest_(std::move(config_digest)) {}

void RunLedger::record(const std::string& stage, const std::string& input_sha256, const std::string& output_sha256,
                       json details) {
  if (const auto prev = predecessor(stage)) {
    if (!has(*prev)) throw LedgerError("stage '" + stage + "' requires '" + *prev + "' to complete first");
    const auto expected = stages_[*prev].value("output_sha256", "");
    if (expected != input_sha256) {
      throw LedgerError("stage '" + stage + "' input digest " + input_sha256.substr(0, 12) +
                        " does not match the output of '" + *prev + "' (" + expected.substr(0, 12) + ")");
    }
  } else if (has(stage) && stages_[stage].value("output_sha256", "") != output_sha256) {
    stages_ = json::object();
  }
  details["input_sha256"] = input_sha256;
  details["output_sha256"] = output_sha256;
  stages_[stage] = std::move(details);
}

json RunLedger::to_json() const {
  return json{{"run_id", run_id_}, {"config_digest", config_digest_}, {"stages", stages_}};
}

RunLedger RunLedger::from_json(const json& j) {
  RunLedger l(j.at("run_id").get<std::string>(), j.at("config_digest").get<std::string>());
  l.stages_ = j.value("stages", json::object());
  return l;
}

std::optional<RunLedger> RunLedger::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) return std::nullopt;
  std::ifstream in(path);
  const auto j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw LedgerError("ledger " + path.string() + " is not valid JSON");
  try {
    return from_json(j);
  } catch (const json::exception& e) {
    throw LedgerError("ledger " + path.string() + " is malformed: " + e.what());
  }
}

void RunLedger::save(const std::filesystem::path& path) const { write_file_atomic(path, to_json().dump(2) + "\n"); }

}  // namespace capforge
