#pragma once

// Operator configuration: one flat JSON object.
//
// Sources, lowest to highest precedence: built-in defaults, the config file,
// TEXT2FLOW_<KEY> environment variables (key upper-cased), command-line flags.
// Unknown keys in the file are rejected.

#include <cctype>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "text2flow/error.hpp"
#include "text2flow/http_backend.hpp"
#include "text2flow/orchestrator.hpp"
#include "text2flow/prompts.hpp"
#include "text2flow/text.hpp"

namespace text2flow::config {

struct CliConfig {
  std::string backend = "mock";  // mock | http
  agents::HttpBackendConfig http;
  std::string mock_script;  // JSON script for the mock backend; empty = heuristics only
  RunConfig run;
  unsigned retries = 3;
  long backoff_ms = 500;
  std::size_t shots = 3;
  std::string out = "text2flow-out";
  unsigned workers = 1;  // documents in flight during batch runs

  void validate() const {
    if (backend != "mock" && backend != "http") {
      throw Error(ErrorCode::Config, "backend must be 'mock' or 'http', got '" + backend + "'");
    }
    if (http.timeout_s <= 0) throw Error(ErrorCode::Config, "timeout_s must be positive");
    if (backoff_ms < 0) throw Error(ErrorCode::Config, "backoff_ms must be non-negative");
    if (workers < 1) throw Error(ErrorCode::Config, "workers must be at least 1");
    if (out.empty()) throw Error(ErrorCode::Config, "out must not be empty");
    prompts::default_examples(shots);  // range check
    run.validate();
  }
};

enum class ValueType { String, Unsigned, Double, Bool };

inline std::string_view to_string(ValueType t) {
  switch (t) {
    case ValueType::String: return "string";
    case ValueType::Unsigned: return "unsigned integer";
    case ValueType::Double: return "number";
    case ValueType::Bool: return "boolean";
  }
  return "?";
}

struct KeyDef {
  std::string name;
  ValueType type;
  std::string help;
  std::function<void(CliConfig&, const nlohmann::json&)> set;
  std::function<nlohmann::json(const CliConfig&)> get;
};

namespace detail {

template <class T>
T narrow(const nlohmann::json& v, const std::string& key) {
  const auto x = v.get<std::uint64_t>();
  if (x > static_cast<std::uint64_t>(std::numeric_limits<T>::max())) {
    throw Error(ErrorCode::Config, "value of '" + key + "' is out of range");
  }
  return static_cast<T>(x);
}

}  // namespace detail

inline const std::vector<KeyDef>& keys() {
  using J = nlohmann::json;
  using VT = ValueType;
#define T2F_KEY(name, type, help, field, conv)                                            \
  KeyDef {                                                                                \
    name, type, help, [](CliConfig& c, const J& v) { c.field = conv; },                   \
        [](const CliConfig& c) { return J(c.field); }                                      \
  }
  static const std::vector<KeyDef> table{
      T2F_KEY("backend", VT::String, "agent backend: mock or http", backend, v.get<std::string>()),
      T2F_KEY("endpoint", VT::String, "chat-completion URL for the http backend", http.endpoint, v.get<std::string>()),
      T2F_KEY("model", VT::String, "model name sent to the http backend", http.model, v.get<std::string>()),
      T2F_KEY("api_key_env", VT::String, "name of the environment variable holding the API key", http.api_key_env,
              v.get<std::string>()),
      T2F_KEY("timeout_s", VT::Double, "per-request timeout in seconds", http.timeout_s, v.get<double>()),
      T2F_KEY("mock_script", VT::String, "scripted replies for the mock backend (JSON file)", mock_script,
              v.get<std::string>()),
      T2F_KEY("retries", VT::Unsigned, "retries after a retryable backend failure", retries,
              detail::narrow<unsigned>(v, "retries")),
      T2F_KEY("backoff_ms", VT::Unsigned, "first retry delay; doubles per retry", backoff_ms,
              detail::narrow<long>(v, "backoff_ms")),
      T2F_KEY("rounds", VT::Unsigned, "maximum rounds including the initial build", run.max_rounds,
              detail::narrow<int>(v, "rounds")),
      T2F_KEY("trials", VT::Unsigned, "simulation trials per round", run.simulation.trials,
              detail::narrow<std::size_t>(v, "trials")),
      T2F_KEY("max_steps", VT::Unsigned, "step limit of one simulated trial", run.simulation.max_steps,
              detail::narrow<std::size_t>(v, "max_steps")),
      T2F_KEY("seed", VT::Unsigned, "master seed for all randomness", run.simulation.seed, v.get<std::uint64_t>()),
      T2F_KEY("sim_workers", VT::Unsigned, "threads used by the simulator", run.simulation.workers,
              detail::narrow<unsigned>(v, "sim_workers")),
      T2F_KEY("budget", VT::Unsigned, "token budget for selected feedback per round", run.prioritizer.budget,
              detail::narrow<std::size_t>(v, "budget")),
      T2F_KEY("max_items", VT::Unsigned, "maximum feedback items selected per round", run.prioritizer.max_items,
              detail::narrow<std::size_t>(v, "max_items")),
      T2F_KEY("min_weight", VT::Double, "stop when no feedback item reaches this weight", run.min_weight,
              v.get<double>()),
      T2F_KEY("stop_when_no_feedback", VT::Bool, "stop once a round yields no feedback", run.stop_when_no_feedback,
              v.get<bool>()),
      T2F_KEY("max_critique_issues", VT::Unsigned, "structural issues shown to the critic", run.max_critique_issues,
              detail::narrow<std::size_t>(v, "max_critique_issues")),
      T2F_KEY("agent_workers", VT::Unsigned, "concurrent semantic checks per round", run.agent_workers,
              detail::narrow<unsigned>(v, "agent_workers")),
      T2F_KEY("segment_checks", VT::Bool, "also judge whole gateway segments", run.segment_checks, v.get<bool>()),
      T2F_KEY("shots", VT::Unsigned, "built-in few-shot examples in generation prompts", shots,
              detail::narrow<std::size_t>(v, "shots")),
      T2F_KEY("out", VT::String, "output directory", out, v.get<std::string>()),
      T2F_KEY("workers", VT::Unsigned, "documents processed concurrently by batch", workers,
              detail::narrow<unsigned>(v, "workers")),
  };
#undef T2F_KEY
  return table;
}

inline const KeyDef& key(std::string_view name) {
  for (const auto& k : keys()) {
    if (k.name == name) return k;
  }
  throw Error(ErrorCode::Config, "unknown config key '" + std::string(name) + "'");
}

inline std::string env_name(std::string_view key) {
  std::string out = "TEXT2FLOW_";
  for (char c : key) out += static_cast<char>(std::toupper(static_cast<unsigned char>(c)));
  return out;
}

// Typed value from a JSON file entry.
inline void set_json(CliConfig& c, const KeyDef& k, const nlohmann::json& v) {
  const bool ok = (k.type == ValueType::String && v.is_string()) ||
                  (k.type == ValueType::Unsigned && v.is_number_unsigned()) ||
                  (k.type == ValueType::Double && v.is_number()) || (k.type == ValueType::Bool && v.is_boolean());
  if (!ok) throw Error(ErrorCode::Config, "config key '" + k.name + "' expects a " + std::string(to_string(k.type)));
  k.set(c, v);
}

// Typed value from text (environment or command line).
inline void set_text(CliConfig& c, const KeyDef& k, std::string_view raw, std::string_view source) {
  const std::string s(text::trim(raw));
  auto bad = [&]() {
    return Error(ErrorCode::Config, std::string(source) + ": '" + k.name + "' expects a " +
                                        std::string(to_string(k.type)) + ", got '" + s + "'");
  };
  switch (k.type) {
    case ValueType::String: k.set(c, s); return;
    case ValueType::Unsigned: {
      if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) throw bad();
      try {
        k.set(c, static_cast<std::uint64_t>(std::stoull(s)));
      } catch (const std::out_of_range&) {
        throw bad();
      }
      return;
    }
    case ValueType::Double: {
      char* end = nullptr;
      const double d = std::strtod(s.c_str(), &end);
      if (s.empty() || end != s.c_str() + s.size()) throw bad();
      k.set(c, d);
      return;
    }
    case ValueType::Bool: {
      const std::string l = text::lower(s);
      if (l == "true" || l == "1" || l == "yes") {
        k.set(c, true);
      } else if (l == "false" || l == "0" || l == "no") {
        k.set(c, false);
      } else {
        throw bad();
      }
      return;
    }
  }
}

inline void apply_json(CliConfig& c, const nlohmann::json& j, std::string_view source = "config") {
  if (!j.is_object()) throw Error(ErrorCode::Config, std::string(source) + ": expected a JSON object");
  for (const auto& [name, v] : j.items()) {
    const KeyDef* k = nullptr;
    for (const auto& d : keys()) {
      if (d.name == name) k = &d;
    }
    if (!k) throw Error(ErrorCode::Config, std::string(source) + ": unknown config key '" + name + "'");
    set_json(c, *k, v);
  }
}

inline nlohmann::json read_json_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot read config file " + p.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, p.string() + ": " + e.what());
  }
}

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline EnvLookup process_env() {
  return [](const std::string& name) -> std::optional<std::string> {
    const char* v = std::getenv(name.c_str());
    if (!v) return std::nullopt;
    return std::string(v);
  };
}

inline void apply_env(CliConfig& c, const EnvLookup& env) {
  for (const auto& k : keys()) {
    const std::string name = env_name(k.name);
    if (auto v = env(name)) set_text(c, k, *v, name);
  }
}

// `file` may be null. `flags` maps config keys to command-line values.
inline CliConfig resolve(const nlohmann::json* file, const EnvLookup& env,
                         const std::map<std::string, std::string>& flags) {
  CliConfig c;
  if (file) apply_json(c, *file);
  apply_env(c, env);
  for (const auto& [name, v] : flags) set_text(c, key(name), v, "--" + text::replace_all(name, "_", "-"));
  c.validate();
  return c;
}

inline nlohmann::ordered_json to_json(const CliConfig& c) {
  nlohmann::ordered_json j;
  for (const auto& k : keys()) j[k.name] = k.get(c);
  return j;
}

}  // namespace text2flow::config
