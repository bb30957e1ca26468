#pragma once

// Provider-agnostic chat completion with live, record and replay transports.
//
// Requests are a single system + user exchange. Four wire dialects are
// supported; they share one message model and differ only in envelope and
// field names:
//
//   openai             {"model", "messages":[system,user], "temperature",
//                       "max_completion_tokens"}
//   openai-compatible  same envelope, token limit in "max_tokens"
//   anthropic          {"model", "system", "messages":[user], "temperature",
//                       "max_tokens"}
//   gemini             {"systemInstruction", "contents":[user],
//                       "generationConfig":{"temperature","maxOutputTokens"}}
//
// Credentials are read from the environment at send time and never appear in
// serialized requests or transcripts.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "evsens/error.hpp"
#include "evsens/format.hpp"
#include "evsens/hash.hpp"
#include "evsens/prompt.hpp"
#include "evsens/study.hpp"

namespace evsens {

enum class Dialect { OpenAi, OpenAiCompatible, Anthropic, Gemini };

inline Dialect parse_dialect(std::string_view text) {
  if (text == "openai") return Dialect::OpenAi;
  if (text == "openai-compatible") return Dialect::OpenAiCompatible;
  if (text == "anthropic") return Dialect::Anthropic;
  if (text == "gemini") return Dialect::Gemini;
  throw Error(ErrorKind::UnsupportedProvider, "unknown provider dialect '" + std::string(text) + "'");
}

constexpr std::string_view to_string(Dialect d) noexcept {
  switch (d) {
    case Dialect::OpenAi: return "openai";
    case Dialect::OpenAiCompatible: return "openai-compatible";
    case Dialect::Anthropic: return "anthropic";
    case Dialect::Gemini: return "gemini";
  }
  return "openai";
}

struct ProviderConfig {
  std::string provider_id;
  std::string model_id;
  std::string dialect = "openai";
  /// Full request URL; "{model}" is replaced by model_id.
  std::string endpoint;
  /// Name of the environment variable holding the API key.
  std::string auth_env_var;
  double temperature = 0.0;
  int max_tokens = 2000;

  friend bool operator==(const ProviderConfig&, const ProviderConfig&) = default;
};

inline void validate_config(const ProviderConfig& c) {
  const std::string where = "provider '" + c.provider_id + "'";
  if (c.provider_id.empty()) throw Error(ErrorKind::ConfigError, "provider_id must be non-empty");
  if (c.model_id.empty()) throw Error(ErrorKind::ConfigError, where + ": model_id must be non-empty");
  if (!(std::isfinite(c.temperature) && c.temperature >= 0.0)) {
    throw Error(ErrorKind::ConfigError, where + ": temperature must be >= 0");
  }
  if (c.max_tokens < 1) throw Error(ErrorKind::ConfigError, where + ": max_tokens must be >= 1");
  (void)parse_dialect(c.dialect);
}

inline nlohmann::ordered_json to_json(const ProviderConfig& c) {
  return {{"provider_id", c.provider_id}, {"model_id", c.model_id},
          {"dialect", c.dialect},         {"endpoint", c.endpoint},
          {"auth_env_var", c.auth_env_var}, {"temperature", c.temperature},
          {"max_tokens", c.max_tokens}};
}

/// Parses {"version": "1", "providers": [...]}. Unknown fields, including
/// anything that looks like an inline secret, are rejected.
inline std::vector<ProviderConfig> parse_provider_configs(const std::string& text) {
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(ErrorKind::ConfigError, std::string("malformed provider config: ") + e.what());
  }
  try {
    detail::reject_unknown(doc, {"version", "providers"}, "provider config");
    std::vector<ProviderConfig> out;
    std::size_t index = 0;
    for (const auto& p : doc.at("providers")) {
      const std::string where = "providers[" + std::to_string(index++) + "]";
      detail::reject_unknown(p,
                             {"provider_id", "model_id", "dialect", "endpoint",
                              "auth_env_var", "temperature", "max_tokens"},
                             where);
      ProviderConfig c;
      c.provider_id = detail::require_field<std::string>(p, "provider_id", where);
      c.model_id = detail::require_field<std::string>(p, "model_id", where);
      c.dialect = p.value("dialect", std::string("openai"));
      c.endpoint = p.value("endpoint", std::string());
      c.auth_env_var = p.value("auth_env_var", std::string());
      c.temperature = p.value("temperature", 0.0);
      c.max_tokens = p.value("max_tokens", 2000);
      validate_config(c);
      out.push_back(std::move(c));
    }
    return out;
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::UnsupportedProvider) throw;
    throw Error(ErrorKind::ConfigError, e.message());
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ConfigError, std::string("provider config: ") + e.what());
  }
}

inline std::vector<ProviderConfig> load_provider_configs(const std::filesystem::path& path) {
  return parse_provider_configs(read_text_file(path));
}

/// Provider-specific JSON body. Deterministic for fixed inputs.
inline std::string adapt_request(const ProviderConfig& config, const PromptBundle& bundle) {
  using ojson = nlohmann::ordered_json;
  ojson body;
  switch (parse_dialect(config.dialect)) {
    case Dialect::OpenAi:
    case Dialect::OpenAiCompatible: {
      body["model"] = config.model_id;
      body["messages"] = ojson::array({ojson{{"role", "system"}, {"content", bundle.system}},
                                       ojson{{"role", "user"}, {"content", bundle.user}}});
      body["temperature"] = config.temperature;
      const char* limit = parse_dialect(config.dialect) == Dialect::OpenAi
                              ? "max_completion_tokens"
                              : "max_tokens";
      body[limit] = config.max_tokens;
      break;
    }
    case Dialect::Anthropic:
      body["model"] = config.model_id;
      body["system"] = bundle.system;
      body["messages"] = ojson::array({ojson{{"role", "user"}, {"content", bundle.user}}});
      body["temperature"] = config.temperature;
      body["max_tokens"] = config.max_tokens;
      break;
    case Dialect::Gemini:
      body["systemInstruction"] = {{"parts", ojson::array({ojson{{"text", bundle.system}}})}};
      body["contents"] = ojson::array(
          {ojson{{"role", "user"}, {"parts", ojson::array({ojson{{"text", bundle.user}}})}}});
      body["generationConfig"] = {{"temperature", config.temperature},
                                  {"maxOutputTokens", config.max_tokens}};
      break;
  }
  return body.dump();
}

using HttpHeaders = std::vector<std::pair<std::string, std::string>>;

inline HttpHeaders auth_headers(const ProviderConfig& config, const std::string& secret) {
  HttpHeaders h{{"Content-Type", "application/json"}};
  switch (parse_dialect(config.dialect)) {
    case Dialect::OpenAi:
    case Dialect::OpenAiCompatible:
      h.emplace_back("Authorization", "Bearer " + secret);
      break;
    case Dialect::Anthropic:
      h.emplace_back("x-api-key", secret);
      h.emplace_back("anthropic-version", "2023-06-01");
      break;
    case Dialect::Gemini:
      h.emplace_back("x-goog-api-key", secret);
      break;
  }
  return h;
}

inline std::string resolve_endpoint(const ProviderConfig& config) {
  std::string url = config.endpoint;
  const std::string token = "{model}";
  for (auto pos = url.find(token); pos != std::string::npos; pos = url.find(token, pos)) {
    url.replace(pos, token.size(), config.model_id);
    pos += config.model_id.size();
  }
  return url;
}

struct ChatResponse {
  std::string text;
  /// The provider stopped at the token limit.
  bool truncated = false;
  bool from_transcript = false;
};

/// Extracts assistant text from a successful provider payload.
inline ChatResponse extract_response(const ProviderConfig& config, const std::string& payload) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(payload);
  } catch (const nlohmann::json::parse_error&) {
    throw Error(ErrorKind::ProviderError, "provider '" + config.provider_id + "' returned non-JSON payload");
  }
  auto provider_error = [&](const std::string& msg) {
    return Error(ErrorKind::ProviderError, "provider '" + config.provider_id + "': " + msg);
  };
  if (j.contains("error") && !j["error"].is_null()) {
    const auto& e = j["error"];
    std::string msg = e.is_object() ? e.value("message", e.dump()) : e.dump();
    throw provider_error(msg);
  }
  ChatResponse r;
  try {
    switch (parse_dialect(config.dialect)) {
      case Dialect::OpenAi:
      case Dialect::OpenAiCompatible: {
        const auto& choice = j.at("choices").at(0);
        const auto& content = choice.at("message").at("content");
        r.text = content.is_string() ? content.get<std::string>() : std::string();
        r.truncated = choice.value("finish_reason", std::string()) == "length";
        break;
      }
      case Dialect::Anthropic:
        for (const auto& block : j.at("content")) {
          if (block.value("type", std::string()) == "text") r.text += block.at("text").get<std::string>();
        }
        r.truncated = j.value("stop_reason", std::string()) == "max_tokens";
        break;
      case Dialect::Gemini: {
        const auto& cand = j.at("candidates").at(0);
        for (const auto& part : cand.at("content").at("parts")) {
          if (part.contains("text")) r.text += part["text"].get<std::string>();
        }
        r.truncated = cand.value("finishReason", std::string()) == "MAX_TOKENS";
        break;
      }
    }
  } catch (const nlohmann::json::exception&) {
    throw provider_error("unexpected response shape");
  }
  return r;
}

/// Minimal HTTP seam. status == 0 means no response was received.
struct HttpResponse {
  int status = 0;
  std::string body;
  std::string error;
};

class HttpClient {
 public:
  virtual ~HttpClient() = default;
  virtual HttpResponse post(const std::string& url, const HttpHeaders& headers,
                            const std::string& body) = 0;
};

/// Immutable record of one exchange, keyed by everything that determines
/// the request.
struct Transcript {
  std::string key;
  std::string provider_id;
  std::string model_id;
  std::string case_id;
  std::string request_snapshot;
  std::string response_text;
  bool truncated = false;
  std::string captured_at;

  friend bool operator==(const Transcript&, const Transcript&) = default;
};

inline std::string transcript_key(const ProviderConfig& config, const std::string& fingerprint) {
  return FieldHasher{}
      .field(config.provider_id)
      .field(config.model_id)
      .field(fmt::shortest(config.temperature))
      .field(std::to_string(config.max_tokens))
      .field(fingerprint)
      .hex();
}

inline std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::string dump_transcript(const Transcript& t) {
  nlohmann::ordered_json j;
  j["key"] = t.key;
  j["provider_id"] = t.provider_id;
  j["model_id"] = t.model_id;
  j["case_id"] = t.case_id;
  j["captured_at"] = t.captured_at;
  j["truncated"] = t.truncated;
  j["request"] = nlohmann::ordered_json::parse(t.request_snapshot);
  j["response_text"] = t.response_text;
  return j.dump(2) + "\n";
}

inline Transcript parse_transcript(const std::string& text) {
  try {
    const auto j = nlohmann::ordered_json::parse(text);
    Transcript t;
    t.key = j.at("key").get<std::string>();
    t.provider_id = j.at("provider_id").get<std::string>();
    t.model_id = j.at("model_id").get<std::string>();
    t.case_id = j.value("case_id", "");
    t.captured_at = j.value("captured_at", "");
    t.truncated = j.value("truncated", false);
    t.request_snapshot = j.at("request").dump();
    t.response_text = j.at("response_text").get<std::string>();
    return t;
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorKind::ParseError, std::string("malformed transcript: ") + e.what());
  }
}

/// One file per transcript, <dir>/<key>.json. Writes go through a temporary
/// file and a rename so readers never see a partial transcript; writes to
/// the same key are serialized.
class TranscriptStore {
 public:
  explicit TranscriptStore(std::filesystem::path dir) : dir_(std::move(dir)) {}

  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

  [[nodiscard]] std::filesystem::path path_for(const std::string& key) const {
    return dir_ / (key + ".json");
  }

  [[nodiscard]] bool contains(const std::string& key) const {
    return std::filesystem::exists(path_for(key));
  }

  [[nodiscard]] std::optional<Transcript> load(const std::string& key) const {
    const auto path = path_for(key);
    if (!std::filesystem::exists(path)) return std::nullopt;
    auto t = parse_transcript(read_text_file(path));
    if (t.key != key) {
      throw Error(ErrorKind::ParseError, path.string() + ": key does not match file name");
    }
    return t;
  }

  /// Persists `t`. An existing transcript for the same key is never
  /// replaced: saving identical response text is a no-op, different text
  /// is an error.
  void save(const Transcript& t) {
    std::lock_guard key_lock(mutex_for(t.key));
    if (auto existing = load(t.key)) {
      if (existing->response_text == t.response_text) return;
      throw Error(ErrorKind::IoError,
                  "transcript " + t.key + " is already recorded with different text; delete it to re-record");
    }
    std::error_code ec;
    std::filesystem::create_directories(dir_, ec);
    if (ec) throw Error(ErrorKind::IoError, "cannot create " + dir_.string() + ": " + ec.message());
    const auto final_path = path_for(t.key);
    auto tmp = final_path;
    tmp += ".tmp." + std::to_string(std::hash<std::thread::id>{}(std::this_thread::get_id()));
    write_text_file(tmp, dump_transcript(t));
    std::filesystem::rename(tmp, final_path, ec);
    if (ec) {
      std::filesystem::remove(tmp);
      throw Error(ErrorKind::IoError, "cannot publish " + final_path.string() + ": " + ec.message());
    }
  }

 private:
  std::mutex& mutex_for(const std::string& key) {
    std::lock_guard lock(map_mutex_);
    return per_key_[key];
  }

  std::filesystem::path dir_;
  std::mutex map_mutex_;
  std::map<std::string, std::mutex> per_key_;
};

enum class TransportMode { Live, Recorded, Record };

inline std::optional<TransportMode> parse_transport(std::string_view text) {
  if (text == "live") return TransportMode::Live;
  if (text == "recorded") return TransportMode::Recorded;
  if (text == "record") return TransportMode::Record;
  return std::nullopt;
}

struct RetryPolicy {
  int max_retries = 2;
  std::chrono::milliseconds base_delay{500};
};

using EnvLookup = std::function<std::optional<std::string>(const std::string&)>;

inline std::optional<std::string> process_env(const std::string& name) {
  if (const char* v = std::getenv(name.c_str()); v && *v) return std::string(v);
  return std::nullopt;
}

using HttpClientFactory = std::function<std::shared_ptr<HttpClient>()>;

/// Safe for concurrent send_chat calls as long as the HttpClient is.
class Gateway {
 public:
  Gateway(std::shared_ptr<TranscriptStore> store, HttpClientFactory http_factory,
          RetryPolicy retry = {}, EnvLookup env = process_env)
      : store_(std::move(store)),
        http_factory_(std::move(http_factory)),
        retry_(retry),
        env_(std::move(env)) {}

  [[nodiscard]] TranscriptStore& store() { return *store_; }

  /// Keys of all (config, bundle) pairs that have no transcript.
  [[nodiscard]] std::vector<std::string> missing_transcripts(
      const std::vector<ProviderConfig>& configs, const std::vector<PromptBundle>& bundles) const {
    std::vector<std::string> missing;
    for (const auto& b : bundles) {
      for (const auto& c : configs) {
        const auto key = transcript_key(c, b.fingerprint);
        if (!store_->contains(key)) {
          missing.push_back(key + " (provider '" + c.provider_id + "', case '" + b.case_id + "')");
        }
      }
    }
    return missing;
  }

  ChatResponse send_chat(const ProviderConfig& config, const PromptBundle& bundle, TransportMode mode) {
    validate_config(config);
    const auto key = transcript_key(config, bundle.fingerprint);
    if (mode == TransportMode::Recorded) {
      auto t = store_->load(key);
      if (!t) {
        throw Error(ErrorKind::MissingTranscript,
                    "no transcript for provider '" + config.provider_id + "', case '" +
                        bundle.case_id + "' (key " + key + ")",
                    {key});
      }
      return {t->response_text, t->truncated, true};
    }

    const auto secret = env_(config.auth_env_var);
    if (config.auth_env_var.empty() || !secret) {
      throw Error(ErrorKind::MissingCredential,
                  "provider '" + config.provider_id + "' needs environment variable '" +
                      config.auth_env_var + "'");
    }
    const std::string request = adapt_request(config, bundle);
    ChatResponse response = post_with_retry(config, request, *secret);

    if (mode == TransportMode::Record) {
      Transcript t;
      t.key = key;
      t.provider_id = config.provider_id;
      t.model_id = config.model_id;
      t.case_id = bundle.case_id;
      t.request_snapshot = request;
      t.response_text = response.text;
      t.truncated = response.truncated;
      t.captured_at = utc_timestamp();
      store_->save(t);
    }
    return response;
  }

 private:
  ChatResponse post_with_retry(const ProviderConfig& config, const std::string& request,
                               const std::string& secret) {
    auto http = http_factory_ ? http_factory_() : nullptr;
    if (!http) throw Error(ErrorKind::TransportError, "no HTTP client available");
    const auto url = resolve_endpoint(config);
    const auto headers = auth_headers(config, secret);

    HttpResponse last;
    for (int attempt = 0;; ++attempt) {
      last = http->post(url, headers, request);
      const bool transient = last.status == 0 || last.status == 429 || last.status >= 500;
      if (!transient) break;
      if (attempt >= retry_.max_retries) {
        std::string msg = "provider '" + config.provider_id + "' request failed after " +
                          std::to_string(attempt + 1) + " attempt(s)";
        msg += last.status == 0 ? ": " + last.error : ": HTTP " + std::to_string(last.status);
        throw Error(ErrorKind::TransportError, msg).with_status(last.status);
      }
      std::this_thread::sleep_for(retry_.base_delay * (1 << attempt));
    }
    if (last.status < 200 || last.status >= 300) {
      std::string msg = "HTTP " + std::to_string(last.status);
      try {
        const auto j = nlohmann::json::parse(last.body);
        if (j.contains("error")) {
          const auto& e = j["error"];
          msg += ": " + (e.is_object() ? e.value("message", e.dump()) : e.dump());
        }
      } catch (const nlohmann::json::exception&) {
        if (!last.body.empty()) msg += ": " + last.body.substr(0, 200);
      }
      throw Error(ErrorKind::ProviderError, "provider '" + config.provider_id + "': " + msg)
          .with_status(last.status);
    }
    return extract_response(config, last.body);
  }

  std::shared_ptr<TranscriptStore> store_;
  HttpClientFactory http_factory_;
  RetryPolicy retry_;
  EnvLookup env_;
};

}  // namespace evsens
