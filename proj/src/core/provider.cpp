// Copyright 2026 The vlmicl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
// https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "vlmicl/provider.hpp"

#include <cmath>
#include <cstdlib>
#include <ctime>
#include <thread>

#include "vlmicl/digest.hpp"
#include "vlmicl/error.hpp"

namespace vlmicl {

using namespace std::chrono;

namespace {

std::string utc_timestamp() {
  const auto now = system_clock::now();
  const std::time_t t = system_clock::to_time_t(now);
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

bool retryable(int status) { return status == 0 || status == 408 || status == 429 || status >= 500; }

std::string data_url(const ImageAttachment& a) {
  return "data:" + std::string(media_type_name(a.media_type)) + ";base64," + base64_encode(a.data);
}

}  // namespace

void ProviderConfig::validate() const {
  if (max_retries < 0) throw Error(ErrorCategory::kConfig, "max_retries must be >= 0");
  if (!(max_requests_per_minute > 0)) {
    throw Error(ErrorCategory::kConfig, "max_requests_per_minute must be > 0");
  }
  if (!(timeout_seconds > 0)) throw Error(ErrorCategory::kConfig, "timeout_seconds must be > 0");
  if (initial_backoff_ms < 0) throw Error(ErrorCategory::kConfig, "initial_backoff_ms must be >= 0");
  if (!(temperature >= 0)) throw Error(ErrorCategory::kConfig, "temperature must be >= 0");
  if (max_tokens < 0) throw Error(ErrorCategory::kConfig, "max_tokens must be >= 0");
}

nlohmann::json ProviderConfig::to_json() const {
  return {{"endpoint", endpoint},
          {"model", model},
          {"timeout_seconds", timeout_seconds},
          {"max_retries", max_retries},
          {"initial_backoff_ms", initial_backoff_ms},
          {"max_requests_per_minute", max_requests_per_minute},
          {"temperature", temperature},
          {"credential_env", credential_env},
          {"max_payload_bytes", max_payload_bytes},
          {"max_tokens", max_tokens}};
}

ProviderConfig ProviderConfig::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw Error(ErrorCategory::kConfig, "provider config must be a JSON object");
  ProviderConfig c;
  try {
    c.endpoint = j.value("endpoint", c.endpoint);
    c.model = j.value("model", c.model);
    c.timeout_seconds = j.value("timeout_seconds", c.timeout_seconds);
    c.max_retries = j.value("max_retries", c.max_retries);
    c.initial_backoff_ms = j.value("initial_backoff_ms", c.initial_backoff_ms);
    c.max_requests_per_minute = j.value("max_requests_per_minute", c.max_requests_per_minute);
    c.temperature = j.value("temperature", c.temperature);
    c.credential_env = j.value("credential_env", c.credential_env);
    c.max_payload_bytes = j.value("max_payload_bytes", c.max_payload_bytes);
    c.max_tokens = j.value("max_tokens", c.max_tokens);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCategory::kConfig, std::string("provider config: ") + e.what());
  }
  for (const auto& [key, value] : j.items()) {
    static const char* kKnown[] = {"endpoint",       "model",
                                   "timeout_seconds", "max_retries",
                                   "initial_backoff_ms", "max_requests_per_minute",
                                   "temperature",    "credential_env",
                                   "max_payload_bytes", "max_tokens"};
    bool known = false;
    for (const char* k : kKnown) known = known || key == k;
    if (!known) throw Error(ErrorCategory::kConfig, "unknown provider config key '" + key + "'");
  }
  c.validate();
  return c;
}

nanoseconds SystemClock::now() { return duration_cast<nanoseconds>(steady_clock::now().time_since_epoch()); }

void SystemClock::sleep_until(nanoseconds deadline) {
  std::this_thread::sleep_until(steady_clock::time_point(duration_cast<steady_clock::duration>(deadline)));
}

nanoseconds ManualClock::now() {
  std::lock_guard lock(mu_);
  return now_;
}

void ManualClock::sleep_until(nanoseconds deadline) {
  std::lock_guard lock(mu_);
  sleeps_.push_back(deadline > now_ ? deadline - now_ : nanoseconds(0));
  if (deadline > now_) now_ = deadline;
}

void ManualClock::advance(nanoseconds d) {
  std::lock_guard lock(mu_);
  now_ += d;
}

std::vector<nanoseconds> ManualClock::sleeps() const {
  std::lock_guard lock(mu_);
  return sleeps_;
}

RateLimiter::RateLimiter(double requests_per_minute, std::shared_ptr<Clock> clock)
    : clock_(std::move(clock)),
      interval_(duration_cast<nanoseconds>(duration<double>(60.0 / requests_per_minute))) {
  if (!(requests_per_minute > 0)) throw Error(ErrorCategory::kConfig, "rate limit must be > 0");
}

void RateLimiter::acquire() {
  nanoseconds slot;
  {
    std::lock_guard lock(mu_);
    const nanoseconds now = clock_->now();
    slot = next_ ? std::max(now, *next_) : now;
    next_ = slot + interval_;
  }
  clock_->sleep_until(slot);
}

std::string encode_request(const PromptPackage& package, const ProviderConfig& config) {
  nlohmann::json messages = nlohmann::json::array();
  for (const auto& message : package.messages) {
    nlohmann::json content = nlohmann::json::array();
    for (const auto& part : message.parts) {
      if (const auto* t = std::get_if<TextPart>(&part)) {
        content.push_back({{"type", "text"}, {"text", t->text}});
      } else {
        const auto& a = std::get<ImageAttachment>(part);
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", data_url(a)}}}});
      }
    }
    messages.push_back({{"role", message.role}, {"content", std::move(content)}});
  }
  nlohmann::json body = {{"model", config.model},
                         {"temperature", config.temperature},
                         {"messages", std::move(messages)}};
  if (config.max_tokens > 0) body["max_tokens"] = config.max_tokens;
  return body.dump();
}

std::optional<std::string> extract_message_text(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_discarded() || !j.is_object()) return std::nullopt;
  const auto choices = j.find("choices");
  if (choices == j.end() || !choices->is_array() || choices->empty()) return std::nullopt;
  const auto& first = (*choices)[0];
  if (!first.contains("message") || !first["message"].contains("content")) return std::nullopt;
  const auto& content = first["message"]["content"];
  if (content.is_string()) return content.get<std::string>();
  if (content.is_array()) {
    std::string out;
    for (const auto& part : content) {
      if (part.value("type", "") == "text") out += part.value("text", "");
    }
    return out;
  }
  return std::nullopt;
}

ChatCompletionsClient::ChatCompletionsClient(ProviderConfig config,
                                             std::shared_ptr<Transport> transport,
                                             std::shared_ptr<Clock> clock,
                                             bool requires_credential)
    : config_(std::move(config)),
      transport_(std::move(transport)),
      clock_(std::move(clock)),
      requires_credential_(requires_credential),
      limiter_((config_.validate(), config_.max_requests_per_minute), clock_) {}

ModelResponse ChatCompletionsClient::send(const PromptPackage& package) {
  TransportRequest request;
  if (requires_credential_) {
    const char* value = std::getenv(config_.credential_env.c_str());
    if (value == nullptr || *value == '\0') {
      throw Error(ErrorCategory::kCredential,
                  "credential variable " + config_.credential_env + " is unset or empty");
    }
    request.bearer_token = value;
  }
  request.body = encode_request(package, config_);
  request.request_key = package.request_key;
  if (request.body.size() > config_.max_payload_bytes) {
    throw Error(ErrorCategory::kPayload, "request body of " + std::to_string(request.body.size()) +
                                             " bytes exceeds limit of " +
                                             std::to_string(config_.max_payload_bytes));
  }

  ModelResponse response;
  const int max_attempts = config_.max_retries + 1;
  TransportResult last;
  for (int attempt = 1; attempt <= max_attempts; ++attempt) {
    limiter_.acquire();
    const nanoseconds start = clock_->now();
    last = transport_->post(request);
    response.latency_ms = duration<double, std::milli>(clock_->now() - start).count();
    response.attempts = attempt;
    if (last.status >= 200 && last.status < 300) {
      auto text = extract_message_text(last.body);
      if (!text) {
        throw TransportError(last.status, attempt, "response has no message content");
      }
      response.raw_text = std::move(*text);
      const auto j = nlohmann::json::parse(last.body, nullptr, false);
      response.request_id = j.is_object() && j.contains("id") && j["id"].is_string()
                                ? j["id"].get<std::string>()
                                : "req-" + std::to_string(++sequence_);
      response.timestamp = utc_timestamp();
      return response;
    }
    if (last.status == 401 || last.status == 403) {
      throw Error(ErrorCategory::kCredential,
                  "endpoint rejected credentials (HTTP " + std::to_string(last.status) + ")");
    }
    if (last.status == 413) {
      throw Error(ErrorCategory::kPayload, "endpoint rejected payload of " +
                                               std::to_string(request.body.size()) + " bytes");
    }
    if (!retryable(last.status) || attempt == max_attempts) break;
    double delay_ms = config_.initial_backoff_ms * std::ldexp(1.0, attempt - 1);
    if (last.retry_after_seconds) delay_ms = std::max(delay_ms, *last.retry_after_seconds * 1000.0);
    response.backoff_ms.push_back(delay_ms);
    clock_->sleep_for(duration_cast<nanoseconds>(duration<double, std::milli>(delay_ms)));
  }
  std::string message = "request failed after " + std::to_string(response.attempts) +
                        " attempt(s), last status " + std::to_string(last.status);
  if (!last.error.empty()) message += ": " + last.error;
  throw TransportError(last.status, response.attempts, message);
}

MockScript MockScript::from_json(const nlohmann::json& j) {
  auto entries = [](const nlohmann::json& list) {
    if (!list.is_array()) throw Error(ErrorCategory::kConfig, "mock script entries must be arrays");
    std::vector<ScriptEntry> out;
    for (const auto& e : list) {
      if (e.is_string()) {
        out.push_back(ScriptEntry::text(e.get<std::string>()));
      } else if (e.is_number_integer()) {
        out.push_back(ScriptEntry::failure(e.get<int>()));
      } else {
        throw Error(ErrorCategory::kConfig, "mock script entry must be a string or an integer");
      }
    }
    return out;
  };
  MockScript script;
  if (j.is_array()) {
    script.sequence = entries(j);
  } else if (j.is_object()) {
    for (const auto& [key, list] : j.items()) script.keyed[key] = entries(list);
  } else {
    throw Error(ErrorCategory::kConfig, "mock script must be a JSON array or object");
  }
  return script;
}

nlohmann::json MockScript::to_json() const {
  auto entries = [](const std::vector<ScriptEntry>& list) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& e : list) {
      if (const auto* t = std::get_if<std::string>(&e.value)) {
        out.push_back(*t);
      } else {
        out.push_back(std::get<int>(e.value));
      }
    }
    return out;
  };
  if (!keyed.empty()) {
    nlohmann::json j = nlohmann::json::object();
    for (const auto& [key, list] : keyed) j[key] = entries(list);
    return j;
  }
  return entries(sequence);
}

ScriptedTransport::ScriptedTransport(MockScript script) : script_(std::move(script)) {
  if (script_.empty()) throw Error(ErrorCategory::kHarness, "mock script is empty");
}

TransportResult ScriptedTransport::post(const TransportRequest& request) {
  RecordedRequest recorded;
  recorded.request_key = request.request_key;
  recorded.body = request.body;
  const auto body = nlohmann::json::parse(request.body, nullptr, false);
  if (!body.is_discarded()) {
    for (const auto& message : body.value("messages", nlohmann::json::array())) {
      for (const auto& part : message.value("content", nlohmann::json::array())) {
        if (part.value("type", "") == "text") {
          if (!recorded.text.empty()) recorded.text += "\n";
          recorded.text += part.value("text", "");
        } else if (part.value("type", "") == "image_url") {
          const std::string url = part["image_url"].value("url", "");
          const auto comma = url.find(',');
          const auto data = comma == std::string::npos ? std::nullopt
                                                       : base64_decode(url.substr(comma + 1));
          recorded.attachment_digests.push_back(data ? content_digest(*data) : "undecodable");
        }
      }
    }
  }

  std::lock_guard lock(mu_);
  requests_.push_back(std::move(recorded));
  const ScriptEntry* entry = nullptr;
  if (!script_.keyed.empty()) {
    auto it = script_.keyed.find(request.request_key);
    std::size_t& next = next_keyed_[request.request_key];
    if (it == script_.keyed.end() || next >= it->second.size()) {
      throw Error(ErrorCategory::kHarness,
                  "mock script has no entry left for request '" + request.request_key + "'");
    }
    entry = &it->second[next++];
  } else {
    if (next_sequential_ >= script_.sequence.size()) {
      throw Error(ErrorCategory::kHarness, "mock script exhausted after " +
                                               std::to_string(script_.sequence.size()) +
                                               " entries");
    }
    entry = &script_.sequence[next_sequential_++];
  }
  TransportResult result;
  if (const auto* text = std::get_if<std::string>(&entry->value)) {
    result.status = 200;
    nlohmann::json reply = {
        {"id", "mock-" + std::to_string(++replies_)},
        {"object", "chat.completion"},
        {"choices",
         {{{"index", 0},
           {"message", {{"role", "assistant"}, {"content", *text}}},
           {"finish_reason", "stop"}}}}};
    result.body = reply.dump();
  } else {
    result.status = std::get<int>(entry->value);
    result.error = result.status == 0 ? "simulated timeout" : "scripted failure";
  }
  return result;
}

std::vector<RecordedRequest> ScriptedTransport::requests() const {
  std::lock_guard lock(mu_);
  return requests_;
}

std::size_t ScriptedTransport::consumed() const {
  std::lock_guard lock(mu_);
  std::size_t n = next_sequential_;
  for (const auto& [key, next] : next_keyed_) n += next;
  return n;
}

ProviderConfig MockProvider::mock_config() {
  ProviderConfig c;
  c.endpoint = "mock://scripted";
  c.model = "mock";
  c.max_requests_per_minute = 600.0;
  c.initial_backoff_ms = 100;
  c.max_retries = 4;
  return c;
}

MockProvider::MockProvider(MockScript script, ProviderConfig config, std::shared_ptr<Clock> clock)
    : transport_(std::make_shared<ScriptedTransport>(std::move(script))),
      client_(std::move(config), transport_, std::move(clock), /*requires_credential=*/false) {}

ModelResponse MockProvider::send(const PromptPackage& package) { return client_.send(package); }

std::unique_ptr<MockProvider> mock_provider(MockScript script) {
  return std::make_unique<MockProvider>(std::move(script));
}

}  // namespace vlmicl
