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

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "vlmicl/prompts.hpp"

namespace vlmicl {

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model;
  double timeout_seconds = 120.0;
  int max_retries = 4;
  int initial_backoff_ms = 1000;
  double max_requests_per_minute = 20.0;
  double temperature = 0.0;
  std::string credential_env = "OPENAI_API_KEY";
  std::size_t max_payload_bytes = 20u * 1024u * 1024u;
  int max_tokens = 0;  // 0 leaves the field out of the request

  /// Throws Error(kConfig) when an invariant is violated.
  void validate() const;
  /// Never contains credential material, only the variable name.
  nlohmann::json to_json() const;
  static ProviderConfig from_json(const nlohmann::json& j);
};

struct ModelResponse {
  std::string raw_text;  // byte-exact message content
  std::string request_id;
  double latency_ms = 0.0;
  int attempts = 0;
  std::string timestamp;              // UTC, ISO-8601
  std::vector<double> backoff_ms;     // sleeps taken before each retry
};

/// Time source for retries and rate limiting. Durations are since an
/// arbitrary epoch.
class Clock {
 public:
  virtual ~Clock() = default;
  virtual std::chrono::nanoseconds now() = 0;
  virtual void sleep_until(std::chrono::nanoseconds deadline) = 0;
  void sleep_for(std::chrono::nanoseconds d) { sleep_until(now() + d); }
};

class SystemClock final : public Clock {
 public:
  std::chrono::nanoseconds now() override;
  void sleep_until(std::chrono::nanoseconds deadline) override;
};

/// Virtual time: sleeping advances the clock instantly. Thread-safe.
class ManualClock final : public Clock {
 public:
  std::chrono::nanoseconds now() override;
  void sleep_until(std::chrono::nanoseconds deadline) override;
  void advance(std::chrono::nanoseconds d);
  std::vector<std::chrono::nanoseconds> sleeps() const;

 private:
  mutable std::mutex mu_;
  std::chrono::nanoseconds now_{0};
  std::vector<std::chrono::nanoseconds> sleeps_;
};

/// Token bucket of depth one shared by all callers of a provider: the n-th
/// acquisition is granted no earlier than (n-1) * 60 / rate seconds after the
/// first.
class RateLimiter {
 public:
  RateLimiter(double requests_per_minute, std::shared_ptr<Clock> clock);
  void acquire();

 private:
  std::shared_ptr<Clock> clock_;
  std::chrono::nanoseconds interval_;
  std::mutex mu_;
  std::optional<std::chrono::nanoseconds> next_;
};

struct TransportRequest {
  std::string body;
  std::string bearer_token;  // empty for transports that need none
  std::string request_key;
};

struct TransportResult {
  int status = 0;  // 0: no response (timeout, connection failure)
  std::string body;
  std::string error;
  std::optional<double> retry_after_seconds;
};

class Transport {
 public:
  virtual ~Transport() = default;
  virtual TransportResult post(const TransportRequest& request) = 0;
};

/// HTTP(S) POST to a fixed endpoint via cpp-httplib.
class HttpTransport final : public Transport {
 public:
  HttpTransport(std::string endpoint, double timeout_seconds);
  TransportResult post(const TransportRequest& request) override;

 private:
  std::string origin_;
  std::string path_;
  double timeout_seconds_;
};

class Provider {
 public:
  virtual ~Provider() = default;
  /// Throws TransportError after exhausting retries, Error(kCredential) on
  /// missing or rejected credentials, Error(kPayload) on oversized requests.
  virtual ModelResponse send(const PromptPackage& package) = 0;
};

/// Chat-completions request body: model, temperature and a message list whose
/// content parts are typed text / image_url (base64 data URL) entries, in
/// package order. Serialization is byte-deterministic.
std::string encode_request(const PromptPackage& package, const ProviderConfig& config);

/// choices[0].message.content of a chat-completions response.
std::optional<std::string> extract_message_text(const std::string& body);

class ChatCompletionsClient final : public Provider {
 public:
  ChatCompletionsClient(ProviderConfig config, std::shared_ptr<Transport> transport,
                        std::shared_ptr<Clock> clock, bool requires_credential = true);

  ModelResponse send(const PromptPackage& package) override;
  const ProviderConfig& config() const noexcept { return config_; }

 private:
  ProviderConfig config_;
  std::shared_ptr<Transport> transport_;
  std::shared_ptr<Clock> clock_;
  bool requires_credential_;
  RateLimiter limiter_;
  std::atomic<std::uint64_t> sequence_{0};
};

/// Live provider over HTTPS with the system clock.
std::unique_ptr<Provider> make_http_provider(const ProviderConfig& config);

/// One scripted reply: message text, or an HTTP failure status (0 simulates a
/// timeout).
struct ScriptEntry {
  std::variant<std::string, int> value;

  static ScriptEntry text(std::string t) { return {std::move(t)}; }
  static ScriptEntry failure(int status) { return {status}; }
};

/// Either one ordered list consumed by arrival, or per-request lists keyed by
/// PromptPackage::request_key.
struct MockScript {
  std::vector<ScriptEntry> sequence;
  std::map<std::string, std::vector<ScriptEntry>> keyed;

  bool empty() const { return sequence.empty() && keyed.empty(); }
  /// JSON array (sequential) or object of arrays (keyed). Strings are replies,
  /// integers failure statuses.
  static MockScript from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct RecordedRequest {
  std::string request_key;
  std::string text;
  std::vector<std::string> attachment_digests;
  std::string body;
};

/// In-process endpoint that answers from a script and records every request
/// it receives (decoded text and attachment digests).
class ScriptedTransport final : public Transport {
 public:
  explicit ScriptedTransport(MockScript script);
  TransportResult post(const TransportRequest& request) override;

  std::vector<RecordedRequest> requests() const;
  std::size_t consumed() const;

 private:
  mutable std::mutex mu_;
  MockScript script_;
  std::size_t next_sequential_ = 0;
  std::map<std::string, std::size_t> next_keyed_;
  std::vector<RecordedRequest> requests_;
  std::uint64_t replies_ = 0;
};

class MockProvider final : public Provider {
 public:
  /// Throws Error(kHarness) for an empty script. Exhausting the script during
  /// send() also raises Error(kHarness).
  MockProvider(MockScript script, ProviderConfig config = mock_config(),
               std::shared_ptr<Clock> clock = std::make_shared<ManualClock>());

  ModelResponse send(const PromptPackage& package) override;
  std::vector<RecordedRequest> requests() const { return transport_->requests(); }
  const ProviderConfig& config() const noexcept { return client_.config(); }

  /// Offline defaults: no rate limit to speak of, short backoff.
  static ProviderConfig mock_config();

 private:
  std::shared_ptr<ScriptedTransport> transport_;
  ChatCompletionsClient client_;
};

std::unique_ptr<MockProvider> mock_provider(MockScript script);

}  // namespace vlmicl
