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

#ifndef CPPHTTPLIB_OPENSSL_SUPPORT
#define CPPHTTPLIB_OPENSSL_SUPPORT
#endif
#include <httplib.h>

#include <cmath>

#include "vlmicl/error.hpp"
#include "vlmicl/provider.hpp"

namespace vlmicl {

HttpTransport::HttpTransport(std::string endpoint, double timeout_seconds)
    : timeout_seconds_(timeout_seconds) {
  const auto scheme_end = endpoint.find("://");
  if (scheme_end == std::string::npos) {
    throw Error(ErrorCategory::kConfig, "endpoint must be an absolute http(s) URL: " + endpoint);
  }
  const std::string scheme = endpoint.substr(0, scheme_end);
  if (scheme != "http" && scheme != "https") {
    throw Error(ErrorCategory::kConfig, "unsupported endpoint scheme '" + scheme + "'");
  }
  const auto path_start = endpoint.find('/', scheme_end + 3);
  origin_ = endpoint.substr(0, path_start);
  path_ = path_start == std::string::npos ? "/" : endpoint.substr(path_start);
}

TransportResult HttpTransport::post(const TransportRequest& request) {
  httplib::Client client(origin_);
  const auto secs = static_cast<time_t>(timeout_seconds_);
  const auto usecs = static_cast<time_t>((timeout_seconds_ - static_cast<double>(secs)) * 1e6);
  client.set_connection_timeout(secs, usecs);
  client.set_read_timeout(secs, usecs);
  client.set_write_timeout(secs, usecs);
  httplib::Headers headers;
  if (!request.bearer_token.empty()) {
    headers.emplace("Authorization", "Bearer " + request.bearer_token);
  }
  TransportResult result;
  auto res = client.Post(path_, headers, request.body, "application/json");
  if (!res) {
    result.status = 0;
    result.error = httplib::to_string(res.error());
    return result;
  }
  result.status = res->status;
  result.body = res->body;
  if (res->has_header("Retry-After")) {
    char* end = nullptr;
    const std::string value = res->get_header_value("Retry-After");
    const double seconds = std::strtod(value.c_str(), &end);
    if (end != value.c_str() && std::isfinite(seconds) && seconds >= 0) {
      result.retry_after_seconds = seconds;
    }
  }
  return result;
}

std::unique_ptr<Provider> make_http_provider(const ProviderConfig& config) {
  config.validate();
  if (config.model.empty()) throw Error(ErrorCategory::kConfig, "provider config needs a model");
  return std::make_unique<ChatCompletionsClient>(
      config, std::make_shared<HttpTransport>(config.endpoint, config.timeout_seconds),
      std::make_shared<SystemClock>());
}

}  // namespace vlmicl
