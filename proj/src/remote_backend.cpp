#include "qdgen/remote_backend.hpp"

#include <httplib.h>
#include <json.hpp>

#include <cstdlib>

namespace qdgen {

using nlohmann::json;

RemoteBackend::RemoteBackend(RemoteConfig cfg) : cfg_(std::move(cfg)) {
  if (cfg_.base_url.empty()) throw std::invalid_argument("remote backend needs a base_url");
  if (!cfg_.api_key_env.empty()) {
    if (const char* key = std::getenv(cfg_.api_key_env.c_str())) api_key_ = key;
  }
}

std::string build_chat_request(const RoleConfig& role, std::string_view prompt,
                               std::uint64_t substream_seed) {
  json body = {
      {"model", role.model},
      {"messages", json::array({{{"role", "user"}, {"content", std::string(prompt)}}})},
      {"temperature", role.decode.temperature},
      {"max_tokens", role.decode.max_tokens},
      // Most endpoints take a signed 63-bit seed.
      {"seed", static_cast<std::int64_t>(substream_seed >> 1)},
  };
  if (!role.decode.stop.empty()) body["stop"] = role.decode.stop;
  return body.dump();
}

std::string parse_chat_response(std::string_view body) {
  json parsed = json::parse(body, nullptr, false);
  if (parsed.is_discarded()) throw ProtocolError("response is not JSON");
  try {
    const auto& content = parsed.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw ProtocolError("message content is not a string");
    return content.get<std::string>();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("unexpected response shape: ") + e.what());
  }
}

std::string RemoteBackend::complete(const RoleConfig& role, std::string_view prompt,
                                    std::uint64_t substream_seed) {
  httplib::Client client(cfg_.base_url);
  client.set_connection_timeout(cfg_.connect_timeout);
  client.set_read_timeout(cfg_.read_timeout);
  if (!api_key_.empty()) client.set_bearer_token_auth(api_key_);

  auto result = client.Post(cfg_.path, build_chat_request(role, prompt, substream_seed),
                            "application/json");
  if (!result) {
    throw TransportError("HTTP request failed: " + httplib::to_string(result.error()));
  }
  int status = result->status;
  if (status == 408 || status == 429 || status >= 500) {
    throw TransportError("endpoint returned status " + std::to_string(status));
  }
  if (status != 200) {
    throw ProtocolError("endpoint returned status " + std::to_string(status) + ": " +
                        result->body.substr(0, 200));
  }
  return parse_chat_response(result->body);
}

}  // namespace qdgen
