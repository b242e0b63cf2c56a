#pragma once

// Chat-completion HTTP backend.
//
// POST {base_url}{path} with
//   {"model": ..., "messages": [{"role": "user", "content": prompt}],
//    "temperature": ..., "max_tokens": ..., "stop": [...], "seed": ...}
// and reads choices[0].message.content from the response.

#include "qdgen/backend.hpp"

#include <chrono>
#include <string>

namespace qdgen {

struct RemoteConfig {
  std::string base_url;  // e.g. "https://api.example.com" or "http://127.0.0.1:8080"
  std::string path = "/v1/chat/completions";
  std::string api_key_env = "QDGEN_API_KEY";
  std::chrono::seconds connect_timeout{10};
  std::chrono::seconds read_timeout{120};
};

class RemoteBackend final : public Backend {
 public:
  explicit RemoteBackend(RemoteConfig cfg);

  // One HTTP round trip. Connection problems, 408/429 and 5xx raise
  // TransportError; any other failure raises ProtocolError.
  std::string complete(const RoleConfig& role, std::string_view prompt,
                       std::uint64_t substream_seed) override;

  std::string identity() const override { return "remote:" + cfg_.base_url; }

 private:
  RemoteConfig cfg_;
  std::string api_key_;
};

// Request body for one completion; exposed for tests.
std::string build_chat_request(const RoleConfig& role, std::string_view prompt,
                               std::uint64_t substream_seed);

// Extracts the completion text; throws ProtocolError on a malformed body.
std::string parse_chat_response(std::string_view body);

}  // namespace qdgen
