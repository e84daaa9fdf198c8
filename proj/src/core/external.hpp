#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "model.hpp"

namespace harmonica {

struct ExternalOptions {
  std::size_t input_dim = 0;   // 0 = accept what the handshake declares
  std::size_t output_dim = 0;  // 0 = accept what the handshake declares
  std::size_t pool_size = 1;
  double timeout_seconds = 30.0;
  bool probe_determinism = true;
};

/// Spawns `command` through /bin/sh once per pool slot and speaks the
/// newline-delimited JSON protocol over its stdin/stdout.
ModelHandle connect_subprocess(const std::string& command, const ExternalOptions& options = {});

/// Talks to `url` via GET <url>/hello and POST <url>/eval (http only).
ModelHandle connect_http(const std::string& url, const ExternalOptions& options = {});

namespace protocol {

struct Hello {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
};

std::string hello_request();
std::string eval_request(std::span<const Vector> inputs);
std::string hello_reply(const Hello& hello);
std::string eval_reply(std::span<const Vector> outputs);

Hello parse_hello_reply(std::string_view line);
std::vector<Vector> parse_eval_reply(std::string_view line, std::size_t expected_count);

enum class Op { Hello, Eval };

struct Request {
  Op op;
  std::vector<Vector> inputs;  // eval only
};

/// Server side: parses one request line. Throws Error(Parse) on malformed input.
Request parse_request(std::string_view line);

}  // namespace protocol

}  // namespace harmonica
