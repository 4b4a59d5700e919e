// Copyright 2026 The Annocycle Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef ANNOCYCLE_HTTP_SERVER_H_
#define ANNOCYCLE_HTTP_SERVER_H_

#include <cstddef>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include "annocycle/service.h"

namespace annocycle {

struct ListenAddress {
  std::string host = "127.0.0.1";
  int port = 8080;
};

// "host:port", ":port" or "port". Throws InputError.
ListenAddress parse_listen_address(const std::string &text);

struct ServerOptions {
  ListenAddress listen;
  std::size_t max_body_bytes = 64u << 20;  // larger bodies get 413
  // Static assets (the annotation UI) served under "/" when set.
  std::optional<std::filesystem::path> static_dir;
};

// Binds a Service to HTTP/1.1.
class HttpServer {
 public:
  HttpServer(Service &service, ServerOptions options);
  ~HttpServer();

  // Binds the socket; returns the port (useful with port 0). Throws
  // StorageError if the address is unavailable.
  int bind();
  // Serves until stop(). bind() first.
  void serve();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// DATA_DIR / LISTEN_ADDR fallbacks for the serve command.
std::string env_or(const char *name, const std::string &fallback);

}  // namespace annocycle

#endif  // ANNOCYCLE_HTTP_SERVER_H_
