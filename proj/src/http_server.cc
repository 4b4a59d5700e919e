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

#include "annocycle/http_server.h"

#include <cstdlib>

#include "annocycle/errors.h"
#include "httplib.h"

namespace annocycle {

ListenAddress parse_listen_address(const std::string &text) {
  ListenAddress out;
  std::string port = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    if (colon > 0) out.host = text.substr(0, colon);
    port = text.substr(colon + 1);
  }
  try {
    std::size_t used = 0;
    out.port = std::stoi(port, &used);
    if (used != port.size() || out.port < 0 || out.port > 65535) throw std::out_of_range(port);
  } catch (const std::exception &) {
    throw InputError("bad listen address '" + text + "', expected host:port");
  }
  return out;
}

std::string env_or(const char *name, const std::string &fallback) {
  const char *v = std::getenv(name);
  return v && *v ? std::string(v) : fallback;
}

struct HttpServer::Impl {
  Impl(Service &s, ServerOptions o) : service(s), options(std::move(o)) {}
  Service &service;
  ServerOptions options;
  httplib::Server server;
};

HttpServer::HttpServer(Service &service, ServerOptions options)
    : impl_(std::make_unique<Impl>(service, std::move(options))) {
  auto &srv = impl_->server;
  srv.set_payload_max_length(impl_->options.max_body_bytes);
  if (impl_->options.static_dir) {
    if (!srv.set_mount_point("/", impl_->options.static_dir->string()))
      throw InputError("static directory " + impl_->options.static_dir->string() + " not found");
  }
  srv.set_default_headers({{"Access-Control-Allow-Origin", "*"}});

  auto dispatch = [this](const httplib::Request &req, httplib::Response &res) {
    Request r;
    r.method = req.method;
    r.path = req.path;
    for (const auto &[k, v] : req.params) r.query.emplace(k, v);
    r.body = req.body;
    const Response out = impl_->service.handle(r);
    res.status = out.status;
    res.set_content(out.body.dump(), "application/json");
  };
  srv.Get(".*", dispatch);
  srv.Post(".*", dispatch);
  srv.Put(".*", dispatch);
  srv.Delete(".*", dispatch);
  srv.Options(".*", [](const httplib::Request &, httplib::Response &res) {
    res.set_header("Access-Control-Allow-Methods", "GET, POST, PUT, OPTIONS");
    res.set_header("Access-Control-Allow-Headers", "Content-Type");
    res.status = 204;
  });
  srv.set_error_handler([](const httplib::Request &, httplib::Response &res) {
    if (!res.body.empty()) return;
    const char *kind = res.status == 413 ? "payload_too_large" : "http_error";
    res.set_content(error_body(kind, httplib::status_message(res.status)).dump(),
                    "application/json");
  });
}

HttpServer::~HttpServer() { stop(); }

int HttpServer::bind() {
  auto &srv = impl_->server;
  const auto &l = impl_->options.listen;
  const int port = l.port == 0 ? srv.bind_to_any_port(l.host)
                                : (srv.bind_to_port(l.host, l.port) ? l.port : -1);
  if (port < 0) {
    throw StorageError("cannot listen on " + l.host + ":" + std::to_string(l.port));
  }
  return port;
}

void HttpServer::serve() { impl_->server.listen_after_bind(); }

void HttpServer::stop() {
  if (impl_ && impl_->server.is_running()) impl_->server.stop();
}

}  // namespace annocycle
