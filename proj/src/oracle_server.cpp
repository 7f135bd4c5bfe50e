#include "patchstart/oracle_server.hpp"

#include <httplib.h>

#include <json.hpp>

#include "patchstart/errors.hpp"
#include "patchstart/png_codec.hpp"

namespace patchstart {

using json = nlohmann::json;

OracleServer::OracleServer(std::shared_ptr<const OracleBackend> backend)
    : backend_(std::move(backend)), server_(std::make_unique<httplib::Server>()) {
  server_->Get("/info", [this](const httplib::Request&, httplib::Response& res) {
    const Shape& s = backend_->input_shape();
    json body = {{"num_classes", backend_->num_classes()},
                 {"input_shape", {s.height, s.width, s.channels}}};
    res.set_content(body.dump(), "application/json");
  });

  server_->Post("/classify", [this](const httplib::Request& req, httplib::Response& res) {
    auto fail = [&res](int status, const std::string& msg) {
      res.status = status;
      res.set_content(json{{"error", msg}}.dump(), "application/json");
    };
    Image img;
    try {
      const auto* p = reinterpret_cast<const std::uint8_t*>(req.body.data());
      img = decode_png(std::span<const std::uint8_t>(p, req.body.size()));
    } catch (const Error& e) {
      fail(400, e.what());
      return;
    }
    if (img.shape() != backend_->input_shape()) {
      fail(400, "image shape " + img.shape().str() + " does not match " +
                    backend_->input_shape().str());
      return;
    }
    try {
      res.set_content(json{{"label", backend_->classify(img)}}.dump(), "application/json");
    } catch (const std::exception& e) {
      fail(500, e.what());
    }
  });
}

OracleServer::~OracleServer() { stop(); }

int OracleServer::bind(const std::string& host, int port) {
  const int bound = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  return bound;
}

void OracleServer::listen() { server_->listen_after_bind(); }

void OracleServer::stop() {
  if (server_) server_->stop();
}

}  // namespace patchstart
