#include "patchstart/oracle.hpp"

#include <httplib.h>

#include <json.hpp>

#include "patchstart/errors.hpp"
#include "patchstart/png_codec.hpp"

namespace patchstart {

using json = nlohmann::json;

namespace {

httplib::Client make_client(const std::string& endpoint, double timeout_seconds) {
  httplib::Client cli(endpoint);
  const auto sec = static_cast<time_t>(timeout_seconds);
  const auto usec = static_cast<time_t>((timeout_seconds - static_cast<double>(sec)) * 1e6);
  cli.set_connection_timeout(sec, usec);
  cli.set_read_timeout(sec, usec);
  cli.set_write_timeout(sec, usec);
  return cli;
}

std::string describe(const httplib::Result& res) {
  if (!res) return httplib::to_string(res.error());
  return "HTTP " + std::to_string(res->status);
}

json parse_body(const std::string& body, const std::string& what) {
  try {
    return json::parse(body);
  } catch (const json::parse_error&) {
    throw ProtocolError(what + ": response body is not JSON");
  }
}

}  // namespace

LocalBackend::LocalBackend(Model model, bool quantize_inputs)
    : model_(std::move(model)), quantize_inputs_(quantize_inputs) {}

Label LocalBackend::classify(const Image& img) const {
  if (quantize_inputs_) return model_.classify(quantize_u8(img));
  return model_.classify(img);
}

RemoteBackend::RemoteBackend(std::string endpoint, double timeout_seconds)
    : endpoint_(std::move(endpoint)), timeout_seconds_(timeout_seconds) {
  auto cli = make_client(endpoint_, timeout_seconds_);
  auto res = cli.Get("/info");
  if (!res || res->status != 200) {
    throw TransportError(endpoint_ + "/info: " + describe(res));
  }
  const json info = parse_body(res->body, endpoint_ + "/info");
  try {
    const auto& s = info.at("input_shape");
    if (!s.is_array() || s.size() != 3) throw ProtocolError("input_shape must be [H, W, C]");
    shape_ = Shape{s[0].get<std::size_t>(), s[1].get<std::size_t>(), s[2].get<std::size_t>()};
    num_classes_ = info.at("num_classes").get<std::size_t>();
  } catch (const json::exception& e) {
    throw ProtocolError(endpoint_ + "/info: malformed response (" + e.what() + ")");
  }
}

Label RemoteBackend::classify(const Image& img) const {
  const auto png = encode_png(img);
  auto cli = make_client(endpoint_, timeout_seconds_);
  auto res = cli.Post("/classify", reinterpret_cast<const char*>(png.data()), png.size(),
                      "image/png");
  if (!res || res->status != 200) {
    throw TransportError(endpoint_ + "/classify: " + describe(res));
  }
  const json body = parse_body(res->body, endpoint_ + "/classify");
  if (!body.is_object() || !body.contains("label") || !body["label"].is_number_integer()) {
    throw ProtocolError(endpoint_ + "/classify: response has no integer 'label' field");
  }
  const auto label = body["label"].get<long long>();
  if (label < 0 || static_cast<std::size_t>(label) >= num_classes_) {
    throw ProtocolError(endpoint_ + "/classify: label " + std::to_string(label) +
                        " out of range");
  }
  return static_cast<Label>(label);
}

OracleSession::OracleSession(std::shared_ptr<const OracleBackend> backend)
    : backend_(std::move(backend)) {
  if (!backend_) throw InvalidArgument("oracle session needs a backend");
}

Label OracleSession::classify(const Image& img) {
  if (img.shape() != backend_->input_shape()) {
    throw InvalidArgument("query shape " + img.shape().str() + " does not match oracle input " +
                          backend_->input_shape().str());
  }
  std::lock_guard lock(mutex_);
  const Label label = backend_->classify(img);
  ++query_count_;
  return label;
}

std::uint64_t OracleSession::query_count() const {
  std::lock_guard lock(mutex_);
  return query_count_;
}

std::shared_ptr<const OracleBackend> open_oracle(const std::string& where) {
  if (where.rfind("http://", 0) == 0 || where.rfind("https://", 0) == 0) {
    return std::make_shared<RemoteBackend>(where);
  }
  return std::make_shared<LocalBackend>(load_model(where));
}

}  // namespace patchstart
