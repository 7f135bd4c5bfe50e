#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>

#include "patchstart/image.hpp"
#include "patchstart/models.hpp"

namespace patchstart {

// Label-only black box. Implementations must be deterministic: the same image
// always yields the same label.
class OracleBackend {
 public:
  virtual ~OracleBackend() = default;
  virtual Label classify(const Image& img) const = 0;
  virtual const Shape& input_shape() const = 0;
  virtual std::size_t num_classes() const = 0;
};

// In-process classifier over a loaded model.
//
// With quantize_inputs set, images are snapped to the 8-bit grid before
// classification, which is exactly what the PNG wire format does to them; a
// local backend configured this way answers identically to a remote one.
class LocalBackend : public OracleBackend {
 public:
  explicit LocalBackend(Model model, bool quantize_inputs = false);

  Label classify(const Image& img) const override;
  const Shape& input_shape() const override { return model_.input_shape(); }
  std::size_t num_classes() const override { return model_.num_classes(); }
  const Model& model() const { return model_; }

 private:
  Model model_;
  bool quantize_inputs_;
};

// HTTP client for the serve-oracle protocol:
//   GET  /info     -> {"num_classes": int, "input_shape": [H, W, C]}
//   POST /classify (image/png body) -> {"label": int}
// Any non-200 status or connection failure raises TransportError; a 200 with
// an unusable body raises ProtocolError.
class RemoteBackend : public OracleBackend {
 public:
  explicit RemoteBackend(std::string endpoint, double timeout_seconds = 10.0);

  Label classify(const Image& img) const override;
  const Shape& input_shape() const override { return shape_; }
  std::size_t num_classes() const override { return num_classes_; }
  const std::string& endpoint() const { return endpoint_; }

 private:
  std::string endpoint_;
  double timeout_seconds_;
  Shape shape_;
  std::size_t num_classes_ = 0;
};

// A metered handle on a backend. Every successful classify adds exactly one to
// the counter; failed calls (transport errors, shape mismatches) add nothing.
// There is no response cache: repeated images are counted again.
class OracleSession {
 public:
  explicit OracleSession(std::shared_ptr<const OracleBackend> backend);

  Label classify(const Image& img);
  std::uint64_t query_count() const;
  const Shape& input_shape() const { return backend_->input_shape(); }
  std::size_t num_classes() const { return backend_->num_classes(); }
  const OracleBackend& backend() const { return *backend_; }

 private:
  std::shared_ptr<const OracleBackend> backend_;
  mutable std::mutex mutex_;
  std::uint64_t query_count_ = 0;
};

// Builds a backend from an oracle location: an http(s):// URL selects the remote
// client, anything else is read as a model file.
std::shared_ptr<const OracleBackend> open_oracle(const std::string& where);

}  // namespace patchstart
