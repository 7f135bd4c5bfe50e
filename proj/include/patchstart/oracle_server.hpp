#pragma once

#include <memory>
#include <string>

#include "patchstart/oracle.hpp"

namespace httplib {
class Server;
}

namespace patchstart {

// Serves a backend over the classify wire protocol. The server does not meter;
// clients count their own queries.
class OracleServer {
 public:
  explicit OracleServer(std::shared_ptr<const OracleBackend> backend);
  ~OracleServer();
  OracleServer(const OracleServer&) = delete;
  OracleServer& operator=(const OracleServer&) = delete;

  // Binds the listening socket; port 0 picks a free port. Returns the bound port.
  int bind(const std::string& host, int port);
  // Blocks serving requests until stop() is called.
  void listen();
  void stop();

 private:
  std::shared_ptr<const OracleBackend> backend_;
  std::unique_ptr<httplib::Server> server_;
};

}  // namespace patchstart
