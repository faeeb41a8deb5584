#include <csignal>
#include <pthread.h>

#include <cstdio>
#include <thread>

#include <httplib.h>

#include "mma/error.hpp"
#include "mma/service.hpp"

namespace mma {

int serve(Service& service, const std::string& listen, const std::filesystem::path& assets) {
  auto colon = listen.rfind(':');
  if (colon == std::string::npos) throw Error(ErrorCode::kInvalidValue, "listen address must be HOST:PORT");
  std::string host = listen.substr(0, colon);
  int port = 0;
  try {
    port = std::stoi(listen.substr(colon + 1));
  } catch (const std::exception&) {
    throw Error(ErrorCode::kInvalidValue, "bad port in '" + listen + "'");
  }

  httplib::Server server;
  auto handler = [&service](const httplib::Request& req, httplib::Response& res) {
    Response r = service.route({req.method, req.path, req.body});
    res.status = r.status;
    res.set_content(r.body, r.content_type);
  };
  server.Get("/api/.*", handler);
  server.Post("/api/.*", handler);
  if (!assets.empty() && !server.set_mount_point("/", assets.string()))
    throw Error(ErrorCode::kIo, "cannot serve assets from '" + assets.string() + "'");

  // stop cleanly on SIGINT/SIGTERM
  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);
  std::thread waiter([&] {
    int sig = 0;
    sigwait(&signals, &sig);
    server.stop();
  });

  std::fprintf(stderr, "mma: listening on %s:%d (data %s)\n", host.c_str(), port, service.data_dir().c_str());
  bool ok = server.listen(host, port);
  if (!ok) {
    pthread_kill(waiter.native_handle(), SIGTERM);
    waiter.join();
    throw Error(ErrorCode::kIo, "cannot listen on " + listen);
  }
  waiter.join();
  return 0;
}

}  // namespace mma
