// Scripted external model for protocol tests. Speaks the newline-delimited
// JSON protocol on stdio, or over HTTP with --http.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <mutex>
#include <thread>

// Core headers pull in Eigen, which must precede httplib (resolv.h defines `res`).
#include "core/error.hpp"
#include "core/external.hpp"

#include <CLI11.hpp>
#include <httplib.h>

namespace proto = harmonica::protocol;

namespace {

struct Script {
  std::size_t dim = 2;
  std::string mode = "identity";  // identity | sum | noisy | error
  long crash_after = -1;          // exit after this many eval requests
  int delay_ms = 0;
  long evals = 0;
  double noise = 0.0;
};

std::string respond(Script& s, const std::string& line, bool& crash) {
  proto::Request req = proto::parse_request(line);
  if (req.op == proto::Op::Hello) {
    const std::size_t m = s.mode == "sum" ? 1 : s.dim;
    return proto::hello_reply({s.dim, m});
  }
  if (s.crash_after >= 0 && s.evals >= s.crash_after) {
    crash = true;
    return {};
  }
  ++s.evals;
  if (s.delay_ms > 0) std::this_thread::sleep_for(std::chrono::milliseconds(s.delay_ms));
  if (s.mode == "error") return R"({"error":"scripted failure"})";
  std::vector<harmonica::Vector> outputs;
  outputs.reserve(req.inputs.size());
  for (auto& x : req.inputs) {
    if (s.mode == "sum") {
      double t = 0.0;
      for (double v : x) t += v;
      outputs.push_back({t});
    } else {
      if (s.mode == "noisy") {
        s.noise += 1e-3;
        for (double& v : x) v += s.noise;
      }
      outputs.push_back(x);
    }
  }
  return proto::eval_reply(outputs);
}

int serve_stdio(Script& s) {
  std::string line;
  while (std::getline(std::cin, line)) {
    if (line.empty()) continue;
    bool crash = false;
    std::string reply;
    try {
      reply = respond(s, line, crash);
    } catch (const harmonica::Error& e) {
      reply = std::string(R"({"error":")") + "bad request" + "\"}";
    }
    if (crash) std::_Exit(7);
    std::cout << reply << '\n' << std::flush;
  }
  return 0;
}

int serve_http(Script& s, const std::string& port_file) {
  httplib::Server server;
  std::mutex mu;
  auto handle = [&](const std::string& body, httplib::Response& res) {
    std::lock_guard lock(mu);
    bool crash = false;
    try {
      const std::string reply = respond(s, body, crash);
      if (crash) {
        res.status = 500;
        res.set_content("crashed", "text/plain");
        return;
      }
      res.set_content(reply, "application/json");
    } catch (const harmonica::Error& e) {
      res.status = 400;
      res.set_content(e.what(), "text/plain");
    }
  };
  server.Get("/hello", [&](const httplib::Request&, httplib::Response& res) { handle(proto::hello_request(), res); });
  server.Post("/eval", [&](const httplib::Request& req, httplib::Response& res) { handle(req.body, res); });
  server.Post("/shutdown", [&](const httplib::Request&, httplib::Response&) { server.stop(); });
  const int port = server.bind_to_any_port("127.0.0.1");
  if (port <= 0) return 1;
  {
    const std::string tmp = port_file + ".tmp";
    std::ofstream(tmp) << port << '\n';
    std::rename(tmp.c_str(), port_file.c_str());
  }
  server.listen_after_bind();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  Script s;
  std::string port_file;
  CLI::App app{"scripted model speaking the harmonica protocol"};
  app.add_option("--dim", s.dim, "input dimension")->check(CLI::PositiveNumber);
  app.add_option("--mode", s.mode, "identity, sum, noisy or error")
      ->check(CLI::IsMember({"identity", "sum", "noisy", "error"}));
  app.add_option("--crash-after", s.crash_after, "exit after this many eval requests");
  app.add_option("--delay-ms", s.delay_ms, "sleep before each eval reply");
  app.add_option("--http", port_file, "serve HTTP on a free port and write the port to this file");
  CLI11_PARSE(app, argc, argv);
  return port_file.empty() ? serve_stdio(s) : serve_http(s, port_file);
}
