#include "external.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <spawn.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <memory>
#include <mutex>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "error.hpp"

extern char** environ;

namespace harmonica {

using json = nlohmann::json;

namespace protocol {

std::string hello_request() { return R"({"op":"hello"})"; }

std::string eval_request(std::span<const Vector> inputs) {
  json j;
  j["op"] = "eval";
  j["inputs"] = json::array();
  for (const Vector& x : inputs) j["inputs"].push_back(x);
  return j.dump();
}

std::string hello_reply(const Hello& hello) {
  return json{{"input_dim", hello.input_dim}, {"output_dim", hello.output_dim}}.dump();
}

std::string eval_reply(std::span<const Vector> outputs) {
  json j;
  j["outputs"] = json::array();
  for (const Vector& y : outputs) j["outputs"].push_back(y);
  return j.dump();
}

namespace {

json parse_line(std::string_view line, const char* what) {
  try {
    return json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Backend, std::string("malformed ") + what + ": " + e.what());
  }
}

Vector to_vector(const json& row, const char* what, std::size_t index) {
  if (!row.is_array())
    fail(ErrorCode::Backend, std::string(what) + "[" + std::to_string(index) + "] is not an array");
  Vector v;
  v.reserve(row.size());
  for (const json& x : row) {
    if (!x.is_number())
      fail(ErrorCode::Backend, std::string(what) + "[" + std::to_string(index) + "] holds a non-number");
    v.push_back(x.get<double>());
  }
  return v;
}

}  // namespace

Hello parse_hello_reply(std::string_view line) {
  json j = parse_line(line, "hello reply");
  if (!j.is_object() || !j.contains("input_dim") || !j.contains("output_dim") ||
      !j["input_dim"].is_number_unsigned() || !j["output_dim"].is_number_unsigned())
    fail(ErrorCode::Backend, "hello reply lacks integer input_dim/output_dim: " + std::string(line));
  Hello h{j["input_dim"].get<std::size_t>(), j["output_dim"].get<std::size_t>()};
  if (h.input_dim == 0 || h.output_dim == 0)
    fail(ErrorCode::Backend, "hello reply declares a zero dimension");
  return h;
}

std::vector<Vector> parse_eval_reply(std::string_view line, std::size_t expected_count) {
  json j = parse_line(line, "eval reply");
  if (!j.is_object()) fail(ErrorCode::Backend, "eval reply is not a JSON object");
  if (j.contains("error"))
    fail(ErrorCode::Backend, "model reported error: " + j["error"].dump());
  if (!j.contains("outputs") || !j["outputs"].is_array())
    fail(ErrorCode::Backend, "eval reply lacks an \"outputs\" array");
  const json& rows = j["outputs"];
  if (rows.size() != expected_count)
    fail(ErrorCode::Backend, "eval reply has " + std::to_string(rows.size()) + " outputs for " +
                                 std::to_string(expected_count) + " inputs");
  std::vector<Vector> out;
  out.reserve(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) out.push_back(to_vector(rows[i], "outputs", i));
  return out;
}

Request parse_request(std::string_view line) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    fail(ErrorCode::Parse, std::string("malformed request: ") + e.what());
  }
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
    fail(ErrorCode::Parse, "request lacks an \"op\" string");
  const std::string op = j["op"];
  if (op == "hello") return {Op::Hello, {}};
  if (op != "eval") fail(ErrorCode::Parse, "unknown op '" + op + "'");
  if (!j.contains("inputs") || !j["inputs"].is_array())
    fail(ErrorCode::Parse, "eval request lacks an \"inputs\" array");
  Request r{Op::Eval, {}};
  try {
    for (std::size_t i = 0; i < j["inputs"].size(); ++i) r.inputs.push_back(to_vector(j["inputs"][i], "inputs", i));
  } catch (const Error& e) {
    fail(ErrorCode::Parse, e.what());
  }
  return r;
}

}  // namespace protocol

namespace {

using Clock = std::chrono::steady_clock;

class Channel {
 public:
  virtual ~Channel() = default;
  virtual std::string exchange(protocol::Op op, const std::string& body) = 0;
};

class SubprocessChannel final : public Channel {
 public:
  SubprocessChannel(const std::string& command, double timeout_seconds)
      : command_(command), timeout_(timeout_seconds) {
    int in_pipe[2];
    int out_pipe[2];
    if (::pipe2(in_pipe, O_CLOEXEC) != 0 || ::pipe2(out_pipe, O_CLOEXEC) != 0)
      fail(ErrorCode::Backend, std::string("pipe: ") + std::strerror(errno));
    posix_spawn_file_actions_t actions;
    posix_spawn_file_actions_init(&actions);
    posix_spawn_file_actions_adddup2(&actions, in_pipe[0], STDIN_FILENO);
    posix_spawn_file_actions_adddup2(&actions, out_pipe[1], STDOUT_FILENO);
    std::string sh = "/bin/sh";
    std::string dash_c = "-c";
    std::string cmd = command;
    char* argv[] = {sh.data(), dash_c.data(), cmd.data(), nullptr};
    const int rc = ::posix_spawn(&pid_, "/bin/sh", &actions, nullptr, argv, environ);
    posix_spawn_file_actions_destroy(&actions);
    ::close(in_pipe[0]);
    ::close(out_pipe[1]);
    if (rc != 0) {
      ::close(in_pipe[1]);
      ::close(out_pipe[0]);
      fail(ErrorCode::Backend, "cannot spawn '" + command + "': " + std::strerror(rc));
    }
    to_child_ = in_pipe[1];
    from_child_ = out_pipe[0];
  }

  ~SubprocessChannel() override { shutdown(); }

  std::string exchange(protocol::Op, const std::string& body) override {
    if (to_child_ < 0) fail(ErrorCode::Backend, "subprocess '" + command_ + "' is no longer running");
    const auto deadline = Clock::now() + std::chrono::duration_cast<Clock::duration>(
                                             std::chrono::duration<double>(timeout_));
    write_all(body + "\n");
    return read_line(deadline);
  }

 private:
  void write_all(const std::string& data) {
    std::size_t off = 0;
    while (off < data.size()) {
      ssize_t w = ::write(to_child_, data.data() + off, data.size() - off);
      if (w < 0) {
        if (errno == EINTR) continue;
        const std::string reason = std::strerror(errno);
        fail(ErrorCode::Backend, "write to '" + command_ + "' failed: " + reason + exit_note());
      }
      off += static_cast<std::size_t>(w);
    }
  }

  std::string read_line(Clock::time_point deadline) {
    for (;;) {
      if (auto nl = buffer_.find('\n'); nl != std::string::npos) {
        std::string line = buffer_.substr(0, nl);
        buffer_.erase(0, nl + 1);
        return line;
      }
      const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(deadline - Clock::now());
      if (left.count() <= 0) {
        shutdown();
        fail(ErrorCode::Timeout, "timed out after " + std::to_string(timeout_) + " s waiting for '" + command_ + "'");
      }
      pollfd pfd{from_child_, POLLIN, 0};
      const int pr = ::poll(&pfd, 1, static_cast<int>(std::min<long long>(left.count(), 1 << 30)));
      if (pr < 0 && errno == EINTR) continue;
      if (pr <= 0) continue;
      char chunk[65536];
      ssize_t r = ::read(from_child_, chunk, sizeof chunk);
      if (r < 0 && errno == EINTR) continue;
      if (r <= 0) {
        shutdown();
        fail(ErrorCode::Backend, "subprocess '" + command_ + "' closed its output" + exit_note());
      }
      buffer_.append(chunk, static_cast<std::size_t>(r));
    }
  }

  std::string exit_note() const {
    if (exit_status_ < 0) return "";
    if (WIFEXITED(exit_status_)) return " (exit status " + std::to_string(WEXITSTATUS(exit_status_)) + ")";
    if (WIFSIGNALED(exit_status_)) return " (killed by signal " + std::to_string(WTERMSIG(exit_status_)) + ")";
    return "";
  }

  void shutdown() {
    if (to_child_ >= 0) ::close(to_child_);
    if (from_child_ >= 0) ::close(from_child_);
    to_child_ = from_child_ = -1;
    if (pid_ <= 0) return;
    int status = 0;
    for (int i = 0; i < 100; ++i) {
      if (::waitpid(pid_, &status, WNOHANG) == pid_) {
        exit_status_ = status;
        pid_ = -1;
        return;
      }
      std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }
    ::kill(pid_, SIGKILL);
    if (::waitpid(pid_, &status, 0) == pid_) exit_status_ = status;
    pid_ = -1;
  }

  std::string command_;
  double timeout_;
  pid_t pid_ = -1;
  int to_child_ = -1;
  int from_child_ = -1;
  int exit_status_ = -1;
  std::string buffer_;
};

class HttpChannel final : public Channel {
 public:
  HttpChannel(const std::string& url, double timeout_seconds) {
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string::npos || url.substr(0, scheme_end) != "http")
      fail(ErrorCode::InvalidArgument, "expected an http:// URL, got '" + url + "'");
    const auto path_start = url.find('/', scheme_end + 3);
    const std::string base = url.substr(0, path_start);
    prefix_ = path_start == std::string::npos ? "" : url.substr(path_start);
    while (!prefix_.empty() && prefix_.back() == '/') prefix_.pop_back();
    client_ = std::make_unique<httplib::Client>(base);
    const auto secs = static_cast<time_t>(timeout_seconds);
    const auto usecs = static_cast<time_t>((timeout_seconds - static_cast<double>(secs)) * 1e6);
    client_->set_connection_timeout(secs, usecs);
    client_->set_read_timeout(secs, usecs);
    client_->set_write_timeout(secs, usecs);
    client_->set_keep_alive(true);
    url_ = url;
  }

  std::string exchange(protocol::Op op, const std::string& body) override {
    httplib::Result res = op == protocol::Op::Hello
                              ? client_->Get(prefix_ + "/hello")
                              : client_->Post(prefix_ + "/eval", body, "application/json");
    if (!res) {
      const auto err = res.error();
      const ErrorCode code = (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout)
                                 ? ErrorCode::Timeout
                                 : ErrorCode::Backend;
      fail(code, "HTTP request to " + url_ + " failed: " + httplib::to_string(err));
    }
    if (res->status != 200)
      fail(ErrorCode::Backend, "HTTP " + std::to_string(res->status) + " from " + url_ + ": " + res->body);
    std::string line = res->body;
    while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
    return line;
  }

 private:
  std::unique_ptr<httplib::Client> client_;
  std::string prefix_;
  std::string url_;
};

class ExternalModel final : public Model {
 public:
  ExternalModel(Backend backend, std::vector<std::unique_ptr<Channel>> channels,
                protocol::Hello dims)
      : backend_(backend), channels_(std::move(channels)), dims_(dims) {
    for (std::size_t i = 0; i < channels_.size(); ++i) idle_.push_back(i);
  }

  std::size_t input_dim() const override { return dims_.input_dim; }
  std::size_t output_dim() const override { return dims_.output_dim; }
  Backend backend() const override { return backend_; }
  std::size_t concurrency() const override { return channels_.size(); }

 protected:
  Vector do_eval(std::span<const double> x) const override {
    Vector v(x.begin(), x.end());
    return std::move(do_eval_batch(std::span<const Vector>(&v, 1)).front());
  }

  std::vector<Vector> do_eval_batch(std::span<const Vector> xs) const override {
    if (xs.empty()) return {};
    Lease lease(*this);
    const std::string reply = channels_[lease.index]->exchange(protocol::Op::Eval, protocol::eval_request(xs));
    return protocol::parse_eval_reply(reply, xs.size());
  }

 private:
  struct Lease {
    explicit Lease(const ExternalModel& m) : model(m) {
      std::unique_lock lock(model.mutex_);
      model.cv_.wait(lock, [&] { return !model.idle_.empty(); });
      index = model.idle_.back();
      model.idle_.pop_back();
    }
    ~Lease() {
      {
        std::lock_guard lock(model.mutex_);
        model.idle_.push_back(index);
      }
      model.cv_.notify_one();
    }
    const ExternalModel& model;
    std::size_t index = 0;
  };

  Backend backend_;
  std::vector<std::unique_ptr<Channel>> channels_;
  protocol::Hello dims_;
  mutable std::mutex mutex_;
  mutable std::condition_variable cv_;
  mutable std::vector<std::size_t> idle_;
};

protocol::Hello handshake(Channel& channel, const ExternalOptions& options, const std::string& where) {
  protocol::Hello h = protocol::parse_hello_reply(channel.exchange(protocol::Op::Hello, protocol::hello_request()));
  if (options.input_dim != 0 && h.input_dim != options.input_dim)
    fail(ErrorCode::InvalidDimension, where + " declares input_dim " + std::to_string(h.input_dim) +
                                          ", expected " + std::to_string(options.input_dim));
  if (options.output_dim != 0 && h.output_dim != options.output_dim)
    fail(ErrorCode::InvalidDimension, where + " declares output_dim " + std::to_string(h.output_dim) +
                                          ", expected " + std::to_string(options.output_dim));
  return h;
}

void probe_determinism(Channel& channel, const protocol::Hello& h, const std::string& where) {
  const Vector probe(h.input_dim, 0.5);
  const std::vector<Vector> pair{probe, probe};
  auto first = protocol::parse_eval_reply(channel.exchange(protocol::Op::Eval, protocol::eval_request(pair)), 2);
  auto second = protocol::parse_eval_reply(
      channel.exchange(protocol::Op::Eval, protocol::eval_request(std::span<const Vector>(&probe, 1))), 1);
  if (first[0] != first[1] || first[0] != second[0])
    fail(ErrorCode::NonDeterministic, where + " returned different outputs for identical inputs");
}

template <class MakeChannel>
ModelHandle connect(Backend backend, const std::string& where, const ExternalOptions& options,
                    MakeChannel make) {
  if (options.pool_size == 0) fail(ErrorCode::InvalidArgument, "connection pool size must be >= 1");
  if (!(options.timeout_seconds > 0.0)) fail(ErrorCode::InvalidArgument, "timeout must be positive");
  std::vector<std::unique_ptr<Channel>> channels;
  protocol::Hello dims;
  for (std::size_t i = 0; i < options.pool_size; ++i) {
    channels.push_back(make());
    protocol::Hello h = handshake(*channels.back(), options, where);
    if (i == 0) {
      dims = h;
      if (options.probe_determinism) probe_determinism(*channels.back(), h, where);
    } else if (h.input_dim != dims.input_dim || h.output_dim != dims.output_dim) {
      fail(ErrorCode::Backend, where + ": pool connections disagree on dimensions");
    }
  }
  return std::make_shared<ExternalModel>(backend, std::move(channels), dims);
}

}  // namespace

ModelHandle connect_subprocess(const std::string& command, const ExternalOptions& options) {
  static std::once_flag ignore_sigpipe;
  std::call_once(ignore_sigpipe, [] { ::signal(SIGPIPE, SIG_IGN); });
  return connect(Backend::Subprocess, "subprocess '" + command + "'", options, [&] {
    return std::make_unique<SubprocessChannel>(command, options.timeout_seconds);
  });
}

ModelHandle connect_http(const std::string& url, const ExternalOptions& options) {
  return connect(Backend::Http, "endpoint " + url, options,
                 [&] { return std::make_unique<HttpChannel>(url, options.timeout_seconds); });
}

}  // namespace harmonica
