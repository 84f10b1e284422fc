// Copyright 2026 The cfsim Authors
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

// Prediction models under audit. Two kinds: expressions over table columns
// evaluated in-process, and external commands spoken to over a pipe protocol
// (CSV with a header row on standard input, one decimal prediction per line
// on standard output). External predictors are treated as opaque: the audit
// only sees their predictions, never their structure.

#ifndef CFSIM_PREDICTOR_HPP
#define CFSIM_PREDICTOR_HPP

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <bit>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "cfsim/errors.hpp"
#include "cfsim/expr.hpp"
#include "cfsim/io.hpp"
#include "cfsim/math.hpp"
#include "cfsim/table.hpp"

namespace cfsim {

class Predictor {
 public:
  virtual ~Predictor() = default;

  /// One prediction per row. The table holds the columns the caller exposes
  /// to the model; an audit passes the observed variables only.
  virtual std::vector<double> predict(const ParticleTable& t) = 0;

  virtual std::string describe() const = 0;
};

/// A prediction rule written in the expression language, evaluated against
/// the table's columns. The error symbol is off limits: predictors see data,
/// not noise.
class ExpressionPredictor : public Predictor {
 public:
  explicit ExpressionPredictor(std::string source)
      : source_(std::move(source)), expr_(parse_expr(source_)) {
    inputs_ = free_vars(expr_);
    if (inputs_.count("u")) {
      throw PredictorError(
          "prediction expressions cannot reference the error symbol 'u'");
    }
  }

  const std::set<std::string>& inputs() const { return inputs_; }

  std::vector<double> predict(const ParticleTable& t) override {
    for (const auto& name : inputs_) {
      if (!t.has_col(name)) {
        throw PredictorError("prediction expression needs column '" + name +
                             "', which the table does not have");
      }
    }
    const CompiledExpr prog = CompiledExpr::compile(*expr_, t.column_map());
    const auto cols = t.col_ptrs();
    std::vector<double> out(t.rows());
    for (size_t r = 0; r < t.rows(); ++r) {
      out[r] = prog.eval_row(cols.data(), r);
    }
    return out;
  }

  std::string describe() const override { return "expression: " + source_; }

 private:
  std::string source_;
  ExprPtr expr_;
  std::set<std::string> inputs_;
};

struct SubprocessOptions {
  double timeout_seconds = 60.0;
  /// Evaluate the first table twice and compare bit-for-bit; a model that
  /// answers differently on identical input cannot be audited.
  bool verify_determinism = true;
};

namespace detail {

/// Closes a file descriptor when leaving scope; -1 means already closed.
struct Fd {
  int fd = -1;
  ~Fd() { reset(); }
  void reset(int next = -1) {
    if (fd >= 0) ::close(fd);
    fd = next;
  }
  int release() {
    int out = fd;
    fd = -1;
    return out;
  }
};

/// Restores the previous SIGPIPE disposition on scope exit. A predictor that
/// exits before reading all its input must surface as a protocol error, not
/// kill the audit process.
struct SigpipeGuard {
  SigpipeGuard() {
    struct sigaction ignore {};
    ignore.sa_handler = SIG_IGN;
    ::sigaction(SIGPIPE, &ignore, &saved_);
  }
  ~SigpipeGuard() { ::sigaction(SIGPIPE, &saved_, nullptr); }

 private:
  struct sigaction saved_ {};
};

inline void set_nonblocking(int fd) {
  const int flags = ::fcntl(fd, F_GETFL, 0);
  if (flags < 0 || ::fcntl(fd, F_SETFL, flags | O_NONBLOCK) < 0) {
    throw PredictorError("cannot configure predictor pipe: " +
                         std::string(std::strerror(errno)));
  }
}

inline std::vector<double> parse_prediction_lines(const std::string& text,
                                                  const std::string& command) {
  std::vector<double> out;
  size_t pos = 0;
  while (pos < text.size()) {
    size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    size_t len = end - pos;
    while (len > 0 && (text[pos + len - 1] == '\r' ||
                       text[pos + len - 1] == ' ' ||
                       text[pos + len - 1] == '\t')) {
      --len;
    }
    if (len > 0) {
      const std::string line = text.substr(pos, len);
      const char* begin = line.c_str();
      char* stop = nullptr;
      const double v = std::strtod(begin, &stop);
      if (stop == begin || *stop != '\0') {
        throw PredictorError("command '" + command +
                             "' wrote a non-numeric prediction line: '" +
                             line + "'");
      }
      out.push_back(v);
    } else if (end < text.size()) {
      // Interior blank lines are protocol violations; a trailing newline at
      // end of output is fine.
      bool more = false;
      for (size_t k = end + 1; k < text.size(); ++k) {
        if (text[k] != '\n' && text[k] != '\r') {
          more = true;
          break;
        }
      }
      if (more) {
        throw PredictorError("command '" + command +
                             "' wrote a blank prediction line");
      }
    }
    pos = end + 1;
  }
  return out;
}

}  // namespace detail

/// Runs a shell command per prediction request. The table is serialized as
/// CSV to the command's standard input; the command answers with one decimal
/// number per row. Hung or chatty commands are killed at the timeout.
class SubprocessPredictor : public Predictor {
 public:
  explicit SubprocessPredictor(std::string command,
                               SubprocessOptions opts = {})
      : command_(std::move(command)), opts_(opts) {
    if (command_.empty()) throw PredictorError("predictor command is empty");
    if (!(opts_.timeout_seconds > 0.0)) {
      throw PredictorError("predictor timeout must be positive");
    }
  }

  std::vector<double> predict(const ParticleTable& t) override {
    std::ostringstream csv;
    write_csv(csv, t);
    const std::string input = csv.str();
    std::vector<double> out = run_once(input, t.rows());
    if (opts_.verify_determinism && !determinism_checked_) {
      determinism_checked_ = true;
      const std::vector<double> again = run_once(input, t.rows());
      for (size_t i = 0; i < out.size(); ++i) {
        if (std::bit_cast<std::uint64_t>(out[i]) !=
            std::bit_cast<std::uint64_t>(again[i])) {
          throw PredictorError(
              "command '" + command_ +
              "' is not deterministic: identical input produced different "
              "predictions (row " +
              std::to_string(i + 1) + ")");
        }
      }
    }
    return out;
  }

  std::string describe() const override { return "command: " + command_; }

 private:
  std::vector<double> run_once(const std::string& input, size_t rows) {
    detail::SigpipeGuard sigpipe;
    int to_child[2];
    int from_child[2];
    if (::pipe(to_child) != 0) {
      throw PredictorError("pipe failed: " +
                           std::string(std::strerror(errno)));
    }
    detail::Fd child_stdin_read{to_child[0]};
    detail::Fd write_end{to_child[1]};
    if (::pipe(from_child) != 0) {
      throw PredictorError("pipe failed: " +
                           std::string(std::strerror(errno)));
    }
    detail::Fd read_end{from_child[0]};
    detail::Fd child_stdout_write{from_child[1]};

    const pid_t pid = ::fork();
    if (pid < 0) {
      throw PredictorError("fork failed: " +
                           std::string(std::strerror(errno)));
    }
    if (pid == 0) {
      ::dup2(child_stdin_read.fd, STDIN_FILENO);
      ::dup2(child_stdout_write.fd, STDOUT_FILENO);
      ::close(to_child[0]);
      ::close(to_child[1]);
      ::close(from_child[0]);
      ::close(from_child[1]);
      ::execl("/bin/sh", "sh", "-c", command_.c_str(),
              static_cast<char*>(nullptr));
      ::_exit(127);
    }

    child_stdin_read.reset();
    child_stdout_write.reset();
    detail::set_nonblocking(write_end.fd);
    detail::set_nonblocking(read_end.fd);

    const auto deadline = std::chrono::steady_clock::now() +
                          std::chrono::duration<double>(opts_.timeout_seconds);
    std::string output;
    size_t written = 0;
    char buf[65536];
    bool timed_out = false;

    while (true) {
      struct pollfd fds[2];
      int nfds = 0;
      int read_slot = -1;
      int write_slot = -1;
      if (read_end.fd >= 0) {
        read_slot = nfds;
        fds[nfds++] = {read_end.fd, POLLIN, 0};
      }
      if (write_end.fd >= 0) {
        write_slot = nfds;
        fds[nfds++] = {write_end.fd, POLLOUT, 0};
      }
      if (nfds == 0) break;

      const auto remaining = deadline - std::chrono::steady_clock::now();
      const long ms = std::chrono::duration_cast<std::chrono::milliseconds>(
                          remaining)
                          .count();
      if (ms <= 0) {
        timed_out = true;
        break;
      }
      const int ready = ::poll(fds, static_cast<nfds_t>(nfds),
                               static_cast<int>(ms > 1000 ? 1000 : ms));
      if (ready < 0) {
        if (errno == EINTR) continue;
        ::kill(pid, SIGKILL);
        ::waitpid(pid, nullptr, 0);
        throw PredictorError("poll failed: " +
                             std::string(std::strerror(errno)));
      }
      if (ready == 0) continue;

      if (read_slot >= 0 && (fds[read_slot].revents & (POLLIN | POLLHUP))) {
        const ssize_t got = ::read(read_end.fd, buf, sizeof buf);
        if (got > 0) {
          output.append(buf, static_cast<size_t>(got));
        } else if (got == 0) {
          read_end.reset();
        } else if (errno != EAGAIN && errno != EWOULDBLOCK &&
                   errno != EINTR) {
          read_end.reset();
        }
      }
      if (write_slot >= 0 &&
          (fds[write_slot].revents & (POLLOUT | POLLERR | POLLHUP))) {
        if (fds[write_slot].revents & (POLLERR | POLLHUP)) {
          // Child stopped reading; close our side and let the line count
          // or exit status report the violation.
          write_end.reset();
        } else {
          const ssize_t put = ::write(write_end.fd, input.data() + written,
                                      input.size() - written);
          if (put > 0) {
            written += static_cast<size_t>(put);
            if (written == input.size()) write_end.reset();
          } else if (put < 0 && errno != EAGAIN && errno != EWOULDBLOCK &&
                     errno != EINTR) {
            write_end.reset();
          }
        }
      }
    }

    int status = 0;
    if (timed_out) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw PredictorError("command '" + command_ + "' exceeded the " +
                           format_double(opts_.timeout_seconds) +
                           " s timeout and was killed");
    }
    // Pipes are closed; wait for exit, still honoring the deadline.
    while (true) {
      const pid_t done = ::waitpid(pid, &status, WNOHANG);
      if (done == pid) break;
      if (done < 0) {
        throw PredictorError("waitpid failed: " +
                             std::string(std::strerror(errno)));
      }
      if (std::chrono::steady_clock::now() >= deadline) {
        ::kill(pid, SIGKILL);
        ::waitpid(pid, &status, 0);
        throw PredictorError("command '" + command_ + "' exceeded the " +
                             format_double(opts_.timeout_seconds) +
                             " s timeout and was killed");
      }
      ::usleep(2000);
    }
    if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
      if (WIFEXITED(status)) {
        throw PredictorError("command '" + command_ + "' exited with status " +
                             std::to_string(WEXITSTATUS(status)));
      }
      throw PredictorError("command '" + command_ +
                           "' was terminated by a signal");
    }

    std::vector<double> preds = detail::parse_prediction_lines(output, command_);
    if (preds.size() != rows) {
      throw PredictorError("command '" + command_ + "' wrote " +
                           std::to_string(preds.size()) +
                           " predictions for " + std::to_string(rows) +
                           " rows");
    }
    return preds;
  }

  std::string command_;
  SubprocessOptions opts_;
  bool determinism_checked_ = false;
};

}  // namespace cfsim

#endif  // CFSIM_PREDICTOR_HPP
