#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include <httplib.h>

#include "ciphen/protocol.hpp"

namespace ciphen {

namespace {

void close_fd(int& fd) {
  if (fd >= 0) ::close(fd);
  fd = -1;
}

}  // namespace

std::string run_process(const std::string& command, std::string_view input,
                        std::chrono::milliseconds timeout) {
  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0) throw BatchError(std::string("pipe: ") + std::strerror(errno));
  if (::pipe(out_pipe) != 0) {
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    throw BatchError(std::string("pipe: ") + std::strerror(errno));
  }
  const pid_t pid = ::fork();
  if (pid < 0) throw BatchError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", command.c_str(), static_cast<char*>(nullptr));
    ::_exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);
  int to_child = in_pipe[1], from_child = out_pipe[0];
  ::fcntl(to_child, F_SETFL, ::fcntl(to_child, F_GETFL) | O_NONBLOCK);
  ::signal(SIGPIPE, SIG_IGN);

  const auto deadline = std::chrono::steady_clock::now() + timeout;
  std::string output;
  std::size_t written = 0;
  if (input.empty()) close_fd(to_child);
  char buffer[65536];
  bool timed_out = false;
  while (from_child >= 0) {
    const auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
        deadline - std::chrono::steady_clock::now());
    if (left.count() <= 0) {
      timed_out = true;
      break;
    }
    pollfd fds[2];
    nfds_t count = 0;
    fds[count++] = {from_child, POLLIN, 0};
    if (to_child >= 0) fds[count++] = {to_child, POLLOUT, 0};
    const int ready = ::poll(fds, count, static_cast<int>(std::min<long long>(left.count(), 1000)));
    if (ready < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
      const ssize_t got = ::read(from_child, buffer, sizeof(buffer));
      if (got > 0) {
        output.append(buffer, static_cast<std::size_t>(got));
      } else if (got == 0 || errno != EAGAIN) {
        close_fd(from_child);
      }
    }
    if (count == 2 && (fds[1].revents & (POLLOUT | POLLERR | POLLHUP))) {
      const ssize_t put = ::write(to_child, input.data() + written, input.size() - written);
      if (put > 0) {
        written += static_cast<std::size_t>(put);
        if (written == input.size()) close_fd(to_child);
      } else if (put < 0 && errno != EAGAIN) {
        close_fd(to_child);  // child stopped reading; its exit status decides
      }
    }
  }
  close_fd(to_child);
  close_fd(from_child);

  int status = 0;
  if (timed_out) {
    ::kill(pid, SIGKILL);
    ::waitpid(pid, &status, 0);
    throw BatchError("external scorer timed out after " + std::to_string(timeout.count()) + " ms");
  }
  // Output is closed; give the child the remaining time to exit.
  for (;;) {
    const pid_t r = ::waitpid(pid, &status, WNOHANG);
    if (r == pid) break;
    if (r < 0 && errno != EINTR) throw BatchError("waitpid failed");
    if (std::chrono::steady_clock::now() >= deadline) {
      ::kill(pid, SIGKILL);
      ::waitpid(pid, &status, 0);
      throw BatchError("external scorer did not exit before the timeout");
    }
    ::usleep(2000);
  }
  if (WIFSIGNALED(status)) {
    throw BatchError("external scorer killed by signal " + std::to_string(WTERMSIG(status)));
  }
  if (WEXITSTATUS(status) != 0) {
    throw BatchError("external scorer exited with status " + std::to_string(WEXITSTATUS(status)));
  }
  return output;
}

PairingResult score_with_external(const ExternalEndpoint& endpoint,
                                  const std::vector<ScoreRequest>& requests) {
  const std::string body = serialize_requests(requests);
  if (!endpoint.command.empty()) {
    return pair_responses(requests, run_process(endpoint.command, body, endpoint.timeout));
  }
  if (endpoint.http_url.empty()) throw BatchError("external endpoint has neither command nor URL");

  httplib::Client client(endpoint.http_url);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(endpoint.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(endpoint.timeout - secs);
  client.set_connection_timeout(secs.count(), usecs.count());
  client.set_read_timeout(secs.count(), usecs.count());
  client.set_write_timeout(secs.count(), usecs.count());
  auto res = client.Post("/score", body, "application/x-ndjson");
  if (!res) throw BatchError("HTTP scorer request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) {
    throw BatchError("HTTP scorer returned status " + std::to_string(res->status));
  }
  return pair_responses(requests, res->body);
}

}  // namespace ciphen
