#include "hbopt/trainer.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <chrono>
#include <cstring>
#include <thread>

#include <nlohmann/json.hpp>

namespace hbopt {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

json config_to_json(const space::Configuration& config) {
  json j = json::object();
  for (const auto& [name, value] : config.values) {
    if (std::holds_alternative<double>(value))
      j[name] = std::get<double>(value);
    else if (std::holds_alternative<std::int64_t>(value))
      j[name] = std::get<std::int64_t>(value);
    else
      j[name] = std::get<std::string>(value);
  }
  return j;
}

void kill_group(pid_t pid) {
  ::kill(-pid, SIGKILL);
  int status = 0;
  ::waitpid(pid, &status, 0);
}

// Waits for exit, polling so the deadline can interrupt. Returns false on
// deadline expiry (the process group is killed).
bool wait_exit(pid_t pid, std::optional<Clock::time_point> deadline, int* status) {
  while (true) {
    pid_t r = ::waitpid(pid, status, WNOHANG);
    if (r == pid) return true;
    if (r < 0 && errno != EINTR) return true;  // already reaped: treat as exited
    if (deadline && Clock::now() >= *deadline) {
      kill_group(pid);
      return false;
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(5));
  }
}

std::string last_nonempty_line(const std::string& text) {
  std::size_t end = text.size();
  while (end > 0) {
    std::size_t start = text.find_last_of('\n', end - 1);
    std::size_t begin = start == std::string::npos ? 0 : start + 1;
    std::string line = text.substr(begin, end - begin);
    if (line.find_first_not_of(" \t\r") != std::string::npos) return line;
    if (start == std::string::npos) break;
    end = start;
  }
  return {};
}

}  // namespace

TrainerOracle::TrainerOracle(TrainerOptions options) : options_(std::move(options)) {
  if (options_.command.empty()) throw UsageError("trainer: empty command");
  if (options_.checkpoint_root.empty())
    options_.checkpoint_root = std::filesystem::temp_directory_path() / "hbopt_ckpt";
  ::signal(SIGPIPE, SIG_IGN);  // a trainer that never reads stdin must not kill us
}

double TrainerOracle::evaluate(ArmState& arm, std::int64_t resource, std::int64_t trial_id) {
  std::filesystem::path ckpt = options_.checkpoint_root / ("arm_" + std::to_string(arm.arm_id));
  std::filesystem::create_directories(ckpt);

  json request{{"trial_id", trial_id},
               {"arm_id", arm.arm_id},
               {"config", config_to_json(arm.config)},
               {"resource", resource},
               {"resource_unit", options_.resource_unit},
               {"checkpoint_dir", ckpt.string()}};
  std::string request_line = request.dump() + "\n";

  int in_pipe[2], out_pipe[2];
  if (::pipe(in_pipe) != 0 || ::pipe(out_pipe) != 0)
    throw OracleFailure(OracleFailure::Kind::generic, "trainer: pipe() failed");

  pid_t pid = ::fork();
  if (pid < 0) throw OracleFailure(OracleFailure::Kind::generic, "trainer: fork() failed");
  if (pid == 0) {
    ::setpgid(0, 0);  // own process group so a timeout can kill helpers too
    ::dup2(in_pipe[0], STDIN_FILENO);
    ::dup2(out_pipe[1], STDOUT_FILENO);
    ::close(in_pipe[0]);
    ::close(in_pipe[1]);
    ::close(out_pipe[0]);
    ::close(out_pipe[1]);
    ::execl("/bin/sh", "sh", "-c", options_.command.c_str(), static_cast<char*>(nullptr));
    _exit(127);
  }
  ::close(in_pipe[0]);
  ::close(out_pipe[1]);

  std::optional<Clock::time_point> deadline;
  if (options_.timeout_secs > 0)
    deadline = Clock::now() + std::chrono::microseconds(
                                  static_cast<std::int64_t>(options_.timeout_secs * 1e6));

  // One small write; if the trainer exited without reading we just move on.
  ssize_t written = ::write(in_pipe[1], request_line.data(), request_line.size());
  (void)written;
  ::close(in_pipe[1]);

  std::string output;
  char buf[4096];
  while (true) {
    int wait_ms = -1;
    if (deadline) {
      auto left = std::chrono::duration_cast<std::chrono::milliseconds>(*deadline - Clock::now());
      wait_ms = std::max<int>(0, static_cast<int>(left.count()));
    }
    struct pollfd pfd{out_pipe[0], POLLIN, 0};
    int pr = ::poll(&pfd, 1, wait_ms);
    if (pr < 0) {
      if (errno == EINTR) continue;
      break;
    }
    if (pr == 0) {  // deadline expired while the trainer was still running
      ::close(out_pipe[0]);
      kill_group(pid);
      throw OracleFailure(OracleFailure::Kind::timeout,
                          "trainer: timed out after " + std::to_string(options_.timeout_secs) +
                              "s (arm " + std::to_string(arm.arm_id) + ")");
    }
    ssize_t n = ::read(out_pipe[0], buf, sizeof buf);
    if (n > 0) {
      output.append(buf, static_cast<std::size_t>(n));
      continue;
    }
    break;  // EOF (or unrecoverable read error)
  }
  ::close(out_pipe[0]);

  int status = 0;
  if (!wait_exit(pid, deadline, &status))
    throw OracleFailure(OracleFailure::Kind::timeout,
                        "trainer: timed out waiting for exit (arm " +
                            std::to_string(arm.arm_id) + ")");

  if (!WIFEXITED(status) || WEXITSTATUS(status) != 0) {
    std::string why = WIFEXITED(status)
                          ? "exited with code " + std::to_string(WEXITSTATUS(status))
                          : "killed by signal " + std::to_string(WTERMSIG(status));
    throw OracleFailure(OracleFailure::Kind::generic, "trainer: " + why);
  }

  std::string line = last_nonempty_line(output);
  if (line.empty())
    throw OracleFailure(OracleFailure::Kind::generic, "trainer: no output on stdout");
  json reply;
  try {
    reply = json::parse(line);
  } catch (const json::exception&) {
    throw OracleFailure(OracleFailure::Kind::generic,
                        "trainer: last stdout line is not JSON: " + line);
  }
  if (!reply.is_object() || !reply.contains("loss") || !reply["loss"].is_number())
    throw OracleFailure(OracleFailure::Kind::generic,
                        "trainer: last stdout line lacks a numeric 'loss': " + line);
  double loss = reply["loss"].get<double>();
  if (!std::isfinite(loss))
    throw OracleFailure(OracleFailure::Kind::generic, "trainer: non-finite loss");
  return loss;
}

}  // namespace hbopt
