#pragma once

#include <chrono>
#include <memory>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "clincascade/classifier.hpp"

/// Client side of the external model protocol.
///
/// Newline-delimited JSON over a child process's stdin/stdout. Requests are
/// `{"id", "cmd", "payload"}`; responses echo the id and carry
/// `"status": "ok"` with a payload or `"status": "error"` with
/// `{"code", "message"}`. Commands: info, train, predict, shutdown.
namespace clincascade::backend {

inline constexpr std::string_view kProtocolVersion = "1";
inline constexpr std::size_t kMaxLineBytes = 16u << 20;

struct Response {
    nlohmann::json raw;
    std::string id;
    bool ok = false;
    nlohmann::json payload;
    std::string error_code;
    std::string error_message;
};

class Session {
public:
    /// Spawns the server and performs the `info` handshake.
    static std::shared_ptr<Session> spawn(const std::vector<std::string>& command,
                                          std::chrono::milliseconds timeout = std::chrono::minutes(10));
    ~Session();

    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    /// Sends one request and waits for the matching response. Thread-safe;
    /// requests are serialized.
    Response request(std::string_view cmd, nlohmann::json payload);
    /// Writes `line` verbatim (a newline is appended) and reads one response.
    Response send_raw(std::string_view line);

    /// Sends `shutdown` and waits for the process to exit. Returns the exit
    /// status, or -1 if it did not exit within `timeout` (it is then killed).
    int shutdown(std::chrono::milliseconds timeout = std::chrono::seconds(5));

    const nlohmann::json& info() const noexcept { return info_; }
    const std::vector<std::string>& command() const noexcept { return command_; }

private:
    Session() = default;
    void write_line(std::string_view line);
    std::string read_line();
    Response exchange(std::string_view line);
    int reap(std::chrono::milliseconds timeout);

    std::vector<std::string> command_;
    int pid_ = -1;
    int to_child_ = -1;
    int from_child_ = -1;
    std::string buffer_;
    std::uint64_t next_id_ = 1;
    std::chrono::milliseconds timeout_{0};
    nlohmann::json info_;
    std::mutex mutex_;
    bool exited_ = false;
    int exit_status_ = -1;
};

/// Shared session for a backend command; one server process per distinct
/// command line while any model still references it.
std::shared_ptr<Session> connect(const classifier::BackendSpec& spec);

struct ConformanceCheck {
    std::string name;
    bool passed = false;
    std::string detail;
};

/// Drives a fresh server through the protocol contract: handshake, id
/// echoing, error codes (unsupported, not_found, parse, too_large),
/// probability normalization and orderly shutdown.
std::vector<ConformanceCheck> run_conformance(const std::vector<std::string>& command);

}  // namespace clincascade::backend
