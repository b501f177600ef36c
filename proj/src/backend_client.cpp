#include "clincascade/backend_client.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <map>
#include <thread>

#include "clincascade/error.hpp"

namespace clincascade::backend {

namespace {

constexpr const char* kModule = "backend";

Error backend_error(const std::string& op, const std::string& msg, std::string hint = {}) {
    return Error(ErrorKind::backend, kModule, op, msg, std::move(hint));
}

void ignore_sigpipe_once() {
    static const bool done = [] {
        struct sigaction current {};
        sigaction(SIGPIPE, nullptr, &current);
        if (current.sa_handler == SIG_DFL) signal(SIGPIPE, SIG_IGN);
        return true;
    }();
    (void)done;
}

Response decode(std::string_view line) {
    Response r;
    try {
        r.raw = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
        throw backend_error("request", std::string("server sent invalid JSON: ") + e.what());
    }
    if (!r.raw.is_object()) throw backend_error("request", "server response is not a JSON object");
    if (r.raw.contains("id") && r.raw["id"].is_string()) r.id = r.raw["id"].get<std::string>();
    r.ok = r.raw.value("status", "") == "ok";
    if (r.ok) {
        r.payload = r.raw.value("payload", nlohmann::json::object());
    } else {
        const auto err = r.raw.value("error", nlohmann::json::object());
        r.error_code = err.value("code", "");
        r.error_message = err.value("message", "");
    }
    return r;
}

}  // namespace

std::shared_ptr<Session> Session::spawn(const std::vector<std::string>& command, std::chrono::milliseconds timeout) {
    if (command.empty()) throw backend_error("spawn", "empty backend command");
    ignore_sigpipe_once();

    int in_pipe[2];
    int out_pipe[2];
    if (pipe2(in_pipe, O_CLOEXEC) != 0 || pipe2(out_pipe, O_CLOEXEC) != 0) {
        throw backend_error("spawn", std::string("pipe failed: ") + std::strerror(errno));
    }
    std::vector<char*> argv;
    for (const auto& a : command) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    const pid_t pid = fork();
    if (pid < 0) throw backend_error("spawn", std::string("fork failed: ") + std::strerror(errno));
    if (pid == 0) {
        dup2(in_pipe[0], STDIN_FILENO);
        dup2(out_pipe[1], STDOUT_FILENO);
        execvp(argv[0], argv.data());
        _exit(127);
    }
    close(in_pipe[0]);
    close(out_pipe[1]);

    std::shared_ptr<Session> s(new Session());
    s->command_ = command;
    s->pid_ = pid;
    s->to_child_ = in_pipe[1];
    s->from_child_ = out_pipe[0];
    s->timeout_ = timeout;

    Response info;
    try {
        info = s->request("info", nlohmann::json::object());
    } catch (const Error& e) {
        throw backend_error("handshake", std::string("no valid info response from '") + command[0] + "': " + e.what(),
                            "check that the command starts a model server speaking the line protocol");
    }
    if (!info.ok || info.payload.value("protocol_version", "") != kProtocolVersion) {
        throw backend_error("handshake",
                            "server '" + command[0] + "' answered info with " + info.raw.dump(),
                            "expected protocol_version \"" + std::string(kProtocolVersion) + "\"");
    }
    s->info_ = info.payload;
    return s;
}

Session::~Session() {
    if (pid_ > 0 && !exited_) {
        try {
            shutdown(std::chrono::seconds(5));
        } catch (...) {
            kill(pid_, SIGKILL);
            reap(std::chrono::seconds(1));
        }
    }
    if (to_child_ >= 0) close(to_child_);
    if (from_child_ >= 0) close(from_child_);
}

void Session::write_line(std::string_view line) {
    std::string data(line);
    data.push_back('\n');
    std::size_t written = 0;
    while (written < data.size()) {
        const ssize_t n = write(to_child_, data.data() + written, data.size() - written);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw backend_error("request", std::string("write to server failed: ") + std::strerror(errno),
                                "the model server process may have exited");
        }
        written += static_cast<std::size_t>(n);
    }
}

std::string Session::read_line() {
    const auto deadline = std::chrono::steady_clock::now() + timeout_;
    while (true) {
        const auto nl = buffer_.find('\n');
        if (nl != std::string::npos) {
            std::string line = buffer_.substr(0, nl);
            buffer_.erase(0, nl + 1);
            return line;
        }
        const auto remaining =
            std::chrono::duration_cast<std::chrono::milliseconds>(deadline - std::chrono::steady_clock::now());
        if (remaining.count() <= 0) throw backend_error("request", "timed out waiting for server response");
        pollfd pfd{from_child_, POLLIN, 0};
        const int rc = poll(&pfd, 1, static_cast<int>(std::min<long long>(remaining.count(), 1000)));
        if (rc < 0 && errno != EINTR) throw backend_error("request", std::string("poll failed: ") + std::strerror(errno));
        if (rc <= 0) continue;
        char chunk[65536];
        const ssize_t n = read(from_child_, chunk, sizeof chunk);
        if (n == 0) throw backend_error("request", "server closed its output", "the model server process exited");
        if (n < 0) {
            if (errno == EINTR) continue;
            throw backend_error("request", std::string("read failed: ") + std::strerror(errno));
        }
        buffer_.append(chunk, static_cast<std::size_t>(n));
    }
}

Response Session::exchange(std::string_view line) {
    write_line(line);
    return decode(read_line());
}

Response Session::request(std::string_view cmd, nlohmann::json payload) {
    std::lock_guard lock(mutex_);
    const std::string id = std::to_string(next_id_++);
    nlohmann::json req = {{"id", id}, {"cmd", cmd}, {"payload", std::move(payload)}};
    auto resp = exchange(req.dump());
    if (resp.id != id) {
        throw backend_error("request", "response id '" + resp.id + "' does not echo request id '" + id + "'");
    }
    return resp;
}

Response Session::send_raw(std::string_view line) {
    std::lock_guard lock(mutex_);
    return exchange(line);
}

int Session::reap(std::chrono::milliseconds timeout) {
    if (exited_) return exit_status_;
    const auto deadline = std::chrono::steady_clock::now() + timeout;
    while (true) {
        int status = 0;
        const pid_t r = waitpid(pid_, &status, WNOHANG);
        if (r == pid_) {
            exited_ = true;
            exit_status_ = WIFEXITED(status) ? WEXITSTATUS(status) : 128 + WTERMSIG(status);
            return exit_status_;
        }
        if (r < 0) {
            exited_ = true;
            return exit_status_;
        }
        if (std::chrono::steady_clock::now() >= deadline) return -1;
        std::this_thread::sleep_for(std::chrono::milliseconds(10));
    }
}

int Session::shutdown(std::chrono::milliseconds timeout) {
    std::lock_guard lock(mutex_);
    if (exited_) return exit_status_;
    try {
        nlohmann::json req = {{"id", std::to_string(next_id_++)}, {"cmd", "shutdown"}, {"payload", nlohmann::json::object()}};
        write_line(req.dump());
    } catch (const Error&) {
        // Already gone; fall through to reaping.
    }
    close(to_child_);
    to_child_ = -1;
    const int status = reap(timeout);
    if (status == -1 && !exited_) {
        kill(pid_, SIGKILL);
        reap(std::chrono::seconds(1));
        return -1;
    }
    return status;
}

std::shared_ptr<Session> connect(const classifier::BackendSpec& spec) {
    static std::mutex registry_mutex;
    static std::map<std::vector<std::string>, std::weak_ptr<Session>> registry;
    std::lock_guard lock(registry_mutex);
    if (auto existing = registry[spec.command].lock()) return existing;
    auto session = Session::spawn(spec.command);
    registry[spec.command] = session;
    return session;
}

std::vector<ConformanceCheck> run_conformance(const std::vector<std::string>& command) {
    std::vector<ConformanceCheck> checks;
    const auto record = [&](std::string name, bool passed, std::string detail = {}) {
        checks.push_back({std::move(name), passed, std::move(detail)});
    };

    std::shared_ptr<Session> s;
    try {
        s = Session::spawn(command, std::chrono::seconds(60));
        record("info reports protocol_version 1", true);
    } catch (const Error& e) {
        record("info reports protocol_version 1", false, e.what());
        return checks;
    }

    const auto guarded = [&](const std::string& name, auto&& body) {
        try {
            body();
        } catch (const std::exception& e) {
            record(name, false, e.what());
        }
    };

    guarded("responses echo request ids", [&] {
        const auto r = s->send_raw(R"({"id":"echo-42","cmd":"info","payload":{}})");
        record("responses echo request ids", r.id == "echo-42" && r.ok, r.raw.dump());
    });
    guarded("unknown cmd yields unsupported", [&] {
        const auto r = s->request("frobnicate", nlohmann::json::object());
        record("unknown cmd yields unsupported", !r.ok && r.error_code == "unsupported", r.raw.dump());
    });
    guarded("unknown model_id yields not_found", [&] {
        const auto r = s->request("predict", {{"model_id", "no-such-model"}, {"texts", {"x"}}});
        record("unknown model_id yields not_found", !r.ok && r.error_code == "not_found", r.raw.dump());
    });
    guarded("malformed JSON yields parse", [&] {
        const auto r = s->send_raw(R"({"id": "1", "cmd": )");
        record("malformed JSON yields parse", !r.ok && r.error_code == "parse", r.raw.dump());
    });
    guarded("oversized line yields too_large", [&] {
        std::string big = R"({"id":"big","cmd":"info","payload":{"pad":")";
        big.append(kMaxLineBytes + 16, 'a');
        big += "\"}}";
        const auto r = s->send_raw(big);
        record("oversized line yields too_large", !r.ok && r.error_code == "too_large", r.raw.dump().substr(0, 200));
    });
    guarded("train then predict returns normalized rows", [&] {
        nlohmann::json examples = nlohmann::json::array({
            {{"text", "lesion roja en brazo"}, {"label", "a"}},
            {{"text", "lesion roja en pierna"}, {"label", "a"}},
            {{"text", "placa blanca en cara"}, {"label", "b"}},
            {{"text", "placa blanca en cuello"}, {"label", "b"}},
        });
        const auto t = s->request("train", {{"examples", examples},
                                            {"hyperparams", {{"batch_size", 64}, {"learning_rate", 0.001}, {"epochs", 10}}}});
        if (!t.ok) {
            record("train then predict returns normalized rows", false, t.raw.dump());
            return;
        }
        std::vector<std::string> texts;
        for (const auto& e : examples) texts.push_back(e["text"]);
        const auto p = s->request("predict", {{"model_id", t.payload.at("model_id")}, {"texts", texts}});
        bool ok = p.ok && p.payload.at("labels").size() == 2 && p.payload.at("probs").size() == texts.size();
        std::string detail;
        if (ok) {
            for (const auto& row : p.payload.at("probs")) {
                double sum = 0.0;
                for (const auto& v : row) {
                    const double x = v.get<double>();
                    ok = ok && x >= 0.0;
                    sum += x;
                }
                if (std::abs(sum - 1.0) > 1e-5) {
                    ok = false;
                    detail = "row sums to " + std::to_string(sum);
                }
            }
        } else {
            detail = p.raw.dump();
        }
        record("train then predict returns normalized rows", ok, detail);
    });

    const auto start = std::chrono::steady_clock::now();
    const int status = s->shutdown(std::chrono::seconds(5));
    const auto elapsed = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    record("shutdown exits 0 within 5 s", status == 0,
           "status " + std::to_string(status) + " after " + std::to_string(elapsed) + " s");
    return checks;
}

}  // namespace clincascade::backend
