#include "irasm/subprocess.hpp"

#include <fcntl.h>
#include <poll.h>
#include <signal.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "irasm/errors.hpp"

namespace irasm {

namespace {

struct Pipe {
    int rd = -1;
    int wr = -1;

    Pipe() {
        int fds[2];
        if (pipe(fds) != 0) {
            throw SpawnError(std::string("pipe: ") + std::strerror(errno));
        }
        rd = fds[0];
        wr = fds[1];
    }

    ~Pipe() {
        close_rd();
        close_wr();
    }

    void close_rd() {
        if (rd >= 0) { close(rd); rd = -1; }
    }
    void close_wr() {
        if (wr >= 0) { close(wr); wr = -1; }
    }
};

// Drains one pipe into `out`, honoring the byte cap. Returns false on EOF.
bool drain(int fd, std::string& out, std::size_t cap, bool& truncated) {
    char buf[8192];
    for (;;) {
        ssize_t n = read(fd, buf, sizeof buf);
        if (n > 0) {
            if (out.size() < cap) {
                std::size_t take = std::min(static_cast<std::size_t>(n), cap - out.size());
                out.append(buf, take);
                if (take < static_cast<std::size_t>(n)) truncated = true;
            } else {
                truncated = true;
            }
            continue;
        }
        if (n == 0) return false;                       // EOF
        if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
        if (errno == EINTR) continue;
        return false;                                   // treat other errors as EOF
    }
}

void set_nonblocking(int fd) {
    int flags = fcntl(fd, F_GETFL, 0);
    fcntl(fd, F_SETFL, flags | O_NONBLOCK);
}

}  // namespace

std::vector<std::string> scrubbed_env() {
    return {"PATH=/usr/local/bin:/usr/bin:/bin", "LC_ALL=C"};
}

ProcessResult run_process(const SpawnSpec& spec) {
    if (spec.argv.empty()) {
        throw SpawnError("empty argv");
    }

    Pipe out_pipe;
    Pipe err_pipe;
    Pipe exec_pipe;  // child writes errno here if exec fails; closed on success

    std::vector<char*> argv;
    argv.reserve(spec.argv.size() + 1);
    for (const auto& a : spec.argv) argv.push_back(const_cast<char*>(a.c_str()));
    argv.push_back(nullptr);

    std::vector<char*> envp;
    if (spec.env) {
        envp.reserve(spec.env->size() + 1);
        for (const auto& e : *spec.env) envp.push_back(const_cast<char*>(e.c_str()));
        envp.push_back(nullptr);
    }

    const auto start = std::chrono::steady_clock::now();
    pid_t pid = fork();
    if (pid < 0) {
        throw SpawnError(std::string("fork: ") + std::strerror(errno));
    }

    if (pid == 0) {
        // Child. Only async-signal-safe calls from here on.
        int devnull = open("/dev/null", O_RDONLY);
        if (devnull >= 0) dup2(devnull, STDIN_FILENO);
        dup2(out_pipe.wr, STDOUT_FILENO);
        dup2(err_pipe.wr, STDERR_FILENO);
        out_pipe.close_rd();
        out_pipe.close_wr();
        err_pipe.close_rd();
        err_pipe.close_wr();
        exec_pipe.close_rd();
        fcntl(exec_pipe.wr, F_SETFD, FD_CLOEXEC);
        if (!spec.working_dir.empty()) {
            if (chdir(spec.working_dir.c_str()) != 0) {
                int e = errno;
                (void)!write(exec_pipe.wr, &e, sizeof e);
                _exit(127);
            }
        }
        if (spec.env) {
            execvpe(spec.argv[0].c_str(), argv.data(), envp.data());
        } else {
            execvp(spec.argv[0].c_str(), argv.data());
        }
        int e = errno;
        (void)!write(exec_pipe.wr, &e, sizeof e);
        _exit(127);
    }

    out_pipe.close_wr();
    err_pipe.close_wr();
    exec_pipe.close_wr();
    set_nonblocking(out_pipe.rd);
    set_nonblocking(err_pipe.rd);

    ProcessResult result;
    bool out_open = true;
    bool err_open = true;
    bool killed = false;

    const bool has_deadline = spec.timeout.count() > 0;
    const auto deadline = start + spec.timeout;

    while (out_open || err_open) {
        struct pollfd fds[2];
        nfds_t nfds = 0;
        int out_idx = -1, err_idx = -1;
        if (out_open) {
            out_idx = static_cast<int>(nfds);
            fds[nfds++] = {out_pipe.rd, POLLIN, 0};
        }
        if (err_open) {
            err_idx = static_cast<int>(nfds);
            fds[nfds++] = {err_pipe.rd, POLLIN, 0};
        }

        int wait_ms = -1;
        if (has_deadline && !killed) {
            auto left = std::chrono::duration_cast<std::chrono::milliseconds>(
                deadline - std::chrono::steady_clock::now());
            wait_ms = left.count() > 0 ? static_cast<int>(left.count()) : 0;
        }

        int rc = poll(fds, nfds, wait_ms);
        if (rc < 0) {
            if (errno == EINTR) continue;
            break;
        }

        if (has_deadline && !killed && std::chrono::steady_clock::now() >= deadline) {
            kill(pid, SIGKILL);
            killed = true;
            result.timed_out = true;
        }

        if (rc > 0) {
            if (out_idx >= 0 && (fds[out_idx].revents & (POLLIN | POLLHUP))) {
                out_open = drain(out_pipe.rd, result.stdout_data, spec.max_output_bytes,
                                 result.stdout_truncated);
            }
            if (err_idx >= 0 && (fds[err_idx].revents & (POLLIN | POLLHUP))) {
                err_open = drain(err_pipe.rd, result.stderr_data, spec.max_output_bytes,
                                 result.stderr_truncated);
            }
            if (out_idx >= 0 && (fds[out_idx].revents & (POLLERR | POLLNVAL))) out_open = false;
            if (err_idx >= 0 && (fds[err_idx].revents & (POLLERR | POLLNVAL))) err_open = false;
        }
    }

    int status = 0;
    while (waitpid(pid, &status, 0) < 0 && errno == EINTR) {
    }
    result.wall_time = std::chrono::steady_clock::now() - start;

    int exec_errno = 0;
    ssize_t got = read(exec_pipe.rd, &exec_errno, sizeof exec_errno);
    if (got == static_cast<ssize_t>(sizeof exec_errno)) {
        result.exec_failed = true;
        result.exec_errno = exec_errno;
    }

    if (WIFEXITED(status)) {
        result.exit_code = WEXITSTATUS(status);
    } else if (WIFSIGNALED(status)) {
        result.term_signal = WTERMSIG(status);
        // A timeout kill is reported as timed_out, not as an organic crash.
        result.signaled = !result.timed_out;
        result.exit_code = 128 + result.term_signal;
    }
    return result;
}

}  // namespace irasm
