#include "demosync/hub.hpp"

#include "demosync/error.hpp"
#include "demosync/textio.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

namespace fs = std::filesystem;

namespace demosync {

namespace {

void close_quiet(int fd) {
    if (fd >= 0) ::close(fd);
}

}  // namespace

CaptureHub::CaptureHub(Options opts) : opts_(std::move(opts)) {}

CaptureHub::~CaptureHub() {
    if (running_.load()) stop();
}

void CaptureHub::start() {
    fs::create_directories(opts_.session_dir);

    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) throw Error("IoError", "socket: " + std::string(std::strerror(errno)));
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(opts_.listen_port));
    if (::inet_pton(AF_INET, opts_.listen_host.c_str(), &addr.sin_addr) != 1)
        throw Error("IoError", "bad listen address " + opts_.listen_host);
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_quiet(listen_fd_);
        throw Error("IoError", "bind " + opts_.listen_host + ":" +
                                   std::to_string(opts_.listen_port) + ": " +
                                   std::strerror(errno));
    }
    socklen_t len = sizeof addr;
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 16) != 0) {
        close_quiet(listen_fd_);
        throw Error("IoError", "listen: " + std::string(std::strerror(errno)));
    }
    running_.store(true);
    acceptor_ = std::thread([this] { accept_loop(); });
}

void CaptureHub::accept_loop() {
    while (running_.load()) {
        int fd = ::accept(listen_fd_, nullptr, nullptr);
        if (fd < 0) {
            if (!running_.load()) break;
            continue;
        }
        std::lock_guard<std::mutex> lock(conn_mutex_);
        if (!running_.load()) {
            close_quiet(fd);
            break;
        }
        conn_fds_.push_back(fd);
        handlers_.emplace_back([this, fd] { handle_connection(fd); });
    }
}

void CaptureHub::handle_connection(int fd) {
    WireParser parser;
    uint8_t buf[64 * 1024];
    for (;;) {
        const ssize_t n = ::read(fd, buf, sizeof buf);
        if (n <= 0) break;  // client closed or hub shutting down
        std::vector<WireRecord> records;
        try {
            records = parser.feed(buf, static_cast<size_t>(n));
        } catch (const Error& e) {
            protocol_errors_.fetch_add(1);
            if (!opts_.quiet)
                std::fprintf(stderr, "hub: closing connection: %s\n", e.what());
            break;
        }
        for (const WireRecord& rec : records) append_record(rec);
    }
    close_quiet(fd);
}

void CaptureHub::append_record(const WireRecord& rec) {
    StreamLog* log = nullptr;
    {
        std::lock_guard<std::mutex> lock(logs_mutex_);
        auto it = logs_.find(rec.stream_id);
        if (it == logs_.end()) {
            const std::string path =
                (fs::path(opts_.session_dir) /
                 (std::string(stream_name(rec.stream_id)) + ".log"))
                    .string();
            auto [ins, ok] = logs_.try_emplace(rec.stream_id);
            ins->second.file = std::fopen(path.c_str(), "wb");
            ins->second.last_t = -std::numeric_limits<double>::infinity();
            if (!ins->second.file) {
                protocol_errors_.fetch_add(1);
                logs_.erase(ins);
                return;
            }
            it = ins;
        }
        log = &it->second;
    }
    std::lock_guard<std::mutex> lock(log->mutex);
    if (!std::isfinite(rec.timestamp) || rec.timestamp <= log->last_t) {
        out_of_order_drops_.fetch_add(1);
        return;
    }
    const std::vector<uint8_t> bytes = encode_record(rec);
    std::fwrite(bytes.data(), 1, bytes.size(), log->file);
    log->last_t = rec.timestamp;
    records_logged_.fetch_add(1);
}

void CaptureHub::stop() {
    if (!running_.exchange(false)) return;
    // Unblock accept().
    ::shutdown(listen_fd_, SHUT_RDWR);
    close_quiet(listen_fd_);
    if (acceptor_.joinable()) acceptor_.join();
    {
        std::lock_guard<std::mutex> lock(conn_mutex_);
        for (int fd : conn_fds_) ::shutdown(fd, SHUT_RD);
    }
    for (std::thread& t : handlers_)
        if (t.joinable()) t.join();

    SessionHeader header;
    header.session_id = opts_.session_id.empty()
                            ? fs::path(opts_.session_dir).filename().string()
                            : opts_.session_id;
    header.tactile_height = opts_.tactile_height;
    header.tactile_width = opts_.tactile_width;
    header.out_of_order_drops = out_of_order_drops_.load();
    {
        std::lock_guard<std::mutex> lock(logs_mutex_);
        for (auto& [kind, log] : logs_) {
            header.streams.push_back(kind);
            std::fflush(log.file);
            ::fsync(fileno(log.file));
            std::fclose(log.file);
            log.file = nullptr;
        }
    }
    write_file_bytes((fs::path(opts_.session_dir) / "header.txt").string(),
                     header.serialize());
}

HubClient::HubClient(const std::string& host, int port) {
    fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd_ < 0) throw Error("IoError", "socket: " + std::string(std::strerror(errno)));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(static_cast<uint16_t>(port));
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
        throw Error("IoError", "bad host " + host);
    if (::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
        close_quiet(fd_);
        fd_ = -1;
        throw Error("IoError", "connect " + host + ":" + std::to_string(port) + ": " +
                                   std::strerror(errno));
    }
    int one = 1;
    ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

HubClient::~HubClient() { close(); }

void HubClient::send(const WireRecord& rec) {
    const std::vector<uint8_t> bytes = encode_record(rec);
    send_bytes(bytes.data(), bytes.size());
}

void HubClient::send_bytes(const void* data, size_t len) {
    const uint8_t* p = static_cast<const uint8_t*>(data);
    size_t sent = 0;
    while (sent < len) {
        // MSG_NOSIGNAL: a peer that closed mid-stream surfaces as EPIPE
        // instead of killing the process with SIGPIPE.
        const ssize_t n = ::send(fd_, p + sent, len - sent, MSG_NOSIGNAL);
        if (n <= 0) throw Error("IoError", "send failed: " + std::string(std::strerror(errno)));
        sent += static_cast<size_t>(n);
    }
}

void HubClient::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

}  // namespace demosync
