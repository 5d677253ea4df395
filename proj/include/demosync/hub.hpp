#pragma once

#include "demosync/protocol.hpp"
#include "demosync/session.hpp"

#include <atomic>
#include <cstdio>
#include <map>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

namespace demosync {

// TCP ingestion server: accepts any number of sensor clients, decodes wire
// records and appends them to per-stream logs under a session directory.
// Records with non-increasing timestamps within a stream are dropped (and
// counted) so every log stays monotone. A protocol error closes only the
// offending connection; the hub keeps running. Stop() drains the handlers,
// flushes and fsyncs the logs and writes header.txt.
class CaptureHub {
public:
    struct Options {
        std::string listen_host = "127.0.0.1";
        int listen_port = 0;  // 0 picks an ephemeral port
        std::string session_dir;
        std::string session_id;
        uint16_t tactile_height = 240;
        uint16_t tactile_width = 320;
        bool quiet = true;
    };

    explicit CaptureHub(Options opts);
    ~CaptureHub();

    CaptureHub(const CaptureHub&) = delete;
    CaptureHub& operator=(const CaptureHub&) = delete;

    // Binds, listens and spawns the acceptor. Throws Error("IoError") when
    // the endpoint is unavailable.
    void start();
    // Shuts down the acceptor and every connection, finalizes the session.
    void stop();

    int port() const { return port_; }
    long out_of_order_drops() const { return out_of_order_drops_.load(); }
    long records_logged() const { return records_logged_.load(); }
    long protocol_errors() const { return protocol_errors_.load(); }

private:
    struct StreamLog {
        std::FILE* file = nullptr;
        double last_t;
        std::mutex mutex;
    };

    void accept_loop();
    void handle_connection(int fd);
    void append_record(const WireRecord& rec);

    Options opts_;
    int listen_fd_ = -1;
    int port_ = 0;
    std::thread acceptor_;
    std::mutex conn_mutex_;
    std::vector<std::thread> handlers_;
    std::vector<int> conn_fds_;
    std::map<StreamKind, StreamLog> logs_;
    std::mutex logs_mutex_;
    std::atomic<bool> running_{false};
    std::atomic<long> out_of_order_drops_{0};
    std::atomic<long> records_logged_{0};
    std::atomic<long> protocol_errors_{0};
};

// Minimal client used by tools and tests: connects and streams encoded
// records to a hub.
class HubClient {
public:
    HubClient(const std::string& host, int port);
    ~HubClient();

    HubClient(const HubClient&) = delete;
    HubClient& operator=(const HubClient&) = delete;

    void send(const WireRecord& rec);
    void send_bytes(const void* data, size_t len);
    void close();

private:
    int fd_ = -1;
};

}  // namespace demosync
