#pragma once

// Boundary to external inference (OCR, captioning, object detection).
//
// Providers are addressed through a line-delimited JSON protocol over the
// child's standard streams:
//
//   request : {"op":"ocr"|"caption"|"objects","image_path":"...","request_id":N}
//   response: {"request_id":N,"result":[...]}  or  {"request_id":N,"error":"..."}
//
// Result element shapes:
//   ocr     : {"text":s,"confidence":c,"box":[x,y,w,h]}
//   objects : {"label":s,"confidence":c,"box":[x,y,w,h]}
//   caption : a single string (the array holds exactly one element)
//
// A fixture provider answers from a directory of {image digest -> response}
// documents instead: <dir>/<digest>.json = {"ocr":[...],"caption":[...],"objects":[...]}.

#include <algorithm>
#include <atomic>
#include <cerrno>
#include <chrono>
#include <csignal>
#include <cstring>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <fcntl.h>
#include <poll.h>
#include <spawn.h>
#include <sys/socket.h>
#include <sys/wait.h>
#include <unistd.h>

#include "codec.hpp"
#include "digest.hpp"
#include "error.hpp"
#include "image.hpp"
#include "json_io.hpp"
#include "knowledge.hpp"
#include "utf8.hpp"

extern char** environ;

namespace countryguess {

struct Box {
    int x = 0, y = 0, w = 0, h = 0;

    bool operator==(const Box&) const = default;
};

struct TextObservation {
    std::string text;
    double confidence = 0.0;
    Box box;
};

struct ObjectObservation {
    std::string label;
    double confidence = 0.0;
    Box box;
};

enum class PlatePosition { front, rear, unknown };

inline const char* to_string(PlatePosition p) {
    switch (p) {
    case PlatePosition::front: return "front";
    case PlatePosition::rear: return "rear";
    case PlatePosition::unknown: return "unknown";
    }
    return "?";
}

struct PlateColorObservation {
    PlateColor color = PlateColor::white;
    PlatePosition position = PlatePosition::unknown;
    double confidence = 0.0;
};

struct Caption {
    std::string text;
};

/// An image handed to providers. Computes the pixel digest and, for
/// subprocess providers, materializes a PNG file on first use. Thread-safe.
class ProviderImage {
public:
    explicit ProviderImage(const RgbImage& image, std::optional<fs::path> source = std::nullopt)
        : image_(image), source_(std::move(source)) {}

    ~ProviderImage() {
        if (temp_) {
            std::error_code ec;
            fs::remove(*temp_, ec);
        }
    }

    ProviderImage(const ProviderImage&) = delete;
    ProviderImage& operator=(const ProviderImage&) = delete;

    const RgbImage& image() const noexcept { return image_; }

    const std::string& digest() {
        std::call_once(digest_once_, [&] { digest_ = image_digest(image_); });
        return digest_;
    }

    /// Path of a decodable file with exactly these pixels.
    fs::path path() {
        std::lock_guard lock(mu_);
        if (source_) return *source_;
        if (!temp_) {
            static std::atomic<unsigned> counter{0};
            auto p = fs::temp_directory_path() /
                     ("countryguess-" + std::to_string(::getpid()) + "-" + std::to_string(counter++) + ".png");
            save_png(p, image_);
            temp_ = p;
        }
        return *temp_;
    }

private:
    const RgbImage& image_;
    std::optional<fs::path> source_;
    std::optional<fs::path> temp_;
    std::mutex mu_;
    std::once_flag digest_once_;
    std::string digest_;
};

class Provider {
public:
    virtual ~Provider() = default;

    /// Returns the raw "result" value for `op`. Throws ProviderError on any failure.
    virtual Json request(const std::string& op, ProviderImage& image) = 0;

    virtual std::string describe() const = 0;
};

// ---------------------------------------------------------------------------
// Response validation

namespace detail {

inline double checked_confidence(const Json& item, const std::string& op) {
    if (!item.contains("confidence") || !item["confidence"].is_number())
        throw ProtocolError(op + ": observation without numeric confidence");
    double c = item["confidence"].get<double>();
    if (!(c >= 0.0 && c <= 1.0)) throw ProtocolError(op + ": confidence " + std::to_string(c) + " outside [0,1]");
    return c;
}

inline Box checked_box(const Json& item, const std::string& op, const RgbImage& img) {
    if (!item.contains("box")) return {0, 0, img.width(), img.height()};
    const auto& b = item["box"];
    if (!b.is_array() || b.size() != 4 || !std::all_of(b.begin(), b.end(), [](const Json& v) { return v.is_number(); }))
        throw ProtocolError(op + ": box must be [x,y,w,h]");
    Box box{b[0].get<int>(), b[1].get<int>(), b[2].get<int>(), b[3].get<int>()};
    if (box.x < 0 || box.y < 0 || box.w < 0 || box.h < 0 || box.x + box.w > img.width() || box.y + box.h > img.height())
        throw ProtocolError(op + ": box outside image bounds");
    return box;
}

inline const Json& checked_array(const Json& result, const std::string& op) {
    if (!result.is_array()) throw ProtocolError(op + ": result must be an array");
    return result;
}

} // namespace detail

inline std::vector<TextObservation> parse_ocr_result(const Json& result, const RgbImage& img, double confidence_floor) {
    std::vector<TextObservation> out;
    for (const auto& item : detail::checked_array(result, "ocr")) {
        if (!item.is_object() || !item.contains("text") || !item["text"].is_string())
            throw ProtocolError("ocr: observation without text");
        TextObservation obs;
        obs.text = item["text"].get<std::string>();
        obs.confidence = detail::checked_confidence(item, "ocr");
        obs.box = detail::checked_box(item, "ocr", img);
        if (obs.confidence >= confidence_floor) out.push_back(std::move(obs));
    }
    return out;
}

inline std::vector<ObjectObservation> parse_objects_result(const Json& result, const RgbImage& img,
                                                           double confidence_floor) {
    std::vector<ObjectObservation> out;
    for (const auto& item : detail::checked_array(result, "objects")) {
        if (!item.is_object() || !item.contains("label") || !item["label"].is_string())
            throw ProtocolError("objects: observation without label");
        ObjectObservation obs;
        obs.label = utf8::lower(item["label"].get<std::string>());
        if (obs.label.empty()) throw ProtocolError("objects: empty label");
        obs.confidence = detail::checked_confidence(item, "objects");
        obs.box = detail::checked_box(item, "objects", img);
        if (obs.confidence >= confidence_floor) out.push_back(std::move(obs));
    }
    return out;
}

inline Caption parse_caption_result(const Json& result) {
    const Json* value = &result;
    if (result.is_array()) {
        if (result.size() != 1) throw ProtocolError("caption: expected exactly one caption");
        value = &result[0];
    }
    if (!value->is_string()) throw ProtocolError("caption: caption must be a string");
    Caption c{value->get<std::string>()};
    auto trimmed = utf8::normalize_name(c.text);
    if (trimmed.empty()) throw ProtocolError("caption: empty caption");
    return c;
}

inline std::vector<TextObservation> run_ocr(Provider& provider, ProviderImage& img, double confidence_floor = 0.3) {
    return parse_ocr_result(provider.request("ocr", img), img.image(), confidence_floor);
}

inline Caption run_caption(Provider& provider, ProviderImage& img) {
    return parse_caption_result(provider.request("caption", img));
}

inline std::vector<ObjectObservation> run_objects(Provider& provider, ProviderImage& img, double confidence_floor = 0.4) {
    return parse_objects_result(provider.request("objects", img), img.image(), confidence_floor);
}

// ---------------------------------------------------------------------------
// Fixture provider

class FixtureProvider final : public Provider {
public:
    explicit FixtureProvider(fs::path dir) : dir_(std::move(dir)) {
        if (!fs::is_directory(dir_)) throw ConfigError("fixture directory not found: " + dir_.string());
    }

    Json request(const std::string& op, ProviderImage& image) override {
        auto file = dir_ / (image.digest() + ".json");
        if (!fs::exists(file)) throw ProviderError("no fixture response for image " + image.digest());
        Json doc;
        try {
            doc = read_json(file);
        } catch (const Error& e) {
            throw ProviderError(std::string("fixture unreadable: ") + e.what());
        }
        if (!doc.is_object() || !doc.contains(op)) throw ProviderError("fixture has no \"" + op + "\" response");
        const auto& r = doc[op];
        if (r.is_object() && r.contains("error")) throw ProviderError("fixture error: " + r["error"].dump());
        return r;
    }

    std::string describe() const override { return "fixtures:" + dir_.string(); }

private:
    fs::path dir_;
};

// ---------------------------------------------------------------------------
// Subprocess provider

/// Long-lived child process speaking the line protocol. One request in flight
/// at a time; a timed-out or crashed child is reaped and restarted on the next request.
class SubprocessProvider final : public Provider {
public:
    explicit SubprocessProvider(std::string command, std::chrono::milliseconds deadline = std::chrono::seconds(30))
        : command_(std::move(command)), deadline_(deadline) {
        if (command_.empty()) throw ConfigError("empty provider command");
    }

    ~SubprocessProvider() override { stop(); }

    SubprocessProvider(const SubprocessProvider&) = delete;
    SubprocessProvider& operator=(const SubprocessProvider&) = delete;

    Json request(const std::string& op, ProviderImage& image) override {
        auto path = image.path();
        std::lock_guard lock(mu_);
        if (pid_ <= 0) start();
        const auto id = ++next_id_;
        Json req = {{"op", op}, {"image_path", path.string()}, {"request_id", id}};
        send_line(req.dump() + "\n");
        auto line = receive_line();
        Json resp;
        try {
            resp = Json::parse(line);
        } catch (const Json::parse_error&) {
            throw ProtocolError("provider sent malformed response: " + line.substr(0, 200));
        }
        if (!resp.is_object() || !resp.contains("request_id") || resp["request_id"] != id)
            throw ProtocolError("provider response has mismatched request_id");
        if (resp.contains("error")) throw ProviderError("provider error: " + resp["error"].dump(), stderr_tail_);
        if (!resp.contains("result")) throw ProtocolError("provider response has neither result nor error");
        return resp["result"];
    }

    std::string describe() const override { return "command:" + command_; }

private:
    void start() {
        int sv[2];
        if (::socketpair(AF_UNIX, SOCK_STREAM | SOCK_CLOEXEC, 0, sv) != 0)
            throw ProviderError(std::string("socketpair: ") + std::strerror(errno));
        int errpipe[2];
        if (::pipe2(errpipe, O_CLOEXEC) != 0) {
            ::close(sv[0]);
            ::close(sv[1]);
            throw ProviderError(std::string("pipe: ") + std::strerror(errno));
        }
        posix_spawn_file_actions_t fa;
        posix_spawn_file_actions_init(&fa);
        posix_spawn_file_actions_adddup2(&fa, sv[1], STDIN_FILENO);
        posix_spawn_file_actions_adddup2(&fa, sv[1], STDOUT_FILENO);
        posix_spawn_file_actions_adddup2(&fa, errpipe[1], STDERR_FILENO);
        const char* argv[] = {"/bin/sh", "-c", command_.c_str(), nullptr};
        pid_t pid = -1;
        int rc = ::posix_spawn(&pid, "/bin/sh", &fa, nullptr, const_cast<char* const*>(argv), environ);
        posix_spawn_file_actions_destroy(&fa);
        ::close(sv[1]);
        ::close(errpipe[1]);
        if (rc != 0) {
            ::close(sv[0]);
            ::close(errpipe[0]);
            throw ProviderError(std::string("spawn failed: ") + std::strerror(rc));
        }
        ::fcntl(errpipe[0], F_SETFL, O_NONBLOCK);
        pid_ = pid;
        io_fd_ = sv[0];
        err_fd_ = errpipe[0];
        buffer_.clear();
        stderr_tail_.clear();
    }

    void stop() {
        if (io_fd_ >= 0) ::close(io_fd_);
        if (err_fd_ >= 0) ::close(err_fd_);
        io_fd_ = err_fd_ = -1;
        if (pid_ > 0) {
            ::kill(pid_, SIGKILL);
            int status = 0;
            ::waitpid(pid_, &status, 0);
        }
        pid_ = -1;
    }

    [[noreturn]] void fail(const std::string& what, bool timed_out = false) {
        drain_stderr();
        auto tail = stderr_tail_;
        stop();
        throw ProviderError(what, tail, timed_out);
    }

    void send_line(const std::string& line) {
        std::size_t off = 0;
        while (off < line.size()) {
            auto n = ::send(io_fd_, line.data() + off, line.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                fail("provider " + command_ + " is not accepting requests");
            }
            off += static_cast<std::size_t>(n);
        }
    }

    void drain_stderr() {
        if (err_fd_ < 0) return;
        char buf[1024];
        for (;;) {
            auto n = ::read(err_fd_, buf, sizeof buf);
            if (n <= 0) break;
            stderr_tail_.append(buf, static_cast<std::size_t>(n));
        }
        constexpr std::size_t keep = 2048;
        if (stderr_tail_.size() > keep) stderr_tail_.erase(0, stderr_tail_.size() - keep);
    }

    std::string receive_line() {
        using clock = std::chrono::steady_clock;
        const auto until = clock::now() + deadline_;
        for (;;) {
            auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                auto line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            auto remaining = std::chrono::duration_cast<std::chrono::milliseconds>(until - clock::now()).count();
            if (remaining <= 0) fail("provider " + command_ + " exceeded its deadline", true);
            pollfd fds[2] = {{io_fd_, POLLIN, 0}, {err_fd_, POLLIN, 0}};
            int rc = ::poll(fds, 2, static_cast<int>(remaining));
            if (rc < 0) {
                if (errno == EINTR) continue;
                fail(std::string("poll: ") + std::strerror(errno));
            }
            if (fds[1].revents & POLLIN) drain_stderr();
            if (fds[0].revents & (POLLIN | POLLHUP | POLLERR)) {
                char buf[4096];
                auto n = ::recv(io_fd_, buf, sizeof buf, 0);
                if (n <= 0) fail("provider " + command_ + " exited before responding");
                buffer_.append(buf, static_cast<std::size_t>(n));
            }
        }
    }

    std::string command_;
    std::chrono::milliseconds deadline_;
    std::mutex mu_;
    pid_t pid_ = -1;
    int io_fd_ = -1;
    int err_fd_ = -1;
    std::string buffer_;
    std::string stderr_tail_;
    long long next_id_ = 0;
};

// ---------------------------------------------------------------------------
// Plate colors

struct PaletteEntry {
    PlateColor color;
    Rgb prototype;
};

inline constexpr std::array<PaletteEntry, 6> plate_prototypes = {{
    {PlateColor::white, {255, 255, 255}},
    {PlateColor::yellow, {255, 200, 0}},
    {PlateColor::blue, {0, 60, 180}},
    {PlateColor::red, {200, 0, 0}},
    {PlateColor::green, {0, 130, 60}},
    {PlateColor::black, {20, 20, 20}},
}};

/// Nearest palette member by Euclidean RGB distance; ties go to the lower palette index.
inline std::size_t quantize_plate_color(const Rgb& p) {
    std::size_t best = 0;
    long best_d = -1;
    for (std::size_t i = 0; i < plate_prototypes.size(); ++i) {
        const auto& q = plate_prototypes[i].prototype;
        long dr = long(p.r) - q.r, dg = long(p.g) - q.g, db = long(p.b) - q.b;
        long d = dr * dr + dg * dg + db * db;
        if (best_d < 0 || d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return best;
}

inline const std::vector<std::string>& vehicle_labels() {
    static const std::vector<std::string> labels = {"car", "truck", "bus", "motorcycle"};
    return labels;
}

inline constexpr double plate_min_share = 0.3;

/// Plate-candidate strip of a vehicle box: bottom quarter, middle half horizontally.
inline Box plate_strip(const Box& vehicle) {
    int top = vehicle.y + (vehicle.h * 3) / 4;
    int left = vehicle.x + vehicle.w / 4;
    int right = vehicle.x + (vehicle.w * 3) / 4;
    return {left, top, right - left, vehicle.y + vehicle.h - top};
}

inline std::vector<PlateColorObservation> extract_plate_colors(const RgbImage& img,
                                                               const std::vector<ObjectObservation>& objects) {
    std::vector<PlateColorObservation> out;
    const auto& vehicles = vehicle_labels();
    for (const auto& obj : objects) {
        if (std::find(vehicles.begin(), vehicles.end(), obj.label) == vehicles.end()) continue;
        auto strip = plate_strip(obj.box);
        int x0 = std::max(strip.x, 0), y0 = std::max(strip.y, 0);
        int x1 = std::min(strip.x + strip.w, img.width()), y1 = std::min(strip.y + strip.h, img.height());
        if (x1 <= x0 || y1 <= y0) continue;
        std::array<std::size_t, 6> tally{};
        for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x) ++tally[quantize_plate_color(img.at(x, y))];
        std::size_t total = static_cast<std::size_t>(x1 - x0) * static_cast<std::size_t>(y1 - y0);
        std::size_t best = 0;
        for (std::size_t i = 1; i < tally.size(); ++i)
            if (tally[i] > tally[best]) best = i;
        double share = static_cast<double>(tally[best]) / static_cast<double>(total);
        if (share >= plate_min_share)
            out.push_back({plate_prototypes[best].color, PlatePosition::unknown, share});
    }
    return out;
}

} // namespace countryguess
