#pragma once

// HTTP API consumed by the browser client.
//
//   GET  /api/countries                       [{code, name}]
//   GET  /api/panoramas                       [{id, image}]            (no truth)
//   GET  /api/panoramas/{id}/image            image bytes
//   POST /api/guess                           multipart "image" [+ "north_offset_deg"]
//                                             or JSON {"panorama_id": id}  -> GuessReport
//   POST /api/game            {"rounds": n}   -> 201, redacted session
//   GET  /api/game/{id}                       redacted session
//   POST /api/game/{id}/rounds/{k}/guess      {"country": "DE"} -> session with round k revealed
//   GET  /api/game/{id}/rounds/{k}/image      image bytes
//   GET  /                                    static UI assets
//
// Errors are {"code": <ErrorKind>, "message": ...} with the status below.

#include <map>
#include <memory>
#include <optional>
#include <string>

#include <httplib.h>

#include "codec.hpp"
#include "engine.hpp"
#include "error.hpp"
#include "evalkit.hpp"
#include "game.hpp"
#include "json_io.hpp"

namespace countryguess {

inline int http_status_for(ErrorKind k) {
    switch (k) {
    case ErrorKind::argument:
    case ErrorKind::parse:
    case ErrorKind::validation: return 400;
    case ErrorKind::decode:
    case ErrorKind::shape: return 422;
    case ErrorKind::not_found: return 404;
    case ErrorKind::state: return 409;
    case ErrorKind::provider:
    case ErrorKind::protocol:
    case ErrorKind::remote: return 502;
    case ErrorKind::config: return 500;
    }
    return 500;
}

struct ApiOptions {
    std::optional<fs::path> ui_dir;
    std::uint64_t game_seed = std::random_device{}();
    std::chrono::seconds session_ttl = std::chrono::hours(2);
    std::size_t max_upload_bytes = 64u << 20;
};

inline const char* fallback_page = R"(<!doctype html>
<html><head><meta charset="utf-8"><title>countryguess</title></head>
<body><h1>countryguess</h1>
<p>No UI bundle is installed. Start the server with <code>--ui DIR</code> or use the JSON API under <code>/api/</code>.</p>
</body></html>
)";

class ApiServer {
public:
    ApiServer(const Engine& engine, DatasetManifest panoramas, ApiOptions opts = {})
        : engine_(engine), panoramas_(panoramas), opts_(std::move(opts)),
          games_(engine, std::move(panoramas), opts_.game_seed, opts_.session_ttl) {
        for (const auto& item : panoramas_.items) {
            if (!by_id_.emplace(item.id(), item).second)
                throw ValidationError("panorama id " + item.id() + " is not unique");
        }
    }

    void install(httplib::Server& svr) {
        svr.set_payload_max_length(opts_.max_upload_bytes);
        svr.set_exception_handler([](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
            write_error(res, ep);
        });

        svr.Get("/api/countries", [this](const httplib::Request&, httplib::Response& res) {
            auto a = OrderedJson::array();
            for (const auto& [code, sheet] : engine_.registry().entries())
                a.push_back(OrderedJson{{"code", code.str()}, {"name", sheet.display_name}});
            send_json(res, a);
        });

        svr.Get("/api/panoramas", [this](const httplib::Request&, httplib::Response& res) {
            auto a = OrderedJson::array();
            for (const auto& [id, _] : by_id_)
                a.push_back(OrderedJson{{"id", id}, {"image", "/api/panoramas/" + id + "/image"}});
            send_json(res, a);
        });

        svr.Get(R"(/api/panoramas/([^/]+)/image)", [this](const httplib::Request& req, httplib::Response& res) {
            send_image(res, panorama(req.matches[1]).path);
        });

        svr.Post("/api/guess", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, to_json(guess(req)));
        });

        svr.Post("/api/game", [this](const httplib::Request& req, httplib::Response& res) {
            auto body = request_json(req);
            auto rounds = body.value("rounds", Json());
            if (!rounds.is_number_integer() || rounds.get<long long>() < 1)
                throw ArgumentError("\"rounds\" must be a positive integer");
            send_json(res, games_.create(rounds.get<std::size_t>()), 201);
        });

        svr.Get(R"(/api/game/([0-9a-f]+))", [this](const httplib::Request& req, httplib::Response& res) {
            send_json(res, games_.state(req.matches[1]));
        });

        svr.Post(R"(/api/game/([0-9a-f]+)/rounds/(\d+)/guess)",
                 [this](const httplib::Request& req, httplib::Response& res) {
                     auto body = request_json(req);
                     if (!body.contains("country") || !body["country"].is_string())
                         throw ArgumentError("\"country\" must be a string");
                     CountryCode guess(body["country"].get<std::string>());
                     send_json(res, games_.submit_guess(req.matches[1], round_index(req.matches[2]), guess));
                 });

        svr.Get(R"(/api/game/([0-9a-f]+)/rounds/(\d+)/image)",
                [this](const httplib::Request& req, httplib::Response& res) {
                    send_image(res, games_.round_image(req.matches[1], round_index(req.matches[2])));
                });

        bool mounted = opts_.ui_dir && fs::is_directory(*opts_.ui_dir) && svr.set_mount_point("/", opts_.ui_dir->string());
        if (!mounted) {
            svr.Get("/", [](const httplib::Request&, httplib::Response& res) {
                res.set_content(fallback_page, "text/html; charset=utf-8");
            });
        }
    }

    GameService& games() noexcept { return games_; }

private:
    GuessReport guess(const httplib::Request& req) {
        if (req.is_multipart_form_data()) {
            if (!req.has_file("image")) throw ArgumentError("multipart body needs an \"image\" part");
            const auto& content = req.get_file_value("image").content;
            std::optional<double> offset;
            if (req.has_file("north_offset_deg")) offset = parse_offset(req.get_file_value("north_offset_deg").content);
            auto pano = decode_panorama(std::vector<unsigned char>(content.begin(), content.end()), offset);
            return engine_.guess(pano);
        }
        auto body = request_json(req);
        if (!body.contains("panorama_id") || !body["panorama_id"].is_string())
            throw ArgumentError("expected multipart image upload or {\"panorama_id\": ...}");
        const auto& item = panorama(body["panorama_id"].get<std::string>());
        auto pano = load_panorama(item.path, item.north_offset_deg);
        return engine_.guess(pano, item.path);
    }

    const ManifestItem& panorama(const std::string& id) const {
        auto it = by_id_.find(id);
        if (it == by_id_.end()) throw NotFoundError("unknown panorama " + id);
        return it->second;
    }

    static double parse_offset(const std::string& s) {
        try {
            std::size_t used = 0;
            double v = std::stod(s, &used);
            if (used == s.size() && std::isfinite(v)) return v;
        } catch (const std::exception&) {
        }
        throw ArgumentError("north_offset_deg must be a number");
    }

    static std::size_t round_index(const std::string& s) {
        try {
            return static_cast<std::size_t>(std::stoull(s));
        } catch (const std::exception&) {
            throw NotFoundError("no such round " + s);
        }
    }

    static Json request_json(const httplib::Request& req) {
        if (req.body.empty()) return Json::object();
        auto j = parse_json(req.body, "request body");
        if (!j.is_object()) throw ArgumentError("request body must be a JSON object");
        return j;
    }

    static void send_json(httplib::Response& res, const OrderedJson& j, int status = 200) {
        res.status = status;
        res.set_content(j.dump(), "application/json; charset=utf-8");
    }

    static void send_image(httplib::Response& res, const fs::path& path) {
        auto bytes = read_bytes(path);
        const char* type = "application/octet-stream";
        switch (sniff_format(bytes)) {
        case ImageFormat::png: type = "image/png"; break;
        case ImageFormat::jpeg: type = "image/jpeg"; break;
        default: break;
        }
        res.set_content(std::string(bytes.begin(), bytes.end()), type);
    }

    static void write_error(httplib::Response& res, std::exception_ptr ep) {
        std::string code = "internal";
        std::string message;
        int status = 500;
        try {
            std::rethrow_exception(ep);
        } catch (const Error& e) {
            code = to_string(e.kind());
            message = e.what();
            status = http_status_for(e.kind());
        } catch (const std::exception& e) {
            message = e.what();
        } catch (...) {
            message = "unknown error";
        }
        send_json(res, OrderedJson{{"code", code}, {"message", message}}, status);
    }

    const Engine& engine_;
    DatasetManifest panoramas_;
    ApiOptions opts_;
    GameService games_;
    std::map<std::string, ManifestItem> by_id_;
};

} // namespace countryguess
