#pragma once

// Optional Street View client. Looks up the panorama nearest a location,
// downloads six 90-degree views (a cube around the camera) and reprojects them
// into an equirectangular panorama whose column 0 faces true north.
//
// Network access sits behind HttpTransport so tests replay recorded responses.

#include <cmath>
#include <cstdlib>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <httplib.h>

#include "codec.hpp"
#include "error.hpp"
#include "image.hpp"
#include "json_io.hpp"

namespace countryguess {

inline constexpr const char* streetview_key_variable = "STREETVIEW_API_KEY";

struct HttpResponse {
    int status = 0;
    std::string body;
};

class HttpTransport {
public:
    virtual ~HttpTransport() = default;
    /// `target` is a path with query string, relative to the transport's host.
    virtual HttpResponse get(const std::string& target) = 0;
};

class HttplibTransport : public HttpTransport {
public:
    explicit HttplibTransport(std::string host = "https://maps.googleapis.com") : client_(host) {
        client_.set_connection_timeout(10);
        client_.set_read_timeout(30);
    }

    HttpResponse get(const std::string& target) override {
        auto res = client_.Get(target);
        if (!res) throw RemoteError("request failed: " + httplib::to_string(res.error()), 0);
        return {res->status, res->body};
    }

private:
    httplib::Client client_;
};

/// Removes the credential so recorded URLs carry no secret.
inline std::string redact_key(const std::string& target) {
    auto pos = target.find("&key=");
    if (pos == std::string::npos) pos = target.find("?key=");
    if (pos == std::string::npos) return target;
    auto end = target.find('&', pos + 1);
    return target.substr(0, pos) + (end == std::string::npos ? "" : target.substr(end));
}

/// Replays `<dir>/index.json` = {"<redacted target>": {"status": 200, "file": "x.jpg"}}.
class ReplayTransport : public HttpTransport {
public:
    explicit ReplayTransport(fs::path dir) : dir_(std::move(dir)) {
        auto origin = (dir_ / "index.json").string();
        auto index = read_json(dir_ / "index.json");
        if (!index.is_object()) throw ParseError(origin + ": expected an object");
        for (const auto& [target, entry] : index.items()) {
            entries_[target] = {require<int>(entry, "status", origin), require<std::string>(entry, "file", origin)};
        }
    }

    HttpResponse get(const std::string& target) override {
        auto it = entries_.find(redact_key(target));
        if (it == entries_.end()) throw NotFoundError("no recorded response for " + redact_key(target));
        auto bytes = read_bytes(dir_ / it->second.second);
        return {it->second.first, std::string(bytes.begin(), bytes.end())};
    }

private:
    fs::path dir_;
    std::map<std::string, std::pair<int, std::string>> entries_;
};

inline std::string streetview_key_from_env() {
    const char* v = std::getenv(streetview_key_variable);
    if (!v || !*v) throw ConfigError(std::string("Street View credentials missing: set ") + streetview_key_variable);
    return v;
}

struct StreetViewOptions {
    int view_size = 640;
    int output_width = 2048;  // height is half
};

struct FetchedPanorama {
    std::string pano_id;
    double lat = 0.0, lon = 0.0;
    Panorama panorama;
};

struct CubeFace {
    double heading_deg;
    double pitch_deg;
};

inline const std::vector<CubeFace>& cube_faces() {
    static const std::vector<CubeFace> faces{{0, 0}, {90, 0}, {180, 0}, {270, 0}, {0, 90}, {0, -90}};
    return faces;
}

/// Reprojects six 90-degree views (ordered as cube_faces()) to an equirectangular image, north at column 0.
inline RgbImage assemble_cube(const std::vector<RgbImage>& faces, int out_width) {
    if (faces.size() != cube_faces().size()) throw ArgumentError("expected six cube faces");
    if (out_width < 2 || out_width % 2) throw ArgumentError("output width must be even and positive");
    for (const auto& f : faces)
        if (f.empty()) throw ShapeError("empty cube face");
    using detail::deg2rad;

    struct Frame {
        double f[3], r[3], u[3];
    };
    std::vector<Frame> frames;
    for (const auto& cf : cube_faces()) {
        const double h = cf.heading_deg * deg2rad, p = cf.pitch_deg * deg2rad;
        Frame fr{{std::cos(p) * std::sin(h), std::cos(p) * std::cos(h), std::sin(p)},
                 {std::cos(h), -std::sin(h), 0.0},
                 {}};
        fr.u[0] = fr.r[1] * fr.f[2] - fr.r[2] * fr.f[1];
        fr.u[1] = fr.r[2] * fr.f[0] - fr.r[0] * fr.f[2];
        fr.u[2] = fr.r[0] * fr.f[1] - fr.r[1] * fr.f[0];
        frames.push_back(fr);
    }

    const int W = out_width, H = out_width / 2;
    RgbImage out(W, H);
    for (int y = 0; y < H; ++y) {
        const double el = (0.5 - (y + 0.5) / H) * 180.0 * deg2rad;
        for (int x = 0; x < W; ++x) {
            const double az = (x + 0.5) / W * 360.0 * deg2rad;
            const double d[3] = {std::cos(el) * std::sin(az), std::cos(el) * std::cos(az), std::sin(el)};
            std::size_t best = 0;
            double best_dot = -2.0;
            for (std::size_t k = 0; k < frames.size(); ++k) {
                const auto& f = frames[k].f;
                double dot = d[0] * f[0] + d[1] * f[1] + d[2] * f[2];
                if (dot > best_dot) best_dot = dot, best = k;
            }
            const auto& fr = frames[best];
            const double a = (d[0] * fr.r[0] + d[1] * fr.r[1] + d[2] * fr.r[2]) / best_dot;
            const double b = (d[0] * fr.u[0] + d[1] * fr.u[1] + d[2] * fr.u[2]) / best_dot;
            const auto& face = faces[best];
            int px = static_cast<int>(std::floor((a + 1.0) / 2.0 * face.width()));
            int py = static_cast<int>(std::floor((1.0 - b) / 2.0 * face.height()));
            px = std::clamp(px, 0, face.width() - 1);
            py = std::clamp(py, 0, face.height() - 1);
            out.at(x, y) = face.at(px, py);
        }
    }
    return out;
}

class StreetViewClient {
public:
    StreetViewClient(std::shared_ptr<HttpTransport> transport, std::string api_key, StreetViewOptions opts = {})
        : transport_(std::move(transport)), key_(std::move(api_key)), opts_(opts) {
        if (key_.empty()) throw ConfigError(std::string("Street View credentials missing: set ") + streetview_key_variable);
    }

    FetchedPanorama fetch(double lat, double lon) {
        if (!(lat >= -90.0 && lat <= 90.0) || !(lon >= -180.0 && lon <= 180.0))
            throw ArgumentError("location outside valid latitude/longitude range");
        std::ostringstream q;
        q.precision(8);
        q << "/maps/api/streetview/metadata?location=" << lat << "," << lon;
        auto meta_res = call(q.str());
        auto meta = parse_json(meta_res.body, "Street View metadata");
        auto status = meta.value("status", std::string("UNKNOWN"));
        if (status != "OK")
            throw RemoteError("Street View metadata status " + status + ": " + meta.value("error_message", std::string()),
                              meta_res.status);
        FetchedPanorama out{require<std::string>(meta, "pano_id", "Street View metadata"), lat, lon,
                            Panorama()};
        if (meta.contains("location") && meta["location"].is_object()) {
            out.lat = meta["location"].value("lat", lat);
            out.lon = meta["location"].value("lng", lon);
        }

        std::vector<RgbImage> faces;
        for (const auto& cf : cube_faces()) {
            std::ostringstream v;
            v << "/maps/api/streetview?size=" << opts_.view_size << "x" << opts_.view_size << "&pano=" << out.pano_id
              << "&heading=" << cf.heading_deg << "&pitch=" << cf.pitch_deg << "&fov=90";
            auto res = call(v.str());
            faces.push_back(decode_image(std::span(reinterpret_cast<const unsigned char*>(res.body.data()), res.body.size())));
        }
        out.panorama = Panorama(assemble_cube(faces, opts_.output_width), 0.0);
        return out;
    }

private:
    HttpResponse call(const std::string& target) {
        auto res = transport_->get(target + "&key=" + key_);
        if (res.status != 200)
            throw RemoteError("Street View returned HTTP " + std::to_string(res.status) + " for " + redact_key(target),
                              res.status);
        return res;
    }

    std::shared_ptr<HttpTransport> transport_;
    std::string key_;
    StreetViewOptions opts_;
};

} // namespace countryguess
