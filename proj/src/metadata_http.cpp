#include "modeshare/error.hpp"
#include "modeshare/sampler.hpp"

#include <httplib.h>

#include <cctype>
#include <cstdio>
#include <cstdlib>

namespace modeshare::sampler {
namespace {

std::string percent_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 15]);
        }
    }
    return out;
}

}  // namespace

HttpMetadataClient::HttpMetadataClient(LiveClientOptions opts) : opts_(std::move(opts)) {
    if (opts_.api_key.empty()) {
        throw ConfigError("SV_API_KEY", "live metadata client needs an API key");
    }
}

HttpMetadataClient HttpMetadataClient::from_environment(LiveClientOptions opts) {
    if (opts.api_key.empty()) {
        const char* key = std::getenv("SV_API_KEY");
        if (key != nullptr) {
            opts.api_key = key;
        }
    }
    return HttpMetadataClient(std::move(opts));
}

std::string HttpMetadataClient::request_target(const SamplePoint& point) const {
    char loc[64];
    std::snprintf(loc, sizeof(loc), "%.7f,%.7f", point.lat, point.lon);
    return opts_.path + "?location=" + percent_encode(loc) + "&key=" + percent_encode(opts_.api_key);
}

ImageMetadata HttpMetadataClient::query(const SamplePoint& point) const {
    // one client per call: httplib::Client is not safe to share across threads
    httplib::Client cli(opts_.base_url);
    cli.set_connection_timeout(opts_.timeout_s, 0);
    cli.set_read_timeout(opts_.timeout_s, 0);
    if (!cli.is_valid()) {
        throw TransportError(point.point_id, "cannot create HTTP client for " + opts_.base_url);
    }
    auto res = cli.Get(request_target(point));
    if (!res) {
        throw TransportError(point.point_id, "request failed: " + httplib::to_string(res.error()));
    }
    if (res->status != 200) {
        throw TransportError(point.point_id, "HTTP status " + std::to_string(res->status));
    }
    return parse_metadata_response(point.point_id, res->body);
}

}  // namespace modeshare::sampler
