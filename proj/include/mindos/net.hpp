#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace mindos {

struct Url {
    std::string scheme; // "http" or "https"
    std::string host;
    int port = 80;
    std::string path = "/"; // includes any query string

    std::string origin() const { return scheme + "://" + host + ":" + std::to_string(port); }
};

std::optional<Url> parse_url(std::string_view url);

bool is_loopback_host(std::string_view host);

std::string url_encode(std::string_view s);

/// Process-wide offline switch. When set, outbound HTTP is restricted to
/// loopback hosts. Initialized from MINDOS_OFFLINE on first use.
bool offline_mode();
void set_offline_mode(bool offline);

/// True when `url` may be contacted under the current offline setting.
bool network_allowed(const Url& url);

} // namespace mindos
