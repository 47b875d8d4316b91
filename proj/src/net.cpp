#include "mindos/net.hpp"

#include <atomic>
#include <cctype>
#include <cstdlib>
#include <mutex>

namespace mindos {

std::optional<Url> parse_url(std::string_view url) {
    Url out;
    const auto scheme_end = url.find("://");
    if (scheme_end == std::string_view::npos) return std::nullopt;
    out.scheme = std::string(url.substr(0, scheme_end));
    if (out.scheme != "http" && out.scheme != "https") return std::nullopt;
    out.port = out.scheme == "https" ? 443 : 80;
    std::string_view rest = url.substr(scheme_end + 3);
    const auto path_start = rest.find_first_of("/?");
    std::string_view authority = rest.substr(0, path_start);
    if (path_start != std::string_view::npos) {
        out.path = std::string(rest.substr(path_start));
        if (out.path.front() == '?') out.path.insert(out.path.begin(), '/');
    }
    if (authority.empty()) return std::nullopt;
    const auto colon = authority.rfind(':');
    if (colon != std::string_view::npos && authority.find(']') == std::string_view::npos) {
        const std::string port(authority.substr(colon + 1));
        if (port.empty() || port.find_first_not_of("0123456789") != std::string::npos) return std::nullopt;
        out.port = std::stoi(port);
        authority = authority.substr(0, colon);
    }
    out.host = std::string(authority);
    return out;
}

bool is_loopback_host(std::string_view host) {
    return host == "localhost" || host == "::1" || host == "[::1]" || host.rfind("127.", 0) == 0;
}

std::string url_encode(std::string_view s) {
    static const char* hex = "0123456789ABCDEF";
    std::string out;
    for (unsigned char c : s) {
        if (std::isalnum(c) || c == '-' || c == '_' || c == '.' || c == '~') {
            out.push_back(static_cast<char>(c));
        } else {
            out.push_back('%');
            out.push_back(hex[c >> 4]);
            out.push_back(hex[c & 0xF]);
        }
    }
    return out;
}

namespace {

std::atomic<bool>& offline_flag() {
    static std::atomic<bool> flag{[] {
        const char* v = std::getenv("MINDOS_OFFLINE");
        return v != nullptr && *v != '\0' && std::string_view(v) != "0" && std::string_view(v) != "false";
    }()};
    return flag;
}

} // namespace

bool offline_mode() { return offline_flag().load(); }

void set_offline_mode(bool offline) { offline_flag().store(offline); }

bool network_allowed(const Url& url) { return !offline_mode() || is_loopback_host(url.host); }

} // namespace mindos
