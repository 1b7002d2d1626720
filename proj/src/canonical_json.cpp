#include "htp/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <stdexcept>

#include <openssl/evp.h>

namespace htp {
namespace {

void append_indent(std::string& out, int depth) {
    out.push_back('\n');
    out.append(static_cast<std::size_t>(depth) * 2, ' ');
}

void append_float(std::string& out, double value) {
    if (!std::isfinite(value)) {
        throw std::invalid_argument("canonical_dump: non-finite number");
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6f", value);
    std::string text(buf);
    if (text == "-0.000000") text = "0.000000";
    out += text;
}

void dump_into(std::string& out, const Json& value, bool pretty, int depth) {
    switch (value.type()) {
        case Json::value_t::object: {
            if (value.empty()) {
                out += "{}";
                return;
            }
            out.push_back('{');
            bool first = true;
            for (const auto& [key, child] : value.items()) {
                if (!first) out.push_back(',');
                first = false;
                if (pretty) append_indent(out, depth + 1);
                out += Json(key).dump();
                out += pretty ? ": " : ":";
                dump_into(out, child, pretty, depth + 1);
            }
            if (pretty) append_indent(out, depth);
            out.push_back('}');
            return;
        }
        case Json::value_t::array: {
            if (value.empty()) {
                out += "[]";
                return;
            }
            out.push_back('[');
            bool first = true;
            for (const auto& child : value) {
                if (!first) out.push_back(',');
                first = false;
                if (pretty) append_indent(out, depth + 1);
                dump_into(out, child, pretty, depth + 1);
            }
            if (pretty) append_indent(out, depth);
            out.push_back(']');
            return;
        }
        case Json::value_t::number_float:
            append_float(out, value.get<double>());
            return;
        default:
            out += value.dump();
            return;
    }
}

}  // namespace

std::string canonical_dump(const Json& value, bool pretty) {
    std::string out;
    dump_into(out, value, pretty, 0);
    if (pretty) out.push_back('\n');
    return out;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
    unsigned char digest[EVP_MAX_MD_SIZE];
    unsigned int length = 0;
    if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
        throw std::runtime_error("sha256: digest failed");
    }
    static constexpr char kHex[] = "0123456789abcdef";
    std::string hex;
    hex.reserve(2 * length);
    for (unsigned int i = 0; i < length; ++i) {
        const unsigned char b = digest[i];
        hex.push_back(kHex[b >> 4]);
        hex.push_back(kHex[b & 0x0f]);
    }
    return hex;
}

std::string sha256_hex(std::string_view text) {
    return sha256_hex(std::span(reinterpret_cast<const std::uint8_t*>(text.data()), text.size()));
}

std::string base64_encode(std::span<const std::uint8_t> bytes) {
    std::string out(4 * ((bytes.size() + 2) / 3), '\0');
    const int written = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), bytes.data(),
                                        static_cast<int>(bytes.size()));
    out.resize(static_cast<std::size_t>(written));
    return out;
}

double round_to(double value, int digits) {
    const double scale = std::pow(10.0, digits);
    return std::round(value * scale) / scale;
}

}  // namespace htp
