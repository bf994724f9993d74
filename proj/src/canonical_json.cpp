#include "fairaudit/canonical_json.hpp"

#include <cmath>
#include <cstdio>
#include <cstdint>

namespace fairaudit {

namespace {

void dump_value(const nlohmann::json& v, int digits, int indent, int depth, std::string& out);

void indent_to(std::string& out, int indent, int depth) {
    if (indent < 0) return;
    out += '\n';
    out.append(static_cast<std::size_t>(indent * depth), ' ');
}

void dump_number(const nlohmann::json& v, int digits, std::string& out) {
    if (v.is_number_integer()) {
        out += std::to_string(v.get<std::int64_t>());
        return;
    }
    if (v.is_number_unsigned()) {
        out += std::to_string(v.get<std::uint64_t>());
        return;
    }
    double d = v.get<double>();
    if (!std::isfinite(d)) {
        out += "null";
        return;
    }
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*g", digits, d);
    out += buf;
}

void dump_value(const nlohmann::json& v, int digits, int indent, int depth, std::string& out) {
    switch (v.type()) {
        case nlohmann::json::value_t::object: {
            if (v.empty()) {
                out += "{}";
                return;
            }
            out += '{';
            bool first = true;
            for (auto it = v.begin(); it != v.end(); ++it) {  // nlohmann objects iterate key-sorted
                if (!first) out += ',';
                first = false;
                indent_to(out, indent, depth + 1);
                out += nlohmann::json(it.key()).dump();
                out += indent < 0 ? ":" : ": ";
                dump_value(it.value(), digits, indent, depth + 1, out);
            }
            indent_to(out, indent, depth);
            out += '}';
            return;
        }
        case nlohmann::json::value_t::array: {
            if (v.empty()) {
                out += "[]";
                return;
            }
            out += '[';
            bool first = true;
            for (const auto& item : v) {
                if (!first) out += ',';
                first = false;
                indent_to(out, indent, depth + 1);
                dump_value(item, digits, indent, depth + 1, out);
            }
            indent_to(out, indent, depth);
            out += ']';
            return;
        }
        case nlohmann::json::value_t::string:
            out += v.dump();  // nlohmann escaping is deterministic
            return;
        case nlohmann::json::value_t::boolean:
            out += v.get<bool>() ? "true" : "false";
            return;
        case nlohmann::json::value_t::null:
        case nlohmann::json::value_t::discarded:
            out += "null";
            return;
        default:
            dump_number(v, digits, out);
    }
}

}  // namespace

std::string canonical_dump(const nlohmann::json& value, int float_digits, int indent) {
    std::string out;
    dump_value(value, float_digits, indent, 0, out);
    if (indent >= 0) out += '\n';
    return out;
}

std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t hash = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        hash ^= c;
        hash *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(hash));
    return buf;
}

}  // namespace fairaudit
