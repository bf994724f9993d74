#pragma once

#include <string>

#include <json.hpp>

namespace fairaudit {

/// Canonical JSON rendering: object keys sorted, floats printed with a fixed
/// significant-digit count, no locale dependence. Reports rendered this way
/// are byte-identical on replay, which is what makes them diffable evidence.
///
/// Non-finite floats serialize as null (JSON has no representation for them).
std::string canonical_dump(const nlohmann::json& value, int float_digits = 12, int indent = -1);

/// 64-bit FNV-1a over a string, as a 16-hex-digit fingerprint.
std::string fnv1a_hex(const std::string& bytes);

}  // namespace fairaudit
