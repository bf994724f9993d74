#pragma once

#include <string>
#include <vector>

namespace fairaudit::csv {

struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
};

/// RFC 4180 reader: quoted fields, doubled quotes, embedded separators and
/// newlines. Requires a header row; every record must match its width.
Table read_file(const std::string& path);
Table parse(const std::string& text);

/// Writer quotes only when needed and uses '\n' line endings.
std::string format(const Table& table);
void write_file(const std::string& path, const Table& table);

}  // namespace fairaudit::csv
