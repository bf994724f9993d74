#include "fairaudit/csv.hpp"

#include <fstream>
#include <sstream>

#include "fairaudit/errors.hpp"

namespace fairaudit::csv {

namespace {

bool needs_quoting(const std::string& field) {
    return field.find_first_of(",\"\n\r") != std::string::npos;
}

void append_field(std::string& out, const std::string& field) {
    if (!needs_quoting(field)) {
        out += field;
        return;
    }
    out += '"';
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
}

}  // namespace

Table parse(const std::string& text) {
    Table table;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool record_started = false;

    auto end_field = [&] {
        record.push_back(field);
        field.clear();
        record_started = true;
    };
    auto end_record = [&] {
        if (!record_started && record.empty() && field.empty()) return;  // skip blank line
        end_field();
        if (table.header.empty()) {
            table.header = record;
        } else {
            require(record.size() == table.header.size(), ErrorCode::IoError,
                    "csv record width " + std::to_string(record.size()) + " != header width " +
                        std::to_string(table.header.size()));
            table.rows.push_back(record);
        }
        record.clear();
        record_started = false;
    };

    for (std::size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                field += c;
            }
            continue;
        }
        switch (c) {
            case '"':
                in_quotes = true;
                record_started = true;
                break;
            case ',':
                end_field();
                break;
            case '\r':
                break;  // tolerate CRLF
            case '\n':
                end_record();
                break;
            default:
                field += c;
                record_started = true;
        }
    }
    require(!in_quotes, ErrorCode::IoError, "unterminated quoted csv field");
    if (record_started || !record.empty() || !field.empty()) end_record();
    require(!table.header.empty(), ErrorCode::IoError, "csv file has no header row");
    return table;
}

Table read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(in.good(), ErrorCode::IoError, "cannot open file: " + path);
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse(buffer.str());
}

std::string format(const Table& table) {
    std::string out;
    for (std::size_t j = 0; j < table.header.size(); ++j) {
        if (j) out += ',';
        append_field(out, table.header[j]);
    }
    out += '\n';
    for (const auto& row : table.rows) {
        for (std::size_t j = 0; j < row.size(); ++j) {
            if (j) out += ',';
            append_field(out, row[j]);
        }
        out += '\n';
    }
    return out;
}

void write_file(const std::string& path, const Table& table) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    require(out.good(), ErrorCode::IoError, "cannot write file: " + path);
    out << format(table);
    require(out.good(), ErrorCode::IoError, "write failed: " + path);
}

}  // namespace fairaudit::csv
