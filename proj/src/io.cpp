#include "modeshare/io.hpp"

#include "modeshare/error.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

namespace modeshare::io {

CsvTable::CsvTable(std::vector<std::string> header, std::vector<CsvRow> rows)
    : header_(std::move(header)), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < header_.size(); ++i) {
        index_.emplace(header_[i], i);
    }
}

std::size_t CsvTable::require(std::string_view column) const {
    auto pos = find(column);
    if (!pos) {
        throw SchemaError(std::string(column), "missing required column '" + std::string(column) + "'");
    }
    return *pos;
}

std::optional<std::size_t> CsvTable::find(std::string_view column) const {
    auto it = index_.find(std::string(column));
    if (it == index_.end()) {
        return std::nullopt;
    }
    return it->second;
}

std::string_view trim(std::string_view s) {
    const char* ws = " \t\r\n";
    auto b = s.find_first_not_of(ws);
    if (b == std::string_view::npos) {
        return {};
    }
    auto e = s.find_last_not_of(ws);
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_csv_line(std::string_view line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cur.push_back('"');
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cur.push_back(c);
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else if (c != '\r') {
            cur.push_back(c);
        }
    }
    out.push_back(std::move(cur));
    return out;
}

CsvTable parse_csv(std::string_view text) {
    std::vector<std::string> header;
    std::vector<CsvRow> rows;
    bool have_header = false;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos <= text.size()) {
        auto nl = text.find('\n', pos);
        auto line = text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        ++line_no;
        pos = nl == std::string_view::npos ? text.size() + 1 : nl + 1;

        auto t = trim(line);
        if (t.empty() || t.front() == '#') {
            continue;
        }
        auto fields = split_csv_line(line);
        for (auto& f : fields) {
            f = std::string(trim(f));
        }
        if (!have_header) {
            // tolerate a UTF-8 byte order mark
            if (!fields.empty() && fields[0].rfind("\xEF\xBB\xBF", 0) == 0) {
                fields[0].erase(0, 3);
            }
            header = std::move(fields);
            have_header = true;
            continue;
        }
        if (fields.size() != header.size()) {
            throw RowError(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                                        std::to_string(fields.size()));
        }
        rows.push_back({line_no, std::move(fields)});
    }
    if (!have_header) {
        throw SchemaError("", "empty table: no header line");
    }
    return CsvTable(std::move(header), std::move(rows));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw Error("cannot open " + path.string());
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

CsvTable read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_text(path));
    } catch (const RowError& e) {
        throw RowError(e.line(), path.string() + ": " + e.what());
    }
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
        return std::string(field);
    }
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') {
            out += "\"\"";
        } else {
            out.push_back(c);
        }
    }
    out.push_back('"');
    return out;
}

std::string csv_join(const std::vector<std::string>& fields) {
    std::string out;
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) {
            out.push_back(',');
        }
        out += csv_escape(fields[i]);
    }
    return out;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

std::optional<double> parse_scaled(std::string_view s, int exp10) {
    s = trim(s);
    if (!parse_double(s)) {
        return std::nullopt;
    }
    const auto e = s.find_first_of("eE");
    std::string text(s.substr(0, e));
    long long exponent = exp10;
    if (e != std::string_view::npos) {
        const auto given = parse_int(s.substr(e + 1));
        if (!given) {
            return std::nullopt;
        }
        exponent += *given;
    }
    text += "e" + std::to_string(exponent);
    return parse_double(text);
}

std::string format_scaled(double x, int exp10) {
    if (x == 0.0 || !std::isfinite(x)) {
        return format_double(x);
    }
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x, std::chars_format::scientific);
    if (ec != std::errc()) {
        throw Error("format_scaled: conversion failed");
    }
    const std::string_view sci(buf, static_cast<std::size_t>(ptr - buf));
    const auto e = sci.find('e');
    std::string_view mant = sci.substr(0, e);
    std::string out;
    if (mant.front() == '-') {
        out.push_back('-');
        mant.remove_prefix(1);
    }
    std::string digits;
    for (char c : mant) {
        if (c != '.') {
            digits.push_back(c);
        }
    }
    const long long point = *parse_int(sci.substr(e + 1)) + exp10;  // digits[0] sits at 10^point
    const auto len = static_cast<long long>(digits.size());
    if (point >= len - 1) {
        out += digits + std::string(static_cast<std::size_t>(point - (len - 1)), '0');
    } else if (point >= 0) {
        out += digits.substr(0, static_cast<std::size_t>(point + 1)) + "." +
               digits.substr(static_cast<std::size_t>(point + 1));
    } else {
        out += "0." + std::string(static_cast<std::size_t>(-point - 1), '0') + digits;
    }
    return out;
}

std::optional<long long> parse_int(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    long long v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        return std::nullopt;
    }
    return v;
}

std::string format_double(double x) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), x);
    if (ec != std::errc()) {
        throw Error("format_double: conversion failed");
    }
    return std::string(buf, ptr);
}

void write_atomic(const std::filesystem::path& path, std::string_view contents) {
    namespace fs = std::filesystem;
    if (path.has_parent_path()) {
        fs::create_directories(path.parent_path());
    }
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) {
            throw Error("cannot write " + tmp.string());
        }
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw Error("write failed for " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) {
        fs::remove(tmp, ec);
        throw Error("cannot rename into " + path.string());
    }
}

}  // namespace modeshare::io
