#include "engage/csv.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "engage/errors.hpp"

namespace engage::csv {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return std::move(ss).str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::error_code ec;
    if (path.has_parent_path()) {
        std::filesystem::create_directories(path.parent_path(), ec);
        if (ec) throw IoError("cannot create directory " + path.parent_path().string() + ": " + ec.message());
    }
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::string_view> split(std::string_view line, char sep) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(sep, start);
        if (pos == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, pos - start));
        start = pos + 1;
    }
}

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

bool LineReader::next(std::string_view& line) {
    if (pos_ >= text_.size()) return false;
    auto end = text_.find('\n', pos_);
    if (end == std::string_view::npos) end = text_.size();
    line = text_.substr(pos_, end - pos_);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    pos_ = end + 1;
    ++line_;
    return true;
}

double parse_double(std::string_view field, const std::string& file, std::size_t line) {
    field = trim(field);
    double v = 0.0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto r = std::from_chars(first, last, v);
    if (field.empty() || r.ec != std::errc{} || r.ptr != last) {
        throw ParseError(file, line, "expected a number, got '" + std::string(field) + "'");
    }
    if (!std::isfinite(v)) throw ParseError(file, line, "non-finite value '" + std::string(field) + "'");
    return v;
}

long long parse_int(std::string_view field, const std::string& file, std::size_t line) {
    field = trim(field);
    long long v = 0;
    const auto* first = field.data();
    const auto* last = field.data() + field.size();
    if (!field.empty() && *first == '+') ++first;
    auto r = std::from_chars(first, last, v);
    if (field.empty() || r.ec != std::errc{} || r.ptr != last) {
        throw ParseError(file, line, "expected an integer, got '" + std::string(field) + "'");
    }
    return v;
}

void append_double(std::string& out, double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    out.append(buf, r.ptr);
}

std::string format_double(double v) {
    std::string s;
    append_double(s, v);
    return s;
}

void expect_header(std::string_view actual, std::string_view expected, const std::string& file) {
    if (trim(actual) != expected) {
        throw ParseError(file, 1, "unexpected header '" + std::string(actual) + "', expected '" +
                                      std::string(expected) + "'");
    }
}

}  // namespace engage::csv
