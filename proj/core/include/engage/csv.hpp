#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace engage::csv {

/// Whole-file read; throws IoError when the file cannot be opened.
std::string read_file(const std::filesystem::path& path);
/// Creates parent directories; throws IoError on failure.
void write_file(const std::filesystem::path& path, std::string_view content);

std::vector<std::string_view> split(std::string_view line, char sep = ',');
std::string_view trim(std::string_view s);

/// Iterates lines of a buffer, tracking the 1-based line number. Strips a trailing '\r'.
class LineReader {
public:
    explicit LineReader(std::string_view text) : text_(text) {}
    bool next(std::string_view& line);
    std::size_t line_number() const noexcept { return line_; }

private:
    std::string_view text_;
    std::size_t pos_ = 0;
    std::size_t line_ = 0;
};

/// Strict numeric field parsing; throws ParseError naming file and line.
double parse_double(std::string_view field, const std::string& file, std::size_t line);
long long parse_int(std::string_view field, const std::string& file, std::size_t line);

/// Shortest representation that parses back to the identical double.
std::string format_double(double v);
void append_double(std::string& out, double v);

/// Ensures the header row matches exactly.
void expect_header(std::string_view actual, std::string_view expected, const std::string& file);

}  // namespace engage::csv
