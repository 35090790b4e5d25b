#include "engage/timeutil.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "engage/errors.hpp"

namespace engage {

namespace {
constexpr double kDay = 86400.0;

long long floor_days(double local_seconds) { return static_cast<long long>(std::floor(local_seconds / kDay)); }
}  // namespace

Date local_date(double utc_seconds, TimeZone tz) {
    const auto days = floor_days(utc_seconds + tz.offset_seconds());
    return Date{std::chrono::sys_days{std::chrono::days{days}}};
}

double local_seconds_of_day(double utc_seconds, TimeZone tz) {
    const double local = utc_seconds + tz.offset_seconds();
    return local - static_cast<double>(floor_days(local)) * kDay;
}

double utc_from_local(Date date, double local_seconds_of_day, TimeZone tz) {
    const auto days = std::chrono::sys_days{date}.time_since_epoch().count();
    return static_cast<double>(days) * kDay + local_seconds_of_day - tz.offset_seconds();
}

std::string format_date(Date d) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%04d-%02u-%02u", static_cast<int>(d.year()), static_cast<unsigned>(d.month()),
                  static_cast<unsigned>(d.day()));
    return buf;
}

Date parse_date(std::string_view s) {
    int y = 0;
    unsigned m = 0, d = 0;
    auto bad = [&] { return ValidationError("invalid date '" + std::string(s) + "', expected YYYY-MM-DD"); };
    if (s.size() != 10 || s[4] != '-' || s[7] != '-') throw bad();
    if (std::from_chars(s.data(), s.data() + 4, y).ec != std::errc{}) throw bad();
    if (std::from_chars(s.data() + 5, s.data() + 7, m).ec != std::errc{}) throw bad();
    if (std::from_chars(s.data() + 8, s.data() + 10, d).ec != std::errc{}) throw bad();
    Date date{std::chrono::year{y}, std::chrono::month{m}, std::chrono::day{d}};
    if (!date.ok()) throw bad();
    return date;
}

std::optional<double> parse_clock(std::string_view s) {
    int parts[3] = {0, 0, 0};
    int n = 0;
    const char* p = s.data();
    const char* end = s.data() + s.size();
    while (p < end && n < 3) {
        auto r = std::from_chars(p, end, parts[n]);
        if (r.ec != std::errc{}) return std::nullopt;
        ++n;
        p = r.ptr;
        if (p < end) {
            if (*p != ':') return std::nullopt;
            ++p;
        }
    }
    if (p != end || n < 2) return std::nullopt;
    if (parts[0] < 0 || parts[0] > 24 || parts[1] < 0 || parts[1] > 59 || parts[2] < 0 || parts[2] > 59) {
        return std::nullopt;
    }
    return parts[0] * 3600.0 + parts[1] * 60.0 + parts[2];
}

std::string format_clock(double seconds_of_day) {
    const long long s = std::llround(seconds_of_day);
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02lld:%02lld:%02lld", s / 3600, (s / 60) % 60, s % 60);
    return buf;
}

}  // namespace engage
